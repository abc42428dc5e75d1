//! Acceptance gate: the nine headline checks of the laboratory, run in
//! order, one PASS/FAIL line each (with the measured value against its
//! threshold), failing at the end if any check failed.
//!
//! Settings are pinned; expect a couple of minutes of total runtime on one
//! core. Everything here is seeded, so the printed numbers are exactly
//! reproducible.

// Reference constants are written at the full precision their generators
// reported.
#![allow(clippy::excessive_precision)]

use std::sync::OnceLock;

use sdelab::drift::{
    eval_h, eval_mu_s, make_drift, seminorm_fourier_side, DriftSpec, FractionalDriftParams,
};
use sdelab::experiments::{
    estimate_coupling_distance, estimate_euler_rate, kappa_mc, kappa_quadrature,
    occupation_mismatch, transform_consistency, RateFit, DEFAULT_STEPS_PER_UNIT,
};
use sdelab::noise::{make_tilde_grid, sample_coupled, RngStream, TimeGrid};
use sdelab::transform::build_transform;
use sdelab::{DriftKind, ExperimentConfig};

const S: f64 = 0.75;
const ABS_TOL: f64 = 1e-6;

fn mu_s_kind() -> DriftKind {
    DriftKind::MuS(FractionalDriftParams::new(S).unwrap())
}

fn mu_s_spec() -> &'static DriftSpec {
    static SPEC: OnceLock<DriftSpec> = OnceLock::new();
    SPEC.get_or_init(|| make_drift(mu_s_kind()).unwrap())
}

fn config(
    drift: DriftKind,
    n_list: Vec<usize>,
    fine_steps: usize,
    reps: usize,
) -> ExperimentConfig {
    ExperimentConfig {
        drift,
        x0: 0.0,
        p: 2.0,
        n_list,
        fine_steps,
        reps,
        seed: 42,
        out: None,
    }
}

fn fitted(fit: &RateFit) -> (f64, f64) {
    match fit {
        RateFit::Fitted {
            slope,
            slope_stderr,
            ..
        } => (*slope, *slope_stderr),
        RateFit::Exact => (f64::NAN, f64::NAN),
    }
}

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn check(&mut self, idx: usize, pass: bool, detail: String) {
        let line = format!(
            "criterion {idx}: {} — {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        println!("{line}");
        if !pass {
            self.failures.push(line);
        }
    }
}

/// Independent coarse oracle for the kappa double integral: 10^6 midpoint
/// cells tiling the triangle 0 < s < t < 1 row by row.
fn kappa_riemann_oracle() -> f64 {
    let n = 1000usize;
    let mut total = 0.0;
    for i in 0..n {
        let s = (i as f64 + 0.5) / n as f64;
        let ht = (1.0 - s) / n as f64;
        let mut row = 0.0;
        for j in 0..n {
            let t = s + (j as f64 + 0.5) * ht;
            row += (-(t - s) / 2.0).exp() * (1.0 - (-s * (1.0 - t)).exp());
        }
        total += row * ht;
    }
    4.0 * total / n as f64
}

#[test]
fn acceptance_criteria() {
    let mut gate = Gate {
        failures: Vec::new(),
    };

    // 1. Strong Euler rate for the rough drift: slope in [-1.025, -0.725]
    //    with stderr < 0.05 at the pinned resolution ladder.
    {
        let c = config(
            mu_s_kind(),
            vec![16, 32, 64, 128, 256, 512, 1024],
            1 << 14,
            10_000,
        );
        let series = estimate_euler_rate(&c, 0).unwrap();
        let (slope, stderr) = fitted(&series.fit);
        let pass = (-1.025..=-0.725).contains(&slope) && stderr < 0.05;
        gate.check(
            1,
            pass,
            format!(
                "euler strong rate slope {slope:.4} ± {stderr:.4} (need slope in [-1.025, -0.725], stderr < 0.05)"
            ),
        );
    }

    // 2. Coupling-distance decay: positive distances, slope in
    //    [-1.05, -0.72], fooling bound exactly half the distance.
    {
        let c = config(mu_s_kind(), vec![8, 16, 32, 64, 128, 256], 1 << 12, 10_000);
        let series = estimate_coupling_distance(&c, &make_tilde_grid, 0).unwrap();
        let (slope, stderr) = fitted(&series.fit);
        let positive = series.entries.iter().all(|e| e.error > 0.0);
        let half = series
            .entries
            .iter()
            .zip(&series.fooling_bounds)
            .all(|(e, fb)| (2.0 * fb).to_bits() == e.error.to_bits());
        let pass = positive && half && (-1.05..=-0.72).contains(&slope);
        gate.check(
            2,
            pass,
            format!(
                "coupling slope {slope:.4} ± {stderr:.4} (need [-1.05, -0.72]), distances positive: {positive}, fooling = distance/2 exactly: {half}"
            ),
        );
    }

    // 3. Degeneracies are exact, not statistical: zero drift kills both the
    //    Euler error and the coupling distance; constant drift kills the
    //    Euler error.
    {
        let zero_rate =
            estimate_euler_rate(&config(DriftKind::Zero, vec![4, 8, 16], 256, 200), 0).unwrap();
        let const_rate = estimate_euler_rate(
            &config(DriftKind::Constant(-0.7), vec![4, 8, 16], 256, 200),
            0,
        )
        .unwrap();
        let zero_couple = estimate_coupling_distance(
            &config(DriftKind::Zero, vec![2, 4, 8], 128, 200),
            &make_tilde_grid,
            0,
        )
        .unwrap();
        let all_zero = |errs: &[f64]| errs.iter().all(|&e| e == 0.0);
        let ze = all_zero(
            &zero_rate
                .entries
                .iter()
                .map(|e| e.error)
                .collect::<Vec<_>>(),
        ) && zero_rate.fit == RateFit::Exact;
        let ce = all_zero(
            &const_rate
                .entries
                .iter()
                .map(|e| e.error)
                .collect::<Vec<_>>(),
        ) && const_rate.fit == RateFit::Exact;
        let zc = all_zero(
            &zero_couple
                .entries
                .iter()
                .map(|e| e.error)
                .collect::<Vec<_>>(),
        ) && zero_couple.fit == RateFit::Exact;
        gate.check(
            3,
            ze && ce && zc,
            format!(
                "zero-drift euler error == 0: {ze}, constant-drift euler error == 0: {ce}, zero-drift coupling distance == 0: {zc} (all exact)"
            ),
        );
    }

    // 4. Kappa cross-validation: quadrature positive, stable to 1e-8
    //    against its pinned value, agreeing with a 10^6-cell Riemann oracle
    //    to 4 significant digits and with Monte Carlo within 3 stderr.
    {
        let quad = kappa_quadrature();
        let pinned = 0.141_470_499_066_782_513_24;
        let riemann = kappa_riemann_oracle();
        let report = kappa_mc(1.0, 100_000, 1 << 12, RngStream::new(42, 3 << 48), 0).unwrap();
        let quad_ok = quad > 0.0 && (quad - pinned).abs() <= 1e-8;
        let riemann_ok = (quad - riemann).abs() <= 5e-4 * quad.abs();
        let mc_gap = (report.mc_value - quad).abs();
        let mc_ok = mc_gap <= 3.0 * report.mc_stderr;
        gate.check(
            4,
            quad_ok && riemann_ok && mc_ok,
            format!(
                "kappa^2 quadrature {quad:.10} (> 0, within 1e-8 of pinned: {quad_ok}); riemann oracle {riemann:.10} agrees to 4 digits: {riemann_ok}; mc {:.6} ± {:.6}, |gap| = {:.2} stderr (need <= 3)",
                report.mc_value,
                report.mc_stderr,
                mc_gap / report.mc_stderr
            ),
        );
    }

    // 5. Occupation-mismatch cubic scaling: fitted slope >= 2.7 over the
    //    pinned window ladder.
    {
        let deltas = [1.0 / 128.0, 1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0];
        let series = occupation_mismatch(
            mu_s_spec(),
            0.0,
            0.0,
            &deltas,
            100_000,
            RngStream::new(42, 4 << 48),
            DEFAULT_STEPS_PER_UNIT,
            0,
        )
        .unwrap();
        let (slope, stderr) = fitted(&series.fit);
        gate.check(
            5,
            slope >= 2.7,
            format!("occupation second-moment slope {slope:.4} ± {stderr:.4} (need >= 2.7)"),
        );
    }

    // 6. Drift invariants: quadratic decay bound on |x| in [1, 50],
    //    evenness within 2 * abs_tol, and the Fourier-side seminorm of h
    //    converging in the cutoff and staying <= 2.
    {
        let params = FractionalDriftParams::new(S).unwrap();
        let mut max_decay_excess = f64::NEG_INFINITY;
        let mut max_even_gap = 0.0f64;
        let mut x = 1.0;
        while x <= 50.0 {
            let v = eval_mu_s(&params, x).unwrap();
            let bound = 4.0 * (1.5 + S) / (x * x);
            max_decay_excess = max_decay_excess.max(v.abs() - bound - ABS_TOL);
            let w = eval_mu_s(&params, -x).unwrap();
            max_even_gap = max_even_gap.max((v - w).abs());
            x += 0.5;
        }
        let decay_ok = max_decay_excess <= 0.0;
        let even_ok = max_even_gap <= 2.0 * ABS_TOL;
        let h = |z: f64| eval_h(S, z).unwrap();
        let (f25, f50, f100) = (
            seminorm_fourier_side(S, &h, 25.0).unwrap(),
            seminorm_fourier_side(S, &h, 50.0).unwrap(),
            seminorm_fourier_side(S, &h, 100.0).unwrap(),
        );
        let fourier_ok = f25 < f50 && f50 < f100 && (f100 - f50) < (f50 - f25) && f100 <= 2.0;
        gate.check(
            6,
            decay_ok && even_ok && fourier_ok,
            format!(
                "decay excess {max_decay_excess:.2e} (need <= 0), evenness gap {max_even_gap:.2e} (need <= 2e-6), fourier-side {f25:.4} -> {f50:.4} -> {f100:.4} increasing with shrinking increments and <= 2: {fourier_ok}"
            ),
        );
    }

    // 7. Transform suite: derivative bounds, inverse round-trip, two-route
    //    consistency under two grid doublings, indicator closed form.
    {
        let mu = mu_s_spec();
        let table = build_transform(mu, 8.0, 1e-4).unwrap();
        let l1 = mu.l1_norm.unwrap();
        let low = (-2.0 * l1).exp();
        let high = (2.0 * l1).exp();
        let deriv_ok = table.c1() >= low * (1.0 - 1e-6) && table.c2() <= high * (1.0 + 1e-6);
        let mut max_round = 0.0f64;
        let mut x = -8.0;
        while x <= 8.0 {
            let back = table.eval_ginv(table.eval_g(x));
            max_round = max_round.max((back - x).abs());
            x += 0.37;
        }
        let round_ok = max_round <= 1e-10;
        let consistency =
            transform_consistency(&config(mu_s_kind(), vec![1], 1 << 12, 1_000), 2, 0).unwrap();
        let indicator = make_drift(DriftKind::Indicator01).unwrap();
        let ind_table = build_transform(&indicator, 4.0, 1e-4).unwrap();
        let g1 = ind_table.eval_g(1.0);
        let g1_exact = (1.0 - (-2.0f64).exp()) / 2.0;
        let closed_ok = (g1 - g1_exact).abs() <= 1e-6;
        gate.check(
            7,
            deriv_ok && round_ok && consistency.decreasing && closed_ok,
            format!(
                "G' in [{:.4}, {:.4}] within exp(±2||mu||_1) bounds: {deriv_ok}; max round-trip {max_round:.2e} (need <= 1e-10); consistency means {} decreasing: {}; indicator G(1) off by {:.2e} (need <= 1e-6)",
                table.c1(),
                table.c2(),
                consistency
                    .entries
                    .iter()
                    .map(|e| format!("{:.3e}", e.mean_abs_diff))
                    .collect::<Vec<_>>()
                    .join(" -> "),
                consistency.decreasing,
                (g1 - g1_exact).abs()
            ),
        );
    }

    // 8. Coupling structure: bitwise agreement at the coarse nodes on every
    //    sampled pair, and Cov(w_1/2, w~_1/2) = 1/4 for pi = {1} within 4
    //    standard errors at 10^5 replications.
    {
        let mut bitwise_ok = true;
        let mut rng = RngStream::new(42, 8 << 48).rng();
        for n in [1usize, 2, 4, 8] {
            let pi = make_tilde_grid(n).unwrap();
            let fine = TimeGrid::uniform(64 * n).unwrap();
            for _ in 0..50 {
                let pair = sample_coupled(&pi, &fine, &mut rng).unwrap();
                for &i in &pair.coarse_indices {
                    if pair.w[i].to_bits() != pair.w_tilde[i].to_bits() {
                        bitwise_ok = false;
                    }
                }
            }
        }
        let reps = 100_000usize;
        let coarse = TimeGrid::uniform(1).unwrap();
        let fine = TimeGrid::uniform(2).unwrap();
        let mut rng = RngStream::new(42, 9 << 48).rng();
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        for _ in 0..reps {
            let pair = sample_coupled(&coarse, &fine, &mut rng).unwrap();
            let prod = pair.w[1] * pair.w_tilde[1];
            s1 += prod;
            s2 += prod * prod;
        }
        let mean = s1 / reps as f64;
        let var = (s2 / reps as f64 - mean * mean).max(0.0);
        let se = (var / reps as f64).sqrt();
        let cov_gap = (mean - 0.25).abs();
        let cov_ok = cov_gap <= 4.0 * se;
        gate.check(
            8,
            bitwise_ok && cov_ok,
            format!(
                "bitwise agreement at pi points across sampled pairs: {bitwise_ok}; Cov(w_.5, w~_.5) = {mean:.5} vs 0.25, |gap| = {:.2} stderr (need <= 4)",
                cov_gap / se
            ),
        );
    }

    // 9. Determinism: the same config run with 1 and 8 workers serializes
    //    to byte-identical reports, for both the rate and the coupling
    //    drivers.
    {
        let rc = config(mu_s_kind(), vec![4, 8, 16], 256, 200);
        let r1 = serde_json::to_string(&estimate_euler_rate(&rc, 1).unwrap()).unwrap();
        let r8 = serde_json::to_string(&estimate_euler_rate(&rc, 8).unwrap()).unwrap();
        let cc = config(mu_s_kind(), vec![2, 4, 8], 128, 200);
        let c1 =
            serde_json::to_string(&estimate_coupling_distance(&cc, &make_tilde_grid, 1).unwrap())
                .unwrap();
        let c8 =
            serde_json::to_string(&estimate_coupling_distance(&cc, &make_tilde_grid, 8).unwrap())
                .unwrap();
        let rate_same = r1 == r8;
        let couple_same = c1 == c8;
        gate.check(
            9,
            rate_same && couple_same,
            format!(
                "serialized reports byte-identical across 1 vs 8 workers — rate: {rate_same}, coupling: {couple_same}"
            ),
        );
    }

    assert!(
        gate.failures.is_empty(),
        "{} acceptance criterion(s) failed:\n{}",
        gate.failures.len(),
        gate.failures.join("\n")
    );
}
