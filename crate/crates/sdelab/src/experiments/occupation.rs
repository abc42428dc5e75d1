//! Occupation-time mismatch between the solution and its driftless proxy.
//!
//! Over a short window [0, Δ] the solution X (fine Euler, drift refreshed
//! every step) and the proxy x₀ + W sit on opposite sides of a level ξ for a
//! random amount of time; the second moment of that occupation time scales
//! like Δ³, which is what makes the drift effectively invisible between
//! observation points and powers the lower-bound machinery.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_aborts, fit_or_exact, mean_and_se, with_pool, ExperimentError, RateFit};
use crate::drift::DriftSpec;
use crate::noise::RngStream;
use crate::solver::state_guard;

/// Fine-grid resolution of the occupation integral: steps per unit time.
pub const DEFAULT_STEPS_PER_UNIT: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationEntry {
    pub delta: f64,
    /// Estimate of E[(∫₀^Δ 1{(X_u−ξ)(x₀+W_u−ξ) ≤ 0} du)²].
    pub second_moment: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationSeries {
    pub entries: Vec<OccupationEntry>,
    /// Log-log fit of second moment against Δ (target slope ≈ 3).
    pub fit: RateFit,
    pub aborted: usize,
}

/// Estimates the squared occupation mismatch for each window length in
/// `deltas` (strictly increasing, within (0, 1]), simulating one path per
/// replication out to the largest Δ and reading the running occupation
/// integral off at each window boundary. The time step is
/// `1 / steps_per_unit`; every Δ must be an integer multiple of it.
#[allow(clippy::too_many_arguments)]
pub fn occupation_mismatch(
    mu: &DriftSpec,
    x0: f64,
    xi: f64,
    deltas: &[f64],
    reps: usize,
    stream: RngStream,
    steps_per_unit: usize,
    threads: usize,
) -> Result<OccupationSeries, ExperimentError> {
    let bad = |msg: String| Err(ExperimentError::InvalidConfig(msg));
    if deltas.is_empty() {
        return bad("deltas must not be empty".into());
    }
    if deltas.windows(2).any(|w| w[1] <= w[0]) {
        return bad(format!("deltas must be strictly increasing: {deltas:?}"));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
        return bad(format!("deltas must lie in (0, 1]: {deltas:?}"));
    }
    if reps < 100 {
        return bad(format!("reps = {reps} must be at least 100"));
    }
    if steps_per_unit < 1 << 10 {
        return bad(format!(
            "steps_per_unit = {steps_per_unit} must be at least 1024"
        ));
    }
    let spu = steps_per_unit as f64;
    let mut boundaries = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let k = (d * spu).round();
        if (d * spu - k).abs() > 1e-6 || k < 1.0 {
            return bad(format!(
                "delta = {d} is not an integer multiple of the step 1/{steps_per_unit}"
            ));
        }
        boundaries.push(k as usize);
    }
    let k_last = *boundaries.last().unwrap();
    let dt = 1.0 / spu;
    let sd = dt.sqrt();
    let guard = state_guard(mu);

    let per_rep: Vec<Option<Vec<f64>>> = with_pool(threads, || {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(stream.seed, stream.stream_id + r as u64).rng();
                // Same marching arithmetic as the solver core, with the
                // proxy and the occupation integral carried alongside.
                let mut w = 0.0f64;
                let mut acc = 0.0f64;
                let mut frozen = mu.eval(x0);
                let mut occ = 0.0f64;
                let mut out = Vec::with_capacity(boundaries.len());
                let mut bi = 0usize;
                for k in 1..=k_last {
                    let z: f64 = rng.sample(StandardNormal);
                    w += sd * z;
                    acc += frozen * dt;
                    let x = x0 + (acc + w);
                    if let Some(g) = guard {
                        if x.abs() > g {
                            return None;
                        }
                    }
                    let proxy = x0 + w;
                    if (x - xi) * (proxy - xi) <= 0.0 {
                        occ += dt;
                    }
                    frozen = mu.eval(x);
                    if k == boundaries[bi] {
                        out.push(occ * occ);
                        bi += 1;
                        if bi == boundaries.len() {
                            break;
                        }
                    }
                }
                Some(out)
            })
            .collect()
    });

    let aborted = per_rep.iter().filter(|o| o.is_none()).count();
    let kept = check_aborts(aborted, reps)?;

    let mut entries = Vec::with_capacity(deltas.len());
    for (j, &delta) in deltas.iter().enumerate() {
        let (second_moment, stderr) = mean_and_se(
            per_rep.iter().filter_map(|o| o.as_deref()).map(|zs| zs[j]),
            kept,
        );
        entries.push(OccupationEntry {
            delta,
            second_moment,
            stderr,
        });
    }
    let points: Vec<(f64, f64, f64)> = entries
        .iter()
        .map(|e| (e.delta, e.second_moment, e.stderr))
        .collect();
    let fit = fit_or_exact(&points)?;
    Ok(OccupationSeries {
        entries,
        fit,
        aborted,
    })
}
