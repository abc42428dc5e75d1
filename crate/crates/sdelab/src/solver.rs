//! Continuous-time Euler schemes.
//!
//! The coarse scheme freezes the drift at the last coarse node but adds the
//! Brownian increments exactly at every fine time:
//!
//! ```text
//!     X^E_{n,t} = X^E_{n,(i-1)/n} + mu(X^E_{n,(i-1)/n}) (t - (i-1)/n)
//!                 + W_t - W_{(i-1)/n},       t in [(i-1)/n, i/n].
//! ```
//!
//! The "exact" solution is operationalized as the same scheme with the drift
//! refreshed at every fine step (`reference_solution`), on a grid at least
//! 16x finer than any coarse resolution under study — fine enough that its
//! own error is asymptotically negligible at the rates being measured.
//!
//! Every scheme runs through one marching core that tracks the accumulated
//! drift separately from the noise (`x_i = x0 + (drift_acc + w_i)`). Two
//! consequences are load-bearing for the test suite:
//!
//! * a coarse run and a reference run on the same noise perform *identical*
//!   floating-point operations whenever the frozen drift values coincide, so
//!   zero and constant drifts give exactly zero coarse-vs-reference error
//!   (not merely small); and
//! * `euler_additive` with `n` equal to the fine step count *is* the
//!   reference solution, bitwise.

use thiserror::Error;

use crate::drift::DriftSpec;
use crate::noise::{NoiseError, TimeGrid};
use crate::transform::TransformTable;

/// Minimum step count accepted for a reference (stand-in exact) solution.
pub const MIN_REFERENCE_STEPS: usize = 1 << 14;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("grid misalignment: {0}")]
    Misaligned(#[from] NoiseError),
    #[error("noise path has {path} values but the grid has {grid} points")]
    LengthMismatch { path: usize, grid: usize },
    #[error("reference solution needs a uniform grid of >= 2^14 steps, got {steps}")]
    ReferenceTooCoarse { steps: usize },
    #[error("reference solution needs a uniform grid")]
    ReferenceNotUniform,
    #[error("state {value} left the tabulated range at t = {t} (replication aborted)")]
    RangeExcursion { t: f64, value: f64 },
    #[error("y0 = {y0} outside the transform range [{lo}, {hi}]")]
    Y0OutOfRange { y0: f64, lo: f64, hi: f64 },
}

/// Which scheme produced a path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scheme {
    /// Drift frozen at the nodes of the `n`-cell coarse grid.
    EulerCoarse { n: usize },
    /// Drift refreshed at every fine step (reference solution).
    EulerFine,
    /// Euler–Maruyama for the transformed SDE `dY = b(Y) dW`.
    EulerMultiplicative,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::EulerCoarse { n } => write!(f, "euler_coarse({n})"),
            Scheme::EulerFine => write!(f, "euler_fine"),
            Scheme::EulerMultiplicative => write!(f, "euler_multiplicative"),
        }
    }
}

/// A simulated path on a fine grid.
#[derive(Debug, Clone)]
pub struct SdePath {
    pub fine: TimeGrid,
    pub values: Vec<f64>,
    pub x0: f64,
    pub scheme: Scheme,
}

impl SdePath {
    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// The marching core: `x_i = x0 + (acc_i + w_i)` with
/// `acc_i = acc_{i-1} + frozen * dt_i`, the frozen drift re-evaluated at the
/// fine indices listed in `refresh` (sorted, starting at 0). `guard`, when
/// present, aborts the march if `|x|` exceeds it at a refresh point (the
/// tabulated-drift range). Keep this function and [`march_terminal`]
/// arithmetically identical.
pub(crate) fn march_full(
    mu: &DriftSpec,
    x0: f64,
    times: &[f64],
    w: &[f64],
    refresh: &[usize],
    guard: Option<f64>,
) -> Result<Vec<f64>, SolverError> {
    let mut values = Vec::with_capacity(times.len());
    values.push(x0);
    let mut acc = 0.0f64;
    let mut frozen = mu.eval(x0);
    let mut r = 1usize;
    for i in 1..times.len() {
        acc += frozen * (times[i] - times[i - 1]);
        let x = x0 + (acc + w[i]);
        values.push(x);
        if r < refresh.len() && refresh[r] == i {
            if let Some(g) = guard {
                if x.abs() > g {
                    return Err(SolverError::RangeExcursion {
                        t: times[i],
                        value: x,
                    });
                }
            }
            frozen = mu.eval(x);
            r += 1;
        }
    }
    Ok(values)
}

/// Terminal value of [`march_full`] without storing the path (hot path for
/// Monte Carlo loops; must stay arithmetically identical to it).
pub(crate) fn march_terminal(
    mu: &DriftSpec,
    x0: f64,
    times: &[f64],
    w: &[f64],
    refresh: &[usize],
    guard: Option<f64>,
) -> Result<f64, SolverError> {
    let mut acc = 0.0f64;
    let mut frozen = mu.eval(x0);
    let mut r = 1usize;
    let mut x = x0;
    for i in 1..times.len() {
        acc += frozen * (times[i] - times[i - 1]);
        x = x0 + (acc + w[i]);
        if r < refresh.len() && refresh[r] == i {
            if let Some(g) = guard {
                if x.abs() > g {
                    return Err(SolverError::RangeExcursion {
                        t: times[i],
                        value: x,
                    });
                }
            }
            frozen = mu.eval(x);
            r += 1;
        }
    }
    Ok(x)
}

fn check_path_len(fine: &TimeGrid, w: &[f64]) -> Result<(), SolverError> {
    if w.len() != fine.times().len() {
        return Err(SolverError::LengthMismatch {
            path: w.len(),
            grid: fine.times().len(),
        });
    }
    Ok(())
}

/// Range guard for the state: only the tabulated rough drift needs one (its
/// cache treats the far field as zero, which must never be *silently* used
/// as the frozen value).
pub(crate) fn state_guard(mu: &DriftSpec) -> Option<f64> {
    mu.table().map(|t| t.x_max())
}

/// Continuous-time Euler scheme with drift frozen at the nodes of the
/// uniform `n`-cell coarse grid, sampled at every point of `fine` (which
/// must contain all points `i/n` bitwise).
pub fn euler_additive(
    mu: &DriftSpec,
    x0: f64,
    n: usize,
    fine: &TimeGrid,
    w: &[f64],
) -> Result<SdePath, SolverError> {
    check_path_len(fine, w)?;
    let coarse = TimeGrid::uniform_to(fine.horizon(), n)?;
    let refresh = fine.align_indices(&coarse)?;
    let values = march_full(mu, x0, fine.times(), w, &refresh, state_guard(mu))?;
    Ok(SdePath {
        fine: fine.clone(),
        values,
        x0,
        scheme: if n == fine.steps() {
            Scheme::EulerFine
        } else {
            Scheme::EulerCoarse { n }
        },
    })
}

/// The operational stand-in for the exact strong solution: `euler_additive`
/// with the drift refreshed at every step of a uniform grid of at least
/// 2^14 steps.
pub fn reference_solution(
    mu: &DriftSpec,
    x0: f64,
    fine: &TimeGrid,
    w: &[f64],
) -> Result<SdePath, SolverError> {
    let steps = fine.steps();
    if steps < MIN_REFERENCE_STEPS {
        return Err(SolverError::ReferenceTooCoarse { steps });
    }
    let expected = fine.horizon() / steps as f64;
    if (fine.max_step() - expected).abs() > 1e-12 * expected.max(1.0) {
        return Err(SolverError::ReferenceNotUniform);
    }
    euler_additive(mu, x0, steps, fine, w)
}

/// Standard Euler–Maruyama for the transformed SDE `dY = b(Y) dW` on the
/// fine grid. Aborts with a counted range excursion if `Y` leaves the range
/// of `G` over the tabulated window.
pub fn euler_multiplicative(
    table: &TransformTable,
    y0: f64,
    fine: &TimeGrid,
    w: &[f64],
) -> Result<SdePath, SolverError> {
    check_path_len(fine, w)?;
    let (lo, hi) = table.g_range();
    if !(y0 >= lo && y0 <= hi) {
        return Err(SolverError::Y0OutOfRange { y0, lo, hi });
    }
    let times = fine.times();
    let mut values = Vec::with_capacity(times.len());
    values.push(y0);
    let mut y = y0;
    for i in 1..times.len() {
        y += table.eval_b(y) * (w[i] - w[i - 1]);
        if !(y >= lo && y <= hi) {
            return Err(SolverError::RangeExcursion {
                t: times[i],
                value: y,
            });
        }
        values.push(y);
    }
    Ok(SdePath {
        fine: fine.clone(),
        values,
        x0: y0,
        scheme: Scheme::EulerMultiplicative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{make_drift, DriftKind, FractionalDriftParams};
    use crate::noise::{sample_brownian, RngStream};
    use crate::transform::build_transform;

    fn mu_s_spec() -> &'static DriftSpec {
        static SPEC: std::sync::OnceLock<DriftSpec> = std::sync::OnceLock::new();
        SPEC.get_or_init(|| {
            make_drift(DriftKind::MuS(FractionalDriftParams::new(0.75).unwrap())).unwrap()
        })
    }

    #[test]
    fn zero_drift_reproduces_noise_bitwise() {
        let zero = make_drift(DriftKind::Zero).unwrap();
        let fine = TimeGrid::uniform(64).unwrap();
        let w = sample_brownian(&fine, &mut RngStream::new(3, 0).rng());
        let path = euler_additive(&zero, 1.5, 4, &fine, &w).unwrap();
        for (i, v) in path.values.iter().enumerate() {
            assert_eq!(v.to_bits(), (1.5 + w[i]).to_bits(), "index {i}");
        }
        assert_eq!(path.scheme, Scheme::EulerCoarse { n: 4 });
    }

    #[test]
    fn constant_drift_is_integrated_exactly() {
        let c = make_drift(DriftKind::Constant(-0.7)).unwrap();
        let fine = TimeGrid::uniform(48).unwrap();
        let w = sample_brownian(&fine, &mut RngStream::new(4, 0).rng());
        for n in [1usize, 3, 6, 48] {
            let path = euler_additive(&c, 0.25, n, &fine, &w).unwrap();
            let want = 0.25 - 0.7 + w[48];
            assert!(
                (path.terminal() - want).abs() < 1e-12,
                "n = {n}: {} vs {want}",
                path.terminal()
            );
        }
    }

    #[test]
    fn coarse_equals_reference_when_n_is_fine_count() {
        let mu = mu_s_spec();
        let fine = TimeGrid::uniform(MIN_REFERENCE_STEPS).unwrap();
        let w = sample_brownian(&fine, &mut RngStream::new(5, 0).rng());
        let a = euler_additive(mu, 0.0, MIN_REFERENCE_STEPS, &fine, &w).unwrap();
        let r = reference_solution(mu, 0.0, &fine, &w).unwrap();
        assert_eq!(r.scheme, Scheme::EulerFine);
        assert_eq!(a.values.len(), r.values.len());
        for (x, y) in a.values.iter().zip(&r.values) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn terminal_march_matches_full_march_bitwise() {
        let mu = mu_s_spec();
        let fine = TimeGrid::uniform(512).unwrap();
        let w = sample_brownian(&fine, &mut RngStream::new(6, 0).rng());
        let coarse = TimeGrid::uniform(8).unwrap();
        let refresh = fine.align_indices(&coarse).unwrap();
        let full = march_full(mu, 0.3, fine.times(), &w, &refresh, state_guard(mu)).unwrap();
        let term = march_terminal(mu, 0.3, fine.times(), &w, &refresh, state_guard(mu)).unwrap();
        assert_eq!(full.last().unwrap().to_bits(), term.to_bits());
    }

    #[test]
    fn drift_displacement_is_bounded_by_sup_norm() {
        for kind in [DriftKind::Indicator01, DriftKind::Hat] {
            let mu = make_drift(kind).unwrap();
            let fine = TimeGrid::uniform(256).unwrap();
            for stream in 0..20 {
                let w = sample_brownian(&fine, &mut RngStream::new(7, stream).rng());
                let path = euler_additive(&mu, 0.2, 16, &fine, &w).unwrap();
                for (i, v) in path.values.iter().enumerate() {
                    let disp = (v - 0.2 - w[i]).abs();
                    let t = fine.times()[i];
                    assert!(
                        disp <= mu.sup_norm * t + 1e-12,
                        "displacement {disp} at t = {t}"
                    );
                }
            }
        }
        let mu = mu_s_spec();
        let fine = TimeGrid::uniform(256).unwrap();
        let w = sample_brownian(&fine, &mut RngStream::new(8, 0).rng());
        let path = euler_additive(mu, 0.0, 16, &fine, &w).unwrap();
        let disp = (path.terminal() - w[256]).abs();
        assert!(disp <= mu.sup_norm + 1e-12);
    }

    #[test]
    fn indicator_from_far_left_never_feels_the_drift() {
        let mu = make_drift(DriftKind::Indicator01).unwrap();
        let fine = TimeGrid::uniform(64).unwrap();
        // Deterministic noise kept well below the drift support.
        let w: Vec<f64> = fine.times().iter().map(|t| 5.0 * t).collect();
        let path = euler_additive(&mu, -10.0, 4, &fine, &w).unwrap();
        for (i, v) in path.values.iter().enumerate() {
            assert_eq!(v.to_bits(), (-10.0 + w[i]).to_bits());
        }
        // And with genuine Brownian noise whenever it stays below 9.
        let w = sample_brownian(&fine, &mut RngStream::new(9, 1).rng());
        if w.iter().all(|v| *v < 9.0) {
            let path = euler_additive(&mu, -10.0, 4, &fine, &w).unwrap();
            for (i, v) in path.values.iter().enumerate() {
                assert_eq!(v.to_bits(), (-10.0 + w[i]).to_bits());
            }
        }
    }

    #[test]
    fn multiplicative_with_unit_diffusion_shifts_noise() {
        let zero = make_drift(DriftKind::Zero).unwrap();
        let table = build_transform(&zero, 6.0, 1e-3).unwrap();
        let fine = TimeGrid::uniform(1024).unwrap();
        let w = sample_brownian(&fine, &mut RngStream::new(10, 0).rng());
        let y0 = 0.5;
        let path = euler_multiplicative(&table, y0, &fine, &w).unwrap();
        for (i, v) in path.values.iter().enumerate() {
            assert!((v - (y0 + w[i])).abs() < 1e-11, "index {i}");
        }
    }

    #[test]
    fn multiplicative_unit_diffusion_terminal_second_moment() {
        // Itô isometry: E[Y_1^2] = y0^2 + 1 for b = 1.
        let zero = make_drift(DriftKind::Zero).unwrap();
        let table = build_transform(&zero, 8.0, 1e-3).unwrap();
        let fine = TimeGrid::uniform(256).unwrap();
        let y0 = 0.5;
        let mut rng = RngStream::new(11, 0).rng();
        let m = 4000;
        let mut sum2 = 0.0;
        for _ in 0..m {
            let w = sample_brownian(&fine, &mut rng);
            let path = euler_multiplicative(&table, y0, &fine, &w).unwrap();
            sum2 += path.terminal() * path.terminal();
        }
        let est = sum2 / m as f64;
        assert!((est - (y0 * y0 + 1.0)).abs() < 0.11, "E[Y1^2] = {est}");
    }

    #[test]
    fn multiplicative_aborts_on_range_excursion() {
        let ind = make_drift(DriftKind::Indicator01).unwrap();
        let table = build_transform(&ind, 2.0, 1e-3).unwrap();
        let fine = TimeGrid::uniform(16).unwrap();
        // Deterministic plunge far below G(-2).
        let w: Vec<f64> = fine.times().iter().map(|t| -5.0 * t).collect();
        match euler_multiplicative(&table, 0.0, &fine, &w) {
            Err(SolverError::RangeExcursion { .. }) => {}
            other => panic!("expected range excursion, got {other:?}"),
        }
        assert!(matches!(
            euler_multiplicative(&table, 99.0, &fine, &w),
            Err(SolverError::Y0OutOfRange { .. })
        ));
    }

    #[test]
    fn preconditions_are_enforced() {
        let mu = make_drift(DriftKind::Hat).unwrap();
        let fine = TimeGrid::uniform(16).unwrap();
        let w = sample_brownian(&fine, &mut RngStream::new(12, 0).rng());
        // n = 3 does not nest in 16 fine steps.
        assert!(matches!(
            euler_additive(&mu, 0.0, 3, &fine, &w),
            Err(SolverError::Misaligned(_))
        ));
        assert!(matches!(
            euler_additive(&mu, 0.0, 4, &fine, &w[..10]),
            Err(SolverError::LengthMismatch { .. })
        ));
        assert!(matches!(
            reference_solution(&mu, 0.0, &fine, &w),
            Err(SolverError::ReferenceTooCoarse { .. })
        ));
        let tilde = crate::noise::make_tilde_grid(4096).unwrap();
        let wt = vec![0.0; tilde.times().len()];
        assert!(matches!(
            reference_solution(&mu, 0.0, &tilde, &wt),
            Err(SolverError::ReferenceNotUniform)
        ));
    }
}
