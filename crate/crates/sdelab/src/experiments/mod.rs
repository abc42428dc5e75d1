//! Monte Carlo experiment orchestration.
//!
//! Five experiments, all driven by one [`ExperimentConfig`]:
//!
//! * [`estimate_euler_rate`] — strong error of the coarse Euler scheme
//!   against a shared-noise fine reference, fitted in log-log (the upper
//!   rate, target slope `-(1+s)/2`);
//! * [`estimate_coupling_distance`] — distance between the two solutions
//!   driven by a coupled noise pair, whose half is a lower bound on the
//!   error of *any* method reading the noise only at the coarse nodes (the
//!   fooling bound, target slope `-(1+s)/2` up to a log factor);
//! * [`kappa_quadrature`] / [`kappa_mc`] — the coupling's Fourier-side
//!   fingerprint, computed twice (deterministic quadrature vs Monte Carlo)
//!   and cross-checked;
//! * [`occupation_mismatch`] — the cubic scaling of the time the solution
//!   and its driftless proxy spend on opposite sides of a level;
//! * [`transform_consistency`] — agreement of the additive route with the
//!   transformed multiplicative route under grid refinement.
//!
//! # Determinism contract
//!
//! Replication `r` of each experiment draws from
//! `RngStream::new(seed, NAMESPACE + r)` with a per-experiment namespace, so
//! results do not depend on scheduling; parallel map results land in a
//! replication-indexed vector and are reduced sequentially in index order.
//! Identical configs therefore produce bitwise-identical reports at any
//! worker count. (Wall-clock time is deliberately *not* part of any report
//! value for the same reason.)

mod coupling;
mod fit;
mod kappa;
mod occupation;
mod rate;
mod transform_check;

pub use coupling::{estimate_coupling_distance, CouplingSeries, GridBuilder};
pub use fit::{fit_rate, FitResult};
pub use kappa::{kappa_mc, kappa_quadrature, KappaReport};
pub use occupation::{
    occupation_mismatch, OccupationEntry, OccupationSeries, DEFAULT_STEPS_PER_UNIT,
};
pub use rate::{estimate_euler_rate, RateSeries};
pub use transform_check::{transform_consistency, TransformCheckEntry, TransformCheckSeries};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drift::{DriftError, DriftKind};
use crate::noise::NoiseError;
use crate::solver::SolverError;
use crate::transform::TransformError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{aborted} of {reps} replications aborted (> 1% threshold)")]
    TooManyAborts { aborted: usize, reps: usize },
    #[error("rate fit rejected: {0}")]
    FitRejected(String),
}

/// Replication-stream namespaces: replication `r` of an experiment uses
/// stream id `NAMESPACE + r`, so no two experiments (or replications) under
/// one seed ever share a stream.
pub(crate) const STREAM_RATE: u64 = 1 << 48;
pub(crate) const STREAM_COUPLE: u64 = 2 << 48;
pub(crate) const STREAM_KAPPA: u64 = 3 << 48;
pub(crate) const STREAM_OCCUPATION: u64 = 4 << 48;
pub(crate) const STREAM_TRANSFORM_CHECK: u64 = 5 << 48;

/// Shared experiment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Drift under study.
    pub drift: DriftKind,
    /// Initial value (|x0| <= 8 so the drift cache window always covers
    /// x0 plus 8 noise standard deviations).
    pub x0: f64,
    /// Error exponent for the Euler-rate experiment (>= 1).
    pub p: f64,
    /// Coarse resolutions, strictly increasing.
    pub n_list: Vec<usize>,
    /// Steps of the fine reference grid (>= 16 * max n).
    pub fine_steps: usize,
    /// Monte Carlo replications (>= 100).
    pub reps: usize,
    /// Master seed; combined with per-replication stream ids.
    pub seed: u64,
    /// Report base path, if any (consumed by the CLI layer).
    #[serde(default)]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::InvalidConfig(msg));
        if self.n_list.is_empty() {
            return bad("n_list must not be empty".into());
        }
        if self.n_list[0] == 0 {
            return bad("n values must be positive".into());
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!(
                "n_list must be strictly increasing: {:?}",
                self.n_list
            ));
        }
        let max_n = *self.n_list.last().unwrap();
        if self.fine_steps < 16 * max_n {
            return bad(format!(
                "fine_steps = {} must be at least 16 * max(n_list) = {}",
                self.fine_steps,
                16 * max_n
            ));
        }
        if self.reps < 100 {
            return bad(format!("reps = {} must be at least 100", self.reps));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return bad(format!("p = {} must be a finite real >= 1", self.p));
        }
        if !(self.x0.is_finite() && self.x0.abs() <= 8.0) {
            return bad(format!("x0 = {} must be finite with |x0| <= 8", self.x0));
        }
        Ok(())
    }
}

/// One resolution's error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub n: u64,
    pub error: f64,
    pub stderr: f64,
}

/// Outcome of the log-log slope fit. `Exact` is the sentinel for degenerate
/// runs whose errors are identically zero (zero or constant drift), where no
/// regression is meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFit {
    Exact,
    Fitted {
        slope: f64,
        slope_stderr: f64,
        intercept: f64,
    },
}

/// Fit entries, or return the exact sentinel when every error vanishes.
pub(crate) fn fit_or_exact(points: &[(f64, f64, f64)]) -> Result<RateFit, ExperimentError> {
    if points.iter().all(|&(_, e, _)| e == 0.0) {
        return Ok(RateFit::Exact);
    }
    let f = fit_rate(points)?;
    Ok(RateFit::Fitted {
        slope: f.slope,
        slope_stderr: f.slope_stderr,
        intercept: f.intercept,
    })
}

/// `|d|^p` with a fast path for the default exponent.
#[inline]
pub(crate) fn pow_abs(d: f64, p: f64) -> f64 {
    if p == 2.0 {
        d * d
    } else {
        d.abs().powf(p)
    }
}

/// Turns a sample mean (and its standard error) of `|D|^p` into an estimate
/// of `E[|D|^p]^{1/p}` with a delta-method standard error.
pub(crate) fn moment_root(mean: f64, se_mean: f64, p: f64) -> (f64, f64) {
    if mean <= 0.0 {
        return (0.0, 0.0);
    }
    let root = if p == 2.0 {
        mean.sqrt()
    } else {
        mean.powf(1.0 / p)
    };
    // d(root)/d(mean) = root / (p * mean)
    (root, se_mean * root / (p * mean))
}

/// Sample mean and standard error of the mean, in fixed iteration order.
pub(crate) fn mean_and_se(samples: impl Iterator<Item = f64>, count: usize) -> (f64, f64) {
    let mut s1 = 0.0f64;
    let mut s2 = 0.0f64;
    for z in samples {
        s1 += z;
        s2 += z * z;
    }
    let n = count as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

/// Runs `f` inside a dedicated rayon pool with the requested worker count
/// (0 = library default). Every experiment funnels its parallelism through
/// here so the determinism contract has a single owner.
pub(crate) fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("rayon pool")
        .install(f)
}

/// Enforces the 1% abort budget and returns the number of kept replications.
pub(crate) fn check_aborts(aborted: usize, reps: usize) -> Result<usize, ExperimentError> {
    if aborted * 100 > reps {
        return Err(ExperimentError::TooManyAborts { aborted, reps });
    }
    Ok(reps - aborted)
}
