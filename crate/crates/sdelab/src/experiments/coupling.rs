//! Coupling distance and the fooling lower bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_aborts, fit_or_exact, mean_and_se, moment_root, with_pool, ExperimentConfig,
    ExperimentError, RateEntry, RateFit, STREAM_COUPLE,
};
use crate::drift::make_drift;
use crate::noise::{sample_coupled, NoiseError, RngStream, TimeGrid};
use crate::solver::{march_terminal, state_guard};

/// Produces the coarse observation grid π for a given resolution `n`.
/// The canonical choice is [`crate::noise::make_tilde_grid`]; tests also use
/// degenerate builders (e.g. π = the fine grid itself).
pub type GridBuilder = dyn Fn(usize) -> Result<TimeGrid, NoiseError> + Sync;

/// Per-resolution coupling distances `E[|X_1 − X̃_1^π|²]^{1/2}`, the
/// half-scaled fooling lower bounds, and the log-log fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSeries {
    pub entries: Vec<RateEntry>,
    /// Lower bound on the error of *any* scheme that reads the noise only at
    /// the π points: exactly half the coupling distance, index-aligned with
    /// `entries`.
    pub fooling_bounds: Vec<f64>,
    pub fit: RateFit,
    pub aborted: usize,
}

/// Estimates the terminal distance between the two fine-Euler solutions
/// driven by a coupled noise pair (agreeing at π, conditionally independent
/// between π points). The exponent is fixed at 2: the fooling bound is an
/// L²-statement. `config.p` is ignored here.
pub fn estimate_coupling_distance(
    config: &ExperimentConfig,
    grid_builder: &GridBuilder,
    threads: usize,
) -> Result<CouplingSeries, ExperimentError> {
    config.validate()?;
    let mu = make_drift(config.drift.clone())?;
    let fine = TimeGrid::uniform(config.fine_steps)?;
    let mut grids = Vec::with_capacity(config.n_list.len());
    for &n in &config.n_list {
        let pi = grid_builder(n)?;
        // Validate nesting up front so a misconfigured fine grid fails once,
        // loudly, instead of aborting every replication.
        fine.align_indices(&pi)?;
        grids.push(pi);
    }
    let every: Vec<usize> = (0..=config.fine_steps).collect();
    let guard = state_guard(&mu);
    let (x0, seed, reps) = (config.x0, config.seed, config.reps);

    let per_rep: Vec<Option<Vec<f64>>> = with_pool(threads, || {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(seed, STREAM_COUPLE + r as u64).rng();
                let mut zs = Vec::with_capacity(grids.len());
                for pi in &grids {
                    let pair = sample_coupled(pi, &fine, &mut rng).ok()?;
                    let x = march_terminal(&mu, x0, fine.times(), &pair.w, &every, guard).ok()?;
                    let xt =
                        march_terminal(&mu, x0, fine.times(), &pair.w_tilde, &every, guard).ok()?;
                    let d = x - xt;
                    zs.push(d * d);
                }
                Some(zs)
            })
            .collect()
    });

    let aborted = per_rep.iter().filter(|o| o.is_none()).count();
    let kept = check_aborts(aborted, reps)?;

    let mut entries = Vec::with_capacity(config.n_list.len());
    for (j, &n) in config.n_list.iter().enumerate() {
        let (mean, se) = mean_and_se(
            per_rep.iter().filter_map(|o| o.as_deref()).map(|zs| zs[j]),
            kept,
        );
        let (error, stderr) = moment_root(mean, se, 2.0);
        entries.push(RateEntry {
            n: n as u64,
            error,
            stderr,
        });
    }
    let fooling_bounds: Vec<f64> = entries.iter().map(|e| 0.5 * e.error).collect();
    let points: Vec<(f64, f64, f64)> = entries
        .iter()
        .map(|e| (e.n as f64, e.error, e.stderr))
        .collect();
    let fit = fit_or_exact(&points)?;
    Ok(CouplingSeries {
        entries,
        fooling_bounds,
        fit,
        aborted,
    })
}
