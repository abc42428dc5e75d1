//! Strong-error rate of the coarse Euler scheme.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_aborts, fit_or_exact, mean_and_se, moment_root, pow_abs, with_pool, ExperimentConfig,
    ExperimentError, RateEntry, RateFit, STREAM_RATE,
};
use crate::drift::make_drift;
use crate::noise::{sample_brownian, RngStream, TimeGrid};
use crate::solver::{march_terminal, state_guard};

/// Per-resolution strong errors `E[|X_1^{ref} − X_1^n|^p]^{1/p}` with the
/// log-log fit and the count of aborted replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub entries: Vec<RateEntry>,
    pub fit: RateFit,
    pub aborted: usize,
}

/// Estimates the strong Euler error at time 1 for every `n` in
/// `config.n_list`, all schemes sharing one fine-grid noise path per
/// replication (the reference refreshes the drift at every fine step, the
/// coarse scheme only at the `i/n` nodes, so the difference is exactly the
/// coarse scheme's deviation from the operational exact solution).
pub fn estimate_euler_rate(
    config: &ExperimentConfig,
    threads: usize,
) -> Result<RateSeries, ExperimentError> {
    config.validate()?;
    let mu = make_drift(config.drift.clone())?;
    let fine = TimeGrid::uniform(config.fine_steps)?;
    let mut schedules = Vec::with_capacity(config.n_list.len());
    for &n in &config.n_list {
        schedules.push(fine.align_indices(&TimeGrid::uniform(n)?)?);
    }
    let ref_schedule: Vec<usize> = (0..=config.fine_steps).collect();
    let guard = state_guard(&mu);
    let (x0, p, seed, reps) = (config.x0, config.p, config.seed, config.reps);

    // One slot per replication, reduced sequentially afterwards.
    let per_rep: Vec<Option<Vec<f64>>> = with_pool(threads, || {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(seed, STREAM_RATE + r as u64).rng();
                let w = sample_brownian(&fine, &mut rng);
                let x_ref = march_terminal(&mu, x0, fine.times(), &w, &ref_schedule, guard).ok()?;
                let mut zs = Vec::with_capacity(schedules.len());
                for sched in &schedules {
                    let x_n = march_terminal(&mu, x0, fine.times(), &w, sched, guard).ok()?;
                    zs.push(pow_abs(x_ref - x_n, p));
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
        let (error, stderr) = moment_root(mean, se, p);
        entries.push(RateEntry {
            n: n as u64,
            error,
            stderr,
        });
    }
    let points: Vec<(f64, f64, f64)> = entries
        .iter()
        .map(|e| (e.n as f64, e.error, e.stderr))
        .collect();
    let fit = fit_or_exact(&points)?;
    Ok(RateSeries {
        entries,
        fit,
        aborted,
    })
}
