//! Two-route consistency: the transformed solution computed directly
//! (multiplicative Euler on dY = b(Y)dW) must converge to the transform of
//! the additive solution (G applied to fine Euler for the original SDE) as
//! the shared grid refines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_aborts, mean_and_se, with_pool, ExperimentConfig, ExperimentError, STREAM_TRANSFORM_CHECK,
};
use crate::drift::make_drift;
use crate::noise::{sample_brownian, RngStream, TimeGrid};
use crate::solver::{euler_multiplicative, march_terminal, state_guard};
use crate::transform::build_transform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformCheckEntry {
    pub fine_steps: u64,
    /// Mean of |G(X₁) − Y₁| over replications at this resolution.
    pub mean_abs_diff: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformCheckSeries {
    pub entries: Vec<TransformCheckEntry>,
    /// Whether the mean differences strictly decrease across the doublings.
    pub decreasing: bool,
    pub aborted: usize,
}

/// Runs both routes on shared noise at `config.fine_steps` cells and at
/// `doublings` successive grid doublings; the mean terminal discrepancy
/// should shrink at each doubling. The drift must be integrable (it is fed
/// through the transform).
pub fn transform_consistency(
    config: &ExperimentConfig,
    doublings: usize,
    threads: usize,
) -> Result<TransformCheckSeries, ExperimentError> {
    config.validate()?;
    if doublings < 1 {
        return Err(ExperimentError::InvalidConfig(
            "need at least one grid doubling to compare".into(),
        ));
    }
    let mu = make_drift(config.drift.clone())?;
    // Window wide enough that excursions beyond it are vanishingly rare from
    // |x0| (8 standard deviations of W_1).
    let table = build_transform(&mu, config.x0.abs() + 8.0, 1e-4)?;
    let y0 = table.eval_g(config.x0);
    let guard = state_guard(&mu);
    let (x0, seed, reps) = (config.x0, config.seed, config.reps);

    let mut grids = Vec::with_capacity(doublings + 1);
    let mut schedules = Vec::with_capacity(doublings + 1);
    for k in 0..=doublings {
        let steps = config.fine_steps << k;
        grids.push(TimeGrid::uniform(steps)?);
        schedules.push((0..=steps).collect::<Vec<usize>>());
    }

    let per_rep: Vec<Option<Vec<f64>>> = with_pool(threads, || {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(seed, STREAM_TRANSFORM_CHECK + r as u64).rng();
                let mut diffs = Vec::with_capacity(grids.len());
                for (grid, sched) in grids.iter().zip(&schedules) {
                    let w = sample_brownian(grid, &mut rng);
                    let x1 = march_terminal(&mu, x0, grid.times(), &w, sched, guard).ok()?;
                    let y1 = euler_multiplicative(&table, y0, grid, &w).ok()?.terminal();
                    diffs.push((table.eval_g(x1) - y1).abs());
                }
                Some(diffs)
            })
            .collect()
    });

    let aborted = per_rep.iter().filter(|o| o.is_none()).count();
    let kept = check_aborts(aborted, reps)?;

    let mut entries = Vec::with_capacity(grids.len());
    for (j, grid) in grids.iter().enumerate() {
        let (mean_abs_diff, stderr) = mean_and_se(
            per_rep.iter().filter_map(|o| o.as_deref()).map(|d| d[j]),
            kept,
        );
        entries.push(TransformCheckEntry {
            fine_steps: grid.steps() as u64,
            mean_abs_diff,
            stderr,
        });
    }
    let decreasing = entries
        .windows(2)
        .all(|p| p[1].mean_abs_diff < p[0].mean_abs_diff);
    Ok(TransformCheckSeries {
        entries,
        decreasing,
        aborted,
    })
}
