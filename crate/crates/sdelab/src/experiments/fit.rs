//! Weighted least-squares slope fit in log-log coordinates.

use super::ExperimentError;

/// Result of fitting `ln(error) = slope * ln(n) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
}

/// Fits a power law through `(abscissa, error, stderr)` triples.
///
/// Each point is mapped to `(ln abscissa, ln error)`; the standard error of
/// `ln error` is `stderr / error` (delta method), and points are weighted by
/// its inverse square. If any reported stderr is non-positive the fit falls
/// back to unit weights. The quoted slope uncertainty is inflated by
/// `sqrt(max(1, chi2/dof))` so underestimated Monte Carlo errors cannot
/// produce overconfident slopes.
pub fn fit_rate(points: &[(f64, f64, f64)]) -> Result<FitResult, ExperimentError> {
    if points.len() < 3 {
        return Err(ExperimentError::FitRejected(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    for &(a, e, _) in points {
        if !(a > 0.0 && a.is_finite()) {
            return Err(ExperimentError::FitRejected(format!(
                "abscissa {a} is not a positive real"
            )));
        }
        if !(e > 0.0 && e.is_finite()) {
            return Err(ExperimentError::FitRejected(format!(
                "error {e} is not a positive real; cannot take logs"
            )));
        }
    }
    let unit_weights = points.iter().any(|&(_, _, se)| !(se > 0.0));
    let xyw: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|&(a, e, se)| {
            let w = if unit_weights {
                1.0
            } else {
                let rel = se / e;
                1.0 / (rel * rel)
            };
            (a.ln(), e.ln(), w)
        })
        .collect();

    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut swy = 0.0;
    let mut swxx = 0.0;
    let mut swxy = 0.0;
    for &(x, y, w) in &xyw {
        sw += w;
        swx += w * x;
        swy += w * y;
        swxx += w * x * x;
        swxy += w * x * y;
    }
    let det = sw * swxx - swx * swx;
    if !(det > 0.0) {
        return Err(ExperimentError::FitRejected(
            "degenerate design: abscissae do not vary".into(),
        ));
    }
    let slope = (sw * swxy - swx * swy) / det;
    let intercept = (swy - slope * swx) / sw;

    let mut chi2 = 0.0;
    for &(x, y, w) in &xyw {
        let r = y - (slope * x + intercept);
        chi2 += w * r * r;
    }
    let dof = (points.len() - 2) as f64;
    let scale = (chi2 / dof).max(1.0);
    let slope_var = sw / det * scale;
    Ok(FitResult {
        slope,
        slope_stderr: slope_var.sqrt(),
        intercept,
    })
}
