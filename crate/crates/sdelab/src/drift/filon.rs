//! Composite Filon quadrature for the oscillatory cosine integral defining
//! `mu_s`.
//!
//! The target is
//!
//! ```text
//!     mu_s(x) = 2 * int_0^{z_max} cos(x z) h_s(z) dz   (+ tail below abs_tol),
//! ```
//!
//! where `h_s(z) = (e+z)^{-(1/2+s)} / ln(e+z)` decays so slowly that the
//! truncation point certified by the analytic tail bound
//! `(e+Z)^{1/2-s}/(s-1/2) <= abs_tol` is astronomically large (about `2.6e26`
//! for `s = 0.75`, `abs_tol = 1e-6`). Uniform panels are hopeless out there;
//! instead the mesh is uniform on a core interval `[0, 8]` (width `1/panels`)
//! and geometric beyond it (ratio `1 + 4/panels`), which reaches `z_max` in a
//! few thousand panels.
//!
//! Each panel integrates `cos(x z) * q(z)` exactly, where `q` is the parabola
//! interpolating `h_s` at the panel endpoints and midpoint (Filon's classical
//! construction). The error per panel is the *interpolation* error of `h_s`
//! alone — it does not degrade when the cosine oscillates many times inside a
//! wide panel — so accuracy is uniform in `x`. Writing `m`, `hw` for the panel
//! midpoint and half-width, `theta = x*hw`, and `f0, fm, f2` for the `h_s`
//! values,
//!
//! ```text
//!     int = hw * { cos(x m) * [2 fm (j0 - j2) + (f0 + f2) j2]
//!                  - sin(x m) * (f2 - f0) * j1 }
//!     j0 = sin(theta)/theta
//!     j1 = (sin(theta) - theta cos(theta)) / theta^2
//!     j2 = ((theta^2 - 2) sin(theta) + 2 theta cos(theta)) / theta^3
//! ```
//!
//! with Maclaurin series below `theta = 0.1` to avoid cancellation (the
//! `theta -> 0` limit is Simpson's rule). Phases `x*z` beyond ~1e15 lose
//! accuracy to rounding of the product, but there `h_s(z) < 1e-17` and the
//! panel contributions are far below any tolerance of interest.

use super::{h_unchecked, DriftError, QuadratureSettings};

/// End of the uniform core mesh; geometric panels take over beyond it.
const CORE_END: f64 = 8.0;

/// Switch point between the closed-form and series evaluation of the Filon
/// moments j0, j1, j2.
const THETA_SERIES: f64 = 0.1;

/// Reusable evaluator for `mu_s` at one `(s, QuadratureSettings)`: the panel
/// mesh and the `h_s` node values are computed once, each `eval` costs one
/// pass over the panels.
#[derive(Debug, Clone)]
pub struct MuEvaluator {
    s: f64,
    panels: u32,
    abs_tol: f64,
    /// Panel boundaries `b_0 = 0 < b_1 < … < b_M = z_max`.
    bounds: Vec<f64>,
    /// Panel midpoints, `mids[k] = (bounds[k] + bounds[k+1]) / 2`.
    mids: Vec<f64>,
    /// `h_s` at the boundaries.
    h_bounds: Vec<f64>,
    /// `h_s` at the midpoints.
    h_mids: Vec<f64>,
    /// Number of leading panels with the shared core half-width.
    core_panels: usize,
}

impl MuEvaluator {
    /// Builds the panel mesh for validated parameters. `s` must already be in
    /// `(1/2, 1)` and `quad` must satisfy its tail-bound invariant.
    pub fn new(s: f64, quad: &QuadratureSettings) -> Result<Self, DriftError> {
        quad.validate(s)?;
        let p = 0.5 + s;
        let width = 1.0 / quad.panels as f64;
        let core_end = CORE_END.min(quad.z_max);

        let mut bounds = vec![0.0];
        let mut z = 0.0;
        let mut k = 0u64;
        while z < core_end {
            k += 1;
            z = (k as f64 * width).min(core_end);
            bounds.push(z);
        }
        let core_panels = bounds.len() - 1;
        // Geometric continuation: each panel is wider than its predecessor by
        // the fixed ratio; the quartic-in-(ratio-1) Filon error summed over
        // the mesh stays below abs_tol for ratio - 1 = 4/panels (see module
        // docs for the budget).
        let rho = 1.0 + 4.0 / quad.panels as f64;
        while z < quad.z_max {
            z = (z * rho).min(quad.z_max);
            bounds.push(z);
        }

        let mids: Vec<f64> = bounds.windows(2).map(|b| 0.5 * (b[0] + b[1])).collect();
        let h_bounds: Vec<f64> = bounds.iter().map(|&z| h_unchecked(p, z)).collect();
        let h_mids: Vec<f64> = mids.iter().map(|&z| h_unchecked(p, z)).collect();

        Ok(Self {
            s,
            panels: quad.panels,
            abs_tol: quad.abs_tol,
            bounds,
            mids,
            h_bounds,
            h_mids,
            core_panels,
        })
    }

    /// Smoothness parameter this evaluator was built for.
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Absolute tolerance budgeted per call (truncation + panel error is
    /// within twice this).
    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }

    /// Largest `|x|` for which the core mesh keeps at least 8 quadrature
    /// nodes (panel endpoints and midpoints, spacing `1/(2*panels)`) per
    /// cosine period `2*pi/|x|`.
    pub fn max_resolved_x(&self) -> f64 {
        std::f64::consts::PI * self.panels as f64 / 2.0
    }

    /// Evaluates `mu_s(x)`. Even in `x` by construction (the cosine kernel is
    /// evaluated at `|x|`).
    pub fn eval(&self, x: f64) -> Result<f64, DriftError> {
        let xa = x.abs();
        if xa > self.max_resolved_x() {
            return Err(DriftError::UnresolvedOscillation {
                x,
                panels: self.panels,
                max_x: self.max_resolved_x(),
            });
        }

        let mut acc = 0.0;
        // Core panels share one half-width, hence one set of Filon moments.
        let core_hw = 0.5 * (self.bounds[1] - self.bounds[0]);
        let (mut j0, mut j1, mut j2) = filon_moments(xa * core_hw);
        let mut hw = core_hw;
        for k in 0..self.mids.len() {
            if k >= self.core_panels {
                hw = 0.5 * (self.bounds[k + 1] - self.bounds[k]);
                (j0, j1, j2) = filon_moments(xa * hw);
            }
            let f0 = self.h_bounds[k];
            let f2 = self.h_bounds[k + 1];
            let fm = self.h_mids[k];
            let (sin_m, cos_m) = (xa * self.mids[k]).sin_cos();
            acc += hw * (cos_m * (2.0 * fm * (j0 - j2) + (f0 + f2) * j2) - sin_m * (f2 - f0) * j1);
        }
        Ok(2.0 * acc)
    }
}

/// Filon moments `(j0, j1, j2)` of the reference panel: `j0 = int u^0`,
/// `j1 = int u sin`, `j2 = int u^2 cos` halves, see module docs.
fn filon_moments(theta: f64) -> (f64, f64, f64) {
    if theta < THETA_SERIES {
        let t2 = theta * theta;
        let j0 = 1.0 - t2 / 6.0 + t2 * t2 / 120.0 - t2 * t2 * t2 / 5040.0;
        let j1 = theta * (1.0 / 3.0 - t2 / 30.0 + t2 * t2 / 840.0 - t2 * t2 * t2 / 45360.0);
        let j2 = 1.0 / 3.0 - t2 / 10.0 + t2 * t2 / 168.0 - t2 * t2 * t2 / 6480.0;
        (j0, j1, j2)
    } else {
        let (st, ct) = theta.sin_cos();
        let inv = 1.0 / theta;
        let j0 = st * inv;
        let j1 = (st - theta * ct) * inv * inv;
        let j2 = ((theta * theta - 2.0) * st + 2.0 * theta * ct) * inv * inv * inv;
        (j0, j1, j2)
    }
}
