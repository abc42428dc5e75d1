//! Drift coefficients and their fractional-Sobolev diagnostics.
//!
//! The centerpiece is the rough drift
//!
//! ```text
//!     mu_s(x) = 2 * int_0^inf cos(x z) h_s(z) dz,
//!     h_s(z)  = 1 / ((e + |z|)^(1/2+s) * ln(e + |z|)),    s in (1/2, 1),
//! ```
//!
//! which is bounded, even, integrable, and Hölder of every order below
//! `s - 1/2`, but fails to belong to `W^{s,2}`. Useful analytic facts wired
//! into the tests and metadata:
//!
//! * decay: `|mu_s(x)| <= 4 (3/2 + s) / x^2`;
//! * sup norm: `mu_s(0) = 2 int_0^inf h_s = 2 E_1(s - 1/2)` (substitute
//!   `u = ln(e+z)`), with `E_1` the exponential integral;
//! * the Fourier-side seminorm integral `int |x|^{2s} h_s(x)^2 dx` is bounded
//!   by `2 int_e^inf dx / (x ln^2 x) = 2`.
//!
//! Besides `mu_s` the module provides the benchmark drifts (indicator, hat,
//! zero, constant) and two numerical seminorm probes: the Fourier-side
//! integral above and a direct double-Riemann Gagliardo sum with a divergence
//! detector.

mod cache;
mod filon;
mod seminorm;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{MuTable, DEFAULT_TABLE_CELLS, DEFAULT_TABLE_HALF_WIDTH};
pub use filon::MuEvaluator;
pub use seminorm::{
    seminorm_direct, seminorm_fourier_side, seminorm_refinement, DirectSeminorm, SeminormStudy,
    DEFAULT_DIVERGENCE_FACTOR,
};

/// Default absolute tolerance for the `mu_s` quadrature.
pub const DEFAULT_ABS_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DriftError {
    #[error("smoothness parameter s = {0} must lie in the open interval (1/2, 1)")]
    SOutOfRange(f64),
    #[error("seminorm order s = {0} must lie in the open interval (0, 1)")]
    OrderOutOfRange(f64),
    #[error("invalid quadrature settings: {0}")]
    InvalidSettings(String),
    #[error(
        "truncation tail bound (e+z_max)^(1/2-s)/(s-1/2) = {bound:.3e} exceeds abs_tol = \
         {abs_tol:.3e}; raise z_max or abs_tol"
    )]
    TailBound { bound: f64, abs_tol: f64 },
    #[error(
        "abs_tol = {abs_tol:.3e} is unreachable for s = {s}: the certified truncation point \
         overflows f64; raise abs_tol"
    )]
    ToleranceUnreachable { s: f64, abs_tol: f64 },
    #[error(
        "oscillation unresolved at |x| = {x}: {panels} panels/unit keeps fewer than 8 quadrature \
         nodes per cosine period beyond |x| = {max_x:.3}; raise panels"
    )]
    UnresolvedOscillation { x: f64, panels: u32, max_x: f64 },
    #[error("constant drift value must be finite, got {0}")]
    NonFiniteConstant(f64),
    #[error("invalid seminorm request: {0}")]
    InvalidSeminormRequest(String),
    #[error("cache io: {0}")]
    CacheIo(#[from] std::io::Error),
    #[error("cache format: {0}")]
    CacheFormat(String),
}

/// `h_s` with `p = 1/2 + s` pre-added; no domain validation (hot path).
#[inline]
pub(crate) fn h_unchecked(p: f64, z: f64) -> f64 {
    let w = std::f64::consts::E + z.abs();
    w.powf(-p) / w.ln()
}

fn check_s(s: f64) -> Result<(), DriftError> {
    if !(s > 0.5 && s < 1.0) {
        return Err(DriftError::SOutOfRange(s));
    }
    Ok(())
}

/// Evaluates `h_s(x) = (e+|x|)^{-(1/2+s)} / ln(e+|x|)`; even, strictly
/// positive, maximal at 0 with value `e^{-(1/2+s)}`.
pub fn eval_h(s: f64, x: f64) -> Result<f64, DriftError> {
    check_s(s)?;
    Ok(h_unchecked(0.5 + s, x))
}

/// Truncation and panel-density parameters for the `mu_s` quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    /// Truncation point of the half-line integral.
    pub z_max: f64,
    /// Subintervals per unit length on the uniform core mesh; also sets the
    /// geometric mesh ratio `1 + 4/panels` beyond the core.
    pub panels: u32,
    /// Absolute error budget; truncation and panel error each stay below it,
    /// so one evaluation is accurate to `2 * abs_tol`.
    pub abs_tol: f64,
}

impl QuadratureSettings {
    /// Derives settings meeting `abs_tol` for the given `s`: the truncation
    /// point comes from the closed-form tail bound
    /// `int_Z^inf h_s <= (e+Z)^{1/2-s}/(s-1/2)`, the panel density from the
    /// quartic panel-error budget of the Filon mesh.
    pub fn for_tolerance(s: f64, abs_tol: f64) -> Result<Self, DriftError> {
        check_s(s)?;
        if !(abs_tol > 0.0) {
            return Err(DriftError::InvalidSettings(format!(
                "abs_tol must be positive, got {abs_tol}"
            )));
        }
        let a = s - 0.5;
        // (e + z_max)^(-a) / a = 0.9 * abs_tol
        //   =>  ln(e + z_max) = -ln(0.9 * a * abs_tol) / a.
        // The 0.9 keeps the subsequent validation (which checks against the
        // full abs_tol) clear of roundoff.
        let log_epz = -(0.9 * a * abs_tol).ln() / a;
        if log_epz > 690.0 {
            return Err(DriftError::ToleranceUnreachable { s, abs_tol });
        }
        let z_max = log_epz.exp() - std::f64::consts::E;
        // Summed Filon panel error scales like 0.05 * (4/panels)^4; keep it
        // under abs_tol/2 but never drop below the resolution default.
        let panels = (4.0 * (0.1 / abs_tol).powf(0.25)).ceil().max(64.0) as u32;
        let settings = Self {
            z_max,
            panels,
            abs_tol,
        };
        settings.validate(s)?;
        Ok(settings)
    }

    /// Checks positivity constraints and the truncation tail bound
    /// `int_{z_max}^inf h_s(z) dz <= abs_tol` via
    /// `h_s(z) <= (e+z)^{-(1/2+s)}`.
    pub fn validate(&self, s: f64) -> Result<(), DriftError> {
        check_s(s)?;
        if !(self.z_max >= 1.0) {
            return Err(DriftError::InvalidSettings(format!(
                "z_max must be >= 1, got {}",
                self.z_max
            )));
        }
        if self.panels < 4 {
            return Err(DriftError::InvalidSettings(format!(
                "panels must be >= 4, got {}",
                self.panels
            )));
        }
        if !(self.abs_tol > 0.0) {
            return Err(DriftError::InvalidSettings(format!(
                "abs_tol must be positive, got {}",
                self.abs_tol
            )));
        }
        let a = s - 0.5;
        let bound = (std::f64::consts::E + self.z_max).powf(-a) / a;
        if !(bound <= self.abs_tol) {
            return Err(DriftError::TailBound {
                bound,
                abs_tol: self.abs_tol,
            });
        }
        Ok(())
    }
}

/// Parameters of the rough drift `mu_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalDriftParams {
    /// Smoothness parameter, strictly between 1/2 and 1.
    pub s: f64,
    /// Quadrature used whenever `mu_s` must be evaluated.
    pub quad: QuadratureSettings,
}

impl FractionalDriftParams {
    /// Parameters with the default quadrature tolerance.
    pub fn new(s: f64) -> Result<Self, DriftError> {
        Ok(Self {
            s,
            quad: QuadratureSettings::for_tolerance(s, DEFAULT_ABS_TOL)?,
        })
    }

    /// Parameters with explicit quadrature settings (validated).
    pub fn with_quad(s: f64, quad: QuadratureSettings) -> Result<Self, DriftError> {
        quad.validate(s)?;
        Ok(Self { s, quad })
    }
}

/// One-shot evaluation of `mu_s(x)` by composite Filon quadrature; absolute
/// error at most `2 * abs_tol` (truncation + panel error), exactly even in
/// `x`. Builds the quadrature mesh on every call — use [`MuEvaluator`]
/// directly for bulk evaluation, or [`make_drift`] for solver loops.
pub fn eval_mu_s(params: &FractionalDriftParams, x: f64) -> Result<f64, DriftError> {
    MuEvaluator::new(params.s, &params.quad)?.eval(x)
}

/// The drift menu: the rough drift plus standard benchmark coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    /// `mu_s`, evaluated through the cached table.
    MuS(FractionalDriftParams),
    /// Indicator of `[0, 1]`.
    Indicator01,
    /// Hat function `(1 - |x|)^+`.
    Hat,
    /// Identically zero.
    Zero,
    /// Constant drift `c` (not integrable: no transform available).
    Constant(f64),
}

#[derive(Debug, Clone)]
enum EvalImpl {
    Zero,
    Constant(f64),
    Indicator,
    Hat,
    Table(Arc<MuTable>),
}

/// A bounded measurable drift with evaluation plus norm metadata.
///
/// Immutable after construction and cheap to clone (the `mu_s` table is
/// shared), so values can be handed to any number of worker threads.
#[derive(Debug, Clone)]
pub struct DriftSpec {
    kind: DriftKind,
    eval: EvalImpl,
    /// Upper bound for `|eval|` (exact for the simple kinds; `mu_s(0)` for
    /// the rough drift).
    pub sup_norm: f64,
    /// `L^1(R)` norm upper bound; `None` means infinite.
    pub l1_norm: Option<f64>,
    /// Human-readable tag used in reports.
    pub label: String,
}

impl DriftSpec {
    /// Drift value at `x`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.eval {
            EvalImpl::Zero => 0.0,
            EvalImpl::Constant(c) => *c,
            EvalImpl::Indicator => {
                if (0.0..=1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            EvalImpl::Hat => (1.0 - x.abs()).max(0.0),
            EvalImpl::Table(table) => table.eval(x),
        }
    }

    /// The construction recipe (echoed into experiment configs).
    pub fn kind(&self) -> &DriftKind {
        &self.kind
    }

    /// The cached `mu_s` table, when this drift is of the `MuS` kind.
    pub fn table(&self) -> Option<&MuTable> {
        match &self.eval {
            EvalImpl::Table(t) => Some(t),
            _ => None,
        }
    }
}

/// Builds a [`DriftSpec`] with correct norm metadata.
///
/// For the `MuS` kind this precomputes the interpolation table on the graded
/// grid over `[-16, 16]` (single-threaded, a second or two at default
/// tolerance); `sup_norm` is the table value at 0 and `l1_norm` integrates
/// `|table|` over the grid plus the decay-bound tail `8(3/2+s)/x_max`.
pub fn make_drift(kind: DriftKind) -> Result<DriftSpec, DriftError> {
    match kind {
        DriftKind::MuS(params) => {
            check_s(params.s)?;
            let evaluator = MuEvaluator::new(params.s, &params.quad)?;
            let table = MuTable::build(&evaluator, DEFAULT_TABLE_HALF_WIDTH, DEFAULT_TABLE_CELLS)?;
            let sup = table.at_zero();
            let tail = 8.0 * (1.5 + params.s) / table.x_max();
            let l1 = table.l1_over_range() + tail;
            Ok(DriftSpec {
                label: format!("mu_s(s={})", params.s),
                kind: DriftKind::MuS(params),
                eval: EvalImpl::Table(Arc::new(table)),
                sup_norm: sup,
                l1_norm: Some(l1),
            })
        }
        DriftKind::Indicator01 => Ok(DriftSpec {
            kind,
            eval: EvalImpl::Indicator,
            sup_norm: 1.0,
            l1_norm: Some(1.0),
            label: "indicator_01".into(),
        }),
        DriftKind::Hat => Ok(DriftSpec {
            kind,
            eval: EvalImpl::Hat,
            sup_norm: 1.0,
            l1_norm: Some(1.0),
            label: "hat".into(),
        }),
        DriftKind::Zero => Ok(DriftSpec {
            kind,
            eval: EvalImpl::Zero,
            sup_norm: 0.0,
            l1_norm: Some(0.0),
            label: "zero".into(),
        }),
        DriftKind::Constant(c) => {
            if !c.is_finite() {
                return Err(DriftError::NonFiniteConstant(c));
            }
            Ok(DriftSpec {
                kind,
                eval: EvalImpl::Constant(c),
                sup_norm: c.abs(),
                l1_norm: if c == 0.0 { Some(0.0) } else { None },
                label: format!("constant({c})"),
            })
        }
    }
}
