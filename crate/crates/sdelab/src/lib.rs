//! Strong-approximation laboratory for scalar SDEs with rough drift.
//!
//! The library is built around one model problem on the time interval [0, 1]:
//!
//! ```text
//!     dX_t = mu(X_t) dt + dW_t,      X_0 = x0,
//! ```
//!
//! where `mu` is bounded and measurable but possibly very irregular. The
//! centerpiece drift is the cosine transform
//!
//! ```text
//!     mu_s(x) = 2 * int_0^inf cos(x z) h_s(z) dz,
//!     h_s(z)  = 1 / ((e + |z|)^(1/2+s) * ln(e + |z|)),     s in (1/2, 1),
//! ```
//!
//! a bounded drift lying on the boundary of the fractional Sobolev scale
//! `W^{s,2}`. For such drifts the continuous-time Euler scheme converges at the
//! strong rate `(1+s)/2`, and no scheme observing the Brownian path at `5n`
//! points can do better than `c / (ln(n+1) * n^{(1+s)/2})`. The crate provides
//! the pieces needed to observe both effects numerically:
//!
//! * [`drift`] — evaluation of `h_s` and `mu_s` (composite Filon quadrature plus
//!   a fast cached table), test drifts, and fractional-Sobolev seminorm
//!   diagnostics;
//! * [`transform`] — the drift-removing space transform `G(x) = int_0^x
//!   exp(-2 int_0^y mu) dy` and the induced Lipschitz diffusion `b = G' o
//!   G^{-1}`;
//! * [`noise`] — Brownian paths, Brownian bridges, and the coupled pair
//!   `(W, W~)` that agrees with `W` at a coarse grid `pi` but is conditionally
//!   independent between grid points;
//! * [`solver`] — continuous-time Euler for the additive-noise SDE and
//!   Euler–Maruyama for the transformed multiplicative one;
//! * [`experiments`] — Monte Carlo drivers: strong-rate estimation, coupling
//!   distance (with the half-distance fooling bound), the kappa functional
//!   cross-check, and occupation-mismatch scaling;
//! * [`cli`] — the `sdelab` command-line front end.
//!
//! All Monte Carlo drivers are deterministic: replications draw from
//! counter-style per-replication RNG streams and results are reduced in
//! replication order, so a report depends only on its configuration, never on
//! the number of worker threads.

// `!(x > 0.0)` is the deliberate NaN-rejecting form of every domain check in
// this crate; reference constants are written at the full precision their
// generators reported.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod drift;
pub mod experiments;
pub mod noise;
mod numutil;
pub mod solver;
pub mod transform;

pub use drift::{make_drift, DriftKind, DriftSpec, FractionalDriftParams, QuadratureSettings};
pub use experiments::ExperimentConfig;
pub use noise::{RngStream, TimeGrid};
