//! Time grids, seeded noise streams, and the Brownian-bridge coupling.
//!
//! Everything downstream (solvers, experiments, the CLI) consumes noise
//! through this module, which enforces two properties:
//!
//! * **Determinism**: all randomness flows through [`RngStream`], a
//!   `(seed, stream_id)` pair mapped to a counter-based ChaCha generator.
//!   Equal streams replay identical paths on any platform or thread layout;
//!   distinct stream ids are statistically independent under one seed.
//! * **Exact nesting**: grids used together are built from the same dyadic
//!   arithmetic, so shared time points are bitwise equal and alignment is
//!   exact integer bookkeeping, never tolerance matching.
//!
//! The coupling construction pins a fine-grid Brownian path `w` and a second
//! path `w_tilde` that agrees with `w` **bitwise** at the nodes of a coarse
//! grid but is resampled in between: linear interpolation of the coarse
//! skeleton plus independent Brownian bridges. `w_tilde` is again a standard
//! Brownian motion, and for `t` in a coarse cell `[t_i, t_{i+1}]` with
//! `a = (t - t_i)/(t_{i+1} - t_i)`,
//!
//! ```text
//!     Cov(w_t, w_tilde_t) = t_i + a^2 (t_{i+1} - t_i),
//! ```
//!
//! e.g. `t^2` when the coarse grid is the single interval `[0, 1]`. Such
//! pairs are what information-style lower bounds feed on: no measurable
//! function of the coarse skeleton can track `w` better than `w_tilde` does.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("a time grid needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("time grids must start at exactly 0.0, got {0}")]
    BadOrigin(f64),
    #[error("times must be finite and strictly increasing (violated at index {0})")]
    NotIncreasing(usize),
    #[error("grid is not nested: time {0} of the coarse grid is missing from the fine grid")]
    NotNested(f64),
    #[error("invalid construction: {0}")]
    BadRequest(String),
}

/// A partition `0 = t_0 < t_1 < ... < t_N` of `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    /// Validates and wraps an explicit list of times.
    pub fn new(times: Vec<f64>) -> Result<Self, NoiseError> {
        if times.len() < 2 {
            return Err(NoiseError::TooFewPoints(times.len()));
        }
        if times[0] != 0.0 {
            return Err(NoiseError::BadOrigin(times[0]));
        }
        for i in 1..times.len() {
            if !times[i].is_finite() || times[i] <= times[i - 1] {
                return Err(NoiseError::NotIncreasing(i));
            }
        }
        Ok(Self { times })
    }

    /// Uniform grid `{ j/steps : j = 0..=steps }` on `[0, 1]`.
    pub fn uniform(steps: usize) -> Result<Self, NoiseError> {
        Self::uniform_to(1.0, steps)
    }

    /// Uniform grid with `steps` cells on `[0, horizon]`.
    pub fn uniform_to(horizon: f64, steps: usize) -> Result<Self, NoiseError> {
        if steps == 0 {
            return Err(NoiseError::BadRequest("steps must be positive".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(NoiseError::BadRequest(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        let n = steps as f64;
        Self::new((0..=steps).map(|j| j as f64 * horizon / n).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of cells (one less than the number of points).
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn max_step(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Index of each time of `coarse` inside `self`, by **exact** (bitwise)
    /// equality — grids meant to nest are built from identical dyadic
    /// arithmetic, so anything short of exact equality is a caller bug worth
    /// surfacing.
    pub fn align_indices(&self, coarse: &TimeGrid) -> Result<Vec<usize>, NoiseError> {
        let mut idx = Vec::with_capacity(coarse.times.len());
        let mut j = 0usize;
        for &t in &coarse.times {
            while j < self.times.len() && self.times[j] < t {
                j += 1;
            }
            if j >= self.times.len() || self.times[j] != t {
                return Err(NoiseError::NotNested(t));
            }
            idx.push(j);
        }
        Ok(idx)
    }
}

/// The coarse-plus-padding grid used on the tilde side of the coupling: all
/// multiples of `1/(4n)` together with one extra midpoint in the *first*
/// quarter-cell of each coarse interval `[(i-1)/n, i/n]`, i.e.
/// `(i-1)/n + 1/(8n)`, for `5n + 1` points in total and maximum step
/// `1/(4n)`. For `n = 1` the nonzero points are
/// `{1/8, 1/4, 1/2, 3/4, 1}`.
pub fn make_tilde_grid(n: usize) -> Result<TimeGrid, NoiseError> {
    if n == 0 {
        return Err(NoiseError::BadRequest("n must be positive".into()));
    }
    let denom = (8 * n) as f64;
    let mut ks: Vec<u64> = (1..=4 * n as u64).map(|j| 2 * j).collect();
    ks.extend((0..n as u64).map(|i| 8 * i + 1));
    ks.sort_unstable();
    let mut times = Vec::with_capacity(ks.len() + 1);
    times.push(0.0);
    times.extend(ks.iter().map(|&k| k as f64 / denom));
    TimeGrid::new(times)
}

/// A named pseudo-random stream: one master seed, many independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// The generator for this stream. ChaCha is counter-based: the same
    /// `(seed, stream_id)` always yields the same sequence, and distinct
    /// stream ids select disjoint keystreams under one key.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Samples a standard Brownian path on `grid`: `w[0] = 0` exactly and
/// independent `N(0, dt)` increments across cells.
pub fn sample_brownian<R: Rng + ?Sized>(grid: &TimeGrid, rng: &mut R) -> Vec<f64> {
    let times = grid.times();
    let mut w = Vec::with_capacity(times.len());
    w.push(0.0);
    let mut cur = 0.0f64;
    for i in 1..times.len() {
        let sd = (times[i] - times[i - 1]).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        cur += sd * z;
        w.push(cur);
    }
    w
}

/// Piecewise-linear interpolation of `(coarse, values)` onto the times of
/// `fine`. Times that coincide with a coarse node (bitwise) reproduce the
/// coarse value exactly; times beyond the coarse horizon are rejected.
pub fn interpolate_on(
    coarse: &TimeGrid,
    values: &[f64],
    fine: &TimeGrid,
) -> Result<Vec<f64>, NoiseError> {
    if values.len() != coarse.times().len() {
        return Err(NoiseError::BadRequest(format!(
            "{} values for {} coarse times",
            values.len(),
            coarse.times().len()
        )));
    }
    if fine.horizon() > coarse.horizon() {
        return Err(NoiseError::BadRequest(
            "fine grid extends beyond the coarse horizon".into(),
        ));
    }
    let ct = coarse.times();
    let mut out = Vec::with_capacity(fine.times().len());
    let mut seg = 0usize; // invariant: ct[seg] <= t <= ct[seg+1] after advance
    for &t in fine.times() {
        while seg + 2 < ct.len() && ct[seg + 1] <= t {
            seg += 1;
        }
        out.push(if t == ct[seg] {
            values[seg]
        } else if t == ct[seg + 1] {
            values[seg + 1]
        } else {
            let a = (t - ct[seg]) / (ct[seg + 1] - ct[seg]);
            values[seg] + a * (values[seg + 1] - values[seg])
        });
    }
    Ok(out)
}

/// Samples a Brownian bridge pinned to 0 at `times[0]` and `times.last()`,
/// returning one value per entry of `times` (the endpoints are exact
/// zeros). Uses the forward conditional recursion: given the bridge value
/// `b` at `u` and the terminal pin at `l`,
/// `B(u') | B(u) = b  ~  N( b (l - u')/(l - u), (u' - u)(l - u')/(l - u) )`.
pub fn sample_bridge<R: Rng + ?Sized>(times: &[f64], rng: &mut R) -> Vec<f64> {
    let m = times.len();
    let mut out = vec![0.0f64; m];
    if m < 3 {
        return out;
    }
    let l = times[m - 1];
    let mut cur = 0.0f64;
    for j in 1..m - 1 {
        let (u, up) = (times[j - 1], times[j]);
        let rem = l - u;
        let mean = cur * (l - up) / rem;
        let var = (up - u) * (l - up) / rem;
        let z: f64 = rng.sample(StandardNormal);
        cur = mean + var.sqrt() * z;
        out[j] = cur;
    }
    out
}

/// A fine-grid Brownian path and its coarse-coupled twin.
#[derive(Debug, Clone)]
pub struct CoupledPathPair {
    /// The common sampling grid.
    pub fine: TimeGrid,
    /// The target Brownian path on `fine`.
    pub w: Vec<f64>,
    /// A Brownian path agreeing with `w` bitwise at the coarse nodes and
    /// conditionally independent of it in between.
    pub w_tilde: Vec<f64>,
    /// Positions of the coarse nodes inside `fine`.
    pub coarse_indices: Vec<usize>,
}

/// Samples the coupled pair: `w` is a Brownian path on `fine`; `w_tilde`
/// copies `w` at the nodes of `coarse` (bitwise) and replaces each coarse
/// cell's interior by linear interpolation plus an independent Brownian
/// bridge. `coarse` must be exactly nested in `fine` and share its horizon.
pub fn sample_coupled<R: Rng + ?Sized>(
    coarse: &TimeGrid,
    fine: &TimeGrid,
    rng: &mut R,
) -> Result<CoupledPathPair, NoiseError> {
    let coarse_indices = fine.align_indices(coarse)?;
    if coarse.horizon() != fine.horizon() {
        return Err(NoiseError::BadRequest(
            "coarse and fine grids must share the horizon".into(),
        ));
    }
    let times = fine.times();
    let w = sample_brownian(fine, rng);
    let mut w_tilde = vec![0.0f64; times.len()];
    for cell in coarse_indices.windows(2) {
        let (i0, i1) = (cell[0], cell[1]);
        w_tilde[i0] = w[i0];
        w_tilde[i1] = w[i1];
        if i1 - i0 < 2 {
            continue;
        }
        let seg = &times[i0..=i1];
        let bridge = sample_bridge(seg, rng);
        let (t0, t1) = (times[i0], times[i1]);
        let inv = 1.0 / (t1 - t0);
        for (off, t) in seg.iter().enumerate().take(i1 - i0).skip(1) {
            let a = (t - t0) * inv;
            w_tilde[i0 + off] = w[i0] + a * (w[i1] - w[i0]) + bridge[off];
        }
    }
    Ok(CoupledPathPair {
        fine: fine.clone(),
        w,
        w_tilde,
        coarse_indices,
    })
}
