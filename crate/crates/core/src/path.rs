//! Path types: step functions (forcings and controls), piecewise-linear paths
//! in the class of paths whose coordinates are on every piece either never
//! zero or identically zero, and time-gridded trajectories.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{input, Error, Result};

fn check_breakpoints(bp: &[f64]) -> Result<()> {
    if bp.len() < 2 {
        return Err(input("need at least two breakpoints"));
    }
    if bp[0] != 0.0 {
        return Err(input(format!("first breakpoint must be 0, got {}", bp[0])));
    }
    for (k, w) in bp.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(input(format!("breakpoints must be strictly increasing and finite (at index {})", k + 1)));
        }
    }
    Ok(())
}

/// Index of the piece `[bp[k], bp[k+1])` containing `t`; the last piece is
/// closed on the right and times outside the range are clamped.
fn piece_index(bp: &[f64], t: f64) -> usize {
    let last = bp.len() - 2;
    if t <= bp[0] {
        return 0;
    }
    // First breakpoint strictly greater than t.
    let upper = bp.partition_point(|&b| b <= t);
    if upper == 0 {
        0
    } else {
        (upper - 1).min(last)
    }
}

/// A right-continuous, piecewise-constant vector function on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
}

/// Deterministic forcing `f(t)` of the forced inclusion and diffusion.
pub type ForcingPath = PiecewiseConstant;
/// Deterministic control `v(t)` added to the drift; finite energy by
/// construction.
pub type ControlPath = PiecewiseConstant;

impl PiecewiseConstant {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_breakpoints(&breakpoints)?;
        if values.len() != breakpoints.len() - 1 {
            return Err(input(format!(
                "{} breakpoints need {} value vectors, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                values.len()
            )));
        }
        let d = values[0].len();
        if d == 0 {
            return Err(input("value vectors must be non-empty"));
        }
        if values.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
            return Err(input("value vectors must share one dimension and be finite"));
        }
        Ok(Self { breakpoints, values })
    }

    /// A single constant value on `[0, horizon]`.
    pub fn constant(value: Vec<f64>, horizon: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![value])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn pieces(&self) -> usize {
        self.values.len()
    }

    pub fn value_at(&self, t: f64) -> &[f64] {
        &self.values[piece_index(&self.breakpoints, t)]
    }

    /// Smallest breakpoint strictly after `t`, if any.
    pub fn next_breakpoint_after(&self, t: f64) -> Option<f64> {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        self.breakpoints.get(k).copied()
    }

    /// `int_0^T |v(t)|^2 dt`, exact for step functions.
    pub fn energy(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (w[1] - w[0]) * v.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }
}

/// A continuous piecewise-linear path with per-piece zero flags.
///
/// On piece `k` coordinate `i` is either flagged (identically zero, both
/// endpoint values exactly `0.0`) or never zero in the open piece. Endpoint
/// zeros are allowed on unflagged pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePath {
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
    zero_flags: Vec<Vec<bool>>,
}

impl PiecewisePath {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Vec<f64>>, zero_flags: Vec<Vec<bool>>) -> Result<Self> {
        let p = Self { breakpoints, values, zero_flags };
        p.validate()?;
        Ok(p)
    }

    /// Checks every structural invariant, naming the first offending piece
    /// and coordinate.
    pub fn validate(&self) -> Result<()> {
        check_breakpoints(&self.breakpoints)?;
        let r = self.breakpoints.len();
        if self.values.len() != r {
            return Err(input(format!("{r} breakpoints need {r} value vectors")));
        }
        if self.zero_flags.len() != r - 1 {
            return Err(input(format!("{r} breakpoints need {} flag rows", r - 1)));
        }
        let d = self.values[0].len();
        if d == 0 {
            return Err(input("paths must have at least one coordinate"));
        }
        if self.values.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
            return Err(input("value vectors must share one dimension and be finite"));
        }
        if self.zero_flags.iter().any(|f| f.len() != d) {
            return Err(input("flag rows must match the path dimension"));
        }
        for k in 0..r - 1 {
            for i in 0..d {
                let (a, b) = (self.values[k][i], self.values[k + 1][i]);
                if self.zero_flags[k][i] {
                    if a != 0.0 || b != 0.0 {
                        return Err(input(format!(
                            "piece {k}, coordinate {i}: flagged as zero but endpoints are ({a}, {b})"
                        )));
                    }
                } else if (a == 0.0 && b == 0.0) || a * b < 0.0 {
                    return Err(input(format!(
                        "piece {k}, coordinate {i}: unflagged but vanishes inside ({a} -> {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Builds a valid path from arbitrary nodal values: sign changes get a
    /// breakpoint at the linear zero crossing, and pieces with both endpoints
    /// at zero are flagged.
    pub fn from_nodes(times: &[f64], nodes: &[Vec<f64>]) -> Result<Self> {
        check_breakpoints(times)?;
        if nodes.len() != times.len() {
            return Err(input("one node vector per time required"));
        }
        let d = nodes[0].len();
        if nodes.iter().any(|v| v.len() != d) {
            return Err(input("node vectors must share one dimension"));
        }
        let mut bp = vec![times[0]];
        let mut vals = vec![nodes[0].clone()];
        for k in 0..times.len() - 1 {
            let (t0, t1) = (times[k], times[k + 1]);
            let v0 = &nodes[k];
            let v1 = &nodes[k + 1];
            // Zero-crossing fractions of this piece, in increasing order.
            let mut crossings: Vec<(f64, usize)> =
                (0..d).filter(|&i| v0[i] * v1[i] < 0.0).map(|i| (v0[i] / (v0[i] - v1[i]), i)).collect();
            crossings.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (theta, i) in crossings {
                let t = t0 + theta * (t1 - t0);
                let mut v: Vec<f64> = (0..d).map(|j| v0[j] + theta * (v1[j] - v0[j])).collect();
                v[i] = 0.0;
                let last = bp.len() - 1;
                if t >= t1 {
                    continue;
                }
                if t <= bp[last] {
                    // Crossing collapses onto the previous node.
                    vals[last][i] = 0.0;
                    continue;
                }
                bp.push(t);
                vals.push(v);
            }
            bp.push(t1);
            vals.push(v1.clone());
        }
        // Any remaining sign change (crossings merged into nodes) is split
        // again by snapping the offending endpoint.
        #[allow(clippy::needless_range_loop)]
        for k in 0..bp.len() - 1 {
            for i in 0..d {
                if vals[k][i] * vals[k + 1][i] < 0.0 {
                    if vals[k][i].abs() <= vals[k + 1][i].abs() {
                        vals[k][i] = 0.0;
                    } else {
                        vals[k + 1][i] = 0.0;
                    }
                }
            }
        }
        let flags =
            (0..bp.len() - 1).map(|k| (0..d).map(|i| vals[k][i] == 0.0 && vals[k + 1][i] == 0.0).collect()).collect();
        Self::new(bp, vals, flags)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn zero_flags(&self) -> &[Vec<bool>] {
        &self.zero_flags
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn pieces(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn start(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn end(&self) -> &[f64] {
        self.values.last().unwrap()
    }

    /// Slope of coordinate `i` on piece `k`.
    pub fn slope(&self, k: usize, i: usize) -> f64 {
        let dt = self.breakpoints[k + 1] - self.breakpoints[k];
        (self.values[k + 1][i] - self.values[k][i]) / dt
    }

    pub fn piece_of(&self, t: f64) -> usize {
        piece_index(&self.breakpoints, t)
    }

    /// Value on piece `k` at time `t` (linear interpolation of its ends).
    /// Flagged coordinates are returned as exact zeros.
    pub fn eval_on_piece(&self, k: usize, t: f64, out: &mut [f64]) {
        let (t0, t1) = (self.breakpoints[k], self.breakpoints[k + 1]);
        let theta = (t - t0) / (t1 - t0);
        for (i, o) in out.iter_mut().enumerate() {
            *o = if self.zero_flags[k][i] {
                0.0
            } else {
                let (a, b) = (self.values[k][i], self.values[k + 1][i]);
                a + theta * (b - a)
            };
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_on_piece(self.piece_of(t), t, &mut out);
        out
    }

    /// The path sampled on `times`.
    pub fn sample(&self, times: &[f64]) -> Vec<Vec<f64>> {
        times.iter().map(|&t| self.eval(t)).collect()
    }

    /// Same geometric path with every piece split into `parts` equal pieces.
    pub fn refined(&self, parts: usize) -> Self {
        let parts = parts.max(1);
        let d = self.dim();
        let mut bp = vec![self.breakpoints[0]];
        let mut vals = vec![self.values[0].clone()];
        let mut flags = Vec::new();
        for k in 0..self.pieces() {
            let (t0, t1) = (self.breakpoints[k], self.breakpoints[k + 1]);
            for j in 1..=parts {
                let t = if j == parts { t1 } else { t0 + (t1 - t0) * j as f64 / parts as f64 };
                let v = if j == parts {
                    self.values[k + 1].clone()
                } else {
                    let mut v = vec![0.0; d];
                    self.eval_on_piece(k, t, &mut v);
                    v
                };
                bp.push(t);
                vals.push(v);
                flags.push(self.zero_flags[k].clone());
            }
        }
        Self { breakpoints: bp, values: vals, zero_flags: flags }
    }
}

/// A sample path on a time grid, with the set of coordinates that are
/// frozen at zero at each grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    frozen: Vec<bool>,
}

impl Trajectory {
    pub(crate) fn with_capacity(dim: usize, points: usize) -> Self {
        Self {
            dim,
            times: Vec::with_capacity(points),
            states: Vec::with_capacity(points * dim),
            frozen: Vec::with_capacity(points * dim),
        }
    }

    /// Builds a trajectory from explicit samples; `frozen` defaults to "exactly zero".
    pub fn from_samples(times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 || times.len() != states.len() {
            return Err(input("a trajectory needs at least two samples, one state per time"));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(input("trajectory times must start at 0 and increase"));
        }
        let dim = states[0].len();
        if dim == 0 || states.iter().any(|s| s.len() != dim) {
            return Err(Error::Input("states must share one non-zero dimension".into()));
        }
        let mut tr = Self::with_capacity(dim, times.len());
        for (t, s) in times.iter().zip(&states) {
            let mask: Vec<bool> = s.iter().map(|&v| v == 0.0).collect();
            tr.push(*t, s, &mask);
        }
        Ok(tr)
    }

    pub(crate) fn push(&mut self, t: f64, x: &[f64], frozen: &[bool]) {
        debug_assert_eq!(x.len(), self.dim);
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.frozen.extend_from_slice(frozen);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn frozen(&self, k: usize) -> &[bool] {
        &self.frozen[k * self.dim..(k + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks(self.dim)
    }

    /// Largest sup-norm of any state.
    pub fn sup_norm(&self) -> f64 {
        self.states.iter().fold(0.0, |m, x| if x.abs() > m { x.abs() } else { m })
    }

    /// Sup-norm distance at common grid times (matched by index).
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.states.iter().zip(&other.states).fold(0.0, |m, (a, b)| if (a - b).abs() > m { (a - b).abs() } else { m })
    }

    /// Time-weighted fractions of `{x_i <= 0}` and `{x_i > 0}`, each grid
    /// interval classified by its left endpoint.
    pub fn occupation(&self, i: usize) -> Result<(f64, f64)> {
        if i >= self.dim {
            return Err(input(format!("coordinate {i} out of range 0..{}", self.dim)));
        }
        let total = self.times[self.len() - 1] - self.times[0];
        let mut positive = 0.0;
        for k in 0..self.len() - 1 {
            if self.state(k)[i] > 0.0 {
                positive += self.times[k + 1] - self.times[k];
            }
        }
        let pos = positive / total;
        Ok((1.0 - pos, pos))
    }
}
