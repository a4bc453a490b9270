//! Approximation of sampled paths by piecewise-linear paths with zero flags,
//! and the time change that bounds a path's speed.

use alloc::vec;
use alloc::vec::Vec;

use super::functional::{discrete_rate, rate_functional};
use crate::drift::DriftModel;
use crate::error::{check_len, input, Error, Result};
use crate::linalg::norm2;
use crate::path::PiecewisePath;

/// Halvings of `sigma` tried by [`mollify`] before giving up.
pub const MAX_HALVINGS: u32 = 20;

/// A sampled path on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 || times.len() != states.len() {
            return Err(input("a sampled path needs at least two samples, one state per time"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(input("sample times must increase"));
        }
        let d = states[0].len();
        if d == 0 || states.iter().any(|s| s.len() != d || s.iter().any(|v| !v.is_finite())) {
            return Err(input("samples must be finite and share one non-zero dimension"));
        }
        Ok(Self { times, states })
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// Linear interpolation of the samples at `t`.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let n = self.times.len();
        let k = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            j if j >= n => n - 2,
            j => j - 1,
        };
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let theta = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        for (i, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.states[k][i], self.states[k + 1][i]);
            *o = if a == 0.0 && b == 0.0 { 0.0 } else { a + theta * (b - a) };
        }
    }

    /// Largest Euclidean forward-difference speed.
    pub fn max_speed(&self) -> f64 {
        let mut diff = vec![0.0; self.dim()];
        let mut best: f64 = 0.0;
        for k in 0..self.times.len() - 1 {
            let h = self.times[k + 1] - self.times[k];
            for (i, v) in diff.iter_mut().enumerate() {
                *v = (self.states[k + 1][i] - self.states[k][i]) / h;
            }
            best = best.max(norm2(&diff));
        }
        best
    }

    /// Sup-norm distance to a piecewise-linear path, checked at the sample
    /// times and at the path's breakpoints (where the path has its kinks).
    pub fn sup_distance(&self, phi: &PiecewisePath) -> f64 {
        let d = self.dim();
        let mut here = vec![0.0; d];
        let mut worst: f64 = 0.0;
        for (t, s) in self.times.iter().zip(&self.states) {
            let v = phi.eval(*t);
            for i in 0..d {
                worst = worst.max((v[i] - s[i]).abs());
            }
        }
        for (t, v) in phi.breakpoints().iter().zip(phi.values()) {
            self.eval(*t, &mut here);
            for i in 0..d {
                worst = worst.max((v[i] - here[i]).abs());
            }
        }
        worst
    }
}

/// Result of [`time_rescale`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub path: SampledPath,
    /// `S_lambda(1)`, the length of the stretched clock.
    pub stretched_horizon: f64,
    /// Largest speed on the stretched clock `[0, S_lambda(1)]`.
    pub max_speed_stretched: f64,
    /// Largest speed after mapping the clock back to `[0, 1]`.
    pub max_speed: f64,
}

/// The speed-bounding time change.
///
/// The stretched clock runs at `|psi'| / (c (1 - lambda))` on segments where
/// `|psi'| >= 1 / lambda` and at `1 / (1 - lambda)` elsewhere; the path is
/// read off on a uniform grid of the stretched clock (same number of samples
/// as the input) and that clock is mapped affinely back onto `[0, 1]`.
pub fn time_rescale(psi: &SampledPath, lambda: f64, c: f64) -> Result<Rescaled> {
    if !(lambda > 0.0 && lambda < 1.0) || !(c > 0.0 && c < 1.0) {
        return Err(input("lambda and c must lie in (0, 1)"));
    }
    let n = psi.times.len();
    let d = psi.dim();
    let t0 = psi.times[0];
    let horizon = psi.times[n - 1] - t0;
    // Stretched clock at every sample time.
    let mut clock = vec![0.0; n];
    let mut diff = vec![0.0; d];
    for k in 0..n - 1 {
        let h = psi.times[k + 1] - psi.times[k];
        for (i, v) in diff.iter_mut().enumerate() {
            *v = (psi.states[k + 1][i] - psi.states[k][i]) / h;
        }
        let speed = norm2(&diff);
        let rate = if speed >= 1.0 / lambda { speed / (c * (1.0 - lambda)) } else { 1.0 / (1.0 - lambda) };
        clock[k + 1] = clock[k] + h * rate;
    }
    let total = clock[n - 1];
    let mut times = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut seg = 0usize;
    for j in 0..n {
        let s = total * j as f64 / (n - 1) as f64;
        while seg + 1 < n - 1 && clock[seg + 1] <= s {
            seg += 1;
        }
        let theta = ((s - clock[seg]) / (clock[seg + 1] - clock[seg])).clamp(0.0, 1.0);
        let state: Vec<f64> = (0..d)
            .map(|i| {
                let (a, b) = (psi.states[seg][i], psi.states[seg + 1][i]);
                if a == 0.0 && b == 0.0 {
                    0.0
                } else {
                    a + theta * (b - a)
                }
            })
            .collect();
        times.push(t0 + horizon * j as f64 / (n - 1) as f64);
        states.push(state);
    }
    let path = SampledPath::new(times, states)?;
    let max_speed = path.max_speed();
    Ok(Rescaled { max_speed_stretched: max_speed * horizon / total, stretched_horizon: total, max_speed, path })
}

/// Outcome of [`mollify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mollified {
    pub path: PiecewisePath,
    pub sigma: f64,
    pub sup_gap: f64,
    /// `I(phi_sigma) - I_discrete(psi)`.
    pub rate_gap: f64,
    pub rate: f64,
    pub discrete_rate: f64,
}

/// Zero crossings and zero runs of coordinate `i`, as time intervals.
/// A crossing between samples is a degenerate interval.
fn zero_set(psi: &SampledPath, i: usize) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let n = psi.times.len();
    let mut k = 0;
    while k < n {
        let v = psi.states[k][i];
        if v == 0.0 {
            let start = psi.times[k];
            while k + 1 < n && psi.states[k + 1][i] == 0.0 {
                k += 1;
            }
            out.push((start, psi.times[k]));
        } else if k + 1 < n && v * psi.states[k + 1][i] < 0.0 {
            let w = psi.states[k + 1][i];
            let t = psi.times[k] + v / (v - w) * (psi.times[k + 1] - psi.times[k]);
            out.push((t, t));
        }
        k += 1;
    }
    out
}

/// Candidate for one `sigma`: breakpoints at every zero-set endpoint of every
/// coordinate and on a uniform grid of spacing below `sigma`; nodes
/// interpolate `psi`, with exact zeros on the zero sets.
fn candidate(psi: &SampledPath, sigma: f64) -> Result<PiecewisePath> {
    let d = psi.dim();
    let t0 = psi.times[0];
    let t1 = *psi.times.last().unwrap();
    let zeros: Vec<Vec<(f64, f64)>> = (0..d).map(|i| zero_set(psi, i)).collect();
    let cells = libm::floor((t1 - t0) / sigma) as usize + 1;
    let mut times: Vec<f64> = (0..=cells).map(|j| t0 + (t1 - t0) * j as f64 / cells as f64).collect();
    for z in &zeros {
        for &(a, b) in z {
            times.push(a);
            times.push(b);
        }
    }
    times.sort_by(f64::total_cmp);
    let tol = 1e-12 * (1.0 + (t1 - t0));
    times.dedup_by(|a, b| (*a - *b).abs() <= tol);
    if let Some(last) = times.last_mut() {
        *last = t1;
    }
    let mut here = vec![0.0; d];
    let nodes: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| {
            psi.eval(t, &mut here);
            for (i, z) in zeros.iter().enumerate() {
                if z.iter().any(|&(a, b)| t >= a - tol && t <= b + tol) {
                    here[i] = 0.0;
                }
            }
            here.clone()
        })
        .collect();
    PiecewisePath::from_nodes(&times, &nodes)
}

/// Projects a sampled path onto piecewise-linear paths with zero flags.
///
/// `sigma` starts at `delta` and is halved until the candidate is within
/// `delta` of `psi` in sup norm and its rate exceeds the discrete rate of
/// `psi` by at most `2 delta`.
pub fn mollify<M: DriftModel + ?Sized>(model: &M, psi: &SampledPath, delta: f64) -> Result<Mollified> {
    if !(delta > 0.0) {
        return Err(input("delta must be positive"));
    }
    check_len(model.dim(), psi.dim())?;
    let base = discrete_rate(model, &psi.times, &psi.states)?;
    let mut sigma = delta;
    let mut best: Option<(f64, Mollified)> = None;
    for _ in 0..=MAX_HALVINGS {
        let path = candidate(psi, sigma)?;
        let rate = rate_functional(model, &path)?.total;
        let sup_gap = psi.sup_distance(&path);
        let rate_gap = rate - base;
        let out = Mollified { path, sigma, sup_gap, rate_gap, rate, discrete_rate: base };
        if sup_gap <= delta && rate_gap <= 2.0 * delta {
            return Ok(out);
        }
        let badness = (sup_gap - delta).max(0.0) + (rate_gap - 2.0 * delta).max(0.0);
        if best.as_ref().is_none_or(|(b, _)| badness < *b) {
            best = Some((badness, out));
        }
        sigma *= 0.5;
    }
    let (_, m) = best.expect("at least one candidate");
    Err(Error::Approximation { sup_gap: m.sup_gap, rate_gap: m.rate_gap, delta, best: m.path })
}
