//! Monte Carlo estimates of `H_eps = -eps^2 ln E[exp(-h(x_eps)/eps^2)]` and
//! the variational value `inf { I(phi) + h(phi) }` it converges to.

use alloc::vec;
use alloc::vec::Vec;

use crate::drift::DriftModel;
use crate::error::{check_len, input, Error, Result};
use crate::exec::Executor;
use crate::inclusion::integrate_sticky;
use crate::linalg::norm2;
use crate::path::PiecewisePath;
use crate::quad::gauss_legendre8;
use crate::rate::rate_functional;
use crate::rng::GaussianStream;
use crate::sde::{ensemble, simulate_observed, Control, NoControl, SdeConfig};
use crate::stats::{ols_slope, Summary};

/// A bounded cost on paths.
#[derive(Debug, Clone, PartialEq)]
pub enum CostFunctional {
    /// `min(weight |phi(1) - target|^2, cap)`.
    Terminal {
        target: Vec<f64>,
        weight: f64,
        cap: f64,
    },
    /// `min(weight int_0^T |phi(t) - target|^2 dt, cap)`.
    Running {
        target: Vec<f64>,
        weight: f64,
        cap: f64,
    },
    Constant(f64),
}

fn dist2(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl CostFunctional {
    pub fn terminal(target: Vec<f64>, weight: f64, cap: f64) -> Result<Self> {
        let h = Self::Terminal { target, weight, cap };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Terminal { target, weight, cap } | Self::Running { target, weight, cap } => {
                if target.is_empty() || target.iter().any(|v| !v.is_finite()) {
                    return Err(input("cost target must be a non-empty finite vector"));
                }
                if !(*weight > 0.0) || !(*cap > 0.0) || !weight.is_finite() || !cap.is_finite() {
                    return Err(input("cost weight and cap must be positive and finite"));
                }
            }
            Self::Constant(c) => {
                if !c.is_finite() {
                    return Err(input("constant cost must be finite"));
                }
            }
        }
        Ok(())
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            Self::Terminal { target, .. } | Self::Running { target, .. } => check_len(d, target.len()),
            Self::Constant(_) => Ok(()),
        }
    }

    /// Exact cost of a piecewise-linear path.
    pub fn on_path(&self, phi: &PiecewisePath) -> f64 {
        match self {
            Self::Terminal { target, weight, cap } => (weight * dist2(phi.end(), target)).min(*cap),
            Self::Running { target, weight, cap } => {
                let bp = phi.breakpoints();
                let mut x = vec![0.0; phi.dim()];
                let mut s = 0.0;
                for k in 0..phi.pieces() {
                    s += gauss_legendre8(bp[k], bp[k + 1], |t| {
                        phi.eval_on_piece(k, t, &mut x);
                        dist2(&x, target)
                    });
                }
                (weight * s).min(*cap)
            }
            Self::Constant(c) => *c,
        }
    }

    pub fn accumulator(&self) -> CostAccumulator<'_> {
        CostAccumulator { cost: self, integral: 0.0, prev: None, last: Vec::new() }
    }
}

/// Evaluates a [`CostFunctional`] on a path streamed one grid point at a
/// time; running costs use the trapezoid rule.
#[derive(Debug, Clone)]
pub struct CostAccumulator<'a> {
    cost: &'a CostFunctional,
    integral: f64,
    prev: Option<(f64, f64)>,
    last: Vec<f64>,
}

impl CostAccumulator<'_> {
    pub fn observe(&mut self, t: f64, x: &[f64]) {
        match self.cost {
            CostFunctional::Terminal { .. } => {
                self.last.clear();
                self.last.extend_from_slice(x);
            }
            CostFunctional::Running { target, .. } => {
                let v = dist2(x, target);
                if let Some((t0, v0)) = self.prev {
                    self.integral += 0.5 * (t - t0) * (v0 + v);
                }
                self.prev = Some((t, v));
            }
            CostFunctional::Constant(_) => {}
        }
    }

    pub fn finish(&self) -> f64 {
        match self.cost {
            CostFunctional::Terminal { target, weight, cap } => (weight * dist2(&self.last, target)).min(*cap),
            CostFunctional::Running { weight, cap, .. } => (weight * self.integral).min(*cap),
            CostFunctional::Constant(c) => *c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceEstimate {
    pub eps: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub replicas: usize,
}

/// `-eps^2 ln mean(exp(-h_r / eps^2))` from per-replica costs.
///
/// The weights are shifted by the smallest cost, so the largest weight is
/// exactly one; the standard error is the delta-method error of the mean
/// weight pushed through `-eps^2 ln`.
pub fn laplace_from_costs(eps: f64, costs: &[f64]) -> Result<LaplaceEstimate> {
    if !(eps > 0.0) {
        return Err(input("the Laplace estimate needs eps > 0"));
    }
    if costs.len() < 2 {
        return Err(input("the Laplace estimate needs at least two replicas"));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite path cost".into()));
    }
    let e2 = eps * eps;
    let hmin = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = costs.iter().map(|h| libm::exp(-(h - hmin) / e2)).collect();
    let s = Summary::of(&w);
    if !(s.mean > 0.0) || !s.mean.is_finite() {
        return Err(Error::Numerical("every exp-weight underflowed; use a larger eps or more replicas".into()));
    }
    Ok(LaplaceEstimate {
        eps,
        estimate: hmin - e2 * libm::log(s.mean),
        std_error: e2 * s.std_error / s.mean,
        replicas: costs.len(),
    })
}

/// Cost of every replica of `model + control` started at `x0`, in replica
/// order, together with the energy `1/2 int e(t, x) dt` (left-point rule) of
/// each replica, where `e` is `energy_density`.
#[allow(clippy::too_many_arguments)]
pub fn replica_costs<E, M, V, G>(
    exec: &E,
    model: &M,
    control: &V,
    x0: &[f64],
    h: &CostFunctional,
    cfg: &SdeConfig,
    replicas: usize,
    energy_density: G,
) -> Result<Vec<(f64, f64)>>
where
    E: Executor + ?Sized,
    M: DriftModel + ?Sized,
    V: Control + ?Sized,
    G: Fn(f64, &[f64]) -> f64 + Sync + Send,
{
    h.validate()?;
    h.check_dim(model.dim())?;
    let runs = ensemble(exec, replicas, cfg.seed, |_, seed| {
        let rcfg = cfg.with_seed(seed);
        let mut acc = h.accumulator();
        let mut energy = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        simulate_observed(model, control, x0, &rcfg, |_, t, x| {
            acc.observe(t, x);
            if let Some((t0, e0)) = prev {
                energy += 0.5 * (t - t0) * e0;
            }
            prev = Some((t, energy_density(t, x)));
        })?;
        Ok((acc.finish(), energy))
    })?;
    Ok(runs.into_iter().map(|(_, r)| r).collect())
}

/// Monte Carlo estimate of `H_eps` for the uncontrolled dynamics. Replica `r`
/// runs with `replica_seed(cfg.seed, r)`.
pub fn laplace_estimate<E, M>(
    exec: &E,
    model: &M,
    x0: &[f64],
    h: &CostFunctional,
    cfg: &SdeConfig,
    replicas: usize,
) -> Result<LaplaceEstimate>
where
    E: Executor + ?Sized,
    M: DriftModel + ?Sized,
{
    if !(cfg.eps > 0.0) {
        return Err(input("the Laplace estimate needs eps > 0"));
    }
    if replicas < 2 {
        return Err(input("the Laplace estimate needs at least two replicas"));
    }
    let costs: Vec<f64> =
        replica_costs(exec, model, &NoControl, x0, h, cfg, replicas, |_, _| 0.0)?.into_iter().map(|(c, _)| c).collect();
    laplace_from_costs(cfg.eps, &costs)
}

/// Mean of `1/2 int |v|^2 dt + h(x^{eps, v})` over replicas: an upper bound
/// on `H_eps` for any control `v`.
pub fn control_cost_estimate<E, M, V>(
    exec: &E,
    model: &M,
    control: &V,
    x0: &[f64],
    h: &CostFunctional,
    cfg: &SdeConfig,
    replicas: usize,
) -> Result<Summary>
where
    E: Executor + ?Sized,
    M: DriftModel + ?Sized,
    V: Control + ?Sized,
{
    let d = model.dim();
    let density = |t: f64, x: &[f64]| {
        let mut v = vec![0.0; d];
        control.add_into(t, x, &mut v);
        let n = norm2(&v);
        n * n
    };
    let totals: Vec<f64> =
        replica_costs(exec, model, control, x0, h, cfg, replicas, density)?.into_iter().map(|(c, e)| c + e).collect();
    Ok(Summary::of(&totals))
}

/// The dynamics steered along a target path by state feedback.
///
/// On piece `k` coordinate `i` moves with drift `beta1` on `x_i <= 0` and
/// `beta2` on `x_i > 0` (plus noise). Both equal the path's slope, except on
/// pieces flagged as zero where `beta1 = -mu` and `beta2 = +mu`, which pushes
/// the coordinate back to zero from both sides. The control doing this is
/// `v_i = beta_eta - b_eta_i(x)`; as a drift model the whole right-hand side
/// is already in the force, so the penalty is zero.
#[derive(Debug, Clone)]
pub struct FeedbackControl<'a, M: ?Sized> {
    model: &'a M,
    phi: &'a PiecewisePath,
}

impl<'a, M: DriftModel + ?Sized> FeedbackControl<'a, M> {
    pub fn new(model: &'a M, phi: &'a PiecewisePath) -> Result<Self> {
        check_len(model.dim(), phi.dim())?;
        Ok(Self { model, phi })
    }

    /// Target drifts `(beta1, beta2)` of coordinate `i` at time `t`.
    pub fn targets(&self, t: f64, i: usize) -> (f64, f64) {
        let k = self.phi.piece_of(t);
        if self.phi.zero_flags()[k][i] {
            let mu = self.model.mu();
            (-mu, mu)
        } else {
            let s = self.phi.slope(k, i);
            (s, s)
        }
    }

    /// Control component `v_i(x, t)`.
    pub fn control_component(&self, t: f64, x: &[f64], i: usize) -> f64 {
        let (beta1, beta2) = self.targets(t, i);
        let f = self.model.force_component(t, x, i);
        let mu = self.model.mu();
        if x[i] <= 0.0 {
            beta1 - (f + mu)
        } else {
            beta2 - (f - mu)
        }
    }

    /// `|v(x, t)|^2`.
    pub fn energy_density(&self, t: f64, x: &[f64]) -> f64 {
        (0..x.len()).map(|i| sq(self.control_component(t, x, i))).sum()
    }
}

impl<M: DriftModel + ?Sized> DriftModel for FeedbackControl<'_, M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn mu(&self) -> f64 {
        0.0
    }

    fn force_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.force_component(t, x, i);
        }
    }

    fn force_component(&self, t: f64, x: &[f64], i: usize) -> f64 {
        let (beta1, beta2) = self.targets(t, i);
        if x[i] <= 0.0 {
            beta1
        } else {
            beta2
        }
    }

    fn next_jump_after(&self, t: f64) -> Option<f64> {
        let bp = self.phi.breakpoints();
        let k = bp.partition_point(|&s| s <= t);
        bp.get(k).copied().filter(|&s| s < self.phi.horizon())
    }
}

/// Mean of `1/2 int |v|^2 dt + h` along the feedback dynamics that track
/// `phi`: an upper bound on `H_eps`.
pub fn feedback_cost_estimate<E, M>(
    exec: &E,
    model: &M,
    phi: &PiecewisePath,
    h: &CostFunctional,
    cfg: &SdeConfig,
    replicas: usize,
) -> Result<Summary>
where
    E: Executor + ?Sized,
    M: DriftModel + ?Sized,
{
    let ctl = FeedbackControl::new(model, phi)?;
    let totals: Vec<f64> =
        replica_costs(exec, &ctl, &NoControl, phi.start(), h, cfg, replicas, |t, x| ctl.energy_density(t, x))?
            .into_iter()
            .map(|(c, e)| c + e)
            .collect();
    Ok(Summary::of(&totals))
}

/// Settings of the derivative-free path search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Number of uniform nodes on `[0, 1]`, the first one anchored at `x0`.
    pub m: usize,
    pub multistarts: usize,
    pub seed: u64,
    /// Stop when a full sweep improves the objective by less than this
    /// fraction.
    pub rel_tol: f64,
    pub max_sweeps: usize,
}

impl SearchConfig {
    pub fn new(m: usize, multistarts: usize, seed: u64) -> Self {
        Self { m, multistarts, seed, rel_tol: 1e-8, max_sweeps: 400 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalResult {
    pub value: f64,
    pub rate: f64,
    pub cost: f64,
    pub path: PiecewisePath,
    /// Index of the multistart that produced `path` (0: flow, 1: straight line).
    pub start: usize,
}

fn objective<M: DriftModel + ?Sized>(
    model: &M,
    h: &CostFunctional,
    times: &[f64],
    nodes: &[Vec<f64>],
) -> (f64, Option<PiecewisePath>) {
    match PiecewisePath::from_nodes(times, nodes) {
        Ok(phi) => match rate_functional(model, &phi) {
            Ok(r) => (r.total + h.on_path(&phi), Some(phi)),
            Err(_) => (f64::INFINITY, None),
        },
        Err(_) => (f64::INFINITY, None),
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search of `f` on `[a, b]`; returns the best point seen.
fn golden<F: FnMut(f64) -> f64>(mut a: f64, mut b: f64, iters: usize, mut f: F) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let (mut best_x, mut best_f) = if fc <= fd { (c, fc) } else { (d, fd) };
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc < best_f {
                best_x = c;
                best_f = fc;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd < best_f {
                best_x = d;
                best_f = fd;
            }
        }
    }
    (best_x, best_f)
}

/// Coordinate descent from `nodes`. Moves: a golden-section line search on
/// each single nodal value, the same on each tail block `nodes[j..]` shifted
/// together, and snapping a nodal value to exact zero (which creates or
/// extends zero-flagged pieces).
fn descend<M: DriftModel + ?Sized>(
    model: &M,
    h: &CostFunctional,
    times: &[f64],
    mut nodes: Vec<Vec<f64>>,
    cfg: &SearchConfig,
) -> (f64, Vec<Vec<f64>>) {
    let m = times.len();
    let d = nodes[0].len();
    let mut best = objective(model, h, times, &nodes).0;
    let mut radius = 1.0f64.max(nodes.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())));
    for _ in 0..cfg.max_sweeps {
        let before = best;
        for j in 1..m {
            for i in 0..d {
                // Snap to zero.
                let v = nodes[j][i];
                if v != 0.0 {
                    nodes[j][i] = 0.0;
                    let f = objective(model, h, times, &nodes).0;
                    if f < best {
                        best = f;
                    } else {
                        nodes[j][i] = v;
                    }
                }
                // Single node.
                let v = nodes[j][i];
                let (x, f) = golden(v - radius, v + radius, 30, |u| {
                    let mut trial = nodes.clone();
                    trial[j][i] = u;
                    objective(model, h, times, &trial).0
                });
                if f < best {
                    nodes[j][i] = x;
                    best = f;
                }
                // Tail block.
                let (x, f) = golden(-radius, radius, 30, |u| {
                    let mut trial = nodes.clone();
                    for node in trial.iter_mut().skip(j) {
                        if node[i] != 0.0 || j == m - 1 {
                            node[i] += u;
                        }
                    }
                    objective(model, h, times, &trial).0
                });
                if f < best {
                    for node in nodes.iter_mut().skip(j) {
                        if node[i] != 0.0 || j == m - 1 {
                            node[i] += x;
                        }
                    }
                    best = f;
                }
            }
        }
        radius = (radius * 0.5).max(1e-6);
        let improvement = before - best;
        if improvement <= cfg.rel_tol * best.abs().max(1e-300) && radius <= 1e-3 {
            break;
        }
    }
    (best, nodes)
}

/// Upper bound on `inf { I(phi) + h(phi) }` over piecewise-linear paths with
/// `cfg.m` uniform nodes starting at `x0`.
///
/// Start 0 is the uncontrolled flow sampled at the nodes, start 1 the
/// straight line to the cost target (to `x0` itself for constant costs), and
/// the rest are random perturbations of the straight line.
pub fn variational_infimum<E, M>(
    exec: &E,
    model: &M,
    x0: &[f64],
    h: &CostFunctional,
    cfg: &SearchConfig,
) -> Result<VariationalResult>
where
    E: Executor + ?Sized,
    M: DriftModel + ?Sized,
{
    if cfg.m < 2 {
        return Err(input("the path search needs at least two nodes"));
    }
    if cfg.multistarts == 0 {
        return Err(input("the path search needs at least one start"));
    }
    h.validate()?;
    let d = model.dim();
    check_len(d, x0.len())?;
    h.check_dim(d)?;
    let m = cfg.m;
    let times: Vec<f64> = (0..m).map(|k| if k == m - 1 { 1.0 } else { k as f64 / (m - 1) as f64 }).collect();

    let flow = integrate_sticky(model, x0, 1.0, 1e-4, 1e-12)?;
    let flow_nodes: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| {
            let k = libm::round(t / 1e-4) as usize;
            flow.state(k.min(flow.len() - 1)).to_vec()
        })
        .collect();
    let target: Vec<f64> = match h {
        CostFunctional::Terminal { target, .. } | CostFunctional::Running { target, .. } => target.clone(),
        CostFunctional::Constant(_) => x0.to_vec(),
    };
    let line: Vec<Vec<f64>> =
        times.iter().map(|&t| (0..d).map(|i| x0[i] + t * (target[i] - x0[i])).collect()).collect();
    let scale = 0.5 * (1.0 + line.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())));

    let stream = GaussianStream::new(cfg.seed);
    let results = exec.map_indexed(cfg.multistarts, |s| {
        let start = match s {
            0 => flow_nodes.clone(),
            1 => line.clone(),
            _ => {
                let mut z = vec![0.0; m * d];
                let base = (s as u64) * (m * d).div_ceil(2) as u64;
                for (b, pair) in z.chunks_mut(2).enumerate() {
                    let (u, v) = stream.normal_pair(base + b as u64);
                    pair[0] = u;
                    if let Some(p) = pair.get_mut(1) {
                        *p = v;
                    }
                }
                let mut nodes = line.clone();
                for (k, node) in nodes.iter_mut().enumerate().skip(1) {
                    for (i, v) in node.iter_mut().enumerate() {
                        *v += scale * z[k * d + i];
                    }
                }
                nodes
            }
        };
        descend(model, h, &times, start, cfg)
    });

    let (start, (_, nodes)) = results
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
        .expect("at least one start");
    let path = PiecewisePath::from_nodes(&times, &nodes)?;
    let rate = rate_functional(model, &path)?.total;
    let cost = h.on_path(&path);
    Ok(VariationalResult { value: rate + cost, rate, cost, path, start })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpReport {
    pub eps_values: Vec<f64>,
    pub estimates: Vec<LaplaceEstimate>,
    pub variational: VariationalResult,
    /// `estimate - variational value`, per eps.
    pub gaps: Vec<f64>,
    /// Least-squares slope of the gaps against eps.
    pub trend_slope: f64,
    pub dt: f64,
    pub replicas: usize,
    pub seed: u64,
    pub m: usize,
    pub multistarts: usize,
}

/// Laplace estimates for every `eps` (strictly decreasing) against one
/// variational value.
#[allow(clippy::too_many_arguments)]
pub fn ldp_report<E, M>(
    exec: &E,
    model: &M,
    x0: &[f64],
    h: &CostFunctional,
    eps_list: &[f64],
    cfg: &SdeConfig,
    replicas: usize,
    search: &SearchConfig,
) -> Result<LdpReport>
where
    E: Executor + ?Sized,
    M: DriftModel + ?Sized,
{
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(input("eps values must be strictly decreasing"));
    }
    let variational = variational_infimum(exec, model, x0, h, search)?;
    let mut estimates = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        estimates.push(laplace_estimate(exec, model, x0, h, &cfg.with_eps(eps)?, replicas)?);
    }
    let gaps: Vec<f64> = estimates.iter().map(|e| e.estimate - variational.value).collect();
    let trend_slope = if eps_list.len() >= 2 { ols_slope(eps_list, &gaps) } else { 0.0 };
    Ok(LdpReport {
        eps_values: eps_list.to_vec(),
        estimates,
        variational,
        gaps,
        trend_slope,
        dt: cfg.dt,
        replicas,
        seed: cfg.seed,
        m: search.m,
        multistarts: search.multistarts,
    })
}

#[inline]
fn sq(u: f64) -> f64 {
    u * u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::problem::Problem;
    use crate::rate::rate_functional;
    use std::vec;

    fn canonical() -> (Problem, CostFunctional) {
        (Problem::scalar(1.0, 0.0, 1.0).unwrap(), CostFunctional::terminal(vec![1.0], 1.0, 4.0).unwrap())
    }

    #[test]
    fn constant_cost_is_exact() {
        let (p, _) = canonical();
        for eps in [0.5, 0.35, 0.25] {
            let cfg = SdeConfig::new(eps, 1e-2, 3).unwrap();
            let e = laplace_estimate(&Sequential, &p, &[0.0], &CostFunctional::Constant(0.7), &cfg, 50).unwrap();
            assert_eq!(e.estimate, 0.7);
            assert_eq!(e.std_error, 0.0);
            let z = laplace_estimate(&Sequential, &p, &[0.0], &CostFunctional::Constant(0.0), &cfg, 50).unwrap();
            assert_eq!(z.estimate, 0.0);
        }
    }

    #[test]
    fn laplace_rejects_degenerate_inputs() {
        let (p, h) = canonical();
        let cfg = SdeConfig::new(0.0, 1e-2, 3).unwrap();
        assert!(laplace_estimate(&Sequential, &p, &[0.0], &h, &cfg, 10).is_err());
        let cfg = SdeConfig::new(0.3, 1e-2, 3).unwrap();
        assert!(laplace_estimate(&Sequential, &p, &[0.0], &h, &cfg, 1).is_err());
        assert!(laplace_from_costs(0.3, &[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn laplace_estimate_is_reproducible_and_bounded() {
        let (p, h) = canonical();
        let cfg = SdeConfig::new(0.25, 1e-3, 9).unwrap();
        let a = laplace_estimate(&Sequential, &p, &[0.0], &h, &cfg, 400).unwrap();
        let b = laplace_estimate(&Sequential, &p, &[0.0], &h, &cfg, 400).unwrap();
        assert_eq!(a, b);
        assert!(a.estimate > 0.0 && a.estimate < 4.0);
    }

    #[test]
    fn laplace_from_costs_matches_direct_formula() {
        let costs = [0.3, 1.1, 0.7, 2.0];
        let eps: f64 = 0.8;
        let e2 = eps * eps;
        let direct = -e2 * libm::log(costs.iter().map(|c| libm::exp(-c / e2)).sum::<f64>() / 4.0);
        let e = laplace_from_costs(eps, &costs).unwrap();
        assert!((e.estimate - direct).abs() < 1e-14);
    }

    #[test]
    fn cost_functionals() {
        let phi = PiecewisePath::new(vec![0.0, 1.0], vec![vec![0.0], vec![3.0]], vec![vec![false]]).unwrap();
        let t = CostFunctional::terminal(vec![1.0], 1.0, 4.0).unwrap();
        assert_eq!(t.on_path(&phi), 4.0);
        let r = CostFunctional::Running { target: vec![0.0], weight: 1.0, cap: 10.0 };
        // int (3t)^2 = 3.
        assert!((r.on_path(&phi) - 3.0).abs() < 1e-13);
        let mut acc = r.accumulator();
        let n = 1000;
        for k in 0..=n {
            let s = k as f64 / n as f64;
            acc.observe(s, &[3.0 * s]);
        }
        assert!((acc.finish() - 3.0).abs() < 1e-5);
        assert!(CostFunctional::terminal(vec![1.0], 0.0, 4.0).is_err());
    }

    #[test]
    fn zero_cost_search_finds_the_free_path() {
        let (p, _) = canonical();
        let v =
            variational_infimum(&Sequential, &p, &[0.0], &CostFunctional::Constant(0.0), &SearchConfig::new(8, 2, 1))
                .unwrap();
        assert_eq!(v.value, 0.0);
        let c =
            variational_infimum(&Sequential, &p, &[0.0], &CostFunctional::Constant(0.4), &SearchConfig::new(8, 2, 1))
                .unwrap();
        assert_eq!(c.value, 0.4);
    }

    #[test]
    fn search_beats_hand_built_paths() {
        let (p, h) = canonical();
        let v = variational_infimum(&Sequential, &p, &[0.0], &h, &SearchConfig::new(8, 3, 5)).unwrap();
        for end in [0.0, 0.3, 0.6, 1.0] {
            let phi = PiecewisePath::from_nodes(&[0.0, 1.0], &[vec![0.0], vec![end]]).unwrap();
            let bound = rate_functional(&p, &phi).unwrap().total + h.on_path(&phi);
            assert!(v.value <= bound + 1e-12);
        }
        assert!(v.value <= 1.0 + 1e-12);
    }

    #[test]
    fn feedback_dynamics_follow_the_path() {
        let p = Problem::scalar(1.0, 0.0, 1.0).unwrap();
        let phi = PiecewisePath::new(
            vec![0.0, 0.5, 1.0],
            vec![vec![0.0], vec![0.5], vec![0.5]],
            vec![vec![false], vec![false]],
        )
        .unwrap();
        let ctl = FeedbackControl::new(&p, &phi).unwrap();
        let cfg = SdeConfig::new(0.0, 1e-3, 0).unwrap();
        let tr = crate::sde::simulate_with_control(&ctl, &NoControl, &[0.0], &cfg).unwrap();
        for (t, s) in tr.times().iter().zip(tr.states()) {
            assert!((s[0] - phi.eval(*t)[0]).abs() < 1e-9, "{t}");
        }
        // Zero pieces push back to zero from both sides.
        let stuck = PiecewisePath::new(vec![0.0, 1.0], vec![vec![0.0], vec![0.0]], vec![vec![true]]).unwrap();
        let ctl = FeedbackControl::new(&p, &stuck).unwrap();
        assert_eq!(ctl.targets(0.3, 0), (-1.0, 1.0));
        // At zero on the x <= 0 side: b1 = 1, so v = -1 - 1.
        assert_eq!(ctl.control_component(0.3, &[0.0], 0), -2.0);
    }

    #[test]
    fn feedback_cost_bounds_the_laplace_estimate() {
        let (p, h) = canonical();
        let phi = PiecewisePath::new(vec![0.0, 1.0], vec![vec![0.0], vec![0.0]], vec![vec![true]]).unwrap();
        let cfg = SdeConfig::new(0.35, 1e-3, 21).unwrap();
        let hv = laplace_estimate(&Sequential, &p, &[0.0], &h, &cfg, 2000).unwrap();
        let up = feedback_cost_estimate(&Sequential, &p, &phi, &h, &cfg, 2000).unwrap();
        assert!(hv.estimate <= up.mean + 3.0 * (hv.std_error + up.std_error), "{hv:?} {up:?}");
    }

    #[test]
    fn report_requires_decreasing_eps() {
        let (p, h) = canonical();
        let cfg = SdeConfig::new(0.5, 1e-2, 1).unwrap();
        assert!(ldp_report(&Sequential, &p, &[0.0], &h, &[0.25, 0.5], &cfg, 10, &SearchConfig::new(4, 1, 0)).is_err());
    }
}
