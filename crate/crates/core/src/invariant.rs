//! The Gibbs law `p_eps ~ exp(-(2 / eps^2) U)` with
//! `U(x) = |A x - y|^2 / 2 + mu |x|_1`, which is stationary for the lasso
//! diffusion, and checks of the exponential decay
//! `E|P_t f - E f|^2 <= exp(-t / C) var(f)` with `C = 4 tr Cov(p_eps)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{input, Error, Result};
use crate::exec::Executor;
use crate::linalg::soft_threshold;
use crate::problem::Problem;
use crate::quad::adaptive_simpson;
use crate::rng::{replica_seed, GaussianStream};
use crate::sde::{simulate_observed, NoControl, SdeConfig};
use crate::stats::{effective_sample_size, ols_slope, Summary};

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSpec {
    pub problem: Problem,
    pub eps: f64,
}

impl GibbsSpec {
    pub fn new(problem: Problem, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(input("eps must be positive and finite"));
        }
        Ok(Self { problem, eps })
    }

    fn beta(&self) -> f64 {
        2.0 / (self.eps * self.eps)
    }
}

/// `-(2 / eps^2) U(x)`.
pub fn log_density_unnorm(spec: &GibbsSpec, x: &[f64]) -> f64 {
    -spec.beta() * spec.problem.objective(x)
}

/// Moments of `p_eps` in one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// Normalising constant of `exp(log_density_unnorm)`.
    pub z: f64,
    pub log_z: f64,
    pub mean: f64,
    pub variance: f64,
    pub mean_abs: f64,
    /// The integration range is `[-radius, radius]`.
    pub radius: f64,
}

/// The one-dimensional density, its mode and a range outside which it is
/// below `1e-16` of its peak.
struct Density1d<'a> {
    spec: &'a GibbsSpec,
    mode: f64,
    peak: f64,
    radius: f64,
}

impl<'a> Density1d<'a> {
    fn new(spec: &'a GibbsSpec) -> Result<Self> {
        let p = &spec.problem;
        if p.dim() != 1 {
            return Err(Error::UnsupportedDimension(p.dim()));
        }
        // Minimiser of U: soft threshold of the least-squares normal equation.
        let a2: f64 = (0..p.n_obs()).map(|r| sq(p.a().get(r, 0))).sum();
        let ay: f64 = (0..p.n_obs()).map(|r| p.a().get(r, 0) * p.y()[r]).sum();
        let mode = if a2 > 0.0 { soft_threshold(ay, p.mu()) / a2 } else { 0.0 };
        let peak = log_density_unnorm(spec, &[mode]);
        let cut = libm::log(1e-16);
        let mut radius = mode.abs() + 1.0;
        while log_density_unnorm(spec, &[radius]) - peak > cut || log_density_unnorm(spec, &[-radius]) - peak > cut {
            radius *= 2.0;
            if radius > 1e12 {
                return Err(Error::Numerical("density tails do not decay".into()));
            }
        }
        Ok(Self { spec, mode, peak, radius })
    }

    /// Density relative to its peak.
    fn rel(&self, x: f64) -> f64 {
        libm::exp(log_density_unnorm(self.spec, &[x]) - self.peak)
    }

    /// `int g(x) rel(x) dx` over the range, split at the kinks.
    fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let mut cuts = vec![-self.radius, 0.0, self.mode, self.radius];
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2).map(|w| adaptive_simpson(w[0], w[1], 1e-14 * self.radius, 50, |x| g(x) * self.rel(x))).sum()
    }
}

/// Normalisation and moments of the one-dimensional Gibbs law by adaptive
/// Simpson quadrature.
pub fn quadrature_moments_1d(spec: &GibbsSpec) -> Result<Moments> {
    let dens = Density1d::new(spec)?;
    let z_rel = dens.integrate(|_| 1.0);
    let mean = dens.integrate(|x| x) / z_rel;
    let variance = dens.integrate(|x| (x - mean) * (x - mean)) / z_rel;
    let mean_abs = dens.integrate(f64::abs) / z_rel;
    let log_z = dens.peak + libm::log(z_rel);
    Ok(Moments { z: libm::exp(log_z), log_z, mean, variance, mean_abs, radius: dens.radius })
}

/// Time averages along one long path.
#[derive(Debug, Clone, PartialEq)]
pub struct LangevinMoments {
    /// Per coordinate.
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub mean_abs: Vec<f64>,
    /// Effective sample sizes of `x_i` and `|x_i|`.
    pub ess: Vec<f64>,
    pub ess_abs: Vec<f64>,
    /// `sqrt(variance / ess)`, and the same for `|x_i|`.
    pub std_error_mean: Vec<f64>,
    pub std_error_abs: Vec<f64>,
    /// Number of (thinned) samples kept after burn-in.
    pub samples: usize,
}

/// Samples are kept every `0.01` time units (at least every step).
const SAMPLE_SPACING: f64 = 0.01;

/// Ergodic averages of one path of the lasso diffusion started at the lasso
/// minimiser (`cfg.horizon` should be long); the first `burn_in` fraction
/// of the horizon is discarded.
pub fn langevin_moments(spec: &GibbsSpec, cfg: &SdeConfig, burn_in: f64) -> Result<LangevinMoments> {
    if !(0.0..1.0).contains(&burn_in) {
        return Err(input("burn_in must lie in [0, 1)"));
    }
    let p = &spec.problem;
    let d = p.dim();
    let cfg = SdeConfig { eps: spec.eps, ..*cfg };
    cfg.validate()?;
    let x0 = match p.lasso_solve(1e-10, 100_000) {
        Ok(s) => s.x,
        Err(Error::NotConverged { iterate, .. }) => iterate,
        Err(e) => return Err(e),
    };
    let stride = libm::ceil(SAMPLE_SPACING / cfg.dt).max(1.0) as usize;
    let t_burn = burn_in * cfg.horizon;
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); d];
    simulate_observed(p, &NoControl, &x0, &cfg, |k, t, x| {
        if k % stride == 0 && t >= t_burn {
            for (s, v) in series.iter_mut().zip(x) {
                s.push(*v);
            }
        }
    })?;
    let samples = series[0].len();
    if samples < 4 {
        return Err(input("too few samples after burn-in; lengthen the horizon"));
    }
    let mut out = LangevinMoments {
        mean: Vec::with_capacity(d),
        variance: Vec::with_capacity(d),
        mean_abs: Vec::with_capacity(d),
        ess: Vec::with_capacity(d),
        ess_abs: Vec::with_capacity(d),
        std_error_mean: Vec::with_capacity(d),
        std_error_abs: Vec::with_capacity(d),
        samples,
    };
    for s in &series {
        let sm = Summary::of(s);
        let abs: Vec<f64> = s.iter().map(|v| v.abs()).collect();
        let sa = Summary::of(&abs);
        let ess = effective_sample_size(s);
        let ess_abs = effective_sample_size(&abs);
        out.mean.push(sm.mean);
        out.variance.push(sm.variance);
        out.mean_abs.push(sa.mean);
        out.std_error_mean.push(libm::sqrt(sm.variance / ess));
        out.std_error_abs.push(libm::sqrt(sa.variance / ess_abs));
        out.ess.push(ess);
        out.ess_abs.push(ess_abs);
    }
    Ok(out)
}

/// `C = 4 var(p_eps)` from quadrature (one dimension only).
pub fn poincare_constant(spec: &GibbsSpec) -> Result<f64> {
    Ok(4.0 * quadrature_moments_1d(spec)?.variance)
}

/// `C = 4 tr Cov(p_eps)` from ergodic averages, for any dimension.
pub fn poincare_constant_ergodic(spec: &GibbsSpec, cfg: &SdeConfig, burn_in: f64) -> Result<f64> {
    Ok(4.0 * langevin_moments(spec, cfg, burn_in)?.variance.iter().sum::<f64>())
}

/// The observable `f` in the decay check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    Coordinate(usize),
    Abs(usize),
    /// `|x|^2`.
    Quadratic,
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            TestFunction::Coordinate(i) => x[i],
            TestFunction::Abs(i) => x[i].abs(),
            TestFunction::Quadratic => x.iter().map(|v| v * v).sum(),
        }
    }

    fn check(&self, d: usize) -> Result<()> {
        match *self {
            TestFunction::Coordinate(i) | TestFunction::Abs(i) if i >= d => {
                Err(input("test function coordinate out of range"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub t: f64,
    /// Estimate of `E |E[f(x_t) | x_0] - E f|^2`, corrected for inner noise.
    pub cond_var: f64,
    /// `exp(-t / C) var(f)`.
    pub bound: f64,
    pub std_error: f64,
    /// `cond_var <= bound + 3 std_error`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    pub poincare: f64,
    pub mean_f: f64,
    pub var_f: f64,
    /// `-slope` of `ln cond_var` against `t` over rows with positive
    /// `cond_var` and `t > 0` (NaN when fewer than two such rows).
    pub decay_rate: f64,
    pub outer: usize,
    pub inner: usize,
}

impl DecayReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// Inverse CDF of the one-dimensional Gibbs law on a fine grid.
struct InverseCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    fn new(spec: &GibbsSpec) -> Result<Self> {
        let dens = Density1d::new(spec)?;
        let n = 20_000;
        let r = dens.radius;
        let xs: Vec<f64> = (0..=n).map(|k| -r + 2.0 * r * k as f64 / n as f64).collect();
        let mut cdf = vec![0.0; n + 1];
        for k in 0..n {
            // Simpson on each cell.
            let (a, b) = (xs[k], xs[k + 1]);
            let m = 0.5 * (a + b);
            cdf[k + 1] = cdf[k] + (b - a) / 6.0 * (dens.rel(a) + 4.0 * dens.rel(m) + dens.rel(b));
        }
        let total = cdf[n];
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Ok(Self { xs, cdf })
    }

    fn sample(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let theta = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[k - 1] + theta * (self.xs[k] - self.xs[k - 1])
    }
}

/// Nested Monte Carlo check of the exponential decay bound.
///
/// `outer` initial points are drawn from `p_eps` (by inverse CDF in one
/// dimension, otherwise by running the diffusion from the lasso minimiser
/// for ten times the Poincaré constant); from each, `inner` paths estimate
/// `E[f(x_t) | x_0]` at every `t` in `times`.
#[allow(clippy::too_many_arguments)]
pub fn variance_decay_check<E: Executor + ?Sized>(
    exec: &E,
    spec: &GibbsSpec,
    cfg: &SdeConfig,
    test_fn: TestFunction,
    times: &[f64],
    outer: usize,
    inner: usize,
) -> Result<DecayReport> {
    if outer < 100 {
        return Err(input("the decay check needs at least 100 outer replicas"));
    }
    if inner < 2 {
        return Err(input("the decay check needs at least two inner replicas"));
    }
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(input("decay times must be non-negative and increasing"));
    }
    let p = &spec.problem;
    let d = p.dim();
    test_fn.check(d)?;
    let cfg = SdeConfig { eps: spec.eps, ..*cfg };
    cfg.validate()?;
    let t_max = *times.last().unwrap();
    let index_of = |t: f64| libm::round(t / cfg.dt) as usize;

    // Initial law, E f, var f and C.
    let (initial, mean_f, var_f, poincare): (Vec<Vec<f64>>, f64, f64, f64) = if d == 1 {
        let icdf = InverseCdf::new(spec)?;
        let dens = Density1d::new(spec)?;
        let z = dens.integrate(|_| 1.0);
        let mean_f = dens.integrate(|x| test_fn.eval(&[x])) / z;
        let var_f = dens.integrate(|x| sq(test_fn.eval(&[x]) - mean_f)) / z;
        let init = (0..outer)
            .map(|r| {
                let (u, _) = GaussianStream::new(replica_seed(cfg.seed, r as u64)).uniform_pair(0);
                vec![icdf.sample(u)]
            })
            .collect();
        (init, mean_f, var_f, poincare_constant(spec)?)
    } else {
        let long = cfg.with_horizon(1000.0)?;
        let c = poincare_constant_ergodic(spec, &long, 0.1)?;
        let warm = cfg.with_horizon((10.0 * c).max(cfg.dt))?;
        let start = match p.lasso_solve(1e-10, 100_000) {
            Ok(s) => s.x,
            Err(Error::NotConverged { iterate, .. }) => iterate,
            Err(e) => return Err(e),
        };
        let init: Vec<Vec<f64>> = exec
            .map_indexed(outer, |r| {
                let wcfg = warm.with_seed(replica_seed(replica_seed(cfg.seed, r as u64), u64::MAX));
                simulate_observed(p, &NoControl, &start, &wcfg, |_, _, _| {})
            })
            .into_iter()
            .collect::<Result<_>>()?;
        let fs: Vec<f64> = init.iter().map(|x| test_fn.eval(x)).collect();
        let s = Summary::of(&fs);
        (init, s.mean, s.variance, c)
    };

    // Conditional means: per outer replica, per time, (mean, variance) over inner paths.
    let run_cfg = cfg.with_horizon(t_max.max(cfg.dt))?;
    let per_outer: Vec<Vec<(f64, f64)>> = exec
        .map_indexed(outer, |r| -> Result<Vec<(f64, f64)>> {
            let base = replica_seed(cfg.seed, r as u64);
            let mut vals = vec![Vec::with_capacity(inner); times.len()];
            for j in 0..inner {
                let jcfg = run_cfg.with_seed(replica_seed(base, j as u64));
                let mut next = 0usize;
                simulate_observed(p, &NoControl, &initial[r], &jcfg, |k, _, x| {
                    while next < times.len() && index_of(times[next]) == k {
                        vals[next].push(test_fn.eval(x));
                        next += 1;
                    }
                })?;
            }
            Ok(vals
                .iter()
                .map(|v| {
                    let s = Summary::of(v);
                    (s.mean, s.variance)
                })
                .collect())
        })
        .into_iter()
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(times.len());
    for (ti, &t) in times.iter().enumerate() {
        let terms: Vec<f64> = per_outer
            .iter()
            .map(|v| {
                let (m, s2) = v[ti];
                sq(m - mean_f) - s2 / inner as f64
            })
            .collect();
        let s = Summary::of(&terms);
        let bound = libm::exp(-t / poincare) * var_f;
        rows.push(DecayRow {
            t,
            cond_var: s.mean,
            bound,
            std_error: s.std_error,
            holds: s.mean <= bound + 3.0 * s.std_error,
        });
    }
    let (ts, logs): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.t > 0.0 && r.cond_var > 0.0).map(|r| (r.t, libm::log(r.cond_var))).unzip();
    let decay_rate = if ts.len() >= 2 { -ols_slope(&ts, &logs) } else { f64::NAN };
    Ok(DecayReport { rows, poincare, mean_f, var_f, decay_rate, outer, inner })
}

#[inline]
fn sq(u: f64) -> f64 {
    u * u
}
