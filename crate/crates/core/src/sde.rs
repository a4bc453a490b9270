//! Euler schemes for the lasso diffusion, the forced diffusion and the
//! controlled diffusion.
//!
//! Every scheme reads its noise from a [`GaussianStream`] keyed by the
//! configured seed: step `k` always consumes the same normals, so two schemes
//! (or two controls) run with one seed see the same Brownian increments.

use alloc::vec;
use alloc::vec::Vec;

use crate::drift::{DriftModel, ForcedDrift};
use crate::error::{check_len, input, Result};
use crate::exec::Executor;
use crate::inclusion::grid;
use crate::linalg::{sign0, soft_threshold};
use crate::path::{ControlPath, ForcingPath, Trajectory};
use crate::problem::Problem;
use crate::rng::{replica_seed, GaussianStream};
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// `x+ = prox_{dt mu |.|_1}(x + dt F(x) + eps sqrt(dt) xi)`; produces exact zeros.
    #[default]
    ProximalSplitting,
    /// `x+ = x + dt (F(x) - mu sgn(x)) + eps sqrt(dt) xi` with `sgn(0) = 0`.
    ExplicitSign,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeConfig {
    pub eps: f64,
    pub dt: f64,
    pub horizon: f64,
    pub scheme: Scheme,
    pub seed: u64,
}

impl SdeConfig {
    /// Horizon 1 and the proximal scheme.
    pub fn new(eps: f64, dt: f64, seed: u64) -> Result<Self> {
        let cfg = Self { eps, dt, horizon: 1.0, scheme: Scheme::default(), seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        self.eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(input("dt must be positive and finite"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(input("horizon must be positive and finite"));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(input("eps must be non-negative and finite"));
        }
        Ok(())
    }

    /// Number of grid steps on `[0, horizon]`.
    pub fn steps(&self) -> usize {
        grid(self.horizon, self.dt).0
    }
}

/// An additive control `v(t, x)` on top of a drift.
pub trait Control: Sync {
    fn add_into(&self, t: f64, x: &[f64], out: &mut [f64]);
}

/// The zero control.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoControl;

impl Control for NoControl {
    #[inline]
    fn add_into(&self, _t: f64, _x: &[f64], _out: &mut [f64]) {}
}

impl Control for ControlPath {
    fn add_into(&self, t: f64, _x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(self.value_at(t)) {
            *o += v;
        }
    }
}

/// Streams one path: calls `observe(k, t_k, x_k)` at every grid point,
/// including `t_0 = 0`, and returns the terminal state.
pub fn simulate_observed<M, V, O>(
    model: &M,
    control: &V,
    x0: &[f64],
    cfg: &SdeConfig,
    mut observe: O,
) -> Result<Vec<f64>>
where
    M: DriftModel + ?Sized,
    V: Control + ?Sized,
    O: FnMut(usize, f64, &[f64]),
{
    cfg.validate()?;
    let d = model.dim();
    check_len(d, x0.len())?;
    let mu = model.mu();
    let stream = GaussianStream::new(cfg.seed);
    let (steps, time_of) = grid(cfg.horizon, cfg.dt);

    let mut x = x0.to_vec();
    let mut drift = vec![0.0; d];
    let mut xi = vec![0.0; d];
    observe(0, 0.0, &x);
    for k in 0..steps {
        let t = time_of(k);
        let h = time_of(k + 1) - t;
        model.force_into(t, &x, &mut drift);
        control.add_into(t, &x, &mut drift);
        let noise = cfg.eps * libm::sqrt(h);
        if noise != 0.0 {
            stream.fill_step(k as u64, &mut xi);
        }
        match cfg.scheme {
            Scheme::ProximalSplitting => {
                for i in 0..d {
                    let u = x[i] + h * drift[i] + if noise != 0.0 { noise * xi[i] } else { 0.0 };
                    x[i] = soft_threshold(u, h * mu);
                }
            }
            Scheme::ExplicitSign => {
                for i in 0..d {
                    let dx = h * (drift[i] - mu * sign0(x[i]));
                    x[i] += dx + if noise != 0.0 { noise * xi[i] } else { 0.0 };
                }
            }
        }
        observe(k + 1, time_of(k + 1), &x);
    }
    Ok(x)
}

fn record<M, V>(model: &M, control: &V, x0: &[f64], cfg: &SdeConfig) -> Result<Trajectory>
where
    M: DriftModel + ?Sized,
    V: Control + ?Sized,
{
    let d = model.dim();
    let mu = model.mu();
    let mut traj = Trajectory::with_capacity(d, cfg.steps() + 1);
    let mut force = vec![0.0; d];
    let mut frozen = vec![false; d];
    simulate_observed(model, control, x0, cfg, |_, t, x| {
        model.force_into(t, x, &mut force);
        control.add_into(t, x, &mut force);
        for i in 0..d {
            frozen[i] = x[i] == 0.0 && force[i].abs() <= mu;
        }
        traj.push(t, x, &frozen);
    })?;
    Ok(traj)
}

/// The lasso diffusion `dx = -{A^T (A x - y) + mu sgn(x)} dt + eps dw`.
pub fn simulate(p: &Problem, x0: &[f64], cfg: &SdeConfig) -> Result<Trajectory> {
    record(p, &NoControl, x0, cfg)
}

/// The forced diffusion `dx = {f(t) - mu sgn(x)} dt + eps dw`.
pub fn simulate_forced(f: &ForcingPath, mu: f64, x0: &[f64], cfg: &SdeConfig) -> Result<Trajectory> {
    let model = ForcedDrift::new(f.clone(), mu)?;
    record(&model, &NoControl, x0, cfg)
}

/// The controlled diffusion `dx = {b(x) + v(t)} dt + eps dw`.
pub fn simulate_controlled(p: &Problem, v: &ControlPath, x0: &[f64], cfg: &SdeConfig) -> Result<Trajectory> {
    check_len(p.dim(), v.dim())?;
    record(p, v, x0, cfg)
}

/// Same as [`simulate_controlled`] for any (possibly state-feedback) control.
pub fn simulate_with_control<M, V>(model: &M, v: &V, x0: &[f64], cfg: &SdeConfig) -> Result<Trajectory>
where
    M: DriftModel + ?Sized,
    V: Control + ?Sized,
{
    record(model, v, x0, cfg)
}

/// `(fraction of time with x_i <= 0, fraction with x_i > 0)`.
pub fn empirical_occupation(traj: &Trajectory, i: usize) -> Result<(f64, f64)> {
    traj.occupation(i)
}

/// Runs `run(replica, seed)` for every replica, with
/// `seed = replica_seed(base_seed, replica)`, and returns `(seed, result)` in
/// replica order. The first error in replica order wins.
pub fn ensemble<E, R, F>(exec: &E, replicas: usize, base_seed: u64, run: F) -> Result<Vec<(u64, R)>>
where
    E: Executor + ?Sized,
    R: Send,
    F: Fn(usize, u64) -> Result<R> + Sync + Send,
{
    if replicas == 0 {
        return Err(input("an ensemble needs at least one replica"));
    }
    exec.map_indexed(replicas, |r| {
        let seed = replica_seed(base_seed, r as u64);
        run(r, seed).map(|out| (seed, out))
    })
    .into_iter()
    .collect()
}

/// Per-replica terminal state and positive-time fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRecord {
    pub replica: usize,
    pub seed: u64,
    pub terminal: Vec<f64>,
    pub occupation_pos: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub records: Vec<ReplicaRecord>,
    /// One summary per coordinate.
    pub terminal: Vec<Summary>,
    pub occupation_pos: Vec<Summary>,
}

/// Ensemble of paths of `model + control`, summarised without storing paths.
///
/// `cfg.seed` is the base seed; replica `r` runs with
/// `replica_seed(cfg.seed, r)`.
pub fn ensemble_summary<E, M, V>(
    exec: &E,
    model: &M,
    control: &V,
    x0: &[f64],
    cfg: &SdeConfig,
    replicas: usize,
) -> Result<EnsembleSummary>
where
    E: Executor + ?Sized,
    M: DriftModel + ?Sized,
    V: Control + ?Sized,
{
    let d = model.dim();
    let runs = ensemble(exec, replicas, cfg.seed, |_, seed| {
        let rcfg = cfg.with_seed(seed);
        let mut positive = vec![0.0; d];
        let mut prev_t = 0.0;
        let mut prev_pos = vec![false; d];
        let terminal = simulate_observed(model, control, x0, &rcfg, |k, t, x| {
            if k > 0 {
                for i in 0..d {
                    if prev_pos[i] {
                        positive[i] += t - prev_t;
                    }
                }
            }
            prev_t = t;
            for i in 0..d {
                prev_pos[i] = x[i] > 0.0;
            }
        })?;
        for p in positive.iter_mut() {
            *p /= rcfg.horizon;
        }
        Ok((terminal, positive))
    })?;

    let records: Vec<ReplicaRecord> = runs
        .into_iter()
        .enumerate()
        .map(|(replica, (seed, (terminal, occupation_pos)))| ReplicaRecord { replica, seed, terminal, occupation_pos })
        .collect();
    let column = |f: &dyn Fn(&ReplicaRecord) -> f64| Summary::of(&records.iter().map(f).collect::<Vec<_>>());
    let terminal = (0..d).map(|i| column(&|r| r.terminal[i])).collect();
    let occupation_pos = (0..d).map(|i| column(&|r| r.occupation_pos[i])).collect();
    Ok(EnsembleSummary { records, terminal, occupation_pos })
}
