//! JSON inputs and reports, CSV outputs.
//!
//! Floats in CSV are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly. Every output starts with a header line
//! that carries the resolved run configuration and seed.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use lassodiff_core::invariant::{DecayReport, LangevinMoments, Moments};
use lassodiff_core::ldp::{CostFunctional, LaplaceEstimate, LdpReport, VariationalResult};
use lassodiff_core::rate::{RateBreakdown, SampledPath};
use lassodiff_core::sde::EnsembleSummary;
use lassodiff_core::{ForcingPath, PiecewiseConstant, PiecewisePath, Problem, Trajectory};
use serde::{Deserialize, Serialize};

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub mu: f64,
}

impl ProblemJson {
    pub fn to_problem(&self) -> Result<Problem> {
        Ok(Problem::from_rows(&self.a, self.y.clone(), self.mu)?)
    }

    pub fn from_problem(p: &Problem) -> Self {
        Self { a: p.a().to_rows(), y: p.y().to_vec(), mu: p.mu() }
    }
}

/// Step function: forcings and controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepJson {
    pub breakpoints: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl StepJson {
    pub fn to_step(&self) -> Result<ForcingPath> {
        Ok(PiecewiseConstant::new(self.breakpoints.clone(), self.values.clone())?)
    }

    pub fn from_step(f: &PiecewiseConstant) -> Self {
        Self { breakpoints: f.breakpoints().to_vec(), values: f.values().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathJson {
    pub breakpoints: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub zero_flags: Vec<Vec<bool>>,
}

impl PathJson {
    pub fn to_path(&self) -> Result<PiecewisePath> {
        Ok(PiecewisePath::new(self.breakpoints.clone(), self.values.clone(), self.zero_flags.clone())?)
    }

    pub fn from_path(p: &PiecewisePath) -> Self {
        Self { breakpoints: p.breakpoints().to_vec(), values: p.values().to_vec(), zero_flags: p.zero_flags().to_vec() }
    }
}

/// Time samples of a path, the input of `mollify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesJson {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl SamplesJson {
    pub fn to_samples(&self) -> Result<SampledPath> {
        Ok(SampledPath::new(self.times.clone(), self.states.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostJson {
    Terminal { target: Vec<f64>, weight: f64, cap: f64 },
    Running { target: Vec<f64>, weight: f64, cap: f64 },
    Constant { value: f64 },
}

impl CostJson {
    pub fn to_cost(&self) -> Result<CostFunctional> {
        let h = match self.clone() {
            CostJson::Terminal { target, weight, cap } => CostFunctional::Terminal { target, weight, cap },
            CostJson::Running { target, weight, cap } => CostFunctional::Running { target, weight, cap },
            CostJson::Constant { value } => CostFunctional::Constant(value),
        };
        h.validate()?;
        Ok(h)
    }

    pub fn from_cost(h: &CostFunctional) -> Self {
        match h.clone() {
            CostFunctional::Terminal { target, weight, cap } => CostJson::Terminal { target, weight, cap },
            CostFunctional::Running { target, weight, cap } => CostJson::Running { target, weight, cap },
            CostFunctional::Constant(value) => CostJson::Constant { value },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateJson {
    pub eps: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalJson {
    pub value: f64,
    pub rate: f64,
    pub cost: f64,
    pub start: usize,
    pub path: PathJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpReportJson {
    pub eps_values: Vec<f64>,
    pub estimates: Vec<EstimateJson>,
    pub variational: VariationalJson,
    pub gaps: Vec<f64>,
    pub trend_slope: f64,
    pub dt: f64,
    pub replicas: usize,
    pub seed: u64,
    pub m: usize,
    pub multistarts: usize,
}

impl LdpReportJson {
    pub fn from_report(r: &LdpReport) -> Self {
        Self {
            eps_values: r.eps_values.clone(),
            estimates: r
                .estimates
                .iter()
                .map(|e| EstimateJson {
                    eps: e.eps,
                    estimate: e.estimate,
                    std_error: e.std_error,
                    replicas: e.replicas,
                })
                .collect(),
            variational: VariationalJson {
                value: r.variational.value,
                rate: r.variational.rate,
                cost: r.variational.cost,
                start: r.variational.start,
                path: PathJson::from_path(&r.variational.path),
            },
            gaps: r.gaps.clone(),
            trend_slope: r.trend_slope,
            dt: r.dt,
            replicas: r.replicas,
            seed: r.seed,
            m: r.m,
            multistarts: r.multistarts,
        }
    }

    pub fn to_report(&self) -> Result<LdpReport> {
        if self.estimates.len() != self.eps_values.len() || self.gaps.len() != self.eps_values.len() {
            bail!("report lists have different lengths");
        }
        Ok(LdpReport {
            eps_values: self.eps_values.clone(),
            estimates: self
                .estimates
                .iter()
                .map(|e| LaplaceEstimate {
                    eps: e.eps,
                    estimate: e.estimate,
                    std_error: e.std_error,
                    replicas: e.replicas,
                })
                .collect(),
            variational: VariationalResult {
                value: self.variational.value,
                rate: self.variational.rate,
                cost: self.variational.cost,
                path: self.variational.path.to_path()?,
                start: self.variational.start,
            },
            gaps: self.gaps.clone(),
            trend_slope: self.trend_slope,
            dt: self.dt,
            replicas: self.replicas,
            seed: self.seed,
            m: self.m,
            multistarts: self.multistarts,
        })
    }
}

fn header_line(out: &mut String, header: &str) {
    let _ = writeln!(out, "# {header}");
}

pub fn trajectory_csv(header: &str, traj: &Trajectory) -> String {
    let d = traj.dim();
    let mut s = String::new();
    header_line(&mut s, header);
    s.push('t');
    for i in 1..=d {
        let _ = write!(s, ",x_{i}");
    }
    s.push_str(",frozen_mask\n");
    for k in 0..traj.len() {
        s.push_str(&num(traj.times()[k]));
        for &v in traj.state(k) {
            s.push(',');
            s.push_str(&num(v));
        }
        s.push(',');
        s.extend(traj.frozen(k).iter().map(|&z| if z { '1' } else { '0' }));
        s.push('\n');
    }
    s
}

pub fn ensemble_csv(header: &str, ens: &EnsembleSummary) -> String {
    let d = ens.terminal.len();
    let mut s = String::new();
    header_line(&mut s, header);
    s.push_str("replica,seed");
    for i in 1..=d {
        let _ = write!(s, ",terminal_{i}");
    }
    for i in 1..=d {
        let _ = write!(s, ",occupation_pos_{i}");
    }
    s.push('\n');
    for r in &ens.records {
        let _ = write!(s, "{},{}", r.replica, r.seed);
        for &v in r.terminal.iter().chain(&r.occupation_pos) {
            s.push(',');
            s.push_str(&num(v));
        }
        s.push('\n');
    }
    s
}

/// Rows carry the halved contributions, so they add up to the total row.
pub fn rate_csv(header: &str, rb: &RateBreakdown) -> String {
    let mut s = String::new();
    header_line(&mut s, header);
    s.push_str("interval,coord,branch,contribution\n");
    for (k, (row, br)) in rb.per_interval.iter().zip(&rb.branch_used).enumerate() {
        for (i, (&c, b)) in row.iter().zip(br).enumerate() {
            let _ = writeln!(s, "{},{},{},{}", k + 1, i + 1, b, num(0.5 * c));
        }
    }
    let _ = writeln!(s, "total,,,{}", num(rb.total));
    s
}

pub fn decay_csv(header: &str, rep: &DecayReport) -> String {
    let mut s = String::new();
    header_line(&mut s, header);
    s.push_str("t,cond_var,bound,stderr\n");
    for r in &rep.rows {
        let _ = writeln!(s, "{},{},{},{}", num(r.t), num(r.cond_var), num(r.bound), num(r.std_error));
    }
    s
}

pub fn ldp_csv(header: &str, r: &LdpReport) -> String {
    let mut s = String::new();
    header_line(&mut s, header);
    s.push_str("eps,H,stderr,gap\n");
    for (e, gap) in r.estimates.iter().zip(&r.gaps) {
        let _ = writeln!(s, "{},{},{},{}", num(e.eps), num(e.estimate), num(e.std_error), num(*gap));
    }
    s
}

/// Quadrature (d = 1 only) next to the Langevin ergodic averages.
pub fn moments_csv(header: &str, quad: Option<&Moments>, lang: &LangevinMoments) -> String {
    let mut s = String::new();
    header_line(&mut s, header);
    s.push_str("coord,quantity,quadrature,langevin,stderr\n");
    let blank = String::new();
    for i in 0..lang.mean.len() {
        let q = |f: fn(&Moments) -> f64| quad.map(|m| num(f(m))).unwrap_or_else(|| blank.clone());
        let c = i + 1;
        let _ = writeln!(s, "{c},mean,{},{},{}", q(|m| m.mean), num(lang.mean[i]), num(lang.std_error_mean[i]));
        let _ =
            writeln!(s, "{c},mean_abs,{},{},{}", q(|m| m.mean_abs), num(lang.mean_abs[i]), num(lang.std_error_abs[i]));
        let _ = writeln!(s, "{c},variance,{},{},", q(|m| m.variance), num(lang.variance[i]));
    }
    s
}
