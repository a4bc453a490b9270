//! The `lassodiff` command line.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use lassodiff_core::inclusion::{exact_piecewise_flow, integrate_sticky};
use lassodiff_core::invariant::{
    langevin_moments, quadrature_moments_1d, variance_decay_check, GibbsSpec, TestFunction,
};
use lassodiff_core::ldp::{ldp_report, SearchConfig};
use lassodiff_core::rate::{mollify, rate_functional, SampledPath};
use lassodiff_core::rng::replica_seed;
use lassodiff_core::sde::{ensemble_summary, simulate_with_control, NoControl, Scheme, SdeConfig};
use lassodiff_core::{ControlPath, Error, ForcedDrift};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{merge_params, RunConfig, DEFAULT_SEED};
use crate::exec::RayonExecutor;
use crate::formats::{self, num, LdpReportJson, PathJson};

#[derive(Debug, Parser)]
#[command(
    name = "lassodiff",
    version,
    about = "Lasso diffusion: sticky flow, small-noise simulation, rate functional and Laplace checks"
)]
pub struct Cli {
    /// JSON run configuration (inputs, seed, output directory, parameter overrides)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Base seed of all randomness [default: the config's "seed", else 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory [default: the config's "out", else "."]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for ensembles and multistarts (0: one per core); never changes results
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the lasso by proximal gradient; writes lasso.json
    Lasso(LassoArgs),
    /// Integrate the sticky inclusion (forced when the config has a forcing); writes trajectory.csv
    Flow(FlowArgs),
    /// Simulate the diffusion; writes trajectory.csv (replica 0) and ensemble.csv
    Simulate(SimulateArgs),
    /// Rate functional of the config's "path"; writes rate.csv
    Rate(RateArgs),
    /// Mollify the config's "samples" (or sampled "path") into a regular path; writes mollified.json
    Mollify(MollifyArgs),
    /// Laplace estimates against the variational infimum; writes ldp.json and ldp.csv
    Ldp(LdpArgs),
    /// Moments of the invariant law and the variance decay check; writes moments.csv and decay.csv
    Gibbs(GibbsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    /// Proximal splitting (exact zeros)
    Prox,
    /// Explicit sign with sgn(0) = 0
    Explicit,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Prox => Scheme::ProximalSplitting,
            SchemeArg::Explicit => Scheme::ExplicitSign,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LassoArgs {
    /// KKT residual tolerance
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowArgs {
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Output grid spacing (crossings are located exactly)
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    /// Coordinates within this distance of zero count as zero
    #[arg(long, default_value_t = 1e-12)]
    pub tol_zero: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Prox)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateArgs {
    /// Split every piece of the path into this many equal parts first
    #[arg(long, default_value_t = 1)]
    pub refine: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifyArgs {
    /// Allowed sup-distance to the input
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Uniform samples taken when the input is a "path" rather than "samples"
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpArgs {
    /// Noise levels, strictly decreasing
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.35, 0.25])]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Replicas per noise level
    #[arg(long, default_value_t = 100_000)]
    pub replicas: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Prox)]
    pub scheme: SchemeArg,
    /// Path nodes in the variational search
    #[arg(long, default_value_t = 32)]
    pub m: usize,
    #[arg(long, default_value_t = 16)]
    pub multistarts: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsArgs {
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Length of the Langevin run
    #[arg(long, default_value_t = 1000.0)]
    pub horizon: f64,
    /// Fraction of the Langevin run discarded
    #[arg(long, default_value_t = 0.05)]
    pub burn_in: f64,
    /// Times of the decay check
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 1.0, 2.0])]
    pub decay_times: Vec<f64>,
    /// Test function: coord:I, abs:I (1-based) or quadratic
    #[arg(long, default_value = "coord:1")]
    pub test_fn: String,
    #[arg(long, default_value_t = 400)]
    pub outer: usize,
    #[arg(long, default_value_t = 20)]
    pub inner: usize,
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code: 0 success, 1 usage or configuration, 2 numerical failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    match dispatch(&cli, &matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(Error::Input(_)) | Some(Error::Dimension { .. }) | None => 1,
        Some(_) => 2,
    }
}

struct Ctx {
    cfg: RunConfig,
    seed: u64,
    out: PathBuf,
    exec: RayonExecutor,
}

impl Ctx {
    /// First line of every output. Leaves out the thread count and the
    /// output directory so reruns compare byte for byte.
    fn header<P: Serialize>(&self, command: &str, params: &P) -> Result<String> {
        let v = json!({
            "command": command,
            "seed": self.seed,
            "params": params,
            "inputs": self.cfg.inputs,
        });
        Ok(serde_json::to_string(&v)?)
    }

    fn write(&self, name: &str, body: &str) -> Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("cannot create {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }

    /// JSON outputs carry the header as their `run` member.
    fn write_json(&self, name: &str, header: &str, body: Value) -> Result<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("run".into(), serde_json::from_str(header)?);
        match body {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("result".into(), other);
            }
        }
        self.write(name, &(serde_json::to_string_pretty(&Value::Object(obj))? + "\n"))
    }
}

fn params<T>(defaults: &T, cfg: &RunConfig, sub: &ArgMatches) -> Result<T>
where
    T: Serialize + DeserializeOwned,
{
    merge_params(defaults, &cfg.params, |k| sub.value_source(k) == Some(ValueSource::CommandLine))
}

fn dispatch(cli: &Cli, matches: &ArgMatches) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        out: cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
        exec: RayonExecutor::new(cli.threads)?,
        cfg,
    };
    let (_, sub) = matches.subcommand().ok_or_else(|| anyhow!("missing subcommand"))?;
    match &cli.command {
        Command::Lasso(a) => cmd_lasso(&ctx, &params(a, &ctx.cfg, sub)?),
        Command::Flow(a) => cmd_flow(&ctx, &params(a, &ctx.cfg, sub)?),
        Command::Simulate(a) => cmd_simulate(&ctx, &params(a, &ctx.cfg, sub)?),
        Command::Rate(a) => cmd_rate(&ctx, &params(a, &ctx.cfg, sub)?),
        Command::Mollify(a) => cmd_mollify(&ctx, &params(a, &ctx.cfg, sub)?),
        Command::Ldp(a) => cmd_ldp(&ctx, &params(a, &ctx.cfg, sub)?),
        Command::Gibbs(a) => cmd_gibbs(&ctx, &params(a, &ctx.cfg, sub)?),
    }
}

fn fmt_vec(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn cmd_lasso(ctx: &Ctx, a: &LassoArgs) -> Result<()> {
    let p = ctx.cfg.problem()?;
    let header = ctx.header("lasso", a)?;
    match p.lasso_solve(a.tol, a.max_iter) {
        Ok(sol) => {
            println!("x* = {}", fmt_vec(&sol.x));
            println!("kkt residual = {:e}", sol.kkt_residual);
            println!("iterations = {}", sol.iterations);
            ctx.write_json(
                "lasso.json",
                &header,
                json!({"converged": true, "x": sol.x, "kkt_residual": sol.kkt_residual, "iterations": sol.iterations}),
            )
        }
        Err(Error::NotConverged { iterations, residual, iterate }) => {
            println!("last iterate = {}", fmt_vec(&iterate));
            println!("kkt residual = {residual:e}");
            ctx.write_json(
                "lasso.json",
                &header,
                json!({"converged": false, "x": iterate, "kkt_residual": residual, "iterations": iterations}),
            )?;
            Err(Error::NotConverged { iterations, residual, iterate }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_flow(ctx: &Ctx, a: &FlowArgs) -> Result<()> {
    let model = ctx.cfg.model()?;
    let x0 = ctx.cfg.x0(model.dim())?;
    let header = ctx.header("flow", a)?;
    let traj = integrate_sticky(model.as_ref(), &x0, a.horizon, a.dt, a.tol_zero)?;
    println!("x(T) = {}", fmt_vec(traj.terminal()));
    ctx.write("trajectory.csv", &formats::trajectory_csv(&header, &traj))?;
    if let Some(f) = &ctx.cfg.inputs.forcing {
        let forced = ForcedDrift { forcing: f.to_step()?, mu: model.mu() };
        let exact = exact_piecewise_flow(&forced.forcing, forced.mu, &x0)?;
        ctx.write_json("exact_flow.json", &header, serde_json::to_value(PathJson::from_path(&exact))?)?;
    }
    Ok(())
}

fn cmd_simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<()> {
    let model = ctx.cfg.model()?;
    let d = model.dim();
    let x0 = ctx.cfg.x0(d)?;
    let header = ctx.header("simulate", a)?;
    let cfg = SdeConfig::new(a.eps, a.dt, ctx.seed)?.with_horizon(a.horizon)?.with_scheme(a.scheme.into());
    let control: Option<ControlPath> = ctx.cfg.inputs.control.as_ref().map(|c| c.to_step()).transpose()?;
    if let Some(c) = &control {
        if c.dim() != d {
            bail!("the control has dimension {}, the model {d}", c.dim());
        }
    }
    // Replica 0 of the ensemble, recorded in full.
    let first = cfg.with_seed(replica_seed(ctx.seed, 0));
    let (traj, ens) = match &control {
        Some(c) => (
            simulate_with_control(model.as_ref(), c, &x0, &first)?,
            ensemble_summary(&ctx.exec, model.as_ref(), c, &x0, &cfg, a.replicas)?,
        ),
        None => (
            simulate_with_control(model.as_ref(), &NoControl, &x0, &first)?,
            ensemble_summary(&ctx.exec, model.as_ref(), &NoControl, &x0, &cfg, a.replicas)?,
        ),
    };
    for (i, (t, o)) in ens.terminal.iter().zip(&ens.occupation_pos).enumerate() {
        println!(
            "x_{}: terminal mean {} (se {}), positive-time fraction {} (se {})",
            i + 1,
            t.mean,
            t.std_error,
            o.mean,
            o.std_error
        );
    }
    ctx.write("trajectory.csv", &formats::trajectory_csv(&header, &traj))?;
    ctx.write("ensemble.csv", &formats::ensemble_csv(&header, &ens))
}

fn cmd_rate(ctx: &Ctx, a: &RateArgs) -> Result<()> {
    let model = ctx.cfg.model()?;
    let phi = ctx.cfg.inputs.path.as_ref().ok_or_else(|| anyhow!("the config has no \"path\""))?.to_path()?;
    if a.refine == 0 {
        bail!("refine must be at least 1");
    }
    let phi = if a.refine > 1 { phi.refined(a.refine) } else { phi };
    let header = ctx.header("rate", a)?;
    let rb = rate_functional(model.as_ref(), &phi)?;
    println!("I = {}", num(rb.total));
    ctx.write("rate.csv", &formats::rate_csv(&header, &rb))
}

fn cmd_mollify(ctx: &Ctx, a: &MollifyArgs) -> Result<()> {
    let model = ctx.cfg.model()?;
    let psi = match (&ctx.cfg.inputs.samples, &ctx.cfg.inputs.path) {
        (Some(s), _) => s.to_samples()?,
        (None, Some(p)) => {
            if a.grid < 2 {
                bail!("grid must be at least 2");
            }
            let phi = p.to_path()?;
            let h = phi.horizon();
            let times: Vec<f64> = (0..a.grid).map(|k| h * k as f64 / (a.grid - 1) as f64).collect();
            let states = phi.sample(&times);
            SampledPath::new(times, states)?
        }
        (None, None) => bail!("the config needs \"samples\" or \"path\""),
    };
    let header = ctx.header("mollify", a)?;
    match mollify(model.as_ref(), &psi, a.delta) {
        Ok(m) => {
            println!("sigma = {}, sup gap = {}, rate gap = {}", m.sigma, m.sup_gap, m.rate_gap);
            ctx.write_json(
                "mollified.json",
                &header,
                json!({
                    "accepted": true,
                    "sigma": m.sigma,
                    "sup_gap": m.sup_gap,
                    "rate_gap": m.rate_gap,
                    "rate": m.rate,
                    "discrete_rate": m.discrete_rate,
                    "path": PathJson::from_path(&m.path),
                }),
            )
        }
        Err(Error::Approximation { sup_gap, rate_gap, delta, best }) => {
            ctx.write_json(
                "mollified.json",
                &header,
                json!({
                    "accepted": false,
                    "sup_gap": sup_gap,
                    "rate_gap": rate_gap,
                    "path": PathJson::from_path(&best),
                }),
            )?;
            Err(Error::Approximation { sup_gap, rate_gap, delta, best }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_ldp(ctx: &Ctx, a: &LdpArgs) -> Result<()> {
    let model = ctx.cfg.model()?;
    let x0 = ctx.cfg.x0(model.dim())?;
    let h = ctx.cfg.inputs.cost.as_ref().ok_or_else(|| anyhow!("the config has no \"cost\""))?.to_cost()?;
    let first = *a.eps.first().ok_or_else(|| anyhow!("need at least one eps"))?;
    let header = ctx.header("ldp", a)?;
    let cfg = SdeConfig::new(first, a.dt, ctx.seed)?.with_scheme(a.scheme.into());
    let search = SearchConfig::new(a.m, a.multistarts, ctx.seed);
    let r = ldp_report(&ctx.exec, model.as_ref(), &x0, &h, &a.eps, &cfg, a.replicas, &search)?;
    println!("variational value = {}", num(r.variational.value));
    for (e, g) in r.estimates.iter().zip(&r.gaps) {
        println!("eps {}: H = {} (se {}), gap {}", e.eps, num(e.estimate), num(e.std_error), num(*g));
    }
    ctx.write_json("ldp.json", &header, json!({ "report": LdpReportJson::from_report(&r) }))?;
    ctx.write("ldp.csv", &formats::ldp_csv(&header, &r))
}

fn parse_test_fn(s: &str, d: usize) -> Result<TestFunction> {
    let coord = |i: &str| -> Result<usize> {
        let i: usize = i.parse().with_context(|| format!("bad coordinate in test function {s:?}"))?;
        if i == 0 || i > d {
            bail!("test function coordinate {i} outside 1..={d}");
        }
        Ok(i - 1)
    };
    match s.split_once(':') {
        None if s == "quadratic" => Ok(TestFunction::Quadratic),
        Some(("coord", i)) => Ok(TestFunction::Coordinate(coord(i)?)),
        Some(("abs", i)) => Ok(TestFunction::Abs(coord(i)?)),
        _ => bail!("unknown test function {s:?} (use coord:I, abs:I or quadratic)"),
    }
}

fn cmd_gibbs(ctx: &Ctx, a: &GibbsArgs) -> Result<()> {
    let p = ctx.cfg.problem()?;
    let d = p.dim();
    let test_fn = parse_test_fn(&a.test_fn, d)?;
    let header = ctx.header("gibbs", a)?;
    let spec = GibbsSpec::new(p, a.eps)?;
    let cfg = SdeConfig::new(a.eps, a.dt, ctx.seed)?.with_horizon(a.horizon)?;
    let quad = if d == 1 { Some(quadrature_moments_1d(&spec)?) } else { None };
    let lang = langevin_moments(&spec, &cfg, a.burn_in)?;
    for i in 0..d {
        let q = quad.as_ref().map(|m| m.mean_abs.to_string()).unwrap_or_else(|| "-".into());
        println!("E|x_{}|: quadrature {q}, langevin {} (se {})", i + 1, lang.mean_abs[i], lang.std_error_abs[i]);
    }
    let decay_cfg = SdeConfig::new(a.eps, a.dt, ctx.seed)?;
    let rep = variance_decay_check(&ctx.exec, &spec, &decay_cfg, test_fn, &a.decay_times, a.outer, a.inner)?;
    println!("poincare constant = {}, decay bound holds: {}", rep.poincare, rep.all_hold());
    ctx.write("moments.csv", &formats::moments_csv(&header, quad.as_ref(), &lang))?;
    ctx.write("decay.csv", &formats::decay_csv(&header, &rep))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn test_function_parsing() {
        assert_eq!(parse_test_fn("abs:2", 2).unwrap(), TestFunction::Abs(1));
        assert_eq!(parse_test_fn("quadratic", 3).unwrap(), TestFunction::Quadratic);
        assert!(parse_test_fn("coord:0", 1).is_err());
        assert!(parse_test_fn("cube", 1).is_err());
    }

    #[test]
    fn numerical_errors_map_to_two() {
        let e: anyhow::Error = Error::Numerical("x".into()).into();
        assert_eq!(exit_code(&e), 2);
        let e: anyhow::Error = Error::Input("x".into()).into();
        assert_eq!(exit_code(&e.context("while loading")), 1);
        assert_eq!(exit_code(&anyhow!("bad config")), 1);
    }
}
