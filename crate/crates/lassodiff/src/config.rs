//! Run configuration: a JSON file whose inputs are either inline or paths to
//! JSON files (resolved relative to the config file).
//!
//! ```json
//! {
//!   "problem": "problem.json",
//!   "x0": [0.0],
//!   "cost": {"kind": "terminal", "target": [1.0], "weight": 1.0, "cap": 4.0},
//!   "seed": 7,
//!   "params": {"replicas": 100000}
//! }
//! ```
//!
//! `params` overrides subcommand defaults; flags given on the command line
//! override `params`. The seed is `--seed`, else `seed`, else 0.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use lassodiff_core::{DriftModel, ForcedDrift, Problem};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::formats::{CostJson, PathJson, ProblemJson, SamplesJson, StepJson};

pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Source<T> {
    File(PathBuf),
    Inline(T),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Option<Source<ProblemJson>>,
    x0: Option<Vec<f64>>,
    forcing: Option<Source<StepJson>>,
    mu: Option<f64>,
    control: Option<Source<StepJson>>,
    path: Option<Source<PathJson>>,
    samples: Option<Source<SamplesJson>>,
    cost: Option<Source<CostJson>>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    params: Map<String, Value>,
}

/// Inputs with every file reference read in. Serialises (inline) into the
/// header of every output file.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forcing: Option<StepJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<StepJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<SamplesJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostJson>,
}

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub params: Map<String, Value>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

fn resolve<T: DeserializeOwned>(src: Option<Source<T>>, base: &Path) -> Result<Option<T>> {
    Ok(match src {
        None => None,
        Some(Source::Inline(v)) => Some(v),
        Some(Source::File(p)) => Some(read_json(&base.join(p))?),
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw: RawConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(Self {
            inputs: Inputs {
                problem: resolve(raw.problem, base)?,
                x0: raw.x0,
                forcing: resolve(raw.forcing, base)?,
                mu: raw.mu,
                control: resolve(raw.control, base)?,
                path: resolve(raw.path, base)?,
                samples: resolve(raw.samples, base)?,
                cost: resolve(raw.cost, base)?,
            },
            seed: raw.seed,
            out: raw.out.map(|o| base.join(o)),
            params: raw.params,
        })
    }

    pub fn problem(&self) -> Result<Problem> {
        self.inputs.problem.as_ref().ok_or_else(|| anyhow!("the config has no \"problem\""))?.to_problem()
    }

    /// The forced drift when a forcing is given, the lasso drift otherwise.
    pub fn model(&self) -> Result<Box<dyn DriftModel>> {
        match &self.inputs.forcing {
            Some(f) => {
                let mu = match (self.inputs.mu, &self.inputs.problem) {
                    (Some(mu), _) => mu,
                    (None, Some(p)) => p.mu,
                    (None, None) => bail!("a forcing needs \"mu\" (or a problem to take it from)"),
                };
                Ok(Box::new(ForcedDrift::new(f.to_step()?, mu)?))
            }
            None => Ok(Box::new(self.problem()?)),
        }
    }

    /// `x0` from the config, the origin if absent.
    pub fn x0(&self, d: usize) -> Result<Vec<f64>> {
        match &self.inputs.x0 {
            None => Ok(vec![0.0; d]),
            Some(x) if x.len() == d => Ok(x.clone()),
            Some(x) => bail!("x0 has {} entries, the model has dimension {d}", x.len()),
        }
    }
}

/// Overlays `params` onto `defaults` for every key not in `explicit`.
pub fn merge_params<T>(defaults: &T, params: &Map<String, Value>, explicit: impl Fn(&str) -> bool) -> Result<T>
where
    T: Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(defaults)?;
    let obj = value.as_object_mut().ok_or_else(|| anyhow!("parameters must be an object"))?;
    for (k, v) in params {
        if !obj.contains_key(k) {
            let known: Vec<&str> = obj.keys().map(String::as_str).collect();
            bail!("unknown parameter \"{k}\" (known: {})", known.join(", "));
        }
        if !explicit(k) {
            obj.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(value).context("bad value in \"params\"")
}
