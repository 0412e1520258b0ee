//! Experiment configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use oef_core::oracles::InexactnessPolicy;
use oef_core::problem::{builtin_problem, CompositeProblem, ProblemDescriptor};
use oef_core::rng::{self, Purpose};
use oef_core::solvers::{PnmConfig, Rn2cmConfig, RnmConfig, ScConfig};
use oef_core::Vector;

/// Environment variable naming the root that relative output directories are
/// resolved against.
pub const OUTPUT_ROOT_ENV: &str = "OEF_BENCH_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Pnm,
    Rnm,
    Sc,
    Rn2cm,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pnm => "pnm",
            Self::Rnm => "rnm",
            Self::Sc => "sc",
            Self::Rn2cm => "rn2cm",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Center {
    #[default]
    Origin,
    Minimizer,
    /// First recorded stationary point of the problem.
    Stationary,
}

/// Starting point. Random starts draw from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Start {
    Zero,
    Point { x: Vec<f64> },
    /// `center + radius·u` with `u` uniform on the unit sphere.
    Sphere {
        radius: f64,
        #[serde(default)]
        center: Center,
    },
}

impl Default for Start {
    fn default() -> Self {
        Self::Zero
    }
}

impl Start {
    pub fn point(&self, problem: &CompositeProblem, seed: u64) -> Result<Vector> {
        let n = problem.dim();
        match self {
            Self::Zero => Ok(Vector::zeros(n)),
            Self::Point { x } => {
                if x.len() != n {
                    bail!("start point has dimension {}, problem has {n}", x.len());
                }
                Ok(Vector::from_vec(x.clone()))
            }
            Self::Sphere { radius, center } => {
                if !(*radius >= 0.0 && radius.is_finite()) {
                    bail!("start radius {radius} must be nonnegative and finite");
                }
                let c = match center {
                    Center::Origin => Vector::zeros(n),
                    Center::Minimizer => problem
                        .minimizer
                        .clone()
                        .context("start centered at the minimizer, but the problem has none")?,
                    Center::Stationary => problem
                        .stationary_points
                        .first()
                        .cloned()
                        .context("start centered at a stationary point, but the problem lists none")?,
                };
                let mut r = rng::stream(seed, 0, Purpose::Start);
                Ok(c + rng::unit_vector(&mut r, n) * *radius)
            }
        }
    }
}

/// Replacements for the problem's certified constants, used by `bounds`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    pub lipschitz_grad: Option<f64>,
    pub lipschitz_hess: Option<f64>,
    pub strong_convexity: Option<f64>,
    pub lower_bound: Option<f64>,
    /// `φ(x₀)`; computed at the first seed's start when unset.
    pub initial_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub problem: ProblemDescriptor,
    pub solver: SolverKind,
    /// Solver parameters, including tolerances and the oracle policy.
    #[serde(default)]
    pub settings: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub start: Start,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Overrides `settings.certificates` when set.
    #[serde(default)]
    pub certificates: Option<bool>,
    #[serde(default)]
    pub constants: ConstantOverrides,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverConfig {
    Pnm(PnmConfig),
    Rnm(RnmConfig),
    Sc(ScConfig),
    Rn2cm(Rn2cmConfig),
}

impl SolverConfig {
    pub fn parse(kind: SolverKind, settings: &serde_json::Map<String, serde_json::Value>) -> Result<Self> {
        let v = serde_json::Value::Object(settings.clone());
        let ctx = || format!("invalid {} settings", kind.name());
        Ok(match kind {
            SolverKind::Pnm => Self::Pnm(serde_json::from_value(v).with_context(ctx)?),
            SolverKind::Rnm => Self::Rnm(serde_json::from_value(v).with_context(ctx)?),
            SolverKind::Sc => Self::Sc(serde_json::from_value(v).with_context(ctx)?),
            SolverKind::Rn2cm => Self::Rn2cm(serde_json::from_value(v).with_context(ctx)?),
        })
    }

    pub fn oracle_mut(&mut self) -> &mut InexactnessPolicy {
        match self {
            Self::Pnm(c) => &mut c.oracle,
            Self::Rnm(c) => &mut c.oracle,
            Self::Sc(c) => &mut c.oracle,
            Self::Rn2cm(c) => &mut c.oracle,
        }
    }

    pub fn certificates(&self) -> bool {
        match self {
            Self::Pnm(c) => c.certificates,
            Self::Rnm(c) => c.certificates,
            Self::Sc(c) => c.certificates,
            Self::Rn2cm(c) => c.certificates,
        }
    }

    pub fn set_certificates(&mut self, on: bool) {
        match self {
            Self::Pnm(c) => c.certificates = on,
            Self::Rnm(c) => c.certificates = on,
            Self::Sc(c) => c.certificates = on,
            Self::Rn2cm(c) => c.certificates = on,
        }
    }

    pub fn set_max_iter(&mut self, max_iter: usize) {
        match self {
            Self::Pnm(c) => c.max_iter = max_iter,
            Self::Rnm(c) => c.max_iter = max_iter,
            Self::Sc(c) => c.max_iter = max_iter,
            Self::Rn2cm(c) => c.max_iter = max_iter,
        }
    }

    /// The same configuration with its oracle reseeded for one run.
    pub fn for_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        let o = c.oracle_mut();
        o.seed = rng::derive(o.seed, seed, 0);
        c
    }

    /// Solver-problem compatibility, checked before any run starts.
    pub fn validate(&self, problem: &CompositeProblem) -> Result<()> {
        let smooth_only = |name: &str| -> Result<()> {
            if !problem.nonsmooth.is_zero() {
                bail!("solver {name} needs a smooth problem; use pnm for a nonzero regularizer");
            }
            Ok(())
        };
        match self {
            Self::Pnm(c) => c.validate()?,
            Self::Rnm(c) => {
                smooth_only("rnm")?;
                c.validate()?
            }
            Self::Sc(c) => {
                smooth_only("sc")?;
                let sigma = c.sigma_for(problem)?;
                c.validate(sigma)?
            }
            Self::Rn2cm(c) => {
                smooth_only("rn2cm")?;
                c.resolve(problem)?;
            }
        }
        Ok(())
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub certificates: Option<bool>,
    pub max_iter: Option<usize>,
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub config: ExperimentConfig,
    pub problem: CompositeProblem,
    pub solver: SolverConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Experiment {
    /// Loads and validates a config for running.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        Self::load_checked(path, overrides, true)
    }

    /// Loads a config for the bound table, skipping the solver-problem checks
    /// so that out-of-range tolerances still produce rows.
    pub fn load_for_bounds(path: &Path) -> Result<Self> {
        Self::load_checked(path, &Overrides::default(), false)
    }

    fn load_checked(path: &Path, overrides: &Overrides, validate: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
        Self::build(config, stem, overrides, validate)
    }

    #[cfg(test)]
    pub fn from_config(config: ExperimentConfig, stem: &str, overrides: &Overrides) -> Result<Self> {
        Self::build(config, stem, overrides, true)
    }

    fn build(config: ExperimentConfig, stem: &str, overrides: &Overrides, validate: bool) -> Result<Self> {
        let name = config.name.clone().unwrap_or_else(|| stem.to_string());
        let seeds = overrides.seeds.clone().unwrap_or_else(|| config.seeds.clone());
        if seeds.is_empty() {
            bail!("the seeds list is empty");
        }
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        if unique.len() != seeds.len() {
            bail!("the seeds list contains duplicates");
        }
        let problem = builtin_problem(&config.problem)?;
        let mut solver = SolverConfig::parse(config.solver, &config.settings)?;
        if let Some(on) = overrides.certificates.or(config.certificates) {
            solver.set_certificates(on);
        }
        if let Some(m) = overrides.max_iter {
            solver.set_max_iter(m);
        }
        if validate {
            solver.validate(&problem)?;
        }
        let relative = config.output_dir.clone().unwrap_or_else(|| PathBuf::from(&name));
        let output_dir = match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) => PathBuf::from(root).join(relative),
            None => relative,
        };
        Ok(Self {
            name,
            config,
            problem,
            solver,
            seeds,
            output_dir,
        })
    }
}

/// Parses `--seeds`: a comma list (`0,3,7`) or a half-open range (`0..10`).
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().context("bad range start")?;
        let b: u64 = b.trim().parse().context("bad range end")?;
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u64>().with_context(|| format!("bad seed `{t}`")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "problem": {"name": "quadratic", "n": 4},
            "solver": "rnm",
            "settings": {"eps": 1e-6},
            "seeds": [0, 1]
        })
    }

    #[test]
    fn seeds_parse() {
        assert_eq!(parse_seeds("0,3, 7").unwrap(), vec![0, 3, 7]);
        assert_eq!(parse_seeds("2..5").unwrap(), vec![2, 3, 4]);
        assert!(parse_seeds("").unwrap().is_empty());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = base();
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
        let mut v = base();
        v["settings"]["bogus"] = serde_json::json!(1);
        let c: ExperimentConfig = serde_json::from_value(v).unwrap();
        assert!(Experiment::from_config(c, "x", &Overrides::default()).is_err());
    }

    #[test]
    fn empty_seeds_rejected() {
        let c: ExperimentConfig = serde_json::from_value(base()).unwrap();
        let o = Overrides {
            seeds: Some(Vec::new()),
            ..Overrides::default()
        };
        assert!(Experiment::from_config(c, "x", &o).is_err());
    }

    #[test]
    fn sc_needs_strong_convexity() {
        let mut v = base();
        v["solver"] = serde_json::json!("sc");
        v["problem"]["indefinite"] = serde_json::json!(true);
        v["settings"] = serde_json::json!({});
        let c: ExperimentConfig = serde_json::from_value(v).unwrap();
        assert!(Experiment::from_config(c, "x", &Overrides::default()).is_err());
    }

    #[test]
    fn overrides_apply() {
        let c: ExperimentConfig = serde_json::from_value(base()).unwrap();
        let o = Overrides {
            seeds: Some(vec![5]),
            certificates: Some(false),
            max_iter: Some(3),
        };
        let e = Experiment::from_config(c, "x", &o).unwrap();
        assert_eq!(e.seeds, vec![5]);
        match e.solver {
            SolverConfig::Rnm(c) => {
                assert!(!c.certificates);
                assert_eq!(c.max_iter, 3);
            }
            _ => panic!("wrong solver"),
        }
    }
}
