use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tslyap::conditions::{ConditionKind, ConditionSpec, Hyper};
use tslyap::model::{fixture, FuzzyModel};
use tslyap::sdp::SolverOptions;

/// Stability certificates and domain-of-attraction estimates for
/// Takagi-Sugeno fuzzy systems.
///
/// Exit codes: 0 Feasible / success, 1 Infeasible / check failed,
/// 2 Inconclusive, 3 usage error, 4 runtime error.
#[derive(Debug, Parser)]
#[command(name = "tslyap", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one stability condition and write the certificate.
    Check(CheckArgs),
    /// Bisect the largest uniform hyperparameter that stays feasible.
    Maximize(MaximizeArgs),
    /// Solve a condition over a grid of two fixture parameters.
    Sweep(SweepArgs),
    /// Estimate a domain of attraction as a Lyapunov sublevel set.
    Da(DaArgs),
    /// Simulate trajectories from inside a domain-of-attraction estimate.
    Validate(ValidateArgs),
    /// Run the numbered acceptance criteria.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Fixture name (example2, cubic, vdp, scalar-sine, linear-split,
    /// oscillating-derivative, discontinuous).
    #[arg(long)]
    pub fixture: String,
    /// Example 2 parameter `a`.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Example 2 parameter `b`.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Van der Pol damping `mu`.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
}

impl ModelArgs {
    pub fn params(&self) -> BTreeMap<String, f64> {
        [("a", self.a), ("b", self.b), ("mu", self.mu)]
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect()
    }

    pub fn build(&self) -> Result<FuzzyModel> {
        Ok(fixture(&self.fixture, &self.params())?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConditionArgs {
    /// qlf, tanaka, mozelli, vertex, overbound, ball or combined.
    #[arg(long)]
    pub condition: String,
    /// Derivative bounds: one value for all rules or a comma list.
    #[arg(long)]
    pub phi: Option<String>,
    /// Membership deviation bounds: one value or a comma list.
    #[arg(long = "b-bound")]
    pub b_bound: Option<String>,
    /// Squared-norm bound on the membership deviation.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Strictness margin (default 1e-6 (1 + max vertex norm)).
    #[arg(long)]
    pub margin: Option<f64>,
}

pub fn parse_list(text: &str, rules: usize, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| f64::from_str(s.trim()).with_context(|| format!("bad number `{s}` in --{what}")))
        .collect::<Result<_>>()?;
    match values.len() {
        1 => Ok(vec![values[0]; rules]),
        n if n == rules => Ok(values),
        n => bail!("--{what} has {n} entries, model has {rules} rules"),
    }
}

impl ConditionArgs {
    pub fn kind(&self) -> Result<ConditionKind> {
        Ok(self.condition.parse()?)
    }

    /// Hyperparameters from the flags; `fill` sets one of them uniformly instead.
    pub fn spec_with(&self, rules: usize, fill: Option<(&str, f64)>) -> Result<ConditionSpec> {
        let kind = self.kind()?;
        let value = |name: &str| fill.filter(|(n, _)| *n == name).map(|(_, v)| v);
        let list = |name: &str, flag: &Option<String>| -> Result<Vec<f64>> {
            if let Some(v) = value(name) {
                return Ok(vec![v; rules]);
            }
            match flag {
                Some(t) => parse_list(t, rules, if name == "b" { "b-bound" } else { name }),
                None => bail!("{kind} needs --{}", if name == "b" { "b-bound" } else { name }),
            }
        };
        let hyper = match kind {
            ConditionKind::Qlf => Hyper::None,
            ConditionKind::Tanaka | ConditionKind::Mozelli => Hyper::Phi(list("phi", &self.phi)?),
            ConditionKind::Vertex | ConditionKind::Overbound => Hyper::B(list("b", &self.b_bound)?),
            ConditionKind::Ball => match value("eta").or(self.eta) {
                Some(e) => Hyper::Eta(e),
                None => bail!("ball needs --eta"),
            },
            ConditionKind::Combined => Hyper::PhiB {
                phi: list("phi", &self.phi)?,
                b: list("b", &self.b_bound)?,
            },
        };
        let mut spec = ConditionSpec::new(kind, hyper);
        if let Some(m) = self.margin {
            spec = spec.with_margin(m);
        }
        spec.validate(rules)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// Interior-point iteration cap per attempt.
    #[arg(long, default_value_t = 200)]
    pub sdp_iters: usize,
    /// Interior-point convergence tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub sdp_tol: f64,
    /// Randomised restarts after an inconclusive attempt.
    #[arg(long, default_value_t = 5)]
    pub sdp_restarts: usize,
    /// Seed for restart initialisation.
    #[arg(long, default_value_t = 0)]
    pub sdp_seed: u64,
}

impl SolverArgs {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iters: self.sdp_iters,
            tol: self.sdp_tol,
            restarts: self.sdp_restarts,
            seed: self.sdp_seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArgs {
    /// Directory for artifacts and the run manifest.
    #[arg(long, default_value = "tslyap-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSize(pub usize, pub usize);

impl FromStr for GridSize {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NxM, got `{s}`"))?;
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
        let (a, b) = (parse(a)?, parse(b)?);
        if a == 0 || b == 0 {
            return Err("grid dimensions must be positive".into());
        }
        Ok(GridSize(a, b))
    }
}

/// `name=lo:hi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for AxisSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, range) = s.split_once('=').ok_or_else(|| format!("expected name=lo:hi, got `{s}`"))?;
        let (lo, hi) = range.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{range}`"))?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        Ok(AxisSpec {
            name: name.trim().to_string(),
            lo: num(lo)?,
            hi: num(hi)?,
        })
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub condition: ConditionArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct MaximizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub condition: ConditionArgs,
    /// Hyperparameter to maximise (phi, b or eta); defaults to the condition's own.
    #[arg(long)]
    pub axis: Option<String>,
    /// Lower end of the initial bracket.
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    /// Upper end of the initial bracket (doubled while feasible).
    #[arg(long)]
    pub hi: Option<f64>,
    /// Relative bracket width at which bisection stops.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub condition: ConditionArgs,
    /// Grid size as NxM.
    #[arg(long, default_value = "11x11")]
    pub grid: GridSize,
    /// First swept parameter as name=lo:hi (example2 default a=-10:0).
    #[arg(long = "x-axis", allow_hyphen_values = true)]
    pub x_axis: Option<AxisSpec>,
    /// Second swept parameter (example2 default b=0:200).
    #[arg(long = "y-axis", allow_hyphen_values = true)]
    pub y_axis: Option<AxisSpec>,
    /// Second condition to compare against, with its own hyperparameters.
    #[arg(long)]
    pub against: Option<String>,
    /// `--phi` for the comparison condition
    #[arg(long = "against-phi")]
    pub against_phi: Option<String>,
    /// `--b-bound` for the comparison condition
    #[arg(long = "against-b-bound")]
    pub against_b_bound: Option<String>,
    /// `--eta` for the comparison condition
    #[arg(long = "against-eta")]
    pub against_eta: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct DaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub condition: ConditionArgs,
    /// Evaluation grid as NxM (2-state models) or N (scalar models).
    #[arg(long, default_value = "201x201")]
    pub grid: GridSize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub da: DaArgs,
    /// Number of sampled initial states.
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    /// Integration horizon in seconds.
    #[arg(long, default_value_t = 50.0)]
    pub horizon: f64,
    /// RK4 step in seconds.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Final-state norm counted as converged.
    #[arg(long = "converge-tol", default_value_t = 1e-4)]
    pub converge_tol: f64,
    /// Multiply the certified level (values above 1 probe beyond the estimate).
    #[arg(long = "level-factor", default_value_t = 1.0)]
    pub level_factor: f64,
    /// Seed for the initial-state sampler.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write one trajectory CSV from this initial state (comma list).
    #[arg(long, allow_hyphen_values = true)]
    pub trajectory: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Coarse domain-of-attraction grids (default).
    #[arg(long, conflicts_with_all = ["full", "list"])]
    pub quick: bool,
    /// Dense domain-of-attraction grids.
    #[arg(long, conflicts_with = "list")]
    pub full: bool,
    /// List the criteria without running them.
    #[arg(long)]
    pub list: bool,
    /// Run only these criteria.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
    #[command(flatten)]
    pub out: OutArgs,
}
