//! Experiment orchestration: JSON configs, parallel runners, CSV and SVG
//! output, run summaries, and the verification suites behind the CLI.
//!
//! A config names one problem and a list of runners:
//!
//! ```json
//! {
//!   "problem": {"type": "toy", "mu": 0.001},
//!   "runners": [
//!     {"type": "scheme", "scheme": "nag_c"},
//!     {"type": "scheme", "scheme": "unified_constant"},
//!     {"type": "flow", "flow": "unified_nag"}
//!   ],
//!   "s": 1.0, "iterations": 500, "horizon": 40.0, "dt": 0.001,
//!   "output_dir": "out/toy",
//!   "checks": ["energy", "bound"]
//! }
//! ```

mod svg;
mod verify;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{gamma0_for_t0, run_scheme, RunTrace, SchemeKind};
use crate::dynamics::{integrate_flow, integrate_nag_g, FlowSpec, NagGResult, Trajectory, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::kernels::{kernel_closed_form, kernel_grid, write_kernel_grid};
use crate::problems::{
    make_logistic, make_toy_quadratic, synth_logistic, CenteredLogistic, LogisticDataset, Objective, Quadratic, Vector,
};
use crate::tensor::{c_constant, run_tensor, TensorConfig};

pub use svg::{render_log_plot, PlotSeries};
pub use verify::{verify_suite, CheckResult, Suite, VerifyReport};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "UM_THREADS";

/// Slack on discrete energy increases, relative to `max(1, E_0)`.
pub const DISCRETE_ENERGY_SLACK: f64 = 1e-10;
/// Slack on tensor-method energy increases, relative to `E_0`.
pub const TENSOR_ENERGY_SLACK: f64 = 1e-9;
/// Absolute per-step slack on flow energy increases.
pub const FLOW_ENERGY_SLACK: f64 = 1e-8;
/// Absolute per-step slack on the NAG-G posterior energy.
pub const NAG_G_ENERGY_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Toy {
        mu: f64,
    },
    Logistic {
        m: usize,
        n: usize,
        lambda: f64,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    NagC,
    NagSc,
    UnifiedConstant,
    UnifiedAdaptive,
    OriginalNag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowName {
    NagC,
    NagSc,
    UnifiedNag,
    Tensor,
    OriginalNag,
    NagG,
}

/// One runner. `mu` defaults to the problem's strong convexity parameter
/// (to 0 for the tensor method, whose `mu` is relative to the mirror map).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunnerConfig {
    Scheme {
        scheme: SchemeName,
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default)]
        t0: Option<f64>,
        #[serde(default)]
        gamma0: Option<f64>,
    },
    Tensor {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_tensor_order")]
        p: u32,
        #[serde(default)]
        mu: Option<f64>,
    },
    Flow {
        flow: FlowName,
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default)]
        gamma0: Option<f64>,
        #[serde(default)]
        p: Option<u32>,
        #[serde(default)]
        c: Option<f64>,
        #[serde(default)]
        t_end: Option<f64>,
    },
}

fn default_tensor_order() -> u32 {
    3
}

impl RunnerConfig {
    fn label(&self) -> Option<&str> {
        match self {
            RunnerConfig::Scheme { label, .. } | RunnerConfig::Tensor { label, .. } | RunnerConfig::Flow { label, .. } => {
                label.as_deref()
            }
        }
    }

    fn default_stem(&self) -> String {
        match self {
            RunnerConfig::Scheme { scheme, .. } => json_name(scheme),
            RunnerConfig::Tensor { p, .. } => format!("tensor_p{p}"),
            RunnerConfig::Flow { flow, .. } => format!("{}_flow", json_name(flow)),
        }
    }

    fn is_discrete(&self) -> bool {
        !matches!(self, RunnerConfig::Flow { .. })
    }
}

fn json_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    /// Every runner's energy is nonincreasing within its slack.
    Energy,
    /// Every runner stays below its convergence bound.
    Bound,
    Hyperbolic,
    Discrete,
    Tensor,
    Dynamics,
    Kernels,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub runners: Vec<RunnerConfig>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub checks: Vec<CheckName>,
    /// Start point in the problem's original coordinates; defaults to `(1, 1)`
    /// for the toy problem and the origin for logistic regression.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.runners.is_empty() {
            return bad("runners: at least one runner is required".into());
        }
        match self.problem {
            ProblemConfig::Toy { mu } if !(mu >= 0.0 && mu.is_finite()) => {
                return bad(format!("problem.mu: must be finite and >= 0, got {mu}"))
            }
            ProblemConfig::Logistic { m, n, lambda, .. } if m == 0 || n == 0 || !(lambda > 0.0) => {
                return bad("problem: logistic needs m, n >= 1 and lambda > 0".into())
            }
            _ => {}
        }
        if self.runners.iter().any(RunnerConfig::is_discrete) {
            if !self.s.is_some_and(|s| s > 0.0 && s.is_finite()) {
                return bad("s: discrete runners need a stepsize s > 0".into());
            }
            if self.iterations.is_none() {
                return bad("iterations: discrete runners need an iteration count".into());
            }
        }
        if self.runners.iter().any(|r| !r.is_discrete()) {
            if !self.horizon.is_some_and(|h| h > 0.0 && h.is_finite()) {
                return bad("horizon: flow runners need a horizon > 0".into());
            }
            if let Some(dt) = self.dt {
                if !(dt > 0.0 && dt < self.horizon.unwrap_or(0.0)) {
                    return bad(format!("dt: must lie in (0, horizon), got {dt}"));
                }
            }
        }
        let mut stems = BTreeSet::new();
        for (i, r) in self.runners.iter().enumerate() {
            let stem = runner_stem(i, r);
            if RESERVED_STEMS.contains(&stem.as_str()) {
                return bad(format!("runners[{i}]: output name '{stem}' is reserved"));
            }
            if !stems.insert(stem.clone()) {
                return bad(format!("runners[{i}]: duplicate output name '{stem}'"));
            }
            let mu = match r {
                RunnerConfig::Scheme { mu, .. } | RunnerConfig::Tensor { mu, .. } | RunnerConfig::Flow { mu, .. } => *mu,
            };
            if mu.is_some_and(|m| !(m >= 0.0 && m.is_finite())) {
                return bad(format!("runners[{i}].mu: must be finite and >= 0"));
            }
        }
        if let (Some(x0), ProblemConfig::Toy { .. }) = (&self.x0, &self.problem) {
            if x0.len() != 2 {
                return bad("x0: the toy problem is two-dimensional".into());
            }
        }
        if let (Some(x0), ProblemConfig::Logistic { n, .. }) = (&self.x0, &self.problem) {
            if x0.len() != *n {
                return bad(format!("x0: expected {n} coordinates"));
            }
        }
        Ok(())
    }
}

fn runner_stem(index: usize, r: &RunnerConfig) -> String {
    match r.label() {
        Some(l) => l.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect(),
        None => format!("{index:02}_{}", r.default_stem()),
    }
}

/// Output names taken by the run itself.
const RESERVED_STEMS: [&str; 3] = ["summary", "dataset", "convergence"];

/// The problem instance built from a config.
pub enum Problem {
    Toy(Quadratic),
    Logistic { objective: CenteredLogistic, dataset: LogisticDataset, lambda: f64, seed: u64 },
}

impl Problem {
    pub fn build(cfg: &ProblemConfig) -> Result<Self> {
        Ok(match *cfg {
            ProblemConfig::Toy { mu } => Problem::Toy(make_toy_quadratic(mu)),
            ProblemConfig::Logistic { m, n, lambda, seed } => {
                let dataset = synth_logistic(m, n, lambda, seed)?;
                Problem::Logistic { objective: make_logistic(&dataset)?.centered()?, dataset, lambda, seed }
            }
        })
    }

    pub fn objective(&self) -> &dyn Objective {
        match self {
            Problem::Toy(q) => q,
            Problem::Logistic { objective, .. } => objective,
        }
    }

    /// Start point in optimization coordinates.
    pub fn start(&self, x0: Option<&[f64]>) -> Vector {
        match self {
            Problem::Toy(_) => Vector::from_vec(x0.map_or(vec![1.0, 1.0], <[f64]>::to_vec)),
            Problem::Logistic { objective, .. } => {
                let x = x0.map_or_else(|| Vector::zeros(objective.dim()), Vector::from_row_slice);
                objective.offset_of(&x)
            }
        }
    }
}

/// Output of one runner.
#[derive(Debug, Clone)]
pub enum RunnerOutput {
    Trace(RunTrace),
    Flow(Trajectory),
    NagG(NagGResult),
}

impl RunnerOutput {
    fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        match self {
            RunnerOutput::Trace(t) => t.save(dir, stem),
            RunnerOutput::Flow(t) => t.save(dir, stem),
            RunnerOutput::NagG(r) => r.trajectory.save(dir, stem),
        }
    }

    fn gaps(&self) -> Vec<f64> {
        match self {
            RunnerOutput::Trace(t) => t.records.iter().map(|r| r.f_gap).collect(),
            RunnerOutput::Flow(t) => t.f_gap.clone(),
            RunnerOutput::NagG(r) => r.trajectory.f_gap.clone(),
        }
    }

    fn abscissa(&self, use_time: bool) -> Vec<f64> {
        match self {
            RunnerOutput::Trace(t) if use_time => t.records.iter().map(|r| r.t_k).collect(),
            RunnerOutput::Trace(t) => t.records.iter().map(|r| r.k as f64).collect(),
            RunnerOutput::Flow(t) => t.times.clone(),
            RunnerOutput::NagG(r) => r.trajectory.times.clone(),
        }
    }

    fn rows(&self) -> usize {
        match self {
            RunnerOutput::Trace(t) => t.records.len(),
            RunnerOutput::Flow(t) => t.len(),
            RunnerOutput::NagG(r) => r.trajectory.len(),
        }
    }

    /// `(violations, largest increase)` of the energy column.
    fn energy_check(&self) -> (usize, f64) {
        let max_inc = |e: &[f64]| e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        match self {
            RunnerOutput::Trace(t) => {
                let e0 = t.records.first().map_or(0.0, |r| r.energy);
                let slack = if t.records.iter().any(|r| r.a_k.is_some()) {
                    TENSOR_ENERGY_SLACK * e0
                } else {
                    DISCRETE_ENERGY_SLACK * e0.max(1.0)
                };
                (t.energy_violations(slack).len(), t.max_energy_increase())
            }
            RunnerOutput::Flow(t) => (t.energy_violations(FLOW_ENERGY_SLACK).len(), max_inc(&t.energy)),
            RunnerOutput::NagG(r) => {
                let n = r.trajectory.len() - 1;
                (r.energy_violations(NAG_G_ENERGY_SLACK).len(), max_inc(&r.trajectory.energy[..n]))
            }
        }
    }

    fn bound_violations(&self) -> usize {
        match self {
            RunnerOutput::Trace(t) => t.bound_violations().len(),
            RunnerOutput::Flow(t) => t.bound_violations().len(),
            RunnerOutput::NagG(r) => usize::from(!(r.grad_norm_sq <= r.bound)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerSummary {
    pub label: String,
    pub method: String,
    pub mu: f64,
    pub status: String,
    pub rows: usize,
    pub final_gap: f64,
    pub energy_monotone: bool,
    pub energy_violations: usize,
    pub max_energy_increase: f64,
    pub bound_satisfied: bool,
    pub bound_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_grad_norm_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Qualitative comparisons; recorded, never gating the exit code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    /// Strong convexity parameter of the problem (`2 lambda / m` for logistic regression).
    pub mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub smoothness: f64,
    pub s: Option<f64>,
    pub iterations: Option<usize>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub runners: Vec<RunnerSummary>,
    pub checks: Vec<CheckOutcome>,
    pub soft_checks: Vec<SoftCheck>,
    pub plot: String,
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub diverged: bool,
    pub checks_passed: bool,
}

impl RunOutcome {
    /// 0 ok, 1 a requested check failed, 3 divergence.
    pub fn exit_code(&self) -> i32 {
        if self.diverged {
            3
        } else if !self.checks_passed {
            1
        } else {
            0
        }
    }
}

/// Worker count: `UM_THREADS` if set (capped by the available parallelism).
pub fn worker_count() -> Result<usize> {
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n.min(avail)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(avail),
    }
}

/// Builds the flow described by a runner.
fn flow_spec(flow: FlowName, mu: f64, gamma0: Option<f64>, p: Option<u32>, c: Option<f64>, t_end: f64) -> FlowSpec {
    match flow {
        FlowName::NagC => FlowSpec::NagC,
        FlowName::NagSc => FlowSpec::NagSc { mu },
        FlowName::UnifiedNag => FlowSpec::UnifiedNag { mu },
        FlowName::Tensor => {
            let p = p.unwrap_or(3);
            FlowSpec::Tensor { p, c: c.unwrap_or_else(|| c_constant(p, 0.5)), mu }
        }
        FlowName::OriginalNag => FlowSpec::OriginalNag { mu, gamma0: gamma0.unwrap_or(mu + 1.0) },
        FlowName::NagG => FlowSpec::NagG { mu, t_end },
    }
}

fn execute_runner(cfg: &ExperimentConfig, problem: &Problem, runner: &RunnerConfig) -> (f64, Result<RunnerOutput>) {
    let obj = problem.objective();
    let x0 = problem.start(cfg.x0.as_deref());
    let default_mu = obj.strong_convexity();
    let s = cfg.s.unwrap_or(f64::NAN);
    let iters = cfg.iterations.unwrap_or(0);
    match runner {
        RunnerConfig::Scheme { scheme, mu, t0, gamma0, .. } => {
            let mu = mu.unwrap_or(default_mu);
            let kind = match scheme {
                SchemeName::NagC => SchemeKind::NagC,
                SchemeName::NagSc => SchemeKind::NagSc,
                SchemeName::UnifiedConstant => SchemeKind::UnifiedConstant,
                SchemeName::UnifiedAdaptive => SchemeKind::UnifiedAdaptive { t0: *t0 },
                SchemeName::OriginalNag => SchemeKind::OriginalNag {
                    gamma0: gamma0.unwrap_or_else(|| gamma0_for_t0(t0.unwrap_or(s.sqrt()), mu)),
                },
            };
            (mu, run_scheme(obj, kind, s, mu, &x0, iters).map(RunnerOutput::Trace))
        }
        RunnerConfig::Tensor { p, mu, .. } => {
            let mu = mu.unwrap_or(0.0);
            (mu, run_tensor(obj, &TensorConfig::new(*p, s, mu), &x0, iters).map(RunnerOutput::Trace))
        }
        RunnerConfig::Flow { flow, mu, gamma0, p, c, t_end, .. } => {
            let mu = mu.unwrap_or(default_mu);
            let horizon = cfg.horizon.unwrap_or(f64::NAN);
            let dt = cfg.dt.unwrap_or(DEFAULT_DT);
            let out = if *flow == FlowName::NagG {
                integrate_nag_g(obj, mu, &x0, t_end.unwrap_or(horizon), dt).map(RunnerOutput::NagG)
            } else {
                let spec = flow_spec(*flow, mu, *gamma0, *p, *c, horizon);
                integrate_flow(&spec, obj, &x0, horizon, dt).map(RunnerOutput::Flow)
            };
            (mu, out)
        }
    }
}

fn summarize(label: String, runner: &RunnerConfig, mu: f64, out: &RunnerOutput, error: Option<String>) -> RunnerSummary {
    let (energy_violations, max_energy_increase) = out.energy_check();
    let bound_violations = out.bound_violations();
    let method = match runner {
        RunnerConfig::Scheme { scheme, .. } => json_name(scheme),
        RunnerConfig::Tensor { p, .. } => format!("tensor(p={p})"),
        RunnerConfig::Flow { flow, .. } => format!("{}_flow", json_name(flow)),
    };
    RunnerSummary {
        label,
        method,
        mu,
        status: if error.is_some() { "diverged".into() } else { "ok".into() },
        rows: out.rows(),
        final_gap: out.gaps().last().copied().unwrap_or(f64::NAN),
        energy_monotone: energy_violations == 0,
        energy_violations,
        max_energy_increase,
        bound_satisfied: bound_violations == 0,
        bound_violations,
        final_grad_norm_sq: match out {
            RunnerOutput::NagG(r) => Some(r.grad_norm_sq),
            _ => None,
        },
        error,
    }
}

/// Comparisons between a unified scheme and NAG-C / NAG-SC runs with the same stepsize.
fn soft_checks(runners: &[RunnerConfig], outputs: &[Option<RunnerOutput>]) -> Vec<SoftCheck> {
    let find = |want: &[SchemeName]| {
        runners.iter().zip(outputs).find_map(|(r, o)| match (r, o) {
            (RunnerConfig::Scheme { scheme, .. }, Some(RunnerOutput::Trace(t))) if want.contains(scheme) => Some(t),
            _ => None,
        })
    };
    let mut out = Vec::new();
    let Some(unified) = find(&[SchemeName::UnifiedConstant, SchemeName::UnifiedAdaptive]) else {
        return out;
    };
    if let Some(sc) = find(&[SchemeName::NagSc]) {
        let (u, v) = (unified.final_gap(), sc.final_gap());
        out.push(SoftCheck {
            name: "unified_final_within_10x_of_nag_sc".into(),
            holds: u <= 10.0 * v,
            detail: format!("unified final gap {u:e}, NAG-SC final gap {v:e}"),
        });
    }
    if let Some(c) = find(&[SchemeName::NagC]) {
        let worst = unified
            .records
            .iter()
            .zip(&c.records)
            .map(|(u, b)| u.f_gap / b.bound)
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(SoftCheck {
            name: "unified_below_nag_c_bound".into(),
            holds: worst <= 1.0,
            detail: format!("max over k of unified gap / NAG-C bound = {worst:e}"),
        });
        let (u, v) = (unified.final_gap(), c.final_gap());
        out.push(SoftCheck {
            name: "unified_final_not_worse_than_nag_c".into(),
            holds: u <= v,
            detail: format!("unified final gap {u:e}, NAG-C final gap {v:e}"),
        });
    }
    out
}

/// Runs every runner of `cfg`, writes the per-runner CSVs, the plot and `summary.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let problem = Problem::build(&cfg.problem)?;
    let obj = problem.objective();
    std::fs::create_dir_all(&cfg.output_dir)?;
    if let Problem::Logistic { dataset, .. } = &problem {
        dataset.save(&cfg.output_dir.join("dataset.csv"))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<(f64, Result<RunnerOutput>)> =
        pool.install(|| cfg.runners.par_iter().map(|r| execute_runner(cfg, &problem, r)).collect());

    let mut summaries = Vec::new();
    let mut outputs = Vec::new();
    let mut diverged = false;
    for (i, (runner, (mu, res))) in cfg.runners.iter().zip(results).enumerate() {
        let stem = runner_stem(i, runner);
        let (out, err) = match res {
            Ok(o) => (o, None),
            Err(Error::DivergedRun(t)) => (RunnerOutput::Trace(*t), Some("run diverged".to_string())),
            Err(Error::DivergedFlow(t)) => (RunnerOutput::Flow(*t), Some("flow diverged".to_string())),
            Err(e) => return Err(Error::Config(format!("runners[{i}]: {e}"))),
        };
        diverged |= err.is_some();
        out.save(&cfg.output_dir, &stem)?;
        summaries.push(summarize(stem, runner, mu, &out, err));
        outputs.push(Some(out));
    }

    let use_time = !cfg.runners.iter().all(RunnerConfig::is_discrete);
    let series: Vec<PlotSeries> = summaries
        .iter()
        .zip(&outputs)
        .filter_map(|(s, o)| o.as_ref().map(|o| PlotSeries { label: s.label.clone(), x: o.abscissa(use_time), y: o.gaps() }))
        .collect();
    let plot_name = "convergence.svg";
    let x_label = if use_time { "t" } else { "k" };
    std::fs::write(cfg.output_dir.join(plot_name), render_log_plot(&series, x_label, "f - f*"))?;

    let mut checks = Vec::new();
    let requested: BTreeSet<CheckName> = cfg.checks.iter().copied().collect();
    for check in &requested {
        checks.extend(run_check(*check, &summaries)?);
    }
    let checks_passed = checks.iter().all(|c| c.passed);
    let (lambda, seed) = match &problem {
        Problem::Logistic { lambda, seed, .. } => (Some(*lambda), Some(*seed)),
        Problem::Toy(_) => (None, None),
    };
    let summary = RunSummary {
        problem: obj.name(),
        mu: obj.strong_convexity(),
        lambda,
        seed,
        smoothness: obj.smoothness(),
        s: cfg.s,
        iterations: cfg.iterations,
        horizon: cfg.horizon,
        dt: cfg.dt,
        runners: summaries,
        checks,
        soft_checks: soft_checks(&cfg.runners, &outputs),
        plot: plot_name.into(),
    };
    std::fs::write(cfg.output_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(RunOutcome { summary, diverged, checks_passed })
}

/// Writes the grid of kernel `id` to `out` as `t,tau,H`; returns the row count.
pub fn kernel_grid_command(id: &str, grid: usize, out: &Path, mu: f64, t_end: f64) -> Result<usize> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidInput(format!("mu must be finite and >= 0, got {mu}")));
    }
    let kernel = kernel_closed_form(id, mu, t_end)?;
    let rows = kernel_grid(&kernel, t_end, grid)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_kernel_grid(&rows, std::fs::File::create(out)?)?;
    Ok(rows.len())
}

fn run_check(check: CheckName, runners: &[RunnerSummary]) -> Result<Vec<CheckOutcome>> {
    let per_runner = |name: &str, f: &dyn Fn(&RunnerSummary) -> (bool, String)| {
        runners
            .iter()
            .map(|r| {
                let (passed, detail) = f(r);
                CheckOutcome { name: format!("{name}:{}", r.label), passed, detail }
            })
            .collect::<Vec<_>>()
    };
    Ok(match check {
        CheckName::Energy => per_runner("energy", &|r| {
            (r.energy_monotone, format!("{} violations, largest increase {:e}", r.energy_violations, r.max_energy_increase))
        }),
        CheckName::Bound => per_runner("bound", &|r| (r.bound_satisfied, format!("{} violations", r.bound_violations))),
        suite => {
            let suite = match suite {
                CheckName::Hyperbolic => Suite::Hyperbolic,
                CheckName::Discrete => Suite::Discrete,
                CheckName::Tensor => Suite::Tensor,
                CheckName::Dynamics => Suite::Dynamics,
                CheckName::Kernels => Suite::Kernels,
                _ => Suite::All,
            };
            verify_suite(suite)?
                .checks
                .into_iter()
                .map(|c| CheckOutcome { name: format!("{}:{}", suite.as_str(), c.name), passed: c.passed, detail: c.detail })
                .collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let text = r#"{
          "problem": {"type": "toy", "mu": 0.001},
          "runners": [
            {"type": "scheme", "scheme": "nag_c"},
            {"type": "scheme", "scheme": "unified_constant"},
            {"type": "flow", "flow": "unified_nag"}
          ],
          "s": 1.0, "iterations": 500, "horizon": 40.0, "dt": 0.001,
          "output_dir": "out/toy",
          "checks": ["energy", "bound"]
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.runners.len(), 3);
    }

    #[test]
    fn rejects_unknown_fields_and_empty_runners() {
        let base = r#"{"problem": {"type": "toy", "mu": 0.1}, "runners": [], "s": 1, "iterations": 3, "output_dir": "x"}"#;
        assert!(matches!(ExperimentConfig::from_json(base), Err(Error::Config(_))));
        let extra = r#"{"problem": {"type": "toy", "mu": 0.1, "nu": 1}, "runners": [{"type": "scheme", "scheme": "nag_c"}], "s": 1, "iterations": 3, "output_dir": "x"}"#;
        assert!(matches!(ExperimentConfig::from_json(extra), Err(Error::Config(_))));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let text = r#"{"problem": {"type": "toy", "mu": 0.1},
          "runners": [{"type": "scheme", "scheme": "nag_c", "label": "a"}, {"type": "scheme", "scheme": "nag_sc", "label": "a"}],
          "s": 1, "iterations": 3, "output_dir": "x"}"#;
        assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))));
        let reserved = text.replace(r#""label": "a"}, {"type": "scheme", "scheme": "nag_sc", "label": "a""#, r#""label": "summary""#);
        assert!(matches!(ExperimentConfig::from_json(&reserved), Err(Error::Config(_))));
    }
}
