//! Experiment configuration files.
//!
//! A config is a JSON document naming the experiment kind, the problem and
//! one payload section per kind. Command-line flags override the seed, the
//! output directory and the geometric horizon mode.

use std::fmt;
use std::path::{Path, PathBuf};

use lpir_core::approx::{GeometricMode, TrainConfig};
use lpir_core::control::{Benchmark, ControlProblem, Integrator, Interval};
use lpir_core::quadratic::QuadraticValue;
use lpir_core::solvers::{ProbSchedule, SolverConfig};
use lpir_core::space::CostTable;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    #[serde(alias = "tabular_solve", alias = "tabular-solve")]
    Solve,
    Train,
    Simulate,
    Slice,
    Counterexample,
    Compare,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Solve => "solve",
            Kind::Train => "train",
            Kind::Simulate => "simulate",
            Kind::Slice => "slice",
            Kind::Counterexample => "counterexample",
            Kind::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    Linear,
    Pendulum,
    Sincos,
    MdpFile,
}

/// Which problem to run on, with optional box overrides for the control
/// benchmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: ProblemName,
    /// MDP document, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_box: Option<Vec<Interval>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_box: Option<Vec<Interval>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_box: Option<Interval>,
}

impl ProblemSpec {
    /// The control problem with overrides applied; `None` for MDP files.
    pub fn control_problem(&self) -> Option<ControlProblem> {
        let mut p = match self.name {
            ProblemName::Linear => ControlProblem::linear_scalar(),
            ProblemName::Pendulum => ControlProblem::pendulum(),
            ProblemName::Sincos => ControlProblem::sincos(),
            ProblemName::MdpFile => return None,
        };
        if let Some(b) = &self.state_box {
            p.state_box = b.clone();
        }
        if let Some(b) = &self.initial_box {
            p.initial_box = b.clone();
        }
        if let Some(b) = self.control_box {
            p.control_box = b;
        }
        Some(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LambdaPir,
    Vi,
    Opi,
    Pi,
}

/// Payload of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub method: Method,
    pub lambda: f64,
    pub prob: ProbSchedule,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub opi_horizon: usize,
    /// Start from `c·1` with `c = 2 max|g| / (1 − α)`, which satisfies
    /// `T J_0 ≤ J_0`, and enforce the sandwich.
    pub dominating_start: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
}

impl Default for SolveSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolveSection {
            method: Method::LambdaPir,
            lambda: d.lambda,
            prob: d.prob,
            max_iters: d.max_iters,
            stop_tol: d.stop_tol,
            opi_horizon: d.opi_horizon,
            dominating_start: false,
            init: None,
        }
    }
}

impl SolveSection {
    pub fn solver_config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            prob: self.prob.clone(),
            max_iters: self.max_iters,
            stop_tol: self.stop_tol,
            seed,
            opi_horizon: self.opi_horizon,
            init: self.init.clone().map(CostTable),
            require_dominating: self.dominating_start,
        }
    }
}

/// Feedback-linearization baseline simulated next to the ADP loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub poles: [f64; 2],
    pub substep: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            poles: [-1.0, -1.0],
            substep: 1e-3,
        }
    }
}

/// Payload of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub x0: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    /// Use this θ instead of training one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<QuadraticValue>,
    /// Only for the sin/cos plant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSection>,
    /// Threshold on `|x_0|` used for the reach-time summary.
    #[serde(default = "default_reach")]
    pub reach_tol: f64,
}

fn default_horizon() -> usize {
    100
}

fn default_integrator() -> Integrator {
    Integrator::REFERENCE
}

fn default_reach() -> f64 {
    0.05
}

/// Payload of `slice` and the slicing part of `compare`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceSection {
    /// The coordinate that varies; the others are held at zero.
    pub axis: usize,
    pub points: usize,
}

impl Default for SliceSection {
    fn default() -> Self {
        SliceSection {
            axis: 0,
            points: 101,
        }
    }
}

/// Payload of `counterexample`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleSection {
    pub n_min: usize,
    pub n_max: usize,
    /// Fixed window `M`; `2n + 10` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    /// Label whose pointwise gap is reported.
    pub probe: usize,
    pub rate: f64,
    pub alpha: f64,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        CounterexampleSection {
            n_min: 1,
            n_max: 20,
            window: None,
            probe: 3,
            rate: 0.5,
            alpha: 0.5,
        }
    }
}

impl CounterexampleSection {
    pub fn window_for(&self, n: usize) -> usize {
        self.window.unwrap_or(2 * n + 10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Vi,
    Opi,
    #[serde(alias = "lambda-pir")]
    LambdaPir,
}

impl Scheme {
    pub fn file_stem(self) -> &'static str {
        match self {
            Scheme::Vi => "vi",
            Scheme::Opi => "opi",
            Scheme::LambdaPir => "lambda_pir",
        }
    }
}

/// Payload of `compare`: the `train` section is shared and only the
/// evaluation scheme changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub schemes: Vec<Scheme>,
    pub opi_horizon: usize,
    pub axis: usize,
    pub points: usize,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            schemes: vec![Scheme::Vi, Scheme::Opi, Scheme::LambdaPir],
            opi_horizon: 10,
            axis: 0,
            points: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// May be left out when the command-line verb names the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    /// Not needed by `counterexample`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Not part of the echo in the manifest: where results go does not
    /// change what they are.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<SliceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CounterexampleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub kind: Option<Kind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<GeometricMode>,
}

impl ExperimentConfig {
    /// Applies overrides and pushes the top-level seed into the payloads.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self, Vec<Diagnostic>> {
        if let Some(k) = o.kind {
            match self.kind {
                Some(own) if own != k => {
                    return Err(vec![Diagnostic::field(
                        "kind",
                        format!(
                            "config is a {} experiment, not {}",
                            own.as_str(),
                            k.as_str()
                        ),
                    )])
                }
                _ => self.kind = Some(k),
            }
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        let needs_train = matches!(self.kind, Some(Kind::Train | Kind::Slice | Kind::Compare))
            || (self.kind == Some(Kind::Simulate)
                && self.simulate.as_ref().is_some_and(|s| s.theta.is_none()));
        if needs_train && self.train.is_none() {
            self.train = Some(TrainConfig::default());
        }
        if let Some(t) = self.train.as_mut() {
            t.seed = self.seed;
            if let Some(m) = o.mode {
                t.geometric_mode = m;
            }
        }
        match self.kind {
            Some(Kind::Solve) if self.solve.is_none() => self.solve = Some(SolveSection::default()),
            Some(Kind::Slice) if self.slice.is_none() => self.slice = Some(SliceSection::default()),
            Some(Kind::Counterexample) if self.counterexample.is_none() => {
                self.counterexample = Some(CounterexampleSection::default())
            }
            Some(Kind::Compare) if self.compare.is_none() => {
                self.compare = Some(CompareSection::default())
            }
            _ => {}
        }
        Ok(self)
    }

    pub fn mdp_path(&self) -> Option<PathBuf> {
        self.problem
            .as_ref()?
            .path
            .as_ref()
            .map(|p| self.base_dir.join(p))
    }

    pub fn control_problem(&self) -> Option<ControlProblem> {
        self.problem.as_ref()?.control_problem()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// One problem found in a config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// Dotted path of the offending field, empty for syntax errors.
    pub field: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl Diagnostic {
    pub fn field(field: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            field: field.to_string(),
            message: message.into(),
            line: None,
            column: None,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "line {l}, column {c}: ")?;
        }
        if !self.field.is_empty() {
            write!(f, "{}: ", self.field)?;
        }
        f.write_str(&self.message)
    }
}

/// Parses a config document; relative paths inside it resolve against
/// `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentConfig, Diagnostic> {
    let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Diagnostic {
        field: String::new(),
        message: e.to_string(),
        line: Some(e.line()),
        column: Some(e.column()),
    })?;
    cfg.base_dir = base_dir.to_path_buf();
    Ok(cfg)
}

fn in_open_unit(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

fn check_box(out: &mut Vec<Diagnostic>, field: &str, b: &[Interval], dim: usize) {
    if b.len() != dim {
        out.push(Diagnostic::field(
            field,
            format!("expected {dim} intervals, got {}", b.len()),
        ));
    }
    for (i, iv) in b.iter().enumerate() {
        if !(iv.lo <= iv.hi) {
            out.push(Diagnostic::field(&format!("{field}[{i}]"), "box is empty"));
        }
    }
}

/// Schema and range checks. Pure apart from checking that referenced
/// files exist.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let Some(kind) = cfg.kind else {
        out.push(Diagnostic::field("kind", "missing experiment kind"));
        return out;
    };

    let control = cfg.control_problem();
    match (kind, &cfg.problem) {
        (Kind::Counterexample, _) => {}
        (_, None) => out.push(Diagnostic::field("problem", "missing problem")),
        (Kind::Solve, Some(p)) if p.name != ProblemName::MdpFile => out.push(Diagnostic::field(
            "problem.name",
            "solve needs an mdp_file problem",
        )),
        (Kind::Solve, Some(_)) => match cfg.mdp_path() {
            None => out.push(Diagnostic::field(
                "problem.path",
                "mdp_file problems need a path",
            )),
            Some(p) if !p.is_file() => out.push(Diagnostic::field(
                "problem.path",
                format!("{} does not exist", p.display()),
            )),
            _ => {}
        },
        (_, Some(p)) if p.name == ProblemName::MdpFile => out.push(Diagnostic::field(
            "problem.name",
            format!("{} needs a control problem", kind.as_str()),
        )),
        _ => {}
    }
    if let (Some(spec), Some(p)) = (&cfg.problem, &control) {
        let n = p.state_dim();
        if let Some(b) = &spec.state_box {
            check_box(&mut out, "problem.state_box", b, n);
        }
        if let Some(b) = &spec.initial_box {
            check_box(&mut out, "problem.initial_box", b, n);
        }
        if let Some(b) = spec.control_box {
            check_box(&mut out, "problem.control_box", &[b], 1);
        }
        if out.is_empty() {
            if let Err(e) = p.validate() {
                out.push(Diagnostic::field("problem", e.to_string()));
            }
        }
    }

    if kind == Kind::Solve {
        if let Some(s) = &cfg.solve {
            if !(s.lambda >= 0.0 && s.lambda < 1.0) {
                out.push(Diagnostic::field(
                    "solve.lambda",
                    format!("lambda out of range: {} not in [0, 1)", s.lambda),
                ));
            }
            check_prob(&mut out, "solve.prob", &s.prob);
            if s.max_iters == 0 {
                out.push(Diagnostic::field("solve.max_iters", "must be positive"));
            }
            if !(s.stop_tol > 0.0) {
                out.push(Diagnostic::field("solve.stop_tol", "must be positive"));
            }
            if s.method == Method::Opi && s.opi_horizon == 0 {
                out.push(Diagnostic::field("solve.opi_horizon", "must be at least 1"));
            }
            if s.dominating_start && s.init.is_some() {
                out.push(Diagnostic::field(
                    "solve.init",
                    "conflicts with dominating_start",
                ));
            }
        }
    }

    if let (Some(t), Some(p)) = (&cfg.train, &control) {
        if !in_open_unit(t.lambda) {
            out.push(Diagnostic::field(
                "train.lambda",
                format!("lambda out of range: {} not in (0, 1)", t.lambda),
            ));
        }
        check_prob(&mut out, "train.prob", &t.prob);
        if let Err(e) = t.validate(p.state_dim()) {
            let msg = e.to_string();
            if !msg.contains("lambda") && !msg.contains("prob") {
                out.push(Diagnostic::field("train", msg));
            }
        }
    }

    if kind == Kind::Simulate {
        match (&cfg.simulate, &control) {
            (None, _) => out.push(Diagnostic::field("simulate", "missing section")),
            (Some(s), Some(p)) => {
                if s.x0.len() != p.state_dim() {
                    out.push(Diagnostic::field(
                        "simulate.x0",
                        format!("expected {} coordinates, got {}", p.state_dim(), s.x0.len()),
                    ));
                } else if s.x0.iter().zip(&p.state_box).any(|(v, b)| !b.contains(*v)) {
                    out.push(Diagnostic::field("simulate.x0", "outside the state box"));
                }
                if let Some(th) = &s.theta {
                    if th.dim != p.state_dim() {
                        out.push(Diagnostic::field(
                            "simulate.theta",
                            "dimension does not match the problem",
                        ));
                    } else if let Err(e) = th.validate() {
                        out.push(Diagnostic::field("simulate.theta", e.to_string()));
                    }
                }
                if s.baseline.is_some() && !matches!(p.plant, Benchmark::SinCos { .. }) {
                    out.push(Diagnostic::field(
                        "simulate.baseline",
                        "only available for the sincos problem",
                    ));
                }
                if let Integrator::Rk4 { substep } = s.integrator {
                    if !(substep > 0.0) {
                        out.push(Diagnostic::field(
                            "simulate.integrator.substep",
                            "must be positive",
                        ));
                    }
                }
            }
            _ => {}
        }
    }

    let check_axis = |out: &mut Vec<Diagnostic>, field: &str, axis: usize, points: usize| {
        if let Some(p) = &control {
            if axis >= p.state_dim() {
                out.push(Diagnostic::field(
                    &format!("{field}.axis"),
                    format!("no axis {axis}"),
                ));
            }
        }
        if points < 2 {
            out.push(Diagnostic::field(
                &format!("{field}.points"),
                "need at least 2 points",
            ));
        }
    };
    if let (Kind::Slice, Some(s)) = (kind, &cfg.slice) {
        check_axis(&mut out, "slice", s.axis, s.points);
    }
    if let (Kind::Compare, Some(c)) = (kind, &cfg.compare) {
        check_axis(&mut out, "compare", c.axis, c.points);
        if c.schemes.is_empty() {
            out.push(Diagnostic::field(
                "compare.schemes",
                "no schemes to compare",
            ));
        }
        if c.opi_horizon == 0 {
            out.push(Diagnostic::field(
                "compare.opi_horizon",
                "must be at least 1",
            ));
        }
    }
    if let (Kind::Counterexample, Some(c)) = (kind, &cfg.counterexample) {
        if c.n_min == 0 || c.n_min > c.n_max {
            out.push(Diagnostic::field(
                "counterexample.n_min",
                "need 1 <= n_min <= n_max",
            ));
        }
        if let Some(w) = c.window {
            if w <= c.n_max {
                out.push(Diagnostic::field(
                    "counterexample.window",
                    "must exceed n_max",
                ));
            }
        }
        if c.probe == 0 || (1..=c.n_max).any(|n| c.probe > c.window_for(n)) {
            out.push(Diagnostic::field(
                "counterexample.probe",
                "label outside the window",
            ));
        }
        if !in_open_unit(c.rate) {
            out.push(Diagnostic::field(
                "counterexample.rate",
                "must lie in (0, 1)",
            ));
        }
        if !in_open_unit(c.alpha) {
            out.push(Diagnostic::field(
                "counterexample.alpha",
                "must lie in (0, 1)",
            ));
        }
    }
    out
}

fn check_prob(out: &mut Vec<Diagnostic>, field: &str, p: &ProbSchedule) {
    let values = p.values();
    if values.is_empty() {
        out.push(Diagnostic::field(field, "empty probability table"));
    }
    for v in values {
        if !in_open_unit(v) {
            out.push(Diagnostic::field(
                field,
                format!("prob out of range: {v} not in (0, 1)"),
            ));
        }
    }
}
