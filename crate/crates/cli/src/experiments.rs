//! Dispatch from a resolved config to the solvers, trainers and simulators.

use std::fs;

use lpir_core::approx::{train, EvalScheme, TrainConfig, TrainLog};
use lpir_core::control::{
    cost_slice, simulate_adp, simulate_feedback_lin, Benchmark, ControlProblem,
    FeedbackLinController, Trajectory,
};
use lpir_core::counterexample::{counterexample_norm_gap, CounterexampleSpec};
use lpir_core::quadratic::QuadraticValue;
use lpir_core::solvers::{
    lambda_pir_solve, make_dominating_j0, opi_solve, pi_solve, vi_solve, SolveOutcome, Step,
};
use lpir_core::tabular::TabularMdp;
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts::{content_hash, fmt_f64, ArtifactDir, InputFile, IoError, Manifest};
use crate::config::{validate, Diagnostic, ExperimentConfig, Kind, Method, Scheme};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config:\n{}", render(.0))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Core(#[from] lpir_core::Error),
    #[error(transparent)]
    Io(#[from] IoError),
}

fn render(d: &[Diagnostic]) -> String {
    d.iter()
        .map(|d| format!("  {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl RunError {
    /// 1 for validation failures, 2 for invariant violations and numerical
    /// failures, 3 for I/O errors.
    pub fn exit_code(&self) -> i32 {
        use lpir_core::Error as E;
        match self {
            RunError::Invalid(_) => 1,
            RunError::Core(E::Parameter { .. } | E::Dimension { .. } | E::InvalidPolicy { .. }) => {
                1
            }
            RunError::Core(_) => 2,
            RunError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub kind: Kind,
    pub artifacts: Vec<String>,
    pub summary: Value,
}

fn artifact_names(cfg: &ExperimentConfig) -> Vec<String> {
    let mut names: Vec<&str> = vec!["manifest.json"];
    match cfg.kind.expect("validated") {
        Kind::Solve => names.extend(["records.csv", "solution.json"]),
        Kind::Train => names.extend(["iterations.csv", "train_log.json", "theta.json"]),
        Kind::Simulate => {
            let sim = cfg.simulate.as_ref().expect("validated");
            names.push("trajectory.csv");
            if sim.baseline.is_some() {
                names.push("baseline_trajectory.csv");
            }
            if sim.theta.is_none() {
                names.push("theta.json");
            }
            names.push("summary.json");
        }
        Kind::Slice => names.extend(["slices.csv", "theta.json"]),
        Kind::Counterexample => names.push("counterexample.csv"),
        Kind::Compare => {
            let c = cfg.compare.as_ref().expect("validated");
            let mut out: Vec<String> = names.iter().map(|s| s.to_string()).collect();
            out.extend(c.schemes.iter().map(|s| format!("{}.csv", s.file_stem())));
            out.push("compare_summary.csv".into());
            return out;
        }
    }
    names.into_iter().map(String::from).collect()
}

/// Validates `cfg`, writes the manifest and then the per-kind artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport, RunError> {
    let diags = validate(cfg);
    if !diags.is_empty() {
        return Err(RunError::Invalid(diags));
    }
    let kind = cfg.kind.expect("validated");

    let mdp = match cfg.mdp_path() {
        Some(path) if kind == Kind::Solve => {
            let bytes = fs::read(&path).map_err(|source| IoError {
                path: path.clone(),
                source,
            })?;
            let mdp: TabularMdp = serde_json::from_slice(&bytes).map_err(|e| {
                RunError::Invalid(vec![Diagnostic {
                    field: "problem.path".into(),
                    message: format!("{}: {e}", path.display()),
                    line: Some(e.line()),
                    column: Some(e.column()),
                }])
            })?;
            let input = InputFile {
                path: path
                    .strip_prefix(&cfg.base_dir)
                    .unwrap_or(&path)
                    .display()
                    .to_string(),
                sha256: content_hash(&bytes),
            };
            Some((mdp, input))
        }
        _ => None,
    };

    let dir = ArtifactDir::create(&cfg.out_dir())?;
    let artifacts = artifact_names(cfg);
    let echo = serde_json::to_vec(cfg).expect("serializable config");
    let manifest = Manifest {
        tool: "lpir",
        version: env!("CARGO_PKG_VERSION"),
        kind: kind.as_str(),
        seed: cfg.seed,
        config_hash: content_hash(&echo),
        inputs: mdp
            .as_ref()
            .map(|(_, i)| InputFile {
                path: i.path.clone(),
                sha256: i.sha256.clone(),
            })
            .into_iter()
            .collect(),
        artifacts: artifacts.clone(),
        config: cfg,
    };
    dir.write_json("manifest.json", &manifest)?;

    let summary = match kind {
        Kind::Solve => run_solve(cfg, &mdp.expect("loaded above").0, &dir)?,
        Kind::Train => run_train(cfg, &dir)?,
        Kind::Simulate => run_simulate(cfg, &dir)?,
        Kind::Slice => run_slice(cfg, &dir)?,
        Kind::Counterexample => run_counterexample(cfg, &dir)?,
        Kind::Compare => run_compare(cfg, &dir)?,
    };
    Ok(RunReport {
        kind,
        artifacts,
        summary,
    })
}

fn control_problem(cfg: &ExperimentConfig) -> ControlProblem {
    cfg.control_problem().expect("validated control problem")
}

fn train_config(cfg: &ExperimentConfig) -> TrainConfig {
    cfg.train.clone().expect("resolved train section")
}

fn run_solve(
    cfg: &ExperimentConfig,
    mdp: &TabularMdp,
    dir: &ArtifactDir,
) -> Result<Value, RunError> {
    let s = cfg.solve.as_ref().expect("resolved solve section");
    let mut sc = s.solver_config(cfg.seed);
    if s.dominating_start {
        sc.init = Some(make_dominating_j0(mdp)?);
    }
    let out: SolveOutcome = match s.method {
        Method::LambdaPir => lambda_pir_solve(mdp, &sc)?,
        Method::Vi => vi_solve(mdp, &sc)?,
        Method::Opi => opi_solve(mdp, &sc)?,
        Method::Pi => pi_solve(mdp, &sc)?,
    };
    let rows: Vec<Vec<String>> = out
        .records
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                r.branch.map(Step::as_str).unwrap_or("init").to_string(),
                fmt_f64(r.err_norm),
                r.lower_ok.to_string(),
                r.upper_ok.to_string(),
            ]
        })
        .collect();
    dir.write_csv(
        "records.csv",
        &[
            "k",
            "branch",
            "err_norm",
            "sandwich_lower_ok",
            "sandwich_upper_ok",
        ],
        &rows,
    )?;
    let solution = json!({
        "j": out.j,
        "policy": out.policy,
        "converged": out.converged,
        "iterations": out.iterations,
        "residual": out.residual,
        "vi_steps": out.branch_count(Step::Vi),
        "lambda_steps": out.branch_count(Step::Lambda),
        "final_err_norm": out.records.last().map(|r| r.err_norm),
    });
    dir.write_json("solution.json", &solution)?;
    Ok(solution)
}

fn iteration_rows(log: &TrainLog) -> Vec<Vec<String>> {
    log.iterations
        .iter()
        .map(|it| {
            vec![
                it.k.to_string(),
                match it.branch {
                    Some(b) => serde_json::to_value(b)
                        .unwrap()
                        .as_str()
                        .unwrap()
                        .to_string(),
                    None => "per_sample".into(),
                },
                it.rollout_samples.to_string(),
                it.transitions.to_string(),
                it.clips.to_string(),
                fmt_f64(it.fit_residual),
                fmt_f64(it.objective),
                it.projected.to_string(),
                it.kept_incumbent.to_string(),
                fmt_f64(it.grid_sup_diff),
                fmt_f64(it.min_eigenvalue),
            ]
        })
        .collect()
}

const ITERATION_HEADER: [&str; 11] = [
    "k",
    "branch",
    "rollout_samples",
    "transitions",
    "clips",
    "fit_residual",
    "objective",
    "projected",
    "kept_incumbent",
    "grid_sup_diff",
    "min_eigenvalue",
];

fn run_train(cfg: &ExperimentConfig, dir: &ArtifactDir) -> Result<Value, RunError> {
    let problem = control_problem(cfg);
    let (theta, log) = train(
        &problem,
        &train_config(cfg),
        &QuadraticValue::zero(problem.state_dim()),
    )?;
    dir.write_csv("iterations.csv", &ITERATION_HEADER, &iteration_rows(&log))?;
    dir.write_json("train_log.json", &log)?;
    dir.write_json("theta.json", &theta)?;
    Ok(json!({ "theta": theta, "sample_budget": log.sample_budget() }))
}

fn trajectory_rows(tr: &Trajectory) -> Vec<Vec<String>> {
    tr.states
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let mut row = vec![fmt_f64(k as f64 * tr.dt)];
            row.extend(x.iter().map(|v| fmt_f64(*v)));
            row.push(tr.controls.get(k).map_or(String::new(), |u| fmt_f64(*u)));
            row.push(tr.stage_costs.get(k).map_or(String::new(), |c| fmt_f64(*c)));
            row
        })
        .collect()
}

fn write_trajectory(dir: &ArtifactDir, name: &str, tr: &Trajectory) -> Result<(), RunError> {
    let n = tr.states.first().map_or(0, Vec::len);
    let xs: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let mut header: Vec<&str> = vec!["t"];
    header.extend(xs.iter().map(String::as_str));
    header.extend(["u", "stage_cost"]);
    dir.write_csv(name, &header, &trajectory_rows(tr))?;
    Ok(())
}

/// First sample index with `|x_0| < tol`.
pub fn reach_index(tr: &Trajectory, tol: f64) -> Option<usize> {
    tr.first_index(|x| x[0].abs() < tol)
}

fn run_simulate(cfg: &ExperimentConfig, dir: &ArtifactDir) -> Result<Value, RunError> {
    let sim = cfg.simulate.as_ref().expect("validated");
    let problem = control_problem(cfg);
    let theta = match &sim.theta {
        Some(t) => t.clone(),
        None => {
            let (t, _) = train(
                &problem,
                &train_config(cfg),
                &QuadraticValue::zero(problem.state_dim()),
            )?;
            t
        }
    };
    let tr = simulate_adp(&problem, &theta, &sim.x0, sim.horizon, sim.integrator)?;
    write_trajectory(dir, "trajectory.csv", &tr)?;
    let mut summary = json!({
        "final_state": tr.states.last(),
        "discounted_cost": tr.discounted_cost,
        "clip_events": tr.clip_events,
        "reach_index": reach_index(&tr, sim.reach_tol),
        "reach_time": reach_index(&tr, sim.reach_tol).map(|k| k as f64 * tr.dt),
    });
    if let Some(b) = sim.baseline {
        let a = match problem.plant {
            Benchmark::SinCos { a, .. } => a,
            _ => unreachable!("validated"),
        };
        let ctrl = FeedbackLinController::with_poles(b.poles[0], b.poles[1], a);
        let base = simulate_feedback_lin(&ctrl, &sim.x0, sim.horizon, tr.dt, b.substep)?;
        write_trajectory(dir, "baseline_trajectory.csv", &base)?;
        let umax = base.controls.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        summary["baseline"] = json!({
            "reach_index": reach_index(&base, sim.reach_tol),
            "reach_time": reach_index(&base, sim.reach_tol).map(|k| k as f64 * base.dt),
            "max_abs_control": umax,
            "discounted_cost": base.discounted_cost,
        });
    }
    if sim.theta.is_none() {
        dir.write_json("theta.json", &theta)?;
    }
    dir.write_json("summary.json", &summary)?;
    Ok(summary)
}

fn slice_rows(
    thetas: &[QuadraticValue],
    axis: usize,
    grid: &[f64],
) -> Result<Vec<Vec<String>>, RunError> {
    let mut rows = Vec::new();
    for (k, th) in thetas.iter().enumerate() {
        for (c, v) in cost_slice(th, axis, grid)? {
            rows.push(vec![k.to_string(), fmt_f64(c), fmt_f64(v)]);
        }
    }
    Ok(rows)
}

fn run_slice(cfg: &ExperimentConfig, dir: &ArtifactDir) -> Result<Value, RunError> {
    let s = cfg.slice.expect("resolved slice section");
    let problem = control_problem(cfg);
    let (theta, log) = train(
        &problem,
        &train_config(cfg),
        &QuadraticValue::zero(problem.state_dim()),
    )?;
    let grid = problem.state_box[s.axis].linspace(s.points);
    dir.write_csv(
        "slices.csv",
        &["k", "coordinate", "value"],
        &slice_rows(&log.thetas, s.axis, &grid)?,
    )?;
    dir.write_json("theta.json", &theta)?;
    Ok(json!({ "theta": theta }))
}

fn run_counterexample(cfg: &ExperimentConfig, dir: &ArtifactDir) -> Result<Value, RunError> {
    let c = cfg.counterexample.expect("resolved counterexample section");
    let mut rows = Vec::new();
    let mut max_gap = 0.0f64;
    for n in c.n_min..=c.n_max {
        let spec = CounterexampleSpec {
            rate: c.rate,
            alpha: c.alpha,
            window: c.window_for(n),
            truncation: n,
        };
        let r = counterexample_norm_gap(&spec)?;
        max_gap = max_gap.max(r.norm_gap);
        rows.push(vec![
            n.to_string(),
            spec.window.to_string(),
            fmt_f64(r.norm_gap),
            fmt_f64(r.gap_at(c.probe)),
        ]);
    }
    dir.write_csv(
        "counterexample.csv",
        &["n", "window", "norm_gap", "probe_gap"],
        &rows,
    )?;
    Ok(json!({ "rows": rows.len(), "max_norm_gap": max_gap }))
}

/// `max_grid |J̃(·, a) − J̃(·, b)|` along one axis.
pub fn slice_distance(
    a: &QuadraticValue,
    b: &QuadraticValue,
    axis: usize,
    grid: &[f64],
) -> lpir_core::Result<f64> {
    let sa = cost_slice(a, axis, grid)?;
    let sb = cost_slice(b, axis, grid)?;
    Ok(sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| (x.1 - y.1).abs())
        .fold(0.0, f64::max))
}

fn run_compare(cfg: &ExperimentConfig, dir: &ArtifactDir) -> Result<Value, RunError> {
    let c = cfg.compare.as_ref().expect("resolved compare section");
    let problem = control_problem(cfg);
    let base = train_config(cfg);
    let grid = problem.state_box[c.axis].linspace(c.points);
    let mut runs = Vec::new();
    for &scheme in &c.schemes {
        let scheme_cfg = TrainConfig {
            scheme: match scheme {
                Scheme::Vi => EvalScheme::Vi,
                Scheme::Opi => EvalScheme::Opi {
                    horizon: c.opi_horizon,
                },
                Scheme::LambdaPir => EvalScheme::LambdaPir,
            },
            ..base.clone()
        };
        let (_, log) = train(
            &problem,
            &scheme_cfg,
            &QuadraticValue::zero(problem.state_dim()),
        )?;
        dir.write_csv(
            &format!("{}.csv", scheme.file_stem()),
            &["k", "coordinate", "value"],
            &slice_rows(&log.thetas, c.axis, &grid)?,
        )?;
        runs.push((scheme, log));
    }
    let reference = runs
        .iter()
        .find(|(s, _)| *s == Scheme::LambdaPir)
        .map(|(_, l)| l.final_theta().clone());
    let mut rows = Vec::new();
    for (scheme, log) in &runs {
        let last = log.final_theta();
        for (k, th) in log.thetas.iter().enumerate() {
            let prev = if k == 0 {
                String::new()
            } else {
                fmt_f64(slice_distance(th, &log.thetas[k - 1], c.axis, &grid)?)
            };
            let to_ref = match &reference {
                Some(r) => fmt_f64(slice_distance(th, r, c.axis, &grid)?),
                None => String::new(),
            };
            rows.push(vec![
                scheme.file_stem().to_string(),
                k.to_string(),
                prev,
                fmt_f64(slice_distance(th, last, c.axis, &grid)?),
                to_ref,
            ]);
        }
    }
    dir.write_csv(
        "compare_summary.csv",
        &[
            "scheme",
            "k",
            "sup_diff_prev",
            "dist_to_own_final",
            "dist_to_lambda_pir_final",
        ],
        &rows,
    )?;
    Ok(json!({ "schemes": c.schemes }))
}
