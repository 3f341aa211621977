//! Constrained control benchmarks with dynamics `x_{k+1} = f(x_k, u_k)`,
//! quadratic stage cost and the Bellman mapping
//! `H(x, u, J) = g(x, u) + α J(f(x, u))` with `v ≡ 1`.
//!
//! Also holds the exact box-constrained greedy minimizer, closed-loop
//! simulation (discrete map or RK4 on the continuous plant with a
//! zero-order hold), the feedback-linearization baseline and a scalar
//! discounted Riccati oracle.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::model::AbstractModel;
use crate::quadratic::QuadraticValue;
use crate::rng::{Rng, StreamRng};
use crate::space::{CostTable, WeightedSpace};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        self.lo + (self.hi - self.lo) * rng.gen::<f64>()
    }

    /// `points` evenly spaced values including both ends.
    pub fn linspace(&self, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lo + self.hi)],
            _ => (0..points)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (points - 1) as f64)
                .collect(),
        }
    }
}

pub trait Plant {
    fn state_dim(&self) -> usize;

    /// The discrete map `f(x, u)`.
    fn step(&self, x: &[f64], u: f64) -> Vec<f64>;

    /// `(d, b)` with `f(x, u) = d + b u`, when the map is affine in `u`.
    fn affine_split(&self, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)>;

    /// Continuous-time vector field, when the discrete map comes from one.
    fn vector_field(&self, _x: &[f64], _u: f64) -> Option<Vec<f64>> {
        None
    }

    /// Sampling period of the discrete map.
    fn sample_time(&self) -> f64 {
        1.0
    }
}

/// Torsional pendulum `φ̇ = ω`, `ω̇ = (−m g l sin φ − γ ω + τ) / M` with
/// `M = (4/3) m l²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub friction: f64,
    pub gravity: f64,
    pub dt: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            mass: 1.0 / 3.0,
            length: 1.5,
            friction: 0.2,
            gravity: 9.8,
            dt: 0.1,
        }
    }
}

impl PendulumParams {
    pub fn inertia(&self) -> f64 {
        4.0 / 3.0 * self.mass * self.length * self.length
    }

    pub fn gravity_torque(&self) -> f64 {
        self.mass * self.gravity * self.length
    }
}

/// The three benchmark plants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "plant")]
pub enum Benchmark {
    /// `x_{k+1} = x_k − 0.5 u_k`
    Linear,
    /// Forward-Euler pendulum, state `[φ, ω]`, control `τ`.
    Pendulum(PendulumParams),
    /// `ẏ = a sin z`, `ż = −y² + v` in error coordinates `[y − 1, z]`,
    /// forward Euler with step `dt`.
    SinCos { a: f64, dt: f64 },
}

impl Benchmark {
    pub fn pendulum() -> Self {
        Benchmark::Pendulum(PendulumParams::default())
    }

    pub fn sincos() -> Self {
        Benchmark::SinCos { a: 1.0, dt: 0.1 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Linear => "linear",
            Benchmark::Pendulum(_) => "pendulum",
            Benchmark::SinCos { .. } => "sincos",
        }
    }
}

impl Plant for Benchmark {
    fn state_dim(&self) -> usize {
        match self {
            Benchmark::Linear => 1,
            _ => 2,
        }
    }

    fn step(&self, x: &[f64], u: f64) -> Vec<f64> {
        match *self {
            Benchmark::Linear => vec![x[0] - 0.5 * u],
            Benchmark::Pendulum(p) => step_pendulum_with(&p, x, u),
            Benchmark::SinCos { a, dt } => {
                let (e, z) = (x[0], x[1]);
                let y = e + 1.0;
                vec![e + dt * a * libm::sin(z), z + dt * (-y * y + u)]
            }
        }
    }

    fn affine_split(&self, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let d = self.step(x, 0.0);
        let b = match *self {
            Benchmark::Linear => vec![-0.5],
            Benchmark::Pendulum(p) => vec![0.0, p.dt / p.inertia()],
            Benchmark::SinCos { dt, .. } => vec![0.0, dt],
        };
        Some((d, b))
    }

    fn vector_field(&self, x: &[f64], u: f64) -> Option<Vec<f64>> {
        match *self {
            Benchmark::Linear => None,
            Benchmark::Pendulum(p) => {
                let (phi, omega) = (x[0], x[1]);
                let acc =
                    (-p.gravity_torque() * libm::sin(phi) - p.friction * omega + u) / p.inertia();
                Some(vec![omega, acc])
            }
            Benchmark::SinCos { a, .. } => {
                let (e, z) = (x[0], x[1]);
                let y = e + 1.0;
                Some(vec![a * libm::sin(z), -y * y + u])
            }
        }
    }

    fn sample_time(&self) -> f64 {
        match *self {
            Benchmark::Linear => 1.0,
            Benchmark::Pendulum(p) => p.dt,
            Benchmark::SinCos { dt, .. } => dt,
        }
    }
}

pub fn step_linear_example(x: f64, u: f64) -> f64 {
    x - 0.5 * u
}

fn step_pendulum_with(p: &PendulumParams, x: &[f64], u: f64) -> Vec<f64> {
    let (phi, omega) = (x[0], x[1]);
    let acc = (-p.gravity_torque() * libm::sin(phi) - p.friction * omega + u) / p.inertia();
    vec![phi + p.dt * omega, omega + p.dt * acc]
}

pub fn step_pendulum(x: [f64; 2], u: f64) -> [f64; 2] {
    let next = step_pendulum_with(&PendulumParams::default(), &x, u);
    [next[0], next[1]]
}

/// One Euler step of the sin/cos plant with `a = 1`, `dt = 0.1`, in error
/// coordinates `[y − 1, z]`.
pub fn step_sincos(x: [f64; 2], u: f64) -> [f64; 2] {
    let next = Benchmark::sincos().step(&x, u);
    [next[0], next[1]]
}

/// Problem data: dynamics, `g(x, u) = xᵀ Q x + r (u − u_ref)²`, discount,
/// boxes and the initial-state box sampled uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlProblem<P = Benchmark> {
    pub plant: P,
    /// Row-major `n × n`.
    pub q: Vec<f64>,
    pub r: f64,
    /// Input at the target equilibrium; zero unless the target needs a
    /// nonzero holding input.
    #[serde(default)]
    pub u_ref: f64,
    pub alpha: f64,
    pub state_box: Vec<Interval>,
    pub control_box: Interval,
    pub initial_box: Vec<Interval>,
}

impl ControlProblem<Benchmark> {
    /// `x⁺ = x − 0.5u`, `g = x² + u²`, `α = 0.95`, `X = [−100, 100]`,
    /// `U = [−1, 1]`.
    pub fn linear_scalar() -> Self {
        let x = vec![Interval::new(-100.0, 100.0)];
        ControlProblem {
            plant: Benchmark::Linear,
            q: vec![1.0],
            r: 1.0,
            u_ref: 0.0,
            alpha: 0.95,
            state_box: x.clone(),
            control_box: Interval::new(-1.0, 1.0),
            initial_box: x,
        }
    }

    /// Pendulum with `Q = I`, `R = 0.1`, `α = 0.95`,
    /// `X = [−π/2, π/2] × [−2, 2]`, `U = [−1, 1]`.
    pub fn pendulum() -> Self {
        let x = vec![
            Interval::new(-FRAC_PI_2, FRAC_PI_2),
            Interval::new(-2.0, 2.0),
        ];
        ControlProblem {
            plant: Benchmark::pendulum(),
            q: vec![1.0, 0.0, 0.0, 1.0],
            r: 0.1,
            u_ref: 0.0,
            alpha: 0.95,
            state_box: x.clone(),
            control_box: Interval::new(-1.0, 1.0),
            initial_box: x,
        }
    }

    /// Sin/cos plant in `[y − 1, z]` with `y ∈ [−2, 2]`, `z ∈ [−π/2, π/2]`,
    /// `Q = I`, `R = 0.1`, and the input penalized relative to the holding
    /// input `v = y² = 1` at the target.
    pub fn sincos() -> Self {
        let x = vec![
            Interval::new(-3.0, 1.0),
            Interval::new(-FRAC_PI_2, FRAC_PI_2),
        ];
        ControlProblem {
            plant: Benchmark::sincos(),
            q: vec![1.0, 0.0, 0.0, 1.0],
            r: 0.1,
            u_ref: 1.0,
            alpha: 0.95,
            state_box: x.clone(),
            control_box: Interval::new(-1.0, 1.0),
            initial_box: x,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "linear" => Some(Self::linear_scalar()),
            "pendulum" => Some(Self::pendulum()),
            "sincos" => Some(Self::sincos()),
            _ => None,
        }
    }
}

impl<P: Plant> ControlProblem<P> {
    pub fn state_dim(&self) -> usize {
        self.plant.state_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.plant.state_dim();
        if self.q.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                got: self.q.len(),
            });
        }
        if self.state_box.len() != n || self.initial_box.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.state_box.len().min(self.initial_box.len()),
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(param("alpha", format!("{} not in (0, 1)", self.alpha)));
        }
        if !(self.r >= 0.0) {
            return Err(param("r", "control weight must be nonnegative"));
        }
        if self.control_box.is_empty() {
            return Err(param("control_box", "empty interval"));
        }
        for (i, (s, x0)) in self.state_box.iter().zip(&self.initial_box).enumerate() {
            if s.is_empty() || x0.is_empty() {
                return Err(param("state_box", format!("empty interval on axis {i}")));
            }
            if x0.lo < s.lo || x0.hi > s.hi {
                return Err(param(
                    "initial_box",
                    format!("axis {i} leaves the state box"),
                ));
            }
        }
        Ok(())
    }

    pub fn stage_cost(&self, x: &[f64], u: f64) -> f64 {
        let n = x.len();
        let du = u - self.u_ref;
        let mut acc = self.r * du * du;
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * self.q[i * n + j] * x[j];
            }
        }
        acc
    }

    /// Clips `x` into the state box; returns whether anything moved.
    pub fn clip_state(&self, x: &mut [f64]) -> bool {
        let mut moved = false;
        for (v, b) in x.iter_mut().zip(&self.state_box) {
            let c = b.clamp(*v);
            if c != *v {
                *v = c;
                moved = true;
            }
        }
        moved
    }

    pub fn sample_initial(&self, rng: &mut StreamRng) -> Vec<f64> {
        self.initial_box.iter().map(|b| b.sample(rng)).collect()
    }

    /// `g(x, u) + α J̃(f(x, u), θ)`.
    pub fn q_value(&self, theta: &QuadraticValue, x: &[f64], u: f64) -> f64 {
        self.stage_cost(x, u) + self.alpha * theta.eval(&self.plant.step(x, u))
    }

    /// Tensor grid over the state box with `points` values per axis.
    pub fn state_grid(&self, points: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self.state_box.iter().map(|b| b.linspace(points)).collect();
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &axes {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for prefix in &out {
                for v in axis {
                    let mut p = prefix.clone();
                    p.push(*v);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Greedy {
    pub u: f64,
    /// `g(x, u) + α J̃(f(x, u), θ)` at the returned control.
    pub value: f64,
    /// The map was not affine in `u` and a line search was used.
    pub line_search: bool,
}

/// Quadratic coefficient below which the objective is treated as linear.
pub const DEGENERATE_CURVATURE: f64 = 1e-12;

/// Exact minimizer of `g(x, u) + α J̃(f(x, u), θ)` over the control box.
///
/// For affine dynamics `f = d + b u` the objective is the scalar quadratic
/// `(r + α bᵀPb) u² + 2(α bᵀPd − r u_ref) u + const`: its vertex is clipped
/// to the box, and when the curvature vanishes the cheaper endpoint is taken
/// (ties go to the lower one). Non-affine maps fall back to a grid search
/// refined by golden sections.
pub fn greedy_control<P: Plant>(
    problem: &ControlProblem<P>,
    theta: &QuadraticValue,
    x: &[f64],
) -> Result<Greedy> {
    let ub = problem.control_box;
    if ub.is_empty() {
        return Err(param("control_box", "empty interval"));
    }
    if theta.dim != problem.state_dim() || x.len() != problem.state_dim() {
        return Err(Error::Dimension {
            expected: problem.state_dim(),
            got: theta.dim.min(x.len()),
        });
    }
    let objective = |u: f64| problem.q_value(theta, x, u);
    let Some((d, b)) = problem.plant.affine_split(x) else {
        let u = line_search(&objective, ub);
        return Ok(Greedy {
            u,
            value: objective(u),
            line_search: true,
        });
    };
    let pb = theta.apply_p(&b);
    let pd = theta.apply_p(&d);
    let bpb: f64 = b.iter().zip(&pb).map(|(a, c)| a * c).sum();
    let bpd: f64 = b.iter().zip(&pd).map(|(a, c)| a * c).sum();
    let curvature = problem.r + problem.alpha * bpb;
    let u = if curvature > DEGENERATE_CURVATURE {
        ub.clamp((problem.r * problem.u_ref - problem.alpha * bpd) / curvature)
    } else {
        let (lo, hi) = (objective(ub.lo), objective(ub.hi));
        if hi < lo {
            ub.hi
        } else {
            ub.lo
        }
    };
    let value = objective(u);
    if !value.is_finite() {
        return Err(Error::NonFinite { state: 0 });
    }
    Ok(Greedy {
        u,
        value,
        line_search: false,
    })
}

/// Grid of 201 points followed by golden-section refinement to `1e-8`.
fn line_search(f: &impl Fn(f64) -> f64, ub: Interval) -> f64 {
    let grid = ub.linspace(201);
    let mut best = 0;
    for (i, &u) in grid.iter().enumerate() {
        if f(u) < f(grid[best]) {
            best = i;
        }
    }
    if grid.len() < 2 {
        return grid[0];
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(grid.len() - 1)];
    let ratio = 0.5 * (libm::sqrt(5.0) - 1.0);
    while b - a > 1e-8 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if f(c) <= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let mid = 0.5 * (a + b);
    if f(grid[best]) < f(mid) {
        grid[best]
    } else {
        mid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Integrator {
    /// Apply the discrete map `f`.
    Discrete,
    /// RK4 on the continuous plant with the control held over each sampling
    /// period.
    Rk4 { substep: f64 },
}

impl Integrator {
    pub const REFERENCE: Integrator = Integrator::Rk4 { substep: 1e-3 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Sampling period between consecutive states.
    pub dt: f64,
    /// `horizon + 1` states.
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<f64>,
    pub stage_costs: Vec<f64>,
    pub discounted_cost: f64,
    /// Steps after which the state had to be clipped into the box.
    pub clip_events: usize,
    pub line_searches: usize,
}

impl Trajectory {
    /// First sample index at which `pred(state)` holds.
    pub fn first_index(&self, pred: impl Fn(&[f64]) -> bool) -> Option<usize> {
        self.states.iter().position(|x| pred(x))
    }
}

fn rk4_step(field: &impl Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let add = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(k).map(|(a, k)| a + s * k).collect()
    };
    let k1 = field(x)?;
    let k2 = field(&add(x, &k1, 0.5 * h))?;
    let k3 = field(&add(x, &k2, 0.5 * h))?;
    let k4 = field(&add(x, &k3, h))?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Integrates `ẋ = field(x)` over `duration` with fixed RK4 steps of at
/// most `substep`.
pub fn rk4_integrate(
    field: &impl Fn(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    duration: f64,
    substep: f64,
) -> Result<Vec<f64>> {
    let steps = libm::ceil(duration / substep - 1e-9).max(1.0) as usize;
    let h = duration / steps as f64;
    let mut cur = x.to_vec();
    for _ in 0..steps {
        cur = rk4_step(field, &cur, h)?;
    }
    Ok(cur)
}

/// Advances the plant by one sampling period under control `u`.
pub fn advance<P: Plant>(plant: &P, x: &[f64], u: f64, integrator: Integrator) -> Result<Vec<f64>> {
    match integrator {
        Integrator::Discrete => Ok(plant.step(x, u)),
        Integrator::Rk4 { substep } => {
            if !(substep > 0.0) {
                return Err(param("substep", "must be positive"));
            }
            let field = |s: &[f64]| {
                plant
                    .vector_field(s, u)
                    .ok_or_else(|| param("integrator", "plant has no continuous-time model"))
            };
            rk4_integrate(&field, x, plant.sample_time(), substep)
        }
    }
}

/// Closed loop under the greedy controller for `horizon` sampling periods.
pub fn simulate_adp<P: Plant>(
    problem: &ControlProblem<P>,
    theta: &QuadraticValue,
    x0: &[f64],
    horizon: usize,
    integrator: Integrator,
) -> Result<Trajectory> {
    simulate_with(problem, x0, horizon, integrator, |x| {
        greedy_control(problem, theta, x)
    })
}

/// Closed loop under a fixed control `u` (clipped into the box).
pub fn simulate_constant<P: Plant>(
    problem: &ControlProblem<P>,
    x0: &[f64],
    horizon: usize,
    u: f64,
    integrator: Integrator,
) -> Result<Trajectory> {
    let u = problem.control_box.clamp(u);
    simulate_with(problem, x0, horizon, integrator, |_| {
        Ok(Greedy {
            u,
            value: 0.0,
            line_search: false,
        })
    })
}

fn simulate_with<P: Plant>(
    problem: &ControlProblem<P>,
    x0: &[f64],
    horizon: usize,
    integrator: Integrator,
    mut policy: impl FnMut(&[f64]) -> Result<Greedy>,
) -> Result<Trajectory> {
    if x0.len() != problem.state_dim() {
        return Err(Error::Dimension {
            expected: problem.state_dim(),
            got: x0.len(),
        });
    }
    if x0
        .iter()
        .zip(&problem.state_box)
        .any(|(v, b)| !b.contains(*v))
    {
        return Err(param("x0", "initial state outside the state box"));
    }
    let dt = match integrator {
        Integrator::Discrete if problem.plant.vector_field(x0, 0.0).is_none() => 1.0,
        _ => problem.plant.sample_time(),
    };
    let mut states = Vec::with_capacity(horizon + 1);
    let mut controls = Vec::with_capacity(horizon);
    let mut stage_costs = Vec::with_capacity(horizon);
    let mut discounted = 0.0;
    let mut discount = 1.0;
    let (mut clips, mut searches) = (0, 0);
    let mut x = x0.to_vec();
    states.push(x.clone());
    for _ in 0..horizon {
        let g = policy(&x)?;
        searches += g.line_search as usize;
        let cost = problem.stage_cost(&x, g.u);
        discounted += discount * cost;
        discount *= problem.alpha;
        x = advance(&problem.plant, &x, g.u, integrator)?;
        clips += problem.clip_state(&mut x) as usize;
        controls.push(g.u);
        stage_costs.push(cost);
        states.push(x.clone());
    }
    Ok(Trajectory {
        dt,
        states,
        controls,
        stage_costs,
        discounted_cost: discounted,
        clip_events: clips,
        line_searches: searches,
    })
}

/// Feedback-linearizing tracker for `ẏ = a sin z`, `ż = −y² + v` with
/// target `y = target`:
/// `v = y² − (l₁ (y − target) + l₂ a sin z) / (a cos z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackLinController {
    pub l1: f64,
    pub l2: f64,
    pub a: f64,
    pub target: f64,
}

impl FeedbackLinController {
    /// Gains placing the closed-loop error poles at `p1`, `p2`:
    /// `s² + l₂ s + l₁ = (s − p1)(s − p2)`.
    pub fn with_poles(p1: f64, p2: f64, a: f64) -> Self {
        FeedbackLinController {
            l1: p1 * p2,
            l2: -(p1 + p2),
            a,
            target: 1.0,
        }
    }

    /// `x = [y − target, z]`.
    pub fn control(&self, x: &[f64]) -> Result<f64> {
        feedback_lin_control(self, x)
    }
}

pub fn feedback_lin_control(ctrl: &FeedbackLinController, x: &[f64]) -> Result<f64> {
    let (e, z) = (x[0], x[1]);
    let y = e + ctrl.target;
    let cz = libm::cos(z);
    if cz <= 1e-9 {
        return Err(Error::Singular { cos_z: cz });
    }
    Ok(y * y - (ctrl.l1 * e + ctrl.l2 * ctrl.a * libm::sin(z)) / (ctrl.a * cz))
}

/// Continuous closed loop of the feedback-linearized plant, integrated by
/// RK4 with the control re-evaluated at every stage. Samples are returned
/// every `sample` seconds.
pub fn simulate_feedback_lin(
    ctrl: &FeedbackLinController,
    x0: &[f64],
    samples: usize,
    sample: f64,
    substep: f64,
) -> Result<Trajectory> {
    let field = |s: &[f64]| -> Result<Vec<f64>> {
        let v = feedback_lin_control(ctrl, s)?;
        let y = s[0] + ctrl.target;
        Ok(vec![ctrl.a * libm::sin(s[1]), -y * y + v])
    };
    let mut x = x0.to_vec();
    let mut states = vec![x.clone()];
    let mut controls = Vec::with_capacity(samples);
    let mut stage_costs = Vec::with_capacity(samples);
    let mut discounted = 0.0;
    for k in 0..samples {
        let v = feedback_lin_control(ctrl, &x)?;
        let cost = x[0] * x[0] + x[1] * x[1] + 0.1 * v * v;
        discounted += libm::pow(0.95, k as f64) * cost;
        controls.push(v);
        stage_costs.push(cost);
        x = rk4_integrate(&field, &x, sample, substep)?;
        states.push(x.clone());
    }
    Ok(Trajectory {
        dt: sample,
        states,
        controls,
        stage_costs,
        discounted_cost: discounted,
        clip_events: 0,
        line_searches: 0,
    })
}

/// Fixed point of the discounted scalar Riccati recursion
/// `P ← q + α a² P − (α a b P)² / (r + α b² P)`, starting from `P = 0`.
pub fn riccati_oracle(a: f64, b: f64, q: f64, r: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(param("alpha", format!("{alpha} not in (0, 1)")));
    }
    if !(r > 0.0) || q < 0.0 {
        return Err(param("r", "need r > 0 and q >= 0"));
    }
    let mut p = 0.0f64;
    for _ in 0..1_000_000 {
        let cross = alpha * a * b * p;
        let next = q + alpha * a * a * p - cross * cross / (r + alpha * b * b * p);
        if (next - p).abs() <= 1e-12 * p.abs().max(1.0) {
            return Ok(next);
        }
        if !next.is_finite() {
            break;
        }
        p = next;
    }
    Err(Error::InvariantViolation {
        iteration: 0,
        what: format!("Riccati iteration diverged at P = {p}"),
    })
}

/// `J̃` along one axis with the other coordinates held at zero.
pub fn cost_slice(theta: &QuadraticValue, axis: usize, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if axis >= theta.dim {
        return Err(Error::Dimension {
            expected: theta.dim,
            got: axis,
        });
    }
    let mut x = vec![0.0; theta.dim];
    Ok(grid
        .iter()
        .map(|&c| {
            x[axis] = c;
            (c, theta.eval(&x))
        })
        .collect())
}

/// A finite truncation of a control problem: grid states, `levels`
/// evenly spaced controls, and `f(x, u)` snapped to the nearest grid
/// point. `v ≡ 1`.
#[derive(Debug, Clone)]
pub struct GriddedModel {
    points: Vec<Vec<f64>>,
    controls: Vec<f64>,
    stage: Vec<Vec<f64>>,
    next: Vec<Vec<usize>>,
    alpha: f64,
    space: WeightedSpace,
}

impl GriddedModel {
    pub fn new<P: Plant>(
        problem: &ControlProblem<P>,
        points_per_axis: usize,
        levels: usize,
    ) -> Result<Self> {
        if points_per_axis < 2 || levels == 0 {
            return Err(param(
                "points_per_axis",
                "need at least 2 points and 1 control level",
            ));
        }
        let points = problem.state_grid(points_per_axis);
        let axes: Vec<Vec<f64>> = problem
            .state_box
            .iter()
            .map(|b| b.linspace(points_per_axis))
            .collect();
        let controls = problem.control_box.linspace(levels);
        let snap = |x: &[f64]| -> usize {
            let mut idx = 0;
            for (axis, v) in axes.iter().zip(x) {
                let nearest = axis
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                idx = idx * axis.len() + nearest;
            }
            idx
        };
        let mut stage = Vec::with_capacity(points.len());
        let mut next = Vec::with_capacity(points.len());
        for x in &points {
            stage.push(controls.iter().map(|&u| problem.stage_cost(x, u)).collect());
            next.push(
                controls
                    .iter()
                    .map(|&u| snap(&problem.plant.step(x, u)))
                    .collect(),
            );
        }
        let space = WeightedSpace::uniform(points.len());
        Ok(GriddedModel {
            points,
            controls,
            stage,
            next,
            alpha: problem.alpha,
            space,
        })
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn control(&self, u: usize) -> f64 {
        self.controls[u]
    }
}

impl AbstractModel for GriddedModel {
    fn space(&self) -> &WeightedSpace {
        &self.space
    }

    fn n_controls(&self, _x: usize) -> usize {
        self.controls.len()
    }

    fn h(&self, x: usize, u: usize, j: &CostTable) -> f64 {
        self.stage[x][u] + self.alpha * j[self.next[x][u]]
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }
}
