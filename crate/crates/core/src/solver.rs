//! Proximal gradient iteration for
//!
//! ```text
//! min_u  f(u) + alpha/2 ||u||^2 + beta int g(u(x)) dx,   |u| <= b,
//! ```
//!
//! with the quadratic term handled inside the prox: every cell is updated by
//! `u+ = prox_{s g}(q)` with `q = (L u - grad f(u)) / (L + alpha)` and
//! `s = beta / (L + alpha)`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{param, Result};
use crate::mesh::{
    control_l2_sq, distance_l2_sq, penalty_integral, support_change, support_measure,
    ControlField, Mesh, StateField,
};
use crate::pde::ReducedProblem;
use crate::prox::{compute_u_inflection, prox_scalar, PenaltyKind, PenaltySpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    /// Constant `L` in every iteration; no decrease test.
    FixedL(f64),
    /// Try `L = L0 / theta^i`, `i = 0, 1, ...` until
    /// `eta ||u+ - u||^2 <= J(u) - J(u+)`.
    Backtracking { l0: f64, theta: f64, eta: f64 },
}

impl StepMode {
    pub fn backtracking(l0: f64) -> Self {
        StepMode::Backtracking {
            l0,
            theta: 0.5,
            eta: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: StepMode,
    pub pen: PenaltySpec,
    /// Stop once `|J(u_{k+1}) - J(u_k)| <= stop_tol`.
    pub stop_tol: f64,
    /// Optional extra requirement `||u_{k+1} - u_k|| <= step_tol` for stopping.
    pub step_tol: Option<f64>,
    pub max_iter: usize,
    pub max_backtracks: usize,
    /// Start each line search from the previous `L_k` instead of `L0`.
    pub warm_start: bool,
    pub record_omega: bool,
}

impl SolverConfig {
    pub fn new(mode: StepMode, pen: PenaltySpec) -> Self {
        Self {
            mode,
            pen,
            stop_tol: 1e-12,
            step_tol: None,
            max_iter: 5000,
            max_backtracks: 60,
            warm_start: false,
            record_omega: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pen.validate()?;
        match self.mode {
            StepMode::FixedL(l) if !(l > 0.0 && l.is_finite()) => {
                return param(format!("fixed L must be positive, got {l}"))
            }
            StepMode::Backtracking { l0, theta, eta } => {
                if !(l0 > 0.0 && l0.is_finite()) {
                    return param(format!("L0 must be positive, got {l0}"));
                }
                if !(theta > 0.0 && theta < 1.0) {
                    return param(format!("theta must lie in (0, 1), got {theta}"));
                }
                if !(eta > 0.0) {
                    return param(format!("eta must be positive, got {eta}"));
                }
            }
            _ => {}
        }
        if !(self.stop_tol > 0.0) {
            return param(format!("stop tolerance must be positive, got {}", self.stop_tol));
        }
        Ok(())
    }
}

/// Diagnostics of one accepted iterate `u_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    /// Total objective `J = f + alpha/2 ||u||^2 + beta int g`.
    pub objective: f64,
    /// `f(u_k)`.
    pub tracking: f64,
    /// `int g(u_k)` (unweighted).
    pub penalty: f64,
    /// `J(u_{k-1}) - J(u_k)`, evaluated without cancellation.
    pub decrease: f64,
    /// `||u_k - u_{k-1}||_{L^2}`.
    pub step_norm: f64,
    pub lipschitz: f64,
    /// Cumulative state plus adjoint solves.
    pub pde_solves: usize,
    pub state_solves: usize,
    pub adjoint_solves: usize,
    pub support_measure: f64,
    pub support_change: f64,
    pub omega_m: Option<f64>,
    pub backtracks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
    /// The line search could not produce a decrease; the iterate is stationary
    /// to working precision.
    Stagnated,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub control: ControlField,
    pub state: StateField,
    /// `grad f` at `control`.
    pub gradient: ControlField,
    pub initial_objective: f64,
    pub history: Vec<IterateRecord>,
    pub termination: Termination,
    pub state_solves: usize,
    pub adjoint_solves: usize,
}

impl RunResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn pde_solves(&self) -> usize {
        self.state_solves + self.adjoint_solves
    }

    pub fn final_objective(&self) -> f64 {
        self.history.last().map_or(self.initial_objective, |r| r.objective)
    }

    /// `L_k` of the last accepted step.
    pub fn final_lipschitz(&self) -> Option<f64> {
        self.history.last().map(|r| r.lipschitz)
    }
}

/// One proximal gradient update applied cell by cell.
pub fn pg_step(
    u: &ControlField,
    grad: &ControlField,
    lipschitz: f64,
    pen: &PenaltySpec,
) -> Result<ControlField> {
    if u.len() != grad.len() {
        return Err(crate::error::Error::MeshMismatch {
            expected: u.len(),
            found: grad.len(),
        });
    }
    if !(lipschitz > 0.0) {
        return param(format!("L must be positive, got {lipschitz}"));
    }
    let denom = lipschitz + pen.alpha;
    let s = pen.beta / denom;
    let values = u
        .values()
        .par_iter()
        .zip(grad.values().par_iter())
        .map(|(&uk, &gk)| prox_scalar((lipschitz * uk - gk) / denom, s, pen).map(|r| r.value))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ControlField::from_values_unchecked(values))
}

/// Measure of `{0 < |u| < u_I}`.
pub fn omega_m_measure(mesh: &Mesh, u: &ControlField, u_inflection: f64) -> f64 {
    mesh.triangle_area()
        * u.values()
            .iter()
            .filter(|v| **v != 0.0 && v.abs() < u_inflection)
            .count() as f64
}

/// Inflection bound `u_I(beta/alpha)` used for the Ω_m diagnostic, when defined.
pub fn omega_threshold(pen: &PenaltySpec) -> Option<f64> {
    match pen.kind {
        PenaltyKind::LpPower { p } if pen.alpha > 0.0 => Some(compute_u_inflection(pen.beta / pen.alpha, p)),
        _ => None,
    }
}

/// Objective pieces of one iterate.
#[derive(Debug, Clone, Copy)]
struct Objective {
    tracking: f64,
    penalty: f64,
    total: f64,
}

fn objective(prob: &ReducedProblem, pen: &PenaltySpec, u: &ControlField, y: &StateField) -> Objective {
    let mesh = prob.mesh();
    let tracking = prob.tracking_value(y);
    let penalty = penalty_integral(mesh, u, pen);
    let total = tracking + 0.5 * pen.alpha * control_l2_sq(mesh, u) + pen.beta * penalty;
    Objective {
        tracking,
        penalty,
        total,
    }
}

/// `J(old) - J(new)` assembled from differences so that small decreases are
/// not lost to round-off.
fn objective_decrease(
    prob: &ReducedProblem,
    pen: &PenaltySpec,
    (u_old, y_old): (&ControlField, &StateField),
    u_new: &ControlField,
    increment: &[f64],
) -> f64 {
    let mut cells = 0.0;
    for (&a, &b) in u_old.values().iter().zip(u_new.values()) {
        if a == b {
            continue;
        }
        let dg = pen.g_difference(a, b);
        if dg == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        cells += 0.5 * pen.alpha * (a - b) * (a + b) + pen.beta * dg;
    }
    prob.tracking_decrease_by_increment(y_old, increment) + prob.mesh().triangle_area() * cells
}

/// Runs the proximal gradient method from `u_init`.
pub fn run(prob: &ReducedProblem, cfg: &SolverConfig, u_init: &ControlField) -> Result<RunResult> {
    run_with_observer(prob, cfg, u_init, |_, _| {})
}

/// As [`run`], calling `observe` with every accepted iterate and its record.
pub fn run_with_observer(
    prob: &ReducedProblem,
    cfg: &SolverConfig,
    u_init: &ControlField,
    mut observe: impl FnMut(&ControlField, &IterateRecord),
) -> Result<RunResult> {
    cfg.validate()?;
    let mesh = prob.mesh();
    let pen = &cfg.pen;
    let omega_cut = if cfg.record_omega { omega_threshold(pen) } else { None };

    let mut u = u_init.clone();
    let mut y = prob.solve_state(&u)?;
    let mut state_solves = 1;
    let mut grad = prob.gradient_from_state(&y)?;
    let mut adjoint_solves = 1;
    let mut obj = objective(prob, pen, &u, &y);
    let initial_objective = obj.total;
    let mut history: Vec<IterateRecord> = Vec::new();
    let mut last_l = match cfg.mode {
        StepMode::FixedL(l) => l,
        StepMode::Backtracking { l0, .. } => l0,
    };
    let mut best: Option<(f64, ControlField, StateField, ControlField)> = None;

    let termination = loop {
        if history.len() >= cfg.max_iter {
            break Termination::MaxIter;
        }
        let (lipschitz, trial, y_trial, decrease, backtracks) = match cfg.mode {
            StepMode::FixedL(l) => {
                let trial = pg_step(&u, &grad, l, pen)?;
                let (y_trial, inc) = prob.solve_state_increment(&u, &y, &trial)?;
                state_solves += 1;
                let dec = objective_decrease(prob, pen, (&u, &y), &trial, &inc);
                (l, trial, y_trial, dec, 0)
            }
            StepMode::Backtracking { l0, theta, eta } => {
                let mut l = if cfg.warm_start { last_l } else { l0 };
                let mut accepted = None;
                for i in 0..=cfg.max_backtracks {
                    let trial = pg_step(&u, &grad, l, pen)?;
                    let (y_trial, inc) = prob.solve_state_increment(&u, &y, &trial)?;
                    state_solves += 1;
                    let dec = objective_decrease(prob, pen, (&u, &y), &trial, &inc);
                    let dist2 = distance_l2_sq(mesh, &trial, &u)?;
                    if eta * dist2 <= dec {
                        accepted = Some((l, trial, y_trial, dec, i));
                        break;
                    }
                    l /= theta;
                }
                match accepted {
                    Some(a) => a,
                    None => break Termination::Stagnated,
                }
            }
        };
        last_l = lipschitz;

        let step_norm = distance_l2_sq(mesh, &trial, &u)?.sqrt();
        let change = support_change(mesh, &u, &trial)?;
        u = trial;
        y = y_trial;
        grad = prob.gradient_from_state(&y)?;
        adjoint_solves += 1;
        obj = objective(prob, pen, &u, &y);

        history.push(IterateRecord {
            k: history.len() + 1,
            objective: obj.total,
            tracking: obj.tracking,
            penalty: obj.penalty,
            decrease,
            step_norm,
            lipschitz,
            pde_solves: state_solves + adjoint_solves,
            state_solves,
            adjoint_solves,
            support_measure: support_measure(mesh, &u),
            support_change: change,
            omega_m: omega_cut.map(|c| omega_m_measure(mesh, &u, c)),
            backtracks,
        });
        observe(&u, history.last().expect("just pushed"));

        if matches!(cfg.mode, StepMode::FixedL(_))
            && best.as_ref().is_none_or(|b| obj.total < b.0)
        {
            best = Some((obj.total, u.clone(), y.clone(), grad.clone()));
        }

        let small_step = cfg.step_tol.is_none_or(|t| step_norm <= t);
        if decrease.abs() <= cfg.stop_tol && small_step {
            break Termination::Converged;
        }
    };

    if termination == Termination::MaxIter {
        if let Some((_, bu, by, bg)) = best {
            u = bu;
            y = by;
            grad = bg;
        }
    }

    Ok(RunResult {
        control: u,
        state: y,
        gradient: grad,
        initial_objective,
        history,
        termination,
        state_solves,
        adjoint_solves,
    })
}

pub const HISTORY_HEADER: [&str; 10] = [
    "k",
    "J",
    "f",
    "penalty",
    "step_norm",
    "L_k",
    "pde_solves",
    "support_measure",
    "support_change",
    "omega_m",
];

/// One row per accepted iterate.
pub fn write_history_csv<W: Write>(history: &[IterateRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HISTORY_HEADER)?;
    for r in history {
        w.write_record([
            r.k.to_string(),
            r.objective.to_string(),
            r.tracking.to_string(),
            r.penalty.to_string(),
            r.step_norm.to_string(),
            r.lipschitz.to_string(),
            r.pde_solves.to_string(),
            r.support_measure.to_string(),
            r.support_change.to_string(),
            r.omega_m.map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
