//! Runs behind the CLI subcommands and the acceptance suite.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsepg::mesh::{
    control_l2_sq, distance_l1, distance_l2_sq, power_integral, support_measure, write_control_csv,
    write_state_csv,
};
use sparsepg::pde::l2_error;
use sparsepg::prox::{compute_u0, prox_scalar};
use sparsepg::solver::{write_history_csv, Termination};
use sparsepg::stationarity::{certify, gmap_sample, GmapGrid, GmapSample, StationarityReport};
use sparsepg::{
    run_with_observer, ControlField, Equation, Mesh, PenaltyKind, PenaltySpec, ReducedProblem, RunResult,
    StepMode,
};

use crate::config::{ExperimentConfig, Preset};
use crate::error::Result;
use crate::report::{fmt_fixed, fmt_sci, Table};

/// Per-iterate checks accumulated while the solver runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunAudit {
    /// Nonzero cells below the sparsity gap `u0(beta / (L_k + alpha))`.
    pub gap_violations: usize,
    /// Accepted backtracking steps with `J_k - J_{k+1} < eta ||u_{k+1} - u_k||^2`.
    pub decrease_violations: usize,
    /// Cells of accepted iterates that are not integers (integer penalty only).
    pub non_integer_cells: usize,
    /// `sum_k ||u_{k+1} - u_k||_{L^1}`.
    pub l1_path: f64,
    /// `sum_k ||u_{k+1} - u_k||^2_{L^2}`.
    pub l2sq_path: f64,
    pub cells_checked: usize,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub objective: f64,
    /// `int |u|^p`, or the support measure when `p = 0`.
    pub n_p: f64,
    pub support: f64,
    pub control_norm: f64,
    pub iterations: usize,
    pub state_solves: usize,
    pub adjoint_solves: usize,
    pub termination: Termination,
    pub final_lipschitz: Option<f64>,
    pub stationarity: Option<StationarityReport>,
    pub elapsed: Duration,
}

impl Summary {
    pub fn pde_solves(&self) -> usize {
        self.state_solves + self.adjoint_solves
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s += &format!("J(u*)            {:.6}\n", self.objective);
        s += &format!("N_p(u*)          {:.6}\n", self.n_p);
        s += &format!("support measure  {:.6}\n", self.support);
        s += &format!("||u*||_L2        {:.6}\n", self.control_norm);
        s += &format!("iterations       {}\n", self.iterations);
        s += &format!(
            "pde solves       {} ({} state, {} adjoint)\n",
            self.pde_solves(),
            self.state_solves,
            self.adjoint_solves
        );
        s += &format!("termination      {:?}\n", self.termination);
        if let Some(l) = self.final_lipschitz {
            s += &format!("final L          {l:e}\n");
        }
        if let Some(r) = &self.stationarity {
            s += &format!("L-stationarity   {:.3e}\n", r.l_stat_residual);
            s += &format!("PMP residual     {:.3e}\n", r.pmp_residual);
            s += &format!("PMP violation    {:.3e}\n", r.pmp_violation_measure);
        }
        s += &format!("wall time        {:.3} s\n", self.elapsed.as_secs_f64());
        s
    }
}

pub struct Solved {
    pub config: ExperimentConfig,
    pub problem: ReducedProblem,
    pub result: RunResult,
    pub audit: RunAudit,
    pub summary: Summary,
}

pub fn np_value(mesh: &Mesh, u: &ControlField, p: f64) -> f64 {
    if p == 0.0 {
        support_measure(mesh, u)
    } else {
        power_integral(mesh, u, p)
    }
}

/// Solves one configuration from `u = 0` and audits every accepted iterate.
pub fn solve(cfg: &ExperimentConfig) -> Result<Solved> {
    cfg.validate()?;
    let start = Instant::now();
    let problem = cfg.problem()?;
    let solver = cfg.solver_config()?;
    let pen = solver.pen;
    let mesh = problem.mesh();
    let eta = match solver.mode {
        StepMode::Backtracking { eta, .. } => Some(eta),
        StepMode::FixedL(_) => None,
    };
    let mut audit = RunAudit::default();
    let mut prev = ControlField::zeros(mesh);
    let mut observe = |u: &ControlField, rec: &sparsepg::solver::IterateRecord| {
        let s = pen.beta / (rec.lipschitz + pen.alpha);
        let u0 = compute_u0(s, &pen).unwrap_or(0.0);
        audit.cells_checked += u.len();
        audit.gap_violations += u.values().iter().filter(|v| **v != 0.0 && v.abs() < u0 - 1e-10).count();
        if let Some(eta) = eta {
            if rec.decrease < eta * rec.step_norm * rec.step_norm {
                audit.decrease_violations += 1;
            }
        }
        if let PenaltyKind::IntegerIndicator = pen.kind {
            audit.non_integer_cells += u.values().iter().filter(|v| v.fract() != 0.0).count();
        }
        audit.l1_path += distance_l1(mesh, u, &prev).unwrap_or(f64::NAN);
        audit.l2sq_path += distance_l2_sq(mesh, u, &prev).unwrap_or(f64::NAN);
        prev = u.clone();
    };
    let result = run_with_observer(&problem, &solver, &ControlField::zeros(mesh), &mut observe)?;

    let stationarity = match (result.final_lipschitz(), pen.alpha > 0.0) {
        (Some(l), true) => Some(certify(&problem, &result.control, &result.gradient, l, &pen)?),
        _ => None,
    };
    let summary = Summary {
        objective: result.final_objective(),
        n_p: np_value(mesh, &result.control, cfg.np_exponent()),
        support: support_measure(mesh, &result.control),
        control_norm: control_l2_sq(mesh, &result.control).sqrt(),
        iterations: result.iterations(),
        state_solves: result.state_solves,
        adjoint_solves: result.adjoint_solves,
        termination: result.termination,
        final_lipschitz: result.final_lipschitz(),
        stationarity,
        elapsed: start.elapsed(),
    };
    Ok(Solved {
        config: cfg.clone(),
        problem,
        result,
        audit,
        summary,
    })
}

/// Writes `history.csv`, `control.csv`, `state.csv` and `summary.txt`.
pub fn write_solution(solved: &Solved, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mesh = solved.problem.mesh();
    write_history_csv(&solved.result.history, fs::File::create(dir.join("history.csv"))?)?;
    write_control_csv(mesh, &solved.result.control, fs::File::create(dir.join("control.csv"))?)?;
    write_state_csv(mesh, &solved.result.state, fs::File::create(dir.join("state.csv"))?)?;
    fs::write(dir.join("summary.txt"), solved.summary.to_text())?;
    Ok(())
}

pub const TABLE_P_VALUES: [f64; 5] = [0.5, 0.3, 0.1, 0.01, 0.001];
pub const TABLE_MESH_SIZES: [usize; 6] = [20, 40, 80, 160, 320, 640];
pub const TABLE_BAD_SIZES: [usize; 4] = [20, 40, 80, 160];

fn table_row(key: String, s: &Summary) -> Vec<String> {
    vec![
        key,
        fmt_fixed(s.objective, 4),
        fmt_fixed(s.n_p, 4),
        s.iterations.to_string(),
        s.state_solves.to_string(),
        s.pde_solves().to_string(),
    ]
}

const TABLE_HEADERS: [&str; 6] = ["", "J(u*)", "N_p(u*)", "iterations", "state solves", "pde solves"];

fn headers(key: &str) -> Table {
    let mut h = TABLE_HEADERS.map(String::from).to_vec();
    h[0] = key.to_string();
    Table::new(h)
}

/// Example 1 for decreasing `p` on a fixed mesh.
pub fn table_p(base: &ExperimentConfig, ps: &[f64]) -> Result<(Vec<Solved>, Table)> {
    let mut table = headers("p");
    let mut runs = Vec::new();
    for &p in ps {
        let solved = solve(&ExperimentConfig { p, ..base.clone() })?;
        table.push(table_row(p.to_string(), &solved.summary));
        runs.push(solved);
    }
    Ok((runs, table))
}

/// Example 1 on a sequence of meshes.
pub fn table_mesh(base: &ExperimentConfig, ns: &[usize]) -> Result<(Vec<Solved>, Table)> {
    let mut table = headers("h");
    let mut runs = Vec::new();
    for &n in ns {
        let solved = solve(&ExperimentConfig { n, ..base.clone() })?;
        table.push(table_row(format!("{:.5}", std::f64::consts::SQRT_2 / n as f64), &solved.summary));
        runs.push(solved);
    }
    Ok((runs, table))
}

/// The `|Ω_{m,k}|` series of each run, one row per iteration.
pub fn omega_table(runs: &[Solved]) -> Table {
    let mut table = Table::new(["n", "k", "omega_m"]);
    for s in runs {
        for r in &s.result.history {
            if let Some(m) = r.omega_m {
                table.push(vec![s.config.n.to_string(), r.k.to_string(), m.to_string()]);
            }
        }
    }
    table
}

/// Samples `q -> prox_{s g}(q)` for `g = |u|^p` on `[-b, b]`.
pub fn prox_curve(s: f64, b: f64, p: f64, q_min: f64, q_max: f64, count: usize) -> Result<Table> {
    let pen = PenaltySpec::lp(p, b, 0.0, 1.0)?;
    let mut table = Table::new(["q", "value", "tie"]);
    let count = count.max(2);
    for i in 0..count {
        let q = q_min + (q_max - q_min) * i as f64 / (count - 1) as f64;
        let r = prox_scalar(q, s, &pen)?;
        table.push(vec![q.to_string(), r.value.to_string(), r.tie.to_string()]);
    }
    Ok(table)
}

/// Parameter sets of the two reference prox curves: `(s, b, p)`.
pub const PROX_CURVES: [(f64, f64, f64); 2] = [(0.5, 2.0, 0.5), (3.0, 2.0, 0.3)];

#[derive(Debug, Clone, Copy)]
pub struct GmapParams {
    pub lipschitz: f64,
    pub alpha: f64,
    pub beta: f64,
    pub b: f64,
    pub p: f64,
}

impl Default for GmapParams {
    fn default() -> Self {
        Self {
            lipschitz: 0.1,
            alpha: 0.01,
            beta: 0.01,
            b: 2.0,
            p: 0.8,
        }
    }
}

pub fn gmap_curve(params: GmapParams, grid: &GmapGrid) -> Result<GmapSample> {
    let pen = PenaltySpec::lp(params.p, params.b, params.alpha, params.beta)?;
    Ok(gmap_sample(params.lipschitz, &pen, grid)?)
}

pub fn default_gmap_grid(b: f64) -> GmapGrid {
    GmapGrid {
        z_min: -0.4,
        z_max: 0.4,
        z_count: 161,
        u_min: -b,
        u_max: b,
        u_count: 801,
        scan_n: 4000,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSample {
    pub finite_difference: f64,
    pub adjoint: f64,
    pub rel_err: f64,
}

/// Central differences of the tracking term against the adjoint gradient in
/// random directions around a random control.
pub fn fd_check(
    equation: Equation,
    n: usize,
    seed: u64,
    directions: usize,
    t: f64,
) -> Result<Vec<FdSample>> {
    let target = crate::config::Target::Example1;
    let prob = ReducedProblem::new(Mesh::new(n)?, equation, move |x, y| target.eval(x, y));
    let mesh = prob.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = |scale: f64| {
        let v = (0..mesh.num_triangles()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        ControlField::from_vec(mesh, v)
    };
    let u = field(3.0)?;
    let grad = prob.reduced_gradient(&u)?;
    let area = mesh.triangle_area();
    let mut out = Vec::with_capacity(directions);
    for _ in 0..directions {
        let d = field(1.0)?;
        let shifted = |sign: f64| {
            let v = u.values().iter().zip(d.values()).map(|(a, b)| a + sign * t * b).collect();
            ControlField::from_vec(mesh, v)
        };
        let fd = (prob.reduced_value(&shifted(1.0)?)? - prob.reduced_value(&shifted(-1.0)?)?) / (2.0 * t);
        let adjoint = area * grad.values().iter().zip(d.values()).map(|(a, b)| a * b).sum::<f64>();
        out.push(FdSample {
            finite_difference: fd,
            adjoint,
            rel_err: (fd - adjoint).abs() / adjoint.abs(),
        });
    }
    Ok(out)
}

fn mms_exact(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

/// L2 errors against `y = sin(πx) sin(πy)` with the matching source.
pub fn mms_errors(equation: Equation, ns: &[usize]) -> Result<Vec<f64>> {
    ns.iter()
        .map(|&n| {
            let prob = ReducedProblem::new(Mesh::new(n)?, equation, |_, _| 0.0);
            let source = ControlField::from_fn(prob.mesh(), |x, y| {
                let e = mms_exact(x, y);
                match equation {
                    Equation::Linear => 2.0 * PI * PI * e,
                    Equation::Semilinear => 2.0 * PI * PI * e + e * e * e,
                }
            });
            let y = prob.solve_state(&source)?;
            Ok(l2_error(prob.mesh(), &y, mms_exact))
        })
        .collect()
}

/// `log2(e_n / e_2n)` for consecutive entries.
pub fn observed_rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

pub fn mms_table(ns: &[usize]) -> Result<Table> {
    let mut table = Table::new(["equation", "n", "l2_error", "rate"]);
    for (name, eq) in [("linear", Equation::Linear), ("semilinear", Equation::Semilinear)] {
        let errors = mms_errors(eq, ns)?;
        let rates = observed_rates(&errors);
        for (i, (&n, &e)) in ns.iter().zip(&errors).enumerate() {
            let rate = if i == 0 { String::new() } else { fmt_fixed(rates[i - 1], 3) };
            table.push(vec![name.into(), n.to_string(), fmt_sci(e), rate]);
        }
    }
    Ok(table)
}

pub fn fd_table(n: usize, seed: u64) -> Result<Table> {
    let mut table = Table::new(["equation", "direction", "finite_difference", "adjoint", "rel_err"]);
    for (name, eq) in [("linear", Equation::Linear), ("semilinear", Equation::Semilinear)] {
        for (i, s) in fd_check(eq, n, seed, 5, 1e-4)?.iter().enumerate() {
            table.push(vec![
                name.into(),
                i.to_string(),
                format!("{:.10e}", s.finite_difference),
                format!("{:.10e}", s.adjoint),
                fmt_sci(s.rel_err),
            ]);
        }
    }
    Ok(table)
}

/// The bad-parameter preset on each mesh.
pub fn table_bad(base: &ExperimentConfig, ns: &[usize]) -> Result<(Vec<Solved>, Table)> {
    table_mesh(base, ns)
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    Ok(Preset::from_name(name)?.config())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_solve_is_audited() {
        let cfg = ExperimentConfig {
            n: 8,
            ..Preset::Example1.config()
        };
        let s = solve(&cfg).unwrap();
        assert_eq!(s.audit.gap_violations, 0);
        assert_eq!(s.audit.decrease_violations, 0);
        assert!(s.audit.cells_checked > 0);
        assert!(s.summary.to_text().contains("J(u*)"));
    }

    #[test]
    fn prox_curve_is_odd_and_saturates() {
        let t = prox_curve(0.5, 2.0, 0.5, -4.0, 4.0, 81).unwrap();
        let vals: Vec<f64> = t.rows.iter().map(|r| r[1].parse().unwrap()).collect();
        for i in 0..vals.len() {
            assert!((vals[i] + vals[vals.len() - 1 - i]).abs() < 1e-12);
        }
        assert_eq!(vals[0], -2.0);
        assert_eq!(*vals.last().unwrap(), 2.0);
        assert_eq!(vals[40], 0.0);
    }

    #[test]
    fn integer_run_uses_support_measure() {
        let cfg = ExperimentConfig {
            n: 8,
            ..Preset::Example3.config()
        };
        let s = solve(&cfg).unwrap();
        assert_eq!(s.summary.n_p, s.summary.support);
        assert_eq!(s.audit.non_integer_cells, 0);
    }
}
