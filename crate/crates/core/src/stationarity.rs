//! Post-hoc certification of computed controls.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{distance_l2_sq, ControlField};
use crate::pde::ReducedProblem;
use crate::prox::{brute_force_prox, model_objective, prox_scalar, PenaltySpec};
use crate::solver::pg_step;

/// Cells whose Hamiltonian gap exceeds this count as violating.
pub const PMP_VIOLATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityReport {
    /// `int max(0, H(u*) - min_v H(v)) dx`.
    pub pmp_residual: f64,
    /// Measure of the cells with `H(u*) - min H > PMP_VIOLATION_TOL`.
    pub pmp_violation_measure: f64,
    /// `||u* - T_L(u*)||_{L^2}` for the prox-gradient map `T_L`.
    pub l_stat_residual: f64,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmpResidual {
    pub residual: f64,
    pub violation_measure: f64,
}

/// Pointwise Hamiltonian check `H(v) = grad f(u*) v + alpha/2 v^2 + beta g(v)`.
/// The cellwise minimizer is `prox_{(beta/alpha) g}(-grad f / alpha)`.
pub fn pmp_residual_with_gradient(
    prob: &ReducedProblem,
    u: &ControlField,
    grad: &ControlField,
    pen: &PenaltySpec,
) -> Result<PmpResidual> {
    if !(pen.alpha > 0.0) {
        return Err(Error::Unsupported(
            "Hamiltonian residual needs alpha > 0".into(),
        ));
    }
    let mesh = prob.mesh();
    let s = pen.beta / pen.alpha;
    let gaps = u
        .values()
        .par_iter()
        .zip(grad.values().par_iter())
        .map(|(&ui, &gi)| {
            let q = -gi / pen.alpha;
            let best = prox_scalar(q, s, pen)?;
            let at_u = model_objective(q, s, pen, ui);
            Ok(pen.alpha * (at_u - best.objective))
        })
        .collect::<Result<Vec<f64>>>()?;
    let area = mesh.triangle_area();
    Ok(PmpResidual {
        residual: area * gaps.iter().map(|g| g.max(0.0)).sum::<f64>(),
        violation_measure: area * gaps.iter().filter(|&&g| g > PMP_VIOLATION_TOL).count() as f64,
    })
}

pub fn pmp_residual(prob: &ReducedProblem, u: &ControlField, pen: &PenaltySpec) -> Result<PmpResidual> {
    let grad = prob.reduced_gradient(u)?;
    pmp_residual_with_gradient(prob, u, &grad, pen)
}

pub fn l_stationarity_residual_with_gradient(
    prob: &ReducedProblem,
    u: &ControlField,
    grad: &ControlField,
    lipschitz: f64,
    pen: &PenaltySpec,
) -> Result<f64> {
    let next = pg_step(u, grad, lipschitz, pen)?;
    Ok(distance_l2_sq(prob.mesh(), u, &next)?.sqrt())
}

/// `||u* - pg_step(u*, grad f(u*), L)||_{L^2}`.
pub fn l_stationarity_residual(
    prob: &ReducedProblem,
    u: &ControlField,
    lipschitz: f64,
    pen: &PenaltySpec,
) -> Result<f64> {
    let grad = prob.reduced_gradient(u)?;
    l_stationarity_residual_with_gradient(prob, u, &grad, lipschitz, pen)
}

/// Both certificates for a control and its gradient.
pub fn certify(
    prob: &ReducedProblem,
    u: &ControlField,
    grad: &ControlField,
    lipschitz: f64,
    pen: &PenaltySpec,
) -> Result<StationarityReport> {
    let pmp = pmp_residual_with_gradient(prob, u, grad, pen)?;
    Ok(StationarityReport {
        pmp_residual: pmp.residual,
        pmp_violation_measure: pmp.violation_measure,
        l_stat_residual: l_stationarity_residual_with_gradient(prob, u, grad, lipschitz, pen)?,
        lipschitz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GBranch {
    Positive,
    Negative,
    Zero,
}

impl GBranch {
    pub fn label(self) -> &'static str {
        match self {
            GBranch::Positive => "+",
            GBranch::Negative => "-",
            GBranch::Zero => "0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmapPoint {
    pub z: f64,
    pub u: f64,
    pub branch: GBranch,
}

#[derive(Debug, Clone)]
pub struct GmapSample {
    pub points: Vec<GmapPoint>,
    /// Half the spacing of the `u` grid: members lie within this distance of
    /// an exact element of the map.
    pub grid_tol: f64,
}

/// Settings for [`gmap_sample`].
#[derive(Debug, Clone, Copy)]
pub struct GmapGrid {
    pub z_min: f64,
    pub z_max: f64,
    pub z_count: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub u_count: usize,
    /// Points of the brute-force scan over `v`.
    pub scan_n: usize,
}

/// `Phi_{z,u}(v) = -z v + L/2 (v - u)^2 + alpha/2 v^2 + beta g(v)`, up to the
/// constant `L u^2 / 2`, written as `(L + alpha) h_{q,s}(v)`.
fn scaled_model(z: f64, u: f64, lipschitz: f64, pen: &PenaltySpec) -> (f64, f64) {
    let denom = lipschitz + pen.alpha;
    ((z + lipschitz * u) / denom, pen.beta / denom)
}

/// Samples the set-valued stationarity map
/// `u in G(z)  <=>  u in argmin_v Phi_{z,u}(v)` on a `(z, u)` grid.
///
/// A grid point is a member when it is within `grid_tol` of the brute-force
/// minimizer or attains the scanned minimum up to `1e-12`.
pub fn gmap_sample(lipschitz: f64, pen: &PenaltySpec, grid: &GmapGrid) -> Result<GmapSample> {
    pen.validate()?;
    if !(lipschitz > 0.0) {
        return Err(Error::Parameter(format!("L must be positive, got {lipschitz}")));
    }
    if grid.z_count < 2 || grid.u_count < 2 {
        return Err(Error::Parameter("gmap grids need at least two points".into()));
    }
    let axis = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    };
    let zs = axis(grid.z_min, grid.z_max, grid.z_count);
    let mut us = axis(grid.u_min, grid.u_max, grid.u_count);
    if grid.u_min < 0.0 && grid.u_max > 0.0 && !us.contains(&0.0) {
        us.push(0.0);
    }
    let grid_tol = 0.5 * (grid.u_max - grid.u_min) / (grid.u_count - 1) as f64;
    let denom = lipschitz + pen.alpha;

    let points: Vec<GmapPoint> = zs
        .par_iter()
        .flat_map_iter(|&z| {
            us.iter()
                .filter_map(|&u| {
                    if pen.g(u).is_infinite() {
                        return None;
                    }
                    let (q, s) = scaled_model(z, u, lipschitz, pen);
                    let v = brute_force_prox(q, s, pen, grid.scan_n, 1e-12);
                    let gap = denom * (model_objective(q, s, pen, u) - model_objective(q, s, pen, v));
                    let member = (u - v).abs() <= grid_tol || gap <= 1e-12;
                    member.then_some(GmapPoint {
                        z,
                        u,
                        branch: if u > 0.0 {
                            GBranch::Positive
                        } else if u < 0.0 {
                            GBranch::Negative
                        } else {
                            GBranch::Zero
                        },
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(GmapSample { points, grid_tol })
}

/// CSV with columns `z,u,branch`.
pub fn write_gmap_csv<W: Write>(sample: &GmapSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["z", "u", "branch"])?;
    for p in &sample.points {
        w.write_record([p.z.to_string(), p.u.to_string(), p.branch.label().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::pde::Equation;

    #[test]
    fn zero_control_zero_gradient_is_stationary() {
        let prob = ReducedProblem::new(Mesh::new(4).unwrap(), Equation::Linear, |_, _| 0.0);
        let pen = PenaltySpec::lp(0.5, 4.0, 0.01, 0.01).unwrap();
        let z = ControlField::zeros(prob.mesh());
        let pmp = pmp_residual(&prob, &z, &pen).unwrap();
        assert_eq!(pmp.residual, 0.0);
        assert_eq!(pmp.violation_measure, 0.0);
        assert_eq!(l_stationarity_residual(&prob, &z, 0.1, &pen).unwrap(), 0.0);
    }

    #[test]
    fn pmp_needs_alpha() {
        let prob = ReducedProblem::new(Mesh::new(4).unwrap(), Equation::Linear, |_, _| 0.0);
        let pen = PenaltySpec::lp(0.5, 4.0, 0.0, 0.01).unwrap();
        assert!(matches!(
            pmp_residual(&prob, &ControlField::zeros(prob.mesh()), &pen),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn origin_belongs_to_map_at_zero() {
        let pen = PenaltySpec::lp(0.8, 2.0, 0.01, 0.01).unwrap();
        let grid = GmapGrid {
            z_min: -0.1,
            z_max: 0.1,
            z_count: 3,
            u_min: -2.0,
            u_max: 2.0,
            u_count: 41,
            scan_n: 2000,
        };
        let s = gmap_sample(0.1, &pen, &grid).unwrap();
        assert!(s.points.iter().any(|p| p.z == 0.0 && p.u == 0.0 && p.branch == GBranch::Zero));
    }
}
