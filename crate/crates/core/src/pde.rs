//! Finite-element state and adjoint solves and the reduced tracking objective
//!
//! ```text
//! f(u) = w ||y_u - y_d||^2,   -Δy + d(y) = u in Ω,  y = 0 on ∂Ω,
//! ```
//!
//! with `d = 0` (linear) or `d(y) = y^3` (semilinear), continuous piecewise
//! linear states and piecewise constant controls. The tracking weight `w`
//! defaults to 1/2.
//!
//! The cubic term is integrated with the lumped mass matrix, which keeps the
//! Newton Jacobian `K + diag(3 m_i y_i^2)` symmetric positive definite. The
//! gradient is the exact derivative of the discrete objective: the adjoint of
//! the discrete state equation projected onto piecewise constants.

use crate::error::{Error, Result};
use crate::linalg::{
    dot, norm2, pcg, CgOptions, CsrMatrix, Jacobi, LinearOperator, Preconditioner,
    ShiftedOperator, SpectralPoisson,
};
use crate::mesh::{ControlField, Mesh, StateField};

/// Default weight of the tracking term.
pub const DEFAULT_TRACKING_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    Linear,
    /// `d(y) = y^3`
    Semilinear,
}

/// Preconditioner used inside conjugate gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearBackend {
    /// Exact fast Poisson solve by sine transforms; converges in one or two
    /// iterations for the linear problem.
    SpectralCg,
    /// Diagonal scaling.
    JacobiCg,
}

#[derive(Debug, Clone, Copy)]
pub struct PdeTolerances {
    pub cg_rel_tol: f64,
    pub cg_max_iter: usize,
    /// Newton stops once `||R(y)|| <= newton_rel_tol * ||b||`.
    pub newton_rel_tol: f64,
    pub newton_max_iter: usize,
    pub max_halvings: usize,
}

impl Default for PdeTolerances {
    fn default() -> Self {
        Self {
            cg_rel_tol: 1e-12,
            cg_max_iter: 20_000,
            newton_rel_tol: 1e-10,
            newton_max_iter: 50,
            max_halvings: 30,
        }
    }
}

/// The reduced control-to-objective map on a fixed mesh. Immutable after
/// construction; every solve allocates its own workspace.
#[derive(Debug)]
pub struct ReducedProblem {
    mesh: Mesh,
    equation: Equation,
    /// nodal interpolant of y_d, boundary included
    target: Vec<f64>,
    stiffness: CsrMatrix,
    mass: CsrMatrix,
    lumped_mass: Vec<f64>,
    spectral: SpectralPoisson,
    jacobi: Jacobi,
    backend: LinearBackend,
    tol: PdeTolerances,
    tracking_weight: f64,
}

impl ReducedProblem {
    pub fn new(mesh: Mesh, equation: Equation, target: impl Fn(f64, f64) -> f64) -> Self {
        let target = mesh.coords().iter().map(|p| target(p[0], p[1])).collect();
        let (stiffness, mass) = assemble(&mesh);
        let lumped_mass = mesh
            .interior_nodes()
            .iter()
            .map(|&node| mass.row(node).map(|(_, v)| v).sum())
            .collect();
        let spectral = SpectralPoisson::new(mesh.cells_per_side());
        let jacobi = Jacobi::new(&stiffness.diagonal());
        Self {
            mesh,
            equation,
            target,
            stiffness,
            mass,
            lumped_mass,
            spectral,
            jacobi,
            backend: LinearBackend::SpectralCg,
            tol: PdeTolerances::default(),
            tracking_weight: DEFAULT_TRACKING_WEIGHT,
        }
    }

    pub fn with_backend(mut self, backend: LinearBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_tolerances(mut self, tol: PdeTolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_tracking_weight(mut self, w: f64) -> Self {
        self.tracking_weight = w;
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn equation(&self) -> Equation {
        self.equation
    }

    pub fn tracking_weight(&self) -> f64 {
        self.tracking_weight
    }

    /// Stiffness matrix on the interior nodes.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Consistent mass matrix on all nodes.
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    fn cg_options(&self) -> CgOptions {
        CgOptions {
            rel_tol: self.tol.cg_rel_tol,
            max_iter: self.tol.cg_max_iter,
        }
    }

    /// Interior load vector `int u phi_i`: each triangle hands `area/3 * u_T`
    /// to each of its vertices.
    pub fn load_vector(&self, u: &ControlField) -> Result<Vec<f64>> {
        let mesh = &self.mesh;
        if u.len() != mesh.num_triangles() {
            return Err(Error::MeshMismatch {
                expected: mesh.num_triangles(),
                found: u.len(),
            });
        }
        let share = mesh.triangle_area() / 3.0;
        let mut b = vec![0.0; mesh.num_interior()];
        for (tri, &v) in mesh.triangles().iter().zip(u.values()) {
            for &node in tri {
                if let Some(k) = mesh.interior_index(node) {
                    b[k] += share * v;
                }
            }
        }
        Ok(b)
    }

    fn solve_linear_system(&self, shift: Option<&[f64]>, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; rhs.len()];
        let shifted;
        let op: &dyn LinearOperator = match shift {
            Some(s) => {
                shifted = ShiftedOperator {
                    matrix: &self.stiffness,
                    shift: s,
                };
                &shifted
            }
            None => &self.stiffness,
        };
        let shifted_jacobi;
        let pre: &dyn Preconditioner = match (self.backend, shift) {
            (LinearBackend::SpectralCg, _) => &self.spectral,
            (LinearBackend::JacobiCg, None) => &self.jacobi,
            (LinearBackend::JacobiCg, Some(s)) => {
                let d: Vec<f64> = self
                    .stiffness
                    .diagonal()
                    .iter()
                    .zip(s)
                    .map(|(a, b)| a + b)
                    .collect();
                shifted_jacobi = Jacobi::new(&d);
                &shifted_jacobi
            }
        };
        pcg(op, rhs, &mut x, pre, self.cg_options())?;
        Ok(x)
    }

    /// Solves the state equation for the control `u`.
    pub fn solve_state(&self, u: &ControlField) -> Result<StateField> {
        let b = self.load_vector(u)?;
        if let Some(bad) = u.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("control value at triangle {bad} is not finite")));
        }
        let y = match self.equation {
            Equation::Linear => self.solve_linear_system(None, &b)?,
            Equation::Semilinear => self.newton(&b)?,
        };
        Ok(StateField::from_interior(&self.mesh, &y))
    }

    fn semilinear_residual(&self, y: &[f64], b: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; y.len()];
        self.stiffness.matvec(y, &mut r);
        for i in 0..y.len() {
            r[i] += self.lumped_mass[i] * y[i] * y[i] * y[i] - b[i];
        }
        r
    }

    /// Damped Newton for `K y + M_L y^3 = b`.
    fn newton(&self, b: &[f64]) -> Result<Vec<f64>> {
        let b_norm = norm2(b);
        let mut y = vec![0.0; b.len()];
        if b_norm == 0.0 {
            return Ok(y);
        }
        let target = self.tol.newton_rel_tol * b_norm;
        let mut r = self.semilinear_residual(&y, b);
        let mut r_norm = norm2(&r);
        for _ in 0..self.tol.newton_max_iter {
            if r_norm <= target {
                return Ok(y);
            }
            let shift: Vec<f64> = y
                .iter()
                .zip(&self.lumped_mass)
                .map(|(yi, mi)| 3.0 * mi * yi * yi)
                .collect();
            let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = self.solve_linear_system(Some(&shift), &neg_r)?;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..=self.tol.max_halvings {
                let trial: Vec<f64> = y.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
                let r_trial = self.semilinear_residual(&trial, b);
                let n_trial = norm2(&r_trial);
                if n_trial < r_norm {
                    y = trial;
                    r = r_trial;
                    r_norm = n_trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                if r_norm <= 1e2 * target {
                    // stalled at round-off just above the target
                    return Ok(y);
                }
                return Err(Error::Numeric(format!(
                    "Newton damping failed to reduce the residual ({r_norm:e})"
                )));
            }
        }
        if r_norm <= target {
            return Ok(y);
        }
        Err(Error::Numeric(format!(
            "Newton did not converge in {} steps (residual {r_norm:e}, target {target:e})",
            self.tol.newton_max_iter
        )))
    }

    /// `(M (y - y_d))` restricted to the interior, times `2 w`.
    fn adjoint_rhs(&self, y: &StateField) -> Vec<f64> {
        let e: Vec<f64> = y.values().iter().zip(&self.target).map(|(a, b)| a - b).collect();
        let mut me = vec![0.0; e.len()];
        self.mass.matvec(&e, &mut me);
        let scale = 2.0 * self.tracking_weight;
        self.mesh.interior_nodes().iter().map(|&n| scale * me[n]).collect()
    }

    /// Adjoint state for the state `y`: `-Δp + d'(y) p = 2 w (y - y_d)`.
    pub fn solve_adjoint(&self, y: &StateField) -> Result<StateField> {
        let rhs = self.adjoint_rhs(y);
        let p = match self.equation {
            Equation::Linear => self.solve_linear_system(None, &rhs)?,
            Equation::Semilinear => {
                let shift: Vec<f64> = y
                    .interior_values(&self.mesh)
                    .iter()
                    .zip(&self.lumped_mass)
                    .map(|(yi, mi)| 3.0 * mi * yi * yi)
                    .collect();
                self.solve_linear_system(Some(&shift), &rhs)?
            }
        };
        Ok(StateField::from_interior(&self.mesh, &p))
    }

    /// `w ||y - y_d||^2` with the consistent mass matrix.
    pub fn tracking_value(&self, y: &StateField) -> f64 {
        let e: Vec<f64> = y.values().iter().zip(&self.target).map(|(a, b)| a - b).collect();
        self.tracking_weight * self.mass.inner(&e, &e)
    }

    /// `f(y_old) - f(y_new)` without the cancellation of subtracting two
    /// nearly equal objective values.
    pub fn tracking_decrease(&self, y_old: &StateField, y_new: &StateField) -> f64 {
        let diff: Vec<f64> = y_old.values().iter().zip(y_new.values()).map(|(a, b)| a - b).collect();
        let sum: Vec<f64> = y_old
            .values()
            .iter()
            .zip(y_new.values())
            .zip(&self.target)
            .map(|((a, b), t)| a + b - 2.0 * t)
            .collect();
        self.tracking_weight * self.mass.inner(&diff, &sum)
    }

    /// State of `u_new` given the state `y_old` of `u_old`, together with the
    /// increment `y_old - y_new`. For the linear equation the increment is
    /// solved for directly, so it keeps full relative accuracy for tiny steps.
    pub fn solve_state_increment(
        &self,
        u_old: &ControlField,
        y_old: &StateField,
        u_new: &ControlField,
    ) -> Result<(StateField, Vec<f64>)> {
        match self.equation {
            Equation::Linear => {
                if u_old.len() != u_new.len() {
                    return Err(Error::MeshMismatch {
                        expected: u_old.len(),
                        found: u_new.len(),
                    });
                }
                let du: Vec<f64> = u_old.values().iter().zip(u_new.values()).map(|(a, b)| a - b).collect();
                let du = ControlField::from_values_unchecked(du);
                let d = self.solve_state(&du)?;
                let y_new: Vec<f64> = y_old
                    .interior_values(&self.mesh)
                    .iter()
                    .zip(d.interior_values(&self.mesh))
                    .map(|(a, b)| a - b)
                    .collect();
                Ok((StateField::from_interior(&self.mesh, &y_new), d.values().to_vec()))
            }
            Equation::Semilinear => {
                let y_new = self.solve_state(u_new)?;
                let d = y_old.values().iter().zip(y_new.values()).map(|(a, b)| a - b).collect();
                Ok((y_new, d))
            }
        }
    }

    /// `f(y_old) - f(y_old - d)` for a nodal increment `d`.
    pub fn tracking_decrease_by_increment(&self, y_old: &StateField, d: &[f64]) -> f64 {
        let rest: Vec<f64> = y_old
            .values()
            .iter()
            .zip(&self.target)
            .zip(d)
            .map(|((y, t), di)| 2.0 * (y - t) - di)
            .collect();
        self.tracking_weight * self.mass.inner(d, &rest)
    }

    pub fn reduced_value(&self, u: &ControlField) -> Result<f64> {
        Ok(self.tracking_value(&self.solve_state(u)?))
    }

    /// L2 gradient from a precomputed state.
    pub fn gradient_from_state(&self, y: &StateField) -> Result<ControlField> {
        let p = self.solve_adjoint(y)?;
        Ok(project_to_cells(&self.mesh, &p))
    }

    pub fn reduced_gradient(&self, u: &ControlField) -> Result<ControlField> {
        let y = self.solve_state(u)?;
        self.gradient_from_state(&y)
    }

    /// Hessian-vector product of the linear problem: `2 w P S^* M S u`.
    fn gauss_newton_apply(&self, u: &ControlField) -> Result<ControlField> {
        let y = self.solve_linear_system(None, &self.load_vector(u)?)?;
        let y_full = StateField::from_interior(&self.mesh, &y);
        let mut my = vec![0.0; self.mesh.num_nodes()];
        self.mass.matvec(y_full.values(), &mut my);
        let scale = 2.0 * self.tracking_weight;
        let rhs: Vec<f64> = self.mesh.interior_nodes().iter().map(|&n| scale * my[n]).collect();
        let p = self.solve_linear_system(None, &rhs)?;
        Ok(project_to_cells(&self.mesh, &StateField::from_interior(&self.mesh, &p)))
    }

    /// Upper estimate of the Lipschitz constant of the gradient of the linear
    /// problem: the largest eigenvalue of its constant Hessian, by power
    /// iteration to relative tolerance 1e-6.
    pub fn lipschitz_estimate(&self) -> Result<f64> {
        if self.equation != Equation::Linear {
            return Err(Error::Unsupported(
                "Lipschitz estimate is only available for the linear state equation".into(),
            ));
        }
        let mut v = ControlField::constant(&self.mesh, 1.0);
        let mut lambda = 0.0;
        for _ in 0..1000 {
            let norm = norm2(v.values());
            v.values_mut().iter_mut().for_each(|x| *x /= norm);
            let hv = self.gauss_newton_apply(&v)?;
            let next = dot(v.values(), hv.values());
            let converged = (next - lambda).abs() <= 1e-6 * next.abs();
            lambda = next;
            v = hv;
            if converged {
                return Ok(lambda);
            }
        }
        Err(Error::Numeric("power iteration for the Lipschitz estimate did not converge".into()))
    }
}

/// Mean of a nodal field over every triangle: the L2 projection of a
/// piecewise linear function onto piecewise constants.
pub fn project_to_cells(mesh: &Mesh, p: &StateField) -> ControlField {
    let v = p.values();
    let mut out = ControlField::zeros(mesh);
    for (o, tri) in out.values_mut().iter_mut().zip(mesh.triangles()) {
        *o = (v[tri[0]] + v[tri[1]] + v[tri[2]]) / 3.0;
    }
    out
}

/// Assembles the interior stiffness matrix and the full consistent mass matrix.
fn assemble(mesh: &Mesh) -> (CsrMatrix, CsrMatrix) {
    let area = mesh.triangle_area();
    let mut k_trip = Vec::with_capacity(9 * mesh.num_triangles());
    let mut m_trip = Vec::with_capacity(9 * mesh.num_triangles());
    for tri in mesh.triangles() {
        let p = tri.map(|i| mesh.coords()[i]);
        // gradients of the barycentric coordinates
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let grads: [[f64; 2]; 3] = std::array::from_fn(|a| {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            [(p[b][1] - p[c][1]) / det, (p[c][0] - p[b][0]) / det]
        });
        for a in 0..3 {
            for b in 0..3 {
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                m_trip.push((tri[a], tri[b], m));
                if let (Some(i), Some(j)) = (mesh.interior_index(tri[a]), mesh.interior_index(tri[b])) {
                    let k = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                    k_trip.push((i, j, k));
                }
            }
        }
    }
    (
        CsrMatrix::from_triplets(mesh.num_interior(), k_trip),
        CsrMatrix::from_triplets(mesh.num_nodes(), m_trip),
    )
}

/// `||y_h - y||_{L^2}` for a nodal field against a closed-form function, with
/// a degree-5 triangle rule.
pub fn l2_error(mesh: &Mesh, y: &StateField, exact: impl Fn(f64, f64) -> f64) -> f64 {
    // Dunavant 7-point rule: (barycentric weight pattern, weight)
    let a1 = 0.059_715_871_789_770;
    let b1 = 0.470_142_064_105_115;
    let a2 = 0.797_426_985_353_087;
    let b2 = 0.101_286_507_323_456;
    let w0 = 0.225;
    let w1 = 0.132_394_152_788_506;
    let w2 = 0.125_939_180_544_827;
    let rule: [([f64; 3], f64); 7] = [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], w0),
        ([a1, b1, b1], w1),
        ([b1, a1, b1], w1),
        ([b1, b1, a1], w1),
        ([a2, b2, b2], w2),
        ([b2, a2, b2], w2),
        ([b2, b2, a2], w2),
    ];
    let v = y.values();
    let mut sum = 0.0;
    for tri in mesh.triangles() {
        let p = tri.map(|i| mesh.coords()[i]);
        for (lam, w) in rule {
            let x = lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0];
            let yy = lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1];
            let yh = lam[0] * v[tri[0]] + lam[1] * v[tri[1]] + lam[2] * v[tri[2]];
            let e = yh - exact(x, yy);
            sum += w * e * e;
        }
    }
    (sum * mesh.triangle_area()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn stiffness_is_five_point_stencil() {
        let mesh = Mesh::new(6).unwrap();
        let prob = ReducedProblem::new(mesh, Equation::Linear, |_, _| 0.0);
        let k = prob.stiffness();
        let m = 5;
        for j in 0..m {
            for i in 0..m {
                let row = i + j * m;
                for (col, v) in k.row(row) {
                    let (ci, cj) = (col % m, col / m);
                    let expected = if col == row {
                        4.0
                    } else if ci.abs_diff(i) + cj.abs_diff(j) == 1 {
                        -1.0
                    } else {
                        0.0
                    };
                    assert_abs_diff_eq!(v, expected, epsilon = 1e-13);
                }
            }
        }
        assert!(k.is_symmetric(1e-14));
        assert!(prob.mass().is_symmetric(1e-16));
        let total: f64 = (0..prob.mesh().num_nodes()).flat_map(|i| prob.mass().row(i).map(|(_, v)| v)).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn zero_control_zero_state() {
        for eq in [Equation::Linear, Equation::Semilinear] {
            let prob = ReducedProblem::new(Mesh::new(8).unwrap(), eq, |_, _| 0.0);
            let y = prob.solve_state(&ControlField::zeros(prob.mesh())).unwrap();
            assert!(y.values().iter().all(|&v| v == 0.0));
            let g = prob.reduced_gradient(&ControlField::zeros(prob.mesh())).unwrap();
            assert!(g.values().iter().all(|&v| v == 0.0));
            assert_eq!(prob.reduced_value(&ControlField::zeros(prob.mesh())).unwrap(), 0.0);
        }
    }

    #[test]
    fn adjoint_vanishes_on_target() {
        let prob = ReducedProblem::new(Mesh::new(8).unwrap(), Equation::Linear, |_, _| 0.0);
        let u = ControlField::constant(prob.mesh(), 3.0);
        let y = prob.solve_state(&u).unwrap();
        let yv = y.values().to_vec();
        let matched = ReducedProblem::new(Mesh::new(8).unwrap(), Equation::Linear, |_, _| 0.0);
        // target equal to the state itself
        let matched = ReducedProblem {
            target: yv,
            ..matched
        };
        let p = matched.solve_adjoint(&y).unwrap();
        assert!(p.values().iter().all(|v| v.abs() < 1e-14));
        assert!(matched.tracking_value(&y).abs() < 1e-28);
    }

    #[test]
    fn lipschitz_rejects_semilinear() {
        let prob = ReducedProblem::new(Mesh::new(4).unwrap(), Equation::Semilinear, |_, _| 0.0);
        assert!(matches!(prob.lipschitz_estimate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn tracking_decrease_matches_difference() {
        let prob = ReducedProblem::new(Mesh::new(10).unwrap(), Equation::Linear, |x, y| x * y);
        let y1 = prob.solve_state(&ControlField::constant(prob.mesh(), 1.0)).unwrap();
        let y2 = prob.solve_state(&ControlField::constant(prob.mesh(), 2.5)).unwrap();
        let direct = prob.tracking_value(&y1) - prob.tracking_value(&y2);
        assert_abs_diff_eq!(prob.tracking_decrease(&y1, &y2), direct, epsilon = 1e-14);
    }
}
