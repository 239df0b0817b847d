//! Structured triangulation of the unit square and the discrete fields living
//! on it: piecewise-constant controls (one value per triangle) and
//! piecewise-linear states (one value per node, zero on the boundary).

use std::io::Write;

use crate::error::{param, Error, Result};
use crate::prox::PenaltySpec;

/// Uniform Friedrichs-Keller mesh of `(0,1)^2` with `n` squares per side, each
/// cut along the diagonal from its lower-left to its upper-right corner.
#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    coords: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    area: f64,
    /// node -> interior unknown index
    interior_index: Vec<Option<usize>>,
    interior_nodes: Vec<usize>,
}

impl Mesh {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return param(format!("mesh needs at least 2 cells per side, got {n}"));
        }
        let side = n + 1;
        let h = 1.0 / n as f64;
        let mut coords = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                coords.push([i as f64 * h, j as f64 * h]);
            }
        }
        let node = |i: usize, j: usize| i + j * side;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let mut interior_index = vec![None; side * side];
        let mut interior_nodes = Vec::with_capacity((n - 1) * (n - 1));
        for j in 1..n {
            for i in 1..n {
                interior_index[node(i, j)] = Some(interior_nodes.len());
                interior_nodes.push(node(i, j));
            }
        }
        Ok(Self {
            n,
            coords,
            triangles,
            area: 0.5 * h * h,
            interior_index,
            interior_nodes,
        })
    }

    /// Squares per side.
    pub fn cells_per_side(&self) -> usize {
        self.n
    }

    /// Longest edge, `sqrt(2) / n`.
    pub fn h(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.n as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    /// Area of every triangle (the mesh is uniform).
    pub fn triangle_area(&self) -> f64 {
        self.area
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior_index[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.interior_index[node].is_none()
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.coords[a], self.coords[b], self.coords[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    fn check_control(&self, u: &ControlField) -> Result<()> {
        if u.len() != self.num_triangles() {
            return Err(Error::MeshMismatch {
                expected: self.num_triangles(),
                found: u.len(),
            });
        }
        Ok(())
    }
}

/// One value per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField(Vec<f64>);

impl ControlField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self(vec![0.0; mesh.num_triangles()])
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self(vec![c; mesh.num_triangles()])
    }

    pub fn from_vec(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        let u = Self(values);
        mesh.check_control(&u)?;
        if let Some(bad) = u.0.iter().position(|v| !v.is_finite()) {
            return param(format!("control value at triangle {bad} is not finite"));
        }
        Ok(u)
    }

    /// Evaluates `fun` at the triangle centroids.
    pub fn from_fn(mesh: &Mesh, fun: impl Fn(f64, f64) -> f64) -> Self {
        Self(
            (0..mesh.num_triangles())
                .map(|t| {
                    let [x, y] = mesh.centroid(t);
                    fun(x, y)
                })
                .collect(),
        )
    }

    pub(crate) fn from_values_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// One value per node; boundary entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField(Vec<f64>);

impl StateField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self(vec![0.0; mesh.num_nodes()])
    }

    /// Scatters interior unknowns into a full nodal vector.
    pub fn from_interior(mesh: &Mesh, interior: &[f64]) -> Self {
        let mut v = vec![0.0; mesh.num_nodes()];
        for (k, &node) in mesh.interior_nodes().iter().enumerate() {
            v[node] = interior[k];
        }
        Self(v)
    }

    /// Nodal interpolant of `fun` with the boundary values forced to zero.
    pub fn interpolate_dirichlet(mesh: &Mesh, fun: impl Fn(f64, f64) -> f64) -> Self {
        let mut v = vec![0.0; mesh.num_nodes()];
        for &node in mesh.interior_nodes() {
            let [x, y] = mesh.coords()[node];
            v[node] = fun(x, y);
        }
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn interior_values(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.interior_nodes().iter().map(|&n| self.0[n]).collect()
    }
}

/// `||u||^2_{L^2}`.
pub fn control_l2_sq(mesh: &Mesh, u: &ControlField) -> f64 {
    mesh.triangle_area() * u.values().iter().map(|v| v * v).sum::<f64>()
}

/// `||u||_{L^1}`.
pub fn control_l1(mesh: &Mesh, u: &ControlField) -> f64 {
    mesh.triangle_area() * u.values().iter().map(|v| v.abs()).sum::<f64>()
}

/// `||u - w||^2_{L^2}`.
pub fn distance_l2_sq(mesh: &Mesh, u: &ControlField, w: &ControlField) -> Result<f64> {
    mesh.check_control(u)?;
    mesh.check_control(w)?;
    Ok(mesh.triangle_area()
        * u.values()
            .iter()
            .zip(w.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>())
}

/// `||u - w||_{L^1}`.
pub fn distance_l1(mesh: &Mesh, u: &ControlField, w: &ControlField) -> Result<f64> {
    mesh.check_control(u)?;
    mesh.check_control(w)?;
    Ok(mesh.triangle_area()
        * u.values()
            .iter()
            .zip(w.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// `int g(u(x)) dx` by exact piecewise-constant quadrature. Infeasible cells
/// make the result `+inf`.
pub fn penalty_integral(mesh: &Mesh, u: &ControlField, pen: &PenaltySpec) -> f64 {
    let mut sum = 0.0;
    for &v in u.values() {
        let g = pen.g(v);
        if g.is_infinite() {
            return f64::INFINITY;
        }
        sum += g;
    }
    mesh.triangle_area() * sum
}

/// `int |u|^p dx`; `p = 0` gives the support measure.
pub fn power_integral(mesh: &Mesh, u: &ControlField, p: f64) -> f64 {
    let sum: f64 = u
        .values()
        .iter()
        .map(|&v| {
            if v == 0.0 {
                0.0
            } else if p == 0.0 {
                1.0
            } else {
                v.abs().powf(p)
            }
        })
        .sum();
    mesh.triangle_area() * sum
}

/// Measure of `{u != 0}`.
pub fn support_measure(mesh: &Mesh, u: &ControlField) -> f64 {
    mesh.triangle_area() * u.values().iter().filter(|&&v| v != 0.0).count() as f64
}

/// Measure of the symmetric difference of the supports of `u1` and `u2`.
pub fn support_change(mesh: &Mesh, u1: &ControlField, u2: &ControlField) -> Result<f64> {
    mesh.check_control(u1)?;
    mesh.check_control(u2)?;
    let flips = u1
        .values()
        .iter()
        .zip(u2.values())
        .filter(|(a, b)| (**a != 0.0) != (**b != 0.0))
        .count();
    Ok(mesh.triangle_area() * flips as f64)
}

/// CSV with columns `triangle_index,centroid_x,centroid_y,value`.
pub fn write_control_csv<W: Write>(mesh: &Mesh, u: &ControlField, out: W) -> Result<()> {
    mesh.check_control(u)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["triangle_index", "centroid_x", "centroid_y", "value"])?;
    for (t, v) in u.values().iter().enumerate() {
        let [x, y] = mesh.centroid(t);
        w.write_record([t.to_string(), x.to_string(), y.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with columns `node_x,node_y,value`.
pub fn write_state_csv<W: Write>(mesh: &Mesh, y: &StateField, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_x", "node_y", "value"])?;
    for (p, v) in mesh.coords().iter().zip(y.values()) {
        w.write_record([p[0].to_string(), p[1].to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
