//! Proximal gradient method for sparse optimal control of elliptic equations
//! with nonconvex penalties (`|u|^p`, `|u|_0`, `ln(1 + a|u|)`, integer
//! indicator) on the unit square.
//!
//! The pieces, bottom up:
//! - [`prox`]: exact scalar proximal maps and their sparsity constants;
//! - [`mesh`]: the triangulation and control/state fields;
//! - [`linalg`]: CSR storage and preconditioned conjugate gradients;
//! - [`pde`]: state/adjoint solves and the reduced tracking objective;
//! - [`solver`]: the proximal gradient iteration with backtracking;
//! - [`stationarity`]: Hamiltonian and fixed-point certificates.

pub mod error;
pub mod linalg;
pub mod mesh;
pub mod pde;
pub mod prox;
pub mod solver;
pub mod stationarity;

pub use error::{Error, Result};
pub use mesh::{ControlField, Mesh, StateField};
pub use pde::{Equation, LinearBackend, ReducedProblem};
pub use prox::{PenaltyKind, PenaltySpec, ProxResult};
pub use solver::{run, run_with_observer, RunResult, SolverConfig, StepMode};
