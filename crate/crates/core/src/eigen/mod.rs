//! Constrained minimization of the coupled Rayleigh quotient, the scalar
//! Dirichlet and Neumann eigenvalue oracles, and the weak-form residual.

mod banded;
mod lbfgs;
mod problem;
mod rescale;
mod residual;
mod shift;
mod solver;

pub use banded::BandedCholesky;
pub use lbfgs::StopReason;
pub use rescale::{balanced_quotient, optimal_rescale};
pub use residual::{euler_lagrange_residual, ElResidual};
pub use shift::{shift_constant, SHIFT_REL_TOL};
pub use solver::{
    initial_pair, scalar_dirichlet_eig, scalar_neumann_eig, solve_first_eigenpair, EigenResult, ScalarEigen,
    SolverOptions, INIT_NOISE,
};
