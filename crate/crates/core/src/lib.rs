//! First nontrivial eigenvalue of the coupled system
//!
//! ```text
//! -Δ_p u = λ α |u|^(α-2) u |v|^β      u = 0 on ∂Ω
//! -Δ_q v = λ β |u|^α |v|^(β-2) v      ∂v/∂ν = 0 on ∂Ω
//! ```
//!
//! with `α/p + β/q = 1`, on rectangles and disks, together with the
//! `p, q -> ∞` limit values, a brute-force cone/plane oracle for them, and
//! pointwise residuals of the limiting ∞-Laplacian operators.

pub mod calculus;
pub mod cli;
pub mod eigen;
pub mod error;
pub mod geometry;
pub mod limit;
mod numerics;
pub mod viscosity;

pub use calculus::{Exponents, FieldPair};
pub use eigen::{solve_first_eigenpair, EigenResult, SolverOptions};
pub use error::{Error, Result};
pub use geometry::{DomainKind, GridDomain, NodeKind};
pub use limit::LimitSpec;
