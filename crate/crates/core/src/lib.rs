//! Numerical laboratory for interior regularity of the complex Monge-Ampère
//! equation `det(u_{i j̄}) = f` on C^2.
//!
//! The crate solves Dirichlet problems on balls with a damped Newton method,
//! runs the dyadic frozen-right-hand-side cascade that recovers second
//! derivatives of a solution, and measures the quantitative inequalities
//! behind Hölder regularity of those second derivatives.

pub mod cascade;
pub mod cli;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod linalg;
pub mod ops;
pub mod presets;
pub mod solver;

pub use error::{LabError, Result};
