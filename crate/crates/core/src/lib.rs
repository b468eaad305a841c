//! Approximation of arbitrary self-adjoint vertex couplings on star graphs.
//!
//! A coupling `A f(0) + B f'(0) = 0` at a vertex of degree `n` is first
//! brought into its normalized `(m, S, T)` form ([`coupling`]). From that
//! form [`approx`] builds a family of graphs where the vertex is replaced by
//! short inner edges of length `2d` carrying δ interactions and constant
//! magnetic potentials. The [`solver`] module computes scattering matrices,
//! resolvent kernels and eigenvalues of such graphs in closed form, and
//! [`convergence`] measures how fast the family approaches the original
//! coupling as `d → 0`. [`budget`] evaluates the explicit constants and
//! exponents for the lift to thin manifolds.

pub mod approx;
pub mod budget;
pub mod convergence;
pub mod coupling;
mod error;
pub mod io;
pub mod linalg;
pub mod quadrature;
pub mod solver;

pub use approx::{build_approx_graph, ApproxGraph, NeighborSets};
pub use coupling::{NamedCoupling, StForm, VertexCoupling};
pub use error::{Error, Result};
pub use solver::MetricGraphSystem;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Default numerical tolerance (rank cutoffs, Hermiticity, equivalence).
pub const DEFAULT_TOL: f64 = 1e-10;
