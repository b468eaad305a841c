//! Quantum graph solvers: scattering, resolvent kernels and eigenvalues.

pub mod graph;
pub mod matching;
pub mod spectrum;

pub use graph::{
    gauge_transform, Edge, EdgeEnd, EdgeLength, EndCondition, GraphPoint, MetricGraphSystem,
    PhaseEntry, Side, Truncation, Vertex, VertexCondition,
};
pub use matching::{
    effective_scattering, greens_function, scattering_matrix, secular_determinant, GreensFunction,
    KernelSampler, SecularProblem,
};
pub use spectrum::{eigenvalues_above, eigenvalues_compact, EigenCounter};
