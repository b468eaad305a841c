use thiserror::Error;

use crate::coupling::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid coupling: {}", fmt_violations(.0))]
    InvalidCoupling(Vec<Violation>),

    #[error("non-normalizable input: {0}")]
    NonNormalizable(String),

    /// The bracket `<d S_jk + Σ T_jl conj(T_kl)>` vanishes at this `d`.
    #[error("singular d = {d}: bracket vanishes on inner edge {{{j},{k}}}; choose a different d")]
    SingularD { d: f64, j: usize, k: usize },

    /// `d S_jk + Σ T_jl conj(T_kl) = 0`, so its argument is undefined.
    #[error("degenerate argument on inner edge {{{j},{k}}} at d = {d}")]
    DegenerateArgument { d: f64, j: usize, k: usize },

    #[error("edges {j} and {k} are not joined by an inner edge")]
    NotNeighbors { j: usize, k: usize },

    #[error("resonant k = {k}: matching matrix condition number {cond:e}")]
    ResonantK { k: f64, cond: f64 },

    #[error("near-singular z = {re}{im:+}i: condition number {cond:e}")]
    NearSingularZ { re: f64, im: f64, cond: f64 },

    #[error("insufficient scan range: found {found} of {wanted} eigenvalues in [{lo}, {hi}]")]
    InsufficientScanRange {
        found: usize,
        wanted: usize,
        lo: f64,
        hi: f64,
    },

    #[error("ill-conditioned: {0}")]
    Conditioning(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
