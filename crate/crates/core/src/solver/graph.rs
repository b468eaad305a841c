use crate::approx::ApproxGraph;
use crate::coupling::VertexCoupling;
use crate::error::{Error, Result};
use crate::linalg::c;
use crate::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeLength {
    Finite(f64),
    HalfLine,
}

/// An edge parametrized by `s ∈ [0, length]` (or `[0, ∞)`), carrying the
/// operator `-(d/ds - i a)^2` with a constant vector potential `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub length: EdgeLength,
    pub magnetic_a: f64,
}

impl Edge {
    pub fn finite(length: f64) -> Self {
        Self {
            length: EdgeLength::Finite(length),
            magnetic_a: 0.0,
        }
    }

    pub fn half_line() -> Self {
        Self {
            length: EdgeLength::HalfLine,
            magnetic_a: 0.0,
        }
    }

    pub fn with_potential(self, a: f64) -> Self {
        Self {
            magnetic_a: a,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// `s = 0`
    Start,
    /// `s = length`
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeEnd {
    pub edge: usize,
    pub side: Side,
}

impl EdgeEnd {
    pub fn start(edge: usize) -> Self {
        Self {
            edge,
            side: Side::Start,
        }
    }

    pub fn end(edge: usize) -> Self {
        Self {
            edge,
            side: Side::End,
        }
    }
}

/// Vertex conditions on the values `F` and outgoing covariant derivatives
/// `F'` of the incident edge ends (in the order of [`Vertex::ends`]).
#[derive(Debug, Clone, PartialEq)]
pub enum VertexCondition {
    /// Continuity and `Σ F' = w F`.
    Delta(f64),
    /// `A F + B F' = 0`.
    Coupling(VertexCoupling),
}

impl VertexCondition {
    /// Express as `(A, B)` for a vertex of the given degree.
    pub fn as_coupling(&self, degree: usize) -> VertexCoupling {
        match self {
            VertexCondition::Delta(w) => VertexCoupling::delta(degree, *w),
            VertexCondition::Coupling(cp) => cp.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub condition: VertexCondition,
    pub ends: Vec<EdgeEnd>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndCondition {
    Dirichlet,
    Neumann,
}

/// Cut every half-line at `length` and impose `end` there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub length: f64,
    pub end: EndCondition,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            length: 1.0,
            end: EndCondition::Dirichlet,
        }
    }
}

/// A point `s` on edge `edge`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphPoint {
    pub edge: usize,
    pub s: f64,
}

impl GraphPoint {
    pub fn new(edge: usize, s: f64) -> Self {
        Self { edge, s }
    }
}

/// Schrödinger operator on a metric graph with point interactions at the
/// vertices and constant magnetic potentials on the edges.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraphSystem {
    edges: Vec<Edge>,
    vertices: Vec<Vertex>,
    truncation: Option<Truncation>,
}

impl MetricGraphSystem {
    pub fn new(
        edges: Vec<Edge>,
        vertices: Vec<Vertex>,
        truncation: Option<Truncation>,
    ) -> Result<Self> {
        let mut start_seen = vec![false; edges.len()];
        let mut end_seen = vec![false; edges.len()];
        for (e, edge) in edges.iter().enumerate() {
            if let EdgeLength::Finite(l) = edge.length {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(Error::InvalidGraph(format!("edge {e} has length {l}")));
                }
            }
            if !edge.magnetic_a.is_finite() {
                return Err(Error::NonFinite(format!("magnetic potential on edge {e}")));
            }
        }
        for (v, vx) in vertices.iter().enumerate() {
            if vx.ends.is_empty() {
                return Err(Error::InvalidGraph(format!(
                    "vertex {v} has no incident edges"
                )));
            }
            match &vx.condition {
                VertexCondition::Delta(w) if !w.is_finite() => {
                    return Err(Error::NonFinite(format!("δ strength at vertex {v}")));
                }
                VertexCondition::Coupling(cp) if cp.n() != vx.ends.len() => {
                    return Err(Error::Dimension(format!(
                        "vertex {v}: coupling of degree {} on {} edge ends",
                        cp.n(),
                        vx.ends.len()
                    )));
                }
                _ => {}
            }
            for end in &vx.ends {
                let slot = match (edges.get(end.edge), end.side) {
                    (None, _) => {
                        return Err(Error::InvalidGraph(format!(
                            "vertex {v} references edge {}",
                            end.edge
                        )))
                    }
                    (Some(_), Side::Start) => &mut start_seen[end.edge],
                    (
                        Some(Edge {
                            length: EdgeLength::HalfLine,
                            ..
                        }),
                        Side::End,
                    ) => {
                        return Err(Error::InvalidGraph(format!(
                            "half-line {} has no far endpoint",
                            end.edge
                        )))
                    }
                    (Some(_), Side::End) => &mut end_seen[end.edge],
                };
                if std::mem::replace(slot, true) {
                    return Err(Error::InvalidGraph(format!(
                        "edge end {end:?} attached twice"
                    )));
                }
            }
        }
        for (e, edge) in edges.iter().enumerate() {
            let ok = match edge.length {
                EdgeLength::Finite(_) => start_seen[e] && end_seen[e],
                EdgeLength::HalfLine => start_seen[e],
            };
            if !ok {
                return Err(Error::InvalidGraph(format!(
                    "edge {e} has an unattached endpoint"
                )));
            }
        }
        if let Some(t) = truncation {
            if !(t.length > 0.0 && t.length.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "truncation length {}",
                    t.length
                )));
            }
        }
        Ok(Self {
            edges,
            vertices,
            truncation,
        })
    }

    /// Star graph: `n` half-lines meeting at one vertex with coupling `cp`.
    pub fn star(cp: &VertexCoupling) -> Self {
        let n = cp.n();
        Self {
            edges: vec![Edge::half_line(); n],
            vertices: vec![Vertex {
                condition: VertexCondition::Coupling(cp.clone()),
                ends: (0..n).map(EdgeEnd::start).collect(),
            }],
            truncation: None,
        }
    }

    /// `Γ^{S,T}(d)` as a metric graph, in the normalized edge numbering.
    ///
    /// Edges `0..n` are the outer half-lines (edge `j` starts at `v_j`). The
    /// inner edge `{j,k}` with `j < k` number `p` in
    /// [`crate::approx::NeighborSets::pairs`] order is split at its midpoint
    /// into edges `n + 2p` (towards `v_j`, potential `A_(j,k)`) and
    /// `n + 2p + 1` (towards `v_k`, potential `A_(k,j)`); both start at the
    /// midpoint.
    pub fn from_approx(g: &ApproxGraph) -> Self {
        let n = g.n();
        let pairs = g.neighbors().pairs();
        let mut edges = vec![Edge::half_line(); n];
        let mut vertex_ends: Vec<Vec<EdgeEnd>> = (0..n).map(|j| vec![EdgeEnd::start(j)]).collect();
        let mut vertices = Vec::with_capacity(n + pairs.len());
        let mut midpoints = Vec::with_capacity(pairs.len());
        for (p, &(j, k)) in pairs.iter().enumerate() {
            let a = g.potential(j, k).expect("pair is an inner edge");
            let (ej, ek) = (n + 2 * p, n + 2 * p + 1);
            edges.push(Edge::finite(g.d()).with_potential(a));
            edges.push(Edge::finite(g.d()).with_potential(-a));
            vertex_ends[j].push(EdgeEnd::end(ej));
            vertex_ends[k].push(EdgeEnd::end(ek));
            midpoints.push(Vertex {
                condition: VertexCondition::Delta(
                    g.inner_strength(j, k).expect("pair is an inner edge"),
                ),
                ends: vec![EdgeEnd::start(ej), EdgeEnd::start(ek)],
            });
        }
        for (j, ends) in vertex_ends.into_iter().enumerate() {
            vertices.push(Vertex {
                condition: VertexCondition::Delta(g.w_vertex()[j]),
                ends,
            });
        }
        vertices.extend(midpoints);
        Self {
            edges,
            vertices,
            truncation: None,
        }
    }

    pub fn with_truncation(self, truncation: Option<Truncation>) -> Self {
        Self { truncation, ..self }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn truncation(&self) -> Option<Truncation> {
        self.truncation
    }

    pub fn half_lines(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].length == EdgeLength::HalfLine)
            .collect()
    }

    /// All edges have finite length once the truncation is applied.
    pub fn is_compact(&self) -> bool {
        self.truncation.is_some() || self.half_lines().is_empty()
    }

    /// Length of an edge after truncation (`None` for an untruncated
    /// half-line).
    pub fn effective_length(&self, edge: usize) -> Option<f64> {
        match self.edges[edge].length {
            EdgeLength::Finite(l) => Some(l),
            EdgeLength::HalfLine => self.truncation.map(|t| t.length),
        }
    }

    pub fn has_magnetic_potential(&self) -> bool {
        self.edges.iter().any(|e| e.magnetic_a != 0.0)
    }
}

/// Phase multiplier `e^{i a l}` picked up at an edge endpoint by the gauge
/// transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEntry {
    pub end: EdgeEnd,
    pub phase: C64,
}

/// Remove constant vector potentials by the gauge `f = e^{ias} g`.
///
/// Values and covariant derivatives at the far end of an edge of length `l`
/// pick up `e^{ial}`; this phase is folded into the vertex conditions there,
/// turning `(A, B)` into `(A Φ, B Φ)`. The returned table lists one entry per
/// endpoint whose phase differs from one.
pub fn gauge_transform(sys: &MetricGraphSystem) -> (MetricGraphSystem, Vec<PhaseEntry>) {
    let mut table = Vec::new();
    let mut vertices = Vec::with_capacity(sys.vertices.len());
    for vx in &sys.vertices {
        let phases: Vec<C64> = vx
            .ends
            .iter()
            .map(|end| {
                let edge = &sys.edges[end.edge];
                match (end.side, edge.length) {
                    (Side::End, EdgeLength::Finite(l)) if edge.magnetic_a != 0.0 => {
                        C64::from_polar(1.0, edge.magnetic_a * l)
                    }
                    _ => c(1.0, 0.0),
                }
            })
            .collect();
        let trivial = phases.iter().all(|p| *p == c(1.0, 0.0));
        for (end, &phase) in vx.ends.iter().zip(&phases) {
            if phase != c(1.0, 0.0) {
                table.push(PhaseEntry { end: *end, phase });
            }
        }
        let condition = if trivial {
            vx.condition.clone()
        } else {
            let cp = vx.condition.as_coupling(vx.ends.len());
            let phi = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases));
            let a = cp.a() * &phi;
            let b = cp.b() * &phi;
            VertexCondition::Coupling(VertexCoupling::new(a, b).expect("shape preserved"))
        };
        vertices.push(Vertex {
            condition,
            ends: vx.ends.clone(),
        });
    }
    let edges = sys
        .edges
        .iter()
        .map(|e| Edge {
            magnetic_a: 0.0,
            ..*e
        })
        .collect();
    (
        MetricGraphSystem {
            edges,
            vertices,
            truncation: sys.truncation,
        },
        table,
    )
}
