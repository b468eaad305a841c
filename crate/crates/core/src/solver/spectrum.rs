//! Eigenvalues of compact (or truncated) graphs by counting.
//!
//! With vertex values parametrised as `F_v = E_v u_v` the vertex conditions
//! read `Σ_e G_e^* Λ_e(z) G_e u - S u = 0`, where `Λ_e` is the
//! Dirichlet-to-Neumann map of edge `e`. The Hermitian matrix on the left is
//! increasing in `z`, and the number of eigenvalues below `z` equals the
//! number of edge Dirichlet eigenvalues below `z` plus its count of positive
//! eigenvalues. Bisection on this count resolves multiplicities exactly.
//!
//! `Λ_e` of a segment splits into a symmetric and an antisymmetric mode.
//! Modes with large eigenvalue `λ` enter through a bordered row with entry
//! `-1/λ` instead, which keeps the matrix bounded near edge resonances.

use std::f64::consts::PI;

use super::graph::{EdgeLength, EndCondition, MetricGraphSystem, Side};
use crate::coupling::st_from_ab;
use crate::error::{Error, Result};
use crate::linalg::{self, c};
use crate::{CMatrix, C64, DEFAULT_TOL};

const SERIES_CUTOFF: f64 = 1e-6;
const BISECTION_RTOL: f64 = 1e-14;
const MAX_SCAN: f64 = 1e14;
/// Modes with `|λ l|` above this are bordered.
const BORDER_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
enum EdgeKind {
    Segment { length: f64 },
    Capped { length: f64, end: EndCondition },
}

/// One rank-one mode `λ(z) g g^*` of an edge Dirichlet-to-Neumann map.
#[derive(Debug, Clone, Copy)]
enum ModeFn {
    /// `x tan(x/2) / l`
    Symmetric,
    /// `-x cot(x/2) / l`
    Antisymmetric,
    /// `-x cot x / l`
    DirichletCap,
    /// `x tan x / l`
    NeumannCap,
}

#[derive(Debug, Clone)]
struct Mode {
    func: ModeFn,
    length: f64,
    /// Sparse coupling vector `g` over the global `u`.
    g: Vec<(usize, C64)>,
}

#[derive(Debug, Clone)]
struct EdgeBlock {
    kind: EdgeKind,
    modes: Vec<Mode>,
}

/// Precomputed data for repeated eigenvalue counting on one graph.
#[derive(Debug, Clone)]
pub struct EigenCounter {
    dim: usize,
    edges: Vec<EdgeBlock>,
    vertex_s: CMatrix,
}

/// `x tan x` as a function of `t = x^2` (continued to `t < 0`).
fn xtan(t: f64) -> f64 {
    if t.abs() < SERIES_CUTOFF {
        t + t * t / 3.0 + 2.0 * t * t * t / 15.0
    } else if t > 0.0 {
        let x = t.sqrt();
        x * x.tan()
    } else {
        let y = (-t).sqrt();
        let e = (-2.0 * y).exp();
        -y * (1.0 - e) / (1.0 + e)
    }
}

/// `x cot x` as a function of `t = x^2` (continued to `t < 0`).
fn xcot(t: f64) -> f64 {
    if t.abs() < SERIES_CUTOFF {
        1.0 - t / 3.0 - t * t / 45.0
    } else if t > 0.0 {
        let x = t.sqrt();
        x * x.cos() / x.sin()
    } else {
        let y = (-t).sqrt();
        let e = (-2.0 * y).exp();
        y * (1.0 + e) / (1.0 - e)
    }
}

impl ModeFn {
    /// `λ l` at `t = z l^2`.
    fn scaled(self, t: f64) -> f64 {
        match self {
            ModeFn::Symmetric => 2.0 * xtan(t / 4.0),
            ModeFn::Antisymmetric => -2.0 * xcot(t / 4.0),
            ModeFn::DirichletCap => -xcot(t),
            ModeFn::NeumannCap => xtan(t),
        }
    }
}

/// Number of `n >= 1` with `(n - shift)^2 π^2 < t`.
fn dirichlet_count(t: f64, shift: f64) -> usize {
    if t <= 0.0 {
        return 0;
    }
    let r = t.sqrt() / PI + shift;
    let mut n = r.floor() as usize;
    // strict inequality
    while n > 0 && ((n as f64 - shift) * PI).powi(2) >= t {
        n -= 1;
    }
    n
}

impl EigenCounter {
    pub fn new(sys: &MetricGraphSystem) -> Result<Self> {
        if !sys.is_compact() {
            return Err(Error::Precondition(
                "eigenvalues need a compact or truncated graph".into(),
            ));
        }
        let mut blocks = Vec::new();
        let mut dim = 0;
        for (v, vx) in sys.vertices().iter().enumerate() {
            let deg = vx.ends.len();
            let st = st_from_ab(&vx.condition.as_coupling(deg), DEFAULT_TOL)
                .map_err(|e| Error::InvalidGraph(format!("vertex {v}: {e}")))?;
            let (emb, s) = st.embedding();
            blocks.push((dim, emb, s));
            dim += st.m();
        }
        let mut vertex_s = CMatrix::zeros(dim, dim);
        for (off, _, s) in &blocks {
            vertex_s
                .view_mut((*off, *off), (s.nrows(), s.ncols()))
                .copy_from(s);
        }

        // conj of the row mapping u to the boundary value at each edge end
        let ne = sys.edges().len();
        let mut rows: Vec<[Option<Vec<(usize, C64)>>; 2]> = vec![[None, None]; ne];
        for (v, vx) in sys.vertices().iter().enumerate() {
            let (off, emb, _) = &blocks[v];
            for (i, end) in vx.ends.iter().enumerate() {
                let row = (0..emb.ncols())
                    .filter(|&j| emb[(i, j)].norm_sqr() > 0.0)
                    .map(|j| (off + j, emb[(i, j)].conj()))
                    .collect();
                let slot = if end.side == Side::Start { 0 } else { 1 };
                rows[end.edge][slot] = Some(row);
            }
        }
        let truncation = sys.truncation();
        let mut edges = Vec::with_capacity(ne);
        for (e, [start, end]) in sys.edges().iter().zip(rows) {
            let start = start.expect("every edge start is attached");
            let block = match (e.length, truncation) {
                (EdgeLength::Finite(l), _) => {
                    let end = end.expect("finite edges are attached at both ends");
                    let phase = C64::from_polar(1.0, e.magnetic_a * l);
                    let mode = |func, sign: f64| {
                        let h = std::f64::consts::FRAC_1_SQRT_2;
                        let mut g: Vec<(usize, C64)> =
                            start.iter().map(|&(i, x)| (i, x * h)).collect();
                        g.extend(end.iter().map(|&(i, x)| (i, x * phase * sign * h)));
                        Mode { func, length: l, g }
                    };
                    EdgeBlock {
                        kind: EdgeKind::Segment { length: l },
                        modes: vec![
                            mode(ModeFn::Symmetric, 1.0),
                            mode(ModeFn::Antisymmetric, -1.0),
                        ],
                    }
                }
                (EdgeLength::HalfLine, Some(t)) => {
                    let func = match t.end {
                        EndCondition::Dirichlet => ModeFn::DirichletCap,
                        EndCondition::Neumann => ModeFn::NeumannCap,
                    };
                    EdgeBlock {
                        kind: EdgeKind::Capped {
                            length: t.length,
                            end: t.end,
                        },
                        modes: vec![Mode {
                            func,
                            length: t.length,
                            g: start,
                        }],
                    }
                }
                (EdgeLength::HalfLine, None) => unreachable!("checked compact"),
            };
            edges.push(block);
        }
        Ok(Self {
            dim,
            edges,
            vertex_s,
        })
    }

    /// Number of eigenvalues strictly below `z` (with multiplicity).
    pub fn count_below(&self, z: f64) -> usize {
        let mut dirichlet = 0usize;
        let mut direct: Vec<(f64, &Mode)> = Vec::new();
        let mut bordered: Vec<(f64, &Mode)> = Vec::new();
        let mut negative_bordered = 0usize;
        for e in &self.edges {
            let (length, shift) = match e.kind {
                EdgeKind::Segment { length } => (length, 0.0),
                EdgeKind::Capped {
                    length,
                    end: EndCondition::Dirichlet,
                } => (length, 0.0),
                EdgeKind::Capped {
                    length,
                    end: EndCondition::Neumann,
                } => (length, 0.5),
            };
            let t = z * length * length;
            dirichlet += dirichlet_count(t, shift);
            for mode in &e.modes {
                let f = mode.func.scaled(t);
                if f.abs() <= BORDER_THRESHOLD {
                    direct.push((f / mode.length, mode));
                } else {
                    if f < 0.0 {
                        negative_bordered += 1;
                    }
                    // -1/λ, which is zero exactly at a resonance
                    let s = if f.is_finite() { -mode.length / f } else { 0.0 };
                    bordered.push((s, mode));
                }
            }
        }
        let n = self.dim + bordered.len();
        let mut m = CMatrix::zeros(n, n);
        m.view_mut((0, 0), (self.dim, self.dim))
            .copy_from(&(-&self.vertex_s));
        for (lam, mode) in direct {
            for &(i, a) in &mode.g {
                for &(j, b) in &mode.g {
                    m[(i, j)] += a * b.conj() * lam;
                }
            }
        }
        for (r, (s, mode)) in bordered.into_iter().enumerate() {
            let row = self.dim + r;
            m[(row, row)] = c(s, 0.0);
            for &(i, a) in &mode.g {
                m[(i, row)] += a;
                m[(row, i)] += a.conj();
            }
        }
        let positive = linalg::hermitian_eigenvalues(&m)
            .iter()
            .filter(|&&x| x > 0.0)
            .count();
        // each bordered mode with λ < 0 adds one positive eigenvalue
        dirichlet + positive - negative_bordered
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Returns the eigenvalue and a point still below it.
    fn bisect(&self, target: usize, mut lo: f64, mut hi: f64) -> (f64, f64) {
        // invariant: count_below(lo) < target <= count_below(hi)
        while hi - lo > BISECTION_RTOL * lo.abs().max(hi.abs()).max(1e-3) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (0.5 * (lo + hi), lo)
    }

    /// Eigenvalues with indices `first + 1 ..= first + count` in ascending order.
    fn eigenvalues_from(&self, first: usize, count: usize, start: f64) -> Result<Vec<f64>> {
        let mut lo = start;
        let mut hi = lo.abs().max(1.0);
        let wanted = first + count;
        while self.count_below(hi) < wanted {
            if hi > MAX_SCAN {
                return Err(Error::InsufficientScanRange {
                    found: self.count_below(hi).saturating_sub(first),
                    wanted: count,
                    lo: start,
                    hi,
                });
            }
            hi *= 2.0;
        }
        let mut out = Vec::with_capacity(count);
        for target in first + 1..=wanted {
            let (lam, below) = self.bisect(target, lo, hi);
            out.push(lam);
            lo = below;
        }
        Ok(out)
    }

    pub fn lowest(&self, count: usize) -> Result<Vec<f64>> {
        let mut lo = -1.0;
        while self.count_below(lo) > 0 {
            lo *= 4.0;
            if lo < -MAX_SCAN {
                return Err(Error::Conditioning(
                    "operator not bounded below within scan range".into(),
                ));
            }
        }
        self.eigenvalues_from(0, count, lo)
    }

    /// First `count` eigenvalues that are `>= floor`.
    pub fn above(&self, floor: f64, count: usize) -> Result<Vec<f64>> {
        let first = self.count_below(floor);
        self.eigenvalues_from(first, count, floor)
    }
}

/// The `count` lowest eigenvalues of a compact or truncated graph.
pub fn eigenvalues_compact(sys: &MetricGraphSystem, count: usize) -> Result<Vec<f64>> {
    EigenCounter::new(sys)?.lowest(count)
}

/// The first `count` eigenvalues at or above `floor`.
pub fn eigenvalues_above(sys: &MetricGraphSystem, floor: f64, count: usize) -> Result<Vec<f64>> {
    EigenCounter::new(sys)?.above(floor, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::VertexCoupling;
    use crate::solver::graph::{Edge, EdgeEnd, Truncation, Vertex, VertexCondition};

    fn interval(length: f64, left: VertexCondition, right: VertexCondition) -> MetricGraphSystem {
        MetricGraphSystem::new(
            vec![Edge::finite(length)],
            vec![
                Vertex {
                    condition: left,
                    ends: vec![EdgeEnd::start(0)],
                },
                Vertex {
                    condition: right,
                    ends: vec![EdgeEnd::end(0)],
                },
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn special_functions_are_continuous_at_series_cutoff() {
        for t in [SERIES_CUTOFF, -SERIES_CUTOFF] {
            let a = t * (1.0 + 1e-9);
            let b = t * (1.0 - 1e-9);
            assert!((xcot(a) - xcot(b)).abs() < 1e-12);
            assert!((xtan(a) - xtan(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn modes_recombine_to_diagonal_entry() {
        for t in [-50.0, -1e-7, 1e-7, 0.3, 5.0, 20.0] {
            let sum = ModeFn::Symmetric.scaled(t) + ModeFn::Antisymmetric.scaled(t);
            assert!(
                (sum + 2.0 * xcot(t)).abs() < 1e-10 * xcot(t).abs().max(1.0),
                "t={t}"
            );
        }
    }

    #[test]
    fn dirichlet_count_is_strict() {
        assert_eq!(dirichlet_count(PI * PI, 0.0), 0);
        assert_eq!(dirichlet_count(PI * PI * 1.0001, 0.0), 1);
        assert_eq!(dirichlet_count(0.25 * PI * PI * 1.0001, 0.5), 1);
        assert_eq!(dirichlet_count(-3.0, 0.0), 0);
    }

    #[test]
    fn neumann_interval() {
        let sys = interval(
            2.0,
            VertexCondition::Delta(0.0),
            VertexCondition::Delta(0.0),
        );
        let ev = eigenvalues_compact(&sys, 4).unwrap();
        for (n, lam) in ev.iter().enumerate() {
            let exact = (n as f64 * PI / 2.0).powi(2);
            assert!(
                (lam - exact).abs() < 1e-10 * exact.max(1.0),
                "{n}: {lam} vs {exact}"
            );
        }
    }

    #[test]
    fn dirichlet_interval() {
        let d = VertexCondition::Coupling(VertexCoupling::dirichlet(1));
        let sys = interval(1.0, d.clone(), d);
        let ev = eigenvalues_compact(&sys, 3).unwrap();
        for (n, lam) in ev.iter().enumerate() {
            let exact = ((n + 1) as f64 * PI).powi(2);
            assert!((lam - exact).abs() < 1e-10 * exact);
        }
    }

    #[test]
    fn robin_negative_eigenvalue() {
        // f'(0) = -α f(0) with α < 0 in outgoing convention gives a bound state.
        let sys = interval(
            1.0,
            VertexCondition::Delta(-2.0),
            VertexCondition::Delta(0.0),
        );
        let ev = eigenvalues_compact(&sys, 1).unwrap();
        // f = cosh(κ(1-s)); outgoing f'(0) = -κ sinh κ, condition f'(0) = α f(0)
        let lam = ev[0];
        assert!(lam < 0.0);
        let kappa = (-lam).sqrt();
        assert!((kappa * kappa.tanh() - 2.0).abs() < 1e-9, "{lam}");
    }

    #[test]
    fn equilateral_kirchhoff_star_multiplicity() {
        // three unit edges with Dirichlet ends joined by Kirchhoff: λ = π² has
        // multiplicity two, the others solve tan k = -k/3... checked by count.
        let d = VertexCondition::Coupling(VertexCoupling::dirichlet(1));
        let mut vertices = vec![Vertex {
            condition: VertexCondition::Delta(0.0),
            ends: (0..3).map(EdgeEnd::start).collect(),
        }];
        for e in 0..3 {
            vertices.push(Vertex {
                condition: d.clone(),
                ends: vec![EdgeEnd::end(e)],
            });
        }
        let sys = MetricGraphSystem::new(vec![Edge::finite(1.0); 3], vertices, None).unwrap();
        let counter = EigenCounter::new(&sys).unwrap();
        let ev = counter.lowest(3).unwrap();
        // lowest: cos-type mode with k = π/2
        assert!((ev[0] - (PI / 2.0).powi(2)).abs() < 1e-9, "{ev:?}");
        assert!(
            (ev[1] - PI * PI).abs() < 1e-9 && (ev[2] - PI * PI).abs() < 1e-9,
            "{ev:?}"
        );
    }

    #[test]
    fn magnetic_potential_on_tree_is_gauge_trivial() {
        let sys = interval(
            1.5,
            VertexCondition::Delta(0.3),
            VertexCondition::Delta(-0.2),
        );
        let mut edges = sys.edges().to_vec();
        edges[0] = edges[0].with_potential(0.7);
        let msys = MetricGraphSystem::new(edges, sys.vertices().to_vec(), None).unwrap();
        let a = eigenvalues_compact(&sys, 5).unwrap();
        let b = eigenvalues_compact(&msys, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn truncated_star_neumann_caps() {
        let sys = MetricGraphSystem::star(&VertexCoupling::kirchhoff(2)).with_truncation(Some(
            Truncation {
                length: 1.0,
                end: EndCondition::Neumann,
            },
        ));
        // two glued unit half-lines with Neumann ends: Neumann interval of length 2
        let ev = eigenvalues_compact(&sys, 3).unwrap();
        for (n, lam) in ev.iter().enumerate() {
            let exact = (n as f64 * PI / 2.0).powi(2);
            assert!((lam - exact).abs() < 1e-10 * exact.max(1.0), "{ev:?}");
        }
    }

    #[test]
    fn above_floor_skips_lower_part() {
        let sys = interval(
            1.0,
            VertexCondition::Delta(0.0),
            VertexCondition::Delta(0.0),
        );
        let ev = eigenvalues_above(&sys, 1.0, 2).unwrap();
        assert!((ev[0] - PI * PI).abs() < 1e-9 && (ev[1] - 4.0 * PI * PI).abs() < 1e-8);
    }
}
