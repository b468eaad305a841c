//! Boundary matching over exact edge solutions.
//!
//! On an edge of length `l` with potential `a` every solution of
//! `-(d/ds - ia)^2 f = k^2 f` is written in the scaled basis
//!
//! ```text
//! f(s) = e^{ias} (α e^{iks} + β e^{ik(l-s)})
//! ```
//!
//! which stays bounded for `Im k >= 0`. Half-lines carry `α e^{iks}` plus an
//! optional prescribed incoming wave `γ e^{-iks}`. Vertex conditions and
//! far-end conditions of truncated half-lines give one row per unknown.

use nalgebra::{DVector, Dyn, LU};

use super::graph::{EdgeEnd, EdgeLength, EndCondition, GraphPoint, MetricGraphSystem, Side};
use crate::approx::ApproxGraph;
use crate::error::{Error, Result};
use crate::linalg::{self, c};
use crate::{CMatrix, C64};

/// Matching matrices with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy)]
enum Kind {
    Finite(f64),
    Capped(f64, EndCondition),
    Half,
}

/// Inhomogeneous data entering the matching rows.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Source {
    /// Incoming wave `amplitude e^{-iks}` on a half-line.
    Incoming { edge: usize, amplitude: C64 },
    /// Unit point source for the resolvent kernel.
    Point(GraphPoint),
}

pub(crate) struct Matching {
    k: C64,
    kinds: Vec<Kind>,
    potentials: Vec<f64>,
    offsets: Vec<usize>,
    dim: usize,
    matrix: CMatrix,
    /// Row offset and orthonormalized `(A|B)` rows for each vertex.
    vertex_rows: Vec<(usize, CMatrix)>,
    /// For each edge, the (vertex, local index) of its start and end.
    attachments: Vec<[Option<(usize, usize)>; 2]>,
    cap_rows: Vec<Option<usize>>,
}

impl Matching {
    pub(crate) fn new(sys: &MetricGraphSystem, k: C64) -> Self {
        let ne = sys.edges().len();
        let truncation = sys.truncation();
        let kinds: Vec<Kind> = sys
            .edges()
            .iter()
            .map(|e| match (e.length, truncation) {
                (EdgeLength::Finite(l), _) => Kind::Finite(l),
                (EdgeLength::HalfLine, Some(t)) => Kind::Capped(t.length, t.end),
                (EdgeLength::HalfLine, None) => Kind::Half,
            })
            .collect();
        let mut offsets = Vec::with_capacity(ne);
        let mut dim = 0;
        for kind in &kinds {
            offsets.push(dim);
            dim += match kind {
                Kind::Half => 1,
                _ => 2,
            };
        }
        let potentials: Vec<f64> = sys.edges().iter().map(|e| e.magnetic_a).collect();

        let mut m = Self {
            k,
            kinds,
            potentials,
            offsets,
            dim,
            matrix: CMatrix::zeros(dim, dim),
            vertex_rows: Vec::new(),
            attachments: vec![[None, None]; ne],
            cap_rows: vec![None; ne],
        };

        let mut row = 0;
        for (v, vx) in sys.vertices().iter().enumerate() {
            let deg = vx.ends.len();
            let q = linalg::orthonormal_rows(&vx.condition.as_coupling(deg).stacked());
            for (i, end) in vx.ends.iter().enumerate() {
                let slot = match end.side {
                    Side::Start => 0,
                    Side::End => 1,
                };
                m.attachments[end.edge][slot] = Some((v, i));
                let (val, der) = m.end_terms(*end);
                for r in 0..deg {
                    for &(col, coef) in &val {
                        m.matrix[(row + r, col)] += q[(r, i)] * coef;
                    }
                    for &(col, coef) in &der {
                        m.matrix[(row + r, col)] += q[(r, deg + i)] * coef;
                    }
                }
            }
            m.vertex_rows.push((row, q));
            row += deg;
        }
        for e in 0..ne {
            if let Kind::Capped(l, end) = m.kinds[e] {
                let o = m.offsets[e];
                let ex = (c(0.0, 1.0) * k * l).exp();
                m.matrix[(row, o)] = ex;
                m.matrix[(row, o + 1)] = match end {
                    EndCondition::Dirichlet => c(1.0, 0.0),
                    EndCondition::Neumann => c(-1.0, 0.0),
                };
                m.cap_rows[e] = Some(row);
                row += 1;
            }
        }
        debug_assert_eq!(row, dim);
        m
    }

    pub(crate) fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub(crate) fn offset(&self, edge: usize) -> usize {
        self.offsets[edge]
    }

    /// Value and outgoing covariant derivative at an edge end, as linear
    /// combinations of the unknowns.
    fn end_terms(&self, end: EdgeEnd) -> (Vec<(usize, C64)>, Vec<(usize, C64)>) {
        let ik = c(0.0, 1.0) * self.k;
        let o = self.offsets[end.edge];
        match (self.kinds[end.edge], end.side) {
            (Kind::Half, _) => (vec![(o, c(1.0, 0.0))], vec![(o, ik)]),
            (Kind::Finite(l) | Kind::Capped(l, _), Side::Start) => {
                let ex = (ik * l).exp();
                (
                    vec![(o, c(1.0, 0.0)), (o + 1, ex)],
                    vec![(o, ik), (o + 1, -ik * ex)],
                )
            }
            (Kind::Finite(l) | Kind::Capped(l, _), Side::End) => {
                let ex = (ik * l).exp();
                let ph = C64::from_polar(1.0, self.potentials[end.edge] * l);
                (
                    vec![(o, ph * ex), (o + 1, ph)],
                    vec![(o, -ik * ph * ex), (o + 1, ik * ph)],
                )
            }
        }
    }

    fn add_end_data(&self, rhs: &mut DVector<C64>, edge: usize, side: Side, val: C64, der: C64) {
        let slot = match side {
            Side::Start => 0,
            Side::End => 1,
        };
        if let Some((v, i)) = self.attachments[edge][slot] {
            let (row, q) = &self.vertex_rows[v];
            let deg = q.nrows();
            for r in 0..deg {
                rhs[row + r] -= q[(r, i)] * val + q[(r, deg + i)] * der;
            }
        }
    }

    pub(crate) fn rhs(&self, source: Source) -> DVector<C64> {
        let mut rhs = DVector::zeros(self.dim);
        let ik = c(0.0, 1.0) * self.k;
        match source {
            Source::Incoming { edge, amplitude } => {
                self.add_end_data(&mut rhs, edge, Side::Start, amplitude, -ik * amplitude);
            }
            Source::Point(y) => {
                let e = y.edge;
                let v0 = self.particular(y, 0.0);
                let d0 = if y.s > 0.0 { -ik * v0 } else { ik * v0 };
                self.add_end_data(&mut rhs, e, Side::Start, v0, d0);
                match self.kinds[e] {
                    Kind::Finite(l) => {
                        let vl = self.particular(y, l);
                        let inside = if y.s < l { ik * vl } else { -ik * vl };
                        self.add_end_data(&mut rhs, e, Side::End, vl, -inside);
                    }
                    Kind::Capped(l, _) => {
                        let ph = C64::from_polar(1.0, self.potentials[e] * l);
                        let row = self.cap_rows[e].expect("capped edge has a far-end row");
                        rhs[row] -= self.particular(y, l) / ph;
                    }
                    Kind::Half => {}
                }
            }
        }
        rhs
    }

    /// `(i / 2k) e^{ia(s - s_y)} e^{ik|s - s_y|}` on the source edge.
    fn particular(&self, y: GraphPoint, s: f64) -> C64 {
        let a = self.potentials[y.edge];
        let ik = c(0.0, 1.0) * self.k;
        c(0.0, 0.5) / self.k * C64::from_polar(1.0, a * (s - y.s)) * (ik * (s - y.s).abs()).exp()
    }

    /// Homogeneous part of the solution at `x` from solved coefficients.
    pub(crate) fn eval_homogeneous(&self, coef: &DVector<C64>, x: GraphPoint) -> C64 {
        let ik = c(0.0, 1.0) * self.k;
        let o = self.offsets[x.edge];
        let gauge = C64::from_polar(1.0, self.potentials[x.edge] * x.s);
        match self.kinds[x.edge] {
            Kind::Half => gauge * coef[o] * (ik * x.s).exp(),
            Kind::Finite(l) | Kind::Capped(l, _) => {
                gauge * (coef[o] * (ik * x.s).exp() + coef[o + 1] * (ik * (l - x.s)).exp())
            }
        }
    }

    /// Basis values at `x`: offset and the multipliers of the one or two
    /// coefficients stored there.
    pub(crate) fn basis_at(&self, x: GraphPoint) -> (usize, C64, C64) {
        let ik = c(0.0, 1.0) * self.k;
        let o = self.offsets[x.edge];
        let gauge = C64::from_polar(1.0, self.potentials[x.edge] * x.s);
        match self.kinds[x.edge] {
            Kind::Half => (o, gauge * (ik * x.s).exp(), c(0.0, 0.0)),
            Kind::Finite(l) | Kind::Capped(l, _) => {
                (o, gauge * (ik * x.s).exp(), gauge * (ik * (l - x.s)).exp())
            }
        }
    }

    pub(crate) fn has_second(&self, edge: usize) -> bool {
        !matches!(self.kinds[edge], Kind::Half)
    }

    pub(crate) fn eval_with_source(
        &self,
        coef: &DVector<C64>,
        x: GraphPoint,
        y: GraphPoint,
    ) -> C64 {
        let mut v = self.eval_homogeneous(coef, x);
        if x.edge == y.edge {
            v += self.particular(y, x.s);
        }
        v
    }
}

/// On-shell scattering matrix of a non-compact graph: column `j` holds the
/// outgoing amplitudes for a unit incoming wave on the `j`-th half-line
/// (half-lines ordered by edge index).
pub fn scattering_matrix(sys: &MetricGraphSystem, k: f64) -> Result<CMatrix> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Precondition(format!("k must be positive, got {k}")));
    }
    if sys.truncation().is_some() {
        return Err(Error::Precondition(
            "scattering needs untruncated half-lines".into(),
        ));
    }
    let halves = sys.half_lines();
    let m = Matching::new(sys, c(k, 0.0));
    let mut rhs = CMatrix::zeros(m.dim, halves.len());
    for (j, &h) in halves.iter().enumerate() {
        rhs.set_column(
            j,
            &m.rhs(Source::Incoming {
                edge: h,
                amplitude: c(1.0, 0.0),
            }),
        );
    }
    let (coef, _) =
        linalg::solve_checked(&m.matrix, &rhs, MAX_CONDITION).ok_or_else(|| Error::ResonantK {
            k,
            cond: linalg::condition_number(&m.matrix),
        })?;
    Ok(CMatrix::from_fn(halves.len(), halves.len(), |i, j| {
        coef[(m.offset(halves[i]), j)]
    }))
}

/// Scattering matrix of an approximating graph at `k`, in the original edge
/// numbering of the coupling it was built from.
pub fn effective_scattering(g: &ApproxGraph, k: f64) -> Result<CMatrix> {
    let s = scattering_matrix(&MetricGraphSystem::from_approx(g), k)?;
    let perm = g.perm();
    let n = g.n();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(perm[i], perm[j])] = s[(i, j)];
        }
    }
    Ok(out)
}

/// Integral kernel of `(H - z)^{-1}`.
pub struct GreensFunction {
    z: C64,
    matching: Matching,
    lu: LU<C64, Dyn, Dyn>,
}

impl GreensFunction {
    pub fn new(sys: &MetricGraphSystem, z: C64) -> Result<Self> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite(format!("spectral parameter {z}")));
        }
        if z.im == 0.0 && z.re >= 0.0 && !sys.is_compact() {
            return Err(Error::Precondition(format!(
                "z = {} lies in the continuous spectrum",
                z.re
            )));
        }
        if z == c(0.0, 0.0) {
            return Err(Error::Precondition(
                "z = 0 is not supported by the exponential basis".into(),
            ));
        }
        let mut k = z.sqrt();
        if k.im < 0.0 {
            k = -k;
        }
        let matching = Matching::new(sys, k);
        let cond = linalg::condition_number(matching.matrix());
        if !cond.is_finite() || cond > MAX_CONDITION {
            return Err(Error::NearSingularZ {
                re: z.re,
                im: z.im,
                cond,
            });
        }
        let lu = matching.matrix().clone().lu();
        Ok(Self { z, matching, lu })
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    fn coefficients(&self, y: GraphPoint) -> DVector<C64> {
        let rhs = self.matching.rhs(Source::Point(y));
        self.lu.solve(&rhs).expect("matrix checked nonsingular")
    }

    /// `G(x, y; z)`.
    pub fn eval(&self, x: GraphPoint, y: GraphPoint) -> C64 {
        let coef = self.coefficients(y);
        self.matching.eval_with_source(&coef, x, y)
    }

    /// `G(x, y; z)` for many `x` at a fixed source `y`.
    pub fn column(&self, y: GraphPoint, xs: &[GraphPoint]) -> Vec<C64> {
        let coef = self.coefficients(y);
        xs.iter()
            .map(|&x| self.matching.eval_with_source(&coef, x, y))
            .collect()
    }
}

/// Kernel columns at a fixed set of evaluation points.
pub struct KernelSampler<'a> {
    green: &'a GreensFunction,
    xs: Vec<GraphPoint>,
    basis: Vec<(usize, C64, C64)>,
}

impl KernelSampler<'_> {
    pub fn points(&self) -> &[GraphPoint] {
        &self.xs
    }

    /// `G(x, y; z)` for every sample point `x`.
    pub fn column(&self, y: GraphPoint) -> Vec<C64> {
        let m = &self.green.matching;
        let coef = self.green.coefficients(y);
        self.xs
            .iter()
            .zip(&self.basis)
            .map(|(&x, &(o, b0, b1))| {
                let mut v = coef[o] * b0;
                if m.has_second(x.edge) {
                    v += coef[o + 1] * b1;
                }
                if x.edge == y.edge {
                    v += m.particular(y, x.s);
                }
                v
            })
            .collect()
    }
}

impl GreensFunction {
    pub fn sampler(&self, xs: &[GraphPoint]) -> KernelSampler<'_> {
        let basis = xs.iter().map(|&x| self.matching.basis_at(x)).collect();
        KernelSampler {
            green: self,
            xs: xs.to_vec(),
            basis,
        }
    }
}

/// Convenience wrapper around [`GreensFunction`].
pub fn greens_function(
    sys: &MetricGraphSystem,
    z: C64,
    x: GraphPoint,
    y: GraphPoint,
) -> Result<C64> {
    Ok(GreensFunction::new(sys, z)?.eval(x, y))
}

/// Determinant of the matching matrix of a compact graph at `k`. Its zeros
/// on `k > 0` are the square roots of the positive eigenvalues.
pub fn secular_determinant(sys: &MetricGraphSystem, k: C64) -> Result<C64> {
    if !sys.is_compact() {
        return Err(Error::Precondition(
            "secular determinant needs a compact graph".into(),
        ));
    }
    Ok(Matching::new(sys, k).matrix().clone().determinant())
}

/// Secular determinant sampled on a grid of positive `k`.
#[derive(Debug, Clone)]
pub struct SecularProblem {
    pub k_grid: Vec<f64>,
    pub values: Vec<C64>,
}

impl SecularProblem {
    pub fn scan(sys: &MetricGraphSystem, k_grid: Vec<f64>) -> Result<Self> {
        if let Some(&k) = k_grid.iter().find(|&&k| !(k > 0.0)) {
            return Err(Error::Precondition(format!(
                "k grid must be positive, got {k}"
            )));
        }
        let values = k_grid
            .iter()
            .map(|&k| secular_determinant(sys, c(k, 0.0)))
            .collect::<Result<_>>()?;
        Ok(Self { k_grid, values })
    }

    /// Grid points where `|det|` has a local minimum, as eigenvalue guesses
    /// `λ = k²`.
    pub fn local_minima(&self) -> Vec<f64> {
        let mags: Vec<f64> = self.values.iter().map(|v| v.norm()).collect();
        (1..mags.len().saturating_sub(1))
            .filter(|&i| mags[i] < mags[i - 1] && mags[i] <= mags[i + 1])
            .map(|i| self.k_grid[i].powi(2))
            .collect()
    }
}
