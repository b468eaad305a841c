//! Self-adjoint vertex couplings and their normalized `(m, S, T)` form.
//!
//! A coupling of a degree-`n` vertex is a pair of `n × n` matrices with
//! `A f(0) + B f'(0) = 0`, where `f'(0)` collects the derivatives taken
//! along each edge away from the vertex. Two pairs describe the same
//! coupling iff the row spaces of `(A|B)` coincide.
//!
//! After renumbering the edges, every coupling can be written as
//!
//! ```text
//! ( I  T ) f'(0) = (  S   0 ) f(0)
//! ( 0  0 )         ( -T*  I )
//! ```
//!
//! with `S = S*` of size `m × m` and `T` of size `m × (n - m)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, c};
use crate::{CMatrix, C64, DEFAULT_TOL};

/// Smallest singular value of the pivot block accepted by [`st_from_ab`].
/// Blocks below this are treated as singular for the candidate numbering.
pub const PIVOT_TOL: f64 = 1e-8;

/// Degree up to which [`st_from_ab`] searches all column subsets.
pub const EXHAUSTIVE_MAX_N: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct VertexCoupling {
    a: CMatrix,
    b: CMatrix,
}

impl VertexCoupling {
    /// Structural checks only (shape and finiteness); use
    /// [`validate_coupling`] for the rank and Hermiticity conditions.
    pub fn new(a: CMatrix, b: CMatrix) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::Dimension("vertex degree must be at least 1".into()));
        }
        if a.ncols() != n || b.nrows() != n || b.ncols() != n {
            return Err(Error::Dimension(format!(
                "A is {}x{}, B is {}x{}; both must be n x n",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if !linalg::all_finite(&a) || !linalg::all_finite(&b) {
            return Err(Error::NonFinite(
                "coupling matrices contain NaN or infinity".into(),
            ));
        }
        Ok(Self { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    /// The `n × 2n` block matrix `(A|B)`.
    pub fn stacked(&self) -> CMatrix {
        let n = self.n();
        let mut m = CMatrix::zeros(n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.a);
        m.view_mut((0, n), (n, n)).copy_from(&self.b);
        m
    }

    /// Continuity plus vanishing derivative sum.
    pub fn kirchhoff(n: usize) -> Self {
        Self::delta(n, 0.0)
    }

    /// Continuity plus `Σ f_j'(0) = alpha f(0)`.
    pub fn delta(n: usize, alpha: f64) -> Self {
        let mut a = CMatrix::zeros(n, n);
        let mut b = CMatrix::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i)] = c(1.0, 0.0);
            a[(i, i + 1)] = c(-1.0, 0.0);
        }
        a[(n - 1, 0)] = c(-alpha, 0.0);
        for j in 0..n {
            b[(n - 1, j)] = c(1.0, 0.0);
        }
        Self { a, b }
    }

    /// `(1/beta) J f(0) - f'(0) = 0` with `J` the all-ones matrix.
    pub fn delta_prime_s(n: usize, beta: f64) -> Self {
        let a = CMatrix::from_element(n, n, c(1.0 / beta, 0.0));
        let b = -CMatrix::identity(n, n);
        Self { a, b }
    }

    pub fn dirichlet(n: usize) -> Self {
        Self {
            a: CMatrix::identity(n, n),
            b: CMatrix::zeros(n, n),
        }
    }

    /// Reorder edges: edge `i` of the result is edge `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let a = CMatrix::from_fn(n, n, |i, j| self.a[(i, perm[j])]);
        let b = CMatrix::from_fn(n, n, |i, j| self.b[(i, perm[j])]);
        Self { a, b }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RankDeficient { rank: usize, n: usize },
    NonHermitian { deviation: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RankDeficient { rank, n } => {
                write!(f, "rank deficient: rank(A|B) = {rank} < {n}")
            }
            Violation::NonHermitian { deviation } => {
                write!(f, "AB* not Hermitian: ||AB* - (AB*)*|| = {deviation:e}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidCoupling(self.violations))
        }
    }
}

/// Check that `(A|B)` has full rank and `AB*` is Hermitian.
///
/// The rank uses a singular-value cutoff `tol * sigma_max`; the Hermiticity
/// defect is measured in Frobenius norm relative to `max(1, ||A|| ||B||)`.
pub fn validate_coupling(cp: &VertexCoupling, tol: f64) -> ValidationResult {
    let n = cp.n();
    let mut violations = Vec::new();
    let rank = linalg::numerical_rank(&cp.stacked(), tol);
    if rank < n {
        violations.push(Violation::RankDeficient { rank, n });
    }
    let ab = cp.a() * cp.b().adjoint();
    let deviation = linalg::hermitian_deviation(&ab);
    let scale = (cp.a().norm() * cp.b().norm()).max(1.0);
    if deviation > tol * scale {
        violations.push(Violation::NonHermitian { deviation });
    }
    ValidationResult { violations }
}

/// Normalized coupling: `m`, edge numbering `perm`, Hermitian `S`, and `T`.
///
/// `perm[i]` is the original (0-based) index of the edge that sits at
/// position `i` of the normalized numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct StForm {
    m: usize,
    perm: Vec<usize>,
    s: CMatrix,
    t: CMatrix,
}

impl StForm {
    pub fn new(perm: Vec<usize>, s: CMatrix, t: CMatrix, tol: f64) -> Result<Self> {
        let n = perm.len();
        let m = s.nrows();
        if n == 0 {
            return Err(Error::Dimension("vertex degree must be at least 1".into()));
        }
        if s.ncols() != m || m > n || t.nrows() != m || t.ncols() != n - m {
            return Err(Error::Dimension(format!(
                "S is {}x{}, T is {}x{} for n = {n}",
                s.nrows(),
                s.ncols(),
                t.nrows(),
                t.ncols()
            )));
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Dimension(format!(
                    "{perm:?} is not a permutation of 0..{n}"
                )));
            }
        }
        if !linalg::all_finite(&s) || !linalg::all_finite(&t) {
            return Err(Error::NonFinite("S or T contains NaN or infinity".into()));
        }
        let dev = linalg::hermitian_deviation(&s);
        if dev > tol * s.norm().max(1.0) {
            return Err(Error::InvalidCoupling(vec![Violation::NonHermitian {
                deviation: dev,
            }]));
        }
        let s = (&s + s.adjoint()).scale(0.5);
        Ok(Self { m, perm, s, t })
    }

    /// Normalized form in the identity numbering.
    pub fn with_identity_perm(s: CMatrix, t: CMatrix) -> Result<Self> {
        let n = s.nrows() + t.ncols();
        Self::new((0..n).collect(), s, t, DEFAULT_TOL)
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn s(&self) -> &CMatrix {
        &self.s
    }

    pub fn t(&self) -> &CMatrix {
        &self.t
    }

    /// `T` entry addressed by normalized edge indices `j < m <= k`.
    pub fn t_entry(&self, j: usize, k: usize) -> C64 {
        self.t[(j, k - self.m)]
    }

    /// `Σ_{l >= m} T_jl conj(T_kl)` for `j, k < m`.
    pub fn t_overlap(&self, j: usize, k: usize) -> C64 {
        (0..self.n() - self.m)
            .map(|l| self.t[(j, l)] * self.t[(k, l)].conj())
            .sum()
    }

    /// The coupling in the normalized numbering:
    /// `B = [[I, T], [0, 0]]`, `A = [[-S, 0], [T*, -I]]`.
    pub fn canonical_coupling(&self) -> VertexCoupling {
        let (n, m) = (self.n(), self.m);
        let mut a = CMatrix::zeros(n, n);
        let mut b = CMatrix::zeros(n, n);
        for i in 0..m {
            b[(i, i)] = c(1.0, 0.0);
            for j in 0..m {
                a[(i, j)] = -self.s[(i, j)];
            }
            for l in 0..n - m {
                b[(i, m + l)] = self.t[(i, l)];
                a[(m + l, i)] = self.t[(i, l)].conj();
            }
        }
        for l in m..n {
            a[(l, l)] = c(-1.0, 0.0);
        }
        VertexCoupling { a, b }
    }

    /// Same coupling with the numbering reset to the identity, i.e. the
    /// edges relabelled in the normalized order.
    pub fn in_normalized_numbering(&self) -> Self {
        Self {
            perm: (0..self.n()).collect(),
            ..self.clone()
        }
    }

    /// Embedding `F = E u`, `E* F' = S u` of the coupling as a Hermitian
    /// form on `u ∈ C^m`; `E` is `n × m` in the original numbering.
    pub fn embedding(&self) -> (CMatrix, CMatrix) {
        let (n, m) = (self.n(), self.m);
        let mut e = CMatrix::zeros(n, m);
        for i in 0..m {
            e[(self.perm[i], i)] = c(1.0, 0.0);
        }
        for l in 0..n - m {
            for i in 0..m {
                e[(self.perm[m + l], i)] = self.t[(i, l)].conj();
            }
        }
        (e, self.s.clone())
    }
}

/// Build `(A, B)` from a normalized form, in the original edge numbering.
pub fn ab_from_st(st: &StForm) -> VertexCoupling {
    let canon = st.canonical_coupling();
    let mut inv = vec![0; st.n()];
    for (i, &p) in st.perm.iter().enumerate() {
        inv[p] = i;
    }
    canon.permuted(&inv)
}

/// Normalize a coupling.
///
/// `m` is the numerical rank of `B`. The numbering is the lexicographically
/// smallest one for which the normalized blocks exist: the first `m`
/// positions take a column subset of `B` whose pivot block (those `B`
/// columns together with the complementary `A` columns) is invertible.
/// Subsets are searched exhaustively up to [`EXHAUSTIVE_MAX_N`], and by
/// greedy column pivoting beyond that.
pub fn st_from_ab(cp: &VertexCoupling, tol: f64) -> Result<StForm> {
    validate_coupling(cp, tol).into_result()?;
    let n = cp.n();
    let q = linalg::orthonormal_rows(&cp.stacked());
    let qa = q.columns(0, n).into_owned();
    let qb = q.columns(n, n).into_owned();
    let m = linalg::numerical_rank(&qb, tol);

    let pivot_block = |subset: &[usize]| -> CMatrix {
        let rest = complement(subset, n);
        let mut k = CMatrix::zeros(n, n);
        for (col, &j) in subset.iter().enumerate() {
            k.set_column(col, &qb.column(j));
        }
        for (col, &j) in rest.iter().enumerate() {
            k.set_column(m + col, &qa.column(j));
        }
        k
    };
    let admissible = |subset: &[usize]| -> bool {
        let sv = linalg::singular_values(&pivot_block(subset));
        sv.last().is_none_or(|&s| s > PIVOT_TOL)
    };

    let subset = if n <= EXHAUSTIVE_MAX_N {
        Combinations::new(n, m).find(|s| admissible(s))
    } else {
        let s = greedy_pivot_columns(&qb, m);
        admissible(&s).then_some(s)
    }
    .ok_or_else(|| {
        Error::NonNormalizable(format!("no admissible edge numbering for m = {m}, n = {n}"))
    })?;

    let mut perm = subset.clone();
    perm.extend(complement(&subset, n));

    let k = pivot_block(&subset);
    let k_inv = k
        .try_inverse()
        .ok_or_else(|| Error::NonNormalizable("pivot block is singular".into()))?;
    let mut g = k_inv;
    for i in m..n {
        g.row_mut(i).neg_mut();
    }
    let a_hat = &g * &qa;
    let b_hat = &g * &qb;
    let s = CMatrix::from_fn(m, m, |i, j| -a_hat[(i, perm[j])]);
    let t = CMatrix::from_fn(m, n - m, |i, l| b_hat[(i, perm[m + l])]);

    let dev = linalg::hermitian_deviation(&s);
    if dev > tol * s.norm().max(1.0) {
        return Err(Error::NonNormalizable(format!(
            "recovered S is not Hermitian (deviation {dev:e})"
        )));
    }
    StForm::new(perm, s, t, f64::INFINITY)
}

/// Distance between the row spaces of `(A1|B1)` and `(A2|B2)`.
pub fn coupling_distance(c1: &VertexCoupling, c2: &VertexCoupling) -> f64 {
    if c1.n() != c2.n() {
        return f64::INFINITY;
    }
    let q1 = linalg::orthonormal_rows(&c1.stacked());
    let q2 = linalg::orthonormal_rows(&c2.stacked());
    linalg::projection_distance(&q1, &q2)
}

/// True iff both pairs describe the same coupling.
pub fn ab_equiv(c1: &VertexCoupling, c2: &VertexCoupling, tol: f64) -> bool {
    coupling_distance(c1, c2) <= tol
}

/// On-shell scattering matrix `S(k) = -(A + ikB)^{-1} (A - ikB)` of the star
/// graph with half-line edges. Incoming `e^{-iks}` amplitudes map to
/// outgoing `e^{iks}` amplitudes.
pub fn star_scattering(cp: &VertexCoupling, k: f64) -> Result<CMatrix> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Precondition(format!("k must be positive, got {k}")));
    }
    let ik = c(0.0, k);
    let lhs = cp.a() + cp.b() * ik;
    let rhs = -(cp.a() - cp.b() * ik);
    let (s, _) = linalg::solve_checked(&lhs, &rhs, 1e14)
        .ok_or_else(|| Error::Conditioning(format!("A + ikB is singular at k = {k}")))?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingKind {
    Kirchhoff,
    Delta { alpha: f64 },
    DeltaPrimeS { beta: f64 },
    Dirichlet,
    Custom(VertexCoupling),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedCoupling {
    kind: CouplingKind,
    n: usize,
}

impl NamedCoupling {
    pub fn new(kind: CouplingKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("vertex degree must be at least 1".into()));
        }
        match &kind {
            CouplingKind::Delta { alpha } if !alpha.is_finite() => {
                return Err(Error::NonFinite(format!("delta strength {alpha}")));
            }
            CouplingKind::DeltaPrimeS { beta } if !beta.is_finite() || *beta == 0.0 => {
                return Err(Error::Precondition(format!(
                    "delta'_s strength must be finite and nonzero, got {beta}"
                )));
            }
            CouplingKind::Custom(cp) if cp.n() != n => {
                return Err(Error::Dimension(format!(
                    "custom coupling has n = {}, expected {n}",
                    cp.n()
                )));
            }
            _ => {}
        }
        Ok(Self { kind, n })
    }

    pub fn kind(&self) -> &CouplingKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coupling(&self) -> VertexCoupling {
        match &self.kind {
            CouplingKind::Kirchhoff => VertexCoupling::kirchhoff(self.n),
            CouplingKind::Delta { alpha } => VertexCoupling::delta(self.n, *alpha),
            CouplingKind::DeltaPrimeS { beta } => VertexCoupling::delta_prime_s(self.n, *beta),
            CouplingKind::Dirichlet => VertexCoupling::dirichlet(self.n),
            CouplingKind::Custom(cp) => cp.clone(),
        }
    }
}

/// Closed-form normalized parameters of the named couplings.
pub fn named_to_st(nc: &NamedCoupling) -> Result<StForm> {
    let n = nc.n;
    let ones_row = || CMatrix::from_element(1, n - 1, c(1.0, 0.0));
    match &nc.kind {
        CouplingKind::Kirchhoff => StForm::with_identity_perm(CMatrix::zeros(1, 1), ones_row()),
        CouplingKind::Delta { alpha } => {
            StForm::with_identity_perm(CMatrix::from_element(1, 1, c(*alpha, 0.0)), ones_row())
        }
        CouplingKind::DeltaPrimeS { beta } => StForm::with_identity_perm(
            CMatrix::from_element(n, n, c(1.0 / beta, 0.0)),
            CMatrix::zeros(n, 0),
        ),
        CouplingKind::Dirichlet => {
            StForm::with_identity_perm(CMatrix::zeros(0, 0), CMatrix::zeros(0, n))
        }
        CouplingKind::Custom(cp) => st_from_ab(cp, DEFAULT_TOL),
    }
}

fn complement(subset: &[usize], n: usize) -> Vec<usize> {
    (0..n).filter(|j| !subset.contains(j)).collect()
}

/// Pick `m` columns by greedy pivoting on residual column norms.
fn greedy_pivot_columns(m_mat: &CMatrix, m: usize) -> Vec<usize> {
    let mut work = m_mat.clone();
    let mut chosen = Vec::with_capacity(m);
    for _ in 0..m {
        let j = (0..work.ncols())
            .filter(|j| !chosen.contains(j))
            .max_by(|&a, &b| work.column(a).norm().total_cmp(&work.column(b).norm()))
            .expect("m <= n");
        let q = work.column(j).normalize();
        chosen.push(j);
        for col in 0..work.ncols() {
            let proj = q.dotc(&work.column(col));
            let upd = work.column(col) - &q * proj;
            work.set_column(col, &upd);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// `k`-subsets of `0..n` in lexicographic order.
struct Combinations {
    n: usize,
    idx: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.idx.clone()?;
        let k = cur.len();
        let mut nxt = cur.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.idx = None;
                break;
            }
            i -= 1;
            if nxt[i] < self.n - k + i {
                nxt[i] += 1;
                for j in i + 1..k {
                    nxt[j] = nxt[j - 1] + 1;
                }
                self.idx = Some(nxt);
                break;
            }
        }
        Some(cur)
    }
}
