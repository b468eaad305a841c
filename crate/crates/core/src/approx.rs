//! The approximating graph `Γ^{S,T}(d)`.
//!
//! The star vertex is removed and the loose endpoints `v_j` of the outer
//! half-lines are joined pairwise by inner edges of length `2d`. Each inner
//! edge `{j,k}` carries a δ interaction `w_{jk}` at its midpoint and a
//! constant vector potential, `A_(j,k)` on the half towards `v_j` and
//! `A_(k,j) = -A_(j,k)` on the half towards `v_k`. Each `v_j` carries a δ
//! interaction `w_j`. All parameters are explicit functions of `d` and the
//! normalized coupling `(m, S, T)`.
//!
//! Indices here are 0-based positions in the normalized numbering of the
//! [`StForm`]: rows of `T` are `0..m`, columns are `m..n`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use crate::coupling::StForm;
use crate::error::{Error, Result};
use crate::C64;

/// Entries with modulus at or below this are treated as exact zeros when
/// deciding which inner edges exist.
pub const ZERO_TOL: f64 = 1e-12;

fn nonzero(z: C64) -> bool {
    z.norm() > ZERO_TOL
}

/// Signed modulus: `|c|` if `Re c >= 0`, else `-|c|`.
pub fn bracket(c: C64) -> f64 {
    if c.re >= 0.0 {
        c.norm()
    } else {
        -c.norm()
    }
}

/// `arg c` shifted by `-π` when `Re c < 0`, so that
/// `bracket(c) * exp(i * phase(c)) == c`.
fn bracket_phase(c: C64) -> f64 {
    if c.re >= 0.0 {
        c.arg()
    } else {
        c.arg() - PI
    }
}

/// `N_j` for every outer edge `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSets {
    sets: Vec<BTreeSet<usize>>,
}

impl NeighborSets {
    /// Validates symmetry and irreflexivity.
    pub fn from_sets(sets: Vec<BTreeSet<usize>>) -> Result<Self> {
        let n = sets.len();
        for (j, s) in sets.iter().enumerate() {
            for &k in s {
                if k >= n || k == j || !sets[k].contains(&j) {
                    return Err(Error::InvalidGraph(format!(
                        "neighbor sets are not symmetric and irreflexive at ({j}, {k})"
                    )));
                }
            }
        }
        Ok(Self { sets })
    }

    pub fn n(&self) -> usize {
        self.sets.len()
    }

    pub fn get(&self, j: usize) -> &BTreeSet<usize> {
        &self.sets[j]
    }

    pub fn degree(&self, j: usize) -> usize {
        self.sets[j].len()
    }

    pub fn contains(&self, j: usize, k: usize) -> bool {
        self.sets.get(j).is_some_and(|s| s.contains(&k))
    }

    /// Inner edges as pairs `(j, k)` with `j < k`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.sets
            .iter()
            .enumerate()
            .flat_map(|(j, s)| s.iter().filter(move |&&k| k > j).map(move |&k| (j, k)))
            .collect()
    }
}

/// Which outer edges get joined by inner edges.
pub fn neighbor_sets(st: &StForm) -> NeighborSets {
    let (n, m) = (st.n(), st.m());
    let mut sets = vec![BTreeSet::new(); n];
    for j in 0..m {
        for k in 0..m {
            if k == j {
                continue;
            }
            let shared_column =
                (m..n).any(|l| nonzero(st.t_entry(j, l)) && nonzero(st.t_entry(k, l)));
            if nonzero(st.s()[(j, k)]) || shared_column {
                sets[j].insert(k);
            }
        }
        for k in m..n {
            if nonzero(st.t_entry(j, k)) {
                sets[j].insert(k);
                sets[k].insert(j);
            }
        }
    }
    NeighborSets { sets }
}

fn check_d(d: f64) -> Result<()> {
    if d > 0.0 && d <= 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "d must lie in (0, 1], got {d}"
        )))
    }
}

/// Coefficient that the inner edge `{j,k}` (with `j < k`) has to reproduce:
/// `T_jk` for a cross pair, `d S_jk + Σ_l T_jl conj(T_kl)` otherwise.
fn pair_coefficient(st: &StForm, d: f64, j: usize, k: usize) -> C64 {
    if k >= st.m() {
        st.t_entry(j, k)
    } else {
        st.s()[(j, k)] * d + st.t_overlap(j, k)
    }
}

fn require_neighbors(st: &StForm, j: usize, k: usize) -> Result<()> {
    if neighbor_sets(st).contains(j, k) {
        Ok(())
    } else {
        Err(Error::NotNeighbors { j, k })
    }
}

/// `A_(j,k)(d)`, the vector potential on the half of inner edge `{j,k}`
/// adjacent to `v_j`.
pub fn magnetic_schedule(st: &StForm, d: f64, j: usize, k: usize) -> Result<f64> {
    check_d(d)?;
    require_neighbors(st, j, k)?;
    magnetic_unchecked(st, d, j, k)
}

fn magnetic_unchecked(st: &StForm, d: f64, j: usize, k: usize) -> Result<f64> {
    let (lo, hi, sign) = if j < k { (j, k, 1.0) } else { (k, j, -1.0) };
    let c = pair_coefficient(st, d, lo, hi);
    if c == C64::new(0.0, 0.0) {
        return Err(Error::DegenerateArgument { d, j: lo, k: hi });
    }
    Ok(sign * bracket_phase(c) / (2.0 * d))
}

/// `w_{jk}(d)`, the midpoint δ strength of inner edge `{j,k}`.
pub fn inner_delta_schedule(st: &StForm, d: f64, j: usize, k: usize) -> Result<f64> {
    check_d(d)?;
    require_neighbors(st, j, k)?;
    inner_delta_unchecked(st, d, j, k)
}

fn inner_delta_unchecked(st: &StForm, d: f64, j: usize, k: usize) -> Result<f64> {
    let (lo, hi) = if j < k { (j, k) } else { (k, j) };
    let b = bracket(pair_coefficient(st, d, lo, hi));
    if b == 0.0 {
        return Err(Error::SingularD { d, j: lo, k: hi });
    }
    if hi >= st.m() {
        Ok((-2.0 + 1.0 / b) / d)
    } else {
        // 1 / (2 + d w) = -<c>
        Ok((-2.0 - 1.0 / b) / d)
    }
}

/// `w_j(d)`, the δ strength at the endpoint `v_j` of outer edge `j`.
pub fn vertex_delta_schedule(st: &StForm, nbrs: &NeighborSets, d: f64, j: usize) -> Result<f64> {
    check_d(d)?;
    let (n, m) = (st.n(), st.m());
    let deg = nbrs.degree(j) as f64;
    if j >= m {
        let sum: f64 = (0..m).map(|h| bracket(st.t_entry(h, j))).sum();
        return Ok((1.0 - deg + sum) / d);
    }
    let coupling_sum: f64 = (0..m)
        .filter(|&k| k != j)
        .map(|k| bracket(st.s()[(j, k)] + st.t_overlap(j, k) / d))
        .sum();
    let column_sum: f64 = (m..n)
        .map(|l| {
            let b = bracket(st.t_entry(j, l));
            (1.0 + b) * b
        })
        .sum();
    Ok(st.s()[(j, j)].re - deg / d - coupling_sum + column_sum / d)
}

/// Growth order of `w_{jk}(d)` as `d → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    /// `O(1/d)`
    DInv,
    /// `O(1/d²)`
    DInvSq,
}

/// `O(1/d²)` exactly for pairs `j, k < m` whose rows of `T` are orthogonal.
pub fn order_check(st: &StForm, j: usize, k: usize) -> Result<Order> {
    require_neighbors(st, j, k)?;
    let m = st.m();
    if j < m && k < m && !nonzero(st.t_overlap(j, k)) {
        Ok(Order::DInvSq)
    } else {
        Ok(Order::DInv)
    }
}

/// Parameters of `Γ^{S,T}(d)` for one `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxGraph {
    n: usize,
    d: f64,
    neighbors: NeighborSets,
    w_vertex: Vec<f64>,
    w_inner: BTreeMap<(usize, usize), f64>,
    a_inner: BTreeMap<(usize, usize), f64>,
    source_st: Option<StForm>,
}

impl ApproxGraph {
    /// Assemble from raw parameters (e.g. a parsed file). Keys of `w_inner`
    /// and `a_inner` are pairs `(j, k)` with `j < k`; `a_inner` stores
    /// `A_(j,k)`.
    pub fn from_parts(
        d: f64,
        neighbors: NeighborSets,
        w_vertex: Vec<f64>,
        w_inner: BTreeMap<(usize, usize), f64>,
        a_inner: BTreeMap<(usize, usize), f64>,
    ) -> Result<Self> {
        check_d(d)?;
        let n = neighbors.n();
        if w_vertex.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} vertex strengths for n = {n}",
                w_vertex.len()
            )));
        }
        let pairs: BTreeSet<_> = neighbors.pairs().into_iter().collect();
        let w_keys: BTreeSet<_> = w_inner.keys().copied().collect();
        let a_keys: BTreeSet<_> = a_inner.keys().copied().collect();
        if w_keys != pairs || a_keys != pairs {
            return Err(Error::InvalidGraph(
                "inner-edge parameters must be given exactly on the neighbor pairs".into(),
            ));
        }
        let finite = w_vertex
            .iter()
            .chain(w_inner.values())
            .chain(a_inner.values())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite("approximating-graph parameters".into()));
        }
        Ok(Self {
            n,
            d,
            neighbors,
            w_vertex,
            w_inner,
            a_inner,
            source_st: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn neighbors(&self) -> &NeighborSets {
        &self.neighbors
    }

    pub fn w_vertex(&self) -> &[f64] {
        &self.w_vertex
    }

    pub fn w_inner(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.w_inner
    }

    pub fn a_inner(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.a_inner
    }

    pub fn source_st(&self) -> Option<&StForm> {
        self.source_st.as_ref()
    }

    /// Midpoint strength of inner edge `{j,k}` (either order).
    pub fn inner_strength(&self, j: usize, k: usize) -> Option<f64> {
        self.w_inner.get(&(j.min(k), j.max(k))).copied()
    }

    /// `A_(j,k)`, completed antisymmetrically.
    pub fn potential(&self, j: usize, k: usize) -> Option<f64> {
        if j < k {
            self.a_inner.get(&(j, k)).copied()
        } else {
            self.a_inner.get(&(k, j)).map(|a| -a)
        }
    }

    /// Edge numbering of the source coupling (identity if unknown).
    pub fn perm(&self) -> Vec<usize> {
        match &self.source_st {
            Some(st) => st.perm().to_vec(),
            None => (0..self.n).collect(),
        }
    }

    pub fn max_abs_potential(&self) -> f64 {
        self.a_inner.values().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// `3 max{|w_e|, |w_v|}`.
    pub fn max_strength(&self) -> f64 {
        3.0 * self
            .w_inner
            .values()
            .chain(self.w_vertex.iter())
            .fold(0.0_f64, |m, w| m.max(w.abs()))
    }
}

/// Build `Γ^{S,T}(d)`.
pub fn build_approx_graph(st: &StForm, d: f64) -> Result<ApproxGraph> {
    check_d(d)?;
    let neighbors = neighbor_sets(st);
    let w_vertex = (0..st.n())
        .map(|j| vertex_delta_schedule(st, &neighbors, d, j))
        .collect::<Result<Vec<_>>>()?;
    let mut w_inner = BTreeMap::new();
    let mut a_inner = BTreeMap::new();
    for (j, k) in neighbors.pairs() {
        w_inner.insert((j, k), inner_delta_unchecked(st, d, j, k)?);
        a_inner.insert((j, k), magnetic_unchecked(st, d, j, k)?);
    }
    Ok(ApproxGraph {
        n: st.n(),
        d,
        neighbors,
        w_vertex,
        w_inner,
        a_inner,
        source_st: Some(st.clone()),
    })
}
