#![allow(dead_code)]

use qgraph_core::coupling::{named_to_st, CouplingKind, NamedCoupling, StForm};
use qgraph_core::linalg::c;
use qgraph_core::{build_approx_graph, ApproxGraph, CMatrix, C64};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn named(kind: CouplingKind, n: usize) -> StForm {
    named_to_st(&NamedCoupling::new(kind, n).unwrap()).unwrap()
}

pub fn delta3() -> StForm {
    named(CouplingKind::Delta { alpha: 1.0 }, 3)
}

pub fn delta_prime3() -> StForm {
    named(CouplingKind::DeltaPrimeS { beta: 1.0 }, 3)
}

/// Fixed coupling with m = 2, n = 3, complex T and a nontrivial numbering.
pub fn complex_t() -> StForm {
    let s = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.3, -0.2), c(0.3, 0.2), c(0.5, 0.0)]);
    let t = CMatrix::from_row_slice(2, 1, &[c(0.8, 0.6), c(-0.4, 1.1)]);
    StForm::new(vec![2, 0, 1], s, t, 1e-10).unwrap()
}

/// Kirchhoff with a weak δ part and unequal weights.
pub fn kirchhoff_perturbed() -> StForm {
    let s = CMatrix::from_element(1, 1, c(0.1, 0.0));
    let t = CMatrix::from_row_slice(1, 2, &[c(1.1, 0.0), c(0.9, 0.1)]);
    StForm::with_identity_perm(s, t).unwrap()
}

fn entry<R: Rng>(rng: &mut R, zero_prob: f64) -> C64 {
    if rng.random_bool(zero_prob) {
        c(0.0, 0.0)
    } else {
        c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
    }
}

/// Random normalized form with `n` in `n_min..=n_max`; some entries are
/// exactly zero so that sparse neighbor patterns occur.
pub fn random_st<R: Rng>(rng: &mut R, n_min: usize, n_max: usize) -> StForm {
    let n = rng.random_range(n_min..=n_max);
    let m = rng.random_range(0..=n);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut s = CMatrix::zeros(m, m);
    for i in 0..m {
        s[(i, i)] = c(rng.random_range(-2.0..2.0), 0.0);
        for j in i + 1..m {
            let z = entry(rng, 0.2);
            s[(i, j)] = z;
            s[(j, i)] = z.conj();
        }
    }
    let t = CMatrix::from_fn(m, n - m, |_, _| entry(rng, 0.2));
    StForm::new(perm, s, t, 1e-10).unwrap()
}

/// Random approximating graph with at least one inner edge.
pub fn random_approx<R: Rng>(rng: &mut R) -> ApproxGraph {
    loop {
        let st = random_st(rng, 2, 5);
        let d = rng.random_range(0.05..0.5);
        if let Ok(g) = build_approx_graph(&st, d) {
            if !g.neighbors().pairs().is_empty() {
                return g;
            }
        }
    }
}

/// Random approximating graph carrying a nonzero vector potential.
pub fn random_magnetic_approx<R: Rng>(rng: &mut R) -> ApproxGraph {
    loop {
        let g = random_approx(rng);
        if g.max_abs_potential() > 1e-3 {
            return g;
        }
    }
}

/// Identity-numbered form from real row-major `S` and `T`.
pub fn st(s: &[&[f64]], t: &[&[f64]]) -> StForm {
    let m = s.len();
    let cols = t.first().map_or(0, |r| r.len());
    let s = CMatrix::from_fn(m, m, |i, j| c(s[i][j], 0.0));
    let t = CMatrix::from_fn(m, cols, |i, j| c(t[i][j], 0.0));
    StForm::with_identity_perm(s, t).unwrap()
}
