//! Explicit constants and exponents for the graph-to-manifold step.
//!
//! Leading constants that depend on the vertex and edge geometry are set to
//! one; [`delta_eps`] is an order-of-magnitude estimator, and only the
//! exponents are meaningful in absolute terms.

use num_rational::Ratio;
use rand::Rng;

use crate::approx::ApproxGraph;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::C64;

/// `C_{η,e} = (1 + 2/η)|A_e|² + max{4 w̄_e²/η, 2 w̄_e/d}`.
pub fn c_eta_edge(eta: f64, d: f64, abs_a: f64, wbar: f64) -> f64 {
    (1.0 + 2.0 / eta) * abs_a * abs_a + (4.0 * wbar * wbar / eta).max(2.0 * wbar / d)
}

/// Per-edge data entering the relative form bound.
#[derive(Debug, Clone, PartialEq)]
pub struct FormBoundInputs {
    pub d: f64,
    /// `|A_e|` for each inner edge.
    pub abs_a: Vec<f64>,
    /// `w̄_e = |w_e| + |w_j|/|N_j| + |w_k|/|N_k|` for each inner edge.
    pub wbar: Vec<f64>,
    pub max_a: f64,
    /// `3 max_{e,v} {|w_e|, |w_v|}`
    pub max_w: f64,
}

impl FormBoundInputs {
    pub fn new(d: f64, abs_a: Vec<f64>, wbar: Vec<f64>, max_w: f64) -> Result<Self> {
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::Precondition(format!("d = {d} outside (0, 1]")));
        }
        if abs_a.len() != wbar.len() {
            return Err(Error::Dimension("one |A_e| and one w̄_e per edge".into()));
        }
        if abs_a
            .iter()
            .chain(&wbar)
            .chain([&max_w])
            .any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return Err(Error::Precondition(
                "edge data must be finite and nonnegative".into(),
            ));
        }
        let max_a = abs_a.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            d,
            abs_a,
            wbar,
            max_a,
            max_w,
        })
    }

    pub fn from_graph(g: &ApproxGraph) -> Self {
        let nb = g.neighbors();
        let wv = g.w_vertex();
        let (abs_a, wbar) = nb
            .pairs()
            .into_iter()
            .map(|(j, k)| {
                let a = g.potential(j, k).expect("inner edge").abs();
                let we = g.inner_strength(j, k).expect("inner edge").abs();
                (
                    a,
                    we + wv[j].abs() / nb.degree(j) as f64 + wv[k].abs() / nb.degree(k) as f64,
                )
            })
            .unzip();
        Self::new(g.d(), abs_a, wbar, g.max_strength()).expect("graph data is valid")
    }

    /// `C_η = max_e C_{η,e}` (zero without inner edges).
    pub fn c_eta(&self, eta: f64) -> f64 {
        self.abs_a
            .iter()
            .zip(&self.wbar)
            .map(|(&a, &w)| c_eta_edge(eta, self.d, a, w))
            .fold(0.0, f64::max)
    }
}

/// Geometry constants of one vertex block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexGeometry {
    pub vol: f64,
    /// `vol X_v / vol ∂X_v`
    pub c_vol: f64,
    pub big_c: f64,
    pub small_c: f64,
}

impl Default for VertexGeometry {
    fn default() -> Self {
        Self {
            vol: 1.0,
            c_vol: 1.0,
            big_c: 1.0,
            small_c: 1.0,
        }
    }
}

impl VertexGeometry {
    pub fn validate(&self) -> Result<()> {
        if [self.vol, self.c_vol, self.big_c, self.small_c]
            .iter()
            .all(|x| *x > 0.0 && x.is_finite())
        {
            Ok(())
        } else {
            Err(Error::Precondition(
                "vertex geometry constants must be positive".into(),
            ))
        }
    }
}

fn check_geometry(geom: &[VertexGeometry], w: &[f64]) -> Result<()> {
    if geom.is_empty() || geom.len() != w.len() {
        return Err(Error::Dimension(
            "one geometry entry per vertex strength, at least one".into(),
        ));
    }
    geom.iter().try_for_each(VertexGeometry::validate)
}

/// `ε₀ = min_v vol X_v / (|w_v| C(v))`; vertices with `w_v = 0` impose no
/// restriction.
pub fn eps0_manifold(geom: &[VertexGeometry], w: &[f64]) -> Result<f64> {
    check_geometry(geom, w)?;
    Ok(geom
        .iter()
        .zip(w)
        .map(|(g, w)| g.vol / (w.abs() * g.big_c))
        .fold(f64::INFINITY, f64::min))
}

/// Alternative threshold `min_v η c(v) / |w_v|`.
pub fn eps0_statement(geom: &[VertexGeometry], w: &[f64], eta: f64) -> Result<f64> {
    check_geometry(geom, w)?;
    Ok(geom
        .iter()
        .zip(w)
        .map(|(g, w)| eta * g.small_c / w.abs())
        .fold(f64::INFINITY, f64::min))
}

/// `(ε/d)^{1/2} (maxW + 1) + ε^{1/2} / d` with unit constants.
pub fn delta_eps(eps: f64, d: f64, max_w: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= d && d <= 1.0) {
        return Err(Error::Precondition(format!(
            "need 0 < ε <= d <= 1, got ε = {eps}, d = {d}"
        )));
    }
    Ok((eps / d).sqrt() * (max_w + 1.0) + eps.sqrt() / d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentBudget {
    pub alpha: f64,
    pub vanishing_overlaps: bool,
    pub form: f64,
    pub operator: f64,
    pub combined: f64,
    pub optimal_alpha: f64,
    pub optimal_combined: f64,
}

/// Coefficients `(form, operator)` of α in the exponents `(1 - cα)/2`.
fn slopes(vanishing_overlaps: bool) -> (i64, i64) {
    if vanishing_overlaps {
        (3, 7)
    } else {
        (5, 13)
    }
}

/// Exponents for `d = ε^α`. The admissible range is `0 < α < 1/13`, or
/// `1/7` when the inner-edge overlaps vanish.
pub fn exponent_budget(alpha: f64, vanishing_overlaps: bool) -> Result<ExponentBudget> {
    let (cf, co) = slopes(vanishing_overlaps);
    if !(alpha > 0.0 && alpha < 1.0 / co as f64) {
        return Err(Error::Precondition(format!(
            "alpha = {alpha} outside (0, 1/{co})"
        )));
    }
    let optimal_alpha = 1.0 / (co + 1) as f64;
    Ok(ExponentBudget {
        alpha,
        vanishing_overlaps,
        form: (1.0 - cf as f64 * alpha) / 2.0,
        operator: (1.0 - co as f64 * alpha) / 2.0,
        combined: (1.0 - co as f64 * alpha).min(alpha) / 2.0,
        optimal_alpha,
        optimal_combined: optimal_alpha / 2.0,
    })
}

/// [`ExponentBudget`] in exact rational arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactExponents {
    pub alpha: Ratio<i64>,
    pub form: Ratio<i64>,
    pub operator: Ratio<i64>,
    pub combined: Ratio<i64>,
    pub optimal_alpha: Ratio<i64>,
    pub optimal_combined: Ratio<i64>,
}

pub fn exponent_budget_exact(
    alpha: Ratio<i64>,
    vanishing_overlaps: bool,
) -> Result<ExactExponents> {
    let (cf, co) = slopes(vanishing_overlaps);
    let one = Ratio::from_integer(1);
    let two = Ratio::from_integer(2);
    if !(alpha > Ratio::from_integer(0) && alpha < Ratio::new(1, co)) {
        return Err(Error::Precondition(format!(
            "alpha = {alpha} outside (0, 1/{co})"
        )));
    }
    let operator_base = one - alpha * co;
    let optimal_alpha = optimal_alpha_exact(vanishing_overlaps);
    Ok(ExactExponents {
        alpha,
        form: (one - alpha * cf) / two,
        operator: operator_base / two,
        combined: operator_base.min(alpha) / two,
        optimal_alpha,
        optimal_combined: optimal_alpha / two,
    })
}

/// The α maximizing `min{1 - cα, α}`, i.e. the solution of `1 - cα = α`.
pub fn optimal_alpha_exact(vanishing_overlaps: bool) -> Ratio<i64> {
    let (_, co) = slopes(vanishing_overlaps);
    Ratio::new(1, co + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `|h - d| <= η d + C_η ||f||²`
    Relative,
    /// `d <= 2 (h + C_{1/2} ||f||²)`
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormViolation {
    pub sample: usize,
    pub kind: BoundKind,
    pub lhs: f64,
    pub rhs: f64,
}

impl FormViolation {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormBoundReport {
    pub samples: usize,
    pub eta: f64,
    pub c_eta: f64,
    pub c_half: f64,
    pub violations: Vec<FormViolation>,
    /// Largest `lhs / rhs` seen for the relative bound.
    pub worst_ratio: f64,
}

impl FormBoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Nodes per segment of the composite rule used for sampled forms.
pub const FORM_QUAD_NODES: usize = 32;
/// Segments of each piecewise cubic on an outer edge.
const OUTER_SEGMENTS: usize = 4;
/// Support length of test functions on the outer half-lines.
const OUTER_SUPPORT: f64 = 1.0;

/// Cubic Hermite piece on `[x0, x1]` with values and slopes at the ends.
#[derive(Debug, Clone, Copy)]
struct Piece {
    x0: f64,
    x1: f64,
    v: [C64; 2],
    s: [C64; 2],
}

impl Piece {
    fn eval(&self, x: f64) -> (C64, C64) {
        let h = self.x1 - self.x0;
        let t = (x - self.x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let f = self.v[0] * h00 + self.s[0] * (h10 * h) + self.v[1] * h01 + self.s[1] * (h11 * h);
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        let df = self.v[0] * d00 + self.s[0] * d10 + self.v[1] * d01 + self.s[1] * d11;
        (f, df)
    }
}

/// `(∫|f' + iAf|², ∫|f'|², ∫|f|²)` over a chain of pieces.
fn piece_integrals(pieces: &[Piece], a: f64, rule: &(Vec<f64>, Vec<f64>)) -> (f64, f64, f64) {
    let (mut mag, mut free, mut norm) = (0.0, 0.0, 0.0);
    for p in pieces {
        let half = 0.5 * (p.x1 - p.x0);
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let s = p.x0 + half * (x + 1.0);
            let (f, df) = p.eval(s);
            let wt = w * half;
            mag += wt * (df + C64::new(0.0, a) * f).norm_sqr();
            free += wt * df.norm_sqr();
            norm += wt * f.norm_sqr();
        }
    }
    (mag, free, norm)
}

fn random_c64<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
}

/// Sampled check of the relative form bound on an approximating graph.
///
/// Test functions are continuous piecewise cubics with random complex nodal
/// values and slopes, supported in `[0, 1]` on the outer edges. The inner
/// edge `{j,k}` is parametrized by `[-d, d]` and carries `w_e` at its
/// midpoint and `w_j/|N_j|`, `w_k/|N_k|` at its ends; outer edges carry the
/// free form only.
pub fn verify_form_bound<R: Rng + ?Sized>(
    g: &ApproxGraph,
    eta: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<FormBoundReport> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Precondition(format!("eta = {eta} must be positive")));
    }
    let inputs = FormBoundInputs::from_graph(g);
    let c_eta = inputs.c_eta(eta);
    let c_half = inputs.c_eta(0.5);
    let rule = gauss_legendre(FORM_QUAD_NODES);
    let n = g.n();
    let d = g.d();
    let nb = g.neighbors();
    let pairs = nb.pairs();
    let wv = g.w_vertex();

    let mut violations = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for sample in 0..n_samples {
        // Vary the balance between slopes and values so that both the
        // kinetic and the point terms dominate in some samples.
        let slope_scale = 10f64.powf(rng.random_range(-1.0..1.0)) / d.sqrt();
        let value_scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let vertex_vals: Vec<C64> = (0..n).map(|_| random_c64(rng, value_scale)).collect();

        let (mut h, mut free, mut norm) = (0.0, 0.0, 0.0);
        for &v0 in &vertex_vals {
            let mut nodes: Vec<C64> = vec![v0];
            nodes.extend((1..OUTER_SEGMENTS).map(|_| random_c64(rng, value_scale)));
            nodes.push(C64::new(0.0, 0.0));
            let mut slopes_: Vec<C64> = (0..OUTER_SEGMENTS)
                .map(|_| random_c64(rng, value_scale))
                .collect();
            slopes_.push(C64::new(0.0, 0.0));
            let step = OUTER_SUPPORT / OUTER_SEGMENTS as f64;
            let pieces: Vec<Piece> = (0..OUTER_SEGMENTS)
                .map(|i| Piece {
                    x0: i as f64 * step,
                    x1: (i + 1) as f64 * step,
                    v: [nodes[i], nodes[i + 1]],
                    s: [slopes_[i], slopes_[i + 1]],
                })
                .collect();
            let (_, fr, nm) = piece_integrals(&pieces, 0.0, &rule);
            h += fr;
            free += fr;
            norm += nm;
        }
        for &(j, k) in &pairs {
            let a = g.potential(j, k).expect("inner edge");
            let we = g.inner_strength(j, k).expect("inner edge");
            let mid = random_c64(rng, value_scale);
            let sl: Vec<C64> = (0..3)
                .map(|_| random_c64(rng, value_scale * slope_scale))
                .collect();
            let pieces = [
                Piece {
                    x0: -d,
                    x1: 0.0,
                    v: [vertex_vals[j], mid],
                    s: [sl[0], sl[1]],
                },
                Piece {
                    x0: 0.0,
                    x1: d,
                    v: [mid, vertex_vals[k]],
                    s: [sl[1], sl[2]],
                },
            ];
            let (mag, fr, nm) = piece_integrals(&pieces, a, &rule);
            h += mag
                + we * mid.norm_sqr()
                + wv[j] / nb.degree(j) as f64 * vertex_vals[j].norm_sqr()
                + wv[k] / nb.degree(k) as f64 * vertex_vals[k].norm_sqr();
            free += fr;
            norm += nm;
        }

        // rounding slack relative to the magnitudes involved
        let slack = 1e-10 * (h.abs() + free + c_eta * norm);
        let lhs = (h - free).abs();
        let rhs = eta * free + c_eta * norm;
        worst_ratio = worst_ratio.max(if rhs > 0.0 { lhs / rhs } else { 0.0 });
        if lhs > rhs + slack {
            violations.push(FormViolation {
                sample,
                kind: BoundKind::Relative,
                lhs,
                rhs,
            });
        }
        let rhs_lower = 2.0 * (h + c_half * norm);
        if free > rhs_lower + slack {
            violations.push(FormViolation {
                sample,
                kind: BoundKind::Lower,
                lhs: free,
                rhs: rhs_lower,
            });
        }
    }
    Ok(FormBoundReport {
        samples: n_samples,
        eta,
        c_eta,
        c_half,
        violations,
        worst_ratio,
    })
}
