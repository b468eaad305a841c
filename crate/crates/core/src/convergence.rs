//! Sweeps over `d → 0` comparing approximating graphs with the star limit.

use std::fmt;
use std::io::Write;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::approx::build_approx_graph;
use crate::coupling::{ab_from_st, star_scattering, StForm};
use crate::error::{Error, Result};
use crate::linalg::{self, c};
use crate::quadrature::CompositeRule;
use crate::solver::{
    effective_scattering, eigenvalues_above, eigenvalues_compact, EndCondition, GraphPoint,
    GreensFunction, MetricGraphSystem, Truncation,
};
use crate::C64;

/// Relative change above which doubling the quadrature counts as unstable.
pub const QUAD_STABILITY_TOL: f64 = 0.01;
/// Relative perturbation applied to `k` after a resonance.
pub const RESONANCE_SHIFT: f64 = 1e-6;
/// Minimum number of valid points for a rate fit.
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    /// Max over `ks` of `||S_d(k) - S*(k)||_2`.
    Scattering { ks: Vec<f64> },
    /// Hilbert–Schmidt norm of the resolvent difference on the truncated graphs.
    HsResolvent { z: C64, length: f64, quad_n: usize },
    /// Max gap between the first `count` eigenvalues above the floor.
    EigGap { count: usize, length: f64 },
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Scattering { .. } => "scattering",
            Metric::HsResolvent { .. } => "hs",
            Metric::EigGap { .. } => "eig",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub st: StForm,
    pub d_values: Vec<f64>,
    pub metric: Metric,
    /// Recompute the HS metric with doubled quadrature and flag drift.
    pub check_quadrature: bool,
}

/// `d = 2^{-p}` for `p = p0..=p1`.
pub fn dyadic(p0: i32, p1: i32) -> Vec<f64> {
    (p0..=p1).map(|p| 2f64.powi(-p)).collect()
}

impl SweepConfig {
    pub fn new(st: StForm, d_values: Vec<f64>, metric: Metric) -> Result<Self> {
        if let Some(&d) = d_values.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
            return Err(Error::Precondition(format!("d = {d} outside (0, 1]")));
        }
        if d_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Precondition(
                "d values must be strictly decreasing".into(),
            ));
        }
        match &metric {
            Metric::Scattering { ks } if ks.is_empty() || ks.iter().any(|&k| !(k > 0.0)) => {
                return Err(Error::Precondition(
                    "k list must be nonempty and positive".into(),
                ));
            }
            Metric::HsResolvent { length, quad_n, .. } if !(*length > 0.0) || *quad_n == 0 => {
                return Err(Error::Precondition(
                    "HS metric needs L > 0 and quad_n > 0".into(),
                ));
            }
            Metric::EigGap { length, count } if !(*length > 0.0) || *count == 0 => {
                return Err(Error::Precondition(
                    "eigenvalue metric needs L > 0 and count > 0".into(),
                ));
            }
            _ => {}
        }
        Ok(Self {
            st,
            d_values,
            metric,
            check_quadrature: true,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointStatus {
    Ok,
    /// Evaluated after shifting resonant wavenumbers.
    Retried,
    /// Doubling the quadrature changed the value by this relative amount.
    QuadratureUnstable(f64),
    Skipped(String),
}

impl fmt::Display for PointStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointStatus::Ok => write!(f, "ok"),
            PointStatus::Retried => write!(f, "ok_retried_k"),
            PointStatus::QuadratureUnstable(r) => write!(f, "warn_quadrature_unstable({r:.3e})"),
            PointStatus::Skipped(why) => write!(f, "skipped({})", why.replace(',', ";")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub d: f64,
    pub value: Option<f64>,
    pub status: PointStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the log-log fit error.
    pub residual: f64,
    pub used: usize,
    /// Points dropped for a nonpositive metric.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub metric: &'static str,
    pub points: Vec<SweepPoint>,
    /// `None` when fewer than four valid points were available.
    pub fit: Option<RateFit>,
}

impl ConvergenceReport {
    pub fn is_conclusive(&self) -> bool {
        self.fit.is_some()
    }

    pub fn valid(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.value.map(|v| (p.d, v)))
            .collect()
    }

    /// Number of consecutive pairs where the metric fails to decrease.
    pub fn inversions(&self) -> usize {
        self.valid().windows(2).filter(|w| w[1].1 >= w[0].1).count()
    }

    /// `d,metric,status` rows followed by the fit trailer.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "d,metric,status")?;
        for p in &self.points {
            match p.value {
                Some(v) => writeln!(out, "{:.16e},{:.16e},{}", p.d, v, p.status)?,
                None => writeln!(out, "{:.16e},nan,{}", p.d, p.status)?,
            }
        }
        match &self.fit {
            Some(f) => {
                writeln!(out, "slope,{:.16e}", f.slope)?;
                writeln!(out, "intercept,{:.16e}", f.intercept)?;
                writeln!(out, "residual,{:.16e}", f.residual)?;
            }
            None => {
                writeln!(out, "slope,nan")?;
                writeln!(out, "intercept,nan")?;
                writeln!(out, "residual,nan")?;
            }
        }
        Ok(())
    }
}

/// Ordinary least squares of `log metric` against `log d`.
pub fn fit_rate(values: &[(f64, f64)]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .filter(|(d, v)| *d > 0.0 && *v > 0.0)
        .map(|(d, v)| (d.ln(), v.ln()))
        .collect();
    let dropped = values.len() - pts.len();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::Precondition(format!(
            "rate fit needs {MIN_FIT_POINTS} positive points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition(
            "rate fit needs distinct d values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        slope,
        intercept,
        residual,
        used: pts.len(),
        dropped,
    })
}

pub fn metric_scattering(st: &StForm, d: f64, ks: &[f64]) -> Result<f64> {
    let g = build_approx_graph(st, d)?;
    let cp = ab_from_st(st);
    let mut worst: f64 = 0.0;
    for &k in ks {
        let diff = effective_scattering(&g, k)? - star_scattering(&cp, k)?;
        worst = worst.max(linalg::spectral_norm(&diff));
    }
    Ok(worst)
}

fn dirichlet_cut(length: f64) -> Option<Truncation> {
    Some(Truncation {
        length,
        end: EndCondition::Dirichlet,
    })
}

/// Star system of the normalized coupling, edges in normalized numbering.
fn star_system(st: &StForm, length: f64) -> MetricGraphSystem {
    MetricGraphSystem::star(&st.canonical_coupling()).with_truncation(dirichlet_cut(length))
}

fn approx_system(st: &StForm, d: f64, length: f64) -> Result<MetricGraphSystem> {
    Ok(MetricGraphSystem::from_approx(&build_approx_graph(st, d)?)
        .with_truncation(dirichlet_cut(length)))
}

fn nodes_on(
    sys: &MetricGraphSystem,
    edges: std::ops::Range<usize>,
    quad_n: usize,
) -> (Vec<GraphPoint>, Vec<f64>) {
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for e in edges {
        let l = sys.effective_length(e).expect("truncated system");
        let rule = CompositeRule::with_total(0.0, l, quad_n);
        pts.extend(rule.nodes.iter().map(|&s| GraphPoint::new(e, s)));
        wts.extend(rule.weights);
    }
    (pts, wts)
}

/// Hilbert–Schmidt norm of `(H_d - z)^{-1} - (H* - z)^{-1} ⊕ 0` on graphs
/// truncated at `length` with Dirichlet ends.
pub fn metric_hs_resolvent(st: &StForm, d: f64, z: C64, length: f64, quad_n: usize) -> Result<f64> {
    let n = st.n();
    let star = star_system(st, length);
    let approx = approx_system(st, d, length)?;
    let g_star = GreensFunction::new(&star, z)?;
    let g_d = GreensFunction::new(&approx, z)?;

    let (outer, w_outer) = nodes_on(&approx, 0..n, quad_n);
    let (inner, w_inner) = nodes_on(&approx, n..approx.edges().len(), quad_n);
    let n_outer = outer.len();
    let all: Vec<GraphPoint> = outer.iter().chain(&inner).copied().collect();
    let w_all: Vec<f64> = w_outer.iter().chain(&w_inner).copied().collect();

    let sample_d = g_d.sampler(&all);
    let sample_star = g_star.sampler(&outer);
    let mut total = 0.0;
    for (iy, &y) in all.iter().enumerate() {
        let col_d = sample_d.column(y);
        let col_star = if iy < n_outer {
            Some(sample_star.column(y))
        } else {
            None
        };
        let mut acc = 0.0;
        for (ix, gd) in col_d.iter().enumerate() {
            let diff = match (&col_star, ix < n_outer) {
                (Some(cs), true) => *gd - cs[ix],
                _ => *gd,
            };
            acc += w_all[ix] * diff.norm_sqr();
        }
        total += w_all[iy] * acc;
    }
    Ok(total.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsEstimate {
    pub value: f64,
    pub doubled: f64,
    pub relative_change: f64,
}

impl HsEstimate {
    pub fn is_stable(&self) -> bool {
        self.relative_change <= QUAD_STABILITY_TOL
    }
}

/// HS metric at `quad_n` and `2 quad_n` nodes per edge piece.
pub fn hs_resolvent_checked(
    st: &StForm,
    d: f64,
    z: C64,
    length: f64,
    quad_n: usize,
) -> Result<HsEstimate> {
    let value = metric_hs_resolvent(st, d, z, length, quad_n)?;
    let doubled = metric_hs_resolvent(st, d, z, length, 2 * quad_n)?;
    let relative_change = (value - doubled).abs() / doubled.abs().max(f64::MIN_POSITIVE);
    Ok(HsEstimate {
        value,
        doubled,
        relative_change,
    })
}

/// Eigenvalue floor excluding the deep bound states of the inner edges.
pub fn eigen_floor(st: &StForm, length: f64) -> Result<f64> {
    let lowest = eigenvalues_compact(&star_system(st, length), 1)?[0];
    Ok(-10.0 * 1f64.max(-lowest))
}

pub fn metric_eigengap(st: &StForm, d: f64, count: usize, length: f64) -> Result<f64> {
    let floor = eigen_floor(st, length)?;
    let star = eigenvalues_above(&star_system(st, length), floor, count)?;
    let approx = eigenvalues_above(&approx_system(st, d, length)?, floor, count)?;
    Ok(star
        .iter()
        .zip(&approx)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

fn evaluate(cfg: &SweepConfig, d: f64) -> SweepPoint {
    let result = match &cfg.metric {
        Metric::Scattering { ks } => match metric_scattering(&cfg.st, d, ks) {
            Err(Error::ResonantK { .. }) => {
                let shifted: Vec<f64> = ks.iter().map(|k| k * (1.0 + RESONANCE_SHIFT)).collect();
                metric_scattering(&cfg.st, d, &shifted).map(|v| (v, PointStatus::Retried))
            }
            other => other.map(|v| (v, PointStatus::Ok)),
        },
        Metric::HsResolvent { z, length, quad_n } => {
            if cfg.check_quadrature {
                hs_resolvent_checked(&cfg.st, d, *z, *length, *quad_n).map(|e| {
                    let status = if e.is_stable() {
                        PointStatus::Ok
                    } else {
                        PointStatus::QuadratureUnstable(e.relative_change)
                    };
                    (e.value, status)
                })
            } else {
                metric_hs_resolvent(&cfg.st, d, *z, *length, *quad_n).map(|v| (v, PointStatus::Ok))
            }
        }
        Metric::EigGap { count, length } => {
            metric_eigengap(&cfg.st, d, *count, *length).map(|v| (v, PointStatus::Ok))
        }
    };
    match result {
        Ok((v, status)) => SweepPoint {
            d,
            value: Some(v),
            status,
        },
        Err(e) => SweepPoint {
            d,
            value: None,
            status: PointStatus::Skipped(e.to_string()),
        },
    }
}

/// Evaluate the metric at every `d` (in parallel when enabled) and fit the rate.
pub fn run_sweep(cfg: &SweepConfig) -> ConvergenceReport {
    #[cfg(feature = "parallel")]
    let points: Vec<SweepPoint> = cfg.d_values.par_iter().map(|&d| evaluate(cfg, d)).collect();
    #[cfg(not(feature = "parallel"))]
    let points: Vec<SweepPoint> = cfg.d_values.iter().map(|&d| evaluate(cfg, d)).collect();

    let valid: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.value.map(|v| (p.d, v)))
        .collect();
    let fit = fit_rate(&valid).ok();
    ConvergenceReport {
        metric: cfg.metric.name(),
        points,
        fit,
    }
}

/// Fitted HS slopes for several truncation lengths.
pub fn truncation_slopes(cfg: &SweepConfig, lengths: &[f64]) -> Vec<(f64, Option<f64>)> {
    lengths
        .iter()
        .map(|&l| {
            let metric = match &cfg.metric {
                Metric::HsResolvent { z, quad_n, .. } => Metric::HsResolvent {
                    z: *z,
                    length: l,
                    quad_n: *quad_n,
                },
                Metric::EigGap { count, .. } => Metric::EigGap {
                    count: *count,
                    length: l,
                },
                m => m.clone(),
            };
            let report = run_sweep(&SweepConfig {
                metric,
                ..cfg.clone()
            });
            (l, report.fit.map(|f| f.slope))
        })
        .collect()
}

/// Largest pairwise difference of the given slopes.
pub fn slope_spread(slopes: &[f64]) -> f64 {
    let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if slopes.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Default resolvent point.
pub fn default_z() -> C64 {
    c(-1.0, 0.0)
}
