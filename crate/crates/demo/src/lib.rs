//! Browser bindings. Every export returns a JSON string; failures are
//! reported as `{"error": "..."}` so the page never has to catch.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use qgraph_core::budget::exponent_budget;
use qgraph_core::convergence::{dyadic, fit_rate, metric_scattering};
use qgraph_core::coupling::{named_to_st, CouplingKind, NamedCoupling};
use qgraph_core::io::{approx_to_json, budget_to_json};
use qgraph_core::{build_approx_graph, Result, StForm};

fn named_st(kind: &str, n: usize, param: f64) -> Result<StForm> {
    let kind = match kind {
        "delta" => CouplingKind::Delta { alpha: param },
        "delta_prime_s" => CouplingKind::DeltaPrimeS { beta: param },
        "kirchhoff" => CouplingKind::Kirchhoff,
        "dirichlet" => CouplingKind::Dirichlet,
        other => {
            return Err(qgraph_core::Error::Parse(format!(
                "unknown coupling kind {other:?}"
            )))
        }
    };
    named_to_st(&NamedCoupling::new(kind, n)?)
}

fn respond(v: Result<Value>) -> String {
    match v {
        Ok(v) => v.to_string(),
        Err(e) => json!({"error": e.to_string()}).to_string(),
    }
}

/// Approximating-graph parameters for a named coupling at one `d`.
#[wasm_bindgen]
pub fn schedules(kind: &str, n: usize, param: f64, d: f64) -> String {
    respond(
        named_st(kind, n, param)
            .and_then(|st| build_approx_graph(&st, d))
            .map(|g| approx_to_json(&g)),
    )
}

/// Scattering-matrix distance to the star limit at `k` for `d = 2^-p`,
/// `p0 <= p <= p1`, with the fitted log-log slope.
#[wasm_bindgen]
pub fn scattering_convergence(
    kind: &str,
    n: usize,
    param: f64,
    k: f64,
    p0: i32,
    p1: i32,
) -> String {
    respond(named_st(kind, n, param).map(|st| {
        let points: Vec<Value> = dyadic(p0, p1)
            .into_iter()
            .map(|d| match metric_scattering(&st, d, &[k]) {
                Ok(v) => json!({"d": d, "metric": v}),
                Err(e) => json!({"d": d, "metric": null, "error": e.to_string()}),
            })
            .collect();
        let valid: Vec<(f64, f64)> = points
            .iter()
            .filter_map(|p| Some((p["d"].as_f64()?, p["metric"].as_f64()?)))
            .collect();
        let fit = fit_rate(&valid).ok();
        json!({
            "points": points,
            "slope": fit.map(|f| f.slope),
            "residual": fit.map(|f| f.residual),
        })
    }))
}

/// Exponent budget for `d = ε^α`.
#[wasm_bindgen]
pub fn budget(alpha: f64, vanishing_overlaps: bool) -> String {
    respond(exponent_budget(alpha, vanishing_overlaps).map(|b| {
        let mut v = budget_to_json(&b);
        v["optimal_combined"] = json!(b.optimal_combined);
        v
    }))
}
