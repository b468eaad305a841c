//! JSON and CSV formats.
//!
//! Complex numbers are `{"re": .., "im": ..}` objects and matrices are
//! arrays of rows. Edge indices are 1-based in every file format.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde_json::{json, Map, Value};

use crate::approx::{ApproxGraph, NeighborSets};
use crate::budget::ExponentBudget;
use crate::coupling::{
    named_to_st, st_from_ab, validate_coupling, CouplingKind, NamedCoupling, StForm, VertexCoupling,
};
use crate::error::{Error, Result};
use crate::{CMatrix, C64};

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

pub fn complex_to_json(z: C64) -> Value {
    json!({"re": z.re, "im": z.im})
}

pub fn complex_from_json(v: &Value) -> Result<C64> {
    let get = |key: &str| {
        v.get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| parse_err(format!("complex number needs numeric \"{key}\"")))
    };
    Ok(C64::new(get("re")?, get("im")?))
}

pub fn matrix_to_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect()))
            .collect(),
    )
}

/// Parse a `rows × cols` matrix; with `rows == 0` an empty array is expected.
pub fn matrix_from_json(v: &Value, rows: usize, cols: usize, name: &str) -> Result<CMatrix> {
    let arr = v
        .as_array()
        .ok_or_else(|| parse_err(format!("\"{name}\" must be an array of rows")))?;
    if arr.len() != rows {
        return Err(parse_err(format!(
            "\"{name}\" has {} rows, expected {rows}",
            arr.len()
        )));
    }
    let mut m = CMatrix::zeros(rows, cols);
    for (i, row) in arr.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| parse_err(format!("row {} of \"{name}\" is not an array", i + 1)))?;
        if row.len() != cols {
            return Err(parse_err(format!(
                "row {} of \"{name}\" has {} entries, expected {cols}",
                i + 1,
                row.len()
            )));
        }
        for (j, z) in row.iter().enumerate() {
            m[(i, j)] = complex_from_json(z)?;
        }
    }
    Ok(m)
}

fn get_usize(v: &Value, key: &str) -> Result<usize> {
    v.get(key)
        .and_then(Value::as_u64)
        .map(|x| x as usize)
        .ok_or_else(|| parse_err(format!("\"{key}\" must be a nonnegative integer")))
}

fn get_f64(v: &Value, key: &str) -> Result<f64> {
    v.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| parse_err(format!("\"{key}\" must be a number")))
}

/// Any of the accepted coupling descriptions.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingInput {
    Ab(VertexCoupling),
    St(StForm),
    Named(NamedCoupling),
}

impl CouplingInput {
    /// Normalized form; `(A, B)` input is validated first.
    pub fn to_st(&self, tol: f64) -> Result<StForm> {
        match self {
            CouplingInput::Ab(cp) => {
                validate_coupling(cp, tol).into_result()?;
                st_from_ab(cp, tol)
            }
            CouplingInput::St(st) => Ok(st.clone()),
            CouplingInput::Named(nc) => named_to_st(nc),
        }
    }
}

pub fn parse_coupling(text: &str, tol: f64) -> Result<CouplingInput> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| parse_err(format!("invalid JSON: {e}")))?;
    coupling_from_json(&v, tol)
}

pub fn coupling_from_json(v: &Value, tol: f64) -> Result<CouplingInput> {
    if let Some(st) = v.get("st") {
        return st_body_from_json(st, tol).map(CouplingInput::St);
    }
    if let Some(kind) = v.get("kind") {
        let n = get_usize(v, "n")?;
        let kind = match kind.as_str() {
            Some("delta_prime_s") => CouplingKind::DeltaPrimeS {
                beta: get_f64(v, "beta")?,
            },
            Some("delta") => CouplingKind::Delta {
                alpha: get_f64(v, "alpha")?,
            },
            Some("kirchhoff") => CouplingKind::Kirchhoff,
            Some("dirichlet") => CouplingKind::Dirichlet,
            other => return Err(parse_err(format!("unknown coupling kind {other:?}"))),
        };
        return NamedCoupling::new(kind, n)
            .map(CouplingInput::Named)
            .map_err(as_parse);
    }
    if v.get("A").is_some() || v.get("B").is_some() {
        let n = get_usize(v, "n")?;
        let a = matrix_from_json(v.get("A").unwrap_or(&Value::Null), n, n, "A")?;
        let b = matrix_from_json(v.get("B").unwrap_or(&Value::Null), n, n, "B")?;
        return VertexCoupling::new(a, b)
            .map(CouplingInput::Ab)
            .map_err(as_parse);
    }
    Err(parse_err(
        "expected an object with \"A\"/\"B\", \"st\", or \"kind\"",
    ))
}

/// Structural problems in otherwise well-formed JSON are parse errors;
/// violated coupling invariants are not.
fn as_parse(e: Error) -> Error {
    match e {
        Error::InvalidCoupling(_) => e,
        other => parse_err(other.to_string()),
    }
}

pub fn coupling_to_json(cp: &VertexCoupling) -> Value {
    json!({"n": cp.n(), "A": matrix_to_json(cp.a()), "B": matrix_to_json(cp.b())})
}

/// `{"st": {...}}` with a 1-based permutation.
pub fn st_to_json(st: &StForm) -> Value {
    json!({"st": st_body_to_json(st)})
}

fn st_body_to_json(st: &StForm) -> Value {
    json!({
        "m": st.m(),
        "perm": st.perm().iter().map(|p| p + 1).collect::<Vec<_>>(),
        "S": matrix_to_json(st.s()),
        "T": matrix_to_json(st.t()),
    })
}

/// Parse `{"st": {...}}` as written by [`st_to_json`], or the bare body.
pub fn st_from_json(v: &Value, tol: f64) -> Result<StForm> {
    st_body_from_json(v.get("st").unwrap_or(v), tol)
}

fn st_body_from_json(v: &Value, tol: f64) -> Result<StForm> {
    let m = get_usize(v, "m")?;
    let perm = v
        .get("perm")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("\"perm\" must be an array"))?
        .iter()
        .map(|p| match p.as_u64() {
            Some(p) if p >= 1 => Ok(p as usize - 1),
            _ => Err(parse_err("\"perm\" entries are 1-based integers")),
        })
        .collect::<Result<Vec<_>>>()?;
    let n = perm.len();
    if m > n {
        return Err(parse_err(format!("m = {m} exceeds n = {n}")));
    }
    let s = matrix_from_json(v.get("S").unwrap_or(&Value::Null), m, m, "S")?;
    let t = matrix_from_json(v.get("T").unwrap_or(&Value::Null), m, n - m, "T")?;
    StForm::new(perm, s, t, tol).map_err(as_parse)
}

fn pair_key(j: usize, k: usize) -> String {
    format!("{}-{}", j + 1, k + 1)
}

fn parse_pair_key(key: &str) -> Result<(usize, usize)> {
    let bad = || {
        parse_err(format!(
            "inner-edge key \"{key}\" must be \"j-k\" with 1 <= j < k"
        ))
    };
    let (j, k) = key.split_once('-').ok_or_else(bad)?;
    let j: usize = j.parse().map_err(|_| bad())?;
    let k: usize = k.parse().map_err(|_| bad())?;
    if j == 0 || j >= k {
        return Err(bad());
    }
    Ok((j - 1, k - 1))
}

fn parse_index_key(key: &str, n: usize) -> Result<usize> {
    match key.parse::<usize>() {
        Ok(j) if (1..=n).contains(&j) => Ok(j - 1),
        _ => Err(parse_err(format!(
            "vertex key \"{key}\" must be in 1..={n}"
        ))),
    }
}

pub fn approx_to_json(g: &ApproxGraph) -> Value {
    let n = g.n();
    let neighbors: Map<String, Value> = (0..n)
        .map(|j| {
            (
                format!("{}", j + 1),
                json!(g
                    .neighbors()
                    .get(j)
                    .iter()
                    .map(|k| k + 1)
                    .collect::<Vec<_>>()),
            )
        })
        .collect();
    let w_vertex: Map<String, Value> = (0..n)
        .map(|j| (format!("{}", j + 1), json!(g.w_vertex()[j])))
        .collect();
    let w_inner: Map<String, Value> = g
        .w_inner()
        .iter()
        .map(|(&(j, k), w)| (pair_key(j, k), json!(w)))
        .collect();
    let a_inner: Map<String, Value> = g
        .a_inner()
        .iter()
        .map(|(&(j, k), a)| (pair_key(j, k), json!(a)))
        .collect();
    json!({
        "n": n,
        "d": g.d(),
        "neighbors": neighbors,
        "w_vertex": w_vertex,
        "w_inner": w_inner,
        "a_inner": a_inner,
    })
}

fn object<'a>(v: &'a Value, key: &str) -> Result<&'a Map<String, Value>> {
    v.get(key)
        .and_then(Value::as_object)
        .ok_or_else(|| parse_err(format!("\"{key}\" must be an object")))
}

pub fn approx_from_json(v: &Value) -> Result<ApproxGraph> {
    let n = get_usize(v, "n")?;
    let d = get_f64(v, "d")?;
    let mut sets = vec![BTreeSet::new(); n];
    for (key, list) in object(v, "neighbors")? {
        let j = parse_index_key(key, n)?;
        for k in list
            .as_array()
            .ok_or_else(|| parse_err("neighbor lists must be arrays"))?
        {
            match k.as_u64() {
                Some(k) if (1..=n as u64).contains(&k) => {
                    sets[j].insert(k as usize - 1);
                }
                _ => return Err(parse_err(format!("neighbor of {key} out of range"))),
            }
        }
    }
    let nbrs = NeighborSets::from_sets(sets).map_err(|e| parse_err(e.to_string()))?;
    let mut w_vertex = vec![None; n];
    for (key, w) in object(v, "w_vertex")? {
        let j = parse_index_key(key, n)?;
        w_vertex[j] = Some(
            w.as_f64()
                .ok_or_else(|| parse_err("vertex strengths must be numbers"))?,
        );
    }
    let w_vertex = w_vertex
        .into_iter()
        .enumerate()
        .map(|(j, w)| w.ok_or_else(|| parse_err(format!("missing w_vertex for {}", j + 1))))
        .collect::<Result<Vec<_>>>()?;
    let pair_map = |key: &str| -> Result<BTreeMap<(usize, usize), f64>> {
        object(v, key)?
            .iter()
            .map(|(k, x)| {
                Ok((
                    parse_pair_key(k)?,
                    x.as_f64()
                        .ok_or_else(|| parse_err(format!("{key} values must be numbers")))?,
                ))
            })
            .collect()
    };
    let w_inner = pair_map("w_inner")?;
    let a_inner = pair_map("a_inner")?;
    ApproxGraph::from_parts(d, nbrs, w_vertex, w_inner, a_inner)
        .map_err(|e| parse_err(e.to_string()))
}

pub fn budget_to_json(b: &ExponentBudget) -> Value {
    json!({
        "alpha": b.alpha,
        "exponents": {"form": b.form, "operator": b.operator, "combined": b.combined},
        "optimal_alpha": b.optimal_alpha,
    })
}

/// `index,lambda` rows with 1-based indices.
pub fn write_spectrum_csv<W: Write>(eigenvalues: &[f64], mut out: W) -> std::io::Result<()> {
    writeln!(out, "index,lambda")?;
    for (i, lam) in eigenvalues.iter().enumerate() {
        writeln!(out, "{},{:.16e}", i + 1, lam)?;
    }
    Ok(())
}
