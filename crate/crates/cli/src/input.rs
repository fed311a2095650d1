//! JSON input files: systems, tuples, points, simulation inputs and
//! subspace bases. Matrices are row-major arrays whose entries are numbers,
//! `[re, im]` pairs or expression strings over the parameters.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde_json::Value;

use mdlsys::combinatorics::{MultiIndex, Word};
use mdlsys::numerics::{CMat, CVec};
use mdlsys::spaces::{arveson_shift, right_shift, BallPoly, FockPoly};
use mdlsys::systems::{InputMap, LatticeInputMap, OutputPair, SystemRealization};

use crate::error::CliError;
use crate::expr::{self, Params};

pub struct Document {
    pub path: String,
    pub value: Value,
}

pub fn read(path: &str) -> Result<Document, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })?;
    let value = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(Document {
        path: path.into(),
        value,
    })
}

fn bad(doc: &Document, what: &str) -> CliError {
    CliError::Input(format!("{}: {what}", doc.path))
}

/// Parameters declared in the file, overridden by `overrides`.
pub fn params(doc: &Document, overrides: &[(String, String)]) -> Result<Params, CliError> {
    let mut out = Params::new();
    if let Some(map) = doc.value.get("params") {
        let map = map
            .as_object()
            .ok_or_else(|| bad(doc, "\"params\" must be an object"))?;
        for (k, v) in map {
            let z = scalar(v, &out).map_err(|e| bad(doc, &format!("param {k}: {e}")))?;
            out.insert(k.clone(), z);
        }
    }
    for (k, text) in overrides {
        let z = expr::eval(text, &out)?;
        out.insert(k.clone(), z);
    }
    Ok(out)
}

pub fn scalar(v: &Value, params: &Params) -> Result<Complex64, CliError> {
    match v {
        Value::Number(n) => Ok(Complex64::new(n.as_f64().unwrap_or(f64::NAN), 0.0)),
        Value::String(s) => expr::eval(s, params),
        Value::Array(pair) if pair.len() == 2 => {
            let re = scalar(&pair[0], params)?;
            let im = scalar(&pair[1], params)?;
            Ok(re + Complex64::new(0.0, 1.0) * im)
        }
        _ => Err(CliError::Input(format!(
            "expected a number, [re, im] pair or expression, got {v}"
        ))),
    }
}

pub fn vector(v: &Value, params: &Params) -> Result<CVec, CliError> {
    let items = v
        .as_array()
        .ok_or_else(|| CliError::Input(format!("expected a vector, got {v}")))?;
    let entries = items
        .iter()
        .map(|x| scalar(x, params))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CVec::from_vec(entries))
}

pub fn matrix(v: &Value, params: &Params) -> Result<CMat, CliError> {
    let rows = v
        .as_array()
        .ok_or_else(|| CliError::Input(format!("expected a matrix, got {v}")))?;
    if rows.is_empty() {
        return Err(CliError::Input("empty matrix".into()));
    }
    let parsed: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|row| {
            let row = row.as_array().ok_or_else(|| {
                CliError::Input(format!("matrix row must be an array, got {row}"))
            })?;
            row.iter().map(|x| scalar(x, params)).collect()
        })
        .collect::<Result<_, _>>()?;
    let cols = parsed[0].len();
    if parsed.iter().any(|r| r.len() != cols) {
        return Err(CliError::Input("matrix rows have different lengths".into()));
    }
    Ok(CMat::from_fn(parsed.len(), cols, |i, j| parsed[i][j]))
}

fn matrices(doc: &Document, key: &str, params: &Params) -> Result<Option<Vec<CMat>>, CliError> {
    match doc.value.get(key) {
        None => Ok(None),
        Some(Value::Array(items)) => Ok(Some(
            items
                .iter()
                .map(|m| matrix(m, params))
                .collect::<Result<_, _>>()
                .map_err(|e| bad(doc, &format!("{key}: {e}")))?,
        )),
        Some(_) => Err(bad(doc, &format!("\"{key}\" must be an array of matrices"))),
    }
}

fn declared(doc: &Document, key: &str) -> Result<Option<usize>, CliError> {
    match doc.value.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|x| Some(x as usize))
            .ok_or_else(|| bad(doc, &format!("\"{key}\" must be a nonnegative integer"))),
    }
}

fn check(
    doc: &Document,
    key: &str,
    declared: Option<usize>,
    actual: usize,
) -> Result<(), CliError> {
    match declared {
        Some(n) if n != actual => Err(bad(
            doc,
            &format!("\"{key}\" is {n} but the matrices give {actual}"),
        )),
        _ => Ok(()),
    }
}

pub fn system(doc: &Document, params: &Params) -> Result<SystemRealization, CliError> {
    let a = matrices(doc, "A", params)?.ok_or_else(|| bad(doc, "missing \"A\""))?;
    let c = matrix(
        doc.value
            .get("C")
            .ok_or_else(|| bad(doc, "missing \"C\""))?,
        params,
    )
    .map_err(|e| bad(doc, &format!("C: {e}")))?;
    check(doc, "d", declared(doc, "d")?, a.len())?;
    check(doc, "stateDim", declared(doc, "stateDim")?, c.ncols())?;
    check(doc, "outputDim", declared(doc, "outputDim")?, c.nrows())?;
    let pair = OutputPair::new(c, a).map_err(|e| bad(doc, &e.to_string()))?;
    let b = matrices(doc, "B", params)?;
    let d = match doc.value.get("D") {
        Some(v) => Some(matrix(v, params).map_err(|e| bad(doc, &format!("D: {e}")))?),
        None => None,
    };
    let input_dim = declared(doc, "inputDim")?;
    let sys = match (b, d) {
        (None, None) => {
            let q = input_dim.unwrap_or(0);
            let m = pair.state_dim();
            let p = pair.output_dim();
            let dd = pair.d();
            SystemRealization::new(pair, vec![CMat::zeros(m, q); dd], CMat::zeros(p, q))
        }
        (Some(b), d) => {
            let q = b.first().map(|x| x.ncols()).unwrap_or(0);
            let p = pair.output_dim();
            SystemRealization::new(pair, b, d.unwrap_or_else(|| CMat::zeros(p, q)))
        }
        (None, Some(d)) => {
            let m = pair.state_dim();
            let dd = pair.d();
            SystemRealization::new(pair, vec![CMat::zeros(m, d.ncols()); dd], d)
        }
    }
    .map_err(|e| bad(doc, &e.to_string()))?;
    check(doc, "inputDim", input_dim, sys.input_dim())?;
    Ok(sys)
}

/// Operator tuple from `"T"`, or from `"A"` when `"T"` is absent.
pub fn tuple(doc: &Document, params: &Params) -> Result<Vec<CMat>, CliError> {
    let t = match matrices(doc, "T", params)? {
        Some(t) => t,
        None => matrices(doc, "A", params)?.ok_or_else(|| bad(doc, "missing \"T\" (or \"A\")"))?,
    };
    let m = t.first().ok_or_else(|| bad(doc, "empty tuple"))?.nrows();
    if t.iter().any(|x| x.shape() != (m, m)) {
        return Err(bad(doc, "tuple entries must be square of one size"));
    }
    Ok(t)
}

pub fn points(doc: &Document, params: &Params, d: usize) -> Result<Vec<Vec<Complex64>>, CliError> {
    let list = doc.value.get("points").unwrap_or(&doc.value);
    let items = list
        .as_array()
        .ok_or_else(|| bad(doc, "expected \"points\": [[λ_1, ..., λ_d], ...]"))?;
    items
        .iter()
        .map(|p| {
            let v = vector(p, params).map_err(|e| bad(doc, &e.to_string()))?;
            if v.len() != d {
                return Err(bad(
                    doc,
                    &format!("point {p} has {} coordinates, expected {d}", v.len()),
                ));
            }
            Ok(v.iter().copied().collect())
        })
        .collect()
}

pub fn word(d: usize, key: &str) -> Result<Word, CliError> {
    Word::parse(d, key).map_err(|e| CliError::Input(format!("word {key:?}: {e}")))
}

pub fn multi_index(d: usize, key: &str) -> Result<MultiIndex, CliError> {
    let trimmed = key
        .trim()
        .trim_start_matches(['(', '['])
        .trim_end_matches([')', ']']);
    let entries: Vec<usize> = trimmed
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Input(format!("multi-index {key:?} must look like \"1,0\"")))?;
    if entries.len() != d {
        return Err(CliError::Input(format!(
            "multi-index {key:?} must have {d} entries"
        )));
    }
    Ok(MultiIndex::new(entries))
}

pub struct SimulationInput {
    pub x0: CVec,
    pub words: InputMap,
    pub lattice: Option<LatticeInputMap>,
}

pub fn simulation_input(
    doc: &Document,
    params: &Params,
    d: usize,
) -> Result<SimulationInput, CliError> {
    let x0 = vector(
        doc.value
            .get("x0")
            .ok_or_else(|| bad(doc, "missing \"x0\""))?,
        params,
    )
    .map_err(|e| bad(doc, &format!("x0: {e}")))?;
    let mut words = InputMap::new();
    if let Some(map) = doc.value.get("inputs") {
        let map = map
            .as_object()
            .ok_or_else(|| bad(doc, "\"inputs\" must map words to vectors"))?;
        for (k, v) in map {
            words.insert(
                word(d, k)?,
                vector(v, params).map_err(|e| bad(doc, &format!("inputs[{k}]: {e}")))?,
            );
        }
    }
    let lattice = match doc.value.get("latticeInputs") {
        None => None,
        Some(map) => {
            let map = map
                .as_object()
                .ok_or_else(|| bad(doc, "\"latticeInputs\" must map multi-indices to vectors"))?;
            let mut out = LatticeInputMap::new();
            for (k, v) in map {
                out.insert(
                    multi_index(d, k)?,
                    vector(v, params).map_err(|e| bad(doc, &format!("latticeInputs[{k}]: {e}")))?,
                );
            }
            Some(out)
        }
    };
    Ok(SimulationInput { x0, words, lattice })
}

pub enum Subspace {
    Fock(Vec<FockPoly>),
    Ball(Vec<BallPoly>),
}

/// Subspace file: `{"mode", "d", "depth", "outputDim", "basis": [{key: vector}],
/// "closeUnderShifts"}`. Keys are words (`"12"`, `""`) in nc mode and
/// multi-indices (`"1,0"`) in commutative mode.
pub fn subspace(doc: &Document, params: &Params) -> Result<Subspace, CliError> {
    let v = &doc.value;
    let mode = v.get("mode").and_then(Value::as_str).unwrap_or("nc");
    let d = declared(doc, "d")?.ok_or_else(|| bad(doc, "missing \"d\""))?;
    let depth = declared(doc, "depth")?.ok_or_else(|| bad(doc, "missing \"depth\""))?;
    let k = declared(doc, "outputDim")?.unwrap_or(1);
    let close = v
        .get("closeUnderShifts")
        .and_then(Value::as_bool)
        .unwrap_or(false);
    let basis = v
        .get("basis")
        .and_then(Value::as_array)
        .ok_or_else(|| bad(doc, "missing \"basis\" array"))?;
    if d == 0 || basis.is_empty() {
        return Err(bad(doc, "need d >= 1 and a nonempty basis"));
    }
    let entries = |item: &Value| -> Result<Vec<(String, CVec)>, CliError> {
        let map = item
            .as_object()
            .ok_or_else(|| bad(doc, "basis elements map keys to coefficient vectors"))?;
        map.iter()
            .map(|(key, y)| {
                let y = vector(y, params).map_err(|e| bad(doc, &format!("basis[{key}]: {e}")))?;
                if y.len() != k {
                    return Err(bad(
                        doc,
                        &format!(
                            "coefficient at {key:?} has length {}, expected {k}",
                            y.len()
                        ),
                    ));
                }
                Ok((key.clone(), y))
            })
            .collect()
    };
    match mode {
        "nc" => {
            let mut polys = Vec::new();
            for item in basis {
                let mut f = FockPoly::zero(d, depth, k)?;
                for (key, y) in entries(item)? {
                    let w = word(d, &key)?;
                    if w.len() > depth {
                        return Err(bad(doc, &format!("word {key:?} is deeper than {depth}")));
                    }
                    f.set(&w, y)?;
                }
                polys.push(f);
            }
            if close {
                let mut frontier = polys.clone();
                while !frontier.is_empty() {
                    let mut next = Vec::new();
                    for f in &frontier {
                        for j in 1..=d {
                            let s = right_shift(j, f);
                            if !s.truncated && s.poly.norm() > 0.0 {
                                next.push(s.poly);
                            }
                        }
                    }
                    polys.extend(next.iter().cloned());
                    frontier = next;
                }
            }
            Ok(Subspace::Fock(polys))
        }
        "commutative" => {
            let mut polys = Vec::new();
            for item in basis {
                let mut f = BallPoly::zero(d, depth, k);
                for (key, y) in entries(item)? {
                    let n = multi_index(d, &key)?;
                    if n.total() > depth {
                        return Err(bad(
                            doc,
                            &format!("multi-index {key:?} exceeds degree {depth}"),
                        ));
                    }
                    f.set(n, y)?;
                }
                polys.push(f);
            }
            if close {
                let mut frontier = polys.clone();
                while !frontier.is_empty() {
                    let mut seen = BTreeMap::new();
                    for f in &frontier {
                        for j in 1..=d {
                            let s = arveson_shift(j, f);
                            if !s.truncated && s.poly.norm() > 0.0 {
                                // shifts commute, so dedupe by coefficient support
                                let key = format!(
                                    "{:?}",
                                    s.poly.terms().map(|(n, _)| n.clone()).collect::<Vec<_>>()
                                );
                                seen.entry(key).or_insert(s.poly);
                            }
                        }
                    }
                    let next: Vec<BallPoly> = seen.into_values().collect();
                    polys.extend(next.iter().cloned());
                    frontier = next;
                }
            }
            Ok(Subspace::Ball(polys))
        }
        other => Err(bad(
            doc,
            &format!("unknown mode {other:?}, expected \"nc\" or \"commutative\""),
        )),
    }
}
