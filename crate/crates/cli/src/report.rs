//! JSON views of library reports.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use mdlsys::applications::{MultiplierCoeffs, MultiplierPoly};
use mdlsys::combinatorics::MultiIndex;
use mdlsys::numerics::HermitianVerdict;
use mdlsys::stein::GramianReport;

use crate::canonical::{matrix, num, obj, reals, vector};

pub fn opt_num(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

pub fn verdict(v: &HermitianVerdict) -> Value {
    obj([
        ("isPsd", Value::Bool(v.is_psd)),
        ("minEigenvalue", num(v.min_eigenvalue)),
        ("tolerance", num(v.tolerance)),
        (
            "witness",
            v.witness.as_ref().map(vector).unwrap_or(Value::Null),
        ),
    ])
}

pub fn gramian(g: &GramianReport) -> Value {
    obj([
        ("value", matrix(&g.value)),
        ("converged", Value::Bool(g.converged())),
        ("verdict", g.verdict.as_str().into()),
        ("levelsUsed", g.levels_used.into()),
        ("tailEstimate", num(g.tail_estimate)),
        ("tailBound", opt_num(g.tail_bound)),
        ("certifiedRatio", opt_num(g.certified_ratio)),
        ("steinResidual", opt_num(g.stein_residual)),
        ("partialSumNorms", reals(&g.partial_sum_norms)),
        ("tolerance", num(g.tolerance)),
    ])
}

pub fn multi_index_key(n: &MultiIndex) -> String {
    n.entries()
        .iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn multiplier(theta: &MultiplierPoly) -> Value {
    let coeffs: Map<String, Value> = match &theta.coeffs {
        MultiplierCoeffs::Nc(map) => map
            .iter()
            .map(|(w, m)| (w.to_string(), matrix(m)))
            .collect(),
        MultiplierCoeffs::Commutative(map) => map
            .iter()
            .map(|(n, m)| (multi_index_key(n), matrix(m)))
            .collect(),
    };
    obj([
        ("mode", theta.mode().as_str().into()),
        ("depth", theta.depth.into()),
        ("outputDim", theta.output_dim.into()),
        ("inputDim", theta.input_dim.into()),
        ("normEstimate", num(theta.norm_estimate)),
        ("coefficients", Value::Object(coeffs)),
    ])
}

/// Ordered name/value checks with an overall flag.
pub struct Checks {
    items: BTreeMap<String, Value>,
    pub pass: bool,
}

impl Checks {
    pub fn new() -> Self {
        Checks {
            items: BTreeMap::new(),
            pass: true,
        }
    }

    /// Records `value <= tol` under `name`.
    pub fn at_most(&mut self, name: &str, value: f64, tol: f64) {
        let ok = value <= tol;
        self.pass &= ok;
        self.items.insert(
            name.into(),
            obj([
                ("value", num(value)),
                ("tolerance", num(tol)),
                ("pass", ok.into()),
            ]),
        );
    }

    pub fn flag(&mut self, name: &str, ok: bool, value: Value) {
        self.pass &= ok;
        self.items
            .insert(name.into(), obj([("value", value), ("pass", ok.into())]));
    }

    pub fn into_value(self) -> Value {
        Value::Object(self.items.into_iter().collect())
    }
}
