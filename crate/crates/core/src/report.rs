//! Machine-readable reports. Floats are written with 17 significant digits
//! and object keys are sorted, so equal inputs give byte-identical output.

use crate::charspace::{analyse, verify_basis, Analysis, CaseLabel, CharTuple, Residuals};
use crate::config::Expectation;
use crate::error::{Error, Result};
use crate::furcate::CompatReport;
use crate::topography::{CaseParams, Topography};
use serde::Serialize;
use serde_json::{Number, Value};
use std::fmt::Write as _;

fn canonical(v: Value) -> Result<Value> {
    Ok(match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().ok_or_else(|| Error::Internal("non-numeric float".into()))?;
            Value::Number(format!("{x:.16e}").parse::<Number>().map_err(|e| Error::Internal(e.to_string()))?)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect::<Result<_>>()?),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| Ok((k, canonical(v)?))).collect::<Result<_>>()?),
        other => other,
    })
}

/// Pretty JSON with 17-significant-digit floats and sorted keys. Non-finite
/// floats become null.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Internal(e.to_string()))?;
    serde_json::to_string_pretty(&canonical(v)?).map_err(|e| Error::Internal(e.to_string()))
}

#[derive(Clone, Debug, Serialize)]
pub struct TemplateDump {
    /// k×8 coefficient rows
    pub rows: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub gap: f64,
    pub threshold: f64,
    pub samples: usize,
    pub compatibility: CompatReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassifyReport {
    pub case: String,
    pub label: String,
    pub params: CaseParams,
    pub k: usize,
    pub rank_a2: usize,
    pub dimension: usize,
    pub basis: Vec<CharTuple>,
    pub residuals: Residuals,
    pub residuals_ok: bool,
    pub singular_values: Vec<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template: Option<TemplateDump>,
}

impl ClassifyReport {
    pub fn build(a: &Analysis, residuals: Residuals, ok: bool, seed: u64, template: bool) -> ClassifyReport {
        let sys = &a.system;
        ClassifyReport {
            case: a.label.case.label().into(),
            label: a.label.to_string(),
            params: a.label.params,
            k: a.label.k,
            rank_a2: a.label.rank_a2,
            dimension: a.label.dimension,
            basis: a.basis.tuples.clone(),
            residuals,
            residuals_ok: ok,
            singular_values: sys.singular_values.clone(),
            seed,
            template: template.then(|| TemplateDump {
                rows: (0..sys.a.nrows()).map(|i| sys.a.row(i).iter().copied().collect()).collect(),
                singular_values: sys.singular_values.clone(),
                gap: sys.gap,
                threshold: sys.threshold,
                samples: sys.samples,
                compatibility: a.compat.clone(),
            }),
        }
    }
}

/// One fixture row of the catalog table.
#[derive(Clone, Debug, Serialize)]
pub struct CatalogRow {
    pub name: String,
    pub expected_case: String,
    pub case: String,
    pub expected_dimension: Option<usize>,
    pub dimension: Option<usize>,
    pub max_residual: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Classifies and verifies one fixture against its expectation.
pub fn catalog_row(name: &str, topo: &Topography, expect: &Expectation, points: usize, seed: u64) -> CatalogRow {
    let mut row = CatalogRow {
        name: name.into(),
        expected_case: expect.case.clone().unwrap_or_else(|| "-".into()),
        case: "-".into(),
        expected_dimension: expect.dimension,
        dimension: None,
        max_residual: f64::NAN,
        pass: false,
        error: None,
    };
    let run = || -> Result<(CaseLabel, Residuals, Vec<String>)> {
        let a = analyse(topo, seed)?;
        let r = verify_basis(&a.basis, topo, points, seed)?;
        let mut bad = expect.mismatches(&a.label)?;
        if !r.within(topo.is_approximate()) {
            bad.push(format!("residuals {r:?}"));
        }
        Ok((a.label, r, bad))
    };
    match run() {
        Ok((label, r, bad)) => {
            row.case = label.case.label().into();
            row.dimension = Some(label.dimension);
            row.max_residual = r.classifying.max(r.cosymmetry).max(r.divergence);
            row.pass = bad.is_empty();
            if !bad.is_empty() {
                row.error = Some(bad.join("; "));
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

pub fn render_table(rows: &[CatalogRow]) -> String {
    let opt = |d: Option<usize>| d.map_or("-".to_string(), |d| d.to_string());
    let mut s = format!("{:<18} {:>8} {:>6} {:>8} {:>8} {:>11}  result\n", "fixture", "expected", "case", "exp.dim", "dim", "max resid");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<18} {:>8} {:>6} {:>8} {:>8} {:>11.3e}  {}{}",
            r.name,
            r.expected_case,
            r.case,
            opt(r.expected_dimension),
            opt(r.dimension),
            r.max_residual,
            if r.pass { "PASS" } else { "FAIL" },
            r.error.as_ref().map_or(String::new(), |e| format!(" ({e})")),
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits_and_round_trip() {
        #[derive(Serialize)]
        struct S {
            z: f64,
            a: f64,
            n: usize,
            bad: f64,
        }
        let x = 0.1 + 0.2;
        let s = to_json(&S { z: x, a: -1.0, n: 3, bad: f64::NAN }).unwrap();
        assert!(s.contains("3.0000000000000004e-1"), "{s}");
        assert!(s.contains("-1.0000000000000000e+0"), "{s}");
        assert!(s.contains("\"n\": 3") && s.contains("\"bad\": null"), "{s}");
        assert!(s.find("\"a\"").unwrap() < s.find("\"z\"").unwrap());
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["z"].as_f64(), Some(x));
    }
}
