//! Named representatives of every catalog entry, with the label and
//! dimension the classifier should report for each.

use crate::error::Result;
use crate::topography::{CaseId, CaseParams, Profile, Topography};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub topo: Arc<Topography>,
    pub expected: CaseId,
    pub params: CaseParams,
    pub dimension: usize,
}

fn p(beta: Option<f64>, delta: Option<f64>, epsilon: Option<f64>) -> CaseParams {
    CaseParams { beta, delta, epsilon, ..Default::default() }
}

fn case(name: &str, id: CaseId, params: CaseParams, profile: Option<&str>) -> Result<Fixture> {
    let profile = profile.map(Profile::parse).transpose()?;
    let topo = Topography::make_case(id, params, profile)?;
    Ok(Fixture { name: name.into(), topo: Arc::new(topo), expected: id, params, dimension: id.dimension() })
}

/// One or more fixtures per catalog entry.
pub fn catalog() -> Result<Vec<Fixture>> {
    use CaseId::*;
    let n = None;
    let mut out = vec![Fixture {
        name: "generic".into(),
        topo: Arc::new(Topography::from_expr("exp(x)*sin(y) + x^3*y", vec![])?),
        expected: Generic,
        params: CaseParams::default(),
        dimension: 2,
    }];
    let specs: Vec<(&str, CaseId, CaseParams, Option<&str>)> = vec![
        ("1-sin", C1, p(Some(1.0), n, n), Some("sin(s)")),
        ("2-square-delta1", C2, p(n, Some(1.0), n), Some("s^2")),
        ("2-gauss", C2, p(n, Some(0.0), n), Some("exp(-s^2)")),
        ("3a-sin", C3a, p(n, n, n), Some("sin(s)")),
        ("3b-sin", C3b, p(n, n, n), Some("sin(s)")),
        ("3c-sin", C3c, p(n, n, n), Some("sin(s)")),
        ("4-cos-delta0", C4, p(n, Some(0.0), n), Some("cos(s)")),
        ("4-cos-delta1", C4, p(n, Some(1.0), n), Some("cos(s)")),
        ("5-cos", C5, p(n, n, n), Some("cos(s)")),
        ("6-cos", C6, p(n, n, n), Some("cos(s)")),
        ("7a-plus", C7a, p(n, n, Some(1.0)), None),
        ("7a-minus", C7a, p(n, n, Some(-1.0)), None),
        ("7b-plus", C7b, p(n, n, Some(1.0)), None),
        ("7b-minus", C7b, p(n, n, Some(-1.0)), None),
        ("7c-plus", C7c, p(n, n, Some(1.0)), None),
        ("7c-minus", C7c, p(n, n, Some(-1.0)), None),
        ("8a-delta0", C8a, p(n, Some(0.0), Some(1.0)), None),
        ("8a-delta1", C8a, p(n, Some(1.0), Some(1.0)), None),
        ("8b-plus", C8b, p(n, n, Some(1.0)), None),
        ("8b-minus", C8b, p(n, n, Some(-1.0)), None),
        ("8c-plus", C8c, p(n, n, Some(1.0)), None),
        ("8c-minus", C8c, p(n, n, Some(-1.0)), None),
        ("9-half", C9, p(Some(0.5), n, n), None),
        ("10-delta0", C10, p(n, Some(0.0), n), None),
        ("10-delta1", C10, p(n, Some(1.0), n), None),
        ("11-half", C11, p(Some(0.5), n, n), None),
        ("12-delta0", C12, p(n, Some(0.0), n), None),
        ("12-delta1", C12, p(n, Some(1.0), n), None),
        ("13-half", C13, p(Some(0.5), n, n), None),
        ("14a", C14a, p(n, n, n), None),
        ("14b", C14b, p(n, n, n), None),
        ("14c", C14c, p(n, n, n), None),
        ("14d", C14d, p(n, n, n), None),
    ];
    for (name, id, params, prof) in specs {
        out.push(case(name, id, params, prof)?);
    }
    // r² with δ = 0 is ½r² up to scale, so it is the 14c bottom
    let mut deg = case("2-square-delta0", C2, p(None, Some(0.0), None), Some("s^2"))?;
    deg.expected = C14c;
    deg.params = CaseParams::default();
    deg.dimension = 9;
    out.push(deg);
    Ok(out)
}

pub fn by_name(name: &str) -> Result<Fixture> {
    catalog()?
        .into_iter()
        .find(|f| f.name == name)
        .ok_or_else(|| crate::Error::Parameter(format!("no fixture named `{name}`")))
}
