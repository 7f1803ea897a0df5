//! Topography spec files.
//!
//! A spec is a TOML document with a `[topography]` table naming exactly one
//! source, optional `[sampling]` overrides and an optional `[expect]` table
//! that `classify` and `report` check against:
//!
//! ```toml
//! [topography]
//! case = "7a"
//! epsilon = -1.0
//!
//! [expect]
//! case = "7a"
//! dimension = 5
//! ```
//!
//! Other sources are `expr = "exp(x)*sin(y)"` (with `singular = ["origin"]`
//! when needed), `grid = "bottom.csv"` and `fixture = "8b-plus"`. Case
//! profiles are given as `profile = "sin(s)"` or tabulated with
//! `profile_table = "f.csv"` (rows `s,f`).

use crate::charspace::CaseLabel;
use crate::error::{Error, Result};
use crate::fixtures;
use crate::spline::Spline;
use crate::topography::{CaseId, CaseParams, GridData, Locus, Profile, Topography};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopoSource {
    pub case: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub nu: Option<f64>,
    pub profile: Option<String>,
    pub profile_table: Option<PathBuf>,
    pub expr: Option<String>,
    #[serde(default)]
    pub singular: Vec<String>,
    pub grid: Option<PathBuf>,
    pub fixture: Option<String>,
    pub exclusion: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub seed: Option<u64>,
    /// jets per residual check
    pub points: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub case: Option<String>,
    pub dimension: Option<usize>,
    pub k: Option<usize>,
}

impl Expectation {
    /// Human-readable mismatches against a computed label.
    pub fn mismatches(&self, label: &CaseLabel) -> Result<Vec<String>> {
        let mut out = vec![];
        if let Some(c) = &self.case {
            let want = CaseId::parse(c)?;
            if want != label.case {
                out.push(format!("case: expected {want}, got {}", label.case));
            }
        }
        if let Some(d) = self.dimension {
            if d != label.dimension {
                out.push(format!("dimension: expected {d}, got {}", label.dimension));
            }
        }
        if let Some(k) = self.k {
            if k != label.k {
                out.push(format!("k: expected {k}, got {}", label.k));
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopoSpec {
    pub topography: TopoSource,
    #[serde(default)]
    pub sampling: Sampling,
    pub expect: Option<Expectation>,
    /// directory that relative paths are resolved against
    #[serde(skip)]
    pub base: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

impl TopoSpec {
    pub fn parse(text: &str) -> Result<TopoSpec> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<TopoSpec> {
        let mut spec = TopoSpec::parse(&read(path)?)?;
        spec.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(spec)
    }

    /// A file path, or the inline forms `fixture:NAME`, `case:ID` and
    /// `expr:EXPR`.
    pub fn resolve(arg: &str) -> Result<TopoSpec> {
        let src = if let Some(name) = arg.strip_prefix("fixture:") {
            TopoSource { fixture: Some(name.into()), ..Default::default() }
        } else if let Some(id) = arg.strip_prefix("case:") {
            TopoSource { case: Some(id.into()), ..Default::default() }
        } else if let Some(e) = arg.strip_prefix("expr:") {
            TopoSource { expr: Some(e.into()), ..Default::default() }
        } else {
            return TopoSpec::load(Path::new(arg));
        };
        Ok(TopoSpec { topography: src, ..Default::default() })
    }

    pub fn build(&self) -> Result<Arc<Topography>> {
        let s = &self.topography;
        let given = [s.case.is_some(), s.expr.is_some(), s.grid.is_some(), s.fixture.is_some()].iter().filter(|&&b| b).count();
        if given != 1 {
            return Err(Error::Config("[topography] needs exactly one of case, expr, grid, fixture".into()));
        }
        let topo = if let Some(name) = &s.fixture {
            return Ok(fixtures::by_name(name)?.topo);
        } else if let Some(c) = &s.case {
            let id = CaseId::parse(c)?;
            let params = CaseParams { alpha: s.alpha, beta: s.beta, delta: s.delta, epsilon: s.epsilon, nu: s.nu };
            let profile = match (&s.profile, &s.profile_table) {
                (Some(_), Some(_)) => return Err(Error::Config("give profile or profile_table, not both".into())),
                (Some(p), None) => Some(Profile::parse(p)?),
                (None, Some(path)) => Some(Profile::Spline(read_profile(&self.base.join(path))?)),
                (None, None) => None,
            };
            Topography::make_case(id, params, profile)?
        } else if let Some(e) = &s.expr {
            let loci = s
                .singular
                .iter()
                .map(|l| match l.as_str() {
                    "origin" => Ok(Locus::origin()),
                    "x-axis" => Ok(Locus::x_axis()),
                    other => Err(Error::Config(format!("unknown singular set `{other}` (origin, x-axis)"))),
                })
                .collect::<Result<_>>()?;
            Topography::from_expr(e, loci)?
        } else {
            let path = self.base.join(s.grid.as_ref().expect("counted above"));
            Topography::from_grid(GridData::from_csv(&read(&path)?)?)
        };
        let topo = match s.exclusion {
            Some(d) if !(d > 0.0) => return Err(Error::Config(format!("exclusion must be positive, got {d}"))),
            Some(d) => topo.with_exclusion(d),
            None => topo,
        };
        Ok(Arc::new(topo))
    }
}

fn read_profile(path: &Path) -> Result<Spline> {
    let text = read(path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let (mut xs, mut ys) = (vec![], vec![]);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse(format!("{}: rows must be `s,f`", path.display())))
        };
        xs.push(num(0)?);
        ys.push(num(1)?);
    }
    Spline::natural(xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_build_every_source() {
        let spec = TopoSpec::parse("[topography]\ncase = \"7a\"\nepsilon = -1.0\n[expect]\ncase = \"7a\"\ndimension = 5\n").unwrap();
        let t = spec.build().unwrap();
        assert_eq!(t.nominal_case(), Some(CaseId::C7a));
        let spec = TopoSpec::parse("[topography]\nexpr = \"1/(x^2+y^2)\"\nsingular = [\"origin\"]\n").unwrap();
        assert!(spec.build().unwrap().eval_b(0.0, 0.0).is_err());
        assert!(TopoSpec::resolve("fixture:14b").unwrap().build().is_ok());
        assert!(TopoSpec::resolve("case:14a").unwrap().build().is_ok());
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(matches!(TopoSpec::parse("[topography]\ncolour = 1\n"), Err(Error::Parse(_))));
        let both = TopoSpec::parse("[topography]\ncase = \"14a\"\nexpr = \"0\"\n").unwrap();
        assert!(matches!(both.build(), Err(Error::Config(_))));
        let none = TopoSpec::parse("[topography]\n").unwrap();
        assert!(matches!(none.build(), Err(Error::Config(_))));
        assert!(matches!(TopoSpec::resolve("/nonexistent/spec.toml"), Err(Error::Io(_))));
        let spec = TopoSpec::parse("[topography]\ncase = \"14a\"\nexclusion = -1.0\n").unwrap();
        assert!(matches!(spec.build(), Err(Error::Config(_))));
    }
}
