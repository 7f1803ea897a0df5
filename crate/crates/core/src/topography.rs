//! Bottom topographies: the case catalog, user expressions, gridded data,
//! and their images under equivalence transformations.

use crate::dual::Dual;
use crate::equivmaps::EquivElement;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::spline::Spline;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub const DEFAULT_EXCLUSION: f64 = 0.05;

/// Labels of the catalog of extensions, plus the generic case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseId {
    Generic,
    C1,
    C2,
    C3a,
    C3b,
    C3c,
    C4,
    C5,
    C6,
    C7a,
    C7b,
    C7c,
    C8a,
    C8b,
    C8c,
    C9,
    C10,
    C11,
    C12,
    C13,
    C14a,
    C14b,
    C14c,
    C14d,
}

impl CaseId {
    pub const ALL: [CaseId; 24] = [
        CaseId::Generic,
        CaseId::C1,
        CaseId::C2,
        CaseId::C3a,
        CaseId::C3b,
        CaseId::C3c,
        CaseId::C4,
        CaseId::C5,
        CaseId::C6,
        CaseId::C7a,
        CaseId::C7b,
        CaseId::C7c,
        CaseId::C8a,
        CaseId::C8b,
        CaseId::C8c,
        CaseId::C9,
        CaseId::C10,
        CaseId::C11,
        CaseId::C12,
        CaseId::C13,
        CaseId::C14a,
        CaseId::C14b,
        CaseId::C14c,
        CaseId::C14d,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CaseId::Generic => "generic",
            CaseId::C1 => "1",
            CaseId::C2 => "2",
            CaseId::C3a => "3a",
            CaseId::C3b => "3b",
            CaseId::C3c => "3c",
            CaseId::C4 => "4",
            CaseId::C5 => "5",
            CaseId::C6 => "6",
            CaseId::C7a => "7a",
            CaseId::C7b => "7b",
            CaseId::C7c => "7c",
            CaseId::C8a => "8a",
            CaseId::C8b => "8b",
            CaseId::C8c => "8c",
            CaseId::C9 => "9",
            CaseId::C10 => "10",
            CaseId::C11 => "11",
            CaseId::C12 => "12",
            CaseId::C13 => "13",
            CaseId::C14a => "14a",
            CaseId::C14b => "14b",
            CaseId::C14c => "14c",
            CaseId::C14d => "14d",
        }
    }

    pub fn parse(s: &str) -> Result<CaseId> {
        let s = s.trim().trim_start_matches("case").trim_start_matches("Case").trim();
        CaseId::ALL
            .iter()
            .copied()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown case label `{s}`")))
    }

    /// Dimension of the space of zeroth-order characteristics.
    pub fn dimension(self) -> usize {
        use CaseId::*;
        match self {
            Generic => 2,
            C1 | C2 => 3,
            C3a | C3b | C3c | C4 | C5 | C6 => 4,
            C7a | C7b | C7c => 5,
            C8a | C8b | C8c | C9 | C10 | C11 | C12 | C13 => 6,
            C14a | C14b | C14c | C14d => 9,
        }
    }

    /// Whether the closed form involves the free profile function.
    pub fn needs_profile(self) -> bool {
        use CaseId::*;
        matches!(self, C1 | C2 | C3a | C3b | C3c | C4 | C5 | C6)
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

/// A one-variable profile function with exact or spline derivative.
#[derive(Clone, Debug)]
pub enum Profile {
    Expr(Expr),
    Spline(Spline),
}

impl Profile {
    pub fn parse(src: &str) -> Result<Profile> {
        Ok(Profile::Expr(Expr::parse(src)?))
    }

    pub fn eval(&self, s: f64) -> (f64, f64) {
        match self {
            Profile::Expr(e) => e.eval_s(s),
            Profile::Spline(sp) => sp.eval(s),
        }
    }

    fn apply<const N: usize>(&self, a: Dual<N>) -> Dual<N> {
        let (f, df) = self.eval(a.v);
        a.chain(f, df)
    }

    pub fn is_spline(&self) -> bool {
        matches!(self, Profile::Spline(_))
    }
}

/// A set that evaluation and sampling must stay away from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Locus {
    Point { x: f64, y: f64 },
    /// The line `nx*x + ny*y = c` with unit normal.
    Line { nx: f64, ny: f64, c: f64 },
}

impl Locus {
    pub fn origin() -> Locus {
        Locus::Point { x: 0.0, y: 0.0 }
    }

    pub fn x_axis() -> Locus {
        Locus::Line { nx: 0.0, ny: 1.0, c: 0.0 }
    }

    pub fn distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Locus::Point { x: px, y: py } => (x - px).hypot(y - py),
            Locus::Line { nx, ny, c } => (nx * x + ny * y - c).abs(),
        }
    }

    /// Image under the spatial part of an equivalence transformation.
    pub fn mapped(&self, g: &EquivElement) -> Locus {
        match *self {
            Locus::Point { x, y } => {
                let (xt, yt) = g.map_xy(x, y);
                Locus::Point { x: xt, y: yt }
            }
            Locus::Line { nx, ny, c } => {
                // n·p = c with p = R⁻¹(p̃ − s)  ⇒  (R⁻ᵀn)·p̃ = c + (R⁻ᵀn)·s
                let (mx, my) = g.inv_transpose_apply(nx, ny);
                let (s5, s6) = (g.d[4], g.d[5]);
                let norm = mx.hypot(my);
                Locus::Line { nx: mx / norm, ny: my / norm, c: (c + mx * s5 + my * s6) / norm }
            }
        }
    }
}

/// Tabulated b on a rectangular lattice.
#[derive(Clone, Debug)]
pub struct GridData {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub x0: f64,
    pub y0: f64,
    /// b values, row-major with x varying fastest
    pub b: Vec<f64>,
    bx: Vec<f64>,
    by: Vec<f64>,
    /// estimated relative gradient error of the finite differences
    pub error_estimate: f64,
}

impl GridData {
    pub fn new(nx: usize, ny: usize, spacing: f64, x0: f64, y0: f64, b: Vec<f64>) -> Result<GridData> {
        if nx < 7 || ny < 7 || b.len() != nx * ny || !(spacing > 0.0) {
            return Err(Error::Parameter(format!("bad grid: {nx}x{ny}, spacing {spacing}, {} values", b.len())));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("grid contains non-finite values".into()));
        }
        let idx = |i: usize, j: usize| j * nx + i;
        let mut bx = vec![0.0; nx * ny];
        let mut by = vec![0.0; nx * ny];
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let row: Vec<f64> = (0..nx).map(|k| b[idx(k, j)]).collect();
                let col: Vec<f64> = (0..ny).map(|k| b[idx(i, k)]).collect();
                let (gx, ex) = fd_derivative(&row, i, spacing);
                let (gy, ey) = fd_derivative(&col, j, spacing);
                bx[idx(i, j)] = gx;
                by[idx(i, j)] = gy;
                err = err.max(ex).max(ey);
                scale = scale.max(gx.abs()).max(gy.abs());
            }
        }
        let error_estimate = if scale > 0.0 { err / scale } else { err };
        Ok(GridData { nx, ny, spacing, x0, y0, b, bx, by, error_estimate })
    }

    /// Reads `nx,ny,spacing` followed by `x,y,b` rows.
    pub fn from_csv(text: &str) -> Result<GridData> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut records = rdr.records();
        let head = records.next().ok_or_else(|| Error::Parse("empty grid file".into()))?.map_err(|e| Error::Parse(e.to_string()))?;
        if head.len() < 3 {
            return Err(Error::Parse("grid header must be `nx,ny,spacing`".into()));
        }
        let nx: usize = head[0].parse().map_err(|_| Error::Parse("bad nx".into()))?;
        let ny: usize = head[1].parse().map_err(|_| Error::Parse("bad ny".into()))?;
        let spacing: f64 = head[2].parse().map_err(|_| Error::Parse("bad spacing".into()))?;
        let mut pts = Vec::with_capacity(nx * ny);
        for rec in records {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            if rec.len() < 3 {
                return Err(Error::Parse("grid rows must be `x,y,b`".into()));
            }
            let p: Vec<f64> = (0..3)
                .map(|k| rec[k].parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{}`", &rec[k]))))
                .collect::<Result<_>>()?;
            pts.push((p[0], p[1], p[2]));
        }
        if pts.len() != nx * ny {
            return Err(Error::Parse(format!("expected {} grid rows, found {}", nx * ny, pts.len())));
        }
        let x0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let y0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let mut b = vec![f64::NAN; nx * ny];
        for (x, y, v) in pts {
            let i = ((x - x0) / spacing).round();
            let j = ((y - y0) / spacing).round();
            if i < 0.0 || j < 0.0 || i as usize >= nx || j as usize >= ny || ((x - x0) / spacing - i).abs() > 1e-6 {
                return Err(Error::Parse(format!("point ({x}, {y}) is off the lattice")));
            }
            b[j as usize * nx + i as usize] = v;
        }
        if b.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("grid has missing nodes".into()));
        }
        GridData::new(nx, ny, spacing, x0, y0, b)
    }

    pub fn from_fn(nx: usize, ny: usize, spacing: f64, x0: f64, y0: f64, f: impl Fn(f64, f64) -> f64) -> Result<GridData> {
        let mut b = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                b.push(f(x0 + i as f64 * spacing, y0 + j as f64 * spacing));
            }
        }
        GridData::new(nx, ny, spacing, x0, y0, b)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{},{}\n", self.nx, self.ny, self.spacing);
        for j in 0..self.ny {
            for i in 0..self.nx {
                let x = self.x0 + i as f64 * self.spacing;
                let y = self.y0 + j as f64 * self.spacing;
                s.push_str(&format!("{x:e},{y:e},{:e}\n", self.b[j * self.nx + i]));
            }
        }
        s
    }

    fn inside(&self, x: f64, y: f64) -> bool {
        let xi = (x - self.x0) / self.spacing;
        let yj = (y - self.y0) / self.spacing;
        xi >= 0.0 && yj >= 0.0 && xi <= (self.nx - 1) as f64 && yj <= (self.ny - 1) as f64
    }

    fn interp(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let xi = (x - self.x0) / self.spacing;
        let yj = (y - self.y0) / self.spacing;
        let (i0, wx) = lagrange4(xi, self.nx);
        let (j0, wy) = lagrange4(yj, self.ny);
        let mut out = (0.0, 0.0, 0.0);
        for (a, wya) in wy.iter().enumerate() {
            for (c, wxc) in wx.iter().enumerate() {
                let k = (j0 + a) * self.nx + i0 + c;
                let w = wya * wxc;
                out.0 += w * self.b[k];
                out.1 += w * self.bx[k];
                out.2 += w * self.by[k];
            }
        }
        out
    }
}

/// 4-point Lagrange weights around fractional index `s` on `0..n`.
pub(crate) fn lagrange4(s: f64, n: usize) -> (usize, [f64; 4]) {
    let i0 = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut w = [1.0; 4];
    for a in 0..4 {
        for c in 0..4 {
            if a != c {
                w[a] *= (s - (i0 + c) as f64) / (a as f64 - c as f64);
            }
        }
    }
    (i0, w)
}

/// 4th-order first derivative at index i, with the gap to a 6th-order estimate.
fn fd_derivative(f: &[f64], i: usize, h: f64) -> (f64, f64) {
    let n = f.len();
    let stencil = |offs: &[isize], w: &[f64]| -> f64 { offs.iter().zip(w).map(|(&o, &c)| c * f[(i as isize + o) as usize]).sum::<f64>() / h };
    let start = |width: usize| -> Vec<isize> {
        let half = (width / 2) as isize;
        let lo = (i as isize - half).clamp(0, n as isize - width as isize);
        (lo..lo + width as isize).map(|k| k - i as isize).collect()
    };
    let o5 = start(5);
    let o7 = start(7);
    let d4 = stencil(&o5, &fd_weights(&o5));
    let d6 = stencil(&o7, &fd_weights(&o7));
    (d4, (d4 - d6).abs())
}

/// First-derivative weights on integer offsets (Lagrange differentiation at 0).
pub(crate) fn fd_weights(offs: &[isize]) -> Vec<f64> {
    let m = offs.len();
    let mut w = vec![0.0; m];
    for a in 0..m {
        // L_a'(0) = sum_{c≠a} 1/(x_a−x_c) * prod_{d≠a,c} (0−x_d)/(x_a−x_d)
        let xa = offs[a] as f64;
        let mut s = 0.0;
        for c in 0..m {
            if c == a {
                continue;
            }
            let xc = offs[c] as f64;
            let mut p = 1.0 / (xa - xc);
            for d in 0..m {
                if d != a && d != c {
                    let xd = offs[d] as f64;
                    p *= -xd / (xa - xd);
                }
            }
            s += p;
        }
        w[a] = s;
    }
    w
}

#[derive(Clone, Debug)]
pub enum Kind {
    Case { id: CaseId, params: CaseParams, profile: Option<Profile> },
    Expr(Expr),
    Grid(GridData),
    /// b̃(x̃) = κ b(x) + δ₇ with x̃ the image of x.
    Transformed { inner: Arc<Topography>, g: EquivElement },
    /// b + ½c(x²+y²) + p x + q y
    Plus { inner: Arc<Topography>, c: f64, p: f64, q: f64 },
}

#[derive(Clone, Debug)]
pub struct Topography {
    pub kind: Kind,
    pub loci: Vec<Locus>,
    pub exclusion: f64,
}

fn req(p: Option<f64>, name: &str, id: CaseId) -> Result<f64> {
    p.ok_or_else(|| Error::Parameter(format!("case {id} needs parameter {name}")))
}

impl Topography {
    pub fn make_case(id: CaseId, params: CaseParams, profile: Option<Profile>) -> Result<Topography> {
        use CaseId::*;
        if id == Generic {
            return Err(Error::Parameter("the generic case has no closed form; use an expression".into()));
        }
        if id.needs_profile() && profile.is_none() {
            return Err(Error::Parameter(format!("case {id} needs a profile function")));
        }
        let eps = || -> Result<f64> {
            let e = params.epsilon.unwrap_or(1.0);
            if e == 1.0 || e == -1.0 {
                Ok(e)
            } else {
                Err(Error::Parameter(format!("epsilon must be ±1, got {e}")))
            }
        };
        let finite = |v: Option<f64>, name: &str| -> Result<()> {
            match v {
                Some(x) if !x.is_finite() => Err(Error::Parameter(format!("{name} must be finite"))),
                _ => Ok(()),
            }
        };
        finite(params.beta, "beta")?;
        finite(params.delta, "delta")?;
        match id {
            C1 => {
                let b = req(params.beta, "beta", id)?;
                if !(b > 0.0) {
                    return Err(Error::Parameter(format!("case 1 needs beta > 0, got {b}")));
                }
            }
            C7a | C7b | C7c | C8a | C8b | C8c => {
                eps()?;
            }
            C9 | C13 => {
                let b = req(params.beta, "beta", id)?;
                if !(b > 0.0 && b < 1.0) {
                    return Err(Error::Parameter(format!("case {id} needs 0 < beta < 1, got {b}")));
                }
            }
            C11 => {
                let b = req(params.beta, "beta", id)?;
                if !(b > 0.0) {
                    return Err(Error::Parameter(format!("case 11 needs beta > 0, got {b}")));
                }
            }
            _ => {}
        }
        let delta = params.delta.unwrap_or(0.0);
        let loci = match id {
            C1 | C3a | C3b | C3c | C7a | C7b | C7c => vec![Locus::origin()],
            C2 if delta != 0.0 => vec![Locus::origin()],
            C8a | C8b | C8c => vec![Locus::x_axis()],
            _ => vec![],
        };
        Ok(Topography { kind: Kind::Case { id, params, profile }, loci, exclusion: DEFAULT_EXCLUSION })
    }

    pub fn from_expr(src: &str, loci: Vec<Locus>) -> Result<Topography> {
        Ok(Topography { kind: Kind::Expr(Expr::parse(src)?), loci, exclusion: DEFAULT_EXCLUSION })
    }

    pub fn from_grid(g: GridData) -> Topography {
        Topography { kind: Kind::Grid(g), loci: vec![], exclusion: DEFAULT_EXCLUSION }
    }

    pub fn with_exclusion(mut self, d: f64) -> Topography {
        self.exclusion = d;
        self
    }

    pub fn transformed(self: &Arc<Self>, g: &EquivElement) -> Topography {
        let loci = self.loci.iter().map(|l| l.mapped(g)).collect();
        Topography { kind: Kind::Transformed { inner: self.clone(), g: *g }, loci, exclusion: self.exclusion }
    }

    pub fn plus(self: &Arc<Self>, c: f64, p: f64, q: f64) -> Topography {
        Topography { kind: Kind::Plus { inner: self.clone(), c, p, q }, loci: self.loci.clone(), exclusion: self.exclusion }
    }

    /// The nominal catalog case, when built by `make_case`.
    pub fn nominal_case(&self) -> Option<CaseId> {
        match &self.kind {
            Kind::Case { id, .. } => Some(*id),
            _ => None,
        }
    }

    /// True when some gradient comes from data rather than a formula.
    pub fn is_approximate(&self) -> bool {
        match &self.kind {
            Kind::Case { profile, .. } => profile.as_ref().is_some_and(|p| p.is_spline()),
            Kind::Expr(_) => false,
            Kind::Grid(_) => true,
            Kind::Transformed { inner, .. } | Kind::Plus { inner, .. } => inner.is_approximate(),
        }
    }

    /// Relative gradient error of gridded data (0 for closed forms).
    pub fn grid_error(&self) -> f64 {
        match &self.kind {
            Kind::Grid(g) => g.error_estimate,
            Kind::Transformed { inner, .. } | Kind::Plus { inner, .. } => inner.grid_error(),
            _ => 0.0,
        }
    }

    pub fn admissible(&self, x: f64, y: f64) -> bool {
        self.loci.iter().all(|l| l.distance(x, y) >= self.exclusion)
    }

    /// (b, b_x, b_y) at a point outside the exclusion zones.
    pub fn eval_b(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        if !self.admissible(x, y) {
            return Err(Error::Domain(format!("point ({x}, {y}) lies within {} of a singular locus", self.exclusion)));
        }
        let out = self.eval_unchecked(x, y)?;
        if !(out.0.is_finite() && out.1.is_finite() && out.2.is_finite()) {
            return Err(Error::Domain(format!("b is not finite at ({x}, {y})")));
        }
        Ok(out)
    }

    fn eval_unchecked(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        match &self.kind {
            Kind::Case { id, params, profile } => {
                let d = eval_case(*id, params, profile.as_ref(), Dual::<2>::var(x, 0), Dual::<2>::var(y, 1));
                Ok((d.v, d.d[0], d.d[1]))
            }
            Kind::Expr(e) => Ok(e.eval_xy(x, y)),
            Kind::Grid(g) => {
                if !g.inside(x, y) {
                    return Err(Error::Domain(format!("point ({x}, {y}) is outside the grid")));
                }
                Ok(g.interp(x, y))
            }
            Kind::Transformed { inner, g } => {
                let (xi, yi) = g.unmap_xy(x, y);
                let (b, bx, by) = inner.eval_b(xi, yi)?;
                let k = g.kappa();
                let (gx, gy) = g.inv_transpose_apply(bx, by);
                Ok((k * b + g.d[6], k * gx, k * gy))
            }
            Kind::Plus { inner, c, p, q } => {
                let (b, bx, by) = inner.eval_b(x, y)?;
                Ok((b + 0.5 * c * (x * x + y * y) + p * x + q * y, bx + c * x + p, by + c * y + q))
            }
        }
    }

    /// b as a dual number in the jet variables (t, x, y, u, v, h).
    pub fn eval_jet(&self, x: Dual<6>, y: Dual<6>) -> Result<Dual<6>> {
        let (b, bx, by) = self.eval_b(x.v, y.v)?;
        let mut d = [0.0; 6];
        for i in 0..6 {
            d[i] = bx * x.d[i] + by * y.d[i];
        }
        Ok(Dual { v: b, d })
    }

    /// Default sampling region: an annulus around a singular point, a band
    /// avoiding singular lines, or a plain box.
    pub fn default_plan(&self, n: usize, seed: u64) -> SamplePlan {
        let region = match &self.kind {
            Kind::Grid(g) => {
                let pad = 3.0 * g.spacing;
                Region::Box {
                    x0: g.x0 + pad,
                    x1: g.x0 + (g.nx - 1) as f64 * g.spacing - pad,
                    y0: g.y0 + pad,
                    y1: g.y0 + (g.ny - 1) as f64 * g.spacing - pad,
                }
            }
            _ => {
                if let Some(Locus::Point { x, y }) = self.loci.iter().find(|l| matches!(l, Locus::Point { .. })) {
                    Region::Annulus { cx: *x, cy: *y, r0: 0.4, r1: 2.5 }
                } else if self.loci.is_empty() {
                    Region::Box { x0: -2.0, x1: 2.0, y0: -2.0, y1: 2.0 }
                } else {
                    Region::Band { half: 2.5, min_line_dist: 0.4 }
                }
            }
        };
        SamplePlan { region, n, seed, min_dist: self.exclusion }
    }

    /// Sample points following the default plan; images of transformed
    /// topographies are sampled in the source frame and pushed forward.
    pub fn default_points(&self, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
        match &self.kind {
            Kind::Transformed { inner, g } => Ok(inner.default_points(n, seed)?.into_iter().map(|(x, y)| g.map_xy(x, y)).collect()),
            Kind::Plus { inner, .. } => inner.default_points(n, seed),
            _ => self.sample_points(&self.default_plan(n, seed)),
        }
    }

    pub fn sample_points(&self, plan: &SamplePlan) -> Result<Vec<(f64, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        let mut out = Vec::with_capacity(plan.n);
        let max_tries = 2000 * plan.n.max(1);
        let mut tries = 0;
        while out.len() < plan.n {
            tries += 1;
            if tries > max_tries {
                return Err(Error::Config(format!(
                    "sampling region admits no points at distance {} from the singular set",
                    plan.min_dist
                )));
            }
            let (x, y) = plan.region.draw(&mut rng);
            if plan.region.accepts(x, y, &self.loci) && self.loci.iter().all(|l| l.distance(x, y) >= plan.min_dist) {
                out.push((x, y));
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    Box { x0: f64, x1: f64, y0: f64, y1: f64 },
    Annulus { cx: f64, cy: f64, r0: f64, r1: f64 },
    /// square [−half, half]² keeping `min_line_dist` from every singular line
    Band { half: f64, min_line_dist: f64 },
}

impl Region {
    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match *self {
            Region::Box { x0, x1, y0, y1 } => (rng.gen_range(x0..=x1), rng.gen_range(y0..=y1)),
            Region::Annulus { cx, cy, r1, .. } => (cx + rng.gen_range(-r1..=r1), cy + rng.gen_range(-r1..=r1)),
            Region::Band { half, .. } => (rng.gen_range(-half..=half), rng.gen_range(-half..=half)),
        }
    }

    fn accepts(&self, x: f64, y: f64, loci: &[Locus]) -> bool {
        match *self {
            Region::Box { .. } => true,
            Region::Annulus { cx, cy, r0, r1 } => {
                let r = (x - cx).hypot(y - cy);
                r >= r0 && r <= r1
            }
            Region::Band { min_line_dist, .. } => {
                loci.iter().all(|l| !matches!(l, Locus::Line { .. }) || l.distance(x, y) >= min_line_dist)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePlan {
    pub region: Region,
    pub n: usize,
    pub seed: u64,
    pub min_dist: f64,
}

impl SamplePlan {
    pub fn boxed(x0: f64, x1: f64, y0: f64, y1: f64, n: usize, seed: u64, min_dist: f64) -> SamplePlan {
        SamplePlan { region: Region::Box { x0, x1, y0, y1 }, n, seed, min_dist }
    }
}

fn eval_case<const N: usize>(id: CaseId, p: &CaseParams, f: Option<&Profile>, x: Dual<N>, y: Dual<N>) -> Dual<N> {
    use CaseId::*;
    let r2 = x * x + y * y;
    let half_r2 = r2.scale(0.5);
    let phi = || y.atan2(x);
    let prof = |a: Dual<N>| f.expect("profile checked at construction").apply(a);
    let eps = p.epsilon.unwrap_or(1.0);
    let delta = p.delta.unwrap_or(0.0);
    let beta = p.beta.unwrap_or(0.0);
    match id {
        Generic => unreachable!("generic has no closed form"),
        C1 => prof(phi() + r2.ln().scale(0.5 * beta)) / r2,
        C2 => prof(r2.sqrt()) + phi().scale(delta),
        C3a => prof(phi()) / r2,
        C3b => prof(phi()) / r2 + half_r2,
        C3c => prof(phi()) / r2 - half_r2,
        C4 => prof(y) + x.scale(delta),
        C5 => prof(y) + (x * x).scale(0.5),
        C6 => prof(y) - (x * x).scale(0.5),
        C7a => r2.powi(-1).scale(eps),
        C7b => r2.powi(-1).scale(eps) + half_r2,
        C7c => r2.powi(-1).scale(eps) - half_r2,
        C8a => y.powi(-2).scale(eps) + x.scale(delta),
        C8b => y.powi(-2).scale(eps) + half_r2,
        C8c => y.powi(-2).scale(eps) - half_r2,
        C9 => (x * x + (y * y).scale(beta * beta)).scale(0.5),
        C10 => (x * x).scale(0.5) + y.scale(delta),
        C11 => (x * x - (y * y).scale(beta * beta)).scale(0.5),
        C12 => (x * x).scale(-0.5) + y.scale(delta),
        C13 => (x * x + (y * y).scale(beta * beta)).scale(-0.5),
        C14a => Dual::cst(0.0),
        C14b => x,
        C14c => half_r2,
        C14d => -half_r2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(id: CaseId, p: CaseParams) -> Topography {
        Topography::make_case(id, p, None).unwrap()
    }

    #[test]
    fn catalog_values() {
        let t = case(CaseId::C14c, CaseParams::default());
        assert_eq!(t.eval_b(1.0, 1.0).unwrap().0, 1.0);
        let t = case(CaseId::C7a, CaseParams { epsilon: Some(1.0), ..Default::default() });
        assert_eq!(t.eval_b(1.0, 0.0).unwrap().0, 1.0);
        let (b, bx, by) = t.eval_b(3.0, 4.0).unwrap();
        assert!((b - 0.04).abs() < 1e-16 && (bx + 6.0 / 625.0).abs() < 1e-16 && (by + 8.0 / 625.0).abs() < 1e-16);
        let t = case(CaseId::C14c, CaseParams::default());
        assert_eq!(t.eval_b(3.0, 4.0).unwrap(), (12.5, 3.0, 4.0));
    }

    #[test]
    fn parameter_constraints() {
        let bad = Topography::make_case(CaseId::C9, CaseParams { beta: Some(1.5), ..Default::default() }, None);
        assert!(matches!(bad, Err(Error::Parameter(_))));
        let bad = Topography::make_case(CaseId::C7a, CaseParams { epsilon: Some(2.0), ..Default::default() }, None);
        assert!(matches!(bad, Err(Error::Parameter(_))));
        assert!(Topography::make_case(CaseId::C3a, CaseParams::default(), None).is_err());
    }

    #[test]
    fn singular_line() {
        let t = case(CaseId::C8a, CaseParams { epsilon: Some(1.0), delta: Some(0.0), ..Default::default() });
        assert_eq!(t.eval_b(0.0, 1.0).unwrap(), (1.0, 0.0, -2.0));
        assert!(matches!(t.eval_b(5.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn sampling_is_deterministic_and_admissible() {
        let t = case(CaseId::C14a, CaseParams::default());
        let plan = SamplePlan::boxed(-1.0, 1.0, -1.0, 1.0, 8, 7, DEFAULT_EXCLUSION);
        let a = t.sample_points(&plan).unwrap();
        assert_eq!(a.len(), 8);
        assert_eq!(a, t.sample_points(&plan).unwrap());

        let t = case(CaseId::C7a, CaseParams { epsilon: Some(1.0), ..Default::default() });
        let pts = t.sample_points(&SamplePlan::boxed(-1.0, 1.0, -1.0, 1.0, 200, 7, 0.3)).unwrap();
        assert!(pts.iter().all(|(x, y)| x.hypot(*y) >= 0.3));

        let err = t.sample_points(&SamplePlan::boxed(-1.0, 1.0, -1.0, 1.0, 8, 7, 1.5));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn profile_cases_use_chain_rule() {
        let t = Topography::make_case(CaseId::C3a, CaseParams::default(), Some(Profile::parse("sin(s)").unwrap())).unwrap();
        let (b, bx, by) = t.eval_b(0.0, 2.0).unwrap();
        // b = sin(φ)/r² at φ=π/2, r=2
        assert!((b - 0.25).abs() < 1e-15);
        // ∂x = cos φ·φ_x/r² − 2x sin φ/r⁴ = 0·(−1/2)/4 − 0 = 0 ; ∂y = −2y/r⁴ = −0.25
        assert!(bx.abs() < 1e-15 && (by + 0.25).abs() < 1e-15);
    }

    #[test]
    fn grid_gradient_converges_at_fourth_order() {
        let err = |n: usize| {
            let h = 4.0 / (n - 1) as f64;
            let g = GridData::from_fn(n, n, h, -2.0, -2.0, |x, y| x.sin() * y.cos()).unwrap();
            let t = Topography::from_grid(g);
            let mut e: f64 = 0.0;
            for k in 0..50 {
                let x = -1.0 + 2.0 * (k as f64 * 0.618).fract();
                let y = -1.0 + 2.0 * (k as f64 * 0.414).fract();
                let (_, bx, by) = t.eval_b(x, y).unwrap();
                e = e.max((bx - x.cos() * y.cos()).abs()).max((by + x.sin() * y.sin()).abs());
            }
            e
        };
        let (e1, e2) = (err(41), err(81));
        assert!(e1 / e2 > 12.0, "{e1} {e2}");
    }

    #[test]
    fn grid_csv_roundtrip() {
        let g = GridData::from_fn(9, 8, 0.5, -2.0, -1.0, |x, y| x * x + y).unwrap();
        let back = GridData::from_csv(&g.to_csv()).unwrap();
        assert_eq!(back.b, g.b);
        assert_eq!((back.nx, back.ny, back.x0, back.y0), (9, 8, -2.0, -1.0));
    }
}
