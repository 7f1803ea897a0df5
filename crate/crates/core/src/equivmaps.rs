//! Equivalence transformations of the class and the extra admissible maps
//! between specific systems.

use crate::charspace::JetPoint;
use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::swesolver::{gaussian_hump, step_rk4_with, Boundary, Bottom, Grid, SimState};
use crate::topography::{CaseId, Topography};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// An element of the equivalence group:
/// t̃ = δ₁t+δ₂, (x̃,ỹ) = R(x,y) + (δ₅,δ₆), (ũ,ṽ) = R(u,v)/δ₁,
/// h̃ = κh, b̃ = κb + δ₇, with R = [[δ₃, −εδ₄], [δ₄, εδ₃]] and κ = (δ₃²+δ₄²)/δ₁².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivElement {
    /// δ₁..δ₇ stored at indices 0..6
    pub d: [f64; 7],
    pub eps: f64,
}

impl Default for EquivElement {
    fn default() -> Self {
        Self::identity()
    }
}

impl EquivElement {
    pub fn identity() -> Self {
        EquivElement { d: [1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], eps: 1.0 }
    }

    pub fn new(d: [f64; 7], eps: f64) -> Result<Self> {
        let g = EquivElement { d, eps };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps != 1.0 && self.eps != -1.0 {
            return Err(Error::Parameter(format!("epsilon must be ±1, got {}", self.eps)));
        }
        if !self.d.iter().all(|v| v.is_finite()) || self.d[0] == 0.0 || self.rho2() == 0.0 {
            return Err(Error::Parameter("equivalence element needs δ₁(δ₃²+δ₄²) ≠ 0".into()));
        }
        Ok(())
    }

    pub fn shift_xy(dx: f64, dy: f64) -> Self {
        let mut g = Self::identity();
        g.d[4] = dx;
        g.d[5] = dy;
        g
    }

    pub fn shift_b(db: f64) -> Self {
        let mut g = Self::identity();
        g.d[6] = db;
        g
    }

    /// Rotation by θ composed with spatial scaling by `s`.
    pub fn rotation_scaling(theta: f64, s: f64) -> Self {
        let mut g = Self::identity();
        g.d[2] = s * theta.cos();
        g.d[3] = s * theta.sin();
        g
    }

    pub fn time_scaling(d1: f64) -> Self {
        let mut g = Self::identity();
        g.d[0] = d1;
        g
    }

    /// y ↦ −y, v ↦ −v
    pub fn reflection() -> Self {
        let mut g = Self::identity();
        g.eps = -1.0;
        g
    }

    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let s = rng.gen_range(0.6..1.6);
        let d1 = rng.gen_range(0.6..1.6) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        EquivElement {
            d: [
                d1,
                rng.gen_range(-1.0..1.0),
                s * theta.cos(),
                s * theta.sin(),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-1.0..1.0),
            ],
            eps: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
        }
    }

    pub fn rho2(&self) -> f64 {
        self.d[2] * self.d[2] + self.d[3] * self.d[3]
    }

    pub fn kappa(&self) -> f64 {
        self.rho2() / (self.d[0] * self.d[0])
    }

    pub fn rot(&self) -> [[f64; 2]; 2] {
        let (d3, d4, e) = (self.d[2], self.d[3], self.eps);
        [[d3, -e * d4], [d4, e * d3]]
    }

    pub fn rot_inv(&self) -> [[f64; 2]; 2] {
        let (d3, d4, e, r) = (self.d[2], self.d[3], self.eps, self.rho2());
        [[d3 / r, d4 / r], [-e * d4 / r, e * d3 / r]]
    }

    pub fn map_xy(&self, x: f64, y: f64) -> (f64, f64) {
        let r = self.rot();
        (r[0][0] * x + r[0][1] * y + self.d[4], r[1][0] * x + r[1][1] * y + self.d[5])
    }

    pub fn unmap_xy(&self, x: f64, y: f64) -> (f64, f64) {
        let ri = self.rot_inv();
        let (a, b) = (x - self.d[4], y - self.d[5]);
        (ri[0][0] * a + ri[0][1] * b, ri[1][0] * a + ri[1][1] * b)
    }

    /// R⁻ᵀ v, the transformation law of gradients.
    pub fn inv_transpose_apply(&self, vx: f64, vy: f64) -> (f64, f64) {
        let ri = self.rot_inv();
        (ri[0][0] * vx + ri[1][0] * vy, ri[0][1] * vx + ri[1][1] * vy)
    }

    /// Image of a point (t, x, y, u, v, h).
    pub fn map_state(&self, p: [f64; 6]) -> [f64; 6] {
        let r = self.rot();
        let (x, y) = self.map_xy(p[1], p[2]);
        [
            self.d[0] * p[0] + self.d[1],
            x,
            y,
            (r[0][0] * p[3] + r[0][1] * p[4]) / self.d[0],
            (r[1][0] * p[3] + r[1][1] * p[4]) / self.d[0],
            self.kappa() * p[5],
        ]
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &EquivElement) -> EquivElement {
        let (a, b) = (self.rot(), first.rot());
        let r = [
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ];
        let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
        let (s5, s6) = self.map_xy(first.d[4], first.d[5]);
        EquivElement {
            d: [
                self.d[0] * first.d[0],
                self.d[0] * first.d[1] + self.d[1],
                r[0][0],
                r[1][0],
                s5,
                s6,
                self.kappa() * first.d[6] + self.d[6],
            ],
            eps: det.signum(),
        }
    }

    pub fn inverse(&self) -> EquivElement {
        let ri = self.rot_inv();
        let (s5, s6) = (self.d[4], self.d[5]);
        EquivElement {
            d: [
                1.0 / self.d[0],
                -self.d[1] / self.d[0],
                ri[0][0],
                ri[1][0],
                -(ri[0][0] * s5 + ri[0][1] * s6),
                -(ri[1][0] * s5 + ri[1][1] * s6),
                -self.d[6] / self.kappa(),
            ],
            eps: self.eps,
        }
    }

    pub fn approx_eq(&self, o: &EquivElement, tol: f64) -> bool {
        self.eps == o.eps && self.d.iter().zip(&o.d).all(|(a, b)| (a - b).abs() <= tol * (1.0 + a.abs()))
    }
}

/// b̃ = κb + δ₇ at the mapped points, with the singular set carried along.
pub fn apply_equiv_to_topo(g: &EquivElement, topo: &Arc<Topography>) -> Result<Topography> {
    g.validate()?;
    Ok(topo.transformed(g))
}

// ---------------------------------------------------------------------------
// Admissible maps outside the equivalence group

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MapKind {
    /// b = F − ½r² with F homogeneous of degree −2 ↦ b̃ = F:
    /// t̃ = tan t, x̃ = x/cos t, ũ = u cos t + x sin t, h̃ = h cos²t.
    T1,
    /// b = F + ½r² ↦ b̃ = F:
    /// t̃ = ½e^{2t}, x̃ = eᵗx, ũ = e^{−t}(u + x), h̃ = e^{−2t}h.
    T2,
    /// b = f(y) + s·x ↦ b̃ = f(ỹ): x̃ = x − ½st², ũ = u − st. With axis Y
    /// the roles of (x, u) and (y, v) are exchanged.
    T3 { axis: Axis, strength: f64 },
}

impl MapKind {
    pub fn parse(s: &str) -> Result<MapKind> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T1" => Ok(MapKind::T1),
            "T2" => Ok(MapKind::T2),
            "T3" | "T3X" => Ok(MapKind::T3 { axis: Axis::X, strength: 1.0 }),
            "T3Y" => Ok(MapKind::T3 { axis: Axis::Y, strength: 1.0 }),
            other => Err(Error::Parse(format!("unknown map `{other}` (expected T1, T2, T3 or T3Y)"))),
        }
    }
}

/// A point transformation of (t, x, y, u, v, h) together with the bottom it
/// produces.
#[derive(Clone, Debug)]
pub struct PointMap {
    pub kind: MapKind,
    pub source: Arc<Topography>,
    pub target: Arc<Topography>,
}

const COS_FLOOR: f64 = 1e-8;

impl PointMap {
    /// Checks that `source` has the form the map requires and builds the
    /// image bottom.
    pub fn admissible_map(kind: MapKind, source: &Arc<Topography>) -> Result<PointMap> {
        let pts = source.default_points(64, 11)?;
        let target = match kind {
            MapKind::T1 | MapKind::T2 => {
                let c = if kind == MapKind::T1 { 1.0 } else { -1.0 };
                let f = source.plus(c, 0.0, 0.0);
                // F(λp) = λ⁻²F(p)
                let lam = 1.3;
                let mut worst = 0.0f64;
                let mut scale = 1.0f64;
                for &(x, y) in &pts {
                    let (a, ..) = f.eval_b(x, y)?;
                    let (b, ..) = match f.eval_b(lam * x, lam * y) {
                        Ok(v) => v,
                        Err(_) => continue,
                    };
                    worst = worst.max((b * lam * lam - a).abs());
                    scale = scale.max(a.abs());
                }
                if worst > 1e-8 * scale {
                    return Err(Error::Precondition(format!(
                        "{kind:?} needs b = F {} ½r² with F homogeneous of degree −2 (defect {worst:.2e})",
                        if c > 0.0 { "−" } else { "+" }
                    )));
                }
                f
            }
            MapKind::T3 { axis, strength } => {
                let mut worst = 0.0f64;
                for &(x, y) in &pts {
                    let (_, bx, by) = source.eval_b(x, y)?;
                    let g = if axis == Axis::X { bx } else { by };
                    worst = worst.max((g - strength).abs());
                }
                if worst > 1e-8 * (1.0 + strength.abs()) {
                    return Err(Error::Precondition(format!("T3 needs b linear with slope {strength} along {axis:?} (defect {worst:.2e})")));
                }
                match axis {
                    Axis::X => source.plus(0.0, -strength, 0.0),
                    Axis::Y => source.plus(0.0, 0.0, -strength),
                }
            }
        };
        Ok(PointMap { kind, source: source.clone(), target: Arc::new(target) })
    }

    pub fn validity(&self) -> &'static str {
        match self.kind {
            MapKind::T1 => "cos t ≠ 0",
            MapKind::T2 | MapKind::T3 { .. } => "all t",
        }
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if self.kind == MapKind::T1 && t.cos().abs() < COS_FLOOR {
            return Err(Error::Domain(format!("T1 is undefined at t = {t} (cos t = 0)")));
        }
        Ok(())
    }

    /// Image of (t, x, y, u, v, h), differentiable in all six variables.
    pub fn forward_dual(&self, z: [Dual<6>; 6]) -> Result<[Dual<6>; 6]> {
        let [t, x, y, u, v, h] = z;
        self.check_time(t.v)?;
        Ok(match self.kind {
            MapKind::T1 => {
                let (c, s) = (t.cos(), t.sin());
                [t.tan(), x / c, y / c, u * c + x * s, v * c + y * s, h * c * c]
            }
            MapKind::T2 => {
                let e = t.exp();
                [(e * e).scale(0.5), e * x, e * y, (u + x) / e, (v + y) / e, h / (e * e)]
            }
            MapKind::T3 { axis, strength: s } => {
                let shift = (t * t).scale(0.5 * s);
                match axis {
                    Axis::X => [t, x - shift, y, u - t.scale(s), v, h],
                    Axis::Y => [t, x, y - shift, u, v - t.scale(s), h],
                }
            }
        })
    }

    pub fn forward(&self, p: [f64; 6]) -> Result<[f64; 6]> {
        Ok(self.forward_dual(p.map(Dual::cst))?.map(|d| d.v))
    }

    /// Source time of a target time.
    pub fn source_time(&self, tt: f64) -> Result<f64> {
        match self.kind {
            MapKind::T1 => Ok(tt.atan()),
            MapKind::T2 => {
                if tt > 0.0 {
                    Ok(0.5 * (2.0 * tt).ln())
                } else {
                    Err(Error::Domain(format!("T2 images have t̃ > 0, got {tt}")))
                }
            }
            MapKind::T3 { .. } => Ok(tt),
        }
    }

    pub fn inverse(&self, p: [f64; 6]) -> Result<[f64; 6]> {
        let [tt, xt, yt, ut, vt, ht] = p;
        let t = self.source_time(tt)?;
        self.check_time(t)?;
        Ok(match self.kind {
            MapKind::T1 => {
                let (c, s) = (t.cos(), t.sin());
                let (x, y) = (xt * c, yt * c);
                [t, x, y, (ut - x * s) / c, (vt - y * s) / c, ht / (c * c)]
            }
            MapKind::T2 => {
                let e = t.exp();
                let (x, y) = (xt / e, yt / e);
                [t, x, y, ut * e - x, vt * e - y, ht * e * e]
            }
            MapKind::T3 { axis, strength: s } => match axis {
                Axis::X => [t, xt + 0.5 * s * t * t, yt, ut + s * t, vt, ht],
                Axis::Y => [t, xt, yt + 0.5 * s * t * t, ut, vt + s * t, ht],
            },
        })
    }

    /// Residual of the target equations at the image of an on-shell source
    /// jet, with derivatives transported by the chain rule.
    pub fn jet_residual(&self, j: &JetPoint) -> Result<f64> {
        let z: [Dual<6>; 6] = std::array::from_fn(|i| Dual::var(j.base()[i], i));
        let img = self.forward_dual(z)?;
        let (_, bx, by) = self.source.eval_b(j.x, j.y)?;
        let (ut, vt, ht) = j.on_shell(bx, by);
        // total derivatives of w along t, x, y
        let dw = [[ut, vt, ht], [j.ux, j.vx, j.hx], [j.uy, j.vy, j.hy]];
        let total = |f: &Dual<6>, a: usize| f.d[a] + f.d[3] * dw[a][0] + f.d[4] * dw[a][1] + f.d[5] * dw[a][2];
        let amat = nalgebra::Matrix3::from_fn(|i, a| total(&img[i], a));
        let inv = amat.try_inverse().ok_or_else(|| Error::Domain("degenerate map Jacobian".into()))?;
        // ∂w̃_k/∂x̃_i = Σ_a D_a w̃_k (A⁻¹)_{a i}
        let d = |k: usize, i: usize| (0..3).map(|a| total(&img[3 + k], a) * inv[(a, i)]).sum::<f64>();
        let (u, v, h) = (img[3].v, img[4].v, img[5].v);
        let (_, tbx, tby) = self.target.eval_b(img[1].v, img[2].v)?;
        let r1 = d(0, 0) + u * d(0, 1) + v * d(0, 2) + d(2, 1) - tbx;
        let r2 = d(1, 0) + u * d(1, 1) + v * d(1, 2) + d(2, 2) - tby;
        let r3 = d(2, 0) + u * d(2, 1) + h * d(0, 1) + v * d(2, 2) + h * d(1, 2);
        Ok(r1.abs().max(r2.abs()).max(r3.abs()))
    }

    /// Spatial part of the map at source time t: x̃ = a·x + c.
    fn spatial_affine(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        match self.kind {
            MapKind::T1 => {
                let c = 1.0 / t.cos();
                ([c, c], [0.0, 0.0])
            }
            MapKind::T2 => {
                let e = t.exp();
                ([e, e], [0.0, 0.0])
            }
            MapKind::T3 { axis, strength: s } => match axis {
                Axis::X => ([1.0, 1.0], [-0.5 * s * t * t, 0.0]),
                Axis::Y => ([1.0, 1.0], [0.0, -0.5 * s * t * t]),
            },
        }
    }
}

/// The case a source case lands in, for the listed admissible maps. T³ keeps
/// the case and sets δ to 0.
pub fn expected_image(kind: MapKind, source: CaseId) -> Option<CaseId> {
    use CaseId::*;
    match (kind, source) {
        (MapKind::T1, C3c) | (MapKind::T2, C3b) => Some(C3a),
        (MapKind::T1, C7c) | (MapKind::T2, C7b) => Some(C7a),
        (MapKind::T1, C8c) | (MapKind::T2, C8b) => Some(C8a),
        (MapKind::T1, C14d) | (MapKind::T2, C14c) => Some(C14a),
        (MapKind::T3 { axis: Axis::X, .. }, C14b) => Some(C14a),
        (MapKind::T3 { axis: Axis::X, .. }, C4 | C8a) | (MapKind::T3 { axis: Axis::Y, .. }, C10 | C12) => Some(source),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Pushing numerical solutions through a map

/// Three source snapshots around a central time, for centred time
/// derivatives.
#[derive(Clone, Debug)]
pub struct SourceRun {
    pub topo: Arc<Topography>,
    pub snapshots: [SimState; 3],
}

impl SourceRun {
    /// Integrates `init` to t* − δ, t*, t* + δ with steps of at most `dt`.
    pub fn new(init: &SimState, topo: &Arc<Topography>, t_star: f64, delta: f64, dt: f64) -> Result<SourceRun> {
        if !(t_star - delta > init.t && delta > 0.0) {
            return Err(Error::Config("source run needs t* − δ after the initial time".into()));
        }
        let bottom = Bottom::new(topo, &init.grid)?;
        let advance = |s: &SimState, t1: f64| -> Result<SimState> {
            let n = ((t1 - s.t) / dt).ceil().max(1.0) as usize;
            let h = (t1 - s.t) / n as f64;
            let mut cur = s.clone();
            for _ in 0..n {
                cur = step_rk4_with(&cur, &bottom, h)?;
            }
            cur.t = t1;
            Ok(cur)
        };
        let a = advance(init, t_star - delta)?;
        let b = advance(&a, t_star)?;
        let c = advance(&b, t_star + delta)?;
        Ok(SourceRun { topo: topo.clone(), snapshots: [a, b, c] })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushReport {
    /// RMS of the target equations on the pushed solution
    pub residual: f64,
    /// RMS of the source equations on the source solution
    pub baseline: f64,
    pub ratio: f64,
}

/// Three-point derivative at the middle of unevenly spaced samples.
fn d3(ts: [f64; 3], f: [f64; 3]) -> f64 {
    let (hm, hp) = (ts[1] - ts[0], ts[2] - ts[1]);
    -hp / (hm * (hm + hp)) * f[0] + (hp - hm) / (hm * hp) * f[1] + hm / (hp * (hm + hp)) * f[2]
}

/// RMS of the system residual over the interior 80% of `grid`, given
/// states at three times. Node values follow trajectories with positions
/// `paths` (None for fixed nodes), so time derivatives at fixed points get a
/// convective correction.
fn equation_rms(grid: &Grid, times: [f64; 3], states: [&[Vec<f64>; 3]; 3], paths: Option<[&[Vec<f64>; 2]; 3]>, topo: &Topography) -> Result<f64> {
    let mid = states[1];
    let (ux, uy) = (grid.ddx(&mid[0]), grid.ddy(&mid[0]));
    let (vx, vy) = (grid.ddx(&mid[1]), grid.ddy(&mid[1]));
    let (hx, hy) = (grid.ddx(&mid[2]), grid.ddy(&mid[2]));
    let grads = [[&ux, &uy], [&vx, &vy], [&hx, &hy]];
    let (i0, i1) = (grid.nx / 10, grid.nx - grid.nx / 10);
    let (j0, j1) = (grid.ny / 10, grid.ny - grid.ny / 10);
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in j0..j1 {
        for i in i0..i1 {
            let k = grid.idx(i, j);
            let node_vel = paths.map(|p| [0, 1].map(|a| d3(times, [p[0][a][k], p[1][a][k], p[2][a][k]])));
            let dt = |c: usize| {
                let along = d3(times, [states[0][c][k], states[1][c][k], states[2][c][k]]);
                match node_vel {
                    Some(w) => along - w[0] * grads[c][0][k] - w[1] * grads[c][1][k],
                    None => along,
                }
            };
            let (u, v, h) = (mid[0][k], mid[1][k], mid[2][k]);
            let (_, bx, by) = topo.eval_b(grid.x(i), grid.y(j))?;
            let r1 = dt(0) + u * ux[k] + v * uy[k] + hx[k] - bx;
            let r2 = dt(1) + u * vx[k] + v * vy[k] + hy[k] - by;
            let r3 = dt(2) + ux[k] * h + u * hx[k] + vy[k] * h + v * hy[k];
            sum += r1 * r1 + r2 * r2 + r3 * r3;
            count += 1;
        }
    }
    Ok((sum / count as f64).sqrt())
}

/// Pushes a numerical solution through `map` and compares equation
/// residuals. Each source node is carried by the map, so the target grid at
/// the central time is the affine image of the source grid and no
/// interpolation is needed.
pub fn push_state(map: &PointMap, run: &SourceRun) -> Result<PushReport> {
    let src = &run.snapshots;
    let g = src[1].grid;
    let fields = |s: &SimState| [s.u.clone(), s.v.clone(), s.h.clone()];
    let sf = [fields(&src[0]), fields(&src[1]), fields(&src[2])];
    let ts = [src[0].t, src[1].t, src[2].t];
    let baseline = equation_rms(&g, ts, [&sf[0], &sf[1], &sf[2]], None, &run.topo)?;

    let (a, c) = map.spatial_affine(ts[1]);
    let tg = Grid::new(g.nx, g.ny, g.dx * a[0], g.dy * a[1], g.x0 * a[0] + c[0], g.y0 * a[1] + c[1], g.boundary)?;
    let mut tt = [0.0; 3];
    let mut pushed: Vec<[Vec<f64>; 3]> = vec![];
    let mut paths: Vec<[Vec<f64>; 2]> = vec![];
    for (m, s) in src.iter().enumerate() {
        tt[m] = map.forward([s.t, 0.0, 0.0, 0.0, 0.0, 1.0])?[0];
        let n = g.len();
        let (mut w, mut p) = ([vec![0.0; n], vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]);
        for k in 0..n {
            let img = map.forward([s.t, g.x(k % g.nx), g.y(k / g.nx), s.u[k], s.v[k], s.h[k]])?;
            p[0][k] = img[1];
            p[1][k] = img[2];
            w[0][k] = img[3];
            w[1][k] = img[4];
            w[2][k] = img[5];
        }
        pushed.push(w);
        paths.push(p);
    }
    let residual = equation_rms(&tg, tt, [&pushed[0], &pushed[1], &pushed[2]], Some([&paths[0], &paths[1], &paths[2]]), &map.target)?;
    Ok(PushReport { residual, baseline, ratio: residual / baseline })
}

/// Runs a still-water hump over `bottom` on an n×n grid covering [1, 3]²
/// to t = 0.2 and pushes it through `map`.
pub fn push_check(map: &PointMap, n: usize) -> Result<PushReport> {
    let grid = Grid::new(n, n, 2.0 / n as f64, 2.0 / n as f64, 1.0, 1.0, Boundary::Audited)?;
    let init = gaussian_hump(grid, 1.0, 0.05, 0.3, (2.1, 1.9))?;
    let dt = (0.2 * grid.dx).min(0.5 * init.cfl_limit());
    let run = SourceRun::new(&init, &map.source, 0.2, 0.01, dt)?;
    push_state(map, &run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_validation() {
        let g = EquivElement::identity();
        assert_eq!(g.map_state([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(EquivElement::new([0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], 1.0).is_err());
        assert!(EquivElement::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0).is_err());
        assert!(EquivElement::new([1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn composition_matches_sequential_application(s1 in 0u64..1000, s2 in 0u64..1000,
            p in proptest::array::uniform6(-2.0f64..2.0)) {
            let g1 = EquivElement::random(&mut ChaCha8Rng::seed_from_u64(s1));
            let g2 = EquivElement::random(&mut ChaCha8Rng::seed_from_u64(s2 + 5000));
            let seq = g2.map_state(g1.map_state(p));
            let comp = g2.compose(&g1).map_state(p);
            for k in 0..6 {
                prop_assert!((seq[k] - comp[k]).abs() < 1e-11 * (1.0 + seq[k].abs()));
            }
            let back = g1.inverse().map_state(g1.map_state(p));
            for k in 0..6 {
                prop_assert!((back[k] - p[k]).abs() < 1e-11 * (1.0 + p[k].abs()));
            }
            prop_assert!(g1.compose(&g1.inverse()).approx_eq(&EquivElement::identity(), 1e-12));
        }
    }

    fn jets(topo: &Topography, n: usize, seed: u64) -> Vec<JetPoint> {
        crate::charspace::random_jets(topo, n, seed)
            .unwrap()
            .into_iter()
            .map(|e| JetPoint { t: 0.4 * e.jet.t, ..e.jet })
            .collect()
    }

    fn map_cases() -> Vec<(&'static str, MapKind, &'static str)> {
        let x1 = MapKind::T3 { axis: Axis::X, strength: 1.0 };
        let y1 = MapKind::T3 { axis: Axis::Y, strength: 1.0 };
        vec![
            ("3c-sin", MapKind::T1, "3a"),
            ("7c-plus", MapKind::T1, "7a"),
            ("8c-plus", MapKind::T1, "8a"),
            ("14d", MapKind::T1, "14a"),
            ("3b-sin", MapKind::T2, "3a"),
            ("7b-minus", MapKind::T2, "7a"),
            ("8b-plus", MapKind::T2, "8a"),
            ("14c", MapKind::T2, "14a"),
            ("14b", x1, "14a"),
            ("4-cos-delta1", x1, "4"),
            ("8a-delta1", x1, "8a"),
            ("10-delta1", y1, "10"),
            ("12-delta1", y1, "12"),
        ]
    }

    #[test]
    fn maps_send_solutions_to_solutions() {
        for (name, kind, _) in map_cases() {
            let f = crate::fixtures::by_name(name).unwrap();
            let m = PointMap::admissible_map(kind, &f.topo).unwrap();
            for j in jets(&f.topo, 40, 3) {
                let r = m.jet_residual(&j).unwrap();
                assert!(r < 1e-9, "{name} {kind:?}: {r:e}");
                let p = j.base();
                let back = m.inverse(m.forward(p).unwrap()).unwrap();
                for k in 0..6 {
                    assert!((back[k] - p[k]).abs() < 1e-10 * (1.0 + p[k].abs()), "{name}: {back:?} vs {p:?}");
                }
            }
        }
    }

    #[test]
    fn image_bottoms_classify_as_expected() {
        for (name, kind, expected) in map_cases() {
            let f = crate::fixtures::by_name(name).unwrap();
            let m = PointMap::admissible_map(kind, &f.topo).unwrap();
            let a = crate::charspace::analyse(&m.target, 0).unwrap();
            assert_eq!(a.label.case.label(), expected, "{name} {kind:?}");
            assert_eq!(expected_image(kind, f.expected).map(|c| c.label()), Some(expected), "{name}");
            assert_eq!(a.label.dimension, f.dimension, "{name} {kind:?}");
            if expected != "14a" && name != "8c-plus" && name != "8b-plus" {
                // T3 removes the linear part
                if let Some(d) = a.label.params.delta {
                    assert!(d.abs() < 1e-9, "{name}: delta {d}");
                }
            }
        }
    }

    #[test]
    fn maps_reject_wrong_bottoms() {
        let f = crate::fixtures::by_name("3a-sin").unwrap();
        for kind in [MapKind::T1, MapKind::T2, MapKind::T3 { axis: Axis::X, strength: 1.0 }] {
            assert!(matches!(PointMap::admissible_map(kind, &f.topo), Err(Error::Precondition(_))));
        }
        let m = PointMap::admissible_map(MapKind::T1, &crate::fixtures::by_name("14d").unwrap().topo).unwrap();
        assert!(matches!(m.forward([std::f64::consts::FRAC_PI_2, 1.0, 1.0, 0.0, 0.0, 1.0]), Err(Error::Domain(_))));
        let m = PointMap::admissible_map(MapKind::T2, &crate::fixtures::by_name("14c").unwrap().topo).unwrap();
        assert!(matches!(m.inverse([-1.0, 1.0, 1.0, 0.0, 0.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn equivalence_images_keep_their_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for name in ["1-sin", "7a-plus", "9-half", "14b"] {
            let f = crate::fixtures::by_name(name).unwrap();
            let g = EquivElement::random(&mut rng);
            let t = Arc::new(apply_equiv_to_topo(&g, &f.topo).unwrap());
            let a = crate::charspace::analyse(&t, 0).unwrap();
            assert_eq!(a.label.case, f.expected, "{name}");
            assert_eq!(a.label.dimension, f.dimension, "{name}");
        }
    }

    #[test]
    fn pushed_solutions_keep_their_residual() {
        use crate::swesolver::{gaussian_hump, Boundary};
        let f = crate::fixtures::by_name("14c").unwrap();
        let grid = Grid::new(64, 64, 6.0 / 64.0, 6.0 / 64.0, -3.0, -3.0, Boundary::Audited).unwrap();
        let init = gaussian_hump(grid, 1.0, 0.1, 0.7, (0.6, 0.3)).unwrap();
        let run = SourceRun::new(&init, &f.topo, 0.2, 0.01, 0.01).unwrap();
        let m = PointMap::admissible_map(MapKind::T2, &f.topo).unwrap();
        let r = push_state(&m, &run).unwrap();
        assert!(r.ratio < 5.0, "{r:?}");
        let same = PointMap { kind: MapKind::T3 { axis: Axis::X, strength: 0.0 }, source: f.topo.clone(), target: f.topo.clone() };
        let r0 = push_state(&same, &run).unwrap();
        assert!((r0.residual - r0.baseline).abs() <= 1e-12 * r0.baseline, "{r0:?}");
    }


    #[test]
    fn every_map_keeps_the_pushforward_residual() {
        for (name, kind, _) in map_cases() {
            let f = crate::fixtures::by_name(name).unwrap();
            let m = PointMap::admissible_map(kind, &f.topo).unwrap();
            let r = push_check(&m, 48).unwrap();
            assert!(r.ratio <= 5.0, "{name} {kind:?}: {r:?}");
        }
    }

}
