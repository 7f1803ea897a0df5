//! Hamiltonian structure on characteristics: the operator 𝔥, Casimir checks,
//! the bracket of characteristics, the action of Lie symmetries on them and
//! orbit computations for generating sets.
//!
//! Sign conventions follow `CharTuple`: Λ⁴(F) = (0, 0, F) and the mass
//! profile enters the classifying equation as +F⁴_t. The symmetry action's
//! mass slot is stated in that convention, which negates it relative to the
//! convention with −F⁴_t.

use crate::charspace::{self, canonical_span, characteristic_dual, distance_to_span, random_jets, CaseLabel, CharBasis, CharTuple, JetPoint, SNAP};
use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::furcate::eval_template_basis;
use crate::linalg;
use crate::swesolver::{Boundary, Grid, SimState};
use crate::timefun::QuasiPoly;
use crate::topography::{CaseId, Topography};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Relative tolerance for the symmetry classifying equation.
pub const TOL_SYMMETRY: f64 = 1e-8;
/// Closure tolerance for brackets of characteristics.
pub const TOL_CLOSURE: f64 = 1e-9;

fn q(c: f64) -> QuasiPoly {
    QuasiPoly::constant(c)
}

fn t_times(p: &QuasiPoly) -> QuasiPoly {
    p.mul_t()
}

fn d(p: &QuasiPoly) -> QuasiPoly {
    p.derivative()
}

/// F·G_t − G·F_t
fn wronskian(f: &QuasiPoly, g: &QuasiPoly) -> QuasiPoly {
    f.mul(&d(g)).sub(&g.mul(&d(f)))
}

// ---------------------------------------------------------------------------
// Symmetry vector fields

/// The Lie symmetry 2D(F¹) − c₁D^t − c₂J + P(F², F³), where
/// D(F) = F∂_t + ½F_t(x∂_x + y∂_y) − ½(F_t u − F_tt x)∂_u − ½(F_t v − F_tt y)∂_v − F_t h∂_h,
/// D^t = t∂_t − u∂_u − v∂_v − 2h∂_h,
/// J = x∂_y − y∂_x + u∂_v − v∂_u,
/// P(F², F³) = F²∂_x + F³∂_y + F²_t∂_u + F³_t∂_v.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymmetryVF {
    pub f1: QuasiPoly,
    pub f2: QuasiPoly,
    pub f3: QuasiPoly,
    pub c1: f64,
    pub c2: f64,
}

impl SymmetryVF {
    pub fn zero() -> Self {
        Self::default()
    }

    /// D(F).
    pub fn d(f: QuasiPoly) -> Self {
        SymmetryVF { f1: f.scale(0.5), ..Self::default() }
    }

    /// D^t.
    pub fn dt() -> Self {
        SymmetryVF { c1: -1.0, ..Self::default() }
    }

    /// D^s = 2D(t) − 2D^t.
    pub fn ds() -> Self {
        SymmetryVF { f1: QuasiPoly::monomial(1.0, 1), c1: 2.0, ..Self::default() }
    }

    pub fn j() -> Self {
        SymmetryVF { c2: -1.0, ..Self::default() }
    }

    pub fn p(f2: QuasiPoly, f3: QuasiPoly) -> Self {
        SymmetryVF { f2, f3, ..Self::default() }
    }

    pub fn add(&self, o: &SymmetryVF) -> SymmetryVF {
        SymmetryVF { f1: self.f1.add(&o.f1), f2: self.f2.add(&o.f2), f3: self.f3.add(&o.f3), c1: self.c1 + o.c1, c2: self.c2 + o.c2 }
    }

    pub fn scale(&self, k: f64) -> SymmetryVF {
        SymmetryVF { f1: self.f1.scale(k), f2: self.f2.scale(k), f3: self.f3.scale(k), c1: self.c1 * k, c2: self.c2 * k }
    }

    pub fn sub(&self, o: &SymmetryVF) -> SymmetryVF {
        self.add(&o.scale(-1.0))
    }

    /// The vector field 𝔥γ.
    pub fn of_tuple(ct: &CharTuple) -> SymmetryVF {
        SymmetryVF { f1: ct.f1.clone(), f2: ct.f2.clone(), f3: ct.f3.clone(), c1: 0.0, c2: ct.c1 }
    }

    /// (τ, ξ¹, ξ², η^u, η^v, η^h) at a point, with derivatives in all six
    /// variables.
    pub fn components_dual(&self, z: [Dual<6>; 6]) -> [Dual<6>; 6] {
        let [t, x, y, u, v, h] = z;
        let ev = |p: &QuasiPoly, n: usize| -> Dual<6> {
            let pn = p.nth_derivative(n);
            t.chain(pn.eval(t.v), pn.derivative().eval(t.v))
        };
        let (f1, f1t, f1tt) = (ev(&self.f1, 0), ev(&self.f1, 1), ev(&self.f1, 2));
        let (f2, f2t) = (ev(&self.f2, 0), ev(&self.f2, 1));
        let (f3, f3t) = (ev(&self.f3, 0), ev(&self.f3, 1));
        let (c1, c2) = (self.c1, self.c2);
        [
            f1.scale(2.0) - t.scale(c1),
            f1t * x + y.scale(c2) + f2,
            f1t * y - x.scale(c2) + f3,
            -(f1t * u - f1tt * x) + u.scale(c1) + v.scale(c2) + f2t,
            -(f1t * v - f1tt * y) + v.scale(c1) - u.scale(c2) + f3t,
            (f1t * h).scale(-2.0) + h.scale(2.0 * c1),
        ]
    }

    pub fn components(&self, p: [f64; 6]) -> [f64; 6] {
        self.components_dual(std::array::from_fn(|i| Dual::cst(p[i]))).map(|c| c.v)
    }

    /// Evolutionary characteristic η − τw_t − ξ¹w_x − ξ²w_y, on-shell.
    pub fn characteristic(&self, topo: &Topography, j: &JetPoint) -> Result<[f64; 3]> {
        let (_, bx, by) = topo.eval_b(j.x, j.y)?;
        let (ut, vt, ht) = j.on_shell(bx, by);
        let [tau, xi1, xi2, eu, ev, eh] = self.components(j.base());
        Ok([
            eu - tau * ut - xi1 * j.ux - xi2 * j.uy,
            ev - tau * vt - xi1 * j.vx - xi2 * j.vy,
            eh - tau * ht - xi1 * j.hx - xi2 * j.hy,
        ])
    }

    /// Left side of the symmetry classifying equation at (t, x, y); it must
    /// depend on t only.
    pub fn classifying_lhs(&self, topo: &Topography, t: f64, x: f64, y: f64) -> Result<f64> {
        let e = eval_template_basis(topo, x, y)?;
        let (b, _, _) = topo.eval_b(x, y)?;
        let a = self.template_profiles();
        Ok(a.iter().zip(e).map(|(p, v)| p.eval(t) * v).sum::<f64>() - 2.0 * self.c1 * b)
    }

    /// Time profiles multiplying the template basis in the classifying
    /// equation (the −2c₁b term aside).
    fn template_profiles(&self) -> [QuasiPoly; 8] {
        [
            d(&self.f1),
            q(self.c2),
            self.f2.clone(),
            self.f3.clone(),
            self.f1.nth_derivative(3).scale(-1.0),
            self.f2.nth_derivative(2).scale(-1.0),
            self.f3.nth_derivative(2).scale(-1.0),
            QuasiPoly::zero(),
        ]
    }

    /// The mass profile F⁴ of the symmetry, read off the classifying
    /// equation at the origin, or at (1, 0) when the origin is excluded, or
    /// at (0, 1) when both are.
    pub fn f4(&self, topo: &Topography) -> Result<QuasiPoly> {
        let (x, y) = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
            .into_iter()
            .find(|&(x, y)| topo.eval_b(x, y).is_ok())
            .ok_or_else(|| Error::Domain("no admissible point to read the symmetry mass profile".into()))?;
        let e = eval_template_basis(topo, x, y)?;
        let (b, _, _) = topo.eval_b(x, y)?;
        let a = self.template_profiles();
        let mut out = q(-2.0 * self.c1 * b);
        for (p, v) in a.iter().zip(e) {
            out = out.add(&p.scale(v));
        }
        Ok(out.pruned(1e-14))
    }

    /// Largest |classifying lhs − F⁴(t)| over sample points, relative to the
    /// size of the terms.
    pub fn symmetry_residual(&self, topo: &Topography, n: usize, seed: u64) -> Result<f64> {
        let f4 = self.f4(topo)?;
        let pts = topo.default_points(n, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51);
        let ts: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let vals: Vec<(f64, f64)> = pts
            .par_iter()
            .zip(&ts)
            .map(|(&(x, y), &t)| {
                let l = self.classifying_lhs(topo, t, x, y)?;
                let f = f4.eval(t);
                Ok(((l - f).abs(), l.abs().max(f.abs())))
            })
            .collect::<Result<_>>()?;
        let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.1));
        Ok(vals.iter().fold(0.0f64, |m, v| m.max(v.0)) / scale)
    }

    /// Closed-form commutator.
    pub fn commutator(&self, o: &SymmetryVF) -> SymmetryVF {
        let (f1, f2, f3, c1, c2) = (&self.f1, &self.f2, &self.f3, self.c1, self.c2);
        let (g1, g2, g3, d1, d2) = (&o.f1, &o.f2, &o.f3, o.c1, o.c2);
        let tf = |p: &QuasiPoly| t_times(&d(p));
        // [2D(F), P(G)] = P(2FG_t − F_tG)
        let dp = |f: &QuasiPoly, g: &QuasiPoly| f.mul(&d(g)).scale(2.0).sub(&d(f).mul(g));
        let n1 = wronskian(f1, g1).scale(2.0).add(&tf(f1).sub(f1).scale(d1)).sub(&tf(g1).sub(g1).scale(c1));
        let n2 = dp(f1, g2).sub(&dp(g1, f2)).sub(&tf(g2).scale(c1)).add(&tf(f2).scale(d1)).sub(&g3.scale(c2)).add(&f3.scale(d2));
        let n3 = dp(f1, g3).sub(&dp(g1, f3)).sub(&tf(g3).scale(c1)).add(&tf(f3).scale(d1)).add(&g2.scale(c2)).sub(&f2.scale(d2));
        SymmetryVF { f1: n1, f2: n2, f3: n3, c1: 0.0, c2: 0.0 }
    }

    pub fn max_coeff(&self) -> f64 {
        self.f1.max_coeff().max(self.f2.max_coeff()).max(self.f3.max_coeff()).max(self.c1.abs()).max(self.c2.abs())
    }
}

impl fmt::Display for SymmetryVF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = vec![];
        if !self.f1.is_zero() {
            parts.push(format!("2D({})", self.f1));
        }
        if self.c1 != 0.0 {
            parts.push(format!("{}·D^t", -self.c1));
        }
        if self.c2 != 0.0 {
            parts.push(format!("{}·J", -self.c2));
        }
        if !(self.f2.is_zero() && self.f3.is_zero()) {
            parts.push(format!("P({}, {})", self.f2, self.f3));
        }
        if parts.is_empty() {
            return f.write_str("0");
        }
        f.write_str(&parts.join(" + "))
    }
}

/// Pointwise commutator [X, Y]^i = X(Y^i) − Y(X^i) from dual-number
/// derivatives of the components.
pub fn commutator_numeric(a: &SymmetryVF, b: &SymmetryVF, p: [f64; 6]) -> [f64; 6] {
    let z: [Dual<6>; 6] = std::array::from_fn(|i| Dual::var(p[i], i));
    let ca = a.components_dual(z);
    let cb = b.components_dual(z);
    std::array::from_fn(|i| (0..6).map(|j| ca[j].v * cb[i].d[j] - cb[j].v * ca[i].d[j]).sum())
}

// ---------------------------------------------------------------------------
// The operator 𝔥

/// 𝔥γ = (qγ² − D_xγ³, −qγ¹ − D_yγ³, −D_xγ¹ − D_yγ²) with q = (v_x − u_y)/h.
pub fn apply_h(ct: &CharTuple, topo: &Topography, j: &JetPoint) -> Result<[f64; 3]> {
    if !(j.h > 0.0) {
        return Err(Error::Domain(format!("depth {} is not positive", j.h)));
    }
    let g = characteristic_dual(ct, topo, j.base())?;
    let dx = |f: &Dual<6>| f.d[1] + f.d[3] * j.ux + f.d[4] * j.vx + f.d[5] * j.hx;
    let dy = |f: &Dual<6>| f.d[2] + f.d[3] * j.uy + f.d[4] * j.vy + f.d[5] * j.hy;
    let pv = (j.vx - j.uy) / j.h;
    Ok([pv * g[1].v - dx(&g[2]), -pv * g[0].v - dy(&g[2]), -dx(&g[0]) - dy(&g[1])])
}

/// Sixth-order centred difference along a periodic line; the solver's own
/// stencils on audited grids.
fn diff(g: &Grid, f: &[f64], along_x: bool) -> Vec<f64> {
    if g.boundary != Boundary::Periodic {
        return if along_x { g.ddx(f) } else { g.ddy(f) };
    }
    let (nx, ny) = (g.nx as isize, g.ny as isize);
    let h = if along_x { g.dx } else { g.dy };
    (0..g.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = ((k % g.nx) as isize, (k / g.nx) as isize);
            let at = |o: isize| {
                if along_x {
                    f[(j * nx + (i + o).rem_euclid(nx)) as usize]
                } else {
                    f[((j + o).rem_euclid(ny) * nx + i) as usize]
                }
            };
            (45.0 * (at(1) - at(-1)) - 9.0 * (at(2) - at(-2)) + (at(3) - at(-3))) / (60.0 * h)
        })
        .collect()
}

/// 𝔥 applied to nodal values of γ on a grid state, by finite differences.
pub fn apply_h_grid(state: &SimState, gamma: [&[f64]; 3]) -> Result<[Vec<f64>; 3]> {
    state.check_positive().map_err(|e| Error::Domain(e.to_string()))?;
    let g = &state.grid;
    let pv = potential_vorticity(state);
    let (g1x, g2y) = (diff(g, gamma[0], true), diff(g, gamma[1], false));
    let (g3x, g3y) = (diff(g, gamma[2], true), diff(g, gamma[2], false));
    let n = g.len();
    let a = (0..n).map(|k| pv[k] * gamma[1][k] - g3x[k]).collect();
    let b = (0..n).map(|k| -pv[k] * gamma[0][k] - g3y[k]).collect();
    let c = (0..n).map(|k| -g1x[k] - g2y[k]).collect();
    Ok([a, b, c])
}

pub fn potential_vorticity(state: &SimState) -> Vec<f64> {
    let g = &state.grid;
    let (vx, uy) = (diff(g, &state.v, true), diff(g, &state.u, false));
    (0..g.len()).map(|k| (vx[k] - uy[k]) / state.h[k]).collect()
}

/// A Casimir density profile R(q) with its derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CasimirProfile {
    One,
    Linear,
    HalfSquare,
    Cube,
}

impl CasimirProfile {
    pub fn parse(s: &str) -> Result<CasimirProfile> {
        match s.trim() {
            "1" => Ok(Self::One),
            "q" => Ok(Self::Linear),
            "q2" | "q^2/2" | "half-square" => Ok(Self::HalfSquare),
            "q3" | "q^3" => Ok(Self::Cube),
            other => Err(Error::Parse(format!("unknown Casimir profile `{other}` (expected 1, q, q2 or q3)"))),
        }
    }

    pub fn eval(self, q: f64) -> (f64, f64) {
        match self {
            Self::One => (1.0, 0.0),
            Self::Linear => (q, 1.0),
            Self::HalfSquare => (0.5 * q * q, q),
            Self::Cube => (q * q * q, 3.0 * q * q),
        }
    }
}

/// Largest norm of 𝔥(D_yR′(q), −D_xR′(q), R − qR′) over the grid.
pub fn casimir_residual(r: CasimirProfile, state: &SimState) -> Result<f64> {
    let g = &state.grid;
    let pv = potential_vorticity(state);
    let vals: Vec<(f64, f64)> = pv.iter().map(|&q| r.eval(q)).collect();
    let rp: Vec<f64> = vals.iter().map(|v| v.1).collect();
    let third: Vec<f64> = vals.iter().zip(&pv).map(|(v, q)| v.0 - q * v.1).collect();
    let first = diff(g, &rp, false);
    let second: Vec<f64> = diff(g, &rp, true).iter().map(|x| -x).collect();
    let out = apply_h_grid(state, [&first, &second, &third])?;
    Ok((0..g.len()).map(|k| (out[0][k].powi(2) + out[1][k].powi(2) + out[2][k].powi(2)).sqrt()).fold(0.0, f64::max))
}

/// Casimir residuals on successively refined grids and the observed order.
pub fn casimir_convergence(r: CasimirProfile, sizes: &[usize], make: impl Fn(Grid) -> Result<SimState>, grid: impl Fn(usize) -> Result<Grid>) -> Result<(Vec<f64>, f64)> {
    let errs = sizes.iter().map(|&n| casimir_residual(r, &make(grid(n)?)?)).collect::<Result<Vec<_>>>()?;
    Ok((errs.clone(), crate::swesolver::observed_order(&errs)))
}

// ---------------------------------------------------------------------------
// Bracket

/// A bracket of characteristics: a tuple plus a remainder (0, 0, R) with
/// R = Σ r_i(t) e_i(x, y) over the template basis. R vanishes identically
/// when both arguments are characteristics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketResult {
    pub principal: CharTuple,
    pub remainder: [QuasiPoly; 8],
}

impl BracketResult {
    pub fn remainder_at(&self, topo: &Topography, t: f64, x: f64, y: f64) -> Result<f64> {
        let e = eval_template_basis(topo, x, y)?;
        Ok(self.remainder.iter().zip(e).map(|(p, v)| p.eval(t) * v).sum())
    }

    /// Largest |R| at the given (t, x, y).
    pub fn closure_defect(&self, topo: &Topography, pts: &[(f64, f64, f64)]) -> Result<f64> {
        let vals: Vec<f64> = pts.par_iter().map(|&(t, x, y)| self.remainder_at(topo, t, x, y).map(f64::abs)).collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    }
}

/// [γ₁, γ₂]_𝔥, the action of 𝔥γ₁ on γ₂, split into a tuple and the part that
/// vanishes on characteristics.
pub fn bracket_h(a: &CharTuple, b: &CharTuple) -> BracketResult {
    let (f1, f2, f3, f4, c) = (&a.f1, &a.f2, &a.f3, &a.f4, a.c1);
    let (g1, g2, g3, g4, cc) = (&b.f1, &b.f2, &b.f3, &b.f4, b.c1);
    let dp = |f: &QuasiPoly, g: &QuasiPoly| f.mul(&d(g)).scale(2.0).sub(&d(f).mul(g));
    let principal = CharTuple {
        c1: 0.0,
        f1: wronskian(f1, g1).scale(2.0),
        f2: dp(f1, g2).sub(&dp(g1, f2)).sub(&g3.scale(c)).add(&f3.scale(cc)),
        f3: dp(f1, g3).sub(&dp(g1, f3)).add(&g2.scale(c)).sub(&f2.scale(cc)),
        f4: f1.mul(&d(g4)).sub(&g1.mul(&d(f4))).scale(2.0).sub(&wronskian(f2, g2)).sub(&wronskian(f3, g3)),
    };
    // 2G¹ times the classifying equation of γ₁
    let mut rem = SymmetryVF::of_tuple(a).template_profiles();
    rem[7] = d(f4);
    let remainder = rem.map(|p| p.mul(g1).scale(2.0));
    BracketResult { principal, remainder }
}

// ---------------------------------------------------------------------------
// Symmetry action

/// 𝔏_Qγ, the action of a Lie symmetry on a characteristic. Satisfies
/// 𝔥𝔏_Qγ = [Q, 𝔥γ] + 3c₁𝔥γ.
pub fn lie_action(sym: &SymmetryVF, ct: &CharTuple, topo: &Topography) -> Result<CharTuple> {
    let res = sym.symmetry_residual(topo, 64, 3)?;
    if res > TOL_SYMMETRY {
        return Err(Error::Precondition(format!("{sym} is not a symmetry of this bottom (residual {res:.3e})")));
    }
    let f4q = sym.f4(topo)?;
    Ok(lie_action_unchecked(sym, &f4q, ct))
}

fn lie_action_unchecked(sym: &SymmetryVF, f4q: &QuasiPoly, ct: &CharTuple) -> CharTuple {
    let (f1, f2, f3, c1, c2) = (&sym.f1, &sym.f2, &sym.f3, sym.c1, sym.c2);
    let (g1, g2, g3, g4, cc) = (&ct.f1, &ct.f2, &ct.f3, &ct.f4, ct.c1);
    let dp = |f: &QuasiPoly, g: &QuasiPoly| f.mul(&d(g)).scale(2.0).sub(&d(f).mul(g));
    let tf = |p: &QuasiPoly| t_times(&d(p));
    let slot = CharTuple {
        c1: 0.0,
        f1: wronskian(f1, g1).scale(2.0).sub(&tf(g1).sub(g1).scale(c1)),
        f2: dp(f1, g2).sub(&dp(g1, f2)).sub(&tf(g2).scale(c1)).sub(&g3.scale(c2)).add(&f3.scale(cc)),
        f3: dp(f1, g3).sub(&dp(g1, f3)).sub(&tf(g3).scale(c1)).add(&g2.scale(c2)).sub(&f2.scale(cc)),
        f4: f1
            .mul(&d(g4))
            .scale(2.0)
            .sub(&tf(g4).scale(c1))
            .sub(&g4.scale(c1))
            .sub(&wronskian(f2, g2))
            .sub(&wronskian(f3, g3))
            .add(&f4q.mul(g1).scale(2.0)),
    };
    slot.add(&ct.scale(3.0 * c1))
}

// ---------------------------------------------------------------------------
// Symmetry algebras of the catalog

fn qp(c: f64, n: u32) -> QuasiPoly {
    QuasiPoly::monomial(c, n)
}

/// Basis of the Lie symmetry algebra for a catalog case in its normal form.
pub fn symmetry_algebra(label: &CaseLabel) -> Vec<SymmetryVF> {
    use CaseId::*;
    let one = || q(1.0);
    let t = |n: u32| qp(1.0, n);
    let dd = SymmetryVF::d;
    let p = SymmetryVF::p;
    let z = QuasiPoly::zero;
    let delta = label.params.delta.unwrap_or(0.0);
    let beta = label.params.beta.unwrap_or(0.0);
    let mut out = vec![dd(one())];
    let exp2 = || vec![dd(QuasiPoly::exp(2.0)), dd(QuasiPoly::exp(-2.0))];
    let trig2 = || vec![dd(QuasiPoly::cos(2.0)), dd(QuasiPoly::sin(2.0))];
    let px_exp = || vec![p(QuasiPoly::exp(1.0), z()), p(QuasiPoly::exp(-1.0), z())];
    let px_trig = || vec![p(QuasiPoly::cos(1.0), z()), p(QuasiPoly::sin(1.0), z())];
    let py_lin = || vec![p(z(), one()), p(z(), t(1))];
    let shift_ds = |k: f64| SymmetryVF::ds().add(&p(z(), qp(-0.5 * k, 2)));
    match label.case {
        Generic => {}
        C1 => out.push(SymmetryVF { f1: t(1), c2: beta, ..Default::default() }),
        C2 => out.push(SymmetryVF::j()),
        C3a => out.extend([dd(t(1)), dd(t(2))]),
        C3b => out.extend(exp2()),
        C3c => out.extend(trig2()),
        C4 => out.extend([p(one(), z()), p(t(1), z())]),
        C5 => out.extend(px_exp()),
        C6 => out.extend(px_trig()),
        C7a => out.extend([dd(t(1)), dd(t(2)), SymmetryVF::j()]),
        C7b => {
            out.extend(exp2());
            out.push(SymmetryVF::j());
        }
        C7c => {
            out.extend(trig2());
            out.push(SymmetryVF::j());
        }
        C8a => out.extend([
            dd(t(1)).add(&p(qp(0.75 * delta, 2), z())),
            dd(t(2)).add(&p(qp(0.5 * delta, 3), z())),
            p(one(), z()),
            p(t(1), z()),
        ]),
        C8b => {
            out.extend(exp2());
            out.extend(px_exp());
        }
        C8c => {
            out.extend(trig2());
            out.extend(px_trig());
        }
        C9 => {
            out.push(SymmetryVF::ds());
            out.extend(px_exp());
            out.extend([p(z(), QuasiPoly::exp(beta)), p(z(), QuasiPoly::exp(-beta))]);
        }
        C10 => {
            out.push(shift_ds(delta));
            out.extend(px_exp());
            out.extend(py_lin());
        }
        C11 => {
            out.push(SymmetryVF::ds());
            out.extend(px_exp());
            out.extend([p(z(), QuasiPoly::cos(beta)), p(z(), QuasiPoly::sin(beta))]);
        }
        C12 => {
            out.push(shift_ds(delta));
            out.extend(px_trig());
            out.extend(py_lin());
        }
        C13 => {
            out.push(SymmetryVF::ds());
            out.extend(px_trig());
            out.extend([p(z(), QuasiPoly::cos(beta)), p(z(), QuasiPoly::sin(beta))]);
        }
        C14a => {
            out.extend([dd(t(1)), dd(t(2)), SymmetryVF::ds(), SymmetryVF::j(), p(one(), z()), p(t(1), z())]);
            out.extend(py_lin());
        }
        C14b => {
            out.extend([
                dd(t(1)).add(&p(qp(0.75, 2), z())),
                dd(t(2)).add(&p(qp(0.5, 3), z())),
                SymmetryVF::ds().add(&p(qp(-0.5, 2), z())),
                SymmetryVF::j().add(&p(z(), qp(-0.5, 2))),
                p(one(), z()),
                p(t(1), z()),
            ]);
            out.extend(py_lin());
        }
        C14c => {
            out.extend(exp2());
            out.extend([SymmetryVF::ds(), SymmetryVF::j()]);
            out.extend(px_exp());
            out.extend([p(z(), QuasiPoly::exp(1.0)), p(z(), QuasiPoly::exp(-1.0))]);
        }
        C14d => {
            out.extend(trig2());
            out.extend([SymmetryVF::ds(), SymmetryVF::j()]);
            out.extend(px_trig());
            out.extend([p(z(), QuasiPoly::cos(1.0)), p(z(), QuasiPoly::sin(1.0))]);
        }
    }
    out
}

/// Seeds whose orbit spans Ch⁰_b, for the cases that remain after the extra
/// admissible maps; None for the cases reduced to another one.
pub fn generating_set(label: &CaseLabel) -> Option<Vec<CharTuple>> {
    use CaseId::*;
    let one = || q(1.0);
    let energy = || CharTuple::lambda1(one());
    let mass = || CharTuple::lambda4(one());
    let delta = label.params.delta.unwrap_or(0.0);
    Some(match label.case {
        Generic | C3a => vec![mass(), energy()],
        // the rotational part enters with refined c₁ = +β
        C1 => vec![mass(), CharTuple { c1: label.params.beta.unwrap_or(0.0), ..CharTuple::lambda1(qp(1.0, 1)) }],
        C2 if delta == 0.0 => vec![mass(), energy(), CharTuple::lambda0()],
        C2 => vec![energy(), CharTuple { c1: -1.0, f4: qp(-delta, 1), ..CharTuple::zero() }],
        C4 if delta == 0.0 => vec![energy(), CharTuple::lambda2(qp(1.0, 1))],
        C7a => vec![mass(), energy(), CharTuple::lambda0()],
        C8a if delta == 0.0 => vec![energy()],
        C10 | C12 if delta == 0.0 => vec![energy(), CharTuple::lambda3(qp(1.0, 1))],
        C5 | C6 | C9 | C11 | C13 => vec![energy()],
        C14a => vec![energy(), CharTuple::lambda0()],
        _ => return None,
    })
}

// ---------------------------------------------------------------------------
// Orbits

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitResult {
    pub span: Vec<CharTuple>,
    pub dimension: usize,
    pub target_dimension: usize,
    pub closed: bool,
    pub iterations: usize,
    /// catalog generators that failed the symmetry check and were skipped
    pub skipped_generators: usize,
}

/// Closes the span of `seeds` under the symmetry action and the bracket, and
/// compares it with the characteristic space of `topo`.
pub fn generating_orbit(topo: &Topography, seeds: &[CharTuple]) -> Result<OrbitResult> {
    let a = charspace::analyse(topo, 0)?;
    let algebra = symmetry_algebra(&a.label);
    orbit_with(topo, seeds, &algebra, &a.basis)
}

pub fn orbit_with(topo: &Topography, seeds: &[CharTuple], algebra: &[SymmetryVF], basis: &CharBasis) -> Result<OrbitResult> {
    let mut gens = vec![];
    let mut skipped = 0;
    for g in algebra {
        if g.symmetry_residual(topo, 64, 3)? <= TOL_SYMMETRY {
            gens.push((g.clone(), g.f4(topo)?));
        } else {
            skipped += 1;
        }
    }
    let bound = basis.dimension + 1;
    let mut span = canonical_span(seeds, SNAP);
    let mut iterations = 0;
    loop {
        if iterations > bound {
            return Err(Error::Internal(format!("orbit did not stabilize within {bound} rounds")));
        }
        iterations += 1;
        let mut next = span.clone();
        for s in &span {
            for (g, f4) in &gens {
                next.push(lie_action_unchecked(g, f4, s));
            }
            for r in &span {
                next.push(bracket_h(s, r).principal);
            }
        }
        let next = canonical_span(&next.into_iter().map(|c| c.pruned(1e-12)).collect::<Vec<_>>(), SNAP);
        if next.len() == span.len() {
            span = next;
            break;
        }
        span = next;
    }
    let inside = span.iter().map(|s| distance_to_span(&basis.tuples, s)).collect::<Result<Vec<_>>>()?;
    let closed = span.len() == basis.dimension && inside.iter().all(|&e| e < 1e-6);
    Ok(OrbitResult { dimension: span.len(), target_dimension: basis.dimension, closed, iterations, span, skipped_generators: skipped })
}

/// Rank of 𝔥 on the span of `basis`, from its values at random jets.
pub fn image_rank(basis: &[CharTuple], topo: &Topography, n: usize, seed: u64) -> Result<usize> {
    let jets: Vec<JetPoint> = random_jets(topo, n, seed)?.into_iter().map(|e| e.jet).collect();
    let rows: Vec<Vec<f64>> = basis
        .iter()
        .map(|ct| {
            let v = jets.iter().map(|j| apply_h(ct, topo, j)).collect::<Result<Vec<_>>>()?;
            Ok(v.into_iter().flatten().collect())
        })
        .collect::<Result<_>>()?;
    let m = DMatrix::from_fn(rows.len(), 3 * n, |i, k| rows[i][k]);
    Ok(linalg::rank(&m, 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charspace::{analyse, residual_classifying, residual_cosymmetry, TOL_CLASSIFYING, TOL_COSYMMETRY};
    use crate::fixtures;
    use crate::topography::CaseParams;
    use proptest::prelude::*;

    fn case(id: CaseId) -> Topography {
        Topography::make_case(id, CaseParams::default(), None).unwrap()
    }

    /// Fixtures given in the normal form their catalog algebra refers to.
    fn normal_forms() -> Vec<fixtures::Fixture> {
        fixtures::catalog().unwrap().into_iter().filter(|f| f.topo.nominal_case().is_none_or(|c| c == f.expected)).collect()
    }

    fn jets(topo: &Topography, n: usize) -> Vec<JetPoint> {
        random_jets(topo, n, 5).unwrap().into_iter().map(|e| e.jet).collect()
    }

    fn in_ch(ct: &CharTuple, topo: &Topography) -> (f64, f64) {
        let js = jets(topo, 100);
        let txy: Vec<_> = js.iter().map(|j| (j.t, j.x, j.y)).collect();
        (residual_classifying(ct, topo, &txy).unwrap(), residual_cosymmetry(ct, topo, &js).unwrap())
    }

    fn close(a: [f64; 3], b: [f64; 3]) -> f64 {
        (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn h_on_named_characteristics() {
        let topo = Topography::from_expr("sin(x)*cos(2*y) + x*y", vec![]).unwrap();
        for j in jets(&topo, 50) {
            let z = apply_h(&CharTuple::lambda4(QuasiPoly::exp(0.3)), &topo, &j).unwrap();
            assert!(z.iter().all(|v| v.abs() < 1e-14));
            let a = apply_h(&CharTuple::lambda0(), &topo, &j).unwrap();
            assert!(close(a, SymmetryVF::j().characteristic(&topo, &j).unwrap()) < 1e-10);
            for f in [q(1.0), qp(1.0, 2), QuasiPoly::cos(1.3)] {
                let a = apply_h(&CharTuple::lambda1(f.clone()), &topo, &j).unwrap();
                let b = SymmetryVF::d(f.scale(2.0)).characteristic(&topo, &j).unwrap();
                assert!(close(a, b) < 1e-10, "{a:?} {b:?}");
                let a = apply_h(&CharTuple::lambda2(f.clone()), &topo, &j).unwrap();
                assert!(close(a, SymmetryVF::p(f.clone(), QuasiPoly::zero()).characteristic(&topo, &j).unwrap()) < 1e-10);
                let a = apply_h(&CharTuple::lambda3(f.clone()), &topo, &j).unwrap();
                assert!(close(a, SymmetryVF::p(QuasiPoly::zero(), f.clone()).characteristic(&topo, &j).unwrap()) < 1e-10);
            }
        }
        let mut bad = jets(&topo, 1)[0];
        bad.h = 0.0;
        assert!(matches!(apply_h(&CharTuple::lambda0(), &topo, &bad), Err(Error::Domain(_))));
    }

    #[test]
    fn time_scaling_is_not_hamiltonian() {
        // D^t[w] outside the image of 𝔥 on Ch for b = 0
        let topo = case(CaseId::C14a);
        let a = analyse(&topo, 0).unwrap();
        let js = jets(&topo, 40);
        let rows: Vec<Vec<f64>> = a.basis.tuples.iter().map(|ct| js.iter().flat_map(|j| apply_h(ct, &topo, j).unwrap()).collect()).collect();
        let target: Vec<f64> = js.iter().flat_map(|j| SymmetryVF::dt().characteristic(&topo, j).unwrap()).collect();
        let m = DMatrix::from_fn(rows.len(), target.len(), |i, k| rows[i][k]);
        let with = DMatrix::from_fn(rows.len() + 1, target.len(), |i, k| if i < rows.len() { rows[i][k] } else { target[k] });
        assert_eq!(linalg::rank(&with, 1e-9), linalg::rank(&m, 1e-9) + 1);
    }

    fn arb_vf() -> impl Strategy<Value = SymmetryVF> {
        let coef = -2.0..2.0f64;
        (prop::array::uniform4(coef.clone()), prop::array::uniform4(coef.clone()), prop::array::uniform3(coef.clone()), coef.clone(), coef).prop_map(|(a, b, c, c1, c2)| {
            SymmetryVF {
                f1: q(a[0]).add(&qp(a[1], 1)).add(&QuasiPoly::exp(0.5).scale(a[2])).add(&QuasiPoly::sin(1.5).scale(a[3])),
                f2: q(b[0]).add(&qp(b[1], 2)).add(&QuasiPoly::exp(-1.0).scale(b[2])).add(&QuasiPoly::cos(1.0).scale(b[3])),
                f3: qp(c[0], 1).add(&qp(c[1], 3)).add(&QuasiPoly::exp(0.7).scale(c[2])),
                c1,
                c2,
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn commutator_matches_numeric(a in arb_vf(), b in arb_vf(), p in prop::array::uniform6(-1.5..1.5f64)) {
            let closed = a.commutator(&b).components(p);
            let num = commutator_numeric(&a, &b, p);
            let scale = 1.0 + num.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..6 {
                prop_assert!((closed[i] - num[i]).abs() < 1e-10 * scale, "{i}: {closed:?} vs {num:?}");
            }
        }

        #[test]
        fn bracket_is_bilinear_and_antisymmetric_on_ch(s in prop::array::uniform4(-1.0..1.0f64), r in prop::array::uniform4(-1.0..1.0f64)) {
            let topo = case(CaseId::C14b);
            let a = analyse(&topo, 0).unwrap();
            let comb = |w: &[f64; 4], off: usize| a.basis.tuples.iter().skip(off).zip(w).fold(CharTuple::zero(), |acc, (t, c)| acc.add(&t.scale(*c)));
            let (x, y) = (comb(&s, 0), comb(&r, 4));
            let xy = bracket_h(&x, &y).principal;
            let yx = bracket_h(&y, &x).principal;
            prop_assert!(xy.add(&yx).pruned(1e-11).is_zero(), "{}", xy.add(&yx));
            let lin = bracket_h(&x.scale(2.0).add(&y), &y).principal;
            prop_assert!(lin.approx_eq(&xy.scale(2.0), 1e-10));
        }
    }

    #[test]
    fn bracket_examples() {
        let f = QuasiPoly::exp(0.4);
        let g = qp(1.0, 2);
        assert!(bracket_h(&CharTuple::lambda2(f.clone()), &CharTuple::lambda3(g.clone())).principal.is_zero());
        let r = bracket_h(&CharTuple::lambda0(), &CharTuple::lambda3(g.clone()));
        assert!(r.principal.approx_eq(&CharTuple::lambda2(g.clone()), 1e-14));
        let r = bracket_h(&CharTuple::lambda0(), &CharTuple::lambda2(g.clone()));
        assert!(r.principal.approx_eq(&CharTuple::lambda3(g.scale(-1.0)), 1e-14));
        let flat = case(CaseId::C14a);
        let r = bracket_h(&CharTuple::lambda1(q(1.0)), &CharTuple::lambda1(qp(1.0, 1)));
        assert!(r.principal.approx_eq(&CharTuple::lambda1(q(2.0)), 1e-14));
        assert_eq!(r.closure_defect(&flat, &[(0.3, 1.0, -2.0), (1.0, 0.5, 0.5)]).unwrap(), 0.0);
        // Λ⁰ against Λ¹ leaves 2F(xb_y − yb_x), which vanishes only for radial b
        let r = bracket_h(&CharTuple::lambda0(), &CharTuple::lambda1(q(1.0)));
        let topo = Topography::from_expr("x", vec![]).unwrap();
        let v = r.remainder_at(&topo, 0.0, 0.5, 2.0).unwrap();
        assert!((v - 2.0 * (0.5 * 0.0 - 2.0 * 1.0)).abs() < 1e-14, "{v}");
    }

    #[test]
    fn lie_action_examples() {
        let flat = case(CaseId::C14a);
        let r = lie_action(&SymmetryVF::p(q(1.0), QuasiPoly::zero()), &CharTuple::lambda2(qp(1.0, 1)), &flat).unwrap();
        assert!(r.approx_eq(&CharTuple::lambda4(q(-1.0)), 1e-14), "{r}");
        let shift = SymmetryVF { f1: q(1.0), ..Default::default() };
        let r = lie_action(&shift, &CharTuple::lambda1(qp(1.0, 1)), &flat).unwrap();
        assert!(r.approx_eq(&CharTuple::lambda1(q(2.0)), 1e-14), "{r}");
        let rot = SymmetryVF { c2: 1.0, ..Default::default() };
        let f = QuasiPoly::cos(1.0);
        let r = lie_action(&rot, &CharTuple::lambda2(f.clone()), &flat).unwrap();
        assert!(r.approx_eq(&CharTuple::lambda3(f), 1e-14), "{r}");
        // D^t is no symmetry of b = x
        let topo = case(CaseId::C14b);
        assert!(matches!(lie_action(&SymmetryVF::dt(), &CharTuple::lambda4(q(1.0)), &topo), Err(Error::Precondition(_))));
    }

    #[test]
    fn mass_slot_sign_on_linear_bottom() {
        // P(1,0) on Λ¹(t) + Λ²(3t²/2) − Λ⁴(t³/2) for b = x lands on
        // Λ²(1) − Λ⁴(t), the momentum law of a linear bottom.
        let topo = case(CaseId::C14b);
        let g = CharTuple { f1: qp(1.0, 1), f2: qp(1.5, 2), f4: qp(-0.5, 3), ..Default::default() };
        let (c, s) = in_ch(&g, &topo);
        assert!(c < 1e-12 && s < 1e-12);
        let r = lie_action(&SymmetryVF::p(q(1.0), QuasiPoly::zero()), &g, &topo).unwrap();
        let want = CharTuple { f2: q(1.0), f4: qp(-1.0, 1), ..Default::default() };
        assert!(r.approx_eq(&want, 1e-13), "{r}");
    }

    #[test]
    fn catalog_algebras_are_symmetries() {
        let mut bad = vec![];
        for f in normal_forms() {
            let a = analyse(&f.topo, 0).unwrap();
            let alg = symmetry_algebra(&a.label);
            for g in &alg {
                let r = g.symmetry_residual(&f.topo, 200, 1).unwrap();
                if r > TOL_SYMMETRY {
                    bad.push(format!("{}: {g} residual {r:.2e}", f.name));
                }
            }
            // the algebra is linearly independent as vector fields
            let pts: Vec<[f64; 6]> = (0..20).map(|k| {
                let s = k as f64;
                [0.1 * s - 1.0, 0.7 + 0.05 * s, 0.3 * (s * 0.7).sin() + 0.9, (s * 1.3).cos(), (s * 0.4).sin(), 1.0 + 0.02 * s]
            }).collect();
            let m = DMatrix::from_fn(alg.len(), 120, |i, k| alg[i].components(pts[k / 6])[k % 6]);
            if linalg::rank(&m, 1e-10) != alg.len() {
                bad.push(format!("{}: dependent algebra", f.name));
            }
        }
        assert!(bad.is_empty(), "{bad:#?}");
    }

    #[test]
    fn action_preserves_characteristics_and_is_a_homomorphism() {
        let mut bad = vec![];
        for f in normal_forms() {
            let topo = &f.topo;
            let a = analyse(topo, 0).unwrap();
            let alg = symmetry_algebra(&a.label);
            let js = jets(topo, 30);
            for g in &alg {
                let f4 = g.f4(topo).unwrap();
                for ct in &a.basis.tuples {
                    let out = lie_action_unchecked(g, &f4, ct);
                    let (c, s) = in_ch(&out, topo);
                    let scale = 1.0 + out.max_coeff();
                    if c > TOL_CLASSIFYING * scale || s > TOL_COSYMMETRY * scale {
                        bad.push(format!("{}: {g} on {ct}: {c:.2e} {s:.2e}", f.name));
                    }
                    // 𝔥𝔏_Qγ = [Q, 𝔥γ] + 3c₁𝔥γ as characteristics
                    let lhs_vf = SymmetryVF::of_tuple(&out);
                    let hv = SymmetryVF::of_tuple(ct);
                    let rhs_vf = g.commutator(&hv).add(&hv.scale(3.0 * g.c1));
                    for j in &js {
                        let l = lhs_vf.characteristic(topo, j).unwrap();
                        let r = rhs_vf.characteristic(topo, j).unwrap();
                        let e = close(l, r);
                        if e > 1e-8 * (1.0 + l.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                            bad.push(format!("{}: homomorphism {g} on {ct}: {e:.2e}", f.name));
                            break;
                        }
                    }
                }
            }
        }
        assert!(bad.is_empty(), "{:#?}", &bad[..bad.len().min(12)]);
    }

    #[test]
    fn action_is_a_representation() {
        for id in [CaseId::C14a, CaseId::C14b] {
            let topo = case(id);
            let a = analyse(&topo, 0).unwrap();
            let alg = symmetry_algebra(&a.label);
            for x in &alg {
                for y in &alg {
                    let xy = x.commutator(y);
                    let (fx, fy, fxy) = (x.f4(&topo).unwrap(), y.f4(&topo).unwrap(), xy.f4(&topo).unwrap());
                    for ct in &a.basis.tuples {
                        let lhs = lie_action_unchecked(&xy, &fxy, ct);
                        let rhs = lie_action_unchecked(x, &fx, &lie_action_unchecked(y, &fy, ct)).sub(&lie_action_unchecked(y, &fy, &lie_action_unchecked(x, &fx, ct)));
                        assert!(lhs.approx_eq(&rhs, 1e-9), "{id}: [{x}, {y}] on {ct}: {lhs} vs {rhs}");
                    }
                }
            }
        }
    }

    #[test]
    fn brackets_close_on_every_fixture() {
        let mut bad = vec![];
        for f in fixtures::catalog().unwrap() {
            let topo = &f.topo;
            let a = analyse(topo, 0).unwrap();
            let js = jets(topo, 60);
            let txy: Vec<_> = js.iter().map(|j| (j.t, j.x, j.y)).collect();
            for x in &a.basis.tuples {
                for y in &a.basis.tuples {
                    let br = bracket_h(x, y);
                    let defect = br.closure_defect(topo, &txy).unwrap();
                    let scale = 1.0 + x.max_coeff() * y.max_coeff();
                    if defect > TOL_CLOSURE * scale {
                        bad.push(format!("{}: [{x}] [{y}] defect {defect:.2e}", f.name));
                    }
                    let (c, s) = in_ch(&br.principal, topo);
                    if c > TOL_CLASSIFYING * scale || s > TOL_COSYMMETRY * scale {
                        bad.push(format!("{}: bracket leaves Ch: {c:.2e} {s:.2e}", f.name));
                    }
                }
            }
            let rank = image_rank(&a.basis.tuples, topo, 40, 2).unwrap();
            if rank + 1 != a.basis.dimension {
                bad.push(format!("{}: image rank {rank} for dimension {}", f.name, a.basis.dimension));
            }
        }
        assert!(bad.is_empty(), "{:#?}", &bad[..bad.len().min(12)]);
    }

    #[test]
    fn casimirs_on_a_periodic_state() {
        use crate::swesolver::smooth_periodic_state;
        let g = Grid::square(64, 0.0, 1.0, Boundary::Periodic).unwrap();
        let s = smooth_periodic_state(g, 0.3).unwrap();
        assert_eq!(casimir_residual(CasimirProfile::One, &s).unwrap(), 0.0);
        let (errs, order) = casimir_convergence(CasimirProfile::HalfSquare, &[32, 64, 128], |g| smooth_periodic_state(g, 0.1), |n| Grid::square(n, 0.0, std::f64::consts::TAU, Boundary::Periodic)).unwrap();
        assert!(order >= 2.0 && errs[2] < 1e-6, "{errs:?} {order}");
    }

    #[test]
    fn orbits() {
        let flat = case(CaseId::C14a);
        let r = generating_orbit(&flat, &[CharTuple::lambda1(q(1.0)), CharTuple::lambda0()]).unwrap();
        assert!(r.closed && r.dimension == 9, "{r:?}");
        let r = generating_orbit(&flat, &[CharTuple::lambda4(q(1.0))]).unwrap();
        assert!(!r.closed && r.dimension == 1);
        let generic = Topography::from_expr("exp(x)*sin(y) + x^3*y", vec![]).unwrap();
        let r = generating_orbit(&generic, &[CharTuple::lambda4(q(1.0)), CharTuple::lambda1(q(1.0))]).unwrap();
        assert!(r.closed && r.dimension == 2, "{r:?}");
    }

    #[test]
    fn generating_sets_span_every_listed_case() {
        let mut checked = 0;
        for f in crate::fixtures::catalog().unwrap() {
            let a = charspace::analyse(&f.topo, 0).unwrap();
            let Some(seeds) = generating_set(&a.label) else { continue };
            if f.topo.nominal_case().is_some_and(|c| c != a.label.case) {
                continue;
            }
            for s in &seeds {
                let d = distance_to_span(&a.basis.tuples, s).unwrap();
                assert!(d < 1e-8, "{}: seed {s} off the space by {d:e}", f.name);
            }
            let r = orbit_with(&f.topo, &seeds, &symmetry_algebra(&a.label), &a.basis).unwrap();
            assert!(r.closed, "{}: {r:?}", f.name);
            checked += 1;
        }
        assert!(checked >= 16, "{checked}");
    }

}
