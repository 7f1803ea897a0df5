//! Zeroth-order conservation-law characteristics: the parametrized tuple,
//! its conserved current, exact residual checks in jet space, the solver
//! that turns a template system into a basis, and the case matcher.

use crate::dual::Dual;
use crate::equivmaps::EquivElement;
use crate::error::{Error, Result};
use crate::furcate::{self, CompatReport, TemplateSystem};
use crate::linalg;
use crate::timefun::{QuasiPoly, Term};
use crate::topography::{CaseId, CaseParams, Topography};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const TOL_CLASSIFYING: f64 = 1e-9;
pub const TOL_COSYMMETRY: f64 = 1e-8;
pub const TOL_DIVERGENCE: f64 = 1e-9;
/// Widening applied when some gradient comes from data.
pub const APPROX_FACTOR: f64 = 10.0;
/// Snapping tolerance for canonical coefficients.
pub const SNAP: f64 = 1e-8;
/// Keys of profiles closer than this are treated as one.
const KEY_MERGE: f64 = 1e-9;

/// A characteristic γ parametrized by a constant and four time profiles, in
/// the refined form
/// γ¹ = (−2F¹u + F¹_t x + c₁y + F²)h,
/// γ² = (−2F¹v − c₁x + F¹_t y + F³)h,
/// γ³ = −F¹(u²+v²+2h) + (F¹_t x + c₁y + F²)u + (−c₁x + F¹_t y + F³)v
///      + 2F¹b − ½F¹_tt(x²+y²) − F²_t x − F³_t y + F⁴.
/// The rotational characteristic Λ⁰ = (−yh, xh, xv − yu) is c₁ = −1.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CharTuple {
    pub c1: f64,
    pub f1: QuasiPoly,
    pub f2: QuasiPoly,
    pub f3: QuasiPoly,
    pub f4: QuasiPoly,
}

impl CharTuple {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Λ⁰, the angular-momentum characteristic.
    pub fn lambda0() -> Self {
        CharTuple { c1: -1.0, ..Self::default() }
    }

    pub fn lambda1(f: QuasiPoly) -> Self {
        CharTuple { f1: f, ..Self::default() }
    }

    pub fn lambda2(f: QuasiPoly) -> Self {
        CharTuple { f2: f, ..Self::default() }
    }

    pub fn lambda3(f: QuasiPoly) -> Self {
        CharTuple { f3: f, ..Self::default() }
    }

    pub fn lambda4(f: QuasiPoly) -> Self {
        CharTuple { f4: f, ..Self::default() }
    }

    pub fn add(&self, o: &CharTuple) -> CharTuple {
        CharTuple { c1: self.c1 + o.c1, f1: self.f1.add(&o.f1), f2: self.f2.add(&o.f2), f3: self.f3.add(&o.f3), f4: self.f4.add(&o.f4) }
    }

    pub fn scale(&self, k: f64) -> CharTuple {
        CharTuple { c1: self.c1 * k, f1: self.f1.scale(k), f2: self.f2.scale(k), f3: self.f3.scale(k), f4: self.f4.scale(k) }
    }

    pub fn sub(&self, o: &CharTuple) -> CharTuple {
        self.add(&o.scale(-1.0))
    }

    pub fn max_coeff(&self) -> f64 {
        [self.f1.max_coeff(), self.f2.max_coeff(), self.f3.max_coeff(), self.f4.max_coeff(), self.c1.abs()].into_iter().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.max_coeff() == 0.0
    }

    pub fn pruned(&self, tol: f64) -> CharTuple {
        let cut = tol * self.max_coeff();
        let p = |q: &QuasiPoly| {
            QuasiPoly::from_terms(q.terms().iter().map(|t| Term {
                c: if t.c.abs() <= cut { 0.0 } else { t.c },
                s: if t.s.abs() <= cut { 0.0 } else { t.s },
                ..*t
            }))
        };
        CharTuple { c1: if self.c1.abs() <= cut { 0.0 } else { self.c1 }, f1: p(&self.f1), f2: p(&self.f2), f3: p(&self.f3), f4: p(&self.f4) }
    }

    pub fn approx_eq(&self, o: &CharTuple, tol: f64) -> bool {
        let d = self.sub(o);
        d.max_coeff() <= tol * self.max_coeff().max(o.max_coeff()).max(1.0)
    }

    fn eval_data(&self) -> TupleEval {
        let ders = |q: &QuasiPoly, n: usize| (0..=n).map(|k| q.nth_derivative(k)).collect::<Vec<_>>();
        TupleEval { c: self.c1, f1: ders(&self.f1, 4), f2: ders(&self.f2, 3), f3: ders(&self.f3, 3), f4: ders(&self.f4, 2) }
    }
}

impl fmt::Display for CharTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.c1 != 0.0 {
            parts.push(format!("c1 = {}", self.c1));
        }
        for (name, q) in [("F1", &self.f1), ("F2", &self.f2), ("F3", &self.f3), ("F4", &self.f4)] {
            if !q.is_zero() {
                parts.push(format!("{name} = {q}"));
            }
        }
        if parts.is_empty() {
            return f.write_str("0");
        }
        f.write_str(&parts.join(", "))
    }
}

/// Profiles with their derivatives, ready for jet evaluation.
struct TupleEval {
    c: f64,
    f1: Vec<QuasiPoly>,
    f2: Vec<QuasiPoly>,
    f3: Vec<QuasiPoly>,
    f4: Vec<QuasiPoly>,
}

fn qd(p: &[QuasiPoly], n: usize, t: Dual<6>) -> Dual<6> {
    let v = p[n].eval(t.v);
    let dv = p[n + 1].eval(t.v);
    let mut d = t.d;
    for x in &mut d {
        *x *= dv;
    }
    Dual { v, d }
}

impl TupleEval {
    fn gamma(&self, z: [Dual<6>; 6], b: Dual<6>) -> [Dual<6>; 3] {
        let [t, x, y, u, v, h] = z;
        let c = self.c;
        let f1 = qd(&self.f1, 0, t);
        let f1t = qd(&self.f1, 1, t);
        let f1tt = qd(&self.f1, 2, t);
        let f2 = qd(&self.f2, 0, t);
        let f2t = qd(&self.f2, 1, t);
        let f3 = qd(&self.f3, 0, t);
        let f3t = qd(&self.f3, 1, t);
        let f4 = qd(&self.f4, 0, t);
        let p = f1t * x + y.scale(c) + f2;
        let q = x.scale(-c) + f1t * y + f3;
        let r2 = x * x + y * y;
        [
            (p - (f1 * u).scale(2.0)) * h,
            (q - (f1 * v).scale(2.0)) * h,
            -(f1 * (u * u + v * v + h.scale(2.0))) + p * u + q * v + (f1 * b).scale(2.0) - (f1tt * r2).scale(0.5) - f2t * x - f3t * y + f4,
        ]
    }

    fn current(&self, z: [Dual<6>; 6], b: Dual<6>) -> [Dual<6>; 3] {
        let [t, x, y, u, v, h] = z;
        let c = self.c;
        let f1 = qd(&self.f1, 0, t);
        let f1t = qd(&self.f1, 1, t);
        let f1tt = qd(&self.f1, 2, t);
        let f2 = qd(&self.f2, 0, t);
        let f2t = qd(&self.f2, 1, t);
        let f3 = qd(&self.f3, 0, t);
        let f3t = qd(&self.f3, 1, t);
        let f4 = qd(&self.f4, 0, t);
        let r2 = x * x + y * y;
        let w = x * u + y * v;
        let m = x * v - y * u;
        let h2 = h * h;
        let q2 = u * u + v * v;
        // angular momentum, entering with −c₁
        let mut out = [(m * h).scale(-c), (m * u * h - (y * h2).scale(0.5)).scale(-c), (m * v * h + (x * h2).scale(0.5)).scale(-c)];
        // energy-type family
        let e1 = q2 + h - b.scale(2.0);
        let e2 = q2 + h.scale(2.0) - b.scale(2.0);
        let half_r2 = r2.scale(0.5);
        out[0] = out[0] - f1 * e1 * h + f1t * w * h - f1tt * half_r2 * h;
        out[1] = out[1] - f1 * e2 * u * h + f1t * (w * u + (x * h).scale(0.5)) * h - f1tt * half_r2 * u * h;
        out[2] = out[2] - f1 * e2 * v * h + f1t * (w * v + (y * h).scale(0.5)) * h - f1tt * half_r2 * v * h;
        // momentum families and mass
        let k2 = (f2 * u - f2t * x) * h;
        let k3 = (f3 * v - f3t * y) * h;
        let k4 = f4 * h;
        let k = k2 + k3 + k4;
        out[0] = out[0] + k;
        out[1] = out[1] + k * u + (f2 * h2).scale(0.5);
        out[2] = out[2] + k * v + (f3 * h2).scale(0.5);
        out
    }

    /// The condition γ must meet to be a cosymmetry. The mass profile enters
    /// as +F⁴_t: with b constant, γ³ contains 2F¹b, which only cancels
    /// against F⁴ = −2b∫F¹_t.
    fn classifying(&self, t: f64, x: f64, y: f64, b: (f64, f64, f64)) -> f64 {
        let e = |p: &[QuasiPoly], n: usize| p[n].eval(t);
        let (f1t, f1ttt) = (e(&self.f1, 1), e(&self.f1, 3));
        let (f2, f2tt) = (e(&self.f2, 0), e(&self.f2, 2));
        let (f3, f3tt) = (e(&self.f3, 0), e(&self.f3, 2));
        let f4t = e(&self.f4, 1);
        let c = self.c;
        (f1t * x + c * y + f2) * b.1 + (-c * x + f1t * y + f3) * b.2 + 2.0 * f1t * b.0 - 0.5 * f1ttt * (x * x + y * y) - f2tt * x - f3tt * y + f4t
    }
}

fn jet_vars(p: [f64; 6]) -> [Dual<6>; 6] {
    std::array::from_fn(|i| Dual::var(p[i], i))
}

/// γ at a state point (t, x, y, u, v, h).
pub fn eval_characteristic(ct: &CharTuple, topo: &Topography, p: [f64; 6]) -> Result<[f64; 3]> {
    let z = jet_vars(p);
    let b = topo.eval_jet(z[1], z[2])?;
    let g = ct.eval_data().gamma(z, b);
    Ok([g[0].v, g[1].v, g[2].v])
}

/// γ as dual numbers in the jet variables, for total derivatives.
pub fn characteristic_dual(ct: &CharTuple, topo: &Topography, p: [f64; 6]) -> Result<[Dual<6>; 3]> {
    let z = jet_vars(p);
    let b = topo.eval_jet(z[1], z[2])?;
    Ok(ct.eval_data().gamma(z, b))
}

/// A tuple's current with the profile derivatives prepared once, for
/// evaluation at many state points over known bottom values.
pub struct CurrentField(TupleEval);

impl CurrentField {
    pub fn new(ct: &CharTuple) -> CurrentField {
        CurrentField(ct.eval_data())
    }

    /// (C¹, C², C³) at (t, x, y, u, v, h) where the bottom is `b`.
    pub fn at(&self, p: [f64; 6], b: f64) -> [f64; 3] {
        let c = self.0.current(p.map(Dual::cst), Dual::cst(b));
        [c[0].v, c[1].v, c[2].v]
    }
}

/// The conserved current (C¹, C², C³) at a state point.
pub fn eval_current(ct: &CharTuple, topo: &Topography, p: [f64; 6]) -> Result<[f64; 3]> {
    let z = jet_vars(p);
    let b = topo.eval_jet(z[1], z[2])?;
    let c = ct.eval_data().current(z, b);
    Ok([c[0].v, c[1].v, c[2].v])
}

/// A point of the first jet space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
    pub h: f64,
    pub ux: f64,
    pub uy: f64,
    pub vx: f64,
    pub vy: f64,
    pub hx: f64,
    pub hy: f64,
}

impl JetPoint {
    pub fn base(&self) -> [f64; 6] {
        [self.t, self.x, self.y, self.u, self.v, self.h]
    }

    /// Time derivatives implied by the evolution equations.
    pub fn on_shell(&self, bx: f64, by: f64) -> (f64, f64, f64) {
        let ut = -self.u * self.ux - self.v * self.uy - self.hx + bx;
        let vt = -self.u * self.vx - self.v * self.vy - self.hy + by;
        let ht = -(self.ux * self.h + self.u * self.hx + self.vy * self.h + self.v * self.hy);
        (ut, vt, ht)
    }
}

/// A jet point with free time derivatives, for off-shell identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtJet {
    pub jet: JetPoint,
    pub ut: f64,
    pub vt: f64,
    pub ht: f64,
}

/// Jets uniform in [−2, 2] per coordinate with h ∈ [0.5, 2], at admissible
/// spatial points drawn from the topography's default region.
pub fn random_jets(topo: &Topography, n: usize, seed: u64) -> Result<Vec<ExtJet>> {
    let pts = topo.default_points(n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut r = || rng.gen_range(-2.0..=2.0);
    let mut out = Vec::with_capacity(n);
    for (x, y) in pts {
        let jet = JetPoint { t: r(), x, y, u: r(), v: r(), h: 0.0, ux: r(), uy: r(), vx: r(), vy: r(), hx: r(), hy: r() };
        out.push(ExtJet { jet, ut: r(), vt: r(), ht: r() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
    for e in &mut out {
        e.jet.h = rng.gen_range(0.5..=2.0);
    }
    Ok(out)
}

/// Largest |classifying equation| at the given (t, x, y).
pub fn residual_classifying(ct: &CharTuple, topo: &Topography, pts: &[(f64, f64, f64)]) -> Result<f64> {
    let e = ct.eval_data();
    let vals: Vec<f64> = pts.par_iter().map(|&(t, x, y)| Ok(e.classifying(t, x, y, topo.eval_b(x, y)?).abs())).collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Largest norm of the adjoint linearization applied to γ, on-shell.
pub fn residual_cosymmetry(ct: &CharTuple, topo: &Topography, jets: &[JetPoint]) -> Result<f64> {
    let e = ct.eval_data();
    let vals: Vec<f64> = jets
        .par_iter()
        .map(|j| {
            let z = jet_vars(j.base());
            let b = topo.eval_jet(z[1], z[2])?;
            let g = e.gamma(z, b);
            let (ut, vt, ht) = j.on_shell(b.d[1], b.d[2]);
            let dt = |f: &Dual<6>| f.d[0] + f.d[3] * ut + f.d[4] * vt + f.d[5] * ht;
            let dx = |f: &Dual<6>| f.d[1] + f.d[3] * j.ux + f.d[4] * j.vx + f.d[5] * j.hx;
            let dy = |f: &Dual<6>| f.d[2] + f.d[3] * j.uy + f.d[4] * j.vy + f.d[5] * j.hy;
            let mat = |f: &Dual<6>| dt(f) + j.u * dx(f) + j.v * dy(f);
            let (g1, g2, g3) = (g[0].v, g[1].v, g[2].v);
            let ru = -mat(&g[0]) - j.vy * g1 + j.vx * g2 - j.h * dx(&g[2]);
            let rv = j.uy * g1 - mat(&g[1]) - j.ux * g2 - j.h * dy(&g[2]);
            let rh = -dx(&g[0]) - dy(&g[1]) - mat(&g[2]);
            let _ = g3;
            Ok((ru * ru + rv * rv + rh * rh).sqrt())
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Largest |D_tC¹ + D_xC² + D_yC³ − γ·L| at off-shell jets.
pub fn residual_divergence(ct: &CharTuple, topo: &Topography, jets: &[ExtJet]) -> Result<f64> {
    let e = ct.eval_data();
    let vals: Vec<f64> = jets
        .par_iter()
        .map(|ej| {
            let j = &ej.jet;
            let z = jet_vars(j.base());
            let b = topo.eval_jet(z[1], z[2])?;
            let c = e.current(z, b);
            let g = e.gamma(z, b);
            let tot = |f: &Dual<6>, i: usize, du: f64, dv: f64, dh: f64| f.d[i] + f.d[3] * du + f.d[4] * dv + f.d[5] * dh;
            let div = tot(&c[0], 0, ej.ut, ej.vt, ej.ht) + tot(&c[1], 1, j.ux, j.vx, j.hx) + tot(&c[2], 2, j.uy, j.vy, j.hy);
            let l1 = ej.ut + j.u * j.ux + j.v * j.uy + j.hx - b.d[1];
            let l2 = ej.vt + j.u * j.vx + j.v * j.vy + j.hy - b.d[2];
            let l3 = ej.ht + j.ux * j.h + j.u * j.hx + j.vy * j.h + j.v * j.hy;
            Ok((div - g[0].v * l1 - g[1].v * l2 - g[2].v * l3).abs())
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Coordinates of tuples

type Key = (f64, f64, u32);

fn push_key(keys: &mut Vec<Key>, k: Key) {
    if !keys.iter().any(|q| q.2 == k.2 && (q.0 - k.0).abs() < KEY_MERGE && (q.1 - k.1).abs() < KEY_MERGE) {
        keys.push(k);
    }
}

fn sort_keys(keys: &mut [Key]) {
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
}

fn coord_of(q: &QuasiPoly, keys: &[Key]) -> (Vec<f64>, f64) {
    let mut v = vec![0.0; 2 * keys.len()];
    let mut miss = 0.0f64;
    for t in q.terms() {
        match keys.iter().position(|k| k.2 == t.deg && (k.0 - t.rate).abs() < KEY_MERGE && (k.1 - t.freq).abs() < KEY_MERGE) {
            Some(i) => {
                v[2 * i] += t.c;
                v[2 * i + 1] += t.s;
            }
            None => miss = miss.hypot(t.c.hypot(t.s)),
        }
    }
    (v, miss)
}

/// Linear coordinates for a family of tuples. The first two coordinates are
/// the constant parts of F⁴ and F¹, then c₁, then all other profile terms.
#[derive(Clone, Debug)]
pub struct TupleLayout {
    keys: [Vec<Key>; 4],
}

impl TupleLayout {
    pub fn of(tuples: &[CharTuple]) -> TupleLayout {
        let mut keys: [Vec<Key>; 4] = Default::default();
        keys[0].push((0.0, 0.0, 0));
        keys[3].push((0.0, 0.0, 0));
        for t in tuples {
            for (i, q) in [&t.f1, &t.f2, &t.f3, &t.f4].into_iter().enumerate() {
                for k in q.keys() {
                    push_key(&mut keys[i], k);
                }
            }
        }
        for (i, ks) in keys.iter_mut().enumerate() {
            // constant key first for F¹ and F⁴
            if i == 0 || i == 3 {
                let rest = &mut ks[1..];
                sort_keys(rest);
            } else {
                sort_keys(ks);
            }
        }
        TupleLayout { keys }
    }

    pub fn len(&self) -> usize {
        1 + 2 * self.keys.iter().map(|k| k.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates and the norm of any part not representable in this layout.
    pub fn coords(&self, t: &CharTuple) -> (DVector<f64>, f64) {
        let parts: Vec<(Vec<f64>, f64)> = [&t.f1, &t.f2, &t.f3, &t.f4].iter().zip(&self.keys).map(|(q, k)| coord_of(q, k)).collect();
        let mut v = Vec::with_capacity(self.len());
        v.push(parts[3].0[0]);
        v.push(parts[0].0[0]);
        v.push(t.c1);
        v.extend_from_slice(&parts[0].0[2..]);
        v.extend_from_slice(&parts[1].0);
        v.extend_from_slice(&parts[2].0);
        v.extend_from_slice(&parts[3].0[2..]);
        // the two sine slots of the constant keys were dropped: keep length consistent
        let miss = parts.iter().fold(0.0f64, |m, p| m.hypot(p.1)) + (parts[0].0[1].abs() + parts[3].0[1].abs());
        let n = self.len();
        v.resize(n, 0.0);
        (DVector::from_vec(v), miss)
    }

    pub fn tuple(&self, v: &DVector<f64>) -> CharTuple {
        let mut idx = 3;
        let mut take = |keys: &[Key], skip_const: bool| {
            let mut terms = Vec::new();
            for (n, k) in keys.iter().enumerate() {
                if skip_const && n == 0 {
                    continue;
                }
                terms.push(Term::new(k.0, k.1, k.2, v[idx], v[idx + 1]));
                idx += 2;
            }
            QuasiPoly::from_terms(terms)
        };
        let f1 = take(&self.keys[0], true).add(&QuasiPoly::constant(v[1]));
        let f2 = take(&self.keys[1], false);
        let f3 = take(&self.keys[2], false);
        let f4 = take(&self.keys[3], true).add(&QuasiPoly::constant(v[0]));
        CharTuple { c1: v[2], f1, f2, f3, f4 }
    }

    /// Tuples as rows.
    pub fn matrix(&self, tuples: &[CharTuple]) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(tuples.len(), n);
        for (i, t) in tuples.iter().enumerate() {
            let (v, _) = self.coords(t);
            m.row_mut(i).copy_from(&v.transpose());
        }
        m
    }
}

/// Reduced echelon basis of the span: unit pivots, pivots ordered so that
/// Λ⁴(1) and Λ¹_b(1) come first when they lie in the span.
pub fn canonical_span(tuples: &[CharTuple], tol: f64) -> Vec<CharTuple> {
    if tuples.is_empty() {
        return vec![];
    }
    let layout = TupleLayout::of(tuples);
    let m = layout.matrix(tuples);
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let (r, piv, _) = linalg::rref(&m, m.ncols(), tol * scale);
    (0..piv.len())
        .map(|i| {
            let mut row = r.row(i).transpose();
            for x in row.iter_mut() {
                if x.abs() < 1e-10 {
                    *x = 0.0;
                }
            }
            layout.tuple(&row)
        })
        .collect()
}

/// Numerical rank of a family of tuples.
pub fn span_rank(tuples: &[CharTuple], rtol: f64) -> usize {
    if tuples.is_empty() {
        return 0;
    }
    let layout = TupleLayout::of(tuples);
    linalg::rank(&layout.matrix(tuples), rtol)
}

/// Relative distance of `t` from the span of `basis`.
pub fn distance_to_span(basis: &[CharTuple], t: &CharTuple) -> Result<f64> {
    let mut all = basis.to_vec();
    all.push(t.clone());
    let layout = TupleLayout::of(&all);
    let (v, miss) = layout.coords(t);
    let scale = v.norm().max(miss).max(f64::MIN_POSITIVE);
    if basis.is_empty() {
        return Ok(v.norm().hypot(miss) / scale);
    }
    let q = linalg::orth(&layout.matrix(basis).transpose(), 1e-12)?;
    Ok(linalg::dist_to_span(&q, &v).hypot(miss) / scale)
}

// ---------------------------------------------------------------------------
// Solver

/// Verified residual summary for a basis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub classifying: f64,
    pub cosymmetry: f64,
    pub divergence: f64,
}

impl Residuals {
    pub fn max(&self, o: &Residuals) -> Residuals {
        Residuals {
            classifying: self.classifying.max(o.classifying),
            cosymmetry: self.cosymmetry.max(o.cosymmetry),
            divergence: self.divergence.max(o.divergence),
        }
    }

    pub fn within(&self, approximate: bool) -> bool {
        let f = if approximate { APPROX_FACTOR } else { 1.0 };
        self.classifying < TOL_CLASSIFYING * f && self.cosymmetry < TOL_COSYMMETRY * f && self.divergence < TOL_DIVERGENCE * f
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharBasis {
    pub tuples: Vec<CharTuple>,
    pub dimension: usize,
    /// eigenvalues (real, imaginary) of the reduced time evolution
    pub spectrum: Vec<(f64, f64)>,
    pub residuals: Option<Residuals>,
}

impl CharBasis {
    /// Condition number of the Gram matrix of coefficient vectors.
    pub fn gram_condition(&self) -> f64 {
        let layout = TupleLayout::of(&self.tuples);
        let m = layout.matrix(&self.tuples);
        let g = &m * m.transpose();
        let sv = linalg::singular_values(&g).unwrap_or_default();
        match (sv.first(), sv.last()) {
            (Some(a), Some(b)) => a / b,
            _ => 1.0,
        }
    }
}

fn null_abs(m: &DMatrix<f64>, atol: f64) -> Result<DMatrix<f64>> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let (sv, v) = linalg::svd_full(m)?;
    let rank = sv.iter().filter(|&&s| s > atol).count();
    Ok(v.columns(rank, n - rank).into_owned())
}

/// Rounds to a nearby multiple of 1/12 when within 1e-9.
fn snap_rate(x: f64) -> f64 {
    let r = (x * 12.0).round() / 12.0;
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

/// Solves the linear functional system behind the classifying equation.
///
/// With the state s = (F¹, F¹_t, F¹_tt, c₁, F², F²_t, F³, F³_t) the template
/// vector is a = L s + T q, where q = (F¹_ttt, F²_tt, F³_tt, F⁴_t). Requiring
/// a(t) in the row space of the system fixes q = P s, leaves the algebraic
/// constraint G s = 0, and turns s' = K s into a constant-coefficient system
/// restricted to its largest invariant subspace inside ker G.
pub fn solve_characteristics(sys: &TemplateSystem) -> Result<CharBasis> {
    let u = if sys.k == 0 { DMatrix::<f64>::identity(8, 8) } else { linalg::null_space(&sys.orthonormal_rows(), 1e-10)?.transpose() };
    let mut l = DMatrix::<f64>::zeros(8, 8);
    l[(0, 1)] = 1.0;
    l[(1, 3)] = 1.0;
    l[(2, 4)] = 1.0;
    l[(3, 6)] = 1.0;
    let ul = &u * &l;
    let u4 = u.columns(4, 4).into_owned();
    let u4p = linalg::pinv(&u4, 1e-10)?;
    let p = &u4p * &ul;
    let g = &ul - &u4 * &p;
    if (&u4p * &u4 - DMatrix::<f64>::identity(4, 4)).amax() > 1e-8 {
        return Err(Error::Inconsistent("top-derivative block is rank deficient".into()));
    }

    let mut k = DMatrix::<f64>::zeros(8, 8);
    k[(0, 1)] = 1.0;
    k[(1, 2)] = 1.0;
    k[(4, 5)] = 1.0;
    k[(6, 7)] = 1.0;
    for j in 0..8 {
        k[(2, j)] = p[(0, j)];
        k[(5, j)] = p[(1, j)];
        k[(7, j)] = p[(2, j)];
    }
    let atol = 1e-8 * (1.0 + k.amax());

    // largest K-invariant subspace of ker G
    let mut q = null_abs(&g, atol)?;
    for _ in 0..9 {
        if q.ncols() == 0 {
            break;
        }
        let kq = &k * &q;
        let m = &kq - &q * (q.transpose() * &kq);
        let z = null_abs(&m, atol)?;
        if z.ncols() == q.ncols() {
            break;
        }
        q = linalg::orth(&(&q * z), 1e-12)?;
    }
    let d = q.ncols();
    if d == 0 {
        return Err(Error::Internal("no characteristic beyond Λ⁴(1); F¹ = 1 should always survive".into()));
    }
    let kv = q.transpose() * &k * &q;

    // rows picking F¹, c₁, F², F³ and the constant-slot coefficient out of
    // the state; the constant slot carries +F⁴_t, so F⁴ is minus its integral
    let mut pick = DMatrix::<f64>::zeros(5, 8);
    pick[(0, 0)] = 1.0;
    pick[(1, 3)] = 1.0;
    pick[(2, 4)] = 1.0;
    pick[(3, 6)] = 1.0;
    pick.row_mut(4).copy_from(&p.row(3));
    let proj = linalg::to_complex(&(pick * &q));

    let clusters = eigen_clusters(&kv)?;
    let mut sols: Vec<[QuasiPoly; 5]> = Vec::new();
    let kvc = linalg::to_complex(&kv);
    for (lam, m) in &clusters {
        if lam.im < -1e-10 {
            continue;
        }
        let real = lam.im.abs() <= 1e-10;
        let lam = if real { Complex64::new(lam.re, 0.0) } else { *lam };
        let n = &kvc - DMatrix::<Complex64>::identity(d, d) * lam;
        let mut pow = DMatrix::<Complex64>::identity(d, d);
        for _ in 0..*m {
            pow = &pow * &n;
        }
        let w = if real {
            let pr = pow.map(|c| c.re);
            linalg::to_complex(&linalg::smallest_right_vectors(&pr, *m)?)
        } else {
            linalg::smallest_right_vectors(&pow, *m)?
        };
        let (rate, freq) = (snap_rate(lam.re), snap_rate(lam.im));
        for col in 0..*m {
            let mut chain: Vec<DVector<Complex64>> = Vec::with_capacity(*m);
            let mut cur = w.column(col).into_owned();
            let mut fact = 1.0;
            for deg in 0..*m {
                if deg > 0 {
                    fact *= deg as f64;
                }
                chain.push(&proj * &cur / Complex64::new(fact, 0.0));
                cur = &n * cur;
            }
            let build = |imag: bool| -> [QuasiPoly; 5] {
                std::array::from_fn(|comp| {
                    QuasiPoly::from_terms(chain.iter().enumerate().map(|(deg, v)| {
                        let a = v[comp];
                        let (c, s) = if imag { (a.im, a.re) } else { (a.re, -a.im) };
                        Term::new(rate, freq, deg as u32, c, s)
                    }))
                })
            };
            sols.push(build(false));
            if !real {
                sols.push(build(true));
            }
        }
    }

    let mut tuples = vec![CharTuple::lambda4(QuasiPoly::constant(1.0))];
    for s in &sols {
        let c1 = s[1].coords(&[(0.0, 0.0, 0)]).0[0];
        tuples.push(CharTuple { c1, f1: s[0].clone(), f2: s[2].clone(), f3: s[3].clone(), f4: s[4].antiderivative().scale(-1.0) }.pruned(1e-12));
    }
    let basis = canonical_span(&tuples, 1e-9);
    if basis.len() != d + 1 {
        return Err(Error::Internal(format!("solution family has rank {} but the invariant subspace has dimension {d}", basis.len() - 1)));
    }
    if basis.len() < 2 {
        return Err(Error::Internal("fewer than two characteristics".into()));
    }
    let spectrum = clusters.iter().flat_map(|(l, m)| std::iter::repeat_n((snap_rate(l.re), snap_rate(l.im)), *m)).collect();
    Ok(CharBasis { dimension: basis.len(), tuples: basis, spectrum, residuals: None })
}

fn single_linkage(ev: &[Complex64], radius: f64) -> Vec<Vec<usize>> {
    let n = ev.len();
    let mut seen = vec![false; n];
    let mut groups = Vec::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        seen[i] = true;
        let mut stack = vec![i];
        let mut members = vec![];
        while let Some(a) = stack.pop() {
            members.push(a);
            for b in 0..n {
                if !seen[b] && (ev[a] - ev[b]).norm() < radius {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    groups
}

/// Whether `mu` carries a generalized eigenspace of dimension `m`.
fn is_eigen_cluster(k: &DMatrix<Complex64>, mu: Complex64, m: usize, scale: f64) -> Result<bool> {
    let d = k.nrows();
    let n = k - DMatrix::<Complex64>::identity(d, d) * mu;
    let mut pow = DMatrix::<Complex64>::identity(d, d);
    for _ in 0..m {
        pow = &pow * &n;
    }
    let (sv, _) = linalg::svd_full(&pow)?;
    Ok(sv[d - m] <= 1e-10 * scale.powi(m as i32))
}

/// Eigenvalues grouped into clusters, each represented by its mean.
///
/// A defective block of size m splits under rounding into a ring of radius
/// about ε^(1/m), so a fixed merge radius either misses large blocks or
/// fuses distinct eigenvalues. Single-linkage components are grown over a
/// ladder of radii and a component is kept only when its mean really has an
/// m-dimensional generalized eigenspace.
fn eigen_clusters(m: &DMatrix<f64>) -> Result<Vec<(Complex64, usize)>> {
    let ev = linalg::eigenvalues(m)?;
    if ev.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
        return Err(Error::Numeric("eigenvalue computation failed".into()));
    }
    let n = ev.len();
    let scale = 1.0 + linalg::singular_values(m)?.first().copied().unwrap_or(0.0);
    let kc = linalg::to_complex(m);
    let mean = |g: &[usize]| g.iter().map(|&i| ev[i]).sum::<Complex64>() / g.len() as f64;
    let mut groups: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for radius in [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 3e-2] {
        for comp in single_linkage(&ev, radius * scale) {
            if comp.len() < 2 || groups.contains(&comp) {
                continue;
            }
            if is_eigen_cluster(&kc, mean(&comp), comp.len(), scale)? {
                groups.retain(|g| !g.iter().all(|i| comp.contains(i)));
                groups.push(comp);
            }
        }
    }
    let mut out: Vec<(Complex64, usize)> = groups
        .iter()
        .map(|g| {
            let mu = mean(g);
            let snap = |x: f64| if x.abs() < 1e-8 { 0.0 } else { x };
            (Complex64::new(snap(mu.re), snap(mu.im)), g.len())
        })
        .collect();
    out.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
    Ok(out)
}

/// Residuals of every tuple at `n` random jets.
pub fn verify_basis(basis: &CharBasis, topo: &Topography, n: usize, seed: u64) -> Result<Residuals> {
    let jets = random_jets(topo, n, seed)?;
    let plain: Vec<JetPoint> = jets.iter().map(|e| e.jet).collect();
    let txy: Vec<(f64, f64, f64)> = plain.iter().map(|j| (j.t, j.x, j.y)).collect();
    let mut worst = Residuals::default();
    for ct in &basis.tuples {
        let r = Residuals {
            classifying: residual_classifying(ct, topo, &txy)?,
            cosymmetry: residual_cosymmetry(ct, topo, &plain)?,
            divergence: residual_divergence(ct, topo, &jets)?,
        };
        worst = worst.max(&r);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Case matching

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseLabel {
    pub case: CaseId,
    pub params: CaseParams,
    pub k: usize,
    pub rank_a2: usize,
    pub dimension: usize,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.case)?;
        let p = &self.params;
        let mut extra = vec![];
        if let Some(b) = p.beta {
            extra.push(format!("β={b}"));
        }
        if let Some(d) = p.delta {
            extra.push(format!("δ={d}"));
        }
        if let Some(e) = p.epsilon {
            extra.push(format!("ε={e}"));
        }
        if !extra.is_empty() {
            write!(f, " ({})", extra.join(", "))?;
        }
        Ok(())
    }
}

/// Every intermediate product of the classification pipeline.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub system: TemplateSystem,
    pub compat: CompatReport,
    pub gauged: TemplateSystem,
    pub gauge: EquivElement,
    pub recombination: DMatrix<f64>,
    pub basis: CharBasis,
    pub label: CaseLabel,
}

pub fn analyse(topo: &Topography, seed: u64) -> Result<Analysis> {
    let system = furcate::detect(topo, seed)?;
    let compat = furcate::check_compatibility(&system)?;
    let (gauged, gauge, recombination) = furcate::canonicalize(&system)?;
    let basis = solve_characteristics(&system)?;
    let label = match_case(&gauged, &gauge, basis.dimension, topo)?;
    Ok(Analysis { system, compat, gauged, gauge, recombination, basis, label })
}

pub fn classify_case(topo: &Topography) -> Result<CaseLabel> {
    Ok(analyse(topo, 0)?.label)
}

fn snap_special(x: f64) -> f64 {
    for s in [0.0, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0] {
        if (x - s).abs() < SNAP {
            return s;
        }
    }
    x
}

fn unit_delta(d: f64) -> f64 {
    if d.abs() < SNAP {
        0.0
    } else {
        1.0
    }
}

/// Sign of the inverse-square coefficient, read off b along a ray from the
/// canonical centre: b(c+e) − b(c+2e) = ¾εA + ⅜a₅ for b = εA·ρ⁻² + C·½ρ²
/// with a₅ = −4C.
fn inverse_square_sign(topo: &Topography, centre: (f64, f64), dir: (f64, f64), a5: f64) -> Result<f64> {
    let b1 = topo.eval_b(centre.0 + dir.0, centre.1 + dir.1)?.0;
    let b2 = topo.eval_b(centre.0 + 2.0 * dir.0, centre.1 + 2.0 * dir.1)?.0;
    let lead = 4.0 / 3.0 * (b1 - b2 - 3.0 * a5 / 8.0);
    if lead.abs() < SNAP {
        return Err(Error::ClassificationGap("inverse-square coefficient vanishes".into()));
    }
    Ok(lead.signum())
}

fn match_case(gauged: &TemplateSystem, gauge: &EquivElement, dim: usize, topo: &Topography) -> Result<CaseLabel> {
    use CaseId::*;
    let k = gauged.k;
    let rank_a2 = gauged.rank_a2();
    let mut params = CaseParams::default();
    let label = |case, params| CaseLabel { case, params, k, rank_a2, dimension: dim };
    if dim == 2 {
        return Ok(label(Generic, params));
    }
    let rows: Vec<[f64; 8]> = (0..k).map(|i| gauged.row(i).a).collect();
    let big = |v: f64| v.abs() > SNAP;
    let centre = gauge.unmap_xy(0.0, 0.0);
    let case = match k {
        1 => {
            let a = rows[0];
            if big(a[0]) {
                let a: Vec<f64> = a.iter().map(|v| v / a[0]).collect();
                if big(a[1]) {
                    params.beta = Some(snap_special(a[1].abs()));
                    C1
                } else if !big(a[4]) {
                    C3a
                } else if a[4] < 0.0 {
                    C3b
                } else {
                    C3c
                }
            } else if big(a[1]) {
                params.delta = Some(unit_delta(a[7] / a[1]));
                C2
            } else {
                let n = a[2].hypot(a[3]);
                if !(n > SNAP) {
                    return Err(Error::ClassificationGap(format!("single equation without a spatial part: {a:?}")));
                }
                let a6 = (a[2] * a[5] + a[3] * a[6]) / (n * n);
                if !big(a6) {
                    params.delta = Some(unit_delta(-a[7] / n));
                    C4
                } else if a6 < 0.0 {
                    C5
                } else {
                    C6
                }
            }
        }
        2 => match rank_a2 {
            2 => {
                let a5 = rows[0][4] / rows[0][0];
                params.epsilon = Some(inverse_square_sign(topo, centre, (1.0, 0.0), a5)?);
                if !big(a5) {
                    C7a
                } else if a5 < 0.0 {
                    C7b
                } else {
                    C7c
                }
            }
            1 => {
                let (r1, r2) = if big(rows[0][0]) { (rows[0], rows[1]) } else { (rows[1], rows[0]) };
                let a5 = r1[4] / r1[0];
                let n = r2[2].hypot(r2[3]);
                let m = (-r2[3] / n, r2[2] / n);
                params.epsilon = Some(inverse_square_sign(topo, centre, m, a5)?);
                if !big(a5) {
                    params.delta = Some(unit_delta(-r2[7] / n));
                    C8a
                } else if a5 < 0.0 {
                    C8b
                } else {
                    C8c
                }
            }
            _ => {
                // b_x = −(a₆x + a₇y + a₈), b_y = −(a'₆x + a'₇y + a'₈)
                let hess = DMatrix::from_row_slice(2, 2, &[-rows[0][5], -rows[0][6], -rows[1][5], -rows[1][6]]);
                let sym = (&hess + hess.transpose()) * 0.5;
                let eig = sym.symmetric_eigen();
                let lam = [eig.eigenvalues[0], eig.eigenvalues[1]];
                let scale = lam[0].abs().max(lam[1].abs());
                if scale < SNAP {
                    return Err(Error::ClassificationGap("two translation equations with a flat Hessian".into()));
                }
                let zero: Vec<usize> = (0..2).filter(|&i| lam[i].abs() < SNAP * scale).collect();
                match zero.len() {
                    1 => {
                        let z = zero[0];
                        let nz = 1 - z;
                        let nd = eig.eigenvectors.column(z);
                        let grad = -(rows[0][7] * nd[0] + rows[1][7] * nd[1]);
                        params.delta = Some(unit_delta(grad / scale.sqrt()));
                        if lam[nz] > 0.0 {
                            C10
                        } else {
                            C12
                        }
                    }
                    _ => {
                        let (lo, hi) = if lam[0].abs() < lam[1].abs() { (lam[0], lam[1]) } else { (lam[1], lam[0]) };
                        if lo * hi < 0.0 {
                            let (pos, neg) = if lo > 0.0 { (lo, hi) } else { (hi, lo) };
                            params.beta = Some(snap_special((neg.abs() / pos).sqrt()));
                            C11
                        } else {
                            let beta = snap_special((lo / hi).sqrt());
                            if beta == 1.0 {
                                return Err(Error::ClassificationGap("isotropic Hessian with only two equations".into()));
                            }
                            params.beta = Some(beta);
                            if hi > 0.0 {
                                C9
                            } else {
                                C13
                            }
                        }
                    }
                }
            }
        },
        4 => {
            let c = -rows[2][5];
            let (p, q) = (-rows[2][7], -rows[3][7]);
            if big(c) {
                if c > 0.0 {
                    C14c
                } else {
                    C14d
                }
            } else if big(p.hypot(q)) {
                C14b
            } else {
                C14a
            }
        }
        _ => return Err(Error::ClassificationGap(format!("no case for k = {k} with dimension {dim}"))),
    };
    if case.dimension() != dim {
        return Err(Error::ClassificationGap(format!(
            "signature points to case {case} (dimension {}) but the solver found dimension {dim}",
            case.dimension()
        )));
    }
    Ok(label(case, params))
}
