//! Detection of the maximal system of template-form equations satisfied by a
//! topography, its compatibility check in the 8-dimensional algebra of
//! template vector fields, and gauge fixing by equivalence transformations.
//!
//! A row a = (a₁..a₈) stands for the equation
//! a₁(xb_x+yb_y+2b) + a₂(yb_x−xb_y) + a₃b_x + a₄b_y + a₅·½(x²+y²) + a₆x + a₇y + a₈ = 0
//! and for the vector field
//! (a₁x+a₂y+a₃)∂x + (a₁y−a₂x+a₄)∂y − (2a₁b+½a₅(x²+y²)+a₆x+a₇y+a₈)∂b.

use crate::equivmaps::EquivElement;
use crate::error::{Error, Result};
use crate::linalg;
use crate::topography::{SamplePlan, Topography};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SAMPLES: usize = 256;
pub const ZERO_RTOL: f64 = 1e-9;
pub const MIN_GAP: f64 = 1e6;
pub const MAX_ANGLE: f64 = 1e-6;
pub const COMPAT_TOL: f64 = 1e-9;
/// Coefficients below this (relative to the row) count as zero in gauge fixing.
pub const SNAP: f64 = 1e-8;
const COLUMN_FLOOR: f64 = 1e-4;

/// The eight template basis values at a point.
pub fn eval_template_basis(topo: &Topography, x: f64, y: f64) -> Result<[f64; 8]> {
    let (b, bx, by) = topo.eval_b(x, y)?;
    Ok([x * bx + y * by + 2.0 * b, y * bx - x * by, bx, by, 0.5 * (x * x + y * y), x, y, 1.0])
}

/// N×8 matrix of template basis values.
pub fn sample_matrix(topo: &Topography, pts: &[(f64, f64)]) -> Result<DMatrix<f64>> {
    let rows: Vec<[f64; 8]> = pts.par_iter().map(|&(x, y)| eval_template_basis(topo, x, y)).collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(rows.len(), 8, |i, j| rows[i][j]))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TemplateVectorField {
    pub a: [f64; 8],
}

impl TemplateVectorField {
    pub fn new(a: [f64; 8]) -> Self {
        TemplateVectorField { a }
    }

    /// Basis element e_i (1-based, matching the coefficient index).
    pub fn basis(i: usize) -> Self {
        let mut a = [0.0; 8];
        a[i - 1] = 1.0;
        TemplateVectorField { a }
    }

    /// Components (ξ, ζ, β) of the field at (x, y, b).
    pub fn components(&self, x: f64, y: f64, b: f64) -> [f64; 3] {
        let a = &self.a;
        [
            a[0] * x + a[1] * y + a[2],
            a[0] * y - a[1] * x + a[3],
            -(2.0 * a[0] * b + 0.5 * a[4] * (x * x + y * y) + a[5] * x + a[6] * y + a[7]),
        ]
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.a)
    }

    pub fn norm(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Lie bracket [v, w] in coefficient form.
pub fn bracket_vf(v: &TemplateVectorField, w: &TemplateVectorField) -> TemplateVectorField {
    let a = &v.a;
    let c = &w.a;
    let mut d = [0.0; 8];
    d[2] = a[2] * c[0] + a[3] * c[1] - c[2] * a[0] - c[3] * a[1];
    d[3] = -a[2] * c[1] + a[3] * c[0] + c[2] * a[1] - c[3] * a[0];
    d[4] = 4.0 * (a[0] * c[4] - c[0] * a[4]);
    d[5] = -(3.0 * (c[0] * a[5] - a[0] * c[5]) + (c[2] * a[4] - a[2] * c[4]) + (a[1] * c[6] - c[1] * a[6]));
    d[6] = -(3.0 * (c[0] * a[6] - a[0] * c[6]) + (c[3] * a[4] - a[3] * c[4]) + (c[1] * a[5] - a[1] * c[5]));
    d[7] = -(2.0 * (c[0] * a[7] - a[0] * c[7]) + (c[2] * a[5] - a[2] * c[5]) + (c[3] * a[6] - a[3] * c[6]));
    TemplateVectorField { a: d }
}

/// Maximal system of template-form equations, rows stacked in `a` (k×8).
#[derive(Clone, Debug)]
pub struct TemplateSystem {
    pub a: DMatrix<f64>,
    pub k: usize,
    /// singular values of the column-scaled sample matrix, descending
    pub singular_values: Vec<f64>,
    pub gap: f64,
    pub threshold: f64,
    pub seeds: Vec<u64>,
    pub samples: usize,
}

impl TemplateSystem {
    /// A hand-assembled system (no sampling diagnostics).
    pub fn from_rows(rows: &[[f64; 8]]) -> TemplateSystem {
        let a = DMatrix::from_fn(rows.len(), 8, |i, j| rows[i][j]);
        TemplateSystem { k: rows.len(), a, singular_values: vec![], gap: f64::INFINITY, threshold: ZERO_RTOL, seeds: vec![], samples: 0 }
    }

    pub fn row(&self, i: usize) -> TemplateVectorField {
        let mut a = [0.0; 8];
        for (j, v) in a.iter_mut().enumerate() {
            *v = self.a[(i, j)];
        }
        TemplateVectorField { a }
    }

    pub fn rows(&self) -> Vec<TemplateVectorField> {
        (0..self.k).map(|i| self.row(i)).collect()
    }

    pub fn rank_a4(&self) -> usize {
        self.rank_cols(4)
    }

    pub fn rank_a2(&self) -> usize {
        self.rank_cols(2)
    }

    fn rank_cols(&self, n: usize) -> usize {
        if self.k == 0 {
            return 0;
        }
        let q = self.orthonormal_rows();
        linalg::rank_abs(&q.columns(0, n).into_owned(), SNAP)
    }

    /// Orthonormal basis of the row space, as rows.
    pub fn orthonormal_rows(&self) -> DMatrix<f64> {
        if self.k == 0 {
            return DMatrix::zeros(0, 8);
        }
        linalg::orth(&self.a.transpose(), 1e-12).map(|q| q.transpose()).unwrap_or_else(|_| self.a.clone())
    }

    /// Largest |a·basis| over the points, with rows normalized to unit length.
    pub fn residual_on(&self, topo: &Topography, pts: &[(f64, f64)]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &(x, y) in pts {
            let e = eval_template_basis(topo, x, y)?;
            let scale = e.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            for r in self.rows() {
                let n = r.norm();
                let dot: f64 = r.a.iter().zip(&e).map(|(a, b)| a * b).sum();
                worst = worst.max((dot / n / scale).abs());
            }
        }
        Ok(worst)
    }
}

struct SeedResult {
    seed: u64,
    k: usize,
    sv: Vec<f64>,
    gap: f64,
    null: DMatrix<f64>,
}

fn analyse(topo: &Topography, pts: &[(f64, f64)], seed: u64, rtol: f64) -> Result<SeedResult> {
    let s = sample_matrix(topo, pts)?;
    // equilibrate columns, but never blow up a column that is rounding noise
    let norms: Vec<f64> = (0..8).map(|j| s.column(j).norm()).collect();
    let top = norms.iter().fold(0.0f64, |m, &v| m.max(v));
    let scale: Vec<f64> = norms.iter().map(|&n| n.max(COLUMN_FLOOR * top).max(f64::MIN_POSITIVE)).collect();
    let scaled = DMatrix::from_fn(s.nrows(), 8, |i, j| s[(i, j)] / scale[j]);
    let (sv, v) = linalg::svd_full(&scaled)?;
    let smax = sv[0];
    let k = sv.iter().filter(|&&x| x < rtol * smax).count();
    let floor = f64::EPSILON * smax;
    let gap = if k == 0 {
        sv[7] / (rtol * smax)
    } else if k == 8 {
        f64::INFINITY
    } else {
        sv[7 - k] / sv[8 - k].max(floor)
    };
    // undo the column scaling on the null vectors, then re-orthonormalize
    let raw = DMatrix::from_fn(8, k, |i, j| v[(i, 8 - k + j)] / scale[i]);
    let null = if k == 0 { raw } else { linalg::orth(&raw, 1e-14)? };
    Ok(SeedResult { seed, k, sv, gap, null })
}

/// Detection on three resamples (the plan's seed and the next two).
pub fn detect_template_system(topo: &Topography, plan: &SamplePlan) -> Result<TemplateSystem> {
    detect_with(topo, plan.n, |seed| topo.sample_points(&SamplePlan { seed, ..*plan }), plan.seed)
}

/// Detection on the topography's default sampling region.
pub fn detect(topo: &Topography, seed: u64) -> Result<TemplateSystem> {
    detect_with(topo, DEFAULT_SAMPLES, |s| topo.default_points(DEFAULT_SAMPLES, s), seed)
}

fn detect_with<F>(topo: &Topography, n: usize, sampler: F, seed: u64) -> Result<TemplateSystem>
where
    F: Fn(u64) -> Result<Vec<(f64, f64)>> + Sync,
{
    if n < 64 {
        return Err(Error::Config(format!("detection needs at least 64 sample points, got {n}")));
    }
    let widen = 1.0 + topo.grid_error() / f64::EPSILON;
    let rtol = ZERO_RTOL * widen;
    // data-polluted gradients cannot show the full gap; ask for what the threshold leaves
    let min_gap = if widen > 1.0 { (MIN_GAP / widen).max(10.0) } else { MIN_GAP };
    let seeds = [seed, seed.wrapping_add(1), seed.wrapping_add(2)];
    let results: Vec<SeedResult> = seeds.par_iter().map(|&s| analyse(topo, &sampler(s)?, s, rtol)).collect::<Result<_>>()?;

    let describe = || results.iter().map(|r| format!("seed {}: k={} gap={:.3e}", r.seed, r.k, r.gap)).collect::<Vec<_>>().join("; ");
    let valid: Vec<&SeedResult> = results.iter().filter(|r| r.gap >= min_gap).collect();
    let mut chosen: Option<usize> = None;
    for r in &valid {
        if valid.iter().filter(|o| o.k == r.k).count() >= 2 {
            chosen = Some(r.k);
            break;
        }
    }
    let k = chosen.ok_or_else(|| Error::DetectionInstability(format!("no majority with spectral gap ≥ {min_gap:.1e} ({})", describe())))?;
    let agree: Vec<&SeedResult> = valid.into_iter().filter(|r| r.k == k).collect();
    for r in &agree[1..] {
        let ang = linalg::max_principal_angle(&agree[0].null, &r.null)?;
        if ang >= MAX_ANGLE {
            return Err(Error::DetectionInstability(format!(
                "row spaces of seeds {} and {} differ by angle {ang:.3e}",
                agree[0].seed, r.seed
            )));
        }
    }
    if k == 3 {
        return Err(Error::Impossible(format!("detected three template equations ({})", describe())));
    }
    let best = agree[0];
    let sys = TemplateSystem {
        a: best.null.transpose(),
        k,
        singular_values: best.sv.clone(),
        gap: best.gap,
        threshold: rtol,
        seeds: agree.iter().map(|r| r.seed).collect(),
        samples: n,
    };
    if sys.rank_a4() < k {
        return Err(Error::Inconsistent(format!("rank of the first four columns is {} < k = {k}", sys.rank_a4())));
    }
    Ok(sys)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatReport {
    pub ok: bool,
    pub worst: f64,
    pub worst_pair: Option<(usize, usize)>,
}

/// Every bracket of rows must stay in the row span.
pub fn check_compatibility(sys: &TemplateSystem) -> Result<CompatReport> {
    let rep = compatibility_report(sys);
    if rep.ok {
        Ok(rep)
    } else {
        let (i, j) = rep.worst_pair.unwrap_or((0, 0));
        Err(Error::Compatibility(format!("bracket of rows {i} and {j} leaves the span by {:.3e}", rep.worst)))
    }
}

pub fn compatibility_report(sys: &TemplateSystem) -> CompatReport {
    if sys.k < 2 {
        return CompatReport { ok: true, worst: 0.0, worst_pair: None };
    }
    let q = sys.orthonormal_rows();
    let qt = q.transpose();
    let rows: Vec<TemplateVectorField> = (0..q.nrows())
        .map(|i| {
            let mut a = [0.0; 8];
            for (j, v) in a.iter_mut().enumerate() {
                *v = q[(i, j)];
            }
            TemplateVectorField { a }
        })
        .collect();
    let mut worst = 0.0;
    let mut pair = None;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let d = linalg::dist_to_span(&qt, &bracket_vf(&rows[i], &rows[j]).as_vector());
            if pair.is_none() || d > worst {
                worst = d;
                pair = Some((i, j));
            }
        }
    }
    CompatReport { ok: worst < COMPAT_TOL, worst, worst_pair: pair }
}

/// Image of a row under g: if b satisfies `a`, then g·b satisfies the result.
pub fn transform_row(a: &[f64; 8], g: &EquivElement) -> [f64; 8] {
    let r = g.rot();
    let ri = g.rot_inv();
    let eps = g.eps;
    let rho2 = g.rho2();
    let kap = g.kappa();
    let (s1, s2) = (g.d[4], g.d[5]);
    let mut o = [0.0; 8];
    o[0] = a[0];
    o[1] = eps * a[1];
    // (a₁I + εa₂J)s with J = [[0,1],[−1,0]]
    let m1 = a[0] * s1 + eps * a[1] * s2;
    let m2 = a[0] * s2 - eps * a[1] * s1;
    o[2] = r[0][0] * a[2] + r[0][1] * a[3] - m1;
    o[3] = r[1][0] * a[2] + r[1][1] * a[3] - m2;
    o[4] = kap * a[4] / rho2;
    let (g6, g7) = g.inv_transpose_apply(a[5], a[6]);
    o[5] = -o[4] * s1 + kap * g6;
    o[6] = -o[4] * s2 + kap * g7;
    let ris = (ri[0][0] * s1 + ri[0][1] * s2, ri[1][0] * s1 + ri[1][1] * s2);
    o[7] = -2.0 * a[0] * g.d[6] + 0.5 * o[4] * (s1 * s1 + s2 * s2) + kap * a[7] - kap * (a[5] * ris.0 + a[6] * ris.1);
    o
}

pub fn transform_system(sys: &TemplateSystem, g: &EquivElement) -> TemplateSystem {
    let mut out = sys.clone();
    for i in 0..sys.k {
        let t = transform_row(&sys.row(i).a, g);
        for j in 0..8 {
            out.a[(i, j)] = t[j];
        }
    }
    out
}

fn snap_small(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows() {
        let s = m.row(i).amax().max(f64::MIN_POSITIVE);
        for j in 0..m.ncols() {
            if m[(i, j)].abs() < SNAP * s {
                m[(i, j)] = 0.0;
            }
        }
    }
}

fn rref4(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let (mut r, _, m) = linalg::rref(a, 4, SNAP * scale);
    snap_small(&mut r);
    (r, m)
}

/// Gauge the system: RREF of the first four columns, then shifts of x, y and b.
/// Returns the gauged system, the gauge element and the recombination M with
/// `gauged.a = M · transform(sys.a)`.
pub fn canonicalize(sys: &TemplateSystem) -> Result<(TemplateSystem, EquivElement, DMatrix<f64>)> {
    if sys.k == 0 {
        return Ok((sys.clone(), EquivElement::identity(), DMatrix::zeros(0, 0)));
    }
    let (r1, m1) = rref4(&sys.a);
    let rows: Vec<[f64; 8]> = (0..sys.k).map(|i| std::array::from_fn(|j| r1[(i, j)])).collect();
    let big = |v: f64, row: &[f64; 8]| v.abs() > SNAP * row.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut shift = (0.0, 0.0);
    if let Some(a) = rows.iter().find(|a| big(a[0], a) || big(a[1], a)) {
        let det = a[0] * a[0] + a[1] * a[1];
        shift = ((a[0] * a[2] - a[1] * a[3]) / det, (a[1] * a[2] + a[0] * a[3]) / det);
    } else if let Some(a) = rows.iter().find(|a| big(a[4], a)) {
        shift = (a[5] / a[4], a[6] / a[4]);
    } else {
        // translation rows only: kill the constants along the linear part
        let h = DMatrix::from_fn(sys.k, 2, |i, j| rows[i][5 + j]);
        let c = DVector::from_fn(sys.k, |i, _| rows[i][7]);
        if h.amax() > SNAP {
            let s = linalg::lstsq(&h, &c, SNAP)?;
            shift = (s[0], s[1]);
        }
    }
    let gxy = EquivElement::shift_xy(shift.0, shift.1);
    let mut db = 0.0;
    if let Some(a) = rows.iter().map(|a| transform_row(a, &gxy)).find(|a| big(a[0], a)) {
        db = a[7] / (2.0 * a[0]);
    }
    let g = EquivElement::shift_b(db).compose(&gxy);
    let moved = transform_system(&TemplateSystem { a: r1, ..sys.clone() }, &g);
    let (r2, m2) = rref4(&moved.a);
    let gauged = TemplateSystem { a: r2, ..sys.clone() };
    Ok((gauged, g, m2 * m1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Dual;
    use crate::topography::{CaseId, CaseParams};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn expr(src: &str) -> Topography {
        Topography::from_expr(src, vec![]).unwrap()
    }

    #[test]
    fn template_basis_values() {
        assert_eq!(eval_template_basis(&expr("0"), 1.0, 2.0).unwrap(), [0.0, 0.0, 0.0, 0.0, 2.5, 1.0, 2.0, 1.0]);
        assert_eq!(eval_template_basis(&expr("0.5*(x^2+y^2)"), 1.0, 0.0).unwrap(), [2.0, 0.0, 1.0, 0.0, 0.5, 1.0, 0.0, 1.0]);
        assert_eq!(eval_template_basis(&expr("x"), 0.0, 0.0).unwrap(), [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn flat_bottom_has_four_equations() {
        let sys = detect(&expr("0"), 1).unwrap();
        assert_eq!(sys.k, 4);
        assert!(sys.gap >= MIN_GAP);
        let (g, e, _) = canonicalize(&sys).unwrap();
        for i in 0..4 {
            for j in 0..8 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g.a[(i, j)] - want).abs() < 1e-9, "{}", g.a);
            }
        }
        assert!(e.approx_eq(&EquivElement::identity(), 1e-9));
    }

    #[test]
    fn structureless_bottom_has_none() {
        let t = expr("exp(x)*sin(y) + x^3*y");
        let sys = detect(&t, 3).unwrap();
        assert_eq!(sys.k, 0);
        let sv = &sys.singular_values;
        assert!(sv[7] / sv[0] > 1e-3);
    }

    #[test]
    fn inverse_square_in_y_has_two() {
        let t = Topography::make_case(CaseId::C8a, CaseParams { epsilon: Some(1.0), delta: Some(0.0), ..Default::default() }, None).unwrap();
        let sys = detect(&t, 5).unwrap();
        assert_eq!(sys.k, 2);
        assert!(check_compatibility(&sys).unwrap().ok);
    }

    #[test]
    fn bracket_examples() {
        let e = TemplateVectorField::basis;
        assert_eq!(bracket_vf(&e(3), &e(4)).a, [0.0; 8]);
        assert_eq!(bracket_vf(&e(1), &e(3)).a, [0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(bracket_vf(&e(2), &e(3)).a, [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    // Commutator of the fields on (x, y, b) by automatic differentiation,
    // decoded back into coefficients by least squares on sample points.
    fn commutator_oracle(v: &TemplateVectorField, w: &TemplateVectorField) -> [f64; 8] {
        let field = |f: &TemplateVectorField, p: [Dual<3>; 3]| -> [Dual<3>; 3] {
            let a = &f.a;
            let [x, y, b] = p;
            [
                x.scale(a[0]) + y.scale(a[1]) + a[2],
                y.scale(a[0]) - x.scale(a[1]) + a[3],
                -(b.scale(2.0 * a[0]) + (x * x + y * y).scale(0.5 * a[4]) + x.scale(a[5]) + y.scale(a[6]) + a[7]),
            ]
        };
        let pts: Vec<[f64; 3]> = (0..12).map(|i| {
            let t = i as f64;
            [(0.7 * t).sin() * 1.3, (1.1 * t + 0.4).cos() * 0.9, (0.3 * t).sin() + 0.2 * t]
        }).collect();
        let mut m = DMatrix::zeros(3 * pts.len(), 8);
        let mut rhs = DVector::zeros(3 * pts.len());
        for (n, p) in pts.iter().enumerate() {
            let jet = [Dual::var(p[0], 0), Dual::var(p[1], 1), Dual::var(p[2], 2)];
            let fv = field(v, jet);
            let fw = field(w, jet);
            for i in 0..3 {
                let vw: f64 = (0..3).map(|j| fv[j].v * fw[i].d[j]).sum();
                let wv: f64 = (0..3).map(|j| fw[j].v * fv[i].d[j]).sum();
                rhs[3 * n + i] = vw - wv;
            }
            for c in 0..8 {
                let comp = TemplateVectorField::basis(c + 1).components(p[0], p[1], p[2]);
                for i in 0..3 {
                    m[(3 * n + i, c)] = comp[i];
                }
            }
        }
        let sol = linalg::lstsq(&m, &rhs, 1e-12).unwrap();
        std::array::from_fn(|i| sol[i])
    }

    proptest! {
        #[test]
        fn bracket_matches_commutator(a in proptest::array::uniform8(-2.0f64..2.0), c in proptest::array::uniform8(-2.0f64..2.0)) {
            let (v, w) = (TemplateVectorField::new(a), TemplateVectorField::new(c));
            let closed = bracket_vf(&v, &w).a;
            let oracle = commutator_oracle(&v, &w);
            for i in 0..8 {
                prop_assert!((closed[i] - oracle[i]).abs() < 1e-9, "{:?} vs {:?}", closed, oracle);
            }
            let anti = bracket_vf(&w, &v).a;
            for i in 0..8 {
                prop_assert!((closed[i] + anti[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn incompatible_pair_is_rejected() {
        // a shift and a rotation: their bracket is an independent shift
        let sys = TemplateSystem::from_rows(&[[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]]);
        assert!(matches!(check_compatibility(&sys), Err(Error::Compatibility(_))));
    }

    #[test]
    fn shifted_parabola_gauges_to_centered() {
        let shifted = canonicalize(&detect(&expr("0.5*(x-1)^2"), 2).unwrap()).unwrap();
        let centered = canonicalize(&detect(&expr("0.5*x^2"), 2).unwrap()).unwrap();
        assert!((shifted.0.a.clone() - centered.0.a.clone()).amax() < 1e-8, "{} vs {}", shifted.0.a, centered.0.a);
        assert!((shifted.1.d[4] + 1.0).abs() < 1e-8);
        assert!(centered.1.approx_eq(&EquivElement::identity(), 1e-9));
    }

    #[test]
    fn transformed_rows_hold_on_the_image() {
        use rand::SeedableRng;
        let base = Arc::new(Topography::make_case(CaseId::C7a, CaseParams { epsilon: Some(1.0), ..Default::default() }, None).unwrap());
        let sys = detect(&base, 9).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let g = EquivElement::random(&mut rng);
            let image = base.transformed(&g);
            let moved = transform_system(&sys, &g);
            let pts = image.default_points(64, 11).unwrap();
            assert!(moved.residual_on(&image, &pts).unwrap() < 1e-10);
            assert_eq!(detect(&image, 9).unwrap().k, sys.k);
        }
    }

    #[test]
    fn canonical_rows_are_reproduced_by_gauge() {
        let t = Topography::make_case(CaseId::C7a, CaseParams { epsilon: Some(1.0), ..Default::default() }, None).unwrap();
        let t = Arc::new(t).transformed(&EquivElement::shift_xy(0.3, -0.2));
        let sys = detect(&t, 1).unwrap();
        let (gauged, g, m) = canonicalize(&sys).unwrap();
        assert!((g.d[4] + 0.3).abs() < 1e-8 && (g.d[5] - 0.2).abs() < 1e-8);
        let redo = &m * transform_system(&sys, &g).a;
        assert!((redo - &gauged.a).amax() < 1e-8);
        assert!(canonicalize(&gauged).unwrap().1.approx_eq(&EquivElement::identity(), 1e-8));
    }
}
