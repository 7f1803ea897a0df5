//! Null spaces, ranks and subspace comparisons. Decompositions run through
//! faer; nalgebra's SVD loses accuracy on some small well-conditioned inputs.

use crate::error::{Error, Result};
use faer::Mat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Scalars usable on both sides of the bridge.
pub trait Scalar: nalgebra::ComplexField<RealField = f64> + faer::traits::ComplexField + Copy {}
impl Scalar for f64 {}
impl Scalar for Complex64 {}

fn to_faer<T: Scalar>(m: &DMatrix<T>) -> Mat<T> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer<T: Scalar>(m: faer::MatRef<'_, T>) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full SVD: descending singular values, U (r×r) and V (c×c).
pub struct Svd<T> {
    pub s: Vec<f64>,
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
}

pub fn svd<T: Scalar>(m: &DMatrix<T>) -> Result<Svd<T>> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(Svd { s: vec![], u: DMatrix::identity(r, r), v: DMatrix::identity(c, c) });
    }
    if m.iter().any(|x| !nalgebra::ComplexField::is_finite(x)) {
        return Err(Error::Numeric("non-finite matrix entry".into()));
    }
    let f = to_faer(m).svd().map_err(|e| Error::Numeric(format!("SVD did not converge: {e:?}")))?;
    let d = f.S().column_vector();
    let s = (0..r.min(c)).map(|i| nalgebra::ComplexField::modulus(d[i])).collect();
    Ok(Svd { s, u: from_faer(f.U()), v: from_faer(f.V()) })
}

pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(svd(m)?.s)
}

/// Singular values (descending) and all right singular vectors as columns,
/// including the full null space when there are fewer rows than columns.
pub fn svd_full<T: Scalar>(m: &DMatrix<T>) -> Result<(Vec<f64>, DMatrix<T>)> {
    let d = svd(m)?;
    Ok((d.s, d.v))
}

/// Moore–Penrose inverse, dropping σ ≤ rtol·σ_max.
pub fn pinv(m: &DMatrix<f64>, rtol: f64) -> Result<DMatrix<f64>> {
    let d = svd(m)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (i, &s) in d.s.iter().enumerate() {
        if s > rtol * smax && s > 0.0 {
            out += d.v.column(i) * d.u.column(i).transpose() / s;
        }
    }
    Ok(out)
}

/// Minimum-norm least-squares solution.
pub fn lstsq(m: &DMatrix<f64>, rhs: &DVector<f64>, rtol: f64) -> Result<DVector<f64>> {
    Ok(pinv(m, rtol)? * rhs)
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(vec![]);
    }
    let ev = to_faer(m).eigenvalues().map_err(|e| Error::Numeric(format!("eigenvalues did not converge: {e:?}")))?;
    Ok(ev.into_iter().map(|c| Complex64::new(c.re, c.im)).collect())
}

/// Orthonormal basis (columns) of the null space, using `σ ≤ tol·σ_max` as zero.
pub fn null_space(m: &DMatrix<f64>, rtol: f64) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(DMatrix::identity(m.ncols(), m.ncols()));
    }
    let (sv, v) = svd_full(m)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > rtol * smax && s > 0.0).count();
    Ok(v.columns(rank, m.ncols() - rank).into_owned())
}

/// The `dim` right singular vectors with the smallest singular values.
pub fn smallest_right_vectors<T: Scalar>(m: &DMatrix<T>, dim: usize) -> Result<DMatrix<T>> {
    let (_, v) = svd_full(m)?;
    let n = v.ncols();
    Ok(v.columns(n - dim, dim).into_owned())
}

pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = singular_values(m).unwrap_or_default();
    let smax = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > rtol * smax && s > 0.0).count()
}

pub fn rank_abs(m: &DMatrix<f64>, atol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    singular_values(m).unwrap_or_default().iter().filter(|&&s| s > atol).count()
}

/// Orthonormal basis (columns) of the column space.
pub fn orth(m: &DMatrix<f64>, rtol: f64) -> Result<DMatrix<f64>> {
    if m.ncols() == 0 {
        return Ok(DMatrix::zeros(m.nrows(), 0));
    }
    let d = svd(m)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    let keep = d.s.iter().filter(|&&s| s > rtol * smax && s > 0.0).count();
    Ok(d.u.columns(0, keep).into_owned())
}

/// Largest principal angle between two column spans (π/2 when dimensions differ).
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let qa = orth(a, 1e-12)?;
    let qb = orth(b, 1e-12)?;
    if qa.ncols() != qb.ncols() {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    if qa.ncols() == 0 {
        return Ok(0.0);
    }
    // sin θ_max = ‖(I − P_a) Q_b‖₂, accurate for small angles
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let s = singular_values(&resid)?.first().copied().unwrap_or(0.0);
    Ok(s.min(1.0).asin())
}

/// Distance from `v` to the column span of the orthonormal `q`.
pub fn dist_to_span(q: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    if q.ncols() == 0 {
        return v.norm();
    }
    (v - q * (q.transpose() * v)).norm()
}

/// Reduced row-echelon form by Gauss–Jordan with largest-magnitude pivots.
/// Returns the reduced matrix, the pivot columns and the recombination matrix M
/// with `reduced = M · input`.
pub fn rref(a: &DMatrix<f64>, cols: usize, tol: f64) -> (DMatrix<f64>, Vec<usize>, DMatrix<f64>) {
    let k = a.nrows();
    let mut m = a.clone();
    let mut rec = DMatrix::<f64>::identity(k, k);
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols.min(a.ncols()) {
        if row >= k {
            break;
        }
        let (best, val) = (row..k).map(|r| (r, m[(r, col)].abs())).fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol {
            continue;
        }
        m.swap_rows(row, best);
        rec.swap_rows(row, best);
        let p = m[(row, col)];
        m.row_mut(row).scale_mut(1.0 / p);
        rec.row_mut(row).scale_mut(1.0 / p);
        for r in 0..k {
            if r != row {
                let f = m[(r, col)];
                if f != 0.0 {
                    let mr = m.row(row).clone_owned();
                    let rr = rec.row(row).clone_owned();
                    let mut tm = m.row_mut(r);
                    tm -= mr * f;
                    let mut tr = rec.row_mut(r);
                    tr -= rr * f;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    (m, pivots, rec)
}

/// Null space of a complex matrix: the `dim` smallest right singular vectors.
pub fn complex_null(m: &DMatrix<Complex64>, dim: usize) -> Result<DMatrix<Complex64>> {
    smallest_right_vectors(m, dim)
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_and_pinv_reconstruct() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[0.5, 0.25, 0.0, 0.25, 0.5, 0.25, 0.0, 0.25, 0.5],
        );
        let d = svd(&m).unwrap();
        let s = DMatrix::from_diagonal(&DVector::from_vec(d.s.clone()));
        assert!((&d.u * s * d.v.transpose() - &m).amax() < 1e-14);
        let p = pinv(&m, 1e-12).unwrap();
        assert!((&p * &m - DMatrix::<f64>::identity(3, 3)).amax() < 1e-13);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let n = null_space(&m, 1e-12).unwrap();
        assert_eq!(n.ncols(), 2);
        assert!((&m * &n).norm() < 1e-14);
    }

    #[test]
    fn principal_angles() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 1, &[1.0, 1e-8, 0.0]);
        let ang = max_principal_angle(&a, &b).unwrap();
        assert!((ang - 1e-8).abs() < 1e-15);
        let c = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(max_principal_angle(&a, &c).unwrap(), std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn rref_with_recombination() {
        let a = DMatrix::from_row_slice(2, 3, &[2.0, 4.0, 1.0, 1.0, 3.0, 0.0]);
        let (r, piv, rec) = rref(&a, 3, 1e-12);
        assert_eq!(piv, vec![0, 1]);
        assert!((&rec * &a - &r).norm() < 1e-14);
        assert!((r[(0, 0)] - 1.0).abs() < 1e-15 && r[(0, 1)].abs() < 1e-15 && (r[(1, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complex_kernel() {
        // rotation generator has eigenvalue i with eigenvector (1, -i)/√2
        let k = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let m = to_complex(&k) - DMatrix::identity(2, 2) * Complex64::new(0.0, 1.0);
        let v = complex_null(&m, 1).unwrap();
        assert!((&m * &v).norm() < 1e-14);
    }
}
