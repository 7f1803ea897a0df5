//! Natural cubic splines for tabulated profile functions.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Spline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl Spline {
    pub fn natural(xs: Vec<f64>, ys: Vec<f64>) -> Result<Spline> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return Err(Error::Parameter("spline needs at least 3 (s, f) samples".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("spline knots must be strictly increasing".into()));
        }
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            let a = h0;
            let b = 2.0 * (h0 + h1);
            let rhs = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            let denom = b - a * c[i - 1];
            c[i] = h1 / denom;
            d[i] = (rhs - a * d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(Spline { xs, ys, m })
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    /// Value and first derivative. Outside the knot range the end cubic is extended.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&x| x <= s) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - s) / h;
        let b = (s - self.xs[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.ys[i] + b * self.ys[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let dv = (self.ys[i + 1] - self.ys[i]) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (v, dv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_knots_and_lines_exactly() {
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let s = Spline::natural(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.eval(*x).0 - y).abs() < 1e-14);
        }
        let (v, dv) = s.eval(1.3);
        assert!((v - 1.6).abs() < 1e-14 && (dv - 2.0).abs() < 1e-13);
    }

    #[test]
    fn sine_converges() {
        let err = |n: usize| {
            let xs: Vec<f64> = (0..=n).map(|i| i as f64 * 6.0 / n as f64).collect();
            let ys = xs.iter().map(|x| x.sin()).collect();
            let s = Spline::natural(xs, ys).unwrap();
            (0..100).map(|i| 1.0 + 4.0 * i as f64 / 100.0).map(|x| (s.eval(x).0 - x.sin()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(40), err(80));
        assert!(e1 / e2 > 12.0, "{e1} {e2}");
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(Spline::natural(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(Spline::natural(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]).is_err());
    }
}
