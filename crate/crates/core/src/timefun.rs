//! Quasi-polynomials in `t`: finite sums of `t^n e^{σt}(c cos ωt + s sin ωt)`.
//!
//! Every time profile that can appear in a characteristic lives in this space,
//! and it is closed under addition, multiplication, differentiation and
//! integration, so all algebra on profiles stays exact up to rounding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// Keys closer than this in rate or frequency are merged.
pub const KEY_TOL: f64 = 1e-12;

/// One term `t^deg e^{rate t}(c cos(freq t) + s sin(freq t))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub rate: f64,
    pub freq: f64,
    pub deg: u32,
    pub c: f64,
    pub s: f64,
}

impl Term {
    pub fn new(rate: f64, freq: f64, deg: u32, c: f64, s: f64) -> Self {
        Term { rate, freq, deg, c, s }
    }

    fn key_cmp(&self, other: &Term) -> Ordering {
        self.rate
            .total_cmp(&other.rate)
            .then(self.freq.total_cmp(&other.freq))
            .then(self.deg.cmp(&other.deg))
    }

    fn same_key(&self, other: &Term) -> bool {
        self.deg == other.deg
            && (self.rate - other.rate).abs() < KEY_TOL
            && (self.freq - other.freq).abs() < KEY_TOL
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut v = if self.freq == 0.0 {
            self.c
        } else {
            let (sn, cs) = (self.freq * t).sin_cos();
            self.c * cs + self.s * sn
        };
        if self.rate != 0.0 {
            v *= (self.rate * t).exp();
        }
        if self.deg > 0 {
            v *= t.powi(self.deg as i32);
        }
        v
    }

    /// The complex amplitude `A` with `term = Re[A t^n e^{(σ+iω)t}]`.
    fn amplitude(&self) -> Complex64 {
        Complex64::new(self.c, -self.s)
    }

    fn from_amplitude(rate: f64, freq: f64, deg: u32, a: Complex64) -> Term {
        Term::new(rate, freq, deg, a.re, -a.im)
    }
}

/// Element of span{t^n e^{σt} cos ωt, t^n e^{σt} sin ωt}, kept normalized:
/// keys sorted and unique, ω ≥ 0, no sine part at ω = 0, no zero terms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuasiPoly {
    terms: Vec<Term>,
}

impl QuasiPoly {
    pub fn zero() -> Self {
        QuasiPoly { terms: Vec::new() }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = Term>) -> Self {
        let mut q = QuasiPoly { terms: terms.into_iter().collect() };
        q.normalize();
        q
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([Term::new(0.0, 0.0, 0, c, 0.0)])
    }

    /// `c t^n`.
    pub fn monomial(c: f64, n: u32) -> Self {
        Self::from_terms([Term::new(0.0, 0.0, n, c, 0.0)])
    }

    pub fn exp(rate: f64) -> Self {
        Self::from_terms([Term::new(rate, 0.0, 0, 1.0, 0.0)])
    }

    pub fn cos(freq: f64) -> Self {
        Self::from_terms([Term::new(0.0, freq, 0, 1.0, 0.0)])
    }

    pub fn sin(freq: f64) -> Self {
        Self::from_terms([Term::new(0.0, freq, 0, 0.0, 1.0)])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest coefficient magnitude, 0 for the zero function.
    pub fn max_coeff(&self) -> f64 {
        self.terms.iter().map(|t| t.c.abs().max(t.s.abs())).fold(0.0, f64::max)
    }

    fn normalize(&mut self) {
        for t in &mut self.terms {
            if t.rate.abs() < KEY_TOL {
                t.rate = 0.0;
            }
            if t.freq < 0.0 {
                t.freq = -t.freq;
                t.s = -t.s;
            }
            if t.freq < KEY_TOL {
                t.freq = 0.0;
                t.s = 0.0;
            }
        }
        self.terms.sort_by(|a, b| a.key_cmp(b));
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match out.last_mut() {
                Some(last) if last.same_key(&t) => {
                    last.c += t.c;
                    last.s += t.s;
                }
                _ => out.push(t),
            }
        }
        out.retain(|t| t.c != 0.0 || t.s != 0.0);
        self.terms = out;
    }

    /// Drops terms whose coefficients are below `tol` times the largest one.
    pub fn pruned(&self, tol: f64) -> Self {
        let cut = tol * self.max_coeff();
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut t = *t;
                if t.c.abs() <= cut {
                    t.c = 0.0;
                }
                if t.s.abs() <= cut {
                    t.s = 0.0;
                }
                t
            })
            .collect::<Vec<_>>();
        Self::from_terms(terms)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|t| Term { c: t.c * k, s: t.s * k, ..*t }))
    }

    pub fn add(&self, other: &QuasiPoly) -> Self {
        Self::from_terms(self.terms.iter().chain(other.terms.iter()).copied())
    }

    pub fn sub(&self, other: &QuasiPoly) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// `a·self + b·other`.
    pub fn lincomb(a: f64, p: &QuasiPoly, b: f64, q: &QuasiPoly) -> Self {
        p.scale(a).add(&q.scale(b))
    }

    pub fn derivative(&self) -> Self {
        let mut out = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            if t.deg > 0 {
                let n = t.deg as f64;
                out.push(Term::new(t.rate, t.freq, t.deg - 1, n * t.c, n * t.s));
            }
            out.push(Term::new(
                t.rate,
                t.freq,
                t.deg,
                t.rate * t.c + t.freq * t.s,
                t.rate * t.s - t.freq * t.c,
            ));
        }
        Self::from_terms(out)
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        let mut q = self.clone();
        for _ in 0..n {
            q = q.derivative();
        }
        q
    }

    pub fn mul(&self, other: &QuasiPoly) -> Self {
        let mut out = Vec::with_capacity(2 * self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let rate = a.rate + b.rate;
                let deg = a.deg + b.deg;
                out.push(Term::new(
                    rate,
                    a.freq + b.freq,
                    deg,
                    0.5 * (a.c * b.c - a.s * b.s),
                    0.5 * (a.s * b.c + a.c * b.s),
                ));
                out.push(Term::new(
                    rate,
                    a.freq - b.freq,
                    deg,
                    0.5 * (a.c * b.c + a.s * b.s),
                    0.5 * (a.s * b.c - a.c * b.s),
                ));
            }
        }
        Self::from_terms(out)
    }

    /// Multiplies by `t`.
    pub fn mul_t(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|t| Term { deg: t.deg + 1, ..*t }))
    }

    /// The antiderivative without a constant term.
    pub fn antiderivative(&self) -> Self {
        let mut out = Vec::new();
        for t in &self.terms {
            if t.rate == 0.0 && t.freq == 0.0 {
                let m = (t.deg + 1) as f64;
                out.push(Term::new(0.0, 0.0, t.deg + 1, t.c / m, 0.0));
                continue;
            }
            // ∫ t^n e^{λt} = e^{λt} Σ_j (-1)^j n!/(n-j)! t^{n-j} / λ^{j+1}
            let lam = Complex64::new(t.rate, t.freq);
            let inv = lam.inv();
            let a = t.amplitude();
            let mut coef = a * inv;
            for j in 0..=t.deg {
                let m = t.deg - j;
                out.push(Term::from_amplitude(t.rate, t.freq, m, coef));
                coef = -coef * (m as f64) * inv;
            }
        }
        Self::from_terms(out)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.eval(t)).sum()
    }

    /// Coefficient-wise comparison with merged keys; `tol` is relative to
    /// the larger coefficient scale.
    pub fn approx_eq(&self, other: &QuasiPoly, tol: f64) -> bool {
        let d = self.sub(other);
        let scale = self.max_coeff().max(other.max_coeff()).max(1.0);
        d.max_coeff() <= tol * scale
    }

    /// Coordinates along `keys` (cos part then sin part per key); terms whose
    /// key is missing from `keys` are returned as the residual norm.
    pub fn coords(&self, keys: &[(f64, f64, u32)]) -> (Vec<f64>, f64) {
        let mut v = vec![0.0; 2 * keys.len()];
        let mut miss = 0.0f64;
        for t in &self.terms {
            let pos = keys.iter().position(|&(r, f, d)| {
                d == t.deg && (r - t.rate).abs() < KEY_TOL && (f - t.freq).abs() < KEY_TOL
            });
            match pos {
                Some(i) => {
                    v[2 * i] += t.c;
                    v[2 * i + 1] += t.s;
                }
                None => miss = miss.hypot(t.c.hypot(t.s)),
            }
        }
        (v, miss)
    }

    /// The (rate, freq, deg) keys of the nonzero terms.
    pub fn keys(&self) -> Vec<(f64, f64, u32)> {
        self.terms.iter().map(|t| (t.rate, t.freq, t.deg)).collect()
    }
}

impl fmt::Display for QuasiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for t in &self.terms {
            let mut factor = String::new();
            if t.deg == 1 {
                factor.push_str("*t");
            } else if t.deg > 1 {
                factor.push_str(&format!("*t^{}", t.deg));
            }
            if t.rate != 0.0 {
                factor.push_str(&format!("*exp({}t)", t.rate));
            }
            let parts: Vec<(f64, String)> = if t.freq == 0.0 {
                vec![(t.c, String::new())]
            } else {
                vec![(t.c, format!("*cos({}t)", t.freq)), (t.s, format!("*sin({}t)", t.freq))]
            };
            for (coef, trig) in parts {
                if coef == 0.0 {
                    continue;
                }
                if !first {
                    write!(f, " {} ", if coef < 0.0 { '-' } else { '+' })?;
                } else if coef < 0.0 {
                    write!(f, "-")?;
                }
                write!(f, "{}{}{}", coef.abs(), factor, trig)?;
                first = false;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn t() -> QuasiPoly {
        QuasiPoly::monomial(1.0, 1)
    }

    #[test]
    fn add_examples() {
        assert_eq!(t().add(&t()), QuasiPoly::monomial(2.0, 1));
        let e = QuasiPoly::exp(2.0);
        assert!(e.add(&e.scale(-1.0)).is_zero());
        let cs = QuasiPoly::cos(1.0).add(&QuasiPoly::sin(1.0));
        assert_eq!(cs.terms(), &[Term::new(0.0, 1.0, 0, 1.0, 1.0)]);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(QuasiPoly::monomial(1.0, 2).derivative(), QuasiPoly::monomial(2.0, 1));
        assert_eq!(QuasiPoly::exp(2.0).derivative(), QuasiPoly::exp(2.0).scale(2.0));
        let tcos = QuasiPoly::cos(1.0).mul_t();
        let want = QuasiPoly::cos(1.0).sub(&QuasiPoly::sin(1.0).mul_t());
        assert_eq!(tcos.derivative(), want);
    }

    #[test]
    fn product_examples() {
        let c = QuasiPoly::cos(1.0);
        let want = QuasiPoly::constant(0.5).add(&QuasiPoly::cos(2.0).scale(0.5));
        assert_eq!(c.mul(&c), want);
        assert_eq!(t().mul(&QuasiPoly::monomial(1.0, 2)), QuasiPoly::monomial(1.0, 3));
        assert_eq!(QuasiPoly::exp(1.0).mul(&QuasiPoly::exp(-1.0)), QuasiPoly::constant(1.0));
    }

    #[test]
    fn rates_from_rounding_still_cancel() {
        let a = QuasiPoly::exp(1.0 + 3e-16);
        assert_eq!(a.mul(&QuasiPoly::exp(-1.0)), QuasiPoly::constant(1.0));
    }

    #[test]
    fn antiderivative_examples() {
        assert_eq!(QuasiPoly::constant(1.0).antiderivative(), t());
        assert_eq!(QuasiPoly::cos(2.0).antiderivative(), QuasiPoly::sin(2.0).scale(0.5));
        assert_eq!(QuasiPoly::exp(2.0).scale(2.0).antiderivative(), QuasiPoly::exp(2.0));
    }

    #[test]
    fn eval_examples() {
        assert_eq!(QuasiPoly::exp(2.0).eval(0.0), 1.0);
        let p = QuasiPoly::monomial(1.0, 2).add(&QuasiPoly::constant(1.0));
        assert_eq!(p.eval(2.0), 5.0);
        assert_eq!(QuasiPoly::sin(1.0).eval(PI / 2.0), 1.0);
    }

    #[test]
    fn antiderivative_of_polynomial_exponential_is_exact() {
        let p = QuasiPoly::from_terms([
            Term::new(0.0, 0.0, 3, 2.0, 0.0),
            Term::new(2.0, 0.0, 2, 1.0, 0.0),
            Term::new(-1.0, 0.0, 1, 4.0, 0.0),
        ]);
        assert_eq!(p.antiderivative().derivative(), p);
    }

    #[test]
    fn display_is_readable() {
        let p = QuasiPoly::monomial(2.0, 2).sub(&QuasiPoly::exp(-1.0));
        assert_eq!(p.to_string(), "-1*exp(-1t) + 2*t^2");
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        (
            prop::sample::select(vec![0.0, 1.0, -1.0, 2.0, -2.0, 0.5]),
            prop::sample::select(vec![0.0, 1.0, 2.0, 0.5]),
            0u32..3,
            -2.0f64..2.0,
            -2.0f64..2.0,
        )
            .prop_map(|(r, f, d, c, s)| Term::new(r, f, d, c, s))
    }

    fn arb_qp() -> impl Strategy<Value = QuasiPoly> {
        prop::collection::vec(arb_term(), 0..4).prop_map(QuasiPoly::from_terms)
    }

    proptest! {
        #[test]
        fn derivative_matches_central_differences(a in arb_qp(), t0 in -1.0f64..1.0) {
            let d = a.derivative().eval(t0);
            let fd = |h: f64| (a.eval(t0 + h) - a.eval(t0 - h)) / (2.0 * h);
            let e1 = (fd(1e-2) - d).abs();
            let e2 = (fd(5e-3) - d).abs();
            let scale = 1.0 + a.max_coeff() * 50.0;
            // halving the step cuts the error by about four
            prop_assert!(e2 <= 0.3 * e1 + 1e-9 * scale);
        }

        #[test]
        fn antiderivative_inverts_derivative(a in arb_qp()) {
            prop_assert!(a.antiderivative().derivative().approx_eq(&a, 1e-13));
        }

        #[test]
        fn product_commutes_and_distributes(a in arb_qp(), b in arb_qp(), c in arb_qp()) {
            prop_assert!(a.mul(&b).approx_eq(&b.mul(&a), 1e-14));
            prop_assert!(a.mul(&b.add(&c)).approx_eq(&a.mul(&b).add(&a.mul(&c)), 1e-13));
        }

        #[test]
        fn product_evaluates_pointwise(a in arb_qp(), b in arb_qp(), t0 in -1.0f64..1.0) {
            let lhs = a.mul(&b).eval(t0);
            let rhs = a.eval(t0) * b.eval(t0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()) * 100.0);
        }

        #[test]
        fn normalization_is_idempotent(a in arb_qp()) {
            prop_assert_eq!(QuasiPoly::from_terms(a.terms().to_vec()), a.clone());
            for term in a.terms() {
                prop_assert!(term.freq >= 0.0);
                prop_assert!(term.freq != 0.0 || term.s == 0.0);
            }
        }
    }
}
