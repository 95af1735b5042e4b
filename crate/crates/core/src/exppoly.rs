//! Exponential-polynomial functions `Σ c ξ^j e^{μξ}` on the negative half-line.
//!
//! Exponents and coefficients are complex; a function built from conjugate
//! pairs evaluates to a real number and that is the only case the rest of the
//! crate relies on.

use std::cmp::Ordering;

use num_complex::Complex;

use crate::error::{domain, Result};
use crate::scalar::Real;
use crate::weighted_space::WeightSpec;

/// One term `c · ξ^j · e^{μξ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpTerm<T> {
    pub power: u32,
    pub rate: Complex<T>,
    pub coeff: Complex<T>,
}

impl<T: Real> ExpTerm<T> {
    pub fn new(power: u32, rate: Complex<T>, coeff: Complex<T>) -> Self {
        Self { power, rate, coeff }
    }

    pub fn real(power: u32, rate: T, coeff: T) -> Self {
        Self::new(power, Complex::new(rate, T::zero()), Complex::new(coeff, T::zero()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpPolyFunction<T: Real> {
    terms: Vec<ExpTerm<T>>,
}

impl<T: Real> From<Vec<ExpTerm<T>>> for ExpPolyFunction<T> {
    fn from(terms: Vec<ExpTerm<T>>) -> Self {
        Self::new(terms)
    }
}

impl<T: Real> From<ExpPolyFunction<T>> for Vec<ExpTerm<T>> {
    fn from(f: ExpPolyFunction<T>) -> Self {
        f.terms
    }
}

fn term_order<T: Real>(a: &ExpTerm<T>, b: &ExpTerm<T>) -> Ordering {
    let key = |t: &ExpTerm<T>| (t.rate.re, t.rate.im);
    let (ar, ai) = key(a);
    let (br, bi) = key(b);
    ar.partial_cmp(&br)
        .unwrap_or(Ordering::Equal)
        .then(ai.partial_cmp(&bi).unwrap_or(Ordering::Equal))
        .then(a.power.cmp(&b.power))
}

impl<T: Real> ExpPolyFunction<T> {
    /// Canonicalises: sorts by `(Re μ, Im μ, j)`, merges like terms and drops
    /// exact zeros.
    pub fn new(mut terms: Vec<ExpTerm<T>>) -> Self {
        terms.sort_by(term_order);
        let mut out: Vec<ExpTerm<T>> = Vec::with_capacity(terms.len());
        for t in terms {
            match out.last_mut() {
                Some(last) if last.power == t.power && last.rate == t.rate => last.coeff += t.coeff,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.coeff != Complex::new(T::zero(), T::zero()));
        Self { terms: out }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// `c · e^{μξ}` with real `μ`, `c`.
    pub fn exponential(rate: T, coeff: T) -> Self {
        Self::new(vec![ExpTerm::real(0, rate, coeff)])
    }

    /// `c · e^{aξ} cos(bξ)`, stored as a conjugate pair.
    pub fn damped_cosine(a: T, b: T, coeff: T) -> Self {
        let half = Complex::new(coeff / T::of(2.0), T::zero());
        Self::new(vec![
            ExpTerm::new(0, Complex::new(a, b), half),
            ExpTerm::new(0, Complex::new(a, -b), half),
        ])
    }

    pub fn terms(&self) -> &[ExpTerm<T>] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval_complex(&self, xi: T) -> Complex<T> {
        let x = Complex::new(xi, T::zero());
        self.terms.iter().fold(Complex::new(T::zero(), T::zero()), |acc, t| {
            acc + t.coeff * x.powu(t.power) * (t.rate * x).exp()
        })
    }

    pub fn eval(&self, xi: T) -> T {
        self.eval_complex(xi).re
    }

    /// Largest `|Im f(ξ)| / (1 + |f(ξ)|)` over a handful of probe points.
    pub fn imaginary_residual(&self) -> T {
        [0.0, -0.37, -1.0, -2.5, -6.0]
            .iter()
            .map(|&x| {
                let v = self.eval_complex(T::of(x));
                v.im.abs() / (T::one() + v.norm())
            })
            .fold(T::zero(), T::max)
    }

    /// Whether every term has a conjugate partner with conjugate coefficient.
    pub fn is_conjugate_closed(&self, tol: T) -> bool {
        self.terms.iter().all(|t| {
            if t.rate.im == T::zero() {
                return t.coeff.im.abs() <= tol * (T::one() + t.coeff.norm());
            }
            self.terms.iter().any(|s| {
                s.power == t.power
                    && s.rate == t.rate.conj()
                    && (s.coeff - t.coeff.conj()).norm() <= tol * (T::one() + t.coeff.norm())
            })
        })
    }

    pub fn min_rate_re(&self) -> Option<T> {
        self.terms.iter().map(|t| t.rate.re).reduce(T::min)
    }

    pub fn max_power(&self) -> u32 {
        self.terms.iter().map(|t| t.power).max().unwrap_or(0)
    }

    pub fn scale(&self, a: T) -> Self {
        self.scale_complex(Complex::new(a, T::zero()))
    }

    pub fn scale_complex(&self, a: Complex<T>) -> Self {
        Self::new(self.terms.iter().map(|t| ExpTerm { coeff: t.coeff * a, ..*t }).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.terms.iter().chain(other.terms.iter()).copied().collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                out.push(ExpTerm::new(a.power + b.power, a.rate + b.rate, a.coeff * b.coeff));
            }
        }
        Self::new(out)
    }

    /// Multiplies by `e^{sξ}`.
    pub fn shift_rate(&self, s: T) -> Self {
        let s = Complex::new(s, T::zero());
        Self::new(self.terms.iter().map(|t| ExpTerm { rate: t.rate + s, ..*t }).collect())
    }

    pub fn derivative(&self) -> Self {
        let mut out = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            out.push(ExpTerm::new(t.power, t.rate, t.coeff * t.rate));
            if t.power > 0 {
                let j = Complex::new(T::of_usize(t.power as usize), T::zero());
                out.push(ExpTerm::new(t.power - 1, t.rate, t.coeff * j));
            }
        }
        Self::new(out)
    }

    /// `∫_{-∞}^0 f(ξ) dξ`, using `∫ ξ^j e^{μξ} = (-1)^j j! / μ^{j+1}`.
    pub fn integral_rminus_complex(&self) -> Result<Complex<T>> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for t in &self.terms {
            if !(t.rate.re > T::zero()) {
                return domain(format!(
                    "integral over the negative half-line diverges: exponent {} + {}i has non-positive real part",
                    t.rate.re, t.rate.im
                ));
            }
            let mut fact = T::one();
            for i in 2..=t.power as usize {
                fact *= T::of_usize(i);
            }
            let sign = if t.power % 2 == 0 { T::one() } else { -T::one() };
            acc += t.coeff * Complex::new(sign * fact, T::zero()) / t.rate.powu(t.power + 1);
        }
        Ok(acc)
    }

    pub fn integral_rminus(&self) -> Result<T> {
        Ok(self.integral_rminus_complex()?.re)
    }

    /// Closed-form `⟨f, g⟩_w = ∫ f g e^{pξ} dξ`.
    pub fn inner_product_w(&self, other: &Self, spec: &WeightSpec<T>) -> Result<T> {
        self.mul(other).shift_rate(spec.p()).integral_rminus()
    }
}

/// Free-function form of [`ExpPolyFunction::mul`].
pub fn exppoly_mul<T: Real>(f: &ExpPolyFunction<T>, g: &ExpPolyFunction<T>) -> ExpPolyFunction<T> {
    f.mul(g)
}

/// Free-function form of [`ExpPolyFunction::integral_rminus`].
pub fn exppoly_integral_rminus<T: Real>(f: &ExpPolyFunction<T>) -> Result<T> {
    f.integral_rminus()
}
