//! Laguerre polynomials on the negative half-line and the weighted
//! orthonormal system `e^0 = (1, 0)`, `e^k = (0, L_{k-1})` of `R × L²_w`.
//!
//! Public indices count basis vectors of the product space: index `k ≥ 1`
//! is the function `L_{k-1}(ξ) = sqrt(2 p0) P_{k-1}(-2 p0 ξ) exp((p0 - p/2) ξ)`
//! where `P_j` is the ordinary Laguerre polynomial on `[0, ∞)`.

use crate::error::{domain, Result};
use crate::scalar::Real;
use crate::weighted_space::WeightSpec;

/// `P_k(x)` for `x ≥ 0` by the three-term recurrence
/// `(j+1) P_{j+1} = (2j + 1 - x) P_j - j P_{j-1}`.
pub fn laguerre_poly<T: Real>(k: usize, x: T) -> Result<T> {
    if x < T::zero() || !x.is_finite() {
        return domain(format!("Laguerre polynomials are evaluated on x >= 0, got {x}"));
    }
    Ok(laguerre_unchecked(k, x))
}

#[inline]
pub(crate) fn laguerre_unchecked<T: Real>(k: usize, x: T) -> T {
    let mut prev = T::one();
    if k == 0 {
        return prev;
    }
    let mut cur = T::one() - x;
    for j in 1..k {
        let jf = T::of_usize(j);
        let next = ((jf + jf + T::one() - x) * cur - jf * prev) / (jf + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// Writes `P_0(x), …, P_{out.len()-1}(x)` into `out`.
pub fn laguerre_all<T: Real>(x: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    out[0] = T::one();
    if out.len() == 1 {
        return;
    }
    out[1] = T::one() - x;
    for j in 1..out.len() - 1 {
        let jf = T::of_usize(j);
        out[j + 1] = ((jf + jf + T::one() - x) * out[j] - jf * out[j - 1]) / (jf + T::one());
    }
}

/// A basis vector of `R × L²_w`, by public index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisVector<T> {
    pub index: usize,
    pub spec: WeightSpec<T>,
}

impl<T: Real> BasisVector<T> {
    pub fn new(index: usize, spec: WeightSpec<T>) -> Self {
        Self { index, spec }
    }

    /// Scalar component: 1 for `e^0`, 0 otherwise.
    pub fn scalar_part(&self) -> T {
        if self.index == 0 {
            T::one()
        } else {
            T::zero()
        }
    }

    /// Function component at `xi`; identically zero for `e^0`.
    pub fn function_part(&self, xi: T) -> Result<T> {
        if self.index == 0 {
            if xi > T::zero() {
                return domain(format!("basis functions live on xi <= 0, got {xi}"));
            }
            return Ok(T::zero());
        }
        basis_eval(self.index, &self.spec, xi)
    }
}

/// Function part of `e^k`, `k ≥ 1`, at `xi ≤ 0`.
pub fn basis_eval<T: Real>(k: usize, spec: &WeightSpec<T>, xi: T) -> Result<T> {
    if k == 0 {
        return domain("index 0 is the scalar basis vector and has no function part");
    }
    if xi > T::zero() || !xi.is_finite() {
        return domain(format!("basis functions live on xi <= 0, got {xi}"));
    }
    Ok(basis_unchecked(k, spec, xi))
}

#[inline]
pub(crate) fn basis_unchecked<T: Real>(k: usize, spec: &WeightSpec<T>, xi: T) -> T {
    let two_p0 = T::of(2.0) * spec.p0();
    let decay = spec.p0() - spec.p() / T::of(2.0);
    two_p0.sqrt() * laguerre_unchecked(k - 1, -two_p0 * xi) * (decay * xi).exp()
}

/// Fills `out[j] = L_j(xi)` for `j < out.len()`, i.e. the function parts of
/// `e^1 … e^{out.len()}`.
pub fn basis_all<T: Real>(spec: &WeightSpec<T>, xi: T, out: &mut [T]) {
    let two_p0 = T::of(2.0) * spec.p0();
    laguerre_all(-two_p0 * xi, out);
    let scale = two_p0.sqrt() * ((spec.p0() - spec.p() / T::of(2.0)) * xi).exp();
    for v in out.iter_mut() {
        *v *= scale;
    }
}

/// Derivative of the function part of `e^k` (k ≥ 1):
/// `L'_{k-1} = (p0 - p/2) L_{k-1} + 2 p0 Σ_{i<k-1} L_i`.
pub fn basis_derivative<T: Real>(k: usize, spec: &WeightSpec<T>, xi: T) -> Result<T> {
    if k == 0 {
        return domain("index 0 has no function part");
    }
    let mut vals = vec![T::zero(); k];
    if xi > T::zero() {
        return domain(format!("basis functions live on xi <= 0, got {xi}"));
    }
    basis_all(spec, xi, &mut vals);
    let lower: T = vals[..k - 1].iter().copied().sum();
    let decay = spec.p0() - spec.p() / T::of(2.0);
    Ok(decay * vals[k - 1] + T::of(2.0) * spec.p0() * lower)
}

/// Coefficients of `A* e^k` in the orthonormal basis:
///
/// `A* e^k = to_e0 · e^0 + to_lower · Σ_{i=1}^{k-1} e^i + to_self · e^k`.
///
/// `A*` acts on `(0, f)` as `(f(0), -f' - (w'/w) f)`; with `w = exp(pξ)` the
/// `-p f` term adds to the diagonal, giving `to_self = -(p0 + p/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AStarCoefficients<T> {
    pub k: usize,
    pub to_e0: T,
    pub to_lower: T,
    pub to_self: T,
}

impl<T: Real> AStarCoefficients<T> {
    /// Dense expansion over `e^0 … e^len-1`; entries above `k` are zero.
    pub fn expand(&self, len: usize) -> Vec<T> {
        let mut out = vec![T::zero(); len];
        if len == 0 {
            return out;
        }
        out[0] = self.to_e0;
        for slot in out.iter_mut().take(self.k.min(len)).skip(1) {
            *slot = self.to_lower;
        }
        if self.k < len {
            out[self.k] = self.to_self;
        }
        out
    }
}

/// `A* e^k` for `k ≥ 1`. (`A* e^0 = 0`.)
pub fn astar_on_basis<T: Real>(k: usize, spec: &WeightSpec<T>) -> Result<AStarCoefficients<T>> {
    if k == 0 {
        return domain("A* e^0 = 0; coefficients are defined for k >= 1");
    }
    let two_p0 = T::of(2.0) * spec.p0();
    Ok(AStarCoefficients {
        k,
        to_e0: two_p0.sqrt(),
        to_lower: -two_p0,
        to_self: -(spec.p0() + spec.p() / T::of(2.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weighted_space::{inner_product_w, QuadratureBuilder};

    fn binomial_sum(k: usize, x: f64) -> f64 {
        // Σ_i C(k,i) (-x)^i / i!
        let mut total = 0.0;
        let mut binom = 1.0;
        let mut fact = 1.0;
        for i in 0..=k {
            if i > 0 {
                binom *= (k - i + 1) as f64 / i as f64;
                fact *= i as f64;
            }
            total += binom * (-x).powi(i as i32) / fact;
        }
        total
    }

    #[test]
    fn polynomial_examples() {
        assert_eq!(laguerre_poly(0, 3.7f64).unwrap(), 1.0);
        for k in 0..25 {
            assert_eq!(laguerre_poly(k, 0.0f64).unwrap(), 1.0);
        }
        assert!((laguerre_poly(2, 1.0f64).unwrap() - (-0.5)).abs() < 1e-15);
        assert!(laguerre_poly(3, -0.1f64).is_err());
    }

    #[test]
    fn recurrence_agrees_with_binomial_sum() {
        for k in 0..=10 {
            for i in 0..=400 {
                let x = i as f64 * 0.1;
                let a = laguerre_poly(k, x).unwrap();
                let b = binomial_sum(k, x);
                let scale = a.abs().max(b.abs()).max(1.0);
                assert!((a - b).abs() / scale < 1e-9, "k={k} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn laguerre_all_matches_single_evaluations() {
        let mut buf = [0.0; 12];
        laguerre_all(2.5, &mut buf);
        for (k, v) in buf.iter().enumerate() {
            assert_eq!(*v, laguerre_unchecked(k, 2.5));
        }
    }

    #[test]
    fn basis_examples() {
        let s = WeightSpec::<f64>::new(0.0, 0.5).unwrap();
        assert!((basis_eval(1, &s, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let s = WeightSpec::<f64>::new(0.0, 1.0).unwrap();
        assert!((basis_eval(1, &s, 0.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let v = basis_eval(3, &s, -1.0).unwrap();
        let expected = 2f64.sqrt() * binomial_sum(2, 2.0) * (-1.0f64).exp();
        assert!((v - expected).abs() < 1e-14);
        assert!((v + 0.52026).abs() < 1e-5);
        assert!(basis_eval(2, &s, 0.1).is_err());
        assert!(basis_eval(0, &s, -0.1).is_err());
        // value at zero is sqrt(2 p0) for every index
        let s = WeightSpec::<f64>::new(1.0, 3.5).unwrap();
        for k in 1..20 {
            assert!((basis_eval(k, &s, 0.0).unwrap() - 5f64.sqrt()).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_identity_on_grid() {
        // P_k(ξ) := P̃_k(-ξ) satisfies P_k' = Σ_{i<k} P_i.
        let h = 1e-5;
        for k in 1..=8 {
            for i in 0..1000 {
                let xi = -10.0 + 10.0 * i as f64 / 999.0;
                let p = |x: f64| laguerre_unchecked(k, -x);
                let fd = (p(xi + h) - p(xi - h)) / (2.0 * h);
                let sum: f64 = (0..k).map(|j| laguerre_unchecked(j, -xi)).sum();
                let scale = sum.abs().max(1.0);
                assert!((fd - sum).abs() / scale < 1e-5, "k={k} xi={xi}: {fd} vs {sum}");
            }
        }
    }

    #[test]
    fn analytic_derivative_matches_finite_difference() {
        let s = WeightSpec::<f64>::new(-0.5, 0.5).unwrap();
        for k in 1..8 {
            for xi in [-3.0, -1.2, -0.4] {
                let h = 1e-6;
                let fd = (basis_eval(k, &s, xi + h).unwrap() - basis_eval(k, &s, xi - h).unwrap())
                    / (2.0 * h);
                let an = basis_derivative(k, &s, xi).unwrap();
                assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0));
            }
        }
    }

    #[test]
    fn astar_examples() {
        let s = WeightSpec::<f64>::new(0.0, 1.0).unwrap();
        let c = astar_on_basis(1, &s).unwrap();
        assert!((c.to_e0 - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.to_self, -1.0);
        assert_eq!(c.expand(3), vec![c.to_e0, -1.0, 0.0]);
        let s = WeightSpec::<f64>::new(2.0, 3.0).unwrap();
        let c = astar_on_basis(2, &s).unwrap();
        assert!((c.to_e0 - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.to_lower, -2.0);
        assert_eq!(c.to_self, -2.0);
        assert!(astar_on_basis(0, &s).is_err());
    }

    #[test]
    fn astar_expansion_vanishes_beyond_k() {
        let s = WeightSpec::<f64>::new(1.0, 2.0).unwrap();
        for k in 1..10 {
            let e = astar_on_basis(k, &s).unwrap().expand(15);
            assert!(e[k + 1..].iter().all(|v| *v == 0.0));
            assert!(e[1..k].iter().all(|v| *v == -2.0));
        }
    }

    fn numeric_astar(k: usize, j: usize, s: &WeightSpec<f64>) -> f64 {
        // ⟨A*(0, L_{k-1}), e^j⟩ with A*(0, f) = (f(0), -f' - p f).
        if j == 0 {
            return basis_eval(k, s, 0.0).unwrap();
        }
        let rule = QuadratureBuilder::new(*s).max_index(16).node_count(8192).build().unwrap();
        inner_product_w(
            |x| -basis_derivative(k, s, x).unwrap() - s.p() * basis_eval(k, s, x).unwrap(),
            |x| basis_eval(j, s, x).unwrap(),
            s,
            &rule,
        )
    }

    #[test]
    fn astar_matches_numerical_adjoint() {
        for (p, lambda) in [(0.0, 1.0), (1.0, 2.0), (-0.5, 0.5), (2.0, 3.0)] {
            let s = WeightSpec::<f64>::new(p, lambda).unwrap();
            for k in 1..=6 {
                let expected = astar_on_basis(k, &s).unwrap().expand(9);
                for (j, want) in expected.iter().enumerate() {
                    let got = numeric_astar(k, j, &s);
                    assert!((got - want).abs() < 1e-6, "p={p} k={k} j={j}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn orthonormal_under_weight() {
        for (p, lambda) in [(0.0, 1.0), (1.0, 2.0), (-0.5, 0.5)] {
            let s = WeightSpec::<f64>::new(p, lambda).unwrap();
            let rule = QuadratureBuilder::new(s).max_index(13).build().unwrap();
            for j in 1..=12 {
                for k in 1..=12 {
                    let g = inner_product_w(
                        |x| basis_unchecked(j, &s, x),
                        |x| basis_unchecked(k, &s, x),
                        &s,
                        &rule,
                    );
                    let want = if j == k { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-6, "p={p} j={j} k={k}: {g}");
                }
            }
        }
    }
}
