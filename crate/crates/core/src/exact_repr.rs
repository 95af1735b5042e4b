//! Exact finite-dimensional representations for exponential-polynomial
//! kernels.
//!
//! The span of `{ξ^i e^{μξ} : i ≤ j}` over all generator terms `ξ^j e^{μξ}`
//! is closed under `f ↦ f′ + p f`, which is differentiation of `v = f·w`.
//! Orthonormalising that span gives function parts `e¹..eⁿ` on which the
//! adjoint generator acts by a finite matrix, so the chain built on them
//! carries no truncation error.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::dynamics::DynamicsSpec;
use crate::error::{domain, Error, Result};
use crate::exppoly::{ExpPolyFunction, ExpTerm};
use crate::kernels::{Kernel, KernelShape};
use crate::markov_chain::{AuxDrift, MarkovSystem};
use crate::scalar::Real;
use crate::sdde_oracle::{InitialDatum, SddeModel};
use crate::weighted_space::{QuadratureRule, WeightSpec};

const PIVOT_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Part {
    Real,
    Cos,
    Sin,
}

/// Real monomial `ξ^i e^{aξ}`, `ξ^i e^{aξ} cos bξ` or `ξ^i e^{aξ} sin bξ` (b > 0).
#[derive(Clone, Copy, Debug, PartialEq)]
struct Monomial<T> {
    power: u32,
    re: T,
    im: T,
    part: Part,
}

impl<T: Real> Monomial<T> {
    fn function(&self) -> ExpPolyFunction<T> {
        let z = T::zero();
        let half = T::of(0.5);
        let mu = Complex::new(self.re, self.im);
        let term = |rate, coeff| ExpTerm::new(self.power, rate, coeff);
        match self.part {
            Part::Real => ExpPolyFunction::new(vec![term(mu, Complex::new(T::one(), z))]),
            Part::Cos => ExpPolyFunction::new(vec![
                term(mu, Complex::new(half, z)),
                term(mu.conj(), Complex::new(half, z)),
            ]),
            // sin bξ = (e^{ibξ} − e^{−ibξ}) / 2i
            Part::Sin => ExpPolyFunction::new(vec![
                term(mu, Complex::new(z, -half)),
                term(mu.conj(), Complex::new(z, half)),
            ]),
        }
    }

    fn same_family(&self, other: &Self) -> bool {
        self.re == other.re && self.im == other.im
    }
}

/// A finite-dimensional subspace of function parts stable under the adjoint
/// generator, with its drift data.
#[derive(Clone, Debug)]
pub struct StableSubspace<T: Real> {
    pub dimension: usize,
    pub spec: WeightSpec<T>,
    /// `v′ = M v` on the monomials `v_r = m_r w`, row-major.
    pub m: Vec<T>,
    pub monomials: Vec<ExpPolyFunction<T>>,
    /// `w`-orthonormal function parts of `e¹..eⁿ`.
    pub ortho_basis: Vec<ExpPolyFunction<T>>,
    /// `q_k = e_k(0)`.
    pub q: Vec<T>,
    /// `Q_{kh} = ⟨e_h, −e_k′ − p e_k⟩_w`, row-major.
    pub q_matrix: Vec<T>,
    /// Exponents `μ + p` of `v`, which are the eigenvalues of `M`.
    pub eigenvalues: Vec<Complex<T>>,
    /// Largest `‖𝒜*e_k − Σ_h Q_{kh} e_h‖_w` (closed form).
    pub stability_residual: T,
}

impl<T: Real> StableSubspace<T> {
    /// `⟨e_k, f⟩_w` for every basis function, prefixed by the `e⁰` slot 0.
    pub fn coefficients(&self, f: &ExpPolyFunction<T>) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.dimension + 1];
        for (o, e) in out[1..].iter_mut().zip(&self.ortho_basis) {
            *o = e.inner_product_w(f, &self.spec)?;
        }
        Ok(out)
    }

    /// `‖f − Σ ⟨e_k,f⟩ e_k‖_w`, closed form.
    pub fn projection_residual(&self, f: &ExpPolyFunction<T>) -> Result<T> {
        let c = self.coefficients(f)?;
        let mut r = f.clone();
        for (ck, e) in c[1..].iter().zip(&self.ortho_basis) {
            r = r.sub(&e.scale(*ck));
        }
        Ok(r.inner_product_w(&r, &self.spec)?.max(T::zero()).sqrt())
    }

    /// `(s0, ⟨e_1, s1⟩_w, …)` by quadrature.
    pub fn project_initial_state(&self, init: &InitialDatum<T>, rule: &QuadratureRule<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.dimension + 1];
        out[0] = init.s0;
        let ww = rule.weighted_weights(&self.spec);
        for (x, w) in rule.nodes().iter().zip(&ww) {
            let v = init.history.eval(*x);
            if v == T::zero() {
                continue;
            }
            for (o, e) in out[1..].iter_mut().zip(&self.ortho_basis) {
                *o += *w * v * e.eval(*x);
            }
        }
        out
    }
}

fn closure<T: Real>(generators: &[ExpPolyFunction<T>], spec: &WeightSpec<T>) -> Result<Vec<Monomial<T>>> {
    if generators.is_empty() {
        return domain("at least one generator is required");
    }
    let mut keys: Vec<(T, T, u32)> = Vec::new();
    for (g_idx, g) in generators.iter().enumerate() {
        if g.is_zero() {
            return Err(Error::Degenerate(format!("generator {g_idx} is identically zero")));
        }
        if !g.is_conjugate_closed(T::of(1e-12)) {
            return domain(format!("generator {g_idx} is not closed under conjugation"));
        }
        for t in g.terms() {
            if !(t.rate.re + spec.p() > spec.lambda_star()) {
                return domain(format!(
                    "generator {g_idx}: Re(mu) + p = {} must exceed lambda* = {}",
                    t.rate.re + spec.p(),
                    spec.lambda_star()
                ));
            }
            for i in 0..=t.power {
                keys.push((t.rate.re, t.rate.im.abs(), i));
            }
        }
    }
    keys.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
            .then(a.2.cmp(&b.2))
    });
    keys.dedup();
    let mut out = Vec::new();
    for (re, im, power) in keys {
        if im == T::zero() {
            out.push(Monomial { power, re, im, part: Part::Real });
        } else {
            out.push(Monomial { power, re, im, part: Part::Cos });
            out.push(Monomial { power, re, im, part: Part::Sin });
        }
    }
    Ok(out)
}

/// `M[r][c]`: coefficient of monomial `c` in `(D + p) m_r`.
fn generator_matrix<T: Real>(monos: &[Monomial<T>], p: T) -> Vec<T> {
    let n = monos.len();
    let find = |power: u32, like: &Monomial<T>, part: Part| {
        monos
            .iter()
            .position(|m| m.power == power && m.same_family(like) && m.part == part)
            .expect("closure contains lower powers and both parts")
    };
    let mut m = vec![T::zero(); n * n];
    for (r, mono) in monos.iter().enumerate() {
        m[r * n + r] = mono.re + p;
        if mono.power > 0 {
            let c = find(mono.power - 1, mono, mono.part);
            m[r * n + c] = T::of_usize(mono.power as usize);
        }
        match mono.part {
            Part::Real => {}
            Part::Cos => m[r * n + find(mono.power, mono, Part::Sin)] = -mono.im,
            Part::Sin => m[r * n + find(mono.power, mono, Part::Cos)] = mono.im,
        }
    }
    m
}

/// Two-pass modified Gram–Schmidt with closed-form inner products.
pub fn gram_schmidt<T: Real>(funcs: &[ExpPolyFunction<T>], spec: &WeightSpec<T>) -> Result<Vec<ExpPolyFunction<T>>> {
    let mut basis: Vec<ExpPolyFunction<T>> = Vec::with_capacity(funcs.len());
    for (k, f) in funcs.iter().enumerate() {
        let original = f.inner_product_w(f, spec)?;
        let mut v = f.clone();
        for _ in 0..2 {
            for e in &basis {
                let c = e.inner_product_w(&v, spec)?;
                v = v.sub(&e.scale(c));
            }
        }
        let norm_sq = v.inner_product_w(&v, spec)?;
        if !(norm_sq > T::of(PIVOT_TOL) * original) {
            return Err(Error::Degenerate(format!(
                "function {k} is linearly dependent on its predecessors (relative pivot {:.3e})",
                (norm_sq / original).to_f64_lossy()
            )));
        }
        basis.push(v.scale(norm_sq.sqrt().recip()));
    }
    Ok(basis)
}

pub fn build_stable_subspace<T: Real>(
    generators: &[ExpPolyFunction<T>],
    spec: &WeightSpec<T>,
) -> Result<StableSubspace<T>> {
    let monos = closure(generators, spec)?;
    let n = monos.len();
    let m = generator_matrix(&monos, spec.p());
    let funcs: Vec<_> = monos.iter().map(Monomial::function).collect();
    let ortho = gram_schmidt(&funcs, spec)?;

    let mut eigenvalues: Vec<Complex<T>> = Vec::with_capacity(n);
    for mono in &monos {
        let sign = if mono.part == Part::Sin { -T::one() } else { T::one() };
        eigenvalues.push(Complex::new(mono.re + spec.p(), sign * mono.im));
    }
    // Cross-check the structural eigenvalues numerically.
    let dense = DMatrix::from_row_slice(n, n, &m.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>());
    for ev in dense.complex_eigenvalues().iter() {
        if !(ev.re > spec.lambda_star().to_f64_lossy()) {
            return domain(format!(
                "eigenvalue {} + {}i of M does not exceed lambda* = {}",
                ev.re,
                ev.im,
                spec.lambda_star()
            ));
        }
    }

    let mut q = Vec::with_capacity(n);
    let mut qm = vec![T::zero(); n * n];
    let mut residual = T::zero();
    for (k, e) in ortho.iter().enumerate() {
        q.push(e.eval(T::zero()));
        let image = e.derivative().add(&e.scale(spec.p())).scale(-T::one());
        let mut r = image.clone();
        for (h, eh) in ortho.iter().enumerate() {
            let c = eh.inner_product_w(&image, spec)?;
            qm[k * n + h] = c;
            r = r.sub(&eh.scale(c));
        }
        let res = r.inner_product_w(&r, spec)?.max(T::zero()).sqrt();
        residual = residual.max(res);
    }
    if !(residual.to_f64_lossy() < RESIDUAL_TOL) {
        return Err(Error::Degenerate(format!(
            "span is not numerically stable under the generator (residual {:.3e})",
            residual.to_f64_lossy()
        )));
    }
    Ok(StableSubspace {
        dimension: n,
        spec: *spec,
        m,
        monomials: funcs,
        ortho_basis: ortho,
        q,
        q_matrix: qm,
        eigenvalues,
        stability_residual: residual,
    })
}

/// Exact system for exponential-polynomial `α, β, γ` (any may be zero). The
/// subspace is the closure of the union of all three kernels' terms.
pub fn exact_system<T: Real>(
    alpha: &ExpPolyFunction<T>,
    beta: &ExpPolyFunction<T>,
    gamma: &ExpPolyFunction<T>,
    gamma0: T,
    dynamics: DynamicsSpec<T>,
    spec: &WeightSpec<T>,
) -> Result<(MarkovSystem<T>, Option<StableSubspace<T>>)> {
    let kernels = [alpha, beta, gamma];
    let generators: Vec<ExpPolyFunction<T>> = kernels.iter().filter(|k| !k.is_zero()).map(|k| (*k).clone()).collect();
    if generators.is_empty() {
        let sys = MarkovSystem {
            n: 0,
            spec: *spec,
            alpha: vec![T::zero()],
            beta: vec![T::zero()],
            gamma: vec![gamma0],
            dynamics,
            aux: AuxDrift::Explicit {
                q: Vec::new(),
                q_matrix: Vec::new(),
            },
        };
        return Ok((sys, None));
    }
    let sub = build_stable_subspace(&generators, spec)?;
    let mut coeffs = Vec::with_capacity(3);
    for k in kernels {
        let residual = sub.projection_residual(k)?;
        if !(residual.to_f64_lossy() < RESIDUAL_TOL) {
            return Err(Error::Degenerate(format!(
                "kernel not represented in the stable subspace (residual {:.3e})",
                residual.to_f64_lossy()
            )));
        }
        coeffs.push(sub.coefficients(k)?);
    }
    let mut gamma_c = coeffs.pop().unwrap();
    gamma_c[0] = gamma0;
    let beta_c = coeffs.pop().unwrap();
    let alpha_c = coeffs.pop().unwrap();
    let sys = MarkovSystem {
        n: sub.dimension,
        spec: *spec,
        alpha: alpha_c,
        beta: beta_c,
        gamma: gamma_c,
        dynamics,
        aux: AuxDrift::Explicit {
            q: sub.q.clone(),
            q_matrix: sub.q_matrix.clone(),
        },
    };
    Ok((sys, Some(sub)))
}

fn as_exppoly<T: Real>(k: &Kernel<T>) -> Result<ExpPolyFunction<T>> {
    match &k.shape {
        KernelShape::Zero => Ok(ExpPolyFunction::zero()),
        KernelShape::ExpPoly(f) => Ok(f.clone()),
        _ => domain(format!("{:?} kernel is not exponential-polynomial; no exact representation", k.role)),
    }
}

/// Exact system and initial state for a model whose kernels are all
/// exponential-polynomial or zero.
pub fn exact_system_for<T: Real>(model: &SddeModel<T>, rule: &QuadratureRule<T>) -> Result<(MarkovSystem<T>, Vec<T>)> {
    let (sys, sub) = exact_system(
        &as_exppoly(&model.alpha)?,
        &as_exppoly(&model.beta)?,
        &as_exppoly(&model.gamma)?,
        model.gamma0,
        model.dynamics.clone(),
        &model.spec,
    )?;
    let x0 = match &sub {
        Some(sub) => sub.project_initial_state(&model.init, rule),
        None => vec![model.init.s0],
    };
    Ok((sys, x0))
}
