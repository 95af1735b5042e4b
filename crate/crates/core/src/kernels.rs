//! Delay kernels and their Fourier–Laguerre coefficients.
//!
//! A kernel here is always the *function part* `k(ξ)` that multiplies
//! `S_{t+ξ} w(ξ)` inside the delay integral, so projections are plain
//! `⟨k, L_j⟩_w` inner products.

use crate::error::{domain, Error, Result};
use crate::exppoly::ExpPolyFunction;
use crate::laguerre_basis::basis_all;
use crate::scalar::Real;
use crate::weighted_space::{QuadratureBuilder, QuadratureRule, WeightSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelRole {
    Alpha,
    Beta,
    Gamma,
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelShape<T: Real> {
    /// Identically zero; the corresponding coefficient of the dynamics is absent.
    Zero,
    /// `height` on `[-delta, 0]`, zero below (left-closed).
    UniformWindow { delta: T, height: T },
    ExpPoly(ExpPolyFunction<T>),
    /// Piecewise linear through `(xs[i], values[i])`; zero outside the grid
    /// when integrated, an error when evaluated pointwise.
    Tabulated { xs: Vec<T>, values: Vec<T> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel<T: Real> {
    pub shape: KernelShape<T>,
    pub role: KernelRole,
}

impl<T: Real> Kernel<T> {
    pub fn zero(role: KernelRole) -> Self {
        Self { shape: KernelShape::Zero, role }
    }

    /// Normalised window `1/δ · 1_{[-δ,0]}`.
    pub fn uniform_window(delta: T, role: KernelRole) -> Result<Self> {
        Self::uniform_window_with_height(delta, T::one() / delta, role)
    }

    pub fn uniform_window_with_height(delta: T, height: T, role: KernelRole) -> Result<Self> {
        if !(delta > T::zero()) || !delta.is_finite() {
            return domain(format!("window length must be positive and finite, got {delta}"));
        }
        if !height.is_finite() {
            return domain("window height must be finite");
        }
        Ok(Self {
            shape: KernelShape::UniformWindow { delta, height },
            role,
        })
    }

    /// Exponential-polynomial kernel; terms must come in conjugate pairs and
    /// every exponent must satisfy `Re μ + p > p/2` for the given weight.
    pub fn exp_poly(f: ExpPolyFunction<T>, spec: &WeightSpec<T>, role: KernelRole) -> Result<Self> {
        if !f.is_conjugate_closed(T::of(1e-12)) {
            return domain("exponential-polynomial kernel is not closed under conjugation");
        }
        if let Some(re) = f.min_rate_re() {
            if !(re + spec.p() > spec.lambda_star()) {
                return domain(format!(
                    "exponent real part {re} gives Re(mu) + p = {} <= lambda* = {}",
                    re + spec.p(),
                    spec.lambda_star()
                ));
            }
        }
        Ok(Self {
            shape: KernelShape::ExpPoly(f),
            role,
        })
    }

    pub fn tabulated(xs: Vec<T>, values: Vec<T>, role: KernelRole) -> Result<Self> {
        if xs.len() < 2 || xs.len() != values.len() {
            return domain("tabulated kernel needs at least two (xi, value) pairs of equal length");
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return domain("tabulated grid must be strictly increasing");
        }
        if *xs.last().unwrap() > T::zero() {
            return domain("tabulated grid must lie in xi <= 0");
        }
        if values.iter().chain(&xs).any(|v| !v.is_finite()) {
            return domain("tabulated kernel contains non-finite entries");
        }
        Ok(Self {
            shape: KernelShape::Tabulated { xs, values },
            role,
        })
    }

    /// Parses two-column `xi,value` CSV. Blank lines, `#` comments and a
    /// non-numeric header line are skipped.
    pub fn tabulated_from_csv(text: &str, role: KernelRole) -> Result<Self> {
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => return domain(format!("line {}: expected two columns", lineno + 1)),
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(v)) => {
                    xs.push(T::of(x));
                    values.push(T::of(v));
                }
                _ if xs.is_empty() => continue,
                _ => return domain(format!("line {}: could not parse '{line}'", lineno + 1)),
            }
        }
        Self::tabulated(xs, values, role)
    }

    pub fn is_zero(&self) -> bool {
        match &self.shape {
            KernelShape::Zero => true,
            KernelShape::ExpPoly(f) => f.is_zero(),
            _ => false,
        }
    }

    /// Pointwise value; errors for `xi > 0` and outside a tabulated grid.
    pub fn eval(&self, xi: T) -> Result<T> {
        if xi > T::zero() || xi.is_nan() {
            return domain(format!("kernel evaluated at xi = {xi} > 0"));
        }
        if let KernelShape::Tabulated { xs, .. } = &self.shape {
            if xi < xs[0] || xi > *xs.last().unwrap() {
                return domain(format!(
                    "xi = {xi} outside tabulated range [{}, {}]",
                    xs[0],
                    xs.last().unwrap()
                ));
            }
        }
        Ok(self.eval_unchecked(xi))
    }

    /// Value with zero extension outside the support; `xi <= 0` assumed.
    pub fn eval_unchecked(&self, xi: T) -> T {
        match &self.shape {
            KernelShape::Zero => T::zero(),
            KernelShape::UniformWindow { delta, height } => {
                if xi >= -*delta {
                    *height
                } else {
                    T::zero()
                }
            }
            KernelShape::ExpPoly(f) => f.eval(xi),
            KernelShape::Tabulated { xs, values } => interpolate(xs, values, xi),
        }
    }

    /// One-sided limit at `xi`: from above (`ξ → xi⁺`) or from below.
    /// Differs from [`Kernel::eval_unchecked`] only at jump points.
    pub fn eval_limit(&self, xi: T, from_above: bool) -> T {
        let at_jump = match &self.shape {
            KernelShape::UniformWindow { delta, .. } => xi == -*delta,
            KernelShape::Tabulated { xs, .. } => xi == xs[0],
            _ => false,
        };
        if at_jump && !from_above {
            T::zero()
        } else {
            self.eval_unchecked(xi)
        }
    }

    /// Lag beyond which `|k(ξ) w(ξ)|` is negligible (`< tol` relative for
    /// exponential kernels), or the support length.
    pub fn lag_horizon(&self, spec: &WeightSpec<T>, tol: T) -> T {
        match &self.shape {
            KernelShape::ExpPoly(f) => {
                // `k·w^{1/2}` decays at `Re μ + p/2`; solve x^j e^{-rate x} = tol.
                let rate = f.min_rate_re().unwrap_or(T::one()) + spec.lambda_star();
                let j = T::of_usize(f.max_power() as usize);
                let mut x = -tol.ln() / rate;
                for _ in 0..20 {
                    x = (-tol.ln() + j * x.max(T::one()).ln()) / rate;
                }
                x
            }
            _ => -self.support_start().unwrap_or(T::zero()),
        }
    }

    /// Points where the kernel is not smooth; quadrature panels should break there.
    pub fn breakpoints(&self) -> Vec<T> {
        match &self.shape {
            KernelShape::UniformWindow { delta, .. } => vec![-*delta],
            KernelShape::Tabulated { xs, .. } => vec![xs[0]],
            _ => Vec::new(),
        }
    }

    /// Lower end of the support, if bounded.
    pub fn support_start(&self) -> Option<T> {
        match &self.shape {
            KernelShape::Zero => Some(T::zero()),
            KernelShape::UniformWindow { delta, .. } => Some(-*delta),
            KernelShape::Tabulated { xs, .. } => Some(xs[0]),
            KernelShape::ExpPoly(_) => None,
        }
    }

    /// Slowest exponential decay among `k²w` and `k·L_j·w`, for unbounded support.
    pub fn quadrature_decay(&self, spec: &WeightSpec<T>) -> Option<T> {
        match &self.shape {
            KernelShape::ExpPoly(f) => f.min_rate_re().map(|re| {
                let half = spec.p() / T::of(2.0);
                (T::of(2.0) * re + spec.p()).min(re + spec.p0() + half)
            }),
            _ => None,
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        let shape = match &self.shape {
            KernelShape::Zero => KernelShape::Zero,
            KernelShape::UniformWindow { delta, height } => KernelShape::UniformWindow {
                delta: *delta,
                height: *height * a,
            },
            KernelShape::ExpPoly(f) => KernelShape::ExpPoly(f.scale(a)),
            KernelShape::Tabulated { xs, values } => KernelShape::Tabulated {
                xs: xs.clone(),
                values: values.iter().map(|v| *v * a).collect(),
            },
        };
        Self { shape, role: self.role }
    }
}

pub(crate) fn interpolate<T: Real>(xs: &[T], values: &[T], xi: T) -> T {
    let last = xs.len() - 1;
    if xi < xs[0] || xi > xs[last] {
        return T::zero();
    }
    let i = xs.partition_point(|x| *x <= xi);
    if i > last {
        return values[last];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (xi - x0) / (x1 - x0);
    values[i - 1] + t * (values[i] - values[i - 1])
}

pub fn kernel_eval<T: Real>(k: &Kernel<T>, xi: T) -> Result<T> {
    k.eval(xi)
}

/// Rule suited to projecting `kernels` onto basis vectors up to `max_index`:
/// panels break at kernel discontinuities and the cutoff covers slow
/// exponential kernels as well as the basis itself.
pub fn rule_for_kernels<'a, T: Real + 'a>(
    spec: &WeightSpec<T>,
    max_index: usize,
    kernels: impl IntoIterator<Item = &'a Kernel<T>>,
    node_count: usize,
    tail_tol: T,
) -> Result<QuadratureRule<T>> {
    let mut b = QuadratureBuilder::new(*spec)
        .node_count(node_count)
        .tail_tol(tail_tol)
        .max_index(max_index);
    for k in kernels {
        b = b.breakpoints(k.breakpoints());
        if let Some(rate) = k.quadrature_decay(spec) {
            b = b.min_decay(rate);
        }
    }
    b.build()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedKernel<T: Real> {
    /// `c⁰..cⁿ`; `c⁰ = 0` because `e⁰` is orthogonal to every function part.
    pub coeffs: Vec<T>,
    pub n: usize,
    pub norm_sq_w: T,
    pub tail_sq: T,
    pub spec: WeightSpec<T>,
    pub role: KernelRole,
}

impl<T: Real> ProjectedKernel<T> {
    /// `tail` after keeping `c¹..cᵐ`, for `m = 0..=n`.
    pub fn cumulative_tails(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n + 1);
        let mut kept = T::zero();
        out.push(self.norm_sq_w.max(T::zero()));
        for c in &self.coeffs[1..] {
            kept += *c * *c;
            out.push((self.norm_sq_w - kept).max(T::zero()));
        }
        out
    }

    /// Coefficients `c⁰..cᵐ` of a lower-order truncation.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m > self.n {
            return domain(format!("cannot truncate order {} projection to {m}", self.n));
        }
        let coeffs = self.coeffs[..=m].to_vec();
        let kept: T = coeffs.iter().map(|c| *c * *c).sum();
        Ok(Self {
            tail_sq: self.norm_sq_w - kept,
            coeffs,
            n: m,
            ..self.clone()
        })
    }
}

fn weighted_norm_sq<T: Real>(k: &Kernel<T>, spec: &WeightSpec<T>, rule: &QuadratureRule<T>) -> T {
    rule.integrate(|x| {
        let v = k.eval_unchecked(x);
        spec.weight(x) * v * v
    })
}

/// Checks that `‖k‖²_w` is resolved by `rule`: node doubling and extending
/// the domain each change it by at most `1e-3` relative.
pub fn check_integrable<T: Real>(k: &Kernel<T>, spec: &WeightSpec<T>, rule: &QuadratureRule<T>) -> Result<T> {
    let base = weighted_norm_sq(k, spec, rule);
    if !base.is_finite() {
        return Err(Error::Integrability {
            what: format!("{:?} kernel norm is not finite", k.role),
            relative_change: f64::INFINITY,
        });
    }
    if base == T::zero() {
        return Ok(base);
    }
    let fine = weighted_norm_sq(k, spec, &rule.refined());
    let tail = weighted_norm_sq(k, spec, &rule.tail_extension());
    let change = ((fine - base).abs().max(tail.abs()) / base).to_f64_lossy();
    if !(change <= 1e-3) {
        return Err(Error::Integrability {
            what: format!("{:?} kernel weighted norm did not stabilise", k.role),
            relative_change: change,
        });
    }
    Ok(base)
}

/// Projects `k` onto `e¹..eⁿ`. Coefficient `k` depends only on the rule, so
/// a larger `n` reproduces the leading entries bit for bit.
pub fn project_kernel<T: Real>(
    k: &Kernel<T>,
    n: usize,
    spec: &WeightSpec<T>,
    rule: &QuadratureRule<T>,
) -> Result<ProjectedKernel<T>> {
    let norm_sq_w = if k.is_zero() {
        T::zero()
    } else {
        check_integrable(k, spec, rule)?
    };
    let mut coeffs = vec![T::zero(); n + 1];
    if n > 0 && !k.is_zero() {
        let ww = rule.weighted_weights(spec);
        let mut basis = vec![T::zero(); n];
        for (x, w) in rule.nodes().iter().zip(&ww) {
            let v = k.eval_unchecked(*x);
            if v == T::zero() {
                continue;
            }
            basis_all(spec, *x, &mut basis);
            let wv = *w * v;
            for (c, l) in coeffs[1..].iter_mut().zip(&basis) {
                *c += wv * *l;
            }
        }
    }
    let kept: T = coeffs.iter().map(|c| *c * *c).sum();
    Ok(ProjectedKernel {
        coeffs,
        n,
        norm_sq_w,
        tail_sq: norm_sq_w - kept,
        spec: *spec,
        role: k.role,
    })
}

/// `max(tail_sq, 0)`.
pub fn tail_norm_sq<T: Real>(pk: &ProjectedKernel<T>) -> T {
    pk.tail_sq.max(T::zero())
}
