//! Exponential weights on the negative half-line, composite Gauss–Legendre
//! quadrature on a truncated domain `[-cutoff, 0]`, and the weighted inner
//! product that every projection in the crate goes through.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Real;

/// Exponential weight `w(ξ) = exp(p ξ)` together with the Laguerre decay
/// `lambda` and the derived basis scale `p0 = lambda - p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec<T> {
    p: T,
    lambda: T,
    p0: T,
}

impl<T: Real> WeightSpec<T> {
    /// Requires `lambda > max(p, p/2)`, i.e. `lambda` above the integrability
    /// threshold `p/2` and `p0 = lambda - p > 0`.
    pub fn new(p: T, lambda: T) -> Result<Self> {
        if !p.is_finite() || !lambda.is_finite() {
            return domain("weight exponent p and decay lambda must be finite");
        }
        let half = p / T::of(2.0);
        let bound = p.max(half);
        if lambda <= bound {
            return domain(format!(
                "lambda must satisfy lambda > max{{p, p/2}} (got p = {p}, lambda = {lambda}, bound = {bound})"
            ));
        }
        Ok(Self {
            p,
            lambda,
            p0: lambda - p,
        })
    }

    #[inline]
    pub fn p(&self) -> T {
        self.p
    }

    #[inline]
    pub fn lambda(&self) -> T {
        self.lambda
    }

    #[inline]
    pub fn p0(&self) -> T {
        self.p0
    }

    /// Infimum of exponents `λ` with `exp(λξ) w^{-1/2}` square integrable.
    #[inline]
    pub fn lambda_star(&self) -> T {
        self.p / T::of(2.0)
    }

    /// Bound on `|w'/w|`.
    #[inline]
    pub fn growth_bound(&self) -> T {
        self.p.abs()
    }

    #[inline]
    pub fn weight(&self, xi: T) -> T {
        (self.p * xi).exp()
    }

    /// Slowest exponential decay among `basis × basis × w` integrands.
    pub fn basis_decay_rate(&self) -> T {
        let two_p0 = T::of(2.0) * self.p0;
        two_p0.min(two_p0 + self.p)
    }
}

/// Composite Gauss–Legendre rule on `[-cutoff, 0]`.
///
/// `weights` carry only the interval Jacobians; the exponential weight is
/// applied by the callers that need it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
    cutoff: T,
    panels: Vec<(T, T)>,
    order: usize,
}

pub const DEFAULT_PANEL_ORDER: usize = 16;
pub const MIN_NODE_COUNT: usize = 16;

impl<T: Real> QuadratureRule<T> {
    /// Builds a rule from explicit panel edges (ascending, last edge 0).
    pub fn from_edges(edges: &[T], order: usize) -> Result<Self> {
        if edges.len() < 2 {
            return domain("quadrature needs at least one panel");
        }
        if order == 0 {
            return domain("panel order must be positive");
        }
        for pair in edges.windows(2) {
            if !(pair[0] < pair[1]) {
                return domain("panel edges must be strictly increasing");
            }
        }
        let (gl_nodes, gl_weights) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity((edges.len() - 1) * order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        let mut panels = Vec::with_capacity(edges.len() - 1);
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = (b - a) / T::of(2.0);
            let mid = (a + b) / T::of(2.0);
            for (x, w) in gl_nodes.iter().zip(&gl_weights) {
                nodes.push(mid + half * T::of(*x));
                weights.push(half * T::of(*w));
            }
            panels.push((a, b));
        }
        Ok(Self {
            nodes,
            weights,
            cutoff: -edges[0],
            panels,
            order,
        })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn cutoff(&self) -> T {
        self.cutoff
    }

    pub fn panels(&self) -> &[(T, T)] {
        &self.panels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same domain, every panel split in two.
    pub fn refined(&self) -> Self {
        let mut edges = Vec::with_capacity(2 * self.panels.len() + 1);
        for &(a, b) in &self.panels {
            edges.push(a);
            edges.push((a + b) / T::of(2.0));
        }
        edges.push(self.panels.last().map(|p| p.1).unwrap_or_else(T::zero));
        Self::from_edges(&edges, self.order).expect("refining a valid rule")
    }

    /// Panels of the same width covering `[-2 cutoff, -cutoff]`, used to
    /// probe how much mass an integrand keeps beyond the truncation point.
    pub fn tail_extension(&self) -> Self {
        let n = self.panels.len().max(1);
        let a = -self.cutoff * T::of(2.0);
        let h = self.cutoff / T::of_usize(n);
        let edges: Vec<T> = (0..=n).map(|i| a + h * T::of_usize(i)).collect();
        Self::from_edges(&edges, self.order).expect("tail extension of a valid rule")
    }

    /// `Σ weights_i f(node_i)`, ascending node order.
    pub fn integrate<F: Fn(T) -> T>(&self, f: F) -> T {
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += *w * f(*x);
        }
        acc
    }

    /// Quadrature weights multiplied by `w(node)`.
    pub fn weighted_weights(&self, spec: &WeightSpec<T>) -> Vec<T> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| *w * spec.weight(*x))
            .collect()
    }
}

/// Options for [`QuadratureRule`] construction beyond the three basic knobs.
#[derive(Debug, Clone)]
pub struct QuadratureBuilder<T> {
    spec: WeightSpec<T>,
    node_count: usize,
    tail_tol: T,
    max_index: usize,
    min_decay: Option<T>,
    breakpoints: Vec<T>,
    order: usize,
}

impl<T: Real> QuadratureBuilder<T> {
    pub fn new(spec: WeightSpec<T>) -> Self {
        Self {
            spec,
            node_count: 4096,
            tail_tol: T::of(1e-12),
            max_index: 0,
            min_decay: None,
            breakpoints: Vec::new(),
            order: DEFAULT_PANEL_ORDER,
        }
    }

    pub fn node_count(mut self, n: usize) -> Self {
        self.node_count = n;
        self
    }

    pub fn tail_tol(mut self, tol: T) -> Self {
        self.tail_tol = tol;
        self
    }

    /// Extends the cutoff so that basis vectors up to this index have
    /// negligible squared mass beyond it (accounts for polynomial growth).
    pub fn max_index(mut self, n: usize) -> Self {
        self.max_index = n;
        self
    }

    /// Also cover an integrand decaying like `exp(rate ξ)`.
    pub fn min_decay(mut self, rate: T) -> Self {
        self.min_decay = Some(rate);
        self
    }

    /// Forces a panel boundary at `xi` (ignored outside `(-cutoff, 0)`).
    pub fn breakpoint(mut self, xi: T) -> Self {
        self.breakpoints.push(xi);
        self
    }

    pub fn breakpoints(mut self, xs: impl IntoIterator<Item = T>) -> Self {
        self.breakpoints.extend(xs);
        self
    }

    pub fn order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn cutoff(&self) -> Result<T> {
        if !(self.tail_tol > T::zero()) || !(self.tail_tol < T::one()) {
            return domain(format!("tail_tol must lie in (0, 1), got {}", self.tail_tol));
        }
        let mut rate = self.spec.basis_decay_rate();
        if let Some(r) = self.min_decay {
            if !(r > T::zero()) {
                return domain(format!("integrand decay rate must be positive, got {r}"));
            }
            rate = rate.min(r);
        }
        if !(rate > T::zero()) {
            return domain("no finite cutoff achieves the tail tolerance (non-decaying integrand)");
        }
        let log_tol = self.tail_tol.ln();
        let mass_cutoff = -log_tol / rate;
        let poly_cutoff = if self.max_index > 1 {
            let degree = self.max_index - 1;
            let x = polynomial_tail_point(degree, log_tol.to_f64_lossy());
            T::of(x) / (T::of(2.0) * self.spec.p0())
        } else {
            T::zero()
        };
        Ok(mass_cutoff.max(poly_cutoff))
    }

    pub fn build(&self) -> Result<QuadratureRule<T>> {
        if self.node_count < MIN_NODE_COUNT {
            return domain(format!(
                "node_count must be at least {MIN_NODE_COUNT}, got {}",
                self.node_count
            ));
        }
        let cutoff = self.cutoff()?;
        let mut cuts: Vec<T> = self
            .breakpoints
            .iter()
            .copied()
            .filter(|x| x.is_finite() && *x > -cutoff && *x < T::zero())
            .collect();
        cuts.push(-cutoff);
        cuts.push(T::zero());
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        cuts.dedup();

        let segments = cuts.len() - 1;
        let total_panels = self.node_count.div_ceil(self.order).max(segments);
        let mut edges = Vec::with_capacity(total_panels + 1);
        for pair in cuts.windows(2) {
            let share = ((pair[1] - pair[0]) / cutoff * T::of_usize(total_panels))
                .ceil()
                .to_usize()
                .unwrap_or(1)
                .max(1);
            let h = (pair[1] - pair[0]) / T::of_usize(share);
            for i in 0..share {
                edges.push(pair[0] + h * T::of_usize(i));
            }
        }
        edges.push(T::zero());
        QuadratureRule::from_edges(&edges, self.order)
    }
}

/// Rule on `[-cutoff, 0]` with cutoff chosen so that `exp(rate ξ)` loses
/// relative mass `< tail_tol` below it, `rate` being the slowest decay among
/// products of two basis functions with the weight.
pub fn make_quadrature<T: Real>(
    spec: &WeightSpec<T>,
    node_count: usize,
    tail_tol: T,
) -> Result<QuadratureRule<T>> {
    QuadratureBuilder::new(*spec)
        .node_count(node_count)
        .tail_tol(tail_tol)
        .build()
}

/// `⟨f, g⟩_w ≈ Σ weights_i f(x_i) g(x_i) w(x_i)` in ascending node order.
pub fn inner_product_w<T: Real, F, G>(f: F, g: G, spec: &WeightSpec<T>, rule: &QuadratureRule<T>) -> T
where
    F: Fn(T) -> T,
    G: Fn(T) -> T,
{
    let mut acc = T::zero();
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let fg = f(*x) * g(*x);
        acc += (*w * spec.weight(*x)) * fg;
    }
    acc
}

/// Same as [`inner_product_w`] for functions already tabulated on the rule
/// nodes; `ww` are the weighted weights from [`QuadratureRule::weighted_weights`].
pub fn inner_product_values<T: Real>(f: &[T], g: &[T], ww: &[T]) -> T {
    debug_assert_eq!(f.len(), ww.len());
    debug_assert_eq!(g.len(), ww.len());
    let mut acc = T::zero();
    for i in 0..ww.len() {
        acc += ww[i] * (f[i] * g[i]);
    }
    acc
}

/// Smallest `x` with `C(2d, d) · Q(2d + 1, x) < exp(log_tol)`, where `Q` is the
/// regularised upper incomplete gamma function. Bounds the mass of
/// `P_d(x)^2 e^{-x}` beyond `x` for Laguerre degree `d`.
fn polynomial_tail_point(degree: usize, log_tol: f64) -> f64 {
    let m = 2 * degree + 1;
    let log_binom = ln_factorial(2 * degree) - 2.0 * ln_factorial(degree);
    let log_tail = |x: f64| -> f64 {
        // log(e^{-x} Σ_{i<m} x^i / i!)
        let mut terms = Vec::with_capacity(m);
        let lx = x.ln();
        for i in 0..m {
            terms.push(i as f64 * lx - ln_factorial(i));
        }
        let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = terms.iter().map(|t| (t - mx).exp()).sum();
        -x + mx + s.ln()
    };
    let mut lo = 0.0f64;
    let mut hi = (m as f64).max(1.0);
    while log_binom + log_tail(hi) >= log_tol {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if log_binom + log_tail(mid) >= log_tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending, by Newton
/// iteration on the Legendre three-term recurrence.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: f64, lambda: f64) -> WeightSpec<f64> {
        WeightSpec::new(p, lambda).unwrap()
    }

    #[test]
    fn make_weight_examples() {
        let s = spec(0.0, 1.0);
        assert_eq!(s.p0(), 1.0);
        assert_eq!(s.lambda_star(), 0.0);
        assert_eq!(spec(1.0, 2.0).p0(), 1.0);
        assert!(matches!(WeightSpec::new(0.0, 0.0), Err(crate::Error::Domain(_))));
        assert!(WeightSpec::new(1.0, 1.0).is_err());
        // p < 0: the binding constraint is p/2 < lambda
        assert!(WeightSpec::new(-1.0, -0.5).is_err());
        assert!(WeightSpec::new(-1.0, -0.4).is_ok());
        assert_eq!(spec(0.7, 3.0).weight(0.0), 1.0);
    }

    #[test]
    fn gauss_legendre_is_exact_for_degree_2n_minus_1() {
        for order in [1usize, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(order);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            for deg in 0..(2 * order) {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "order {order} deg {deg}");
            }
        }
    }

    #[test]
    fn cutoff_matches_closed_form_tail() {
        let rule = make_quadrature(&spec(0.0, 1.0), 2000, 1e-12).unwrap();
        let expected = -(1e-12f64).ln() / 2.0;
        assert!((rule.cutoff() - expected).abs() < 1e-12);
        assert!((rule.cutoff() - 13.8).abs() < 0.05);
    }

    #[test]
    fn nodes_sorted_inside_domain() {
        let rule = QuadratureBuilder::new(spec(0.0, 1.0))
            .node_count(512)
            .breakpoint(-1.0)
            .breakpoint(-0.3)
            .build()
            .unwrap();
        let xs = rule.nodes();
        assert!(xs.windows(2).all(|p| p[0] < p[1]));
        assert!(xs[0] >= -rule.cutoff() && *xs.last().unwrap() <= 0.0);
        assert!(rule.panels().iter().any(|p| p.1 == -1.0));
        assert!(rule.panels().iter().any(|p| p.1 == -0.3));
    }

    #[test]
    fn constant_against_weight_reproduces_truncated_mass() {
        for (p, lambda) in [(1.0, 2.0), (2.0, 2.5), (0.5, 3.0)] {
            let s = spec(p, lambda);
            let rule = make_quadrature(&s, 2048, 1e-12).unwrap();
            let got = inner_product_w(|_| 1.0, |_| 1.0, &s, &rule);
            let xi = rule.cutoff();
            let exact = (1.0 - (-p * xi).exp()) / p;
            assert!(((got - exact) / exact).abs() < 1e-10, "p={p}: {got} vs {exact}");
        }
        // With a tolerance tight enough for the truncated mass to vanish.
        let s = spec(1.0, 2.0);
        let rule = QuadratureBuilder::new(s).tail_tol(1e-40).build().unwrap();
        assert!((inner_product_w(|_| 1.0, |_| 1.0, &s, &rule) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn linear_moment_closed_form() {
        // ∫ ξ e^{2ξ} dξ over R^- is -1/4.
        let s = spec(2.0, 3.0);
        let rule = QuadratureBuilder::new(s).tail_tol(1e-30).build().unwrap();
        let got = inner_product_w(|x| x, |_| 1.0, &s, &rule);
        assert!((got + 0.25).abs() < 1e-12, "{got}");
        let refined = inner_product_w(|x| x, |_| 1.0, &s, &rule.refined());
        assert!((got - refined).abs() < 1e-13);
    }

    #[test]
    fn polynomial_times_weight_exact_up_to_panel_order() {
        let s = spec(1.5, 2.0);
        let rule = QuadratureBuilder::new(s).node_count(1024).build().unwrap();
        let xi = rule.cutoff();
        for j in 0..=DEFAULT_PANEL_ORDER as i32 {
            let got = rule.integrate(|x| x.powi(j) * s.weight(x));
            // ∫_{-Ξ}^0 ξ^j e^{pξ} dξ by repeated integration by parts.
            let p = s.p();
            let mut exact = 0.0;
            let mut coef = 1.0;
            for i in 0..=j {
                // term: (-1)^i j!/(j-i)! ξ^{j-i} e^{pξ} / p^{i+1}
                let at = |x: f64| coef * x.powi(j - i) * (p * x).exp() / p.powi(i + 1);
                exact += if i % 2 == 0 { at(0.0) - at(-xi) } else { -(at(0.0) - at(-xi)) };
                coef *= (j - i) as f64;
            }
            let scale = exact.abs().max(1e-300);
            assert!(((got - exact) / scale).abs() < 1e-10, "j={j}: {got} vs {exact}");
        }
    }

    #[test]
    fn inner_product_symmetric_bit_exact() {
        let s = spec(-0.5, 0.5);
        let rule = make_quadrature(&s, 256, 1e-10).unwrap();
        let f = |x: f64| (3.0 * x).sin() + x * x;
        let g = |x: f64| (0.7 * x).exp() - 0.1;
        let a = inner_product_w(f, g, &s, &rule);
        let b = inner_product_w(g, f, &s, &rule);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = spec(0.0, 1.0);
        assert!(make_quadrature(&s, 8, 1e-12).is_err());
        assert!(make_quadrature(&s, 64, 0.0).is_err());
        assert!(make_quadrature(&s, 64, -1.0).is_err());
    }

    #[test]
    fn polynomial_tail_point_grows_with_degree() {
        let a = polynomial_tail_point(0, (1e-12f64).ln());
        assert!((a - 12.0 * 10f64.ln()).abs() < 1e-9);
        let b = polynomial_tail_point(11, (1e-12f64).ln());
        let c = polynomial_tail_point(63, (1e-12f64).ln());
        assert!(a < b && b < c);
    }

    #[test]
    fn works_in_single_precision() {
        let s = WeightSpec::<f32>::new(1.0, 2.0).unwrap();
        let rule = QuadratureBuilder::new(s).tail_tol(1e-7).node_count(256).build().unwrap();
        let got = inner_product_w(|_| 1.0f32, |_| 1.0f32, &s, &rule);
        let exact = 1.0 - (-rule.cutoff()).exp();
        assert!((got - exact).abs() < 1e-5);
    }
}
