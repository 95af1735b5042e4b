//! Reference solution of the delay equation by direct Euler–Maruyama.
//!
//! Every convolution `y(t) = ∫ k(ξ) S_{t+ξ} w(ξ) dξ` is a trapezoid sum over
//! the simulated path plus the initial history on the same `dt` grid. Lag
//! weights are split at kernel jumps, so a window edge need not fall on the
//! grid. The part of each sum that only sees the history is deterministic
//! and precomputed once per simulator.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use crate::dynamics::{Control, DynamicsSpec};
use crate::error::{domain, Error, Result};
use crate::kernels::{interpolate, Kernel, KernelRole};
use crate::laguerre_basis::basis_all;
use crate::noise::{step_count, NoisePath};
use crate::scalar::Real;
use crate::weighted_space::{QuadratureBuilder, QuadratureRule, WeightSpec, DEFAULT_PANEL_ORDER};

pub use crate::dynamics::{fn_dynamics, Dynamics, FnDynamics, LinearDynamics};

pub const DEFAULT_BLOWUP_GUARD: f64 = 1e12;

/// Relative size of the neglected kernel tail when choosing lag horizons.
const LAG_TAIL_TOL: f64 = 1e-12;

/// Path of `S` before time 0 (the value at 0 itself is `s0`).
#[derive(Clone)]
pub enum History<T: Real> {
    Zero,
    /// `value` on `[-span, 0)`, zero below; the whole half-line when `span` is `None`.
    Constant { value: T, span: Option<T> },
    /// Linear interpolation through `(xs, values)`, zero outside the grid.
    Grid { xs: Vec<T>, values: Vec<T> },
    Function(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: Real> History<T> {
    pub fn constant(value: T) -> Self {
        History::Constant { value, span: None }
    }

    pub fn function(f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        History::Function(Arc::new(f))
    }

    pub fn grid(xs: Vec<T>, values: Vec<T>) -> Result<Self> {
        // Reuse the tabulated-kernel validation.
        Kernel::tabulated(xs.clone(), values.clone(), KernelRole::Alpha)?;
        Ok(History::Grid { xs, values })
    }

    /// `s1(r)` for `r < 0`.
    pub fn eval(&self, r: T) -> T {
        match self {
            History::Zero => T::zero(),
            History::Constant { value, span } => match span {
                Some(s) if r < -*s => T::zero(),
                _ => *value,
            },
            History::Grid { xs, values } => interpolate(xs, values, r),
            History::Function(f) => f(r),
        }
    }

    fn breakpoints(&self) -> Vec<T> {
        match self {
            History::Constant { span: Some(s), .. } => vec![-*s],
            History::Grid { xs, .. } => vec![xs[0]],
            _ => Vec::new(),
        }
    }
}

impl<T: Real> fmt::Debug for History<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            History::Zero => f.write_str("Zero"),
            History::Constant { value, span } => write!(f, "Constant({value}, span {span:?})"),
            History::Grid { xs, .. } => write!(f, "Grid({} points)", xs.len()),
            History::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct InitialDatum<T: Real> {
    pub s0: T,
    pub history: History<T>,
}

impl<T: Real> InitialDatum<T> {
    pub fn new(s0: T, history: History<T>) -> Self {
        Self { s0, history }
    }

    /// `S ≡ s0`, including the whole past.
    pub fn flat(s0: T) -> Self {
        Self::new(s0, History::constant(s0))
    }

    /// `‖s1‖²_w` on the rule's domain.
    pub fn history_norm_sq_w(&self, spec: &WeightSpec<T>, rule: &QuadratureRule<T>) -> T {
        rule.integrate(|x| {
            let v = self.history.eval(x);
            spec.weight(x) * v * v
        })
    }

    pub fn breakpoints(&self) -> Vec<T> {
        self.history.breakpoints()
    }
}

/// `(s0, ⟨L₀, s1⟩_w, …, ⟨L_{n-1}, s1⟩_w)`.
pub fn project_initial_state<T: Real>(
    init: &InitialDatum<T>,
    n: usize,
    spec: &WeightSpec<T>,
    rule: &QuadratureRule<T>,
) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); n + 1];
    out[0] = init.s0;
    if n == 0 || matches!(init.history, History::Zero) {
        return Ok(out);
    }
    let ww = rule.weighted_weights(spec);
    let mut basis = vec![T::zero(); n];
    for (x, w) in rule.nodes().iter().zip(&ww) {
        let v = init.history.eval(*x);
        if v == T::zero() {
            continue;
        }
        if !v.is_finite() {
            return domain(format!("initial history is not finite at xi = {x}"));
        }
        basis_all(spec, *x, &mut basis);
        let wv = *w * v;
        for (o, l) in out[1..].iter_mut().zip(&basis) {
            *o += wv * *l;
        }
    }
    Ok(out)
}

/// Everything that defines the delay equation: weight, coefficients,
/// kernels, output functional and initial datum.
#[derive(Clone)]
pub struct SddeModel<T: Real> {
    pub spec: WeightSpec<T>,
    pub dynamics: DynamicsSpec<T>,
    pub alpha: Kernel<T>,
    pub beta: Kernel<T>,
    pub gamma: Kernel<T>,
    pub gamma0: T,
    pub init: InitialDatum<T>,
    /// Quadrature overrides: node count (`None` picks one from the cutoff)
    /// and tail tolerance.
    pub quad_nodes: Option<usize>,
    pub quad_tail_tol: T,
}

/// Default relative tail mass dropped by [`SddeModel::quadrature`].
pub const DEFAULT_TAIL_TOL: f64 = 1e-13;

impl<T: Real> SddeModel<T> {
    /// Model with all kernels zero, `γ₀ = 0` and a flat initial datum.
    pub fn new(spec: WeightSpec<T>, dynamics: DynamicsSpec<T>, s0: T) -> Self {
        Self {
            spec,
            dynamics,
            alpha: Kernel::zero(KernelRole::Alpha),
            beta: Kernel::zero(KernelRole::Beta),
            gamma: Kernel::zero(KernelRole::Gamma),
            gamma0: T::zero(),
            init: InitialDatum::flat(s0),
            quad_nodes: None,
            quad_tail_tol: T::of(DEFAULT_TAIL_TOL),
        }
    }

    pub fn with_quadrature(mut self, nodes: Option<usize>, tail_tol: T) -> Self {
        self.quad_nodes = nodes;
        self.quad_tail_tol = tail_tol;
        self
    }

    pub fn with_alpha(mut self, k: Kernel<T>) -> Self {
        self.alpha = Kernel { role: KernelRole::Alpha, ..k };
        self
    }

    pub fn with_beta(mut self, k: Kernel<T>) -> Self {
        self.beta = Kernel { role: KernelRole::Beta, ..k };
        self
    }

    pub fn with_gamma(mut self, gamma0: T, k: Kernel<T>) -> Self {
        self.gamma0 = gamma0;
        self.gamma = Kernel { role: KernelRole::Gamma, ..k };
        self
    }

    pub fn with_init(mut self, init: InitialDatum<T>) -> Self {
        self.init = init;
        self
    }

    pub fn kernels(&self) -> [&Kernel<T>; 3] {
        [&self.alpha, &self.beta, &self.gamma]
    }

    /// Quadrature adequate for projecting the kernels and the history onto
    /// `e¹..eⁿ`.
    pub fn quadrature(&self, n: usize) -> Result<QuadratureRule<T>> {
        let spec = &self.spec;
        // The history need not be square integrable; `L_j · w` alone decays at p₀ + p/2.
        let mut b = QuadratureBuilder::new(*spec)
            .tail_tol(self.quad_tail_tol)
            .max_index(n + 1)
            .min_decay(spec.p0() + spec.lambda_star())
            .breakpoints(self.init.breakpoints());
        for k in self.kernels() {
            b = b.breakpoints(k.breakpoints());
            if let Some(r) = k.quadrature_decay(spec) {
                b = b.min_decay(r);
            }
        }
        // About two panels per unit of 2p₀ξ resolves the oscillations of L_n.
        if let Some(nodes) = self.quad_nodes {
            return b.node_count(nodes).build();
        }
        let cutoff = b.cutoff()?;
        let panels = (T::of(4.0) * spec.p0() * cutoff).ceil().to_usize().unwrap_or(0).max(256);
        b.node_count(panels * DEFAULT_PANEL_ORDER).build()
    }

    pub fn oracle(&self, dt: T, t_end: T) -> Result<OracleSimulator<T>> {
        OracleSimulator::new(self, dt, t_end)
    }
}

impl<T: Real> fmt::Debug for SddeModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SddeModel")
            .field("spec", &self.spec)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("gamma", &self.gamma)
            .field("gamma0", &self.gamma0)
            .field("init", &self.init)
            .finish_non_exhaustive()
    }
}

/// Trapezoid weights `a_j` with `∫ k(ξ) S(t+ξ) w(ξ) dξ ≈ Σ_j a_j S(t − j dt)`,
/// `S` linear between grid points. Integration panels break at kernel jumps.
///
/// Each weight is kept as two parts: from the grid cell on the older side of
/// lag `j` and from the one on the newer side. At `t = 0` the two sides see
/// different values (`s1(0⁻)` and `s0`), so the initial jump is not smeared.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LagWeights<T> {
    pub total: Vec<T>,
    pub via_older: Vec<T>,
    pub via_newer: Vec<T>,
}

pub(crate) fn lag_weights<T: Real>(kernel: &Kernel<T>, spec: &WeightSpec<T>, dt: T) -> LagWeights<T> {
    let horizon = kernel.lag_horizon(spec, T::of(LAG_TAIL_TOL));
    let cells = (horizon / dt).ceil().to_usize().unwrap_or(0).max(1);
    let jumps = kernel.breakpoints();
    let half = T::of(0.5);
    let f = |xi: T, from_above: bool| kernel.eval_limit(xi, from_above) * spec.weight(xi);

    let mut older = vec![T::zero(); cells + 1];
    let mut newer = vec![T::zero(); cells + 1];
    for c in 0..cells {
        let right = -(T::of_usize(c) * dt);
        let left = -(T::of_usize(c + 1) * dt);
        let mut cuts = vec![left];
        cuts.extend(jumps.iter().copied().filter(|b| *b > left && *b < right));
        cuts.push(right);
        for piece in cuts.windows(2) {
            let (l, r) = (piece[0], piece[1]);
            let h = (r - l) * half;
            // Weight of S(ξ) on lag c is (ξ − left)/dt, on lag c+1 the rest.
            for (xi, val) in [(l, f(l, true)), (r, f(r, false))] {
                let contrib = h * val;
                let theta = (xi - left) / dt;
                older[c] += contrib * theta;
                newer[c + 1] += contrib * (T::one() - theta);
            }
        }
    }
    let mut total: Vec<T> = older.iter().zip(&newer).map(|(a, b)| *a + *b).collect();
    while total.len() > 1 && *total.last().unwrap() == T::zero() {
        total.pop();
    }
    older.truncate(total.len());
    newer.truncate(total.len());
    LagWeights {
        total,
        via_older: older,
        via_newer: newer,
    }
}

#[derive(Clone, Debug)]
struct Convolution<T> {
    weights: LagWeights<T>,
    /// Deterministic part `H_m`: every lag that reaches back before time 0.
    history: Vec<T>,
}

impl<T: Real> Convolution<T> {
    fn new(kernel: &Kernel<T>, spec: &WeightSpec<T>, init: &InitialDatum<T>, dt: T, steps: usize) -> Option<Self> {
        if kernel.is_zero() {
            return None;
        }
        let weights = lag_weights(kernel, spec, dt);
        let a = &weights.total;
        let mut history = vec![T::zero(); steps + 1];
        if !matches!(init.history, History::Zero) {
            let past: Vec<T> = (0..a.len()).map(|i| init.history.eval(-(T::of_usize(i) * dt))).collect();
            for (m, h) in history.iter_mut().enumerate() {
                let mut acc = T::zero();
                if m < a.len() {
                    acc += weights.via_older[m] * past[0];
                }
                for j in (m + 1)..a.len() {
                    acc += a[j] * past[j - m];
                }
                *h = acc;
            }
        }
        Some(Self { weights, history })
    }

    /// Value at step `m` given `S_0..S_m`.
    #[inline]
    fn at(&self, m: usize, s: &[T]) -> T {
        let a = &self.weights.total;
        let mut acc = self.history[m];
        for j in 0..m.min(a.len()) {
            acc += a[j] * s[m - j];
        }
        if m < a.len() {
            acc += self.weights.via_newer[m] * s[0];
        }
        acc
    }
}

/// Precomputed oracle for one model, step size and horizon.
#[derive(Clone)]
pub struct OracleSimulator<T: Real> {
    dynamics: DynamicsSpec<T>,
    gamma0: T,
    s0: T,
    dt: T,
    steps: usize,
    alpha: Option<Convolution<T>>,
    beta: Option<Convolution<T>>,
    gamma: Option<Convolution<T>>,
    guard: T,
}

impl<T: Real> OracleSimulator<T> {
    pub fn new(model: &SddeModel<T>, dt: T, t_end: T) -> Result<Self> {
        let steps = step_count(dt, t_end)?;
        let conv = |k: &Kernel<T>| Convolution::new(k, &model.spec, &model.init, dt, steps);
        Ok(Self {
            dynamics: model.dynamics.clone(),
            gamma0: model.gamma0,
            s0: model.init.s0,
            dt,
            steps,
            alpha: conv(&model.alpha),
            beta: conv(&model.beta),
            gamma: conv(&model.gamma),
            guard: T::of(DEFAULT_BLOWUP_GUARD),
        })
    }

    pub fn with_guard(mut self, guard: T) -> Self {
        self.guard = guard;
        self
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn run(&self, noise: &NoisePath<T>, control: &Control<T>) -> Result<OraclePath<T>> {
        check_noise(noise, self.dt, self.steps)?;
        let n = self.steps + 1;
        let mut path = OraclePath {
            times: (0..n).map(|m| T::of_usize(m) * self.dt).collect(),
            s: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
            y_alpha: Vec::with_capacity(n),
            y_beta: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
        };
        let conv = |c: &Option<Convolution<T>>, m: usize, s: &[T]| c.as_ref().map_or(T::zero(), |c| c.at(m, s));
        path.s.push(self.s0);
        for m in 0..n {
            let s = path.s[m];
            let ya = conv(&self.alpha, m, &path.s);
            let yb = conv(&self.beta, m, &path.s);
            let yg = conv(&self.gamma, m, &path.s);
            let t = path.times[m];
            let u = control.value(m, t, s, ya);
            path.y_alpha.push(ya);
            path.y_beta.push(yb);
            path.z.push(self.gamma0 * s + yg);
            path.u.push(u);
            if m + 1 < n {
                let dw = noise.increments[m];
                let next = euler_step(&*self.dynamics, s, ya, yb, u, self.dt, dw);
                guard(next, m + 1, t + self.dt, self.guard)?;
                path.s.push(next);
            }
        }
        Ok(path)
    }
}

/// One Euler–Maruyama step of the `S` equation; shared with the chain so
/// that identical inputs give identical outputs.
#[inline]
pub(crate) fn euler_step<T: Real>(dynamics: &dyn Dynamics<T>, s: T, ya: T, yb: T, u: T, dt: T, dw: T) -> T {
    s + dynamics.drift(s, ya, u) * dt + dynamics.diffusion(s, yb, u) * dw
}

pub(crate) fn guard<T: Real>(value: T, step: usize, time: T, limit: T) -> Result<()> {
    if value.abs() > limit || !value.is_finite() {
        return Err(Error::NumericalBlowup {
            step,
            time: time.to_f64_lossy(),
            value: value.to_f64_lossy(),
            guard: limit.to_f64_lossy(),
        });
    }
    Ok(())
}

pub(crate) fn check_noise<T: Real>(noise: &NoisePath<T>, dt: T, steps: usize) -> Result<()> {
    if (noise.dt - dt).abs() > T::of(1e-12) * dt.max(T::one()) {
        return Err(Error::SpecMismatch(format!(
            "noise step {} differs from simulation step {}",
            noise.dt, dt
        )));
    }
    if noise.steps() < steps {
        return Err(Error::SpecMismatch(format!(
            "noise has {} increments but {} steps are needed",
            noise.steps(),
            steps
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OraclePath<T> {
    pub times: Vec<T>,
    pub s: Vec<T>,
    pub z: Vec<T>,
    pub y_alpha: Vec<T>,
    pub y_beta: Vec<T>,
    /// Control applied on `[t_m, t_{m+1})`.
    pub u: Vec<T>,
}

impl<T: Real> OraclePath<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,S,Z,y_alpha,y_beta")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i], self.s[i], self.z[i], self.y_alpha[i], self.y_beta[i]
            )?;
        }
        Ok(())
    }
}

/// Convenience wrapper: build the simulator and run one path.
pub fn simulate_sdde<T: Real>(
    model: &SddeModel<T>,
    control: &Control<T>,
    noise: &NoisePath<T>,
    t_end: T,
) -> Result<OraclePath<T>> {
    OracleSimulator::new(model, noise.dt, t_end)?.run(noise, control)
}

/// Trapezoid moving average `(1/δ)∫_{t−δ}^t S_r dr` along an oracle path,
/// reading the initial history for `t < δ`.
pub fn moving_average_path<T: Real>(path: &OraclePath<T>, delta: T, init: &InitialDatum<T>) -> Result<Vec<T>> {
    if path.len() < 2 {
        return domain("moving average needs at least two grid points");
    }
    let dt = path.times[1] - path.times[0];
    if delta < dt * (T::one() - T::of(1e-12)) {
        return domain(format!("window {delta} shorter than the time step {dt}"));
    }
    let flat = WeightSpec::new(T::zero(), T::one())?;
    let window = Kernel::uniform_window(delta, KernelRole::Gamma)?;
    let steps = path.len() - 1;
    let conv = Convolution::new(&window, &flat, init, dt, steps).expect("window is nonzero");
    Ok((0..path.len()).map(|m| conv.at(m, &path.s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exppoly::ExpPolyFunction;

    fn flat_spec() -> WeightSpec<f64> {
        WeightSpec::new(0.0, 1.0).unwrap()
    }

    fn zero_dyn() -> DynamicsSpec<f64> {
        LinearDynamics::gbm(0.0, 0.0).into_spec()
    }

    #[test]
    fn lag_weights_integrate_window_exactly() {
        let spec = flat_spec();
        for (delta, dt) in [(1.0, 0.01), (0.25, 1.0 / 320.0), (0.3, 0.07)] {
            let k = Kernel::uniform_window(delta, KernelRole::Gamma).unwrap();
            let a = lag_weights(&k, &spec, dt).total;
            let total: f64 = a.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "{delta} {dt}: {total}");
            // linear ramp S(t+ξ) = ξ: average −δ/2
            let ramp: f64 = a.iter().enumerate().map(|(j, w)| -w * j as f64 * dt).sum();
            assert!((ramp + delta / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_path_with_window() {
        let k = Kernel::uniform_window(0.5, KernelRole::Gamma).unwrap();
        let c = 2.5;
        let model = SddeModel::new(flat_spec(), zero_dyn(), c)
            .with_gamma(0.3, k)
            .with_init(InitialDatum::new(c, History::Zero));
        let noise = NoisePath::generate(1, 0, 0.01, 100).unwrap();
        let path = simulate_sdde(&model, &Control::Zero, &noise, 1.0).unwrap();
        for (t, (s, z)) in path.times.iter().zip(path.s.iter().zip(&path.z)) {
            assert_eq!(*s, c);
            // Z = γ₀c + c ∫_{-min(t,δ)}^0 (1/δ) dξ
            let want = 0.3 * c + c * t.min(0.5) / 0.5;
            assert!((z - want).abs() < 1e-12, "t={t}: {z} vs {want}");
        }
    }

    #[test]
    fn driftless_unit_diffusion_is_brownian() {
        let dynamics = fn_dynamics(|_, _, _| 0.0, |_, _, _| 1.0);
        let model = SddeModel::new(flat_spec(), dynamics, 1.5).with_gamma(1.0, Kernel::zero(KernelRole::Gamma));
        let noise = NoisePath::generate(3, 0, 1.0 / 64.0, 64).unwrap();
        let path = simulate_sdde(&model, &Control::Zero, &noise, 1.0).unwrap();
        let mut w = 1.5;
        for m in 0..=64 {
            assert_eq!(path.s[m], w);
            assert_eq!(path.z[m], path.s[m]);
            if m < 64 {
                w += noise.increments[m];
            }
        }
    }

    #[test]
    fn exponential_kernel_with_history() {
        // S ≡ c for all time: y = c ∫ e^{λξ} dξ = c/λ.
        let spec = flat_spec();
        let k = Kernel::exp_poly(ExpPolyFunction::exponential(2.0, 1.0), &spec, KernelRole::Gamma).unwrap();
        let model = SddeModel::new(spec, zero_dyn(), 3.0).with_gamma(0.0, k);
        let noise = NoisePath::generate(1, 0, 1.0 / 128.0, 128).unwrap();
        let path = simulate_sdde(&model, &Control::Zero, &noise, 1.0).unwrap();
        for z in &path.z {
            assert!((z - 1.5).abs() < 1e-4, "{z}");
        }
    }

    #[test]
    fn moving_average_of_ramp_and_constant() {
        let dt = 0.01;
        let n = 200;
        let path = OraclePath {
            times: (0..=n).map(|m| m as f64 * dt).collect(),
            s: (0..=n).map(|m| m as f64 * dt).collect(),
            z: vec![0.0; n + 1],
            y_alpha: vec![0.0; n + 1],
            y_beta: vec![0.0; n + 1],
            u: vec![0.0; n + 1],
        };
        let init = InitialDatum::new(0.0, History::Zero);
        let ma = moving_average_path(&path, 0.5, &init).unwrap();
        for m in 50..=n {
            assert!((ma[m] - (path.times[m] - 0.25)).abs() < 1e-12);
        }
        let flat = OraclePath { s: vec![4.0; n + 1], ..path };
        let ma = moving_average_path(&flat, 0.5, &InitialDatum::flat(4.0)).unwrap();
        assert!(ma.iter().all(|v| (v - 4.0).abs() < 1e-12));
    }

    #[test]
    fn blowup_is_reported() {
        let model = SddeModel::new(flat_spec(), LinearDynamics::gbm(50.0, 0.0).into_spec(), 1.0);
        let noise = NoisePath::generate(1, 0, 0.1, 100).unwrap();
        let sim = model.oracle(0.1, 10.0).unwrap().with_guard(1e6);
        match sim.run(&noise, &Control::Zero) {
            Err(Error::NumericalBlowup { step, .. }) => assert!(step > 1),
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    #[test]
    fn noise_grid_mismatch_is_rejected() {
        let model = SddeModel::new(flat_spec(), zero_dyn(), 1.0);
        let noise = NoisePath::generate(1, 0, 0.02, 50).unwrap();
        let sim = model.oracle(0.01, 1.0).unwrap();
        assert!(matches!(sim.run(&noise, &Control::Zero), Err(Error::SpecMismatch(_))));
    }

    #[test]
    fn initial_projection_of_basis_vector() {
        let spec = WeightSpec::new(0.0, 1.5).unwrap();
        let s = spec;
        let init = InitialDatum::new(
            2.0,
            History::function(move |x| crate::laguerre_basis::basis_eval(1, &s, x).unwrap()),
        );
        let model = SddeModel::new(spec, zero_dyn(), 2.0).with_init(init.clone());
        let rule = model.quadrature(6).unwrap();
        let x = project_initial_state(&init, 6, &spec, &rule).unwrap();
        assert_eq!(x[0], 2.0);
        assert!((x[1] - 1.0).abs() < 1e-12);
        assert!(x[2..].iter().all(|v| v.abs() < 1e-12));
    }
}
