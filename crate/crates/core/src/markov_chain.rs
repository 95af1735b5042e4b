//! The finite-dimensional Markov system `(Sⁿ, X¹..Xⁿ)` replacing the delay
//! equation, either from Laguerre truncation or from an exact
//! representation.

use std::fmt;
use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::dynamics::{Control, DynamicsSpec};
use crate::error::{domain, Error, Result};
use crate::kernels::{project_kernel, ProjectedKernel};
use crate::noise::{step_count, NoisePath};
use crate::scalar::Real;
use crate::sdde_oracle::{check_noise, euler_step, guard, project_initial_state, OraclePath, OracleSimulator, SddeModel, DEFAULT_BLOWUP_GUARD};
use crate::weighted_space::{QuadratureRule, WeightSpec};

/// Drift of the auxiliary block `dX = (q S + Q X) dt`.
#[derive(Clone, Debug, PartialEq)]
pub enum AuxDrift<T> {
    /// `q_k = √(2p₀)`, `Q` lower triangular with `−2p₀` below the diagonal
    /// and `−(p₀ + p/2)` on it.
    Laguerre,
    /// Arbitrary `(q, Q)`, `Q` row-major `n × n`.
    Explicit { q: Vec<T>, q_matrix: Vec<T> },
}

/// How the auxiliary block is advanced over one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxScheme {
    /// Explicit Euler, the same scheme the oracle uses for `S`.
    #[default]
    Euler,
    /// Exact propagator for `S` linear over the step.
    Exponential,
}

#[derive(Clone)]
pub struct MarkovSystem<T: Real> {
    pub n: usize,
    pub spec: WeightSpec<T>,
    /// `α⁰..αⁿ` with `α⁰ = 0`; likewise `beta`.
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    /// `γ⁰..γⁿ` with `γ⁰` the scalar weight on `S`.
    pub gamma: Vec<T>,
    pub dynamics: DynamicsSpec<T>,
    pub aux: AuxDrift<T>,
}

impl<T: Real> fmt::Debug for MarkovSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarkovSystem")
            .field("n", &self.n)
            .field("spec", &self.spec)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("gamma", &self.gamma)
            .field("aux", &self.aux)
            .finish_non_exhaustive()
    }
}

impl<T: Real> MarkovSystem<T> {
    pub fn gamma0(&self) -> T {
        self.gamma[0]
    }

    /// `(q, Q)` with `Q` row-major, whichever variant this is.
    pub fn drift_data(&self) -> (Vec<T>, Vec<T>) {
        match &self.aux {
            AuxDrift::Explicit { q, q_matrix } => (q.clone(), q_matrix.clone()),
            AuxDrift::Laguerre => {
                let n = self.n;
                let p0 = self.spec.p0();
                let two_p0 = T::of(2.0) * p0;
                let diag = -(p0 + self.spec.lambda_star());
                let mut m = vec![T::zero(); n * n];
                for k in 0..n {
                    for i in 0..k {
                        m[k * n + i] = -two_p0;
                    }
                    m[k * n + k] = diag;
                }
                (vec![two_p0.sqrt(); n], m)
            }
        }
    }

    /// Writes `q S + Q X` into `out`.
    pub fn aux_drift(&self, s: T, x: &[T], out: &mut [T]) {
        match &self.aux {
            AuxDrift::Laguerre => {
                let p0 = self.spec.p0();
                let two_p0 = T::of(2.0) * p0;
                let source = two_p0.sqrt() * s;
                let diag = p0 + self.spec.lambda_star();
                let mut lower = T::zero();
                for (o, xk) in out.iter_mut().zip(x) {
                    *o = source - two_p0 * lower - diag * *xk;
                    lower += *xk;
                }
            }
            AuxDrift::Explicit { q, q_matrix } => {
                let n = self.n;
                for k in 0..n {
                    let row = &q_matrix[k * n..(k + 1) * n];
                    let mut acc = q[k] * s;
                    for (a, xh) in row.iter().zip(x) {
                        acc += *a * *xh;
                    }
                    out[k] = acc;
                }
            }
        }
    }

    #[inline]
    fn dot_tail(c: &[T], x: &[T]) -> T {
        let mut acc = T::zero();
        for (a, b) in c[1..].iter().zip(x) {
            acc += *a * *b;
        }
        acc
    }

    /// `Σ_{k≥1} αᵏ Xᵏ`.
    pub fn y_alpha(&self, x: &[T]) -> T {
        Self::dot_tail(&self.alpha, x)
    }

    pub fn y_beta(&self, x: &[T]) -> T {
        Self::dot_tail(&self.beta, x)
    }

    /// `Zⁿ = γ⁰S + Σ_{k≥1} γᵏ Xᵏ`.
    pub fn output(&self, s: T, x: &[T]) -> T {
        self.gamma[0] * s + Self::dot_tail(&self.gamma, x)
    }

    /// Largest explicit-Euler step the spectral bound of the drift allows.
    pub fn stable_dt_bound(&self) -> T {
        let rate = self.spec.p0() * T::of_usize(2 * self.n + 1) + self.spec.p().abs() / T::of(2.0);
        T::of(0.5) / rate
    }
}

fn coefficient_slot<T: Real>(pk: &ProjectedKernel<T>, n: usize, spec: &WeightSpec<T>, name: &str) -> Result<Vec<T>> {
    if pk.spec != *spec {
        return Err(Error::SpecMismatch(format!(
            "{name} was projected with {:?}, system uses {:?}",
            pk.spec, spec
        )));
    }
    if pk.n < n {
        return Err(Error::SpecMismatch(format!(
            "{name} has {} coefficients, system order is {n}",
            pk.n
        )));
    }
    Ok(pk.coeffs[..=n].to_vec())
}

pub fn build_laguerre_system<T: Real>(
    n: usize,
    spec: &WeightSpec<T>,
    alpha: &ProjectedKernel<T>,
    beta: &ProjectedKernel<T>,
    gamma: &ProjectedKernel<T>,
    gamma0: T,
    dynamics: DynamicsSpec<T>,
) -> Result<MarkovSystem<T>> {
    let alpha = coefficient_slot(alpha, n, spec, "alpha")?;
    let beta = coefficient_slot(beta, n, spec, "beta")?;
    let mut gamma = coefficient_slot(gamma, n, spec, "gamma")?;
    gamma[0] = gamma0;
    Ok(MarkovSystem {
        n,
        spec: *spec,
        alpha,
        beta,
        gamma,
        dynamics,
        aux: AuxDrift::Laguerre,
    })
}

/// Truncated system for `model` together with its projected initial state.
pub fn laguerre_system_for<T: Real>(
    model: &SddeModel<T>,
    n: usize,
    rule: &QuadratureRule<T>,
) -> Result<(MarkovSystem<T>, Vec<T>)> {
    let spec = &model.spec;
    let project = |k| project_kernel(k, n, spec, rule);
    let sys = build_laguerre_system(
        n,
        spec,
        &project(&model.alpha)?,
        &project(&model.beta)?,
        &project(&model.gamma)?,
        model.gamma0,
        model.dynamics.clone(),
    )?;
    let x0 = project_initial_state(&model.init, n, spec, rule)?;
    Ok((sys, x0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainPath<T> {
    pub n: usize,
    pub times: Vec<T>,
    pub s: Vec<T>,
    /// `X¹..Xⁿ` at each step, row-major (`n` entries per step).
    pub x: Vec<T>,
    pub z: Vec<T>,
    pub y_alpha: Vec<T>,
    pub y_beta: Vec<T>,
    pub u: Vec<T>,
}

impl<T: Real> ChainPath<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn x_at(&self, step: usize) -> &[T] {
        &self.x[step * self.n..(step + 1) * self.n]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "t,S")?;
        for k in 1..=self.n {
            write!(out, ",X{k}")?;
        }
        writeln!(out, ",Z")?;
        for m in 0..self.len() {
            write!(out, "{:.16e},{:.16e}", self.times[m], self.s[m])?;
            for v in self.x_at(m) {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out, ",{:.16e}", self.z[m])?;
        }
        Ok(())
    }
}

/// One-step propagator of `dX = (qS + QX)dt` with `S` linear on the step:
/// `X' = Φ X + g₀ S + g₁ (S' − S)`.
#[derive(Clone, Debug)]
struct ExpPropagator<T> {
    phi: Vec<T>,
    g0: Vec<T>,
    g1: Vec<T>,
}

impl<T: Real> ExpPropagator<T> {
    fn new(sys: &MarkovSystem<T>, dt: T) -> Self {
        let n = sys.n;
        let (q, qm) = sys.drift_data();
        let h = dt.to_f64_lossy();
        // Augmented state (X, S(τ), dS/dτ): S' = slope, slope' = 0.
        let mut a = DMatrix::<f64>::zeros(n + 2, n + 2);
        for k in 0..n {
            for j in 0..n {
                a[(k, j)] = qm[k * n + j].to_f64_lossy() * h;
            }
            a[(k, n)] = q[k].to_f64_lossy() * h;
        }
        a[(n, n + 1)] = h;
        let e = a.exp();
        let mut phi = vec![T::zero(); n * n];
        let mut g0 = vec![T::zero(); n];
        let mut g1 = vec![T::zero(); n];
        for k in 0..n {
            for j in 0..n {
                phi[k * n + j] = T::of(e[(k, j)]);
            }
            g0[k] = T::of(e[(k, n)]);
            // the slope is (S' − S)/dt
            g1[k] = T::of(e[(k, n + 1)] / h);
        }
        Self { phi, g0, g1 }
    }

    fn apply(&self, x: &[T], s: T, s_next: T, out: &mut [T]) {
        let n = x.len();
        let ds = s_next - s;
        for k in 0..n {
            let mut acc = self.g0[k] * s + self.g1[k] * ds;
            for (a, xj) in self.phi[k * n..(k + 1) * n].iter().zip(x) {
                acc += *a * *xj;
            }
            out[k] = acc;
        }
    }
}

/// Precomputed chain integrator for one system, step size and horizon.
#[derive(Clone, Debug)]
pub struct ChainSimulator<T: Real> {
    sys: MarkovSystem<T>,
    dt: T,
    steps: usize,
    scheme: AuxScheme,
    propagator: Option<ExpPropagator<T>>,
    guard: T,
}

impl<T: Real> ChainSimulator<T> {
    pub fn new(sys: MarkovSystem<T>, dt: T, t_end: T, scheme: AuxScheme) -> Result<Self> {
        let steps = step_count(dt, t_end)?;
        if scheme == AuxScheme::Euler && sys.n > 0 && dt >= sys.stable_dt_bound() {
            log::warn!(
                "dt = {dt} exceeds the explicit stability bound {} for n = {}; consider the exponential scheme",
                sys.stable_dt_bound(),
                sys.n
            );
        }
        let propagator = (scheme == AuxScheme::Exponential && sys.n > 0).then(|| ExpPropagator::new(&sys, dt));
        Ok(Self {
            sys,
            dt,
            steps,
            scheme,
            propagator,
            guard: T::of(DEFAULT_BLOWUP_GUARD),
        })
    }

    pub fn with_guard(mut self, guard: T) -> Self {
        self.guard = guard;
        self
    }

    pub fn system(&self) -> &MarkovSystem<T> {
        &self.sys
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn scheme(&self) -> AuxScheme {
        self.scheme
    }

    pub fn run(&self, x0: &[T], noise: &NoisePath<T>, control: &Control<T>) -> Result<ChainPath<T>> {
        let sys = &self.sys;
        let n = sys.n;
        if x0.len() != n + 1 {
            return domain(format!("initial state has {} entries, expected {}", x0.len(), n + 1));
        }
        check_noise(noise, self.dt, self.steps)?;
        let len = self.steps + 1;
        let mut path = ChainPath {
            n,
            times: (0..len).map(|m| T::of_usize(m) * self.dt).collect(),
            s: Vec::with_capacity(len),
            x: Vec::with_capacity(len * n),
            z: Vec::with_capacity(len),
            y_alpha: Vec::with_capacity(len),
            y_beta: Vec::with_capacity(len),
            u: Vec::with_capacity(len),
        };
        let mut s = x0[0];
        let mut x = x0[1..].to_vec();
        let mut next = vec![T::zero(); n];
        for m in 0..len {
            let t = path.times[m];
            let ya = sys.y_alpha(&x);
            let yb = sys.y_beta(&x);
            let u = control.value(m, t, s, ya);
            path.s.push(s);
            path.x.extend_from_slice(&x);
            path.z.push(sys.output(s, &x));
            path.y_alpha.push(ya);
            path.y_beta.push(yb);
            path.u.push(u);
            if m + 1 == len {
                break;
            }
            let s_next = euler_step(&*sys.dynamics, s, ya, yb, u, self.dt, noise.increments[m]);
            guard(s_next, m + 1, t + self.dt, self.guard)?;
            match &self.propagator {
                Some(p) => p.apply(&x, s, s_next, &mut next),
                None => {
                    sys.aux_drift(s, &x, &mut next);
                    for (o, xk) in next.iter_mut().zip(&x) {
                        *o = *xk + *o * self.dt;
                    }
                }
            }
            std::mem::swap(&mut x, &mut next);
            s = s_next;
        }
        Ok(path)
    }
}

pub fn simulate_chain<T: Real>(
    sys: &MarkovSystem<T>,
    x0: &[T],
    control: &Control<T>,
    noise: &NoisePath<T>,
    t_end: T,
    scheme: AuxScheme,
) -> Result<ChainPath<T>> {
    ChainSimulator::new(sys.clone(), noise.dt, t_end, scheme)?.run(x0, noise, control)
}

/// Oracle and chain driven by the same Brownian increments.
pub fn coupled_run<T: Real>(
    oracle: &OracleSimulator<T>,
    chain: &ChainSimulator<T>,
    x0: &[T],
    noise: &NoisePath<T>,
    control: &Control<T>,
) -> Result<(OraclePath<T>, ChainPath<T>)> {
    if oracle.dt() != chain.dt() || oracle.steps() != chain.steps() {
        return Err(Error::SpecMismatch(format!(
            "oracle grid (dt {}, {} steps) differs from chain grid (dt {}, {} steps)",
            oracle.dt(),
            oracle.steps(),
            chain.dt(),
            chain.steps()
        )));
    }
    Ok((oracle.run(noise, control)?, chain.run(x0, noise, control)?))
}

/// `max_m |a_m − b_m|`.
pub fn sup_abs_diff<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).fold(T::zero(), T::max)
}
