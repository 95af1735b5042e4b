//! Coefficients `b(x, y, u)` and `σ(x, y, u)` of the delay equation, plus
//! the control input shared by the oracle and the chain.

use std::fmt;
use std::sync::Arc;

use crate::scalar::Real;

/// Drift and diffusion. Lipschitz continuity and linear growth are the
/// caller's responsibility; nothing here checks them.
pub trait Dynamics<T>: Send + Sync {
    fn drift(&self, x: T, y: T, u: T) -> T;
    fn diffusion(&self, x: T, y: T, u: T) -> T;
}

pub type DynamicsSpec<T> = Arc<dyn Dynamics<T>>;

/// `b = a₀ + aₓx + a_y y + a_u u`, and likewise for `σ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearDynamics<T> {
    pub drift: [T; 4],
    pub diffusion: [T; 4],
}

impl<T: Real> LinearDynamics<T> {
    /// Geometric Brownian motion, `dS = μS dt + σS dW`, ignoring the delay terms.
    pub fn gbm(mu: T, sigma: T) -> Self {
        let z = T::zero();
        Self {
            drift: [z, mu, z, z],
            diffusion: [z, sigma, z, z],
        }
    }

    /// `dS = (κ(y − S) + u) dt + σ dW`: reverts towards the delayed average.
    pub fn mean_revert_delay(kappa: T, sigma: T) -> Self {
        let z = T::zero();
        Self {
            drift: [z, -kappa, kappa, T::one()],
            diffusion: [sigma, z, z, z],
        }
    }

    pub fn into_spec(self) -> DynamicsSpec<T> {
        Arc::new(self)
    }
}

#[inline]
fn affine<T: Real>(c: &[T; 4], x: T, y: T, u: T) -> T {
    c[0] + c[1] * x + c[2] * y + c[3] * u
}

impl<T: Real> Dynamics<T> for LinearDynamics<T> {
    fn drift(&self, x: T, y: T, u: T) -> T {
        affine(&self.drift, x, y, u)
    }

    fn diffusion(&self, x: T, y: T, u: T) -> T {
        affine(&self.diffusion, x, y, u)
    }
}

/// Closure-backed dynamics.
pub struct FnDynamics<B, S> {
    pub drift: B,
    pub diffusion: S,
}

impl<T, B, S> Dynamics<T> for FnDynamics<B, S>
where
    B: Fn(T, T, T) -> T + Send + Sync,
    S: Fn(T, T, T) -> T + Send + Sync,
{
    fn drift(&self, x: T, y: T, u: T) -> T {
        (self.drift)(x, y, u)
    }

    fn diffusion(&self, x: T, y: T, u: T) -> T {
        (self.diffusion)(x, y, u)
    }
}

pub fn fn_dynamics<T, B, S>(drift: B, diffusion: S) -> DynamicsSpec<T>
where
    T: 'static,
    B: Fn(T, T, T) -> T + Send + Sync + 'static,
    S: Fn(T, T, T) -> T + Send + Sync + 'static,
{
    Arc::new(FnDynamics { drift, diffusion })
}

pub type FeedbackFn<T> = Arc<dyn Fn(T, T, T) -> T + Send + Sync>;

/// Control input: absent, a precomputed path indexed by step, or feedback
/// `u(t, S_t, y_α(t))`.
#[derive(Clone, Default)]
pub enum Control<T> {
    #[default]
    Zero,
    OpenLoop(Arc<[T]>),
    Feedback(FeedbackFn<T>),
}

impl<T: Real> Control<T> {
    pub fn feedback(f: impl Fn(T, T, T) -> T + Send + Sync + 'static) -> Self {
        Control::Feedback(Arc::new(f))
    }

    #[inline]
    pub fn value(&self, step: usize, t: T, s: T, y_alpha: T) -> T {
        match self {
            Control::Zero => T::zero(),
            Control::OpenLoop(path) => path.get(step).copied().unwrap_or(T::zero()),
            Control::Feedback(f) => f(t, s, y_alpha),
        }
    }
}

impl<T> fmt::Debug for Control<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Control::Zero => f.write_str("Control::Zero"),
            Control::OpenLoop(p) => write!(f, "Control::OpenLoop({} steps)", p.len()),
            Control::Feedback(_) => f.write_str("Control::Feedback(..)"),
        }
    }
}
