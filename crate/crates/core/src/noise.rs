//! Reproducible Brownian increments.
//!
//! Each path draws from its own ChaCha stream selected by the path index, so
//! path `i` is the same no matter which worker generates it or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath<T> {
    pub dt: T,
    pub increments: Vec<T>,
    pub seed: u64,
    pub path_index: u64,
}

impl<T: Real> NoisePath<T> {
    /// `steps` increments with variance `dt`.
    pub fn generate(seed: u64, path_index: u64, dt: T, steps: usize) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return domain(format!("time step must be positive, got {dt}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        let sd = dt.to_f64_lossy().sqrt();
        let increments = (0..steps)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                T::of(z * sd)
            })
            .collect();
        Ok(Self {
            dt,
            increments,
            seed,
            path_index,
        })
    }

    pub fn from_increments(dt: T, increments: Vec<T>) -> Result<Self> {
        if !(dt > T::zero()) {
            return domain(format!("time step must be positive, got {dt}"));
        }
        Ok(Self {
            dt,
            increments,
            seed: 0,
            path_index: 0,
        })
    }

    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn horizon(&self) -> T {
        self.dt * T::of_usize(self.steps())
    }

    /// The same Brownian path on a grid twice as coarse (pairwise sums).
    pub fn coarsen(&self) -> Result<Self> {
        if !self.steps().is_multiple_of(2) {
            return domain("cannot coarsen a path with an odd number of steps");
        }
        Ok(Self {
            dt: self.dt * T::of(2.0),
            increments: self.increments.chunks_exact(2).map(|c| c[0] + c[1]).collect(),
            seed: self.seed,
            path_index: self.path_index,
        })
    }
}

/// Number of steps of size `dt` covering `[0, t_end]`; `dt` must divide
/// `t_end` to within `1e-12` relative.
pub fn step_count<T: Real>(dt: T, t_end: T) -> Result<usize> {
    if !(dt > T::zero()) || !(t_end >= T::zero()) {
        return domain(format!("need dt > 0 and T >= 0, got dt = {dt}, T = {t_end}"));
    }
    let ratio = (t_end / dt).to_f64_lossy();
    let steps = ratio.round();
    let tol = if T::epsilon().to_f64_lossy() > 1e-10 { 1e-5 } else { 1e-12 };
    if (ratio - steps).abs() > tol * ratio.max(1.0) {
        return domain(format!("dt = {dt} does not divide T = {t_end}"));
    }
    Ok(steps as usize)
}
