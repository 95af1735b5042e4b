// `!(x > 0.0)` is used throughout on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod analysis;
pub mod applications;
pub mod dynamics;
pub mod error;
pub mod exact_repr;
pub mod exppoly;
pub mod kernels;
pub mod laguerre_basis;
pub mod markov_chain;
pub mod noise;
#[cfg(test)]
mod properties;
pub mod scalar;
pub mod sdde_oracle;
pub mod weighted_space;

pub use error::{Error, Result};
pub use scalar::Real;
// Complex coefficients appear in the public exponential-polynomial API.
pub use num_complex;

pub type WeightSpec64 = weighted_space::WeightSpec<f64>;
pub type WeightSpec32 = weighted_space::WeightSpec<f32>;
pub type Kernel64 = kernels::Kernel<f64>;
pub type Kernel32 = kernels::Kernel<f32>;
pub type SddeModel64 = sdde_oracle::SddeModel<f64>;
pub type SddeModel32 = sdde_oracle::SddeModel<f32>;
pub type MarkovSystem64 = markov_chain::MarkovSystem<f64>;
pub type MarkovSystem32 = markov_chain::MarkovSystem<f32>;
