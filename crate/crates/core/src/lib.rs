//! Monte Carlo simulation of the stochastic Cucker-Smale model with singular
//! communication weights. See the guide in `book/` for a walkthrough.

// `!(a > b)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod kernels;
pub mod noise;
pub mod paths;
pub mod rng;
mod serde_util;

pub use error::{FlockError, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/paths.md")]
    mod paths {}
    #[doc = include_str!("../../../book/src/integrator.md")]
    mod integrator {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
