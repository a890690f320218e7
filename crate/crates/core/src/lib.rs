#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Föllmer–Schweizer hedging under basis risk for exponential additive models.
//!
//! See the guide in `book/` for a walk through the modules.

pub mod engine;
pub mod mc;
pub mod error;
pub mod model;
pub mod payoff;
pub mod quadrature;
pub mod pde;
pub mod special;
pub mod stats;
pub mod tolerances;

mod digest;

pub use engine::{decompose, FsDecomposition};
pub use error::{AssumptionItem, Error, Result};
pub use model::{AdditiveModel, LevyParams};
pub use payoff::{call_measure, power_claim, put_measure, vanilla_call, Axis, ComplexPair, ContourLine, LineDensity, PayoffMeasure};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/payoffs.md")]
    mod payoffs {}
    #[doc = include_str!("../../../book/src/decomposition.md")]
    mod decomposition {}
    #[doc = include_str!("../../../book/src/pde.md")]
    mod pde {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/tolerances.md")]
    mod tolerances {}
}
