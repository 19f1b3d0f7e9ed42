//! Multi-fidelity stochastic bandits.
//!
//! Every arm can be played at one of `M` fidelities. Fidelity `m` costs
//! `λ^(m)` units of capital per play and returns rewards whose mean lies
//! within `ζ^(m)` of the arm's top-fidelity mean. The crate provides
//!
//! * [`model`]: ladders, instances, concentration rates and gaps,
//! * [`policy`]: the multi-fidelity UCB rule and a top-fidelity UCB baseline,
//! * [`sim`]: capital-budgeted episodes, regret accounting, instance
//!   generators and batched replications,
//! * [`analysis`]: arm partitions and regret-bound coefficients.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`). The
//! `*64` aliases at the crate root name the `f64` instantiations used by the
//! command-line tool.

// `!(x > 0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod model;
pub mod policy;
mod report_float;
pub mod sim;

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

pub use error::{Error, Result};

/// Floating point scalar the library is generic over.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal or computed value.
    #[inline]
    fn lit(x: f64) -> Self {
        // f32/f64 conversions from f64 never fail.
        Self::from_f64(x).expect("f64 converts to every float scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type FidelityLadder64 = model::FidelityLadder<f64>;
pub type ConcentrationModel64 = model::ConcentrationModel<f64>;
pub type ProblemInstance64 = model::ProblemInstance<f64>;
pub type ProblemData64 = model::ProblemData<f64>;
pub type GapMatrix64 = model::GapMatrix<f64>;
pub type PolicyState64 = policy::PolicyState<f64>;
pub type EpisodeResult64 = sim::EpisodeResult<f64>;
pub type GeneratorSpec64 = sim::GeneratorSpec<f64>;
pub type BatchResult64 = sim::BatchResult<f64>;
pub type PartitionReport64 = analysis::PartitionReport<f64>;
pub type BoundReport64 = analysis::BoundReport<f64>;

pub type FidelityLadder32 = model::FidelityLadder<f32>;
pub type ConcentrationModel32 = model::ConcentrationModel<f32>;
pub type ProblemInstance32 = model::ProblemInstance<f32>;
pub type PolicyState32 = policy::PolicyState<f32>;
