//! Fixed-budget best-arm identification under location-shift contextual
//! bandit models.
//!
//! The crate provides the environment ([`model`]), online nuisance
//! regression ([`nuisance`]), variance-based target allocations
//! ([`allocation`]), the RS-AIPW strategy with its variants and baselines
//! ([`strategies`]), AIPW estimators and the asymptotic variance functional
//! ([`estimators`]), closed-form regret bounds ([`bounds`]), and a seeded,
//! parallel experiment harness ([`harness`]).

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod allocation;
pub mod bounds;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod model;
pub mod nuisance;
pub mod rng;
pub mod stats;
pub mod strategies;

pub use allocation::{estimated_allocation, target_allocation, AllocationRatio};
pub use error::{BaiError, Result};
pub use model::{
    ArmSpec, ConditionalFn, ContextDistribution, LocationShiftBandit, Observation, SyntheticDesign,
};
pub use nuisance::NuisanceEstimator;
pub use rng::RandomSource;
pub use strategies::{Selection, Strategy, StrategyKind};
