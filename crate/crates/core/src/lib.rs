//! Hypothesis tests that borrow external controls for a randomized trial.
//!
//! The crate covers the RCT-only z-test, the bias-adjusted pooled-control
//! test, the combined max-test calibrated with the bivariate normal
//! equicoordinate quantile, tipping-point sensitivity analysis, closed-form
//! power calculations, a seeded Monte Carlo engine and a matching front-end
//! (propensity caliper, rank-based Mahalanobis distance, optimal pairing).
//!
//! Everything here is pure computation and builds without `std`; file
//! formats and the command line live in the `extcontrol` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod matching;
pub mod normal;
pub mod power;
pub mod rng;
pub mod sensitivity;
pub mod simulate;
pub mod table;
pub mod testing;

pub use error::{Error, Result};
pub use normal::{
    bvn_lower_cdf, bvn_upper_tail, equicoordinate_quantile, std_normal_cdf, std_normal_quantile,
    std_normal_sf, Correlation,
};
pub use power::{Critical, PowerScenario};
pub use simulate::{RejectionEstimate, SimSpec, TestKind, TestSpec};
pub use table::{TableColumn, WeightRule};
pub use sensitivity::{tipping_point, TippingPoint, TippingPoints};
pub use testing::{
    combined_test, correlation_hat, negate_transform, pooled_statistic, single_test, summarize,
    t1_statistic, ArmSummary, Direction, TestConfig, TestOutcome, Weight,
};
