//! Synthetic scenarios with known conditional densities, and the
//! density-level-set oracle that any prediction set can be compared to.

mod level_set;
mod lipschitz;
mod scenario;

pub use level_set::{
    oracle_expected_length, oracle_set, oracle_threshold, OracleOptions, OracleSet, MIN_MC_DRAWS,
};
pub use lipschitz::lipschitz_bound;
pub use scenario::Scenario;
