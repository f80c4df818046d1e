//! Data-poisoning attack generation for ridge regression on tabular data
//! with mixed numerical and one-hot categorical features.
//!
//! The attacker injects `q` crafted samples into a training set so that the
//! ridge model fitted on the combined data performs as poorly as possible on
//! the clean training rows. Numeric poison features are continuous in [0,1];
//! categorical poison features are one-hot assignments; poison responses are
//! flipped at initialization and fixed thereafter.
//!
//! Crate layout:
//! - [`schema`] / [`dataset`]: ingestion, scaling, splits, poison init.
//! - [`ridge`]: exact lower-level solver via the stationarity system.
//! - [`bounds`]: sensitivity-based coefficient and intercept bounds.
//! - [`bilevel`]: leader objective and implicit hypergradients.
//! - [`localopt`]: projected gradient ascent over box-constrained batches.
//! - [`strategies`]: the IAS, SAS, and IFCF attack strategies.
//! - [`oracle`]: brute-force grid enumeration for tiny instances.
//! - [`harness`]: experiment pipeline, result records, campaign runner.

pub mod bilevel;
pub mod bounds;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod localopt;
pub mod oracle;
pub mod ridge;
pub mod schema;
pub mod strategies;
pub mod testkit;

pub use bilevel::AttackState;
pub use bounds::VariableBounds;
pub use dataset::{
    encode_and_scale, init_poison, load_csv, split, Dataset, PoisonSet, RawTable, ScalingStats,
};
pub use error::{Error, Result};
pub use harness::{AttackResult, CampaignSpec, LambdaSpec, RunSpec, SplitSizes};
pub use localopt::OptimizerConfig;
pub use ridge::RegressionParams;
pub use schema::{CategoricalSpec, FeatureSchema};
pub use strategies::{Method, StrategyConfig};
