//! Conditional and contextual information-directed sampling on finite-support
//! Bayesian contextual bandits, with graph-feedback and sparse linear
//! instances, an experiment harness, and numerical audits.

pub mod env;
pub mod error;
pub mod graph;
pub mod harness;
pub mod ids;
pub mod infogain;
pub mod lp;
pub mod posterior;
pub mod quadrature;
pub mod sparse;

pub use env::Environment;
pub use error::{Error, Result};
pub use infogain::{InfoGainConfig, InfoGainVector};
pub use posterior::{
    ContextDistribution, NoiseModel, Observation, ParamSupport, Policy, Posterior,
};
