//! Online learning in factored MDPs under the average-reward criterion.

pub mod agents;
pub mod confidence;
pub mod envs;
pub mod error;
pub mod extended;
pub mod factored;
pub mod format;
pub mod harness;
pub mod planners;
pub mod solve;
pub mod tabular;

pub use error::{Error, Result};
pub use factored::{FactorSpec, FactoredMdp, FactoredStructure, ScopeSet};
pub use tabular::TabularMdp;
