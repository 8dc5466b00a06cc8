use thiserror::Error;

use crate::network::ValidationReport;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid network:\n{0}")]
    Invalid(ValidationReport),
    #[error("step {step}: non-finite value in {entity}")]
    NonFinite { step: u64, entity: String },
    #[error("step {step}: {entity} travels {distance} km in one step, more than its section length")]
    Cfl { step: u64, entity: String, distance: f64 },
    #[error("trace output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("override {key}: {reason}")]
    Override { key: String, reason: String },
}
