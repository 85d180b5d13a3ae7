//! Config-driven experiments on stochastic balance laws: one runner per estimate, result
//! tables with verdicts that can be recomputed offline, and the default acceptance suite.

pub mod checks;
pub mod config;
pub mod error;
pub mod record;
pub mod runners;
pub mod suite;

pub use config::{ExperimentConfig, ExperimentKind, McSpec, Options};
pub use error::{ExperimentError, Result};
pub use record::{evaluate, ResultRecord, Row, Verdict};
pub use runners::run;
