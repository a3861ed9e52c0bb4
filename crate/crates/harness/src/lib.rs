//! Experiment harness: configuration, training and evaluation across
//! battery scenarios, cost accounting, reports and an exact
//! dynamic-programming dispatch oracle for small instances.

pub mod config;
pub mod cost;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod oracle;
pub mod report;

pub use config::{AgentKind, ExperimentConfig};
pub use cost::CostBreakdown;
pub use error::{HarnessError, Result};
pub use experiment::{load_artifacts, run_eval, run_train, EvalSummary, RunRecord};
pub use metrics::{ActionHistogram, Histogram};
pub use oracle::{solve_dp, solve_enumeration, OracleInstance, OracleSolution};
pub use report::emit_reports;
