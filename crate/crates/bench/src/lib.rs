//! Case studies, sweeps, comparisons and regression tables on top of `hydromac`.

pub mod cases;
pub mod compare;
pub mod config;
pub mod run;
pub mod sweep;
pub mod tables;

pub use cases::{CaseId, Potential};
pub use config::{CaseConfig, ConfigError, SchemeKind};
pub use run::{run_case, RunError, RunReport, RunStatus};
pub use sweep::{sweep, SweepAxis};
