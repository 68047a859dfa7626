//! Case files, full-order runs, snapshot storage, sweeps and reports.

pub mod case;
pub mod report;
pub mod run;
pub mod snapshot_db;
pub mod sweep;

pub use case::{CaseFile, PreparedCase, SCHEMA_VERSION};
pub use report::{energy_csv, validation_report, TimingReport, ValidationReport};
pub use run::{
    extract_fields, fmt_f64, run_case, solve_steady, FieldData, RunOutcome, SteadySolution,
    FIELD_NAMES,
};
pub use snapshot_db::SnapshotDb;
pub use sweep::{run_sweep, SweepPlan, SweepSummary, SWEEP_DELTA_P};
