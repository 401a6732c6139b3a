//! Configuration files, field snapshots, CSV tables and run directories.

mod config;
mod csv;
mod run;
mod snapshot;

pub use config::{
    emit_config, parse_config, RunConfig, ToleranceOverrides, DEFAULT_DT, DEFAULT_EPS, DEFAULT_OUTPUT_DIR,
    DEFAULT_SNAPSHOT_STRIDE, DEFAULT_T_END,
};
pub use csv::{emit_diagnostics_csv, emit_refinement_csv, emit_sweep_csv, parse_diagnostics_csv, SWEEP_COLUMNS};
pub use run::{
    audit_dir, execute_run, AuditCheck, AuditReport, RunReport, CONFIG_FILE, DIAGNOSTICS_FILE, SNAPSHOT_DIR,
};
pub use snapshot::{
    director_snapshot, read_snapshot, read_state, scalar_snapshot, vector_snapshot, write_snapshot, write_state,
    Snapshot, SnapshotHeader, SNAPSHOT_MAGIC, SNAPSHOT_VERSION, STATE_FIELDS,
};
