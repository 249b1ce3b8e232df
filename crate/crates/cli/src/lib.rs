//! Batch experiment runner for virtual-time-horizon simulations: spec
//! parsing, deterministic sweep execution, archival, exports, and analysis.

pub mod analyze;
pub mod archive;
pub mod emit;
pub mod error;
pub mod params;
pub mod spec;

pub use analyze::{analyze, AnalyzeOptions, AnalyzeTask, Report};
pub use archive::{run_experiment, spec_hash, CellTable, Manifest, ResultArchive, Selection};
pub use emit::{emit, EmitFormat};
pub use error::{CliError, Result};
pub use spec::{BurnInSpec, DeltaSpec, ExperimentSpec, ModeSpec, SweepCell};
