//! Scene files, ray tracing across interfaces, parameter sweeps and
//! invariant-check suites for spinning light rays.

pub mod checks;
pub mod error;
pub mod scene;
pub mod sweep;
pub mod trace;

pub use checks::{run_builtin, run_scene_checks, CheckOptions, CheckReport};
pub use error::{CliError, CliResult};
pub use scene::{emit_scene, load_scene, parse_scene, Scene};
pub use sweep::{parse_sweep, run_sweep, write_csv, SweepSpec};
pub use trace::{run_all, run_trace, TraceReport};
