//! Path simulation, driver composition and convergence diagnostics.

pub mod driver;
pub mod picard;
pub mod simulate;
pub mod strong;

pub use driver::{compose_driver, quadratic_variation};
pub use picard::{picard_reference, PicardResult};
pub use simulate::{simulate, SimulationOutput, node_drift, node_regime, node_vol, simulate_path, simulate_paths, simulate_range, step_pieces, Piece, StepPieces};
pub use strong::{strong_error_study, LevelError, StrongErrorReport};
