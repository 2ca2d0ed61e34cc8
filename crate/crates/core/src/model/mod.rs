//! Model primitives: time grid, regime coefficients, change-point
//! constructions and simulated path containers.

pub mod coefficients;
pub mod grid;
pub mod path;
pub mod random_time;
pub mod scenario;

pub use coefficients::{CoefFn, ProbeLattice, Regime, RegimeCoefficients, ValidationReport, Violation, ViolationKind};
pub use grid::TimeGrid;
pub use path::{PathBundle, SwitchPoint};
pub use random_time::{compensator, sample_tau, ChangeTime, Intensity, RandomTimeSpec, TimeLaw};
pub use scenario::{FiltrationTag, ModelSpec, ScenarioConfig};
