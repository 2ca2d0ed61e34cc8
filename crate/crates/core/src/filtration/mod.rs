//! What can be learned about the change point from the price path alone:
//! realised-variance switch detection, normalised drivers and the jump
//! martingale of the regime indicator.

mod detect;
mod drivers;

pub use detect::{detect_switch, realized_variance, DetectionResult, DetectorConfig, SEPARATION_FLOOR};
pub use drivers::{jump_martingale, normalized_driver, reconstruct_state, y_bar};
