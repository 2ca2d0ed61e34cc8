use std::fmt;

use crate::model::path::PathBundle;

/// European claims paid at the horizon.
#[derive(Clone, Copy, PartialEq)]
pub enum Claim {
    Constant { value: f64 },
    /// `S_T`
    Asset,
    /// `1{X_T > level}`
    DigitalState { level: f64 },
    /// `1{S_T >= strike}`
    Digital { strike: f64 },
    /// `(S_T - strike)^+`
    Call { strike: f64 },
    /// `1{tau <= time}`
    SwitchBy { time: f64 },
}

impl Claim {
    pub fn payoff(&self, path: &PathBundle) -> f64 {
        let s_t = path.s[path.n_steps()];
        match *self {
            Claim::Constant { value } => value,
            Claim::Asset => s_t,
            Claim::DigitalState { level } => f64::from(u8::from(path.x[path.n_steps()] > level)),
            Claim::Digital { strike } => f64::from(u8::from(s_t >= strike)),
            Claim::Call { strike } => (s_t - strike).max(0.0),
            Claim::SwitchBy { time } => f64::from(u8::from(path.tau().occurred_by(time))),
        }
    }
}

impl fmt::Debug for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Claim::Constant { value } => write!(f, "constant({value:?})"),
            Claim::Asset => write!(f, "asset"),
            Claim::DigitalState { level } => write!(f, "digital_state({level:?})"),
            Claim::Digital { strike } => write!(f, "digital({strike:?})"),
            Claim::Call { strike } => write!(f, "call({strike:?})"),
            Claim::SwitchBy { time } => write!(f, "switch_by({time:?})"),
        }
    }
}
