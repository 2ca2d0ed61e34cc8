//! Regression-based (least-squares Monte Carlo) hedging of claims on the
//! price and on the change point, with an optional position in the jump
//! martingale of the regime indicator.

mod claim;
mod lsmc;

pub use claim::Claim;
pub use lsmc::{
    ablation_gap, completeness_report, fit_hedge, replicate, replicate_on, rmse_ladder, CompletenessRow, HedgeConfig,
    HedgeFit, HedgeModel, ReplicationReport, StepSummary, MIN_BASIS,
};
