//! No-arbitrage diagnostics per filtration: market price of risk, the
//! no-unbounded-profit (NA1) test, deflators and martingale checks.

mod deflator;
mod mpr;
mod na1;

pub use deflator::{
    deflated_price_test, deflator, girsanov_driver_mean, martingale_test, shrinkage_consistency, CheckpointResult,
    DeflatedPriceReport, MartingaleReport, ShrinkageReport,
};
pub use mpr::{check_support, initial_enlargement_drift, risk_path, RiskPath};
pub use na1::{na1_from_integrals, na1_test, Na1Report, Na1Verdict, NA1_RUNGS};
