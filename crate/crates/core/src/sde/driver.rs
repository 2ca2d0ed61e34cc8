use crate::error::{Error, Result};
use crate::model::path::SwitchPoint;

/// Composite driver `W~` on the grid nodes.
///
/// Before the switch `W~ = W1`; after it the increments are
/// `rho dW1 + sqrt(1 - rho^2) dW2`, starting from the driver values at tau.
pub fn compose_driver(w1: &[f64], w2: &[f64], switch: Option<&SwitchPoint>, rho: f64) -> Result<Vec<f64>> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::invalid("rho", format!("must lie in [-1, 1], got {rho}")));
    }
    if w1.len() != w2.len() {
        return Err(Error::InconsistentData(format!("w1 has {} nodes, w2 has {}", w1.len(), w2.len())));
    }
    let rho_bar = (1.0 - rho * rho).sqrt();
    Ok(w1
        .iter()
        .zip(w2)
        .enumerate()
        .map(|(k, (&a, &b))| match switch {
            Some(sp) if k > sp.step => sp.w1 + rho * (a - sp.w1) + rho_bar * (b - sp.w2),
            _ => a,
        })
        .collect())
}

/// Realised quadratic variation `sum (dW~)^2` of a driver path.
pub fn quadratic_variation(driver: &[f64]) -> f64 {
    driver.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_switch_is_first_driver() {
        let w1 = [0.0, 0.1, -0.2];
        let w2 = [0.0, 0.5, 0.7];
        assert_eq!(compose_driver(&w1, &w2, None, 0.3).unwrap(), w1.to_vec());
    }

    #[test]
    fn rho_one_recovers_first_driver() {
        let w1 = [0.0, 0.1, -0.2, 0.4];
        let w2 = [0.0, 0.5, 0.7, 0.1];
        let sp = SwitchPoint { time: 0.4, step: 1, w1: 0.05, w2: 0.6, x: 0.0 };
        assert_eq!(compose_driver(&w1, &w2, Some(&sp), 1.0).unwrap(), w1.to_vec());
        let minus = compose_driver(&w1, &w2, Some(&sp), -1.0).unwrap();
        assert!((minus[3] - (0.05 - (0.4 - 0.05))).abs() < 1e-15);
    }

    #[test]
    fn bad_rho_rejected() {
        assert!(compose_driver(&[0.0], &[0.0], None, 1.5).is_err());
        assert!(compose_driver(&[0.0], &[0.0], None, f64::NAN).is_err());
    }
}
