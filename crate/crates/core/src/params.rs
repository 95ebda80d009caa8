//! Constants of the fiber maps that also weight the symbolic potential.

use crate::error::{Error, Result};

/// Derivative constants of the fiber maps.
///
/// `beta0`, `beta2` are the repelling slopes at `0` of the maps over symbols
/// `0` and `2`, `gamma` the contraction of the map over symbol `1`, `lambda0`
/// the attracting slope at `1` of the map over symbol `0`, and `beta_tilde`
/// the bound on derivative growth away from the exceptional set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialParams {
    pub beta0: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub lambda0: f64,
    pub beta_tilde: f64,
}

impl Default for PotentialParams {
    fn default() -> Self {
        PotentialParams {
            beta0: 1.05,
            beta2: 1.04,
            gamma: 0.9,
            lambda0: 0.5,
            beta_tilde: 1.02,
        }
    }
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.beta0, self.beta2, self.gamma, self.lambda0, self.beta_tilde];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite constant".into()));
        }
        if !(1.0 < self.beta2 && self.beta2 < self.beta0) {
            return Err(Error::InvalidParams(format!(
                "need 1 < beta2 < beta0, got beta2={}, beta0={}",
                self.beta2, self.beta0
            )));
        }
        if !(0.0 < self.lambda0 && self.lambda0 < self.gamma && self.gamma < 1.0) {
            return Err(Error::InvalidParams(format!(
                "need 0 < lambda0 < gamma < 1, got lambda0={}, gamma={}",
                self.lambda0, self.gamma
            )));
        }
        if !(1.0 < self.beta_tilde && self.beta_tilde < self.beta2) {
            return Err(Error::InvalidParams(format!(
                "need 1 < beta_tilde < beta2, got beta_tilde={}, beta2={}",
                self.beta_tilde, self.beta2
            )));
        }
        Ok(())
    }

    pub fn with_beta_tilde(mut self, beta_tilde: f64) -> Self {
        self.beta_tilde = beta_tilde;
        self
    }

    /// Potential value on a symbol of `{0, 2}`: minus the log slope.
    pub fn potential(&self, symbol: u8) -> f64 {
        match symbol {
            0 => -self.beta0.ln(),
            2 => -self.beta2.ln(),
            _ => panic!("potential is only defined on symbols 0 and 2"),
        }
    }

    /// `[t * potential(0), t * potential(2)]`.
    pub fn log_weights(&self, t: f64) -> [f64; 2] {
        [t * self.potential(0), t * self.potential(2)]
    }

    /// Birkhoff average of `-potential` over a window with `twos` symbols `2`
    /// out of `len`.
    pub fn window_exponent(&self, twos: usize, len: usize) -> f64 {
        ((len - twos) as f64 * self.beta0.ln() + twos as f64 * self.beta2.ln()) / len as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        PotentialParams::default().validate().unwrap();
    }

    #[test]
    fn ordering_violations() {
        let p = PotentialParams {
            beta2: 1.06,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = PotentialParams {
            gamma: 0.4,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = PotentialParams::default().with_beta_tilde(1.045);
        assert!(p.validate().is_err());
    }

    #[test]
    fn window_exponent_endpoints() {
        let p = PotentialParams::default();
        assert_eq!(p.window_exponent(0, 5), 1.05f64.ln());
        assert!((p.window_exponent(5, 5) - 1.04f64.ln()).abs() < 1e-15);
    }
}
