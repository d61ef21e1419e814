//! Scalar knobs shared by every optimizer and bound computation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of ADAM, plus the momentum decay used by the method of moments.
///
/// `eta` is the base step size; ADAM uses `eta / sqrt(t)` at step `t`.
/// The first-moment rate decays as `beta1 * lambda^(t-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub alpha: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            eta: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            lambda: 0.999,
            epsilon: 1e-8,
            alpha: 0.9,
        }
    }
}

fn open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} = {x} must lie in (0, 1)")))
    }
}

impl HyperParams {
    /// Builds and validates a parameter set.
    pub fn new(eta: f64, beta1: f64, beta2: f64, lambda: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            eta,
            beta1,
            beta2,
            lambda,
            epsilon,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// `beta1^2 / sqrt(beta2)`.
    pub fn gamma(&self) -> f64 {
        self.beta1 * self.beta1 / self.beta2.sqrt()
    }

    /// Decayed first-moment rate `beta1 * lambda^(t-1)` for `t >= 1`.
    pub fn beta1_at(&self, t: usize) -> f64 {
        self.beta1 * self.lambda.powi((t - 1) as i32)
    }

    /// Checks every range constraint, including `gamma < 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParams(format!("eta = {} must be positive", self.eta)));
        }
        open_unit("beta1", self.beta1)?;
        open_unit("beta2", self.beta2)?;
        open_unit("lambda", self.lambda)?;
        open_unit("alpha", self.alpha)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "epsilon = {} must be nonnegative",
                self.epsilon
            )));
        }
        self.check_gamma()
    }

    /// Only the `gamma = beta1^2 / sqrt(beta2) < 1` hypothesis.
    pub fn check_gamma(&self) -> Result<()> {
        let gamma = self.gamma();
        if gamma < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "gamma = beta1^2/sqrt(beta2) = {gamma} violates the hypothesis gamma < 1 \
                 (beta1 = {}, beta2 = {})",
                self.beta1, self.beta2
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = HyperParams::default();
        p.validate().unwrap();
        assert!((p.gamma() - 0.81 / 0.999f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gamma_hypothesis_is_enforced() {
        // 0.99^2 / sqrt(0.5) = 1.386...
        let err = HyperParams::new(0.1, 0.99, 0.5, 0.9, 1e-8).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gamma < 1"), "{msg}");
        assert!((0.99f64 * 0.99 / 0.5f64.sqrt() - 1.386).abs() < 1e-3);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(HyperParams::new(0.0, 0.9, 0.999, 0.9, 1e-8).is_err());
        assert!(HyperParams::new(0.1, 1.0, 0.999, 0.9, 1e-8).is_err());
        assert!(HyperParams::new(0.1, 0.9, 0.0, 0.9, 1e-8).is_err());
        assert!(HyperParams::new(0.1, 0.9, 0.999, 1.0, 1e-8).is_err());
        assert!(HyperParams::new(0.1, 0.9, 0.999, 0.9, -1.0).is_err());
        // epsilon = 0 is the proof-side mode and is allowed
        assert!(HyperParams::new(0.1, 0.9, 0.999, 0.9, 0.0).is_ok());
    }

    #[test]
    fn decayed_beta1() {
        let p = HyperParams::new(1.0, 0.9, 0.999, 0.5, 0.0).unwrap();
        assert_eq!(p.beta1_at(1), 0.9);
        assert_eq!(p.beta1_at(2), 0.45);
        assert_eq!(p.beta1_at(3), 0.225);
    }
}
