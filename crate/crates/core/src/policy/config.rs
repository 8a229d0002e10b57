use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Exit at the first layer whose normalized entropy is below `tau`.
    Entropy,
    /// Exit once `patience` consecutive layers agree on the argmax.
    Patience,
    /// Exit on whichever of the two rules fires first.
    Epee,
    /// Always use the exit at `budget_layer`.
    Budgeted,
}

impl Strategy {
    pub fn uses_entropy(self) -> bool {
        matches!(self, Strategy::Entropy | Strategy::Epee)
    }

    pub fn uses_patience(self) -> bool {
        matches!(self, Strategy::Patience | Strategy::Epee)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Strategy::Entropy => "entropy",
            Strategy::Patience => "patience",
            Strategy::Epee => "epee",
            Strategy::Budgeted => "budgeted",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "entropy" => Ok(Strategy::Entropy),
            "patience" => Ok(Strategy::Patience),
            "epee" => Ok(Strategy::Epee),
            "budgeted" => Ok(Strategy::Budgeted),
            other => Err(Error::config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Strategy plus its thresholds. Fields a strategy does not use are carried
/// but ignored; they default to values valid for any depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitPolicyConfig {
    pub strategy: Strategy,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "one")]
    pub patience: usize,
    #[serde(default = "one")]
    pub budget_layer: usize,
}

fn one() -> usize {
    1
}

impl ExitPolicyConfig {
    pub fn entropy(tau: f64) -> Self {
        Self {
            strategy: Strategy::Entropy,
            tau,
            patience: 1,
            budget_layer: 1,
        }
    }

    pub fn patience(patience: usize) -> Self {
        Self {
            strategy: Strategy::Patience,
            tau: 0.0,
            patience,
            budget_layer: 1,
        }
    }

    pub fn epee(tau: f64, patience: usize) -> Self {
        Self {
            strategy: Strategy::Epee,
            tau,
            patience,
            budget_layer: 1,
        }
    }

    pub fn budgeted(layer: usize) -> Self {
        Self {
            strategy: Strategy::Budgeted,
            tau: 0.0,
            patience: 1,
            budget_layer: layer,
        }
    }

    /// Range checks against a network with `num_layers` exits.
    pub fn validate(&self, num_layers: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::config(format!("tau {} outside [0, 1]", self.tau)));
        }
        if self.patience < 1 || self.patience > num_layers {
            return Err(Error::config(format!(
                "patience {} outside [1, {num_layers}]",
                self.patience
            )));
        }
        if self.budget_layer < 1 || self.budget_layer > num_layers {
            return Err(Error::config(format!(
                "budget layer {} outside [1, {num_layers}]",
                self.budget_layer
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let cfg = ExitPolicyConfig::epee(0.25, 3);
        let v = serde_json::to_value(cfg).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"strategy": "epee", "tau": 0.25, "patience": 3, "budget_layer": 1})
        );
        let back: ExitPolicyConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn missing_fields_default() {
        let cfg: ExitPolicyConfig = serde_json::from_str(r#"{"strategy":"entropy","tau":0.1}"#).unwrap();
        assert_eq!(cfg, ExitPolicyConfig::entropy(0.1));
        assert!(serde_json::from_str::<ExitPolicyConfig>(r#"{"strategy":"greedy"}"#).is_err());
    }

    #[test]
    fn validation_ranges() {
        assert!(ExitPolicyConfig::epee(1.0, 6).validate(6).is_ok());
        assert!(ExitPolicyConfig::epee(1.01, 6).validate(6).is_err());
        assert!(ExitPolicyConfig::epee(-0.1, 1).validate(6).is_err());
        assert!(ExitPolicyConfig::patience(0).validate(6).is_err());
        assert!(ExitPolicyConfig::patience(7).validate(6).is_err());
        assert!(ExitPolicyConfig::budgeted(0).validate(6).is_err());
        assert!(ExitPolicyConfig::budgeted(6).validate(6).is_ok());
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("EPEE".parse::<Strategy>().unwrap(), Strategy::Epee);
        assert!("greedy".parse::<Strategy>().is_err());
        assert_eq!(Strategy::Budgeted.to_string(), "budgeted");
    }
}
