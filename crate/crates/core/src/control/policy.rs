use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    None,
    Block,
    Balance,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::None => "none",
            PolicyKind::Block => "block",
            PolicyKind::Balance => "balance",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(PolicyKind::None),
            "block" => Ok(PolicyKind::Block),
            "balance" => Ok(PolicyKind::Balance),
            _ => Err(Error::invalid("policy", format!("unknown policy '{s}' (none, block, balance)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub block_threshold: f64,
    pub balance_threshold: f64,
    pub release_margin: f64,
    pub release_ticks: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: PolicyKind::None,
            block_threshold: 0.8,
            balance_threshold: 0.5,
            release_margin: 0.1,
            release_ticks: 3,
        }
    }
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        PolicyConfig {
            kind,
            ..Default::default()
        }
    }

    /// Engage threshold of the active policy.
    pub fn threshold(&self) -> Option<f64> {
        match self.kind {
            PolicyKind::None => None,
            PolicyKind::Block => Some(self.block_threshold),
            PolicyKind::Balance => Some(self.balance_threshold),
        }
    }

    /// A threshold of exactly 1 is accepted and never triggers, since
    /// predictions are clamped to [0, 1].
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("block", self.block_threshold), ("balance", self.balance_threshold)] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::invalid("policy", format!("{name} threshold {t} must lie in (0, 1]")));
            }
            if !(self.release_margin >= 0.0 && self.release_margin < t) {
                return Err(Error::invalid(
                    "policy",
                    format!("release margin {} must lie in [0, {name} threshold)", self.release_margin),
                ));
            }
        }
        if self.release_ticks == 0 {
            return Err(Error::invalid("policy", "release_ticks must be >= 1"));
        }
        Ok(())
    }
}

/// Engage above a threshold, release after `release_ticks` consecutive
/// predictions below `threshold - margin`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Hysteresis {
    pub engaged: bool,
    calm: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Engaged,
    Released,
}

impl Hysteresis {
    pub fn update(&mut self, prediction: f64, threshold: f64, margin: f64, release_ticks: usize) -> Option<Transition> {
        if !self.engaged {
            if prediction > threshold {
                self.engaged = true;
                self.calm = 0;
                return Some(Transition::Engaged);
            }
            return None;
        }
        if prediction < threshold - margin {
            self.calm += 1;
            if self.calm >= release_ticks {
                self.engaged = false;
                self.calm = 0;
                return Some(Transition::Released);
            }
        } else {
            self.calm = 0;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engage_and_release_after_three_calm_ticks() {
        let mut h = Hysteresis::default();
        assert_eq!(h.update(0.85, 0.8, 0.1, 3), Some(Transition::Engaged));
        assert_eq!(h.update(0.65, 0.8, 0.1, 3), None);
        assert_eq!(h.update(0.65, 0.8, 0.1, 3), None);
        assert_eq!(h.update(0.65, 0.8, 0.1, 3), Some(Transition::Released));
        assert!(!h.engaged);
    }

    #[test]
    fn band_resets_the_release_count() {
        let mut h = Hysteresis::default();
        h.update(0.9, 0.8, 0.1, 3);
        h.update(0.6, 0.8, 0.1, 3);
        h.update(0.6, 0.8, 0.1, 3);
        // inside the band [0.7, 0.8]: still engaged, count restarts
        assert_eq!(h.update(0.75, 0.8, 0.1, 3), None);
        h.update(0.6, 0.8, 0.1, 3);
        h.update(0.6, 0.8, 0.1, 3);
        assert!(h.engaged);
        assert_eq!(h.update(0.6, 0.8, 0.1, 3), Some(Transition::Released));
    }

    #[test]
    fn threshold_one_never_engages() {
        let mut h = Hysteresis::default();
        assert_eq!(h.update(1.0, 1.0, 0.1, 3), None);
        let mut p = PolicyConfig::new(PolicyKind::Block);
        p.block_threshold = 1.0;
        assert!(p.validate().is_ok());
        p.release_margin = 1.0;
        assert!(p.validate().is_err());
        assert!("Balance".parse::<PolicyKind>().is_ok());
    }
}
