//! Reward terms of both decision layers.

use serde::{Deserialize, Serialize};

/// Sign applied to the pattern-match reward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaSign {
    /// More matched relations earn more reward.
    #[default]
    Positive,
    /// `r_z = -α (μ_match - μ_total / 2)` exactly as printed.
    Negative,
}

impl AlphaSign {
    pub fn factor(self) -> f64 {
        match self {
            AlphaSign::Positive => 1.0,
            AlphaSign::Negative => -1.0,
        }
    }
}

/// How the completion horizon `M` behind `r_x` is estimated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HorizonEstimate {
    /// Latest end placed so far, extended by every task's remaining work
    /// from its ready time.
    #[default]
    Projected,
    /// Latest end placed so far; starts at 0, so `Σ r_x = -ComT / rx_scale`.
    Placed,
}

/// Whether `M_new` includes the time the focal operation spent waiting for a
/// car or workstation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HorizonMeasure {
    #[default]
    AfterWait,
    BeforeWait,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Task reward `𝓡` paid when a car delivers the focal task to its workstation.
    pub task_reward: f64,
    /// Divisor of the horizon difference in `r_x`.
    pub rx_scale: f64,
    /// Pattern weight `α`.
    pub alpha: f64,
    pub alpha_sign: AlphaSign,
    pub horizon: HorizonEstimate,
    pub measure: HorizonMeasure,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            task_reward: 10.0,
            rx_scale: 5000.0,
            alpha: 0.0,
            alpha_sign: AlphaSign::Positive,
            horizon: HorizonEstimate::Projected,
            measure: HorizonMeasure::AfterWait,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rx_scale > 0.0) {
            return Err(format!("rx_scale must be positive, got {}", self.rx_scale));
        }
        if !(self.alpha >= 0.0) {
            return Err(format!("alpha must be non-negative, got {}", self.alpha));
        }
        Ok(())
    }
}

/// The five cases of the lower-layer immediate reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RewardCase {
    /// An available car exists and the action selects an available car.
    SelectAvailable,
    /// Nothing is available and the action waits.
    WaitWhenBusy,
    /// Something is available but the action waits.
    WaitWhenAvailable,
    /// Nothing is available but the action selects a car.
    SelectWhenBusy,
    /// Something is available but the action selects an unavailable car.
    SelectUnavailable,
}

impl RewardCase {
    pub const ALL: [RewardCase; 5] = [
        RewardCase::SelectAvailable,
        RewardCase::WaitWhenBusy,
        RewardCase::WaitWhenAvailable,
        RewardCase::SelectWhenBusy,
        RewardCase::SelectUnavailable,
    ];

    /// `r_q` for this case.
    pub fn reward(self) -> f64 {
        match self {
            RewardCase::SelectAvailable => 2.0,
            RewardCase::WaitWhenBusy => 1.0,
            RewardCase::WaitWhenAvailable
            | RewardCase::SelectWhenBusy
            | RewardCase::SelectUnavailable => -2.0,
        }
    }

    pub fn is_valid(self) -> bool {
        matches!(self, RewardCase::SelectAvailable | RewardCase::WaitWhenBusy)
    }
}

/// Classifies a lower action against effective car availability flags
/// (`true` = idle car and a free workstation for the focal operation).
///
/// `action` 0 waits; `d` in `1..=K` selects car `d`.
pub fn classify_lower(available: &[bool], action: usize) -> RewardCase {
    let any = available.iter().any(|&a| a);
    match (any, action) {
        (true, 0) => RewardCase::WaitWhenAvailable,
        (false, 0) => RewardCase::WaitWhenBusy,
        (false, _) => RewardCase::SelectWhenBusy,
        (true, d) if available[d - 1] => RewardCase::SelectAvailable,
        (true, _) => RewardCase::SelectUnavailable,
    }
}

/// `r_y`: penalty for selecting a task that has already finished.
pub fn finished_task_penalty(n_total: usize, progress: usize) -> f64 {
    let n = n_total.max(1) as f64;
    -1.0 - (n_total - progress) as f64 / n
}

/// `r_x`: horizon improvement scaled by `rx_scale`.
pub fn horizon_reward(m_old: f64, m_new: f64, rx_scale: f64) -> f64 {
    (m_old - m_new) / rx_scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_case_rewards() {
        // all busy, wait
        assert_eq!(classify_lower(&[false, false, false], 0).reward(), 1.0);
        // car 2 idle, select it
        assert_eq!(classify_lower(&[false, true, false], 2).reward(), 2.0);
        // car 2 idle, wait
        assert_eq!(classify_lower(&[false, true, false], 0).reward(), -2.0);
        assert_eq!(classify_lower(&[false, false], 1), RewardCase::SelectWhenBusy);
        assert_eq!(classify_lower(&[false, true], 1), RewardCase::SelectUnavailable);
    }

    #[test]
    fn horizon_reward_examples() {
        assert_eq!(horizon_reward(42.0, 42.0, 5000.0), 0.0);
        assert!((horizon_reward(5100.0, 5000.0, 5000.0) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn finished_penalty_examples() {
        assert_eq!(finished_task_penalty(50, 50), -1.0);
        assert_eq!(finished_task_penalty(50, 0), -2.0);
    }

    #[test]
    fn reward_config_validation() {
        assert!(RewardConfig::default().validate().is_ok());
        let bad = RewardConfig { rx_scale: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = RewardConfig { alpha: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
