//! Physical and radio parameters shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::fbl;
use crate::optimality::KStarRule;

/// Network-wide parameters. Defaults reproduce the reference deployment:
/// 50 nodes, 100 kHz, 100-bit packets, 101 ms PAoI threshold, 250 mW cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    pub nodes: usize,
    /// Largest admissible blocklength `M_th`, in symbols.
    pub max_blocklength: u32,
    pub packet_bits: u32,
    pub bandwidth_hz: f64,
    /// Endurable peak AoI `alpha`, seconds.
    pub paoi_threshold_s: f64,
    /// `1 - delta` is the tolerated PAoI violation probability.
    pub delta: f64,
    /// TDMA utilisation bound `beta`.
    pub utilization_bound: f64,
    pub max_tx_power_w: f64,
    pub circuit_power_w: f64,
    pub noise_psd_dbm_hz: f64,
    /// Set from the `[optimality]` section, not from `[network]`.
    #[serde(skip)]
    pub k_rule: KStarRule,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            nodes: 50,
            max_blocklength: 200,
            packet_bits: 100,
            bandwidth_hz: 100e3,
            paoi_threshold_s: 0.101,
            delta: 0.99,
            utilization_bound: 0.9,
            max_tx_power_w: 0.25,
            circuit_power_w: 5e-3,
            noise_psd_dbm_hz: -174.0,
            k_rule: KStarRule::default(),
        }
    }
}

impl NetworkParams {
    /// Noise power over the whole band, Watts.
    pub fn noise_power_w(&self) -> f64 {
        fbl::noise_power_w(self.noise_psd_dbm_hz, self.bandwidth_hz)
    }

    /// `B * alpha`: the PAoI window measured in symbols.
    pub fn window_symbols(&self) -> f64 {
        self.bandwidth_hz * self.paoi_threshold_s
    }

    /// Blocklength used for the hidden bootstrap frame, `ceil(M_th / 2)`.
    pub fn bootstrap_blocklength(&self) -> u32 {
        self.max_blocklength.div_ceil(2)
    }

    pub fn validate(&self, section: &str) -> Result<(), ConfigError> {
        let key = |k: &str| format!("{section}.{k}");
        if self.nodes == 0 {
            return Err(ConfigError::invalid(&key("nodes"), "must be >= 1"));
        }
        if self.max_blocklength == 0 {
            return Err(ConfigError::invalid(&key("max_blocklength"), "must be >= 1"));
        }
        if self.packet_bits == 0 {
            return Err(ConfigError::invalid(&key("packet_bits"), "must be >= 1"));
        }
        for (name, value) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("paoi_threshold_s", self.paoi_threshold_s),
            ("max_tx_power_w", self.max_tx_power_w),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::invalid(&key(name), "must be positive and finite"));
            }
        }
        if !(self.circuit_power_w >= 0.0 && self.circuit_power_w.is_finite()) {
            return Err(ConfigError::invalid(&key("circuit_power_w"), "must be >= 0"));
        }
        if !self.noise_psd_dbm_hz.is_finite() {
            return Err(ConfigError::invalid(&key("noise_psd_dbm_hz"), "must be finite"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError::invalid(&key("delta"), "must lie in (0, 1)"));
        }
        if !(self.utilization_bound > 0.0 && self.utilization_bound <= 1.0) {
            return Err(ConfigError::invalid(
                &key("utilization_bound"),
                "must lie in (0, 1]",
            ));
        }
        if self.window_symbols() <= f64::from(self.max_blocklength) {
            return Err(ConfigError::invalid(
                &key("paoi_threshold_s"),
                format!(
                    "bandwidth_hz * paoi_threshold_s = {} must exceed max_blocklength = {}",
                    self.window_symbols(),
                    self.max_blocklength
                ),
            ));
        }
        Ok(())
    }
}

/// Static per-node radio data plus the coefficient `C1 = sigma^2 / g` of the
/// current frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeRadioProfile {
    pub packet_bits: u32,
    pub distance_m: f64,
    pub circuit_power_w: f64,
    pub c1: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let p = NetworkParams::default();
        p.validate("network").unwrap();
        assert_eq!(p.bootstrap_blocklength(), 100);
        assert!((p.window_symbols() - 10_100.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_out_of_range_values() {
        let p = NetworkParams {
            utilization_bound: 1.5,
            ..Default::default()
        };
        let err = p.validate("network").unwrap_err().to_string();
        assert!(err.contains("network.utilization_bound"), "{err}");

        let p = NetworkParams {
            paoi_threshold_s: 0.002,
            ..Default::default()
        };
        assert!(p.validate("network").is_err());
    }
}
