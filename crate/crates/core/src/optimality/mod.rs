//! Decision-space reduction.
//!
//! For a fixed blocklength `m` the optimal sampling period and packet error
//! probability sit where the PAoI constraint is tight with an integer number
//! `k` of reception opportunities:
//!
//! ```text
//! h* = (alpha - m/B) / k        p* = (1 - delta)^(1/k)
//! ```
//!
//! and the best `k` is the smallest one whose transmit power respects the
//! cap. Each node is then summarised by its power `W*(m)` and its TDMA load
//! `m k / (B alpha - m)`.

pub mod oracle;

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::MathError;
use crate::fbl;
use crate::params::NetworkParams;

type Result<T> = std::result::Result<T, MathError>;

/// Largest `k` treated as attainable. Beyond it a blocklength is considered
/// infeasible for the node.
pub const K_CAP: u64 = 10_000;

/// How the power cap enters the closed-form `p_max`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapRule {
    /// `ln(W_max / (m c1) + 1)`: the cap is effectively applied to `m W_tx`.
    #[default]
    Scaled,
    /// `ln(W_max / c1 + 1)`: the exact inversion of the transmit-power formula.
    Direct,
}

impl CapRule {
    /// Transmit-power level that `p_max` is solved against.
    pub fn effective_cap(self, max_tx_power_w: f64, blocklength: u32) -> f64 {
        match self {
            CapRule::Scaled => max_tx_power_w / f64::from(blocklength),
            CapRule::Direct => max_tx_power_w,
        }
    }
}

/// Rounding of `ln(1 - delta) / ln p_max` to an integer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KRounding {
    /// Smallest `k` meeting the cap.
    #[default]
    Ceil,
    /// Largest `k` not exceeding the ratio; can undershoot the cap.
    Floor,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KStarRule {
    #[serde(rename = "cap_rule")]
    pub variant: CapRule,
    #[serde(rename = "k_rounding")]
    pub rounding: KRounding,
}

/// `ln p_max`, the log of the largest error probability whose transmit power
/// stays within the variant's cap.
pub fn ln_p_max(
    blocklength: u32,
    c1: f64,
    packet_bits: u32,
    max_tx_power_w: f64,
    variant: CapRule,
) -> Result<f64> {
    if blocklength == 0 {
        return Err(MathError::domain("blocklength", 0.0, "m >= 1"));
    }
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(MathError::domain("c1", c1, "positive and finite"));
    }
    if !(max_tx_power_w >= 0.0 && max_tx_power_w.is_finite()) {
        return Err(MathError::domain("max_tx_power_w", max_tx_power_w, ">= 0"));
    }
    let m = f64::from(blocklength);
    let cap = variant.effective_cap(max_tx_power_w, blocklength);
    let arg = m.sqrt() * (cap / c1).ln_1p() - LN_2 * f64::from(packet_bits) / m.sqrt();
    fbl::ln_gaussian_q(arg)
}

/// Number of reception opportunities `k*` for blocklength `m`. Saturates at
/// `u64::MAX` when no finite `k` meets the cap.
pub fn k_star_with(
    blocklength: u32,
    c1: f64,
    packet_bits: u32,
    max_tx_power_w: f64,
    delta: f64,
    rule: KStarRule,
) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(MathError::domain("delta", delta, "0 < delta < 1"));
    }
    let ln_p = ln_p_max(blocklength, c1, packet_bits, max_tx_power_w, rule.variant)?;
    let ln_tolerance = (-delta).ln_1p();
    // p_max rounding to one leaves no admissible error probability.
    let ratio = if ln_p == 0.0 {
        f64::INFINITY
    } else {
        ln_tolerance / ln_p
    };
    let k = match rule.rounding {
        KRounding::Ceil => (ratio * (1.0 - fbl::FLOOR_GUARD)).ceil(),
        KRounding::Floor => (ratio * (1.0 + fbl::FLOOR_GUARD)).floor(),
    };
    // `as` saturates, mapping +inf to u64::MAX.
    Ok((k as u64).max(1))
}

/// [`k_star_with`] for a node of the given network.
pub fn k_star(params: &NetworkParams, blocklength: u32, c1: f64) -> Result<u64> {
    k_star_with(
        blocklength,
        c1,
        params.packet_bits,
        params.max_tx_power_w,
        params.delta,
        params.k_rule,
    )
}

/// `(k*, h*, p*)` of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityTriple {
    pub k_star: u64,
    pub h_star: f64,
    pub p_star: f64,
}

impl OptimalityTriple {
    /// `1 - p*`, computed without cancellation.
    pub fn success_prob(&self, delta: f64) -> f64 {
        -((-delta).ln_1p() / self.k_star as f64).exp_m1()
    }
}

/// Sampling period and error probability that make the PAoI constraint tight
/// with `k` reception opportunities.
pub fn recover_schedule(
    blocklength: u32,
    k: u64,
    alpha_s: f64,
    bandwidth_hz: f64,
    delta: f64,
) -> Result<OptimalityTriple> {
    if k == 0 {
        return Err(MathError::domain("k", 0.0, "k >= 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(MathError::domain("delta", delta, "0 < delta < 1"));
    }
    let delay = fbl::packet_delay(blocklength, bandwidth_hz)?;
    if alpha_s <= delay {
        return Err(MathError::NoPaoiBudget {
            m: blocklength,
            delay_s: delay,
            alpha_s,
        });
    }
    let kf = k as f64;
    Ok(OptimalityTriple {
        k_star: k,
        h_star: (alpha_s - delay) / kf,
        p_star: ((-delta).ln_1p() / kf).exp(),
    })
}

/// `Q^{-1}((1 - delta)^(1/k))`, accurate also when the argument is close to one.
pub fn q_inv_of_power_root(delta: f64, k: u64) -> Result<f64> {
    let e = (-delta).ln_1p() / k as f64;
    let p = e.exp();
    if p <= 0.5 {
        fbl::gaussian_q_inv(p)
    } else {
        fbl::gaussian_q_inv_of_complement(-e.exp_m1())
    }
}

/// Memo of [`q_inv_of_power_root`] for one `delta`.
#[derive(Debug, Clone, Default)]
pub struct QInvCache {
    delta: f64,
    small: Vec<Option<f64>>,
}

impl QInvCache {
    const SMALL: usize = 256;

    pub fn get(&mut self, delta: f64, k: u64) -> Result<f64> {
        if delta != self.delta || self.small.is_empty() {
            self.delta = delta;
            self.small = vec![None; Self::SMALL];
        }
        match self.small.get(k as usize) {
            Some(Some(v)) => Ok(*v),
            Some(None) => {
                let v = q_inv_of_power_root(delta, k)?;
                self.small[k as usize] = Some(v);
                Ok(v)
            }
            None => q_inv_of_power_root(delta, k),
        }
    }
}

/// Per-node objective term and scheduling load for `(m, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedNodeEval {
    pub w_star: f64,
    pub w_tx_star: f64,
    pub load: f64,
}

/// TDMA load `m k / (B alpha - m)` of one node.
pub fn scheduling_load(blocklength: u32, k: u64, alpha_s: f64, bandwidth_hz: f64) -> Result<f64> {
    let m = f64::from(blocklength);
    let window = bandwidth_hz * alpha_s;
    if window <= m {
        return Err(MathError::NoPaoiBudget {
            m: blocklength,
            delay_s: m / bandwidth_hz,
            alpha_s,
        });
    }
    Ok(m * k as f64 / (window - m))
}

/// Power `W*(m)` at the optimal schedule for `k` opportunities. Negative
/// transmit power is reported as computed but accounted as zero in `w_star`.
pub fn reduced_power(params: &NetworkParams, blocklength: u32, k: u64, c1: f64) -> Result<ReducedNodeEval> {
    reduced_power_cached(params, blocklength, k, c1, &mut QInvCache::default())
}

fn reduced_power_cached(
    params: &NetworkParams,
    blocklength: u32,
    k: u64,
    c1: f64,
    cache: &mut QInvCache,
) -> Result<ReducedNodeEval> {
    if k == 0 {
        return Err(MathError::domain("k", 0.0, "k >= 1"));
    }
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(MathError::domain("c1", c1, "positive and finite"));
    }
    let load = scheduling_load(blocklength, k, params.paoi_threshold_s, params.bandwidth_hz)?;
    let q_inv = cache.get(params.delta, k)?;
    let w_tx_star = c1 * fbl::power_exponent(q_inv, blocklength, params.packet_bits).exp_m1();
    Ok(ReducedNodeEval {
        w_star: (w_tx_star.max(0.0) + params.circuit_power_w) * load,
        w_tx_star,
        load,
    })
}

/// Everything the safety layer and the environment need about one node at one
/// blocklength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeEvaluation {
    pub blocklength: u32,
    /// `k*` as derived, possibly beyond [`K_CAP`].
    pub k_raw: u64,
    /// Schedule actually evaluated; `k` is clamped to `K_CAP + 1`.
    pub triple: OptimalityTriple,
    pub eval: ReducedNodeEval,
    /// `k_raw <= K_CAP` and `W_tx* <= W_max`.
    pub power_ok: bool,
    /// `W_max - W_tx*`.
    pub power_margin_w: f64,
}

/// Evaluates a node at blocklength `m` with `k` derived from `m` itself.
pub fn evaluate_node(params: &NetworkParams, blocklength: u32, c1: f64) -> Result<NodeEvaluation> {
    evaluate_node_cached(params, blocklength, c1, None, &mut QInvCache::default())
}

/// Evaluates a node at blocklength `m` under a given `k`.
pub fn evaluate_node_with_k(
    params: &NetworkParams,
    blocklength: u32,
    c1: f64,
    k_raw: u64,
) -> Result<NodeEvaluation> {
    evaluate_node_cached(params, blocklength, c1, Some(k_raw), &mut QInvCache::default())
}

/// [`evaluate_node`] or, with `k` given, [`evaluate_node_with_k`], sharing a
/// memo across calls.
pub fn evaluate_node_cached(
    params: &NetworkParams,
    blocklength: u32,
    c1: f64,
    k: Option<u64>,
    cache: &mut QInvCache,
) -> Result<NodeEvaluation> {
    let k_raw = match k {
        Some(k) => k,
        None => k_star(params, blocklength, c1)?,
    };
    let k = k_raw.clamp(1, K_CAP + 1);
    let triple = recover_schedule(
        blocklength,
        k,
        params.paoi_threshold_s,
        params.bandwidth_hz,
        params.delta,
    )?;
    let eval = reduced_power_cached(params, blocklength, k, c1, cache)?;
    let power_margin_w = params.max_tx_power_w - eval.w_tx_star;
    Ok(NodeEvaluation {
        blocklength,
        k_raw,
        triple,
        eval,
        power_ok: k_raw <= K_CAP && power_margin_w >= 0.0,
        power_margin_w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(variant: CapRule, rounding: KRounding) -> KStarRule {
        KStarRule { variant, rounding }
    }

    #[test]
    fn strong_channel_needs_one_opportunity() {
        let k = k_star_with(200, 1e-13, 100, 0.25, 0.99, KStarRule::default()).unwrap();
        assert_eq!(k, 1);
    }

    #[test]
    fn moderate_channel_ratio_between_two_and_three() {
        let ln_p = ln_p_max(100, 2e-3, 100, 0.25, CapRule::Scaled).unwrap();
        let ratio = (0.01f64).ln() / ln_p;
        assert!((ratio - 2.17).abs() < 0.01, "{ratio}");
        let floor = rule(CapRule::Scaled, KRounding::Floor);
        let ceil = rule(CapRule::Scaled, KRounding::Ceil);
        assert_eq!(k_star_with(100, 2e-3, 100, 0.25, 0.99, floor).unwrap(), 2);
        assert_eq!(k_star_with(100, 2e-3, 100, 0.25, 0.99, ceil).unwrap(), 3);
    }

    #[test]
    fn hopeless_channel_saturates() {
        let k = k_star_with(1, 1.0, 100, 0.25, 0.99, KStarRule::default()).unwrap();
        assert!(k > K_CAP);
    }

    #[test]
    fn recover_schedule_examples() {
        let t = recover_schedule(100, 1, 0.101, 1e5, 0.99).unwrap();
        assert!((t.h_star - 0.1).abs() < 1e-15);
        assert!((t.p_star - 0.01).abs() < 1e-15);
        let t = recover_schedule(100, 2, 0.101, 1e5, 0.99).unwrap();
        assert!((t.h_star - 0.05).abs() < 1e-15);
        assert!((t.p_star - 0.1).abs() < 1e-15);
        assert!(fbl::paoi_feasible(t.h_star, 100, t.p_star, 0.101, 0.99, 1e5).unwrap());
        assert!(matches!(
            recover_schedule(10_100, 1, 0.101, 1e5, 0.99),
            Err(MathError::NoPaoiBudget { .. })
        ));
    }

    #[test]
    fn reduced_power_examples() {
        let params = NetworkParams::default();
        let r = reduced_power(&params, 100, 1, 1e-13).unwrap();
        assert!((r.load - 0.01).abs() < 1e-15);
        assert!((r.w_tx_star - 1.5238e-13).abs() < 1e-16);
        assert!((r.w_star - 0.01 * (r.w_tx_star + 5e-3)).abs() < 1e-18);
        let r2 = reduced_power(&params, 100, 2, 1e-13).unwrap();
        assert!((r2.load - 0.02).abs() < 1e-15);
    }

    #[test]
    fn reduced_power_matches_node_power_at_optimum() {
        let params = NetworkParams::default();
        for (m, k, c1) in [(100, 1, 1e-13), (37, 3, 4e-6), (200, 7, 1e-9)] {
            let t = recover_schedule(m, k, 0.101, 1e5, 0.99).unwrap();
            let direct =
                fbl::node_power(t.h_star, m, t.p_star, c1, 100, 5e-3, 1e5).unwrap();
            let reduced = reduced_power(&params, m, k, c1).unwrap().w_star;
            assert!((direct - reduced).abs() <= 1e-12 * direct, "{direct} {reduced}");
        }
    }

    #[test]
    fn success_prob_is_complement() {
        let t = recover_schedule(100, 9000, 0.101, 1e5, 0.99).unwrap();
        let q = t.success_prob(0.99);
        assert!((q - (1.0 - t.p_star)).abs() < 1e-15);
    }

    #[test]
    fn evaluation_flags_caps() {
        let params = NetworkParams::default();
        let good = evaluate_node(&params, 100, 1e-13).unwrap();
        assert!(good.power_ok);
        assert_eq!(good.k_raw, 1);
        let bad = evaluate_node(&params, 1, 1e-6).unwrap();
        assert!(!bad.power_ok);
        assert_eq!(bad.triple.k_star, K_CAP + 1);
    }
}
