//! Finite-blocklength radio mathematics.
//!
//! Gaussian tail function and its inverse, the normal-approximation coding
//! rate, the transmit power required to push `L` bits through `m` channel uses,
//! duty-cycled node power, and the peak-AoI violation test for Bernoulli packet
//! errors.
//!
//! Everything here is a pure function of its arguments.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

use crate::error::MathError;

type Result<T> = std::result::Result<T, MathError>;

/// Relative slack applied to `(alpha - m/B) / h` before flooring. The
/// optimal schedule sits exactly on an integer, and the division must not
/// land one below it.
pub const FLOOR_GUARD: f64 = 1e-9;

/// Relative slack when comparing `p^n` against `1 - delta`.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Below this `erfc` argument the positive power series is used, above it the
/// continued fraction.
const ERFC_SPLIT: f64 = 1.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Inputs of the per-node radio formulas, in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioMathInputs {
    /// Blocklength in channel uses.
    pub blocklength: u32,
    /// Packet error probability, strictly inside (0, 1).
    pub packet_error_prob: f64,
    /// Payload size in bits.
    pub packet_bits: u32,
    /// Noise-to-gain ratio `sigma^2 / |g|` in Watts.
    pub c1: f64,
    pub bandwidth_hz: f64,
    pub sampling_period_s: f64,
    pub circuit_power_w: f64,
}

impl RadioMathInputs {
    pub fn validate(&self) -> Result<()> {
        if self.blocklength == 0 {
            return Err(MathError::domain("blocklength", 0.0, "m >= 1"));
        }
        check_probability("packet_error_prob", self.packet_error_prob)?;
        if self.packet_bits == 0 {
            return Err(MathError::domain("packet_bits", 0.0, "L >= 1"));
        }
        check_positive("c1", self.c1)?;
        check_positive("bandwidth_hz", self.bandwidth_hz)?;
        check_positive("sampling_period_s", self.sampling_period_s)?;
        if !(self.circuit_power_w >= 0.0 && self.circuit_power_w.is_finite()) {
            return Err(MathError::domain(
                "circuit_power_w",
                self.circuit_power_w,
                "finite and >= 0",
            ));
        }
        Ok(())
    }

    pub fn transmit_power(&self) -> Result<f64> {
        transmit_power(
            self.blocklength,
            self.packet_error_prob,
            self.c1,
            self.packet_bits,
        )
    }

    pub fn node_power(&self) -> Result<f64> {
        self.validate()?;
        node_power(
            self.sampling_period_s,
            self.blocklength,
            self.packet_error_prob,
            self.c1,
            self.packet_bits,
            self.circuit_power_w,
            self.bandwidth_hz,
        )
    }

    pub fn packet_delay(&self) -> Result<f64> {
        packet_delay(self.blocklength, self.bandwidth_hz)
    }
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(MathError::domain(name, p, "0 < p < 1"))
    }
}

fn check_positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(MathError::domain(name, x, "finite and > 0"))
    }
}

/// `erf(x) * exp(x^2) * sqrt(pi) / 2` via the all-positive series
/// `sum 2^n x^(2n+1) / (2n+1)!!`.
fn scaled_erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    sum
}

/// `erfc(x) * exp(x^2)` for `x >= ERFC_SPLIT`, by modified Lentz evaluation of
/// `1 / (x + (1/2) / (x + 1 / (x + (3/2) / (x + ...))))` scaled by `1/sqrt(pi)`.
fn scaled_erfc_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for n in 1..5000 {
        let a = f64::from(n) * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (f * PI.sqrt())
}

/// `exp(-x^2)` with the rounding error of `x^2` folded back in.
fn exp_neg_square(x: f64) -> f64 {
    let x2 = x * x;
    let low = x.mul_add(x, -x2);
    (-x2).exp() * (-low).exp()
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < ERFC_SPLIT {
        let erf = 2.0 / PI.sqrt() * (-x * x).exp() * scaled_erf_series(x);
        1.0 - erf
    } else {
        exp_neg_square(x) * scaled_erfc_fraction(x)
    }
}

/// Upper tail of the standard normal distribution, `P[Z > x]`.
pub fn gaussian_q(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(MathError::domain("x", x, "finite"));
    }
    Ok(0.5 * erfc(x * FRAC_1_SQRT_2))
}

/// Natural log of [`gaussian_q`], finite for every finite argument.
pub fn ln_gaussian_q(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(MathError::domain("x", x, "finite"));
    }
    let z = x * FRAC_1_SQRT_2;
    if z >= ERFC_SPLIT {
        Ok(-LN_2 - z * z + scaled_erfc_fraction(z).ln())
    } else if x >= 0.0 {
        Ok((0.5 * erfc(z)).ln())
    } else {
        // Q(x) = 1 - Q(-x)
        Ok((-0.5 * erfc(-z)).ln_1p())
    }
}

/// Acklam's rational approximation of the standard normal quantile
/// (relative error about 1.2e-9); only a starting point for refinement.
fn normal_quantile_estimate(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// `Q^{-1}(p)` for `p` in (0, 0.5]; Newton refinement on `ln Q` so that the
/// iteration stays well scaled deep into the tail.
fn upper_tail_inverse(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let ln_p = p.ln();
    let mut x = -normal_quantile_estimate(p);
    for _ in 0..3 {
        let ln_q = ln_gaussian_q(x).expect("finite iterate");
        let ln_pdf = -0.5 * x * x - LN_SQRT_2PI;
        let hazard = (ln_pdf - ln_q).exp();
        let step = (ln_q - ln_p) / hazard;
        x += step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Inverse of [`gaussian_q`].
pub fn gaussian_q_inv(p: f64) -> Result<f64> {
    check_probability("p", p)?;
    if p > 0.5 {
        Ok(-upper_tail_inverse(1.0 - p))
    } else {
        Ok(upper_tail_inverse(p))
    }
}

/// `Q^{-1}(1 - q)` given the complement `q = 1 - p` directly, which keeps
/// full precision when `p` is within a few ulps of one.
pub fn gaussian_q_inv_of_complement(q: f64) -> Result<f64> {
    check_probability("1 - p", q)?;
    Ok(-gaussian_q_inv(q)?)
}

/// Normal-approximation achievable rate in bits/s/Hz.
pub fn coding_rate(snr: f64, blocklength: u32, packet_error_prob: f64) -> Result<f64> {
    check_positive("snr", snr)?;
    if blocklength == 0 {
        return Err(MathError::domain("blocklength", 0.0, "m >= 1"));
    }
    let dispersion = 1.0 - (1.0 + snr).powi(-2);
    let penalty =
        (dispersion / f64::from(blocklength)).sqrt() * gaussian_q_inv(packet_error_prob)? / LN_2;
    Ok(snr.ln_1p() / LN_2 - penalty)
}

/// Exponent `Q^{-1}(p)/sqrt(m) + ln2 * L / m` of the transmit-power formula,
/// given `Q^{-1}(p)` already evaluated.
pub(crate) fn power_exponent(q_inv: f64, blocklength: u32, packet_bits: u32) -> f64 {
    let m = f64::from(blocklength);
    q_inv / m.sqrt() + LN_2 * f64::from(packet_bits) / m
}

/// Transmit power needed to carry `L` bits in `m` channel uses at error
/// probability `p`, under unit channel dispersion. May be negative for
/// `p > 0.5` with small `L/m`.
pub fn transmit_power(blocklength: u32, packet_error_prob: f64, c1: f64, packet_bits: u32) -> Result<f64> {
    if blocklength == 0 {
        return Err(MathError::domain("blocklength", 0.0, "m >= 1"));
    }
    if packet_bits == 0 {
        return Err(MathError::domain("packet_bits", 0.0, "L >= 1"));
    }
    check_positive("c1", c1)?;
    let q_inv = gaussian_q_inv(packet_error_prob)?;
    Ok(c1 * power_exponent(q_inv, blocklength, packet_bits).exp_m1())
}

/// Average power of a node transmitting `m` symbols every `h` seconds.
/// Negative transmit power is accounted as zero.
pub fn node_power(
    sampling_period_s: f64,
    blocklength: u32,
    packet_error_prob: f64,
    c1: f64,
    packet_bits: u32,
    circuit_power_w: f64,
    bandwidth_hz: f64,
) -> Result<f64> {
    check_positive("sampling_period_s", sampling_period_s)?;
    check_positive("bandwidth_hz", bandwidth_hz)?;
    let tx = transmit_power(blocklength, packet_error_prob, c1, packet_bits)?.max(0.0);
    Ok((tx + circuit_power_w) * f64::from(blocklength) / (sampling_period_s * bandwidth_hz))
}

/// Transmission delay of an `m`-symbol packet.
pub fn packet_delay(blocklength: u32, bandwidth_hz: f64) -> Result<f64> {
    if blocklength == 0 {
        return Err(MathError::domain("blocklength", 0.0, "m >= 1"));
    }
    check_positive("bandwidth_hz", bandwidth_hz)?;
    Ok(f64::from(blocklength) / bandwidth_hz)
}

/// Number of update-reception opportunities `floor((alpha - m/B) / h)`
/// inside the PAoI window.
pub fn reception_opportunities(
    sampling_period_s: f64,
    blocklength: u32,
    alpha_s: f64,
    bandwidth_hz: f64,
) -> Result<u64> {
    check_positive("sampling_period_s", sampling_period_s)?;
    let delay = packet_delay(blocklength, bandwidth_hz)?;
    if alpha_s <= delay {
        return Err(MathError::NoPaoiBudget {
            m: blocklength,
            delay_s: delay,
            alpha_s,
        });
    }
    let ratio = (alpha_s - delay) / sampling_period_s;
    Ok((ratio * (1.0 + FLOOR_GUARD)).floor() as u64)
}

/// Whether `p^floor((alpha - m/B)/h) <= 1 - delta`.
pub fn paoi_feasible(
    sampling_period_s: f64,
    blocklength: u32,
    packet_error_prob: f64,
    alpha_s: f64,
    delta: f64,
    bandwidth_hz: f64,
) -> Result<bool> {
    check_probability("packet_error_prob", packet_error_prob)?;
    check_probability("delta", delta)?;
    let n = reception_opportunities(sampling_period_s, blocklength, alpha_s, bandwidth_hz)?;
    let violation = packet_error_prob.powf(n as f64);
    Ok(violation <= (1.0 - delta) * (1.0 + PROBABILITY_TOLERANCE))
}

/// Thermal noise power over `bandwidth_hz` for a density given in dBm/Hz.
pub fn noise_power_w(noise_psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    let dbm = noise_psd_dbm_hz + 10.0 * bandwidth_hz.log10();
    10f64.powf((dbm - 30.0) / 10.0)
}
