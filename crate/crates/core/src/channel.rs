//! Large-scale path loss with log-normal shadowing, and first-order
//! Gauss-Markov small-scale fading.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::MathError;
use crate::fbl;
use crate::rng::{stream_rng, Stream, StreamRng};

type Result<T> = std::result::Result<T, MathError>;

/// Fading power below which an innovation is redrawn.
pub const DEGENERATE_FADING_POWER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Lag-one correlation `rho` of the fading process.
    pub correlation: f64,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
    /// Path loss at 1 m, dB.
    pub path_loss_ref_db: f64,
    pub path_loss_exponent: f64,
    pub shadowing_std_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            correlation: 0.6,
            cell_radius_m: 50.0,
            min_distance_m: 1.0,
            path_loss_ref_db: 35.3,
            path_loss_exponent: 3.76,
            shadowing_std_db: 4.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self, section: &str) -> std::result::Result<(), crate::error::ConfigError> {
        use crate::error::ConfigError;
        let key = |k: &str| format!("{section}.{k}");
        if !(0.0..=1.0).contains(&self.correlation) {
            return Err(ConfigError::invalid(&key("correlation"), "must lie in [0, 1]"));
        }
        if !(self.min_distance_m > 0.0 && self.min_distance_m <= self.cell_radius_m) {
            return Err(ConfigError::invalid(
                &key("min_distance_m"),
                "must be positive and at most cell_radius_m",
            ));
        }
        if !self.cell_radius_m.is_finite() {
            return Err(ConfigError::invalid(&key("cell_radius_m"), "must be finite"));
        }
        if !(self.shadowing_std_db >= 0.0 && self.shadowing_std_db.is_finite()) {
            return Err(ConfigError::invalid(&key("shadowing_std_db"), "must be >= 0"));
        }
        if !(self.path_loss_ref_db.is_finite() && self.path_loss_exponent.is_finite()) {
            return Err(ConfigError::invalid(&key("path_loss_exponent"), "must be finite"));
        }
        Ok(())
    }

    pub fn path_loss_db(&self, distance_m: f64) -> f64 {
        self.path_loss_ref_db + 10.0 * self.path_loss_exponent * distance_m.log10()
    }

    /// Area-uniform distance inside the cell, clamped below at the minimum.
    pub fn sample_distance<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        (self.cell_radius_m * u.sqrt()).max(self.min_distance_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleProfile {
    pub distance_m: f64,
    pub path_loss_db: f64,
    pub shadowing_db: f64,
    /// `10^(-(PL + S)/10)`.
    pub zeta_linear: f64,
}

/// Profile with a given shadowing value.
pub fn large_scale_profile(
    params: &ChannelParams,
    distance_m: f64,
    shadowing_db: f64,
) -> Result<LargeScaleProfile> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(MathError::domain("distance_m", distance_m, "d > 0"));
    }
    let path_loss_db = params.path_loss_db(distance_m);
    Ok(LargeScaleProfile {
        distance_m,
        path_loss_db,
        shadowing_db,
        zeta_linear: 10f64.powf(-(path_loss_db + shadowing_db) / 10.0),
    })
}

/// Profile with shadowing drawn from `N(0, std^2)` in dB.
pub fn init_node<R: Rng + ?Sized>(
    params: &ChannelParams,
    distance_m: f64,
    rng: &mut R,
) -> Result<LargeScaleProfile> {
    let shadow = Normal::new(0.0, params.shadowing_std_db)
        .map_err(|_| MathError::domain("shadowing_std_db", params.shadowing_std_db, ">= 0"))?
        .sample(rng);
    large_scale_profile(params, distance_m, shadow)
}

/// Unit-variance circularly symmetric complex Gaussian draw.
pub fn cscg<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingState {
    pub f: Complex64,
    pub rho: f64,
}

impl FadingState {
    pub fn power(&self) -> f64 {
        self.f.norm_sqr()
    }
}

/// `f' = rho f + sqrt(1 - rho^2) e`. A draw leaving `|f'|^2` below
/// [`DEGENERATE_FADING_POWER`] is discarded and the innovation redrawn.
pub fn step_fading<R: Rng + ?Sized>(state: FadingState, rng: &mut R) -> FadingState {
    let scale = (1.0 - state.rho * state.rho).max(0.0).sqrt();
    loop {
        let f = state.f * state.rho + cscg(rng) * scale;
        // With rho = 1 the state cannot change, whatever its power.
        if f.norm_sqr() >= DEGENERATE_FADING_POWER || scale == 0.0 {
            return FadingState { f, rho: state.rho };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSnapshot {
    /// Linear gains `|f|^2 zeta`.
    pub gains: Vec<f64>,
    /// `sigma^2 / g`, Watts.
    pub c1: Vec<f64>,
}

pub fn snapshot(
    profiles: &[LargeScaleProfile],
    fading: &[FadingState],
    bandwidth_hz: f64,
    noise_psd_dbm_hz: f64,
) -> Result<ChannelSnapshot> {
    if profiles.len() != fading.len() {
        return Err(MathError::domain(
            "fading.len()",
            fading.len() as f64,
            "one fading state per profile",
        ));
    }
    let noise = fbl::noise_power_w(noise_psd_dbm_hz, bandwidth_hz);
    let mut gains = Vec::with_capacity(profiles.len());
    let mut c1 = Vec::with_capacity(profiles.len());
    for (node, (p, s)) in profiles.iter().zip(fading).enumerate() {
        let g = s.power() * p.zeta_linear;
        let c = noise / g;
        if !(g > 0.0 && c.is_finite()) {
            return Err(MathError::DegenerateChannel { node, gain: g });
        }
        gains.push(g);
        c1.push(c);
    }
    Ok(ChannelSnapshot { gains, c1 })
}

/// The channel of one run: a fixed topology plus per-node fading processes,
/// each driven by its own random stream.
#[derive(Debug, Clone)]
pub struct Channel {
    profiles: Vec<LargeScaleProfile>,
    states: Vec<FadingState>,
    rngs: Vec<StreamRng>,
    bandwidth_hz: f64,
    noise_psd_dbm_hz: f64,
}

impl Channel {
    /// Draws topology and shadowing from `seed`; fading of node `i` follows
    /// `fading_stream(i)` and starts from its stationary distribution.
    pub fn new(
        params: &ChannelParams,
        nodes: usize,
        seed: u64,
        fading_stream: fn(usize) -> Stream,
        bandwidth_hz: f64,
        noise_psd_dbm_hz: f64,
    ) -> Result<Self> {
        let mut topo = stream_rng(seed, Stream::Topology);
        let mut shadow = stream_rng(seed, Stream::Shadowing);
        let mut profiles = Vec::with_capacity(nodes);
        for _ in 0..nodes {
            let d = params.sample_distance(&mut topo);
            profiles.push(init_node(params, d, &mut shadow)?);
        }
        let mut rngs: Vec<StreamRng> = (0..nodes).map(|i| stream_rng(seed, fading_stream(i))).collect();
        let states = rngs
            .iter_mut()
            .map(|r| {
                let mut f = cscg(r);
                while f.norm_sqr() < DEGENERATE_FADING_POWER {
                    f = cscg(r);
                }
                FadingState {
                    f,
                    rho: params.correlation,
                }
            })
            .collect();
        Ok(Channel {
            profiles,
            states,
            rngs,
            bandwidth_hz,
            noise_psd_dbm_hz,
        })
    }

    pub fn profiles(&self) -> &[LargeScaleProfile] {
        &self.profiles
    }

    pub fn snapshot(&self) -> Result<ChannelSnapshot> {
        snapshot(
            &self.profiles,
            &self.states,
            self.bandwidth_hz,
            self.noise_psd_dbm_hz,
        )
    }

    /// Advances every fading process by one frame.
    pub fn advance(&mut self) {
        for (s, r) in self.states.iter_mut().zip(&mut self.rngs) {
            *s = step_fading(*s, r);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn path_loss_reference_points() {
        let p = ChannelParams::default();
        let a = large_scale_profile(&p, 1.0, 0.0).unwrap();
        assert!((a.path_loss_db - 35.3).abs() < 1e-12);
        let b = large_scale_profile(&p, 10.0, 0.0).unwrap();
        assert!((b.path_loss_db - 72.9).abs() < 1e-12);
        assert!((a.zeta_linear - 10f64.powf(-3.53)).abs() < 1e-18);
        assert!(large_scale_profile(&p, 0.0, 0.0).is_err());
    }

    #[test]
    fn unit_fading_reference_snapshot() {
        let p = ChannelParams::default();
        let prof = large_scale_profile(&p, 1.0, 0.0).unwrap();
        let st = FadingState {
            f: Complex64::new(1.0, 0.0),
            rho: 0.6,
        };
        let s = snapshot(&[prof], &[st], 1e5, -174.0).unwrap();
        assert!((s.gains[0] / 10f64.powf(-3.53) - 1.0).abs() < 1e-12);
        assert!((s.c1[0] / 1.348e-12 - 1.0).abs() < 1e-3, "{}", s.c1[0]);
    }

    #[test]
    fn zero_gain_is_degenerate() {
        let p = ChannelParams::default();
        let prof = large_scale_profile(&p, 1.0, 0.0).unwrap();
        let st = FadingState {
            f: Complex64::new(0.0, 0.0),
            rho: 0.6,
        };
        assert!(matches!(
            snapshot(&[prof], &[st], 1e5, -174.0),
            Err(MathError::DegenerateChannel { node: 0, .. })
        ));
    }

    #[test]
    fn degenerate_recursions() {
        let mut rng = StreamRng::seed_from_u64(3);
        let s = FadingState {
            f: Complex64::new(0.3, -0.2),
            rho: 1.0,
        };
        assert_eq!(step_fading(s, &mut rng).f, s.f);
        let mut a = StreamRng::seed_from_u64(4);
        let mut b = StreamRng::seed_from_u64(4);
        let s0 = FadingState { rho: 0.0, ..s };
        let fresh = step_fading(s0, &mut a).f;
        assert_eq!(fresh, cscg(&mut b));
    }

    #[test]
    fn distances_stay_in_cell() {
        let p = ChannelParams::default();
        let mut rng = StreamRng::seed_from_u64(9);
        for _ in 0..10_000 {
            let d = p.sample_distance(&mut rng);
            assert!((1.0..=50.0).contains(&d));
        }
    }

    #[test]
    fn channel_is_reproducible() {
        let p = ChannelParams::default();
        let mut a = Channel::new(&p, 5, 11, Stream::Fading, 1e5, -174.0).unwrap();
        let mut b = Channel::new(&p, 5, 11, Stream::Fading, 1e5, -174.0).unwrap();
        for _ in 0..50 {
            assert_eq!(a.snapshot().unwrap(), b.snapshot().unwrap());
            a.advance();
            b.advance();
        }
        let t = Channel::new(&p, 5, 11, Stream::TestFading, 1e5, -174.0).unwrap();
        assert_eq!(t.profiles(), a.profiles());
        assert_ne!(t.snapshot().unwrap(), b.snapshot().unwrap());
    }
}
