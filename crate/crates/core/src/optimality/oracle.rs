//! Exhaustive references for the closed forms in the parent module.
//!
//! These search instead of solving; they are slow and exist so the closed
//! forms can be checked against something that does not share their algebra.

use crate::error::MathError;
use crate::fbl;
use crate::params::NetworkParams;

use super::{CapRule, K_CAP};

type Result<T> = std::result::Result<T, MathError>;

/// Log-spaced `(h, p)` search grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub h_points: usize,
    pub p_points: usize,
    pub p_min: f64,
    pub p_max: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            h_points: 2000,
            p_points: 2000,
            p_min: 1e-9,
            p_max: 0.5,
        }
    }
}

/// Best grid point found by [`schedule_grid_bruteforce`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    pub h: f64,
    pub p: f64,
    pub power_w: f64,
    /// Ratio between neighbouring `h` grid points.
    pub h_step: f64,
    /// Ratio between neighbouring `p` grid points.
    pub p_step: f64,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    // The optimum can sit exactly on an end point; keep those exact.
    v[0] = lo;
    v[n - 1] = hi;
    v
}

/// Minimises node power over the grid subject to the PAoI constraint, the
/// period bound `h <= alpha - m/B`, and the transmit-power cap of `variant`.
/// Returns `None` when no grid point is feasible.
///
/// The PAoI test here is a plain floor with no tolerance, independent of
/// [`fbl::paoi_feasible`].
pub fn schedule_grid_bruteforce(
    params: &NetworkParams,
    blocklength: u32,
    c1: f64,
    variant: CapRule,
    grid: Grid,
) -> Result<Option<GridOptimum>> {
    let m = f64::from(blocklength);
    let b = params.bandwidth_hz;
    let window = params.paoi_threshold_s - m / b;
    if window <= 0.0 {
        return Err(MathError::NoPaoiBudget {
            m: blocklength,
            delay_s: m / b,
            alpha_s: params.paoi_threshold_s,
        });
    }
    let cap = variant.effective_cap(params.max_tx_power_w, blocklength);
    let ln_tolerance = (1.0 - params.delta).ln();

    let hs = log_grid(m / b, window, grid.h_points);
    let ps = log_grid(grid.p_min, grid.p_max, grid.p_points);

    // Transmit power depends on p only.
    let mut tx = Vec::with_capacity(ps.len());
    for &p in &ps {
        tx.push(fbl::transmit_power(blocklength, p, c1, params.packet_bits)?);
    }
    let ln_ps: Vec<f64> = ps.iter().map(|p| p.ln()).collect();

    let mut best: Option<GridOptimum> = None;
    for &h in &hs {
        let n = (window / h).floor();
        if n < 1.0 {
            continue;
        }
        for (j, &p) in ps.iter().enumerate() {
            if tx[j] > cap || n * ln_ps[j] > ln_tolerance {
                continue;
            }
            let power = (tx[j].max(0.0) + params.circuit_power_w) * m / (h * b);
            if best.is_none_or(|o| power < o.power_w) {
                best = Some(GridOptimum {
                    h,
                    p,
                    power_w: power,
                    h_step: (window.ln() - (m / b).ln()) / (grid.h_points - 1) as f64,
                    p_step: (grid.p_max.ln() - grid.p_min.ln()) / (grid.p_points - 1) as f64,
                });
            }
        }
    }
    Ok(best.map(|mut o| {
        o.h_step = o.h_step.exp();
        o.p_step = o.p_step.exp();
        o
    }))
}

/// `Q^{-1}((1 - delta)^(1/k))` for `k = 1..=K_CAP`, computed by direct
/// inversion. Stops early once the root rounds to one.
#[derive(Debug, Clone)]
pub struct ErrorProbTable {
    delta: f64,
    q_inv: Vec<f64>,
}

impl ErrorProbTable {
    pub fn new(delta: f64) -> Result<Self> {
        let tolerance = 1.0 - delta;
        let mut q_inv = Vec::new();
        for k in 1..=K_CAP {
            let p = tolerance.powf(1.0 / k as f64);
            if p >= 1.0 {
                break;
            }
            q_inv.push(fbl::gaussian_q_inv(p)?);
        }
        Ok(ErrorProbTable { delta, q_inv })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Smallest `k` in `1..=K_CAP` whose schedule meets the transmit-power cap of
/// `variant`, found by trying each in turn. `None` if none does.
pub fn smallest_k_bruteforce(
    blocklength: u32,
    c1: f64,
    packet_bits: u32,
    max_tx_power_w: f64,
    delta: f64,
    variant: CapRule,
) -> Result<Option<u64>> {
    let table = ErrorProbTable::new(delta)?;
    smallest_k_with_table(&table, blocklength, c1, packet_bits, max_tx_power_w, variant)
}

/// [`smallest_k_bruteforce`] reusing a precomputed table.
pub fn smallest_k_with_table(
    table: &ErrorProbTable,
    blocklength: u32,
    c1: f64,
    packet_bits: u32,
    max_tx_power_w: f64,
    variant: CapRule,
) -> Result<Option<u64>> {
    if blocklength == 0 || packet_bits == 0 || !(c1 > 0.0) {
        // Surface the domain error the formula itself would raise.
        fbl::transmit_power(blocklength, 0.5, c1, packet_bits)?;
    }
    let cap = variant.effective_cap(max_tx_power_w, blocklength);
    let m = f64::from(blocklength);
    let rate_term = std::f64::consts::LN_2 * f64::from(packet_bits) / m;
    for (i, &q) in table.q_inv.iter().enumerate() {
        let tx = c1 * (q / m.sqrt() + rate_term).exp_m1();
        if tx <= cap {
            return Ok(Some(i as u64 + 1));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimality::{k_star_with, KRounding, KStarRule};

    #[test]
    fn smallest_k_agrees_on_reference_points() {
        for (m, c1) in [(100, 2e-3), (200, 1e-13), (50, 1e-4), (10, 1e-7)] {
            let brute = smallest_k_bruteforce(m, c1, 100, 0.25, 0.99, CapRule::Scaled)
                .unwrap()
                .unwrap_or(u64::MAX);
            let closed = k_star_with(m, c1, 100, 0.25, 0.99, KStarRule::default()).unwrap();
            let expected = if closed > K_CAP { u64::MAX } else { closed };
            assert_eq!(brute, expected, "m={m} c1={c1}");
        }
    }

    #[test]
    fn floor_rounding_undershoots_here() {
        let floor = KStarRule {
            variant: CapRule::Scaled,
            rounding: KRounding::Floor,
        };
        let brute = smallest_k_bruteforce(100, 2e-3, 100, 0.25, 0.99, CapRule::Scaled)
            .unwrap()
            .unwrap();
        assert_eq!(brute, 3);
        assert_eq!(k_star_with(100, 2e-3, 100, 0.25, 0.99, floor).unwrap(), 2);
    }

    #[test]
    fn grid_optimum_on_a_tight_window() {
        let params = NetworkParams::default();
        let grid = Grid {
            h_points: 400,
            p_points: 400,
            ..Grid::default()
        };
        let opt = schedule_grid_bruteforce(&params, 100, 1e-13, CapRule::Scaled, grid)
            .unwrap()
            .unwrap();
        // k* = 1: h close to the whole window, p close to 1 - delta.
        assert!((opt.h / 0.1 - 1.0).abs() <= opt.h_step - 1.0 + 1e-12);
        assert!((opt.p / 0.01).ln().abs() <= opt.p_step.ln() + 1e-12);
    }
}
