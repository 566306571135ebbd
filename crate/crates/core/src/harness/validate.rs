//! Oracle suite: every closed form is checked against a search or a reference
//! evaluation that does not share its algebra.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{self, ChannelParams, FadingState};
use crate::error::Result;
use crate::fbl;
use crate::nn::{Activation, Head, QNetwork};
use crate::optimality::{self, oracle, CapRule, KStarRule, K_CAP};
use crate::params::NetworkParams;
use crate::safety::{self, KPolicy};

/// 10,000 random inputs with 50-digit reference values, regenerated by
/// `tests/fixtures/gen_closed_form.py`.
pub const CLOSED_FORM_FIXTURE: &str = include_str!("../../tests/fixtures/closed_form.csv");

/// Deliberate defects used to show the oracles can fail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Sabotage {
    #[default]
    None,
    /// Closed-form schedule built from `k* + 1`.
    FloorOffByOne,
    /// Projection scores candidates with the proposal's `k`.
    FrozenK,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed error in the check's own unit.
    pub worst: f64,
    pub detail: String,
}

impl OracleCheck {
    fn new(name: &str, cases: usize, failures: usize, worst: f64, detail: String) -> Self {
        OracleCheck {
            name: name.to_string(),
            passed: failures == 0 && cases > 0,
            cases,
            failures,
            worst,
            detail,
        }
    }
}

impl std::fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {}/{} failures, worst {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.failures,
            self.cases,
            self.worst,
        )?;
        let detail = self.detail.trim_end_matches([';', ' ']);
        if detail.is_empty() {
            Ok(())
        } else {
            write!(f, "; {detail}")
        }
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Transmit power, node power and the PAoI test against the reference rows,
/// 1e-10 relative.
pub fn check_closed_form(fixture: &str) -> Result<OracleCheck> {
    let mut cases = 0;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    let mut first_failure = String::new();
    for line in fixture.lines().skip(1).filter(|l| !l.is_empty()) {
        let v: Vec<&str> = line.split(',').collect();
        let f = |i: usize| v[i].parse::<f64>().unwrap_or(f64::NAN);
        let m = v[0].parse::<u32>().unwrap_or(0);
        let (p, c1, bits, wc, h, b, alpha, delta) =
            (f(1), f(2), f(3) as u32, f(4), f(5), f(6), f(7), f(8));
        let (tx_ref, node_ref, paoi_ref, ambiguous) = (f(9), f(10), v[11] == "1", v[12] == "1");
        cases += 1;
        let tx = fbl::transmit_power(m, p, c1, bits)?;
        let node = fbl::node_power(h, m, p, c1, bits, wc, b)?;
        let e = rel_err(tx, tx_ref).max(rel_err(node, node_ref));
        worst = worst.max(e);
        let mut bad = e > 1e-10;
        if ambiguous {
            skipped += 1;
        } else if alpha > m as f64 / b {
            bad |= fbl::paoi_feasible(h, m, p, alpha, delta, b)? != paoi_ref;
        }
        if bad {
            failures += 1;
            if first_failure.is_empty() {
                first_failure = format!("first failure: {line}");
            }
        }
    }
    Ok(OracleCheck::new(
        "closed_form",
        cases,
        failures,
        worst,
        format!("{skipped} PAoI rows too close to call; {first_failure}"),
    ))
}

/// `Q(Q^-1(p)) = p` to 1e-8 relative for log-uniform `p` in `[1e-300, 1)`.
pub fn check_q_round_trip(draws: usize, seed: u64) -> Result<OracleCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..draws {
        let p = if i % 4 == 3 {
            rng.random_range(0.5..1.0 - 1e-12)
        } else {
            log_uniform(&mut rng, 1e-300, 0.5)
        };
        let e = rel_err(fbl::gaussian_q(fbl::gaussian_q_inv(p)?)?, p);
        worst = worst.max(e);
        failures += usize::from(e > 1e-8);
    }
    Ok(OracleCheck::new("q_round_trip", draws, failures, worst, String::new()))
}

/// Random `(m, c1)` with `1 <= k* <= 6` whose admissible `p` interval spans
/// at least two grid cells.
fn schedule_instance<R: Rng + ?Sized>(
    params: &NetworkParams,
    grid: &oracle::Grid,
    rng: &mut R,
) -> Result<(u32, f64, u64)> {
    let p_cell = ((grid.p_max / grid.p_min).ln() / (grid.p_points - 1) as f64).exp();
    loop {
        let m = rng.random_range(1..=params.max_blocklength);
        let c1 = log_uniform(rng, 1e-15, 1e-2);
        let k = optimality::k_star(params, m, c1)?;
        if !(1..=6).contains(&k) {
            continue;
        }
        let ln_p_cap = optimality::ln_p_max(
            m,
            c1,
            params.packet_bits,
            params.max_tx_power_w,
            params.k_rule.variant,
        )?;
        let ln_p_star = (1.0 - params.delta).ln() / k as f64;
        if ln_p_star - ln_p_cap >= 2.0 * p_cell.ln() {
            return Ok((m, c1, k));
        }
    }
}

/// The grid minimiser of node power lies within one grid cell of the closed
/// form `(h*, p*)`.
pub fn check_schedule_grid(
    params: &NetworkParams,
    instances: usize,
    seed: u64,
    grid: oracle::Grid,
    sabotage: Sabotage,
) -> Result<OracleCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    let mut first_failure = String::new();
    for _ in 0..instances {
        let (m, c1, k) = schedule_instance(params, &grid, &mut rng)?;
        let k = if sabotage == Sabotage::FloorOffByOne { k + 1 } else { k };
        let t = optimality::recover_schedule(m, k, params.paoi_threshold_s, params.bandwidth_hz, params.delta)?;
        let opt = oracle::schedule_grid_bruteforce(params, m, c1, params.k_rule.variant, grid)?;
        let cells = match opt {
            Some(o) => {
                let dh = (o.h / t.h_star).ln().abs() / o.h_step.ln();
                let dp = (o.p / t.p_star).ln().abs() / o.p_step.ln();
                dh.max(dp)
            }
            None => f64::INFINITY,
        };
        worst = worst.max(cells);
        if cells > 1.0 + 1e-6 {
            failures += 1;
            if first_failure.is_empty() {
                first_failure = format!("first failure m={m} c1={c1:e} k={k}: {cells:.2} cells");
            }
        }
    }
    Ok(OracleCheck::new(
        "schedule_grid",
        instances,
        failures,
        worst,
        format!("distance in grid cells; {first_failure}"),
    ))
}

/// `k*` equals the smallest `k` found by trying `1, 2, ...` for `variant`.
pub fn check_k_star(
    params: &NetworkParams,
    instances: usize,
    seed: u64,
    variant: CapRule,
    sabotage: Sabotage,
) -> Result<OracleCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule = KStarRule {
        variant,
        ..params.k_rule
    };
    let mut failures = 0;
    let mut first_failure = String::new();
    let mut worst: f64 = 0.0;
    let table = oracle::ErrorProbTable::new(params.delta)?;
    for _ in 0..instances {
        let m = rng.random_range(1..=params.max_blocklength);
        let c1 = log_uniform(&mut rng, 1e-15, 1e-1);
        let mut k = optimality::k_star_with(m, c1, params.packet_bits, params.max_tx_power_w, params.delta, rule)?;
        if sabotage == Sabotage::FloorOffByOne && k <= K_CAP {
            k += 1;
        }
        let closed = (k <= K_CAP).then_some(k);
        let brute = oracle::smallest_k_with_table(&table, m, c1, params.packet_bits, params.max_tx_power_w, variant)?;
        if closed != brute {
            failures += 1;
            let gap = (closed.unwrap_or(K_CAP + 1) as f64 - brute.unwrap_or(K_CAP + 1) as f64).abs();
            worst = worst.max(gap);
            if first_failure.is_empty() {
                first_failure = format!("first failure m={m} c1={c1:e}: {closed:?} vs {brute:?}");
            }
        }
    }
    let name = match variant {
        CapRule::Scaled => "k_star_scaled",
        CapRule::Direct => "k_star_direct",
    };
    Ok(OracleCheck::new(name, instances, failures, worst, first_failure))
}

/// Two-node teacher instances with `M_th = 15`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionInstance {
    pub params: NetworkParams,
    pub c1: [f64; 2],
    pub student: [u32; 2],
    /// The per-node nearest feasible blocklengths break the load bound.
    pub coupled: bool,
}

fn nearest(set: &[u32], target: u32) -> u32 {
    let mut best = set[0];
    for &m in set {
        if m.abs_diff(target) < best.abs_diff(target) {
            best = m;
        }
    }
    best
}

/// `count` instances with a feasible joint action, at least `min_coupled`
/// of them coupled.
pub fn projection_instances(count: usize, min_coupled: usize, seed: u64) -> Result<Vec<ProjectionInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut coupled = 0;
    while out.len() < count {
        let params = NetworkParams {
            nodes: 2,
            max_blocklength: 15,
            packet_bits: 4,
            bandwidth_hz: 1e3,
            paoi_threshold_s: rng.random_range(16.0..60.0) / 1e3,
            utilization_bound: rng.random_range(0.3..1.0),
            ..NetworkParams::default()
        };
        let c1 = [log_uniform(&mut rng, 1e-6, 1e-1), log_uniform(&mut rng, 1e-6, 1e-1)];
        let student = [rng.random_range(1..=15), rng.random_range(1..=15)];
        if !safety::any_feasible_action(&params, &c1)? {
            continue;
        }
        let near: Vec<u32> = (0..2)
            .map(|i| Ok(nearest(&safety::feasible_blocklengths(&params, i, c1[i])?, student[i])))
            .collect::<Result<_>>()?;
        let is_coupled = !safety::is_feasible(&params, &near, &c1)?.sched_ok;
        if !is_coupled && out.len() - coupled >= count - min_coupled {
            continue;
        }
        coupled += usize::from(is_coupled);
        out.push(ProjectionInstance {
            params,
            c1,
            student,
            coupled: is_coupled,
        });
    }
    Ok(out)
}

/// `advise` is feasible and within `1.05x` of the exhaustive optimum, exactly
/// equal when the nodes do not interact.
pub fn check_projection(instances: &[ProjectionInstance], sabotage: Sabotage) -> Result<OracleCheck> {
    let policy = match sabotage {
        Sabotage::FrozenK => KPolicy::FrozenAtStudent,
        _ => KPolicy::Recompute,
    };
    let mut failures = 0;
    let mut worst: f64 = 1.0;
    let mut first_failure = String::new();
    for inst in instances {
        let exact = safety::advise_bruteforce(&inst.params, &inst.student, &inst.c1)?;
        let ratio = match safety::advise(&inst.params, &inst.student, &inst.c1, policy) {
            Ok(a) if safety::is_feasible(&inst.params, &a.action, &inst.c1)?.overall => {
                if exact.squared_distance == 0.0 {
                    if a.squared_distance == 0.0 { 1.0 } else { f64::INFINITY }
                } else {
                    a.squared_distance / exact.squared_distance
                }
            }
            _ => f64::INFINITY,
        };
        worst = worst.max(ratio);
        let bad = if inst.coupled { ratio > 1.05 } else { ratio != 1.0 };
        if bad {
            failures += 1;
            if first_failure.is_empty() {
                first_failure = format!(
                    "first failure student={:?} c1={:?} ratio={ratio}",
                    inst.student, inst.c1
                );
            }
        }
    }
    let coupled = instances.iter().filter(|i| i.coupled).count();
    Ok(OracleCheck::new(
        "projection",
        instances.len(),
        failures,
        worst,
        format!("{coupled} coupled; worst distance ratio; {first_failure}"),
    ))
}

/// Central differences of the summed TD loss against backpropagation on a
/// dueling network, at randomly chosen parameters.
pub fn check_gradients(nodes: usize, hidden: &[usize], actions: usize, probes: usize, seed: u64) -> Result<OracleCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = 3 * nodes + 3;
    let mut net = QNetwork::new(input, hidden, actions, Head::Dueling, Activation::LeakyRelu, &mut rng);
    let batch = 8;
    let x: Vec<f64> = (0..batch * input).map(|_| rng.random_range(-1.0..1.0)).collect();
    let acts: Vec<usize> = (0..batch).map(|_| rng.random_range(0..actions)).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-2.0..0.0)).collect();
    let (_, grads) = net.td_loss_gradient(&x, &acts, &targets)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..probes {
        let l = rng.random_range(0..net.layers.len());
        let in_bias = rng.random_bool(0.2);
        let (len, analytic) = if in_bias {
            let j = rng.random_range(0..net.layers[l].bias.len());
            (j, grads.layers[l].bias[j])
        } else {
            let j = rng.random_range(0..net.layers[l].weights.len());
            (j, grads.layers[l].weights[j])
        };
        let mut loss_at = |delta: f64| -> Result<f64> {
            let slot = if in_bias {
                &mut net.layers[l].bias[len]
            } else {
                &mut net.layers[l].weights[len]
            };
            let orig = *slot;
            *slot = orig + delta;
            let r = net.td_loss_gradient(&x, &acts, &targets).map(|(loss, _)| loss);
            let slot = if in_bias {
                &mut net.layers[l].bias[len]
            } else {
                &mut net.layers[l].weights[len]
            };
            *slot = orig;
            Ok(r?)
        };
        let numeric = (loss_at(h)? - loss_at(-h)?) / (2.0 * h);
        let e = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
        worst = worst.max(e);
        failures += usize::from(e >= 1e-4);
    }
    Ok(OracleCheck::new(
        "gradients",
        probes,
        failures,
        worst,
        "max relative error of central differences".into(),
    ))
}

/// Stationary fading power, lag-one correlation and shadowing moments.
pub fn check_channel(params: &ChannelParams, steps: usize, shadow_draws: usize, seed: u64) -> Result<OracleCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = FadingState {
        f: channel::cscg(&mut rng),
        rho: params.correlation,
    };
    let (mut power, mut cross) = (0.0, 0.0);
    for _ in 0..steps {
        let next = channel::step_fading(state, &mut rng);
        power += state.power();
        cross += (next.f * state.f.conj()).re;
        state = next;
    }
    let power = power / steps as f64;
    let corr = cross / steps as f64 / power;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..shadow_draws {
        let s = channel::init_node(params, 10.0, &mut rng)?.shadowing_db;
        sum += s;
        sum_sq += s * s;
    }
    let mean = sum / shadow_draws as f64;
    let std = (sum_sq / shadow_draws as f64 - mean * mean).sqrt();
    let errors = [
        (power - 1.0).abs() / 0.01,
        (corr - params.correlation).abs() / 0.01,
        mean.abs() / 0.05,
        (std - params.shadowing_std_db).abs() / 0.05,
    ];
    let failures = errors.iter().filter(|&&e| e > 1.0).count();
    Ok(OracleCheck::new(
        "channel_statistics",
        errors.len(),
        failures,
        errors.iter().fold(0.0, |a: f64, &b| a.max(b)),
        format!("power {power:.4}, lag-1 corr {corr:.4}, shadowing mean {mean:.4} dB std {std:.4} dB (worst as fraction of tolerance)"),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidateSizes {
    pub q_draws: usize,
    pub schedule_instances: usize,
    pub schedule_grid: usize,
    pub k_instances: usize,
    pub projection_instances: usize,
    pub gradient_probes: usize,
    pub fading_steps: usize,
    pub shadow_draws: usize,
}

impl Default for ValidateSizes {
    fn default() -> Self {
        ValidateSizes {
            q_draws: 10_000,
            schedule_instances: 50,
            schedule_grid: 1000,
            k_instances: 2000,
            projection_instances: 100,
            gradient_probes: 100,
            fading_steps: 1_000_000,
            shadow_draws: 200_000,
        }
    }
}

/// Every oracle on the configured network and channel.
pub fn validate(
    params: &NetworkParams,
    channel: &ChannelParams,
    sizes: ValidateSizes,
    seed: u64,
    sabotage: Sabotage,
) -> Result<Vec<OracleCheck>> {
    let grid = oracle::Grid {
        h_points: sizes.schedule_grid,
        p_points: sizes.schedule_grid,
        ..oracle::Grid::default()
    };
    let instances = projection_instances(sizes.projection_instances, sizes.projection_instances / 5, seed)?;
    Ok(vec![
        check_closed_form(CLOSED_FORM_FIXTURE)?,
        check_q_round_trip(sizes.q_draws, seed)?,
        check_schedule_grid(params, sizes.schedule_instances, seed, grid, sabotage)?,
        check_k_star(params, sizes.k_instances, seed, CapRule::Scaled, sabotage)?,
        check_k_star(params, sizes.k_instances, seed, CapRule::Direct, sabotage)?,
        check_projection(&instances, sabotage)?,
        check_gradients(10, &[32, 64, 300], params.max_blocklength as usize, sizes.gradient_probes, seed)?,
        check_channel(channel, sizes.fading_steps, sizes.shadow_draws, seed)?,
    ])
}
