//! Teacher safety layer: feasibility checks and projection of a proposed
//! joint action onto the feasible set.
//!
//! A joint action is feasible when every blocklength lies in `[1, M_th]`, every
//! node meets the transmit-power cap at its own `k*`, and the summed TDMA load
//! stays within `beta`. The projection minimises the squared Euclidean
//! distance to the proposal:
//!
//! 1. move every node to its nearest power-feasible blocklength;
//! 2. while the load bound is violated, apply the node move that repairs it
//!    most cheaply (or, if no single move repairs it, the move with the best
//!    load reduction per unit of added distance);
//! 3. walk nodes back towards the proposal while the bound still holds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::MathError;
use crate::optimality::{self, NodeEvaluation, QInvCache};
use crate::params::NetworkParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SafetyError {
    #[error("node {node} has no feasible blocklength")]
    NodeInfeasible { node: usize },
    #[error("minimum achievable load {min_load} exceeds the bound {bound}")]
    GlobalInfeasible { min_load: f64, bound: f64 },
    #[error("action has {got} entries, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("exhaustive projection refused for {nodes} nodes x {max_blocklength} blocklengths")]
    TooLarge { nodes: usize, max_blocklength: u32 },
    #[error(transparent)]
    Math(#[from] MathError),
}

type Result<T> = std::result::Result<T, SafetyError>;

/// Which `k` the projection uses when scoring a candidate blocklength.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KPolicy {
    /// `k*` of the candidate itself.
    #[default]
    Recompute,
    /// `k*` of the proposal, held fixed while candidates are scored.
    FrozenAtStudent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub blocklength_ok: Vec<bool>,
    pub power_ok: Vec<bool>,
    /// `W_max - W_tx*` per node; negative when violated.
    pub power_margin_w: Vec<f64>,
    pub sched_ok: bool,
    pub load: f64,
    /// `beta - load`.
    pub load_margin: f64,
    pub overall: bool,
}

impl FeasibilityReport {
    pub fn power_violations(&self) -> usize {
        self.power_ok.iter().filter(|ok| !**ok).count()
    }

    /// Number of violated constraints, counting each node's power cap and
    /// blocklength range separately plus the load bound.
    pub fn violation_count(&self) -> usize {
        self.power_violations()
            + self.blocklength_ok.iter().filter(|ok| !**ok).count()
            + usize::from(!self.sched_ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisedAction {
    pub action: Vec<u32>,
    pub intervened: bool,
    pub squared_distance: f64,
}

/// A per-frame event that left a node without a safe choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyFault {
    pub node: Option<usize>,
    pub reason: String,
}

/// Node evaluations plus the report derived from them. `evals[i]` is `None`
/// when the blocklength is outside the domain of the formulas.
#[derive(Debug, Clone)]
pub struct Assessment {
    pub evals: Vec<Option<NodeEvaluation>>,
    pub report: FeasibilityReport,
}

pub fn squared_distance(a: &[u32], b: &[u32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

/// Evaluates `action` against every constraint, with `k` derived per node
/// from its own blocklength.
pub fn assess(params: &NetworkParams, action: &[u32], c1: &[f64]) -> Result<Assessment> {
    if action.len() != c1.len() {
        return Err(SafetyError::Shape {
            expected: c1.len(),
            got: action.len(),
        });
    }
    let n = action.len();
    let mut evals = Vec::with_capacity(n);
    let mut blocklength_ok = Vec::with_capacity(n);
    let mut power_ok = Vec::with_capacity(n);
    let mut power_margin_w = Vec::with_capacity(n);
    let mut load = 0.0;
    for (&m, &c) in action.iter().zip(c1) {
        blocklength_ok.push(m >= 1 && m <= params.max_blocklength);
        let eval = if m >= 1 && f64::from(m) < params.window_symbols() {
            Some(optimality::evaluate_node(params, m, c)?)
        } else {
            None
        };
        match eval {
            Some(e) => {
                power_ok.push(e.power_ok);
                power_margin_w.push(e.power_margin_w);
                load += e.eval.load;
            }
            None => {
                power_ok.push(false);
                power_margin_w.push(f64::NEG_INFINITY);
                load = f64::INFINITY;
            }
        }
        evals.push(eval);
    }
    let sched_ok = load <= params.utilization_bound;
    let overall = sched_ok && blocklength_ok.iter().all(|&b| b) && power_ok.iter().all(|&b| b);
    Ok(Assessment {
        evals,
        report: FeasibilityReport {
            blocklength_ok,
            power_ok,
            power_margin_w,
            sched_ok,
            load,
            load_margin: params.utilization_bound - load,
            overall,
        },
    })
}

pub fn is_feasible(params: &NetworkParams, action: &[u32], c1: &[f64]) -> Result<FeasibilityReport> {
    Ok(assess(params, action, c1)?.report)
}

/// Power-feasible blocklengths of one node with their loads, ascending in `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    pub blocklengths: Vec<u32>,
    pub loads: Vec<f64>,
}

impl FeasibleSet {
    fn nearest(&self, target: u32) -> usize {
        // Ascending order: the first minimiser is the smaller blocklength.
        let mut best = 0;
        for (j, &m) in self.blocklengths.iter().enumerate() {
            if m.abs_diff(target) < self.blocklengths[best].abs_diff(target) {
                best = j;
            }
        }
        best
    }

    fn min_load(&self) -> f64 {
        self.loads.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Feasible set of one node, scoring each candidate with `k` from
/// `k_override` or, if `None`, from the candidate itself.
fn feasible_set_with(
    params: &NetworkParams,
    c1: f64,
    k_override: Option<u64>,
) -> Result<FeasibleSet> {
    let mut set = FeasibleSet {
        blocklengths: Vec::new(),
        loads: Vec::new(),
    };
    let mut cache = QInvCache::default();
    for m in 1..=params.max_blocklength {
        let e = optimality::evaluate_node_cached(params, m, c1, k_override, &mut cache)?;
        if e.power_ok {
            set.blocklengths.push(m);
            set.loads.push(e.eval.load);
        }
    }
    Ok(set)
}

/// Whether any joint action is feasible on this channel: every node has a
/// power-feasible blocklength and the smallest loads fit the bound.
pub fn any_feasible_action(params: &NetworkParams, c1: &[f64]) -> Result<bool> {
    let mut load = 0.0;
    for &c in c1 {
        let set = feasible_set_with(params, c, None)?;
        if set.blocklengths.is_empty() {
            return Ok(false);
        }
        load += set.min_load();
    }
    Ok(load <= params.utilization_bound)
}

/// All `m` in `[1, M_th]` meeting the power cap at their own `k*`.
pub fn feasible_blocklengths(params: &NetworkParams, node: usize, c1: f64) -> Result<Vec<u32>> {
    let set = feasible_set_with(params, c1, None)?;
    if set.blocklengths.is_empty() {
        return Err(SafetyError::NodeInfeasible { node });
    }
    Ok(set.blocklengths)
}

/// Nearest feasible joint action to `student`. Feasible proposals are returned
/// unchanged.
pub fn advise(
    params: &NetworkParams,
    student: &[u32],
    c1: &[f64],
    policy: KPolicy,
) -> Result<AdvisedAction> {
    if is_feasible(params, student, c1)?.overall {
        return Ok(AdvisedAction {
            action: student.to_vec(),
            intervened: false,
            squared_distance: 0.0,
        });
    }
    let sets = candidate_sets(params, student, c1, policy)?;
    let action = project(params, student, &sets)?;
    Ok(AdvisedAction {
        squared_distance: squared_distance(&action, student),
        action,
        intervened: true,
    })
}

fn candidate_sets(
    params: &NetworkParams,
    student: &[u32],
    c1: &[f64],
    policy: KPolicy,
) -> Result<Vec<FeasibleSet>> {
    let mut sets = Vec::with_capacity(c1.len());
    for (i, &c) in c1.iter().enumerate() {
        let k_override = match policy {
            KPolicy::Recompute => None,
            KPolicy::FrozenAtStudent => {
                let m = student[i].clamp(1, params.max_blocklength);
                Some(optimality::k_star(params, m, c)?)
            }
        };
        let set = feasible_set_with(params, c, k_override)?;
        if set.blocklengths.is_empty() {
            return Err(SafetyError::NodeInfeasible { node: i });
        }
        sets.push(set);
    }
    Ok(sets)
}

fn project(params: &NetworkParams, student: &[u32], sets: &[FeasibleSet]) -> Result<Vec<u32>> {
    let beta = params.utilization_bound;
    let min_load: f64 = sets.iter().map(FeasibleSet::min_load).sum();
    if min_load > beta {
        return Err(SafetyError::GlobalInfeasible {
            min_load,
            bound: beta,
        });
    }
    let dist = |i: usize, j: usize| {
        let d = f64::from(sets[i].blocklengths[j]) - f64::from(student[i]);
        d * d
    };

    // Phase 1.
    let mut pick: Vec<usize> = sets
        .iter()
        .zip(student)
        .map(|(s, &m)| s.nearest(m))
        .collect();
    let mut total: f64 = pick.iter().enumerate().map(|(i, &j)| sets[i].loads[j]).sum();

    // Phase 2: best load reduction per unit of added distance.
    while total > beta {
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for (i, set) in sets.iter().enumerate() {
            let cur_load = set.loads[pick[i]];
            let cur_dist = dist(i, pick[i]);
            for j in 0..set.blocklengths.len() {
                let reduction = cur_load - set.loads[j];
                if reduction <= 0.0 {
                    continue;
                }
                // Never overshoot by more than needed when cheaper fixes exist:
                // the rate is computed on the part of the reduction that counts.
                let useful = reduction.min(total - beta + f64::EPSILON * total);
                let added = (dist(i, j) - cur_dist).max(1e-12);
                let rate = useful / added;
                if best.is_none_or(|(r, a, _, _)| rate > r || (rate == r && added < a)) {
                    best = Some((rate, added, i, j));
                }
            }
        }
        let Some((_, _, i, j)) = best else {
            return Err(SafetyError::GlobalInfeasible {
                min_load,
                bound: beta,
            });
        };
        total += sets[i].loads[j] - sets[i].loads[pick[i]];
        pick[i] = j;
    }

    // Phase 3: single moves towards the proposal, then pairwise exchanges
    // where one node gives up distance so another can get closer.
    let index: Vec<ClosestUnderLoad> = sets
        .iter()
        .enumerate()
        .map(|(i, s)| ClosestUnderLoad::new(s, |j| dist(i, j)))
        .collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, set) in sets.iter().enumerate() {
            let cur_load = set.loads[pick[i]];
            let cur_dist = dist(i, pick[i]);
            for j in 0..set.blocklengths.len() {
                let gain = cur_dist - dist(i, j);
                if gain <= 0.0 || total - cur_load + set.loads[j] > beta {
                    continue;
                }
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, i, j));
                }
            }
        }
        if let Some((_, i, j)) = best {
            total += sets[i].loads[j] - sets[i].loads[pick[i]];
            pick[i] = j;
            continue;
        }
        if !exchange(sets, &index, &mut pick, &mut total, beta, &dist) {
            break;
        }
    }

    // Local moves can stall when several nodes must shift together. An exact
    // search bounded by the distance found so far settles it when affordable.
    let found: f64 = pick.iter().enumerate().map(|(i, &j)| dist(i, j)).sum();
    if found > 0.0 {
        if let Some(better) = frontier_search(sets, beta, found, EXACT_REPAIR_BUDGET, &dist) {
            pick = better;
        }
    }

    Ok(pick
        .iter()
        .enumerate()
        .map(|(i, &j)| sets[i].blocklengths[j])
        .collect())
}

/// Candidate evaluations the exact search may spend before giving up.
const EXACT_REPAIR_BUDGET: usize = 2_000_000;

struct FrontierPoint {
    dist: f64,
    load: f64,
    parent: usize,
    choice: usize,
}

/// Node-by-node Pareto frontier of (distance, load) over partial actions,
/// keeping only points that can still meet the bound and that beat
/// `upper` strictly. Returns the picks of the closest feasible action, or
/// `None` if nothing beats `upper` or the budget runs out.
fn frontier_search(
    sets: &[FeasibleSet],
    beta: f64,
    upper: f64,
    budget: usize,
    dist: &impl Fn(usize, usize) -> f64,
) -> Option<Vec<usize>> {
    let n = sets.len();
    let mut rest = vec![0.0; n + 1];
    for i in (0..n).rev() {
        rest[i] = rest[i + 1] + sets[i].min_load();
    }
    let mut layers: Vec<Vec<FrontierPoint>> = Vec::with_capacity(n);
    let mut frontier = vec![FrontierPoint {
        dist: 0.0,
        load: 0.0,
        parent: 0,
        choice: 0,
    }];
    let mut work = 0usize;
    for (i, set) in sets.iter().enumerate() {
        work += frontier.len() * set.loads.len();
        if work > budget {
            return None;
        }
        let mut next = Vec::new();
        for (p, f) in frontier.iter().enumerate() {
            for (j, &l) in set.loads.iter().enumerate() {
                let d = f.dist + dist(i, j);
                let load = f.load + l;
                if d >= upper || load + rest[i + 1] > beta {
                    continue;
                }
                next.push(FrontierPoint {
                    dist: d,
                    load,
                    parent: p,
                    choice: j,
                });
            }
        }
        next.sort_by(|a, b| a.dist.total_cmp(&b.dist).then(a.load.total_cmp(&b.load)));
        let mut lowest = f64::INFINITY;
        next.retain(|f| {
            let keep = f.load < lowest;
            lowest = lowest.min(f.load);
            keep
        });
        if next.is_empty() {
            return None;
        }
        layers.push(std::mem::replace(&mut frontier, next));
    }
    let mut pick = vec![0; n];
    let mut at = 0;
    let mut point = &frontier[0];
    for i in (0..n).rev() {
        pick[i] = point.choice;
        at = point.parent;
        if i > 0 {
            point = &layers[i][at];
        }
    }
    debug_assert_eq!(at, 0);
    Some(pick)
}

/// Per node, the closest candidate to the proposal among those with load at
/// most a given level.
struct ClosestUnderLoad {
    /// Candidate loads in ascending order.
    sorted_loads: Vec<f64>,
    /// `best[t]`: closest candidate among `order[..=t]`.
    best: Vec<usize>,
}

impl ClosestUnderLoad {
    fn new(set: &FeasibleSet, dist: impl Fn(usize) -> f64) -> Self {
        let mut order: Vec<usize> = (0..set.loads.len()).collect();
        order.sort_by(|&a, &b| set.loads[a].total_cmp(&set.loads[b]).then(a.cmp(&b)));
        let sorted_loads = order.iter().map(|&j| set.loads[j]).collect();
        let mut best = Vec::with_capacity(order.len());
        let mut cur = order[0];
        for &j in &order {
            if dist(j) < dist(cur) || (dist(j) == dist(cur) && j < cur) {
                cur = j;
            }
            best.push(cur);
        }
        ClosestUnderLoad {
            sorted_loads,
            best,
        }
    }

    fn query(&self, max_load: f64) -> Option<usize> {
        let t = self.sorted_loads.partition_point(|&l| l <= max_load);
        (t > 0).then(|| self.best[t - 1])
    }
}

/// One improving pairwise exchange: node `i` moves to a candidate closer to
/// the proposal and node `l` takes the closest candidate that keeps the load
/// bound. Applies the best such exchange and reports whether one existed.
fn exchange(
    sets: &[FeasibleSet],
    index: &[ClosestUnderLoad],
    pick: &mut [usize],
    total: &mut f64,
    beta: f64,
    dist: &impl Fn(usize, usize) -> f64,
) -> bool {
    let mut best: Option<(f64, usize, usize, usize, usize)> = None;
    for (i, si) in sets.iter().enumerate() {
        let di = dist(i, pick[i]);
        for j in 0..si.blocklengths.len() {
            let gain_i = di - dist(i, j);
            if gain_i <= 0.0 {
                continue;
            }
            let after_i = *total - si.loads[pick[i]] + si.loads[j];
            for (l, sl) in sets.iter().enumerate() {
                if l == i {
                    continue;
                }
                let Some(r) = index[l].query(beta - (after_i - sl.loads[pick[l]])) else {
                    continue;
                };
                let net = gain_i - (dist(l, r) - dist(l, pick[l]));
                if net > 1e-9 && best.is_none_or(|(g, ..)| net > g) {
                    best = Some((net, i, j, l, r));
                }
            }
        }
    }
    let Some((_, i, j, l, r)) = best else {
        return false;
    };
    *total += sets[i].loads[j] - sets[i].loads[pick[i]] + sets[l].loads[r] - sets[l].loads[pick[l]];
    pick[i] = j;
    pick[l] = r;
    true
}

/// Largest instance accepted by [`advise_bruteforce`].
pub const BRUTEFORCE_MAX_NODES: usize = 3;
pub const BRUTEFORCE_MAX_BLOCKLENGTH: u32 = 30;

/// Exact projection by enumerating every joint action. Ties go to the
/// lexicographically smallest action.
pub fn advise_bruteforce(params: &NetworkParams, student: &[u32], c1: &[f64]) -> Result<AdvisedAction> {
    let n = c1.len();
    if n > BRUTEFORCE_MAX_NODES || params.max_blocklength > BRUTEFORCE_MAX_BLOCKLENGTH {
        return Err(SafetyError::TooLarge {
            nodes: n,
            max_blocklength: params.max_blocklength,
        });
    }
    if student.len() != n {
        return Err(SafetyError::Shape {
            expected: n,
            got: student.len(),
        });
    }
    let m_th = params.max_blocklength;
    let mut candidate = vec![1u32; n];
    let mut best: Option<(f64, Vec<u32>)> = None;
    'outer: loop {
        if is_feasible(params, &candidate, c1)?.overall {
            let d = squared_distance(&candidate, student);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, candidate.clone()));
            }
        }
        // Odometer increment, last position fastest, so enumeration is
        // lexicographic and strict improvement keeps the first minimiser.
        for pos in (0..n).rev() {
            if candidate[pos] < m_th {
                candidate[pos] += 1;
                continue 'outer;
            }
            candidate[pos] = 1;
        }
        break;
    }
    let Some((d, action)) = best else {
        return Err(SafetyError::GlobalInfeasible {
            min_load: f64::NAN,
            bound: params.utilization_bound,
        });
    };
    Ok(AdvisedAction {
        intervened: action != student,
        squared_distance: d,
        action,
    })
}

/// [`advise`] that never fails on infeasible channels. A node without a
/// feasible blocklength is pinned to its minimum-power blocklength and left
/// out of the load repair; if the remaining nodes still cannot meet the load
/// bound each takes its minimum-load choice. Every such event is reported as
/// a fault.
pub fn advise_or_fallback(
    params: &NetworkParams,
    student: &[u32],
    c1: &[f64],
    policy: KPolicy,
) -> Result<(AdvisedAction, Vec<SafetyFault>)> {
    match advise(params, student, c1, policy) {
        Ok(a) => return Ok((a, Vec::new())),
        Err(SafetyError::NodeInfeasible { .. } | SafetyError::GlobalInfeasible { .. }) => {}
        Err(e) => return Err(e),
    }
    let mut faults = Vec::new();
    let mut action = student.to_vec();
    let mut live = Vec::new();
    let mut sets = Vec::new();
    for (i, &c) in c1.iter().enumerate() {
        let set = feasible_set_with(params, c, None)?;
        if set.blocklengths.is_empty() {
            let m = min_power_blocklength(params, c)?;
            faults.push(SafetyFault {
                node: Some(i),
                reason: format!("no feasible blocklength; pinned to minimum-power m = {m}"),
            });
            action[i] = m;
        } else {
            live.push(i);
            sets.push(set);
        }
    }
    let live_student: Vec<u32> = live.iter().map(|&i| student[i]).collect();
    let live_action = match project(params, &live_student, &sets) {
        Ok(a) => a,
        Err(SafetyError::GlobalInfeasible { min_load, bound }) => {
            faults.push(SafetyFault {
                node: None,
                reason: format!(
                    "minimum load {min_load} exceeds bound {bound}; using minimum-load action"
                ),
            });
            sets.iter()
                .map(|s| {
                    let j = (0..s.loads.len())
                        .min_by(|&a, &b| s.loads[a].total_cmp(&s.loads[b]))
                        .expect("non-empty set");
                    s.blocklengths[j]
                })
                .collect()
        }
        Err(e) => return Err(e),
    };
    for (&i, m) in live.iter().zip(live_action) {
        action[i] = m;
    }
    Ok((
        AdvisedAction {
            squared_distance: squared_distance(&action, student),
            intervened: action != student,
            action,
        },
        faults,
    ))
}

/// Blocklength minimising `W*` for a node, ties to the smaller blocklength.
pub fn min_power_blocklength(params: &NetworkParams, c1: f64) -> Result<u32> {
    let mut best = (f64::INFINITY, 1);
    let mut cache = QInvCache::default();
    for m in 1..=params.max_blocklength {
        let w = optimality::evaluate_node_cached(params, m, c1, None, &mut cache)?.eval.w_star;
        if w < best.0 {
            best = (w, m);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params(m_th: u32, window: f64, beta: f64) -> NetworkParams {
        NetworkParams {
            nodes: 2,
            max_blocklength: m_th,
            bandwidth_hz: 1e3,
            paoi_threshold_s: window / 1e3,
            utilization_bound: beta,
            packet_bits: 4,
            ..Default::default()
        }
    }

    #[test]
    fn strong_channel_feasible_set() {
        let params = NetworkParams::default();
        let set = feasible_blocklengths(&params, 0, 1e-13).unwrap();
        // m = 1 and 2 would need more than 70 dB above the noise floor.
        assert_eq!(*set.last().unwrap(), 200);
        assert!(!set.contains(&1));
        assert!(set.windows(2).all(|w| w[1] == w[0] + 1));
    }

    #[test]
    fn zero_cap_is_node_infeasible() {
        let params = NetworkParams {
            max_tx_power_w: 0.0,
            ..Default::default()
        };
        assert_eq!(
            feasible_blocklengths(&params, 4, 1e-13),
            Err(SafetyError::NodeInfeasible { node: 4 })
        );
    }

    #[test]
    fn uniform_half_load_fleet_is_schedulable() {
        let params = NetworkParams::default();
        let report = is_feasible(&params, &[100; 50], &[1e-13; 50]).unwrap();
        assert!((report.load - 0.5).abs() < 1e-12);
        assert!(report.sched_ok && report.overall);
    }

    #[test]
    fn out_of_range_blocklength_flagged() {
        let params = NetworkParams::default();
        let report = is_feasible(&params, &[100, 201], &[1e-13; 2]).unwrap();
        assert_eq!(report.blocklength_ok, vec![true, false]);
        assert!(!report.overall);
    }

    #[test]
    fn feasible_proposal_passes_through() {
        let params = NetworkParams::default();
        let a = advise(&params, &[100, 120], &[1e-13; 2], KPolicy::Recompute).unwrap();
        assert_eq!(a.action, vec![100, 120]);
        assert!(!a.intervened);
        assert_eq!(a.squared_distance, 0.0);
    }

    #[test]
    fn single_node_interval_projection() {
        // A long PAoI window keeps loads negligible, so only power binds.
        let params = NetworkParams {
            paoi_threshold_s: 1000.0,
            ..Default::default()
        };
        // Find a channel whose feasible set starts at 50.
        let mut lo = 1e-13f64;
        let mut hi = 1.0f64;
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            let first = feasible_blocklengths(&params, 0, mid).map(|s| s[0]).unwrap_or(u32::MAX);
            if first <= 50 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let set = feasible_blocklengths(&params, 0, lo).unwrap();
        assert_eq!(set[0], 50);
        let a = advise(&params, &[30], &[lo], KPolicy::Recompute).unwrap();
        assert_eq!(a.action, vec![50]);
        assert_eq!(a.squared_distance, 400.0);
        let b = advise_bruteforce(
            &NetworkParams {
                max_blocklength: 30,
                ..params.clone()
            },
            &[30],
            &[1e-13],
        )
        .unwrap();
        assert!(!b.intervened);
    }

    #[test]
    fn coupled_pair_matches_exhaustive_search() {
        let params = small_params(15, 20.0, 0.9);
        let c1 = [1e-4, 1e-4];
        let student = [15, 15];
        let fast = advise(&params, &student, &c1, KPolicy::Recompute).unwrap();
        let exact = advise_bruteforce(&params, &student, &c1).unwrap();
        assert!(is_feasible(&params, &fast.action, &c1).unwrap().overall);
        assert!(fast.intervened);
        assert!(fast.squared_distance <= 1.05 * exact.squared_distance + 1e-12);
    }

    #[test]
    fn advise_is_idempotent() {
        let params = small_params(15, 20.0, 0.9);
        let c1 = [1e-4, 3e-4];
        let once = advise(&params, &[2, 15], &c1, KPolicy::Recompute).unwrap();
        let twice = advise(&params, &once.action, &c1, KPolicy::Recompute).unwrap();
        assert_eq!(once.action, twice.action);
        assert!(!twice.intervened);
    }

    #[test]
    fn bruteforce_refuses_large_instances() {
        let params = NetworkParams::default();
        assert!(matches!(
            advise_bruteforce(&params, &[1, 1], &[1e-13; 2]),
            Err(SafetyError::TooLarge { .. })
        ));
    }

    #[test]
    fn fallback_pins_dead_node() {
        let params = NetworkParams::default();
        let (a, faults) =
            advise_or_fallback(&params, &[100, 100], &[1e-13, 1e3], KPolicy::Recompute).unwrap();
        assert_eq!(faults.len(), 1);
        assert_eq!(faults[0].node, Some(1));
        assert_eq!(a.action[0], 100);
    }
}
