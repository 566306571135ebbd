//! Action selection: epsilon-greedy over Q-values and the two baselines.

use rand::Rng;

use crate::params::NetworkParams;
use crate::safety::{self, KPolicy, SafetyFault};
use crate::error::Result;

/// Default cap on uniform redraws of the rule-based baseline.
pub const RULE_BASED_MAX_ATTEMPTS: usize = 1000;

/// Index of the largest Q-value, ties to the smallest index.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Greedy blocklength (1-based).
pub fn greedy(q: &[f64]) -> u32 {
    argmax(q) as u32 + 1
}

/// Epsilon-greedy blocklength in `1..=q.len()`. One uniform is always drawn
/// for the explore/exploit decision so the stream advances identically
/// whatever `q` holds.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> u32 {
    if rng.random::<f64>() < epsilon {
        rng.random_range(1..=q.len() as u32)
    } else {
        greedy(q)
    }
}

/// Independent uniform blocklength per node.
pub fn random_select<R: Rng + ?Sized>(nodes: usize, max_blocklength: u32, rng: &mut R) -> Vec<u32> {
    (0..nodes).map(|_| rng.random_range(1..=max_blocklength)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleBasedOutcome {
    pub action: Vec<u32>,
    /// Feasibility checks performed, counting the initial proposal.
    pub attempts: usize,
    /// The redraw budget ran out and the teacher projection was used.
    pub fell_back: bool,
    pub faults: Vec<SafetyFault>,
}

/// Keeps `proposal` if feasible, otherwise redraws uniform joint actions until
/// one passes or `max_attempts` checks have been spent, then projects the last
/// draw.
pub fn rule_based_select<R: Rng + ?Sized>(
    params: &NetworkParams,
    proposal: Vec<u32>,
    c1: &[f64],
    max_attempts: usize,
    rng: &mut R,
) -> Result<RuleBasedOutcome> {
    let mut action = proposal;
    let mut attempts = 0;
    loop {
        attempts += 1;
        if safety::is_feasible(params, &action, c1)?.overall {
            return Ok(RuleBasedOutcome {
                action,
                attempts,
                fell_back: false,
                faults: Vec::new(),
            });
        }
        if attempts >= max_attempts.max(1) {
            break;
        }
        action = random_select(action.len(), params.max_blocklength, rng);
    }
    let (advised, faults) = safety::advise_or_fallback(params, &action, c1, KPolicy::Recompute)?;
    Ok(RuleBasedOutcome {
        action: advised.action,
        attempts,
        fell_back: true,
        faults,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_breaks_ties_low() {
        let mut q = vec![0.0; 10];
        q[6] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(select_action(&q, 0.0, &mut rng), 7);
        q[2] = 5.0;
        q[8] = 5.0;
        assert_eq!(select_action(&q, 0.0, &mut rng), 3);
    }

    #[test]
    fn random_select_is_seeded() {
        let a = random_select(5, 200, &mut ChaCha8Rng::seed_from_u64(9));
        let b = random_select(5, 200, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.iter().all(|&m| (1..=200).contains(&m)));
    }

    #[test]
    fn feasible_proposal_is_kept() {
        let params = NetworkParams {
            nodes: 2,
            ..NetworkParams::default()
        };
        let c1 = [1e-6, 1e-6];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = rule_based_select(&params, vec![100, 100], &c1, 10, &mut rng).unwrap();
        assert_eq!(out.action, vec![100, 100]);
        assert_eq!(out.attempts, 1);
        assert!(!out.fell_back);
    }

    #[test]
    fn exhausted_budget_falls_back_to_teacher() {
        let params = NetworkParams {
            nodes: 2,
            ..NetworkParams::default()
        };
        let c1 = [1e-6, 1e-6];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Blocklength 1 cannot carry 100 bits, and one attempt allows no redraw.
        let out = rule_based_select(&params, vec![1, 1], &c1, 1, &mut rng).unwrap();
        assert!(out.fell_back);
        assert!(safety::is_feasible(&params, &out.action, &c1).unwrap().overall);
    }
}
