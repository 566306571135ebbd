use proptest::prelude::*;
use safe_wncs::safety::{advise, advise_bruteforce, any_feasible_action, is_feasible, KPolicy};
use safe_wncs::NetworkParams;

fn params(nodes: usize, alpha_ms: f64, beta: f64) -> NetworkParams {
    NetworkParams {
        nodes,
        max_blocklength: 15,
        packet_bits: 4,
        bandwidth_hz: 1e3,
        paoi_threshold_s: alpha_ms / 1e3,
        utilization_bound: beta,
        ..NetworkParams::default()
    }
}

fn instance() -> impl Strategy<Value = (NetworkParams, Vec<f64>, Vec<u32>)> {
    (2usize..=3, 16.0f64..60.0, 0.3f64..1.0).prop_flat_map(|(n, a, b)| {
        (
            Just(params(n, a, b)),
            prop::collection::vec((-6.0f64..-1.0).prop_map(|e| 10f64.powf(e)), n),
            prop::collection::vec(1u32..=15, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn advice_is_feasible_and_nearest((p, c1, student) in instance()) {
        if !any_feasible_action(&p, &c1).unwrap() {
            prop_assert!(advise(&p, &student, &c1, KPolicy::Recompute).is_err());
            return Ok(());
        }
        let a = advise(&p, &student, &c1, KPolicy::Recompute).unwrap();
        prop_assert!(is_feasible(&p, &a.action, &c1).unwrap().overall);
        let exact = advise_bruteforce(&p, &student, &c1).unwrap();
        prop_assert!(
            a.squared_distance <= 1.05 * exact.squared_distance + 1e-9,
            "advised {:?} at {} vs exhaustive {:?} at {}",
            a.action,
            a.squared_distance,
            exact.action,
            exact.squared_distance
        );
        prop_assert_eq!(a.intervened, a.action != student);
    }

    #[test]
    fn advice_is_idempotent((p, c1, student) in instance()) {
        prop_assume!(any_feasible_action(&p, &c1).unwrap());
        let once = advise(&p, &student, &c1, KPolicy::Recompute).unwrap();
        let twice = advise(&p, &once.action, &c1, KPolicy::Recompute).unwrap();
        prop_assert_eq!(&twice.action, &once.action);
        prop_assert!(!twice.intervened);
    }
}
