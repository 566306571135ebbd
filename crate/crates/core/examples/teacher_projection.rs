//! Unsafe joint proposals checked against the constraints and projected onto
//! the nearest safe action. The instances are small two-node networks where
//! fixing each node on its own is not enough to meet the load bound.

use safe_wncs::harness::validate::projection_instances;
use safe_wncs::safety::{advise, advise_bruteforce, is_feasible, KPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instances = projection_instances(40, 5, 11)?;
    for inst in instances.iter().filter(|i| i.coupled).take(5) {
        let (params, c1) = (&inst.params, &inst.c1[..]);
        let before = is_feasible(params, &inst.student, c1)?;
        let advised = advise(params, &inst.student, c1, KPolicy::Recompute)?;
        let after = is_feasible(params, &advised.action, c1)?;
        let exact = advise_bruteforce(params, &inst.student, c1)?;
        println!(
            "proposal {:?} (power ok {:?}, load {:.3} > {:.3}) -> {:?} (load {:.3}), distance {} vs exhaustive {}",
            inst.student,
            before.power_ok,
            before.load,
            params.utilization_bound,
            advised.action,
            after.load,
            advised.squared_distance,
            exact.squared_distance
        );
    }
    Ok(())
}
