//! Optimal reception count, sampling period and error probability for each
//! blocklength of one node, next to the brute-force grid optimum.

use safe_wncs::optimality::oracle::{schedule_grid_bruteforce, Grid};
use safe_wncs::optimality::{evaluate_node, K_CAP};
use safe_wncs::NetworkParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = NetworkParams::default();
    let c1: f64 = std::env::args().nth(1).map_or(Ok(3e-3), |s| s.parse())?;
    println!("c1 = {c1:e} W");
    println!("{:>4} {:>6} {:>10} {:>12} {:>12} {:>8}", "m", "k*", "h* [ms]", "p*", "W* [W]", "ok");
    for m in (10..=params.max_blocklength).step_by(10) {
        let e = evaluate_node(&params, m, c1)?;
        let k = if e.k_raw > K_CAP { "> cap".to_string() } else { e.k_raw.to_string() };
        println!(
            "{:>4} {:>6} {:>10.4} {:>12.4e} {:>12.4e} {:>8}",
            m,
            k,
            1e3 * e.triple.h_star,
            e.triple.p_star,
            e.eval.w_star,
            e.power_ok
        );
    }

    // The closed form against a grid search at the blocklength with the
    // smallest k*, where the grid resolves neighbouring schedules best.
    let small = (1..=params.max_blocklength)
        .filter_map(|m| evaluate_node(&params, m, c1).ok().map(|e| (e.k_raw, m)))
        .min();
    if let Some((_, m)) = small {
        let e = evaluate_node(&params, m, c1)?;
        let grid = Grid {
            h_points: 500,
            p_points: 500,
            p_max: 0.99,
            ..Grid::default()
        };
        if let Some(g) = schedule_grid_bruteforce(&params, m, c1, params.k_rule.variant, grid)? {
            println!(
                "m = {m}: closed form h* {:.4} ms p* {:.3e} W* {:.4e}, grid h {:.4} ms p {:.3e} W {:.4e}",
                1e3 * e.triple.h_star,
                e.triple.p_star,
                e.eval.w_star,
                1e3 * g.h,
                g.p,
                g.power_w
            );
        }
    }
    Ok(())
}
