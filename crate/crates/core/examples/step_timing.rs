// Per-frame decision latency against network size.

use safe_wncs::harness::timing::{linear_fit, time_steps};
use safe_wncs::harness::{PolicyKind, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = RunConfig::load(None, &["agent.batch_size=16".to_string()])?;
    let nodes = [2, 4, 6, 8];
    let rows = time_steps(&base, &nodes, &[PolicyKind::TeacherStudent, PolicyKind::Random], 5, 2)?;
    for r in &rows {
        println!("{:>16} N={:<3} {:.3} ms", r.policy.name(), r.nodes, r.mean_ms);
    }
    let ts: Vec<f64> = rows
        .iter()
        .filter(|r| r.policy == PolicyKind::TeacherStudent)
        .map(|r| r.mean_ms)
        .collect();
    let xs: Vec<f64> = nodes.iter().map(|&n| n as f64).collect();
    let (a, b, r2) = linear_fit(&xs, &ts);
    println!("teacher_student: {a:.3} + {b:.3} N ms, R^2 {r2:.3}");
    Ok(())
}
