//! Value and optimal exit path from the origin on the reference
//! configuration. Runs the full reference sweep (about a minute).

use perforated_hj::cli::cache::TableCache;
use perforated_hj::experiments::{optimality_case, Scenario, Slack, Timings};

fn main() -> perforated_hj::Result<()> {
    let scn = Scenario::reference();
    let cache = TableCache::new(std::env::temp_dir().join("hjlab-example-cache"));
    let tables = cache.tables(&scn, 8)?;
    let slack = Slack { a: 1.3455, b: 0.0, c: 0.0261 };
    let r = optimality_case(&scn, &Scenario::reference_epsilons(), &tables, &slack, &mut Timings::default())?;
    for w in &r.rows {
        println!(
            "eps = {:<7} u(0, T) = {:.5}  eps/8 = {:.5}  exit {:?} at t = {:.4}",
            w.epsilon,
            w.value,
            w.epsilon / 8.0,
            w.exit,
            w.exit_time
        );
    }
    println!("limit u(0, T) = {:.3e}", r.limit_value);
    Ok(())
}
