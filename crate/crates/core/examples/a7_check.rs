//! Dirichlet against state-constraint solutions, with and without a
//! potential that keeps the Hamiltonian's minimum at zero momentum.

use perforated_hj::cli::parse_config;
use perforated_hj::experiments::{a7_equivalence, Slack, Timings};

fn main() -> perforated_hj::Result<()> {
    let slack = Slack { a: 1.3455, b: 0.0, c: 0.0261 };
    for potential in ["zero", "bump"] {
        let text = format!("[hole]\ncenter = [0.5, 0.5]\nradius = 0.25\n[model]\npotential = {potential}\nm0 = 2\n");
        let cfg = parse_config(&text)?;
        let r = a7_equivalence(&cfg.scenario, 0.25, &slack, &mut Timings::default())?;
        println!(
            "{potential:>5}: a7 = {}, max |u - u_sc| = {:.3e} (tolerance {:.3e}) at {:?}",
            r.a7, r.max_difference, r.tolerance, r.location
        );
        if let Some(n) = r.notice {
            println!("       {n}");
        }
    }
    Ok(())
}
