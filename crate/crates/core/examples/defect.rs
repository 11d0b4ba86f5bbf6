//! A perforation with one missing hole near the origin, compared with the
//! fully perforated problem.

use perforated_hj::cli::parse_config;
use perforated_hj::experiments::{defect_experiment, Timings};

const CONFIG: &str = "
[geometry]
defects = [[0, 0], [-1, 0]]
[hole]
center = [0.5, 0.5]
radius = 0.25
[model]
potential = zero
m0 = 2
[data]
g = 0.8 * x1
b = 3.5
[numerics]
nodes_per_unit = 8
k = 2
";

fn main() -> perforated_hj::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let tables = cfg.scenario.tables(2)?;
    let r = defect_experiment(&cfg.scenario, 0.25, &tables, &mut Timings::default())?;
    println!("defects {:?}", r.defects);
    println!("error {:.5}, fitted C {:.4}, sandwich violation {:.2e}", r.error, r.fitted_c, r.sandwich_violation);
    let mut profile: Vec<_> = r.profile.iter().filter(|p| p.gap > 0.0).collect();
    profile.sort_by(|a, b| b.gap.total_cmp(&a.gap));
    println!("{} window nodes where the defects lower the value", profile.len());
    for p in profile.iter().take(5) {
        println!("  gap {:.5} at ({:.4}, {:.4})", p.gap, p.x[0], p.x[1]);
    }
    Ok(())
}
