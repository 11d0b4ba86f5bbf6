//! Vanishing holes: radius shrinking linearly with epsilon, compared with
//! the hole-free problem.

use perforated_hj::cli::parse_config;
use perforated_hj::experiments::{diluted_experiment, Timings};
use perforated_hj::geometry::UnitCellGeometry;

const CONFIG: &str = "
[geometry]
dilution = linear
[hole]
center = [0.5, 0.5]
radius = 0.25
[model]
potential = zero
m0 = 2
[data]
g = 0.25 * x1
b = 2
[numerics]
nodes_per_unit = 8
k = 2
[experiment]
horizon = 0.5
";

fn main() -> perforated_hj::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let mut free = cfg.scenario.clone();
    free.cell = UnitCellGeometry::empty();
    let tables = free.tables(2)?;
    let r = diluted_experiment(&cfg.scenario, &[0.5, 0.25, 0.125], &tables, &mut Timings::default())?;
    for w in &r.rows {
        println!("eps = {:<6} eta = {:.4}  error = {:.5}  sandwich {:.2e}", w.epsilon, w.eta, w.error, w.sandwich_violation);
    }
    println!("fitted C {:.4}, slope {:?}", r.fitted_c, r.slope);
    Ok(())
}
