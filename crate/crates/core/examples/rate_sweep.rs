//! Convergence of the perforated solutions to the homogenized limit over a
//! short epsilon sweep on a coarse lattice.

use perforated_hj::experiments::{Scenario, Timings};

fn main() -> perforated_hj::Result<()> {
    let mut scn = Scenario::reference();
    scn.numerics.nodes_per_unit = 8;
    let tables = scn.tables(2)?;
    let mut timings = Timings::default();
    let r = perforated_hj::experiments::rate_experiment(&scn, &[0.5, 0.25, 0.125], &tables, 0.0, &mut timings)?;
    for p in &r.points {
        println!("eps = {:<6} h = {:<8} error = {:.5}", p.epsilon, p.h, p.error);
    }
    println!("slope {:?}, ratios {:?}", r.slope, r.ratios);
    for n in &r.notices {
        println!("notice: {n}");
    }
    Ok(())
}
