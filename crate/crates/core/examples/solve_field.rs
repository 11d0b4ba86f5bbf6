//! Solve the perforated problem on the reference cell at one epsilon and
//! print the value at the origin over time.

use perforated_hj::experiments::Scenario;
use perforated_hj::hj_solver::{Problem, Record};

fn main() -> perforated_hj::Result<()> {
    let scn = Scenario::reference();
    let eps = 0.25;
    let field = scn.solve(eps, Problem::Dirichlet, Record::Times(scn.numerics.times().to_vec()))?;
    println!("grid {}x{}, h = {}, dt = {}, {} steps", field.grid.nx, field.grid.ny, field.grid.h, field.dt, field.steps);
    for s in &field.slices {
        let t = s.step as f64 * field.dt;
        println!("t = {t:.4}  u(0, t) = {:.6}", field.value([0.0, 0.0], t)?);
    }
    Ok(())
}
