//! Effective Lagrangian and Hamiltonian tables of the reference cell.

use perforated_hj::experiments::{quadratic_deviation, Scenario};

fn main() -> perforated_hj::Result<()> {
    let mut scn = Scenario::reference();
    scn.numerics.nodes_per_unit = 8;
    scn.numerics.table_spacing = 0.1;
    let t = scn.tables(2)?;
    println!("k = {}, {} x {} velocity nodes", t.k, t.side(), t.side());
    for v in [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 2.0]] {
        println!("Lbar({:?}) = {:.5}   |v|^2/2 = {:.5}", v, t.lbar(v)?, 0.5 * (v[0] * v[0] + v[1] * v[1]));
    }
    println!("Hbar(0) = {:.5}", t.effective_hamiltonian([0.0, 0.0])?);
    println!("sandwich violation {:.3e}", t.sandwich_violation(scn.model.k0()));
    println!("convexity defect {:.3e}", t.convexity_defect());
    println!("max |Lbar - |v|^2/2| = {:.4}", quadratic_deviation(&t));
    Ok(())
}
