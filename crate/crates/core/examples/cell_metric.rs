//! Lattice metric between two points of the perforated plane: the pointwise
//! cost, the minimum over boundary representatives, and its rescaled form.

use perforated_hj::experiments::Scenario;
use perforated_hj::metric::MetricQuery;

fn main() -> perforated_hj::Result<()> {
    let mut scn = Scenario::reference();
    scn.numerics.nodes_per_unit = 8;
    let m = scn.metric()?;
    println!("lattice: {}", m.canonical());
    let q = MetricQuery::new(0.0, 1.0, [0.0, 0.0], [0.75, 0.25]);
    let r = m.mtilde(&q)?;
    println!("mtilde = {:.6} over {} path nodes", r.cost, r.path.len());
    for w in &r.warnings {
        println!("warning: {w}");
    }
    println!("mstar  = {:.6}", m.mstar(&q)?);
    for k in [2, 4] {
        let b = m.mbar_star(&q, k)?;
        println!("mbar_star(k = {k}) = {:.6}, richardson {:?}", b.value, b.richardson);
    }
    Ok(())
}
