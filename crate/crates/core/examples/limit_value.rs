//! Homogenized value from an effective Lagrangian table, here the exact
//! free-particle table, with nontrivial initial data.

use perforated_hj::cli::parse_config;
use perforated_hj::metric::EffectiveTables;

const CONFIG: &str = "
[model]
potential = zero
m0 = 2
[data]
g = min(abs(x1) + abs(x2), 1)
b = 2
";

fn main() -> perforated_hj::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let scn = &cfg.scenario;
    let tables = EffectiveTables::from_lagrangian(0.05, 2.5, |v| 0.5 * (v[0] * v[0] + v[1] * v[1]));
    let limit = scn.limit(&tables, 1.0 / 32.0)?;
    for x in [[0.0, 0.0], [0.5, 0.0], [0.5, 0.5], [1.0, -0.25]] {
        for t in [0.25, 1.0] {
            let u = limit.hopf_lax_u(x, t)?;
            println!("u({x:?}, {t}) = {:.5} from y = ({:.3}, {:.3}) at tau = {:.3}", u.value, u.y[0], u.y[1], u.tau);
        }
    }
    Ok(())
}
