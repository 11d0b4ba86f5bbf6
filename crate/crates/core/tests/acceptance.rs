//! End-to-end acceptance checks, one line per criterion. Runs without the
//! libtest harness so the lines are always printed; exits nonzero if any
//! criterion fails.

use std::sync::Arc;
use std::time::Instant;

use perforated_hj::cli::cache::TableCache;
use perforated_hj::cli::expr::parse_expression;
use perforated_hj::cli::parse_config;
use perforated_hj::dynamics::{lipschitz_constant, BoundaryData, DataClosure, DataFn, Hamiltonian, LagrangianModel, ModelOptions, Potential};
use perforated_hj::experiments::{
    a7_equivalence, calibrate_slack, optimality_case, quadratic_deviation, rate_experiment, Numerics, Scenario, Slack,
    Timings,
};
use perforated_hj::geometry::{Point, UnitCellGeometry};
use perforated_hj::hj_solver::{Grid, Problem, Record, SolverOptions, SolverSetup};
use perforated_hj::limit::{LimitOptions, LimitSolver};
use perforated_hj::metric::{enumerate_paths, forward_dp, CellMetric, IBox, MetricOptions, MetricQuery, TableGraph};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

fn model(potential: Potential, m0: f64) -> LagrangianModel {
    LagrangianModel::new(Hamiltonian::quadratic(potential), ModelOptions { m0: Some(m0), ..Default::default() }).unwrap()
}

fn func(name: &str, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> DataFn {
    let f: DataClosure = Arc::new(move |x: Point, _| f(x));
    DataFn::Func { name: name.into(), f }
}

fn criterion1(scn: &Scenario, slack: &Slack, cache: &TableCache) -> Outcome {
    let eps = Scenario::reference_epsilons();
    let tables = cache.tables(scn, 8).unwrap();
    let h = scn.numerics.spacing(1.0 / 16.0);
    let floor = slack.eval(h, h / scn.model.m0(), None);
    let r = rate_experiment(scn, &eps, &tables, floor, &mut Timings::default()).unwrap();
    let errs: Vec<String> = r.points.iter().map(|p| format!("{:.5}", p.error)).collect();
    match r.slope {
        Some(s) => Outcome::new(
            (0.8..=1.2).contains(&s),
            format!("slope {s:.4} in [0.8, 1.2]; errors [{}]; ratios {:?}", errs.join(", "), r.ratios),
        ),
        None => Outcome::new(false, format!("slope not fitted: {:?}", r.notices)),
    }
}

fn criterion2(scn: &Scenario, slack: &Slack, cache: &TableCache) -> Outcome {
    let eps = Scenario::reference_epsilons();
    let tables = cache.tables(scn, 8).unwrap();
    let r = optimality_case(scn, &eps, &tables, slack, &mut Timings::default()).unwrap();
    let floors = r.rows.iter().all(|w| w.value >= w.epsilon / 8.0 - w.slack);
    let strict = r.rows.iter().all(|w| w.value >= w.epsilon / 8.0);
    let limit = r.limit_value.abs() <= r.limit_slack;
    let vals: Vec<String> = r.rows.iter().map(|w| format!("{:.5}>={:.5}", w.value, w.epsilon / 8.0)).collect();
    Outcome::new(
        floors && limit,
        format!(
            "u^eps(0,1) [{}] (strict floor {}); |u(0,1)| = {:.2e} <= {:.2e}",
            vals.join(", "),
            if strict { "holds" } else { "fails, within slack" },
            r.limit_value.abs(),
            r.limit_slack
        ),
    )
}

fn criterion3() -> Outcome {
    // Lattice graph of a coarse metric: 4 nodes per unit, nearest-neighbour
    // moves, 3 steps; every feasible path stays in the 5x5 box around y.
    let cell = UnitCellGeometry::centered_disc(0.25).unwrap();
    let m = CellMetric::new(
        &cell,
        &model(Potential::reference_bump(), 2.0),
        &MetricOptions { nodes_per_unit: 4, move_radius: 1.0, vmax: Some(1.0), ..Default::default() },
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (y, x) in [([0.25, 0.5], [0.5, 0.75]), ([0.0, 0.0], [0.25, 0.25]), ([0.25, 0.5], [0.25, 0.5]), ([0.75, 0.25], [1.0, 0.5])] {
        let q = MetricQuery::new(0.0, 0.75, y, x);
        let (graph, steps) = m.lattice_graph(0.75);
        assert_eq!(steps, 3);
        let zy = m.snap(y).unwrap().0;
        let zx = m.snap(x).unwrap().0;
        let window = IBox { lo: [zy[0] - 2, zy[1] - 2], hi: [zy[0] + 2, zy[1] + 2] };
        let brute = enumerate_paths(&graph, zy, zx, steps, &window);
        let dp = m.mtilde(&q).unwrap().cost;
        worst = worst.max((dp - brute).abs());
        checked += 1;
    }
    // Random costs and blocked nodes on an explicit 5x5 graph.
    let window = IBox { lo: [0, 0], hi: [4, 4] };
    let mut moves = vec![[0, 0]];
    for dy in -1..=1 {
        for dx in -1..=1 {
            if (dx, dy) != (0, 0) {
                moves.push([dx, dy]);
            }
        }
    }
    let mut rng = StdRng::seed_from_u64(3);
    let cost: Vec<f64> = (0..window.len() * moves.len()).map(|_| rng.gen_range(-0.3..1.7)).collect();
    let g = TableGraph { window, moves, blocked: vec![[2, 2], [1, 3]], cost };
    for y in [[0, 0], [4, 4], [2, 1], [0, 4]] {
        let layers = forward_dp(&g, &[(y, 0.0)], 3, |_| Some(window), false);
        for x in [[3, 2], [1, 1], [4, 0], [0, 2]] {
            let brute = enumerate_paths(&g, y, x, 3, &window);
            let dp = layers.last().unwrap().get(x);
            if brute.is_finite() || dp.is_finite() {
                worst = worst.max((dp - brute).abs());
            }
            checked += 1;
        }
    }
    Outcome::new(worst <= 1e-12, format!("{checked} pairs, max |dp - enumeration| = {worst:.1e}"))
}

fn criterion4(scn: &Scenario, slack: &Slack, cache: &TableCache) -> Outcome {
    let t = cache.tables(scn, 8).unwrap();
    let k0 = scn.model.k0();
    let sandwich = t.sandwich_violation(k0);
    let mut free = scn.clone();
    free.cell = UnitCellGeometry::empty();
    free.model = model(Potential::Constant(0.0), 2.0);
    let ft = cache.tables(&free, 8).unwrap();
    let dev = quadratic_deviation(&ft);
    let budget = slack.eval(ft.h, ft.dt, Some(8));
    let mut a7 = scn.clone();
    a7.model = model(Potential::Constant(0.0), 2.0);
    assert!(a7.model.satisfies_a7());
    let at = cache.tables(&a7, 8).unwrap();
    let l0 = at.lbar([0.0, 0.0]).unwrap();
    let h0 = at.effective_hamiltonian([0.0, 0.0]).unwrap();
    let a7_budget = slack.eval(at.h, at.dt, Some(8));
    Outcome::new(
        sandwich <= 1e-12 && dev <= budget && l0.abs() <= a7_budget && h0.abs() <= a7_budget,
        format!(
            "reference sandwich violation {sandwich:.1e} (K0 = {k0}); hole-free deviation {dev:.4} <= {budget:.4}; \
             A7 Lbar(0) = {l0:.2e}, Hbar(0) = {h0:.2e} within {a7_budget:.4}"
        ),
    )
}

fn criterion5() -> Outcome {
    // A negative potential makes the singular regime nontrivial.
    let mut scn = Scenario::reference();
    scn.model = model(Potential::Constant(-0.5), 2.0);
    let m = scn.metric().unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    let mut diffs = Vec::new();
    for _ in 0..20 {
        let tau = rng.gen_range(0.0..0.5);
        let t = tau + rng.gen_range(0.5..1.0);
        let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let r = rng.gen_range(0.0..1.5) * (t - tau);
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let q = MetricQuery::new(tau, t, y, [y[0] + r * a.cos(), y[1] + r * a.sin()]);
        let v: Vec<f64> = [2, 4, 8].iter().map(|&k| m.mbar_star_at(&q, k).unwrap()).collect();
        diffs.push([(v[0] - v[1]).abs(), (v[1] - v[2]).abs()]);
    }
    let c = diffs.iter().map(|d| (2.0 * d[0]).max(4.0 * d[1])).fold(0.0, f64::max);
    let d24 = diffs.iter().map(|d| d[0]).fold(0.0, f64::max);
    let d48 = diffs.iter().map(|d| d[1]).fold(0.0, f64::max);
    let bound = diffs.iter().all(|d| d[0] <= c / 2.0 + 1e-15 && d[1] <= c / 4.0 + 1e-15);
    let mut floor_ok = true;
    let mut lowest = f64::INFINITY;
    for k in [2usize, 4, 8] {
        for frac in [0.2, 0.5, 0.9] {
            let s = frac / k as f64;
            let q = MetricQuery::new(0.3, 0.3 + s, [0.1, 0.2], [0.1 + 0.5 * s, 0.2]);
            let v = m.mbar_star_at(&q, k).unwrap();
            floor_ok &= v >= -c / k as f64;
            lowest = lowest.min(v * k as f64);
        }
    }
    Outcome::new(
        bound && d48 < d24 && floor_ok,
        format!("fitted C = {c:.4}; max diff k=2/4 {d24:.4}, k=4/8 {d48:.4}; singular floor min k*value {lowest:.4} >= -C"),
    )
}

fn criterion6(slack: &Slack) -> Outcome {
    let cell = UnitCellGeometry::centered_disc(0.25).unwrap();
    let bump = model(Potential::reference_bump(), 2.0);
    let m = CellMetric::new(&cell, &bump, &MetricOptions { vmax: Some(2.5), ..Default::default() }).unwrap();
    let k = 4;
    let tab = m.lbar_table(k, 0.05, 2.0).unwrap();
    let g = func("g", |x| 0.3 * x[0] + 0.2 * (2.0 * x[1]).sin());
    let opts = LimitOptions { m0: 2.0, dtau: 1.0 / 32.0, region: [[-1.0, -1.0], [1.0, 1.0]], horizon: 1.0 };
    let data = BoundaryData::new(g.clone(), DataFn::Const(0.6), 0.5, 0.0);
    let solver = LimitSolver::new(&tab, &data, data.bbar(&cell, 1.0), opts.clone()).unwrap();
    let tol = 3.0 * slack.eval(tab.h, tab.dt, Some(k));
    let mut rng = StdRng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let t = [0.25, 0.5, 0.75, 1.0][rng.gen_range(0..4)];
        let a = solver.hopf_lax_u(x, t).unwrap().value;
        let b = solver.ubar(&m, x, t, k, 1.0 / 32.0).unwrap().value;
        worst = worst.max((a - b).abs());
    }
    // Obstacle: a low ceiling so it binds somewhere.
    let low = BoundaryData::new(g, DataFn::Const(0.2), 0.5, 0.0);
    let ls = LimitSolver::new(&tab, &low, low.bbar(&cell, 1.0), opts).unwrap();
    let grid = Grid::new([-1.0, -1.0], [1.0, 1.0], 0.125, false).unwrap();
    let field = ls.field(&grid, &[0.25, 0.5, 1.0]).unwrap();
    let mut above: f64 = f64::NEG_INFINITY;
    let mut active = 0;
    for s in field.slices.iter().filter(|s| s.step > 0) {
        for (i, &u) in s.values.iter().enumerate() {
            let cap = ls.bbar().eval(grid.node(i));
            above = above.max(u - cap);
            active += (u == cap) as usize;
        }
    }
    // Scheme-level DPP: restarting from a stored slice reproduces the run.
    let scn = Scenario::reference();
    let eps = 0.25;
    let (view, grid) = (scn.view(eps).unwrap(), scn.grid(eps).unwrap());
    let so = SolverOptions { record: Record::All, ..scn.numerics.solver_options() };
    let setup = SolverSetup::new(&view, &scn.model, &scn.data, &grid, 1.0, &so).unwrap();
    let full = setup.solve(Problem::Dirichlet);
    let mid = full.steps / 2;
    let resumed = setup.resume_from(Problem::Dirichlet, mid, full.slice(mid).unwrap());
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let exact = resumed
        .slices
        .iter()
        .all(|s| full.slice(s.step).is_some_and(|f| bits(f) == bits(&s.values)))
        && bits(resumed.final_slice()) == bits(full.final_slice());
    Outcome::new(
        worst <= tol && above <= 1e-12 && active > 0 && exact,
        format!(
            "max |ubar - u| = {worst:.4} <= {tol:.4} (50 points, k = {k}); max(u - bbar) = {above:.1e} ({active} capped); \
             restart at step {mid} bit-exact: {exact}"
        ),
    )
}

fn criterion7(scn: &Scenario, slack: &Slack) -> Outcome {
    let r = a7_equivalence(scn, 0.0625, slack, &mut Timings::default()).unwrap();
    Outcome::new(
        r.max_difference <= r.tolerance,
        format!(
            "eps = 1/16: max |u - u_sc| = {:.3e} <= 2 slack = {:.3e}{}",
            r.max_difference,
            r.tolerance,
            r.notice.map(|n| format!(" ({n})")).unwrap_or_default()
        ),
    )
}

fn criterion8(slack: &Slack) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, pass: bool, detail: String| {
        ok &= pass;
        notes.push(format!("{name} {}{detail}", if pass { "ok" } else { "FAILED " }));
    };

    // Monotone in the data and in the previous slice.
    let scn = Scenario::reference();
    let eps = 0.25;
    let (view, grid) = (scn.view(eps).unwrap(), scn.grid(eps).unwrap());
    let pi = std::f64::consts::PI;
    let g1 = func("g1", move |x| 0.3 * (pi * x[0]).sin());
    let g2 = func("g2", move |x| 0.3 * (pi * x[0]).sin() + 0.1 * (1.0 + (pi * x[1]).cos()));
    let opts = SolverOptions { record: Record::Times(vec![0.25, 0.5, 1.0]), ..scn.numerics.solver_options() };
    let lip1 = 0.3 * pi;
    let d1 = BoundaryData::new(g1, DataFn::Const(1.0), lip1, 0.0);
    let d2 = BoundaryData::new(g2, DataFn::Const(1.0), lip1 + 0.1 * pi, 0.0);
    let s1 = SolverSetup::new(&view, &scn.model, &d1, &grid, 1.0, &opts).unwrap();
    let s2 = SolverSetup::new(&view, &scn.model, &d2, &grid, 1.0, &opts).unwrap();
    let u1 = s1.solve(Problem::Dirichlet);
    let u2 = s2.solve(Problem::Dirichlet);
    let adm: Vec<usize> = (0..grid.len()).filter(|&i| u1.classes[i].is_admissible()).collect();
    let mono = u1.slices.iter().zip(&u2.slices).all(|(a, b)| adm.iter().all(|&i| a.values[i] <= b.values[i]));
    let mut rng = StdRng::seed_from_u64(5);
    let prev = s1.initial().to_vec();
    let bumped: Vec<f64> = prev.iter().map(|v| v + rng.gen_range(0.0..0.1)).collect();
    let step_mono = (0..200).all(|_| {
        let i = adm[rng.gen_range(0..adm.len())];
        s1.step_update(&prev, i, Problem::Dirichlet).0 <= s1.step_update(&bumped, i, Problem::Dirichlet).0
    });
    check("monotonicity", mono && step_mono, String::new());

    // g - C t <= u <= g + C1 t and time Lipschitz.
    let k0 = scn.model.k0();
    let c1 = scn.model.c1();
    let c = lip1 * lip1 / 2.0 + k0;
    let tol = slack.eval(grid.h, u1.dt, None);
    let mut sandwich = true;
    let mut lip_worst: f64 = 0.0;
    let lconst = lipschitz_constant(k0, c1, lip1);
    for s in &u1.slices {
        let t = s.step as f64 * u1.dt;
        for &i in &adm {
            let g = d1.g(grid.node(i));
            sandwich &= s.values[i] >= g - c * t - tol && s.values[i] <= g + c1 * t + 1e-12;
        }
    }
    for (a, b) in u1.slices.iter().zip(u1.slices.iter().skip(1)) {
        let dt = (b.step - a.step) as f64 * u1.dt;
        for &i in &adm {
            lip_worst = lip_worst.max(((b.values[i] - a.values[i]).abs() - tol) / dt);
        }
    }
    check("sandwich", sandwich, String::new());
    check("time-Lipschitz", lip_worst <= lconst, format!(" ({lip_worst:.3} <= {lconst:.3})"));

    // m* subadditivity and near-homogeneity with a cell-crossing constant.
    let m = scn.metric().unwrap();
    let budget = 2.0 * (1.0 + k0);
    let pt = |rng: &mut StdRng, c: Point, r: f64| {
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let d = rng.gen_range(0.0..r);
        [c[0] + d * a.cos(), c[1] + d * a.sin()]
    };
    let (mut sub, mut hom): (f64, f64) = (f64::NEG_INFINITY, 0.0);
    for _ in 0..20 {
        let t = rng.gen_range(0.5..1.5);
        let s = rng.gen_range(0.5..1.5);
        let x = pt(&mut rng, [0.0, 0.0], 1.0);
        let y = pt(&mut rng, x, 1.2 * t);
        let z = pt(&mut rng, y, 1.2 * s);
        let whole = m.mstar(&MetricQuery::new(0.0, t + s, x, z)).unwrap();
        let first = m.mstar(&MetricQuery::new(0.0, t, x, y)).unwrap();
        let second = m.mstar(&MetricQuery::new(0.0, s, y, z)).unwrap();
        sub = sub.max(whole - first - second);
        let one = m.mstar(&MetricQuery::new(0.0, t, [0.0, 0.0], y)).unwrap();
        let two = m.mstar(&MetricQuery::new(0.0, 2.0 * t, [0.0, 0.0], [2.0 * y[0], 2.0 * y[1]])).unwrap();
        hom = hom.max((two - 2.0 * one).abs());
    }
    check("subadditivity", sub <= budget, format!(" (defect {sub:.3} <= {budget})"));
    check("homogeneity", hom <= budget, format!(" (defect {hom:.3} <= {budget})"));

    // Parser round trip on the shipped config and on expressions.
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/reference.cfg")).unwrap();
    let cfg = parse_config(&text).unwrap();
    let again = parse_config(&cfg.echo()).unwrap();
    let mut round = again.echo() == cfg.echo() && again.scenario.canonical() == cfg.scenario.canonical();
    for src in ["x1^2/2 + x2^2/2", "-2^-x1^2", "smoothstep(1/8, 1/4, sqrt((x1-1/2)^2+(x2-1/2)^2))", "min(x1, max(t, -y2)) / (1 + abs(x2))"] {
        let e = parse_expression(src).unwrap();
        round &= parse_expression(&e.unparse()).unwrap() == e;
    }
    check("parser round trip", round, String::new());

    // Cache: same key loads, any key change recomputes.
    let dir = tempfile::tempdir().unwrap();
    let cache = TableCache::new(dir.path());
    let mut small = Scenario::reference();
    small.numerics = Numerics { nodes_per_unit: 8, ..Numerics::default() };
    let first = cache.tables(&small, 1).unwrap();
    let loaded = cache.tables(&small, 1).unwrap();
    let mut counts = vec![cache.computed()];
    let same = first.lbar.iter().zip(&loaded.lbar).all(|(a, b)| a.to_bits() == b.to_bits())
        && first.hbar.iter().zip(&loaded.hbar).all(|(a, b)| a.to_bits() == b.to_bits());
    let mut other = small.clone();
    other.model = model(Potential::Constant(0.0), 2.0);
    cache.tables(&other, 1).unwrap();
    counts.push(cache.computed());
    cache.tables(&small, 2).unwrap();
    counts.push(cache.computed());
    let mut finer = small.clone();
    finer.numerics.nodes_per_unit = 10;
    cache.tables(&finer, 1).unwrap();
    counts.push(cache.computed());
    let mut holes = small.clone();
    holes.cell = UnitCellGeometry::centered_disc(0.2).unwrap();
    cache.tables(&holes, 1).unwrap();
    counts.push(cache.computed());
    cache.tables(&holes, 1).unwrap();
    counts.push(cache.computed());
    check("cache", same && counts == [1, 2, 3, 4, 5, 5], format!(" (recompute counts {counts:?})"));

    Outcome::new(ok, notes.join("; "))
}

fn main() {
    // Filter arguments from the test runner are ignored; the suite is one unit.
    let started = Instant::now();
    let scn = Scenario::reference();
    let dir = tempfile::tempdir().unwrap();
    let cache = TableCache::new(dir.path());
    let t0 = Instant::now();
    let slack = calibrate_slack(&scn.numerics, &[2, 4]).unwrap().slack;
    println!("slack a = {:.4}, b = {:.4}, c = {:.4} ({:.1}s)", slack.a, slack.b, slack.c, t0.elapsed().as_secs_f64());

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 rate", Box::new(|| criterion1(&scn, &slack, &cache))),
        ("2 optimality floor", Box::new(|| criterion2(&scn, &slack, &cache))),
        ("3 metric oracle", Box::new(criterion3)),
        ("4 table sandwich", Box::new(|| criterion4(&scn, &slack, &cache))),
        ("5 scale consistency", Box::new(criterion5)),
        ("6 limit identities", Box::new(|| criterion6(&slack))),
        ("7 boundary equivalence", Box::new(|| criterion7(&scn, &slack))),
        ("8 property suites", Box::new(|| criterion8(&slack))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let t = Instant::now();
        let o = run();
        failed += (!o.pass) as usize;
        println!(
            "{} criterion {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
