//! Experiment drivers. Each returns a serializable report whose contents
//! depend only on the inputs; wall-clock timings are kept apart in
//! [`Timings`] so that reports stay bit-reproducible.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{BoundaryData, DataFn, Hamiltonian, LagrangianModel, ModelOptions, Potential};
use crate::geometry::{defect_density, CellIndex, DomainView, Point, UnitCellGeometry};
use crate::hj_solver::{extract_optimal_path, ExitKind, Grid, Problem, Record, SolverOptions, SolverSetup, ValueField};
use crate::limit::{LimitOptions, LimitSolver};
use crate::metric::{CellMetric, EffectiveTables, MetricOptions};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// How holes shrink with `epsilon`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Dilution {
    /// Holes at full size.
    Off,
    /// No holes at all.
    Zero,
    /// `eta = epsilon`.
    Linear,
    /// `eta = sqrt(epsilon)`.
    Sqrt,
    Fixed(f64),
}

impl Dilution {
    pub fn eta(self, eps: f64) -> f64 {
        match self {
            Dilution::Off => 1.0,
            Dilution::Zero => 0.0,
            Dilution::Linear => eps.min(1.0),
            Dilution::Sqrt => eps.sqrt().min(1.0),
            Dilution::Fixed(e) => e,
        }
    }
}

/// Discretization parameters shared by the drivers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Numerics {
    /// Solver grid spacing is `epsilon / h_ratio` unless `h` is set.
    pub h_ratio: f64,
    pub h: Option<f64>,
    pub horizon: f64,
    /// Half side of the comparison window.
    pub window: f64,
    /// Periodic solver window when the scenario allows it (see
    /// [`Scenario::periodic`]); otherwise the window is padded by `M0 T`.
    pub wrap: bool,
    pub ndir: usize,
    pub nrad: usize,
    /// Scale of the effective tables and of the averaged metric.
    pub k: usize,
    pub nodes_per_unit: usize,
    pub move_radius: f64,
    /// Lattice speed; defaults to `M0 + 1`.
    pub vmax: Option<f64>,
    pub table_spacing: f64,
    /// Table radius; defaults to `M0 + 1/2`.
    pub table_radius: Option<f64>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            h_ratio: 8.0,
            h: None,
            horizon: 1.0,
            window: 1.0,
            wrap: true,
            ndir: 32,
            nrad: 16,
            k: 8,
            nodes_per_unit: 16,
            move_radius: 8.0,
            vmax: None,
            table_spacing: 0.05,
            table_radius: None,
        }
    }
}

impl Numerics {
    pub fn metric_options(&self, model: &LagrangianModel) -> MetricOptions {
        MetricOptions {
            nodes_per_unit: self.nodes_per_unit,
            move_radius: self.move_radius,
            vmax: Some(self.vmax.unwrap_or(model.m0() + 1.0)),
            ..Default::default()
        }
    }

    pub fn spacing(&self, eps: f64) -> f64 {
        self.h.unwrap_or(eps / self.h_ratio)
    }

    pub fn table_radius(&self, model: &LagrangianModel) -> f64 {
        self.table_radius.unwrap_or(model.m0() + 0.5)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { ndir: self.ndir, nrad: self.nrad, ..Default::default() }
    }

    /// Comparison times `T/4, T/2, T`.
    pub fn times(&self) -> [f64; 3] {
        [self.horizon / 4.0, self.horizon / 2.0, self.horizon]
    }
}

/// Geometry, model, data and numerics of one experiment.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub cell: UnitCellGeometry,
    pub model: LagrangianModel,
    pub data: BoundaryData,
    pub dilution: Dilution,
    pub defects: BTreeSet<CellIndex>,
    pub numerics: Numerics,
}

impl Scenario {
    /// Disc holes of radius 1/4 at the cell centers, `H = |p|^2/2 - V` with
    /// the corner bump, `g = 0`, `b = 1`, `M0 = 2`.
    pub fn reference() -> Self {
        let model = LagrangianModel::new(
            Hamiltonian::quadratic(Potential::reference_bump()),
            ModelOptions { m0: Some(2.0), ..Default::default() },
        )
        .expect("the reference model is valid");
        Scenario {
            cell: UnitCellGeometry::centered_disc(0.25).expect("radius 1/4 fits the cell"),
            model,
            data: BoundaryData::new(DataFn::Const(0.0), DataFn::Const(1.0), 0.0, 0.0),
            dilution: Dilution::Off,
            defects: BTreeSet::new(),
            numerics: Numerics::default(),
        }
    }

    /// Reference epsilons `1/4, 1/8, 1/16`.
    pub fn reference_epsilons() -> Vec<f64> {
        vec![0.25, 0.125, 0.0625]
    }

    /// One line per component; equal strings mean equal runs.
    pub fn canonical(&self) -> String {
        format!(
            "cell={}\nmodel={}\ndata={}\ndilution={:?}\ndefects={:?}\nnumerics={:?}",
            self.cell.canonical(),
            self.model.canonical(),
            self.data.canonical(),
            self.dilution,
            self.defects,
            self.numerics
        )
    }

    pub fn view(&self, eps: f64) -> Result<DomainView> {
        Ok(DomainView::new(self.cell.clone(), eps)?
            .with_dilution(self.dilution.eta(eps))?
            .with_defects(self.defects.iter().copied()))
    }

    /// Whether solves use the periodic window: requested, no defects, and
    /// constant `g` and `b` (anything else is not periodic on the window).
    pub fn periodic(&self) -> bool {
        let constant = |d: &DataFn| matches!(d, DataFn::Const(_));
        self.numerics.wrap && self.defects.is_empty() && constant(&self.data.g) && constant(&self.data.b)
    }

    pub fn grid(&self, eps: f64) -> Result<Grid> {
        let nm = &self.numerics;
        let h = nm.spacing(eps);
        let w = nm.window;
        if self.periodic() {
            let periods = 2.0 * w / eps;
            if (periods - periods.round()).abs() > 1e-9 {
                return Err(Error::Grid(format!("a periodic window of side {} needs a whole number of cells", 2.0 * w)));
            }
            Grid::periodic(-w, 2.0 * w, h)
        } else {
            let pad = (self.model.m0() * nm.horizon / h).ceil() * h + h;
            Grid::new([-w - pad, -w - pad], [w + pad, w + pad], h, false)
        }
    }

    pub fn solve(&self, eps: f64, problem: Problem, record: Record) -> Result<ValueField> {
        let view = self.view(eps)?;
        let grid = self.grid(eps)?;
        let opts = SolverOptions { record, ..self.numerics.solver_options() };
        let setup = SolverSetup::new(&view, &self.model, &self.data, &grid, self.numerics.horizon, &opts)?;
        if problem == Problem::Dirichlet {
            setup.check_compatibility(&view, &self.data, opts.compatibility_samples)?;
        }
        Ok(setup.solve(problem))
    }

    pub fn metric(&self) -> Result<CellMetric> {
        CellMetric::new(&self.cell, &self.model, &self.numerics.metric_options(&self.model))
    }

    /// Effective tables of this scenario's cell and model at scale `k`.
    pub fn tables(&self, k: usize) -> Result<EffectiveTables> {
        self.metric()?.lbar_table(k, self.numerics.table_spacing, self.numerics.table_radius(&self.model))
    }

    /// Limit evaluator over the comparison window.
    pub fn limit<'a>(&'a self, tables: &'a EffectiveTables, dtau: f64) -> Result<LimitSolver<'a>> {
        let w = self.numerics.window;
        let bbar = self.data.bbar(&self.cell, 1.0);
        LimitSolver::new(
            tables,
            &self.data,
            bbar,
            LimitOptions { m0: self.model.m0(), dtau, region: [[-w, -w], [w, w]], horizon: self.numerics.horizon },
        )
    }
}

/// Scheme slack `a h + b dt + c / k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Slack {
    pub fn eval(&self, h: f64, dt: f64, k: Option<usize>) -> f64 {
        self.a * h + self.b * dt + k.map_or(0.0, |k| self.c / k as f64)
    }
}

/// An error measured on an exactly solvable case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub label: String,
    pub h: f64,
    pub dt: f64,
    pub k: Option<usize>,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlackReport {
    pub schema_version: u32,
    pub slack: Slack,
    /// Least-squares coefficients before scaling.
    pub fit: Slack,
    /// Factor that makes the budget dominate every calibration point.
    pub scale: f64,
    pub points: Vec<CalibrationPoint>,
}

/// Nonnegative least squares for `a h + b dt + c/k`, by enumeration of the
/// active sets, followed by the smallest scaling that covers every point.
pub fn fit_slack(points: &[CalibrationPoint]) -> (Slack, Slack, f64) {
    let rows: Vec<[f64; 3]> = points.iter().map(|p| [p.h, p.dt, p.k.map_or(0.0, |k| 1.0 / k as f64)]).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.error).collect();
    let mut best: Option<(f64, [f64; 3])> = None;
    for mask in 1u32..8 {
        let idx: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
        let Some(sol) = least_squares(&rows, &ys, &idx) else { continue };
        if sol.iter().any(|&s| s < 0.0) {
            continue;
        }
        let mut coef = [0.0; 3];
        for (&i, &s) in idx.iter().zip(&sol) {
            coef[i] = s;
        }
        let res: f64 = rows
            .iter()
            .zip(&ys)
            .map(|(r, y)| (r[0] * coef[0] + r[1] * coef[1] + r[2] * coef[2] - y).powi(2))
            .sum();
        if best.map_or(true, |(b, _)| res < b) {
            best = Some((res, coef));
        }
    }
    let coef = best.map_or([0.0; 3], |b| b.1);
    let fit = Slack { a: coef[0], b: coef[1], c: coef[2] };
    let mut scale: f64 = 1.0;
    for p in points {
        let v = fit.eval(p.h, p.dt, p.k);
        if p.error > 0.0 {
            scale = scale.max(if v > 0.0 { p.error / v } else { f64::INFINITY });
        }
    }
    let slack = Slack { a: fit.a * scale, b: fit.b * scale, c: fit.c * scale };
    (slack, fit, scale)
}

/// Normal equations restricted to the columns in `idx`.
fn least_squares(rows: &[[f64; 3]], ys: &[f64], idx: &[usize]) -> Option<Vec<f64>> {
    let n = idx.len();
    let mut m = vec![vec![0.0; n + 1]; n];
    for (r, y) in rows.iter().zip(ys) {
        for (i, &a) in idx.iter().enumerate() {
            for (j, &b) in idx.iter().enumerate() {
                m[i][j] += r[a] * r[b];
            }
            m[i][n] += r[a] * y;
        }
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                for c in col..=n {
                    m[row][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// `inf_y |x - y|^2/(2t) + min(|y|, 1)`.
pub fn cone_hopf_lax(x: Point, t: f64) -> f64 {
    let r = x[0].hypot(x[1]);
    if t == 0.0 {
        return r.min(1.0);
    }
    let inner = if r <= t { r * r / (2.0 * t) } else { r - t / 2.0 };
    inner.min(1.0)
}

/// Runs the hole-free quadratic cases and fits the slack budget: the scheme
/// against the closed-form value for `g = min(|x|, 1)` at two grids and two
/// speed bounds, and lattice tables against `|v|^2/2` at the given scales.
pub fn calibrate_slack(numerics: &Numerics, scales: &[usize]) -> Result<SlackReport> {
    let cone: crate::dynamics::DataClosure = Arc::new(|x: Point, _| x[0].hypot(x[1]).min(1.0));
    let data = BoundaryData::new(DataFn::Func { name: "cone".into(), f: cone }, DataFn::Const(10.0), 1.0, 0.0);
    let view = DomainView::new(UnitCellGeometry::empty(), 1.0)?;
    let mut points = Vec::new();
    let horizon = 1.0;
    for m0 in [2.0, 4.0] {
        let model = LagrangianModel::new(Hamiltonian::free(), ModelOptions { m0: Some(m0), lip_g: 1.0, ..Default::default() })?;
        for h in [1.0 / 16.0, 1.0 / 32.0] {
            let grid = Grid::new([-2.0, -2.0], [2.0, 2.0], h, false)?;
            let opts = SolverOptions {
                ndir: numerics.ndir,
                nrad: numerics.nrad,
                record: Record::Times(vec![0.25, 0.5, 1.0]),
                traceback: Some(false),
                ..Default::default()
            };
            let setup = SolverSetup::new(&view, &model, &data, &grid, horizon, &opts)?;
            let field = setup.solve(Problem::Dirichlet);
            let mut err: f64 = 0.0;
            for t in [0.25, 0.5, 1.0] {
                let s = field.slice_at(t)?;
                for (i, &u) in s.iter().enumerate() {
                    let x = grid.node(i);
                    if x[0].abs() <= 1.0 + 1e-12 && x[1].abs() <= 1.0 + 1e-12 {
                        err = err.max((u - cone_hopf_lax(x, t)).abs());
                    }
                }
            }
            points.push(CalibrationPoint { label: format!("solver m0={m0} h={h}"), h, dt: setup.dt(), k: None, error: err });
        }
    }
    let free = LagrangianModel::new(Hamiltonian::free(), ModelOptions { m0: Some(2.0), ..Default::default() })?;
    let metric = CellMetric::new(&UnitCellGeometry::empty(), &free, &numerics.metric_options(&free))?;
    let radius = numerics.table_radius(&free);
    for &k in scales {
        let t = metric.lbar_table(k, numerics.table_spacing, radius)?;
        points.push(CalibrationPoint {
            label: format!("table k={k}"),
            h: t.h,
            dt: t.dt,
            k: Some(k),
            error: quadratic_deviation(&t),
        });
    }
    let (slack, fit, scale) = fit_slack(&points);
    Ok(SlackReport { schema_version: SCHEMA_VERSION, slack, fit, scale, points })
}

/// Largest `|value - |.|^2/2|` over both tables.
pub fn quadratic_deviation(t: &EffectiveTables) -> f64 {
    let dev = |(v, l): (Point, f64)| (l - 0.5 * (v[0] * v[0] + v[1] * v[1])).abs();
    t.lbar_nodes().map(dev).chain(t.hbar_nodes().map(dev)).fold(0.0, f64::max)
}

/// Least-squares line `y = slope x + intercept`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// A named pass/fail check carried by a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Assertion { name: name.into(), pass, detail }
    }
}

pub fn all_pass(a: &[Assertion]) -> bool {
    a.iter().all(|x| x.pass)
}

/// Wall-clock seconds per named stage.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings(pub Vec<(String, f64)>);

impl Timings {
    fn time<T>(&mut self, name: String, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f()?;
        self.0.push((name, t0.elapsed().as_secs_f64()));
        Ok(out)
    }
}

/// Window nodes of the coarsest grid that are nodes of every grid and
/// admissible in every view.
pub fn comparison_nodes(scn: &Scenario, eps_list: &[f64]) -> Result<Vec<Point>> {
    let coarsest = eps_list.iter().copied().fold(0.0, f64::max);
    let base = scn.grid(coarsest)?;
    let w = scn.numerics.window + 1e-12;
    let others: Vec<(Grid, DomainView)> =
        eps_list.iter().map(|&e| Ok((scn.grid(e)?, scn.view(e)?))).collect::<Result<_>>()?;
    let nodes: Vec<Point> = (0..base.len())
        .map(|i| base.node(i))
        .filter(|x| x[0].abs() <= w && x[1].abs() <= w)
        .filter(|&x| {
            others.iter().all(|(g, v)| g.node_index(x).is_some() && v.classify_point(x, 1e-9 * v.epsilon()).is_admissible())
        })
        .collect();
    if nodes.is_empty() {
        return Err(Error::Experiment("no node is admissible at every epsilon".into()));
    }
    Ok(nodes)
}

#[derive(Clone, Debug, Serialize)]
pub struct RatePoint {
    pub epsilon: f64,
    pub h: f64,
    pub dt: f64,
    pub error: f64,
    pub at: (Point, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub schema_version: u32,
    pub experiment: String,
    pub nodes: usize,
    pub times: Vec<f64>,
    pub points: Vec<RatePoint>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub ratios: Vec<f64>,
    pub notices: Vec<String>,
    pub assertions: Vec<Assertion>,
}

/// `max |u^eps - u|` over the comparison nodes and times, per epsilon, and
/// the log-log slope. `floor` is the scheme error below which the slope is
/// not meaningful.
pub fn rate_experiment(scn: &Scenario, eps_list: &[f64], tables: &EffectiveTables, floor: f64, timings: &mut Timings) -> Result<RateReport> {
    if eps_list.len() < 3 {
        return Err(Error::Experiment(format!("rate needs at least 3 epsilons, got {}", eps_list.len())));
    }
    let nodes = comparison_nodes(scn, eps_list)?;
    let times = scn.numerics.times();
    let mut fields = Vec::new();
    for &eps in eps_list {
        let f = timings.time(format!("solve eps={eps}"), || scn.solve(eps, Problem::Dirichlet, Record::Times(times.to_vec())))?;
        fields.push(f);
    }
    let dtau = fields.iter().map(|f| f.dt).fold(f64::INFINITY, f64::min);
    let limit = scn.limit(tables, dtau)?;
    let reference: Vec<[f64; 3]> = timings.time("limit".into(), || {
        use rayon::prelude::*;
        nodes
            .par_iter()
            .map(|&x| {
                let mut r = [0.0; 3];
                for (j, &t) in times.iter().enumerate() {
                    r[j] = limit.hopf_lax_u(x, t)?.value;
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut points = Vec::new();
    for (f, &eps) in fields.iter().zip(eps_list) {
        let mut worst = (f64::NEG_INFINITY, ([0.0, 0.0], 0.0));
        for (j, &t) in times.iter().enumerate() {
            for (x, r) in nodes.iter().zip(&reference) {
                let e = (f.value(*x, t)? - r[j]).abs();
                if e > worst.0 {
                    worst = (e, (*x, t));
                }
            }
        }
        points.push(RatePoint { epsilon: eps, h: f.grid.h, dt: f.dt, error: worst.0, at: worst.1 });
    }
    let mut notices = Vec::new();
    let ratios: Vec<f64> = points.windows(2).map(|w| w[1].error / w[0].error).collect();
    let sorted = points.windows(2).all(|w| (w[1].epsilon < w[0].epsilon) == (w[1].error <= w[0].error));
    if !sorted {
        notices.push("errors are not monotone in epsilon; refine h".into());
    }
    let (slope, intercept) = if points.iter().all(|p| p.error > floor) {
        let xs: Vec<f64> = points.iter().map(|p| p.epsilon.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.error.ln()).collect();
        let (s, i) = fit_line(&xs, &ys);
        (Some(s), Some(i))
    } else {
        notices.push(format!("homogenization error below scheme floor {floor:.3e}; slope not fitted"));
        (None, None)
    };
    let mut assertions = Vec::new();
    if slope.is_none() {
        assertions.push(Assertion::new("slope fitted above the scheme floor", false, format!("floor {floor:.3e}")));
    }
    if let Some(s) = slope {
        assertions.push(Assertion::new("slope in [0.8, 1.2]", (0.8..=1.2).contains(&s), format!("slope = {s:.4}")));
        assertions.push(Assertion::new(
            "halving ratios in [0.35, 0.7]",
            ratios.iter().all(|r| (0.35..=0.7).contains(r)),
            format!("ratios = {ratios:?}"),
        ));
    }
    Ok(RateReport {
        schema_version: SCHEMA_VERSION,
        experiment: "rate".into(),
        nodes: nodes.len(),
        times: times.to_vec(),
        points,
        slope,
        intercept,
        ratios,
        notices,
        assertions,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimalityRow {
    pub epsilon: f64,
    pub h: f64,
    pub dt: f64,
    pub value: f64,
    pub floor: f64,
    pub slack: f64,
    pub ratio: f64,
    pub exit: ExitKind,
    pub exit_time: f64,
    pub path: Vec<(Point, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimalityReport {
    pub schema_version: u32,
    pub experiment: String,
    pub rows: Vec<OptimalityRow>,
    pub limit_value: f64,
    pub limit_slack: f64,
    pub ratio_max: f64,
    pub assertions: Vec<Assertion>,
}

/// Refuses anything but the reference configuration and epsilons.
pub fn check_pinned(scn: &Scenario, eps_list: &[f64]) -> Result<()> {
    let pinned = Scenario::reference();
    let mut drift = Vec::new();
    let pairs = [
        ("geometry", scn.cell.canonical(), pinned.cell.canonical()),
        ("model", scn.model.canonical(), pinned.model.canonical()),
        ("data g", scn.data.g.canonical(), pinned.data.g.canonical()),
        ("data b", scn.data.b.canonical(), pinned.data.b.canonical()),
        ("dilution", format!("{:?}", scn.dilution), format!("{:?}", pinned.dilution)),
        ("defects", format!("{:?}", scn.defects), format!("{:?}", pinned.defects)),
        ("h ratio", format!("{:?}", scn.numerics.h_ratio), format!("{:?}", pinned.numerics.h_ratio)),
        ("h", format!("{:?}", scn.numerics.h), format!("{:?}", pinned.numerics.h)),
        ("horizon", format!("{:?}", scn.numerics.horizon), format!("{:?}", pinned.numerics.horizon)),
        ("epsilons", format!("{eps_list:?}"), format!("{:?}", Scenario::reference_epsilons())),
    ];
    for (name, got, want) in pairs {
        if got != want {
            drift.push(format!("{name}: {got} (pinned {want})"));
        }
    }
    if drift.is_empty() {
        Ok(())
    } else {
        Err(Error::Refused(format!("configuration differs from the pinned reference: {}", drift.join("; "))))
    }
}

/// `u^eps(0, T)` against the floor `epsilon/8`, the limit value at the same
/// point, and the optimal path of each run.
pub fn optimality_case(
    scn: &Scenario,
    eps_list: &[f64],
    tables: &EffectiveTables,
    slack: &Slack,
    timings: &mut Timings,
) -> Result<OptimalityReport> {
    check_pinned(scn, eps_list)?;
    let t = scn.numerics.horizon;
    let k = tables.k;
    let mut rows = Vec::new();
    let mut dtau = f64::INFINITY;
    for &eps in eps_list {
        let f = timings.time(format!("solve eps={eps}"), || scn.solve(eps, Problem::Dirichlet, Record::Times(vec![t])))?;
        let value = f.value([0.0, 0.0], t)?;
        let path = extract_optimal_path(&f, [0.0, 0.0], t)?;
        let s = slack.eval(f.grid.h, f.dt, Some(k));
        dtau = dtau.min(f.dt);
        rows.push(OptimalityRow {
            epsilon: eps,
            h: f.grid.h,
            dt: f.dt,
            value,
            floor: eps / 8.0,
            slack: s,
            ratio: value / eps,
            exit: path.exit,
            exit_time: path.tau,
            path: path.nodes,
        });
    }
    let limit = scn.limit(tables, dtau)?;
    let limit_value = limit.hopf_lax_u([0.0, 0.0], t)?.value;
    let finest = rows.iter().min_by(|a, b| a.epsilon.total_cmp(&b.epsilon)).unwrap();
    let limit_slack = slack.eval(finest.h, finest.dt, Some(k));
    let mut assertions = Vec::new();
    for r in &rows {
        assertions.push(Assertion::new(
            &format!("u^eps(0,1) >= eps/8 - slack at eps = {}", r.epsilon),
            r.value >= r.floor - r.slack,
            format!("{:.6} vs {:.6} - {:.6}", r.value, r.floor, r.slack),
        ));
    }
    assertions.push(Assertion::new(
        "u(0,1) = 0 within slack",
        limit_value.abs() <= limit_slack,
        format!("|{limit_value:.3e}| vs {limit_slack:.3e}"),
    ));
    let ratio_max = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(OptimalityReport {
        schema_version: SCHEMA_VERSION,
        experiment: "optimality".into(),
        rows,
        limit_value,
        limit_slack,
        ratio_max,
        assertions,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DilutedRow {
    pub epsilon: f64,
    pub eta: f64,
    /// Largest `u_free^eps - u^eps`; the sandwich needs it `<= 0`.
    pub sandwich_violation: f64,
    /// `max |u^eps - u_free|` against the hole-free limit.
    pub error: f64,
    pub bound_term: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DilutedReport {
    pub schema_version: u32,
    pub experiment: String,
    pub dilution: Dilution,
    pub rows: Vec<DilutedRow>,
    /// `max error / (eps + eta T)`.
    pub fitted_c: f64,
    pub slope: Option<f64>,
    pub assertions: Vec<Assertion>,
}

fn require_a7(scn: &Scenario, what: &str) -> Result<()> {
    if !scn.model.satisfies_a7() {
        return Err(Error::Refused(format!("{what} requires H(y, 0) = min H (A7)")));
    }
    Ok(())
}

fn field_nodes(f: &ValueField, w: f64) -> Vec<usize> {
    (0..f.grid.len())
        .filter(|&i| {
            let x = f.grid.node(i);
            x[0].abs() <= w + 1e-12 && x[1].abs() <= w + 1e-12 && f.classes[i].is_admissible()
        })
        .collect()
}

/// Diluted holes against the hole-free problem and its limit.
pub fn diluted_experiment(
    scn: &Scenario,
    eps_list: &[f64],
    free_tables: &EffectiveTables,
    timings: &mut Timings,
) -> Result<DilutedReport> {
    require_a7(scn, "the diluted experiment")?;
    let mut free = scn.clone();
    free.dilution = Dilution::Zero;
    let times = scn.numerics.times();
    let w = scn.numerics.window;
    let mut rows = Vec::new();
    for &eps in eps_list {
        let u = timings.time(format!("diluted eps={eps}"), || scn.solve(eps, Problem::Dirichlet, Record::Times(times.to_vec())))?;
        let uf = timings.time(format!("free eps={eps}"), || free.solve(eps, Problem::Dirichlet, Record::Times(times.to_vec())))?;
        let limit = free.limit(free_tables, u.dt)?;
        let nodes = field_nodes(&u, w);
        let mut viol = f64::NEG_INFINITY;
        let mut err: f64 = 0.0;
        for &t in &times {
            let (a, b) = (u.slice_at(t)?, uf.slice_at(t)?);
            for &i in &nodes {
                viol = viol.max(b[i] - a[i]);
                err = err.max((a[i] - limit.hopf_lax_u(u.grid.node(i), t)?.value).abs());
            }
        }
        let eta = scn.dilution.eta(eps);
        rows.push(DilutedRow { epsilon: eps, eta, sandwich_violation: viol, error: err, bound_term: eps + eta * scn.numerics.horizon });
    }
    let fitted_c = rows.iter().map(|r| r.error / r.bound_term).fold(0.0, f64::max);
    let slope = (rows.len() >= 2 && rows.iter().all(|r| r.error > 0.0)).then(|| {
        let xs: Vec<f64> = rows.iter().map(|r| r.epsilon.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
        fit_line(&xs, &ys).0
    });
    let worst = rows.iter().map(|r| r.sandwich_violation).fold(f64::NEG_INFINITY, f64::max);
    let mut assertions = vec![Assertion::new("hole-free value below diluted value", worst <= 1e-12, format!("max violation {worst:.3e}"))];
    if scn.dilution == Dilution::Zero {
        assertions.push(Assertion::new("no holes: identical values", worst.abs() <= 1e-12, format!("{worst:.3e}")));
    }
    Ok(DilutedReport {
        schema_version: SCHEMA_VERSION,
        experiment: "diluted".into(),
        dilution: scn.dilution,
        rows,
        fitted_c,
        slope,
        assertions,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DefectProfile {
    /// On the row of cell centers `x2 = eps/2`, `0 <= x1 <= window`.
    pub x: Point,
    /// `u^eps - w^eps` at the final time.
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DefectReport {
    pub schema_version: u32,
    pub experiment: String,
    pub epsilon: f64,
    pub defects: Vec<CellIndex>,
    /// Largest `w^eps - u^eps`; the sandwich needs it `<= 0`.
    pub sandwich_violation: f64,
    /// Largest `|w^eps - u|` over the window.
    pub error: f64,
    /// `max |w^eps - u| / bound` over the window.
    pub fitted_c: f64,
    pub profile: Vec<DefectProfile>,
    pub assertions: Vec<Assertion>,
}

/// Holes removed on `scn.defects` against the fully perforated problem and
/// the perforated limit.
pub fn defect_experiment(scn: &Scenario, eps: f64, tables: &EffectiveTables, timings: &mut Timings) -> Result<DefectReport> {
    require_a7(scn, "the defect experiment")?;
    let w = scn.numerics.window;
    for z in &scn.defects {
        let c = [eps * (z[0] as f64 + 0.5), eps * (z[1] as f64 + 0.5)];
        let ring = c[0].abs().max(c[1].abs());
        if (ring - w).abs() <= eps {
            return Err(Error::Experiment(format!("defect {z:?} touches the boundary ring of the window")));
        }
    }
    let mut plain = scn.clone();
    plain.defects.clear();
    let times = scn.numerics.times();
    let t_end = scn.numerics.horizon;
    let wf = timings.time("defective".into(), || scn.solve(eps, Problem::Dirichlet, Record::Times(times.to_vec())))?;
    let uf = timings.time("perforated".into(), || plain.solve(eps, Problem::Dirichlet, Record::Times(times.to_vec())))?;
    let limit = plain.limit(tables, wf.dt)?;
    let nodes = field_nodes(&uf, w);
    let m0t = scn.model.m0() * t_end;
    let mut viol = f64::NEG_INFINITY;
    let mut err: f64 = 0.0;
    let mut fitted_c: f64 = 0.0;
    for &t in &times {
        let (a, b) = (wf.slice_at(t)?, uf.slice_at(t)?);
        for &i in &nodes {
            viol = viol.max(a[i] - b[i]);
            let x = wf.grid.node(i);
            let e = (a[i] - limit.hopf_lax_u(x, t)?.value).abs();
            err = err.max(e);
            let r = m0t + x[0].hypot(x[1]);
            let scale = (r / eps).ceil().max(1.0) as u64;
            let bound = (r + 1.0) * defect_density(&scn.defects, scale) + eps;
            fitted_c = fitted_c.max(e / bound);
        }
    }
    let last = (wf.slice_at(t_end)?, uf.slice_at(t_end)?);
    let profile = (0..=8)
        .filter_map(|j| {
            let x = [w * j as f64 / 8.0, eps / 2.0];
            let i = wf.grid.node_index(x)?;
            if !wf.classes[i].is_admissible() || !uf.classes[i].is_admissible() {
                return None;
            }
            Some(DefectProfile { x, gap: last.1[i] - last.0[i] })
        })
        .collect();
    let mut assertions =
        vec![Assertion::new("defective value below perforated value", viol <= 1e-12, format!("max violation {viol:.3e}"))];
    if scn.defects.is_empty() {
        assertions.push(Assertion::new("no defects: identical values", viol.abs() <= 1e-12, format!("{viol:.3e}")));
    }
    Ok(DefectReport {
        schema_version: SCHEMA_VERSION,
        experiment: "defect".into(),
        epsilon: eps,
        defects: scn.defects.iter().copied().collect(),
        sandwich_violation: viol,
        error: err,
        fitted_c,
        profile,
        assertions,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct A7Report {
    pub schema_version: u32,
    pub experiment: String,
    pub epsilon: f64,
    pub a7: bool,
    pub notice: Option<String>,
    pub max_difference: f64,
    pub location: (Point, f64),
    pub tolerance: f64,
    pub assertions: Vec<Assertion>,
}

/// `max |u^eps - u_sc^eps|` over all nodes and steps, against `2 slack`.
/// Without A7 the comparison is informational.
pub fn a7_equivalence(scn: &Scenario, eps: f64, slack: &Slack, timings: &mut Timings) -> Result<A7Report> {
    let d = timings.time("dirichlet".into(), || scn.solve(eps, Problem::Dirichlet, Record::All))?;
    let s = timings.time("state constraint".into(), || scn.solve(eps, Problem::StateConstraint, Record::All))?;
    let mut worst = (0.0, ([0.0, 0.0], 0.0));
    for (a, b) in d.slices.iter().zip(&s.slices) {
        for i in 0..d.grid.len() {
            if !d.classes[i].is_admissible() {
                continue;
            }
            let diff = (a.values[i] - b.values[i]).abs();
            if diff > worst.0 {
                worst = (diff, (d.grid.node(i), a.step as f64 * d.dt));
            }
        }
    }
    let a7 = scn.model.satisfies_a7();
    let tolerance = 2.0 * slack.eval(d.grid.h, d.dt, None);
    let mut assertions = Vec::new();
    let notice = if a7 {
        assertions.push(Assertion::new(
            "Dirichlet equals state constraint within 2 slack",
            worst.0 <= tolerance,
            format!("{:.3e} vs {tolerance:.3e}", worst.0),
        ));
        None
    } else {
        Some("A7 not satisfied, informational only".into())
    };
    Ok(A7Report {
        schema_version: SCHEMA_VERSION,
        experiment: "a7check".into(),
        epsilon: eps,
        a7,
        notice,
        max_difference: worst.0,
        location: worst.1,
        tolerance,
        assertions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_window_only_for_constant_data() {
        let mut scn = Scenario::reference();
        assert!(scn.periodic());
        assert!(scn.grid(0.25).unwrap().wrap);
        scn.data.g = DataFn::Func { name: "x1".into(), f: std::sync::Arc::new(|x: Point, _| x[0]) };
        assert!(!scn.periodic());
        let g = scn.grid(0.25).unwrap();
        assert!(!g.wrap && g.origin[0] < -scn.numerics.window - scn.model.m0() * scn.numerics.horizon);
        let mut d = Scenario::reference();
        d.defects.insert([0, 0]);
        assert!(!d.periodic());
    }

    #[test]
    fn slack_fit_recovers_exact_coefficients() {
        let truth = Slack { a: 0.5, b: 0.2, c: 0.3 };
        let pts: Vec<CalibrationPoint> = [(0.1, 0.05, None), (0.05, 0.01, None), (0.0625, 0.2, Some(2)), (0.0625, 0.2, Some(4)), (0.02, 0.1, Some(8))]
            .iter()
            .map(|&(h, dt, k)| CalibrationPoint { label: String::new(), h, dt, k, error: truth.eval(h, dt, k) })
            .collect();
        let (s, fit, scale) = fit_slack(&pts);
        for (x, y) in [(s.a, 0.5), (s.b, 0.2), (s.c, 0.3), (fit.a, 0.5)] {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        assert!((scale - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slack_dominates_noisy_points() {
        let pts: Vec<CalibrationPoint> = [(0.1, 0.05, None, 0.08), (0.05, 0.025, None, 0.03), (0.0625, 0.2, Some(2), 0.09), (0.0625, 0.2, Some(4), 0.07)]
            .iter()
            .map(|&(h, dt, k, e)| CalibrationPoint { label: String::new(), h, dt, k, error: e })
            .collect();
        let (s, _, _) = fit_slack(&pts);
        assert!(s.a >= 0.0 && s.b >= 0.0 && s.c >= 0.0);
        for p in &pts {
            assert!(s.eval(p.h, p.dt, p.k) >= p.error - 1e-12);
        }
    }

    #[test]
    fn line_fit_matches_closed_form() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.1, 4.9, 7.0];
        let (s, i) = fit_line(&xs, &ys);
        // Closed-form regression coefficients for these four points.
        assert!((s - 1.98).abs() < 1e-12);
        assert!((i - 1.03).abs() < 1e-12);
    }

    #[test]
    fn cone_formula() {
        assert_eq!(cone_hopf_lax([0.0, 0.0], 0.5), 0.0);
        assert!((cone_hopf_lax([0.75, 0.0], 0.5) - 0.5).abs() < 1e-15);
        assert!((cone_hopf_lax([0.3, 0.0], 0.5) - 0.09).abs() < 1e-15);
        assert_eq!(cone_hopf_lax([3.0, 0.0], 0.5), 1.0);
    }

    #[test]
    fn pinned_configuration_is_enforced() {
        let scn = Scenario::reference();
        assert!(check_pinned(&scn, &Scenario::reference_epsilons()).is_ok());
        assert!(matches!(check_pinned(&scn, &[0.25, 0.125]), Err(Error::Refused(_))));
        let mut other = scn.clone();
        other.data = BoundaryData::new(DataFn::Const(0.0), DataFn::Const(2.0), 0.0, 0.0);
        assert!(matches!(check_pinned(&other, &Scenario::reference_epsilons()), Err(Error::Refused(_))));
    }

    #[test]
    fn drivers_refuse_non_a7_models() {
        let scn = Scenario::reference();
        let t = EffectiveTables::from_lagrangian(0.1, 2.5, |v| 0.5 * (v[0] * v[0] + v[1] * v[1]));
        let mut tm = Timings::default();
        assert!(matches!(diluted_experiment(&scn, &[0.25], &t, &mut tm), Err(Error::Refused(_))));
        assert!(matches!(defect_experiment(&scn, 0.25, &t, &mut tm), Err(Error::Refused(_))));
    }
}
