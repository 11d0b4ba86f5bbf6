//! The homogenized problem: the tau-parametrized Hopf-Lax value built from
//! an effective Lagrangian table, the same value through the averaged
//! metric, and a residual check for `max{u - b_bar, u_t + H_bar(Du)} = 0`.

use crate::dynamics::{Bbar, BoundaryData};
use crate::geometry::{Point, PointClass};
use crate::hj_solver::{Grid, Slice, ValueField};
use crate::metric::{CellMetric, EffectiveTables};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// Paths that start at time 0 and pay `g`.
    Initial,
    /// Paths that leave through the boundary at some `tau > 0`.
    Boundary,
    /// The limiting candidate `b_bar(x)`.
    Ceiling,
}

/// A limit value with the achieving start time and point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitValue {
    pub value: f64,
    pub tau: f64,
    pub y: Point,
    pub branch: Branch,
}

impl LimitValue {
    /// Smaller value wins; ties go to smaller `tau`, then smaller `y`.
    fn offer(&mut self, value: f64, tau: f64, y: Point, branch: Branch) {
        let better = value < self.value
            || (value == self.value && (tau < self.tau || (tau == self.tau && lex_less(y, self.y))));
        if better {
            *self = LimitValue { value, tau, y, branch };
        }
    }
}

fn lex_less(a: Point, b: Point) -> bool {
    a[0] < b[0] || (a[0] == b[0] && a[1] < b[1])
}

#[derive(Clone, Debug)]
pub struct LimitOptions {
    /// Velocity bound; the search covers `|x - y| <= m0 (t - tau)`.
    pub m0: f64,
    /// Spacing of the `tau` grid.
    pub dtau: f64,
    /// Box containing every query point.
    pub region: [Point; 2],
    /// Largest query time.
    pub horizon: f64,
}

/// Limit-value evaluator over one table and one data set.
pub struct LimitSolver<'a> {
    tables: &'a EffectiveTables,
    data: &'a BoundaryData,
    bbar: Bbar,
    opts: LimitOptions,
    /// `(L_bar(v), v)` for `|v| <= m0`, sorted by value then `v`.
    cone: Vec<(f64, Point)>,
    g_floor: f64,
    b_floor: f64,
}

/// Lower bound of a Lipschitz function over a box, from a sampling grid.
fn lower_bound(f: impl Fn(Point) -> f64 + Sync, lip: f64, lo: Point, hi: Point) -> f64 {
    if !lip.is_finite() {
        return f64::NEG_INFINITY;
    }
    let delta = 0.05;
    let n = [((hi[0] - lo[0]) / delta).ceil() as usize + 1, ((hi[1] - lo[1]) / delta).ceil() as usize + 1];
    let min = (0..n[0] * n[1])
        .into_par_iter()
        .map(|i| f([lo[0] + (i % n[0]) as f64 * delta, lo[1] + (i / n[0]) as f64 * delta]))
        .reduce(|| f64::INFINITY, f64::min);
    min - lip * delta * std::f64::consts::FRAC_1_SQRT_2
}

impl<'a> LimitSolver<'a> {
    pub fn new(tables: &'a EffectiveTables, data: &'a BoundaryData, bbar: Bbar, opts: LimitOptions) -> Result<Self> {
        if !(opts.dtau > 0.0) || !(opts.m0 > 0.0) || !(opts.horizon >= 0.0) {
            return Err(Error::Query("limit solver needs positive m0 and dtau".into()));
        }
        if tables.radius + 1e-9 < opts.m0 {
            return Err(Error::ConeNotCovered(format!(
                "table radius {} is below the velocity bound {}",
                tables.radius, opts.m0
            )));
        }
        let mut cone = Vec::new();
        for (i, &l) in tables.lbar.iter().enumerate() {
            let v = tables.velocity(i);
            if v[0].hypot(v[1]) > opts.m0 + 1e-9 {
                continue;
            }
            if l.is_nan() {
                return Err(Error::ConeNotCovered(format!("table has no value at v = ({}, {})", v[0], v[1])));
            }
            cone.push((l, v));
        }
        cone.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1[0].total_cmp(&b.1[0])).then(a.1[1].total_cmp(&b.1[1])));
        let grow = opts.m0 * opts.horizon + 1e-9;
        let lo = [opts.region[0][0] - grow, opts.region[0][1] - grow];
        let hi = [opts.region[1][0] + grow, opts.region[1][1] + grow];
        let g_floor = lower_bound(|x| data.g(x), data.lip_g, lo, hi);
        let b_floor = lower_bound(|x| bbar.eval(x), data.lip_b, lo, hi);
        Ok(LimitSolver { tables, data, bbar, opts, cone, g_floor, b_floor })
    }

    pub fn tables(&self) -> &EffectiveTables {
        self.tables
    }

    pub fn bbar(&self) -> &Bbar {
        &self.bbar
    }

    pub fn options(&self) -> &LimitOptions {
        &self.opts
    }

    fn check_query(&self, x: Point, t: f64) -> Result<()> {
        let [lo, hi] = self.opts.region;
        let inside = (0..2).all(|a| x[a] >= lo[a] - 1e-9 && x[a] <= hi[a] + 1e-9);
        if !inside || !(t >= 0.0) || t > self.opts.horizon + 1e-9 {
            return Err(Error::Query(format!("({}, {}) at t = {t} is outside the declared region", x[0], x[1])));
        }
        Ok(())
    }

    /// `tau` grid values strictly inside `(0, t)`.
    fn taus(&self, t: f64) -> impl Iterator<Item = f64> + '_ {
        let dtau = self.opts.dtau;
        (1..).map(move |j| j as f64 * dtau).take_while(move |&tau| tau < t - 1e-12 * t.max(1.0))
    }

    /// Scans `s * L_bar(v) + f(x - s v)` over the cone, best first.
    fn scan(&self, best: &mut LimitValue, bound: &mut f64, x: Point, s: f64, tau: f64, floor: f64, f: impl Fn(Point) -> f64, branch: Branch) {
        if s * self.cone[0].0 + floor > *bound {
            return;
        }
        for &(l, v) in &self.cone {
            if s * l + floor > *bound {
                break;
            }
            let y = [x[0] - s * v[0], x[1] - s * v[1]];
            let val = s * l + f(y);
            best.offer(val, tau, y, branch);
            *bound = bound.min(val);
        }
    }

    /// Limit value `u(x, t)`.
    pub fn hopf_lax_u(&self, x: Point, t: f64) -> Result<LimitValue> {
        self.check_query(x, t)?;
        if t == 0.0 {
            return Ok(LimitValue { value: self.data.g(x), tau: 0.0, y: x, branch: Branch::Initial });
        }
        let ceiling = self.bbar.eval(x);
        let mut best = LimitValue { value: f64::INFINITY, tau: f64::INFINITY, y: x, branch: Branch::Ceiling };
        let mut bound = ceiling;
        self.scan(&mut best, &mut bound, x, t, 0.0, self.g_floor, |y| self.data.g(y), Branch::Initial);
        for tau in self.taus(t) {
            self.scan(&mut best, &mut bound, x, t - tau, tau, self.b_floor, |y| self.bbar.eval(y), Branch::Boundary);
        }
        best.offer(ceiling, t, x, Branch::Ceiling);
        Ok(best)
    }

    /// Value through slice `s`: continuation from `u(., s)` against exits
    /// in `[s, t)` and the ceiling. Matches [`LimitSolver::hopf_lax_u`] when
    /// `s` is on the `tau` grid.
    pub fn split_value(&self, x: Point, t: f64, s: f64) -> Result<f64> {
        self.check_query(x, t)?;
        if !(s > 0.0 && s < t) {
            return Err(Error::Query(format!("split time {s} must lie in (0, {t})")));
        }
        let mut best = LimitValue { value: f64::INFINITY, tau: f64::INFINITY, y: x, branch: Branch::Ceiling };
        let mut bound = self.bbar.eval(x);
        for &(l, v) in &self.cone {
            let y = [x[0] - (t - s) * v[0], x[1] - (t - s) * v[1]];
            let inner = self.hopf_lax_u(y, s)?.value;
            best.offer((t - s) * l + inner, s, y, Branch::Initial);
        }
        bound = bound.min(best.value);
        for tau in self.taus(t).filter(|&tau| tau >= s - 1e-12) {
            self.scan(&mut best, &mut bound, x, t - tau, tau, self.b_floor, |y| self.bbar.eval(y), Branch::Boundary);
        }
        Ok(best.value.min(self.bbar.eval(x)))
    }

    /// The same value with `(t - tau) L_bar((x - y)/(t - tau))` replaced by
    /// the averaged metric at scale `k`. The `tau` grid is the metric's step
    /// `dt/k`; `y` runs over a square grid of spacing `hy` around `x`.
    pub fn ubar(&self, metric: &CellMetric, x: Point, t: f64, k: usize, hy: f64) -> Result<LimitValue> {
        self.check_query(x, t)?;
        if t == 0.0 {
            return Ok(LimitValue { value: self.data.g(x), tau: 0.0, y: x, branch: Branch::Initial });
        }
        if metric.vmax() + 1e-9 < self.opts.m0 {
            return Err(Error::ConeNotCovered(format!(
                "lattice speed {} is below the velocity bound {}",
                metric.vmax(),
                self.opts.m0
            )));
        }
        let kf = k as f64;
        let (steps, dt) = metric.plan(kf * t);
        let mut cands: Vec<(usize, LimitValue)> = Vec::new();
        let mut failure = None;
        metric.backward_layers([kf * x[0], kf * x[1]], kf * t, |n, layer| {
            if n == 0 || failure.is_some() {
                return;
            }
            let j = steps - n;
            let tau = j as f64 * dt / kf;
            let s = n as f64 * dt / kf;
            let initial = j == 0;
            if !initial && self.b_floor == f64::INFINITY {
                return;
            }
            let r = self.opts.m0 * s;
            let half = (r / hy + 1e-9).floor() as i64;
            let side = 2 * half + 1;
            let found = (0..side * side)
                .into_par_iter()
                .filter_map(|i| {
                    let d = [(i % side - half) as f64 * hy, (i / side - half) as f64 * hy];
                    if d[0].hypot(d[1]) > r + 1e-9 {
                        return None;
                    }
                    let y = [x[0] + d[0], x[1] + d[1]];
                    let f = if initial { self.data.g(y) } else { self.bbar.eval(y) };
                    Some(metric.min_over_representatives(layer, [kf * y[0], kf * y[1]]).map(|m| (m / kf + f, y)))
                })
                .collect::<Result<Vec<_>>>();
            match found {
                Ok(list) => {
                    let mut best = LimitValue { value: f64::INFINITY, tau, y: x, branch: Branch::Boundary };
                    let branch = if initial { Branch::Initial } else { Branch::Boundary };
                    for (v, y) in list {
                        best.offer(v, tau, y, branch);
                    }
                    cands.push((j, best));
                }
                Err(e) => failure = Some(e),
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        cands.sort_by_key(|c| c.0);
        let mut best = LimitValue { value: f64::INFINITY, tau: f64::INFINITY, y: x, branch: Branch::Ceiling };
        for (_, c) in cands {
            best.offer(c.value, c.tau, c.y, c.branch);
        }
        best.offer(self.bbar.eval(x), t, x, Branch::Ceiling);
        Ok(best)
    }

    /// Limit values on every node of `grid` at the given times, which must
    /// be multiples of the `tau` spacing.
    pub fn field(&self, grid: &Grid, times: &[f64]) -> Result<ValueField> {
        let dt = self.opts.dtau;
        let mut steps = Vec::new();
        for &t in times {
            let s = (t / dt).round();
            if ((t / dt) - s).abs() > 1e-6 || s < 0.0 {
                return Err(Error::Query(format!("time {t} is not a multiple of {dt}")));
            }
            steps.push(s as usize);
        }
        let mut slices = Vec::new();
        for (&t, &step) in times.iter().zip(&steps) {
            let values = (0..grid.len())
                .into_par_iter()
                .map(|i| self.hopf_lax_u(grid.node(i), step as f64 * dt).map(|v| v.value).or_else(|e| {
                    if t == 0.0 { Ok(self.data.g(grid.node(i))) } else { Err(e) }
                }))
                .collect::<Result<Vec<f64>>>()?;
            slices.push(Slice { step, values });
        }
        Ok(ValueField {
            grid: grid.clone(),
            dt,
            steps: steps.iter().copied().max().unwrap_or(0),
            epsilon: 0.0,
            problem: None,
            provenance: format!("limit;{}", self.tables.key),
            classes: vec![PointClass::Interior; grid.len()],
            slices,
            velocities: Vec::new(),
            traceback: None,
        })
    }
}

/// Extremes of `r1 = u - b_bar`, `r2 = u_t + H_bar(Du)` and of the combined
/// `max(r1, r2)` over interior space-time nodes.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub points: usize,
    pub r1_min: f64,
    pub r1_max: f64,
    pub r2_min: f64,
    pub r2_max: f64,
    /// Largest `max(r1, r2)`.
    pub above: f64,
    /// Largest `-max(r1, r2)`.
    pub below: f64,
    /// Largest `|max(r1, r2)|` and where it occurs.
    pub combined: f64,
    pub worst: (Point, f64),
    pub h: f64,
}

/// Central-difference residual of the obstacle equation on a field with at
/// least three nodes per axis and three recorded slices at equal spacing.
pub fn obstacle_residual(
    field: &ValueField,
    hbar: impl Fn(Point) -> Result<f64> + Sync,
    bbar: &Bbar,
) -> Result<ResidualReport> {
    let g = &field.grid;
    if g.nx < 3 || g.ny < 3 || field.slices.len() < 3 {
        return Err(Error::Grid("residual needs at least 3 nodes per axis and 3 slices".into()));
    }
    let mut slices: Vec<&Slice> = field.slices.iter().collect();
    slices.sort_by_key(|s| s.step);
    let gap = slices[1].step - slices[0].step;
    if gap == 0 || slices.windows(2).any(|w| w[1].step - w[0].step != gap) {
        return Err(Error::Grid("residual needs equally spaced slices".into()));
    }
    let dts = 2.0 * gap as f64 * field.dt;
    let mut rows = Vec::new();
    for w in slices.windows(3) {
        let (a, m, b) = (&w[0].values, &w[1].values, &w[2].values);
        let t = m_time(w[1].step, field.dt);
        let part = (1..g.ny - 1)
            .into_par_iter()
            .flat_map_iter(|j| (1..g.nx - 1).map(move |i| (i, j)))
            .map(|(i, j)| {
                let c = j * g.nx + i;
                let x = g.node(c);
                let du = [(m[c + 1] - m[c - 1]) / (2.0 * g.h), (m[c + g.nx] - m[c - g.nx]) / (2.0 * g.h)];
                let r1 = m[c] - bbar.eval(x);
                let r2 = (b[c] - a[c]) / dts + hbar(du)?;
                Ok((x, t, r1, r2))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.extend(part);
    }
    let mut rep = ResidualReport {
        points: rows.len(),
        r1_min: f64::INFINITY,
        r1_max: f64::NEG_INFINITY,
        r2_min: f64::INFINITY,
        r2_max: f64::NEG_INFINITY,
        above: f64::NEG_INFINITY,
        below: f64::NEG_INFINITY,
        combined: 0.0,
        worst: ([0.0, 0.0], 0.0),
        h: g.h,
    };
    for (x, t, r1, r2) in rows {
        rep.r1_min = rep.r1_min.min(r1);
        rep.r1_max = rep.r1_max.max(r1);
        rep.r2_min = rep.r2_min.min(r2);
        rep.r2_max = rep.r2_max.max(r2);
        let c = r1.max(r2);
        rep.above = rep.above.max(c);
        rep.below = rep.below.max(-c);
        if c.abs() > rep.combined {
            rep.combined = c.abs();
            rep.worst = (x, t);
        }
    }
    Ok(rep)
}

fn m_time(step: usize, dt: f64) -> f64 {
    step as f64 * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DataFn;
    use crate::geometry::UnitCellGeometry;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn quad(v: Point) -> f64 {
        0.5 * (v[0] * v[0] + v[1] * v[1])
    }

    fn opts(m0: f64, dtau: f64, r: f64, horizon: f64) -> LimitOptions {
        LimitOptions { m0, dtau, region: [[-r, -r], [r, r]], horizon }
    }

    fn smooth_g() -> BoundaryData {
        let g = DataFn::Func { name: "quad".into(), f: Arc::new(|x: Point, _| 0.5 * (x[0] * x[0] + x[1] * x[1])) };
        BoundaryData::new(g, DataFn::Const(10.0), 3.0, 0.0)
    }

    #[test]
    fn constant_data_gives_zero() {
        let t = EffectiveTables::from_lagrangian(0.1, 3.0, |v| quad(v) + 0.01 * v[0].abs());
        let data = BoundaryData::new(DataFn::Const(0.0), DataFn::Const(1.0), 0.0, 0.0);
        let bbar = data.bbar(&UnitCellGeometry::centered_disc(0.25).unwrap(), 1.0);
        let s = LimitSolver::new(&t, &data, bbar, opts(2.0, 1.0 / 32.0, 1.0, 1.0)).unwrap();
        let u = s.hopf_lax_u([0.0, 0.0], 1.0).unwrap();
        assert_eq!(u.value, 0.0);
        assert_eq!(u.branch, Branch::Initial);
        assert_eq!(u.y, [0.0, 0.0]);
        assert_eq!(s.hopf_lax_u([0.3, -0.2], 0.0).unwrap().value, 0.0);
    }

    #[test]
    fn quadratic_hopf_lax() {
        // u = |x|^2 / (2 (1 + t)) for g = |x|^2/2 and L = |v|^2/2.
        let t = EffectiveTables::from_lagrangian(0.02, 3.0, quad);
        let data = smooth_g();
        let bbar = data.bbar(&UnitCellGeometry::empty(), 1.0);
        let s = LimitSolver::new(&t, &data, bbar, opts(2.5, 0.05, 1.0, 1.0)).unwrap();
        for &(x, tt) in &[([0.5, 0.0], 1.0), ([-0.7, 0.4], 0.5), ([0.2, 0.9], 0.25)] {
            let exact = (x[0] * x[0] + x[1] * x[1]) / (2.0 * (1.0 + tt));
            let u = s.hopf_lax_u(x, tt).unwrap();
            assert!((u.value - exact).abs() < 2e-3, "{x:?} {tt}: {} vs {exact}", u.value);
            assert_eq!(u.branch, Branch::Initial);
        }
    }

    #[test]
    fn ceiling_and_cone_errors() {
        let t = EffectiveTables::from_lagrangian(0.1, 1.5, quad);
        let data = smooth_g();
        let bbar = data.bbar(&UnitCellGeometry::empty(), 1.0);
        assert!(matches!(
            LimitSolver::new(&t, &data, bbar.clone(), opts(2.0, 0.1, 1.0, 1.0)),
            Err(Error::ConeNotCovered(_))
        ));
        let s = LimitSolver::new(&t, &data, bbar, opts(1.5, 0.1, 1.0, 1.0)).unwrap();
        assert!(s.hopf_lax_u([3.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn obstacle_caps_the_value() {
        // g = 1 + x1 against b = 1.2: where u would exceed 1.2 the ceiling binds.
        let t = EffectiveTables::from_lagrangian(0.05, 2.5, quad);
        let g = DataFn::Func { name: "tilt".into(), f: Arc::new(|x: Point, _| (1.0 + x[0]).min(1.2)) };
        let data = BoundaryData::new(g, DataFn::Const(1.2), 1.0, 0.0);
        let bbar = data.bbar(&UnitCellGeometry::centered_disc(0.25).unwrap(), 1.0);
        let s = LimitSolver::new(&t, &data, bbar.clone(), opts(2.0, 0.05, 1.0, 1.0)).unwrap();
        let mut active = 0;
        for i in -10..=10 {
            for &tt in &[0.25, 0.5, 1.0] {
                let x = [i as f64 * 0.1, 0.0];
                let u = s.hopf_lax_u(x, tt).unwrap();
                assert!(u.value <= bbar.eval(x) + 1e-12);
                if u.value == bbar.eval(x) {
                    active += 1;
                }
            }
        }
        assert!(active > 0);
        let grid = Grid::new([-0.5, -0.5], [0.5, 0.5], 0.1, false).unwrap();
        let field = s.field(&grid, &[0.4, 0.45, 0.5]).unwrap();
        let rep = obstacle_residual(&field, |p: Point| Ok(quad(p)), &bbar).unwrap();
        assert!(rep.r1_max <= 1e-12);
        assert!(rep.combined < 0.05, "{rep:?}");
    }

    #[test]
    fn residual_is_first_order() {
        let t = EffectiveTables::from_lagrangian(0.02, 2.5, quad);
        let data = smooth_g();
        let bbar = data.bbar(&UnitCellGeometry::empty(), 1.0);
        for h in [0.2, 0.1, 0.05] {
            let s = LimitSolver::new(&t, &data, bbar.clone(), opts(2.0, h / 2.0, 0.6, 1.0)).unwrap();
            let grid = Grid::new([-0.6, -0.6], [0.6, 0.6], h, false).unwrap();
            let times = [0.5 - h / 2.0, 0.5, 0.5 + h / 2.0];
            let field = s.field(&grid, &times).unwrap();
            let rep = obstacle_residual(&field, |p: Point| Ok(quad(p)), &bbar).unwrap();
            assert!(rep.combined <= 0.05 * h, "h = {h}: {}", rep.combined);
        }
    }

    #[test]
    fn split_through_a_slice() {
        let t = EffectiveTables::from_lagrangian(0.1, 2.0, quad);
        let g = DataFn::Func { name: "ramp".into(), f: Arc::new(|x: Point, _| 0.3 * x[0] + 0.2 * x[1].abs()) };
        let data = BoundaryData::new(g, DataFn::Const(0.8), 0.4, 0.0);
        let bbar = data.bbar(&UnitCellGeometry::centered_disc(0.25).unwrap(), 1.0);
        let s = LimitSolver::new(&t, &data, bbar, opts(2.0, 0.125, 4.0, 1.0)).unwrap();
        for x in [[0.0, 0.0], [0.4, -0.3], [-1.0, 0.5]] {
            let direct = s.hopf_lax_u(x, 1.0).unwrap().value;
            let split = s.split_value(x, 1.0, 0.5).unwrap();
            assert!(split <= direct + 1e-12, "{split} > {direct}");
            assert!(direct - split < 0.02, "{direct} vs {split}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn monotone_in_data(c in 0.0..0.5f64, x0 in -0.8..0.8f64, x1 in -0.8..0.8f64, tt in 0.05..1.0f64) {
            let t = EffectiveTables::from_lagrangian(0.1, 2.0, quad);
            let cell = UnitCellGeometry::centered_disc(0.25).unwrap();
            let mk = |shift: f64| {
                let g = DataFn::Func { name: format!("g+{shift}"), f: Arc::new(move |x: Point, _| 0.2 * x[0] + shift) };
                BoundaryData::new(g, DataFn::Const(0.6 + shift), 0.2, 0.0)
            };
            let (lo, hi) = (mk(0.0), mk(c));
            let a = LimitSolver::new(&t, &lo, lo.bbar(&cell, 1.0), opts(2.0, 0.1, 1.0, 1.0)).unwrap();
            let b = LimitSolver::new(&t, &hi, hi.bbar(&cell, 1.0), opts(2.0, 0.1, 1.0, 1.0)).unwrap();
            let ua = a.hopf_lax_u([x0, x1], tt).unwrap().value;
            let ub = b.hopf_lax_u([x0, x1], tt).unwrap().value;
            prop_assert!(ub >= ua - 1e-12);
        }

        #[test]
        fn wider_cone_changes_nothing(x0 in -0.8..0.8f64, x1 in -0.8..0.8f64, tt in 0.05..1.0f64) {
            let t = EffectiveTables::from_lagrangian(0.1, 3.0, quad);
            let g = DataFn::Func { name: "ramp".into(), f: Arc::new(|x: Point, _| 0.5 * x[0] - 0.3 * x[1]) };
            let data = BoundaryData::new(g, DataFn::Const(2.0), 0.6, 0.0);
            let cell = UnitCellGeometry::centered_disc(0.25).unwrap();
            let a = LimitSolver::new(&t, &data, data.bbar(&cell, 1.0), opts(2.0, 0.1, 1.0, 1.0)).unwrap();
            let b = LimitSolver::new(&t, &data, data.bbar(&cell, 1.0), opts(3.0, 0.1, 1.0, 1.0)).unwrap();
            prop_assert_eq!(a.hopf_lax_u([x0, x1], tt).unwrap().value, b.hopf_lax_u([x0, x1], tt).unwrap().value);
        }
    }
}
