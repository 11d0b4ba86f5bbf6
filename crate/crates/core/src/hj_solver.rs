//! Semi-Lagrangian dynamic programming for the ε-problem.
//!
//! One time step computes, at every admissible node `x`,
//!
//! ```text
//! u_{n+1}(x) = min_v [ dt L(x/eps, v) + I[u_n](x - dt v) ]
//! ```
//!
//! over a polar velocity stencil, with `I` bilinear interpolation. Feet whose
//! interpolation touches an inadmissible node are rejected: inadmissible
//! nodes hold `+inf`, so such candidates can never win. In the Dirichlet
//! problem boundary nodes additionally take the exit candidate
//! `b(x^, x^/eps)`, `x^` the projection of `x` onto the hole boundary.

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_compatibility, BoundaryData, LagrangianModel};
use crate::error::{Error, Result};
use crate::geometry::{DomainView, Point, PointClass};

/// Traceback code: the Dirichlet exit won at this node and step.
pub const TB_EXIT: u16 = u16::MAX;
/// Traceback code: node is not admissible.
pub const TB_NONE: u16 = u16::MAX - 1;

/// Uniform node lattice over an axis-aligned window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Point,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    /// Periodic window: the node at `origin + nx h` is identified with the
    /// node at `origin`.
    pub wrap: bool,
}

impl Grid {
    /// Grid over `[lo, hi]`. Side lengths must be integer multiples of `h`.
    pub fn new(lo: Point, hi: Point, h: f64, wrap: bool) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Grid(format!("spacing must be positive, got {h}")));
        }
        let mut n = [0usize; 2];
        for a in 0..2 {
            let side = hi[a] - lo[a];
            let k = (side / h).round();
            if !(side > 0.0) || (side / h - k).abs() > 1e-9 * k.max(1.0) {
                return Err(Error::Grid(format!("window side {side} is not a multiple of h = {h}")));
            }
            n[a] = k as usize + usize::from(!wrap);
        }
        if n[0] < 2 || n[1] < 2 {
            return Err(Error::Grid("window needs at least two nodes per axis".into()));
        }
        Ok(Grid { origin: lo, h, nx: n[0], ny: n[1], wrap })
    }

    /// Periodic grid on `[lo, lo + side]^2`.
    pub fn periodic(lo: f64, side: f64, h: f64) -> Result<Self> {
        Grid::new([lo, lo], [lo + side, lo + side], h, true)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, idx: usize) -> Point {
        let (i, j) = (idx % self.nx, idx / self.nx);
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    /// Index of the node at `x` (up to `1e-6 h`), with periodic reduction
    /// for wrapped grids.
    pub fn node_index(&self, x: Point) -> Option<usize> {
        let mut ij = [0usize; 2];
        let n = [self.nx, self.ny];
        for a in 0..2 {
            let f = (x[a] - self.origin[a]) / self.h;
            let k = f.round();
            if (f - k).abs() > 1e-6 {
                return None;
            }
            let mut k = k as i64;
            if self.wrap {
                k = k.rem_euclid(n[a] as i64);
            } else if k < 0 || k >= n[a] as i64 {
                return None;
            }
            ij[a] = k as usize;
        }
        Some(ij[1] * self.nx + ij[0])
    }

    /// Nearest node to `x`, clamped or wrapped into the window.
    pub fn nearest_node(&self, x: Point) -> usize {
        let n = [self.nx as i64, self.ny as i64];
        let mut ij = [0i64; 2];
        for a in 0..2 {
            let k = ((x[a] - self.origin[a]) / self.h).round() as i64;
            ij[a] = if self.wrap { k.rem_euclid(n[a]) } else { k.clamp(0, n[a] - 1) };
        }
        (ij[1] * n[0] + ij[0]) as usize
    }

    /// Up to four grid neighbours of a node (wrapping when periodic).
    pub fn neighbours(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = ((idx % self.nx) as i64, (idx / self.nx) as i64);
        [(1, 0), (-1, 0), (0, 1), (0, -1)].into_iter().filter_map(move |(di, dj)| {
            let (mut a, mut b) = (i + di, j + dj);
            if self.wrap {
                a = a.rem_euclid(self.nx as i64);
                b = b.rem_euclid(self.ny as i64);
            } else if a < 0 || b < 0 || a >= self.nx as i64 || b >= self.ny as i64 {
                return None;
            }
            Some(b as usize * self.nx + a as usize)
        })
    }
}

/// Velocity set of the scheme. The zero velocity always comes first.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub velocities: Vec<Point>,
}

impl Stencil {
    /// `ndir` directions times `nrad` radii in `(0, vmax]`, plus `v = 0`.
    pub fn polar(vmax: f64, ndir: usize, nrad: usize) -> Self {
        let mut velocities = vec![[0.0, 0.0]];
        for r in 1..=nrad {
            let rad = vmax * r as f64 / nrad as f64;
            for d in 0..ndir {
                let a = std::f64::consts::TAU * d as f64 / ndir as f64;
                velocities.push([rad * a.cos(), rad * a.sin()]);
            }
        }
        Stencil { velocities }
    }

    pub fn custom(velocities: Vec<Point>) -> Self {
        Stencil { velocities }
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }

    /// Largest velocity component; feet stay in the 3 x 3 node neighbourhood
    /// when `dt` times this is at most `h`.
    pub fn max_component(&self) -> f64 {
        self.velocities.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    Dirichlet,
    StateConstraint,
}

/// Which time slices a solve keeps.
#[derive(Clone, Debug, PartialEq)]
pub enum Record {
    All,
    /// The initial and final slices plus these times.
    Times(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub ndir: usize,
    pub nrad: usize,
    /// Replaces the polar stencil.
    pub stencil: Option<Stencil>,
    /// Explicit running cost per stencil velocity, overriding the model.
    pub cost_table: Option<Vec<f64>>,
    /// Keep argmin codes; `None` enables it for windows up to 512^2 nodes.
    pub traceback: Option<bool>,
    pub record: Record,
    pub check_connectivity: bool,
    /// Maximum number of nodes at which `g <= b_bar` is verified.
    pub compatibility_samples: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            ndir: 32,
            nrad: 16,
            stencil: None,
            cost_table: None,
            traceback: None,
            record: Record::All,
            check_connectivity: true,
            compatibility_samples: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub step: usize,
    pub values: Vec<f64>,
}

/// Values of a solve over the grid at the recorded time steps.
#[derive(Clone, Debug)]
pub struct ValueField {
    pub grid: Grid,
    pub dt: f64,
    pub steps: usize,
    pub epsilon: f64,
    pub problem: Option<Problem>,
    pub provenance: String,
    pub classes: Vec<PointClass>,
    pub slices: Vec<Slice>,
    pub velocities: Vec<Point>,
    pub(crate) traceback: Option<Vec<u16>>,
}

impl ValueField {
    pub fn slice(&self, step: usize) -> Option<&[f64]> {
        self.slices.iter().find(|s| s.step == step).map(|s| s.values.as_slice())
    }

    /// Slice at time `t`, which must be a recorded multiple of `dt`.
    pub fn slice_at(&self, t: f64) -> Result<&[f64]> {
        let step = self.step_of(t)?;
        self.slice(step).ok_or_else(|| Error::Query(format!("time {t} was not recorded")))
    }

    pub fn step_of(&self, t: f64) -> Result<usize> {
        let s = t / self.dt;
        let k = s.round();
        if (s - k).abs() > 1e-6 || k < 0.0 || k as usize > self.steps {
            return Err(Error::Query(format!("time {t} is not a grid time (dt = {})", self.dt)));
        }
        Ok(k as usize)
    }

    pub fn value(&self, x: Point, t: f64) -> Result<f64> {
        let idx = self
            .grid
            .node_index(x)
            .ok_or_else(|| Error::Query(format!("({}, {}) is not a grid node", x[0], x[1])))?;
        Ok(self.slice_at(t)?[idx])
    }

    pub fn final_slice(&self) -> &[f64] {
        &self.slices.last().expect("a field always holds its final slice").values
    }

    pub fn has_traceback(&self) -> bool {
        self.traceback.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitKind {
    Initial,
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalPath {
    /// Nodes from `(x, t)` backwards in time; each entry is `(node, time)`.
    pub nodes: Vec<(Point, f64)>,
    pub tau: f64,
    pub exit: ExitKind,
}

/// Per-velocity interpolation corners as offsets into the padded array.
#[derive(Clone, Debug)]
struct Foot {
    offsets: [isize; 4],
    weights: [f64; 4],
    len: usize,
}

enum Cost {
    /// `node[i] + vel[k]`.
    Separable { node: Vec<f64>, vel: Vec<f64> },
    /// Full table, row per node.
    Table { k: usize, values: Vec<f64> },
    /// Per-velocity only.
    Velocity(Vec<f64>),
}

/// Precomputed classification, stencil and costs for one configuration;
/// reusable for both problems and for restarts.
pub struct SolverSetup {
    grid: Grid,
    dt: f64,
    steps: usize,
    epsilon: f64,
    provenance: String,
    classes: Vec<PointClass>,
    initial: Vec<f64>,
    exit_values: Vec<f64>,
    stencil: Stencil,
    feet: Vec<Foot>,
    cost: Cost,
    traceback: bool,
    record: Record,
    width: usize,
}

impl SolverSetup {
    pub fn new(
        view: &DomainView,
        model: &LagrangianModel,
        data: &BoundaryData,
        grid: &Grid,
        horizon: f64,
        opts: &SolverOptions,
    ) -> Result<Self> {
        if !(horizon >= 0.0) {
            return Err(Error::Grid(format!("horizon must be nonnegative, got {horizon}")));
        }
        let h = grid.h;
        let m0 = model.m0();
        let steps = if horizon == 0.0 { 0 } else { (horizon * m0 / h - 1e-9).ceil() as usize };
        let dt = if steps == 0 { h / m0 } else { horizon / steps as f64 };
        let stencil = opts.stencil.clone().unwrap_or_else(|| Stencil::polar(m0, opts.ndir, opts.nrad));
        if stencil.velocities.is_empty() || stencil.velocities.len() >= TB_NONE as usize {
            return Err(Error::Grid("stencil size out of range".into()));
        }
        let reach = dt * stencil.max_component();
        if reach > h * (1.0 + 1e-12) {
            return Err(Error::Cfl { reach, h });
        }

        let tol = h / 2.0;
        let nodes: Vec<Point> = (0..grid.len()).map(|i| grid.node(i)).collect();
        let classes: Vec<PointClass> = nodes.par_iter().map(|&x| view.classify_point(x, tol)).collect();
        if opts.check_connectivity {
            let components = count_components(grid, &classes);
            if components > 1 {
                return Err(Error::Disconnected { components });
            }
        }

        let initial: Vec<f64> = nodes
            .iter()
            .zip(&classes)
            .map(|(&x, c)| if c.is_admissible() { data.g(x) } else { f64::INFINITY })
            .collect();
        let eps = view.epsilon();
        let exit_values: Vec<f64> = nodes
            .par_iter()
            .zip(&classes)
            .map(|(&x, c)| match c {
                PointClass::Boundary => {
                    let xh = view.project_to_boundary(x).unwrap_or(x);
                    data.b(xh, [xh[0] / eps, xh[1] / eps])
                }
                _ => f64::INFINITY,
            })
            .collect();

        let width = grid.nx + 2;
        let feet: Vec<Foot> = stencil.velocities.iter().map(|&v| foot(v, dt, h, width)).collect();

        let cost = if let Some(table) = &opts.cost_table {
            if table.len() != stencil.velocities.len() {
                return Err(Error::Grid("cost table length differs from the stencil".into()));
            }
            Cost::Velocity(table.iter().map(|l| dt * l).collect())
        } else {
            match model.separable() {
                Some((q, pot, limit)) if stencil.max_speed() <= limit => Cost::Separable {
                    node: nodes.iter().map(|x| dt * pot.eval([x[0] / eps, x[1] / eps])).collect(),
                    vel: stencil
                        .velocities
                        .iter()
                        .map(|v| dt * (0.5 * (v[0] * v[0] + v[1] * v[1]) + q[0] * v[0] + q[1] * v[1]))
                        .collect(),
                },
                _ => {
                    let k = stencil.velocities.len();
                    if grid.len() * k > 1 << 25 {
                        return Err(Error::NodeBudget { needed: grid.len() * k, budget: 1 << 25 });
                    }
                    let values = nodes
                        .par_iter()
                        .flat_map_iter(|&x| {
                            let y = [x[0] / eps, x[1] / eps];
                            stencil.velocities.iter().map(move |&v| dt * model.lagrangian(y, v))
                        })
                        .collect();
                    Cost::Table { k, values }
                }
            }
        };

        let traceback = opts.traceback.unwrap_or(grid.len() <= 512 * 512);
        Ok(SolverSetup {
            grid: grid.clone(),
            dt,
            steps,
            epsilon: eps,
            provenance: format!("{};{};{}", view.canonical(), model.canonical(), data.canonical()),
            classes,
            initial,
            exit_values,
            stencil,
            feet,
            cost,
            traceback,
            record: opts.record.clone(),
            width,
        })
    }

    /// Verifies `g <= b_bar` on (a subsample of) the admissible nodes.
    pub fn check_compatibility(&self, view: &DomainView, data: &BoundaryData, samples: usize) -> Result<()> {
        let bbar = data.bbar(view.cell(), view.eta());
        let adm: Vec<usize> = (0..self.grid.len()).filter(|&i| self.classes[i].is_admissible()).collect();
        let stride = (adm.len() / samples.max(1)).max(1);
        check_compatibility(data, &bbar, adm.iter().step_by(stride).map(|&i| self.grid.node(i)))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn classes(&self) -> &[PointClass] {
        &self.classes
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    fn padded_index(&self, idx: usize) -> usize {
        let (i, j) = (idx % self.grid.nx, idx / self.grid.nx);
        (j + 1) * self.width + i + 1
    }

    fn pad(&self, values: &[f64], padded: &mut [f64]) {
        let (nx, ny, w) = (self.grid.nx, self.grid.ny, self.width);
        for j in 0..ny {
            padded[(j + 1) * w + 1..(j + 1) * w + 1 + nx].copy_from_slice(&values[j * nx..(j + 1) * nx]);
        }
        if self.grid.wrap {
            for j in 1..=ny {
                padded[j * w] = padded[j * w + nx];
                padded[j * w + nx + 1] = padded[j * w + 1];
            }
            padded.copy_within(ny * w..(ny + 1) * w, 0);
            padded.copy_within(w..2 * w, (ny + 1) * w);
        } else {
            padded[..w].fill(f64::INFINITY);
            padded[(ny + 1) * w..].fill(f64::INFINITY);
            for j in 1..=ny {
                padded[j * w] = f64::INFINITY;
                padded[j * w + nx + 1] = f64::INFINITY;
            }
        }
    }

    #[inline]
    fn continuation(&self, padded: &[f64], idx: usize) -> (f64, u16) {
        let p = self.padded_index(idx);
        let mut best = f64::INFINITY;
        let mut arg = TB_NONE;
        let interp = |ft: &Foot| {
            let mut s = 0.0;
            for c in 0..ft.len {
                s += ft.weights[c] * padded[(p as isize + ft.offsets[c]) as usize];
            }
            s
        };
        match &self.cost {
            Cost::Separable { node, vel } => {
                for (k, ft) in self.feet.iter().enumerate() {
                    let cand = vel[k] + interp(ft);
                    if cand < best {
                        best = cand;
                        arg = k as u16;
                    }
                }
                best += node[idx];
            }
            Cost::Table { k: nk, values } => {
                let row = &values[idx * nk..(idx + 1) * nk];
                for (k, ft) in self.feet.iter().enumerate() {
                    let cand = row[k] + interp(ft);
                    if cand < best {
                        best = cand;
                        arg = k as u16;
                    }
                }
            }
            Cost::Velocity(vel) => {
                for (k, ft) in self.feet.iter().enumerate() {
                    let cand = vel[k] + interp(ft);
                    if cand < best {
                        best = cand;
                        arg = k as u16;
                    }
                }
            }
        }
        (best, arg)
    }

    #[inline]
    fn update(&self, padded: &[f64], idx: usize, problem: Problem) -> (f64, u16) {
        if !self.classes[idx].is_admissible() {
            return (f64::INFINITY, TB_NONE);
        }
        let (cont, arg) = self.continuation(padded, idx);
        if problem == Problem::Dirichlet && self.exit_values[idx] < cont {
            return (self.exit_values[idx], TB_EXIT);
        }
        (cont, arg)
    }

    /// One update of a single node from a full previous slice; returns the
    /// new value and the winning stencil index (or [`TB_EXIT`]).
    pub fn step_update(&self, prev: &[f64], node: usize, problem: Problem) -> (f64, u16) {
        let mut padded = vec![0.0; self.width * (self.grid.ny + 2)];
        self.pad(prev, &mut padded);
        self.update(&padded, node, problem)
    }

    pub fn solve(&self, problem: Problem) -> ValueField {
        self.run(problem, 0, self.initial.clone())
    }

    /// Restart from a slice at step `start`, producing the slices after it.
    pub fn resume_from(&self, problem: Problem, start: usize, values: &[f64]) -> ValueField {
        self.run(problem, start, values.to_vec())
    }

    fn keep_steps(&self) -> Option<Vec<usize>> {
        match &self.record {
            Record::All => None,
            Record::Times(times) => {
                let mut s: Vec<usize> = times
                    .iter()
                    .map(|t| (t / self.dt).round() as usize)
                    .filter(|&k| k <= self.steps)
                    .collect();
                s.push(self.steps);
                Some(s)
            }
        }
    }

    fn run(&self, problem: Problem, start: usize, mut cur: Vec<f64>) -> ValueField {
        let n = self.grid.len();
        let keep = self.keep_steps();
        let keeps = |s: usize| keep.as_ref().map_or(true, |k| s == 0 || k.contains(&s));
        let mut slices = Vec::new();
        if keeps(start) {
            slices.push(Slice { step: start, values: cur.clone() });
        }
        let mut tb = self.traceback.then(|| vec![TB_NONE; n * (self.steps + 1)]);
        let mut padded = vec![0.0; self.width * (self.grid.ny + 2)];
        let mut next = vec![0.0; n];
        let nx = self.grid.nx;
        for step in start + 1..=self.steps {
            self.pad(&cur, &mut padded);
            let codes: Option<&mut [u16]> = tb.as_mut().map(|t| &mut t[step * n..(step + 1) * n]);
            match codes {
                Some(codes) => {
                    next.par_chunks_mut(nx).zip(codes.par_chunks_mut(nx)).enumerate().for_each(|(j, (row, crow))| {
                        for i in 0..nx {
                            let (v, c) = self.update(&padded, j * nx + i, problem);
                            row[i] = v;
                            crow[i] = c;
                        }
                    });
                }
                None => {
                    next.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
                        for (i, r) in row.iter_mut().enumerate() {
                            *r = self.update(&padded, j * nx + i, problem).0;
                        }
                    });
                }
            }
            std::mem::swap(&mut cur, &mut next);
            if keeps(step) {
                slices.push(Slice { step, values: cur.clone() });
            }
        }
        if slices.last().map(|s| s.step) != Some(self.steps.max(start)) {
            slices.push(Slice { step: self.steps.max(start), values: cur });
        }
        ValueField {
            grid: self.grid.clone(),
            dt: self.dt,
            steps: self.steps,
            epsilon: self.epsilon,
            problem: Some(problem),
            provenance: self.provenance.clone(),
            classes: self.classes.clone(),
            slices,
            velocities: self.stencil.velocities.clone(),
            traceback: tb,
        }
    }
}

fn foot(v: Point, dt: f64, h: f64, width: usize) -> Foot {
    let mut offsets = [0isize; 4];
    let mut weights = [0.0; 4];
    let mut len = 0;
    let d = [-dt * v[0] / h, -dt * v[1] / h];
    let base = [d[0].floor().clamp(-1.0, 0.0), d[1].floor().clamp(-1.0, 0.0)];
    let fr = [d[0] - base[0], d[1] - base[1]];
    for (b, wy) in [(0, 1.0 - fr[1]), (1, fr[1])] {
        for (a, wx) in [(0, 1.0 - fr[0]), (1, fr[0])] {
            let w = wx * wy;
            if w > 0.0 {
                let oy = base[1] as isize + b;
                let ox = base[0] as isize + a;
                offsets[len] = oy * width as isize + ox;
                weights[len] = w;
                len += 1;
            }
        }
    }
    Foot { offsets, weights, len }
}

/// Connected components of the admissible nodes under grid moves.
pub fn count_components(grid: &Grid, classes: &[PointClass]) -> usize {
    let mut seen = vec![false; grid.len()];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if seen[start] || !classes[start].is_admissible() {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for j in grid.neighbours(i) {
                if !seen[j] && classes[j].is_admissible() {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    components
}

/// `u^eps` with the generalized Dirichlet condition.
pub fn solve_dirichlet(
    view: &DomainView,
    model: &LagrangianModel,
    data: &BoundaryData,
    grid: &Grid,
    horizon: f64,
) -> Result<ValueField> {
    let opts = SolverOptions::default();
    let setup = SolverSetup::new(view, model, data, grid, horizon, &opts)?;
    setup.check_compatibility(view, data, opts.compatibility_samples)?;
    Ok(setup.solve(Problem::Dirichlet))
}

/// The state-constraint twin: boundary data ignored.
pub fn solve_state_constraint(
    view: &DomainView,
    model: &LagrangianModel,
    data: &BoundaryData,
    grid: &Grid,
    horizon: f64,
) -> Result<ValueField> {
    let setup = SolverSetup::new(view, model, data, grid, horizon, &SolverOptions::default())?;
    Ok(setup.solve(Problem::StateConstraint))
}

/// Greedy backtracking of the stored argmins from `(x, t)`.
pub fn extract_optimal_path(field: &ValueField, x: Point, t: f64) -> Result<OptimalPath> {
    let tb = field.traceback.as_ref().ok_or(Error::NoTraceback)?;
    let grid = &field.grid;
    let n = grid.len();
    let mut step = field.step_of(t)?;
    let mut idx = grid
        .node_index(x)
        .ok_or_else(|| Error::Query(format!("({}, {}) is not a grid node", x[0], x[1])))?;
    if !field.classes[idx].is_admissible() {
        return Err(Error::Query("start node is not admissible".into()));
    }
    let mut nodes = vec![(grid.node(idx), step as f64 * field.dt)];
    while step > 0 {
        let code = tb[step * n + idx];
        if code == TB_EXIT {
            return Ok(OptimalPath { nodes, tau: step as f64 * field.dt, exit: ExitKind::Boundary });
        }
        if code == TB_NONE {
            return Err(Error::Query(format!("no argmin recorded at step {step}")));
        }
        let v = field.velocities[code as usize];
        let here = grid.node(idx);
        let foot = [here[0] - field.dt * v[0], here[1] - field.dt * v[1]];
        idx = nearest_admissible(grid, &field.classes, foot);
        step -= 1;
        nodes.push((grid.node(idx), step as f64 * field.dt));
    }
    Ok(OptimalPath { nodes, tau: 0.0, exit: ExitKind::Initial })
}

/// Nearest admissible corner of the cell containing `x`.
fn nearest_admissible(grid: &Grid, classes: &[PointClass], x: Point) -> usize {
    let fx = [(x[0] - grid.origin[0]) / grid.h, (x[1] - grid.origin[1]) / grid.h];
    let base = [fx[0].floor(), fx[1].floor()];
    let mut best = (f64::INFINITY, grid.nearest_node(x));
    for a in 0..2 {
        for b in 0..2 {
            let c = [grid.origin[0] + (base[0] + a as f64) * grid.h, grid.origin[1] + (base[1] + b as f64) * grid.h];
            let idx = grid.nearest_node(c);
            let d = (c[0] - x[0]).hypot(c[1] - x[1]);
            if classes[idx].is_admissible() && d < best.0 {
                best = (d, idx);
            }
        }
    }
    best.1
}

/// Shared handle for repeated solves of one configuration.
pub type SharedSetup = Arc<SolverSetup>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DataFn, Hamiltonian, ModelOptions, Potential};
    use crate::geometry::UnitCellGeometry;
    use proptest::prelude::*;

    fn free_model() -> LagrangianModel {
        LagrangianModel::new(Hamiltonian::free(), ModelOptions::default()).unwrap()
    }

    fn reference_view(eps: f64) -> DomainView {
        DomainView::new(UnitCellGeometry::centered_disc(0.25).unwrap(), eps).unwrap()
    }

    fn zero_one() -> BoundaryData {
        BoundaryData::new(DataFn::Const(0.0), DataFn::Const(1.0), 0.0, 0.0)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new([0.0, 0.0], [1.0, 1.0], 0.3, false).is_err());
        let g = Grid::new([-1.0, -1.0], [1.0, 1.0], 0.25, false).unwrap();
        assert_eq!((g.nx, g.ny), (9, 9));
        let p = Grid::periodic(-1.0, 2.0, 0.25).unwrap();
        assert_eq!(p.nx, 8);
        assert_eq!(p.node_index([1.0, 1.0]), Some(0));
        assert_eq!(p.node_index([0.0, 0.0]), Some(4 * 8 + 4));
    }

    #[test]
    fn zero_data_a7_gives_zero() {
        let view = reference_view(0.5);
        let grid = Grid::periodic(-1.0, 2.0, 1.0 / 16.0).unwrap();
        let f = solve_dirichlet(&view, &free_model(), &zero_one(), &grid, 0.5).unwrap();
        for s in &f.slices {
            for (v, c) in s.values.iter().zip(&f.classes) {
                if c.is_admissible() {
                    assert_eq!(*v, 0.0);
                } else {
                    assert!(v.is_infinite());
                }
            }
        }
        let sc = solve_state_constraint(&view, &free_model(), &zero_one(), &grid, 0.5).unwrap();
        assert!(sc.final_slice().iter().zip(&f.classes).all(|(v, c)| !c.is_admissible() || *v == 0.0));
        let path = extract_optimal_path(&f, [0.0, 0.0], 0.5).unwrap();
        assert_eq!(path.exit, ExitKind::Initial);
        assert_eq!(path.tau, 0.0);
    }

    #[test]
    fn constant_field_is_preserved() {
        let view = reference_view(0.5);
        let grid = Grid::periodic(-1.0, 2.0, 1.0 / 16.0).unwrap();
        let data = BoundaryData::new(DataFn::Const(0.0), DataFn::Const(5.0), 0.0, 0.0);
        let setup = SolverSetup::new(&view, &free_model(), &data, &grid, 0.5, &SolverOptions::default()).unwrap();
        let c = 0.375;
        let prev: Vec<f64> =
            setup.classes().iter().map(|c0| if c0.is_admissible() { c } else { f64::INFINITY }).collect();
        for node in (0..grid.len()).filter(|&i| setup.classes()[i].is_admissible()) {
            let (v, arg) = setup.step_update(&prev, node, Problem::Dirichlet);
            assert_eq!(v, c);
            assert_eq!(arg, 0);
        }
    }

    #[test]
    fn two_node_toy_matches_enumeration() {
        // Hole-free 2 x 2 grid, explicit L per velocity, arbitrary previous slice.
        let view = DomainView::new(UnitCellGeometry::empty(), 1.0).unwrap();
        let grid = Grid::new([0.0, 0.0], [1.0, 1.0], 1.0, false).unwrap();
        let stencil = Stencil::custom(vec![[0.0, 0.0], [-1.0, 0.0], [-0.5, 0.0], [0.0, -1.0], [-1.0, -1.0]]);
        let costs = vec![0.9, 0.1, 0.3, 0.05, 0.2];
        let model = LagrangianModel::new(Hamiltonian::free(), ModelOptions { m0: Some(1.0), ..Default::default() })
            .unwrap();
        let opts = SolverOptions { stencil: Some(stencil.clone()), cost_table: Some(costs.clone()), ..Default::default() };
        let setup = SolverSetup::new(&view, &model, &zero_one(), &grid, 1.0, &opts).unwrap();
        assert_eq!(setup.dt(), 1.0);
        let prev = vec![2.0, 0.5, 1.25, 0.75];
        let enumerate = |node: usize| {
            let x = grid.node(node);
            let mut best = (f64::INFINITY, 0);
            for (k, v) in stencil.velocities.iter().enumerate() {
                let f = [x[0] - v[0], x[1] - v[1]];
                if f[0] < 0.0 || f[1] < 0.0 || f[0] > 1.0 || f[1] > 1.0 {
                    continue;
                }
                let (i0, j0) = (f[0].floor().min(0.0) as usize, f[1].floor().min(0.0) as usize);
                let (a, b) = (f[0] - i0 as f64, f[1] - j0 as f64);
                let at = |i: usize, j: usize| prev[j * 2 + i];
                // Bilinear on the unit square; skip zero weights.
                let mut s = 0.0;
                for (i, j, w) in [(0, 0, (1.0 - a) * (1.0 - b)), (1, 0, a * (1.0 - b)), (0, 1, (1.0 - a) * b), (1, 1, a * b)] {
                    if w > 0.0 {
                        s += w * at(i, j);
                    }
                }
                let c = costs[k] + s;
                if c < best.0 {
                    best = (c, k);
                }
            }
            best
        };
        let (v, arg) = setup.step_update(&prev, 0, Problem::StateConstraint);
        let (want, karg) = enumerate(0);
        assert_eq!(v, want);
        assert_eq!(arg as usize, karg);
        assert_eq!(v, 0.1 + 0.5);
    }

    #[test]
    fn hole_free_matches_hopf_lax() {
        // g(x) = min(|x|, 1), b irrelevant: u(0, t) = 0.
        let view = DomainView::new(UnitCellGeometry::empty(), 1.0).unwrap();
        let g: crate::dynamics::DataClosure = Arc::new(|x: Point, _| x[0].hypot(x[1]).min(1.0));
        let data = BoundaryData::new(DataFn::Func { name: "cone".into(), f: g }, DataFn::Const(10.0), 1.0, 0.0);
        let model =
            LagrangianModel::new(Hamiltonian::free(), ModelOptions { lip_g: 1.0, ..Default::default() }).unwrap();
        let grid = Grid::periodic(-2.0, 4.0, 1.0 / 16.0).unwrap();
        let f = solve_dirichlet(&view, &model, &data, &grid, 0.5).unwrap();
        assert!(f.value([0.0, 0.0], 0.5).unwrap().abs() < 1e-12);
        // Away from the origin: u = |x| - t/2 for |x| in [t, 1].
        let u = f.value([0.75, 0.0], 0.5).unwrap();
        assert!((u - 0.5).abs() < 0.05, "{u}");
    }

    #[test]
    fn dpp_restart_is_bit_exact() {
        let view = reference_view(0.25);
        let model = LagrangianModel::new(Hamiltonian::quadratic(Potential::reference_bump()), ModelOptions { m0: Some(2.0), ..Default::default() })
            .unwrap();
        let grid = Grid::periodic(-1.0, 2.0, 1.0 / 32.0).unwrap();
        let setup = SolverSetup::new(&view, &model, &zero_one(), &grid, 0.5, &SolverOptions::default()).unwrap();
        let full = setup.solve(Problem::Dirichlet);
        let s = setup.steps() / 2;
        let rest = setup.resume_from(Problem::Dirichlet, s, full.slice(s).unwrap());
        for sl in &rest.slices {
            assert_eq!(sl.values, full.slice(sl.step).unwrap());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let view = reference_view(0.5);
        let bad = BoundaryData::new(DataFn::Const(2.0), DataFn::Const(1.0), 0.0, 0.0);
        let grid = Grid::periodic(-1.0, 2.0, 1.0 / 16.0).unwrap();
        assert!(matches!(
            solve_dirichlet(&view, &free_model(), &bad, &grid, 0.5),
            Err(Error::CompatibilityViolated { .. })
        ));
        let opts = SolverOptions { stencil: Some(Stencil::custom(vec![[0.0, 0.0], [100.0, 0.0]])), ..Default::default() };
        assert!(matches!(
            SolverSetup::new(&view, &free_model(), &zero_one(), &grid, 0.5, &opts),
            Err(Error::Cfl { .. })
        ));
        // A hole wider than the cell gap splits a thin strip window.
        let walls = DomainView::new(UnitCellGeometry::centered_disc(0.45).unwrap(), 1.0).unwrap();
        let strip = Grid::new([0.0, 0.45], [1.0, 0.55], 0.05, false).unwrap();
        assert!(matches!(
            SolverSetup::new(&walls, &free_model(), &zero_one(), &strip, 0.5, &SolverOptions::default()),
            Err(Error::Disconnected { .. })
        ));
        let f = {
            let o = SolverOptions { traceback: Some(false), ..Default::default() };
            SolverSetup::new(&view, &free_model(), &zero_one(), &grid, 0.5, &o).unwrap().solve(Problem::Dirichlet)
        };
        assert!(matches!(extract_optimal_path(&f, [0.0, 0.0], 0.5), Err(Error::NoTraceback)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn scheme_is_monotone(bumps in prop::collection::vec((0usize..256, 0.0..1.0f64), 1..8)) {
            let view = reference_view(0.5);
            let model = LagrangianModel::new(Hamiltonian::quadratic(Potential::reference_bump()), ModelOptions::default()).unwrap();
            let grid = Grid::periodic(-0.5, 1.0, 1.0 / 16.0).unwrap();
            let setup = SolverSetup::new(&view, &model, &zero_one(), &grid, 0.25, &SolverOptions::default()).unwrap();
            let base: Vec<f64> = (0..grid.len()).map(|i| {
                let x = grid.node(i);
                if setup.classes()[i].is_admissible() { 0.3 * (x[0] * 3.0).sin() + 0.2 * x[1] } else { f64::INFINITY }
            }).collect();
            let mut raised = base.clone();
            for (i, d) in bumps {
                raised[i] += d;
            }
            for node in 0..grid.len() {
                let a = setup.step_update(&base, node, Problem::Dirichlet).0;
                let b = setup.step_update(&raised, node, Problem::Dirichlet).0;
                prop_assert!(b >= a);
            }
        }
    }
}
