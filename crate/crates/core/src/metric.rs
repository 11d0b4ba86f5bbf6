//! Travel costs on the unscaled perforated plane and the effective tables.
//!
//! Paths live on the lattice `(1/N) Z^2`. In one step of length `dt` a path
//! jumps by an integer offset `o` with `|o| <= R`, paying
//! `dt L(z, o h / dt)` where `z` is the arrival node. A jump is allowed when
//! both endpoints and sampled points of the segment are admissible. The cost
//! `m~(tau, t, y, x)` is the minimum over jump sequences from `y` to `x` in
//! `ceil((t - tau) vmax / (R h))` equal steps.
//!
//! Because the lattice moves are exact there is no interpolation: the
//! dynamic program equals the minimum over all admissible jump sequences.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::LagrangianModel;
use crate::error::{Error, Result};
use crate::geometry::{DomainView, Point, PointClass, UnitCellGeometry};

pub type Node = [i64; 2];

/// Inclusive box of lattice nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IBox {
    pub lo: Node,
    pub hi: Node,
}

impl IBox {
    pub fn around(nodes: impl IntoIterator<Item = Node>) -> Option<Self> {
        let mut it = nodes.into_iter();
        let first = it.next()?;
        let mut b = IBox { lo: first, hi: first };
        for z in it {
            for a in 0..2 {
                b.lo[a] = b.lo[a].min(z[a]);
                b.hi[a] = b.hi[a].max(z[a]);
            }
        }
        Some(b)
    }

    pub fn grow(&self, r: i64) -> Self {
        IBox { lo: [self.lo[0] - r, self.lo[1] - r], hi: [self.hi[0] + r, self.hi[1] + r] }
    }

    pub fn intersect(&self, o: &IBox) -> Option<Self> {
        let b = IBox {
            lo: [self.lo[0].max(o.lo[0]), self.lo[1].max(o.lo[1])],
            hi: [self.hi[0].min(o.hi[0]), self.hi[1].min(o.hi[1])],
        };
        (b.lo[0] <= b.hi[0] && b.lo[1] <= b.hi[1]).then_some(b)
    }

    pub fn width(&self) -> usize {
        (self.hi[0] - self.lo[0] + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.width() * (self.hi[1] - self.lo[1] + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, z: Node) -> bool {
        (0..2).all(|a| z[a] >= self.lo[a] && z[a] <= self.hi[a])
    }

    fn index(&self, z: Node) -> usize {
        (z[1] - self.lo[1]) as usize * self.width() + (z[0] - self.lo[0]) as usize
    }

    fn node(&self, i: usize) -> Node {
        let w = self.width();
        [self.lo[0] + (i % w) as i64, self.lo[1] + (i / w) as i64]
    }
}

/// A lattice graph with a fixed move set. Per-node queries go through a
/// key computed once per node.
pub trait MoveGraph: Sync {
    fn moves(&self) -> &[Node];
    fn key(&self, z: Node) -> usize;
    fn admissible(&self, key: usize) -> bool;
    /// Whether the jump `z - moves[k] -> z` is allowed.
    fn allowed(&self, key: usize, k: usize) -> bool;
    /// Cost of the jump `z - moves[k] -> z`.
    fn cost(&self, key: usize, k: usize) -> f64;
}

/// Values of one DP layer on a box; `+inf` marks unreachable nodes.
#[derive(Clone, Debug)]
pub struct Layer {
    pub bx: IBox,
    pub values: Vec<f64>,
    pub args: Option<Vec<u16>>,
}

impl Layer {
    pub fn get(&self, z: Node) -> f64 {
        if self.bx.contains(z) {
            self.values[self.bx.index(z)]
        } else {
            f64::INFINITY
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Node, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.bx.node(i), v))
    }
}

const NO_ARG: u16 = u16::MAX;

/// Forward DP: `W_{n+1}(z) = min_k [W_n(z - o_k) + cost(z, k)]` on the boxes
/// given by `boxes(n)`, started from `sources` (node, initial value).
/// Returns every layer when `keep` is set, else only the last one.
pub fn forward_dp<G: MoveGraph>(
    g: &G,
    sources: &[(Node, f64)],
    steps: usize,
    boxes: impl Fn(usize) -> Option<IBox>,
    keep: bool,
) -> Vec<Layer> {
    let b0 = boxes(0).expect("the first box contains the sources");
    let mut first = Layer { bx: b0, values: vec![f64::INFINITY; b0.len()], args: None };
    for &(z, v) in sources {
        if b0.contains(z) && g.admissible(g.key(z)) {
            let i = b0.index(z);
            first.values[i] = first.values[i].min(v);
        }
    }
    let mut layers = vec![first];
    for n in 1..=steps {
        let prev = layers.last().unwrap();
        let Some(bx) = boxes(n) else {
            let empty = IBox { lo: [0, 0], hi: [0, 0] };
            let dead = Layer { bx: empty, values: vec![f64::INFINITY], args: None };
            if keep {
                layers.push(dead);
            } else {
                layers[0] = dead;
            }
            continue;
        };
        let w = bx.width();
        let mut values = vec![f64::INFINITY; bx.len()];
        let mut args = keep.then(|| vec![NO_ARG; bx.len()]);
        let moves = g.moves();
        let work = |(row, (vals, mut arow)): (usize, (&mut [f64], Option<&mut [u16]>))| {
            let zy = bx.lo[1] + row as i64;
            for (i, out) in vals.iter_mut().enumerate() {
                let z = [bx.lo[0] + i as i64, zy];
                let key = g.key(z);
                if !g.admissible(key) {
                    continue;
                }
                let mut best = f64::INFINITY;
                let mut arg = NO_ARG;
                for (k, o) in moves.iter().enumerate() {
                    let from = [z[0] - o[0], z[1] - o[1]];
                    if !prev.bx.contains(from) || !g.allowed(key, k) {
                        continue;
                    }
                    let p = prev.values[prev.bx.index(from)];
                    if p == f64::INFINITY {
                        continue;
                    }
                    let cand = p + g.cost(key, k);
                    if cand < best {
                        best = cand;
                        arg = k as u16;
                    }
                }
                *out = best;
                if let Some(a) = arow.as_deref_mut() {
                    a[i] = arg;
                }
            }
        };
        match args.as_mut() {
            Some(a) => values
                .par_chunks_mut(w)
                .zip(a.par_chunks_mut(w))
                .enumerate()
                .for_each(|(r, (v, a))| work((r, (v, Some(a))))),
            None => values.par_chunks_mut(w).enumerate().for_each(|(r, v)| work((r, (v, None)))),
        }
        let layer = Layer { bx, values, args };
        if keep {
            layers.push(layer);
        } else {
            layers[0] = layer;
        }
    }
    layers
}

/// Backward DP: `W_n(z) = min_k [cost(z + o_k, k) + W_{n+1}(z + o_k)]`,
/// from terminal values at `targets`. Returns the layer `steps` steps back.
pub fn backward_dp<G: MoveGraph>(
    g: &G,
    targets: &[(Node, f64)],
    steps: usize,
    boxes: impl Fn(usize) -> Option<IBox>,
) -> Layer {
    backward_dp_visit(g, targets, steps, boxes, |_, _| {})
}

/// [`backward_dp`] that hands every layer (including layer 0) to `visit`.
pub fn backward_dp_visit<G: MoveGraph>(
    g: &G,
    targets: &[(Node, f64)],
    steps: usize,
    boxes: impl Fn(usize) -> Option<IBox>,
    mut visit: impl FnMut(usize, &Layer),
) -> Layer {
    let b0 = boxes(0).expect("the first box contains the targets");
    let mut cur = Layer { bx: b0, values: vec![f64::INFINITY; b0.len()], args: None };
    for &(z, v) in targets {
        if b0.contains(z) && g.admissible(g.key(z)) {
            let i = b0.index(z);
            cur.values[i] = cur.values[i].min(v);
        }
    }
    visit(0, &cur);
    for n in 1..=steps {
        let Some(bx) = boxes(n) else {
            return Layer { bx: IBox { lo: [0, 0], hi: [0, 0] }, values: vec![f64::INFINITY], args: None };
        };
        let w = bx.width();
        let mut values = vec![f64::INFINITY; bx.len()];
        let moves = g.moves();
        let next = &cur;
        values.par_chunks_mut(w).enumerate().for_each(|(row, vals)| {
            let zy = bx.lo[1] + row as i64;
            for (i, out) in vals.iter_mut().enumerate() {
                let z = [bx.lo[0] + i as i64, zy];
                if !g.admissible(g.key(z)) {
                    continue;
                }
                let mut best = f64::INFINITY;
                for (k, o) in moves.iter().enumerate() {
                    let to = [z[0] + o[0], z[1] + o[1]];
                    if !next.bx.contains(to) {
                        continue;
                    }
                    let p = next.values[next.bx.index(to)];
                    let kt = g.key(to);
                    if p == f64::INFINITY || !g.allowed(kt, k) {
                        continue;
                    }
                    let cand = g.cost(kt, k) + p;
                    if cand < best {
                        best = cand;
                    }
                }
                *out = best;
            }
        });
        cur = Layer { bx, values, args: None };
        visit(n, &cur);
    }
    cur
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricQuery {
    pub tau: f64,
    pub t: f64,
    pub y: Point,
    pub x: Point,
}

impl MetricQuery {
    pub fn new(tau: f64, t: f64, y: Point, x: Point) -> Self {
        MetricQuery { tau, t, y, x }
    }

    fn duration(&self) -> Result<f64> {
        if !(self.t > self.tau) {
            return Err(Error::Query(format!("need t > tau, got tau = {}, t = {}", self.tau, self.t)));
        }
        Ok(self.t - self.tau)
    }
}

#[derive(Clone, Debug)]
pub struct MetricOptions {
    /// Lattice nodes per unit length.
    pub nodes_per_unit: usize,
    /// Jump radius in nodes.
    pub move_radius: f64,
    /// Fastest speed a single step must be able to realize; defaults to the
    /// model's velocity bound.
    pub vmax: Option<f64>,
    /// Largest DP box, in nodes.
    pub node_budget: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions { nodes_per_unit: 16, move_radius: 8.0, vmax: None, node_budget: 4_000_000 }
    }
}

/// Cost result with the snapped endpoints and one optimal path.
#[derive(Clone, Debug)]
pub struct MetricResult {
    pub cost: f64,
    pub path: Vec<Point>,
    pub snap: [f64; 2],
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MbarStar {
    pub k: usize,
    pub value: f64,
    /// `|value(k) - value(k/2)|`; `None` when `k/2 < 1`.
    pub richardson: Option<f64>,
}

/// Precomputed lattice, admissibility and jump checks for one cell.
pub struct CellMetric {
    cell: UnitCellGeometry,
    model: LagrangianModel,
    n: i64,
    h: f64,
    vmax: f64,
    radius: f64,
    moves: Vec<Node>,
    classes: Vec<PointClass>,
    /// `allowed[phase * moves + k]` for the jump arriving at a node.
    allowed: Vec<bool>,
    budget: usize,
}

/// Per-duration cost table over a [`CellMetric`].
struct Timed<'a> {
    m: &'a CellMetric,
    /// Per arrival phase.
    node_cost: Vec<f64>,
    /// Per move.
    move_cost: Vec<f64>,
    /// Full table `phase * moves + k` when `L` is not separable.
    table: Option<Vec<f64>>,
}

impl MoveGraph for Timed<'_> {
    fn moves(&self) -> &[Node] {
        &self.m.moves
    }

    #[inline]
    fn key(&self, z: Node) -> usize {
        self.m.phase(z)
    }

    #[inline]
    fn admissible(&self, ph: usize) -> bool {
        self.m.classes[ph].is_admissible()
    }

    #[inline]
    fn allowed(&self, ph: usize, k: usize) -> bool {
        self.m.allowed[ph * self.m.moves.len() + k]
    }

    #[inline]
    fn cost(&self, ph: usize, k: usize) -> f64 {
        match &self.table {
            Some(t) => t[ph * self.m.moves.len() + k],
            None => self.node_cost[ph] + self.move_cost[k],
        }
    }
}

impl CellMetric {
    pub fn new(cell: &UnitCellGeometry, model: &LagrangianModel, opts: &MetricOptions) -> Result<Self> {
        let n = opts.nodes_per_unit as i64;
        if n < 2 {
            return Err(Error::Grid("metric lattice needs at least 2 nodes per unit".into()));
        }
        let h = 1.0 / n as f64;
        let vmax = opts.vmax.unwrap_or(model.m0());
        if !(vmax > 0.0) || !(opts.move_radius >= 1.0) {
            return Err(Error::Grid("vmax must be positive and the move radius at least 1".into()));
        }
        let view = DomainView::new(cell.clone(), 1.0)?;
        let tol = h / 2.0;
        let classes: Vec<PointClass> = (0..n * n)
            .map(|p| view.classify_point([(p % n) as f64 * h, (p / n) as f64 * h], tol))
            .collect();
        let r = opts.move_radius;
        let ri = r.floor() as i64;
        let mut moves = vec![[0, 0]];
        for oy in -ri..=ri {
            for ox in -ri..=ri {
                if (ox, oy) != (0, 0) && ((ox * ox + oy * oy) as f64) <= r * r + 1e-9 {
                    moves.push([ox, oy]);
                }
            }
        }
        let nm = moves.len();
        let allowed: Vec<bool> = (0..(n * n) as usize)
            .into_par_iter()
            .flat_map_iter(|p| {
                let z = [(p as i64) % n, (p as i64) / n];
                let (classes, moves, view) = (&classes, &moves, &view);
                (0..nm).map(move |k| {
                    let o = moves[k];
                    let from = [z[0] - o[0], z[1] - o[1]];
                    let ph = |q: Node| (q[1].rem_euclid(n) * n + q[0].rem_euclid(n)) as usize;
                    if !classes[ph(z)].is_admissible() || !classes[ph(from)].is_admissible() {
                        return false;
                    }
                    let len = ((o[0] * o[0] + o[1] * o[1]) as f64).sqrt();
                    let samples = (2.0 * len).ceil() as usize;
                    (1..samples).all(|s| {
                        let f = s as f64 / samples as f64;
                        let q = [(from[0] as f64 + f * o[0] as f64) * h, (from[1] as f64 + f * o[1] as f64) * h];
                        view.classify_point(q, tol) != PointClass::Exterior
                    })
                })
            })
            .collect();
        let _ = nm;
        Ok(CellMetric {
            cell: cell.clone(),
            model: model.clone(),
            n,
            h,
            vmax,
            radius: r,
            moves,
            classes,
            allowed,
            budget: opts.node_budget,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn model(&self) -> &LagrangianModel {
        &self.model
    }

    pub fn cell(&self) -> &UnitCellGeometry {
        &self.cell
    }

    pub fn move_count(&self) -> usize {
        self.moves.len()
    }

    /// Canonical description of the lattice parameters.
    pub fn canonical(&self) -> String {
        format!(
            "{};{};N={};R={:?};vmax={:?}",
            self.cell.canonical(),
            self.model.canonical(),
            self.n,
            self.radius,
            self.vmax
        )
    }

    #[inline]
    fn phase(&self, z: Node) -> usize {
        (z[1].rem_euclid(self.n) * self.n + z[0].rem_euclid(self.n)) as usize
    }

    pub fn point(&self, z: Node) -> Point {
        [z[0] as f64 * self.h, z[1] as f64 * self.h]
    }

    pub fn class(&self, z: Node) -> PointClass {
        self.classes[self.phase(z)]
    }

    fn reach(&self) -> i64 {
        self.radius.floor() as i64
    }

    /// Step count and length for a duration.
    pub fn plan(&self, duration: f64) -> (usize, f64) {
        let steps = ((duration * self.vmax / (self.radius * self.h)) - 1e-9).ceil().max(1.0) as usize;
        (steps, duration / steps as f64)
    }

    /// The move graph used for a query of this duration and its step count.
    pub fn lattice_graph(&self, duration: f64) -> (impl MoveGraph + '_, usize) {
        let (steps, dt) = self.plan(duration);
        (self.timed(dt), steps)
    }

    fn timed(&self, dt: f64) -> Timed<'_> {
        let nph = (self.n * self.n) as usize;
        let speed = |o: &Node| [o[0] as f64 * self.h / dt, o[1] as f64 * self.h / dt];
        let fastest = self.moves.iter().map(|o| speed(o)[0].hypot(speed(o)[1])).fold(0.0, f64::max);
        match self.model.separable() {
            Some((q, pot, limit)) if fastest <= limit => Timed {
                m: self,
                node_cost: (0..nph).map(|p| dt * pot.eval(self.point([p as i64 % self.n, p as i64 / self.n]))).collect(),
                move_cost: self
                    .moves
                    .iter()
                    .map(|o| {
                        let v = speed(o);
                        dt * (0.5 * (v[0] * v[0] + v[1] * v[1]) + q[0] * v[0] + q[1] * v[1])
                    })
                    .collect(),
                table: None,
            },
            _ => {
                let table = (0..nph)
                    .into_par_iter()
                    .flat_map_iter(|p| {
                        let y = self.point([p as i64 % self.n, p as i64 / self.n]);
                        self.moves.iter().map(move |o| dt * self.model.lagrangian(y, speed(o)))
                    })
                    .collect();
                Timed { m: self, node_cost: Vec::new(), move_cost: Vec::new(), table: Some(table) }
            }
        }
    }

    /// Nearest admissible node to `x` and the snap distance.
    pub fn snap(&self, x: Point) -> Result<(Node, f64)> {
        let c = [(x[0] / self.h).round() as i64, (x[1] / self.h).round() as i64];
        let mut best: Option<(f64, Node)> = None;
        for r in 0..=self.n {
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx.abs().max(dy.abs()) != r {
                        continue;
                    }
                    let z = [c[0] + dx, c[1] + dy];
                    if !self.class(z).is_admissible() {
                        continue;
                    }
                    let p = self.point(z);
                    let d = (p[0] - x[0]).hypot(p[1] - x[1]);
                    if best.map_or(true, |(bd, bz)| d < bd || (d == bd && z < bz)) {
                        best = Some((d, z));
                    }
                }
            }
            if let Some((d, z)) = best {
                if d <= (r as f64) * self.h {
                    return Ok((z, d));
                }
            }
        }
        best.map(|(d, z)| (z, d)).ok_or_else(|| Error::Query("no admissible node near the query point".into()))
    }

    /// Boundary-classified nodes in `x + [-1/2, 1/2)^2`; for hole-free cells
    /// the snapped node itself.
    pub fn representatives(&self, x: Point) -> Result<Vec<Node>> {
        if self.cell.is_empty() {
            return Ok(vec![self.snap(x)?.0]);
        }
        let lo = [((x[0] - 0.5) / self.h).ceil() as i64, ((x[1] - 0.5) / self.h).ceil() as i64];
        let mut reps = Vec::new();
        for j in lo[1]..lo[1] + self.n + 1 {
            for i in lo[0]..lo[0] + self.n + 1 {
                let p = self.point([i, j]);
                let inside = (0..2).all(|a| p[a] >= x[a] - 0.5 - 1e-12 && p[a] < x[a] + 0.5 - 1e-12);
                if inside && self.class([i, j]) == PointClass::Boundary {
                    reps.push([i, j]);
                }
            }
        }
        if reps.is_empty() {
            return Err(Error::Query("unit cube around the query point holds no boundary nodes".into()));
        }
        Ok(reps)
    }

    fn check_budget(&self, b: &IBox) -> Result<()> {
        if b.len() > self.budget {
            return Err(Error::NodeBudget { needed: b.len(), budget: self.budget });
        }
        Ok(())
    }

    /// Pruned forward DP from `sources` to `targets` over `duration`.
    fn pair_dp(&self, sources: &[Node], targets: &[Node], duration: f64, keep: bool) -> Result<(Vec<Layer>, f64)> {
        let (steps, dt) = self.plan(duration);
        let g = self.timed(dt);
        let r = self.reach();
        let sb = IBox::around(sources.iter().copied()).expect("sources are nonempty");
        let tb = IBox::around(targets.iter().copied()).expect("targets are nonempty");
        let boxes = |n: usize| sb.grow(n as i64 * r).intersect(&tb.grow((steps - n) as i64 * r));
        if boxes(0).is_none() {
            return Err(Error::WindowTooSmall(format!("endpoint not reachable at speed {} in time {duration}", self.vmax)));
        }
        for n in 0..=steps {
            if let Some(b) = boxes(n) {
                self.check_budget(&b)?;
            }
        }
        let src: Vec<(Node, f64)> = sources.iter().map(|&z| (z, 0.0)).collect();
        Ok((forward_dp(&g, &src, steps, boxes, keep), dt))
    }

    /// `m~(tau, t, y, x)` with one optimal path (from `y` to `x`).
    pub fn mtilde(&self, q: &MetricQuery) -> Result<MetricResult> {
        let duration = q.duration()?;
        let (zy, dy) = self.snap(q.y)?;
        let (zx, dx) = self.snap(q.x)?;
        let mut warnings = Vec::new();
        for (name, d) in [("y", dy), ("x", dx)] {
            if d >= self.h {
                warnings.push(format!("{name} snapped by {d:.4} >= h"));
            }
        }
        let (layers, _) = self.pair_dp(&[zy], &[zx], duration, true)?;
        let last = layers.last().unwrap();
        let cost = last.get(zx);
        if !cost.is_finite() {
            return Err(Error::WindowTooSmall(format!(
                "endpoint not reachable at speed {} in time {duration}",
                self.vmax
            )));
        }
        let mut path = vec![self.point(zx)];
        let mut z = zx;
        for layer in layers.iter().skip(1).rev() {
            let a = layer.args.as_ref().unwrap()[layer.bx.index(z)];
            let o = self.moves[a as usize];
            z = [z[0] - o[0], z[1] - o[1]];
            path.push(self.point(z));
        }
        path.reverse();
        Ok(MetricResult { cost, path, snap: [dy, dx], warnings })
    }

    /// Minimum of `m~` over the boundary representatives of both endpoints.
    pub fn mstar(&self, q: &MetricQuery) -> Result<f64> {
        let duration = q.duration()?;
        self.check_cone(q, duration)?;
        let sources = self.representatives(q.y)?;
        let targets = self.representatives(q.x)?;
        let (layers, _) = self.pair_dp(&sources, &targets, duration, false)?;
        let last = layers.last().unwrap();
        Ok(targets.iter().map(|&z| last.get(z)).fold(f64::INFINITY, f64::min))
    }

    fn check_cone(&self, q: &MetricQuery, duration: f64) -> Result<()> {
        let d = (q.x[0] - q.y[0]).hypot(q.x[1] - q.y[1]);
        if d > self.model.m0() * duration + 1e-12 {
            return Err(Error::Query(format!(
                "|x - y| = {d} exceeds M0 (t - tau) = {}",
                self.model.m0() * duration
            )));
        }
        Ok(())
    }

    /// `(1/k) m*(k tau, k t, k y, k x)` at scale `k` (not including the
    /// Richardson comparison).
    pub fn mbar_star_at(&self, q: &MetricQuery, k: usize) -> Result<f64> {
        let duration = q.duration()?;
        self.check_cone(q, duration)?;
        let kf = k as f64;
        let scaled = MetricQuery::new(kf * q.tau, kf * q.t, [kf * q.y[0], kf * q.y[1]], [kf * q.x[0], kf * q.x[1]]);
        Ok(self.mstar(&scaled)? / kf)
    }

    /// `m-bar*` at scale `k` with the estimate `|value(k) - value(k/2)|`.
    pub fn mbar_star(&self, q: &MetricQuery, k: usize) -> Result<MbarStar> {
        if k < 2 {
            return Err(Error::Query("scale k must be at least 2".into()));
        }
        let value = self.mbar_star_at(q, k)?;
        let coarse = self.mbar_star_at(q, k / 2)?;
        Ok(MbarStar { k, value, richardson: Some((value - coarse).abs()) })
    }

    /// Lattice layer of `m~(s, s + duration, ., x-bar)` minimized over the
    /// boundary representatives near `x` (backward in time), on the nodes
    /// that can reach them.
    pub fn backward_to(&self, x: Point, duration: f64) -> Result<(Layer, usize)> {
        let (steps, _) = self.plan(duration);
        let layer = self.backward_layers(x, duration, |_, _| {})?;
        Ok((layer, steps))
    }

    /// Backward DP from the representatives near `x` over `duration` with
    /// the step of [`CellMetric::plan`]; layer `n` holds costs over `n` steps.
    pub fn backward_layers(&self, x: Point, duration: f64, visit: impl FnMut(usize, &Layer)) -> Result<Layer> {
        let targets = self.representatives(x)?;
        let (steps, dt) = self.plan(duration);
        let g = self.timed(dt);
        let r = self.reach();
        let tb = IBox::around(targets.iter().copied()).unwrap();
        let boxes = |n: usize| Some(tb.grow(n as i64 * r));
        self.check_budget(&tb.grow(steps as i64 * r))?;
        let t: Vec<(Node, f64)> = targets.iter().map(|&z| (z, 0.0)).collect();
        Ok(backward_dp_visit(&g, &t, steps, boxes, visit))
    }

    /// `min` of a layer over the representatives near `x`.
    pub fn min_over_representatives(&self, layer: &Layer, x: Point) -> Result<f64> {
        Ok(self.representatives(x)?.iter().map(|&z| layer.get(z)).fold(f64::INFINITY, f64::min))
    }

    /// Effective Lagrangian table: `L-bar(v) = (1/k) m*(0, k, 0, k v)` on a
    /// velocity grid of the given spacing over the disc `|v| <= radius`.
    pub fn lbar_table(&self, k: usize, spacing: f64, radius: f64) -> Result<EffectiveTables> {
        if k < 1 || !(spacing > 0.0) || !(radius > 0.0) {
            return Err(Error::Query("table needs k >= 1 and positive spacing and radius".into()));
        }
        if self.vmax + 1e-12 < radius {
            return Err(Error::Query(format!("lattice vmax {} is below the table radius {radius}", self.vmax)));
        }
        let kf = k as f64;
        let duration = kf;
        let (steps, dt) = self.plan(duration);
        let g = self.timed(dt);
        let r = self.reach();
        let sources = self.representatives([0.0, 0.0])?;
        let sb = IBox::around(sources.iter().copied()).unwrap();
        let outer = ((kf * radius + 0.5) / self.h).ceil() as i64 + 1;
        let cap = IBox { lo: [-outer, -outer], hi: [outer, outer] };
        let boxes = |n: usize| sb.grow(n as i64 * r).intersect(&cap.grow((steps - n) as i64 * r));
        for n in 0..=steps {
            if let Some(b) = boxes(n) {
                self.check_budget(&b)?;
            }
        }
        let src: Vec<(Node, f64)> = sources.iter().map(|&z| (z, 0.0)).collect();
        let last = forward_dp(&g, &src, steps, boxes, false).pop().unwrap();
        let half = (radius / spacing + 1e-9).floor() as i64;
        let side = (2 * half + 1) as usize;
        let lbar: Vec<f64> = (0..side * side)
            .into_par_iter()
            .map(|i| {
                let v = [(i % side) as i64 - half, (i / side) as i64 - half];
                let v = [v[0] as f64 * spacing, v[1] as f64 * spacing];
                if v[0].hypot(v[1]) > radius + 1e-9 {
                    return f64::NAN;
                }
                match self.representatives([kf * v[0], kf * v[1]]) {
                    Ok(reps) => reps.iter().map(|&z| last.get(z)).fold(f64::INFINITY, f64::min) / kf,
                    Err(_) => f64::NAN,
                }
            })
            .collect();
        let mut tables = EffectiveTables {
            spacing,
            radius,
            half,
            lbar,
            p_half: 0,
            hbar: Vec::new(),
            k,
            h: self.h,
            dt,
            key: String::new(),
        };
        tables.key = self.canonical() + &format!(";k={k};spacing={spacing:?};radius={radius:?}");
        tables.fill_hbar();
        Ok(tables)
    }
}

/// Sampled `L-bar` on a disc of velocities and `H-bar` on a disc of momenta,
/// both on square grids of the same spacing. Absent nodes hold `NaN`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveTables {
    pub spacing: f64,
    pub radius: f64,
    pub half: i64,
    pub lbar: Vec<f64>,
    pub p_half: i64,
    pub hbar: Vec<f64>,
    pub k: usize,
    pub h: f64,
    pub dt: f64,
    /// Canonical description of what produced the table.
    pub key: String,
}

impl EffectiveTables {
    /// Tables from a closed-form `L-bar`, for references and tests.
    pub fn from_lagrangian(spacing: f64, radius: f64, f: impl Fn(Point) -> f64) -> Self {
        let half = (radius / spacing + 1e-9).floor() as i64;
        let side = (2 * half + 1) as usize;
        let lbar = (0..side * side)
            .map(|i| {
                let v = [((i % side) as i64 - half) as f64 * spacing, ((i / side) as i64 - half) as f64 * spacing];
                if v[0].hypot(v[1]) > radius + 1e-9 {
                    f64::NAN
                } else {
                    f(v)
                }
            })
            .collect();
        let mut t = EffectiveTables {
            spacing,
            radius,
            half,
            lbar,
            p_half: 0,
            hbar: Vec::new(),
            k: 0,
            h: 0.0,
            dt: 0.0,
            key: format!("analytic;spacing={spacing:?};radius={radius:?}"),
        };
        t.fill_hbar();
        t
    }

    pub fn side(&self) -> usize {
        (2 * self.half + 1) as usize
    }

    pub fn p_side(&self) -> usize {
        (2 * self.p_half + 1) as usize
    }

    /// Velocity of table node `i`.
    pub fn velocity(&self, i: usize) -> Point {
        let s = self.side();
        [((i % s) as i64 - self.half) as f64 * self.spacing, ((i / s) as i64 - self.half) as f64 * self.spacing]
    }

    pub fn momentum(&self, i: usize) -> Point {
        let s = self.p_side();
        [((i % s) as i64 - self.p_half) as f64 * self.spacing, ((i / s) as i64 - self.p_half) as f64 * self.spacing]
    }

    /// Present table nodes `(v, L-bar(v))`.
    pub fn lbar_nodes(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.lbar.iter().enumerate().filter(|(_, l)| !l.is_nan()).map(|(i, &l)| (self.velocity(i), l))
    }

    pub fn hbar_nodes(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.hbar.iter().enumerate().filter(|(_, l)| !l.is_nan()).map(|(i, &l)| (self.momentum(i), l))
    }

    fn at(&self, i: i64, j: i64) -> f64 {
        if i.abs() > self.half || j.abs() > self.half {
            return f64::NAN;
        }
        self.lbar[((j + self.half) as usize) * self.side() + (i + self.half) as usize]
    }

    /// `L-bar` at a table node given by integer offsets.
    pub fn node_value(&self, i: i64, j: i64) -> f64 {
        self.at(i, j)
    }

    /// Bilinear interpolation of `L-bar`; cells with an absent corner use
    /// the nearest present node. Out-of-range velocities are an error.
    pub fn lbar(&self, v: Point) -> Result<f64> {
        if v[0].hypot(v[1]) > self.radius + 1e-9 {
            return Err(Error::OutOfTable(v));
        }
        let f = [v[0] / self.spacing, v[1] / self.spacing];
        let b = [f[0].floor() as i64, f[1].floor() as i64];
        let fr = [f[0] - b[0] as f64, f[1] - b[1] as f64];
        let c = [self.at(b[0], b[1]), self.at(b[0] + 1, b[1]), self.at(b[0], b[1] + 1), self.at(b[0] + 1, b[1] + 1)];
        if c.iter().all(|x| !x.is_nan()) {
            return Ok((1.0 - fr[1]) * ((1.0 - fr[0]) * c[0] + fr[0] * c[1]) + fr[1] * ((1.0 - fr[0]) * c[2] + fr[0] * c[3]));
        }
        let r = [f[0].round() as i64, f[1].round() as i64];
        let v = self.at(r[0], r[1]);
        if v.is_nan() {
            let mut best = (f64::INFINITY, f64::NAN);
            for (i, &ci) in c.iter().enumerate() {
                let d = (f[0] - (b[0] + (i % 2) as i64) as f64).hypot(f[1] - (b[1] + (i / 2) as i64) as f64);
                if !ci.is_nan() && d < best.0 {
                    best = (d, ci);
                }
            }
            return Ok(best.1);
        }
        Ok(v)
    }

    fn fill_hbar(&mut self) {
        self.p_half = (((self.radius - 1.0).max(0.0)) / self.spacing + 1e-9).floor() as i64;
        let ps = self.p_side();
        let nodes: Vec<(Point, f64)> = self.lbar_nodes().collect();
        let prad = self.p_half as f64 * self.spacing;
        self.hbar = (0..ps * ps)
            .into_par_iter()
            .map(|i| {
                let p = [((i % ps) as i64 - self.p_half) as f64 * self.spacing, ((i / ps) as i64 - self.p_half) as f64 * self.spacing];
                if p[0].hypot(p[1]) > prad + 1e-9 {
                    return f64::NAN;
                }
                nodes.iter().map(|(v, l)| p[0] * v[0] + p[1] * v[1] - l).fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }

    /// `H-bar(p) = max_v (p . v - L-bar(v))` over the table velocities.
    /// Fails when the maximizer sits on the rim of the table.
    pub fn effective_hamiltonian(&self, p: Point) -> Result<f64> {
        let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
        for (v, l) in self.lbar_nodes() {
            let val = p[0] * v[0] + p[1] * v[1] - l;
            if val > best.0 {
                best = (val, v);
            }
        }
        if best.1[0].hypot(best.1[1]) > self.radius - 1.5 * self.spacing {
            return Err(Error::ConjugateWindow(format!(
                "maximizer ({}, {}) lies on the table rim (radius {})",
                best.1[0], best.1[1], self.radius
            )));
        }
        Ok(best.0)
    }

    /// Table-backed `L-bar(v)` for `|v| <= m0`.
    pub fn effective_lagrangian(&self, v: Point, m0: f64) -> Result<f64> {
        if v[0].hypot(v[1]) > m0 + 1e-12 {
            return Err(Error::OutOfTable(v));
        }
        self.lbar(v)
    }

    /// Largest violation of `|.|^2/2 - k0 <= value <= |.|^2/2 + k0` over
    /// both tables (zero when the sandwich holds).
    pub fn sandwich_violation(&self, k0: f64) -> f64 {
        let viol = |(v, l): (Point, f64)| {
            let q = 0.5 * (v[0] * v[0] + v[1] * v[1]);
            ((q - k0) - l).max(l - (q + k0)).max(0.0)
        };
        self.lbar_nodes().map(viol).chain(self.hbar_nodes().map(viol)).fold(0.0, f64::max)
    }

    /// Midpoint convexity defect of `L-bar` along grid lines.
    pub fn convexity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in -self.half..=self.half {
            for i in -self.half..=self.half {
                for (di, dj) in [(1, 0), (0, 1)] {
                    let (a, m, b) = (self.at(i - di, j - dj), self.at(i, j), self.at(i + di, j + dj));
                    if !(a.is_nan() || m.is_nan() || b.is_nan()) {
                        worst = worst.max(m - 0.5 * (a + b));
                    }
                }
            }
        }
        worst
    }

    /// CSV rows `kind, c1, c2, value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,c1,c2,value\n");
        for (v, l) in self.lbar_nodes() {
            s.push_str(&format!("lbar,{:?},{:?},{:?}\n", v[0], v[1], l));
        }
        for (p, l) in self.hbar_nodes() {
            s.push_str(&format!("hbar,{:?},{:?},{:?}\n", p[0], p[1], l));
        }
        s
    }
}

/// Exhaustive minimum over all jump sequences, for small graphs.
pub fn enumerate_paths<G: MoveGraph>(g: &G, y: Node, x: Node, steps: usize, window: &IBox) -> f64 {
    fn go<G: MoveGraph>(g: &G, z: Node, acc: f64, left: usize, x: Node, w: &IBox, best: &mut f64) {
        if left == 0 {
            if z == x && acc < *best {
                *best = acc;
            }
            return;
        }
        for (k, o) in g.moves().iter().enumerate() {
            let to = [z[0] + o[0], z[1] + o[1]];
            let key = g.key(to);
            if w.contains(to) && g.admissible(key) && g.allowed(key, k) {
                go(g, to, acc + g.cost(key, k), left - 1, x, w, best);
            }
        }
    }
    let mut best = f64::INFINITY;
    if g.admissible(g.key(y)) {
        go(g, y, 0.0, steps, x, window, &mut best);
    }
    best
}

/// A small explicit graph on a box, used for oracle checks.
pub struct TableGraph {
    pub window: IBox,
    pub moves: Vec<Node>,
    pub blocked: Vec<Node>,
    /// `cost[node_index * moves + k]`.
    pub cost: Vec<f64>,
}

impl MoveGraph for TableGraph {
    fn moves(&self) -> &[Node] {
        &self.moves
    }

    fn key(&self, z: Node) -> usize {
        if self.window.contains(z) {
            self.window.index(z)
        } else {
            usize::MAX
        }
    }

    fn admissible(&self, key: usize) -> bool {
        key != usize::MAX && !self.blocked.contains(&self.window.node(key))
    }

    fn allowed(&self, key: usize, k: usize) -> bool {
        let z = self.window.node(key);
        let o = self.moves[k];
        self.admissible(self.key([z[0] - o[0], z[1] - o[1]]))
    }

    fn cost(&self, key: usize, k: usize) -> f64 {
        self.cost[key * self.moves.len() + k]
    }
}

/// Statistics of `m*` averaged over sampled query batches.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FittedConstant {
    pub samples: usize,
    pub max: f64,
    pub mean: f64,
}

impl FittedConstant {
    pub fn from_values(v: &[f64]) -> Self {
        let max = v.iter().copied().fold(0.0, f64::max);
        let mean = if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        FittedConstant { samples: v.len(), max, mean }
    }
}

/// Named groups of fitted constants, as reported by the drivers.
pub type ConstantReport = BTreeMap<String, FittedConstant>;
