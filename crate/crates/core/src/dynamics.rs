//! Hamiltonians, their Legendre transforms and the initial/boundary data.
//!
//! The catalog Hamiltonian is `H(y,p) = |p - q|^2/2 - V(y)` with a periodic
//! potential `V` and a constant drift `q`. Arbitrary convex Hamiltonians
//! can be supplied as closures; their Lagrangians are computed numerically.
//!
//! Every model is truncated outside `|p| <= R`, `R = 2 C0 + 1`, so that
//! `|p|^2/2 - K0 <= H <= |p|^2/2 + K0` holds globally.

use std::fmt;
use std::sync::Arc;

use crate::cli::expr::{Env, Expr, Interval, Var};
use crate::error::{Error, Result};
use crate::geometry::{cell_boundary_samples, DomainView, Point, UnitCellGeometry};

pub type HamiltonianFn = Arc<dyn Fn(Point, Point) -> f64 + Send + Sync>;
pub type DataClosure = Arc<dyn Fn(Point, Point) -> f64 + Send + Sync>;

/// Periodic potential `V(y)`.
#[derive(Clone)]
pub enum Potential {
    Constant(f64),
    /// `amp * (1 - smoothstep(inner, outer, r))` with `r` the distance from
    /// `y` to the nearest lattice point.
    Bump { amp: f64, inner: f64, outer: f64 },
    /// `amp * (1 - cos(2 pi y1) cos(2 pi y2)) / 2`.
    Trig { amp: f64 },
    /// Expression in `x1, x2`, evaluated at `y` reduced into `[-1/2, 1/2)^2`.
    Expr(Arc<Expr>),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

fn reduce_centered(y: Point) -> Point {
    [y[0] - y[0].round(), y[1] - y[1].round()]
}

impl Potential {
    /// The bump with `V = 1` on `B_{1/8}` and support in `B_{1/4}`.
    pub fn reference_bump() -> Self {
        Potential::Bump { amp: 1.0, inner: 0.125, outer: 0.25 }
    }

    pub fn eval(&self, y: Point) -> f64 {
        match self {
            Potential::Constant(c) => *c,
            Potential::Bump { amp, inner, outer } => {
                let r = reduce_centered(y);
                let r = r[0].hypot(r[1]);
                amp * (1.0 - crate::cli::expr::smoothstep(*inner, *outer, r))
            }
            Potential::Trig { amp } => {
                let tau = std::f64::consts::TAU;
                amp * 0.5 * (1.0 - (tau * y[0]).cos() * (tau * y[1]).cos())
            }
            Potential::Expr(e) => e.eval(&Env::xy(reduce_centered(y))),
        }
    }

    /// Range of `V` (exact for the closed forms, conservative for expressions).
    pub fn range(&self) -> Result<(f64, f64)> {
        Ok(match self {
            Potential::Constant(c) => (*c, *c),
            Potential::Bump { amp, .. } | Potential::Trig { amp } => (amp.min(0.0), amp.max(0.0)),
            Potential::Expr(e) => {
                let d = crate::cli::expr::Domain {
                    x: Interval::new(-0.5, 0.5),
                    t: Interval::new(0.0, 0.0),
                    y: Interval::new(-0.5, 0.5),
                };
                let i = e.screen(&d)?;
                (i.lo, i.hi)
            }
        })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Potential::Constant(c) => *c == 0.0,
            Potential::Bump { amp, .. } | Potential::Trig { amp } => *amp == 0.0,
            Potential::Expr(e) => matches!(**e, Expr::Num(v) if v == 0.0),
        }
    }

    pub fn canonical(&self) -> String {
        match self {
            Potential::Constant(c) => format!("const({c:?})"),
            Potential::Bump { amp, inner, outer } => format!("bump({amp:?},{inner:?},{outer:?})"),
            Potential::Trig { amp } => format!("trig({amp:?})"),
            Potential::Expr(e) => format!("expr({})", e.unparse()),
        }
    }
}

#[derive(Clone)]
pub enum Hamiltonian {
    /// `|p - drift|^2 / 2 - V(y)`.
    Quadratic { potential: Potential, drift: Point },
    /// User supplied convex `H(y, p)`, 1-periodic in `y`.
    Custom { name: String, h: HamiltonianFn },
}

impl fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl Hamiltonian {
    pub fn quadratic(potential: Potential) -> Self {
        Hamiltonian::Quadratic { potential, drift: [0.0, 0.0] }
    }

    pub fn free() -> Self {
        Self::quadratic(Potential::Constant(0.0))
    }

    fn raw(&self, y: Point, p: Point) -> f64 {
        match self {
            Hamiltonian::Quadratic { potential, drift } => {
                let d = [p[0] - drift[0], p[1] - drift[1]];
                0.5 * (d[0] * d[0] + d[1] * d[1]) - potential.eval(y)
            }
            Hamiltonian::Custom { h, .. } => h(y, p),
        }
    }

    pub fn canonical(&self) -> String {
        match self {
            Hamiltonian::Quadratic { potential, drift } => {
                format!("quadratic(V={},q=({:?},{:?}))", potential.canonical(), drift[0], drift[1])
            }
            Hamiltonian::Custom { name, .. } => format!("custom({name})"),
        }
    }
}

/// `C0 = lip_g + C1 + K0 + 1` and the velocity bound: the positive root of
/// `M^2/2 - K0 = C0 + C0 M`, rounded up to one decimal.
pub fn velocity_bound(k0: f64, c1: f64, lip_g: f64) -> f64 {
    let c0 = lipschitz_constant(k0, c1, lip_g);
    let m = c0 + (c0 * c0 + 2.0 * (c0 + k0)).sqrt();
    // Absorb rounding noise before taking the ceiling.
    ((m * 10.0) - 1e-9).ceil() / 10.0
}

pub fn lipschitz_constant(k0: f64, c1: f64, lip_g: f64) -> f64 {
    lip_g + c1 + k0 + 1.0
}

/// Overrides for the constants a model would otherwise derive itself.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModelOptions {
    pub k0: Option<f64>,
    pub c1: Option<f64>,
    pub m0: Option<f64>,
    pub lip_g: f64,
}

#[derive(Clone, Debug)]
pub struct LagrangianModel {
    ham: Hamiltonian,
    k0: f64,
    c1: f64,
    c0: f64,
    m0: f64,
    trunc_radius: f64,
    a7: bool,
    /// Truncation leaves `H` unchanged (zero drift and `K0 >= max V`).
    trunc_identity: bool,
}

/// Values of a function on the square grid `{-radius, .., radius}^2` with
/// the given spacing, stored row major in `p1`.
#[derive(Clone, Debug)]
pub struct SampledFunction {
    pub radius: f64,
    pub spacing: f64,
    pub n: usize,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn sample(radius: f64, spacing: f64, f: impl Fn(Point) -> f64) -> Self {
        let half = (radius / spacing).round() as i64;
        let n = (2 * half + 1) as usize;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(Self::node_of(half, spacing, i, j)));
            }
        }
        SampledFunction { radius: half as f64 * spacing, spacing, n, values }
    }

    fn node_of(half: i64, spacing: f64, i: usize, j: usize) -> Point {
        [(i as i64 - half) as f64 * spacing, (j as i64 - half) as f64 * spacing]
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        Self::node_of((self.n / 2) as i64, self.spacing, i, j)
    }
}

/// `max_p (p . target - f(p))` over the samples, with the maximizing node.
/// Ties go to the lexicographically smallest node.
pub fn numeric_conjugate(samples: &SampledFunction, target: Point, min_radius: f64) -> Result<(f64, Point)> {
    if samples.radius + 1e-12 < min_radius {
        return Err(Error::ConjugateWindow(format!(
            "grid radius {} is below the required {}",
            samples.radius, min_radius
        )));
    }
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    for i in 0..samples.n {
        for j in 0..samples.n {
            let p = samples.node(i, j);
            let val = p[0] * target[0] + p[1] * target[1] - samples.values[i * samples.n + j];
            if val > best.0 {
                best = (val, p);
            }
        }
    }
    Ok(best)
}

/// Coarse-to-fine `sup_p (p . v - f(p))` over `|p_i| <= radius`.
fn refined_conjugate(f: impl Fn(Point) -> f64, v: Point, radius: f64) -> f64 {
    let mut spacing = 0.05;
    let mut center = [0.0, 0.0];
    let mut half = (radius / spacing).ceil() as i64;
    let mut best = f64::NEG_INFINITY;
    for _ in 0..4 {
        let mut arg = center;
        for i in -half..=half {
            for j in -half..=half {
                let p = [center[0] + i as f64 * spacing, center[1] + j as f64 * spacing];
                let val = p[0] * v[0] + p[1] * v[1] - f(p);
                if val > best {
                    best = val;
                    arg = p;
                }
            }
        }
        center = arg;
        spacing /= 10.0;
        half = 20;
    }
    best
}

impl LagrangianModel {
    pub fn new(ham: Hamiltonian, opts: ModelOptions) -> Result<Self> {
        let (k0, c1) = match &ham {
            Hamiltonian::Quadratic { potential, drift } => {
                let (lo, hi) = potential.range()?;
                let vabs = lo.abs().max(hi.abs());
                let qn = drift[0].hypot(drift[1]);
                let c1 = opts.c1.unwrap_or(hi.max(0.0));
                let k0 = if qn == 0.0 {
                    opts.k0.unwrap_or(vabs)
                } else {
                    if qn >= 0.5 {
                        return Err(Error::Model("drift must satisfy |q| < 1/2".into()));
                    }
                    // Smallest K0 with |H - |p|^2/2| <= K0 on |p| <= 2 C0 + 1.
                    let base = 0.5 * qn * qn + vabs + (2.0 * (opts.lip_g + c1 + 1.0) + 1.0) * qn;
                    opts.k0.unwrap_or(base / (1.0 - 2.0 * qn))
                };
                (k0, c1)
            }
            Hamiltonian::Custom { .. } => match (opts.k0, opts.c1) {
                (Some(k0), Some(c1)) => (k0, c1),
                _ => return Err(Error::Model("custom Hamiltonians need explicit k0 and c1".into())),
            },
        };
        if k0 < 0.0 || c1 < 0.0 {
            return Err(Error::Model("k0 and c1 must be nonnegative".into()));
        }
        let c0 = lipschitz_constant(k0, c1, opts.lip_g);
        let m0 = match opts.m0 {
            Some(m) if m > 0.0 => m,
            Some(m) => return Err(Error::Model(format!("velocity bound must be positive, got {m}"))),
            None => velocity_bound(k0, c1, opts.lip_g),
        };
        let trunc_identity = match &ham {
            Hamiltonian::Quadratic { potential, drift } => {
                let (lo, hi) = potential.range()?;
                *drift == [0.0, 0.0] && k0 >= lo.abs().max(hi.abs())
            }
            Hamiltonian::Custom { .. } => false,
        };
        let mut model =
            LagrangianModel { ham, k0, c1, c0, m0, trunc_radius: 2.0 * c0 + 1.0, a7: false, trunc_identity };
        model.a7 = model.detect_a7();
        Ok(model)
    }

    fn detect_a7(&self) -> bool {
        match &self.ham {
            Hamiltonian::Quadratic { potential, drift } => *drift == [0.0, 0.0] && potential.is_zero(),
            Hamiltonian::Custom { .. } => {
                // min_p H(y, p) = H(y, 0) = 0 on a sample of cell points.
                let ps: Vec<Point> = (0..16)
                    .flat_map(|i| {
                        let a = std::f64::consts::TAU * i as f64 / 16.0;
                        [0.05, 0.3, 1.0].map(|r| [r * a.cos(), r * a.sin()])
                    })
                    .collect();
                (0..8).all(|i| {
                    (0..8).all(|j| {
                        let y = [i as f64 / 8.0, j as f64 / 8.0];
                        let h0 = self.hamiltonian(y, [0.0, 0.0]);
                        h0.abs() < 1e-12 && ps.iter().all(|&p| self.hamiltonian(y, p) >= -1e-12)
                    })
                })
            }
        }
    }

    pub fn hamiltonian_kind(&self) -> &Hamiltonian {
        &self.ham
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn truncation_radius(&self) -> f64 {
        self.trunc_radius
    }

    pub fn satisfies_a7(&self) -> bool {
        self.a7
    }

    /// Truncated Hamiltonian.
    pub fn hamiltonian(&self, y: Point, p: Point) -> f64 {
        let r = self.trunc_radius;
        let np = p[0].hypot(p[1]);
        if np <= r {
            return self.ham.raw(y, p);
        }
        let edge = [r * p[0] / np, r * p[1] / np];
        0.5 * np * np + (self.ham.raw(y, edge) - 0.5 * r * r).clamp(-self.k0, self.k0)
    }

    /// `L(y, v) = sup_p (p . v - H(y, p))` for the truncated `H`.
    pub fn lagrangian(&self, y: Point, v: Point) -> f64 {
        if let Hamiltonian::Quadratic { potential, drift } = &self.ham {
            let nv = v[0].hypot(v[1]);
            if self.trunc_identity || nv + drift[0].hypot(drift[1]) <= self.trunc_radius {
                return self.kinetic_quadratic(*drift, v) + potential.eval(y);
            }
        }
        let nv = v[0].hypot(v[1]);
        let radius = (self.trunc_radius + nv + 1.0).max(2.0 * self.m0);
        refined_conjugate(|p| self.hamiltonian(y, p), v, radius)
    }

    fn kinetic_quadratic(&self, q: Point, v: Point) -> f64 {
        0.5 * (v[0] * v[0] + v[1] * v[1]) + q[0] * v[0] + q[1] * v[1]
    }

    /// When `L(y, v) = kinetic(v) + potential(y)` on `|v| <= limit`, returns
    /// the drift and the potential.
    pub fn separable(&self) -> Option<(Point, &Potential, f64)> {
        match &self.ham {
            Hamiltonian::Quadratic { potential, drift } => {
                let limit = if self.trunc_identity {
                    f64::INFINITY
                } else {
                    self.trunc_radius - drift[0].hypot(drift[1])
                };
                Some((*drift, potential, limit))
            }
            Hamiltonian::Custom { .. } => None,
        }
    }

    pub fn canonical(&self) -> String {
        format!(
            "{};k0={:?};c1={:?};m0={:?};R={:?}",
            self.ham.canonical(),
            self.k0,
            self.c1,
            self.m0,
            self.trunc_radius
        )
    }
}

/// A scalar function of `(x, y)`; initial data ignores `y`.
#[derive(Clone)]
pub enum DataFn {
    Const(f64),
    Expr(Arc<Expr>),
    Func { name: String, f: DataClosure },
}

impl fmt::Debug for DataFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl DataFn {
    pub fn eval(&self, x: Point, y: Point) -> f64 {
        match self {
            DataFn::Const(c) => *c,
            DataFn::Expr(e) => e.eval(&Env { x1: x[0], x2: x[1], t: 0.0, y1: y[0], y2: y[1] }),
            DataFn::Func { f, .. } => f(x, y),
        }
    }

    fn depends_on_x(&self) -> bool {
        match self {
            DataFn::Const(_) => false,
            DataFn::Expr(e) => e.uses(Var::X1) || e.uses(Var::X2),
            DataFn::Func { .. } => true,
        }
    }

    pub fn canonical(&self) -> String {
        match self {
            DataFn::Const(c) => format!("const({c:?})"),
            DataFn::Expr(e) => format!("expr({})", e.unparse()),
            DataFn::Func { name, .. } => format!("func({name})"),
        }
    }
}

/// Initial datum `g`, Dirichlet datum `b(x, y)` (1-periodic in `y`).
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub g: DataFn,
    pub b: DataFn,
    pub lip_g: f64,
    pub lip_b: f64,
    /// Boundary samples per hole used for `b_bar`.
    pub bbar_samples: usize,
}

impl BoundaryData {
    pub fn new(g: DataFn, b: DataFn, lip_g: f64, lip_b: f64) -> Self {
        BoundaryData { g, b, lip_g, lip_b, bbar_samples: 2048 }
    }

    pub fn g(&self, x: Point) -> f64 {
        self.g.eval(x, [0.0, 0.0])
    }

    /// `b(x, y)` with `y` reduced into the reference cell.
    pub fn b(&self, x: Point, y: Point) -> f64 {
        self.b.eval(x, [y[0] - y[0].floor(), y[1] - y[1].floor()])
    }

    /// `b_bar(x) = min over the hole boundaries of b(x, .)` for a cell.
    pub fn bbar(&self, cell: &UnitCellGeometry, eta: f64) -> Bbar {
        let samples = cell_boundary_samples(cell, eta, self.bbar_samples);
        let constant = if samples.is_empty() {
            Some(f64::INFINITY)
        } else if !self.b.depends_on_x() {
            Some(samples.iter().map(|&z| self.b([0.0, 0.0], z)).fold(f64::INFINITY, f64::min))
        } else {
            None
        };
        Bbar { data: self.b.clone(), samples, constant }
    }

    /// `f_eps(x, t)`: `g(x)` at `t = 0`, `b(x, x/eps)` at boundary points for
    /// `t > 0`, with boundary membership decided up to `tol`.
    pub fn boundary_trace(&self, view: &DomainView, x: Point, t: f64, tol: f64) -> Result<f64> {
        let class = view.classify_point(x, tol);
        if t == 0.0 && class.is_admissible() {
            return Ok(self.g(x));
        }
        if t > 0.0 && class == crate::geometry::PointClass::Boundary {
            let xh = view.project_to_boundary(x).unwrap_or(x);
            let eps = view.epsilon();
            return Ok(self.b(xh, [xh[0] / eps, xh[1] / eps]));
        }
        Err(Error::TraceUndefined(format!("({}, {}) at t = {t} is not on the parabolic boundary", x[0], x[1])))
    }

    /// Homogenized trace `f(x, t)`: `g` at `t = 0`, `b_bar` afterwards.
    pub fn limit_trace(&self, bbar: &Bbar, x: Point, t: f64) -> f64 {
        if t == 0.0 {
            self.g(x)
        } else {
            bbar.eval(x)
        }
    }

    pub fn canonical(&self) -> String {
        format!(
            "g={};b={};lip_g={:?};lip_b={:?};bbar_samples={}",
            self.g.canonical(),
            self.b.canonical(),
            self.lip_g,
            self.lip_b,
            self.bbar_samples
        )
    }
}

/// Evaluator for `b_bar`.
#[derive(Clone, Debug)]
pub struct Bbar {
    data: DataFn,
    samples: Vec<Point>,
    constant: Option<f64>,
}

impl Bbar {
    pub fn eval(&self, x: Point) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        self.samples.iter().map(|&z| self.data.eval(x, z)).fold(f64::INFINITY, f64::min)
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }
}

/// Checks `g <= b_bar` at the given points and reports the first violation.
pub fn check_compatibility(data: &BoundaryData, bbar: &Bbar, points: impl IntoIterator<Item = Point>) -> Result<()> {
    for x in points {
        let (g, b) = (data.g(x), bbar.eval(x));
        if g > b + 1e-12 {
            return Err(Error::CompatibilityViolated { x, g, bbar: b });
        }
    }
    Ok(())
}

/// Largest difference quotient of `f` over a square grid, a practical
/// Lipschitz estimate for expression data.
pub fn estimate_lipschitz(f: impl Fn(Point) -> f64, half_width: f64, spacing: f64) -> f64 {
    let n = (half_width / spacing).round() as i64;
    let mut lip: f64 = 0.0;
    for i in -n..=n {
        for j in -n..=n {
            let x = [i as f64 * spacing, j as f64 * spacing];
            let fx = f(x);
            for d in [[spacing, 0.0], [0.0, spacing]] {
                let fy = f([x[0] + d[0], x[1] + d[1]]);
                lip = lip.max((fy - fx).abs() / spacing);
            }
        }
    }
    lip
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::expr::parse_expression;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn bump_model() -> LagrangianModel {
        LagrangianModel::new(Hamiltonian::quadratic(Potential::reference_bump()), ModelOptions::default()).unwrap()
    }

    #[test]
    fn closed_form_lagrangians() {
        let m = LagrangianModel::new(Hamiltonian::quadratic(Potential::Constant(1.0)), ModelOptions::default())
            .unwrap();
        assert_eq!(m.lagrangian([0.3, 0.1], [0.0, 0.0]), 1.0);
        let free = LagrangianModel::new(Hamiltonian::free(), ModelOptions::default()).unwrap();
        assert_eq!(free.lagrangian([0.0, 0.0], [1.0, 0.0]), 0.5);
        assert!(free.satisfies_a7());
        assert!(!m.satisfies_a7());
    }

    #[test]
    fn velocity_bounds() {
        assert_eq!(velocity_bound(1.0, 1.0, 0.0), 7.2);
        assert_eq!(velocity_bound(0.0, 0.0, 0.0), 2.8);
        let mut last = 0.0;
        for i in 0..50 {
            let m = velocity_bound(0.5, 0.5, i as f64 * 0.1);
            assert!(m >= last);
            last = m;
        }
    }

    #[test]
    fn numeric_conjugate_examples() {
        let q = SampledFunction::sample(4.0, 0.01, |p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
        let (v, arg) = numeric_conjugate(&q, [1.0, 1.0], 2.0).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        assert_eq!(arg, [1.0, 1.0]);
        let cone = SampledFunction::sample(4.0, 0.05, |p| p[0].hypot(p[1]));
        let (v, _) = numeric_conjugate(&cone, [0.5, 0.0], 2.0).unwrap();
        assert!(v.abs() < 1e-12);
        assert!(matches!(numeric_conjugate(&cone, [0.5, 0.0], 5.0), Err(Error::ConjugateWindow(_))));
    }

    #[test]
    fn conjugate_of_random_quadratics() {
        // H(p) = p.Ap/2 + c.p with A symmetric positive definite; the
        // conjugate is (v - c).A^{-1}(v - c)/2.
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..5 {
            let (a, b, d) = (rng.gen_range(0.6..1.6), rng.gen_range(-0.3..0.3), rng.gen_range(0.6..1.6));
            let c = [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let h = |p: Point| 0.5 * (a * p[0] * p[0] + 2.0 * b * p[0] * p[1] + d * p[1] * p[1]) + c[0] * p[0] + c[1] * p[1];
            let det = a * d - b * b;
            let w = [v[0] - c[0], v[1] - c[1]];
            let exact = 0.5 * (d * w[0] * w[0] - 2.0 * b * w[0] * w[1] + a * w[1] * w[1]) / det;
            let s = SampledFunction::sample(4.0, 0.002, h);
            let (num, _) = numeric_conjugate(&s, v, 4.0).unwrap();
            assert!((num - exact).abs() < 1e-3, "{num} vs {exact}");
        }
    }

    #[test]
    fn generic_lagrangian_matches_brute_force() {
        let m0 = 2.0;
        let h: HamiltonianFn = Arc::new(|y: Point, p: Point| {
            0.5 * (p[0] * p[0] + p[1] * p[1]) - 0.5 * (1.0 + (std::f64::consts::TAU * y[0]).sin()) * 0.3
        });
        let model = LagrangianModel::new(
            Hamiltonian::Custom { name: "test".into(), h: h.clone() },
            ModelOptions { k0: Some(0.3), c1: Some(0.3), m0: Some(m0), lip_g: 0.0 },
        )
        .unwrap();
        let y = [0.2, 0.7];
        for v in [[0.0, 0.0], [1.0, -0.5], [-1.4, 1.3], [2.0, 0.0]] {
            let grid = SampledFunction::sample(2.0 * m0, 1e-3 * 4.0, |p| model.hamiltonian(y, p));
            let (brute, _) = numeric_conjugate(&grid, v, 2.0 * m0).unwrap();
            let got = model.lagrangian(y, v);
            let closed = 0.5 * (v[0] * v[0] + v[1] * v[1]) + 0.15 * (1.0 + (std::f64::consts::TAU * y[0]).sin());
            assert!((got - brute).abs() < 1e-3, "{got} vs {brute}");
            assert!((got - closed).abs() < 1e-3);
        }
        assert!(!model.satisfies_a7());
    }

    #[test]
    fn truncation_sandwich_at_many_samples() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let drift = LagrangianModel::new(
            Hamiltonian::Quadratic { potential: Potential::reference_bump(), drift: [0.2, -0.1] },
            ModelOptions::default(),
        )
        .unwrap();
        for model in [bump_model(), drift] {
            let (k0, m0) = (model.k0(), model.m0());
            for _ in 0..100_000 {
                let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                let p = [rng.gen_range(-2.0 * m0..2.0 * m0), rng.gen_range(-2.0 * m0..2.0 * m0)];
                let q = 0.5 * (p[0] * p[0] + p[1] * p[1]);
                let h = model.hamiltonian(y, p);
                assert!(h >= q - k0 - 1e-12 && h <= q + k0 + 1e-12);
            }
            for _ in 0..2_000 {
                let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                let v = [rng.gen_range(-0.7 * m0..0.7 * m0), rng.gen_range(-0.7 * m0..0.7 * m0)];
                let q = 0.5 * (v[0] * v[0] + v[1] * v[1]);
                let l = model.lagrangian(y, v);
                assert!(l >= q - k0 - 1e-9 && l <= q + k0 + 1e-9, "L = {l}, |v|^2/2 = {q}, K0 = {k0}");
            }
        }
    }

    #[test]
    fn a7_lagrangian_is_nonnegative() {
        let free = LagrangianModel::new(Hamiltonian::free(), ModelOptions::default()).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        assert_eq!(free.lagrangian([0.4, 0.4], [0.0, 0.0]), 0.0);
        for _ in 0..10_000 {
            let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let v = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            assert!(free.lagrangian(y, v) >= 0.0);
        }
    }

    #[test]
    fn bump_shape() {
        let v = Potential::reference_bump();
        assert_eq!(v.eval([0.0, 0.0]), 1.0);
        assert_eq!(v.eval([1.0, -2.0]), 1.0);
        assert_eq!(v.eval([0.1, 0.0]), 1.0);
        assert_eq!(v.eval([0.25, 0.0]), 0.0);
        assert_eq!(v.eval([0.5, 0.5]), 0.0);
        let e = parse_expression("1 - smoothstep(1/8, 1/4, sqrt(x1^2 + x2^2))").unwrap();
        let ev = Potential::Expr(Arc::new(e));
        for y in [[0.0, 0.0], [0.19, 0.03], [0.8, 0.9], [0.3, 0.7]] {
            assert!((ev.eval(y) - v.eval(y)).abs() < 1e-15);
        }
    }

    #[test]
    fn traces() {
        let cell = UnitCellGeometry::centered_disc(0.25).unwrap();
        let view = DomainView::new(cell.clone(), 0.5).unwrap();
        let data = BoundaryData::new(DataFn::Const(0.0), DataFn::Const(1.0), 0.0, 0.0);
        assert_eq!(data.boundary_trace(&view, [0.1, 0.1], 0.0, 1e-6).unwrap(), 0.0);
        let on = [0.25, 0.125];
        assert_eq!(data.boundary_trace(&view, on, 0.5, 1e-6).unwrap(), 1.0);
        assert!(matches!(data.boundary_trace(&view, [0.0, 0.0], 0.5, 1e-6), Err(Error::TraceUndefined(_))));
        assert!(matches!(data.boundary_trace(&view, [0.25, 0.25], 0.0, 1e-6), Err(Error::TraceUndefined(_))));
        let bbar = data.bbar(&cell, 1.0);
        assert_eq!(bbar.eval([3.0, -1.0]), 1.0);
        for (s, t) in [(0.0, 0.0), (0.0, 0.5), (0.2, 0.9)] {
            assert!(data.limit_trace(&bbar, [0.0, 0.0], s) <= data.limit_trace(&bbar, [0.0, 0.0], t));
        }
    }

    #[test]
    fn bbar_of_oscillating_data() {
        let cell = UnitCellGeometry::centered_disc(0.25).unwrap();
        let b = parse_expression("2 + sin(2*pi*y1)").unwrap();
        let data = BoundaryData::new(DataFn::Const(0.0), DataFn::Expr(Arc::new(b)), 0.0, 2.0 * std::f64::consts::PI);
        let bbar = data.bbar(&cell, 1.0).eval([0.0, 0.0]);
        // Dense oracle: 10^4 points on the circle.
        let oracle = (0..10_000)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / 10_000.0;
                2.0 + (std::f64::consts::TAU * (0.5 + 0.25 * a.cos())).sin()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((1.0..=3.0).contains(&bbar));
        let spacing = std::f64::consts::TAU * 0.25 / 2048.0;
        assert!((bbar - oracle).abs() <= data.lip_b * spacing);
        let mut dense = data.clone();
        dense.bbar_samples = 20_480;
        let fine = dense.bbar(&cell, 1.0).eval([0.0, 0.0]);
        assert!(bbar >= fine && bbar - fine <= data.lip_b * spacing);
    }

    #[test]
    fn compatibility_check() {
        let cell = UnitCellGeometry::centered_disc(0.25).unwrap();
        let bad = BoundaryData::new(DataFn::Const(2.0), DataFn::Const(1.0), 0.0, 0.0);
        let bbar = bad.bbar(&cell, 1.0);
        assert!(matches!(
            check_compatibility(&bad, &bbar, [[0.0, 0.0]]),
            Err(Error::CompatibilityViolated { .. })
        ));
    }

    proptest! {
        #[test]
        fn hamiltonian_is_periodic(y0 in 0.0..1.0f64, y1 in 0.0..1.0f64, p0 in -4.0..4.0f64, p1 in -4.0..4.0f64, z0 in -3i32..3, z1 in -3i32..3) {
            let m = bump_model();
            let a = m.hamiltonian([y0, y1], [p0, p1]);
            let b = m.hamiltonian([y0 + z0 as f64, y1 + z1 as f64], [p0, p1]);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn hamiltonian_is_convex(y0 in 0.0..1.0f64, y1 in 0.0..1.0f64,
                                 a in prop::array::uniform2(-12.0..12.0f64),
                                 b in prop::array::uniform2(-12.0..12.0f64)) {
            let m = bump_model();
            let y = [y0, y1];
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let lhs = m.hamiltonian(y, mid);
            let rhs = 0.5 * (m.hamiltonian(y, a) + m.hamiltonian(y, b));
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
