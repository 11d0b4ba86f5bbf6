//! Periodic perforated domains.
//!
//! A [`UnitCellGeometry`] lists the holes of the reference cell `[0,1]^2`.
//! The perforated set is the complement of all integer translates of those
//! holes. A [`DomainView`] places that set at a concrete scale `epsilon`,
//! optionally shrinking every hole by a dilution factor `eta` and removing the
//! holes of a finite set of defect cells.
//!
//! Holes are discs. A disc centered at `(1/2, 1/2)` corresponds to a hole
//! centered at the origin of the symmetric cell `(-1/2, 1/2)^2`; dilution
//! shrinks each hole towards the cell center `(1/2, 1/2)`.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A point of the plane.
pub type Point = [f64; 2];

/// Index of a unit cell `z + [0,1)^2`.
pub type CellIndex = [i64; 2];

/// Center of the reference cell; dilution shrinks holes towards it.
pub const CELL_CENTER: Point = [0.5, 0.5];

/// Signed distance evaluator for a user supplied hole shape.
///
/// The returned value must be negative inside the hole and positive outside,
/// measured in unscaled cell coordinates.
pub trait SignedDistance: Send + Sync {
    fn signed_distance(&self, y: Point) -> f64;
    /// Bounding radius around `center()`; the hole must lie inside it.
    fn bounding_radius(&self) -> f64;
    fn center(&self) -> Point;
}

#[derive(Clone)]
pub enum Hole {
    Disc { center: Point, radius: f64 },
    Custom(Arc<dyn SignedDistance>),
}

impl fmt::Debug for Hole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hole::Disc { center, radius } => f
                .debug_struct("Disc")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            Hole::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Hole {
    pub fn disc(center: Point, radius: f64) -> Self {
        Hole::Disc { center, radius }
    }

    fn center(&self) -> Point {
        match self {
            Hole::Disc { center, .. } => *center,
            Hole::Custom(sd) => sd.center(),
        }
    }

    fn bounding_radius(&self) -> f64 {
        match self {
            Hole::Disc { radius, .. } => *radius,
            Hole::Custom(sd) => sd.bounding_radius(),
        }
    }

    /// Signed distance to this hole after shrinking it by `eta` about the
    /// cell center, with the hole lattice-shifted by `shift`.
    fn signed_distance(&self, y: Point, eta: f64, shift: Point) -> f64 {
        match self {
            Hole::Disc { center, radius } => {
                let c = diluted_center(*center, eta, shift);
                norm(sub(y, c)) - eta * radius
            }
            Hole::Custom(sd) => {
                // Pull y back to the undiluted hole frame.
                let c = diluted_center(sd.center(), eta, shift);
                let rel = sub(y, c);
                let base = sd.center();
                let pulled = [base[0] + rel[0] / eta, base[1] + rel[1] / eta];
                eta * sd.signed_distance(pulled)
            }
        }
    }
}

fn diluted_center(center: Point, eta: f64, shift: Point) -> Point {
    [
        CELL_CENTER[0] + eta * (center[0] - CELL_CENTER[0]) + shift[0],
        CELL_CENTER[1] + eta * (center[1] - CELL_CENTER[1]) + shift[1],
    ]
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Holes of the reference cell `[0,1]^2`.
#[derive(Clone, Debug, Default)]
pub struct UnitCellGeometry {
    holes: Vec<Hole>,
}

impl UnitCellGeometry {
    /// Validates that every hole sits strictly inside the open cell and that
    /// holes are pairwise separated.
    pub fn new(holes: Vec<Hole>) -> Result<Self> {
        for (i, hole) in holes.iter().enumerate() {
            let c = hole.center();
            let r = hole.bounding_radius();
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::Geometry(format!("hole {i}: radius must be positive")));
            }
            if c.iter().any(|&ci| ci - r <= 0.0 || ci + r >= 1.0) {
                return Err(Error::Geometry(format!(
                    "hole {i} at {c:?} with radius {r} is not compactly contained in the open unit cell"
                )));
            }
            for (j, other) in holes.iter().enumerate().take(i) {
                let gap = norm(sub(c, other.center())) - r - other.bounding_radius();
                if gap <= 0.0 {
                    return Err(Error::Geometry(format!("holes {j} and {i} overlap")));
                }
            }
        }
        Ok(Self { holes })
    }

    /// The cell without holes (the whole plane).
    pub fn empty() -> Self {
        Self { holes: Vec::new() }
    }

    /// One disc of the given radius at the cell center.
    pub fn centered_disc(radius: f64) -> Result<Self> {
        Self::new(vec![Hole::disc(CELL_CENTER, radius)])
    }

    pub fn holes(&self) -> &[Hole] {
        &self.holes
    }

    pub fn is_empty(&self) -> bool {
        self.holes.is_empty()
    }

    /// Canonical text used for hashing; custom holes hash by position only.
    pub fn canonical(&self) -> String {
        let mut s = String::from("cell");
        for h in &self.holes {
            match h {
                Hole::Disc { center, radius } => {
                    s.push_str(&format!(
                        ";disc({:e},{:e},{:e})",
                        center[0], center[1], radius
                    ));
                }
                Hole::Custom(sd) => {
                    let c = sd.center();
                    s.push_str(&format!(";custom({:e},{:e},{:e})", c[0], c[1], sd.bounding_radius()));
                }
            }
        }
        s
    }
}

/// Where a point sits relative to the perforated domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PointClass {
    Interior,
    Boundary,
    Exterior,
}

impl PointClass {
    pub fn is_admissible(self) -> bool {
        !matches!(self, PointClass::Exterior)
    }
}

/// A perforated domain at scale `epsilon`.
#[derive(Clone, Debug)]
pub struct DomainView {
    cell: UnitCellGeometry,
    epsilon: f64,
    eta: f64,
    defects: BTreeSet<CellIndex>,
}

impl DomainView {
    pub fn new(cell: UnitCellGeometry, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Geometry(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            cell,
            epsilon,
            eta: 1.0,
            defects: BTreeSet::new(),
        })
    }

    /// Shrinks every hole by `eta` in `[0, 1]` before scaling.
    pub fn with_dilution(mut self, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Geometry(format!("dilution factor {eta} outside [0,1]")));
        }
        self.eta = eta;
        Ok(self)
    }

    /// Removes the holes of the listed cells.
    pub fn with_defects<I: IntoIterator<Item = CellIndex>>(mut self, defects: I) -> Self {
        self.defects = defects.into_iter().collect();
        self
    }

    pub fn cell(&self) -> &UnitCellGeometry {
        &self.cell
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn defects(&self) -> &BTreeSet<CellIndex> {
        &self.defects
    }

    /// True when the view has no holes at all.
    pub fn is_hole_free(&self) -> bool {
        self.cell.is_empty() || self.eta == 0.0
    }

    /// True when the view is invariant under translation by `epsilon * Z^2`.
    pub fn is_periodic(&self) -> bool {
        self.defects.is_empty()
    }

    /// Nearest hole translate: (signed distance in unscaled units, hole index,
    /// lattice index of the translate). Ties prefer the cell containing `y`,
    /// then the smallest lattice index, then the smallest hole index.
    fn nearest_hole(&self, y: Point) -> Option<(f64, usize, CellIndex)> {
        if self.is_hole_free() {
            return None;
        }
        let base = [y[0].floor() as i64, y[1].floor() as i64];
        let mut best: Option<(f64, usize, CellIndex)> = None;
        for dz0 in -1..=1 {
            for dz1 in -1..=1 {
                let z = [base[0] + dz0, base[1] + dz1];
                if self.defects.contains(&z) {
                    continue;
                }
                let shift = [z[0] as f64, z[1] as f64];
                for (k, hole) in self.cell.holes.iter().enumerate() {
                    let d = hole.signed_distance(y, self.eta, shift);
                    let better = match best {
                        None => true,
                        Some((bd, bk, bz)) => {
                            d < bd || (d == bd && ((z != base, z, k) < (bz != base, bz, bk)))
                        }
                    };
                    if better {
                        best = Some((d, k, z));
                    }
                }
            }
        }
        best
    }

    /// Signed distance to the boundary of the scaled domain: positive inside,
    /// negative inside holes, `+inf` when there are no holes.
    pub fn boundary_distance(&self, x: Point) -> f64 {
        let y = [x[0] / self.epsilon, x[1] / self.epsilon];
        match self.nearest_hole(y) {
            Some((d, _, _)) => self.epsilon * d,
            None => f64::INFINITY,
        }
    }

    pub fn classify_point(&self, x: Point, tol: f64) -> PointClass {
        let d = self.boundary_distance(x);
        if d.abs() <= tol {
            PointClass::Boundary
        } else if d > 0.0 {
            PointClass::Interior
        } else {
            PointClass::Exterior
        }
    }

    /// Nearest point of the boundary, or `None` for hole-free views.
    ///
    /// A point at a disc center projects to `center + (r, 0)`.
    pub fn project_to_boundary(&self, x: Point) -> Option<Point> {
        let eps = self.epsilon;
        let y = [x[0] / eps, x[1] / eps];
        let (d, k, z) = self.nearest_hole(y)?;
        if d == 0.0 {
            return Some(x);
        }
        let shift = [z[0] as f64, z[1] as f64];
        match &self.cell.holes[k] {
            Hole::Disc { center, radius } => {
                let c = diluted_center(*center, self.eta, shift);
                let r = self.eta * radius;
                let rel = sub(y, c);
                let len = norm(rel);
                let dir = if len == 0.0 { [1.0, 0.0] } else { [rel[0] / len, rel[1] / len] };
                Some([eps * (c[0] + r * dir[0]), eps * (c[1] + r * dir[1])])
            }
            Hole::Custom(_) => {
                // Gradient descent on |sd| with a numerical gradient.
                let mut p = y;
                for _ in 0..64 {
                    let f = |q: Point| self.cell.holes[k].signed_distance(q, self.eta, shift);
                    let v = f(p);
                    if v.abs() < 1e-13 {
                        break;
                    }
                    let e = 1e-7;
                    let g = [
                        (f([p[0] + e, p[1]]) - f([p[0] - e, p[1]])) / (2.0 * e),
                        (f([p[0], p[1] + e]) - f([p[0], p[1] - e])) / (2.0 * e),
                    ];
                    let gn = g[0] * g[0] + g[1] * g[1];
                    if gn == 0.0 {
                        break;
                    }
                    p = [p[0] - v * g[0] / gn, p[1] - v * g[1] / gn];
                }
                Some([eps * p[0], eps * p[1]])
            }
        }
    }

    /// Points of the boundary inside the reference cell, `per_hole` samples
    /// per hole, in unscaled cell coordinates.
    pub fn cell_boundary_samples(&self, per_hole: usize) -> Vec<Point> {
        cell_boundary_samples(&self.cell, self.eta, per_hole)
    }

    /// Canonical text used for hashing.
    pub fn canonical(&self) -> String {
        let mut s = format!("{};eps={:e};eta={:e}", self.cell.canonical(), self.epsilon, self.eta);
        for d in &self.defects {
            s.push_str(&format!(";defect({},{})", d[0], d[1]));
        }
        s
    }
}

/// Samples of the hole boundaries of one cell (unscaled).
pub fn cell_boundary_samples(cell: &UnitCellGeometry, eta: f64, per_hole: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(per_hole * cell.holes.len());
    if eta == 0.0 {
        return out;
    }
    for hole in &cell.holes {
        match hole {
            Hole::Disc { center, radius } => {
                let c = diluted_center(*center, eta, [0.0, 0.0]);
                let r = eta * radius;
                for i in 0..per_hole {
                    let a = std::f64::consts::TAU * i as f64 / per_hole as f64;
                    out.push([c[0] + r * a.cos(), c[1] + r * a.sin()]);
                }
            }
            Hole::Custom(sd) => {
                // Ray march from the center outward along each angle.
                let c = sd.center();
                let rb = sd.bounding_radius();
                for i in 0..per_hole {
                    let a = std::f64::consts::TAU * i as f64 / per_hole as f64;
                    let dir = [a.cos(), a.sin()];
                    let (mut lo, mut hi) = (0.0, rb * 1.5);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        let p = [c[0] + mid * dir[0], c[1] + mid * dir[1]];
                        if sd.signed_distance(p) < 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let r = 0.5 * (lo + hi);
                    let p = [c[0] + r * dir[0], c[1] + r * dir[1]];
                    out.push(diluted_center(p, eta, [0.0, 0.0]));
                }
            }
        }
    }
    out
}

/// `|I ∩ [-k,k]^2| / k`.
pub fn defect_density(defects: &BTreeSet<CellIndex>, k: u64) -> f64 {
    assert!(k > 0, "defect density needs a positive window");
    let k = k as i64;
    let count = defects
        .iter()
        .filter(|z| z.iter().all(|&zi| (-k..=k).contains(&zi)))
        .count();
    count as f64 / k as f64
}
