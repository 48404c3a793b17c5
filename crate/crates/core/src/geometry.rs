//! Planar fluid domain: an outer rectangle with rectangular obstacles cut out.
//!
//! Rays are cast from fluid points against the boundary of the domain. Outer
//! walls are hit from the inside, obstacle faces from the outside, and every
//! hit carries the unit normal pointing back into the fluid. The reflected
//! velocity used by the wall-avoidance force is the specular reflection about
//! that normal.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on ray parameters.
pub const RAY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.x == 0.0 && self.y == 0.0
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Closed axis-aligned rectangle `[lo.x, hi.x] x [lo.y, hi.y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRect {
    pub lo: Vec2,
    pub hi: Vec2,
}

impl AxisRect {
    pub fn new(lo: Vec2, hi: Vec2) -> Result<Self, GeometryError> {
        let rect = Self { lo, hi };
        rect.validate()?;
        Ok(rect)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if !(self.lo.x < self.hi.x && self.lo.y < self.hi.y) {
            return Err(GeometryError::EmptyRect { lo: self.lo, hi: self.hi });
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.hi.x - self.lo.x
    }

    pub fn height(&self) -> f64 {
        self.hi.y - self.lo.y
    }

    pub fn center(&self) -> Vec2 {
        (self.lo + self.hi) * 0.5
    }

    /// Closed containment.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.lo.x && p.x <= self.hi.x && p.y >= self.lo.y && p.y <= self.hi.y
    }

    /// Open containment (interior only).
    pub fn contains_interior(&self, p: Vec2) -> bool {
        p.x > self.lo.x && p.x < self.hi.x && p.y > self.lo.y && p.y < self.hi.y
    }

    pub fn contains_rect(&self, other: &AxisRect) -> bool {
        self.contains(other.lo) && self.contains(other.hi)
    }

    fn interiors_overlap(&self, other: &AxisRect) -> bool {
        self.lo.x < other.hi.x && other.lo.x < self.hi.x && self.lo.y < other.hi.y && other.lo.y < self.hi.y
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rectangle has non-finite corner")]
    NonFinite,
    #[error("rectangle lo {lo} must be strictly below hi {hi} on both axes")]
    EmptyRect { lo: Vec2, hi: Vec2 },
    #[error("obstacle {index} is not inside the arena bounds")]
    ObstacleOutside { index: usize },
    #[error("obstacle {index} spans the arena along an entire axis")]
    ObstacleSpans { index: usize },
    #[error("obstacles {first} and {second} overlap")]
    ObstaclesOverlap { first: usize, second: usize },
    #[error("point {0} is outside the fluid region")]
    OutsideFluid(Vec2),
}

/// Fluid region: `bounds` minus the interiors of `obstacles`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub bounds: AxisRect,
    #[serde(default)]
    pub obstacles: Vec<AxisRect>,
}

/// Where a ray first meets the boundary of the fluid region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryHit {
    pub point: Vec2,
    /// Unit normal pointing into the fluid.
    pub normal: Vec2,
    pub distance: f64,
}

/// Which coordinates `clamp_inside` had to move, so callers can kill the
/// velocity component along the corresponding wall normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClampAxes {
    pub x: bool,
    pub y: bool,
}

impl ClampAxes {
    pub fn any(self) -> bool {
        self.x || self.y
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    t: f64,
    normal: Vec2,
    // |dir| along the face normal axis, used to settle corner ties.
    axis_weight: f64,
    x_face: bool,
}

impl Candidate {
    /// True when `self` should replace `best`.
    fn beats(&self, best: &Candidate) -> bool {
        if self.t < best.t - RAY_EPS {
            return true;
        }
        if self.t > best.t + RAY_EPS {
            return false;
        }
        // Corner: larger |dir| component wins, ties go to the x face.
        if self.axis_weight != best.axis_weight {
            return self.axis_weight > best.axis_weight;
        }
        self.x_face && !best.x_face
    }
}

impl Arena {
    pub fn new(bounds: AxisRect, obstacles: Vec<AxisRect>) -> Result<Self, GeometryError> {
        let arena = Self { bounds, obstacles };
        arena.validate()?;
        Ok(arena)
    }

    pub fn open(bounds: AxisRect) -> Self {
        Self { bounds, obstacles: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        self.bounds.validate()?;
        for (index, ob) in self.obstacles.iter().enumerate() {
            ob.validate()?;
            if !self.bounds.contains_rect(ob) {
                return Err(GeometryError::ObstacleOutside { index });
            }
            let spans_x = ob.lo.x <= self.bounds.lo.x && ob.hi.x >= self.bounds.hi.x;
            let spans_y = ob.lo.y <= self.bounds.lo.y && ob.hi.y >= self.bounds.hi.y;
            if spans_x || spans_y {
                return Err(GeometryError::ObstacleSpans { index });
            }
        }
        for i in 0..self.obstacles.len() {
            for j in i + 1..self.obstacles.len() {
                if self.obstacles[i].interiors_overlap(&self.obstacles[j]) {
                    return Err(GeometryError::ObstaclesOverlap { first: i, second: j });
                }
            }
        }
        Ok(())
    }

    /// True iff `p` is in the closed bounds and outside every obstacle interior.
    pub fn contains(&self, p: Vec2) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|ob| ob.contains_interior(p))
    }

    /// First point where the ray `origin + s * dir`, `s >= 0`, meets the
    /// boundary. A zero direction never hits anything.
    pub fn ray_first_hit(&self, origin: Vec2, dir: Vec2) -> Result<Option<BoundaryHit>, GeometryError> {
        if !self.contains(origin) {
            return Err(GeometryError::OutsideFluid(origin));
        }
        Ok(self.ray_first_hit_unchecked(origin, dir))
    }

    pub(crate) fn ray_first_hit_unchecked(&self, origin: Vec2, dir: Vec2) -> Option<BoundaryHit> {
        if dir.is_zero() {
            return None;
        }
        let mut best: Option<Candidate> = None;
        let mut offer = |c: Candidate| match &best {
            Some(b) if !c.beats(b) => {}
            _ => best = Some(c),
        };

        // Outer walls, seen from inside.
        let b = &self.bounds;
        if dir.x > 0.0 {
            offer(wall(b.hi.x - origin.x, dir.x, Vec2::new(-1.0, 0.0), true));
        } else if dir.x < 0.0 {
            offer(wall(b.lo.x - origin.x, dir.x, Vec2::new(1.0, 0.0), true));
        }
        if dir.y > 0.0 {
            offer(wall(b.hi.y - origin.y, dir.y, Vec2::new(0.0, -1.0), false));
        } else if dir.y < 0.0 {
            offer(wall(b.lo.y - origin.y, dir.y, Vec2::new(0.0, 1.0), false));
        }

        // Obstacles, seen from outside (slab method, entry face).
        for ob in &self.obstacles {
            if let Some(c) = slab_entry(ob, origin, dir) {
                offer(c);
            }
        }

        best.map(|c| {
            let t = c.t.max(0.0);
            let mut point = origin + dir * t;
            // Snap the coordinate that lies on the face exactly onto it.
            snap_to_face(&mut point, c.normal, self, origin, dir, t);
            BoundaryHit { point, normal: c.normal, distance: t * dir.norm() }
        })
    }

    /// Specular reflection of `v` about the first boundary face ahead of `x`.
    /// Returns `v` itself when the ray misses (including `v = 0`).
    pub fn reflect(&self, x: Vec2, v: Vec2) -> Result<(Vec2, Option<BoundaryHit>), GeometryError> {
        if !self.contains(x) {
            return Err(GeometryError::OutsideFluid(x));
        }
        Ok(self.reflect_unchecked(x, v))
    }

    pub(crate) fn reflect_unchecked(&self, x: Vec2, v: Vec2) -> (Vec2, Option<BoundaryHit>) {
        match self.ray_first_hit_unchecked(x, v) {
            None => (v, None),
            Some(hit) => (reflect_about(v, hit.normal), Some(hit)),
        }
    }

    /// Pull `p` back into the fluid region, `eps` inside the nearest wall.
    pub fn clamp_inside(&self, p: Vec2, eps: f64) -> Vec2 {
        self.clamp_inside_axes(p, eps).0
    }

    pub fn clamp_inside_axes(&self, p: Vec2, eps: f64) -> (Vec2, ClampAxes) {
        if self.contains(p) {
            return (p, ClampAxes::default());
        }
        let mut axes = ClampAxes::default();
        let b = &self.bounds;
        let mut q = p;
        if q.x < b.lo.x {
            q.x = b.lo.x + eps;
            axes.x = true;
        } else if q.x > b.hi.x {
            q.x = b.hi.x - eps;
            axes.x = true;
        }
        if q.y < b.lo.y {
            q.y = b.lo.y + eps;
            axes.y = true;
        } else if q.y > b.hi.y {
            q.y = b.hi.y - eps;
            axes.y = true;
        }
        if let Some(ob) = self.obstacles.iter().find(|ob| ob.contains_interior(q)) {
            let (moved, on_x) = self.push_out_of(ob, q, eps);
            q = moved;
            if on_x {
                axes.x = true;
            } else {
                axes.y = true;
            }
        }
        (q, axes)
    }

    /// Move `q` (inside `ob`) across the nearest obstacle face that borders
    /// fluid. Faces lying on the outer wall are skipped.
    fn push_out_of(&self, ob: &AxisRect, q: Vec2, eps: f64) -> (Vec2, bool) {
        let b = &self.bounds;
        let faces = [
            (q.x - ob.lo.x, ob.lo.x > b.lo.x, Vec2::new(ob.lo.x - eps, q.y), true),
            (ob.hi.x - q.x, ob.hi.x < b.hi.x, Vec2::new(ob.hi.x + eps, q.y), true),
            (q.y - ob.lo.y, ob.lo.y > b.lo.y, Vec2::new(q.x, ob.lo.y - eps), false),
            (ob.hi.y - q.y, ob.hi.y < b.hi.y, Vec2::new(q.x, ob.hi.y + eps), false),
        ];
        faces
            .iter()
            .filter(|f| f.1)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|f| (f.2, f.3))
            // Validation guarantees at least one free face.
            .expect("obstacle has no face bordering the fluid")
    }

    /// Every reflective face as a segment, with its fluid-side normal.
    /// Obstacle faces lying on the outer wall are omitted.
    pub fn faces(&self) -> Vec<Face> {
        let b = &self.bounds;
        let mut out = vec![
            Face::new(b.lo, Vec2::new(b.hi.x, b.lo.y), Vec2::new(0.0, 1.0)),
            Face::new(Vec2::new(b.lo.x, b.hi.y), b.hi, Vec2::new(0.0, -1.0)),
            Face::new(b.lo, Vec2::new(b.lo.x, b.hi.y), Vec2::new(1.0, 0.0)),
            Face::new(Vec2::new(b.hi.x, b.lo.y), b.hi, Vec2::new(-1.0, 0.0)),
        ];
        for ob in &self.obstacles {
            if ob.lo.y > b.lo.y {
                out.push(Face::new(ob.lo, Vec2::new(ob.hi.x, ob.lo.y), Vec2::new(0.0, -1.0)));
            }
            if ob.hi.y < b.hi.y {
                out.push(Face::new(Vec2::new(ob.lo.x, ob.hi.y), ob.hi, Vec2::new(0.0, 1.0)));
            }
            if ob.lo.x > b.lo.x {
                out.push(Face::new(ob.lo, Vec2::new(ob.lo.x, ob.hi.y), Vec2::new(-1.0, 0.0)));
            }
            if ob.hi.x < b.hi.x {
                out.push(Face::new(Vec2::new(ob.hi.x, ob.lo.y), ob.hi, Vec2::new(1.0, 0.0)));
            }
        }
        out
    }
}

/// Axis-aligned boundary segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub a: Vec2,
    pub b: Vec2,
    pub normal: Vec2,
}

impl Face {
    fn new(a: Vec2, b: Vec2, normal: Vec2) -> Self {
        Self { a, b, normal }
    }

    pub fn tangent(&self) -> Vec2 {
        Vec2::new(-self.normal.y, self.normal.x)
    }
}

/// `v - 2 (v . n) n` for unit `n`.
#[inline]
pub fn reflect_about(v: Vec2, n: Vec2) -> Vec2 {
    v - n * (2.0 * v.dot(n))
}

fn wall(gap: f64, d: f64, normal: Vec2, x_face: bool) -> Candidate {
    Candidate { t: (gap / d).max(0.0), normal, axis_weight: d.abs(), x_face }
}

fn slab_entry(ob: &AxisRect, o: Vec2, d: Vec2) -> Option<Candidate> {
    let (tx0, tx1, nx) = slab_axis(o.x, d.x, ob.lo.x, ob.hi.x)?;
    let (ty0, ty1, ny) = slab_axis(o.y, d.y, ob.lo.y, ob.hi.y)?;
    let t_near = tx0.max(ty0);
    let t_far = tx1.min(ty1);
    if t_far < t_near - RAY_EPS || t_far <= RAY_EPS || t_near < -RAY_EPS {
        return None;
    }
    let cx = Candidate { t: tx0, normal: Vec2::new(nx, 0.0), axis_weight: d.x.abs(), x_face: true };
    let cy = Candidate { t: ty0, normal: Vec2::new(0.0, ny), axis_weight: d.y.abs(), x_face: false };
    // The entry face is the slab that is entered last.
    let entry = if (tx0 - ty0).abs() <= RAY_EPS {
        if cx.axis_weight >= cy.axis_weight {
            cx
        } else {
            cy
        }
    } else if tx0 > ty0 {
        cx
    } else {
        cy
    };
    if entry.normal.is_zero() {
        return None;
    }
    Some(Candidate { t: entry.t.max(0.0), ..entry })
}

/// Entry/exit parameters of one slab plus the outward normal sign of the
/// entry face. Returns `None` when a ray parallel to the slab lies outside it.
fn slab_axis(o: f64, d: f64, lo: f64, hi: f64) -> Option<(f64, f64, f64)> {
    if d == 0.0 {
        if o < lo || o > hi {
            return None;
        }
        return Some((f64::NEG_INFINITY, f64::INFINITY, 0.0));
    }
    let t_lo = (lo - o) / d;
    let t_hi = (hi - o) / d;
    if d > 0.0 {
        Some((t_lo, t_hi, -1.0))
    } else {
        Some((t_hi, t_lo, 1.0))
    }
}

fn snap_to_face(point: &mut Vec2, normal: Vec2, arena: &Arena, origin: Vec2, dir: Vec2, t: f64) {
    let target = |coord: f64, candidates: &[f64]| -> f64 {
        candidates
            .iter()
            .copied()
            .min_by(|a, b| (a - coord).abs().total_cmp(&(b - coord).abs()))
            .unwrap_or(coord)
    };
    let b = &arena.bounds;
    if normal.x != 0.0 {
        let mut xs = vec![b.lo.x, b.hi.x];
        xs.extend(arena.obstacles.iter().flat_map(|o| [o.lo.x, o.hi.x]));
        point.x = target(origin.x + dir.x * t, &xs);
    } else {
        let mut ys = vec![b.lo.y, b.hi.y];
        ys.extend(arena.obstacles.iter().flat_map(|o| [o.lo.y, o.hi.y]));
        point.y = target(origin.y + dir.y * t, &ys);
    }
}
