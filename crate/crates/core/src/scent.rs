//! Food-scent potential: the screened Poisson problem `-c ΔU + a U = f` on
//! the fluid region with zero normal derivative on every wall, discretized
//! with the 5-point stencil on a cell-centered grid.
//!
//! Each fluid cell carries one unknown. A face shared with a solid cell or
//! the outer wall contributes no flux (ghost-cell Neumann closure), so the
//! discrete operator is a symmetric M-matrix and summing all equations
//! leaves `a Σ U h² = Σ f h²`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Arena, GeometryError, Vec2};

/// Default grid step in world units.
pub const DEFAULT_SPACING: f64 = 0.02;
/// Default relative residual `‖b - A u‖ / ‖b‖` at which CG stops.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

const GRID_TOL: f64 = 1e-9;
const NONE: u32 = u32::MAX;

/// Circular food patch emitting scent at a uniform rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoodSpec {
    pub center: Vec2,
    pub radius: f64,
    pub density: f64,
    pub diffusion: f64,
    pub decay: f64,
}

impl FoodSpec {
    /// Shared source constants used by every builtin configuration.
    pub fn standard(center: Vec2) -> Self {
        Self { center, radius: 0.04, density: 50.0, diffusion: 0.1, decay: 0.2 }
    }

    /// Source term: `density` inside the closed disc, zero elsewhere.
    pub fn source(&self, p: Vec2) -> f64 {
        if (p - self.center).norm() <= self.radius {
            self.density
        } else {
            0.0
        }
    }

    pub fn validate(&self, arena: &Arena) -> Result<(), ScentError> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ScentError::InvalidFood(format!("{name} must be positive, got {v}")))
            }
        };
        positive("radius", self.radius)?;
        positive("density", self.density)?;
        positive("diffusion", self.diffusion)?;
        positive("decay", self.decay)?;
        let c = self.center;
        let b = &arena.bounds;
        let wall_gap = (c.x - b.lo.x).min(b.hi.x - c.x).min(c.y - b.lo.y).min(b.hi.y - c.y);
        if !b.contains(c) || wall_gap < self.radius {
            return Err(ScentError::InvalidFood(format!(
                "food disc at {c} with radius {} leaves the arena",
                self.radius
            )));
        }
        for (i, ob) in arena.obstacles.iter().enumerate() {
            let nearest = Vec2::new(c.x.clamp(ob.lo.x, ob.hi.x), c.y.clamp(ob.lo.y, ob.hi.y));
            if (c - nearest).norm() < self.radius {
                return Err(ScentError::InvalidFood(format!(
                    "food disc at {c} with radius {} intersects obstacle {i}",
                    self.radius
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    /// Defaults to `50 * max(nx, ny)`.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rel_tol: DEFAULT_REL_TOL, max_iter: None }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScentError {
    #[error("grid spacing {spacing} does not conform to the arena: {reason}")]
    NonConforming { spacing: f64, reason: String },
    #[error("grid spacing {spacing} is too coarse for food radius {radius} (need spacing <= radius / 2)")]
    Unresolved { spacing: f64, radius: f64 },
    #[error("invalid food source: {0}")]
    InvalidFood(String),
    #[error("invalid coefficients: diffusion {diffusion}, decay {decay} (both must be positive)")]
    InvalidCoefficients { diffusion: f64, decay: f64 },
    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Solved scent potential with per-cell gradient.
#[derive(Debug, Clone)]
pub struct ScentField {
    arena: Arena,
    spacing: f64,
    nx: usize,
    ny: usize,
    diffusion: f64,
    decay: f64,
    fluid: Vec<bool>,
    /// `U` per cell, row-major with `x` fastest; zero on solid cells.
    values: Vec<f64>,
    gradient: Vec<Vec2>,
    source: Vec<f64>,
    iterations: usize,
    residual: f64,
}

/// Solve for the scent emitted by `food`.
pub fn solve_field(arena: &Arena, food: &FoodSpec, spacing: f64) -> Result<ScentField, ScentError> {
    food.validate(arena)?;
    if spacing > food.radius / 2.0 {
        return Err(ScentError::Unresolved { spacing, radius: food.radius });
    }
    solve_with_source(arena, food.diffusion, food.decay, spacing, |p| food.source(p), SolverOptions::default())
}

/// Solve `-c ΔU + a U = f` for an arbitrary source sampled at cell centers.
pub fn solve_with_source<F>(
    arena: &Arena,
    diffusion: f64,
    decay: f64,
    spacing: f64,
    source: F,
    opts: SolverOptions,
) -> Result<ScentField, ScentError>
where
    F: Fn(Vec2) -> f64,
{
    arena.validate()?;
    if !(diffusion > 0.0 && decay > 0.0) {
        return Err(ScentError::InvalidCoefficients { diffusion, decay });
    }
    let (nx, ny) = conforming_grid(arena, spacing)?;
    let lo = arena.bounds.lo;
    let center = |i: usize, j: usize| Vec2::new(lo.x + (i as f64 + 0.5) * spacing, lo.y + (j as f64 + 0.5) * spacing);

    let mut fluid = vec![false; nx * ny];
    let mut source_grid = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let c = center(i, j);
            let k = j * nx + i;
            fluid[k] = arena.contains(c);
            if fluid[k] {
                source_grid[k] = source(c);
            }
        }
    }

    // Compact numbering of the fluid cells.
    let mut compact = vec![NONE; nx * ny];
    let mut cells = Vec::new();
    for (k, &f) in fluid.iter().enumerate() {
        if f {
            compact[k] = cells.len() as u32;
            cells.push(k);
        }
    }
    let neighbors: Vec<[u32; 4]> = cells
        .iter()
        .map(|&k| {
            let (i, j) = (k % nx, k / nx);
            let at = |ii: Option<usize>, jj: Option<usize>| match (ii, jj) {
                (Some(ii), Some(jj)) if ii < nx && jj < ny => compact[jj * nx + ii],
                _ => NONE,
            };
            [
                at(i.checked_sub(1), Some(j)),
                at(Some(i + 1), Some(j)),
                at(Some(i), j.checked_sub(1)),
                at(Some(i), Some(j + 1)),
            ]
        })
        .collect();

    let h2 = spacing * spacing;
    let operator = Operator { neighbors: &neighbors, mass: decay * h2, diffusion };
    let rhs: Vec<f64> = cells.iter().map(|&k| source_grid[k] * h2).collect();
    let max_iter = opts.max_iter.unwrap_or(50 * nx.max(ny));
    let (solution, iterations, residual) = conjugate_gradient(&operator, &rhs, opts.rel_tol, max_iter)?;

    let mut values = vec![0.0; nx * ny];
    for (&k, &u) in cells.iter().zip(&solution) {
        values[k] = u;
    }
    let gradient = cell_gradients(&values, &fluid, nx, ny, spacing);

    Ok(ScentField {
        arena: arena.clone(),
        spacing,
        nx,
        ny,
        diffusion,
        decay,
        fluid,
        values,
        gradient,
        source: source_grid,
        iterations,
        residual,
    })
}

fn conforming_grid(arena: &Arena, spacing: f64) -> Result<(usize, usize), ScentError> {
    let bad = |reason: String| ScentError::NonConforming { spacing, reason };
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(bad("spacing must be positive".into()));
    }
    let b = &arena.bounds;
    let count = |len: f64, axis: &str| -> Result<usize, ScentError> {
        let n = (len / spacing).round();
        if n < 1.0 || (n * spacing - len).abs() > GRID_TOL {
            return Err(bad(format!("{axis} extent {len} is not a multiple of the spacing")));
        }
        Ok(n as usize)
    };
    let nx = count(b.width(), "x")?;
    let ny = count(b.height(), "y")?;
    let on_line = |v: f64, origin: f64| {
        let s = (v - origin) / spacing;
        (s.round() - s).abs() * spacing <= GRID_TOL
    };
    for (i, ob) in arena.obstacles.iter().enumerate() {
        if !(on_line(ob.lo.x, b.lo.x) && on_line(ob.hi.x, b.lo.x) && on_line(ob.lo.y, b.lo.y) && on_line(ob.hi.y, b.lo.y)) {
            return Err(bad(format!("obstacle {i} edges are not on grid lines")));
        }
    }
    Ok((nx, ny))
}

/// `h² (-c Δ_h + a)` on the fluid cells, Neumann faces dropped.
struct Operator<'a> {
    neighbors: &'a [[u32; 4]],
    mass: f64,
    diffusion: f64,
}

impl Operator<'_> {
    fn diagonal(&self, k: usize) -> f64 {
        let degree = self.neighbors[k].iter().filter(|&&n| n != NONE).count() as f64;
        self.mass + self.diffusion * degree
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (k, nb) in self.neighbors.iter().enumerate() {
            let mut acc = self.mass * u[k];
            for &n in nb {
                if n != NONE {
                    acc += self.diffusion * (u[k] - u[n as usize]);
                }
            }
            out[k] = acc;
        }
    }
}

/// Jacobi-preconditioned conjugate gradient from a zero initial guess.
fn conjugate_gradient(
    op: &Operator<'_>,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64), ScentError> {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let inv_diag: Vec<f64> = (0..n).map(|k| 1.0 / op.diagonal(k)).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);

    for iter in 1..=max_iter {
        op.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if norm(&r) <= rel_tol * b_norm {
            // Confirm against the true residual, not the recurrence.
            op.apply(&x, &mut ap);
            let true_res = ap.iter().zip(b).map(|(ax, b)| (b - ax).powi(2)).sum::<f64>().sqrt() / b_norm;
            if true_res <= rel_tol {
                return Ok((x, iter, true_res));
            }
            for k in 0..n {
                r[k] = b[k] - ap[k];
            }
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(ScentError::NotConverged { iterations: max_iter, residual: norm(&r) / b_norm })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Central differences where both neighbours along an axis are fluid. A cell
/// touching a wall along an axis gets a zero component on that axis, the
/// discrete form of `∂U/∂n = 0`.
fn cell_gradients(values: &[f64], fluid: &[bool], nx: usize, ny: usize, h: f64) -> Vec<Vec2> {
    let is_fluid = |i: isize, j: isize| i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && fluid[j as usize * nx + i as usize];
    let mut out = vec![Vec2::ZERO; nx * ny];
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            if !is_fluid(i, j) {
                continue;
            }
            let at = |i: isize, j: isize| values[j as usize * nx + i as usize];
            let gx = if is_fluid(i - 1, j) && is_fluid(i + 1, j) { (at(i + 1, j) - at(i - 1, j)) / (2.0 * h) } else { 0.0 };
            let gy = if is_fluid(i, j - 1) && is_fluid(i, j + 1) { (at(i, j + 1) - at(i, j - 1)) / (2.0 * h) } else { 0.0 };
            out[j as usize * nx + i as usize] = Vec2::new(gx, gy);
        }
    }
    out
}

impl ScentField {
    pub fn arena(&self) -> &Arena {
        &self.arena
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// CG iterations and final relative residual.
    pub fn solver_stats(&self) -> (usize, f64) {
        (self.iterations, self.residual)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        let lo = self.arena.bounds.lo;
        Vec2::new(lo.x + (i as f64 + 0.5) * self.spacing, lo.y + (j as f64 + 0.5) * self.spacing)
    }

    pub fn is_fluid(&self, i: usize, j: usize) -> bool {
        self.fluid[j * self.nx + i]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn cell_gradient(&self, i: usize, j: usize) -> Vec2 {
        self.gradient[j * self.nx + i]
    }

    pub fn cell_source(&self, i: usize, j: usize) -> f64 {
        self.source[j * self.nx + i]
    }

    /// Iterate `(i, j)` over fluid cells, row-major.
    pub fn fluid_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| (i, j))).filter(move |&(i, j)| self.is_fluid(i, j))
    }

    /// Fluid cell with the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        self.fluid_cells()
            .max_by(|a, b| self.value(a.0, a.1).total_cmp(&self.value(b.0, b.1)))
            .expect("field has at least one fluid cell")
    }

    /// `Σ U h²` over fluid cells.
    pub fn mass(&self) -> f64 {
        self.fluid_cells().map(|(i, j)| self.value(i, j)).sum::<f64>() * self.spacing * self.spacing
    }

    /// `Σ f h²` over fluid cells.
    pub fn source_mass(&self) -> f64 {
        self.fluid_cells().map(|(i, j)| self.cell_source(i, j)).sum::<f64>() * self.spacing * self.spacing
    }

    pub fn sample_value(&self, p: Vec2) -> Result<f64, GeometryError> {
        self.check(p)?;
        Ok(self.interpolate(p, |k| self.values[k]).0)
    }

    /// Interpolated `∇U`, the direction of increasing scent.
    pub fn sample_gradient(&self, p: Vec2) -> Result<Vec2, GeometryError> {
        self.check(p)?;
        Ok(self.sample_gradient_unchecked(p))
    }

    pub(crate) fn sample_gradient_unchecked(&self, p: Vec2) -> Vec2 {
        let (gx, w) = self.interpolate(p, |k| self.gradient[k].x);
        let (gy, _) = self.interpolate(p, |k| self.gradient[k].y);
        debug_assert!(w > 0.0);
        Vec2::new(gx, gy)
    }

    fn check(&self, p: Vec2) -> Result<(), GeometryError> {
        if self.arena.contains(p) {
            Ok(())
        } else {
            Err(GeometryError::OutsideFluid(p))
        }
    }

    /// Bilinear interpolation over the 2x2 stencil of cell centers around
    /// `p`; weights of solid or out-of-grid cells are renormalized away.
    /// Returns the value and the total fluid weight.
    fn interpolate(&self, p: Vec2, get: impl Fn(usize) -> f64) -> (f64, f64) {
        let lo = self.arena.bounds.lo;
        let fx = (p.x - lo.x) / self.spacing - 0.5;
        let fy = (p.y - lo.y) / self.spacing - 0.5;
        let (i0, tx) = split(fx);
        let (j0, ty) = split(fy);
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (di, wx) in [(0, 1.0 - tx), (1, tx)] {
            for (dj, wy) in [(0, 1.0 - ty), (1, ty)] {
                let w = wx * wy;
                if w == 0.0 {
                    continue;
                }
                let (i, j) = (i0 + di, j0 + dj);
                if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
                    continue;
                }
                let k = j as usize * self.nx + i as usize;
                if self.fluid[k] {
                    acc += w * get(k);
                    wsum += w;
                }
            }
        }
        if wsum > 0.0 {
            return (acc / wsum, wsum);
        }
        // Only reachable for points on a wall whose whole stencil is solid.
        let i = (fx.round().max(0.0) as usize).min(self.nx - 1);
        let j = (fy.round().max(0.0) as usize).min(self.ny - 1);
        let k = self.nearest_fluid(i, j);
        (get(k), 0.0)
    }

    fn nearest_fluid(&self, i: usize, j: usize) -> usize {
        let target = self.cell_center(i, j);
        self.fluid_cells()
            .min_by(|a, b| {
                let da = (self.cell_center(a.0, a.1) - target).norm_sq();
                let db = (self.cell_center(b.0, b.1) - target).norm_sq();
                da.total_cmp(&db)
            })
            .map(|(i, j)| j * self.nx + i)
            .expect("field has at least one fluid cell")
    }
}

/// Integer cell index and fractional offset; offsets within 1e-12 of a node
/// snap to it so cell centers interpolate exactly.
fn split(f: f64) -> (isize, f64) {
    let r = f.round();
    if (f - r).abs() < 1e-12 {
        return (r as isize, 0.0);
    }
    let base = f.floor();
    (base as isize, f - base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AxisRect;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> AxisRect {
        AxisRect::new(Vec2::new(x0, y0), Vec2::new(x1, y1)).unwrap()
    }

    fn small_arena() -> Arena {
        Arena::new(rect(0.0, 0.0, 1.0, 1.0), vec![rect(0.4, 0.4, 0.6, 1.0)]).unwrap()
    }

    #[test]
    fn constant_source_gives_constant_field() {
        let field = solve_with_source(&small_arena(), 0.1, 0.2, 0.05, |_| 50.0, SolverOptions::default()).unwrap();
        for (i, j) in field.fluid_cells() {
            assert!((field.value(i, j) - 250.0).abs() < 1e-6 * 250.0);
            assert!(field.cell_gradient(i, j).norm() < 1e-6);
        }
        let v = field.sample_value(Vec2::new(0.13, 0.77)).unwrap();
        assert!((v - 250.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_conforming_grid() {
        let err = solve_with_source(&small_arena(), 0.1, 0.2, 0.03, |_| 1.0, SolverOptions::default()).unwrap_err();
        assert!(matches!(err, ScentError::NonConforming { .. }));
        let off_grid = Arena::new(rect(0.0, 0.0, 1.0, 1.0), vec![rect(0.41, 0.4, 0.6, 1.0)]).unwrap();
        let err = solve_with_source(&off_grid, 0.1, 0.2, 0.05, |_| 1.0, SolverOptions::default()).unwrap_err();
        assert!(matches!(err, ScentError::NonConforming { .. }));
    }

    #[test]
    fn rejects_unresolved_source() {
        let food = FoodSpec::standard(Vec2::new(0.2, 0.2));
        let err = solve_field(&small_arena(), &food, 0.05).unwrap_err();
        assert!(matches!(err, ScentError::Unresolved { .. }));
    }

    #[test]
    fn rejects_food_inside_obstacle() {
        let food = FoodSpec::standard(Vec2::new(0.5, 0.7));
        assert!(matches!(solve_field(&small_arena(), &food, 0.02), Err(ScentError::InvalidFood(_))));
    }

    #[test]
    fn reports_non_convergence() {
        let food = FoodSpec::standard(Vec2::new(0.2, 0.2));
        let opts = SolverOptions { rel_tol: 1e-12, max_iter: Some(3) };
        let err = solve_with_source(&small_arena(), 0.1, 0.2, 0.02, |p| food.source(p), opts).unwrap_err();
        match err {
            ScentError::NotConverged { iterations, residual } => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn interpolation_is_nodal_and_linear() {
        let field = solve_with_source(&small_arena(), 0.1, 0.2, 0.05, |p| p.x * 10.0, SolverOptions::default()).unwrap();
        for (i, j) in field.fluid_cells() {
            assert_eq!(field.sample_value(field.cell_center(i, j)).unwrap(), field.value(i, j));
        }
        // Two interior neighbours well away from walls.
        let (a, b) = ((3, 3), (4, 3));
        let mid = (field.cell_center(a.0, a.1) + field.cell_center(b.0, b.1)) * 0.5;
        let expect = 0.5 * (field.value(a.0, a.1) + field.value(b.0, b.1));
        assert!((field.sample_value(mid).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn sampling_outside_is_an_error() {
        let field = solve_with_source(&small_arena(), 0.1, 0.2, 0.05, |_| 1.0, SolverOptions::default()).unwrap();
        assert!(field.sample_value(Vec2::new(0.5, 0.8)).is_err());
        assert!(field.sample_gradient(Vec2::new(1.5, 0.5)).is_err());
    }

    #[test]
    fn solid_weights_are_redistributed() {
        let field = solve_with_source(&small_arena(), 0.1, 0.2, 0.05, |p| p.y, SolverOptions::default()).unwrap();
        // Point on the obstacle's left face: two of the four stencil cells are solid.
        let p = Vec2::new(0.4, 0.62);
        let v = field.sample_value(p).unwrap();
        let (i, j0) = (7, 11);
        assert!(field.is_fluid(i, j0) && !field.is_fluid(i + 1, j0));
        let ty = (0.62 - field.cell_center(i, j0).y) / 0.05;
        let expect = (1.0 - ty) * field.value(i, j0) + ty * field.value(i, j0 + 1);
        assert!((v - expect).abs() < 1e-12);
    }
}
