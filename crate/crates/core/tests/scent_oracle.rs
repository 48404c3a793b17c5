//! Scent-field checks against an independent banded Cholesky solve of the
//! same five-point system.

use shoal_core::scent::{solve_field, solve_with_source, SolverOptions};
use shoal_core::{builtin_config, Arena, AxisRect, Builtin, FoodSpec, Vec2};

/// Dense-banded direct solve of `h²(-c Δ + a) U = h² f` over every cell of
/// the grid. Solid cells get the trivial row `U = 0`. Returns `U` row-major.
fn banded_direct_solve(arena: &Arena, food: &FoodSpec, h: f64) -> (usize, usize, Vec<f64>) {
    let b = arena.bounds;
    let nx = (b.width() / h).round() as usize;
    let ny = (b.height() / h).round() as usize;
    let n = nx * ny;
    let bw = nx; // half bandwidth
    let center = |k: usize| Vec2::new(b.lo.x + ((k % nx) as f64 + 0.5) * h, b.lo.y + ((k / nx) as f64 + 0.5) * h);
    let fluid: Vec<bool> = (0..n).map(|k| arena.contains(center(k))).collect();

    // Lower band storage: band[k][d] = A[k][k - d].
    let mut band = vec![vec![0.0; bw + 1]; n];
    let mut rhs = vec![0.0; n];
    for k in 0..n {
        if !fluid[k] {
            band[k][0] = 1.0;
            continue;
        }
        let (i, j) = (k % nx, k / nx);
        let mut diag = food.decay * h * h;
        let nbrs = [
            (i > 0).then(|| k - 1),
            (i + 1 < nx).then(|| k + 1),
            (j > 0).then(|| k - nx),
            (j + 1 < ny).then(|| k + nx),
        ];
        for m in nbrs.into_iter().flatten() {
            if fluid[m] {
                diag += food.diffusion;
                if m < k {
                    band[k][k - m] = -food.diffusion;
                }
            }
        }
        band[k][0] = diag;
        rhs[k] = food.source(center(k)) * h * h;
    }

    // In-place banded Cholesky, L stored in `band`.
    for k in 0..n {
        let lo = k.saturating_sub(bw);
        for m in lo..k {
            // A[k][m] -= Σ_{p} L[k][p] L[m][p]
            let mut s = band[k][k - m];
            let plo = lo.max(m.saturating_sub(bw));
            for p in plo..m {
                s -= band[k][k - p] * band[m][m - p];
            }
            band[k][k - m] = s / band[m][0];
        }
        let mut d = band[k][0];
        for p in lo..k {
            d -= band[k][k - p] * band[k][k - p];
        }
        band[k][0] = d.sqrt();
    }
    // Forward then backward substitution.
    let mut y = rhs;
    for k in 0..n {
        let lo = k.saturating_sub(bw);
        let mut s = y[k];
        for p in lo..k {
            s -= band[k][k - p] * y[p];
        }
        y[k] = s / band[k][0];
    }
    for k in (0..n).rev() {
        let mut s = y[k];
        for m in k + 1..(k + bw + 1).min(n) {
            s -= band[m][m - k] * y[m];
        }
        y[k] = s / band[k][0];
    }
    (nx, ny, y)
}

fn nearest_cell(nx: usize, arena: &Arena, h: f64, p: Vec2) -> usize {
    let i = ((p.x - arena.bounds.lo.x) / h).floor() as usize;
    let j = ((p.y - arena.bounds.lo.y) / h).floor() as usize;
    j * nx + i
}

#[test]
fn config2_field_matches_direct_solve_and_ordering() {
    let cfg = builtin_config(Builtin::Config2);
    let h = 0.02;
    let field = solve_field(&cfg.arena, &cfg.food, h).unwrap();
    let (nx, ny, direct) = banded_direct_solve(&cfg.arena, &cfg.food, h);
    assert_eq!(field.dims(), (nx, ny));
    let scale = direct.iter().cloned().fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for (i, j) in field.fluid_cells() {
        worst = worst.max((field.value(i, j) - direct[j * nx + i]).abs());
    }
    assert!(worst <= 1e-8 * scale, "max deviation {worst:e} vs scale {scale}");

    // Oracle argmax is the cell whose center is nearest the food center.
    let argmax_direct = (0..direct.len()).max_by(|&a, &b| direct[a].total_cmp(&direct[b])).unwrap();
    let nearest = field
        .fluid_cells()
        .min_by(|a, b| {
            let da = (field.cell_center(a.0, a.1) - cfg.food.center).norm();
            let db = (field.cell_center(b.0, b.1) - cfg.food.center).norm();
            da.total_cmp(&db)
        })
        .unwrap();
    // Ties between the four cells around (3.5, 0.1): accept any cell at the
    // same minimal distance.
    let dmin = (field.cell_center(nearest.0, nearest.1) - cfg.food.center).norm();
    let (ai, aj) = field.argmax();
    assert!(((field.cell_center(ai, aj) - cfg.food.center).norm() - dmin).abs() < 1e-12);
    let (di, dj) = (argmax_direct % nx, argmax_direct / nx);
    assert!(((field.cell_center(di, dj) - cfg.food.center).norm() - dmin).abs() < 1e-12);

    let far = Vec2::new(0.5, 3.8);
    let near = Vec2::new(3.0, 0.5);
    assert!(direct[nearest_cell(nx, &cfg.arena, h, far)] < direct[nearest_cell(nx, &cfg.arena, h, near)]);
    assert!(field.sample_value(far).unwrap() < field.sample_value(near).unwrap());
}

#[test]
fn config1_gradient_points_at_food() {
    let cfg = builtin_config(Builtin::Config1Left);
    let h = 0.02;
    let field = solve_field(&cfg.arena, &cfg.food, h).unwrap();
    let p = Vec2::new(1.5, 2.0);
    let g = field.sample_gradient(p).unwrap();
    assert!(g.y < 0.0, "{g}");
    assert!(g.x.abs() < 0.1 * g.y.abs(), "{g}");

    // Same sign pattern from the direct solve by central differences
    // between the cells straddling p.
    let (nx, _, direct) = banded_direct_solve(&cfg.arena, &cfg.food, h);
    let at = |x: f64, y: f64| direct[nearest_cell(nx, &cfg.arena, h, Vec2::new(x, y))];
    let gy = (at(1.51, 2.01) - at(1.51, 1.99)) / h;
    let gx = (at(1.51, 2.01) - at(1.49, 2.01)) / h;
    assert!(gy < 0.0);
    assert!(gx.abs() < 0.1 * gy.abs());
    assert!((g.y - gy).abs() < 0.05 * gy.abs(), "{} vs {gy}", g.y);
}

#[test]
fn wall_adjacent_cells_have_zero_normal_gradient() {
    let cfg = builtin_config(Builtin::Config1Left);
    let field = solve_field(&cfg.arena, &cfg.food, 0.02).unwrap();
    let (nx, ny) = field.dims();
    for i in 0..nx {
        assert_eq!(field.cell_gradient(i, 0).y, 0.0);
        assert_eq!(field.cell_gradient(i, ny - 1).y, 0.0);
    }
    for j in 0..ny {
        assert_eq!(field.cell_gradient(0, j).x, 0.0);
    }
    let c = field.cell_center(75, 0);
    assert_eq!(field.sample_gradient(c).unwrap().y, 0.0);
}

#[test]
fn nonnegative_and_conservative_on_every_builtin() {
    for b in Builtin::ALL {
        let cfg = builtin_config(b);
        let field = solve_field(&cfg.arena, &cfg.food, 0.02).unwrap();
        let min = field.fluid_cells().map(|(i, j)| field.value(i, j)).fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10, "{b}: min {min}");
        let rel = (cfg.food.decay * field.mass() - field.source_mass()).abs() / field.source_mass();
        assert!(rel <= 1e-8, "{b}: {rel:e}");
    }
}

#[test]
fn centered_source_is_mirror_symmetric() {
    let arena = Arena::open(AxisRect::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 2.0)).unwrap());
    let food = FoodSpec { center: Vec2::new(1.0, 0.7), ..FoodSpec::standard(Vec2::ZERO) };
    let field = solve_field(&arena, &food, 0.02).unwrap();
    let (nx, _) = field.dims();
    let scale = field.value(field.argmax().0, field.argmax().1);
    for (i, j) in field.fluid_cells() {
        let mirrored = field.value(nx - 1 - i, j);
        assert!((field.value(i, j) - mirrored).abs() <= 1e-9 * scale.max(1.0));
    }
}

/// Restrict a fine field onto the coarse grid by averaging 2x2 blocks.
fn restricted_max_diff(coarse: &shoal_core::ScentField, fine: &shoal_core::ScentField) -> f64 {
    let mut worst = 0.0f64;
    for (i, j) in coarse.fluid_cells() {
        let avg = (fine.value(2 * i, 2 * j) + fine.value(2 * i + 1, 2 * j) + fine.value(2 * i, 2 * j + 1) + fine.value(2 * i + 1, 2 * j + 1)) / 4.0;
        worst = worst.max((coarse.value(i, j) - avg).abs());
    }
    worst
}

#[test]
fn grid_refinement_converges() {
    let cfg = builtin_config(Builtin::Config1Left);
    let solve = |h: f64| solve_with_source(&cfg.arena, cfg.food.diffusion, cfg.food.decay, h, |p| cfg.food.source(p), SolverOptions::default()).unwrap();
    let (f04, f02, f01) = (solve(0.04), solve(0.02), solve(0.01));
    let d_coarse = restricted_max_diff(&f04, &f02);
    let d_fine = restricted_max_diff(&f02, &f01);
    assert!(d_coarse / d_fine >= 3.0, "refinement ratio {} ({d_coarse:e} / {d_fine:e})", d_coarse / d_fine);
}
