#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use shoal_core::dynamics::step_with_noise;
use shoal_core::scent::{solve_with_source, SolverOptions};
use shoal_core::geometry::{Arena, BoundaryHit, Face};
use shoal_core::{builtin_config, AxisRect, Builtin, ModelParams, ScentField, SwarmState, Vec2};

pub fn builtin_arenas() -> Vec<(Builtin, Arena)> {
    Builtin::ALL.iter().map(|&b| (b, builtin_config(b).arena)).collect()
}

pub fn random_fluid_point<R: Rng>(arena: &Arena, rng: &mut R) -> Vec2 {
    let b = arena.bounds;
    loop {
        let p = Vec2::new(rng.random_range(b.lo.x..b.hi.x), rng.random_range(b.lo.y..b.hi.y));
        if arena.contains(p) {
            return p;
        }
    }
}

pub fn random_direction<R: Rng>(rng: &mut R) -> Vec2 {
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let speed: f64 = rng.random_range(0.01..2.0);
    Vec2::new(angle.cos(), angle.sin()) * speed
}

/// Brute force: does any face cross the open segment `(a, b)`?
/// Crossings within `tol` of either endpoint are ignored.
pub fn segment_crosses_any_face(faces: &[Face], a: Vec2, b: Vec2, tol: f64) -> Option<Face> {
    let d = b - a;
    for f in faces {
        let vertical = f.a.x == f.b.x;
        let (c, lo, hi, da, dd, other_a, other_d) = if vertical {
            (f.a.x, f.a.y.min(f.b.y), f.a.y.max(f.b.y), a.x, d.x, a.y, d.y)
        } else {
            (f.a.y, f.a.x.min(f.b.x), f.a.x.max(f.b.x), a.y, d.y, a.x, d.x)
        };
        if dd == 0.0 {
            continue;
        }
        let s = (c - da) / dd;
        let len = d.norm();
        if s * len <= tol || (1.0 - s) * len <= tol {
            continue;
        }
        let w = other_a + s * other_d;
        if w > lo + tol && w < hi - tol {
            return Some(*f);
        }
    }
    None
}

/// Is `hit.point` on some face whose normal equals `hit.normal`?
pub fn hit_lies_on_face(faces: &[Face], hit: &BoundaryHit, tol: f64) -> bool {
    faces.iter().any(|f| {
        let lo = Vec2::new(f.a.x.min(f.b.x), f.a.y.min(f.b.y));
        let hi = Vec2::new(f.a.x.max(f.b.x), f.a.y.max(f.b.y));
        let p = hit.point;
        p.x >= lo.x - tol && p.x <= hi.x + tol && p.y >= lo.y - tol && p.y <= hi.y + tol && f.normal == hit.normal
    })
}

/// Obstacle-free 20 x 20 tank with a flat scent field.
pub fn open_tank() -> (Arena, ScentField) {
    let arena = Arena::open(AxisRect::new(Vec2::new(0.0, 0.0), Vec2::new(20.0, 20.0)).unwrap());
    let field = solve_with_source(&arena, 0.1, 0.2, 1.0, |_| 1.0, SolverOptions::default()).unwrap();
    (arena, field)
}

/// Integrate to T = 1 with step `dt` driven by the fine Brownian path
/// `fine[k][i]` (standard normal increments of length `dt_fine`).
fn integrate_on_path(s0: &SwarmState, arena: &Arena, field: &ScentField, base: &ModelParams, fine: &[Vec<Vec2>], dt_fine: f64, ratio: usize) -> SwarmState {
    let params = ModelParams { dt: dt_fine * ratio as f64, ..*base };
    let mut s = s0.clone();
    for chunk in fine.chunks(ratio) {
        let mut w = vec![Vec2::ZERO; s.len()];
        for inc in chunk {
            for (acc, z) in w.iter_mut().zip(inc) {
                *acc += *z * (dt_fine.sqrt() * base.noise);
            }
        }
        s = step_with_noise(&s, arena, field, &params, &w).unwrap();
    }
    s
}

/// Strong convergence order of the Euler–Maruyama step on a two-fish
/// instance, from coupled Brownian paths against a 2^-12 reference.
pub fn fitted_strong_order() -> f64 {
    let (arena, field) = open_tank();
    let base = ModelParams { avoidance: 0.0, sensitivity: 0.0, noise: 0.05, ..ModelParams::default() };
    let s0 = SwarmState {
        time: 0.0,
        positions: vec![Vec2::new(10.0, 10.0), Vec2::new(10.3, 10.0)],
        velocities: vec![Vec2::new(0.1, 0.0), Vec2::new(0.0, 0.1)],
    };
    let levels = 12; // reference step 2^-12
    let dt_fine = 1.0 / (1u64 << levels) as f64;
    let ratios = [256usize, 128, 64, 32]; // dt = 2^-4 .. 2^-7
    let paths = 20;
    let mut errors = vec![0.0; ratios.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..paths {
        let fine: Vec<Vec<Vec2>> = (0..1usize << levels)
            .map(|_| (0..2).map(|_| Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect())
            .collect();
        let reference = integrate_on_path(&s0, &arena, &field, &base, &fine, dt_fine, 1);
        for (e, &ratio) in errors.iter_mut().zip(&ratios) {
            let coarse = integrate_on_path(&s0, &arena, &field, &base, &fine, dt_fine, ratio);
            let err = coarse.positions.iter().zip(&reference.positions).map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max);
            *e += err / paths as f64;
        }
    }
    // Least-squares slope of log(error) against log(dt).
    let xs: Vec<f64> = ratios.iter().map(|&r| (r as f64 * dt_fine).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

