//! Particle forces and the Euler–Maruyama step.
//!
//! Each fish feels four accelerations: pairwise attraction/repulsion,
//! distance-weighted velocity matching, a wall-avoidance pull toward the
//! reflected velocity, and the scent gradient. Positions receive additive
//! Brownian noise. All forces are taken from the pre-step state.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Arena, Vec2};
use crate::scent::ScentField;

/// Lower bound on every pairwise and wall distance.
pub const DIST_FLOOR: f64 = 1e-6;
/// Inward offset applied when a step leaves the fluid region.
pub const CLAMP_EPS: f64 = 1e-4;
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Attraction/repulsion strength.
    pub attraction: f64,
    /// Velocity-matching strength.
    pub alignment: f64,
    /// Wall-avoidance strength.
    pub avoidance: f64,
    /// Attraction exponent of the pair kernel.
    #[serde(rename = "p")]
    pub pair_p: f64,
    /// Repulsion exponent of the pair kernel.
    #[serde(rename = "q")]
    pub pair_q: f64,
    #[serde(rename = "P")]
    pub wall_p: f64,
    #[serde(rename = "Q")]
    pub wall_q: f64,
    /// Separation at which attraction and repulsion cancel.
    #[serde(rename = "r")]
    pub critical_distance: f64,
    /// Distance scale of the wall reaction.
    #[serde(rename = "R")]
    pub avoidance_distance: f64,
    /// Gain on the scent gradient.
    pub sensitivity: f64,
    /// Brownian intensity per axis.
    pub noise: f64,
    pub vmax: f64,
    pub dt: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            attraction: 1.0,
            alignment: 1.0,
            avoidance: 1.0,
            pair_p: 3.0,
            pair_q: 5.0,
            wall_p: 3.0,
            wall_q: 5.0,
            critical_distance: 0.1,
            avoidance_distance: 0.2,
            sensitivity: 0.0,
            noise: 0.001,
            vmax: 0.8,
            dt: DEFAULT_DT,
        }
    }
}

impl ModelParams {
    /// Returns the name of the first offending field with a reason.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let fields = [
            ("attraction", self.attraction),
            ("alignment", self.alignment),
            ("avoidance", self.avoidance),
            ("p", self.pair_p),
            ("q", self.pair_q),
            ("P", self.wall_p),
            ("Q", self.wall_q),
            ("r", self.critical_distance),
            ("R", self.avoidance_distance),
            ("sensitivity", self.sensitivity),
            ("noise", self.noise),
            ("vmax", self.vmax),
            ("dt", self.dt),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err((name, format!("must be finite, got {v}")));
            }
            if v < 0.0 {
                return Err((name, format!("must be non-negative, got {v}")));
            }
        }
        for (name, v) in [("r", self.critical_distance), ("R", self.avoidance_distance), ("vmax", self.vmax), ("dt", self.dt)] {
            if v <= 0.0 {
                return Err((name, format!("must be positive, got {v}")));
            }
        }
        if !(1.0 < self.pair_p && self.pair_p < self.pair_q) {
            return Err(("p", format!("need 1 < p < q, got p = {}, q = {}", self.pair_p, self.pair_q)));
        }
        if !(1.0 < self.wall_p && self.wall_p < self.wall_q) {
            return Err(("P", format!("need 1 < P < Q, got P = {}, Q = {}", self.wall_p, self.wall_q)));
        }
        Ok(())
    }

    /// `(r/d)^p` and `(r/d)^q` for a pair at distance `d`.
    #[inline]
    fn pair_weights(&self, d: f64) -> (f64, f64) {
        let s = self.critical_distance / d.max(DIST_FLOOR);
        (s.powf(self.pair_p), s.powf(self.pair_q))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub time: f64,
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
}

impl SwarmState {
    /// Swarm at rest at the given positions.
    pub fn at_rest(positions: Vec<Vec2>) -> Self {
        let n = positions.len();
        Self { time: 0.0, positions, velocities: vec![Vec2::ZERO; n] }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn mean_velocity(&self) -> Vec2 {
        let sum = self.velocities.iter().fold(Vec2::ZERO, |acc, &v| acc + v);
        sum / self.len() as f64
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite force on particle {particle} at t = {time}: {force}")]
    NonFiniteForce { particle: usize, time: f64, force: Vec2 },
    #[error("expected {expected} noise increments, got {got}")]
    NoiseLength { expected: usize, got: usize },
    #[error("positions and velocities differ in length ({positions} vs {velocities})")]
    Mismatched { positions: usize, velocities: usize },
}

/// Attraction beyond the critical distance, repulsion inside it.
pub fn interaction_force(i: usize, state: &SwarmState, params: &ModelParams) -> Vec2 {
    let xi = state.positions[i];
    let mut acc = Vec2::ZERO;
    for (j, &xj) in state.positions.iter().enumerate() {
        if j == i {
            continue;
        }
        let diff = xi - xj;
        let (wp, wq) = params.pair_weights(diff.norm());
        acc += diff * (wp - wq);
    }
    acc * -params.attraction
}

/// Velocity matching, stronger at short range.
pub fn alignment_force(i: usize, state: &SwarmState, params: &ModelParams) -> Vec2 {
    let (xi, vi) = (state.positions[i], state.velocities[i]);
    let mut acc = Vec2::ZERO;
    for (j, (&xj, &vj)) in state.positions.iter().zip(&state.velocities).enumerate() {
        if j == i {
            continue;
        }
        let (wp, wq) = params.pair_weights((xi - xj).norm());
        acc += (vi - vj) * (wp + wq);
    }
    acc * -params.alignment
}

/// Pull toward the velocity reflected off the wall ahead. Zero when the
/// heading ray meets no wall, which includes a fish at rest.
pub fn obstacle_force(i: usize, state: &SwarmState, arena: &Arena, params: &ModelParams) -> Vec2 {
    let (x, v) = (state.positions[i], state.velocities[i]);
    match arena.reflect_unchecked(x, v) {
        (_, None) => Vec2::ZERO,
        (rf, Some(hit)) => {
            let s = params.avoidance_distance / (x - hit.point).norm().max(DIST_FLOOR);
            let w = s.powf(params.wall_p) + s.powf(params.wall_q);
            (v - rf) * (-params.avoidance * w)
        }
    }
}

/// Scent attraction `k ∇U(x_i)`.
pub fn food_force(i: usize, state: &SwarmState, field: &ScentField, params: &ModelParams) -> Vec2 {
    if params.sensitivity == 0.0 {
        return Vec2::ZERO;
    }
    field.sample_gradient_unchecked(state.positions[i]) * params.sensitivity
}

/// Rescale `v` onto the speed limit if it exceeds it.
pub fn cap_speed(v: Vec2, vmax: f64) -> Vec2 {
    let speed = v.norm();
    if speed <= vmax {
        v
    } else {
        v / speed * vmax
    }
}

/// Sum of all four forces on particle `i`, evaluated in one pass over the
/// neighbours.
pub fn total_force(i: usize, state: &SwarmState, arena: &Arena, field: &ScentField, params: &ModelParams) -> Vec2 {
    let (xi, vi) = (state.positions[i], state.velocities[i]);
    let mut pos_acc = Vec2::ZERO;
    let mut vel_acc = Vec2::ZERO;
    for (j, (&xj, &vj)) in state.positions.iter().zip(&state.velocities).enumerate() {
        if j == i {
            continue;
        }
        let diff = xi - xj;
        let (wp, wq) = params.pair_weights(diff.norm());
        pos_acc += diff * (wp - wq);
        vel_acc += (vi - vj) * (wp + wq);
    }
    pos_acc * -params.attraction
        + vel_acc * -params.alignment
        + obstacle_force(i, state, arena, params)
        + food_force(i, state, field, params)
}

/// One Euler–Maruyama step driven by caller-supplied position increments
/// `noise[i] = σ ΔW_i` (already scaled).
pub fn step_with_noise(
    state: &SwarmState,
    arena: &Arena,
    field: &ScentField,
    params: &ModelParams,
    noise: &[Vec2],
) -> Result<SwarmState, DynamicsError> {
    let n = state.len();
    if state.velocities.len() != n {
        return Err(DynamicsError::Mismatched { positions: n, velocities: state.velocities.len() });
    }
    if noise.len() != n {
        return Err(DynamicsError::NoiseLength { expected: n, got: noise.len() });
    }
    let forces = (0..n)
        .map(|i| {
            let f = total_force(i, state, arena, field, params);
            if f.is_finite() {
                Ok(f)
            } else {
                Err(DynamicsError::NonFiniteForce { particle: i, time: state.time, force: f })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    let dt = params.dt;
    let mut positions = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = cap_speed(state.velocities[i] + forces[i] * dt, params.vmax);
        let (x, clamped) = arena.clamp_inside_axes(state.positions[i] + state.velocities[i] * dt + noise[i], CLAMP_EPS);
        if clamped.x {
            v.x = 0.0;
        }
        if clamped.y {
            v.y = 0.0;
        }
        positions.push(x);
        velocities.push(v);
    }
    Ok(SwarmState { time: state.time + dt, positions, velocities })
}

/// Draw `σ ΔW_i` for every particle, in particle order.
pub fn draw_noise<R: Rng + ?Sized>(rng: &mut R, n: usize, params: &ModelParams, out: &mut Vec<Vec2>) {
    out.clear();
    let scale = params.noise * params.dt.sqrt();
    for _ in 0..n {
        let gx: f64 = rng.sample(StandardNormal);
        let gy: f64 = rng.sample(StandardNormal);
        out.push(Vec2::new(gx, gy) * scale);
    }
}

/// One Euler–Maruyama step with fresh Gaussian noise.
pub fn step<R: Rng + ?Sized>(
    state: &SwarmState,
    arena: &Arena,
    field: &ScentField,
    params: &ModelParams,
    rng: &mut R,
) -> Result<SwarmState, DynamicsError> {
    let mut noise = Vec::with_capacity(state.len());
    draw_noise(rng, state.len(), params, &mut noise);
    step_with_noise(state, arena, field, params, &noise)
}
