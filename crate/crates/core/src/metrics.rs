//! School-level diagnostics and end-of-trial outcome classification.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::SwarmState;
use crate::geometry::Vec2;

/// Default proximity threshold for the connected-components diagnostic.
pub const DEFAULT_COMPONENT_DELTA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeState {
    Failure,
    PreSuccess,
    Success,
}

impl OutcomeState {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeState::Failure => "failure",
            OutcomeState::PreSuccess => "pre-success",
            OutcomeState::Success => "success",
        }
    }
}

impl fmt::Display for OutcomeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Success predicate evaluated on the final swarm state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Classifier {
    /// Success iff the school center is closer than `success_radius` to the food.
    CenterDistance { food_center: Vec2, success_radius: f64 },
    /// Success iff every fish has `x > right_threshold`.
    MinXThreshold { right_threshold: f64 },
    /// Failure iff every fish has `x < left_threshold`; success iff every fish
    /// has `x > right_threshold`; pre-success otherwise.
    BandThreeState { left_threshold: f64, right_threshold: f64 },
}

impl Classifier {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Classifier::CenterDistance { success_radius, .. } if success_radius.is_nan() || success_radius <= 0.0 => {
                Err(format!("success_radius must be positive, got {success_radius}"))
            }
            Classifier::BandThreeState { left_threshold, right_threshold } if left_threshold > right_threshold => Err(format!(
                "left_threshold {left_threshold} exceeds right_threshold {right_threshold}"
            )),
            _ => Ok(()),
        }
    }
}

pub fn school_center(state: &SwarmState) -> Vec2 {
    centroid(&state.positions)
}

pub fn centroid(points: &[Vec2]) -> Vec2 {
    let sum = points.iter().fold(Vec2::ZERO, |acc, &p| acc + p);
    sum / points.len() as f64
}

/// Number of clusters when fish closer than `delta` are linked.
pub fn connected_components(state: &SwarmState, delta: f64) -> usize {
    count_components(&state.positions, delta)
}

pub fn count_components(points: &[Vec2], delta: f64) -> usize {
    let mut sets = DisjointSet::new(points.len());
    let delta_sq = delta * delta;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[i] - points[j]).norm_sq() < delta_sq {
                sets.union(i, j);
            }
        }
    }
    sets.count()
}

pub fn classify(state: &SwarmState, classifier: &Classifier) -> OutcomeState {
    let xs = state.positions.iter().map(|p| p.x);
    let min_x = xs.clone().fold(f64::INFINITY, f64::min);
    let max_x = xs.fold(f64::NEG_INFINITY, f64::max);
    match *classifier {
        Classifier::CenterDistance { food_center, success_radius } => {
            if (school_center(state) - food_center).norm() < success_radius {
                OutcomeState::Success
            } else {
                OutcomeState::Failure
            }
        }
        Classifier::MinXThreshold { right_threshold } => {
            if min_x > right_threshold {
                OutcomeState::Success
            } else {
                OutcomeState::Failure
            }
        }
        Classifier::BandThreeState { left_threshold, right_threshold } => {
            if max_x < left_threshold {
                OutcomeState::Failure
            } else if min_x > right_threshold {
                OutcomeState::Success
            } else {
                OutcomeState::PreSuccess
            }
        }
    }
}

/// Union by size with path halving.
#[derive(Debug, Clone)]
struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
    roots: usize,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n], roots: n }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        self.roots -= 1;
    }

    fn count(&self) -> usize {
        self.roots
    }
}
