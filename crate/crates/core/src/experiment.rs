//! Seeded Monte Carlo trials and school-size sweeps.
//!
//! Every trial owns its RNG, seeded from `(base_seed, N, trial_index)`
//! through [`trial_seed`], so a sweep gives the same counts regardless of
//! thread count or scheduling order.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{draw_noise, step_with_noise, DynamicsError, ModelParams, SwarmState};
use crate::geometry::{Arena, AxisRect, Vec2};
use crate::metrics::{classify, connected_components, school_center, Classifier, OutcomeState, DEFAULT_COMPONENT_DELTA};
use crate::scent::{solve_field, FoodSpec, ScentError, ScentField, DEFAULT_SPACING};

/// Everything needed to run one trial reproducibly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub arena: Arena,
    pub food: FoodSpec,
    pub params: ModelParams,
    pub n_fish: usize,
    /// Allotted time at which the outcome is judged.
    pub horizon: f64,
    pub init_region: AxisRect,
    pub classifier: Classifier,
    pub seed: u64,
    /// Scent grid step.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    /// Proximity threshold for the school-cohesion diagnostic.
    #[serde(default = "default_delta")]
    pub component_delta: f64,
}

fn default_spacing() -> f64 {
    DEFAULT_SPACING
}

fn default_delta() -> f64 {
    DEFAULT_COMPONENT_DELTA
}

/// Validation failure naming the offending field by its dotted path.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.arena.bounds.validate().map_err(|e| ConfigError::new("arena.bounds", e.to_string()))?;
        for (i, ob) in self.arena.obstacles.iter().enumerate() {
            ob.validate().map_err(|e| ConfigError::new(format!("arena.obstacles[{i}]"), e.to_string()))?;
        }
        self.arena.validate().map_err(|e| ConfigError::new("arena.obstacles", e.to_string()))?;
        self.food.validate(&self.arena).map_err(|e| ConfigError::new("food", e.to_string()))?;
        self.params.validate().map_err(|(name, msg)| ConfigError::new(format!("params.{name}"), msg))?;
        if self.n_fish < 2 {
            return Err(ConfigError::new("n_fish", format!("need at least 2 fish, got {}", self.n_fish)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ConfigError::new("horizon", format!("must be positive, got {}", self.horizon)));
        }
        let steps = self.horizon / self.params.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) || steps.round() < 1.0 {
            return Err(ConfigError::new(
                "horizon",
                format!("horizon {} is not a whole number of steps of dt = {}", self.horizon, self.params.dt),
            ));
        }
        self.init_region.validate().map_err(|e| ConfigError::new("init_region", e.to_string()))?;
        let r = &self.init_region;
        let in_bounds = self.arena.bounds.contains_rect(r);
        let hits_obstacle = self
            .arena
            .obstacles
            .iter()
            .any(|ob| r.lo.x < ob.hi.x && ob.lo.x < r.hi.x && r.lo.y < ob.hi.y && ob.lo.y < r.hi.y);
        if !in_bounds || hits_obstacle {
            return Err(ConfigError::new("init_region", "must lie inside the fluid region"));
        }
        self.classifier.validate().map_err(|m| ConfigError::new("classifier", m))?;
        if self.spacing.is_nan() || self.spacing <= 0.0 {
            return Err(ConfigError::new("spacing", format!("must be positive, got {}", self.spacing)));
        }
        if self.component_delta.is_nan() || self.component_delta <= 0.0 {
            return Err(ConfigError::new("component_delta", format!("must be positive, got {}", self.component_delta)));
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        (self.horizon / self.params.dt).round() as usize
    }

    pub fn solve_field(&self) -> Result<ScentField, ScentError> {
        solve_field(&self.arena, &self.food, self.spacing)
    }

    /// Uniform draws in the initial rectangle, at rest.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> SwarmState {
        let r = &self.init_region;
        let positions = (0..self.n_fish)
            .map(|_| {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                Vec2::new(r.lo.x + u * r.width(), r.lo.y + v * r.height())
            })
            .collect();
        SwarmState::at_rest(positions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub outcome: OutcomeState,
    pub final_center: Vec2,
    pub final_components: usize,
    pub wall_clock: Duration,
}

impl TrialOutcome {
    /// Equality ignoring wall-clock time.
    pub fn same_result(&self, other: &TrialOutcome) -> bool {
        self.outcome == other.outcome
            && self.final_center.x.to_bits() == other.final_center.x.to_bits()
            && self.final_center.y.to_bits() == other.final_center.y.to_bits()
            && self.final_components == other.final_components
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("trial with seed {seed} failed at step {step}: {source}")]
pub struct TrialError {
    pub seed: u64,
    pub step: usize,
    #[source]
    pub source: DynamicsError,
}

/// Run one trial, calling `observe(step_index, state)` on the initial state
/// and after every step.
pub fn run_trial_observed<F>(config: &TrialConfig, field: &ScentField, mut observe: F) -> Result<(TrialOutcome, SwarmState), TrialError>
where
    F: FnMut(usize, &SwarmState),
{
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = config.initial_state(&mut rng);
    observe(0, &state);
    let mut noise = Vec::with_capacity(config.n_fish);
    for k in 0..config.step_count() {
        draw_noise(&mut rng, config.n_fish, &config.params, &mut noise);
        state = step_with_noise(&state, &config.arena, field, &config.params, &noise)
            .map_err(|source| TrialError { seed: config.seed, step: k, source })?;
        observe(k + 1, &state);
    }
    let outcome = TrialOutcome {
        outcome: classify(&state, &config.classifier),
        final_center: school_center(&state),
        final_components: connected_components(&state, config.component_delta),
        wall_clock: started.elapsed(),
    };
    Ok((outcome, state))
}

pub fn run_trial(config: &TrialConfig, field: &ScentField) -> Result<TrialOutcome, TrialError> {
    run_trial_observed(config, field, |_, _| {}).map(|(o, _)| o)
}

/// Run a trial keeping every `stride`-th state (and always the last one).
pub fn run_trial_recorded(config: &TrialConfig, field: &ScentField, stride: usize) -> Result<(TrialOutcome, Vec<SwarmState>), TrialError> {
    let stride = stride.max(1);
    let last = config.step_count();
    let mut frames = Vec::new();
    let (outcome, _) = run_trial_observed(config, field, |k, s| {
        if k % stride == 0 || k == last {
            frames.push(s.clone());
        }
    })?;
    Ok((outcome, frames))
}

/// SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial_index` at school size `n`:
/// `splitmix64(splitmix64(splitmix64(base) ^ n) ^ trial_index)`.
pub fn trial_seed(base_seed: u64, n: usize, trial_index: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ n as u64) ^ trial_index as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub n_fish: usize,
    pub trial_index: usize,
    pub seed: u64,
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_fish: usize,
    pub trials: usize,
    pub failure: usize,
    pub pre_success: usize,
    pub success: usize,
}

impl SweepRow {
    pub fn success_probability(&self) -> f64 {
        self.success as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<SweepRow>,
    pub trials: Vec<TrialRecord>,
}

impl ExperimentResult {
    pub fn row(&self, n_fish: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.n_fish == n_fish)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("sweep needs at least one school size")]
    NoSizes,
    #[error("sweep needs at least one trial per size")]
    NoTrials,
    #[error("invalid configuration for N = {n_fish}: {source}")]
    Config {
        n_fish: usize,
        #[source]
        source: ConfigError,
    },
    #[error("trial {trial_index} at N = {n_fish} failed: {source}")]
    Trial {
        n_fish: usize,
        trial_index: usize,
        #[source]
        source: TrialError,
    },
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

/// Run `trials` trials for each school size in `n_values` on `parallelism`
/// worker threads. `field` must be the solved scent field of `base`.
pub fn run_sweep(
    base: &TrialConfig,
    field: &ScentField,
    n_values: &[usize],
    trials: usize,
    base_seed: u64,
    parallelism: usize,
) -> Result<ExperimentResult, SweepError> {
    if n_values.is_empty() {
        return Err(SweepError::NoSizes);
    }
    if trials == 0 {
        return Err(SweepError::NoTrials);
    }
    let mut jobs = Vec::with_capacity(n_values.len() * trials);
    for &n_fish in n_values {
        let mut cfg = base.clone();
        cfg.n_fish = n_fish;
        cfg.validate().map_err(|source| SweepError::Config { n_fish, source })?;
        for trial_index in 0..trials {
            let mut cfg = cfg.clone();
            cfg.seed = trial_seed(base_seed, n_fish, trial_index);
            jobs.push((trial_index, cfg));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let records: Vec<TrialRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|(trial_index, cfg)| {
                run_trial(cfg, field)
                    .map(|outcome| TrialRecord { n_fish: cfg.n_fish, trial_index: *trial_index, seed: cfg.seed, outcome })
                    .map_err(|source| SweepError::Trial { n_fish: cfg.n_fish, trial_index: *trial_index, source })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let rows = n_values
        .iter()
        .map(|&n_fish| {
            let mut row = SweepRow { n_fish, trials, failure: 0, pre_success: 0, success: 0 };
            for rec in records.iter().filter(|r| r.n_fish == n_fish) {
                match rec.outcome.outcome {
                    OutcomeState::Failure => row.failure += 1,
                    OutcomeState::PreSuccess => row.pre_success += 1,
                    OutcomeState::Success => row.success += 1,
                }
            }
            row
        })
        .collect();
    Ok(ExperimentResult { rows, trials: records })
}

/// The four preset scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// Open 7 x 4 tank, food near the bottom-left.
    Config1Left,
    /// Open 7 x 4 tank, food near the bottom-right.
    Config1Right,
    /// 4 x 4 tank with a hanging wall; food behind it.
    Config2,
    /// 7 x 4 tank with a hanging wall and a standing wall; food behind both.
    Config3,
}

impl Builtin {
    pub const ALL: [Builtin; 4] = [Builtin::Config1Left, Builtin::Config1Right, Builtin::Config2, Builtin::Config3];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Config1Left => "config1-left",
            Builtin::Config1Right => "config1-right",
            Builtin::Config2 => "config2",
            Builtin::Config3 => "config3",
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown builtin configuration {0:?} (expected one of config1-left, config1-right, config2, config3)")]
pub struct UnknownBuiltin(pub String);

impl FromStr for Builtin {
    type Err = UnknownBuiltin;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Builtin::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| UnknownBuiltin(s.to_string()))
    }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> AxisRect {
    AxisRect { lo: Vec2::new(x0, y0), hi: Vec2::new(x1, y1) }
}

/// Preset trial configuration. `n_fish` defaults to 10 and `seed` to 0.
pub fn builtin_config(which: Builtin) -> TrialConfig {
    let hanging_wall = rect(2.0, 2.5, 2.5, 4.0);
    let standing_wall = rect(4.5, 0.0, 5.0, 1.5);
    let (arena, food_center, sensitivity, horizon, init_region, classifier) = match which {
        Builtin::Config1Left | Builtin::Config1Right => {
            let c = if which == Builtin::Config1Left { Vec2::new(1.5, 0.1) } else { Vec2::new(5.5, 0.1) };
            (
                Arena { bounds: rect(0.0, 0.0, 7.0, 4.0), obstacles: vec![] },
                c,
                0.5,
                120.0,
                rect(0.0, 3.5, 2.0, 4.0),
                Classifier::CenterDistance { food_center: c, success_radius: 1.0 },
            )
        }
        Builtin::Config2 => (
            Arena { bounds: rect(0.0, 0.0, 4.0, 4.0), obstacles: vec![hanging_wall] },
            Vec2::new(3.5, 0.1),
            2.0,
            60.0,
            rect(1.0, 3.5, 2.0, 4.0),
            Classifier::MinXThreshold { right_threshold: 2.5 },
        ),
        Builtin::Config3 => (
            Arena { bounds: rect(0.0, 0.0, 7.0, 4.0), obstacles: vec![hanging_wall, standing_wall] },
            Vec2::new(6.0, 0.1),
            2.0,
            200.0,
            rect(1.0, 3.5, 2.0, 4.0),
            Classifier::BandThreeState { left_threshold: 2.0, right_threshold: 5.0 },
        ),
    };
    TrialConfig {
        arena,
        food: FoodSpec::standard(food_center),
        params: ModelParams { sensitivity, ..ModelParams::default() },
        n_fish: 10,
        horizon,
        init_region,
        classifier,
        seed: 0,
        spacing: DEFAULT_SPACING,
        component_delta: DEFAULT_COMPONENT_DELTA,
    }
}
