//! Stochastic simulation of fish schools foraging in a walled tank.
//!
//! * [`geometry`]: the fluid region, ray casting and velocity reflection.
//! * [`scent`]: the screened-Poisson scent potential and its gradient.
//! * [`dynamics`]: pairwise, wall and scent forces and the Euler–Maruyama step.
//! * [`metrics`]: school center, connected components, outcome classifiers.
//! * [`experiment`]: seeded trials, school-size sweeps and preset scenarios.
//! * [`export`]: CSV output.

pub mod dynamics;
pub mod experiment;
pub mod export;
pub mod geometry;
pub mod metrics;
pub mod scent;

pub use dynamics::{ModelParams, SwarmState};
pub use experiment::{builtin_config, run_sweep, run_trial, Builtin, ExperimentResult, TrialConfig, TrialOutcome};
pub use geometry::{Arena, AxisRect, BoundaryHit, Vec2};
pub use metrics::{Classifier, OutcomeState};
pub use scent::{FoodSpec, ScentField};
