//! Fixtures shared by the benchmarks in `benches/`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shoal_core::{builtin_config, Builtin, ScentField, SwarmState, TrialConfig};

/// A builtin configuration with `n_fish` fish and its solved field.
pub fn fixture(which: Builtin, n_fish: usize) -> (TrialConfig, ScentField) {
    let mut cfg = builtin_config(which);
    cfg.n_fish = n_fish;
    let field = cfg.solve_field().expect("builtin fields solve");
    (cfg, field)
}

/// Initial school for `cfg`, drawn from a fixed seed.
pub fn school(cfg: &TrialConfig, seed: u64) -> SwarmState {
    cfg.initial_state(&mut ChaCha8Rng::seed_from_u64(seed))
}
