use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use shoal_core::experiment::{run_trial_observed, ExperimentResult, SweepRow, TrialRecord};
use shoal_core::export::{write_field_csv, write_results_csv, write_trajectory_csv, write_trials_csv, FIELD_HEADER, RESULTS_HEADER, TRAJECTORY_HEADER};
use shoal_core::{run_sweep, AxisRect, SwarmState, TrialConfig, Vec2};
use thiserror::Error;

use crate::config::{parse_config, ConfigFileError, LoadedConfig, Override, SweepSpec};
use crate::svg::{heatmap_svg, probability_svg, trajectory_svg, CellGrid, Heatmap, Scene};

/// Longest heatmap side, in pixels.
pub const HEATMAP_PIXELS: usize = 160;
pub const DEFAULT_INSTANTS: [f64; 4] = [0.0, 30.0, 44.0, 120.0];
pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Parser)]
#[command(name = "shoal", version, about = "Fish-school foraging simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the scent field and write it as CSV plus a heatmap.
    SolveField(SolveFieldArgs),
    /// Run one trial and write its trajectory, outcome and snapshot panels.
    Run(RunArgs),
    /// Run trials over a range of school sizes and tabulate outcomes.
    Sweep(SweepArgs),
    /// Render an SVG from a CSV written by another command.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct Shared {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if absent.
    #[arg(long)]
    pub out: PathBuf,
    /// Dotted-path override applied after the file, e.g. `params.noise=0.002`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub overrides: Vec<Override>,
    /// Replace existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SolveFieldArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Grid step, overriding the configuration.
    #[arg(long)]
    pub spacing: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,
    /// Keep every K-th step in the trajectory CSV.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub traj_stride: u64,
    /// Snapshot times for the panel plot.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_INSTANTS)]
    pub instants: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Trials per school size.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Base seed; per-trial seeds are derived from it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Field, trajectory or results CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Configuration used to draw walls, obstacles and food.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub overrides: Vec<Override>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_INSTANTS)]
    pub instants: Vec<f64>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigFileError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

/// Settings echoed beside every output so a run can be repeated exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: PathBuf,
    pub output_dir: PathBuf,
    pub version: String,
    pub overrides: BTreeMap<String, toml::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSettings>,
    #[serde(default)]
    pub sweep: SweepSpec,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<TrialConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub traj_stride: u64,
    pub instants: Vec<f64>,
}

/// Parse `args` (program name first), run, and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::SolveField(a) => solve_field(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
    }
}

fn load(shared: &Shared) -> Result<LoadedConfig, CliError> {
    Ok(parse_config(&shared.config, &shared.overrides)?)
}

/// Refuse to clobber files unless forced, then create the directory.
fn prepare_out(dir: &Path, names: &[&str], force: bool) -> Result<(), CliError> {
    if !force {
        let taken: Vec<String> = names.iter().map(|n| dir.join(n)).filter(|p| p.exists()).map(|p| p.display().to_string()).collect();
        if !taken.is_empty() {
            return Err(CliError::Usage(format!("refusing to overwrite {} (pass --force)", taken.join(", "))));
        }
    }
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn csv_bytes<F>(write: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| CliError::Runtime(format!("csv: {e}")))?;
    Ok(buf)
}

fn manifest(command: &str, shared: &Shared, config: &TrialConfig, outputs: &[&str]) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        config_path: shared.config.clone(),
        output_dir: shared.out.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        overrides: shared.overrides.iter().map(|o| (o.path.clone(), o.value.clone())).collect(),
        run: None,
        sweep: SweepSpec::default(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        config: Some(config.clone()),
    }
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<(), CliError> {
    let text = toml::to_string(m).map_err(|e| CliError::Runtime(format!("manifest: {e}")))?;
    write_file(dir, MANIFEST, text.as_bytes())
}

fn revalidate(config: &TrialConfig, flag: &str) -> Result<(), CliError> {
    config.validate().map_err(|e| CliError::Usage(format!("{flag}: {e}")))
}

fn scene_of(config: &TrialConfig) -> Scene {
    Scene::from_arena(&config.arena, Some((config.food.center, config.food.radius)))
}

fn solve_field(a: &SolveFieldArgs) -> Result<(), CliError> {
    let mut config = load(&a.shared)?.trial;
    if let Some(h) = a.spacing {
        config.spacing = h;
        revalidate(&config, "--spacing")?;
    }
    let names = ["field.csv", "field.svg", MANIFEST];
    prepare_out(&a.shared.out, &names, a.shared.force)?;
    let field = config.solve_field().map_err(|e| match e {
        shoal_core::scent::ScentError::NotConverged { .. } => CliError::Runtime(e.to_string()),
        other => CliError::Usage(format!("--spacing: {other}")),
    })?;
    let (iterations, residual) = field.solver_stats();
    println!("solved {}x{} grid in {iterations} iterations (residual {residual:.2e})", field.dims().0, field.dims().1);
    write_file(&a.shared.out, "field.csv", &csv_bytes(|b| write_field_csv(&field, b))?)?;
    let map = Heatmap::from_grid(&CellGrid::from_field(&field), HEATMAP_PIXELS);
    write_file(&a.shared.out, "field.svg", heatmap_svg(&map, &scene_of(&config)).as_bytes())?;
    write_manifest(&a.shared.out, &manifest("solve-field", &a.shared, &config, &names[..2]))
}

/// Step index closest to each requested instant; instants past the horizon are dropped.
fn snapshot_steps(config: &TrialConfig, instants: &[f64]) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    for &t in instants {
        if !(t >= 0.0 && t <= config.horizon + 1e-9) {
            eprintln!("warning: instant {t} lies outside [0, {}], skipped", config.horizon);
            continue;
        }
        out.push((t, (t / config.params.dt).round() as usize));
    }
    out
}

fn run(a: &RunArgs) -> Result<(), CliError> {
    let mut config = load(&a.shared)?.trial;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let names = ["trajectory.csv", "trial.csv", "trajectory.svg", MANIFEST];
    prepare_out(&a.shared.out, &names, a.shared.force)?;
    let field = config.solve_field().map_err(|e| CliError::Runtime(e.to_string()))?;
    let stride = a.traj_stride as usize;
    let last = config.step_count();
    let wanted = snapshot_steps(&config, &a.instants);
    let mut frames: Vec<SwarmState> = Vec::new();
    let mut panels: Vec<(f64, Vec<Vec2>)> = wanted.iter().map(|&(t, _)| (t, Vec::new())).collect();
    let (outcome, _) = run_trial_observed(&config, &field, |k, s| {
        if k % stride == 0 || k == last {
            frames.push(s.clone());
        }
        for (slot, &(_, step)) in panels.iter_mut().zip(&wanted) {
            if step == k {
                slot.1 = s.positions.clone();
            }
        }
    })
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    println!(
        "{}: center ({}, {}), {} component(s), {:.2}s",
        outcome.outcome,
        outcome.final_center.x,
        outcome.final_center.y,
        outcome.final_components,
        outcome.wall_clock.as_secs_f64()
    );

    let tally = |s| usize::from(outcome.outcome == s);
    let single = ExperimentResult {
        rows: vec![SweepRow {
            n_fish: config.n_fish,
            trials: 1,
            failure: tally(shoal_core::OutcomeState::Failure),
            pre_success: tally(shoal_core::OutcomeState::PreSuccess),
            success: tally(shoal_core::OutcomeState::Success),
        }],
        trials: vec![TrialRecord { n_fish: config.n_fish, trial_index: 0, seed: config.seed, outcome }],
    };
    write_file(&a.shared.out, "trajectory.csv", &csv_bytes(|b| write_trajectory_csv(&frames, b))?)?;
    write_file(&a.shared.out, "trial.csv", &csv_bytes(|b| write_trials_csv(&single, b))?)?;
    write_file(&a.shared.out, "trajectory.svg", trajectory_svg(&panels, &scene_of(&config)).as_bytes())?;
    let mut m = manifest("run", &a.shared, &config, &names[..3]);
    m.run = Some(RunSettings { traj_stride: a.traj_stride, instants: a.instants.clone() });
    write_manifest(&a.shared.out, &m)
}

fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let loaded = load(&a.shared)?;
    let file = loaded.sweep;
    let need = |flag: &str, cli: Option<usize>, file: Option<usize>| {
        cli.or(file).ok_or_else(|| CliError::Usage(format!("--{flag} not given and not set in [sweep]")))
    };
    let n_min = need("n-min", a.n_min, file.n_min)?;
    let n_max = need("n-max", a.n_max, file.n_max)?;
    let trials = need("trials", a.trials, file.trials)?;
    let seed = a.seed.or(file.seed).ok_or_else(|| CliError::Usage("--seed not given and not set in [sweep]".into()))?;
    let jobs = a.jobs.or(file.jobs).unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if n_min < 2 || n_min > n_max {
        return Err(CliError::Usage(format!("need 2 <= n-min <= n-max, got {n_min}..{n_max}")));
    }
    if trials == 0 || jobs == 0 {
        return Err(CliError::Usage("--trials and --jobs must be positive".into()));
    }
    if seed > i64::MAX as u64 {
        return Err(CliError::Usage(format!("seed {seed} exceeds {}", i64::MAX)));
    }
    let names = ["results.csv", "trials.csv", "probability.svg", MANIFEST];
    prepare_out(&a.shared.out, &names, a.shared.force)?;

    let config = loaded.trial;
    let field = config.solve_field().map_err(|e| CliError::Runtime(e.to_string()))?;
    let sizes: Vec<usize> = (n_min..=n_max).collect();
    let result = run_sweep(&config, &field, &sizes, trials, seed, jobs).map_err(|e| CliError::Runtime(e.to_string()))?;
    for row in &result.rows {
        println!("N={:>3}  failure {:>4}  pre-success {:>4}  success {:>4}  P={}", row.n_fish, row.failure, row.pre_success, row.success, row.success_probability());
    }
    write_file(&a.shared.out, "results.csv", &csv_bytes(|b| write_results_csv(&result, b))?)?;
    write_file(&a.shared.out, "trials.csv", &csv_bytes(|b| write_trials_csv(&result, b))?)?;
    let mut written = vec!["results.csv", "trials.csv"];
    let points: Vec<(usize, f64)> = result.rows.iter().map(|r| (r.n_fish, r.success_probability())).collect();
    match probability_svg(&points) {
        Some(svg) => {
            write_file(&a.shared.out, "probability.svg", svg.as_bytes())?;
            written.push("probability.svg");
        }
        None => eprintln!("warning: empty sweep result, no probability chart written"),
    }
    let mut m = manifest("sweep", &a.shared, &config, &written);
    m.sweep = SweepSpec { n_min: Some(n_min), n_max: Some(n_max), trials: Some(trials), seed: Some(seed), jobs: Some(jobs) };
    write_manifest(&a.shared.out, &m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Field,
    Trajectory,
    Results,
}

pub fn detect_kind(header: &csv::StringRecord) -> Option<CsvKind> {
    let cols: Vec<&str> = header.iter().collect();
    if cols == FIELD_HEADER {
        Some(CsvKind::Field)
    } else if cols == TRAJECTORY_HEADER {
        Some(CsvKind::Trajectory)
    } else if cols == RESULTS_HEADER {
        Some(CsvKind::Results)
    } else {
        None
    }
}

#[derive(Debug, Deserialize)]
struct FieldRow {
    cell_i: usize,
    cell_j: usize,
    x_center: f64,
    y_center: f64,
    fluid_flag: u8,
    #[serde(rename = "U")]
    u: f64,
}

#[derive(Debug, Deserialize)]
struct TrajectoryRow {
    t: f64,
    x: f64,
    y: f64,
}

#[derive(Debug, Deserialize)]
struct ResultRow {
    #[serde(rename = "N")]
    n: usize,
    success_probability: f64,
}

fn read_rows<T: serde::de::DeserializeOwned>(reader: &mut csv::Reader<fs::File>, path: &Path) -> Result<Vec<T>, CliError> {
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn grid_from_rows(rows: &[(usize, usize, f64, f64, bool, f64)]) -> Option<CellGrid> {
    let nx = rows.iter().map(|r| r.0).max()? + 1;
    let ny = rows.iter().map(|r| r.1).max()? + 1;
    if rows.len() != nx * ny {
        return None;
    }
    let mut values = vec![None; nx * ny];
    let mut centers = vec![Vec2::ZERO; nx * ny];
    for &(i, j, x, y, fluid, u) in rows {
        values[j * nx + i] = fluid.then_some(u);
        centers[j * nx + i] = Vec2::new(x, y);
    }
    let spacing = if nx > 1 { centers[1].x - centers[0].x } else if ny > 1 { centers[nx].y - centers[0].y } else { return None };
    if spacing.is_nan() || spacing <= 0.0 {
        return None;
    }
    Some(CellGrid { origin: centers[0] - Vec2::new(spacing, spacing) * 0.5, spacing, nx, ny, values })
}

fn plot(a: &PlotArgs) -> Result<(), CliError> {
    let config = match &a.config {
        Some(path) => Some(parse_config(path, &a.overrides)?.trial),
        None => None,
    };
    let mut reader = csv::Reader::from_path(&a.input).map_err(|e| CliError::Usage(format!("{}: {e}", a.input.display())))?;
    let header = reader.headers().map_err(|e| CliError::Usage(format!("{}: {e}", a.input.display())))?.clone();
    let kind = detect_kind(&header).ok_or_else(|| CliError::Usage(format!("{}: unrecognised CSV header", a.input.display())))?;
    let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let name = format!("{stem}.svg");
    prepare_out(&a.out, &[&name], a.force)?;

    let svg = match kind {
        CsvKind::Field => {
            let rows: Vec<FieldRow> = read_rows(&mut reader, &a.input)?;
            let flat: Vec<_> = rows.iter().map(|r| (r.cell_i, r.cell_j, r.x_center, r.y_center, r.fluid_flag != 0, r.u)).collect();
            let grid = grid_from_rows(&flat).ok_or_else(|| CliError::Usage(format!("{}: cells do not form a full grid", a.input.display())))?;
            let scene = config.as_ref().map(scene_of).unwrap_or_else(|| Scene::bare(grid.extent()));
            Some(heatmap_svg(&Heatmap::from_grid(&grid, HEATMAP_PIXELS), &scene))
        }
        CsvKind::Trajectory => {
            let rows: Vec<TrajectoryRow> = read_rows(&mut reader, &a.input)?;
            let mut frames: Vec<(f64, Vec<Vec2>)> = Vec::new();
            for r in rows {
                match frames.last_mut() {
                    Some((t, ps)) if *t == r.t => ps.push(Vec2::new(r.x, r.y)),
                    _ => frames.push((r.t, vec![Vec2::new(r.x, r.y)])),
                }
            }
            if frames.is_empty() {
                eprintln!("warning: {} has no trajectory rows, nothing plotted", a.input.display());
                None
            } else {
                let panels: Vec<(f64, Vec<Vec2>)> = a
                    .instants
                    .iter()
                    .map(|&want| {
                        let nearest = frames.iter().min_by(|x, y| (x.0 - want).abs().total_cmp(&(y.0 - want).abs())).expect("frames is non-empty");
                        nearest.clone()
                    })
                    .collect();
                let scene = match &config {
                    Some(c) => scene_of(c),
                    None => Scene::bare(extent_of(frames.iter().flat_map(|f| f.1.iter().copied()))),
                };
                Some(trajectory_svg(&panels, &scene))
            }
        }
        CsvKind::Results => {
            let rows: Vec<ResultRow> = read_rows(&mut reader, &a.input)?;
            let points: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.success_probability)).collect();
            let svg = probability_svg(&points);
            if svg.is_none() {
                eprintln!("warning: {} has no result rows, no probability chart written", a.input.display());
            }
            svg
        }
    };
    match svg {
        Some(svg) => write_file(&a.out, &name, svg.as_bytes()),
        None => Ok(()),
    }
}

fn extent_of(points: impl Iterator<Item = Vec2>) -> AxisRect {
    let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in points {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let pad = Vec2::new(0.1, 0.1);
    AxisRect { lo: lo - pad, hi: hi + pad }
}
