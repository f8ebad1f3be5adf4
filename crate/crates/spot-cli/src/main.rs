//! Pipeline driver: build reference databases, match query runs, evaluate,
//! sweep sequence lengths, and generate synthetic datasets.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spot::config::{ConfigError, PipelineConfig};
use spot::io::{self, FrameObservation, GroundTruthTrack, SummaryEntry};
use spot::pipeline::{self, PipelineError};
use spot::synthworld::{
    frame_seed, generate_traversal, render_frame, DetourSpec, Direction, SampledWorld,
    TraversalSpec, WorldSpec,
};

#[derive(Parser)]
#[command(name = "spot", version, about = "Structure-based place recognition pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a reference descriptor database from a trajectory and points.
    BuildRef(BuildRefArgs),
    /// Match a query run against a reference database.
    Match(MatchArgs),
    /// Evaluate a match run: PR curves, MR100 and AUC per radius.
    Eval(EvalArgs),
    /// Generate a synthetic corridor dataset in the on-disk formats.
    Synth(SynthArgs),
    /// Re-run matching and evaluation for several sequence lengths.
    SweepW(SweepArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set w=25`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, CliError> {
        let overrides = self
            .set
            .iter()
            .map(|s| {
                s.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{s}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PipelineConfig::from_file(&self.config, &overrides)?)
    }
}

#[derive(Args)]
struct BuildRefArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    points: Option<PathBuf>,
    /// Ground-truth positions (row index = frame_id).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Output database path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Output directory for match.csv, queries.csv and timing.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    db: Option<PathBuf>,
    /// Directory holding match.csv and queries.csv from `spot match`.
    #[arg(long)]
    match_dir: PathBuf,
    /// Output directory for the per-radius PR CSVs and summary.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the reference and query datasets.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Corridor length in meters.
    #[arg(long, default_value_t = 2000.0)]
    length: f64,
    #[arg(long, default_value_t = 4.0)]
    half_width: f64,
    /// Objects per 100 m.
    #[arg(long, default_value_t = 20.0)]
    density: f64,
    #[arg(long, default_value_t = 1.0)]
    size_min: f64,
    #[arg(long, default_value_t = 4.0)]
    size_max: f64,
    #[arg(long, default_value_t = 2.0)]
    height_min: f64,
    #[arg(long, default_value_t = 6.0)]
    height_max: f64,
    /// Surface sampling pitch.
    #[arg(long, default_value_t = 0.5)]
    pitch: f64,
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    #[arg(long, default_value_t = 90.0)]
    fov: f64,
    #[arg(long, default_value_t = 1.7)]
    camera_height: f64,
    /// Depth threshold used when rendering frames.
    #[arg(long, default_value_t = 35.35)]
    r_d: f64,
    /// Query travel direction.
    #[arg(long, default_value = "reverse")]
    query_direction: String,
    /// Query lane offset (meters east).
    #[arg(long, default_value_t = 0.0)]
    query_offset: f64,
    #[arg(long, default_value_t = 0.0)]
    query_dropout: f64,
    /// Std of the per-frame random-walk pose noise on the query run.
    #[arg(long, default_value_t = 0.0)]
    query_noise: f64,
    /// Detour start (meters along the query route).
    #[arg(long)]
    detour_start: Option<f64>,
    /// Detour perpendicular excursion (meters).
    #[arg(long, default_value_t = 75.0)]
    detour_out: f64,
    /// Detour parallel leg (meters).
    #[arg(long, default_value_t = 150.0)]
    detour_along: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Comma-separated odd sequence lengths, e.g. `5,25,75`.
    #[arg(long, value_delimiter = ',')]
    w_list: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Io(io::Error),
    Pipeline(PipelineError),
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Io(_)) => 3,
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Pipeline(PipelineError::Io(_)) => 3,
            CliError::Pipeline(PipelineError::GroundTruth(_)) => 3,
            CliError::Pipeline(PipelineError::EmptyDatabase) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Pipeline(e) => write!(f, "pipeline error: {e}"),
            CliError::Usage(e) => write!(f, "usage error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(io::Error::Io(e))
    }
}

/// Removes registered output files unless disarmed, so failed commands do
/// not leave partial artifacts behind.
struct OutputGuard {
    paths: Vec<PathBuf>,
    armed: bool,
}

impl OutputGuard {
    fn new() -> Self {
        Self { paths: Vec::new(), armed: true }
    }

    fn register(&mut self, path: &Path) -> PathBuf {
        self.paths.push(path.to_path_buf());
        path.to_path_buf()
    }

    fn disarm(&mut self) {
        self.armed = false;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.armed {
            for p in &self.paths {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildRef(args) => build_ref(args),
        Command::Match(args) => run_match(args),
        Command::Eval(args) => run_eval(args),
        Command::Synth(args) => run_synth(args),
        Command::SweepW(args) => run_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spot: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn resolve(flag: &Option<PathBuf>, cfg: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    flag.clone()
        .or_else(|| cfg.clone())
        .ok_or_else(|| CliError::Usage(format!("missing {what}: pass --{what} or set it in the config")))
}

fn load_frames(
    trajectory: &Path,
    points: &Path,
    stationary_eps: f64,
) -> Result<Vec<FrameObservation>, CliError> {
    let poses = io::parse_trajectory(trajectory, stationary_eps)?;
    let mut points_map = io::parse_points(points)?;
    Ok(poses
        .into_iter()
        .map(|pose| {
            let pts = points_map.remove(&pose.frame_id).unwrap_or_default();
            FrameObservation::new(pose, pts)
        })
        .collect())
}

fn load_gt(path: &Option<PathBuf>) -> Result<Option<GroundTruthTrack>, CliError> {
    Ok(match path {
        Some(p) => Some(io::parse_ground_truth(p)?),
        None => None,
    })
}

fn build_ref(args: BuildRefArgs) -> Result<(), CliError> {
    let cfg = args.config.load()?;
    if args.config.print_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    let trajectory = resolve(&args.trajectory, &cfg.paths.trajectory, "trajectory")?;
    let points = resolve(&args.points, &cfg.paths.points, "points")?;
    let out = resolve(&args.out, &cfg.paths.db, "out")?;
    let gt_path = args.gt.clone().or_else(|| cfg.paths.gt.clone());
    let gt = load_gt(&gt_path)?;

    let frames = load_frames(&trajectory, &points, cfg.stationary_eps)?;
    let db = pipeline::build_reference_db(frames, gt.as_ref(), &cfg)?;

    let mut guard = OutputGuard::new();
    guard.register(&out);
    db.write(&out)?;
    guard.disarm();

    let size = std::fs::metadata(&out)?.len();
    let per_ref = if db.records.is_empty() { 0.0 } else { size as f64 / db.records.len() as f64 };
    println!(
        "built {} with {} references ({:.0} bytes/reference)",
        out.display(),
        db.records.len(),
        per_ref
    );
    Ok(())
}

fn run_match(args: MatchArgs) -> Result<(), CliError> {
    let cfg = args.config.load()?;
    if args.config.print_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    let db_path = resolve(&args.db, &cfg.paths.db, "db")?;
    let trajectory = resolve(&args.trajectory, &cfg.paths.trajectory, "trajectory")?;
    let points = resolve(&args.points, &cfg.paths.points, "points")?;
    let out_dir = resolve(&args.out, &cfg.paths.out, "out")?;
    let gt_path = args.gt.clone().or_else(|| cfg.paths.gt.clone());

    let db = io::RefDb::read(&db_path)?;
    let gt = load_gt(&gt_path)?;
    let frames = load_frames(&trajectory, &points, cfg.stationary_eps)?;
    let run = pipeline::run_query_matching(frames, gt.as_ref(), &db, &cfg)?;

    std::fs::create_dir_all(&out_dir)?;
    let mut guard = OutputGuard::new();
    let match_csv = guard.register(&out_dir.join("match.csv"));
    let queries_csv = guard.register(&out_dir.join("queries.csv"));
    let timing_txt = guard.register(&out_dir.join("timing.txt"));
    io::write_match_csv(&match_csv, &run.results)?;
    io::write_queries_csv(&queries_csv, &run.queries)?;
    io::write_timing(&timing_txt, &run.timing)?;
    guard.disarm();

    println!(
        "matched {} of {} query keyframes (description {:.3} ms, matching {:.3} ms per query)",
        run.results.len(),
        run.queries.len(),
        run.timing.description_ms_mean,
        run.timing.matching_ms_mean
    );
    Ok(())
}

fn outcomes_from_files(
    match_dir: &Path,
    db: &io::RefDb,
) -> Result<Vec<spot::eval::QueryOutcome>, CliError> {
    let rows = io::read_match_csv(&match_dir.join("match.csv"))?;
    let queries = io::read_queries_csv(&match_dir.join("queries.csv"))?;
    let results: Vec<spot::matching::MatchResult<f64>> = rows
        .iter()
        .map(|r| spot::matching::MatchResult {
            query_index: r.query_idx,
            ref_index: r.ref_idx,
            score: r.score,
            viewpoint: r.viewpoint,
            line_sum: r.line_sum,
        })
        .collect();
    Ok(pipeline::assemble_outcomes(&queries, &results, db)?)
}

fn write_eval_outputs(
    out_dir: &Path,
    outcomes: &[spot::eval::QueryOutcome],
    track: &GroundTruthTrack,
    r_m: &[f64],
) -> Result<Vec<SummaryEntry>, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let mut guard = OutputGuard::new();
    let mut entries = Vec::new();
    for &rm in r_m {
        let (curve, entry) = pipeline::evaluate_at(outcomes, track, rm);
        let pr_path = guard.register(&out_dir.join(format!("pr_{}.csv", io::format_radius(rm))));
        io::write_pr_csv(&pr_path, &curve)?;
        entries.push(entry);
    }
    let summary = guard.register(&out_dir.join("summary.txt"));
    io::write_summary(&summary, &entries)?;
    guard.disarm();
    Ok(entries)
}

fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    let cfg = args.config.load()?;
    if args.config.print_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    let db_path = resolve(&args.db, &cfg.paths.db, "db")?;
    let out_dir = resolve(&args.out, &cfg.paths.out, "out")?;
    let db = io::RefDb::read(&db_path)?;
    let outcomes = outcomes_from_files(&args.match_dir, &db)?;
    let track = pipeline::reference_track(&db)?;
    let entries = write_eval_outputs(&out_dir, &outcomes, &track, &cfg.r_m)?;
    for e in &entries {
        println!("r_m={}: mr100={:.6} auc={:.6}", e.r_m, e.mr100, e.auc);
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<(), CliError> {
    if !(args.size_min <= args.size_max && args.height_min <= args.height_max) {
        return Err(CliError::Usage("size/height ranges must be min <= max".into()));
    }
    let world_spec = WorldSpec {
        seed: args.seed,
        length: args.length,
        half_width: args.half_width,
        density_per_100m: args.density,
        size_range: (args.size_min, args.size_max),
        height_range: (args.height_min, args.height_max),
        sample_pitch: args.pitch,
    };
    let direction = match args.query_direction.as_str() {
        "forward" => Direction::Forward,
        "reverse" => Direction::Reverse,
        other => {
            return Err(CliError::Usage(format!(
                "--query-direction must be forward or reverse, got `{other}`"
            )))
        }
    };
    let detour = args.detour_start.map(|start_along| DetourSpec {
        start_along,
        out: args.detour_out,
        along: args.detour_along,
    });

    let reference_spec = TraversalSpec {
        direction: Direction::Forward,
        lateral_offset: 0.0,
        frame_step: args.step,
        fov_deg: args.fov,
        dropout: 0.0,
        pose_noise_std: 0.0,
        seed: args.seed,
        camera_height: args.camera_height,
        detour: None,
    };
    let query_spec = TraversalSpec {
        direction,
        lateral_offset: args.query_offset,
        dropout: args.query_dropout,
        pose_noise_std: args.query_noise,
        seed: args.seed.wrapping_add(0x51EED),
        detour,
        ..reference_spec.clone()
    };

    std::fs::create_dir_all(&args.out)?;
    let world = SampledWorld::from_spec(&world_spec);
    let mut guard = OutputGuard::new();
    for (tag, spec) in [("ref", &reference_spec), ("query", &query_spec)] {
        let traversal = generate_traversal(&world_spec, spec);
        let frames: Vec<_> = traversal
            .true_poses
            .iter()
            .map(|pose| {
                let pts = render_frame(
                    &world,
                    pose,
                    spec.fov_deg,
                    args.r_d,
                    spec.dropout,
                    frame_seed(spec.seed, pose.frame_id),
                );
                (pose.frame_id, pts)
            })
            .collect();
        let traj_path = guard.register(&args.out.join(format!("{tag}_trajectory.csv")));
        let points_path = guard.register(&args.out.join(format!("{tag}_points.bin")));
        let gt_path = guard.register(&args.out.join(format!("{tag}_gt.csv")));
        io::write_trajectory(&traj_path, &traversal.poses)?;
        io::write_points(&points_path, frames.iter().map(|(id, pts)| (*id, pts.as_slice())))?;
        io::write_ground_truth(&gt_path, &traversal.ground_truth)?;
        println!(
            "{tag}: {} frames over {:.0} m -> {}_*.{{csv,bin}}",
            traversal.poses.len(),
            args.length,
            args.out.join(tag).display()
        );
    }
    guard.disarm();
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = args.config.load()?;
    if args.config.print_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    if args.w_list.is_empty() {
        return Err(CliError::Usage("--w-list needs at least one sequence length".into()));
    }
    for &w in &args.w_list {
        if w < 1 || w % 2 == 0 {
            return Err(CliError::Usage(format!("sequence lengths must be odd, got {w}")));
        }
    }
    let db_path = resolve(&args.db, &cfg.paths.db, "db")?;
    let trajectory = resolve(&args.trajectory, &cfg.paths.trajectory, "trajectory")?;
    let points = resolve(&args.points, &cfg.paths.points, "points")?;
    let out_dir = resolve(&args.out, &cfg.paths.out, "out")?;
    let gt_path = args.gt.clone().or_else(|| cfg.paths.gt.clone());

    let db = io::RefDb::read(&db_path)?;
    let gt = load_gt(&gt_path)?;
    let frames = load_frames(&trajectory, &points, cfg.stationary_eps)?;
    // Distance matrices are independent of w; compute them once.
    let run = pipeline::run_query_matching(frames, gt.as_ref(), &db, &cfg)?;
    let refs = db.to_descriptors::<f64>();
    let track = pipeline::reference_track(&db)?;

    std::fs::create_dir_all(&out_dir)?;
    let mut guard = OutputGuard::new();
    let sweep_csv = guard.register(&out_dir.join("sweep.csv"));
    let mut sweep_lines = vec!["w,r_m,mr100,auc".to_string()];
    for &w in &args.w_list {
        let results =
            pipeline::match_over_matrices(&run.matrices, &run.query_descriptors, &refs, &cfg, w);
        let outcomes = pipeline::assemble_outcomes(&run.queries, &results, &db)?;
        let mut entries = Vec::new();
        for &rm in &cfg.r_m {
            let (_, entry) = pipeline::evaluate_at(&outcomes, &track, rm);
            sweep_lines.push(format!(
                "{w},{},{:.6},{:.6}",
                io::format_radius(rm),
                entry.mr100,
                entry.auc
            ));
            entries.push(entry);
        }
        let summary_path = guard.register(&out_dir.join(format!("summary_w{w}.txt")));
        io::write_summary(&summary_path, &entries)?;
        println!("w={w}: {} matches", results.len());
    }
    std::fs::write(&sweep_csv, sweep_lines.join("\n") + "\n").map_err(io::Error::Io)?;
    guard.disarm();
    Ok(())
}
