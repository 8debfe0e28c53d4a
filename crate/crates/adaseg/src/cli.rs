//! Command-line front end.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use adaseg_core::analysis::{
    default_xi_grid, generate_perturbed, generate_simple, quality_curve, PERTURBED_INCLUSIONS, SIMPLE_COLORS,
};
use adaseg_core::{
    CuttingStrategy, EngineConfig, EngineError, Evaluation, FamilyMode, Mode, MultiscalarStrategy,
    SegmentationState, StopCriterion, StopStatus,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::export::{self, SessionFile};
use crate::image_io::{self, load_image};

/// Environment variable holding the log filter, e.g. `info` or `adaseg=debug`.
pub const LOG_ENV: &str = "ADASEG_LOG";

#[derive(Debug, Parser)]
#[command(name = "adaseg", version, about = "Adaptive greedy image segmentation with refinement indicators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment an image and write the trace, session and snapshots.
    Segment(SegmentArgs),
    /// Re-run a saved session and check that it reproduces its trace.
    Replay(ReplayArgs),
    /// Write indicator-quality probability curves as CSV.
    Analysis(AnalysisArgs),
    /// Write a synthetic flat-color test image.
    Generate(GenerateArgs),
    /// Serve the HTTP session API and the static UI bundle.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Vector,
    Multiscalar,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Vector => Mode::Vector,
            ModeArg::Multiscalar => Mode::Multiscalar,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CuttingArg {
    /// Sign cut of the channel with the largest first-order indicator.
    OverallBest,
    /// Best vertical or horizontal cut over every position.
    BestInFamily,
    /// Best vertical or horizontal cut through the bounding-box middle.
    BestInFamilyMidpoints,
}

impl From<CuttingArg> for CuttingStrategy {
    fn from(c: CuttingArg) -> Self {
        match c {
            CuttingArg::OverallBest => CuttingStrategy::OverallBest,
            CuttingArg::BestInFamily => CuttingStrategy::BestInFamily(FamilyMode::AllPositions),
            CuttingArg::BestInFamilyMidpoints => CuttingStrategy::BestInFamily(FamilyMode::Midpoints),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MultiscalarArg {
    BestComponentOnly,
    BestComponentForEach,
    CombineBestComponents,
}

impl From<MultiscalarArg> for MultiscalarStrategy {
    fn from(m: MultiscalarArg) -> Self {
        match m {
            MultiscalarArg::BestComponentOnly => MultiscalarStrategy::BestComponentOnly,
            MultiscalarArg::BestComponentForEach => MultiscalarStrategy::BestComponentForEach,
            MultiscalarArg::CombineBestComponents => MultiscalarStrategy::CombineBestComponents,
        }
    }
}

#[derive(Debug, Args)]
#[group(id = "stop", required = true, multiple = false)]
pub struct StopArgs {
    /// Stop once the number of uniform-color regions reaches N.
    #[arg(long, value_name = "N")]
    pub target_regions: Option<usize>,
    /// Stop once the number of scalar regions reaches N.
    #[arg(long, value_name = "N")]
    pub target_scalar_regions: Option<usize>,
    /// Stop once the explained-data percentage reaches T.
    #[arg(long, value_name = "T")]
    pub target_tau: Option<f64>,
    /// Stop after N iterations.
    #[arg(long, value_name = "N")]
    pub max_iterations: Option<usize>,
    /// Stop once J is at most E.
    #[arg(long, value_name = "E")]
    pub j_epsilon: Option<f64>,
}

impl StopArgs {
    pub fn criterion(&self) -> StopCriterion {
        StopCriterion {
            target_regions: self.target_regions,
            target_scalar_regions: self.target_scalar_regions,
            target_tau: self.target_tau,
            max_iterations: self.max_iterations,
            j_epsilon: self.j_epsilon,
        }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Input image (PNG, binary PPM or binary PGM).
    pub input: PathBuf,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "vector")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "overall-best")]
    pub cutting: CuttingArg,
    /// Commit policy in multiscalar mode.
    #[arg(long, value_enum, default_value = "best-component-only")]
    pub multiscalar: MultiscalarArg,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Iterations at which to write snapshots, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "N,..", conflicts_with = "snapshot_every")]
    pub snapshots: Vec<usize>,
    /// Write a snapshot every K iterations, starting at 0.
    #[arg(long, value_name = "K")]
    pub snapshot_every: Option<usize>,
    /// Undo checkpoint spacing, in iterations.
    #[arg(long, default_value_t = 64, value_name = "K")]
    pub checkpoint_interval: usize,
    /// Re-evaluate every region at every step (slow reference engine).
    #[arg(long)]
    pub full_rescan: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Session file written by `segment`.
    pub session: PathBuf,
    /// The image the session was recorded on.
    pub image: PathBuf,
    /// Also require this trace CSV to match the replayed trace byte for byte.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    /// Region sizes, comma separated (each at least 2).
    #[arg(long, required = true, value_delimiter = ',')]
    pub p: Vec<usize>,
    /// Thresholds in [0, 1], comma separated. Defaults to an even grid.
    #[arg(long, value_delimiter = ',')]
    pub xi: Vec<f64>,
    /// Number of intervals of the default grid.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Output directory for `quality_p{p}.csv`.
    #[arg(short, long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SceneKind {
    /// Three flat shapes on a background.
    Simple,
    /// The simple scene with a small inclusion in each shape.
    Perturbed,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub kind: SceneKind,
    /// Side length in pixels (at least 32).
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    /// Seed of the shape-position jitter.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output PNG path.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of the static UI bundle served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    /// Idle time after which a session is dropped, in seconds.
    #[arg(long, default_value_t = 1800)]
    pub session_ttl: u64,
    /// Largest accepted upload, in bytes.
    #[arg(long, default_value_t = 32 * 1024 * 1024)]
    pub max_upload: usize,
}

/// A failure with its process exit code.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const IO: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const STALLED: u8 = 3;
    pub const DIVERGED: u8 = 4;

    fn new(code: u8, message: impl std::fmt::Display) -> Self {
        CliError {
            code,
            message: message.to_string(),
        }
    }

    fn io(message: impl std::fmt::Display) -> Self {
        Self::new(Self::IO, message)
    }

    fn config(message: impl std::fmt::Display) -> Self {
        Self::new(Self::CONFIG, message)
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Segment(args) => segment(&args),
        Command::Replay(args) => replay(&args),
        Command::Analysis(args) => analysis(&args),
        Command::Generate(args) => generate(&args),
        Command::Serve(args) => serve(&args),
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn write_snapshot(dir: &Path, stem: &str, state: &SegmentationState) -> Result<(), CliError> {
    let png = export::render_segmented(state).map_err(CliError::io)?;
    write(&dir.join(format!("{stem}.png")), png)?;
    let edges = export::render_edges(state).map_err(CliError::io)?;
    write(&dir.join(format!("{stem}_edges.png")), edges)?;
    let labels = serde_json::to_vec(&export::label_dump(state)).map_err(CliError::io)?;
    write(&dir.join(format!("{stem}_labels.json")), labels)
}

fn snapshot_stem(iteration: usize) -> String {
    format!("iter_{iteration:06}")
}

fn segment(args: &SegmentArgs) -> Result<(), CliError> {
    let img = Arc::new(load_image(&args.input).map_err(CliError::io)?);
    let mut config = match Mode::from(args.mode) {
        Mode::Vector => EngineConfig::vector(args.cutting.into()),
        Mode::Multiscalar => EngineConfig::multiscalar(args.cutting.into(), args.multiscalar.into()),
    };
    config.snapshot_interval = args.checkpoint_interval;
    if args.full_rescan {
        config.evaluation = Evaluation::FullRescan;
    }
    if args.snapshot_every == Some(0) {
        return Err(CliError::config("--snapshot-every must be positive"));
    }
    let mut state = SegmentationState::init(Arc::clone(&img), config).map_err(CliError::config)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", args.out.display())))?;

    let scheduled: BTreeSet<usize> = args.snapshots.iter().copied().collect();
    let due = |n: usize| scheduled.contains(&n) || args.snapshot_every.is_some_and(|k| n.is_multiple_of(k));
    if due(0) {
        write_snapshot(&args.out, &snapshot_stem(0), &state)?;
    }
    let mut failure = None;
    let outcome = state.run_observed(&args.stop.criterion(), |s, _| {
        if failure.is_none() && due(s.iteration()) {
            failure = write_snapshot(&args.out, &snapshot_stem(s.iteration()), s).err();
        }
    });
    let outcome = outcome.map_err(CliError::config)?;
    if let Some(e) = failure {
        return Err(e);
    }

    write(&args.out.join("trace.csv"), export::trace_csv(&state))?;
    let session = serde_json::to_vec_pretty(&SessionFile::of(&state, config)).map_err(CliError::io)?;
    write(&args.out.join("session.json"), session)?;
    write_snapshot(&args.out, "final", &state)?;
    info!(
        "{} iterations, n_vr={}, n_sr={}, J={}, tau={}",
        state.iteration(),
        state.n_vr(),
        state.n_sr(),
        state.j(),
        state.tau()
    );
    match outcome.status {
        StopStatus::Stalled => Err(CliError::new(
            CliError::STALLED,
            format!("stalled at iteration {} with J = {}", state.iteration(), state.j()),
        )),
        StopStatus::Converged => {
            info!("converged: the segmented image equals the data");
            Ok(())
        }
        StopStatus::TargetReached => Ok(()),
    }
}

fn replay(args: &ReplayArgs) -> Result<(), CliError> {
    let raw = std::fs::read(&args.session)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", args.session.display())))?;
    let session: SessionFile =
        serde_json::from_slice(&raw).map_err(|e| CliError::config(format!("invalid session file: {e}")))?;
    if session.version != SessionFile::VERSION {
        return Err(CliError::config(format!("unsupported session version {}", session.version)));
    }
    let img = Arc::new(load_image(&args.image).map_err(CliError::io)?);
    let hash = export::image_hash(&img);
    if hash != session.image.sha256 {
        return Err(CliError::config(format!(
            "image hash {hash} does not match the session's {}",
            session.image.sha256
        )));
    }
    let state = match SegmentationState::replay(img, session.config, &session.steps) {
        Ok(state) => state,
        Err(EngineError::Divergence { iteration }) => {
            return Err(CliError::new(
                CliError::DIVERGED,
                format!("replay diverged at iteration {iteration}"),
            ))
        }
        Err(e) => return Err(CliError::config(e)),
    };
    if let Some(path) = &args.trace {
        let recorded =
            std::fs::read(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        if recorded != export::trace_csv(&state).as_bytes() {
            return Err(CliError::new(CliError::DIVERGED, "replayed trace differs from the recorded trace"));
        }
    }
    println!(
        "replayed {} iterations, {} events: J = {}, tau = {}",
        state.iteration(),
        session.event_count(),
        export::format_sig9(state.j()),
        export::format_sig9(state.tau())
    );
    Ok(())
}

fn analysis(args: &AnalysisArgs) -> Result<(), CliError> {
    let grid = if args.xi.is_empty() {
        if args.steps == 0 {
            return Err(CliError::config("--steps must be positive"));
        }
        default_xi_grid(args.steps)
    } else {
        args.xi.clone()
    };
    if let Some(xi) = grid.iter().find(|xi| !(0.0..=1.0).contains(*xi)) {
        return Err(CliError::config(format!("xi = {xi} is outside [0, 1]")));
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", args.out.display())))?;
    for &p in &args.p {
        let curve = quality_curve(p, &grid).map_err(CliError::config)?;
        let path = args.out.join(format!("quality_p{p}.csv"));
        write(&path, export::quality_csv(&curve))?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let img = match args.kind {
        SceneKind::Simple => generate_simple(args.size, &SIMPLE_COLORS, args.seed),
        SceneKind::Perturbed => generate_perturbed(args.size, &SIMPLE_COLORS, &PERTURBED_INCLUSIONS, args.seed),
    }
    .map_err(CliError::config)?;
    image_io::save_image(&img, img.planes(), &args.out).map_err(CliError::io)
}

fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let config = crate::server::ServerConfig {
        session_ttl: std::time::Duration::from_secs(args.session_ttl),
        max_upload: args.max_upload,
        ui_dir: args.ui_dir.clone(),
    };
    if let Some(dir) = &config.ui_dir {
        if !dir.is_dir() {
            warn!("UI directory {} does not exist", dir.display());
        }
    }
    let addr = format!("{}:{}", args.host, args.port);
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::io)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::io(format!("cannot bind {addr}: {e}")))?;
        info!("listening on http://{addr}");
        crate::server::serve(listener, config).await.map_err(CliError::io)
    })
}
