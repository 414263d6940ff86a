//! `fisheye-gs` command-line tool.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "fisheye-gs", version, about = "Fisheye Gaussian splatting toolkit")]
struct Cli {
    /// Worker threads for batch work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Narrow the field of view of every image in a directory.
    ReduceFov(ReduceFovArgs),
    /// Build an initialization point cloud from depth grids.
    InitFromDepth(InitArgs),
    /// Render a Gaussian scene from a COLMAP view.
    Render(RenderArgs),
    /// Compare EWA and UT projections against a reference.
    CompareProjections(CompareArgs),
    /// Masked PSNR and SSIM between two image directories.
    Metrics(MetricsArgs),
    /// Deterministic train/test split of a dataset directory.
    Split(SplitArgs),
}

#[derive(Args, Debug)]
pub struct ReduceFovArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Camera text block of the source images.
    #[arg(long)]
    pub cam: PathBuf,
    /// Target field of view in degrees.
    #[arg(long)]
    pub fov: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InitArgs {
    /// FDG1 depth grids, one per image.
    #[arg(long, num_args = 1.., required = true)]
    pub depth: Vec<PathBuf>,
    /// Camera text block overriding the COLMAP intrinsics.
    #[arg(long)]
    pub cam: Option<PathBuf>,
    #[arg(long)]
    pub colmap: PathBuf,
    /// COLMAP image names matching the depth grids.
    #[arg(long, num_args = 1.., required = true)]
    pub images: Vec<String>,
    /// Camera poses in the depth predictor's frame, one `NAME QW QX QY QZ TX TY TZ` per line.
    #[arg(long)]
    pub pred_poses: Option<PathBuf>,
    /// Directory holding the color images named by --images.
    #[arg(long)]
    pub color_dir: Option<PathBuf>,
    #[arg(long, default_value_t = fisheye_gs::depth_init::DEFAULT_POINT_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = fisheye_gs::depth_init::DEFAULT_STRIDE)]
    pub stride: u32,
    #[arg(long, default_value_t = fisheye_gs::depth_init::DEFAULT_SEED)]
    pub seed: u64,
    /// Depth values are z-depths rather than distances along the ray.
    #[arg(long)]
    pub z_depth: bool,
    /// Write ASCII instead of binary PLY.
    #[arg(long)]
    pub ascii: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackendArg {
    Ewa,
    Ut,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Gaussian PLY scene.
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub colmap: PathBuf,
    #[arg(long)]
    pub image_name: String,
    #[arg(long, value_enum, default_value_t = BackendArg::Ut)]
    pub backend: BackendArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Validity mask path (default: `<out stem>_mask.png`).
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
    /// Also write the rendered depth as FDG1.
    #[arg(long)]
    pub depth_out: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub tile_size: u32,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CameraArg {
    Fisheye,
    Affine,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long, default_value_t = 200.0)]
    pub fov: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = CameraArg::Fisheye)]
    pub camera: CameraArg,
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub kappa: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Directory of validity masks named like the images.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Ignore masks and score the full frame.
    #[arg(long)]
    pub full_frame: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Train/test proportions.
    #[arg(long, default_value = "90/10")]
    pub split: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving train.txt and test.txt.
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::ReduceFov(a) => commands::reduce_fov::run(&a),
        Command::InitFromDepth(a) => commands::init_depth::run(&a),
        Command::Render(a) => commands::render::run(&a),
        Command::CompareProjections(a) => commands::compare::run(&a),
        Command::Metrics(a) => commands::metrics::run(&a),
        Command::Split(a) => commands::split::run(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
