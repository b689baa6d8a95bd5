//! `colorbreg` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Environment variable holding the default worker count.
pub const JOBS_ENV: &str = "COLORBREG_JOBS";

#[derive(Parser, Debug)]
#[command(name = "colorbreg", version, about = "Multichannel TV denoising with coupled Bregman iterations")]
struct Cli {
    /// Worker threads; defaults to $COLORBREG_JOBS, then the core count.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Denoise one image.
    Denoise(DenoiseArgs),
    /// Run the three-channel 1-D step demo and dump every iteration.
    Demo1d(Demo1dArgs),
    /// Denoise the synthetic nested-squares image.
    Squares(SquaresArgs),
    /// Sweep methods and regularization weights over a dataset.
    Bench(BenchArgs),
    /// Check a diagnostics CSV for monotonicity and the C/sqrt(k) rate.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// tv, bregman (channelwise), color_bregman or infconv.
    #[arg(long, default_value = "color_bregman")]
    pub method: String,
    /// isotropic or anisotropic.
    #[arg(long, default_value = "isotropic")]
    pub flavor: String,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// identity, default, uniform:OMEGA or a row-major list such as "0.8,0.2;0.2,0.8".
    #[arg(long, default_value = "default")]
    pub weights: String,
    #[arg(long, default_value_t = 10)]
    pub max_iters: usize,
    /// Inner ADMM tolerance.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Noise level; enables the discrepancy stop.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub diag_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Demo1dArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub iters: usize,
    #[arg(long, default_value_t = 32.0)]
    pub alpha: f64,
    /// Coupling for the color run; uniform 1/3 when omitted.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long, default_value = "demo1d")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct SquaresArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Two channels with opposite edge signs instead of three aligned ones.
    #[arg(long)]
    pub opposite: bool,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "squares")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Image files, directories, or generators (demo1d, squares, squares-opposite, constant).
    #[arg(long = "data", required = true, num_args = 1..)]
    pub data: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.4,0.8")]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "tv,bregman,color_bregman,infconv")]
    pub methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "isotropic")]
    pub flavors: Vec<String>,
    /// Applied to every image; the channel-count default when omitted.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub max_iters: usize,
    /// Center crop HEIGHTxWIDTH.
    #[arg(long)]
    pub crop: Option<String>,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub infconv_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Results CSV; the summary always goes to stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    pub csv: PathBuf,
}

fn resolve_jobs(flag: Option<usize>) -> Result<usize, commands::Failure> {
    let from_env = std::env::var(JOBS_ENV).ok().map(|v| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| commands::Failure::usage(format!("{JOBS_ENV} must be a positive integer, got '{v}'")))
    });
    let jobs = match (flag, from_env) {
        (Some(j), _) => j,
        (None, Some(env)) => env?,
        (None, None) => std::thread::available_parallelism().map_or(1, usize::from),
    };
    if jobs == 0 {
        return Err(commands::Failure::usage("--jobs must be at least 1"));
    }
    Ok(jobs)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = resolve_jobs(cli.jobs).and_then(|jobs| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| commands::Failure::usage(e.to_string()))?;
        pool.install(|| match &cli.command {
            Command::Denoise(a) => commands::denoise(a, jobs > 1),
            Command::Demo1d(a) => commands::demo1d(a),
            Command::Squares(a) => commands::squares(a, jobs > 1),
            Command::Bench(a) => commands::bench(a),
            Command::Diagnose(a) => commands::diagnose(a),
        })
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
