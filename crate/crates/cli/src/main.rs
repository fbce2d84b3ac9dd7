use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gepey::ssl::VicregParams;
use gepey::Matrix;
use gepey_cli::gen::{gen_augmented, gen_gaussian, Generated};
use gepey_cli::io;
use gepey_cli::run::{run, MethodArg, OptimizerArg, RunConfig, SamplingArg, Task};
use gepey_cli::verify::{run_suite, Suite};

#[derive(Parser)]
#[command(name = "gepey", version, about = "Stochastic generalized eigenvalue solvers for CCA, PLS and SSL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic views as GEPM files.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Train one model and write metrics.csv plus weight files.
    Run(RunArgs),
    /// Run a self-check suite; exits non-zero if any check fails.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// Gaussian views with prescribed canonical correlations.
    Gaussian {
        /// Width of each view, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Canonical correlations, descending, each in [0, 1).
        #[arg(long, value_delimiter = ',', required = true)]
        rho: Vec<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two views from independent random augmentations of shared data.
    Augmented {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "ey")]
    method: MethodArg,
    #[arg(long, value_enum)]
    task: Task,
    #[arg(long)]
    k: usize,
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, value_enum, default_value = "sgd")]
    optimizer: OptimizerArg,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Input files: one per view, or A then B for the GEP task.
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Held-out views for TCC/TMCC.
    #[arg(long, num_args = 1..)]
    val: Option<Vec<PathBuf>>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    tied: bool,
    #[arg(long, default_value_t = 1)]
    eval_every: usize,
    #[arg(long, value_enum, default_value = "disjoint")]
    sampling: SamplingArg,
    #[arg(long, default_value_t = 1.0)]
    vr_alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    vr_beta: f64,
    #[arg(long, default_value_t = 1.0)]
    vr_gamma: f64,
    #[arg(long, default_value_t = 0.005)]
    bt_beta: f64,
    /// Running-average weight for the γ-EigenGame auxiliary estimate.
    #[arg(long, default_value_t = 0.9)]
    eg_decay: f64,
}

fn write_generated(out: &Path, g: &Generated) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (i, v) in g.batch.views().iter().enumerate() {
        io::save(&out.join(format!("view{i}.gepm")), v)?;
    }
    io::save(&out.join("spectrum.gepm"), &Matrix::column_vector(&g.spectrum).transpose())?;
    Ok(())
}

fn load_all(paths: &[PathBuf]) -> anyhow::Result<Vec<Matrix>> {
    paths
        .iter()
        .map(|p| io::load(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn do_run(args: RunArgs) -> anyhow::Result<()> {
    let mut config = RunConfig::new(args.method, args.task, args.k);
    config.alpha = args.alpha;
    config.batch_size = args.batch_size;
    config.lr = args.lr;
    config.optimizer = args.optimizer;
    config.steps = args.steps;
    config.epochs = args.epochs;
    config.seed = args.seed;
    config.jitter = args.jitter;
    config.hidden = args.hidden.unwrap_or_default();
    config.tied = args.tied;
    config.eval_every = args.eval_every;
    config.sampling = args.sampling;
    config.vicreg = VicregParams::new(args.vr_alpha, args.vr_beta, args.vr_gamma)?;
    config.bt_beta = args.bt_beta;
    config.eg_decay = args.eg_decay;
    let inputs = load_all(&args.inputs)?;
    let val = args.val.as_deref().map(load_all).transpose()?;
    let output = run(&config, &inputs, val.as_deref())?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("metrics.csv"), &output.csv)?;
    for (name, m) in &output.weights {
        io::save(&args.out.join(format!("{name}.gepm")), m)?;
    }
    Ok(())
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Gen { kind } => match kind {
            GenKind::Gaussian {
                dims,
                rho,
                n,
                seed,
                out,
            } => write_generated(&out, &gen_gaussian(&dims, &rho, n, seed)?)?,
            GenKind::Augmented {
                dim,
                n,
                noise,
                seed,
                out,
            } => write_generated(&out, &gen_augmented(dim, n, noise, seed)?)?,
        },
        Command::Run(args) => do_run(args)?,
        Command::Verify { suite, seed } => {
            let checks = run_suite(suite, seed)?;
            if checks.is_empty() {
                bail!("suite produced no checks");
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            for c in &checks {
                println!("{c}");
            }
            println!("{} checks, {failed} failed", checks.len());
            return Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
    }
    Ok(ExitCode::SUCCESS)
}
