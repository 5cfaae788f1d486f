//! `holonewt`: train complex-valued MLPs, run seeded trial batches, and
//! check analytic derivatives against finite differences.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 numerical failure
//! (a failed training run or a derivative check out of tolerance).

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use holonewt::linalg::C64;
use holonewt::trainer::{
    initial_weights, run_trials, train_from, write_error_history_csv, write_trials_csv,
    TrainOptions, TrialOutcome, TrialStats,
};
use holonewt::{CVector, Dataset, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use config::LoadedConfig;

#[derive(Parser, Debug)]
#[command(
    name = "holonewt",
    version,
    about = "Newton-family backpropagation for complex-valued MLPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one network and write its checkpoint, error history and record.
    Train {
        #[command(flatten)]
        common: Common,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Seed for the initial weights [default: trial.base_seed or 0].
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a seeded batch of independent trials.
    Trials {
        #[command(flatten)]
        common: Common,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Number of trials [default: trial.count or 100].
        #[arg(long)]
        trials: Option<u64>,
        /// Trial k uses seed + k [default: trial.base_seed or 0].
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 1 runs sequentially.
        #[arg(long, env = "HOLONEWT_JOBS")]
        jobs: Option<usize>,
    },
    /// Compare analytic derivatives with finite differences at seeded random weights.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report and a manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scale the second-derivative terms by this factor (fault injection).
        #[arg(long, hide = true)]
        fault_theta: Option<f64>,
    },
}

/// What a command wrote, for reproducibility.
#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    config: &'a config::RunConfig,
    seed: u64,
    trials: Option<u64>,
    artifacts: Vec<String>,
    wall_clock_seconds: f64,
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file =
            File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        std::io::Write::write_all(&mut w, b"\n")?;
        Ok(())
    }

    fn finish(mut self, manifest: RunManifest<'_>) -> Result<()> {
        let manifest = RunManifest {
            artifacts: std::mem::take(&mut self.written),
            ..manifest
        };
        self.json("manifest.json", &manifest)
    }
}

enum Status {
    Ok,
    NumericalFailure,
}

fn cmd_train(common: &Common, out: &Path, seed: Option<u64>) -> Result<Status> {
    let start = Instant::now();
    let cfg = LoadedConfig::load(&common.config)?;
    let (top, ds, tc) = (cfg.topology()?, cfg.dataset()?, cfg.train_config()?);
    let seed = seed.or(cfg.raw.trial.base_seed).unwrap_or(0);
    let init = initial_weights(&top, seed, tc.init_range);
    let options = TrainOptions {
        keep_error_history: true,
        keep_weight_history: false,
    };
    let mut run = train_from(&top, &ds, &tc, seed, init, options)?;

    let mut art = Artifacts::new(out)?;
    let ckpt = holonewt::io::checkpoint_to_string(&top, &run.weights)?;
    let mut w = art.create("weights.json")?;
    std::io::Write::write_all(&mut w, ckpt.as_bytes())?;
    drop(w);
    let history = run.record.error_history.take().unwrap_or_default();
    write_error_history_csv(art.create("error_history.csv")?, &history)?;
    art.json("record.json", &run.record)?;

    let r = &run.record;
    println!(
        "{} {} seed {}: {} after {} iterations, E = {:e}",
        r.method, r.activation, r.seed, r.outcome, r.iterations, r.final_error
    );
    art.finish(RunManifest {
        command: "train",
        tool_version: env!("CARGO_PKG_VERSION"),
        config: &cfg.raw,
        seed,
        trials: None,
        artifacts: Vec::new(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })?;
    Ok(if r.outcome == TrialOutcome::Success {
        Status::Ok
    } else {
        Status::NumericalFailure
    })
}

fn print_summary(method: &str, activation: &str, stats: &TrialStats) {
    let mean = stats
        .mean_iterations_over_successes
        .map_or_else(|| "-".to_string(), |m| format!("{m:.1}"));
    println!(
        "{:<18} {:<12} {:>7} {:>10} {:>16}",
        "method", "activation", "trials", "successes", "mean iterations"
    );
    println!(
        "{method:<18} {activation:<12} {:>7} {:>10} {mean:>16}",
        stats.n_trials, stats.successes
    );
    println!();
    println!("{:<18} {:>7}", "failure", "count");
    for outcome in TrialOutcome::ALL.into_iter().skip(1) {
        println!("{:<18} {:>7}", outcome.name(), stats.count(outcome));
    }
    println!("(mean iterations over successful trials only)");
}

fn cmd_trials(
    common: &Common,
    out: &Path,
    n: Option<u64>,
    seed: Option<u64>,
    jobs: Option<usize>,
) -> Result<Status> {
    let start = Instant::now();
    if jobs == Some(0) {
        bail!("--jobs must be at least 1");
    }
    let cfg = LoadedConfig::load(&common.config)?;
    let (top, ds, tc) = (cfg.topology()?, cfg.dataset()?, cfg.train_config()?);
    let n = n.or(cfg.raw.trial.count).unwrap_or(100);
    if n == 0 {
        bail!("--trials must be at least 1");
    }
    let seed = seed.or(cfg.raw.trial.base_seed).unwrap_or(0);
    let set = run_trials(&top, &ds, &tc, n, seed, jobs)?;

    let mut art = Artifacts::new(out)?;
    write_trials_csv(art.create("trials.csv")?, &set.records)?;
    art.json("stats.json", &set.stats)?;
    print_summary(tc.method.name(), &top.activation_label(), &set.stats);
    art.finish(RunManifest {
        command: "trials",
        tool_version: env!("CARGO_PKG_VERSION"),
        config: &cfg.raw,
        seed,
        trials: Some(n),
        artifacts: Vec::new(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })?;
    Ok(Status::Ok)
}

fn random_dataset(
    rng: &mut ChaCha8Rng,
    inputs: usize,
    outputs: usize,
    n: usize,
) -> Result<Dataset> {
    let mut rv = |k: usize| -> CVector {
        (0..k)
            .map(|_| C64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
            .collect()
    };
    let samples = (0..n)
        .map(|_| Sample {
            input: rv(inputs),
            target: rv(outputs),
        })
        .collect();
    Ok(Dataset::new(samples)?)
}

fn cmd_verify(
    common: &Common,
    seed: u64,
    out: Option<&Path>,
    fault: Option<f64>,
) -> Result<Status> {
    let start = Instant::now();
    let cfg = LoadedConfig::load(&common.config)?;
    let top = cfg.topology()?;
    let tc = cfg.train_config()?;
    let spec = &cfg.raw.verify;
    if spec.samples == 0 {
        bail!("verify.samples must be at least 1");
    }
    let weights = initial_weights(&top, seed, tc.init_range);
    let ds = if cfg.raw.dataset_path.is_some() {
        cfg.dataset()?
    } else {
        // Offset so the data stream is not the weight stream.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        random_dataset(&mut rng, top.inputs(), top.outputs(), spec.samples)?
    };
    let report = match holonewt::oracle::verify(
        &top,
        &weights,
        &ds,
        &spec.finite_difference,
        spec.tolerance,
        seed,
        fault,
    ) {
        Ok(r) => r,
        Err(holonewt::Error::NonFiniteEvaluation) => {
            eprintln!("error evaluates to a non-finite value near these weights");
            return Ok(Status::NumericalFailure);
        }
        Err(e) => return Err(e.into()),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(dir) = out {
        let mut art = Artifacts::new(dir)?;
        art.json("verify.json", &report)?;
        art.finish(RunManifest {
            command: "verify",
            tool_version: env!("CARGO_PKG_VERSION"),
            config: &cfg.raw,
            seed,
            trials: None,
            artifacts: Vec::new(),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        })?;
    }
    Ok(if report.passed {
        Status::Ok
    } else {
        Status::NumericalFailure
    })
}

fn run(cli: Cli) -> Result<Status> {
    match &cli.command {
        Command::Train { common, out, seed } => cmd_train(common, out, *seed),
        Command::Trials {
            common,
            out,
            trials,
            seed,
            jobs,
        } => cmd_trials(common, out, *trials, *seed, *jobs),
        Command::Verify {
            common,
            seed,
            out,
            fault_theta,
        } => cmd_verify(common, *seed, out.as_deref(), *fault_theta),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NumericalFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
