use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alms_core::active_learning::{CheckpointFile, Explorer};
use alms_core::config::PipelineConfig;
use alms_core::molspace::{read_molecule_list, write_molecule_list, CanonicalSmiles};
use alms_core::pipeline::{
    self, enumerate_stage, evaluate_predictions, fit_predict_files, open_kernel, read_predictions,
    save_kernel, simulate_molecules, write_json, write_predictions,
};
use alms_core::thermo::{dataset_rows, write_dataset};
use alms_core::{AlState, Error};
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "alms", version, about = "Active learning over alkane chemical space")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts, overriding `pipeline.out_dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed for every random stream, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log progress at debug level.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate all alkanes in a carbon range.
    Enumerate {
        /// Smallest carbon count.
        min: Option<usize>,
        /// Largest carbon count.
        max: Option<usize>,
        #[arg(long, conflicts_with = "min")]
        min_carbons: Option<usize>,
        #[arg(long, conflicts_with = "max")]
        max_carbons: Option<usize>,
        /// Output list, one canonical SMILES per line.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run active learning to completion, resuming an existing checkpoint.
    Al {
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        /// Molecule list; defaults to the configured carbon range.
        #[arg(long)]
        molecules: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Iterations between checkpoint writes.
        #[arg(long)]
        checkpoint_every: Option<u64>,
    },
    /// Continue a finished run at a lower threshold.
    AlContinue {
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Where to write the new checkpoint; defaults to overwriting.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic property data.
    Simulate {
        /// Molecule list, or a checkpoint whose selected set is simulated.
        #[arg(long)]
        molecules: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Fit on one dataset and predict the rows of another.
    FitPredict {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute metrics of a predictions file.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare active learning against random training sets.
    CompareRandom,
    /// Run the whole workflow.
    RunAll,
}

/// A failure and the exit code it maps to.
enum Failure {
    Config(anyhow::Error),
    Stage(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.into()),
            other => Failure::Stage(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Stage(e)
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure::Config(anyhow!(msg.into()))
}

fn load_config(global: &Global) -> Result<PipelineConfig, Failure> {
    let mut config = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = &global.out_dir {
        config.pipeline.out_dir = dir.clone();
    }
    if let Some(seed) = global.seed {
        config.override_seed(seed);
    }
    Ok(config)
}

fn checked(config: PipelineConfig) -> Result<PipelineConfig, Failure> {
    config.validate()?;
    Ok(config)
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
    let level = if cli.global.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = load_config(&cli.global)?;
    match cli.command {
        Command::Enumerate {
            min,
            max,
            min_carbons,
            max_carbons,
            out,
        } => {
            if let Some(n) = min.or(min_carbons) {
                config.pipeline.min_carbons = n;
            }
            if let Some(n) = max.or(max_carbons) {
                config.pipeline.max_carbons = n;
            }
            let config = checked(config)?;
            let p = &config.pipeline;
            let start = std::time::Instant::now();
            let molecules = alms_core::molspace::enumerate_canonical(p.min_carbons, p.max_carbons)?;
            let out = out.unwrap_or_else(|| p.out_dir.join("molecules.txt"));
            ensure_parent(&out)?;
            write_molecule_list(&out, &molecules)?;
            println!(
                "{} molecules with {}..={} carbons written to {} in {:.1}s",
                molecules.len(),
                p.min_carbons,
                p.max_carbons,
                out.display(),
                start.elapsed().as_secs_f64()
            );
        }
        Command::Al {
            threshold,
            batch,
            molecules,
            checkpoint,
            checkpoint_every,
        } => {
            if let Some(t) = threshold {
                config.al.thresholds = vec![t];
            }
            if let Some(b) = batch {
                config.al.batch = b;
            }
            if let Some(k) = checkpoint_every {
                config.al.checkpoint_every = k;
            }
            let config = checked(config)?;
            run_al(&config, molecules.as_deref(), &checkpoint)?;
        }
        Command::AlContinue {
            threshold,
            checkpoint,
            out,
        } => {
            let config = checked(config)?;
            let file = CheckpointFile::load(&checkpoint)?;
            if file.kernel_fingerprint != config.mgk.fingerprint() {
                return Err(config_error(format!(
                    "{} was written with other kernel hyperparameters",
                    checkpoint.display()
                )));
            }
            if !(threshold < file.threshold) {
                return Err(config_error(format!(
                    "threshold {threshold} must be strictly below the checkpoint's {}",
                    file.threshold
                )));
            }
            let (molecules, state) = file.to_state()?;
            if !state.is_terminal() {
                return Err(config_error(format!(
                    "{} is not finished; run `al` on it first",
                    checkpoint.display()
                )));
            }
            let out = out.unwrap_or(checkpoint);
            let noise = file.noise;
            let kernel = open_kernel(molecules.clone(), &config.mgk, &config.pipeline.out_dir)?;
            let fingerprint = config.mgk.fingerprint();
            let result = Explorer::new(state, &kernel, noise).and_then(|mut explorer| {
                explorer.continue_to(threshold, config.al.checkpoint_every, |s| {
                    CheckpointFile::from_state(s, &molecules, noise, &fingerprint).save(&out)
                })?;
                Ok(explorer.into_state())
            });
            save_kernel(&kernel, &config.pipeline.out_dir)?;
            print_state(&result?, &out);
        }
        Command::Simulate {
            molecules,
            out,
            noise,
        } => {
            if let Some(n) = noise {
                config.pipeline.noise_sigma = n;
            }
            let config = checked(config)?;
            let list = read_molecules_or_checkpoint(&molecules)?;
            let series =
                simulate_molecules(&list, config.pipeline.noise_sigma, config.pipeline.oracle_seed)?;
            let failed = series.iter().filter(|s| !s.qc.passed()).count();
            ensure_parent(&out)?;
            write_dataset(&out, &dataset_rows(&series))?;
            println!(
                "{} molecules simulated ({} failed QC), written to {}",
                series.len(),
                failed,
                out.display()
            );
        }
        Command::FitPredict { train, query, out } => {
            let config = checked(config)?;
            let preds = fit_predict_files(&config, &train, &query, &config.pipeline.out_dir)?;
            write_predictions(&out, &preds)?;
            println!("{} predictions written to {}", preds.len(), out.display());
        }
        Command::Evaluate { predictions, out } => {
            let rows = read_predictions(&predictions)?;
            let metrics = evaluate_predictions(&rows)?;
            for pm in &metrics {
                let m = &pm.metrics;
                println!(
                    "{:<14} n={:<6} rmse={:.6} mae={:.6} r2={:.6} ({})",
                    pm.property.name(),
                    m.n,
                    m.rmse,
                    m.mae,
                    m.r2,
                    pm.unit
                );
            }
            if let Some(out) = out {
                write_json(&out, &metrics)?;
            }
        }
        Command::CompareRandom => {
            let config = checked(config)?;
            let report = pipeline::compare_al_random(&config)?;
            for m in &report.median_rmse {
                println!(
                    "{:<14} median rmse  al={:.6}  random={:.6}",
                    m.property.name(),
                    m.al,
                    m.random
                );
            }
            println!(
                "active learning no worse on {} of {} properties",
                report.al_wins(),
                report.median_rmse.len()
            );
        }
        Command::RunAll => {
            let config = checked(config)?;
            let out = pipeline::run_alms(&config)?;
            for stage in &out.report.stages {
                println!(
                    "threshold {}: {} of {} molecules selected",
                    stage.threshold, stage.n_selected, out.report.n_molecules
                );
                for pm in &stage.properties {
                    println!(
                        "  {:<14} rmse={:.6} mae={:.6} r2={:.6}",
                        pm.property.name(),
                        pm.metrics.rmse,
                        pm.metrics.mae,
                        pm.metrics.r2
                    );
                }
            }
            println!("report written to {}", config.pipeline.out_dir.join(pipeline::REPORT_FILE).display());
        }
    }
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn read_molecules_or_checkpoint(path: &Path) -> Result<Vec<CanonicalSmiles>, Failure> {
    if path.extension().is_some_and(|e| e == "json") {
        let (molecules, state) = CheckpointFile::load(path)?.to_state()?;
        let mut selected: Vec<CanonicalSmiles> =
            state.selected().iter().map(|&i| molecules[i].clone()).collect();
        alms_core::molspace::sort_molecules(&mut selected);
        Ok(selected)
    } else {
        Ok(read_molecule_list(path)?)
    }
}

fn run_al(config: &PipelineConfig, molecules: Option<&Path>, checkpoint: &Path) -> Result<(), Failure> {
    let out_dir = &config.pipeline.out_dir;
    let noise = config.gpr.al_noise;
    let fingerprint = config.mgk.fingerprint();
    let (molecules, state) = if checkpoint.exists() {
        let file = CheckpointFile::load(checkpoint)?;
        if file.kernel_fingerprint != fingerprint {
            return Err(config_error(format!(
                "{} was written with other kernel hyperparameters",
                checkpoint.display()
            )));
        }
        log::info!("resuming from {}", checkpoint.display());
        file.to_state()?
    } else {
        let mut list = match molecules {
            Some(path) => read_molecule_list(path)?,
            None => {
                let p = &config.pipeline;
                enumerate_stage(p.min_carbons, p.max_carbons, out_dir)?.0
            }
        };
        alms_core::molspace::sort_molecules(&mut list);
        let al = &config.al;
        let state = AlState::init(list.len(), al.thresholds[0], al.batch, al.seed)?;
        (list, state)
    };
    ensure_parent(checkpoint)?;
    let kernel = open_kernel(molecules.clone(), &config.mgk, out_dir)?;
    let result = Explorer::new(state, &kernel, noise).and_then(|mut explorer| {
        explorer.run(config.al.checkpoint_every, |s| {
            CheckpointFile::from_state(s, &molecules, noise, &fingerprint).save(checkpoint)
        })?;
        Ok(explorer.into_state())
    });
    save_kernel(&kernel, out_dir)?;
    print_state(&result?, checkpoint);
    Ok(())
}

fn print_state(state: &AlState, checkpoint: &Path) {
    println!(
        "threshold {}: {} selected, {} abandoned of {} molecules after {} iterations; checkpoint {}",
        state.threshold(),
        state.selected().len(),
        state.abandoned().len(),
        state.n_molecules(),
        state.iteration(),
        checkpoint.display()
    );
}
