//! Command-line front end: simulate, fit, bootstrap, and study workflows
//! driven by a key = value configuration file.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error,
//! 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use zifr_core::analysis::{bootstrap_band, run_study};
use zifr_core::error::Error;
use zifr_core::io::{
    band_rows, parse_config, write_beta_hat, write_dataset, write_metrics, write_run_meta,
    write_truth, BetaRow, Command, RunConfig,
};
use zifr_core::recovery::{
    activation_from_truth, estimate_p_logistic, estimate_p_proportion, ActivationEstimate,
    PMethod,
};
use zifr_core::sim::{simulate_dataset, Dataset, SimulatedTruth};

#[derive(Parser, Debug)]
#[command(
    name = "zifr",
    version,
    about = "Scalar-on-function regression with zero-inflated, error-prone functional predictors",
    long_about = "Simulates, fits, and evaluates scalar-on-function generalized linear models \
whose functional predictor is observed through zero-inflated, noisy replicate proxies. \
The run is described by a key = value configuration file; see the project README for the \
full key reference."
)]
struct Cli {
    /// Run configuration file (flat key = value with section prefixes).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Override the master seed from the configuration.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Override the output directory from the configuration.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Cap worker threads for studies and bootstrap (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits; anything else is usage
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = parse_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.sim.seed = seed;
    }
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    if let Some(threads) = cli.threads.or(config.threads) {
        // first builder wins; later calls in the same process are no-ops
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    std::fs::create_dir_all(&config.out_dir)?;

    match config.command {
        Command::Simulate => cmd_simulate(&config),
        Command::Fit => cmd_fit(&config),
        Command::Bootstrap => cmd_bootstrap(&config),
        Command::Study => cmd_study(&config),
    }
}

fn cmd_simulate(config: &RunConfig) -> Result<(), Error> {
    let (dataset, truth) = simulate_dataset(&config.sim)?;
    write_dataset(
        &dataset,
        &config.out_dir.join("w.csv"),
        &config.out_dir.join("subjects.csv"),
    )?;
    write_truth(&truth, &config.out_dir)?;
    write_run_meta(config, &config.out_dir)?;
    let zeros: usize = dataset
        .subjects
        .iter()
        .map(|s| s.w.iter().filter(|&&v| v == 0.0).count())
        .sum();
    let total: usize = dataset.subjects.iter().map(|s| s.w.len()).sum();
    println!(
        "simulated {} subjects x {} replicates on {} grid points (zero fraction {:.3}) -> {}",
        dataset.n_subjects(),
        config.sim.j,
        dataset.n_points(),
        zeros as f64 / total as f64,
        config.out_dir.display()
    );
    Ok(())
}

/// Load the configured data files or simulate a dataset, with truth
/// available only on the simulated route.
fn obtain_data(config: &RunConfig) -> Result<(Dataset, Option<SimulatedTruth>), Error> {
    match (&config.data_w, &config.data_subjects) {
        (Some(w), Some(s)) => {
            let ds = zifr_core::io::load_dataset(w, s, config.data_m)?;
            Ok((ds, None))
        }
        _ => {
            let (ds, truth) = simulate_dataset(&config.sim)?;
            Ok((ds, Some(truth)))
        }
    }
}

fn estimate_activation_for(
    config: &RunConfig,
    dataset: &Dataset,
    truth: Option<&SimulatedTruth>,
) -> Result<Option<ActivationEstimate>, Error> {
    if !config.method.needs_activation() {
        return Ok(None);
    }
    let act = match config.p_method {
        PMethod::LogisticPointwise => estimate_p_logistic(dataset, false)?,
        PMethod::LogisticSmoothed => estimate_p_logistic(dataset, true)?,
        PMethod::Proportion => estimate_p_proportion(dataset),
        PMethod::Truth => {
            let truth = truth.ok_or_else(|| {
                Error::Config("fit.p_method = truth requires simulated data".into())
            })?;
            activation_from_truth(&truth.p)
        }
    };
    Ok(Some(act))
}

fn cmd_fit(config: &RunConfig) -> Result<(), Error> {
    let (dataset, truth) = obtain_data(config)?;
    let activation = estimate_activation_for(config, &dataset, truth.as_ref())?;
    let curve = zifr_core::analysis::fit_beta_curve(
        &dataset,
        truth.as_ref(),
        config.method,
        activation.as_ref(),
        config.basis,
        config.sim.family,
    )?;
    let rows: Vec<BetaRow> = dataset
        .grid
        .points()
        .iter()
        .zip(&curve)
        .map(|(&t, &estimate)| BetaRow {
            method: config.method,
            t,
            estimate,
            lower: None,
            upper: None,
        })
        .collect();
    write_beta_hat(&rows, &config.out_dir.join("beta_hat.csv"))?;
    write_run_meta(config, &config.out_dir)?;
    println!(
        "fit {} ({}) on {} subjects -> {}",
        config.method.name(),
        config.basis.label(),
        dataset.n_subjects(),
        config.out_dir.display()
    );
    Ok(())
}

fn cmd_bootstrap(config: &RunConfig) -> Result<(), Error> {
    let (dataset, truth) = obtain_data(config)?;
    let band = bootstrap_band(
        &dataset,
        truth.as_ref(),
        config.method,
        config.basis,
        config.p_method,
        config.sim.family,
        config.bootstrap_b,
        config.alpha,
        config.seed,
    )?;
    write_beta_hat(
        &band_rows(&band, config.method),
        &config.out_dir.join("beta_hat.csv"),
    )?;
    write_run_meta(config, &config.out_dir)?;
    println!(
        "bootstrap {} resamples ({} failed) for {} at alpha {} -> {}",
        band.resamples,
        band.failures,
        config.method.name(),
        band.alpha,
        config.out_dir.display()
    );
    Ok(())
}

fn cmd_study(config: &RunConfig) -> Result<(), Error> {
    let study = config.study_config();
    study.validate()?;
    let entries = run_study(&study)?;
    write_metrics(&entries, &config.out_dir.join("metrics.csv"))?;
    write_run_meta(config, &config.out_dir)?;
    println!(
        "study: {} replicates, {} methods x {} bases, factor {} -> {}",
        study.replicates,
        study.methods.len(),
        study.bases.len(),
        study.sweep.factor_name(),
        config.out_dir.display()
    );
    for e in &entries {
        println!(
            "  {:<10} {:<10} {}={:<8} squared_bias={:.6} variance={:.6}",
            e.method.name(),
            e.basis.label(),
            e.factor,
            e.level,
            e.squared_bias,
            e.variance
        );
    }
    Ok(())
}
