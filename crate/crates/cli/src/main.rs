//! `demandcast` command-line driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use demandcast::config::{RunConfig, CONFIG_ENV};
use demandcast::pipeline::{run_stage, RunMeta, Stage};
use demandcast::Error;

#[derive(Debug, Parser)]
#[command(name = "demandcast", version, about = "Forecast spectrum demand from crowdsourced network KPIs")]
struct Cli {
    /// gen, aggregate, cleanse, featurize, correlate, train, transfer,
    /// benchmark, report or all.
    #[arg(value_parser = parse_stage)]
    stage: Stage,

    /// JSON run configuration.
    #[arg(long, env = CONFIG_ENV)]
    config: PathBuf,

    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Master seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads. Results do not depend on this.
    #[arg(long)]
    jobs: Option<usize>,

    /// Config override as a dotted key, e.g. `--set models.1.lambda=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// 2 configuration, 3 missing stage input, 4 numeric failure, 1 anything else.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::MissingInput(_) => 3,
        Error::Numeric(_) | Error::NotConverged { .. } | Error::Undefined(_) | Error::InsufficientData(_) => 4,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<RunMeta, Error> {
    let mut overrides = Vec::with_capacity(cli.set.len() + 2);
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        overrides.push((k.trim().to_string(), v.to_string()));
    }
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(out) = &cli.out {
        let text = out.to_str().ok_or_else(|| Error::Config("--out must be valid UTF-8".into()))?;
        // Quoted so a numeric-looking path stays a string.
        let quoted = serde_json::to_string(text).map_err(Error::Json)?;
        overrides.push(("output_dir".into(), quoted));
    }
    let config = RunConfig::load(&cli.config, &overrides)?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    }
    run_stage(cli.stage, &config, &config.output_dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(meta) => {
            println!(
                "{}: wrote {} file(s); config {}",
                meta.stage,
                meta.outputs.len(),
                &meta.config_hash[..12]
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
