mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsner_core::{Error, Result};

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "dsner", version, about = "Latent-noise audits and robust span NER training for distantly supervised corpora")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override any config key, e.g. `--set epochs=4`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    dump_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Observed-vs-gold transition matrix, noise areas and direct F1.
    Audit(commands::AuditArgs),
    /// Synthetic entity masking or label flipping.
    Mask(commands::MaskArgs),
    /// Train the span classifier.
    Train(commands::TrainArgs),
    /// K-fold confident learning and rank/prune.
    Select(commands::SelectArgs),
    /// Entity F1, or the noisy-entity threshold search.
    Eval(commands::EvalArgs),
    /// Align LLM tuple outputs onto tokenized sentences.
    Align(commands::AlignArgs),
}

fn resolve_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &global.config {
        config.load_file(path)?;
    }
    for item in &global.overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {item:?}")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = global.seed {
        config.seed = Some(seed);
    }
    if let Some(dir) = &global.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(n) = global.threads {
        config.threads = n;
    }
    if config.threads == 0 {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let mut config = resolve_config(&cli.global)?;
    if cli.global.dump_config {
        if let Command::Train(args) = &cli.command {
            args.apply(&mut config);
        }
        print!("{}", config.dump());
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    std::fs::create_dir_all(&config.out_dir)?;
    match cli.command {
        Command::Audit(a) => commands::audit(&config, &a),
        Command::Mask(a) => commands::mask(&config, &a),
        Command::Train(a) => commands::train(&mut config, &a),
        Command::Select(a) => commands::select(&config, &a),
        Command::Eval(a) => commands::eval(&config, &a),
        Command::Align(a) => commands::align(&config, &a),
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::TrainingAborted(_) | Error::NonFiniteGradient { .. } => "training_aborted",
        Error::Io(_) => "io",
        Error::Config(_) => "config",
        _ => "invalid_input",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.is_input_error() { 2 } else { 3 };
            let report = serde_json::json!({
                "error": error_kind(&e),
                "message": e.to_string(),
                "exit_code": code,
            });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}
