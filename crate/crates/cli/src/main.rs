use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use modelcomp::experiment::{Experiment, ExperimentConfig, ExperimentKind, Target};
use modelcomp::{Error, Result};

/// Amortized Bayesian model comparison experiments.
#[derive(Parser)]
#[command(name = "modelcomp", version)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `out_dir` in the configuration.
    #[arg(short, long, global = true, env = "MODELCOMP_OUT")]
    out: Option<PathBuf>,

    /// Worker threads for data-parallel loops.
    #[arg(short = 'j', long, global = true, env = "MODELCOMP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the fully resolved default configuration of an experiment kind.
    InitConfig {
        #[arg(value_parser = ["counts_easy", "counts_difficult", "channels"])]
        kind: String,
    },
    /// Simulate training and test sets.
    GenData,
    /// Build the PCA basis of a channel experiment.
    BuildPca,
    /// Train `classifier`, `posterior:<model>` or `all`.
    Train {
        #[arg(short, long, default_value = "all")]
        target: String,
    },
    /// Write model probabilities and posterior means for the test set.
    Predict,
    /// Run the posterior diagnostics.
    Validate,
    /// Compare the networks with rejection and SMC baselines.
    Compare,
    /// Summarize validation and comparison outputs.
    Report,
}

fn load(cli: &Cli) -> Result<Experiment> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Experiment::new(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {n} threads: {e}")))?;
    }
    if let Command::InitConfig { kind } = &cli.command {
        let kind: ExperimentKind = toml::Value::String(kind.clone())
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        print!("{}", ExperimentConfig::new(kind).to_toml()?);
        return Ok(());
    }
    let exp = load(&cli)?;
    info!("output directory {}", exp.out().display());
    match &cli.command {
        Command::InitConfig { .. } => unreachable!(),
        Command::GenData => exp.gen_data(),
        Command::BuildPca => exp.build_pca().map(|_| ()),
        Command::Train { target } => {
            let targets = if target == "all" {
                vec![Target::Classifier, Target::Posterior(0), Target::Posterior(1)]
            } else {
                vec![Target::parse(target, exp.config.kind)?]
            };
            for t in targets {
                let net = exp.train(t)?;
                info!("{}: final loss {:?}", t.file_stem(), net.loss_trace.last());
            }
            Ok(())
        }
        Command::Predict => exp.predict(),
        Command::Validate => {
            let r = exp.validate()?;
            for (k, v) in &r.metrics {
                println!("{k} = {v}");
            }
            Ok(())
        }
        Command::Compare => {
            for s in exp.compare()? {
                println!("{}: mae={:?} cross_entropy={:?} undefined={}", s.method, s.mae, s.cross_entropy, s.n_undefined);
            }
            Ok(())
        }
        Command::Report => exp.report().map(|r| print!("{r}")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::FAILURE
        }
    }
}
