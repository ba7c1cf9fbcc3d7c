//! The `opbn` command line: configuration, the pipeline commands and run
//! manifests.
//!
//! ```text
//! opbn gen-data     --config run.json --out runs/a
//! opbn gen-triplets --config run.json --out runs/a
//! opbn train        --config run.json --out runs/a --set train.steps=2000
//! opbn eval         --config run.json --out runs/a
//! ```
//!
//! Every command also accepts `--seed N` and repeatable `--set key=value`
//! overrides, and writes `manifests/<command>.json` under the output
//! directory.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    build_dataset, gradcheck_tiny, held_out_oracle_seed, run_command, write_run_manifest, Command, Layout, RunManifest,
    RunOptions, RunSummary, GRADCHECK_TOLERANCE,
};
pub use config::{DataKind, OracleMode, RunConfig};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "opbn", version, about = "Oracle-prioritized belief networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config file with flat dotted keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key (value parsed as JSON, else taken as a string).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (same as `--set out=DIR`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed (same as `--set seed=N`).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Generate or load the dataset and write train/test bundles.
    GenData(CommonArgs),
    /// Sample training and held-out triplets from the simulated oracle.
    GenTriplets(CommonArgs),
    /// Train the configured model and write a checkpoint and metrics log.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Continue from the existing checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Probe metrics and held-out triplet error; writes the evaluation report.
    Eval(CommonArgs),
    /// Decode latent samples from the prior to PGM images.
    Sample(CommonArgs),
    /// Splice two test images' latent codes along the learned masks.
    Recombine(CommonArgs),
    /// Print and save posterior-mean masks, active sets and overlaps.
    ReportMasks(CommonArgs),
    /// Finite-difference check of the configured objective on a tiny instance.
    Gradcheck(CommonArgs),
}

impl CliCommand {
    fn parts(&self) -> (Command, &CommonArgs, RunOptions) {
        let plain = RunOptions::default();
        match self {
            CliCommand::GenData(c) => (Command::GenData, c, plain),
            CliCommand::GenTriplets(c) => (Command::GenTriplets, c, plain),
            CliCommand::Train { common, resume } => (Command::Train, common, RunOptions { resume: *resume }),
            CliCommand::Eval(c) => (Command::Eval, c, plain),
            CliCommand::Sample(c) => (Command::Sample, c, plain),
            CliCommand::Recombine(c) => (Command::Recombine, c, plain),
            CliCommand::ReportMasks(c) => (Command::ReportMasks, c, plain),
            CliCommand::Gradcheck(c) => (Command::Gradcheck, c, plain),
        }
    }
}

/// Splits `key=value`.
pub fn parse_override(raw: &str) -> Result<(String, String)> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .ok_or_else(|| Error::Config {
            key: raw.into(),
            constraint: "override must look like key=value".into(),
        })
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut overrides = self.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
        if let Some(out) = &self.out {
            overrides.push(("out".into(), serde_json::to_string(out)?));
        }
        if let Some(seed) = self.seed {
            overrides.push(("seed".into(), seed.to_string()));
        }
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }
}

/// Parses the config for `cli` and runs the command.
pub fn run(cli: &Cli) -> Result<RunSummary> {
    let (cmd, common, opts) = cli.command.parts();
    let cfg = common.resolve()?;
    run_command(cmd, &cfg, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "opbn",
            "train",
            "--seed",
            "7",
            "--set",
            "train.steps=3",
            "--out",
            "x/y",
            "--resume",
        ])
        .unwrap();
        let (cmd, common, opts) = cli.command.parts();
        assert_eq!(cmd, Command::Train);
        assert!(opts.resume);
        let cfg = common.resolve().unwrap();
        assert_eq!((cfg.seed, cfg.train_steps), (7, 3));
        assert_eq!(cfg.out, PathBuf::from("x/y"));
    }

    #[test]
    fn every_command_parses() {
        for c in Command::ALL {
            assert!(Cli::try_parse_from(["opbn", c.name()]).is_ok(), "{}", c.name());
        }
    }

    #[test]
    fn malformed_override() {
        assert!(parse_override("novalue").is_err());
        assert_eq!(parse_override("a.b=1=2").unwrap(), ("a.b".into(), "1=2".into()));
    }
}
