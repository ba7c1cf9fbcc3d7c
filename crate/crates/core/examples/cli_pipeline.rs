//! The command pipeline run in-process: generate data and triplets, train,
//! evaluate, report masks and recombine, all under one output directory with
//! a manifest per command. Equivalent to calling the `opbn` binary with each
//! subcommand and the same `--set` overrides.

use opbn::cli::{run_command, Command, RunConfig, RunOptions};

fn main() -> anyhow::Result<()> {
    let out = std::env::temp_dir().join("opbn-pipeline");
    let overrides: Vec<(String, String)> = [
        ("out", out.to_str().expect("utf-8 temp dir")),
        ("model.latent_dim", "4"),
        ("train.steps", "1500"),
        ("train.log_every", "500"),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let cfg = RunConfig::resolve(None, &overrides)?;

    let steps = [
        Command::Gradcheck,
        Command::GenData,
        Command::GenTriplets,
        Command::Train,
        Command::Eval,
        Command::ReportMasks,
        Command::Sample,
        Command::Recombine,
    ];
    for cmd in steps {
        let summary = run_command(cmd, &cfg, &RunOptions::default())?;
        println!(
            "== {} ({:.1}s) -> {}",
            cmd.name(),
            summary.manifest.wall_clock_secs,
            summary.manifest_path.display()
        );
        if let Some(text) = summary.text {
            println!("{text}");
        }
    }
    Ok(())
}
