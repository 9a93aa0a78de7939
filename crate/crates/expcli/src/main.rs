//! `impactor` experiment runner.
//!
//! Subcommands:
//! * `run <config> [--out DIR] [--jobs K] [--seed U64]` — execute the
//!   experiment described by a JSON config, writing CSV/SVG artifacts and a
//!   manifest into the output directory.
//! * `validate <config>` — check the config's invariants without running
//!   and list every violation.

mod config;
mod experiments;
mod svg;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "impactor", version, about = "Impact-oscillator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its artifacts.
    Run {
        /// Path to the JSON experiment config.
        config: PathBuf,
        /// Output directory for CSV/SVG artifacts and the manifest.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (default: all cores). Output bytes do not depend
        /// on this value.
        #[arg(long)]
        jobs: Option<usize>,
        /// Seed for initial-condition sampling only.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a config without running it; prints one violation per line.
    Validate {
        /// Path to the JSON experiment config.
        config: PathBuf,
    },
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    version: &'a str,
    seed: u64,
    jobs: Option<usize>,
    wall_time_s: f64,
    outputs: Vec<String>,
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    // serde_json reports line and column on malformed input.
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            jobs,
            seed,
        } => run(&config, &out, jobs, seed),
        Command::Validate { config } => validate(&config),
    }
}

fn validate(path: &Path) -> Result<()> {
    let config = load_config(path)?;
    let violations = config.validate();
    if violations.is_empty() {
        println!("ok: no violations");
    } else {
        println!("{} violation(s):", violations.len());
        for v in &violations {
            println!("  - {v}");
        }
    }
    Ok(())
}

fn run(path: &Path, out: &Path, jobs: Option<usize>, seed: u64) -> Result<()> {
    let config = load_config(path)?;
    let violations = config.validate();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("config violation: {v}");
        }
        anyhow::bail!(
            "{} config violation(s); run `validate` for details",
            violations.len()
        );
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = jobs {
        pool = pool.num_threads(k);
    }
    let pool = pool.build().context("building worker pool")?;

    let started = Instant::now();
    let outcome = pool.install(|| experiments::run_experiment(&config, seed))?;
    let wall_time_s = started.elapsed().as_secs_f64();

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut outputs = Vec::new();
    for artifact in &outcome.artifacts {
        let path = out.join(&artifact.name);
        std::fs::write(&path, &artifact.content)
            .with_context(|| format!("writing {}", path.display()))?;
        outputs.push(artifact.name.clone());
    }
    let manifest = Manifest {
        config: &config,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        jobs,
        wall_time_s,
        outputs,
    };
    let manifest_path = out.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", manifest_path.display()))?;

    for line in &outcome.summary {
        println!("{line}");
    }
    println!(
        "wrote {} artifact(s) + manifest.json to {}",
        outcome.artifacts.len(),
        out.display()
    );
    Ok(())
}
