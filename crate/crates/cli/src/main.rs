//! `bracketflow <subcommand> [--config <path>] [--key value ...]`
//!
//! Exit status: 0 when the run finished and its checks passed, 2 when it
//! finished with failed checks, 1 on any error. A manifest is written to
//! `<out>.manifest.json` in every case.

mod commands;
mod config;
mod manifest;

use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::manifest::{Manifest, Outputs};

/// Environment variable capping the worker threads.
const THREADS_VAR: &str = "BRACKETFLOW_THREADS";

#[derive(Parser)]
#[command(name = "bracketflow", version, about = "Double bracket flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Tail {
    /// `--config <path>` and `--key value` overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0.., value_name = "ARGS")]
    args: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Light-cone inequality on random banded instances.
    Lemma1(Tail),
    /// Growth of the dimerized chain's length scale.
    DimerGrowth(Tail),
    /// Divergence-model tables and radius estimates.
    Series(Tail),
    /// Finite-size probe of the flowed spin chain.
    SpinProbe(Tail),
    /// Imaginary-time term norms and supports.
    Imagtime(Tail),
    /// Eigenoperator sweep over every string on n sites.
    Eigencheck(Tail),
}

impl Command {
    fn parts(&self) -> (&'static str, &[String]) {
        match self {
            Command::Lemma1(t) => ("lemma1", &t.args),
            Command::DimerGrowth(t) => ("dimer-growth", &t.args),
            Command::Series(t) => ("series", &t.args),
            Command::SpinProbe(t) => ("spin-probe", &t.args),
            Command::Imagtime(t) => ("imagtime", &t.args),
            Command::Eigencheck(t) => ("eigencheck", &t.args),
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .with_context(|| format!("{THREADS_VAR} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn run_typed<C, F>(merged: &Map<String, Value>, manifest: &mut Manifest, outputs: &mut Outputs, run: F) -> Result<Value>
where
    C: DeserializeOwned + Serialize,
    F: FnOnce(&C, &mut Outputs) -> Result<Value>,
{
    let cfg: C = config::typed(merged)?;
    manifest.config = serde_json::to_value(&cfg)?;
    run(&cfg, outputs)
}

fn dispatch(name: &str, merged: &Map<String, Value>, manifest: &mut Manifest, outputs: &mut Outputs) -> Result<Value> {
    use commands::*;
    match name {
        "lemma1" => run_typed::<Lemma1Config, _>(merged, manifest, outputs, lemma1),
        "dimer-growth" => run_typed::<DimerConfig, _>(merged, manifest, outputs, dimer_growth),
        "series" => run_typed::<SeriesConfig, _>(merged, manifest, outputs, series),
        "spin-probe" => run_typed::<ProbeConfig, _>(merged, manifest, outputs, spin_probe),
        "imagtime" => run_typed::<ImagtimeConfig, _>(merged, manifest, outputs, imagtime),
        "eigencheck" => run_typed::<EigencheckConfig, _>(merged, manifest, outputs, eigencheck),
        _ => unreachable!("clap only yields known subcommands"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, tail) = cli.command.parts();
    let start = Instant::now();
    let mut manifest = Manifest::new(name);
    let mut outputs = Outputs::new(format!("bracketflow-out/{name}"));

    let result = (|| -> Result<Value> {
        let overrides = config::parse_overrides(tail)?;
        let file = match &overrides.config {
            Some(path) => config::read_config_file(path)?,
            None => Map::new(),
        };
        let merged = config::merge(file, &overrides.pairs);
        manifest.config = Value::Object(merged.clone());
        // Locate the manifest before validation so failures are recorded too.
        if let Some(Value::String(out)) = merged.get("out") {
            outputs = Outputs::new(out);
        }
        configure_threads()?;
        dispatch(name, &merged, &mut manifest, &mut outputs)
    })();

    manifest.wall_time_s = start.elapsed().as_secs_f64();
    manifest.outputs = outputs.written().to_vec();
    let status = match result {
        Ok(summary) => {
            let passed = summary.get("passed").and_then(Value::as_bool).unwrap_or(false);
            manifest.summary = summary;
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            let text = format!("{e:#}");
            eprintln!("error: {text}");
            manifest.error = Some(text);
            ExitCode::FAILURE
        }
    };
    let path = outputs.path(".manifest.json");
    match manifest.save(&path) {
        Ok(()) => {
            println!("{}", serde_json::to_string(&manifest.summary).unwrap_or_default());
            eprintln!("manifest: {}", path.display());
            status
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
