#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;
mod presets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lvchemo::Execution;
use toml::{Table, Value};

use crate::commands::{Command, Context};
use crate::config::{parse_table, ExperimentConfig};
use crate::error::CliError;
use crate::output::{Collector, Results};
use crate::presets::Preset;

/// Experiments on a two-species competition model with a chemorepellent.
#[derive(Debug, Parser)]
#[command(name = "lvchemo", version)]
struct Cli {
    command: Command,
    /// TOML config; layered over the preset, if any.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Built-in configuration, e.g. fig1b or table2.
    #[arg(long)]
    preset: Option<String>,
    /// Override one config key, e.g. --set model.chi=-15.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run sweeps on one thread.
    #[arg(long)]
    sequential: bool,
}

struct Loaded {
    cfg: ExperimentConfig,
    preset: Option<&'static Preset>,
}

fn load(cli: &Cli) -> Result<Loaded, CliError> {
    let mut layers = Vec::new();
    let preset = cli.preset.as_deref().map(presets::find).transpose()?;
    if let Some(p) = preset {
        layers.push(parse_table(&presets::text(p), p.name)?);
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        layers.push(parse_table(&text, &path.display().to_string())?);
    }
    let cfg = ExperimentConfig::layered(&layers, &cli.set)?;
    Ok(Loaded { cfg, preset })
}

fn manifest(
    cli: &Cli,
    loaded: &Loaded,
    results: &Results,
    files: &[String],
    error: Option<&CliError>,
) -> Result<Vec<u8>, CliError> {
    let mut run = Table::new();
    run.insert("command".into(), Value::String(cli.command.to_string()));
    run.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    if let Some(p) = loaded.preset {
        run.insert("preset".into(), Value::String(p.name.into()));
        run.insert("preset_command".into(), Value::String(p.command.into()));
        run.insert("target".into(), Value::String(p.target.into()));
        run.insert("tolerance".into(), Value::String(p.tolerance.into()));
    }
    run.insert("status".into(), Value::String(error.map_or("ok", |e| e.kind()).into()));
    run.insert(
        "outputs".into(),
        Value::Array(files.iter().cloned().map(Value::String).collect()),
    );
    let mut res = Table::new();
    for (k, v) in &results.entries {
        res.insert(k.clone(), v.clone());
    }
    let config = Value::try_from(&loaded.cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let mut doc = Table::new();
    doc.insert("run".into(), Value::Table(run));
    doc.insert("results".into(), Value::Table(res));
    doc.insert("config".into(), config);
    toml::to_string(&doc)
        .map(String::into_bytes)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn error_record(e: &CliError) -> Vec<u8> {
    let mut t = Table::new();
    t.insert("kind".into(), Value::String(e.kind().into()));
    t.insert("exit_code".into(), Value::Integer(e.exit_code() as i64));
    t.insert("message".into(), Value::String(e.to_string()));
    toml::to_string(&t).expect("flat table").into_bytes()
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let loaded = match load(cli) {
        Ok(l) => l,
        Err(e) => {
            std::fs::create_dir_all(&cli.out)?;
            std::fs::write(cli.out.join("error.toml"), error_record(&e))?;
            return Err(e);
        }
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let mut out = Collector::default();
    let mut results = Results::default();
    let outcome = commands::run(
        cli.command,
        &mut Context {
            cfg: &loaded.cfg,
            exec,
            out: &mut out,
            results: &mut results,
        },
    );
    let mut files = out.names();
    files.push("manifest.toml".into());
    let manifest = manifest(cli, &loaded, &results, &files, outcome.as_ref().err())?;
    out.raw("manifest.toml", manifest);
    if let Err(e) = &outcome {
        out.raw("error.toml", error_record(e));
    }
    out.write_all(&cli.out)?;
    outcome
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    lvchemo::exec::init_workers_from_env();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lvchemo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
