use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use eia::config::{parse_config, OutputFormat};
use eia::runner::execute;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Weak-probe EIA spectra, line-shape scans, spatial filtering and Ramsey narrowing.
#[derive(Debug, Parser)]
#[command(name = "eia", version)]
struct Cli {
    /// Scenario (spectrum_exact, spectrum_approx, at_rest, fwhm_scan,
    /// filter_curve, beam_filter, ramsey) or preset (fig2 … fig7).
    name: Option<String>,
    /// TOML file of flat keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set gamma_vcc=0.1 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Data file; the manifest goes next to it as <stem>.manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.name.is_none() && cli.config.is_none() {
        eprintln!("error: give a scenario or preset name, or --config PATH");
        return ExitCode::from(2);
    }
    let mut cfg = match parse_config(cli.name.as_deref(), cli.config.as_deref(), &cli.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(f) = cli.format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    let ext = match cfg.format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    let out = cli
        .out
        .or_else(|| cfg.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| {
            let stem = cli.name.clone().unwrap_or_else(|| cfg.scenario.name().to_string());
            PathBuf::from(format!("{stem}.{ext}"))
        });
    cfg.out = Some(out.display().to_string());
    match execute(&cfg, &out) {
        Ok((data, manifest)) => {
            println!("{}", data.display());
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
