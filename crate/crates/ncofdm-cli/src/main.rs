//! Command-line experiment runner for the N-continuous OFDM simulation.

use clap::Parser;
use ncofdm_cli::config::{ExperimentConfig, Scenario, Scheme};
use ncofdm_cli::run_scenario;
use std::path::PathBuf;
use std::process::ExitCode;

/// Link-level N-continuous OFDM experiments: PSD, BER, SINR, complexity.
#[derive(Debug, Parser)]
#[command(name = "ncofdm", version, about)]
struct Args {
    /// JSON experiment description; flags below override its fields.
    #[arg(long)]
    config: Option<String>,
    /// psd | ber | sinr | complexity | selftest
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Dimension preset: paper-sec5 | desk
    #[arg(long)]
    preset: Option<String>,
    /// Master seed for all derived RNG streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV/JSON results.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = automatic).
    #[arg(long)]
    workers: Option<usize>,
    /// Continuity orders, e.g. --n-order 1 --n-order 2.
    #[arg(long = "N", value_name = "ORDER")]
    n_order: Vec<u32>,
    /// Correction lengths in samples.
    #[arg(long = "L", value_name = "SAMPLES")]
    smooth_len: Vec<usize>,
    /// SNR grid "start:stop:step" in dB.
    #[arg(long)]
    snr: Option<String>,
    /// Symbols per PSD run.
    #[arg(long)]
    symbols: Option<usize>,
    /// Monte Carlo frames per point.
    #[arg(long)]
    frames: Option<usize>,
    /// Window kind: blackman | hanning | triangular.
    #[arg(long)]
    window: Option<String>,
    /// Schemes: plain | nc-precoder | td-full | td-lowint (repeatable or comma-separated).
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<Scheme>,
    /// Iterations of the decision-feedback recovery.
    #[arg(long)]
    recovery: Option<usize>,
    /// Channel: eva | single-path.
    #[arg(long)]
    channel: Option<String>,
}

fn build_config(args: Args) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.scenario {
        cfg.scenario = Some(s);
    }
    if let Some(p) = args.preset {
        cfg.preset = p;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.out_dir = o;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if !args.n_order.is_empty() {
        cfg.n_orders = args.n_order;
    }
    if !args.smooth_len.is_empty() {
        cfg.smooth_lens = args.smooth_len;
    }
    if let Some(snr) = &args.snr {
        cfg.snr_db = ExperimentConfig::parse_snr_grid(snr).map_err(|e| e.to_string())?;
    }
    if let Some(s) = args.symbols {
        cfg.symbols = s;
    }
    if let Some(f) = args.frames {
        cfg.frames = f;
    }
    if let Some(w) = args.window {
        cfg.window = w;
    }
    if !args.scheme.is_empty() {
        cfg.schemes = args.scheme;
    }
    if let Some(r) = args.recovery {
        cfg.recovery_iterations = r;
    }
    if let Some(c) = &args.channel {
        cfg.channel = match c.as_str() {
            "eva" => ncofdm_cli::config::ChannelKind::Eva,
            "single-path" => ncofdm_cli::config::ChannelKind::SinglePath,
            other => return Err(format!("unknown channel '{other}'")),
        };
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match build_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_scenario(&cfg) {
        Ok(summary) => {
            for note in &summary.notes {
                eprintln!("{note}");
            }
            for v in &summary.verdicts {
                println!(
                    "{} {}{}",
                    if v.passed { "PASS" } else { "FAIL" },
                    v.name,
                    if v.detail.is_empty() { String::new() } else { format!(" ({})", v.detail) }
                );
            }
            println!(
                "wrote {} file(s) to {} in {:.2} s",
                summary.outputs.len(),
                summary.config.out_dir.display(),
                summary.runtime_seconds
            );
            if summary.verdicts.iter().all(|v| v.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
