//! Experiment configuration: JSON file plus CLI overrides.

use ncofdm::smoother::WindowKind;
use ncofdm::waveform::{Modulation, OfdmConfig};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("field {field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("invalid combination: {0}")]
    Combination(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Psd,
    Ber,
    Sinr,
    Complexity,
    Selftest,
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "psd" => Ok(Scenario::Psd),
            "ber" => Ok(Scenario::Ber),
            "sinr" => Ok(Scenario::Sinr),
            "complexity" => Ok(Scenario::Complexity),
            "selftest" => Ok(Scenario::Selftest),
            other => Err(format!("unknown scenario '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Plain,
    NcPrecoder,
    TdFull,
    TdLowint,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Plain => "plain",
            Scheme::NcPrecoder => "nc-precoder",
            Scheme::TdFull => "td-full",
            Scheme::TdLowint => "td-lowint",
        }
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "plain" => Ok(Scheme::Plain),
            "nc-precoder" | "precoder" => Ok(Scheme::NcPrecoder),
            "td-full" => Ok(Scheme::TdFull),
            "td-lowint" | "lowint" => Ok(Scheme::TdLowint),
            other => Err(format!("unknown scheme '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    Eva,
    SinglePath,
}

/// Fully resolved experiment description.
///
/// Unknown keys in the JSON are rejected; every field has a default except
/// the scenario itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: Option<Scenario>,
    /// Named dimension preset: "paper-sec5" or "desk".
    pub preset: String,
    /// Dimension overrides (applied after the preset).
    pub subcarriers: Option<usize>,
    pub fft_len: Option<usize>,
    pub cp_len: Option<usize>,
    pub symbol_duration: Option<f64>,
    pub modulation: String,
    pub schemes: Vec<Scheme>,
    pub n_orders: Vec<u32>,
    pub smooth_lens: Vec<usize>,
    pub window: String,
    pub channel: ChannelKind,
    /// Symbols per PSD run.
    pub symbols: usize,
    /// Monte Carlo frames per BER/SINR point.
    pub frames: usize,
    /// Data symbols per frame.
    pub frame_symbols: usize,
    pub snr_db: Vec<f64>,
    pub recovery_iterations: usize,
    pub welch_seg_len: usize,
    pub welch_overlap: usize,
    pub analytic_overlay: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 picks the rayon default.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            preset: "paper-sec5".into(),
            subcarriers: None,
            fft_len: None,
            cp_len: None,
            symbol_duration: None,
            modulation: "16qam".into(),
            schemes: vec![Scheme::Plain, Scheme::TdLowint],
            n_orders: vec![2],
            smooth_lens: vec![144],
            window: "blackman".into(),
            channel: ChannelKind::Eva,
            symbols: 2000,
            frames: 2000,
            frame_symbols: 8,
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            recovery_iterations: 2,
            welch_seg_len: 2048,
            welch_overlap: 512,
            analytic_overlay: true,
            seed: 1,
            out_dir: PathBuf::from("out"),
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    /// Parse "a:b:step" into a grid.
    pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>, ConfigError> {
        let invalid = |m: String| ConfigError::Invalid { field: "snr_db", message: m };
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid(format!("expected a:b:step, got '{s}'")));
        }
        let a: f64 = parts[0].parse().map_err(|e| invalid(format!("{e}")))?;
        let b: f64 = parts[1].parse().map_err(|e| invalid(format!("{e}")))?;
        let step: f64 = parts[2].parse().map_err(|e| invalid(format!("{e}")))?;
        if !(step > 0.0) || b < a {
            return Err(invalid("need b >= a and step > 0".into()));
        }
        let mut grid = Vec::new();
        let mut v = a;
        while v <= b + 1e-9 {
            grid.push(v);
            v += step;
        }
        Ok(grid)
    }

    pub fn modulation_resolved(&self) -> Result<Modulation, ConfigError> {
        self.modulation.parse().map_err(|_| ConfigError::Invalid {
            field: "modulation",
            message: format!("unsupported '{}'", self.modulation),
        })
    }

    pub fn window_resolved(&self) -> Result<WindowKind, ConfigError> {
        self.window.parse().map_err(|_| ConfigError::Invalid {
            field: "window",
            message: format!("unknown '{}'", self.window),
        })
    }

    /// Resolve the link dimensions from preset plus overrides.
    pub fn ofdm(&self) -> Result<OfdmConfig, ConfigError> {
        let base = match self.preset.as_str() {
            "paper-sec5" => OfdmConfig::paper_sec5(),
            "desk" => OfdmConfig::desk(),
            other => {
                return Err(ConfigError::Invalid {
                    field: "preset",
                    message: format!("unknown preset '{other}' (use paper-sec5 or desk)"),
                })
            }
        };
        let k = self.subcarriers.unwrap_or(base.subcarrier_count());
        let m = self.fft_len.unwrap_or(base.fft_len);
        let m_cp = self.cp_len.unwrap_or(base.cp_len);
        let t_s = self.symbol_duration.unwrap_or(base.symbol_duration);
        OfdmConfig::contiguous(k, m, m_cp, t_s).map_err(|e| ConfigError::Invalid {
            field: "preset",
            message: e.to_string(),
        })
    }

    /// Validate cross-field constraints; returns informational notes.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let scenario = self.scenario.ok_or(ConfigError::Invalid {
            field: "scenario",
            message: "missing (psd | ber | sinr | complexity | selftest)".into(),
        })?;
        let ofdm = self.ofdm()?;
        self.modulation_resolved()?;
        self.window_resolved()?;
        let mut notes = Vec::new();
        for &l in &self.smooth_lens {
            if l > ofdm.samples_per_symbol() {
                return Err(ConfigError::Invalid {
                    field: "smooth_lens",
                    message: format!(
                        "L={l} exceeds the CP-inclusive symbol of {} samples",
                        ofdm.samples_per_symbol()
                    ),
                });
            }
            if l > ofdm.cp_len + 1 {
                notes.push(format!(
                    "note: L={l} exceeds CP+1={}; delayed correction tails will interfere",
                    ofdm.cp_len + 1
                ));
            }
        }
        for &n in &self.n_orders {
            if n as usize + 1 > ofdm.subcarrier_count() {
                return Err(ConfigError::Invalid {
                    field: "n_orders",
                    message: format!("order {n} needs more subcarriers than {}", ofdm.subcarrier_count()),
                });
            }
        }
        if scenario == Scenario::Ber
            && self.schemes.contains(&Scheme::Plain)
            && self.recovery_iterations > 0
            && self.schemes.len() == 1
        {
            // Recovery on plain OFDM is an identity; flag a likely mistake.
            return Err(ConfigError::Combination(
                "recovery iterations apply to precoded schemes; valid schemes: \
                 plain, nc-precoder, td-full, td-lowint"
                    .into(),
            ));
        }
        if scenario == Scenario::Sinr && !self.schemes.iter().all(|s| *s == Scheme::TdLowint)
        {
            notes.push("note: the sinr scenario models td-lowint; other schemes are skipped".into());
        }
        Ok(notes)
    }
}
