//! Scenario runner behind the `ncofdm` binary.
//!
//! Everything here is deterministic for a fixed master seed: Monte Carlo
//! frames draw their RNG streams from counters, results are collected in
//! frame order before reduction, and CSV files are written with LF endings
//! and shortest-roundtrip float formatting, so repeated runs produce byte
//! identical outputs regardless of the worker count.

pub mod config;

use config::{ChannelKind, ConfigError, ExperimentConfig, Scenario, Scheme};
use ncofdm::channel::{
    apply_multipath, awgn, draw_realization, eva_profile, ChannelProfile,
};
use ncofdm::metrics::{
    complexity_table, interference_power, noise_energy_for_snr, per_sample_noise_variance,
    theoretical_sinr,
};
use ncofdm::precoder::{build_precoder, precode_sequence, PrecoderMatrices};
use ncofdm::receiver::{demodulate, demodulate_full, equalize_zf, measure, recover_iterative};
use ncofdm::smoother::{
    apply_smoothing, build_basis, SmootherBasis, SmoothingMode, WindowKind, WindowSpec,
};
use ncofdm::spectrum::{analytic_psd_in, welch_psd, CrossTerms, KernelDomain, SymbolEnsemble};
use ncofdm::waveform::{map_bits, modulate_frame, OfdmConfig, SampleBlock, SymbolGrid};
use ncofdm::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("simulation error: {0}")]
    Sim(String),
}

macro_rules! sim_err {
    ($e:expr) => {
        $e.map_err(|e| RunError::Sim(e.to_string()))?
    };
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: Scenario,
    pub config: ExperimentConfig,
    pub notes: Vec<String>,
    pub outputs: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub runtime_seconds: f64,
}

/// One transmitter variant under test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub scheme: Scheme,
    pub n_order: u32,
    pub smooth_len: usize,
}

impl Variant {
    pub fn file_tag(&self) -> String {
        match self.scheme {
            Scheme::Plain => "plain".into(),
            Scheme::NcPrecoder => format!("nc-precoder_N{}", self.n_order),
            Scheme::TdFull => format!("td-full_N{}", self.n_order),
            Scheme::TdLowint => format!("td-lowint_N{}_L{}", self.n_order, self.smooth_len),
        }
    }
}

/// Expand the scheme/N/L lists into concrete variants.
pub fn variants(cfg: &ExperimentConfig, ofdm: &OfdmConfig) -> Vec<Variant> {
    let mut out = Vec::new();
    for &scheme in &cfg.schemes {
        match scheme {
            Scheme::Plain => out.push(Variant { scheme, n_order: 0, smooth_len: 0 }),
            Scheme::NcPrecoder | Scheme::TdFull => {
                for &n in &cfg.n_orders {
                    out.push(Variant {
                        scheme,
                        n_order: n,
                        smooth_len: if scheme == Scheme::TdFull {
                            ofdm.samples_per_symbol()
                        } else {
                            0
                        },
                    });
                }
            }
            Scheme::TdLowint => {
                for &n in &cfg.n_orders {
                    for &l in &cfg.smooth_lens {
                        out.push(Variant { scheme, n_order: n, smooth_len: l });
                    }
                }
            }
        }
    }
    out
}

/// Prebuilt operators for one variant.
pub struct TxChain {
    pub variant: Variant,
    pub precoder: Option<PrecoderMatrices>,
    pub basis: Option<SmootherBasis>,
}

impl TxChain {
    pub fn build(
        variant: Variant,
        ofdm: &OfdmConfig,
        window: WindowKind,
    ) -> Result<Self, RunError> {
        let (precoder, basis) = match variant.scheme {
            Scheme::Plain => (None, None),
            Scheme::NcPrecoder => {
                (Some(sim_err!(build_precoder(ofdm, variant.n_order))), None)
            }
            Scheme::TdFull => {
                let spec = WindowSpec::new(WindowKind::AllOnes, ofdm.samples_per_symbol());
                (None, Some(sim_err!(build_basis(ofdm, variant.n_order, &spec))))
            }
            Scheme::TdLowint => {
                let spec = WindowSpec::new(window, variant.smooth_len);
                (None, Some(sim_err!(build_basis(ofdm, variant.n_order, &spec))))
            }
        };
        Ok(Self { variant, precoder, basis })
    }

    /// Transmit samples for a data grid.
    pub fn transmit(&self, grid: &SymbolGrid, ofdm: &OfdmConfig) -> Result<SampleBlock, RunError> {
        match self.variant.scheme {
            Scheme::Plain => Ok(sim_err!(modulate_frame(grid, ofdm))),
            Scheme::NcPrecoder => {
                let coded = precode_sequence(grid, self.precoder.as_ref().unwrap());
                Ok(sim_err!(modulate_frame(&coded, ofdm)))
            }
            Scheme::TdFull => {
                let frame = sim_err!(apply_smoothing(
                    grid,
                    self.basis.as_ref().unwrap(),
                    SmoothingMode::FullSpan
                ));
                Ok(frame.block)
            }
            Scheme::TdLowint => {
                let frame = sim_err!(apply_smoothing(
                    grid,
                    self.basis.as_ref().unwrap(),
                    SmoothingMode::LowInterference
                ));
                Ok(frame.block)
            }
        }
    }
}

fn random_bits(seed: u64, stream: u64, count: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..count).map(|_| rng.random_range(0..2) as u8).collect()
}

fn write_file(path: &Path, content: &str) -> Result<(), RunError> {
    std::fs::write(path, content)
        .map_err(|source| RunError::Io { path: path.display().to_string(), source })
}

fn fmt_f64(v: f64) -> String {
    // Shortest-roundtrip formatting: deterministic and exact.
    format!("{v}")
}

/// Top-level entry: run one scenario and write its outputs.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<Summary, RunError> {
    let start = Instant::now();
    let notes = cfg.validate()?;
    let scenario = cfg.scenario.unwrap();
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|source| RunError::Io { path: cfg.out_dir.display().to_string(), source })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| RunError::Sim(e.to_string()))?;
    let (outputs, verdicts) = pool.install(|| match scenario {
        Scenario::Psd => run_psd(cfg),
        Scenario::Ber => run_ber(cfg),
        Scenario::Sinr => run_sinr(cfg),
        Scenario::Complexity => run_complexity(cfg),
        Scenario::Selftest => run_selftest(cfg),
    })?;
    let summary = Summary {
        scenario,
        config: cfg.clone(),
        notes,
        outputs,
        verdicts,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    let path = cfg.out_dir.join("summary.json");
    write_file(&path, &serde_json::to_string_pretty(&summary).unwrap())?;
    Ok(summary)
}

fn psd_csv(psd: &ncofdm::spectrum::PsdEstimate) -> String {
    let mut s = String::from("freq_subcarriers,psd_db\n");
    for (f, v) in psd.freqs.iter().zip(&psd.psd_db) {
        let _ = writeln!(s, "{},{}", fmt_f64(*f), fmt_f64(*v));
    }
    s
}

fn run_psd(cfg: &ExperimentConfig) -> Result<(Vec<String>, Vec<Verdict>), RunError> {
    let ofdm = cfg.ofdm()?;
    let modulation = cfg.modulation_resolved()?;
    let window = cfg.window_resolved()?;
    let vars = variants(cfg, &ofdm);
    let mut outputs = Vec::new();
    let mut verdicts = Vec::new();
    let results: Vec<Result<Vec<(String, String, f64)>, RunError>> = vars
        .par_iter()
        .enumerate()
        .map(|(vi, var)| {
            let chain = TxChain::build(*var, &ofdm, window)?;
            let bits = random_bits(
                cfg.seed ^ 0x7073_6400,
                vi as u64,
                cfg.symbols * ofdm.subcarrier_count() * modulation.bits_per_symbol(),
            );
            let grid = sim_err!(map_bits(&bits, modulation, &ofdm));
            let tx = chain.transmit(&grid, &ofdm)?;
            let psd = sim_err!(welch_psd(&tx, cfg.welch_seg_len, cfg.welch_overlap, &ofdm));
            let mut files =
                vec![(format!("psd_{}.csv", var.file_tag()), psd_csv(&psd), psd.psd_db[0])];
            if cfg.analytic_overlay
                && matches!(var.scheme, Scheme::TdLowint | Scheme::Plain)
            {
                let ens = SymbolEnsemble { modulation, seed: cfg.seed ^ 0x616e_6100 };
                let analytic = sim_err!(analytic_psd_in(
                    &ofdm,
                    chain.basis.as_ref(),
                    &psd.freqs,
                    &ens,
                    0,
                    CrossTerms::Adjacent,
                    KernelDomain::Discrete,
                ));
                files.push((
                    format!("analytic_{}.csv", var.file_tag()),
                    psd_csv(&analytic),
                    analytic.psd_db[0],
                ));
            }
            Ok(files)
        })
        .collect();
    for r in results {
        for (name, content, _edge) in r? {
            let path = cfg.out_dir.join(&name);
            write_file(&path, &content)?;
            outputs.push(name);
        }
    }
    verdicts.push(Verdict {
        name: "psd outputs written".into(),
        passed: !outputs.is_empty(),
        detail: format!("{} files", outputs.len()),
    });
    Ok((outputs, verdicts))
}

/// Per-frame receiver outcome.
struct FrameOutcome {
    bit_errors: usize,
    bits: usize,
}

fn channel_profile(kind: ChannelKind, ofdm: &OfdmConfig) -> ChannelProfile {
    match kind {
        ChannelKind::Eva => eva_profile(ofdm),
        ChannelKind::SinglePath => ChannelProfile::single_path(ofdm),
    }
}

fn run_ber(cfg: &ExperimentConfig) -> Result<(Vec<String>, Vec<Verdict>), RunError> {
    let ofdm = cfg.ofdm()?;
    let modulation = cfg.modulation_resolved()?;
    let window = cfg.window_resolved()?;
    let profile = channel_profile(cfg.channel, &ofdm);
    let vars = variants(cfg, &ofdm);
    let chains: Vec<TxChain> =
        vars.iter().map(|v| TxChain::build(*v, &ofdm, window)).collect::<Result<_, _>>()?;
    let bits_per_frame =
        cfg.frame_symbols * ofdm.subcarrier_count() * modulation.bits_per_symbol();

    let mut csv = String::from("snr_db,scheme,n_order,smooth_len,ber,bits\n");
    let mut rows: Vec<(f64, String, f64, usize)> = Vec::new();
    for (si, &snr_db) in cfg.snr_db.iter().enumerate() {
        let noise_energy = noise_energy_for_snr(&ofdm, &profile, snr_db);
        let noise_var = per_sample_noise_variance(&ofdm, noise_energy);
        for chain in &chains {
            let outcomes: Vec<Result<FrameOutcome, RunError>> = (0..cfg.frames)
                .into_par_iter()
                .map(|fi| {
                    let stream = (si * cfg.frames + fi) as u64;
                    let bits = random_bits(cfg.seed ^ 0x6461_7400, stream, bits_per_frame);
                    let grid = sim_err!(map_bits(&bits, modulation, &ofdm));
                    let tx = chain.transmit(&grid, &ofdm)?;
                    let realization =
                        draw_realization(&profile, cfg.seed ^ 0x6368_6100, stream);
                    let faded = sim_err!(apply_multipath(&tx, &profile, &realization));
                    let noisy = sim_err!(awgn(
                        &faded,
                        noise_var,
                        splitmix(cfg.seed ^ 0x6e6f_6900, stream)
                    ));
                    let rx = sim_err!(demodulate(&noisy, &ofdm));
                    let (eq, _erased) = equalize_zf(&rx, &realization, &profile, &ofdm);
                    let decided: Vec<Vec<C64>> = match chain.variant.scheme {
                        Scheme::NcPrecoder => {
                            recover_iterative(
                                &eq,
                                chain.precoder.as_ref().unwrap(),
                                cfg.recovery_iterations,
                                modulation,
                            )
                            .symbols
                        }
                        _ => eq,
                    };
                    let report = sim_err!(measure(&bits, &decided, modulation));
                    Ok(FrameOutcome { bit_errors: report.bit_errors, bits: report.bits_compared })
                })
                .collect();
            let mut bit_errors = 0usize;
            let mut bits = 0usize;
            for o in outcomes {
                let o = o?;
                bit_errors += o.bit_errors;
                bits += o.bits;
            }
            let ber = bit_errors as f64 / bits as f64;
            rows.push((snr_db, chain.variant.file_tag(), ber, bits));
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                fmt_f64(snr_db),
                chain.variant.scheme.label(),
                chain.variant.n_order,
                chain.variant.smooth_len,
                fmt_f64(ber),
                bits
            );
        }
    }
    let path = cfg.out_dir.join("ber.csv");
    write_file(&path, &csv)?;
    Ok((
        vec!["ber.csv".into()],
        vec![Verdict {
            name: "ber sweep complete".into(),
            passed: true,
            detail: format!("{} rows", rows.len()),
        }],
    ))
}

fn splitmix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Accumulated signal and disturbance energies of one frame.
struct SinrOutcome {
    signal: f64,
    disturbance: f64,
}

fn run_sinr(cfg: &ExperimentConfig) -> Result<(Vec<String>, Vec<Verdict>), RunError> {
    let ofdm = cfg.ofdm()?;
    let modulation = cfg.modulation_resolved()?;
    let window = cfg.window_resolved()?;
    let profile = channel_profile(cfg.channel, &ofdm);
    let mut outputs = Vec::new();
    let mut verdicts = Vec::new();
    let mut combined = String::from(
        "scheme,n_order,smooth_len,snr_db,sinr_theory_db,sinr_sim_db,interference_total\n",
    );
    let m = ofdm.fft_len;
    for &n in &cfg.n_orders {
        for &l in &cfg.smooth_lens {
            let spec = WindowSpec::new(window, l);
            let basis = sim_err!(build_basis(&ofdm, n, &spec));
            let interference = interference_power(&basis, &profile);
            let mut csv = String::from("snr_db,sinr_theory_db,sinr_sim_db\n");
            let mut worst_gap = 0.0f64;
            for (si, &snr_db) in cfg.snr_db.iter().enumerate() {
                let noise_energy = noise_energy_for_snr(&ofdm, &profile, snr_db);
                let noise_var = per_sample_noise_variance(&ofdm, noise_energy);
                let theory = sim_err!(theoretical_sinr(&basis, &profile, noise_energy));
                let outcomes: Vec<Result<SinrOutcome, RunError>> = (0..cfg.frames)
                    .into_par_iter()
                    .map(|fi| {
                        let stream = (si * cfg.frames + fi) as u64;
                        let bits = random_bits(
                            cfg.seed ^ 0x6461_7400,
                            stream,
                            cfg.frame_symbols
                                * ofdm.subcarrier_count()
                                * modulation.bits_per_symbol(),
                        );
                        let grid = sim_err!(map_bits(&bits, modulation, &ofdm));
                        let frame =
                            sim_err!(apply_smoothing(&grid, &basis, SmoothingMode::LowInterference));
                        let realization =
                            draw_realization(&profile, cfg.seed ^ 0x6368_6100, stream);
                        let faded = sim_err!(apply_multipath(&frame.block, &profile, &realization));
                        let noisy = sim_err!(awgn(
                            &faded,
                            noise_var,
                            splitmix(cfg.seed ^ 0x6e6f_6900, stream)
                        ));
                        // Channel response on every FFT bin.
                        let h_all: Vec<C64> = (0..m)
                            .map(|b| {
                                let mut acc = C64::new(0.0, 0.0);
                                for (&d, &g) in profile
                                    .delays_samples
                                    .iter()
                                    .zip(&realization.gains)
                                {
                                    let arg = -2.0
                                        * std::f64::consts::PI
                                        * b as f64
                                        * d as f64
                                        / m as f64;
                                    acc += g * C64::from_polar(1.0, arg);
                                }
                                acc
                            })
                            .collect();
                        let mut signal = 0.0f64;
                        let mut disturbance = 0.0f64;
                        // Skip the first symbol: it smooths against silence
                        // and is excluded from the stationary average.
                        for sym in 1..grid.len() {
                            let bins = sim_err!(demodulate_full(&noisy, sym, &ofdm));
                            for (b, &x_bin) in bins.iter().enumerate() {
                                let tx = ofdm
                                    .subcarriers
                                    .iter()
                                    .position(|&kk| ofdm.bin_of(kk) == b)
                                    .map(|r| grid.symbols[sym][r])
                                    .unwrap_or(C64::new(0.0, 0.0));
                                let wanted = h_all[b] * tx;
                                if tx != C64::new(0.0, 0.0) {
                                    signal += wanted.norm_sqr();
                                }
                                disturbance += (x_bin - wanted).norm_sqr();
                            }
                        }
                        Ok(SinrOutcome { signal, disturbance })
                    })
                    .collect();
                let mut s_sum = 0.0f64;
                let mut e_sum = 0.0f64;
                for o in outcomes {
                    let o = o?;
                    s_sum += o.signal;
                    e_sum += o.disturbance;
                }
                let sim = s_sum / e_sum;
                let theory_db = 10.0 * theory.log10();
                let sim_db = 10.0 * sim.log10();
                worst_gap = worst_gap.max((theory_db - sim_db).abs());
                let _ = writeln!(
                    csv,
                    "{},{},{}",
                    fmt_f64(snr_db),
                    fmt_f64(theory_db),
                    fmt_f64(sim_db)
                );
                let _ = writeln!(
                    combined,
                    "td-lowint,{n},{l},{},{},{},{}",
                    fmt_f64(snr_db),
                    fmt_f64(theory_db),
                    fmt_f64(sim_db),
                    fmt_f64(interference.total)
                );
            }
            let name = format!("sinr_N{n}_L{l}.csv");
            write_file(&cfg.out_dir.join(&name), &csv)?;
            outputs.push(name);
            verdicts.push(Verdict {
                name: format!("sinr theory vs sim N={n} L={l}"),
                passed: worst_gap <= 0.3,
                detail: format!("worst gap {worst_gap:.3} dB"),
            });
        }
    }
    write_file(&cfg.out_dir.join("sinr_summary.csv"), &combined)?;
    outputs.push("sinr_summary.csv".into());
    Ok((outputs, verdicts))
}

fn run_complexity(cfg: &ExperimentConfig) -> Result<(Vec<String>, Vec<Verdict>), RunError> {
    let ofdm = cfg.ofdm()?;
    let n = *cfg.n_orders.first().unwrap_or(&2) as u64;
    let l = *cfg.smooth_lens.first().unwrap_or(&144) as u64;
    let report = complexity_table(
        ofdm.subcarrier_count() as u64,
        ofdm.fft_len as u64,
        n,
        l,
        cfg.recovery_iterations as u64,
    );
    let mut csv = String::from("scheme,side,real_mults,real_adds\n");
    for row in &report.rows {
        let _ = writeln!(csv, "{},{},{},{}", row.scheme, row.side, row.real_mults, row.real_adds);
    }
    write_file(&cfg.out_dir.join("complexity.csv"), &csv)?;
    let mut ops = String::from("stage,complex_mults,complex_adds\n");
    for row in &report.complex_ops {
        let _ = writeln!(ops, "{},{},{}", row.stage, row.complex_mults, row.complex_adds);
    }
    write_file(&cfg.out_dir.join("complexity_ops.csv"), &ops)?;
    let lowint_tx = report
        .rows
        .iter()
        .find(|r| r.scheme == "td-low-interference" && r.side == "transmitter")
        .unwrap()
        .real_mults;
    Ok((
        vec!["complexity.csv".into(), "complexity_ops.csv".into()],
        vec![Verdict {
            name: "complexity table".into(),
            passed: true,
            detail: format!("low-interference TX {lowint_tx} real multiplications"),
        }],
    ))
}

fn run_selftest(cfg: &ExperimentConfig) -> Result<(Vec<String>, Vec<Verdict>), RunError> {
    let results = ncofdm::selftest::run_quick(cfg.seed);
    let verdicts: Vec<Verdict> = results
        .iter()
        .map(|r| Verdict { name: r.name.into(), passed: r.passed, detail: r.note.clone() })
        .collect();
    let mut text = String::new();
    for v in &verdicts {
        let _ = writeln!(
            text,
            "{} {}{}",
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            if v.detail.is_empty() { String::new() } else { format!(" ({})", v.detail) }
        );
    }
    write_file(&cfg.out_dir.join("selftest.txt"), &text)?;
    if verdicts.iter().any(|v| !v.passed) {
        return Err(RunError::Sim("selftest failed".into()));
    }
    Ok((vec!["selftest.txt".into()], verdicts))
}

/// Output directory helper for tests.
pub fn read_output(cfg: &ExperimentConfig, name: &str) -> std::io::Result<String> {
    std::fs::read_to_string(PathBuf::from(&cfg.out_dir).join(name))
}
