//! Receiver chain: CP removal, FFT demodulation, one-tap equalization,
//! decision-feedback interference recovery for precoded signals, and
//! BER/EVM measurement.
//!
//! The equalizer assumes known channel state; the point of the receiver here
//! is to isolate the effect of the smoothing / precoding interference.

use crate::channel::{frequency_response, ChannelProfile, PathRealization};
use crate::precoder::PrecoderMatrices;
use crate::waveform::{plan_fft, Modulation, OfdmConfig, SampleBlock, SymbolGrid, WaveformError};
use crate::C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReceiverError {
    #[error("sample block layout does not match the configuration: {0}")]
    Layout(String),
    #[error("grids have different shapes")]
    Shape,
    #[error("no bits to compare")]
    NoBits,
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

/// Per-measurement link quality report.
#[derive(Debug, Clone)]
pub struct RxReport {
    pub ber: f64,
    /// RMS error-vector magnitude, linear.
    pub evm: f64,
    pub sinr_est_db: f64,
    pub bits_compared: usize,
    pub bit_errors: usize,
}

/// Drop CPs and FFT every symbol back to the subcarrier grid.
///
/// A trailing smoother-tail block, when present, carries no data and is
/// skipped.
pub fn demodulate(block: &SampleBlock, cfg: &OfdmConfig) -> Result<Vec<Vec<C64>>, ReceiverError> {
    if block.per_symbol != cfg.samples_per_symbol() {
        return Err(ReceiverError::Layout(format!(
            "block stride {} != {}",
            block.per_symbol,
            cfg.samples_per_symbol()
        )));
    }
    let expected = block.block_count() * block.per_symbol;
    if block.samples.len() != expected {
        return Err(ReceiverError::Layout(format!(
            "{} samples, expected {expected}",
            block.samples.len()
        )));
    }
    let fft = plan_fft(cfg.fft_len, false);
    let mut out = Vec::with_capacity(block.symbol_count);
    let mut buf = vec![C64::new(0.0, 0.0); cfg.fft_len];
    for i in 0..block.symbol_count {
        let sym = block.block(i);
        buf.copy_from_slice(&sym[cfg.cp_len..]);
        fft.process(&mut buf);
        out.push(cfg.subcarriers.iter().map(|&k| buf[cfg.bin_of(k)]).collect());
    }
    Ok(out)
}

/// Full-spectrum demodulation of one symbol: all M bins, data bins unmoved.
/// Used by interference measurements that need total in-window energy.
pub fn demodulate_full(
    block: &SampleBlock,
    symbol: usize,
    cfg: &OfdmConfig,
) -> Result<Vec<C64>, ReceiverError> {
    if block.per_symbol != cfg.samples_per_symbol() {
        return Err(ReceiverError::Layout("stride mismatch".into()));
    }
    let fft = plan_fft(cfg.fft_len, false);
    let mut buf = vec![C64::new(0.0, 0.0); cfg.fft_len];
    buf.copy_from_slice(&block.block(symbol)[cfg.cp_len..]);
    fft.process(&mut buf);
    Ok(buf)
}

/// Zero-forcing one-tap equalization with known channel state. Returns the
/// equalized grid and the indices of erased bins (channel response below
/// working precision).
pub fn equalize_zf(
    grid: &[Vec<C64>],
    realization: &PathRealization,
    profile: &ChannelProfile,
    cfg: &OfdmConfig,
) -> (Vec<Vec<C64>>, Vec<(usize, usize)>) {
    let h: Vec<C64> = cfg
        .subcarriers
        .iter()
        .map(|&k| frequency_response(profile, realization, k, cfg))
        .collect();
    let mut erased = Vec::new();
    let out = grid
        .iter()
        .enumerate()
        .map(|(i, sym)| {
            sym.iter()
                .enumerate()
                .map(|(r, &v)| {
                    if h[r].norm() < 1e-12 {
                        erased.push((i, r));
                        C64::new(0.0, 0.0)
                    } else {
                        v / h[r]
                    }
                })
                .collect()
        })
        .collect();
    (out, erased)
}

/// Decision-feedback recovery for precoded symbols.
///
/// Per symbol the precoder memory term is removed using re-precoded previous
/// decisions, then `iterations` rounds of slice-and-restore add back the
/// projected component that precoding removed from the data. `iterations = 0`
/// bypasses the restore loop and slices the memory-free observation directly,
/// which leaves the projection distortion in place (error-floor baseline).
pub fn recover_iterative(
    grid: &[Vec<C64>],
    pm: &PrecoderMatrices,
    iterations: usize,
    modulation: Modulation,
) -> SymbolGrid {
    let mut decided = Vec::with_capacity(grid.len());
    let mut prev_coded: Option<Vec<C64>> = None;
    for rx in grid {
        let z: Vec<C64> = match &prev_coded {
            None => rx.clone(),
            Some(prev) => {
                let mem = pm.apply_projector(&pm.phase_back(prev));
                rx.iter().zip(mem).map(|(&v, m)| v - m).collect()
            }
        };
        let mut decision: Vec<C64> = z.iter().map(|&v| modulation.slice(v)).collect();
        for _ in 0..iterations {
            let restore = pm.apply_projector(&decision);
            decision = z.iter().zip(restore).map(|(&v, r)| modulation.slice(v + r)).collect();
        }
        // Re-precode the decisions to carry the recursion state forward.
        let coded = match &prev_coded {
            None => decision.clone(),
            Some(prev) => {
                let pd = pm.apply_projector(&decision);
                let mem = pm.apply_projector(&pm.phase_back(prev));
                decision.iter().zip(pd).zip(mem).map(|((&d, p), m)| d - p + m).collect()
            }
        };
        prev_coded = Some(coded);
        decided.push(decision);
    }
    SymbolGrid { symbols: decided, modulation }
}

/// Compare hard decisions on an equalized grid against the transmitted bits.
pub fn measure(
    tx_bits: &[u8],
    rx_grid: &[Vec<C64>],
    modulation: Modulation,
) -> Result<RxReport, ReceiverError> {
    let points: usize = rx_grid.iter().map(|s| s.len()).sum();
    let expected_bits = points * modulation.bits_per_symbol();
    if expected_bits == 0 {
        return Err(ReceiverError::NoBits);
    }
    if tx_bits.len() != expected_bits {
        return Err(ReceiverError::Shape);
    }
    let mut errors = 0usize;
    let mut err_power = 0.0f64;
    let mut rx_bits = Vec::with_capacity(modulation.bits_per_symbol());
    let mut bit_idx = 0usize;
    for sym in rx_grid {
        for &z in sym {
            rx_bits.clear();
            modulation.demap_point(z, &mut rx_bits);
            let tx_chunk = &tx_bits[bit_idx..bit_idx + rx_bits.len()];
            errors += rx_bits.iter().zip(tx_chunk).filter(|(a, b)| a != b).count();
            let tx_point = modulation.map_point(tx_chunk);
            err_power += (z - tx_point).norm_sqr();
            bit_idx += rx_bits.len();
        }
    }
    let evm = (err_power / points as f64).sqrt();
    let sinr_est_db = -20.0 * evm.max(f64::MIN_POSITIVE).log10();
    Ok(RxReport {
        ber: errors as f64 / expected_bits as f64,
        evm,
        sinr_est_db,
        bits_compared: expected_bits,
        bit_errors: errors,
    })
}
