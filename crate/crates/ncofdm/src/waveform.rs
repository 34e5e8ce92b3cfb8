//! Constellation mapping and baseband OFDM symbol generation.
//!
//! Conventions used across the crate:
//!
//! - The useful part of a symbol has `M` samples, preceded by an `M_cp`
//!   sample cyclic prefix; sample indices run over `m = -M_cp .. M-1`.
//! - The IFFT carries a `1/M` scale, `y(m) = (1/M) sum_r x_r e^{j2pi k_r m/M}`,
//!   so the useful-part energy of a symbol is `|x|^2 / M`.
//! - Derivatives are taken with respect to the dimensionless sample index
//!   `m`, contributing a factor `(j 2 pi k_r / M)^n` per order. Physical-time
//!   factors appear only in the analytic spectrum module.
//! - Negative subcarrier indices map to FFT bins `M + k`.

use crate::C64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("invalid OFDM configuration: {0}")]
    Config(String),
    #[error("vector length {got} does not match subcarrier count {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("bit count {got} is not a multiple of {per_symbol} (K * bits per constellation point)")]
    BitCount { got: usize, per_symbol: usize },
    #[error("sample block layout invalid: {0}")]
    Layout(String),
    #[error("blocks with differing layouts cannot be assembled")]
    MixedConfig,
}

/// Dimensional parameters of the OFDM link.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    /// Ordered subcarrier index set; entries in `[-M/2, M/2)`.
    pub subcarriers: Vec<i32>,
    /// Samples per useful symbol (FFT length), a power of two.
    pub fft_len: usize,
    /// Cyclic prefix length in samples.
    pub cp_len: usize,
    /// Useful symbol duration in seconds.
    pub symbol_duration: f64,
}

impl OfdmConfig {
    pub fn new(
        subcarriers: Vec<i32>,
        fft_len: usize,
        cp_len: usize,
        symbol_duration: f64,
    ) -> Result<Self, WaveformError> {
        if !fft_len.is_power_of_two() {
            return Err(WaveformError::Config(format!("fft_len {fft_len} is not a power of two")));
        }
        if cp_len >= fft_len {
            return Err(WaveformError::Config(format!(
                "cp_len {cp_len} must be smaller than fft_len {fft_len}"
            )));
        }
        if subcarriers.len() > fft_len {
            return Err(WaveformError::Config("more subcarriers than FFT bins".into()));
        }
        let half = (fft_len / 2) as i32;
        let mut seen = std::collections::HashSet::new();
        for &k in &subcarriers {
            if k < -half || k >= half {
                return Err(WaveformError::Config(format!("subcarrier {k} outside [-M/2, M/2)")));
            }
            if !seen.insert(k) {
                return Err(WaveformError::Config(format!("duplicate subcarrier {k}")));
            }
        }
        if !(symbol_duration > 0.0) {
            return Err(WaveformError::Config("symbol_duration must be positive".into()));
        }
        Ok(Self { subcarriers, fft_len, cp_len, symbol_duration })
    }

    /// Contiguous spectrum `{-K/2 .. K/2-1}` around DC.
    pub fn contiguous(
        k: usize,
        fft_len: usize,
        cp_len: usize,
        symbol_duration: f64,
    ) -> Result<Self, WaveformError> {
        let half = (k / 2) as i32;
        let subs = (-half..(k as i32 - half)).collect();
        Self::new(subs, fft_len, cp_len, symbol_duration)
    }

    /// 256 subcarriers on {-128..127}, M = 2048, CP 144 samples, Ts = 1/15 ms.
    pub fn paper_sec5() -> Self {
        Self::contiguous(256, 2048, 144, 1e-3 / 15.0).unwrap()
    }

    /// Small configuration with the same CP ratio ballpark for fast runs.
    pub fn desk() -> Self {
        Self::contiguous(64, 512, 36, 1e-3 / 15.0).unwrap()
    }

    pub fn subcarrier_count(&self) -> usize {
        self.subcarriers.len()
    }

    /// Sampling interval `T_samp = T_s / M` in seconds.
    pub fn sample_interval(&self) -> f64 {
        self.symbol_duration / self.fft_len as f64
    }

    /// Full symbol period `T = T_s + T_cp` in seconds.
    pub fn symbol_period(&self) -> f64 {
        self.symbol_duration * (1.0 + self.cp_ratio())
    }

    /// CP fraction `beta = M_cp / M`.
    pub fn cp_ratio(&self) -> f64 {
        self.cp_len as f64 / self.fft_len as f64
    }

    /// Boundary phase `phi = -2 pi beta`; `e^{j phi k}` is the phase a
    /// subcarrier accumulates from the symbol start to the CP start.
    pub fn boundary_phase(&self) -> f64 {
        -2.0 * PI * self.cp_ratio()
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.fft_len + self.cp_len
    }

    pub fn sample_rate(&self) -> f64 {
        self.fft_len as f64 / self.symbol_duration
    }

    /// FFT bin that carries subcarrier `k` (negative indices wrap).
    pub fn bin_of(&self, k: i32) -> usize {
        let m = self.fft_len as i32;
        (((k % m) + m) % m) as usize
    }
}

/// Square QAM constellations with canonical Gray labeling and unit average
/// energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    fn bits_per_axis(&self) -> usize {
        self.bits_per_symbol() / 2
    }

    fn levels_per_axis(&self) -> usize {
        1 << self.bits_per_axis()
    }

    /// Amplitude normalization so the full alphabet has unit mean energy.
    fn axis_scale(&self) -> f64 {
        let lv = self.levels_per_axis() as f64;
        // Mean of (2v - (L-1))^2 over v = 0..L-1 is (L^2 - 1)/3 per axis.
        (2.0 * (lv * lv - 1.0) / 3.0).sqrt().recip()
    }

    /// Map `bits_per_axis` Gray-labeled bits to a PAM level.
    fn gray_bits_to_level(&self, bits: &[u8]) -> f64 {
        let mut code: usize = 0;
        for &b in bits {
            code = (code << 1) | (b as usize & 1);
        }
        // Inverse Gray code (prefix xor).
        let mut level = 0usize;
        let mut g = code;
        while g > 0 {
            level ^= g;
            g >>= 1;
        }
        let lv = self.levels_per_axis() as f64;
        (2.0 * level as f64 - (lv - 1.0)) * self.axis_scale()
    }

    /// Map a PAM level back to Gray bits (hard decision by nearest level).
    fn level_to_gray_bits(&self, amp: f64, out: &mut Vec<u8>) {
        let lv = self.levels_per_axis();
        let scaled = amp / self.axis_scale();
        let idx = (((scaled + (lv as f64 - 1.0)) / 2.0).round() as i64).clamp(0, lv as i64 - 1)
            as usize;
        let gray = idx ^ (idx >> 1);
        for bit in (0..self.bits_per_axis()).rev() {
            out.push(((gray >> bit) & 1) as u8);
        }
    }

    /// Map one constellation point from `bits_per_symbol` bits: first half of
    /// the bits selects the in-phase level, second half the quadrature level.
    pub fn map_point(&self, bits: &[u8]) -> C64 {
        assert_eq!(bits.len(), self.bits_per_symbol());
        let half = self.bits_per_axis();
        C64::new(self.gray_bits_to_level(&bits[..half]), self.gray_bits_to_level(&bits[half..]))
    }

    /// Nearest constellation point.
    pub fn slice(&self, z: C64) -> C64 {
        let mut bits = Vec::with_capacity(self.bits_per_symbol());
        self.level_to_gray_bits(z.re, &mut bits);
        self.level_to_gray_bits(z.im, &mut bits);
        self.map_point(&bits)
    }

    /// Hard-demap one received point to bits.
    pub fn demap_point(&self, z: C64, out: &mut Vec<u8>) {
        self.level_to_gray_bits(z.re, out);
        self.level_to_gray_bits(z.im, out);
    }

    /// Full constellation alphabet in bit order.
    pub fn alphabet(&self) -> Vec<C64> {
        let n = self.bits_per_symbol();
        (0..1usize << n)
            .map(|v| {
                let bits: Vec<u8> = (0..n).rev().map(|b| ((v >> b) & 1) as u8).collect();
                self.map_point(&bits)
            })
            .collect()
    }
}

impl std::str::FromStr for Modulation {
    type Err = WaveformError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" | "4qam" => Ok(Modulation::Qpsk),
            "16qam" | "qam16" => Ok(Modulation::Qam16),
            "64qam" | "qam64" => Ok(Modulation::Qam64),
            other => Err(WaveformError::Config(format!("unsupported constellation '{other}'"))),
        }
    }
}

/// Frequency-domain data: one length-K vector per OFDM symbol.
#[derive(Debug, Clone)]
pub struct SymbolGrid {
    pub symbols: Vec<Vec<C64>>,
    pub modulation: Modulation,
}

impl SymbolGrid {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Complex baseband samples of one or more CP-inclusive OFDM symbols.
#[derive(Debug, Clone)]
pub struct SampleBlock {
    pub samples: Vec<C64>,
    /// Samples per CP-inclusive symbol, `M_cp + M`.
    pub per_symbol: usize,
    pub symbol_count: usize,
    /// Set when a trailing smoother-tail block follows the data symbols.
    pub has_tail: bool,
    /// Samples per second, `M / T_s`.
    pub sample_rate: f64,
}

impl SampleBlock {
    pub fn new(
        samples: Vec<C64>,
        per_symbol: usize,
        symbol_count: usize,
        has_tail: bool,
        sample_rate: f64,
    ) -> Result<Self, WaveformError> {
        let blocks = symbol_count + usize::from(has_tail);
        if samples.len() != blocks * per_symbol {
            return Err(WaveformError::Layout(format!(
                "{} samples, expected {} blocks of {}",
                samples.len(),
                blocks,
                per_symbol
            )));
        }
        Ok(Self { samples, per_symbol, symbol_count, has_tail, sample_rate })
    }

    /// Samples of one CP-inclusive block (data symbol or trailing tail).
    pub fn block(&self, i: usize) -> &[C64] {
        &self.samples[i * self.per_symbol..(i + 1) * self.per_symbol]
    }

    pub fn block_count(&self) -> usize {
        self.symbol_count + usize::from(self.has_tail)
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// Reference phase applied inside [`eval_derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseRef {
    /// No extra phase: the plain symbol `y(m)`.
    None,
    /// Multiply each subcarrier term by `e^{j phi k}` (CP-start phase), as
    /// used by the smoother basis functions.
    CpStart,
}

fn fft_cache() -> &'static Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub(crate) fn plan_fft(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = fft_cache().lock().unwrap();
    cache
        .entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// Map a bit stream onto constellation symbols, K per OFDM symbol.
pub fn map_bits(
    bits: &[u8],
    modulation: Modulation,
    cfg: &OfdmConfig,
) -> Result<SymbolGrid, WaveformError> {
    let per_symbol = cfg.subcarrier_count() * modulation.bits_per_symbol();
    if per_symbol == 0 || bits.len() % per_symbol != 0 {
        return Err(WaveformError::BitCount { got: bits.len(), per_symbol });
    }
    let bps = modulation.bits_per_symbol();
    let symbols = bits
        .chunks_exact(per_symbol)
        .map(|chunk| chunk.chunks_exact(bps).map(|b| modulation.map_point(b)).collect())
        .collect();
    Ok(SymbolGrid { symbols, modulation })
}

/// Hard-demap a received grid back to bits.
pub fn demap_bits(grid: &[Vec<C64>], modulation: Modulation) -> Vec<u8> {
    let mut out = Vec::new();
    for symbol in grid {
        for &z in symbol {
            modulation.demap_point(z, &mut out);
        }
    }
    out
}

/// Useful-part samples of one symbol via the scaled inverse FFT.
pub(crate) fn useful_samples(x: &[C64], cfg: &OfdmConfig) -> Result<Vec<C64>, WaveformError> {
    if x.len() != cfg.subcarrier_count() {
        return Err(WaveformError::Dimension { got: x.len(), expected: cfg.subcarrier_count() });
    }
    let m = cfg.fft_len;
    let mut buf = vec![C64::new(0.0, 0.0); m];
    for (&k, &v) in cfg.subcarriers.iter().zip(x) {
        buf[cfg.bin_of(k)] = v;
    }
    plan_fft(m, true).process(&mut buf);
    let scale = 1.0 / m as f64;
    for v in &mut buf {
        *v *= scale;
    }
    Ok(buf)
}

/// Generate one CP-inclusive OFDM symbol.
pub fn modulate_symbol(x: &[C64], cfg: &OfdmConfig) -> Result<SampleBlock, WaveformError> {
    let useful = useful_samples(x, cfg)?;
    let m = cfg.fft_len;
    let mut samples = Vec::with_capacity(cfg.samples_per_symbol());
    samples.extend_from_slice(&useful[m - cfg.cp_len..]);
    samples.extend_from_slice(&useful);
    SampleBlock::new(samples, cfg.samples_per_symbol(), 1, false, cfg.sample_rate())
}

/// Generate a frame of CP-inclusive symbols.
pub fn modulate_frame(grid: &SymbolGrid, cfg: &OfdmConfig) -> Result<SampleBlock, WaveformError> {
    let blocks: Result<Vec<_>, _> =
        grid.symbols.iter().map(|x| modulate_symbol(x, cfg)).collect();
    assemble_frame(&blocks?)
}

/// Concatenate symbol blocks in order.
pub fn assemble_frame(blocks: &[SampleBlock]) -> Result<SampleBlock, WaveformError> {
    if blocks.is_empty() {
        return Err(WaveformError::Layout("no blocks to assemble".into()));
    }
    let per_symbol = blocks[0].per_symbol;
    let sample_rate = blocks[0].sample_rate;
    let mut samples = Vec::new();
    let mut symbol_count = 0;
    let mut has_tail = false;
    for (i, b) in blocks.iter().enumerate() {
        if b.per_symbol != per_symbol || b.sample_rate != sample_rate {
            return Err(WaveformError::MixedConfig);
        }
        if has_tail {
            // A tail block terminates a frame; nothing may follow it.
            return Err(WaveformError::Layout("tail block must be last".into()));
        }
        if b.has_tail && i + 1 != blocks.len() {
            return Err(WaveformError::Layout("tail block must be last".into()));
        }
        samples.extend_from_slice(&b.samples);
        symbol_count += b.symbol_count;
        has_tail = b.has_tail;
    }
    SampleBlock::new(samples, per_symbol, symbol_count, has_tail, sample_rate)
}

/// Analytic n-th derivative (with respect to the sample index) of the
/// continuous-time signal behind a frequency-domain vector, at a
/// possibly fractional sample position `m`.
pub fn eval_derivative(
    x: &[C64],
    order: u32,
    m: f64,
    phase: PhaseRef,
    cfg: &OfdmConfig,
) -> Result<C64, WaveformError> {
    if x.len() != cfg.subcarrier_count() {
        return Err(WaveformError::Dimension { got: x.len(), expected: cfg.subcarrier_count() });
    }
    let mm = cfg.fft_len as f64;
    let phi = cfg.boundary_phase();
    let mut acc = C64::new(0.0, 0.0);
    for (&k, &v) in cfg.subcarriers.iter().zip(x) {
        let kf = k as f64;
        let mut arg = 2.0 * PI * kf * m / mm;
        if phase == PhaseRef::CpStart {
            arg += phi * kf;
        }
        acc += v * kf.powi(order as i32) * C64::from_polar(1.0, arg);
    }
    let factor = C64::new(0.0, 2.0 * PI / mm).powu(order);
    Ok(acc * factor / mm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg_small() -> OfdmConfig {
        OfdmConfig::contiguous(16, 64, 8, 1e-3 / 15.0).unwrap()
    }

    fn random_symbol(cfg: &OfdmConfig, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..cfg.subcarrier_count())
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 2.0)
            .collect()
    }

    #[test]
    fn qam16_bits_0000_maps_to_corner() {
        // Canonical Gray table, unit average energy: 0000 -> (-3 - 3j)/sqrt(10).
        let p = Modulation::Qam16.map_point(&[0, 0, 0, 0]);
        let want = C64::new(-3.0, -3.0) / 10f64.sqrt();
        assert!((p - want).norm() < 1e-15);
    }

    #[test]
    fn alphabets_have_unit_average_energy() {
        for m in [Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64] {
            let alpha = m.alphabet();
            let mean: f64 = alpha.iter().map(|p| p.norm_sqr()).sum::<f64>() / alpha.len() as f64;
            assert!((mean - 1.0).abs() < 1e-12, "{m:?} mean energy {mean}");
        }
    }

    #[test]
    fn adjacent_constellation_levels_differ_in_one_bit() {
        // Hard-demap neighbours along one axis of 16-QAM and count bit flips.
        let m = Modulation::Qam16;
        let s = 1.0 / 10f64.sqrt();
        let levels = [-3.0 * s, -1.0 * s, 1.0 * s, 3.0 * s];
        let labels: Vec<Vec<u8>> = levels
            .iter()
            .map(|&a| {
                let mut bits = Vec::new();
                m.level_to_gray_bits(a, &mut bits);
                bits
            })
            .collect();
        for w in labels.windows(2) {
            let flips: usize = w[0].iter().zip(&w[1]).filter(|(a, b)| a != b).count();
            assert_eq!(flips, 1);
        }
    }

    #[test]
    fn map_demap_roundtrip() {
        let cfg = cfg_small();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64] {
            let n = cfg.subcarrier_count() * m.bits_per_symbol() * 3;
            let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
            let grid = map_bits(&bits, m, &cfg).unwrap();
            let back = demap_bits(&grid.symbols, m);
            assert_eq!(bits, back);
        }
    }

    #[test]
    fn map_bits_rejects_ragged_input() {
        let cfg = cfg_small();
        let err = map_bits(&[0, 1, 0], Modulation::Qam16, &cfg).unwrap_err();
        assert!(matches!(err, WaveformError::BitCount { .. }));
    }

    #[test]
    fn dc_subcarrier_gives_constant_block() {
        let cfg = cfg_small();
        let mut x = vec![C64::new(0.0, 0.0); cfg.subcarrier_count()];
        let dc = cfg.subcarriers.iter().position(|&k| k == 0).unwrap();
        x[dc] = C64::new(1.0, 0.0);
        let block = modulate_symbol(&x, &cfg).unwrap();
        let want = 1.0 / cfg.fft_len as f64;
        for &s in &block.samples {
            assert!((s - C64::new(want, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn cp_is_exact_copy_of_symbol_tail() {
        let cfg = cfg_small();
        let x = random_symbol(&cfg, 3);
        let block = modulate_symbol(&x, &cfg).unwrap();
        let (m, mcp) = (cfg.fft_len, cfg.cp_len);
        for i in 0..mcp {
            assert_eq!(block.samples[i], block.samples[i + m]);
        }
    }

    #[test]
    fn parseval_energy_matches() {
        let cfg = cfg_small();
        let x = random_symbol(&cfg, 11);
        let block = modulate_symbol(&x, &cfg).unwrap();
        let useful = &block.samples[cfg.cp_len..];
        let energy: f64 = useful.iter().map(|z| z.norm_sqr()).sum();
        let want = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / cfg.fft_len as f64;
        assert!((energy - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn unit_magnitude_grid_energy_is_k_over_m() {
        let cfg = cfg_small();
        let x: Vec<C64> =
            (0..cfg.subcarrier_count()).map(|i| C64::from_polar(1.0, 0.37 * i as f64)).collect();
        let block = modulate_symbol(&x, &cfg).unwrap();
        let energy: f64 = block.samples[cfg.cp_len..].iter().map(|z| z.norm_sqr()).sum();
        let want = cfg.subcarrier_count() as f64 / cfg.fft_len as f64;
        assert!((energy - want).abs() < 1e-12);
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let cfg = cfg_small();
        let x = random_symbol(&cfg, 23);
        let block = modulate_symbol(&x, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..8 {
            let m = rng.random_range(0..cfg.fft_len) as i64;
            // Brute-force evaluation of the modulation sum.
            let mut direct = C64::new(0.0, 0.0);
            for (&k, &v) in cfg.subcarriers.iter().zip(&x) {
                let arg = 2.0 * PI * k as f64 * m as f64 / cfg.fft_len as f64;
                direct += v * C64::from_polar(1.0, arg);
            }
            direct /= cfg.fft_len as f64;
            let got = block.samples[cfg.cp_len + m as usize];
            assert!((got - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn assemble_preserves_single_block() {
        let cfg = cfg_small();
        let x = random_symbol(&cfg, 5);
        let block = modulate_symbol(&x, &cfg).unwrap();
        let frame = assemble_frame(std::slice::from_ref(&block)).unwrap();
        assert_eq!(frame.samples, block.samples);
    }

    #[test]
    fn assemble_three_blocks_has_expected_layout() {
        let cfg = cfg_small();
        let blocks: Vec<SampleBlock> =
            (0..3).map(|i| modulate_symbol(&random_symbol(&cfg, i), &cfg).unwrap()).collect();
        let frame = assemble_frame(&blocks).unwrap();
        assert_eq!(frame.samples.len(), 3 * cfg.samples_per_symbol());
        assert_eq!(frame.symbol_count, 3);
        // Power accounting against direct accumulation.
        let direct: f64 = blocks.iter().flat_map(|b| b.samples.iter()).map(|z| z.norm_sqr()).sum();
        let total: f64 = frame.samples.iter().map(|z| z.norm_sqr()).sum();
        assert!((total - direct).abs() < 1e-12 * direct.max(1.0));
    }

    #[test]
    fn derivative_order_zero_matches_samples() {
        let cfg = cfg_small();
        let x = random_symbol(&cfg, 8);
        let block = modulate_symbol(&x, &cfg).unwrap();
        for m in [-(cfg.cp_len as i64), -1, 0, 5, cfg.fft_len as i64 - 1] {
            let v = eval_derivative(&x, 0, m as f64, PhaseRef::None, &cfg).unwrap();
            let idx = (m + cfg.cp_len as i64) as usize;
            assert!((v - block.samples[idx]).norm() < 1e-12 * v.norm().max(1e-6));
        }
    }

    #[test]
    fn derivative_of_dc_is_zero() {
        let cfg = cfg_small();
        let mut x = vec![C64::new(0.0, 0.0); cfg.subcarrier_count()];
        let dc = cfg.subcarriers.iter().position(|&k| k == 0).unwrap();
        x[dc] = C64::new(1.0, 0.0);
        let v0 = eval_derivative(&x, 0, 3.5, PhaseRef::None, &cfg).unwrap();
        let v1 = eval_derivative(&x, 1, 3.5, PhaseRef::None, &cfg).unwrap();
        assert!((v0 - C64::new(1.0 / cfg.fft_len as f64, 0.0)).norm() < 1e-15);
        assert!(v1.norm() < 1e-15);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let cfg = cfg_small();
        let x = random_symbol(&cfg, 13);
        let m = -(cfg.cp_len as f64);
        let h = 1e-3;
        let f = |mm: f64| eval_derivative(&x, 0, mm, PhaseRef::None, &cfg).unwrap();
        let fd = (f(m + h) - f(m) * 2.0 + f(m - h)) / (h * h);
        let exact = eval_derivative(&x, 2, m, PhaseRef::None, &cfg).unwrap();
        assert!((fd - exact).norm() <= 1e-6 * exact.norm());
    }

    #[test]
    fn cp_start_phase_equals_shift_by_cp() {
        let cfg = cfg_small();
        let x = random_symbol(&cfg, 17);
        // e^{j phi k} e^{j 2 pi k m / M} == e^{j 2 pi k (m - M_cp) / M}
        let a = eval_derivative(&x, 1, 0.0, PhaseRef::CpStart, &cfg).unwrap();
        let b = eval_derivative(&x, 1, -(cfg.cp_len as f64), PhaseRef::None, &cfg).unwrap();
        assert!((a - b).norm() < 1e-12 * b.norm().max(1e-9));
    }

    proptest! {
        #[test]
        fn prop_map_demap_identity(seed in 0u64..1u64 << 48) {
            let cfg = cfg_small();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = Modulation::Qam16;
            let n = cfg.subcarrier_count() * m.bits_per_symbol();
            let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
            let grid = map_bits(&bits, m, &cfg).unwrap();
            prop_assert_eq!(demap_bits(&grid.symbols, m), bits);
        }

        #[test]
        fn prop_cp_property(seed in 0u64..1u64 << 48) {
            let cfg = cfg_small();
            let x = random_symbol(&cfg, seed);
            let block = modulate_symbol(&x, &cfg).unwrap();
            for i in 0..cfg.cp_len {
                prop_assert_eq!(block.samples[i], block.samples[i + cfg.fft_len]);
            }
        }
    }
}
