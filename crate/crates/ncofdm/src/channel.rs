//! Tapped-delay-line Rayleigh fading and AWGN.
//!
//! Path delays are quantized to the sample grid, per-path average powers are
//! normalized to unit total, and complex gains are drawn once per frame
//! (block fading). RNG streams are derived counter-style from a master seed
//! so Monte Carlo runs reproduce exactly regardless of scheduling.

use crate::waveform::{OfdmConfig, SampleBlock};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("noise variance must be nonnegative, got {0}")]
    NegativeVariance(f64),
    #[error("block of {len} samples is shorter than the maximum path delay {delay}")]
    BlockTooShort { len: usize, delay: usize },
    #[error("profile arrays are empty or of different lengths")]
    BadProfile,
}

/// Multipath power-delay profile quantized to the sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    /// Per-path excess delay in nanoseconds, nondecreasing, first entry 0.
    pub delays_ns: Vec<f64>,
    /// Per-path average relative power in dB.
    pub powers_db: Vec<f64>,
    /// Delays rounded to samples for the given configuration.
    pub delays_samples: Vec<usize>,
    /// Linear average powers normalized to unit total.
    pub powers_lin: Vec<f64>,
}

impl ChannelProfile {
    /// Quantize a raw profile onto the sample grid of `cfg`.
    pub fn from_arrays(
        delays_ns: &[f64],
        powers_db: &[f64],
        cfg: &OfdmConfig,
    ) -> Result<Self, ChannelError> {
        if delays_ns.is_empty() || delays_ns.len() != powers_db.len() {
            return Err(ChannelError::BadProfile);
        }
        if delays_ns[0] != 0.0 || delays_ns.windows(2).any(|w| w[1] < w[0]) {
            return Err(ChannelError::BadProfile);
        }
        let t_samp_ns = cfg.sample_interval() * 1e9;
        let delays_samples: Vec<usize> =
            delays_ns.iter().map(|&d| (d / t_samp_ns).round() as usize).collect();
        let raw: Vec<f64> = powers_db.iter().map(|&p| 10f64.powf(p / 10.0)).collect();
        let total: f64 = raw.iter().sum();
        let powers_lin = raw.iter().map(|&p| p / total).collect();
        Ok(Self {
            delays_ns: delays_ns.to_vec(),
            powers_db: powers_db.to_vec(),
            delays_samples,
            powers_lin,
        })
    }

    /// Ideal single-path channel (unit gain, zero delay).
    pub fn single_path(cfg: &OfdmConfig) -> Self {
        Self::from_arrays(&[0.0], &[0.0], cfg).unwrap()
    }

    pub fn path_count(&self) -> usize {
        self.delays_samples.len()
    }

    pub fn max_delay_samples(&self) -> usize {
        *self.delays_samples.iter().max().unwrap()
    }

    /// Total average power (1.0 after normalization).
    pub fn total_power(&self) -> f64 {
        self.powers_lin.iter().sum()
    }

    /// True when the delay spread exceeds the CP, i.e. the link operates in
    /// an inter-symbol-interference regime.
    pub fn exceeds_cp(&self, cfg: &OfdmConfig) -> bool {
        self.max_delay_samples() >= cfg.cp_len
    }
}

/// Extended Vehicular A profile, quantized for `cfg`.
pub fn eva_profile(cfg: &OfdmConfig) -> ChannelProfile {
    let delays = [0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0];
    let powers = [0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9];
    ChannelProfile::from_arrays(&delays, &powers, cfg).unwrap()
}

/// One block-fading draw of per-path complex gains.
#[derive(Debug, Clone)]
pub struct PathRealization {
    pub gains: Vec<C64>,
    /// Seed lineage for reproducibility.
    pub master_seed: u64,
    pub frame_index: u64,
}

/// Draw Rayleigh gains for one frame. Gains scale so `E|h_l|^2` equals the
/// profile power of each path.
pub fn draw_realization(
    profile: &ChannelProfile,
    master_seed: u64,
    frame_index: u64,
) -> PathRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(frame_index);
    let gains = profile
        .powers_lin
        .iter()
        .map(|&p| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * (p / 2.0).sqrt()
        })
        .collect();
    PathRealization { gains, master_seed, frame_index }
}

/// Deterministic all-ones realization for genie checks.
pub fn unit_realization(profile: &ChannelProfile) -> PathRealization {
    PathRealization {
        gains: profile.powers_lin.iter().map(|&p| C64::new(p.sqrt(), 0.0)).collect(),
        master_seed: 0,
        frame_index: 0,
    }
}

/// Delay-and-sum the block through the tapped delay line. Output has the
/// same length as the input; energy delayed past the end is dropped.
pub fn apply_multipath(
    block: &SampleBlock,
    profile: &ChannelProfile,
    realization: &PathRealization,
) -> Result<SampleBlock, ChannelError> {
    let n = block.samples.len();
    let max_d = profile.max_delay_samples();
    if n <= max_d {
        return Err(ChannelError::BlockTooShort { len: n, delay: max_d });
    }
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (&d, &h) in profile.delays_samples.iter().zip(&realization.gains) {
        if h == C64::new(0.0, 0.0) {
            continue;
        }
        for i in d..n {
            out[i] += h * block.samples[i - d];
        }
    }
    Ok(SampleBlock {
        samples: out,
        per_symbol: block.per_symbol,
        symbol_count: block.symbol_count,
        has_tail: block.has_tail,
        sample_rate: block.sample_rate,
    })
}

/// Add circular complex Gaussian noise with the given per-sample variance.
pub fn awgn(block: &SampleBlock, noise_var: f64, seed: u64) -> Result<SampleBlock, ChannelError> {
    if noise_var < 0.0 {
        return Err(ChannelError::NegativeVariance(noise_var));
    }
    let mut out = block.clone();
    if noise_var > 0.0 {
        let sigma = (noise_var / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in &mut out.samples {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *s += C64::new(re * sigma, im * sigma);
        }
    }
    Ok(out)
}

/// Channel frequency response at subcarrier `k`.
pub fn frequency_response(
    profile: &ChannelProfile,
    realization: &PathRealization,
    k: i32,
    cfg: &OfdmConfig,
) -> C64 {
    let m = cfg.fft_len as f64;
    profile
        .delays_samples
        .iter()
        .zip(&realization.gains)
        .map(|(&d, &h)| {
            h * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 * d as f64 / m)
        })
        .sum()
}
