//! Closed-form power, interference and SINR accounting, plus the
//! operation-count comparison of the three transmitter schemes.
//!
//! Conventions: data symbols are unit-energy and uncorrelated, so a symbol's
//! useful-part energy is `K/M`. The correction coefficients are linear in
//! the data, giving the correction energy as a trace over precomputed
//! matrices. Noise enters in "per-symbol-window energy" units: the noise
//! term that corresponds to an input SNR of `s` (linear) is
//! `K/M * total_path_power / s`, which makes the SINR reduce exactly to the
//! input SNR when the interference term is zero.

use crate::channel::ChannelProfile;
use crate::linalg::CMat;
use crate::smoother::SmootherBasis;
use crate::C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("channel profile has zero total power")]
    ZeroChannelPower,
}

/// Expected energy of the correction signal over its full support,
/// `(2/M^2) tr(Pinv B2 B2^H Pinv^H Q^H Q)`.
pub fn smooth_power_trace(basis: &SmootherBasis) -> f64 {
    masked_trace(basis, None)
}

/// Same expectation computed without merging the two data-vector terms:
/// `tr(Pinv P1 P1^H Pinv^H Q^H Q) + tr(Pinv P2 P2^H Pinv^H Q^H Q)`.
/// Kept as an algebraic cross-check of the single-trace form.
pub fn smooth_power_two_traces(basis: &SmootherBasis) -> f64 {
    let g = basis.q.adjoint().mul(&basis.q);
    let mut total = 0.0;
    for p in [&basis.p1, &basis.p2] {
        let x = basis.boundary_inv.mul(p);
        let w = x.mul(&x.adjoint());
        total += w.mul(&g).trace().re;
    }
    total
}

fn masked_trace(basis: &SmootherBasis, keep_rows: Option<&[bool]>) -> f64 {
    let rows = basis.order as usize + 1;
    let x = basis.boundary_inv.mul(&basis.b2);
    let w = x.mul(&x.adjoint());
    let l = basis.q.rows();
    let mut g = CMat::zeros(rows, rows);
    for i in 0..l {
        if let Some(mask) = keep_rows {
            if !mask[i] {
                continue;
            }
        }
        for a in 0..rows {
            for b in 0..rows {
                g[(a, b)] += basis.q[(i, a)].conj() * basis.q[(i, b)];
            }
        }
    }
    let m2 = (basis.cfg.fft_len as f64).powi(2);
    2.0 / m2 * w.mul(&g).trace().re
}

/// Support rows of the correction that land inside the FFT window after a
/// delay of `delay` samples.
pub fn delayed_tail_mask(basis: &SmootherBasis, delay: usize) -> Vec<bool> {
    let cfg = &basis.cfg;
    let l = basis.window.len;
    (0..l)
        .map(|i| {
            let m = i as i64 - cfg.cp_len as i64 + delay as i64;
            m >= 0 && m < cfg.fft_len as i64
        })
        .collect()
}

/// Per-path and total delayed-tail interference energies.
#[derive(Debug, Clone)]
pub struct InterferencePowers {
    pub per_path: Vec<f64>,
    pub total: f64,
}

/// Expected interference energy from the correction tails that survive CP
/// removal, per path and in total.
pub fn interference_power(basis: &SmootherBasis, profile: &ChannelProfile) -> InterferencePowers {
    let per_path: Vec<f64> = profile
        .delays_samples
        .iter()
        .zip(&profile.powers_lin)
        .map(|(&d, &p)| {
            let mask = delayed_tail_mask(basis, d);
            p * masked_trace(basis, Some(&mask))
        })
        .collect();
    let total = per_path.iter().sum();
    InterferencePowers { per_path, total }
}

/// Noise term (symbol-window energy units) for a given input SNR in dB,
/// defined as received signal energy over noise energy.
pub fn noise_energy_for_snr(
    cfg: &crate::waveform::OfdmConfig,
    profile: &ChannelProfile,
    snr_db: f64,
) -> f64 {
    let k_over_m = cfg.subcarrier_count() as f64 / cfg.fft_len as f64;
    k_over_m * profile.total_power() / 10f64.powf(snr_db / 10.0)
}

/// Per-sample complex noise variance corresponding to a window-energy term.
pub fn per_sample_noise_variance(cfg: &crate::waveform::OfdmConfig, noise_energy: f64) -> f64 {
    noise_energy / cfg.fft_len as f64
}

/// Closed-form received SINR (linear) with smoothing interference.
pub fn theoretical_sinr(
    basis: &SmootherBasis,
    profile: &ChannelProfile,
    noise_energy: f64,
) -> Result<f64, MetricsError> {
    let ph = profile.total_power();
    if !(ph > 0.0) {
        return Err(MetricsError::ZeroChannelPower);
    }
    let cfg = &basis.cfg;
    let k_over_m = cfg.subcarrier_count() as f64 / cfg.fft_len as f64;
    let interference = interference_power(basis, profile).total;
    Ok(k_over_m / (noise_energy / ph + interference / ph))
}

/// One scheme/side row of the operation-count table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub scheme: &'static str,
    pub side: &'static str,
    pub real_mults: u64,
    pub real_adds: u64,
}

/// Complex-operation counts of the coefficient/overlap stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexOpRow {
    pub stage: &'static str,
    pub complex_mults: u64,
    pub complex_adds: u64,
}

/// Operation counts of the three schemes at given dimensions.
#[derive(Debug, Clone)]
pub struct ComplexityReport {
    pub k: u64,
    pub m: u64,
    pub n: u64,
    pub l: u64,
    pub recovery_iterations: u64,
    pub rows: Vec<ComplexityRow>,
    pub complex_ops: Vec<ComplexOpRow>,
}

/// Evaluate the closed-form operation counts.
pub fn complexity_table(k: u64, m: u64, n: u64, l: u64, l_r: u64) -> ComplexityReport {
    let rx_recovery = 16 * (n + 1) * k * l_r;
    let rows = vec![
        ComplexityRow {
            scheme: "freq-precoded",
            side: "transmitter",
            real_mults: 8 * k * k,
            real_adds: 8 * k * k,
        },
        ComplexityRow {
            scheme: "freq-precoded",
            side: "receiver",
            real_mults: rx_recovery,
            real_adds: rx_recovery,
        },
        ComplexityRow {
            scheme: "td-full-span",
            side: "transmitter",
            real_mults: 8 * n * k + 4 * (n + 1) * m,
            real_adds: 8 * n * k + 4 * (n + 1) * m,
        },
        ComplexityRow {
            scheme: "td-full-span",
            side: "receiver",
            real_mults: rx_recovery,
            real_adds: rx_recovery,
        },
        ComplexityRow {
            scheme: "td-low-interference",
            side: "transmitter",
            real_mults: 8 * n * k + 4 * (n + 1) * l,
            real_adds: 8 * n * k + 4 * (n + 1) * l,
        },
        ComplexityRow {
            scheme: "td-low-interference",
            side: "receiver",
            real_mults: 0,
            real_adds: 0,
        },
        ComplexityRow {
            scheme: "fft-reference",
            side: "transform",
            real_mults: 2 * m * m.ilog2() as u64,
            real_adds: 2 * m * m.ilog2() as u64,
        },
    ];
    let complex_ops = vec![
        ComplexOpRow {
            stage: "freq-precoder projection",
            complex_mults: 2 * k * k,
            complex_adds: 2 * k * k,
        },
        ComplexOpRow {
            stage: "td-full-span coefficients",
            complex_mults: 2 * n * k + (n + 1) * (2 * n + 1),
            complex_adds: 2 * n * k + n * (2 * n + 1),
        },
        ComplexOpRow {
            stage: "td-full-span overlap",
            complex_mults: m * (n + 1),
            complex_adds: m * (n + 1),
        },
        ComplexOpRow {
            stage: "td-low-interference coefficients",
            complex_mults: 2 * n * k + (n + 1) * (n + 1),
            complex_adds: 2 * n * k + n * n + 1,
        },
        ComplexOpRow {
            stage: "td-low-interference overlap",
            complex_mults: l * (n + 1),
            complex_adds: l * (n + 1),
        },
    ];
    ComplexityReport { k, m, n, l, recovery_iterations: l_r, rows, complex_ops }
}

/// Expected useful-part symbol energy `K/M`.
pub fn symbol_energy(cfg: &crate::waveform::OfdmConfig) -> f64 {
    cfg.subcarrier_count() as f64 / cfg.fft_len as f64
}

/// Monte Carlo mean of the correction energy over i.i.d. unit-energy symbol
/// pairs, using the closed-form coefficient path. Oracle counterpart of
/// [`smooth_power_trace`].
pub fn smooth_power_monte_carlo(
    basis: &SmootherBasis,
    modulation: crate::waveform::Modulation,
    pairs: usize,
    seed: u64,
) -> f64 {
    use rand::{Rng, SeedableRng};
    let alphabet = modulation.alphabet();
    let k = basis.cfg.subcarrier_count();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<C64> {
        (0..k).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
    };
    let mut acc = 0.0;
    for _ in 0..pairs {
        let x_prev = draw(&mut rng);
        let x = draw(&mut rng);
        let targets = basis.closed_form_targets(&x_prev).unwrap();
        let b = crate::smoother::compute_coefficients(&targets, &x, basis).unwrap();
        let w = basis.smooth_signal(&b);
        acc += w.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    acc / pairs as f64
}
