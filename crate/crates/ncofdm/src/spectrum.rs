//! Power spectral density estimation and the closed-form asymptotic PSD of
//! smoothed transmit signals.
//!
//! Frequencies are expressed in subcarrier spacings throughout. Two routes
//! exist for the analytic spectrum of one symbol stream:
//!
//! - the derivative route, which evaluates the per-symbol transform of the
//!   N-th derivative and divides by `(j 2 pi f)^N`; each per-symbol factor
//!   then decays like `f^{-(N+1)}` in amplitude, which keeps far-sidelobe
//!   evaluation well conditioned;
//! - the direct route (plain per-symbol transform), used near DC where the
//!   `(k/f)^N` weights of the derivative route blow up.
//!
//! The data symbols are uncorrelated but the correction coefficients tie
//! each symbol to its predecessor, so the stationary PSD is
//! `c0(f) + 2 Re{ c1(f) e^{-j 2 pi f T} }` with `c0 = E|F_i|^2` and
//! `c1 = E{F_{i+1} F_i^*}`. Dropping `c1` gives the pure per-transition
//! ensemble average; with it the expression is the exact stationary PSD,
//! and both routes agree at every frequency.

use crate::smoother::{SmootherBasis, WindowKind};
use crate::waveform::{plan_fft, Modulation, OfdmConfig, SampleBlock};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("segment of {seg} samples exceeds the block length {len}")]
    SegmentTooLong { seg: usize, len: usize },
    #[error("overlap {overlap} must be smaller than the segment length {seg}")]
    BadOverlap { overlap: usize, seg: usize },
    #[error("window kind {0:?} has no closed-form spectrum")]
    UnsupportedWindow(WindowKind),
    #[error("too few envelope points ({got}) between {f_lo} and {f_hi}")]
    TooFewPoints { got: usize, f_lo: f64, f_hi: f64 },
}

/// Estimation parameters carried alongside a PSD.
#[derive(Debug, Clone, PartialEq)]
pub enum PsdParams {
    Welch { seg_len: usize, overlap: usize, segments: usize, mean_power: f64 },
    Analytic { order: u32, draws: usize, cross_terms: CrossTerms },
}

/// Peak-normalized power spectral density over a frequency axis in units of
/// the subcarrier spacing.
#[derive(Debug, Clone)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    pub psd_db: Vec<f64>,
    pub params: PsdParams,
}

impl PsdEstimate {
    fn from_linear(freqs: Vec<f64>, mut lin: Vec<f64>, params: PsdParams) -> Self {
        let peak = lin.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for v in &mut lin {
            *v = (*v / peak).max(1e-30);
        }
        let psd_db = lin.iter().map(|v| 10.0 * v.log10()).collect();
        Self { freqs, psd_db, params }
    }

    /// Value at the frequency bin closest to `f`.
    pub fn value_at(&self, f: f64) -> f64 {
        let i = self
            .freqs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))
            .map(|(i, _)| i)
            .unwrap();
        self.psd_db[i]
    }
}

/// Welch averaged periodogram with a periodic Hanning window.
pub fn welch_psd(
    block: &SampleBlock,
    seg_len: usize,
    overlap: usize,
    cfg: &OfdmConfig,
) -> Result<PsdEstimate, SpectrumError> {
    let n = block.samples.len();
    if seg_len > n {
        return Err(SpectrumError::SegmentTooLong { seg: seg_len, len: n });
    }
    if overlap >= seg_len {
        return Err(SpectrumError::BadOverlap { overlap, seg: seg_len });
    }
    let window: Vec<f64> =
        (0..seg_len).map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / seg_len as f64).cos())).collect();
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = plan_fft(seg_len, false);
    let hop = seg_len - overlap;
    let mut acc = vec![0.0f64; seg_len];
    let mut buf = vec![C64::new(0.0, 0.0); seg_len];
    let mut segments = 0usize;
    let mut start = 0usize;
    while start + seg_len <= n {
        for (i, (s, w)) in block.samples[start..start + seg_len].iter().zip(&window).enumerate() {
            buf[i] = s * *w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = 1.0 / (segments as f64 * win_energy);
    let mut lin = vec![0.0f64; seg_len];
    let mut freqs = vec![0.0f64; seg_len];
    let df = cfg.fft_len as f64 / seg_len as f64;
    let half = seg_len / 2;
    for i in 0..seg_len {
        // fftshift: bin order -fs/2 .. fs/2.
        let src = (i + half) % seg_len;
        lin[i] = acc[src] * scale;
        freqs[i] = (i as f64 - half as f64) * df;
    }
    let mean_power = lin.iter().sum::<f64>() / seg_len as f64;
    Ok(PsdEstimate::from_linear(
        freqs,
        lin,
        PsdParams::Welch { seg_len, overlap, segments, mean_power },
    ))
}

/// Whether the stationary coupling between consecutive symbols enters the
/// analytic expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossTerms {
    /// Pure ensemble average over independent symbol transitions.
    Dropped,
    /// Include the adjacent-symbol correlation; exact stationary PSD.
    Adjacent,
}

/// Which per-symbol transform kernels the analytic expectation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelDomain {
    /// Continuous-time integrals (sinc and resonant window terms): the
    /// asymptotic closed form. Valid at any frequency, but it models the
    /// underlying continuous waveform, which departs from the sampled
    /// stream's folded spectrum near the Nyquist edge.
    Continuous,
    /// Discrete-time sums (Dirichlet kernels): exact for the sample stream,
    /// including aliasing; this is what a periodogram of the simulated
    /// signal converges to.
    Discrete,
}

/// I.i.d. data-symbol sampler for the ensemble expectation.
#[derive(Debug, Clone)]
pub struct SymbolEnsemble {
    pub modulation: Modulation,
    pub seed: u64,
}

fn sinc(x: f64) -> f64 {
    let y = PI * x;
    if y.abs() < 1e-8 {
        1.0 - y * y / 6.0
    } else {
        y.sin() / y
    }
}

/// Closed-form transform of the order-`nbar` window derivative over the
/// support, `integral g^(nbar)(m) e^{j 2 pi f_r m / M} dm` with `m` running
/// over the L support samples starting at the CP edge.
///
/// Resonances at `|f_r| = mult * rho * M` are evaluated by their analytic
/// limit branch.
pub fn window_tail_transform(
    basis: &SmootherBasis,
    nbar: u32,
    f_r: f64,
) -> Result<C64, SpectrumError> {
    let cfg = &basis.cfg;
    let (c0, comps) = basis
        .window
        .kind
        .cosine_series()
        .ok_or(SpectrumError::UnsupportedWindow(basis.window.kind))?;
    let t = basis.window.len as f64 - 1.0;
    let m = cfg.fft_len as f64;
    let omega = 2.0 * PI * f_r / m;
    let mu = t / m;
    let mut total = C64::new(0.0, 0.0);
    if nbar == 0 {
        total += c0 * t * sinc(mu * f_r) * C64::from_polar(1.0, PI * mu * f_r);
    }
    let (cos_psi, sin_psi) = match nbar % 4 {
        0 => (1.0, 0.0),
        1 => (0.0, 1.0),
        2 => (-1.0, 0.0),
        _ => (0.0, -1.0),
    };
    for &(amp, mult) in comps {
        let a = mult * PI / t;
        let scale = amp * a.powi(nbar as i32);
        let half_angle = omega * t / 2.0;
        let phase = C64::from_polar(1.0, half_angle);
        // mult odd: the component changes sign across the support
        // (cos branch); mult even: full period (sin branch).
        let odd = (mult as i64) % 2 != 0;
        let num = if odd {
            C64::new(2.0 * a * sin_psi, 2.0 * omega * cos_psi)
        } else {
            C64::new(2.0 * omega * cos_psi, -2.0 * a * sin_psi)
        };
        // Removable singularity at |omega| = a: switch to the first-order
        // limit branch when within the tolerance band.
        let resonant = (omega.abs() - a).abs() < 1e-6 * 2.0 * PI / m;
        let envelope = if resonant {
            let omega0 = a.copysign(omega);
            if odd {
                -(t / 2.0) * half_angle.sin() / (omega + omega0)
            } else {
                (t / 2.0) * half_angle.cos() / (omega + omega0)
            }
        } else {
            let trig = if odd { half_angle.cos() } else { half_angle.sin() };
            trig / (omega * omega - a * a)
        };
        total += phase * num * scale * envelope;
    }
    // Shift from support-local coordinates back to the CP start.
    Ok(total * C64::from_polar(1.0, -2.0 * PI * cfg.cp_ratio() * f_r))
}

/// Geometric sum `sum_{i=0}^{count-1} e^{j angle i}` for integer-indexed
/// samples; the angle reduces modulo 2 pi exactly, so the form is stable at
/// every frequency including alias multiples.
fn dirichlet_sum(angle: f64, count: usize) -> C64 {
    let reduced = angle - (angle / (2.0 * PI)).round() * 2.0 * PI;
    let n = count as f64;
    if reduced.abs() < 1e-9 {
        // Second-order limit around the peak.
        let phase = C64::from_polar(1.0, reduced * (n - 1.0) / 2.0);
        return phase * n * sinc(reduced * n / (2.0 * PI)) / sinc(reduced / (2.0 * PI));
    }
    C64::from_polar(1.0, reduced * (n - 1.0) / 2.0) * ((reduced * n / 2.0).sin()
        / (reduced / 2.0).sin())
}

/// Discrete transform of the sampled window over its support, shifted to the
/// CP-start origin.
fn window_tail_sum(basis: &SmootherBasis, f_r: f64) -> Result<C64, SpectrumError> {
    let cfg = &basis.cfg;
    let (c0, comps) = basis
        .window
        .kind
        .cosine_series()
        .ok_or(SpectrumError::UnsupportedWindow(basis.window.kind))?;
    let l = basis.window.len;
    let omega = 2.0 * PI * f_r / cfg.fft_len as f64;
    let mut total = c0 * dirichlet_sum(omega, l);
    for &(amp, mult) in comps {
        let a = mult * PI / (l as f64 - 1.0);
        total += 0.5 * amp * (dirichlet_sum(omega + a, l) + dirichlet_sum(omega - a, l));
    }
    Ok(total * C64::from_polar(1.0, -omega * cfg.cp_len as f64))
}

/// Per-frequency weight vectors: `F_i = alpha . x_i + gamma . x_{i-1}`.
struct FreqWeights {
    alpha: Vec<C64>,
    gamma: Vec<C64>,
    /// Per-coefficient weights of the correction term (used by the
    /// Monte Carlo path).
    data_term: Vec<C64>,
    coeff_term: Vec<C64>,
}

fn freq_weights(
    cfg: &OfdmConfig,
    basis: Option<&SmootherBasis>,
    nu: f64,
    domain: KernelDomain,
) -> Result<FreqWeights, SpectrumError> {
    let k = cfg.subcarrier_count();
    let beta = cfg.cp_ratio();
    let n_order = basis.map(|b| b.order).unwrap_or(0);
    let mf = cfg.fft_len as f64;
    // In the continuous domain, use the derivative route away from DC (well
    // conditioned in the far sidelobes) and the direct route near it. The
    // discrete kernels stay on the direct route: their cancellation depth is
    // bounded by the Nyquist range.
    let derivative_route = domain == KernelDomain::Continuous && nu.abs() > 0.5;
    let symbol_len = cfg.samples_per_symbol();
    let mut data_term = Vec::with_capacity(k);
    for &kr in &cfg.subcarriers {
        let kf = kr as f64;
        let f_r = kf - nu;
        let base = match domain {
            KernelDomain::Continuous => {
                (1.0 + beta)
                    * sinc(f_r * (1.0 + beta))
                    * C64::from_polar(1.0, PI * f_r * (1.0 - beta))
            }
            KernelDomain::Discrete => {
                let omega = 2.0 * PI * f_r / mf;
                dirichlet_sum(omega, symbol_len)
                    * C64::from_polar(1.0, -omega * cfg.cp_len as f64)
                    / mf
            }
        };
        let weight = if derivative_route { (kf / nu).powi(n_order as i32) } else { 1.0 };
        data_term.push(base * weight);
    }
    let (coeff_term, alpha, gamma) = match basis {
        None => (Vec::new(), data_term.clone(), vec![C64::new(0.0, 0.0); k]),
        Some(basis) => {
            let rows = basis.order as usize + 1;
            let jtwo_pi_over_m = C64::new(0.0, 2.0 * PI / mf);
            let mut u = vec![C64::new(0.0, 0.0); rows];
            if derivative_route {
                let nn = basis.order;
                for nbar in 0..=nn {
                    let i_nbar: Vec<C64> = cfg
                        .subcarriers
                        .iter()
                        .map(|&kr| window_tail_transform(basis, nbar, kr as f64 - nu))
                        .collect::<Result<_, _>>()?;
                    let binom = binomial(nn as usize, nbar as usize);
                    for n in 0..rows {
                        let power = n as i32 - nbar as i32;
                        let factor = jtwo_pi_over_m.powi(power) * binom;
                        let mut sum = C64::new(0.0, 0.0);
                        for (r, &kr) in cfg.subcarriers.iter().enumerate() {
                            let kf = kr as f64;
                            let kpow = kf.powi((nn + n as u32 - nbar) as i32);
                            sum += kpow * basis_phase(cfg, kr) * i_nbar[r];
                        }
                        u[n] += factor * sum / mf;
                    }
                }
                let nu_pow = nu.powi(nn as i32);
                for v in &mut u {
                    *v /= nu_pow;
                }
            } else {
                let i0: Vec<C64> = match domain {
                    KernelDomain::Continuous => cfg
                        .subcarriers
                        .iter()
                        .map(|&kr| window_tail_transform(basis, 0, kr as f64 - nu))
                        .collect::<Result<_, _>>()?,
                    KernelDomain::Discrete => cfg
                        .subcarriers
                        .iter()
                        .map(|&kr| window_tail_sum(basis, kr as f64 - nu))
                        .collect::<Result<_, _>>()?,
                };
                for (n, v) in u.iter_mut().enumerate() {
                    let mut sum = C64::new(0.0, 0.0);
                    for (r, &kr) in cfg.subcarriers.iter().enumerate() {
                        let kf = kr as f64;
                        sum += kf.powi(n as i32) * basis_phase(cfg, kr) * i0[r];
                    }
                    *v = jtwo_pi_over_m.powu(n as u32) * sum / mf;
                }
            }
            // s = u^T Pinv, then gamma = s P1, alpha = data - s P2.
            let mut s = vec![C64::new(0.0, 0.0); rows];
            for j in 0..rows {
                for (n, &un) in u.iter().enumerate() {
                    s[j] += un * basis.boundary_inv[(n, j)];
                }
            }
            let mut gamma = vec![C64::new(0.0, 0.0); k];
            let mut alpha = data_term.clone();
            for r in 0..k {
                let mut g = C64::new(0.0, 0.0);
                let mut p = C64::new(0.0, 0.0);
                for (j, &sj) in s.iter().enumerate() {
                    g += sj * basis.p1[(j, r)];
                    p += sj * basis.p2[(j, r)];
                }
                gamma[r] = g;
                alpha[r] -= p;
            }
            (u, alpha, gamma)
        }
    };
    Ok(FreqWeights { alpha, gamma, data_term, coeff_term })
}

fn basis_phase(cfg: &OfdmConfig, kr: i32) -> C64 {
    C64::from_polar(1.0, -cfg.boundary_phase() * kr as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Closed-form or Monte Carlo evaluation of the asymptotic PSD of the
/// smoothed (or plain, with `basis = None`) transmit stream, with
/// continuous-time kernels.
///
/// `draws = 0` evaluates the second moments in closed form (uncorrelated
/// unit-energy data); `draws > 0` averages over that many sampled symbol
/// transitions, recomputing the correction coefficients per draw.
pub fn analytic_psd(
    cfg: &OfdmConfig,
    basis: Option<&SmootherBasis>,
    freqs: &[f64],
    ensemble: &SymbolEnsemble,
    draws: usize,
    cross_terms: CrossTerms,
) -> Result<PsdEstimate, SpectrumError> {
    analytic_psd_in(cfg, basis, freqs, ensemble, draws, cross_terms, KernelDomain::Continuous)
}

/// [`analytic_psd`] with an explicit kernel domain.
pub fn analytic_psd_in(
    cfg: &OfdmConfig,
    basis: Option<&SmootherBasis>,
    freqs: &[f64],
    ensemble: &SymbolEnsemble,
    draws: usize,
    cross_terms: CrossTerms,
    domain: KernelDomain,
) -> Result<PsdEstimate, SpectrumError> {
    let k = cfg.subcarrier_count();
    let beta = cfg.cp_ratio();
    let n_order = basis.map(|b| b.order).unwrap_or(0);
    // Correction coefficients per draw are frequency-independent.
    let mut draws_data: Vec<(Vec<C64>, Vec<C64>, Vec<C64>, Vec<C64>, Vec<C64>)> = Vec::new();
    if draws > 0 {
        let alphabet = ensemble.modulation.alphabet();
        for d in 0..draws {
            let mut rng = ChaCha8Rng::seed_from_u64(ensemble.seed);
            rng.set_stream(d as u64);
            let draw_x = |rng: &mut ChaCha8Rng| -> Vec<C64> {
                (0..k).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
            };
            let xa = draw_x(&mut rng);
            let xb = draw_x(&mut rng);
            let xc = draw_x(&mut rng);
            let (b1, b2) = match basis {
                None => (Vec::new(), Vec::new()),
                Some(basis) => {
                    let t1 = basis.closed_form_targets(&xa).unwrap();
                    let b1 = crate::smoother::compute_coefficients(&t1, &xb, basis).unwrap();
                    let t2 = basis.closed_form_targets(&xb).unwrap();
                    let b2 = crate::smoother::compute_coefficients(&t2, &xc, basis).unwrap();
                    (b1, b2)
                }
            };
            draws_data.push((xa, xb, xc, b1, b2));
        }
    }
    let mut lin = Vec::with_capacity(freqs.len());
    for &nu in freqs {
        let w = freq_weights(cfg, basis, nu, domain)?;
        let (c0, c1) = if draws == 0 {
            // E{x x^H} = I: second moments in closed form.
            let c0: f64 =
                w.alpha.iter().map(|z| z.norm_sqr()).sum::<f64>()
                    + w.gamma.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let c1: C64 = w.gamma.iter().zip(&w.alpha).map(|(g, a)| g * a.conj()).sum();
            (c0, c1)
        } else {
            let mut c0 = 0.0;
            let mut c1 = C64::new(0.0, 0.0);
            for (xa, xb, xc, b1, b2) in &draws_data {
                let f1 = transition_transform(&w, xb, xa, b1, n_order);
                let f2 = transition_transform(&w, xc, xb, b2, n_order);
                c0 += 0.5 * (f1.norm_sqr() + f2.norm_sqr());
                c1 += f2 * f1.conj();
            }
            (c0 / draws as f64, c1 / draws as f64)
        };
        let psd = match cross_terms {
            CrossTerms::Dropped => c0,
            CrossTerms::Adjacent => {
                let rot = C64::from_polar(1.0, -2.0 * PI * nu * (1.0 + beta));
                c0 + 2.0 * (c1 * rot).re
            }
        };
        lin.push(psd.max(0.0));
    }
    Ok(PsdEstimate::from_linear(
        freqs.to_vec(),
        lin,
        PsdParams::Analytic { order: n_order, draws, cross_terms },
    ))
}

/// Per-symbol transform from explicit data and coefficients; matches
/// `alpha . x + gamma . x_prev` by construction.
fn transition_transform(
    w: &FreqWeights,
    x: &[C64],
    _x_prev: &[C64],
    b: &[C64],
    _n_order: u32,
) -> C64 {
    let mut f: C64 = w.data_term.iter().zip(x).map(|(t, v)| t * v).sum();
    for (u, bn) in w.coeff_term.iter().zip(b) {
        f += u * bn;
    }
    f
}

/// Least-squares slope of the far-sidelobe envelope in dB per decade.
///
/// The envelope is extracted as per-band maxima over log-spaced bands on the
/// positive frequency side.
pub fn rolloff_slope(psd: &PsdEstimate, f_lo: f64, f_hi: f64) -> Result<f64, SpectrumError> {
    const BANDS_PER_DECADE: f64 = 12.0;
    if !(f_lo > 0.0) || f_hi <= f_lo {
        return Err(SpectrumError::TooFewPoints { got: 0, f_lo, f_hi });
    }
    let lg_lo = f_lo.log10();
    let lg_hi = f_hi.log10();
    let bands = ((lg_hi - lg_lo) * BANDS_PER_DECADE).ceil() as usize;
    let mut env: Vec<(f64, f64)> = Vec::new();
    for b in 0..bands {
        let lo = 10f64.powf(lg_lo + (lg_hi - lg_lo) * b as f64 / bands as f64);
        let hi = 10f64.powf(lg_lo + (lg_hi - lg_lo) * (b as f64 + 1.0) / bands as f64);
        let mut best: Option<(f64, f64)> = None;
        for (f, v) in psd.freqs.iter().zip(&psd.psd_db) {
            if *f >= lo && *f < hi {
                if best.map(|(_, bv)| *v > bv).unwrap_or(true) {
                    best = Some((*f, *v));
                }
            }
        }
        if let Some(p) = best {
            env.push(p);
        }
    }
    if env.len() < 4 {
        return Err(SpectrumError::TooFewPoints { got: env.len(), f_lo, f_hi });
    }
    // Least squares on (log10 f, dB).
    let n = env.len() as f64;
    let sx: f64 = env.iter().map(|(f, _)| f.log10()).sum();
    let sy: f64 = env.iter().map(|(_, v)| *v).sum();
    let sxx: f64 = env.iter().map(|(f, _)| f.log10().powi(2)).sum();
    let sxy: f64 = env.iter().map(|(f, v)| f.log10() * v).sum();
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}
