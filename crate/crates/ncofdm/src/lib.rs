//! Link-level simulation of N-continuous OFDM sidelobe suppression.
//!
//! The crate implements the whole baseband chain needed to study smoothness
//! constrained OFDM waveforms:
//!
//! - [`waveform`]: QAM mapping, IFFT/CP OFDM symbol generation and analytic
//!   derivative evaluation of the underlying continuous-time signal.
//! - [`precoder`]: the frequency-domain projection precoder that forces the
//!   signal and its first N derivatives to be continuous across symbols.
//! - [`smoother`]: the time-domain alternative, which adds a short windowed
//!   correction signal at the front of each symbol (low-interference mode)
//!   or across the whole symbol (full-span mode).
//! - [`spectrum`]: Welch periodogram estimation plus the closed-form
//!   asymptotic power spectral density of smoothed transmit signals.
//! - [`channel`]: tapped-delay-line Rayleigh fading (EVA profile) and AWGN.
//! - [`receiver`]: CP removal, FFT demodulation, one-tap equalization,
//!   decision-feedback interference recovery and BER/EVM measurement.
//! - [`metrics`]: closed-form smooth-signal power, delayed-tail interference,
//!   SINR and operation-count accounting.
//!
//! All randomized operations take explicit seeds and derive per-task RNG
//! streams counter-style, so results are reproducible regardless of how work
//! is scheduled.

pub mod channel;
pub mod linalg;
pub mod metrics;
pub mod precoder;
pub mod receiver;
pub mod selftest;
pub mod smoother;
pub mod spectrum;
pub mod waveform;

pub use num_complex::Complex64;

/// Complex sample type used throughout the crate.
pub type C64 = Complex64;
