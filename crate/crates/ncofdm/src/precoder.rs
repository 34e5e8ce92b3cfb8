//! Frequency-domain N-continuous precoding.
//!
//! The precoder projects each data vector so that the modulated signal and
//! its first N derivatives match the previous symbol at the junction: with
//! `{A}_{n,r} = k_r^n` and `Phi = diag(e^{j phi k_r})`, the projector
//! `P = Phi^H A^H (A A^H)^{-1} A Phi` has rank N+1, and
//!
//! ```text
//! x_0' = x_0,     x_i' = (I - P) x_i + P Phi^H x_{i-1}'
//! ```
//!
//! keeps every junction N-continuous. `A` is Vandermonde-like, so rows are
//! scaled by `max_r |k_r|^n` before forming the Gram matrix; the projector is
//! invariant to row scaling.

use crate::linalg::CMat;
use crate::waveform::{eval_derivative, OfdmConfig, PhaseRef, SymbolGrid, WaveformError};
use crate::C64;
use thiserror::Error;

/// Largest continuity order the builder accepts. Conditioning of the scaled
/// Gram matrix is checked on top of this hard cap.
pub const MAX_ORDER: u32 = 6;

const COND_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum PrecoderError {
    #[error("continuity order {order} needs {needed} constraints but only {k} subcarriers")]
    Rank { order: u32, needed: usize, k: usize },
    #[error("continuity order {order} exceeds the supported maximum {max}")]
    OrderTooLarge { order: u32, max: u32 },
    #[error("constraint Gram matrix is ill-conditioned (estimate {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

/// Precomputed precoding operators for one `(cfg, N)`.
#[derive(Debug, Clone)]
pub struct PrecoderMatrices {
    /// Continuity order N.
    pub order: u32,
    /// Constraint matrix, `(N+1) x K`, entries `k_r^n` (unscaled).
    pub a: CMat,
    /// Diagonal of `Phi` as a vector.
    pub phi: Vec<C64>,
    /// The `K x K` projector.
    pub p: CMat,
    /// Rank factor: `P = left * right` with `left` `K x (N+1)`.
    left: CMat,
    /// Rank factor, `(N+1) x K`.
    right: CMat,
    /// Condition estimate of the scaled Gram matrix.
    pub gram_cond: f64,
}

impl PrecoderMatrices {
    /// Apply the projector through its rank-(N+1) factorization.
    pub fn apply_projector(&self, v: &[C64]) -> Vec<C64> {
        self.left.mul_vec(&self.right.mul_vec(v))
    }

    /// Elementwise `Phi^H v`.
    pub fn phase_back(&self, v: &[C64]) -> Vec<C64> {
        self.phi.iter().zip(v).map(|(&p, &x)| p.conj() * x).collect()
    }
}

/// Build the projector for continuity order `n_order`.
pub fn build_precoder(cfg: &OfdmConfig, n_order: u32) -> Result<PrecoderMatrices, PrecoderError> {
    let k = cfg.subcarrier_count();
    let rows = n_order as usize + 1;
    if n_order > MAX_ORDER {
        return Err(PrecoderError::OrderTooLarge { order: n_order, max: MAX_ORDER });
    }
    if rows > k {
        return Err(PrecoderError::Rank { order: n_order, needed: rows, k });
    }
    let phi_angle = cfg.boundary_phase();
    let phi: Vec<C64> =
        cfg.subcarriers.iter().map(|&kr| C64::from_polar(1.0, phi_angle * kr as f64)).collect();

    let a = CMat::from_fn(rows, k, |n, r| {
        C64::new((cfg.subcarriers[r] as f64).powi(n as i32), 0.0)
    });
    // Row scaling keeps the Gram matrix well conditioned for N up to 6;
    // the projector onto the row space is unchanged.
    let kmax = cfg.subcarriers.iter().map(|&kr| (kr as f64).abs()).fold(0.0, f64::max).max(1.0);
    let a_scaled = CMat::from_fn(rows, k, |n, r| a[(n, r)] / kmax.powi(n as i32));

    let gram = a_scaled.mul(&a_scaled.adjoint());
    let gram_cond = gram.cond_one();
    if !gram_cond.is_finite() || gram_cond > COND_LIMIT {
        return Err(PrecoderError::IllConditioned { cond: gram_cond });
    }
    // (A A^H)^{-1} A, then P = Phi^H A^H [(A A^H)^{-1} A] Phi.
    let solved = gram.solve(&a_scaled).map_err(|_| PrecoderError::IllConditioned {
        cond: gram_cond,
    })?;
    let left = CMat::from_fn(k, rows, |r, n| phi[r].conj() * a_scaled[(n, r)].conj());
    let right = CMat::from_fn(rows, k, |n, r| solved[(n, r)] * phi[r]);
    let p = left.mul(&right);
    Ok(PrecoderMatrices { order: n_order, a, phi, p, left, right, gram_cond })
}

/// Precode a symbol sequence; the recursion state is carried across the whole
/// frame and resets at frame start.
pub fn precode_sequence(grid: &SymbolGrid, pm: &PrecoderMatrices) -> SymbolGrid {
    let mut out = Vec::with_capacity(grid.symbols.len());
    let mut prev: Option<Vec<C64>> = None;
    for x in &grid.symbols {
        let coded = match &prev {
            None => x.clone(),
            Some(prev_coded) => {
                // (I - P) x + P Phi^H prev
                let px = pm.apply_projector(x);
                let mem = pm.apply_projector(&pm.phase_back(prev_coded));
                x.iter()
                    .zip(px)
                    .zip(mem)
                    .map(|((&xi, pxi), mi)| xi - pxi + mi)
                    .collect()
            }
        };
        prev = Some(coded.clone());
        out.push(coded);
    }
    SymbolGrid { symbols: out, modulation: grid.modulation }
}

/// One-sided derivative mismatch at the junction between two symbols, for
/// orders `0..=n_order`. This is the universal continuity oracle: it
/// evaluates the analytic derivatives of the modulated signals on both sides
/// of the boundary.
pub fn continuity_residual(
    prev: &[C64],
    next: &[C64],
    n_order: u32,
    cfg: &OfdmConfig,
) -> Result<Vec<C64>, WaveformError> {
    let mcp = cfg.cp_len as f64;
    let m = cfg.fft_len as f64;
    (0..=n_order)
        .map(|n| {
            let start = eval_derivative(next, n, -mcp, PhaseRef::None, cfg)?;
            let end = eval_derivative(prev, n, m, PhaseRef::None, cfg)?;
            Ok(start - end)
        })
        .collect()
}

/// Scale reference for relative residual checks: the largest one-sided
/// derivative magnitude per order over a set of junction evaluations.
pub fn derivative_scales(
    symbols: &[Vec<C64>],
    n_order: u32,
    cfg: &OfdmConfig,
) -> Result<Vec<f64>, WaveformError> {
    let mut scales = vec![0.0f64; n_order as usize + 1];
    for x in symbols {
        for n in 0..=n_order {
            let start = eval_derivative(x, n, -(cfg.cp_len as f64), PhaseRef::None, cfg)?;
            let end = eval_derivative(x, n, cfg.fft_len as f64, PhaseRef::None, cfg)?;
            let s = &mut scales[n as usize];
            *s = s.max(start.norm()).max(end.norm());
        }
    }
    Ok(scales)
}
