//! Time-domain N-continuous smoothing.
//!
//! Instead of precoding the data, a short correction signal `w_i` is added at
//! the front of each CP-inclusive symbol. `w_i` is a linear combination of
//! N+1 basis signals: derivatives of an all-subcarrier reference waveform,
//! truncated by the decaying right half of a smooth zero-edged window:
//!
//! ```text
//! basis_v(m) = f^(v)(m) * g(m),   m in the first L samples of the symbol,
//! f^(v)(m)   = (1/M) (j 2 pi / M)^v sum_k k^v e^{-j phi k} e^{j 2 pi k m / M}
//! ```
//!
//! With `phi = -2 pi M_cp / M` the reference kernel peaks exactly at the
//! junction `m = -M_cp` it has to repair and decays into the symbol under
//! the window. (The opposite phase sign shifts the kernel peak M_cp samples
//! past CP removal, which makes the correction orders of magnitude stronger
//! than the payload — easy to misread, catastrophic in practice.)
//!
//! The coefficients solve an (N+1)-dimensional linear system matching the
//! one-sided derivatives of the previous transmitted symbol at its end. Two
//! modes exist:
//!
//! - low-interference: a zero-edged window keeps the correction inside the
//!   front of the symbol, so the previous symbol ends unperturbed and the
//!   targets reduce to a closed form in the previous data vector;
//! - full-span: an all-ones window over the whole symbol stands in for the
//!   conventional whole-symbol scheme; targets must then account for the
//!   previous correction's own tail.
//!
//! The boundary system matrix holds one-sided derivatives of the windowed
//! basis functions, expanded by the Leibniz rule from window derivative
//! samples. With the window peak at the support start (all odd window
//! derivatives vanish there) the matrix is Hankel-like; tiny even-derivative
//! corrections appear for N >= 2. Solving with the full Leibniz matrix keeps
//! junction continuity exact to machine precision.

use crate::linalg::CMat;
use crate::waveform::{
    assemble_frame, modulate_symbol, OfdmConfig, SampleBlock,
    SymbolGrid, WaveformError,
};
use crate::C64;
use std::f64::consts::PI;
use thiserror::Error;

const COND_LIMIT: f64 = 1e14;

#[derive(Debug, Error)]
pub enum SmootherError {
    #[error("window length {len} too short: need at least {needed}")]
    WindowTooShort { len: usize, needed: usize },
    #[error("window length {len} exceeds the CP-inclusive symbol length {max}")]
    WindowTooLong { len: usize, max: usize },
    #[error("boundary system is singular or ill-conditioned (estimate {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("smoothing mode {mode:?} incompatible with window {kind:?} of length {len}")]
    ModeMismatch { mode: SmoothingMode, kind: WindowKind, len: usize },
    #[error("vector length {got} does not match {expected}")]
    Dimension { got: usize, expected: usize },
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

/// Shape of the truncating window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Blackman,
    Hanning,
    Triangular,
    /// Constant 1 over the support; used by the full-span mode.
    AllOnes,
}

impl WindowKind {
    /// Windows that decay to exactly zero at the end of the support.
    pub fn is_zero_edged(&self) -> bool {
        !matches!(self, WindowKind::AllOnes)
    }

    /// Cosine-series representation `c0 + sum amp_i cos(mult_i * pi * t / (L-1))`
    /// of the decaying half, where defined. Components are ordered so the
    /// plain f64 left-to-right sum lands exactly on 1 at the peak and 0 at
    /// the edge (0.42 + 0.08 is exactly 0.5 in f64).
    pub(crate) fn cosine_series(&self) -> Option<(f64, &'static [(f64, f64)])> {
        match self {
            WindowKind::Blackman => Some((0.42, &[(0.08, 2.0), (0.5, 1.0)])),
            WindowKind::Hanning => Some((0.5, &[(0.5, 1.0)])),
            WindowKind::AllOnes => Some((1.0, &[])),
            WindowKind::Triangular => None,
        }
    }
}

impl std::str::FromStr for WindowKind {
    type Err = WaveformError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "blackman" => Ok(WindowKind::Blackman),
            "hanning" | "hann" => Ok(WindowKind::Hanning),
            "triangular" => Ok(WindowKind::Triangular),
            "all-ones" | "allones" | "rect" => Ok(WindowKind::AllOnes),
            other => Err(WaveformError::Config(format!("unknown window kind '{other}'"))),
        }
    }
}

/// Window choice plus correction-signal length in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub kind: WindowKind,
    pub len: usize,
}

impl WindowSpec {
    pub fn new(kind: WindowKind, len: usize) -> Self {
        Self { kind, len }
    }

    /// Per-sample normalized frequency of the underlying full window,
    /// `1 / (2L - 2)`.
    pub fn rho(&self) -> f64 {
        1.0 / (2.0 * self.len as f64 - 2.0)
    }
}

/// Sampled window and its analytic derivatives with respect to the sample
/// index. `derivs[q][i]` is the q-th derivative at support sample `i`.
#[derive(Debug, Clone)]
pub struct WindowTable {
    pub spec: WindowSpec,
    pub derivs: Vec<Vec<f64>>,
}

impl WindowTable {
    pub fn values(&self) -> &[f64] {
        &self.derivs[0]
    }
}

/// Derivative of order `q` of `amp * cos(angle(t))` with rate `a`, given the
/// precomputed angle, so the odd derivatives at t = 0 and the window zeros at
/// the support edge come out exact.
fn cos_derivative(amp: f64, a: f64, q: u32, angle: f64) -> f64 {
    let scale = amp * a.powi(q as i32);
    match q % 4 {
        0 => scale * angle.cos(),
        1 => -scale * angle.sin(),
        2 => -scale * angle.cos(),
        _ => scale * angle.sin(),
    }
}

/// Sample the decaying window half and its derivatives up to `max_order`.
pub fn build_window(spec: &WindowSpec, max_order: u32) -> Result<WindowTable, SmootherError> {
    if spec.len < 2 {
        return Err(SmootherError::WindowTooShort { len: spec.len, needed: 2 });
    }
    let l = spec.len;
    let mut derivs = vec![vec![0.0f64; l]; max_order as usize + 1];
    match spec.kind.cosine_series() {
        Some((c0, comps)) => {
            for i in 0..l {
                // The fraction hits exactly 0 and 1 at the support edges.
                let frac = i as f64 / (l as f64 - 1.0);
                for (q, row) in derivs.iter_mut().enumerate() {
                    let mut v = if q == 0 { c0 } else { 0.0 };
                    for &(amp, mult) in comps {
                        let a = mult * PI / (l as f64 - 1.0);
                        v += cos_derivative(amp, a, q as u32, mult * PI * frac);
                    }
                    row[i] = v;
                }
            }
        }
        None => {
            // Triangular: linear decay, single nonzero derivative.
            let slope = -1.0 / (l as f64 - 1.0);
            for i in 0..l {
                derivs[0][i] = 1.0 + slope * i as f64;
            }
            if max_order >= 1 {
                derivs[1] = vec![slope; l];
            }
        }
    }
    Ok(WindowTable { spec: *spec, derivs })
}

/// How the correction signal is placed inside each symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingMode {
    /// Zero-edged window at the front of the symbol; plain receiver.
    LowInterference,
    /// All-ones window across CP plus useful part; stands in for the
    /// conventional whole-symbol scheme.
    FullSpan,
}

/// Precomputed operators for one `(cfg, N, window)`.
#[derive(Debug, Clone)]
pub struct SmootherBasis {
    pub cfg: OfdmConfig,
    /// Continuity order N.
    pub order: u32,
    pub window: WindowSpec,
    /// `L x (N+1)` sampled basis vectors (windowed reference derivatives).
    pub q: CMat,
    /// `(N+1) x (N+1)` map from coefficients to one-sided derivatives of the
    /// correction at the support start.
    pub boundary: CMat,
    pub boundary_inv: CMat,
    /// Map from coefficients to one-sided derivatives of the correction at
    /// the symbol end `m = M`; zero unless the support reaches the end.
    pub tail: CMat,
    /// `(N+1) x K`: data vector to symbol-end derivatives, rows `n = 0..N`.
    pub p1: CMat,
    /// `(N+1) x K`: data vector to CP-start derivatives.
    pub p2: CMat,
    /// `(N+1) x K` with entries `(j 2 pi k_r / M)^n`.
    pub b2: CMat,
    /// Condition estimate of the boundary system.
    pub cond: f64,
    /// Reference-waveform derivatives at the support start, orders `0..=2N`.
    pub f_at_start: Vec<C64>,
    /// Reference-waveform derivatives at the symbol end, orders `0..=2N`.
    pub f_at_end: Vec<C64>,
    window_table: WindowTable,
}

impl SmootherBasis {
    pub fn window_table(&self) -> &WindowTable {
        &self.window_table
    }

    fn expect_len(&self, v: &[C64]) -> Result<(), SmootherError> {
        let k = self.cfg.subcarrier_count();
        if v.len() != k {
            return Err(SmootherError::Dimension { got: v.len(), expected: k });
        }
        Ok(())
    }

    /// Derivative targets at the junction from the previous data vector
    /// alone. Valid whenever the previous symbol ends unperturbed, which a
    /// zero-edged window guarantees.
    pub fn closed_form_targets(&self, x_prev: &[C64]) -> Result<Vec<C64>, SmootherError> {
        self.expect_len(x_prev)?;
        Ok(self.p1.mul_vec(x_prev))
    }

    /// Derivative targets from the previous transmitted symbol including the
    /// previous correction's own tail at the symbol end.
    pub fn generalized_targets(
        &self,
        x_prev: &[C64],
        b_prev: &[C64],
    ) -> Result<Vec<C64>, SmootherError> {
        self.expect_len(x_prev)?;
        let mut t = self.p1.mul_vec(x_prev);
        let tail = self.tail.mul_vec(b_prev);
        for (ti, wi) in t.iter_mut().zip(tail) {
            *ti += wi;
        }
        Ok(t)
    }

    /// CP-start derivatives of a plain data symbol.
    pub fn boundary_values(&self, x: &[C64]) -> Result<Vec<C64>, SmootherError> {
        self.expect_len(x)?;
        Ok(self.p2.mul_vec(x))
    }

    /// Sampled correction signal `Q b` on its L-sample support.
    pub fn smooth_signal(&self, b: &[C64]) -> Vec<C64> {
        self.q.mul_vec(b)
    }
}

/// Reference-waveform phase convention (experimental comparison hook).
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisPhase {
    /// `e^{j phi k}`: kernel peak at `m = +M_cp`.
    Literal,
    /// no extra phase: kernel peak at `m = 0`.
    Plain,
    /// `e^{-j phi k}`: kernel peak at the junction `m = -M_cp`.
    Conjugate,
}

/// Build the smoothing operators.
pub fn build_basis(
    cfg: &OfdmConfig,
    n_order: u32,
    spec: &WindowSpec,
) -> Result<SmootherBasis, SmootherError> {
    build_basis_with_phase(cfg, n_order, spec, BasisPhase::Conjugate)
}

#[doc(hidden)]
pub fn build_basis_with_phase(
    cfg: &OfdmConfig,
    n_order: u32,
    spec: &WindowSpec,
    phase: BasisPhase,
) -> Result<SmootherBasis, SmootherError> {
    let rows = n_order as usize + 1;
    let k = cfg.subcarrier_count();
    let l = spec.len;
    if l < rows + 1 {
        return Err(SmootherError::WindowTooShort { len: l, needed: rows + 1 });
    }
    if l > cfg.samples_per_symbol() {
        return Err(SmootherError::WindowTooLong { len: l, max: cfg.samples_per_symbol() });
    }
    let window_table = build_window(spec, 2 * n_order)?;

    let phase_sign = match phase {
        BasisPhase::Literal => 1.0,
        BasisPhase::Plain => 0.0,
        BasisPhase::Conjugate => -1.0,
    };
    let phi_angle = cfg.boundary_phase();
    let mf = cfg.fft_len as f64;
    let fderiv = |p: u32, m: f64| -> Result<C64, WaveformError> {
        let mut acc = C64::new(0.0, 0.0);
        for &kr in &cfg.subcarriers {
            let kf = kr as f64;
            let arg = phase_sign * phi_angle * kf + 2.0 * PI * kf * m / mf;
            acc += kf.powi(p as i32) * C64::from_polar(1.0, arg);
        }
        Ok(acc * C64::new(0.0, 2.0 * PI / mf).powu(p) / mf)
    };
    let m_start = -(cfg.cp_len as f64);
    let m_end = cfg.fft_len as f64;
    let f_at_start: Vec<C64> =
        (0..=2 * n_order).map(|p| fderiv(p, m_start)).collect::<Result<_, _>>()?;
    let f_at_end: Vec<C64> =
        (0..=2 * n_order).map(|p| fderiv(p, m_end)).collect::<Result<_, _>>()?;

    // Sampled basis columns: f^(v)(m_i) * g(i) on the support.
    let mut q = CMat::zeros(l, rows);
    for v in 0..rows {
        for i in 0..l {
            let m = m_start + i as f64;
            let f = fderiv(v as u32, m)?;
            q[(i, v)] = f * window_table.values()[i];
        }
    }

    // One-sided derivative maps of the windowed basis functions via the
    // Leibniz rule: d^n [f^(v) g] = sum_j C(n,j) f^(v+j) g^(n-j).
    let leibniz = |f_eval: &[C64], g_col: usize| -> CMat {
        CMat::from_fn(rows, rows, |n, v| {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..=n {
                let w = binomial(n, j) * window_table.derivs[n - j][g_col];
                acc += f_eval[v + j] * w;
            }
            acc
        })
    };
    let boundary = leibniz(&f_at_start, 0);
    // The correction's own tail reaches the symbol end only when the support
    // covers the whole CP-inclusive symbol.
    let tail = if l == cfg.samples_per_symbol() {
        leibniz(&f_at_end, l - 1)
    } else {
        CMat::zeros(rows, rows)
    };

    let (boundary_inv, cond) = if k == 0 {
        // Degenerate empty-spectrum basis: everything is zero.
        (CMat::zeros(rows, rows), f64::INFINITY)
    } else {
        let cond = boundary.cond_one();
        if !cond.is_finite() || cond > COND_LIMIT {
            return Err(SmootherError::IllConditioned { cond });
        }
        let inv =
            boundary.inverse().map_err(|_| SmootherError::IllConditioned { cond })?;
        (inv, cond)
    };

    let b2 = CMat::from_fn(rows, k, |n, r| {
        C64::new(0.0, 2.0 * PI * cfg.subcarriers[r] as f64 / mf).powu(n as u32)
    });
    // Symbol-end derivatives of a data symbol: row n of (1/M) B2.
    let p1 = CMat::from_fn(rows, k, |n, r| b2[(n, r)] / mf);
    // CP-start derivatives carry the boundary phase: (1/M) B2 Phi.
    let p2 = CMat::from_fn(rows, k, |n, r| {
        b2[(n, r)] / mf * C64::from_polar(1.0, phi_angle * cfg.subcarriers[r] as f64)
    });

    Ok(SmootherBasis {
        cfg: cfg.clone(),
        order: n_order,
        window: *spec,
        q,
        boundary,
        boundary_inv,
        tail,
        p1,
        p2,
        b2,
        cond,
        f_at_start,
        f_at_end,
        window_table,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Solve for the correction coefficients given junction derivative targets.
pub fn compute_coefficients(
    targets: &[C64],
    x: &[C64],
    basis: &SmootherBasis,
) -> Result<Vec<C64>, SmootherError> {
    let rows = basis.order as usize + 1;
    if targets.len() != rows {
        return Err(SmootherError::Dimension { got: targets.len(), expected: rows });
    }
    let boundary = basis.boundary_values(x)?;
    let rhs: Vec<C64> = targets.iter().zip(boundary).map(|(&t, b)| t - b).collect();
    Ok(basis.boundary_inv.mul_vec(&rhs))
}

/// A smoothed frame: the transmitted samples plus the per-block correction
/// coefficients (data symbols followed by the trailing tail block).
#[derive(Debug, Clone)]
pub struct SmoothedFrame {
    pub block: SampleBlock,
    pub coefficients: Vec<Vec<C64>>,
    pub mode: SmoothingMode,
}

/// Smooth a frame and append the terminating tail block.
pub fn apply_smoothing(
    grid: &SymbolGrid,
    basis: &SmootherBasis,
    mode: SmoothingMode,
) -> Result<SmoothedFrame, SmootherError> {
    let cfg = &basis.cfg;
    match mode {
        SmoothingMode::LowInterference if !basis.window.kind.is_zero_edged() => {
            return Err(SmootherError::ModeMismatch {
                mode,
                kind: basis.window.kind,
                len: basis.window.len,
            });
        }
        SmoothingMode::FullSpan
            if basis.window.kind != WindowKind::AllOnes
                || basis.window.len != cfg.samples_per_symbol() =>
        {
            return Err(SmootherError::ModeMismatch {
                mode,
                kind: basis.window.kind,
                len: basis.window.len,
            });
        }
        _ => {}
    }
    if grid.is_empty() {
        return Err(SmootherError::Dimension { got: 0, expected: 1 });
    }
    let k = cfg.subcarrier_count();
    let zeros = vec![C64::new(0.0, 0.0); k];
    let rows = basis.order as usize + 1;
    let mut blocks = Vec::with_capacity(grid.len() + 1);
    let mut coefficients = Vec::with_capacity(grid.len() + 1);
    let mut prev_x = zeros.clone();
    let mut prev_b = vec![C64::new(0.0, 0.0); rows];
    let mut first = true;
    for x in grid.symbols.iter().chain(std::iter::once(&zeros)) {
        let targets = if first {
            // The frame starts against silence.
            first = false;
            vec![C64::new(0.0, 0.0); rows]
        } else {
            match mode {
                SmoothingMode::LowInterference => basis.closed_form_targets(&prev_x)?,
                SmoothingMode::FullSpan => basis.generalized_targets(&prev_x, &prev_b)?,
            }
        };
        let b = compute_coefficients(&targets, x, basis)?;
        let correction = basis.smooth_signal(&b);
        let mut block = modulate_symbol(x, cfg)?;
        for (s, w) in block.samples.iter_mut().zip(&correction) {
            *s += w;
        }
        blocks.push(block);
        coefficients.push(b.clone());
        prev_x = x.clone();
        prev_b = b;
    }
    let mut frame = assemble_frame(&blocks)?;
    // The final zero-data block carries only the correction tail.
    frame = SampleBlock::new(
        frame.samples,
        frame.per_symbol,
        grid.len(),
        true,
        frame.sample_rate,
    )?;
    Ok(SmoothedFrame { block: frame, coefficients, mode })
}

/// One-sided derivative mismatches at every junction of a smoothed frame,
/// evaluated analytically from the data vectors and correction coefficients.
/// Returns per-junction residual vectors and per-order magnitude scales for
/// relative comparisons.
pub fn junction_residuals(
    grid: &SymbolGrid,
    frame: &SmoothedFrame,
    basis: &SmootherBasis,
) -> Result<(Vec<Vec<C64>>, Vec<f64>), SmootherError> {
    let cfg = &basis.cfg;
    let rows = basis.order as usize + 1;
    let k = cfg.subcarrier_count();
    let zeros = vec![C64::new(0.0, 0.0); k];
    // Data vectors per block: data symbols then the zero tail block.
    let xs: Vec<&Vec<C64>> =
        grid.symbols.iter().chain(std::iter::once(&zeros)).collect();
    assert_eq!(xs.len(), frame.coefficients.len());

    let mut residuals = Vec::with_capacity(xs.len());
    let mut scales = vec![0.0f64; rows];
    let mut prev_end = vec![C64::new(0.0, 0.0); rows]; // silence before the frame
    for (x, b) in xs.iter().zip(&frame.coefficients) {
        let start_data = basis.boundary_values(x)?;
        let start_corr = basis.boundary.mul_vec(b);
        let start: Vec<C64> =
            start_data.iter().zip(start_corr).map(|(&d, c)| d + c).collect();
        let res: Vec<C64> = start.iter().zip(&prev_end).map(|(&s, &p)| s - p).collect();
        for n in 0..rows {
            scales[n] = scales[n].max(start[n].norm()).max(prev_end[n].norm());
        }
        residuals.push(res);
        // This block's one-sided derivatives at its end, for the next junction.
        let end_data = basis.p1.mul_vec(x);
        let end_corr = basis.tail.mul_vec(b);
        prev_end = end_data.iter().zip(end_corr).map(|(&d, c)| d + c).collect();
    }
    Ok((residuals, scales))
}

/// Largest junction residual of a smoothed frame relative to the per-order
/// derivative scale.
pub fn max_relative_junction_residual(
    grid: &SymbolGrid,
    frame: &SmoothedFrame,
    basis: &SmootherBasis,
) -> Result<f64, SmootherError> {
    let (residuals, scales) = junction_residuals(grid, frame, basis)?;
    let mut worst = 0.0f64;
    for res in &residuals {
        for (n, r) in res.iter().enumerate() {
            worst = worst.max(r.norm() / scales[n].max(f64::MIN_POSITIVE));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{eval_derivative, map_bits, Modulation, PhaseRef};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg_small() -> OfdmConfig {
        OfdmConfig::contiguous(16, 64, 8, 1e-3 / 15.0).unwrap()
    }

    fn random_grid(cfg: &OfdmConfig, symbols: usize, seed: u64) -> SymbolGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Modulation::Qam16;
        let n = symbols * cfg.subcarrier_count() * m.bits_per_symbol();
        let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
        map_bits(&bits, m, cfg).unwrap()
    }

    #[test]
    fn blackman_half_window_edges_are_exact() {
        let spec = WindowSpec::new(WindowKind::Blackman, 36);
        let w = build_window(&spec, 4).unwrap();
        assert_eq!(w.values()[0], 1.0);
        assert_eq!(w.values()[spec.len - 1], 0.0);
        // First derivative at the peak vanishes by even symmetry.
        assert_eq!(w.derivs[1][0], 0.0);
    }

    #[test]
    fn hanning_and_triangular_are_zero_edged() {
        for kind in [WindowKind::Hanning, WindowKind::Triangular] {
            let w = build_window(&WindowSpec::new(kind, 24), 2).unwrap();
            assert!((w.values()[0] - 1.0).abs() < 1e-15);
            assert!(w.values()[23].abs() < 1e-15);
        }
    }

    #[test]
    fn window_derivatives_match_finite_differences() {
        // Check the analytic derivative samples of the Blackman half against
        // a central difference of the closed-form window value.
        let l = 48usize;
        let spec = WindowSpec::new(WindowKind::Blackman, l);
        let w = build_window(&spec, 3).unwrap();
        let g = |t: f64| {
            0.42 + 0.5 * (PI * t / (l as f64 - 1.0)).cos()
                + 0.08 * (2.0 * PI * t / (l as f64 - 1.0)).cos()
        };
        let h = 1e-4;
        for i in [0usize, 7, 23, 40] {
            let t = i as f64;
            let fd1 = (g(t + h) - g(t - h)) / (2.0 * h);
            assert!((fd1 - w.derivs[1][i]).abs() < 1e-7);
            let fd2 = (g(t + h) - 2.0 * g(t) + g(t - h)) / (h * h);
            assert!((fd2 - w.derivs[2][i]).abs() < 1e-5);
        }
    }

    #[test]
    fn scalar_boundary_system_for_order_zero() {
        let cfg = cfg_small();
        let basis = build_basis(&cfg, 0, &WindowSpec::new(WindowKind::Blackman, 9)).unwrap();
        // 1x1 system: f(-M_cp) * g(0) with g(0) = 1.
        assert!((basis.boundary[(0, 0)] - basis.f_at_start[0]).norm() < 1e-15);
        let inv = basis.boundary_inv[(0, 0)];
        assert!((inv * basis.f_at_start[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    /// Brute-force reference-waveform derivative with the junction-peaked
    /// phase convention.
    fn brute_f(cfg: &OfdmConfig, p: u32, m: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &k in &cfg.subcarriers {
            let kf = k as f64;
            let arg = -cfg.boundary_phase() * kf + 2.0 * PI * kf * m / cfg.fft_len as f64;
            acc += kf.powi(p as i32) * C64::from_polar(1.0, arg);
        }
        acc * C64::new(0.0, 2.0 * PI / cfg.fft_len as f64).powu(p) / cfg.fft_len as f64
    }

    #[test]
    fn first_basis_column_matches_brute_force() {
        let cfg = cfg_small();
        let basis = build_basis(&cfg, 2, &WindowSpec::new(WindowKind::Blackman, 9)).unwrap();
        let w = basis.window_table().values().to_vec();
        for i in 0..basis.window.len {
            let m = -(cfg.cp_len as f64) + i as f64;
            let f = brute_f(&cfg, 0, m);
            assert!((basis.q[(i, 0)] - f * w[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn reference_kernel_peaks_at_the_junction() {
        let cfg = cfg_small();
        let basis = build_basis(&cfg, 1, &WindowSpec::new(WindowKind::Blackman, 9)).unwrap();
        // |f(-M_cp)| = K/M, the kernel maximum.
        let peak = basis.f_at_start[0].norm();
        let want = cfg.subcarrier_count() as f64 / cfg.fft_len as f64;
        assert!((peak - want).abs() < 1e-12);
    }

    #[test]
    fn all_ones_window_leaves_reference_untouched() {
        let cfg = cfg_small();
        let l = cfg.samples_per_symbol();
        let basis = build_basis(&cfg, 1, &WindowSpec::new(WindowKind::AllOnes, l)).unwrap();
        for v in 0..=1u32 {
            for i in [0usize, 5, l - 1] {
                let m = -(cfg.cp_len as f64) + i as f64;
                let f = brute_f(&cfg, v, m);
                assert!((basis.q[(i, v as usize)] - f).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn boundary_map_appendix_identities() {
        let cfg = cfg_small();
        let basis = build_basis(&cfg, 3, &WindowSpec::new(WindowKind::Blackman, 9)).unwrap();
        let m = cfg.fft_len as f64;
        for n in 0..4usize {
            for r in 0..cfg.subcarrier_count() {
                let want_p1 = basis.b2[(n, r)] / m;
                assert!((basis.p1[(n, r)] - want_p1).norm() < 1e-12);
                let phi = C64::from_polar(1.0, cfg.boundary_phase() * cfg.subcarriers[r] as f64);
                let want_p2 = basis.b2[(n, r)] * phi / m;
                assert!((basis.p2[(n, r)] - want_p2).norm() < 1e-12);
            }
        }
        // B1 = Phi^H B2^T, entrywise.
        for r in 0..cfg.subcarrier_count() {
            let phi = C64::from_polar(1.0, cfg.boundary_phase() * cfg.subcarriers[r] as f64);
            for n in 0..4usize {
                let b1 = basis.b2[(n, r)] * phi.conj();
                assert!((b1 - phi.conj() * basis.b2[(n, r)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn p1_p2_rows_match_derivative_functionals() {
        // Row n of p1 applied to x must equal the analytic n-th derivative of
        // the modulated symbol at m = M; row n of p2 the derivative at the CP
        // start. This pins the n = 0 row convention.
        let cfg = cfg_small();
        let basis = build_basis(&cfg, 3, &WindowSpec::new(WindowKind::Blackman, 9)).unwrap();
        let grid = random_grid(&cfg, 1, 3);
        let x = &grid.symbols[0];
        let end = basis.p1.mul_vec(x);
        let start = basis.p2.mul_vec(x);
        for n in 0..=3u32 {
            let want_end =
                eval_derivative(x, n, cfg.fft_len as f64, PhaseRef::None, &cfg).unwrap();
            let want_start =
                eval_derivative(x, n, -(cfg.cp_len as f64), PhaseRef::None, &cfg).unwrap();
            assert!((end[n as usize] - want_end).norm() < 1e-12 * want_end.norm().max(1e-12));
            assert!(
                (start[n as usize] - want_start).norm() < 1e-12 * want_start.norm().max(1e-12)
            );
        }
    }

    #[test]
    fn boundary_map_structure() {
        // Rows 0 and 1 carry no window correction (the peak has zero slope),
        // so they equal the Hankel form in the reference derivatives exactly.
        let cfg = cfg_small();
        let basis = build_basis(&cfg, 2, &WindowSpec::new(WindowKind::Blackman, 9)).unwrap();
        let scale = basis.boundary.max_abs();
        for v in 0..3usize {
            assert!((basis.boundary[(0, v)] - basis.f_at_start[v]).norm() < 1e-15 * scale);
            assert!((basis.boundary[(1, v)] - basis.f_at_start[v + 1]).norm() < 1e-15 * scale);
        }
        // Row 2 picks up exactly the window curvature term gamma_2 * f^(v).
        let gamma2 = basis.window_table().derivs[2][0];
        for v in 0..3usize {
            let want = basis.f_at_start[v + 2] + basis.f_at_start[v] * gamma2;
            assert!((basis.boundary[(2, v)] - want).norm() < 1e-15 * scale);
        }
    }

    #[test]
    fn all_ones_boundary_map_is_symmetric_hankel() {
        let cfg = cfg_small();
        let spec = WindowSpec::new(WindowKind::AllOnes, cfg.samples_per_symbol());
        let basis = build_basis(&cfg, 3, &spec).unwrap();
        let scale = basis.boundary.max_abs();
        for n in 0..4usize {
            for v in 0..4usize {
                assert!((basis.boundary[(n, v)] - basis.f_at_start[n + v]).norm() < 1e-12 * scale);
                assert!(
                    (basis.boundary[(n, v)] - basis.boundary[(v, n)]).norm() < 1e-12 * scale
                );
            }
        }
    }

    #[test]
    fn matched_phase_rotation_needs_no_correction() {
        let cfg = cfg_small();
        let basis = build_basis(&cfg, 2, &WindowSpec::new(WindowKind::Blackman, 9)).unwrap();
        let grid = random_grid(&cfg, 1, 11);
        let x_prev = grid.symbols[0].clone();
        let x: Vec<C64> = cfg
            .subcarriers
            .iter()
            .zip(&x_prev)
            .map(|(&k, &v)| v * C64::from_polar(1.0, -cfg.boundary_phase() * k as f64))
            .collect();
        let targets = basis.closed_form_targets(&x_prev).unwrap();
        let b = compute_coefficients(&targets, &x, &basis).unwrap();
        for c in b {
            assert!(c.norm() < 1e-12);
        }
    }

    #[test]
    fn first_symbol_coefficients_cancel_its_start() {
        let cfg = cfg_small();
        let basis = build_basis(&cfg, 2, &WindowSpec::new(WindowKind::Blackman, 9)).unwrap();
        let grid = random_grid(&cfg, 1, 13);
        let x = &grid.symbols[0];
        let zeros = vec![C64::new(0.0, 0.0); 3];
        let b = compute_coefficients(&zeros, x, &basis).unwrap();
        let want = basis.boundary_inv.mul_vec(
            &basis.boundary_values(x).unwrap().iter().map(|v| -v).collect::<Vec<_>>(),
        );
        for (a, w) in b.iter().zip(want) {
            assert!((a - w).norm() < 1e-14);
        }
    }

    #[test]
    fn generalized_targets_reduce_to_closed_form_for_zero_edged_windows() {
        let cfg = cfg_small();
        let basis = build_basis(&cfg, 2, &WindowSpec::new(WindowKind::Blackman, 9)).unwrap();
        let grid = random_grid(&cfg, 2, 17);
        let targets0 = vec![C64::new(0.0, 0.0); 3];
        let b0 = compute_coefficients(&targets0, &grid.symbols[0], &basis).unwrap();
        let closed = basis.closed_form_targets(&grid.symbols[0]).unwrap();
        let general = basis.generalized_targets(&grid.symbols[0], &b0).unwrap();
        for (c, g) in closed.iter().zip(general) {
            assert!((c - g).norm() < 1e-10);
        }
    }

    #[test]
    fn correction_is_zero_outside_support() {
        let cfg = cfg_small();
        let l = 9usize;
        let basis = build_basis(&cfg, 2, &WindowSpec::new(WindowKind::Blackman, l)).unwrap();
        let grid = random_grid(&cfg, 3, 19);
        let frame = apply_smoothing(&grid, &basis, SmoothingMode::LowInterference).unwrap();
        for (i, x) in grid.symbols.iter().enumerate() {
            let plain = modulate_symbol(x, &cfg).unwrap();
            let block = frame.block.block(i);
            for s in l..cfg.samples_per_symbol() {
                assert_eq!(block[s], plain.samples[s], "symbol {i} sample {s}");
            }
        }
    }

    #[test]
    fn all_zero_frame_smooths_to_zero() {
        let cfg = cfg_small();
        let basis = build_basis(&cfg, 2, &WindowSpec::new(WindowKind::Blackman, 9)).unwrap();
        let grid = SymbolGrid {
            symbols: vec![vec![C64::new(0.0, 0.0); cfg.subcarrier_count()]; 3],
            modulation: Modulation::Qam16,
        };
        let frame = apply_smoothing(&grid, &basis, SmoothingMode::LowInterference).unwrap();
        for s in &frame.block.samples {
            assert_eq!(*s, C64::new(0.0, 0.0));
        }
        assert!(frame.block.has_tail);
        assert_eq!(frame.block.block_count(), 4);
    }

    #[test]
    fn low_interference_junctions_are_continuous() {
        let cfg = cfg_small();
        for n in [1u32, 2, 3] {
            for l in [9usize, 19] {
                let basis =
                    build_basis(&cfg, n, &WindowSpec::new(WindowKind::Blackman, l)).unwrap();
                let grid = random_grid(&cfg, 12, 23 + n as u64);
                let frame =
                    apply_smoothing(&grid, &basis, SmoothingMode::LowInterference).unwrap();
                let worst = max_relative_junction_residual(&grid, &frame, &basis).unwrap();
                assert!(worst < 1e-9, "N={n} L={l}: worst relative residual {worst:.2e}");
            }
        }
    }

    #[test]
    fn full_span_junctions_are_continuous() {
        let cfg = cfg_small();
        for n in [1u32, 2, 3] {
            let spec = WindowSpec::new(WindowKind::AllOnes, cfg.samples_per_symbol());
            let basis = build_basis(&cfg, n, &spec).unwrap();
            let grid = random_grid(&cfg, 12, 31 + n as u64);
            let frame = apply_smoothing(&grid, &basis, SmoothingMode::FullSpan).unwrap();
            let worst = max_relative_junction_residual(&grid, &frame, &basis).unwrap();
            assert!(worst < 1e-9, "N={n}: worst relative residual {worst:.2e}");
        }
    }

    #[test]
    fn mode_window_mismatch_is_rejected() {
        let cfg = cfg_small();
        let basis = build_basis(&cfg, 1, &WindowSpec::new(WindowKind::Blackman, 9)).unwrap();
        let grid = random_grid(&cfg, 2, 37);
        assert!(matches!(
            apply_smoothing(&grid, &basis, SmoothingMode::FullSpan),
            Err(SmootherError::ModeMismatch { .. })
        ));
        let full = build_basis(
            &cfg,
            1,
            &WindowSpec::new(WindowKind::AllOnes, cfg.samples_per_symbol()),
        )
        .unwrap();
        assert!(matches!(
            apply_smoothing(&grid, &full, SmoothingMode::LowInterference),
            Err(SmootherError::ModeMismatch { .. })
        ));
    }

    #[test]
    fn window_too_short_for_order() {
        let cfg = cfg_small();
        assert!(matches!(
            build_basis(&cfg, 3, &WindowSpec::new(WindowKind::Blackman, 4)),
            Err(SmootherError::WindowTooShort { .. })
        ));
    }
}
