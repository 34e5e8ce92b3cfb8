//! Quick invariant checks runnable from the CLI.
//!
//! These mirror a fast subset of the module test suites so a deployed binary
//! can sanity-check itself; each check returns a name and a pass flag plus an
//! optional note for report-only observations.

use crate::channel::{apply_multipath, awgn, draw_realization, eva_profile, ChannelProfile};
use crate::metrics::{smooth_power_monte_carlo, smooth_power_trace, smooth_power_two_traces};
use crate::precoder::{build_precoder, continuity_residual, derivative_scales, precode_sequence};
use crate::receiver::{demodulate, equalize_zf, measure};
use crate::smoother::{
    apply_smoothing, build_basis, max_relative_junction_residual, SmoothingMode, WindowKind,
    WindowSpec,
};
use crate::waveform::{map_bits, modulate_frame, modulate_symbol, Modulation, OfdmConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub note: String,
}

fn check(name: &'static str, passed: bool, note: String) -> CheckResult {
    CheckResult { name, passed, note }
}

/// Run the quick property suite on the desk configuration.
pub fn run_quick(seed: u64) -> Vec<CheckResult> {
    let cfg = OfdmConfig::desk();
    let m = Modulation::Qam16;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();

    // Modulator round trip and CP structure.
    let bits: Vec<u8> = (0..8 * cfg.subcarrier_count() * m.bits_per_symbol())
        .map(|_| rng.random_range(0..2) as u8)
        .collect();
    let grid = map_bits(&bits, m, &cfg).unwrap();
    let block = modulate_symbol(&grid.symbols[0], &cfg).unwrap();
    let cp_ok = (0..cfg.cp_len).all(|i| block.samples[i] == block.samples[i + cfg.fft_len]);
    results.push(check("cyclic-prefix copy", cp_ok, String::new()));
    let frame = modulate_frame(&grid, &cfg).unwrap();
    let rx = demodulate(&frame, &cfg).unwrap();
    let rt = rx
        .iter()
        .zip(&grid.symbols)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max);
    results.push(check("demodulate inverts modulate", rt < 1e-10, format!("max err {rt:.2e}")));

    // Projector algebra.
    let pm = build_precoder(&cfg, 2).unwrap();
    let herm = pm.p.sub(&pm.p.adjoint()).max_abs();
    let idem = pm.p.mul(&pm.p).sub(&pm.p).max_abs();
    let trace = (pm.p.trace().re - 3.0).abs();
    results.push(check(
        "projector algebra",
        herm < 1e-10 && idem < 1e-10 && trace < 1e-9,
        format!("|P-P^H| {herm:.1e}, |P^2-P| {idem:.1e}, |tr-3| {trace:.1e}"),
    ));

    // Precoded continuity.
    let coded = precode_sequence(&grid, &pm);
    let scales = derivative_scales(&coded.symbols, 2, &cfg).unwrap();
    let mut worst = 0.0f64;
    for w in coded.symbols.windows(2) {
        for (n, r) in continuity_residual(&w[0], &w[1], 2, &cfg).unwrap().iter().enumerate() {
            worst = worst.max(r.norm() / scales[n].max(f64::MIN_POSITIVE));
        }
    }
    results.push(check("precoded junctions continuous", worst < 1e-9, format!("{worst:.2e}")));

    // Smoothed continuity, both modes.
    let basis = build_basis(&cfg, 2, &WindowSpec::new(WindowKind::Blackman, 72)).unwrap();
    let sm = apply_smoothing(&grid, &basis, SmoothingMode::LowInterference).unwrap();
    let worst_low = max_relative_junction_residual(&grid, &sm, &basis).unwrap();
    let full = build_basis(&cfg, 2, &WindowSpec::new(WindowKind::AllOnes, cfg.samples_per_symbol()))
        .unwrap();
    let smf = apply_smoothing(&grid, &full, SmoothingMode::FullSpan).unwrap();
    let worst_full = max_relative_junction_residual(&grid, &smf, &full).unwrap();
    results.push(check(
        "smoothed junctions continuous",
        worst_low < 1e-9 && worst_full < 1e-9,
        format!("low {worst_low:.2e}, full {worst_full:.2e}"),
    ));

    // Correction-energy trace identities.
    let tr = smooth_power_trace(&basis);
    let tr2 = smooth_power_two_traces(&basis);
    let mc = smooth_power_monte_carlo(&basis, m, 4000, seed ^ 0x5151);
    results.push(check(
        "correction energy trace",
        (tr - tr2).abs() < 1e-10 * tr && (mc - tr).abs() < 0.05 * tr,
        format!("trace {tr:.3e}, two-trace {tr2:.3e}, mc {mc:.3e}"),
    ));
    // Report-only: energy trend with support length.
    let e72 = smooth_power_trace(&basis);
    let e144 =
        smooth_power_trace(&build_basis(&cfg, 2, &WindowSpec::new(WindowKind::Blackman, 144)).unwrap());
    results.push(check(
        "correction energy vs support (report only)",
        true,
        format!("L=72: {e72:.3e}, L=144: {e144:.3e} ({})", if e144 < e72 { "decreasing" } else { "not decreasing" }),
    ));

    // Channel linearity and equalizer round trip.
    let profile = eva_profile(&cfg);
    let r = draw_realization(&profile, seed ^ 0xABCD, 0);
    let faded = apply_multipath(&frame, &profile, &r).unwrap();
    let noisy = awgn(&faded, 0.0, 0).unwrap();
    let rx2 = demodulate(&noisy, &cfg).unwrap();
    let (eq, erased) = equalize_zf(&rx2, &r, &profile, &cfg);
    let report = measure(&bits, &eq, m).unwrap();
    results.push(check(
        "fading channel with known CSI",
        erased.is_empty() && report.bit_errors == 0 && report.evm < 1e-8,
        format!("evm {:.2e}", report.evm),
    ));

    // Profile normalization.
    let ok_profile = (profile.total_power() - 1.0).abs() < 1e-12
        && profile.path_count() == 9
        && ChannelProfile::single_path(&cfg).delays_samples == vec![0];
    results.push(check("channel profile normalization", ok_profile, String::new()));

    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_is_green() {
        let results = run_quick(7);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.note);
        }
        assert!(results.len() >= 8);
    }
}
