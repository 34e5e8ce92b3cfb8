// scratch probe: which scheme/config reaches 40 dB suppression at 1.2x edge
use ncofdm::precoder::{build_precoder, precode_sequence};
use ncofdm::smoother::{apply_smoothing, build_basis, SmoothingMode, WindowKind, WindowSpec};
use ncofdm::spectrum::welch_psd;
use ncofdm::waveform::{map_bits, modulate_frame, Modulation, OfdmConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let cfg = OfdmConfig::paper_sec5();
    let m = Modulation::Qam16;
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let bits: Vec<u8> = (0..2000 * cfg.subcarrier_count() * m.bits_per_symbol())
        .map(|_| rng.random_range(0..2) as u8).collect();
    let grid = map_bits(&bits, m, &cfg).unwrap();
    let freqs = [140.0f64, 153.6, 170.0, 200.0, 250.0, 300.0];
    let plain = welch_psd(&modulate_frame(&grid, &cfg).unwrap(), 4096, 1024, &cfg).unwrap();
    print!("{:<22}", "plain");
    for f in freqs { print!("{:>8.1}", plain.value_at(f)); }
    println!();
    for (label, n, l) in [("td-lowint N=2 L=144", 2u32, 144usize), ("td-lowint N=2 L=288", 2, 288),
                          ("td-lowint N=2 L=432", 2, 432), ("td-lowint N=3 L=144", 3, 144)] {
        let basis = build_basis(&cfg, n, &WindowSpec::new(WindowKind::Blackman, l)).unwrap();
        let frame = apply_smoothing(&grid, &basis, SmoothingMode::LowInterference).unwrap();
        let w = welch_psd(&frame.block, 4096, 1024, &cfg).unwrap();
        print!("{label:<22}");
        for f in freqs { print!("{:>8.1}", w.value_at(f)); }
        println!();
    }
    for n in [2u32, 3] {
        let pm = build_precoder(&cfg, n).unwrap();
        let coded = precode_sequence(&grid, &pm);
        let w = welch_psd(&modulate_frame(&coded, &cfg).unwrap(), 4096, 1024, &cfg).unwrap();
        print!("nc-precoder N={n}      ");
        for f in freqs { print!("{:>8.1}", w.value_at(f)); }
        println!();
    }
    let full = build_basis(&cfg, 2, &WindowSpec::new(WindowKind::AllOnes, cfg.samples_per_symbol())).unwrap();
    let frame = apply_smoothing(&grid, &full, SmoothingMode::FullSpan).unwrap();
    let w = welch_psd(&frame.block, 4096, 1024, &cfg).unwrap();
    print!("{:<22}", "td-full N=2");
    for f in freqs { print!("{:>8.1}", w.value_at(f)); }
    println!();
    println!("freqs: {freqs:?}");
}
