//! Trap-frequency jitter study: how shot-to-shot drift of the trap
//! frequency washes out the fine structure of the beat spectrum.
//!
//! Each shot sees a trap frequency nu(1 + xi) with xi uniform on
//! [-j, +j]; averaging the population over shots dephases nearby beat
//! lines. The delta-n = 3 group splits by channel into lines a few hundred
//! hertz apart, so it is the first casualty: readable at j = 1e-4, buried
//! at j = 1e-3.
//!
//! Run with: cargo run --release --example jitter_study

use trapspec::rabi::{
    jitter_ensemble, predicted_lines, ChannelSet, RabiInitialState,
    SimOptions, SpectrumOptions,
};
use trapspec::special::AngularMomentumKet;
use trapspec::trap::TrapConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trap = TrapConfig::cesium_khz(4.0)?;
    let set = ChannelSet::cs_f3_default();
    let opts = SimOptions { n_levels: 8, n_basis: 200 };
    let init = RabiInitialState::squeezed(3, 4.0, opts.n_basis)?;
    let target = AngularMomentumKet::new(3, 0, 3, 0)?;
    let (t_total, dt, n_shots, seed) = (0.5, 5e-6, 40, 11);

    // Fine-structure lines of the delta-n = 3 group, predicted from the
    // jitter-free eigensystem.
    let lines = predicted_lines(&set, &init, &target, &trap, &opts)?;
    let group: Vec<_> = lines
        .iter()
        .filter(|l| (l.freq_khz / (2.0 * trap.nu_trap / 1e3)).round() as i32 == 3)
        .collect();
    println!("delta-n = 3 fine structure (jitter free prediction):");
    for l in &group {
        println!(
            "  F = {} n = {} -> F' = {} n' = {}: {:.4} kHz (weight {:.2e})",
            l.big_f, l.n, l.big_f_prime, l.n_prime, l.freq_khz, l.weight
        );
    }

    for jitter in [1e-4, 1e-3] {
        let (_, spec) = jitter_ensemble(
            &set, &init, &target, &trap, t_total, dt, jitter, n_shots, seed, &opts,
            &SpectrumOptions::default(),
        )?;
        println!("\njitter {jitter:.0e}, {n_shots} shots:");
        for l in &group {
            let mag = spec.peak_magnitude_near(l.freq_khz, 0.05);
            let bg = spec.background_near(l.freq_khz, 0.5, 0.05);
            let resolved = spec.peak_resolved(l.freq_khz, 2.0);
            println!(
                "  line {:.4} kHz: peak {mag:.3e}, background {bg:.3e} -> {}",
                l.freq_khz,
                if resolved { "resolved" } else { "washed out" }
            );
        }
    }
    Ok(())
}
