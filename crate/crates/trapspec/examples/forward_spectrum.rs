//! Forward solve: trap eigenenergies of two Cs atoms for a fitted
//! resonance model, plus the non-interacting check.
//!
//! Run with: cargo run --release --example forward_spectrum

use trapspec::scattering::ResonanceModel;
use trapspec::trap::{find_eigenenergies, transition_energies, TrapConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trap = TrapConfig::cesium_khz(4.0)?;
    println!(
        "Cs pair in a {} kHz trap, relative oscillator length l = {:.1} a0",
        trap.nu_trap / 1e3,
        trap.l_rel_a0()
    );

    // Non-interacting limit: levels at (2n + 3/2) hw exactly.
    let free = ResonanceModel::background(0.0);
    let spec = find_eigenenergies(&free, &trap, 5, 16.0)?;
    println!("\nnon-interacting levels (trap units, expect 2n + 1.5):");
    for lvl in &spec.levels {
        println!("  n = {}  E = {:.12} hw", lvl.interval_index, lvl.e_ho);
    }

    // Doubly spin-polarized Cs fit: strong upward shift of every level.
    let model = ResonanceModel::cs_doubly_polarized();
    let spec = find_eigenenergies(&model, &trap, 6, 18.0)?;
    let energies = spec.energies_khz();
    println!("\ninteracting levels for a_b = 36 a0, alpha = -2.049e5 a0 kHz, E_r = 84.72 kHz:");
    for (i, e) in energies.iter().enumerate() {
        println!("  level {i}: {e:.4} kHz");
    }

    let lines = transition_energies(&spec, 0)?;
    println!("\ntransition energies from the ground pair level:");
    for t in &lines {
        println!("  0 -> {}: {:.4} kHz", t.to, t.delta_khz);
    }
    println!("\nground level {:.3} kHz, mean spacing {:.3} kHz", energies[0], {
        let n = energies.len() - 1;
        (energies[n] - energies[0]) / n as f64
    });
    Ok(())
}
