//! Rabi-oscillation beats: population dynamics of a driven atom pair and
//! the beat spectrum whose peaks sit at eigenenergy differences.
//!
//! The initial |3,3>|3,-3> pair decomposes over total-F channels F = 0, 2,
//! 4, 6; each channel evolves with its own interaction-shifted spectrum, so
//! the return population beats at every eigenenergy difference, grouped by
//! the change in vibrational quantum number (delta-n near 0, 8, 16 kHz...).
//!
//! Run with: cargo run --release --example rabi_beats

use trapspec::rabi::{
    assign_lines, beat_spectrum, predicted_lines, simulate_population,
    ChannelSet, RabiInitialState, SimOptions, SpectrumOptions,
};
use trapspec::special::AngularMomentumKet;
use trapspec::trap::TrapConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trap = TrapConfig::cesium_khz(4.0)?;
    let set = ChannelSet::cs_f3_default();
    let opts = SimOptions { n_levels: 10, n_basis: 200 };

    // Ground state of a 4x-squeezed trap: spreads weight over many levels
    // so that delta-n > 0 beats are visible.
    let init = RabiInitialState::squeezed(3, 4.0, opts.n_basis)?;
    let target = AngularMomentumKet::new(3, 0, 3, 0)?;

    let (t_total, dt) = (0.5, 4e-6);
    let series = simulate_population(&set, &init, &target, &trap, t_total, dt, &opts)?;
    println!(
        "simulated P(t) for {t_total} s at dt = {dt} s ({} samples)",
        series.p.len()
    );
    for (t, p) in series.times().zip(&series.p).step_by(series.p.len() / 8) {
        println!("  t = {t:.3} s  P = {p:.4}");
    }

    // Low threshold: the delta-n > 0 beat groups sit orders of magnitude
    // below the DC peak.
    let spec_opts = SpectrumOptions { zero_pad_factor: 4, peak_threshold: 0.002 };
    let mut spec = beat_spectrum(&series, &trap, &spec_opts)?;
    let lines = predicted_lines(&set, &init, &target, &trap, &opts)?;
    assign_lines(&mut spec, &lines, 2.0);

    println!("\nbeat peaks (bin {:.2} Hz):", spec.bin_khz() * 1e3);
    for peak in &spec.peaks {
        match &peak.assignment {
            Some(a) => println!(
                "  {:+9.4} kHz  |A| = {:.3e}  dn = {}  F = {} n = {} -> F' = {} n' = {}  (predicted {:.4} kHz)",
                peak.freq_khz, peak.magnitude, peak.delta_n, a.big_f, a.n, a.big_f_prime, a.n_prime,
                a.predicted_khz
            ),
            None => println!(
                "  {:+9.4} kHz  |A| = {:.3e}  dn = {}  (unassigned)",
                peak.freq_khz, peak.magnitude, peak.delta_n
            ),
        }
    }
    Ok(())
}
