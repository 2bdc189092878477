//! Accuracy versus measurement uncertainty: Monte Carlo sweep of the full
//! inversion pipeline with uniform noise added to every line position.
//!
//! Each simulation draws noisy line positions, runs the chi-squared scan,
//! prior disambiguation and feasibility refinement, and scores the fitted
//! curve against the truth with the integrated percent difference over the
//! ground-to-third-level window.
//!
//! Run with: cargo run --release --example noise_sweep
//! (about two minutes; pass --quick for a fast, noisier variant)

use trapspec::noise::{run_noise_sweep, NoiseSweepConfig, SweepMode};
use trapspec::scattering::ResonanceModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let quick = std::env::args().any(|a| a == "--quick");
    let config = NoiseSweepConfig {
        truth: ResonanceModel::cs_doubly_polarized(),
        trap_khz: 4.0,
        mass_atom: "cs".into(),
        mode: SweepMode::Raman,
        uncertainties_hz: vec![0.1, 1.0, 10.0],
        n_sims: if quick { 3 } else { 8 },
        seed: 42,
        n_lines: 9,
    };
    println!(
        "Raman sweep: {} sims per point, 9 lines, seed {}",
        config.n_sims, config.seed
    );
    let t0 = std::time::Instant::now();
    let points = run_noise_sweep(&config)?;
    println!("\n  u (Hz)   mean error (%)   per-sim errors (%)");
    for p in &points {
        let sims: Vec<String> = p.per_sim_errors.iter().map(|e| format!("{e:.2}")).collect();
        println!(
            "  {:6}   {:>13.3}   [{}]{}",
            p.uncertainty_hz,
            p.mean_error_pct,
            sims.join(", "),
            if p.n_failed > 0 { format!("  ({} failed)", p.n_failed) } else { String::new() }
        );
    }
    println!("\nelapsed {:.1} s", t0.elapsed().as_secs_f64());
    Ok(())
}
