//! Effective scattering length from a tabulated phase shift, and a model
//! round trip: a(E) = -tan d0(k)/k evaluated from a synthetic phase-shift
//! table, then refit with the single-resonance form.
//!
//! Run with: cargo run --release --example phase_shift_roundtrip

use trapspec::constants::{BOHR_RADIUS, HBAR, H_PLANCK};
use trapspec::scattering::{
    effective_length_from_phase_shift, fit_model_to_curve, FitOptions, PhaseShiftTable,
    ResonanceModel,
};
use trapspec::trap::atom_mass;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mass = atom_mass("cs").expect("known atom");
    let truth = ResonanceModel::cs_doubly_polarized();

    // Build the phase-shift table the model itself implies,
    // d0(k) = -atan(k a(E)), on a dense k grid covering 1..40 kHz.
    let k_of = |e_khz: f64| (mass * H_PLANCK * e_khz * 1e3).sqrt() / HBAR;
    let mut rows = Vec::new();
    for i in 0..400 {
        let e = 1.0 + 39.0 * i as f64 / 399.0;
        let k = k_of(e);
        let a_m = truth.evaluate(e)? * BOHR_RADIUS;
        rows.push((k, -(k * a_m).atan()));
    }
    let table = PhaseShiftTable::new(rows)?;

    // Read a(E) back off the table and compare with the generator.
    println!("  E (kHz)    a from table (a0)    a from model (a0)");
    let mut samples = Vec::new();
    for &e in &[2.0, 6.0, 10.0, 14.0, 18.0, 22.0, 26.0, 30.0] {
        let got = effective_length_from_phase_shift(&table, mass, e)?;
        println!(
            "  {e:7.2}    {:16.2}    {:16.2}{}",
            got.a_a0,
            truth.evaluate(e)?,
            if got.near_pole { "  (near pole)" } else { "" }
        );
        samples.push((e, got.a_a0));
    }

    // Round trip: fit the resonance form to the tabulated curve.
    let fit = fit_model_to_curve(&samples, 1, &FitOptions::default())?;
    println!(
        "\nrefit: a_b = {:.2} a0, alpha = {:.4e} a0 kHz, E_r = {:.2} kHz  (ssr {:.2e})",
        fit.model.a_b, fit.model.terms[0].alpha, fit.model.terms[0].e_r, fit.rms_residual
    );
    println!(
        "truth: a_b = {:.2} a0, alpha = {:.4e} a0 kHz, E_r = {:.2} kHz",
        truth.a_b, truth.terms[0].alpha, truth.terms[0].e_r
    );
    Ok(())
}
