//! Calibration record for the default F=0 channel model.
//!
//! The F=0 reference constants in `rabi::f0_reference_model` were chosen so
//! that, in a 4 kHz Cs trap, the ground pair eigenenergy sits at 4.038 kHz
//! and the χ² scan over exact synthetic data shows its second (alias)
//! minimum at 8.022 kHz. This program re-derives those constants; run it
//! with `--features` nothing, it only prints.

use trapspec::inversion::{chi2_scan, synthesize_transitions, MeasuredSpectrum, ScanOptions};
use trapspec::scattering::ResonanceModel;
use trapspec::trap::TrapConfig;

fn scan_minima(truth: &ResonanceModel, trap: &TrapConfig) -> (f64, Vec<f64>) {
    let (e0, deltas) = synthesize_transitions(truth, trap, 4).unwrap();
    let meas = MeasuredSpectrum::new(deltas, 1.0, trap.clone()).unwrap();
    let opts = ScanOptions::default();
    let result = chi2_scan(&meas, &opts).unwrap();
    (e0, result.minima.iter().map(|m| m.e0_khz).collect())
}

/// Solve alpha so the ground eigenenergy hits `e0_target` (kHz), bisection.
fn solve_alpha(a_b: f64, e_r: f64, trap: &TrapConfig, e0_target: f64) -> f64 {
    let e0_of = |alpha: f64| {
        let m = ResonanceModel::single(a_b, alpha, e_r);
        synthesize_transitions(&m, trap, 2).unwrap().0
    };
    let (mut lo, mut hi) = (1.0e4, 1.0e6);
    assert!((e0_of(lo) - e0_target) * (e0_of(hi) - e0_target) < 0.0, "bracket");
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (e0_of(mid) - e0_target) * (e0_of(lo) - e0_target) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn main() {
    let trap = TrapConfig::cesium_khz(4.0).unwrap();

    // sanity: the published Raman fit must alias at 8.549 / 4.580 kHz
    let raman = ResonanceModel::single(36.0, -2.049e5, 84.72);
    let (e0, minima) = scan_minima(&raman, &trap);
    println!("raman truth E0 = {e0:.4} kHz, scan minima at {minima:?}");

    // F=0 branch: fix E_r, sweep a_b, solve alpha for E0 = 4.038 kHz and
    // report where the alias lands; pick the (a_b, alpha) pair whose alias
    // is nearest 8.022 kHz
    let e_r = 84.72;
    for a_b in [-80.0, -60.0, -40.0, -36.0, -20.0, 0.0, 20.0] {
        let alpha = solve_alpha(a_b, e_r, &trap, 4.038);
        let m = ResonanceModel::single(a_b, alpha, e_r);
        let (e0, minima) = scan_minima(&m, &trap);
        println!("a_b = {a_b:7.1}  alpha = {alpha:.6e}  E0 = {e0:.4}  minima = {minima:?}");
    }
}
