//! Trap configuration and the forward eigenvalue problem.
//!
//! The relative motion of two atoms in an isotropic harmonic trap with a
//! regularized contact interaction has eigenenergies at the intersections of
//! the scaled scattering length a(E)/l with the intercept function
//!
//! ```text
//! f(E) = (1/2) · tan(πE/2 + π/4) · Γ(1/4 + E/2)/Γ(3/4 + E/2)
//! ```
//!
//! with E in units of ℏω and l = sqrt(2ℏ/mω). Internally everything runs in
//! those trap units; physical units appear only at the boundaries.

use crate::constants::{H_PLANCK, HBAR};
use crate::error::{Error, Result};
use crate::special::gamma_ratio;

/// Mass of a single ¹³³Cs atom, kg.
pub const MASS_CS133: f64 = 2.206_95e-25;
/// Mass of a single ⁸⁷Rb atom, kg.
pub const MASS_RB87: f64 = 1.443_16e-25;

/// Look up a named atom preset; `"133Cs"`/`"Cs"` and `"87Rb"`/`"Rb"`.
pub fn atom_mass(name: &str) -> Option<f64> {
    match name {
        "133Cs" | "Cs" | "cs" | "cs133" => Some(MASS_CS133),
        "87Rb" | "Rb" | "rb" | "rb87" => Some(MASS_RB87),
        _ => None,
    }
}

/// Harmonic trap parameters and unit conversions for the relative motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapConfig {
    /// Trap frequency, Hz.
    pub nu_trap: f64,
    /// Single-atom mass, kg.
    pub mass: f64,
}

impl TrapConfig {
    pub fn new(nu_trap_hz: f64, mass_kg: f64) -> Result<Self> {
        if !(nu_trap_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "trap frequency must be positive, got {nu_trap_hz} Hz"
            )));
        }
        if !(mass_kg > 0.0) {
            return Err(Error::InvalidInput(format!(
                "mass must be positive, got {mass_kg} kg"
            )));
        }
        Ok(Self { nu_trap: nu_trap_hz, mass: mass_kg })
    }

    /// Cs trap at the given frequency in kHz.
    pub fn cesium_khz(nu_khz: f64) -> Result<Self> {
        Self::new(nu_khz * 1e3, MASS_CS133)
    }

    /// Angular frequency ω = 2πν, rad/s.
    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.nu_trap
    }

    /// Characteristic relative-motion length l = sqrt(2ℏ/mω), meters.
    ///
    /// The single-atom mass enters as printed; the factor 2 carries the
    /// reduced-mass relative coordinate for a homonuclear pair.
    pub fn l_rel(&self) -> f64 {
        (2.0 * HBAR / (self.mass * self.omega())).sqrt()
    }

    /// l in Bohr radii.
    pub fn l_rel_a0(&self) -> f64 {
        self.l_rel() / crate::constants::BOHR_RADIUS
    }

    /// E/h in Hz for an energy given in ℏω.
    pub fn trap_units_to_hz(&self, e_ho: f64) -> f64 {
        e_ho * self.nu_trap
    }

    /// Energy in ℏω for E/h given in Hz.
    pub fn hz_to_trap_units(&self, e_hz: f64) -> f64 {
        e_hz / self.nu_trap
    }

    /// E/h in kHz for an energy given in ℏω.
    pub fn trap_units_to_khz(&self, e_ho: f64) -> f64 {
        self.trap_units_to_hz(e_ho) * 1e-3
    }

    /// Energy in ℏω for E/h given in kHz.
    pub fn khz_to_trap_units(&self, e_khz: f64) -> f64 {
        self.hz_to_trap_units(e_khz * 1e3)
    }
}

/// An effective scattering length a(E), evaluated at E/h in Hz, in meters.
///
/// Implementors declare the positions of any poles so the eigenenergy solver
/// can subdivide its brackets around them.
pub trait ScatteringLength {
    fn length_m(&self, energy_hz: f64) -> f64;

    /// Pole positions as E/h in Hz.
    fn poles_hz(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Constant scattering length, in meters.
#[derive(Debug, Clone, Copy)]
pub struct ConstantLength(pub f64);

impl ScatteringLength for ConstantLength {
    fn length_m(&self, _energy_hz: f64) -> f64 {
        self.0
    }
}

impl<F: Fn(f64) -> f64> ScatteringLength for F {
    fn length_m(&self, energy_hz: f64) -> f64 {
        self(energy_hz)
    }
}

/// Exclusion window around the tangent poles of f(E), in ℏω.
pub const POLE_WINDOW: f64 = 1e-9;

/// Tangent pole position E = 1/2 + 2k, in ℏω.
pub fn tangent_pole(k: u32) -> f64 {
    0.5 + 2.0 * k as f64
}

/// Index of the tangent-pole interval containing E: interval 0 is (0, 1/2),
/// interval k ≥ 1 is (1/2 + 2(k−1), 1/2 + 2k).
pub fn interval_index(e: f64) -> u32 {
    if e < 0.5 {
        0
    } else {
        ((e - 0.5) / 2.0).floor() as u32 + 1
    }
}

/// Bounds (lo, hi) of tangent-pole interval k in ℏω, clipped to E > 0.
pub fn interval_bounds(k: u32) -> (f64, f64) {
    if k == 0 {
        (0.0, 0.5)
    } else {
        (tangent_pole(k - 1), tangent_pole(k))
    }
}

/// The intercept function f(E), E in ℏω, result in units of l.
pub fn intercept_function(e: f64) -> Result<f64> {
    if !(e > -0.5) {
        return Err(Error::Domain(format!(
            "intercept function requires E > -1/2, got {e}"
        )));
    }
    // distance to the nearest tangent pole E = 1/2 + 2k
    let k = ((e - 0.5) / 2.0).round();
    if k >= 0.0 && (e - (0.5 + 2.0 * k)).abs() < POLE_WINDOW {
        return Err(Error::TangentPole { energy: e, window: POLE_WINDOW });
    }
    let t = (0.5 * std::f64::consts::PI * e + 0.25 * std::f64::consts::PI).tan();
    Ok(0.5 * t * gamma_ratio(e)?)
}

/// One relative-motion eigenenergy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenLevel {
    /// Ordinal index in the spectrum (0 = lowest found).
    pub n: usize,
    /// Energy in ℏω.
    pub e_ho: f64,
    /// Tangent-pole interval holding this level.
    pub interval_index: u32,
}

/// Ordered relative-motion eigenenergies for one trap and one a(E).
#[derive(Debug, Clone)]
pub struct EigenSpectrum {
    pub levels: Vec<EigenLevel>,
    pub trap: TrapConfig,
    /// Tangent-pole intervals scanned without finding a sign change
    /// (possible near-tangency).
    pub missed_intervals: Vec<u32>,
}

impl EigenSpectrum {
    /// Level energies as E/h in kHz.
    pub fn energies_khz(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|l| self.trap.trap_units_to_khz(l.e_ho))
            .collect()
    }
}

/// A transition energy E_i − E_ref in both unit systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub delta_ho: f64,
    pub delta_khz: f64,
}

const GRID_BASE: usize = 200;
const GRID_MAX: usize = 3200;
const ROOT_TOL: f64 = 1e-10;
const EDGE_MARGIN: f64 = 1e-7;

/// Solve a(E) = l·f(E) for the lowest `n_levels` eigenenergies below `e_max`
/// (ℏω). Sign changes of a(E)/l − f(E) are bracketed on each tangent-pole
/// interval, subdividing around declared poles of a(E), then refined by
/// bisection to |ΔE| ≤ 1e-10 ℏω.
pub fn find_eigenenergies<A: ScatteringLength + ?Sized>(
    a_of_e: &A,
    trap: &TrapConfig,
    n_levels: usize,
    e_max: f64,
) -> Result<EigenSpectrum> {
    if n_levels < 1 {
        return Err(Error::InvalidInput("n_levels must be >= 1".into()));
    }
    if !(e_max > 0.5) {
        return Err(Error::InvalidInput(format!(
            "E_max must exceed the first tangent pole, got {e_max}"
        )));
    }
    let l = trap.l_rel();
    let g = |e_ho: f64| -> Result<f64> {
        let a = a_of_e.length_m(trap.trap_units_to_hz(e_ho));
        Ok(a / l - intercept_function(e_ho)?)
    };

    // a(E) pole positions in trap units
    let mut a_poles: Vec<f64> = a_of_e
        .poles_hz()
        .iter()
        .map(|&p| trap.hz_to_trap_units(p))
        .collect();
    a_poles.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mut roots: Vec<(f64, u32)> = Vec::new();
    let mut missed: Vec<u32> = Vec::new();

    let mut k = 0u32;
    loop {
        let (lo, hi) = interval_bounds(k);
        if lo >= e_max {
            break;
        }
        let hi = hi.min(e_max);
        let lo = lo + EDGE_MARGIN;
        let hi = hi - EDGE_MARGIN;
        if hi <= lo {
            k += 1;
            continue;
        }

        // split at declared a(E) poles inside the interval
        let inner: Vec<f64> = a_poles
            .iter()
            .copied()
            .filter(|&p| p > lo && p < hi)
            .collect();
        let grid = if inner.is_empty() {
            GRID_BASE
        } else {
            (GRID_BASE * 2 * (1 + inner.len())).min(GRID_MAX)
        };

        let mut edges = vec![lo];
        for &p in &inner {
            edges.push(p - 1e-9);
            edges.push(p + 1e-9);
        }
        edges.push(hi);

        let mut found_in_interval = false;
        for seg in edges.chunks(2) {
            let (slo, shi) = (seg[0], seg[1]);
            if shi <= slo {
                continue;
            }
            let n_pts = grid.max(2);
            let step = (shi - slo) / n_pts as f64;
            let mut prev_e = slo;
            let mut prev_g = g(prev_e)?;
            for i in 1..=n_pts {
                let e = slo + i as f64 * step;
                let ge = g(e)?;
                if prev_g == 0.0 {
                    roots.push((prev_e, k));
                    found_in_interval = true;
                } else if prev_g.signum() != ge.signum() && prev_g.is_finite() && ge.is_finite() {
                    let root = bisect(&|x| g(x), prev_e, e, prev_g)?;
                    roots.push((root, k));
                    found_in_interval = true;
                }
                prev_e = e;
                prev_g = ge;
            }
        }
        // interval 0 holds a root only for large positive a/l; every higher
        // interval must contain at least one crossing for finite a(E)
        if !found_in_interval && k >= 1 {
            missed.push(k);
        }

        if roots.len() >= n_levels && k >= 1 {
            break;
        }
        k += 1;
    }

    roots.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    if roots.len() < n_levels {
        return Err(Error::Solver(format!(
            "found only {} of {} requested eigenenergies below E_max = {e_max} ℏω \
             (missed intervals: {missed:?})",
            roots.len(),
            n_levels
        )));
    }
    roots.truncate(n_levels);

    let levels = roots
        .into_iter()
        .enumerate()
        .map(|(n, (e_ho, iv))| EigenLevel { n, e_ho, interval_index: iv })
        .collect();
    Ok(EigenSpectrum { levels, trap: *trap, missed_intervals: missed })
}

fn bisect(g: &dyn Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, g_lo: f64) -> Result<f64> {
    let mut sign_lo = g_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= ROOT_TOL {
            return Ok(mid);
        }
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == sign_lo {
            lo = mid;
            sign_lo = gm.signum();
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Transition energies E_i − E_ref for every level i ≠ ref.
pub fn transition_energies(spectrum: &EigenSpectrum, reference_index: usize) -> Result<Vec<Transition>> {
    if reference_index >= spectrum.levels.len() {
        return Err(Error::Index { index: reference_index, len: spectrum.levels.len() });
    }
    let e_ref = spectrum.levels[reference_index].e_ho;
    Ok(spectrum
        .levels
        .iter()
        .filter(|l| l.n != reference_index)
        .map(|l| {
            let d = l.e_ho - e_ref;
            Transition {
                from: reference_index,
                to: l.n,
                delta_ho: d,
                delta_khz: spectrum.trap.trap_units_to_khz(d),
            }
        })
        .collect())
}

// h is used by the io module for joule conversions; referenced here to keep
// the constant set together with the unit conversions.
#[allow(dead_code)]
const _: f64 = H_PLANCK;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn cs4khz() -> TrapConfig {
        TrapConfig::cesium_khz(4.0).unwrap()
    }

    #[test]
    fn unit_round_trip() {
        let trap = cs4khz();
        let e = 2.137_f64;
        let back = trap.khz_to_trap_units(trap.trap_units_to_khz(e));
        assert_relative_eq!(back, e, max_relative = 1e-12);
        // E[kHz] = E[ℏω]·ν[kHz]
        assert_relative_eq!(trap.trap_units_to_khz(2.0), 8.0, max_relative = 1e-12);
    }

    #[test]
    fn characteristic_length_cs() {
        // l = sqrt(2ℏ/mω) for Cs at 4 kHz is about 195 nm
        let l = cs4khz().l_rel();
        assert!((1.9e-7..2.0e-7).contains(&l), "l = {l}");
    }

    #[test]
    fn intercept_function_zeros_and_values() {
        // tan(πE/2 + π/4) vanishes at E = 1.5, 3.5, ...
        assert_abs_diff_eq!(intercept_function(1.5).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(intercept_function(3.5).unwrap(), 0.0, epsilon = 1e-11);
        // E = 0: (1/2)·tan(π/4)·Γ(1/4)/Γ(3/4), from published gamma constants
        let expected = 0.5 * (3.625_609_908_221_908_3 / 1.225_416_702_465_177_6);
        assert_relative_eq!(intercept_function(0.0).unwrap(), expected, max_relative = 1e-11);
        assert!(matches!(
            intercept_function(0.5),
            Err(Error::TangentPole { .. })
        ));
        assert!(intercept_function(2.5 + 5e-10).is_err());
    }

    #[test]
    fn intercept_function_pole_signs() {
        // f → +∞ below each pole, −∞ above it
        for k in 0..4 {
            let p = tangent_pole(k);
            assert!(intercept_function(p - 1e-4).unwrap() > 1e2);
            assert!(intercept_function(p + 1e-4).unwrap() < -1e2);
        }
    }

    #[test]
    fn non_interacting_levels() {
        let trap = cs4khz();
        let spec = find_eigenenergies(&ConstantLength(0.0), &trap, 4, 12.0).unwrap();
        let expect = [1.5, 3.5, 5.5, 7.5];
        for (lvl, &e) in spec.levels.iter().zip(expect.iter()) {
            assert_abs_diff_eq!(lvl.e_ho, e, epsilon = 1e-10);
        }
        assert!(spec.missed_intervals.is_empty());
    }

    #[test]
    fn small_positive_constant_length() {
        // oracle: 1e-14-tolerance bisection of a/l = f(E) done independently
        // on a fine local bracket around the first zero of f
        let trap = cs4khz();
        let a_over_l = 0.1;
        let a = ConstantLength(a_over_l * trap.l_rel());
        let spec = find_eigenenergies(&a, &trap, 1, 4.0).unwrap();

        let mut lo = 1.5f64;
        let mut hi = 2.4f64;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let v = intercept_function(mid).unwrap() - a_over_l;
            if v < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!(spec.levels[0].e_ho > 1.5);
        assert_abs_diff_eq!(spec.levels[0].e_ho, oracle, epsilon = 1e-9);
    }

    #[test]
    fn residual_of_returned_roots() {
        let trap = cs4khz();
        let a = ConstantLength(0.15 * trap.l_rel());
        let spec = find_eigenenergies(&a, &trap, 6, 14.0).unwrap();
        let l = trap.l_rel();
        for lvl in &spec.levels {
            let res = (a.0 - l * intercept_function(lvl.e_ho).unwrap()).abs();
            assert!(res <= 1e-8 * l, "residual {res} at E = {}", lvl.e_ho);
        }
    }

    #[test]
    fn shift_direction_matches_sign_of_a() {
        let trap = cs4khz();
        let free = [1.5, 3.5, 5.5, 7.5];
        for a_over_l in [0.2, 0.29] {
            let spec =
                find_eigenenergies(&ConstantLength(a_over_l * trap.l_rel()), &trap, 4, 12.0)
                    .unwrap();
            for (lvl, &e0) in spec.levels.iter().zip(free.iter()) {
                assert!(lvl.e_ho > e0, "a>0 should shift levels up");
            }
        }
        for a_over_l in [-0.2, -0.29] {
            let spec =
                find_eigenenergies(&ConstantLength(a_over_l * trap.l_rel()), &trap, 4, 12.0)
                    .unwrap();
            for (lvl, &e0) in spec.levels.iter().zip(free.iter()) {
                assert!(lvl.e_ho < e0, "a<0 should shift levels down");
            }
        }
    }

    #[test]
    fn monotone_in_constant_a() {
        let trap = cs4khz();
        let mut prev: Option<Vec<f64>> = None;
        let mut a_over_l = -0.3;
        while a_over_l <= 0.3 {
            let spec =
                find_eigenenergies(&ConstantLength(a_over_l * trap.l_rel()), &trap, 4, 12.0)
                    .unwrap();
            let es: Vec<f64> = spec.levels.iter().map(|l| l.e_ho).collect();
            if let Some(p) = &prev {
                for (e, pe) in es.iter().zip(p.iter()) {
                    assert!(e > pe, "eigenenergies must rise with a");
                }
            }
            prev = Some(es);
            a_over_l += 0.05;
        }
    }

    #[test]
    fn transition_energy_units() {
        let trap = cs4khz();
        let spec = find_eigenenergies(&ConstantLength(0.0), &trap, 4, 12.0).unwrap();
        let tr = transition_energies(&spec, 0).unwrap();
        assert_eq!(tr.len(), 3);
        for (i, t) in tr.iter().enumerate() {
            assert_abs_diff_eq!(t.delta_ho, 2.0 * (i as f64 + 1.0), epsilon = 1e-9);
            assert_abs_diff_eq!(t.delta_khz, 8.0 * (i as f64 + 1.0), epsilon = 1e-8);
            assert!(t.delta_khz > 0.0);
        }
        let single = EigenSpectrum {
            levels: vec![spec.levels[0]],
            trap,
            missed_intervals: vec![],
        };
        assert!(transition_energies(&single, 0).unwrap().is_empty());
        assert!(transition_energies(&spec, 9).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let trap = cs4khz();
        assert!(find_eigenenergies(&ConstantLength(0.0), &trap, 0, 10.0).is_err());
        assert!(find_eigenenergies(&ConstantLength(0.0), &trap, 8, 6.0).is_err());
        assert!(TrapConfig::new(-1.0, 1.0).is_err());
        assert!(TrapConfig::new(4000.0, 0.0).is_err());
    }
}
