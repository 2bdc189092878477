//! Parametric effective-scattering-length models: the resonance form
//! a(E) = a_b + Σ_k α_k/(E − E_r,k), phase-shift tables, and least-squares
//! model fitting via variable projection.

use serde::{Deserialize, Serialize};

use crate::constants::{BOHR_RADIUS, H_PLANCK, HBAR};
use crate::error::{Error, Result};
use crate::trap::ScatteringLength;

/// Exclusion window around model poles, kHz.
pub const MODEL_POLE_WINDOW_KHZ: f64 = 1e-9;

/// One resonance term α/(E − E_r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceTerm {
    /// Strength, a₀·kHz.
    #[serde(rename = "alpha_a0kHz")]
    pub alpha: f64,
    /// Resonance position E_r/h, kHz.
    #[serde(rename = "E_r_kHz")]
    pub e_r: f64,
}

/// Background scattering length plus resonance terms, lengths in Bohr radii
/// and energies as E/h in kHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceModel {
    /// Background scattering length, a₀.
    #[serde(rename = "a_b_a0")]
    pub a_b: f64,
    #[serde(default)]
    pub terms: Vec<ResonanceTerm>,
}

impl ResonanceModel {
    pub fn background(a_b: f64) -> Self {
        Self { a_b, terms: Vec::new() }
    }

    pub fn single(a_b: f64, alpha: f64, e_r: f64) -> Self {
        Self { a_b, terms: vec![ResonanceTerm { alpha, e_r }] }
    }

    /// The doubly-polarized Cs model fitted in a 4 kHz trap:
    /// a_b = 36 a₀, α = −2.049×10⁵ a₀·kHz, E_r/h = 84.72 kHz.
    pub fn cs_doubly_polarized() -> Self {
        Self::single(36.0, -2.049e5, 84.72)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.terms.iter().enumerate() {
            for u in &self.terms[i + 1..] {
                if (t.e_r - u.e_r).abs() < MODEL_POLE_WINDOW_KHZ {
                    return Err(Error::InvalidInput(format!(
                        "resonance positions must be distinct, got {} and {} kHz",
                        t.e_r, u.e_r
                    )));
                }
            }
        }
        Ok(())
    }

    /// Pole positions E_r/h in kHz.
    pub fn poles_khz(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.e_r).collect()
    }

    /// a(E) in a₀ at E/h in kHz.
    pub fn evaluate(&self, e_khz: f64) -> Result<f64> {
        for t in &self.terms {
            if (e_khz - t.e_r).abs() < MODEL_POLE_WINDOW_KHZ {
                return Err(Error::ModelPole { energy_khz: e_khz });
            }
        }
        Ok(self.evaluate_unchecked(e_khz))
    }

    /// a(E) without the pole-window check; infinities propagate to the caller.
    pub fn evaluate_unchecked(&self, e_khz: f64) -> f64 {
        self.a_b
            + self
                .terms
                .iter()
                .map(|t| t.alpha / (e_khz - t.e_r))
                .sum::<f64>()
    }
}

impl ScatteringLength for ResonanceModel {
    fn length_m(&self, energy_hz: f64) -> f64 {
        self.evaluate_unchecked(energy_hz * 1e-3) * BOHR_RADIUS
    }

    fn poles_hz(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.e_r * 1e3).collect()
    }
}

/// Tabulated s-wave phase shift δ₀(k), k strictly increasing in 1/m.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShiftTable {
    rows: Vec<(f64, f64)>,
}

impl PhaseShiftTable {
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidInput("phase-shift table needs >= 2 rows".into()));
        }
        for w in rows.windows(2) {
            if !(w[1].0 > w[0].0) || !(w[0].0 > 0.0) {
                return Err(Error::InvalidInput(
                    "phase-shift table k values must be positive and strictly increasing".into(),
                ));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }
}

/// Result of a phase-shift lookup; `near_pole` flags a δ₀ = π/2 crossing
/// inside the interpolation cell, where −tan δ₀/k is untrustworthy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthFromPhase {
    /// a(E) in a₀.
    pub a_a0: f64,
    pub near_pole: bool,
}

/// a(E) = −tan δ₀(k)/k with k = sqrt(m·E)/ℏ and δ₀ linearly interpolated.
/// `mass_kg` is the single-atom mass, `e_khz` is E/h in kHz.
pub fn effective_length_from_phase_shift(
    table: &PhaseShiftTable,
    mass_kg: f64,
    e_khz: f64,
) -> Result<LengthFromPhase> {
    if !(e_khz > 0.0) {
        return Err(Error::Domain(format!("energy must be positive, got {e_khz} kHz")));
    }
    let e_joule = H_PLANCK * e_khz * 1e3;
    let k = (mass_kg * e_joule).sqrt() / HBAR;
    let rows = &table.rows;
    if k < rows[0].0 || k > rows[rows.len() - 1].0 {
        return Err(Error::Domain(format!(
            "k = {k:.6e} 1/m outside table range [{:.6e}, {:.6e}]",
            rows[0].0,
            rows[rows.len() - 1].0
        )));
    }
    let idx = match rows.binary_search_by(|r| r.0.partial_cmp(&k).unwrap()) {
        Ok(i) => i.min(rows.len() - 2),
        Err(i) => (i - 1).min(rows.len() - 2),
    };
    let (k0, d0) = rows[idx];
    let (k1, d1) = rows[idx + 1];
    let frac = (k - k0) / (k1 - k0);
    let delta = d0 + frac * (d1 - d0);

    // tan has poles at odd multiples of π/2; flag a crossing within the cell
    let half_pi = std::f64::consts::FRAC_PI_2;
    let cell0 = ((d0 - half_pi) / std::f64::consts::PI).floor();
    let cell1 = ((d1 - half_pi) / std::f64::consts::PI).floor();
    let near_pole = cell0 != cell1;

    Ok(LengthFromPhase {
        a_a0: -delta.tan() / k / BOHR_RADIUS,
        near_pole,
    })
}

/// Controls for the variable-projection fit.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// E_r search window, kHz.
    pub e_r_window: (f64, f64),
    /// Coarse grid step over the window, kHz.
    pub e_r_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { e_r_window: (-500.0, 500.0), e_r_step: 0.25 }
    }
}

/// A fitted model together with its RMS residual in a₀.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub model: ResonanceModel,
    pub rms_residual: f64,
}

// samples within this window of a trial E_r are excluded from the linear
// subproblem
const SAMPLE_EXCLUSION_KHZ: f64 = 1e-6;
const GOLDEN_TOL_KHZ: f64 = 1e-7;

/// Linear subproblem: best (a_b, α_1..α_t) for fixed resonance positions.
/// Returns the coefficients and the sum of squared residuals.
fn linear_fit(samples: &[(f64, f64)], e_rs: &[f64]) -> Option<(Vec<f64>, f64)> {
    linear_fit_weighted(samples, None, e_rs)
}

/// Weighted linear least squares in (a_b, alpha_t) at fixed pole positions.
/// `weights` runs parallel to `samples`; `None` means unit weights.
fn linear_fit_weighted(
    samples: &[(f64, f64)],
    weights: Option<&[f64]>,
    e_rs: &[f64],
) -> Option<(Vec<f64>, f64)> {
    let usable: Vec<usize> = (0..samples.len())
        .filter(|&i| {
            let e = samples[i].0;
            e_rs.iter().all(|er| (e - er).abs() > SAMPLE_EXCLUSION_KHZ)
        })
        .collect();
    let n_par = 1 + e_rs.len();
    if usable.len() < n_par {
        return None;
    }
    // normal equations, tiny and well within f64 for n_par <= 3
    let mut ata = vec![vec![0.0f64; n_par]; n_par];
    let mut atb = vec![0.0f64; n_par];
    for &i in &usable {
        let (e, a) = samples[i];
        let w = weights.map_or(1.0, |ws| ws[i]);
        let mut row = Vec::with_capacity(n_par);
        row.push(1.0);
        for &er in e_rs {
            row.push(1.0 / (e - er));
        }
        for i in 0..n_par {
            for j in 0..n_par {
                ata[i][j] += w * row[i] * row[j];
            }
            atb[i] += w * row[i] * a;
        }
    }
    let coef = solve_dense(&mut ata, &mut atb)?;
    let mut ssr = 0.0;
    for &i in &usable {
        let (e, a) = samples[i];
        let w = weights.map_or(1.0, |ws| ws[i]);
        let mut pred = coef[0];
        for (t, &er) in e_rs.iter().enumerate() {
            pred += coef[1 + t] / (e - er);
        }
        let r = a - pred;
        ssr += w * r * r;
    }
    Some((coef, ssr))
}

/// Gaussian elimination with partial pivoting on a small system.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
        if !x[col].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// SSR as a function of a single E_r (other resonance positions fixed).
fn ssr_at(samples: &[(f64, f64)], fixed: &[f64], e_r: f64) -> f64 {
    ssr_at_weighted(samples, None, fixed, e_r)
}

fn ssr_at_weighted(
    samples: &[(f64, f64)],
    weights: Option<&[f64]>,
    fixed: &[f64],
    e_r: f64,
) -> f64 {
    let mut e_rs = fixed.to_vec();
    e_rs.push(e_r);
    match linear_fit_weighted(samples, weights, &e_rs) {
        Some((_, ssr)) => ssr,
        None => f64::INFINITY,
    }
}

/// Golden-section minimization of `f` on [lo, hi] to `tol`.
pub(crate) fn golden_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Best single-resonance fit with E_r restricted to the given disjoint
/// segments. Returns the fitted model and the sum of squared residuals.
/// Used by the inversion scan, where E_r must stay clear of the sample
/// energies.
pub fn fit_single_resonance_segments(
    samples: &[(f64, f64)],
    segments: &[(f64, f64)],
    step: f64,
) -> Option<(ResonanceModel, f64)> {
    fit_single_resonance_segments_weighted(samples, None, segments, step)
}

/// Weighted variant of [`fit_single_resonance_segments`]; `weights` runs
/// parallel to `samples`, `None` means unit weights.
pub fn fit_single_resonance_segments_weighted(
    samples: &[(f64, f64)],
    weights: Option<&[f64]>,
    segments: &[(f64, f64)],
    step: f64,
) -> Option<(ResonanceModel, f64)> {
    let mut best: Option<(f64, f64, (f64, f64))> = None;
    for &(lo, hi) in segments {
        if !(hi > lo) {
            continue;
        }
        let n = ((hi - lo) / step).ceil().max(1.0) as usize;
        for i in 0..=n {
            let er = lo + (hi - lo) * i as f64 / n as f64;
            let ssr = ssr_at_weighted(samples, weights, &[], er);
            if ssr.is_finite() && best.map_or(true, |(_, b, _)| ssr < b) {
                best = Some((er, ssr, (lo, hi)));
            }
        }
    }
    let (er0, _, (slo, shi)) = best?;
    let blo = (er0 - step).max(slo);
    let bhi = (er0 + step).min(shi);
    let er = golden_min(
        &|x| ssr_at_weighted(samples, weights, &[], x),
        blo,
        bhi,
        GOLDEN_TOL_KHZ,
    );
    let (coef, ssr) = linear_fit_weighted(samples, weights, &[er])?;
    Some((
        ResonanceModel::single(coef[0], coef[1], er),
        ssr,
    ))
}

/// Least-squares fit of the resonance model to (E, a) samples, linear in
/// (a_b, α) with an outer grid-plus-golden search over each E_r.
pub fn fit_model_to_curve(
    samples: &[(f64, f64)],
    n_terms: usize,
    opts: &FitOptions,
) -> Result<ModelFit> {
    if n_terms == 0 || n_terms > 2 {
        return Err(Error::InvalidInput(format!("n_terms must be 1 or 2, got {n_terms}")));
    }
    let min_samples = if n_terms == 1 { 4 } else { 6 };
    if samples.len() < min_samples {
        return Err(Error::InvalidInput(format!(
            "need >= {min_samples} samples for {n_terms} term(s), got {}",
            samples.len()
        )));
    }
    for (i, (e, _)) in samples.iter().enumerate() {
        for (f, _) in &samples[i + 1..] {
            if (e - f).abs() < SAMPLE_EXCLUSION_KHZ {
                return Err(Error::InvalidInput("sample energies must be distinct".into()));
            }
        }
    }

    let (lo, hi) = opts.e_r_window;
    let n_grid = ((hi - lo) / opts.e_r_step).ceil() as usize;
    let grid: Vec<f64> = (0..=n_grid).map(|i| lo + i as f64 * opts.e_r_step).collect();

    let fixed: Vec<f64> = Vec::new();
    let scan = |fixed: &[f64]| -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for &er in &grid {
            let ssr = ssr_at(samples, fixed, er);
            if ssr.is_finite() && best.map_or(true, |(_, b)| ssr < b) {
                best = Some((er, ssr));
            }
        }
        let (er0, _) = best?;
        let blo = (er0 - opts.e_r_step).max(lo);
        let bhi = (er0 + opts.e_r_step).min(hi);
        let er = golden_min(&|x| ssr_at(samples, fixed, x), blo, bhi, GOLDEN_TOL_KHZ);
        Some((er, ssr_at(samples, fixed, er)))
    };

    let e_rs: Vec<f64> = if n_terms == 1 {
        let (er, _) = scan(&fixed).ok_or_else(|| {
            Error::Fit("no E_r grid point yields a finite residual".into())
        })?;
        vec![er]
    } else {
        // alternate one-dimensional refinements from a coarse pair scan
        let mut best: Option<(f64, f64, f64)> = None;
        for (i, &er1) in grid.iter().enumerate() {
            for &er2 in &grid[i + 1..] {
                let ssr = {
                    match linear_fit(samples, &[er1, er2]) {
                        Some((_, s)) => s,
                        None => continue,
                    }
                };
                if best.map_or(true, |(_, _, b)| ssr < b) {
                    best = Some((er1, er2, ssr));
                }
            }
        }
        let (mut er1, mut er2, _) =
            best.ok_or_else(|| Error::Fit("no E_r grid point yields a finite residual".into()))?;
        for _ in 0..4 {
            er1 = golden_min(
                &|x| ssr_at(samples, &[er2], x),
                (er1 - opts.e_r_step).max(lo),
                (er1 + opts.e_r_step).min(hi),
                GOLDEN_TOL_KHZ,
            );
            er2 = golden_min(
                &|x| ssr_at(samples, &[er1], x),
                (er2 - opts.e_r_step).max(lo),
                (er2 + opts.e_r_step).min(hi),
                GOLDEN_TOL_KHZ,
            );
        }
        vec![er1, er2]
    };

    let (coef, ssr) = linear_fit(samples, &e_rs)
        .ok_or_else(|| Error::Fit("linear subproblem became singular".into()))?;
    let model = ResonanceModel {
        a_b: coef[0],
        terms: e_rs
            .iter()
            .zip(&coef[1..])
            .map(|(&e_r, &alpha)| ResonanceTerm { alpha, e_r })
            .collect(),
    };
    Ok(ModelFit {
        model,
        rms_residual: (ssr / samples.len() as f64).sqrt(),
    })
}
