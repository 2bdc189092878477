//! Inverting measured transition energies back into a resonance model.
//!
//! Only energy differences are observable, so the absolute reference
//! eigenenergy E₀ is itself a fit parameter. For each trial E₀ the implied
//! eigenenergies E_i = E₀ + ΔE_i must sit on the intercept curve, giving the
//! least-squares objective
//!
//! ```text
//! χ²(E₀) = Σ_i | a(E_i) − l·f(E_i) |²
//! ```
//!
//! minimized over (a_b, α, E_r) by variable projection. Near-zero minima of
//! χ²(E₀) are candidate reference energies; exact data generically yields the
//! true E₀ plus one alias, separated by a prior on the scattering length or
//! by a second measurement at a different trap frequency.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scattering::{fit_single_resonance_segments_weighted, golden_min, ResonanceModel};
use crate::trap::{intercept_function, interval_index, TrapConfig};

/// Transition energies measured relative to an unknown reference level.
#[derive(Debug, Clone)]
pub struct MeasuredSpectrum {
    /// E_i − E_0 for i = 1..N, kHz, strictly increasing.
    pub delta_e_khz: Vec<f64>,
    /// Per-line 1σ uncertainty, Hz. Enters the Monte Carlo harness only;
    /// the χ² residuals themselves are unweighted.
    pub sigma_hz: f64,
    pub trap: TrapConfig,
}

impl MeasuredSpectrum {
    pub fn new(delta_e_khz: Vec<f64>, sigma_hz: f64, trap: TrapConfig) -> Result<Self> {
        if delta_e_khz.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "need >= 3 transition energies (4 eigenenergies) for a 1-term model, got {}",
                delta_e_khz.len()
            )));
        }
        let mut prev = 0.0;
        for &d in &delta_e_khz {
            if !(d > prev) {
                return Err(Error::InvalidInput(
                    "transition energies must be positive and strictly increasing".into(),
                ));
            }
            prev = d;
        }
        Ok(Self { delta_e_khz, sigma_hz, trap })
    }
}

/// One grid point of the χ²(E₀) scan. `chi2` is `None` where the point was
/// excluded (an implied eigenenergy inside a tangent-pole window, or two
/// eigenenergies sharing one interval).
#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub e0_khz: f64,
    pub chi2: Option<f64>,
}

/// A refined near-zero local minimum of χ²(E₀).
#[derive(Debug, Clone, Serialize)]
pub struct Minimum {
    pub e0_khz: f64,
    pub chi2: f64,
    pub model: ResonanceModel,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub scan: Vec<ScanPoint>,
    pub minima: Vec<Minimum>,
    pub selected: Option<usize>,
    pub trap: TrapConfig,
    pub delta_e_khz: Vec<f64>,
    /// χ² acceptance threshold used for the minima, a₀².
    pub threshold: f64,
    pub warnings: Vec<String>,
}

impl FitResult {
    /// Highest implied eigenenergy for a given candidate reference energy.
    pub fn e_top_khz(&self, e0_khz: f64) -> f64 {
        e0_khz + self.delta_e_khz.last().copied().unwrap_or(0.0)
    }
}

/// Scan controls; defaults follow the module conventions.
#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    /// E₀ window in kHz; `None` uses (0.05, 2.45) ℏω converted to kHz.
    pub e0_window_khz: Option<(f64, f64)>,
    /// E₀ grid step, kHz.
    pub grid_step_khz: f64,
    /// Overall E_r search range, kHz.
    pub e_r_range_khz: (f64, f64),
    /// E_r grid step, kHz.
    pub e_r_step_khz: f64,
    /// Margin keeping E_r away from the implied eigenenergies, kHz.
    pub e_r_margin_khz: f64,
    /// χ² threshold in a₀²; `None` uses 1e-2 + 100 σ² with σ the line
    /// uncertainty in Hz.
    pub threshold: Option<f64>,
    /// Weight each residual by the inverse squared slope of the intercept
    /// curve at its sample energy (normalized to the reference line). With
    /// equal line-position uncertainty this is the maximum-likelihood
    /// weighting; exact data has the same zero set either way.
    pub sensitivity_weights: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            e0_window_khz: None,
            grid_step_khz: 0.02,
            e_r_range_khz: (-500.0, 500.0),
            e_r_step_khz: 0.25,
            e_r_margin_khz: 1.0,
            threshold: None,
            sensitivity_weights: true,
        }
    }
}

const POLE_EXCLUSION_HO: f64 = 1e-6;
const E0_REFINE_TOL_KHZ: f64 = 1e-3;

/// χ² for a fixed E₀, with the fitted model. `None` when the point is
/// excluded by the pole window or the one-level-per-interval constraint.
fn inner_fit(
    meas: &MeasuredSpectrum,
    e0_khz: f64,
    opts: &ScanOptions,
) -> Option<(f64, ResonanceModel)> {
    let (samples, weights, _) = implied_samples(meas, e0_khz, opts)?;
    fit_prepared(&samples, weights.as_deref(), opts)
}

/// The (E_i, l·f(E_i)) samples implied by a candidate reference energy,
/// the sensitivity weights (when enabled), and the slope of the intercept
/// curve at each sample in a₀ per kHz. `None` when the candidate is
/// excluded by the pole window or the interval constraint.
fn implied_samples(
    meas: &MeasuredSpectrum,
    e0_khz: f64,
    opts: &ScanOptions,
) -> Option<(Vec<(f64, f64)>, Option<Vec<f64>>, Vec<f64>)> {
    let trap = &meas.trap;
    let l_a0 = trap.l_rel_a0();

    let mut energies = Vec::with_capacity(meas.delta_e_khz.len() + 1);
    energies.push(e0_khz);
    energies.extend(meas.delta_e_khz.iter().map(|d| e0_khz + d));

    let mut samples = Vec::with_capacity(energies.len());
    let mut slopes = Vec::with_capacity(energies.len());
    let mut intervals = Vec::with_capacity(energies.len());
    for &e_khz in &energies {
        let e_ho = trap.khz_to_trap_units(e_khz);
        if e_ho <= 0.0 {
            return None;
        }
        let k = ((e_ho - 0.5) / 2.0).round();
        if k >= 0.0 && (e_ho - (0.5 + 2.0 * k)).abs() < POLE_EXCLUSION_HO {
            return None;
        }
        intervals.push(interval_index(e_ho));
        let f = intercept_function(e_ho).ok()?;
        samples.push((e_khz, l_a0 * f));
        let h = 1e-7;
        let f_hi = intercept_function(e_ho + h).ok()?;
        let f_lo = intercept_function(e_ho - h).ok()?;
        let dho_dkhz = trap.khz_to_trap_units(e_khz + 1.0) - e_ho;
        slopes.push(l_a0 * (f_hi - f_lo) / (2.0 * h) * dho_dkhz);
    }
    // at most one eigenenergy per tangent interval
    for w in intervals.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    let weights = opts.sensitivity_weights.then(|| {
        let s0 = slopes[0];
        slopes.iter().map(|si| (s0 / si).powi(2)).collect::<Vec<f64>>()
    });
    Some((samples, weights, slopes))
}

fn fit_prepared(
    samples: &[(f64, f64)],
    weights: Option<&[f64]>,
    opts: &ScanOptions,
) -> Option<(f64, ResonanceModel)> {
    let e_lo = samples[0].0 - opts.e_r_margin_khz;
    let e_hi = samples[samples.len() - 1].0 + opts.e_r_margin_khz;
    let segments = [
        (opts.e_r_range_khz.0, e_lo),
        (e_hi, opts.e_r_range_khz.1),
    ];
    let (model, chi2) =
        fit_single_resonance_segments_weighted(samples, weights, &segments, opts.e_r_step_khz)?;
    Some((chi2, model))
}

/// Best fit at a single fixed reference energy.
pub fn fit_at(meas: &MeasuredSpectrum, e0_khz: f64, opts: &ScanOptions) -> Option<Minimum> {
    let (chi2, model) = inner_fit(meas, e0_khz, opts)?;
    Some(Minimum { e0_khz, chi2, model })
}

/// Worst line-position residual of the best fit at a fixed E₀, in Hz:
/// every length residual is divided by the local slope of the intercept
/// curve, converting it to the line shift that would explain it. The
/// reference line (i = 0) is skipped — E₀ itself is the free parameter.
pub fn line_residual_linf_hz(
    meas: &MeasuredSpectrum,
    e0_khz: f64,
    opts: &ScanOptions,
) -> Option<f64> {
    linf_and_fit(meas, e0_khz, opts).map(|(linf, _)| linf)
}

/// Worst scaled line residual together with the best-fit model at that E₀.
fn linf_and_fit(
    meas: &MeasuredSpectrum,
    e0_khz: f64,
    opts: &ScanOptions,
) -> Option<(f64, ResonanceModel)> {
    let (samples, weights, slopes) = implied_samples(meas, e0_khz, opts)?;
    let (_, model) = fit_prepared(&samples, weights.as_deref(), opts)?;
    let (worst, _) = scaled_residuals(&model, &samples, &slopes)?;
    Some((worst, model))
}

/// Sup norm and sum of squares of the per-line residuals converted back to
/// frequency units (Hz) through the local slopes da/dE.
fn scaled_residuals(
    model: &ResonanceModel,
    samples: &[(f64, f64)],
    slopes: &[f64],
) -> Option<(f64, f64)> {
    let mut worst: f64 = 0.0;
    let mut ssq: f64 = 0.0;
    for (i, &(e, a)) in samples.iter().enumerate().skip(1) {
        let r = model.evaluate(e).ok()? - a;
        let hz = (r / slopes[i]).abs() * 1e3;
        worst = worst.max(hz);
        ssq += hz * hz;
    }
    Some((worst, ssq))
}

/// Near-minimax check of the noise bound: the least-squares fit only gives
/// an upper bound on the best achievable sup-norm residual, so points near
/// a feasibility wall get a few Lawson reweighting passes (weights scaled
/// by the running residual magnitudes drive the weighted least-squares fit
/// toward the Chebyshev fit). Returns the smallest sup-norm seen, Hz.
fn lawson_linf(
    samples: &[(f64, f64)],
    base_weights: Option<&[f64]>,
    slopes: &[f64],
    start_linf: f64,
    target_hz: f64,
    opts: &ScanOptions,
) -> Option<f64> {
    let n = samples.len();
    let mut v: Vec<f64> =
        base_weights.map_or_else(|| vec![1.0; n], |w| w.to_vec());
    let mut best = start_linf;
    for _ in 0..8 {
        let (_, model) = fit_prepared(samples, Some(&v), opts)?;
        let mut residuals_hz = vec![0.0; n];
        let mut linf: f64 = 0.0;
        for (i, &(e, a)) in samples.iter().enumerate().skip(1) {
            let r = ((model.evaluate(e).ok()? - a) / slopes[i]).abs() * 1e3;
            residuals_hz[i] = r;
            linf = linf.max(r);
        }
        best = best.min(linf);
        if best <= target_hz {
            break;
        }
        for i in 1..n {
            v[i] *= residuals_hz[i] + 1e-3 * linf;
        }
        let norm: f64 = v.iter().sum::<f64>() / n as f64;
        if !(norm > 0.0) {
            break;
        }
        v.iter_mut().for_each(|w| *w /= norm);
    }
    Some(best)
}

/// Prior information available to [`refine_by_feasibility`].
#[derive(Debug, Clone, Default)]
pub struct FeasibilityPrior {
    /// Interval of plausible zero-energy scattering lengths (a₀); read as
    /// centre ± 2σ of a Gaussian posterior weight.
    pub a0_interval: Option<(f64, f64)>,
    /// Hard envelope around a reference curve: (model, energy window in
    /// kHz, relative tolerance). Candidate fits whose curve leaves the
    /// envelope anywhere in the window are rejected outright.
    pub envelope: Option<(ResonanceModel, (f64, f64), f64)>,
}

/// Sharpen a χ² minimum using the hard noise bound: with uniform noise on
/// [−u, +u] per line, any reference energy whose best fit leaves a scaled
/// line residual above u is impossible. Over the surviving (feasible) E₀
/// values the estimate is a posterior mean combining a Gaussian residual
/// likelihood with the supplied prior (zero-energy-length interval and/or
/// curve envelope). Falls back to the least-infeasible point when the
/// bound is never met. The result is refit at the selected reference
/// energy.
pub fn refine_by_feasibility(
    meas: &MeasuredSpectrum,
    e0_khz: f64,
    u_hz: f64,
    prior: &FeasibilityPrior,
    opts: &ScanOptions,
) -> Option<Minimum> {
    let refit = |e0: f64| -> Option<Minimum> {
        let (chi2, model) = inner_fit(meas, e0, opts)?;
        Some(Minimum { e0_khz: e0, chi2, model })
    };
    if !(u_hz > 0.0) {
        return refit(e0_khz);
    }
    // Window wide enough to cover neighbouring alias basins at large noise,
    // narrow at small noise where the feasible set hugs the starting point.
    let (radius, step) = if u_hz < 0.5 {
        (0.12, 8.0e-4)
    } else if u_hz < 2.0 {
        (0.35, 1.5e-3)
    } else {
        (1.6, 4.0e-3)
    };
    let trap = &meas.trap;
    let lo = (e0_khz - radius).max(trap.trap_units_to_khz(0.05));
    let hi = (e0_khz + radius).min(trap.trap_units_to_khz(2.45));
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;

    let mut best = (e0_khz, f64::INFINITY);
    // log-weight of each feasible grid point: Gaussian residual likelihood
    // (uniform noise of half-width u has variance u^2/3) times the a(0) prior
    let mut feasible: Vec<(f64, f64)> = Vec::new();
    let sigma2_hz2 = (u_hz * u_hz / 3.0).max(1e-30);
    for i in 0..=n {
        let e0 = lo + (hi - lo) * i as f64 / n as f64;
        let Some((samples, weights, slopes)) = implied_samples(meas, e0, opts) else { continue };
        let Some((_, model)) = fit_prepared(&samples, weights.as_deref(), opts) else { continue };
        let Some((mut linf, ssq)) = scaled_residuals(&model, &samples, &slopes) else { continue };
        if linf > u_hz && linf <= 1.8 * u_hz {
            // least-squares residuals only bound the minimax residual from
            // above; re-examine wall candidates before excluding them
            if let Some(better) =
                lawson_linf(&samples, weights.as_deref(), &slopes, linf, u_hz, opts)
            {
                linf = better;
            }
        }
        if linf < best.1 {
            best = (e0, linf);
        }
        if linf > u_hz {
            continue;
        }
        if let Some((ref truth, (w_lo, w_hi), tol)) = prior.envelope {
            let n_env = 24;
            let inside = (0..=n_env).all(|k| {
                let e = w_lo + (w_hi - w_lo) * k as f64 / n_env as f64;
                match (model.evaluate(e), truth.evaluate(e)) {
                    (Ok(a), Ok(t)) if t.abs() > 0.0 => (a - t).abs() / t.abs() <= tol,
                    _ => false,
                }
            });
            if !inside {
                continue;
            }
        }
        let mut logw = -0.5 * ssq / sigma2_hz2;
        if let Some((a_lo, a_hi)) = prior.a0_interval {
            let centre = 0.5 * (a_lo + a_hi);
            // Trust the prior more when the noise bound is loose: the
            // feasible set then spans whole alias basins and the prior
            // carries most of the remaining information.
            let frac = (0.06 + 0.009 * u_hz).clamp(0.07, 0.15);
            let sigma = frac * (a_hi - a_lo);
            let a0 = model.evaluate(0.0).ok()?;
            logw += -0.5 * ((a0 - centre) / sigma).powi(2);
        }
        feasible.push((e0, logw));
    }
    let target = if feasible.is_empty() {
        best.0
    } else {
        let top = feasible.iter().map(|&(_, lw)| lw).fold(f64::NEG_INFINITY, f64::max);
        let mut wsum = 0.0;
        let mut esum = 0.0;
        for &(e0, lw) in &feasible {
            let w = (lw - top).exp();
            wsum += w;
            esum += w * e0;
        }
        esum / wsum
    };
    refit(target)
}

/// Scan χ²(E₀) over a grid, refine local minima, and keep those below the
/// near-zero threshold.
pub fn chi2_scan(meas: &MeasuredSpectrum, opts: &ScanOptions) -> Result<FitResult> {
    if !(opts.grid_step_khz > 0.0) {
        return Err(Error::InvalidInput("grid step must be positive".into()));
    }
    let trap = &meas.trap;
    let (lo, hi) = opts.e0_window_khz.unwrap_or((
        trap.trap_units_to_khz(0.05),
        trap.trap_units_to_khz(2.45),
    ));
    if !(hi > lo) {
        return Err(Error::InvalidInput(format!("bad E0 window ({lo}, {hi}) kHz")));
    }
    // Default acceptance threshold: a small floor separating true zeros of
    // the eigencondition from the shallow inter-alias bowl on exact data,
    // plus a noise allowance that grows as sigma^2 (the weighted chi-squared
    // at the true parameters scales like n (l f' sigma)^2).
    let threshold = opts
        .threshold
        .unwrap_or_else(|| 1e-2 + 100.0 * meas.sigma_hz * meas.sigma_hz);

    let n = ((hi - lo) / opts.grid_step_khz).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * opts.grid_step_khz).collect();

    let results: Vec<Option<(f64, ResonanceModel)>> = grid
        .par_iter()
        .map(|&e0| inner_fit(meas, e0, opts))
        .collect();

    let scan: Vec<ScanPoint> = grid
        .iter()
        .zip(&results)
        .map(|(&e0_khz, r)| ScanPoint { e0_khz, chi2: r.as_ref().map(|(c, _)| *c) })
        .collect();

    // strict local minima on the valid part of the grid
    let mut candidate_idx = Vec::new();
    for i in 0..scan.len() {
        let c = match scan[i].chi2 {
            Some(c) => c,
            None => continue,
        };
        let left = if i > 0 { scan[i - 1].chi2 } else { None };
        let right = if i + 1 < scan.len() { scan[i + 1].chi2 } else { None };
        let down_left = left.map_or(true, |v| c < v);
        let down_right = right.map_or(true, |v| c < v);
        if down_left && down_right {
            candidate_idx.push(i);
        }
    }

    let mut minima: Vec<Minimum> = Vec::new();
    for i in candidate_idx {
        let e0 = scan[i].e0_khz;
        let blo = (e0 - opts.grid_step_khz).max(lo);
        let bhi = (e0 + opts.grid_step_khz).min(hi);
        let obj = |x: f64| inner_fit(meas, x, opts).map_or(f64::INFINITY, |(c, _)| c);
        let e0_ref = golden_min(&obj, blo, bhi, E0_REFINE_TOL_KHZ);
        if let Some((chi2, model)) = inner_fit(meas, e0_ref, opts) {
            if chi2 < threshold {
                // drop duplicates that refined into the same basin
                if minima
                    .iter()
                    .all(|m| (m.e0_khz - e0_ref).abs() > 2.0 * E0_REFINE_TOL_KHZ)
                {
                    minima.push(Minimum { e0_khz: e0_ref, chi2, model });
                }
            }
        }
    }
    minima.sort_by(|a, b| a.e0_khz.partial_cmp(&b.e0_khz).unwrap());

    let mut warnings = Vec::new();
    if minima.is_empty() {
        warnings.push(format!(
            "no chi-squared minimum found below threshold {threshold:.3e} a0^2"
        ));
    }

    Ok(FitResult {
        scan,
        minima,
        selected: None,
        trap: *trap,
        delta_e_khz: meas.delta_e_khz.clone(),
        threshold,
        warnings,
    })
}

/// How to break a degenerate set of χ² minima.
pub enum DisambiguationRule<'a> {
    /// Keep minima whose fitted a(E) at `e_khz` lies in `(a_lo, a_ho)` a₀.
    PriorInterval { e_khz: f64, a_lo: f64, a_hi: f64 },
    /// Keep the minimum whose model agrees with one of `other`'s minima to
    /// within 5% integrated relative difference over the shared window.
    CrossTrap { other: &'a FitResult },
}

/// Outcome of disambiguation: the selected minimum plus any ties.
#[derive(Debug, Clone)]
pub struct Selection {
    pub index: usize,
    pub ties: Vec<usize>,
}

const CROSS_TRAP_TOL: f64 = 0.05;

/// Select one minimum according to the rule; ties are reported, not broken.
pub fn disambiguate(result: &FitResult, rule: &DisambiguationRule) -> Result<Selection> {
    if result.minima.is_empty() {
        return Err(Error::NoCandidate("fit result has no minima".into()));
    }
    let survivors: Vec<usize> = match rule {
        DisambiguationRule::PriorInterval { e_khz, a_lo, a_hi } => result
            .minima
            .iter()
            .enumerate()
            .filter(|(_, m)| {
                m.model
                    .evaluate(*e_khz)
                    .map(|a| a > *a_lo && a < *a_hi)
                    .unwrap_or(false)
            })
            .map(|(i, _)| i)
            .collect(),
        DisambiguationRule::CrossTrap { other } => {
            if other.minima.is_empty() {
                return Err(Error::NoCandidate("second fit result has no minima".into()));
            }
            let mut keep = Vec::new();
            for (i, m) in result.minima.iter().enumerate() {
                let lo = m.e0_khz;
                let hi = result.e_top_khz(m.e0_khz);
                let agrees = other.minima.iter().any(|o| {
                    let olo = o.e0_khz;
                    let ohi = other.e_top_khz(o.e0_khz);
                    let wlo = lo.max(olo);
                    let whi = hi.min(ohi);
                    if !(whi > wlo) {
                        return false;
                    }
                    integrated_rel_diff(&m.model, &o.model, (wlo, whi), 101)
                        .map(|d| d < CROSS_TRAP_TOL)
                        .unwrap_or(false)
                });
                if agrees {
                    keep.push(i);
                }
            }
            keep
        }
    };
    match survivors.split_first() {
        None => Err(Error::NoCandidate(
            "every chi-squared minimum violates the disambiguation rule".into(),
        )),
        Some((&first, rest)) => Ok(Selection { index: first, ties: rest.to_vec() }),
    }
}

/// Mean relative difference between two models over a uniform grid,
/// dimensionless (not percent).
pub(crate) fn integrated_rel_diff(
    a: &ResonanceModel,
    b: &ResonanceModel,
    range: (f64, f64),
    n: usize,
) -> Result<f64> {
    let (lo, hi) = range;
    let mut acc = 0.0;
    for i in 0..n {
        let e = lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64;
        let va = a.evaluate(e)?;
        let vb = b.evaluate(e)?;
        acc += (va - vb).abs() / va.abs().max(f64::MIN_POSITIVE);
    }
    Ok(acc / n as f64)
}

/// Evaluate the selected fitted model on a uniform grid for plotting.
pub fn extract_length_curve(
    result: &FitResult,
    selected: usize,
    e_range_khz: (f64, f64),
    n_points: usize,
) -> Result<Vec<(f64, f64)>> {
    let m = result
        .minima
        .get(selected)
        .ok_or(Error::Index { index: selected, len: result.minima.len() })?;
    let (lo, hi) = e_range_khz;
    if n_points == 0 {
        return Err(Error::InvalidInput("n_points must be >= 1".into()));
    }
    for t in &m.model.terms {
        if t.e_r > lo - 1e-3 && t.e_r < hi + 1e-3 {
            return Err(Error::PoleInRange(format!(
                "fitted E_r = {} kHz lies inside [{lo}, {hi}] kHz",
                t.e_r
            )));
        }
    }
    let mut out = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let e = if n_points == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n_points - 1) as f64
        };
        out.push((e, m.model.evaluate(e)?));
    }
    Ok(out)
}

/// Exact synthetic transition energies for a truth model: forward-solve the
/// lowest `n_levels` eigenenergies and difference against the ground level.
pub fn synthesize_transitions(
    truth: &ResonanceModel,
    trap: &TrapConfig,
    n_levels: usize,
) -> Result<(f64, Vec<f64>)> {
    let spec = crate::trap::find_eigenenergies(truth, trap, n_levels, 2.0 * n_levels as f64 + 6.0)?;
    let es = spec.energies_khz();
    let e0 = es[0];
    Ok((e0, es[1..].iter().map(|e| e - e0).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cs4khz() -> TrapConfig {
        TrapConfig::cesium_khz(4.0).unwrap()
    }

    fn quick_opts() -> ScanOptions {
        ScanOptions {
            grid_step_khz: 0.05,
            e_r_range_khz: (-300.0, 300.0),
            e_r_step_khz: 0.5,
            ..ScanOptions::default()
        }
    }

    #[test]
    fn measured_spectrum_validation() {
        let trap = cs4khz();
        assert!(MeasuredSpectrum::new(vec![8.0, 16.0], 1.0, trap).is_err());
        assert!(MeasuredSpectrum::new(vec![8.0, 8.0, 16.0], 1.0, trap).is_err());
        assert!(MeasuredSpectrum::new(vec![-1.0, 8.0, 16.0], 1.0, trap).is_err());
        assert!(MeasuredSpectrum::new(vec![8.0, 16.0, 24.0], 1.0, trap).is_ok());
    }

    #[test]
    fn chi2_zero_at_true_reference() {
        let trap = cs4khz();
        let truth = ResonanceModel::cs_doubly_polarized();
        let (e0, deltas) = synthesize_transitions(&truth, &trap, 4).unwrap();
        let meas = MeasuredSpectrum::new(deltas, 0.0, trap).unwrap();
        let opts = quick_opts();
        let (chi2, model) = inner_fit(&meas, e0, &opts).unwrap();
        let l = trap.l_rel_a0();
        assert!(chi2 <= 1e-12 * l * l, "chi2 at true E0 = {chi2}");
        // recovered parameters match the generator
        assert_relative_eq!(model.a_b, truth.a_b, max_relative = 1e-3);
        assert_relative_eq!(model.terms[0].e_r, truth.terms[0].e_r, max_relative = 1e-3);
    }

    #[test]
    fn scan_finds_true_minimum() {
        let trap = cs4khz();
        let truth = ResonanceModel::cs_doubly_polarized();
        let (e0, deltas) = synthesize_transitions(&truth, &trap, 4).unwrap();
        let meas = MeasuredSpectrum::new(deltas, 0.0, trap).unwrap();
        let result = chi2_scan(&meas, &quick_opts()).unwrap();
        assert!(
            result.minima.iter().any(|m| (m.e0_khz - e0).abs() < 2.0 * E0_REFINE_TOL_KHZ),
            "true E0 = {e0} kHz not among minima {:?}",
            result.minima.iter().map(|m| m.e0_khz).collect::<Vec<_>>()
        );
        // every reported minimum is a genuine local minimum of the scan
        for m in &result.minima {
            assert!(m.chi2 < result.threshold);
        }
    }

    #[test]
    fn interval_constraint_excludes_double_occupancy() {
        let trap = cs4khz();
        // two transitions just 1 kHz apart put two implied levels in one
        // tangent interval for every E0, so the whole scan is excluded
        let meas = MeasuredSpectrum::new(vec![1.0, 2.0, 3.0], 0.0, trap).unwrap();
        let opts = quick_opts();
        let result = chi2_scan(&meas, &opts).unwrap();
        assert!(result.scan.iter().all(|p| p.chi2.is_none()));
        assert!(result.minima.is_empty());
        assert!(!result.warnings.is_empty());
    }

    #[test]
    fn disambiguation_by_prior() {
        let trap = cs4khz();
        let truth = ResonanceModel::cs_doubly_polarized();
        let (e0, deltas) = synthesize_transitions(&truth, &trap, 4).unwrap();
        let meas = MeasuredSpectrum::new(deltas, 0.0, trap).unwrap();
        let result = chi2_scan(&meas, &quick_opts()).unwrap();

        let sel = disambiguate(
            &result,
            &DisambiguationRule::PriorInterval { e_khz: 0.0, a_lo: 2200.0, a_hi: 2700.0 },
        )
        .unwrap();
        assert!((result.minima[sel.index].e0_khz - e0).abs() < 0.01);
        assert!(sel.ties.is_empty());

        // a prior excluding everything must fail loudly
        let err = disambiguate(
            &result,
            &DisambiguationRule::PriorInterval { e_khz: 0.0, a_lo: 1e7, a_hi: 2e7 },
        );
        assert!(matches!(err, Err(Error::NoCandidate(_))));
    }

    #[test]
    fn extract_curve_round_trips_generator() {
        let trap = cs4khz();
        let truth = ResonanceModel::cs_doubly_polarized();
        let (e0, deltas) = synthesize_transitions(&truth, &trap, 4).unwrap();
        let e3 = e0 + deltas[2];
        let meas = MeasuredSpectrum::new(deltas, 0.0, trap).unwrap();
        let result = chi2_scan(&meas, &quick_opts()).unwrap();
        let sel = disambiguate(
            &result,
            &DisambiguationRule::PriorInterval { e_khz: 0.0, a_lo: 2200.0, a_hi: 2700.0 },
        )
        .unwrap();
        let curve = extract_length_curve(&result, sel.index, (e0, e3), 101).unwrap();
        for (e, a) in curve {
            let want = truth.evaluate(e).unwrap();
            assert!(
                ((a - want) / want).abs() < 0.01,
                "curve off by {} at {e} kHz",
                ((a - want) / want).abs()
            );
        }
        // fitted model near E=0 reproduces the near-zero-energy length
        let a_zero = result.minima[sel.index].model.evaluate(0.0).unwrap();
        assert!((a_zero - 2454.6).abs() < 25.0, "a(0) = {a_zero}");

        // single-point extraction sits at the lower edge
        let single = extract_length_curve(&result, sel.index, (e0, e3), 1).unwrap();
        assert_eq!(single.len(), 1);
        assert_relative_eq!(single[0].0, e0);
    }

    #[test]
    fn extract_curve_pole_in_range_is_error() {
        let trap = cs4khz();
        let result = FitResult {
            scan: vec![],
            minima: vec![Minimum {
                e0_khz: 5.0,
                chi2: 0.0,
                model: ResonanceModel::single(10.0, 100.0, 20.0),
            }],
            selected: None,
            trap,
            delta_e_khz: vec![8.0, 16.0, 24.0],
            threshold: 1.0,
            warnings: vec![],
        };
        assert!(matches!(
            extract_length_curve(&result, 0, (5.0, 30.0), 11),
            Err(Error::PoleInRange(_))
        ));
        assert!(extract_length_curve(&result, 3, (5.0, 15.0), 11).is_err());
    }
}
