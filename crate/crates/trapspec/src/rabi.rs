//! Rabi-oscillation beats of a trapped pair with several internal channels.
//!
//! A pair prepared in a non-eigen internal and spatial state oscillates
//! through a superposition of channel eigenfrequencies; the Fourier transform
//! of a sublevel population shows peaks at every eigenenergy difference,
//! grouped by the change Δn in vibrational quantum number. Peak positions
//! are the measurable content; amplitudes follow the regularized-delta
//! eigenvector expansion and are approximate.

use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scattering::ResonanceModel;
use crate::special::{clebsch_gordan, ho_origin_amplitude_unit, AngularMomentumKet};
use crate::trap::{find_eigenenergies, ScatteringLength, TrapConfig};

/// One even-F molecular channel with its own effective scattering length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Channel {
    #[serde(rename = "F")]
    pub big_f: i32,
    pub model: ResonanceModel,
    /// Optional per-channel energy offset (e.g. quadratic Zeeman), kHz.
    #[serde(default)]
    pub offset_khz: f64,
}

/// The set of even-F channels for a pair of identical f-atoms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSet {
    pub f_atom: i32,
    pub channels: Vec<Channel>,
}

impl ChannelSet {
    pub fn validate(&self) -> Result<()> {
        if self.f_atom < 0 {
            return Err(Error::InvalidInput("f_atom must be >= 0".into()));
        }
        for (i, c) in self.channels.iter().enumerate() {
            if c.big_f % 2 != 0 || c.big_f < 0 || c.big_f > 2 * self.f_atom {
                return Err(Error::InvalidInput(format!(
                    "channel F = {} must be even and within [0, {}]",
                    c.big_f,
                    2 * self.f_atom
                )));
            }
            for d in &self.channels[i + 1..] {
                if d.big_f == c.big_f {
                    return Err(Error::InvalidInput(format!("duplicate channel F = {}", c.big_f)));
                }
            }
            c.model.validate()?;
        }
        Ok(())
    }

    /// Default Cs f=3 channel set used throughout the examples: the F=0
    /// model reproduces the reference 4 kHz ground level at 4.038 kHz, the
    /// remaining channels carry smaller negative lengths.
    pub fn cs_f3_default() -> Self {
        Self {
            f_atom: 3,
            channels: vec![
                Channel { big_f: 0, model: f0_reference_model(), offset_khz: 0.0 },
                Channel { big_f: 2, model: ResonanceModel::background(-1300.0), offset_khz: 0.0 },
                Channel { big_f: 4, model: ResonanceModel::background(-850.0), offset_khz: 0.0 },
                Channel { big_f: 6, model: ResonanceModel::background(-420.0), offset_khz: 0.0 },
            ],
        }
    }
}

/// F=0 reference model for the Cs f=3 examples (4 kHz trap ground level at
/// 4.038 kHz with the χ² alias at 8.022 kHz).
pub fn f0_reference_model() -> ResonanceModel {
    ResonanceModel::single(F0_A_B, F0_ALPHA, F0_E_R)
}

// calibrated in examples/calibrate_f0 and frozen here
pub(crate) const F0_A_B: f64 = -36.0;
pub(crate) const F0_ALPHA: f64 = 1.913707e5;
pub(crate) const F0_E_R: f64 = 84.72;

/// Initial state: a symmetrized internal sublevel pair plus spatial
/// amplitudes over the unperturbed s-wave trap states.
#[derive(Debug, Clone)]
pub struct RabiInitialState {
    pub internal: AngularMomentumKet,
    /// Amplitudes b_n over unperturbed states n = 0..N_basis, unit norm.
    pub spatial_coeffs: Vec<f64>,
}

impl RabiInitialState {
    pub fn new(internal: AngularMomentumKet, spatial_coeffs: Vec<f64>) -> Result<Self> {
        let norm: f64 = spatial_coeffs.iter().map(|b| b * b).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "spatial coefficients must have unit norm, got {norm}"
            )));
        }
        Ok(Self { internal, spatial_coeffs })
    }

    /// Default preparation: |f,3⟩|f,−3⟩ internal state and the ground
    /// Gaussian of a trap squeezed by `s` in frequency, projected onto the
    /// unperturbed basis.
    pub fn squeezed(f_atom: i32, squeeze: f64, n_basis: usize) -> Result<Self> {
        let internal = AngularMomentumKet::new(f_atom, f_atom, f_atom, -f_atom)?;
        let spatial = squeeze_coefficients(squeeze, n_basis)?;
        Ok(Self { internal, spatial_coeffs: spatial })
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via recurrence
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                let dp = nf * (x * p1 - p0) / (x * x - 1.0);
                weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
                break;
            }
        }
        nodes[i] = x;
    }
    (nodes, weights)
}

/// Project the ground Gaussian of an `s`-times stiffer trap onto the
/// unperturbed basis by panel Gauss-Legendre radial quadrature, all basis
/// states evaluated per node in one Laguerre recurrence pass.
pub fn squeeze_coefficients(s: f64, n_basis: usize) -> Result<Vec<f64>> {
    if !(s > 0.0) {
        return Err(Error::InvalidInput("squeeze factor must be positive".into()));
    }
    if n_basis == 0 {
        return Err(Error::InvalidInput("n_basis must be >= 1".into()));
    }
    let phi = move |r: f64| {
        std::f64::consts::PI.powf(-0.75) * s.powf(0.75) * (-0.5 * s * r * r).exp()
    };
    // classical turning point of the highest state bounds the support
    let r_max = (2.0 * (2.0 * n_basis as f64 + 1.5)).sqrt() + 10.0;
    // quarter-unit panels with order-24 rules resolve the shortest
    // oscillation wavelength π/sqrt(2 n_basis) with margin
    let panel_w = 0.25f64.min(1.5 / (2.0 * n_basis as f64 + 1.5).sqrt());
    let panels = (r_max / panel_w).ceil() as usize;
    let (gx, gw) = gauss_legendre(24);

    let psi0: Vec<f64> = (0..n_basis)
        .map(|n| ho_origin_amplitude_unit(n as u32))
        .collect();
    let mut coeffs = vec![0.0f64; n_basis];
    let mut lag = vec![0.0f64; n_basis];
    for p in 0..panels {
        let lo = r_max * p as f64 / panels as f64;
        let hi = r_max * (p + 1) as f64 / panels as f64;
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, w) in gx.iter().zip(&gw) {
            let r = mid + half * x;
            let x2 = r * r;
            // upward recurrence on u_n = L_n(x²)/L_n(0)·exp(−x²/2), with a
            // shared scale factor so evanescent tails neither under- nor
            // overflow before the classically allowed region is reached
            let mut ls = -0.5 * x2; // natural-log scale of the mantissas
            let mut m_prev = 1.0f64; // u_0 / e^{ls}
            let mut m_cur = 1.0 - x2 / 1.5; // u_1 / e^{ls}
            lag[0] = if ls > -745.0 { m_prev * ls.exp() } else { 0.0 };
            if n_basis > 1 {
                lag[1] = if ls > -745.0 { m_cur * ls.exp() } else { 0.0 };
            }
            for k in 1..n_basis.saturating_sub(1) {
                let kf = k as f64;
                let next = (2.0 * kf + 1.5 - x2) / (kf + 1.5) * m_cur
                    - kf / (kf + 1.5) * m_prev;
                m_prev = m_cur;
                m_cur = next;
                let mag = m_cur.abs().max(m_prev.abs());
                if mag > 1e100 {
                    m_prev *= 1e-100;
                    m_cur *= 1e-100;
                    ls += 100.0 * std::f64::consts::LN_10;
                } else if mag < 1e-100 && mag > 0.0 {
                    m_prev *= 1e100;
                    m_cur *= 1e100;
                    ls -= 100.0 * std::f64::consts::LN_10;
                }
                lag[k + 1] = if ls > -745.0 { m_cur * ls.exp() } else { 0.0 };
            }
            let common = w * half * phi(r) * 4.0 * std::f64::consts::PI * x2;
            for n in 0..n_basis {
                coeffs[n] += common * psi0[n] * lag[n];
            }
        }
    }
    // renormalize the truncated expansion
    let norm: f64 = coeffs.iter().map(|b| b * b).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidInput("squeeze projection vanished".into()));
    }
    for b in &mut coeffs {
        *b /= norm;
    }
    Ok(coeffs)
}

/// Eigen decomposition of one channel.
#[derive(Debug, Clone)]
pub struct ChannelEigensystem {
    pub big_f: i32,
    /// Eigenenergies E/h in kHz, channel offset included.
    pub energies_khz: Vec<f64>,
    /// Expansion coefficients over unperturbed states, `vectors[j][n]`.
    pub vectors: Vec<Vec<f64>>,
    /// Estimated relative normalization tail beyond the basis truncation.
    pub truncation_tail: f64,
}

/// Solve every channel and expand its eigenvectors over the unperturbed
/// basis as c_n ∝ ψ_n(0)/(E_n⁰ − E), normalized after truncation.
pub fn channel_eigensystem(
    set: &ChannelSet,
    trap: &TrapConfig,
    n_levels: usize,
    n_basis: usize,
) -> Result<Vec<ChannelEigensystem>> {
    set.validate()?;
    if n_levels > n_basis / 4 {
        return Err(Error::InvalidInput(format!(
            "n_levels = {n_levels} exceeds truncation headroom N_basis/4 = {}",
            n_basis / 4
        )));
    }
    let e_max = 2.0 * n_levels as f64 + 6.0;
    let psi: Vec<f64> = (0..n_basis)
        .map(|n| ho_origin_amplitude_unit(n as u32))
        .collect();

    let mut out = Vec::with_capacity(set.channels.len());
    for ch in &set.channels {
        let spec = find_eigenenergies(&ch.model, trap, n_levels, e_max)?;
        let mut energies_khz = Vec::with_capacity(n_levels);
        let mut vectors = Vec::with_capacity(n_levels);
        let mut worst_tail = 0.0f64;
        for lvl in &spec.levels {
            energies_khz.push(trap.trap_units_to_khz(lvl.e_ho) + ch.offset_khz);
            let a_here = ch.model.length_m(trap.trap_units_to_hz(lvl.e_ho));
            let mut v = vec![0.0f64; n_basis];
            if a_here.abs() < 1e-18 {
                // the eigenvector degenerates to the unperturbed state of
                // this tangent interval
                let n0 = lvl.interval_index.max(1) as usize - 1;
                v[n0] = 1.0;
            } else {
                for (n, vn) in v.iter_mut().enumerate() {
                    let e_n0 = 2.0 * n as f64 + 1.5;
                    *vn = psi[n] / (e_n0 - lvl.e_ho);
                }
                let norm2: f64 = v.iter().map(|x| x * x).sum();
                // tail of Σ c_n² past the truncation, from the n^{-3/2} decay
                let last = v[n_basis - 1] * v[n_basis - 1];
                let tail = 2.0 * last * n_basis as f64;
                worst_tail = worst_tail.max(tail / (norm2 + tail));
                let norm = norm2.sqrt();
                for x in v.iter_mut() {
                    *x /= norm;
                }
            }
            vectors.push(v);
        }
        out.push(ChannelEigensystem {
            big_f: ch.big_f,
            energies_khz,
            vectors,
            truncation_tail: worst_tail,
        });
    }
    Ok(out)
}

/// ⟨F, M | symmetrized pair (f m1)(f m2)⟩ for every requested F.
pub fn symmetrized_channel_amplitudes(ket: &AngularMomentumKet, big_fs: &[i32]) -> Vec<f64> {
    let m = ket.total_m();
    big_fs
        .iter()
        .map(|&big_f| {
            let cg = clebsch_gordan(ket.f1, ket.m1, ket.f2, ket.m2, big_f, m);
            if ket.m1 == ket.m2 {
                cg
            } else {
                // symmetrized combination; odd-F components cancel
                let swapped = clebsch_gordan(ket.f1, ket.m2, ket.f2, ket.m1, big_f, m);
                (cg + swapped) / std::f64::consts::SQRT_2
            }
        })
        .collect()
}

/// Population time series with a fixed sample interval.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    /// Sample interval, s.
    pub dt: f64,
    pub p: Vec<f64>,
}

impl TimeSeries {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.p.len()).map(move |i| i as f64 * self.dt)
    }
}

/// Simulation sizes; defaults match the examples.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub n_levels: usize,
    pub n_basis: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { n_levels: 16, n_basis: 200 }
    }
}

/// One oscillating mode pair of the population signal.
#[derive(Debug, Clone, Copy)]
struct ModePair {
    weight: f64,
    freq_hz: f64,
}

struct PopulationModel {
    constant: f64,
    pairs: Vec<ModePair>,
}

fn build_population_model(
    eig: &[ChannelEigensystem],
    init: &RabiInitialState,
    target: &AngularMomentumKet,
    trap: &TrapConfig,
) -> Result<PopulationModel> {
    if target.total_m() != init.internal.total_m() {
        return Err(Error::InvalidInput(format!(
            "target M = {} does not match initial M = {}",
            target.total_m(),
            init.internal.total_m()
        )));
    }
    let big_fs: Vec<i32> = eig.iter().map(|e| e.big_f).collect();
    let c_f = symmetrized_channel_amplitudes(&init.internal, &big_fs);
    let d_f = symmetrized_channel_amplitudes(target, &big_fs);
    let _ = trap;

    // flatten channels × levels into modes
    let mut weights = Vec::new();
    let mut freqs_hz = Vec::new();
    let mut vectors: Vec<&[f64]> = Vec::new();
    for (ch, (&cf, &df)) in eig.iter().zip(c_f.iter().zip(&d_f)) {
        for (j, v) in ch.vectors.iter().enumerate() {
            let b_tilde: f64 = v
                .iter()
                .zip(&init.spatial_coeffs)
                .map(|(vn, bn)| vn * bn)
                .sum();
            weights.push(df * cf * b_tilde);
            freqs_hz.push(ch.energies_khz[j] * 1e3);
            vectors.push(v);
        }
    }

    // Gram matrix between eigenvectors of different channels; pairs with
    // negligible combined weight are dropped
    let n_modes = weights.len();
    let mut constant = 0.0;
    let mut pairs = Vec::new();
    let total_scale: f64 = weights.iter().map(|w| w * w).sum();
    let cutoff = 1e-10 * total_scale.max(f64::MIN_POSITIVE);
    for i in 0..n_modes {
        for j in i..n_modes {
            // |g| <= 1, so the weight product alone can rule a pair out
            if i != j && (weights[i] * weights[j]).abs() <= cutoff {
                continue;
            }
            let g: f64 = vectors[i]
                .iter()
                .zip(vectors[j])
                .map(|(a, b)| a * b)
                .sum();
            let w = weights[i] * weights[j] * g;
            if i == j {
                constant += w;
            } else if w.abs() > cutoff {
                pairs.push(ModePair { weight: 2.0 * w, freq_hz: freqs_hz[i] - freqs_hz[j] });
            }
        }
    }
    Ok(PopulationModel { constant, pairs })
}

fn max_mode_freq_hz(eig: &[ChannelEigensystem]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for ch in eig {
        for &e in &ch.energies_khz {
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    (hi - lo).max(0.0) * 1e3
}

/// Population of the target internal pair versus time.
///
/// `dt` must satisfy Nyquist for the largest retained eigenfrequency
/// difference.
pub fn simulate_population(
    set: &ChannelSet,
    init: &RabiInitialState,
    target: &AngularMomentumKet,
    trap: &TrapConfig,
    t_total: f64,
    dt: f64,
    opts: &SimOptions,
) -> Result<TimeSeries> {
    let eig = channel_eigensystem(set, trap, opts.n_levels, opts.n_basis)?;
    simulate_population_from_eigensystem(&eig, init, target, trap, t_total, dt)
}

fn simulate_population_from_eigensystem(
    eig: &[ChannelEigensystem],
    init: &RabiInitialState,
    target: &AngularMomentumKet,
    trap: &TrapConfig,
    t_total: f64,
    dt: f64,
) -> Result<TimeSeries> {
    if !(dt > 0.0) || !(t_total > dt) {
        return Err(Error::InvalidInput("need t_total > dt > 0".into()));
    }
    let f_max = max_mode_freq_hz(eig) + 2.0 * trap.nu_trap;
    if dt > 1.0 / (2.0 * f_max) {
        return Err(Error::Nyquist { dt, f_max, suggested: 1.0 / (2.0 * f_max) });
    }
    let model = build_population_model(eig, init, target, trap)?;
    let n = (t_total / dt).round() as usize + 1;
    let two_pi = 2.0 * std::f64::consts::PI;
    let p: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * dt;
            let mut v = model.constant;
            for pair in &model.pairs {
                v += pair.weight * (two_pi * pair.freq_hz * t).cos();
            }
            v
        })
        .collect();
    Ok(TimeSeries { dt, p })
}

/// A detected spectral peak.
#[derive(Debug, Clone, Serialize)]
pub struct Peak {
    pub freq_khz: f64,
    pub magnitude: f64,
    /// Vibrational-quantum-number group: nearest integer of freq/(2ν).
    pub delta_n: u32,
    pub assignment: Option<Assignment>,
    pub ambiguous: bool,
}

/// Identification of a peak with an eigenenergy difference.
#[derive(Debug, Clone, Serialize)]
pub struct Assignment {
    #[serde(rename = "F")]
    pub big_f: i32,
    #[serde(rename = "F_prime")]
    pub big_f_prime: i32,
    pub n: usize,
    pub n_prime: usize,
    pub predicted_khz: f64,
}

/// Magnitude spectrum of a population time series with detected peaks.
#[derive(Debug, Clone)]
pub struct BeatSpectrum {
    pub freqs_khz: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub peaks: Vec<Peak>,
}

impl BeatSpectrum {
    /// Frequency resolution of the (padded) transform, kHz.
    pub fn bin_khz(&self) -> f64 {
        if self.freqs_khz.len() > 1 {
            self.freqs_khz[1] - self.freqs_khz[0]
        } else {
            0.0
        }
    }

    /// Largest magnitude within ±window of `freq_khz`.
    pub fn peak_magnitude_near(&self, freq_khz: f64, window_khz: f64) -> f64 {
        self.freqs_khz
            .iter()
            .zip(&self.amplitude)
            .filter(|(f, _)| (**f - freq_khz).abs() <= window_khz)
            .map(|(_, a)| *a)
            .fold(0.0, f64::max)
    }

    /// Median magnitude in ±window of `freq_khz`, excluding the ±core.
    pub fn background_near(&self, freq_khz: f64, window_khz: f64, core_khz: f64) -> f64 {
        let mut vals: Vec<f64> = self
            .freqs_khz
            .iter()
            .zip(&self.amplitude)
            .filter(|(f, _)| {
                let d = (**f - freq_khz).abs();
                d <= window_khz && d > core_khz
            })
            .map(|(_, a)| *a)
            .collect();
        if vals.is_empty() {
            return 0.0;
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals[vals.len() / 2]
    }

    /// Readability criterion: peak magnitude at the predicted position is at
    /// least `factor` times the local background in a ±50 Hz neighborhood.
    pub fn peak_resolved(&self, freq_khz: f64, factor: f64) -> bool {
        let peak = self.peak_magnitude_near(freq_khz, 0.005);
        let bg = self.background_near(freq_khz, 0.050, 0.010);
        peak >= factor * bg && peak > 0.0
    }
}

/// Spectrum controls.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    pub zero_pad_factor: usize,
    /// Peak threshold relative to the global maximum.
    pub peak_threshold: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { zero_pad_factor: 4, peak_threshold: 0.05 }
    }
}

/// Hann-windowed, zero-padded magnitude FFT with quadratically refined peaks
/// grouped by Δn.
pub fn beat_spectrum(series: &TimeSeries, trap: &TrapConfig, opts: &SpectrumOptions) -> Result<BeatSpectrum> {
    let n = series.p.len();
    if n < 64 {
        return Err(Error::InvalidInput(format!("need >= 64 samples, got {n}")));
    }
    let n_fft = (n * opts.zero_pad_factor.max(1)).next_power_of_two();
    let mut buf: Vec<Complex64> = Vec::with_capacity(n_fft);
    let denom = (n - 1) as f64;
    for (i, &v) in series.p.iter().enumerate() {
        let w = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / denom).cos());
        buf.push(Complex64::new(v * w, 0.0));
    }
    buf.resize(n_fft, Complex64::new(0.0, 0.0));

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n_fft).process(&mut buf);

    let n_half = n_fft / 2;
    let df_khz = 1.0 / (n_fft as f64 * series.dt) * 1e-3;
    let freqs_khz: Vec<f64> = (0..n_half).map(|k| k as f64 * df_khz).collect();
    let amplitude: Vec<f64> = buf[..n_half].iter().map(|c| c.norm()).collect();

    let global_max = amplitude.iter().copied().fold(0.0, f64::max);
    let threshold = opts.peak_threshold * global_max;
    let nu_khz = trap.nu_trap * 1e-3;

    let mut peaks = Vec::new();
    // DC is a peak when it dominates its right neighbor
    if amplitude.len() > 1 && amplitude[0] >= threshold && amplitude[0] > amplitude[1] {
        peaks.push(Peak {
            freq_khz: 0.0,
            magnitude: amplitude[0],
            delta_n: 0,
            assignment: None,
            ambiguous: false,
        });
    }
    for k in 1..n_half.saturating_sub(1) {
        let a = amplitude[k];
        if a < threshold || a <= amplitude[k - 1] || a <= amplitude[k + 1] {
            continue;
        }
        // quadratic refinement on log magnitudes
        let (l, c, r) = (amplitude[k - 1].ln(), a.ln(), amplitude[k + 1].ln());
        let denom = l - 2.0 * c + r;
        let shift = if denom.abs() > 1e-300 { 0.5 * (l - r) / denom } else { 0.0 };
        let freq = (k as f64 + shift.clamp(-0.5, 0.5)) * df_khz;
        let delta_n = (freq / (2.0 * nu_khz)).round().max(0.0) as u32;
        peaks.push(Peak { freq_khz: freq, magnitude: a, delta_n, assignment: None, ambiguous: false });
    }
    Ok(BeatSpectrum { freqs_khz, amplitude, peaks })
}

/// A transition line predicted from a guide channel set.
#[derive(Debug, Clone)]
pub struct PredictedLine {
    pub big_f: i32,
    pub big_f_prime: i32,
    pub n: usize,
    pub n_prime: usize,
    pub freq_khz: f64,
    pub weight: f64,
}

/// Every eigenenergy difference the dynamics can produce, with its spectral
/// weight, from a guide channel set and the preparation/readout states.
pub fn predicted_lines(
    guide: &ChannelSet,
    init: &RabiInitialState,
    target: &AngularMomentumKet,
    trap: &TrapConfig,
    opts: &SimOptions,
) -> Result<Vec<PredictedLine>> {
    let eig = channel_eigensystem(guide, trap, opts.n_levels, opts.n_basis)?;
    let big_fs: Vec<i32> = eig.iter().map(|e| e.big_f).collect();
    let c_f = symmetrized_channel_amplitudes(&init.internal, &big_fs);
    let d_f = symmetrized_channel_amplitudes(target, &big_fs);

    struct Mode<'a> {
        big_f: i32,
        level: usize,
        e_khz: f64,
        w: f64,
        v: &'a [f64],
    }
    let mut modes = Vec::new();
    for (ch, (&cf, &df)) in eig.iter().zip(c_f.iter().zip(&d_f)) {
        for (j, v) in ch.vectors.iter().enumerate() {
            let b_tilde: f64 = v
                .iter()
                .zip(&init.spatial_coeffs)
                .map(|(vn, bn)| vn * bn)
                .sum();
            modes.push(Mode { big_f: ch.big_f, level: j, e_khz: ch.energies_khz[j], w: df * cf * b_tilde, v });
        }
    }

    let total: f64 = modes.iter().map(|m| m.w * m.w).sum();
    let cutoff = 1e-8 * total.max(f64::MIN_POSITIVE);
    let mut lines = Vec::new();
    for i in 0..modes.len() {
        for j in 0..modes.len() {
            if modes[i].e_khz <= modes[j].e_khz {
                continue;
            }
            let g: f64 = modes[i].v.iter().zip(modes[j].v).map(|(a, b)| a * b).sum();
            let w = (modes[i].w * modes[j].w * g).abs();
            if w > cutoff {
                lines.push(PredictedLine {
                    big_f: modes[j].big_f,
                    big_f_prime: modes[i].big_f,
                    n: modes[j].level,
                    n_prime: modes[i].level,
                    freq_khz: modes[i].e_khz - modes[j].e_khz,
                    weight: w,
                });
            }
        }
    }
    lines.sort_by(|a, b| a.freq_khz.partial_cmp(&b.freq_khz).unwrap());
    Ok(lines)
}

/// Match detected peaks to the nearest predicted line within `tolerance_hz`.
/// Peaks with two candidate predictions inside the tolerance are flagged
/// ambiguous; unmatched peaks keep a null assignment.
pub fn assign_lines(spec: &mut BeatSpectrum, lines: &[PredictedLine], tolerance_hz: f64) {
    let tol_khz = tolerance_hz * 1e-3;
    for peak in &mut spec.peaks {
        let mut in_tol: Vec<&PredictedLine> = lines
            .iter()
            .filter(|l| (l.freq_khz - peak.freq_khz).abs() <= tol_khz)
            .collect();
        in_tol.sort_by(|a, b| {
            (a.freq_khz - peak.freq_khz)
                .abs()
                .partial_cmp(&(b.freq_khz - peak.freq_khz).abs())
                .unwrap()
        });
        peak.ambiguous = in_tol.len() > 1;
        peak.assignment = in_tol.first().map(|l| Assignment {
            big_f: l.big_f,
            big_f_prime: l.big_f_prime,
            n: l.n,
            n_prime: l.n_prime,
            predicted_khz: l.freq_khz,
        });
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derive a per-task seed from a master seed and a tag.
pub(crate) fn derive_seed(master: u64, tag: u64) -> u64 {
    splitmix64(master ^ splitmix64(tag))
}

/// Average the population over an ensemble of shots with per-shot trap
/// frequency jitter ν_k = ν(1 + ξ_k), ξ_k uniform on [−jitter, +jitter],
/// deterministic for a fixed seed.
pub fn jitter_ensemble(
    set: &ChannelSet,
    init: &RabiInitialState,
    target: &AngularMomentumKet,
    trap: &TrapConfig,
    t_total: f64,
    dt: f64,
    jitter: f64,
    n_shots: usize,
    seed: u64,
    opts: &SimOptions,
    spectrum_opts: &SpectrumOptions,
) -> Result<(TimeSeries, BeatSpectrum)> {
    if jitter < 0.0 {
        return Err(Error::InvalidInput("jitter must be >= 0".into()));
    }
    if n_shots < 1 {
        return Err(Error::InvalidInput("n_shots must be >= 1".into()));
    }
    use rand::{Rng, SeedableRng};

    let shots: Vec<Result<TimeSeries>> = (0..n_shots)
        .into_par_iter()
        .map(|k| {
            let mut rng =
                rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            let xi: f64 = if jitter > 0.0 { rng.gen_range(-jitter..=jitter) } else { 0.0 };
            let trap_k = TrapConfig::new(trap.nu_trap * (1.0 + xi), trap.mass)?;
            let eig = channel_eigensystem(set, &trap_k, opts.n_levels, opts.n_basis)?;
            simulate_population_from_eigensystem(&eig, init, target, &trap_k, t_total, dt)
        })
        .collect();

    let mut avg: Option<Vec<f64>> = None;
    // fixed summation order for bit reproducibility
    for shot in shots {
        let shot = shot?;
        match &mut avg {
            None => avg = Some(shot.p),
            Some(acc) => {
                for (a, v) in acc.iter_mut().zip(&shot.p) {
                    *a += v;
                }
            }
        }
    }
    let mut p = avg.expect("n_shots >= 1");
    for v in &mut p {
        *v /= n_shots as f64;
    }
    let series = TimeSeries { dt, p };
    let spec = beat_spectrum(&series, trap, spectrum_opts)?;
    Ok((series, spec))
}
