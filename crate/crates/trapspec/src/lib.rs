//! Effective scattering lengths from the vibrational spectra of two atoms in a
//! harmonic trap.
//!
//! A pair of cold atoms held in a tight harmonic trap has its relative-motion
//! vibrational levels shifted by the collisional interaction. The shift is set
//! by the energy-dependent effective scattering length `a(E)`, so measuring the
//! vibrational transition energies lets one infer `a(E)` over the energy range
//! spanned by the trap levels.
//!
//! The crate covers the full pipeline:
//!
//! - [`trap`]: trap configuration, the intercept function, and the forward
//!   eigenenergy solver for a given `a(E)`.
//! - [`scattering`]: the resonance model `a(E) = a_b + α/(E − E_r)`, phase-shift
//!   tables, and least-squares model fitting.
//! - [`inversion`]: recovering model parameters and the absolute reference
//!   energy from measured transition energies via a χ²(E₀) scan.
//! - [`rabi`]: multi-channel Rabi-oscillation beats, Fourier peak extraction,
//!   and trap-frequency jitter ensembles.
//! - [`noise`]: Monte Carlo accuracy-vs-uncertainty sweeps.
//! - [`special`]: log-gamma, Clebsch-Gordan coefficients, and oscillator
//!   origin amplitudes underpinning the rest.
//!
//! See the `examples/` directory for one runnable example per capability, and
//! the `trapspec` binary for a file-based front end.

pub mod cli;
pub mod error;
pub mod inversion;
pub mod io;
pub mod noise;
pub mod rabi;
pub mod scattering;
pub mod special;
pub mod trap;

pub use error::{Error, Result};

/// Physical constants (SI).
pub mod constants {
    /// Reduced Planck constant, J·s.
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Planck constant, J·s.
    pub const H_PLANCK: f64 = 6.626_070_15e-34;
    /// Bohr radius, m.
    pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
}
