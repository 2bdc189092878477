//! File formats: JSON configs, CSV outputs, and the run manifest.
//!
//! Every CSV has a single header line; numbers are serialized with 12
//! significant digits so re-runs are byte-comparable.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::{FitResult, ScanPoint};
use crate::noise::{AccuracyPoint, NoiseSweepConfig};
use crate::rabi::{BeatSpectrum, ChannelSet, PredictedLine, TimeSeries};
use crate::scattering::ResonanceModel;
use crate::trap::{EigenSpectrum, TrapConfig, Transition};

/// Format a number with 12 significant digits.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{:.*e}", 11, x);
    // prefer plain notation for moderate magnitudes
    let mag = x.abs();
    if (1e-4..1e12).contains(&mag) {
        let digits = 11 - mag.log10().floor() as i32;
        let formatted = format!("{:.*}", digits.max(0) as usize, x);
        // strip trailing zeros but keep at least one digit
        let trimmed = formatted.trim_end_matches('0').trim_end_matches('.');
        if trimmed.is_empty() || trimmed == "-" {
            "0".into()
        } else {
            trimmed.to_string()
        }
    } else {
        s
    }
}

/// A measurement set for inversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct MeasurementFile {
    pub trap_khz: f64,
    pub mass_atom: String,
    /// Transition energies relative to the unknown reference level, kHz,
    /// strictly increasing.
    pub delta_E_khz: Vec<f64>,
    /// One-sigma line-position uncertainty, Hz.
    pub sigma_hz: f64,
}

impl MeasurementFile {
    pub fn trap(&self) -> Result<TrapConfig> {
        let mass = crate::trap::atom_mass(&self.mass_atom).ok_or_else(|| {
            Error::InvalidInput(format!("unknown atom '{}'", self.mass_atom))
        })?;
        TrapConfig::new(self.trap_khz * 1e3, mass)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ResonanceModel> {
    let model: ResonanceModel = read_json(path)?;
    model.validate()?;
    Ok(model)
}

pub fn read_channel_set(path: &Path) -> Result<ChannelSet> {
    let set: ChannelSet = read_json(path)?;
    set.validate()?;
    Ok(set)
}

pub fn read_measurement(path: &Path) -> Result<MeasurementFile> {
    read_json(path)
}

pub fn read_sweep_config(path: &Path) -> Result<NoiseSweepConfig> {
    let config: NoiseSweepConfig = read_json(path)?;
    config.validate()?;
    Ok(config)
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|&x| sig12(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Levels CSV: n, E in ℏω, E/h in kHz, tangent interval index.
pub fn write_levels_csv(path: &Path, spec: &EigenSpectrum) -> Result<()> {
    let rows: Vec<Vec<f64>> = spec
        .levels
        .iter()
        .map(|l| {
            vec![
                l.n as f64,
                l.e_ho,
                spec.trap.trap_units_to_khz(l.e_ho),
                l.interval_index as f64,
            ]
        })
        .collect();
    write_csv(path, "n,E_hbar_omega,E_over_h_khz,interval_index", &rows)
}

pub fn write_transitions_csv(path: &Path, transitions: &[Transition]) -> Result<()> {
    let rows: Vec<Vec<f64>> = transitions
        .iter()
        .map(|t| vec![t.from as f64, t.to as f64, t.delta_ho, t.delta_khz])
        .collect();
    write_csv(path, "from,to,delta_hbar_omega,delta_khz", &rows)
}

pub fn write_scan_csv(path: &Path, scan: &[ScanPoint]) -> Result<()> {
    let mut out = String::new();
    out.push_str("E0_khz,chi2\n");
    for p in scan {
        out.push_str(&sig12(p.e0_khz));
        out.push(',');
        match p.chi2 {
            Some(c) => out.push_str(&sig12(c)),
            None => out.push_str("nan"),
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_curve_csv(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    let rows: Vec<Vec<f64>> = curve.iter().map(|&(e, a)| vec![e, a]).collect();
    write_csv(path, "E_khz,a_a0", &rows)
}

pub fn write_timeseries_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    let rows: Vec<Vec<f64>> = series
        .times()
        .zip(&series.p)
        .map(|(t, &p)| vec![t, p])
        .collect();
    write_csv(path, "t_s,population", &rows)
}

pub fn write_spectrum_csv(path: &Path, spec: &BeatSpectrum) -> Result<()> {
    let rows: Vec<Vec<f64>> = spec
        .freqs_khz
        .iter()
        .zip(&spec.amplitude)
        .map(|(&f, &a)| vec![f, a])
        .collect();
    write_csv(path, "freq_khz,amplitude", &rows)
}

pub fn write_accuracy_csv(path: &Path, points: &[AccuracyPoint]) -> Result<()> {
    let mut out = String::new();
    out.push_str("uncertainty_hz,mean_error_pct,stderr_pct,n_failed\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            sig12(p.uncertainty_hz),
            sig12(p.mean_error_pct),
            sig12(p.stderr_pct),
            p.n_failed
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// JSON summary of an inversion result (scan itself goes to CSV).
#[derive(Debug, Serialize)]
pub struct MinimaSummary {
    pub e0_khz: Vec<f64>,
    pub chi2: Vec<f64>,
    pub models: Vec<ResonanceModel>,
    pub threshold: f64,
    pub selected: Option<usize>,
    pub warnings: Vec<String>,
}

impl MinimaSummary {
    pub fn from_result(result: &FitResult) -> Self {
        Self {
            e0_khz: result.minima.iter().map(|m| m.e0_khz).collect(),
            chi2: result.minima.iter().map(|m| m.chi2).collect(),
            models: result.minima.iter().map(|m| m.model.clone()).collect(),
            threshold: result.threshold,
            selected: result.selected,
            warnings: result.warnings.clone(),
        }
    }
}

/// Per-channel lowest transitions in a form `invert` can consume.
#[derive(Debug, Serialize)]
pub struct LowestLines {
    #[serde(rename = "F")]
    pub big_f: i32,
    pub freq_khz: Vec<f64>,
}

pub fn lowest_lines_per_channel(lines: &[PredictedLine], n_per_channel: usize) -> Vec<LowestLines> {
    let mut fs: Vec<i32> = lines
        .iter()
        .filter(|l| l.big_f == l.big_f_prime)
        .map(|l| l.big_f)
        .collect();
    fs.sort_unstable();
    fs.dedup();
    fs.iter()
        .map(|&f| {
            let mut freqs: Vec<f64> = lines
                .iter()
                .filter(|l| l.big_f == f && l.big_f_prime == f && l.n == 0)
                .map(|l| l.freq_khz)
                .collect();
            freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            freqs.truncate(n_per_channel);
            LowestLines { big_f: f, freq_khz: freqs }
        })
        .collect()
}

/// Reproducibility record written alongside every output set.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.to_string_lossy().into_owned());
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}

/// Emit a machine-readable error object on stderr.
pub fn emit_error_json(err: &Error) {
    let obj = serde_json::json!({
        "error": format!("{err}"),
        "kind": err.kind(),
    });
    let _ = writeln!(std::io::stderr(), "{obj}");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig12_round_trips_12_digits() {
        for &x in &[
            8.549123456789,
            -2.049e5,
            1.0,
            0.0,
            3.0e-7,
            123456789012.0,
            -0.000123456789012,
        ] {
            let s = sig12(x);
            let back: f64 = s.parse().unwrap();
            let tol = (x.abs() * 1e-11).max(1e-300);
            assert!(
                (back - x).abs() <= tol,
                "{x} -> {s} -> {back}"
            );
        }
    }

    #[test]
    fn sig12_trims_noise_digits() {
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(0.5), "0.5");
        assert_eq!(sig12(-36.0), "-36");
    }

    #[test]
    fn measurement_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meas.json");
        let m = MeasurementFile {
            trap_khz: 4.0,
            mass_atom: "Cs".into(),
            delta_E_khz: vec![8.1, 16.2, 24.3],
            sigma_hz: 1.0,
        };
        write_json(&path, &m).unwrap();
        let back: MeasurementFile = read_json(&path).unwrap();
        assert_eq!(back.delta_E_khz, m.delta_E_khz);
        assert!(back.trap().is_ok());
    }

    #[test]
    fn model_json_matches_schema() {
        let text = r#"{"a_b_a0": 36.0, "terms": [{"alpha_a0kHz": -2.049e5, "E_r_kHz": 84.72}]}"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, text).unwrap();
        let model = read_model(&path).unwrap();
        assert_eq!(model.a_b, 36.0);
        assert_eq!(model.terms[0].e_r, 84.72);
    }

    #[test]
    fn channel_set_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("channels.json");
        let set = ChannelSet::cs_f3_default();
        write_json(&path, &set).unwrap();
        let back = read_channel_set(&path).unwrap();
        assert_eq!(back.channels.len(), set.channels.len());
        assert_eq!(back.channels[0].big_f, 0);
    }

    #[test]
    fn csv_single_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        write_curve_csv(&path, &[(1.0, 2.0), (3.0, 4.0)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "E_khz,a_a0");
        assert_eq!(lines[1], "1,2");
    }

    #[test]
    fn manifest_records_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("forward", 7, serde_json::json!({"levels": 5}));
        let out = dir.path().join("levels.csv");
        m.record(&out);
        let path = m.write(dir.path()).unwrap();
        let back: RunManifest = read_json(&path).unwrap();
        assert_eq!(back.command, "forward");
        assert_eq!(back.seed, 7);
        assert_eq!(back.outputs.len(), 1);
    }
}
