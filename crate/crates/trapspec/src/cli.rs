//! File-based front end: forward solve, inversion, Rabi simulation, and the
//! noise sweep, each writing CSV/JSON plus a reproducibility manifest.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::inversion::{
    chi2_scan, disambiguate, extract_length_curve, DisambiguationRule, MeasuredSpectrum,
    ScanOptions,
};
use crate::io::{self, MinimaSummary, RunManifest};
use crate::noise::run_noise_sweep;
use crate::rabi::{
    assign_lines, jitter_ensemble, predicted_lines, ChannelSet,
    RabiInitialState, SimOptions, SpectrumOptions,
};
use crate::scattering::ResonanceModel;
use crate::special::AngularMomentumKet;
use crate::trap::{find_eigenenergies, transition_energies, TrapConfig};

#[derive(Parser)]
#[command(name = "trapspec", version, about = "Trapped-pair vibrational spectroscopy toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args)]
pub struct GlobalArgs {
    /// Master RNG seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker thread cap (default: machine parallelism; env TRAPSPEC_THREADS
    /// applies when the flag is absent).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Suppress the summary on stdout.
    #[arg(long, global = true, default_value_t = false)]
    pub quiet: bool,
}

#[derive(Subcommand)]
pub enum Command {
    /// Solve pair eigenenergies for a scattering-length model.
    Forward(ForwardArgs),
    /// Infer a model and the reference energy from measured lines.
    Invert(InvertArgs),
    /// Simulate Rabi-oscillation beats for a channel set.
    Rabi(RabiArgs),
    /// Monte Carlo accuracy versus line-position uncertainty.
    NoiseSweep(NoiseSweepArgs),
}

#[derive(Args)]
pub struct ForwardArgs {
    /// Model JSON path, or "null" for the non-interacting trap.
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 4.0)]
    pub trap_khz: f64,
    #[arg(long, default_value = "Cs")]
    pub atom: String,
    /// Number of eigenenergies to solve.
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
}

#[derive(Args)]
pub struct InvertArgs {
    /// Measurement JSON path.
    #[arg(long)]
    pub measurement: PathBuf,
    /// E₀ scan window in kHz, "lo,hi".
    #[arg(long, value_parser = parse_pair)]
    pub window: Option<(f64, f64)>,
    /// E₀ grid step, kHz.
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Prior on a(E) for disambiguation: "E_khz,a_lo_a0,a_hi_a0".
    #[arg(long, value_parser = parse_triple)]
    pub prior: Option<(f64, f64, f64)>,
}

#[derive(Args)]
pub struct RabiArgs {
    /// Channel-set JSON path, or "default" for the Cs f=3 set.
    #[arg(long, default_value = "default")]
    pub channels: String,
    #[arg(long, default_value_t = 4.0)]
    pub trap_khz: f64,
    #[arg(long, default_value = "Cs")]
    pub atom: String,
    /// Squeeze factor of the initial spatial Gaussian.
    #[arg(long, default_value_t = 4.0)]
    pub squeeze: f64,
    /// Total evolution time, s.
    #[arg(long, default_value_t = 0.5)]
    pub t_total: f64,
    /// Sample interval, s.
    #[arg(long, default_value_t = 3e-6)]
    pub dt: f64,
    /// Relative trap-frequency jitter half-width.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    #[arg(long, default_value_t = 1)]
    pub shots: usize,
    #[arg(long, default_value_t = 16)]
    pub levels: usize,
    #[arg(long, default_value_t = 200)]
    pub basis: usize,
}

#[derive(Args)]
pub struct NoiseSweepArgs {
    /// Sweep config JSON path.
    #[arg(long)]
    pub config: PathBuf,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected \"lo,hi\"".into());
    }
    let lo = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let hi = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

fn parse_triple(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected \"E_khz,a_lo,a_hi\"".into());
    }
    let a = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let b = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    let c = parts[2].trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b, c))
}

fn resolve_threads(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("TRAPSPEC_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn init_thread_pool(threads: Option<usize>) {
    if let Some(n) = threads {
        // a later init in the same process is a no-op; fine for tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Run the CLI from an argument iterator; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version with success codes
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_thread_pool(resolve_threads(cli.global.threads));
    if let Err(e) = std::fs::create_dir_all(&cli.global.out) {
        io::emit_error_json(&Error::Io(e));
        return 2;
    }
    let outcome = match &cli.command {
        Command::Forward(a) => cmd_forward(&cli.global, a),
        Command::Invert(a) => cmd_invert(&cli.global, a),
        Command::Rabi(a) => cmd_rabi(&cli.global, a),
        Command::NoiseSweep(a) => cmd_noise_sweep(&cli.global, a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            io::emit_error_json(&e);
            e.exit_code()
        }
    }
}

fn say(global: &GlobalArgs, msg: &str) {
    if !global.quiet {
        println!("{msg}");
    }
}

fn load_model(spec: &str) -> Result<ResonanceModel> {
    if spec == "null" {
        Ok(ResonanceModel::background(0.0))
    } else {
        io::read_model(Path::new(spec))
    }
}

fn cmd_forward(global: &GlobalArgs, args: &ForwardArgs) -> Result<()> {
    if args.levels == 0 {
        return Err(Error::InvalidInput("--levels must be >= 1".into()));
    }
    let model = load_model(&args.model)?;
    let mass = crate::trap::atom_mass(&args.atom)
        .ok_or_else(|| Error::InvalidInput(format!("unknown atom '{}'", args.atom)))?;
    let trap = TrapConfig::new(args.trap_khz * 1e3, mass)?;
    let spec = find_eigenenergies(&model, &trap, args.levels, 2.0 * args.levels as f64 + 6.0)?;
    let transitions = transition_energies(&spec, 0)?;

    let mut manifest = RunManifest::new(
        "forward",
        global.seed,
        serde_json::json!({
            "model": model,
            "trap_khz": args.trap_khz,
            "atom": args.atom,
            "levels": args.levels,
        }),
    );
    let levels_path = global.out.join("levels.csv");
    io::write_levels_csv(&levels_path, &spec)?;
    manifest.record(&levels_path);
    let trans_path = global.out.join("transitions.csv");
    io::write_transitions_csv(&trans_path, &transitions)?;
    manifest.record(&trans_path);
    manifest.write(&global.out)?;

    let es = spec.energies_khz();
    say(global, &format!("{} levels solved; E_0/h = {:.4} kHz", es.len(), es[0]));
    for w in &spec.missed_intervals {
        say(global, &format!("note: no root found in tangent interval {w}"));
    }
    Ok(())
}

fn cmd_invert(global: &GlobalArgs, args: &InvertArgs) -> Result<()> {
    let meas_file = io::read_measurement(&args.measurement)?;
    let trap = meas_file.trap()?;
    let meas = MeasuredSpectrum::new(meas_file.delta_E_khz.clone(), meas_file.sigma_hz, trap)?;
    let mut opts = ScanOptions::default();
    if let Some(w) = args.window {
        opts.e0_window_khz = Some(w);
    }
    if let Some(step) = args.grid_step {
        if !(step > 0.0) {
            return Err(Error::InvalidInput("--grid-step must be > 0".into()));
        }
        opts.grid_step_khz = step;
    }

    let mut result = chi2_scan(&meas, &opts)?;
    if let Some((e, a_lo, a_hi)) = args.prior {
        if let Ok(sel) =
            disambiguate(&result, &DisambiguationRule::PriorInterval { e_khz: e, a_lo, a_hi })
        {
            result.selected = Some(sel.index);
        }
    } else if result.minima.len() == 1 {
        result.selected = Some(0);
    }

    let mut manifest = RunManifest::new(
        "invert",
        global.seed,
        serde_json::json!({
            "measurement": args.measurement,
            "window": args.window,
            "grid_step": opts.grid_step_khz,
            "prior": args.prior,
        }),
    );
    let scan_path = global.out.join("scan.csv");
    io::write_scan_csv(&scan_path, &result.scan)?;
    manifest.record(&scan_path);
    let minima_path = global.out.join("minima.json");
    io::write_json(&minima_path, &MinimaSummary::from_result(&result))?;
    manifest.record(&minima_path);

    if result.minima.is_empty() {
        manifest.write(&global.out)?;
        return Err(Error::NoCandidate(
            "no chi-squared minimum under threshold; scan written".into(),
        ));
    }
    if let Some(sel) = result.selected {
        let m = &result.minima[sel];
        let model_path = global.out.join("selected_model.json");
        io::write_json(&model_path, &m.model)?;
        manifest.record(&model_path);
        let curve = extract_length_curve(
            &result,
            sel,
            (m.e0_khz, result.e_top_khz(m.e0_khz)),
            201,
        )?;
        let curve_path = global.out.join("curve.csv");
        io::write_curve_csv(&curve_path, &curve)?;
        manifest.record(&curve_path);
        say(
            global,
            &format!(
                "selected E_0 = {:.4} kHz (chi2 = {:.3e}); {} minima total",
                m.e0_khz,
                m.chi2,
                result.minima.len()
            ),
        );
    } else {
        let e0s: Vec<String> = result.minima.iter().map(|m| format!("{:.4}", m.e0_khz)).collect();
        say(
            global,
            &format!(
                "{} candidate minima at E_0 = {} kHz; pass --prior to select one",
                result.minima.len(),
                e0s.join(", ")
            ),
        );
    }
    manifest.write(&global.out)?;
    Ok(())
}

fn cmd_rabi(global: &GlobalArgs, args: &RabiArgs) -> Result<()> {
    let set = if args.channels == "default" {
        ChannelSet::cs_f3_default()
    } else {
        io::read_channel_set(Path::new(&args.channels))?
    };
    let mass = crate::trap::atom_mass(&args.atom)
        .ok_or_else(|| Error::InvalidInput(format!("unknown atom '{}'", args.atom)))?;
    let trap = TrapConfig::new(args.trap_khz * 1e3, mass)?;
    let opts = SimOptions { n_levels: args.levels, n_basis: args.basis };
    let init = RabiInitialState::squeezed(set.f_atom, args.squeeze, args.basis)?;
    let target = AngularMomentumKet::new(set.f_atom, 0, set.f_atom, 0)?;

    let (series, mut spectrum) = jitter_ensemble(
        &set,
        &init,
        &target,
        &trap,
        args.t_total,
        args.dt,
        args.jitter,
        args.shots,
        global.seed,
        &opts,
        &SpectrumOptions::default(),
    )?;
    let lines = predicted_lines(&set, &init, &target, &trap, &opts)?;
    assign_lines(&mut spectrum, &lines, 5.0);

    let mut manifest = RunManifest::new(
        "rabi",
        global.seed,
        serde_json::json!({
            "channels": set,
            "trap_khz": args.trap_khz,
            "atom": args.atom,
            "squeeze": args.squeeze,
            "t_total": args.t_total,
            "dt": args.dt,
            "jitter": args.jitter,
            "shots": args.shots,
            "levels": args.levels,
            "basis": args.basis,
        }),
    );
    let ts_path = global.out.join("population.csv");
    io::write_timeseries_csv(&ts_path, &series)?;
    manifest.record(&ts_path);
    let spec_path = global.out.join("spectrum.csv");
    io::write_spectrum_csv(&spec_path, &spectrum)?;
    manifest.record(&spec_path);
    let peaks_path = global.out.join("peaks.json");
    io::write_json(&peaks_path, &spectrum.peaks)?;
    manifest.record(&peaks_path);
    let lines_path = global.out.join("lowest_lines.json");
    io::write_json(&lines_path, &io::lowest_lines_per_channel(&lines, 4))?;
    manifest.record(&lines_path);
    manifest.write(&global.out)?;

    say(
        global,
        &format!(
            "{} samples, {} spectral peaks ({} assigned)",
            series.p.len(),
            spectrum.peaks.len(),
            spectrum.peaks.iter().filter(|p| p.assignment.is_some()).count()
        ),
    );
    Ok(())
}

fn cmd_noise_sweep(global: &GlobalArgs, args: &NoiseSweepArgs) -> Result<()> {
    let mut config = io::read_sweep_config(&args.config)?;
    config.seed = global.seed;
    let points = run_noise_sweep(&config)?;

    let mut manifest = RunManifest::new(
        "noise-sweep",
        global.seed,
        serde_json::to_value(&config)?,
    );
    let csv_path = global.out.join("accuracy.csv");
    io::write_accuracy_csv(&csv_path, &points)?;
    manifest.record(&csv_path);
    let json_path = global.out.join("accuracy.json");
    io::write_json(&json_path, &points)?;
    manifest.record(&json_path);
    manifest.write(&global.out)?;

    for p in &points {
        say(
            global,
            &format!(
                "u = {} Hz: mean error {:.3}% ({} failed)",
                p.uncertainty_hz, p.mean_error_pct, p.n_failed
            ),
        );
    }
    Ok(())
}
