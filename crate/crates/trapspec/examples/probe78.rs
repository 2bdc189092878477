use trapspec::rabi::{
    assign_lines, beat_spectrum, jitter_ensemble, predicted_lines, simulate_population,
    ChannelSet, RabiInitialState, SimOptions, SpectrumOptions,
};
use trapspec::special::AngularMomentumKet;
use trapspec::trap::TrapConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trap = TrapConfig::cesium_khz(4.0)?;
    let set = ChannelSet::cs_f3_default();
    let opts = SimOptions { n_levels: 10, n_basis: 200 };
    let init = RabiInitialState::squeezed(3, 4.0, opts.n_basis)?;
    let target = AngularMomentumKet::new(3, 0, 3, 0)?;
    let series = simulate_population(&set, &init, &target, &trap, 0.5, 4e-6, &opts)?;
    for thr in [0.002, 0.0005, 0.0002] {
        let mut spec = beat_spectrum(
            &series,
            &trap,
            &SpectrumOptions { zero_pad_factor: 4, peak_threshold: thr },
        )?;
        let lines = predicted_lines(&set, &init, &target, &trap, &opts)?;
        assign_lines(&mut spec, &lines, 2.0);
        for dn in 0..=3u32 {
            let members: Vec<f64> = spec
                .peaks
                .iter()
                .filter(|p| p.delta_n == dn && p.assignment.is_some())
                .map(|p| p.freq_khz)
                .collect();
            let c = members.iter().sum::<f64>() / members.len().max(1) as f64;
            let worst = spec
                .peaks
                .iter()
                .filter(|p| p.delta_n == dn)
                .filter_map(|p| {
                    p.assignment.as_ref().map(|a| (p.freq_khz - a.predicted_khz).abs() * 1e3)
                })
                .fold(0.0f64, f64::max);
            println!(
                "thr={thr} dn={dn}: {} assigned, centroid {c:.3} kHz, worst offset {worst:.3} Hz",
                members.len()
            );
        }
    }

    // criterion 8 probe
    let opts8 = SimOptions { n_levels: 8, n_basis: 200 };
    let init8 = RabiInitialState::squeezed(3, 4.0, opts8.n_basis)?;
    let lines8 = predicted_lines(&set, &init8, &target, &trap, &opts8)?;
    let probe = lines8
        .iter()
        .filter(|l| (l.freq_khz / 8.0).round() as i32 == 3)
        .max_by(|a, b| a.weight.partial_cmp(&b.weight).unwrap())
        .unwrap();
    println!("dn=3 probe line {:.4} kHz weight {:.3e}", probe.freq_khz, probe.weight);
    for jitter in [1e-4, 1e-3] {
        let (_, spec) = jitter_ensemble(
            &set,
            &init8,
            &target,
            &trap,
            0.5,
            5e-6,
            jitter,
            40,
            11,
            &opts8,
            &SpectrumOptions::default(),
        )?;
        for factor in [1.5, 2.0, 3.0] {
            println!(
                "jitter={jitter:.0e} factor={factor}: resolved = {}",
                spec.peak_resolved(probe.freq_khz, factor)
            );
        }
    }
    Ok(())
}
