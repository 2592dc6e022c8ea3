//! IZI, IPI and XTC of a C2 design scored against the C3 model: the
//! mismatch the ablation measures at one step.

use psz::atf::{build_atf_set, AtfOptions, FrBank, FrequencyGrid, Stage};
use psz::filters::{design_pressure_matching, BandMasks, DesignConfig};
use psz::geometry::Scene;
use psz::metrics::{broadband, default_epsilon, evaluate, program_pressures, Metric};

fn main() -> psz::Result<()> {
    let scene = Scene::testbed();
    let grid = FrequencyGrid::new(scene.sample_rate, 16_384)?;
    let frs = FrBank::synthetic(&scene.speakers, &grid);
    let opts = AtfOptions::default();
    let design_set = build_atf_set(&scene, Stage::C2, &frs, &grid, &opts)?;
    let eval_set = build_atf_set(&scene, Stage::C3, &frs, &grid, &opts)?;
    let cfg = DesignConfig::default();
    let masks = BandMasks::from_speakers(&scene.speakers, &grid, cfg.crossover_bins);
    let bank = design_pressure_matching(&design_set, &masks, &cfg)?;

    let pp = program_pressures(&bank, &eval_set)?;
    let eps = default_epsilon(&pp);
    let curves = evaluate(&pp, Some(eps))?;
    println!("ε = {eps:.3e}");
    for (k, m) in curves.iter().enumerate() {
        print!("listener {}:", k + 1);
        for metric in Metric::ALL {
            print!("  {metric} {:6.2} dB", broadband(m.curve(metric))?);
        }
        println!();
    }

    println!("\nlistener 1 by octave");
    println!("{:>8} {:>8} {:>8} {:>8}", "f (Hz)", "IZI", "IPI", "XTC");
    let m = &curves[0];
    for (i, f) in m.izi.freqs.iter().enumerate().step_by(36) {
        println!("{f:>8.0} {:>8.2} {:>8.2} {:>8.2}", m.izi.values[i], m.ipi.values[i], m.xtc.values[i]);
    }
    Ok(())
}
