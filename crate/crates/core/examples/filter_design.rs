//! Pressure-matching design on the C3 testbed model: solve, convert to
//! FIR taps, save the bank, and render drive signals for a test program.

use psz::atf::{build_atf_set, AtfOptions, FrBank, FrequencyGrid, Stage};
use psz::filters::{design_pressure_matching, synthesize_drive_signals, BandMasks, DesignConfig, FilterBank};
use psz::geometry::Scene;

fn main() -> psz::Result<()> {
    let scene = Scene::testbed();
    let grid = FrequencyGrid::new(scene.sample_rate, 16_384)?;
    let frs = FrBank::synthetic(&scene.speakers, &grid);
    let atf = build_atf_set(&scene, Stage::C3, &frs, &grid, &AtfOptions::default())?;
    let cfg = DesignConfig::default();
    let masks = BandMasks::from_speakers(&scene.speakers, &grid, cfg.crossover_bins);

    for lambda in [1e-4, 1e-3, 1e-2, 1e-1] {
        let bank = design_pressure_matching(&atf, &masks, &DesignConfig { lambda, ..cfg })?;
        println!("λ = {lambda:<7} filter energy {:.4e}", bank.energy());
    }

    let bank = design_pressure_matching(&atf, &masks, &cfg)?;
    let dir = tempfile_dir();
    let path = dir.join("testbed_C3.filters");
    bank.write(&path)?;
    let reloaded = FilterBank::read(&path)?;
    println!("saved {} ({} taps per filter)", path.display(), reloaded.filter_length);

    // a 1 kHz tone on program 1 left, silence elsewhere
    let tone: Vec<f64> = (0..4800).map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / grid.fs).sin()).collect();
    let programs = vec![[tone, vec![]], [vec![], vec![]]];
    let drive = synthesize_drive_signals(&reloaded, &programs)?;
    for (l, x) in drive.iter().enumerate().step_by(6) {
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        println!("  {} drive rms {rms:.4e}", scene.speakers[l].id);
    }
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("psz-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}
