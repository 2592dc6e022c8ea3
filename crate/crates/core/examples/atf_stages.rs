//! Builds the four cumulative transfer-function stages for the testbed
//! and shows how each layer changes one loudspeaker-to-ear response.
//!
//! An optional argument names a text impulse response (sample rate on the
//! first line, then one sample per line) to use as every loudspeaker's
//! measured response.

use psz::atf::{build_atf_set, ingest_fr_measurement, read_text_ir, AtfOptions, FrBank, FrSource, FrequencyGrid, Stage};
use psz::geometry::Scene;

fn main() -> psz::Result<()> {
    let scene = Scene::testbed();
    let grid = FrequencyGrid::new(scene.sample_rate, 16_384)?;
    let frs = match std::env::args().nth(1) {
        Some(path) => {
            let (ir, fs) = read_text_ir(std::path::Path::new(&path))?;
            let mut bank = FrBank {
                source: FrSource::Measured,
                ..FrBank::default()
            };
            for s in &scene.speakers {
                bank.responses.insert(s.fr_key().into(), ingest_fr_measurement(s.fr_key(), &ir, fs, &grid)?);
            }
            bank
        }
        None => FrBank::synthetic(&scene.speakers, &grid),
    };

    let opts = AtfOptions::default();
    let sets: Vec<_> = Stage::ALL
        .iter()
        .map(|&s| build_atf_set(&scene, s, &frs, &grid, &opts))
        .collect::<psz::Result<_>>()?;

    let (listener, speaker) = (0, 20);
    println!(
        "listener 1, {} ({:?}), FR source {}",
        scene.speakers[speaker].id,
        scene.speakers[speaker].band,
        frs.source.label()
    );
    println!("{:>8} {:>6} {:>9} {:>9} {:>9} {:>9}", "f (Hz)", "ear", "C0", "C1", "C2", "C3");
    for f in [200.0, 1000.0, 4000.0, 8000.0, 16000.0] {
        let bin = grid.nearest_bin(f);
        for ear in 0..2 {
            print!("{f:>8} {:>6}", ["L", "R"][ear]);
            for set in &sets {
                print!("{:>9.2}", 20.0 * set.get(listener, ear, 0, speaker, bin).norm().log10());
            }
            println!();
        }
    }
    println!("\nscene digest {}", sets[0].scene_digest);
    Ok(())
}
