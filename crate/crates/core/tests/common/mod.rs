#![allow(dead_code)]

use std::path::Path;

use num_complex::Complex64;

use psz::atf::AtfSet;
use psz::config::write_scene;
use psz::dsp;
use psz::filters::{synthesize_drive_signals, FilterBank};
use psz::geometry::{Band, Listener, Loudspeaker, Scene, TestbedLayout, Vec3};
use psz::metrics::program_pressures;
use psz::room::RoomSpec;

/// Testbed geometry with a short, low-order room response.
pub fn quick_scene() -> Scene {
    TestbedLayout {
        room: RoomSpec {
            max_image_order: 2,
            rir_length: 2048,
            ..RoomSpec::default()
        },
        ..TestbedLayout::default()
    }
    .build()
}

/// Writes a config for `quick_scene` on a 4096-point grid into `dir`.
pub fn write_quick_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    write_scene(&quick_scene(), &dir.join("scene.toml")).unwrap();
    let path = dir.join("run.toml");
    let text = format!(
        "scene = \"scene.toml\"\nout = \"out\"\n{extra}\n[atf]\nn_fft = 4096\n[filters]\nfilter_length = 2048\n[ablation]\nplan_id = \"quick\"\n"
    );
    std::fs::write(&path, text).unwrap();
    path
}

pub fn small_scene(reflectance: f64) -> Scene {
    let mut room = RoomSpec::default();
    room.reflectances = [reflectance; 6];
    room.max_image_order = 1;
    room.rir_length = 1024;
    let spk = |i: usize, x: f64| Loudspeaker {
        id: format!("S{i}"),
        position: Vec3::new(x, 1.0, 1.2),
        axis: Vec3::new(0.0, 1.0, 0.0),
        piston_radius: 0.03,
        band: Band::Fullrange,
        band_edges: [100.0, 20_000.0],
        fr_id: None,
    };
    let yaw = -std::f64::consts::FRAC_PI_2;
    Scene {
        room,
        speed_of_sound: 343.0,
        sample_rate: 48_000.0,
        speakers: vec![spk(1, 2.1), spk(2, 2.5), spk(3, 2.9)],
        listeners: vec![
            Listener::new(Vec3::new(2.2, 1.6, 1.2), yaw),
            Listener::new(Vec3::new(2.8, 1.6, 1.2), yaw),
        ],
    }
}

pub fn pseudo_signal(seed: usize, len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let v = (n * 7919 + seed * 104_729) % 65_537;
            v as f64 / 32_768.5 - 1.0
        })
        .collect()
}

/// Drive the speakers with the rendered signals, sum the ear impulse
/// responses in the time domain and compare the ear spectra with the
/// frequency-domain prediction `S_L P_L + S_R P_R`.
pub fn time_domain_check(set: &AtfSet, bank: &FilterBank, fold: bool) -> f64 {
    let grid = set.grid;
    let n = grid.n_fft;
    let pp = program_pressures(bank, set).unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..2 {
        let s = [pseudo_signal(2 * j + 1, 400), pseudo_signal(2 * j + 2, 400)];
        let mut programs = vec![[vec![], vec![]], [vec![], vec![]]];
        programs[j] = s.clone();
        let drive = synthesize_drive_signals(bank, &programs).unwrap();
        let spectra = [dsp::rfft(&s[0], n), dsp::rfft(&s[1], n)];
        for k in 0..2 {
            for e in 0..2 {
                let mut ear = vec![0.0; drive[0].len() + n - 1];
                for (l, x) in drive.iter().enumerate() {
                    let h = dsp::irfft(set.spectrum(k, e, 0, l), n);
                    for (acc, v) in ear.iter_mut().zip(dsp::convolve(x, &h)) {
                        *acc += v;
                    }
                }
                if fold {
                    let mut circular = vec![0.0; n];
                    for (i, v) in ear.iter().enumerate() {
                        circular[i % n] += v;
                    }
                    ear = circular;
                } else {
                    assert!(ear[n..].iter().all(|v| v.abs() < 1e-12), "response does not fit in n_fft");
                    ear.truncate(n);
                }
                let measured = dsp::rfft(&ear, n);
                let scale = measured.iter().map(|v| v.norm()).fold(0.0, f64::max);
                // a real impulse response cannot carry an imaginary Nyquist term
                let bins = if fold { grid.n_bins() - 1 } else { grid.n_bins() };
                for bin in 0..bins {
                    let predicted: Complex64 = (0..2)
                        .map(|c| spectra[c][bin] * pp.channel(j, k, e, c)[bin])
                        .sum();
                    worst = worst.max((measured[bin] - predicted).norm() / scale);
                }
            }
        }
    }
    worst
}
