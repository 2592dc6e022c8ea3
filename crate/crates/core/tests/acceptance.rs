//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::Parser;
use nalgebra::DMatrix;
use num_complex::Complex64;

use psz::ablation::{json_path, read_report_json, run_ablation, AblationPlan};
use psz::atf::{
    build_atf_set, piston_directivity, rs_hrtf, sphere_series, AtfOptions, AtfSet, FrBank, FrequencyGrid,
    SphereBoundary, Stage,
};
use psz::filters::{bin_matrix, design_pressure_matching, design_spectra, target_matrix, BandMasks, DesignConfig, LambdaMode};
use psz::geometry::{Ear, Listener, Scene, Vec3, DEFAULT_HEAD_RADIUS};
use psz::metrics::{ipi_spectrum, izi_spectrum, xtc_of_matrix, Metric, ProgramPressures};
use psz::room::{enumerate_images, simulate_rir, RoomSpec};
use psz::specfun::{
    bessel_j1, ladder_derivatives, legendre_p, spherical_bessel_j, spherical_bessel_j_all, spherical_bessel_y_all,
    spherical_hankel1, SeriesControl,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const C: f64 = 343.0;

/// Splitmix-style hash mapped to `[0, 1)`.
fn uniform(seed: u64) -> f64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) as f64 / (u64::MAX as f64 + 1.0)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let positive = f(lo) > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn special_functions() -> Outcome {
    for &x in &[0.5, 1.0, 3.3, 12.0, 49.0] {
        let j0 = f64::sin(x) / x;
        ensure!((spherical_bessel_j(0, x) - j0).abs() <= 1e-12 * j0.abs().max(1e-3), "j0({x})");
        let h0 = spherical_hankel1(0, x).map_err(|e| e.to_string())?;
        let want = -Complex64::i() * Complex64::from_polar(1.0, x) / x;
        ensure!((h0 - want).norm() <= 1e-12 * want.norm(), "h0({x}) = {h0}, want {want}");
    }
    for &x in &[-1.0, -0.3, 0.0, 0.8, 1.0] {
        ensure!(legendre_p(0, x).unwrap() == 1.0, "P0({x})");
        ensure!(legendre_p(1, x).unwrap() == x, "P1({x})");
    }

    let mut worst = 0.0_f64;
    let mut x = 0.5;
    while x <= 50.0 {
        let j = spherical_bessel_j_all(61, x);
        let y = spherical_bessel_y_all(61, x);
        let (dj, dy) = (ladder_derivatives(&j, x), ladder_derivatives(&y, x));
        for n in 0..=60 {
            let expect = 1.0 / (x * x);
            worst = worst.max(((j[n] * dy[n] - dj[n] * y[n]) - expect).abs() / expect);
        }
        x += 0.125;
    }
    ensure!(worst < 1e-8, "Wronskian residual {worst:e}");

    let root = bisect(bessel_j1, 3.0, 4.5);
    let err = (root - 3.831_705_970_207_512).abs();
    ensure!(err < 1e-7, "J1 root {root}");
    Ok(format!("Wronskian residual {worst:.1e}, J1 root error {err:.1e}"))
}

fn free_field_consistency() -> Outcome {
    let ctl = SeriesControl {
        max_order: 200,
        ..SeriesControl::default()
    };
    let mut worst = 0.0_f64;
    for g in 0..20u64 {
        let u = |i: u64| uniform(100 * g + i);
        let rs = 0.5 + 2.5 * u(0);
        let rp = DEFAULT_HEAD_RADIUS + (0.15 - DEFAULT_HEAD_RADIUS) * u(1);
        let (ts, ps) = ((2.0 * u(2) - 1.0).acos(), 2.0 * PI * u(3));
        let (tp, pp) = ((2.0 * u(4) - 1.0).acos(), 2.0 * PI * u(5));
        let at = |r: f64, t: f64, p: f64| Vec3::new(r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos());
        for i in 0..30 {
            let f = 100.0 * 200f64.powf(i as f64 / 29.0);
            let out = sphere_series(
                2.0 * PI * f,
                at(rs, ts, ps),
                at(rp, tp, pp),
                DEFAULT_HEAD_RADIUS,
                C,
                &ctl,
                SphereBoundary::Transparent,
            )
            .map_err(|e| format!("geometry {g}, {f:.0} Hz: {e}"))?;
            worst = worst.max((out.value.norm() - 1.0).abs());
        }
    }
    ensure!(worst < 1e-4, "max ||H| - 1| = {worst:e}");
    Ok(format!("max ||H| - 1| = {worst:.1e} over 600 cases"))
}

fn hrtf_physics() -> Outcome {
    let ctl = SeriesControl::default();
    let r = DEFAULT_HEAD_RADIUS;
    let f_low = 10.0;
    ensure!(2.0 * PI * f_low / C * r < 0.02, "low-frequency point is not below k0R = 0.02");
    let mut low_db = 0.0_f64;
    for i in 0..=12 {
        let gamma = PI * i as f64 / 12.0;
        let sp = Vec3::new(1.4 * gamma.sin(), 0.0, 1.4 * gamma.cos());
        let h = rs_hrtf(2.0 * PI * f_low, sp, Vec3::new(0.0, 0.0, r), r, C, &ctl).map_err(|e| e.to_string())?;
        low_db = low_db.max((20.0 * h.norm().log10()).abs());
    }
    ensure!(low_db <= 0.5, "low-frequency deviation {low_db} dB");

    // speaker 1.5 m to the listener's left, evaluated at both ear points
    let listener = Listener::new(Vec3::new(0.0, 0.0, 0.0), 0.0);
    let left = listener.ear_direction(Ear::Left);
    let right = listener.ear_direction(Ear::Right);
    let sp = left * 1.5;
    let w8k = 2.0 * PI * 8000.0;
    let ipsi = rs_hrtf(w8k, sp, left * r, r, C, &ctl).map_err(|e| e.to_string())?.norm();
    let contra = rs_hrtf(w8k, sp, right * r, r, C, &ctl).map_err(|e| e.to_string())?.norm();
    ensure!(contra < ipsi, "contralateral {contra} >= ipsilateral {ipsi}");

    let doubled = SeriesControl {
        max_order: 2 * ctl.max_order,
        ..ctl
    };
    let mut worst = 0.0_f64;
    for &f in &[50.0, 500.0, 2000.0, 8000.0, 14000.0, 20000.0] {
        for &gamma in &[0.0, 0.9, PI / 2.0, 2.4, PI] {
            let sp = Vec3::new(1.2 * f64::sin(gamma), 0.0, 1.2 * f64::cos(gamma));
            let pt = Vec3::new(0.0, 0.0, r);
            let a = rs_hrtf(2.0 * PI * f, sp, pt, r, C, &ctl).map_err(|e| e.to_string())?;
            let b = rs_hrtf(2.0 * PI * f, sp, pt, r, C, &doubled).map_err(|e| e.to_string())?;
            worst = worst.max((a - b).norm() / b.norm());
        }
    }
    ensure!(worst < 1e-6, "order doubling changed output by {worst:e}");
    Ok(format!(
        "10 Hz deviation {low_db:.4} dB, 8 kHz ipsi/contra {:.2} dB, order doubling {worst:.1e}",
        20.0 * (ipsi / contra).log10()
    ))
}

fn directivity() -> Outcome {
    for i in 0..=100 {
        let omega = 2.0 * PI * 20_000.0 * i as f64 / 100.0;
        ensure!(piston_directivity(omega, 0.0, 0.06, C) == 1.0, "D({omega}, 0) != 1");
    }
    let root = bisect(bessel_j1, 3.0, 4.5);
    let (a, theta) = (0.05, PI / 3.0);
    let null = piston_directivity(root * C / (a * theta.sin()), theta, a, C).abs();
    ensure!(null < 1e-7, "first null |D| = {null:e}");
    let mut peak = 0.0_f64;
    for &radius in &[0.01, 0.035, 0.08] {
        for i in 0..=400 {
            let omega = 2.0 * PI * 20_000.0 * i as f64 / 400.0;
            for t in 0..=180 {
                let d = piston_directivity(omega, PI * t as f64 / 180.0, radius, C).abs();
                peak = peak.max(d);
            }
        }
    }
    ensure!(peak <= 1.0, "|D| reaches {peak}");
    Ok(format!("first null |D| = {null:.1e}, sweep max |D| = {peak}"))
}

fn stage_collapse() -> Outcome {
    let scene = Scene::testbed();
    let grid = FrequencyGrid::default();
    let ids = FrBank::identity(&scene.speakers, &grid);
    let c0 = build_atf_set(&scene, Stage::C0, &ids, &grid, &AtfOptions::default()).map_err(|e| e.to_string())?;
    let off = AtfOptions {
        directivity: false,
        head_scattering: false,
        ..AtfOptions::default()
    };
    let c3 = build_atf_set(&scene, Stage::C3, &ids, &grid, &off).map_err(|e| e.to_string())?;
    ensure!(c0.data.len() == c3.data.len(), "dimension mismatch");
    let differing = c0.data.iter().zip(&c3.data).filter(|(a, b)| a.re.to_bits() != b.re.to_bits() || a.im.to_bits() != b.im.to_bits()).count();
    ensure!(differing == 0, "{differing} values differ");
    Ok(format!("{} values bit-identical", c0.data.len()))
}

fn image_sources() -> Outcome {
    let fs = 48_000.0;
    let room = RoomSpec {
        dimensions: Vec3::new(5.0, 4.5, 2.7),
        reflectances: [0.7, 0.8, 0.6, 0.9, 0.5, 0.75],
        max_image_order: 3,
        rir_length: 4096,
    };
    let (s, m) = (Vec3::new(1.1, 1.3, 1.4), Vec3::new(3.6, 3.2, 1.1));

    let anechoic = RoomSpec {
        reflectances: [0.0; 6],
        ..room.clone()
    };
    let rir = simulate_rir(&anechoic, s, m, C, fs).map_err(|e| e.to_string())?;
    ensure!(rir.reflected.iter().all(|&v| v == 0.0), "anechoic room has reflections");

    let d = s.distance(m);
    let amp: f64 = rir.direct.iter().sum();
    let amp_err = (amp - 1.0 / (4.0 * PI * d)).abs();
    ensure!(amp_err < 1e-6, "direct amplitude error {amp_err:e}");

    let first = RoomSpec {
        max_image_order: 1,
        ..room.clone()
    };
    let dims = room.dimensions;
    let mirrors = [
        Vec3::new(-s.x, s.y, s.z),
        Vec3::new(2.0 * dims.x - s.x, s.y, s.z),
        Vec3::new(s.x, -s.y, s.z),
        Vec3::new(s.x, 2.0 * dims.y - s.y, s.z),
        Vec3::new(s.x, s.y, -s.z),
        Vec3::new(s.x, s.y, 2.0 * dims.z - s.z),
    ];
    let mut want: Vec<f64> = mirrors.iter().map(|p| p.distance(m) / C * fs).collect();
    let mut got: Vec<f64> = enumerate_images(&first, s, m)
        .iter()
        .filter(|i| i.order == 1)
        .map(|i| i.distance / C * fs)
        .collect();
    ensure!(got.len() == 6, "{} first-order images", got.len());
    want.sort_by(f64::total_cmp);
    got.sort_by(f64::total_cmp);
    let delay_err = want.iter().zip(&got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure!(delay_err < 0.5, "first-order delay error {delay_err} samples");

    let ab = simulate_rir(&room, s, m, C, fs).map_err(|e| e.to_string())?;
    let ba = simulate_rir(&room, m, s, C, fs).map_err(|e| e.to_string())?;
    let recip = ab
        .direct
        .iter()
        .zip(&ba.direct)
        .chain(ab.reflected.iter().zip(&ba.reflected))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    ensure!(recip < 1e-9, "reciprocity error {recip:e}");
    Ok(format!(
        "amplitude error {amp_err:.1e}, delay error {delay_err:.1e} samples, reciprocity {recip:.1e}"
    ))
}

fn random_atf(seed: u64) -> AtfSet {
    let grid = FrequencyGrid::new(48_000.0, 64).unwrap();
    let mut set = AtfSet::zeros(Stage::C0, 2, 1, 4, grid);
    for (i, v) in set.data.iter_mut().enumerate() {
        let i = i as u64;
        *v = Complex64::new(uniform(seed ^ (2 * i)) - 0.5, uniform(seed ^ (2 * i + 1)) - 0.5);
    }
    set
}

fn design_oracle() -> Outcome {
    let set = random_atf(0x5eed);
    let masks = BandMasks::all_pass(4, &set.grid);
    let lambda = 0.03;
    let cfg = DesignConfig {
        lambda,
        lambda_mode: LambdaMode::Absolute,
        filter_length: 64,
        modeling_delay: 0,
        crossover_bins: 2.0,
    };
    let w = design_spectra(&set, &masks, &cfg).map_err(|e| e.to_string())?;
    let d = target_matrix(&set);
    let mut worst = 0.0_f64;
    for bin in 0..set.n_bins() {
        let h = bin_matrix(&set, bin);
        let mut a = h.adjoint() * &h;
        for i in 0..4 {
            a[(i, i)] += lambda;
        }
        let oracle = a.lu().solve(&(h.adjoint() * &d)).ok_or("oracle solve failed")?;
        for col in 0..4 {
            let got = DMatrix::from_fn(4, 1, |l, _| w.get(l, col / 2, col % 2, bin));
            worst = worst.max((got - oracle.column(col)).norm());
        }
    }
    ensure!(worst < 1e-8, "solution differs from the normal equations by {worst:e}");

    let mut energies = Vec::new();
    for lambda in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
        let w = design_spectra(&set, &masks, &DesignConfig { lambda, ..cfg.clone() }).map_err(|e| e.to_string())?;
        energies.push(w.data.iter().map(|v| v.norm_sqr()).sum::<f64>());
    }
    ensure!(
        energies.windows(2).all(|p| p[1] <= p[0]),
        "filter energy increases along the sweep: {energies:?}"
    );
    Ok(format!("normal-equation residual {worst:.1e}, energies {:.3e} .. {:.3e}", energies[0], energies[4]))
}

fn metric_oracles() -> Outcome {
    let grid = FrequencyGrid::new(48_000.0, 4).unwrap();
    let mut pp = ProgramPressures::zeros(2, 2, grid);
    for (j, k, v) in [(0, 0, 1.0), (0, 1, 0.1), (1, 0, 0.2), (1, 1, 1.0)] {
        for e in 0..2 {
            pp.channel_mut(j, k, e, 0).fill(Complex64::new(v, 0.0));
        }
    }
    let izi = izi_spectrum(&pp, 0, 1e-300).map_err(|e| e.to_string())?[1];
    let ipi = ipi_spectrum(&pp, 0, 1e-300).map_err(|e| e.to_string())?[1];
    ensure!((izi - 20.0).abs() < 1e-12, "IZI {izi}");
    ensure!((ipi - 10.0 * 25f64.log10()).abs() < 1e-12, "IPI {ipi}");

    let c = |v: f64| Complex64::new(v, 0.0);
    let same = xtc_of_matrix(&[[c(0.5), c(0.5)], [c(0.5), c(0.5)]], 1e-300);
    let mild = xtc_of_matrix(&[[c(1.0), c(0.1)], [c(0.1), c(1.0)]], 1e-300);
    let floor = xtc_of_matrix(&[[c(1.0), c(0.0)], [c(0.0), c(1.0)]], 1e-12);
    ensure!(same.abs() < 1e-12, "XTC of equal paths {same}");
    ensure!((mild - 20.0).abs() < 1e-12, "XTC of 0.1 crosstalk {mild}");
    ensure!((floor - 10.0 * 2e12f64.log10()).abs() < 1e-12 && (floor - 123.0).abs() < 0.05, "XTC floor {floor}");

    let scene = common::small_scene(0.5);
    let grid = FrequencyGrid::new(48_000.0, 4096).unwrap();
    let cfg = DesignConfig {
        filter_length: 1024,
        modeling_delay: 512,
        ..DesignConfig::default()
    };
    let ids = FrBank::identity(&scene.speakers, &grid);
    let set = build_atf_set(&scene, Stage::C0, &ids, &grid, &AtfOptions::default()).map_err(|e| e.to_string())?;
    let bank = design_pressure_matching(&set, &BandMasks::all_pass(3, &grid), &cfg).map_err(|e| e.to_string())?;
    let err = common::time_domain_check(&set, &bank, false);
    ensure!(err < 1e-6, "time-domain mismatch {err:e}");
    Ok(format!(
        "IZI {izi} dB, IPI {ipi:.4} dB, XTC {same}/{mild}/{floor:.2} dB, playback error {err:.1e}"
    ))
}

fn trend_replication() -> Outcome {
    let plan = AblationPlan::new("testbed", Scene::testbed()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let report = run_ablation(&plan).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let bb = |s, k, m| report.broadband(s, k, m).expect("summary row");
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for k in 1..=2 {
        let xtc: Vec<f64> = Stage::ALL.iter().map(|&s| bb(s, k, Metric::Xtc)).collect();
        lines.push(format!(
            "listener {k}: XTC {:.2}/{:.2}/{:.2}/{:.2}, IZI C1 {:.2} C2 {:.2}, IPI C1 {:.2} C2 {:.2}",
            xtc[0],
            xtc[1],
            xtc[2],
            xtc[3],
            bb(Stage::C1, k, Metric::Izi),
            bb(Stage::C2, k, Metric::Izi),
            bb(Stage::C1, k, Metric::Ipi),
            bb(Stage::C2, k, Metric::Ipi)
        ));
        if !xtc[..3].iter().all(|&v| xtc[3] > v) {
            failures.push(format!("(a) listener {k}"));
        }
        for m in [Metric::Izi, Metric::Ipi] {
            if bb(Stage::C2, k, m) <= bb(Stage::C1, k, m) {
                failures.push(format!("(b) listener {k} {m}"));
            }
        }
        let steps: Vec<f64> = xtc.windows(2).map(|p| p[1] - p[0]).collect();
        if !(steps[2] > steps[0] && steps[2] > steps[1]) {
            failures.push(format!("(c) listener {k}: steps {steps:?}"));
        }
    }
    if elapsed > Duration::from_secs(600) {
        failures.push(format!("runtime {elapsed:?}"));
    }
    let detail = format!("{}; run {:.1} s", lines.join("; "), elapsed.as_secs_f64());
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{} ({detail})", failures.join(", ")))
    }
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let out = root.path().join(run);
        let cli = psz::cli::Cli::try_parse_from(["psz".into(), "ablate".into(), "--out".into(), out.clone().into_os_string()])
            .map_err(|e| e.to_string())?;
        psz::cli::execute(&cli).map_err(|e| format!("ablate run {run}: {e}"))?;
        let mut files: Vec<_> = std::fs::read_dir(&out)
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        let contents: Vec<_> = files
            .iter()
            .map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(p).unwrap()))
            .collect();
        trees.push(contents);
    }
    ensure!(trees[0] == trees[1], "report files differ between runs");

    let report = read_report_json(&json_path(&root.path().join("a"), "psz")).map_err(|e| e.to_string())?;
    ensure!(!report.deltas.is_empty(), "no delta rows");
    let mut worst = 0.0_f64;
    for d in &report.deltas {
        let a = report.broadband(d.from, d.listener, d.metric).ok_or("missing row")?;
        let b = report.broadband(d.to, d.listener, d.metric).ok_or("missing row")?;
        worst = worst.max((d.delta_db - (b - a)).abs());
    }
    ensure!(worst <= 1e-12, "delta rows deviate by {worst:e}");
    Ok(format!("{} files identical, {} delta rows, max deviation {worst:e}", trees[0].len(), report.deltas.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Option<u64>); 10] = [
        ("special functions", special_functions, Some(5)),
        ("free-field consistency", free_field_consistency, Some(10)),
        ("sphere HRTF physics", hrtf_physics, None),
        ("piston directivity", directivity, None),
        ("stage collapse", stage_collapse, None),
        ("image sources", image_sources, None),
        ("design oracle", design_oracle, None),
        ("metric oracles", metric_oracles, None),
        ("trend replication", trend_replication, Some(600)),
        ("determinism", determinism, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if secs > *b as f64 => Err(format!("took {secs:.1} s, budget {b} s")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("criterion {n:2} PASS  {name} [{secs:.2} s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:2} FAIL  {name} [{secs:.2} s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
