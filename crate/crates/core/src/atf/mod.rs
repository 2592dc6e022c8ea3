//! Frequency-domain acoustic transfer functions for each cumulative stage.
//!
//! Every (listener, ear, control point, loudspeaker) tuple starts from the
//! decomposed point-source room response. The stages then layer on the
//! loudspeaker response `A` (both paths), piston directivity `D` (direct
//! path only) and the rigid-sphere HRTF (direct path only):
//!
//! | stage | assembly                         |
//! |-------|----------------------------------|
//! | C0    | `Hd + Hr`                        |
//! | C1    | `A (Hd + Hr)`                    |
//! | C2    | `A (D Hd + Hr)`                  |
//! | C3    | `A (D Hhrtf Hd + Hr)`            |

mod directivity;
mod fr;
mod hrtf;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use directivity::piston_directivity;
pub use fr::{
    ingest_fr_measurement, parse_text_ir, read_text_ir, read_wav_ir, synthetic_fr, FrBank, FrSource, LoudspeakerFr,
};
pub use hrtf::{rs_hrtf, sphere_series, SeriesOutcome, SphereBoundary};

use crate::dsp;
use crate::error::{Error, Result};
use crate::geometry::{ear_control_points, off_axis_angle, Scene};
use crate::room::{simulate_rir, DecomposedRir};
use crate::specfun::SeriesControl;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub fs: f64,
    pub n_fft: usize,
}

impl FrequencyGrid {
    pub fn new(fs: f64, n_fft: usize) -> Result<Self> {
        let grid = FrequencyGrid { fs, n_fft };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_fft must be a power of two, got {}",
                self.n_fft
            )));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample rate must be positive, got {}", self.fs)));
        }
        Ok(())
    }

    /// Whether the Nyquist frequency reaches the 20 kHz evaluation edge.
    pub fn covers_evaluation_band(&self) -> bool {
        self.fs / 2.0 >= 20_000.0
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn freq(&self, bin: usize) -> f64 {
        self.fs * bin as f64 / self.n_fft as f64
    }

    pub fn omega(&self, bin: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.freq(bin)
    }

    pub fn nearest_bin(&self, freq: f64) -> usize {
        ((freq * self.n_fft as f64 / self.fs).round() as usize).min(self.n_bins() - 1)
    }
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        FrequencyGrid {
            fs: 48_000.0,
            n_fft: 16_384,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    C0,
    C1,
    C2,
    C3,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::C0, Stage::C1, Stage::C2, Stage::C3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn uses_fr(self) -> bool {
        self >= Stage::C1
    }

    /// Name of the layer this stage adds over the previous one.
    pub fn component(self) -> &'static str {
        match self {
            Stage::C0 => "baseline",
            Stage::C1 => "FR",
            Stage::C2 => "DIR",
            Stage::C3 => "RS-HRTF",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.index())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "C0" | "c0" => Ok(Stage::C0),
            "C1" | "c1" => Ok(Stage::C1),
            "C2" | "c2" => Ok(Stage::C2),
            "C3" | "c3" => Ok(Stage::C3),
            other => Err(Error::InvalidArgument(format!("unknown stage {other:?} (expected C0..C3)"))),
        }
    }
}

/// Per-build switches. Disabling a layer replaces its factor with exactly 1
/// while keeping the stage's assembly formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtfOptions {
    #[serde(default)]
    pub series: SeriesControl,
    #[serde(default = "yes")]
    pub directivity: bool,
    #[serde(default = "yes")]
    pub head_scattering: bool,
}

fn yes() -> bool {
    true
}

impl Default for AtfOptions {
    fn default() -> Self {
        AtfOptions {
            series: SeriesControl::default(),
            directivity: true,
            head_scattering: true,
        }
    }
}

/// Transfer functions `H[k][e][m][ℓ][bin]`, single-sided.
#[derive(Debug, Clone, PartialEq)]
pub struct AtfSet {
    pub stage: Stage,
    pub n_listeners: usize,
    pub points_per_ear: usize,
    pub n_speakers: usize,
    pub grid: FrequencyGrid,
    pub scene_digest: String,
    pub data: Vec<Complex64>,
}

impl AtfSet {
    pub fn zeros(
        stage: Stage,
        n_listeners: usize,
        points_per_ear: usize,
        n_speakers: usize,
        grid: FrequencyGrid,
    ) -> Self {
        AtfSet {
            stage,
            n_listeners,
            points_per_ear,
            n_speakers,
            grid,
            scene_digest: String::new(),
            data: vec![Complex64::default(); n_listeners * 2 * points_per_ear * n_speakers * grid.n_bins()],
        }
    }

    pub fn n_bins(&self) -> usize {
        self.grid.n_bins()
    }

    /// Number of stacked ear points, `2 K M`.
    pub fn n_rows(&self) -> usize {
        self.n_listeners * 2 * self.points_per_ear
    }

    /// Row index of `(listener, ear, point)` in the stacked ear-point order.
    pub fn row(&self, listener: usize, ear: usize, point: usize) -> usize {
        (listener * 2 + ear) * self.points_per_ear + point
    }

    fn offset(&self, row: usize, speaker: usize) -> usize {
        (row * self.n_speakers + speaker) * self.n_bins()
    }

    /// Spectrum of one tuple.
    pub fn spectrum(&self, listener: usize, ear: usize, point: usize, speaker: usize) -> &[Complex64] {
        let start = self.offset(self.row(listener, ear, point), speaker);
        &self.data[start..start + self.n_bins()]
    }

    pub fn spectrum_mut(&mut self, listener: usize, ear: usize, point: usize, speaker: usize) -> &mut [Complex64] {
        let start = self.offset(self.row(listener, ear, point), speaker);
        let n = self.n_bins();
        &mut self.data[start..start + n]
    }

    pub fn get(&self, listener: usize, ear: usize, point: usize, speaker: usize, bin: usize) -> Complex64 {
        self.data[self.offset(self.row(listener, ear, point), speaker) + bin]
    }

    pub fn at_row(&self, row: usize, speaker: usize, bin: usize) -> Complex64 {
        self.data[self.offset(row, speaker) + bin]
    }
}

/// Content hash binding an ATF set to the scene it was built from.
pub fn scene_digest(scene: &Scene) -> String {
    let bytes = serde_json::to_vec(scene).expect("scene serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Single-sided spectra of the direct and reflected parts.
pub fn fft_components(rir: &DecomposedRir, grid: &FrequencyGrid) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let len = rir.direct.len().max(rir.reflected.len());
    if len > grid.n_fft {
        return Err(Error::Length {
            len,
            reason: format!("longer than n_fft = {} (raise n_fft or shorten room.rir_length)", grid.n_fft),
        });
    }
    Ok((dsp::rfft(&rir.direct, grid.n_fft), dsp::rfft(&rir.reflected, grid.n_fft)))
}

/// Assemble the stage's ATFs for every tuple of `scene`.
pub fn build_atf_set(
    scene: &Scene,
    stage: Stage,
    frs: &FrBank,
    grid: &FrequencyGrid,
    options: &AtfOptions,
) -> Result<AtfSet> {
    scene.validate()?;
    grid.validate()?;
    options.series.validate()?;
    if grid.fs != scene.sample_rate {
        return Err(Error::InvalidArgument(format!(
            "grid sample rate {} differs from scene sample rate {}",
            grid.fs, scene.sample_rate
        )));
    }
    let responses = if stage.uses_fr() {
        Some(frs.resolve(&scene.speakers).map_err(|e| e.context(format!("stage {stage}")))?)
    } else {
        None
    };
    if let Some(responses) = &responses {
        if let Some(bad) = responses.iter().find(|r| r.response.len() != grid.n_bins()) {
            return Err(Error::Dimension(format!(
                "frequency response {} has {} bins, grid has {}",
                bad.speaker_id,
                bad.response.len(),
                grid.n_bins()
            )));
        }
    }

    let m = scene.listeners[0].control_points_per_ear;
    if scene.listeners.iter().any(|l| l.control_points_per_ear != m) {
        return Err(Error::InvalidScene(
            "all listeners must use the same number of control points per ear".into(),
        ));
    }
    let mut set = AtfSet::zeros(stage, scene.n_listeners(), m, scene.n_speakers(), *grid);
    set.scene_digest = scene_digest(scene);

    let mut tuples = Vec::with_capacity(set.n_rows() * set.n_speakers);
    for (k, listener) in scene.listeners.iter().enumerate() {
        for cp in ear_control_points(listener) {
            for l in 0..scene.n_speakers() {
                tuples.push((k, cp, l));
            }
        }
    }

    let spectra: Vec<Vec<Complex64>> = tuples
        .par_iter()
        .map(|&(k, cp, l)| {
            tuple_spectrum(scene, stage, responses.as_ref().map(|r| r[l]), grid, options, k, cp.position, l).map_err(
                |e| {
                    e.context(format!(
                        "stage {stage}, listener {}, ear {}, point {}, speaker {}",
                        k + 1,
                        cp.ear.label(),
                        cp.index,
                        scene.speakers[l].id
                    ))
                },
            )
        })
        .collect::<Result<_>>()?;

    for (&(k, cp, l), spectrum) in tuples.iter().zip(spectra) {
        set.spectrum_mut(k, cp.ear.index(), cp.index, l).copy_from_slice(&spectrum);
    }
    Ok(set)
}

#[allow(clippy::too_many_arguments)]
fn tuple_spectrum(
    scene: &Scene,
    stage: Stage,
    fr: Option<&LoudspeakerFr>,
    grid: &FrequencyGrid,
    options: &AtfOptions,
    listener: usize,
    point: crate::geometry::Vec3,
    speaker: usize,
) -> Result<Vec<Complex64>> {
    let spk = &scene.speakers[speaker];
    let head = &scene.listeners[listener];
    let c = scene.speed_of_sound;
    let rir = simulate_rir(&scene.room, spk.position, point, c, grid.fs)?;
    let (h_dir, h_refl) = fft_components(&rir, grid)?;

    let theta = off_axis_angle(spk, point)?;
    let directivity = |bin: usize| {
        if options.directivity {
            piston_directivity(grid.omega(bin), theta, spk.piston_radius, c)
        } else {
            1.0
        }
    };
    let r_speaker = spk.position - head.head_center;
    let r_point = point - head.head_center;
    let head_term = |bin: usize| -> Result<Complex64> {
        let omega = grid.omega(bin);
        if !options.head_scattering || omega == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        rs_hrtf(omega, r_speaker, r_point, head.head_radius, c, &options.series)
    };
    let a = |bin: usize| fr.map(|f| f.response[bin]).unwrap_or(Complex64::new(1.0, 0.0));

    (0..grid.n_bins())
        .map(|bin| {
            let (hd, hr) = (h_dir[bin], h_refl[bin]);
            Ok(match stage {
                Stage::C0 => hd + hr,
                Stage::C1 => a(bin) * (hd + hr),
                Stage::C2 => a(bin) * (hd * directivity(bin) + hr),
                Stage::C3 => a(bin) * (head_term(bin)? * directivity(bin) * hd + hr),
            })
        })
        .collect()
}
