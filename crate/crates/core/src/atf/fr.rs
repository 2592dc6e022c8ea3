//! Loudspeaker frequency responses: ingestion of measured impulse
//! responses and the synthetic fallback used when none are supplied.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FrequencyGrid;
use crate::dsp;
use crate::error::{Error, Result};
use crate::geometry::Loudspeaker;

#[derive(Debug, Clone, PartialEq)]
pub struct LoudspeakerFr {
    pub speaker_id: String,
    /// Complex response on the grid bins.
    pub response: Vec<Complex64>,
}

impl LoudspeakerFr {
    pub fn identity(speaker_id: impl Into<String>, grid: &FrequencyGrid) -> Self {
        LoudspeakerFr {
            speaker_id: speaker_id.into(),
            response: vec![Complex64::new(1.0, 0.0); grid.n_bins()],
        }
    }
}

/// Resample a measured impulse response to the grid rate, transform it, and
/// interpolate the complex spectrum onto the grid bins.
pub fn ingest_fr_measurement(
    speaker_id: impl Into<String>,
    raw_ir: &[f64],
    source_fs: f64,
    grid: &FrequencyGrid,
) -> Result<LoudspeakerFr> {
    if raw_ir.is_empty() {
        return Err(Error::InvalidArgument("empty impulse response".into()));
    }
    if !(source_fs > 0.0) {
        return Err(Error::InvalidArgument(format!("sample rate must be positive, got {source_fs}")));
    }
    if raw_ir.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("impulse response is all zeros".into()));
    }
    if raw_ir.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("impulse response contains non-finite samples".into()));
    }
    // An impulse response keeps its frequency response across rates when
    // scaled by the rate ratio.
    let gain = source_fs / grid.fs;
    let ir: Vec<f64> = dsp::resample(raw_ir, source_fs, grid.fs)
        .into_iter()
        .map(|v| v * gain)
        .collect();

    let n = ir.len().next_power_of_two().max(grid.n_fft);
    let spectrum = dsp::rfft(&ir, n);
    let response = if n == grid.n_fft {
        spectrum
    } else {
        let step = n as f64 / grid.n_fft as f64;
        (0..grid.n_bins())
            .map(|i| {
                let pos = i as f64 * step;
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(spectrum.len() - 1);
                let t = pos - lo as f64;
                spectrum[lo] * (1.0 - t) + spectrum[hi] * t
            })
            .collect()
    };
    Ok(LoudspeakerFr {
        speaker_id: speaker_id.into(),
        response,
    })
}

/// Deterministic pseudo-variation in `[0, 1)` for unit `index`.
fn unit_variation(index: usize, salt: f64) -> f64 {
    ((index as f64 + 1.0) * salt).fract()
}

/// Synthetic response for one loudspeaker: a second-order Butterworth
/// high-pass at the unit's lower band edge, a per-unit sensitivity offset of
/// up to ±1 dB, and a ±0.5–1 dB ripple periodic in log-frequency whose
/// phase and period vary from unit to unit.
pub fn synthetic_fr(speaker: &Loudspeaker, index: usize, grid: &FrequencyGrid) -> LoudspeakerFr {
    let f_lo = speaker.band_edges[0];
    let sensitivity_db = -1.0 + 2.0 * unit_variation(index, 0.618_033_988_75);
    let ripple_db = 0.5 + 0.5 * unit_variation(index, 0.414_213_562_37);
    let ripple_phase = 2.0 * PI * unit_variation(index, 0.732_050_807_57);
    let ripple_octaves = 0.8 + 0.6 * unit_variation(index, 0.236_067_977_5);

    let response = (0..grid.n_bins())
        .map(|i| {
            let f = grid.freq(i);
            if f == 0.0 {
                return Complex64::default();
            }
            let s = Complex64::new(0.0, f / f_lo);
            let highpass = s * s / (s * s + s * std::f64::consts::SQRT_2 + 1.0);
            let cycles = (f / f_lo).log2() / ripple_octaves;
            let db = sensitivity_db + ripple_db * (2.0 * PI * cycles + ripple_phase).sin();
            highpass * 10f64.powf(db / 20.0)
        })
        .collect();
    LoudspeakerFr {
        speaker_id: speaker.fr_key().to_string(),
        response,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrSource {
    #[default]
    Measured,
    Synthetic,
    Identity,
}

impl FrSource {
    pub fn label(self) -> &'static str {
        match self {
            FrSource::Measured => "measured",
            FrSource::Synthetic => "synthetic",
            FrSource::Identity => "identity",
        }
    }
}

/// Responses keyed by loudspeaker FR name.
#[derive(Debug, Clone, Default)]
pub struct FrBank {
    pub responses: BTreeMap<String, LoudspeakerFr>,
    pub source: FrSource,
}

impl FrBank {
    pub fn synthetic(speakers: &[Loudspeaker], grid: &FrequencyGrid) -> Self {
        FrBank {
            responses: speakers
                .iter()
                .enumerate()
                .map(|(i, s)| (s.fr_key().to_string(), synthetic_fr(s, i, grid)))
                .collect(),
            source: FrSource::Synthetic,
        }
    }

    pub fn identity(speakers: &[Loudspeaker], grid: &FrequencyGrid) -> Self {
        FrBank {
            responses: speakers
                .iter()
                .map(|s| (s.fr_key().to_string(), LoudspeakerFr::identity(s.fr_key(), grid)))
                .collect(),
            source: FrSource::Identity,
        }
    }

    /// Response for every speaker, in scene order, or the list of speakers
    /// lacking one.
    pub fn resolve<'a>(&'a self, speakers: &[Loudspeaker]) -> Result<Vec<&'a LoudspeakerFr>> {
        let mut missing = Vec::new();
        let mut out = Vec::with_capacity(speakers.len());
        for s in speakers {
            match self.responses.get(s.fr_key()) {
                Some(fr) => out.push(fr),
                None => missing.push(s.id.clone()),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(Error::MissingFr(missing))
        }
    }

    /// Load `<fr_key>.txt` or `<fr_key>.wav` for each speaker from `dir`.
    /// Speakers without a file are left out; see [`FrBank::resolve`].
    pub fn load_dir(dir: &Path, speakers: &[Loudspeaker], grid: &FrequencyGrid) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "FR directory not found"),
            ));
        }
        let mut responses = BTreeMap::new();
        for s in speakers {
            let key = s.fr_key();
            if responses.contains_key(key) {
                continue;
            }
            let txt = dir.join(format!("{key}.txt"));
            let wav = dir.join(format!("{key}.wav"));
            let (samples, fs) = if txt.is_file() {
                read_text_ir(&txt)?
            } else if wav.is_file() {
                read_wav_ir(&wav)?
            } else {
                continue;
            };
            let fr = ingest_fr_measurement(key, &samples, fs, grid)
                .map_err(|e| e.context(format!("ingesting {}", if txt.is_file() { txt.display() } else { wav.display() })))?;
            responses.insert(key.to_string(), fr);
        }
        Ok(FrBank {
            responses,
            source: FrSource::Measured,
        })
    }
}

/// Plain-text impulse response: first line is the sample rate, then one
/// sample per line. Blank lines and `#` comments are ignored.
pub fn read_text_ir(path: &Path) -> Result<(Vec<f64>, f64)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_text_ir(&text).map_err(|reason| Error::parse(path, reason))
}

pub fn parse_text_ir(text: &str) -> std::result::Result<(Vec<f64>, f64), String> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (line, header) = lines.next().ok_or("missing sample-rate header line")?;
    let fs: f64 = header
        .parse()
        .map_err(|_| format!("line {line}: expected sample rate, found {header:?}"))?;
    let samples = lines
        .map(|(line, l)| l.parse::<f64>().map_err(|_| format!("line {line}: expected a number, found {l:?}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((samples, fs))
}

pub fn read_wav_ir(path: &Path) -> Result<(Vec<f64>, f64)> {
    let mut reader = hound::WavReader::open(path).map_err(|e| Error::parse(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::parse(path, format!("expected a mono file, found {} channels", spec.channels)));
    }
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, e))?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(path, e))?
        }
    };
    Ok((samples, spec.sample_rate as f64))
}
