//! Regularized pressure-matching design of the control filter bank and
//! drive-signal synthesis.
//!
//! Per bin the solver minimises `‖H w − d‖² + λ‖w‖²` for every
//! `(program k, channel c)`, where `H` stacks all `2 K M` ear points and
//! `d` is 1 at listener `k`'s ear `c` and 0 elsewhere. The modelling delay
//! is applied when the spectra are turned into FIR taps.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atf::{AtfSet, FrequencyGrid};
use crate::dsp;
use crate::error::{Error, Result};
use crate::geometry::Loudspeaker;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    /// `λ` scales the mean diagonal of `HᴴH` at each bin.
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub lambda: f64,
    pub lambda_mode: LambdaMode,
    pub filter_length: usize,
    pub modeling_delay: usize,
    /// Width of the raised-cosine transition at each band edge, in bins.
    pub crossover_bins: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            lambda: 1e-3,
            lambda_mode: LambdaMode::Relative,
            filter_length: 4096,
            modeling_delay: 2048,
            crossover_bins: 2.0,
        }
    }
}

impl DesignConfig {
    pub fn validate(&self, grid: &FrequencyGrid) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if self.filter_length == 0 || self.filter_length > grid.n_fft {
            return Err(Error::InvalidArgument(format!(
                "filter_length {} must lie in 1..={}",
                self.filter_length, grid.n_fft
            )));
        }
        if self.modeling_delay >= self.filter_length {
            return Err(Error::InvalidArgument(format!(
                "modeling_delay {} must be below filter_length {}",
                self.modeling_delay, self.filter_length
            )));
        }
        if !(self.crossover_bins >= 0.0) {
            return Err(Error::InvalidArgument("crossover_bins must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-speaker gain applied to the design variables, `masks[ℓ][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMasks {
    pub masks: Vec<Vec<f64>>,
}

impl BandMasks {
    pub fn all_pass(n_speakers: usize, grid: &FrequencyGrid) -> Self {
        BandMasks {
            masks: vec![vec![1.0; grid.n_bins()]; n_speakers],
        }
    }

    /// Zero outside each speaker's band, with a raised-cosine ramp of
    /// `crossover_bins` centred on each edge.
    pub fn from_speakers(speakers: &[Loudspeaker], grid: &FrequencyGrid, crossover_bins: f64) -> Self {
        let masks = speakers
            .iter()
            .map(|s| {
                let lo = s.band_edges[0] * grid.n_fft as f64 / grid.fs;
                let hi = s.band_edges[1] * grid.n_fft as f64 / grid.fs;
                (0..grid.n_bins())
                    .map(|i| {
                        let b = i as f64;
                        ramp(b - lo, crossover_bins) * ramp(hi - b, crossover_bins)
                    })
                    .collect()
            })
            .collect();
        BandMasks { masks }
    }
}

/// 0 below `-width/2`, 1 above `width/2`, raised cosine in between.
fn ramp(x: f64, width: f64) -> f64 {
    if width == 0.0 {
        return if x >= 0.0 { 1.0 } else { 0.0 };
    }
    let t = (x / width + 0.5).clamp(0.0, 1.0);
    0.5 - 0.5 * (std::f64::consts::PI * t).cos()
}

/// Complex filter spectra `W[ℓ][k][c][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpectra {
    pub n_speakers: usize,
    pub n_programs: usize,
    pub grid: FrequencyGrid,
    pub data: Vec<Complex64>,
}

impl DesignSpectra {
    pub fn zeros(n_speakers: usize, n_programs: usize, grid: FrequencyGrid) -> Self {
        DesignSpectra {
            n_speakers,
            n_programs,
            grid,
            data: vec![Complex64::default(); n_speakers * n_programs * 2 * grid.n_bins()],
        }
    }

    fn offset(&self, speaker: usize, program: usize, channel: usize) -> usize {
        ((speaker * self.n_programs + program) * 2 + channel) * self.grid.n_bins()
    }

    pub fn spectrum(&self, speaker: usize, program: usize, channel: usize) -> &[Complex64] {
        let o = self.offset(speaker, program, channel);
        &self.data[o..o + self.grid.n_bins()]
    }

    pub fn spectrum_mut(&mut self, speaker: usize, program: usize, channel: usize) -> &mut [Complex64] {
        let o = self.offset(speaker, program, channel);
        let n = self.grid.n_bins();
        &mut self.data[o..o + n]
    }

    pub fn get(&self, speaker: usize, program: usize, channel: usize, bin: usize) -> Complex64 {
        self.data[self.offset(speaker, program, channel) + bin]
    }
}

/// Transfer matrix `H(ω)` for one bin, rows in stacked ear-point order.
pub fn bin_matrix(atf: &AtfSet, bin: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(atf.n_rows(), atf.n_speakers, |r, l| atf.at_row(r, l, bin))
}

/// Targets for every `(k, c)` as columns `2k + c`.
pub fn target_matrix(atf: &AtfSet) -> DMatrix<Complex64> {
    let mut d = DMatrix::zeros(atf.n_rows(), 2 * atf.n_listeners);
    for k in 0..atf.n_listeners {
        for c in 0..2 {
            for m in 0..atf.points_per_ear {
                d[(atf.row(k, c, m), 2 * k + c)] = Complex64::new(1.0, 0.0);
            }
        }
    }
    d
}

/// Regularised least squares `argmin ‖H w − d‖² + λ‖w‖²` for every column
/// of `d`. Uses the smaller of the primal and dual normal equations.
pub fn solve_regularized(
    h: &DMatrix<Complex64>,
    d: &DMatrix<Complex64>,
    lambda: f64,
) -> Option<DMatrix<Complex64>> {
    let (rows, cols) = h.shape();
    let hh = h.adjoint();
    let solve = |mut a: DMatrix<Complex64>, rhs: DMatrix<Complex64>| {
        let n = a.nrows();
        for i in 0..n {
            a[(i, i)] += lambda;
        }
        let scale = (0..n).map(|i| a[(i, i)].re).fold(0.0, f64::max);
        let chol = a.cholesky()?;
        let l = chol.l_dirty();
        let min_pivot = (0..n).map(|i| l[(i, i)].re).fold(f64::INFINITY, f64::min);
        if !(scale > 0.0) || (lambda == 0.0 && min_pivot * min_pivot <= 1e-13 * scale) {
            return None;
        }
        Some(chol.solve(&rhs))
    };
    if rows >= cols {
        solve(&hh * h, &hh * d)
    } else {
        solve(h * &hh, d.clone()).map(|y| &hh * y)
    }
}

/// Design spectra for every bin. Bin 0 (DC) is solved like any other bin.
pub fn design_spectra(atf: &AtfSet, masks: &BandMasks, cfg: &DesignConfig) -> Result<DesignSpectra> {
    cfg.validate(&atf.grid)?;
    let n_bins = atf.n_bins();
    if masks.masks.len() != atf.n_speakers || masks.masks.iter().any(|m| m.len() != n_bins) {
        return Err(Error::Dimension(format!(
            "band masks are {}×{}, expected {}×{}",
            masks.masks.len(),
            masks.masks.first().map_or(0, Vec::len),
            atf.n_speakers,
            n_bins
        )));
    }
    let d = target_matrix(atf);
    let n_speakers = atf.n_speakers;

    let per_bin: Vec<DMatrix<Complex64>> = (0..n_bins)
        .into_par_iter()
        .map(|bin| {
            let mut h = bin_matrix(atf, bin);
            for l in 0..n_speakers {
                let g = masks.masks[l][bin];
                h.column_mut(l).scale_mut(g);
            }
            let trace: f64 = h.iter().map(|v| v.norm_sqr()).sum();
            if trace == 0.0 {
                if cfg.lambda == 0.0 {
                    return Err(Error::Singular { bin, program: 0, channel: 0 });
                }
                return Ok(DMatrix::zeros(n_speakers, d.ncols()));
            }
            let lambda = match cfg.lambda_mode {
                LambdaMode::Relative => cfg.lambda * trace / n_speakers as f64,
                LambdaMode::Absolute => cfg.lambda,
            };
            let mut w = solve_regularized(&h, &d, lambda).ok_or(Error::Singular { bin, program: 0, channel: 0 })?;
            for l in 0..n_speakers {
                let g = masks.masks[l][bin];
                w.row_mut(l).scale_mut(g);
            }
            Ok(w)
        })
        .collect::<Result<_>>()
        .map_err(|e| e.context(format!("{} design", atf.stage)))?;

    let mut out = DesignSpectra::zeros(n_speakers, atf.n_listeners, atf.grid);
    for (bin, w) in per_bin.iter().enumerate() {
        for l in 0..n_speakers {
            for k in 0..atf.n_listeners {
                for c in 0..2 {
                    out.spectrum_mut(l, k, c)[bin] = w[(l, 2 * k + c)];
                }
            }
        }
    }
    Ok(out)
}

pub fn design_pressure_matching(atf: &AtfSet, masks: &BandMasks, cfg: &DesignConfig) -> Result<FilterBank> {
    let spectra = design_spectra(atf, masks, cfg)?;
    spectra_to_fir(&spectra, cfg)
}

/// FIR taps `w[ℓ][k][c][n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub n_speakers: usize,
    pub n_programs: usize,
    pub filter_length: usize,
    pub sample_rate: f64,
    pub taps: Vec<f64>,
}

impl FilterBank {
    pub fn zeros(n_speakers: usize, n_programs: usize, filter_length: usize, sample_rate: f64) -> Self {
        FilterBank {
            n_speakers,
            n_programs,
            filter_length,
            sample_rate,
            taps: vec![0.0; n_speakers * n_programs * 2 * filter_length],
        }
    }

    fn offset(&self, speaker: usize, program: usize, channel: usize) -> usize {
        ((speaker * self.n_programs + program) * 2 + channel) * self.filter_length
    }

    pub fn filter(&self, speaker: usize, program: usize, channel: usize) -> &[f64] {
        let o = self.offset(speaker, program, channel);
        &self.taps[o..o + self.filter_length]
    }

    pub fn filter_mut(&mut self, speaker: usize, program: usize, channel: usize) -> &mut [f64] {
        let o = self.offset(speaker, program, channel);
        let n = self.filter_length;
        &mut self.taps[o..o + n]
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// Spectra of the taps on `grid`.
    pub fn spectra(&self, grid: &FrequencyGrid) -> Result<DesignSpectra> {
        if self.filter_length > grid.n_fft {
            return Err(Error::Dimension(format!(
                "filter length {} exceeds n_fft {}",
                self.filter_length, grid.n_fft
            )));
        }
        let mut out = DesignSpectra::zeros(self.n_speakers, self.n_programs, *grid);
        let spectra: Vec<Vec<Complex64>> = (0..self.n_speakers * self.n_programs * 2)
            .into_par_iter()
            .map(|i| dsp::rfft(&self.taps[i * self.filter_length..(i + 1) * self.filter_length], grid.n_fft))
            .collect();
        for (i, s) in spectra.into_iter().enumerate() {
            let n = grid.n_bins();
            out.data[i * n..(i + 1) * n].copy_from_slice(&s);
        }
        Ok(out)
    }

    /// Plain-text form: a header then one tap per line, `(ℓ, k, c, n)`
    /// row-major with channel L before R.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.taps.len() * 24 + 128);
        s.push_str("psz-filterbank 1\n");
        let _ = writeln!(s, "speakers {}", self.n_speakers);
        let _ = writeln!(s, "programs {}", self.n_programs);
        let _ = writeln!(s, "filter_length {}", self.filter_length);
        let _ = writeln!(s, "sample_rate {:?}", self.sample_rate);
        for t in &self.taps {
            let _ = writeln!(s, "{t:?}");
        }
        s
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| -> std::result::Result<(usize, &str), String> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l.trim()))
                .ok_or_else(|| format!("unexpected end of file, expected {what}"))
        };
        let (_, magic) = next("header")?;
        if magic != "psz-filterbank 1" {
            return Err(format!("line 1: expected `psz-filterbank 1`, found {magic:?}"));
        }
        let mut field = |name: &str| -> std::result::Result<String, String> {
            let (no, line) = next(name)?;
            let value = line
                .strip_prefix(name)
                .map(str::trim)
                .ok_or_else(|| format!("line {no}: expected `{name} <value>`"))?;
            Ok(value.to_string())
        };
        let int = |s: String, name: &str| s.parse::<usize>().map_err(|e| format!("{name}: {e}"));
        let n_speakers = int(field("speakers")?, "speakers")?;
        let n_programs = int(field("programs")?, "programs")?;
        let filter_length = int(field("filter_length")?, "filter_length")?;
        let sample_rate: f64 = field("sample_rate")?.parse().map_err(|e| format!("sample_rate: {e}"))?;
        let expected = n_speakers * n_programs * 2 * filter_length;
        let mut taps = Vec::with_capacity(expected);
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line.parse().map_err(|e| format!("line {}: {e}", i + 1))?;
            if !v.is_finite() {
                return Err(format!("line {}: non-finite tap", i + 1));
            }
            taps.push(v);
        }
        if taps.len() != expected {
            return Err(format!("expected {expected} taps, found {}", taps.len()));
        }
        Ok(FilterBank {
            n_speakers,
            n_programs,
            filter_length,
            sample_rate,
            taps,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|r| Error::parse(path, r))
    }
}

/// Inverse transform, circular shift by the modelling delay, truncation and
/// a raised-cosine taper over the first and last `filter_length / 32` taps.
pub fn spectra_to_fir(spectra: &DesignSpectra, cfg: &DesignConfig) -> Result<FilterBank> {
    let grid = spectra.grid;
    cfg.validate(&grid)?;
    let n = grid.n_fft;
    let len = cfg.filter_length;
    let taper_len = len / 32;
    let taper: Vec<f64> = (0..taper_len)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::PI * (i as f64 + 0.5) / taper_len as f64).cos())
        .collect();

    let count = spectra.n_speakers * spectra.n_programs * 2;
    let filters: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let nb = grid.n_bins();
            let ir = dsp::irfft(&spectra.data[i * nb..(i + 1) * nb], n);
            let mut out: Vec<f64> = (0..len).map(|t| ir[(t + n - cfg.modeling_delay % n) % n]).collect();
            for (j, w) in taper.iter().enumerate() {
                out[j] *= w;
                out[len - 1 - j] *= w;
            }
            out
        })
        .collect();

    let mut bank = FilterBank::zeros(spectra.n_speakers, spectra.n_programs, len, grid.fs);
    for (i, f) in filters.into_iter().enumerate() {
        bank.taps[i * len..(i + 1) * len].copy_from_slice(&f);
    }
    Ok(bank)
}

/// `x_ℓ = Σ_k Σ_c s_{k,c} ∗ w_{ℓ,k,c}`; `programs[k][c]` are the stereo
/// source signals.
pub fn synthesize_drive_signals(bank: &FilterBank, programs: &[[Vec<f64>; 2]]) -> Result<Vec<Vec<f64>>> {
    if programs.len() != bank.n_programs {
        return Err(Error::Dimension(format!(
            "{} programs supplied, filter bank has {}",
            programs.len(),
            bank.n_programs
        )));
    }
    let longest = programs.iter().flatten().map(Vec::len).max().unwrap_or(0);
    let out_len = if longest == 0 { 0 } else { longest + bank.filter_length - 1 };
    Ok((0..bank.n_speakers)
        .into_par_iter()
        .map(|l| {
            let mut x = vec![0.0; out_len];
            for (k, program) in programs.iter().enumerate() {
                for (c, s) in program.iter().enumerate() {
                    if s.is_empty() {
                        continue;
                    }
                    for (acc, v) in x.iter_mut().zip(dsp::convolve(s, bank.filter(l, k, c))) {
                        *acc += v;
                    }
                }
            }
            x
        })
        .collect())
}
