//! Inter-zone isolation, inter-program interference and crosstalk
//! cancellation, per frequency and as broadband log-means.
//!
//! Each program drives its two stereo channels with unit-variance
//! uncorrelated signals, so pressure energies add over channels:
//! `|P^{(j)}_{k,e}|² = Σ_c |Σ_ℓ H_{k,e,ℓ} W_{ℓ,j,c}|²`.

use std::fmt;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atf::{AtfSet, FrequencyGrid};
use crate::error::{Error, Result};
use crate::filters::FilterBank;

pub const EVAL_F_MIN: f64 = 100.0;
pub const EVAL_F_MAX: f64 = 20_000.0;
pub const EVAL_POINTS: usize = 256;

/// Per-channel pressures `P[j][k][e][c][bin]`: program `j`, listener `k`,
/// ear `e`, source channel `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramPressures {
    pub n_programs: usize,
    pub n_listeners: usize,
    pub grid: FrequencyGrid,
    pub data: Vec<Complex64>,
}

impl ProgramPressures {
    pub fn zeros(n_programs: usize, n_listeners: usize, grid: FrequencyGrid) -> Self {
        ProgramPressures {
            n_programs,
            n_listeners,
            grid,
            data: vec![Complex64::default(); n_programs * n_listeners * 4 * grid.n_bins()],
        }
    }

    fn offset(&self, program: usize, listener: usize, ear: usize, channel: usize) -> usize {
        (((program * self.n_listeners + listener) * 2 + ear) * 2 + channel) * self.grid.n_bins()
    }

    pub fn channel(&self, program: usize, listener: usize, ear: usize, channel: usize) -> &[Complex64] {
        let o = self.offset(program, listener, ear, channel);
        &self.data[o..o + self.grid.n_bins()]
    }

    pub fn channel_mut(&mut self, program: usize, listener: usize, ear: usize, channel: usize) -> &mut [Complex64] {
        let o = self.offset(program, listener, ear, channel);
        let n = self.grid.n_bins();
        &mut self.data[o..o + n]
    }

    /// `Σ_c |P_c|²` at one bin.
    pub fn energy(&self, program: usize, listener: usize, ear: usize, bin: usize) -> f64 {
        (0..2)
            .map(|c| self.data[self.offset(program, listener, ear, c) + bin].norm_sqr())
            .sum()
    }

    /// Both channels fed the same signal, `Σ_c P_c`.
    pub fn coherent(&self, program: usize, listener: usize, ear: usize, bin: usize) -> Complex64 {
        (0..2).map(|c| self.data[self.offset(program, listener, ear, c) + bin]).sum()
    }

    /// Entry `T_{k,e,c}` of listener `k`'s own 2×2 stereo-to-ear matrix.
    pub fn transfer(&self, listener: usize, bin: usize) -> [[Complex64; 2]; 2] {
        let at = |e, c| self.data[self.offset(listener, listener, e, c) + bin];
        [[at(0, 0), at(0, 1)], [at(1, 0), at(1, 1)]]
    }

    pub fn target_energy(&self, k: usize, bin: usize) -> f64 {
        (0..2).map(|e| self.energy(k, k, e, bin)).sum()
    }

    pub fn interference_energy(&self, k: usize, bin: usize) -> f64 {
        (0..self.n_programs)
            .filter(|&j| j != k)
            .map(|j| (0..2).map(|e| self.energy(j, k, e, bin)).sum::<f64>())
            .sum()
    }

    pub fn leakage_energy(&self, k: usize, bin: usize) -> f64 {
        (0..self.n_listeners)
            .filter(|&i| i != k)
            .map(|i| (0..2).map(|e| self.energy(k, i, e, bin)).sum::<f64>())
            .sum()
    }

    fn check_listener(&self, k: usize) -> Result<()> {
        if k >= self.n_listeners || k >= self.n_programs {
            return Err(Error::InvalidArgument(format!(
                "listener {} out of range (K = {})",
                k + 1,
                self.n_listeners
            )));
        }
        Ok(())
    }
}

/// `P^{(j)}_{k,e,c} = Σ_ℓ H_{k,e,ℓ} W_{ℓ,j,c}` with `W` the spectra of the
/// FIR taps on the evaluation grid.
pub fn program_pressures(bank: &FilterBank, eval_atf: &AtfSet) -> Result<ProgramPressures> {
    if eval_atf.points_per_ear != 1 {
        return Err(Error::Dimension(format!(
            "evaluation ATFs must use one point per ear, got {}",
            eval_atf.points_per_ear
        )));
    }
    if bank.n_speakers != eval_atf.n_speakers {
        return Err(Error::Dimension(format!(
            "filter bank drives {} speakers, ATFs have {}",
            bank.n_speakers, eval_atf.n_speakers
        )));
    }
    if bank.sample_rate != eval_atf.grid.fs {
        return Err(Error::Dimension(format!(
            "filter bank rate {} differs from ATF rate {}",
            bank.sample_rate, eval_atf.grid.fs
        )));
    }
    let grid = eval_atf.grid;
    let w = bank.spectra(&grid)?;
    let mut pp = ProgramPressures::zeros(bank.n_programs, eval_atf.n_listeners, grid);
    for j in 0..bank.n_programs {
        for k in 0..eval_atf.n_listeners {
            for e in 0..2 {
                for c in 0..2 {
                    let out = pp.channel_mut(j, k, e, c);
                    for l in 0..bank.n_speakers {
                        let h = eval_atf.spectrum(k, e, 0, l);
                        let wl = w.spectrum(l, j, c);
                        for ((o, hv), wv) in out.iter_mut().zip(h).zip(wl) {
                            *o += hv * wv;
                        }
                    }
                }
            }
        }
    }
    Ok(pp)
}

/// `1e-12` times the largest per-bin target energy.
pub fn default_epsilon(pp: &ProgramPressures) -> f64 {
    let k_max = pp.n_listeners.min(pp.n_programs);
    let max = (0..k_max)
        .flat_map(|k| (0..pp.grid.n_bins()).map(move |b| (k, b)))
        .map(|(k, b)| pp.target_energy(k, b))
        .fold(0.0, f64::max);
    let eps = 1e-12 * max;
    if eps > 0.0 {
        eps
    } else {
        f64::MIN_POSITIVE
    }
}

fn ratio_db(num: f64, den: f64) -> f64 {
    10.0 * (num / den).log10()
}

pub fn izi_spectrum(pp: &ProgramPressures, k: usize, eps: f64) -> Result<Vec<f64>> {
    pp.check_listener(k)?;
    check_pair(pp, eps)?;
    Ok((0..pp.grid.n_bins())
        .map(|b| ratio_db(pp.target_energy(k, b), pp.leakage_energy(k, b) + eps))
        .collect())
}

pub fn ipi_spectrum(pp: &ProgramPressures, k: usize, eps: f64) -> Result<Vec<f64>> {
    pp.check_listener(k)?;
    check_pair(pp, eps)?;
    Ok((0..pp.grid.n_bins())
        .map(|b| ratio_db(pp.target_energy(k, b), pp.interference_energy(k, b) + eps))
        .collect())
}

pub fn xtc_spectrum(pp: &ProgramPressures, k: usize, eps: f64) -> Result<Vec<f64>> {
    pp.check_listener(k)?;
    check_eps(eps)?;
    Ok((0..pp.grid.n_bins()).map(|b| xtc_of_matrix(&pp.transfer(k, b), eps)).collect())
}

/// `10 log10((|T_LL|² + |T_RR|²) / (|T_LR|² + |T_RL|² + ε))`.
pub fn xtc_of_matrix(t: &[[Complex64; 2]; 2], eps: f64) -> f64 {
    let same = t[0][0].norm_sqr() + t[1][1].norm_sqr();
    let cross = t[0][1].norm_sqr() + t[1][0].norm_sqr();
    ratio_db(same, cross + eps)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

fn check_pair(pp: &ProgramPressures, eps: f64) -> Result<()> {
    check_eps(eps)?;
    if pp.n_listeners < 2 || pp.n_programs < 2 {
        return Err(Error::InvalidArgument(
            "isolation and interference need at least two listeners".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "IZI")]
    Izi,
    #[serde(rename = "IPI")]
    Ipi,
    #[serde(rename = "XTC")]
    Xtc,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Izi, Metric::Ipi, Metric::Xtc];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Izi => "IZI",
            Metric::Ipi => "IPI",
            Metric::Xtc => "XTC",
        }
    }

    pub fn from_label(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.label() == s)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurve {
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
}

/// `EVAL_POINTS` log-spaced frequencies over `[EVAL_F_MIN, EVAL_F_MAX]`.
pub fn evaluation_frequencies() -> Vec<f64> {
    let (lo, hi) = (EVAL_F_MIN.ln(), EVAL_F_MAX.ln());
    (0..EVAL_POINTS)
        .map(|i| match i {
            0 => EVAL_F_MIN,
            i if i == EVAL_POINTS - 1 => EVAL_F_MAX,
            i => (lo + (hi - lo) * i as f64 / (EVAL_POINTS - 1) as f64).exp(),
        })
        .collect()
}

impl MetricCurve {
    /// Samples a per-bin spectrum at the nearest bin to each evaluation
    /// frequency.
    pub fn from_spectrum(spectrum: &[f64], grid: &FrequencyGrid) -> Self {
        let freqs = evaluation_frequencies();
        let values = freqs.iter().map(|&f| spectrum[grid.nearest_bin(f)]).collect();
        MetricCurve { freqs, values }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz,value_db\n");
        for (f, v) in self.freqs.iter().zip(&self.values) {
            let _ = writeln!(s, "{f:?},{v:?}");
        }
        s
    }

    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("freq_hz,value_db") {
            return Err("missing `freq_hz,value_db` header".into());
        }
        let mut curve = MetricCurve {
            freqs: Vec::new(),
            values: Vec::new(),
        };
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (f, v) = line
                .split_once(',')
                .ok_or_else(|| format!("line {}: expected two fields", i + 2))?;
            curve.freqs.push(f.trim().parse().map_err(|e| format!("line {}: {e}", i + 2))?);
            curve.values.push(v.trim().parse().map_err(|e| format!("line {}: {e}", i + 2))?);
        }
        Ok(curve)
    }
}

/// Arithmetic mean of the dB values.
pub fn broadband(curve: &MetricCurve) -> Result<f64> {
    if curve.values.is_empty() {
        return Err(Error::InvalidArgument("broadband of an empty curve".into()));
    }
    Ok(curve.values.iter().sum::<f64>() / curve.values.len() as f64)
}

/// All three curves for one listener.
#[derive(Debug, Clone, PartialEq)]
pub struct ListenerMetrics {
    pub izi: MetricCurve,
    pub ipi: MetricCurve,
    pub xtc: MetricCurve,
}

impl ListenerMetrics {
    pub fn curve(&self, metric: Metric) -> &MetricCurve {
        match metric {
            Metric::Izi => &self.izi,
            Metric::Ipi => &self.ipi,
            Metric::Xtc => &self.xtc,
        }
    }
}

/// Curves for every listener; `eps = None` uses [`default_epsilon`].
pub fn evaluate(pp: &ProgramPressures, eps: Option<f64>) -> Result<Vec<ListenerMetrics>> {
    let eps = eps.unwrap_or_else(|| default_epsilon(pp));
    (0..pp.n_listeners)
        .map(|k| {
            let curve = |s: Vec<f64>| MetricCurve::from_spectrum(&s, &pp.grid);
            Ok(ListenerMetrics {
                izi: curve(izi_spectrum(pp, k, eps)?),
                ipi: curve(ipi_spectrum(pp, k, eps)?),
                xtc: curve(xtc_spectrum(pp, k, eps)?),
            })
        })
        .collect()
}

pub fn izi(pp: &ProgramPressures, k: usize, eps: f64) -> Result<MetricCurve> {
    Ok(MetricCurve::from_spectrum(&izi_spectrum(pp, k, eps)?, &pp.grid))
}

pub fn ipi(pp: &ProgramPressures, k: usize, eps: f64) -> Result<MetricCurve> {
    Ok(MetricCurve::from_spectrum(&ipi_spectrum(pp, k, eps)?, &pp.grid))
}

pub fn xtc(bank: &FilterBank, eval_atf: &AtfSet, k: usize, eps: f64) -> Result<MetricCurve> {
    let pp = program_pressures(bank, eval_atf)?;
    Ok(MetricCurve::from_spectrum(&xtc_spectrum(&pp, k, eps)?, &pp.grid))
}
