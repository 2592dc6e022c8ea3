//! FFT helpers, fractional-delay kernels, convolution and resampling.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn forward(n: usize) -> Arc<dyn Fft<f64>> {
    planner().lock().expect("fft planner poisoned").plan_fft_forward(n)
}

fn inverse(n: usize) -> Arc<dyn Fft<f64>> {
    planner().lock().expect("fft planner poisoned").plan_fft_inverse(n)
}

/// Single-sided spectrum (`n/2 + 1` bins) of `signal` zero-padded to `n`.
/// The caller guarantees `signal.len() <= n`.
pub fn rfft(signal: &[f64], n: usize) -> Vec<Complex64> {
    debug_assert!(signal.len() <= n);
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::default());
    forward(n).process(&mut buf);
    buf.truncate(n / 2 + 1);
    buf
}

/// Real signal of length `n` from a single-sided spectrum, using the
/// conjugate-symmetric extension. Imaginary parts at DC and Nyquist are
/// discarded.
pub fn irfft(spectrum: &[Complex64], n: usize) -> Vec<f64> {
    let half = n / 2;
    debug_assert_eq!(spectrum.len(), half + 1);
    let mut buf = vec![Complex64::default(); n];
    buf[0] = Complex64::new(spectrum[0].re, 0.0);
    buf[half] = Complex64::new(spectrum[half].re, 0.0);
    for i in 1..half {
        buf[i] = spectrum[i];
        buf[n - i] = spectrum[i].conj();
    }
    inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.into_iter().map(|c| c.re * scale).collect()
}

/// Taps of the fractional-delay kernel.
pub const FRACTIONAL_DELAY_TAPS: usize = 32;

/// Hann-windowed sinc interpolating a unit pulse at `delay` samples.
///
/// Returns the index of the first tap and the taps, normalized to unit sum
/// so the DC gain is exactly one.
pub fn fractional_delay(delay: f64) -> (i64, [f64; FRACTIONAL_DELAY_TAPS]) {
    let half = (FRACTIONAL_DELAY_TAPS / 2) as i64;
    let base = delay.floor();
    let frac = delay - base;
    let first = base as i64 - half + 1;
    let mut taps = [0.0; FRACTIONAL_DELAY_TAPS];
    for (i, tap) in taps.iter_mut().enumerate() {
        let x = (i as i64 - half + 1) as f64 - frac;
        let window = 0.5 * (1.0 + (PI * x / half as f64).cos());
        *tap = sinc(x) * window;
    }
    let sum: f64 = taps.iter().sum();
    for tap in taps.iter_mut() {
        *tap /= sum;
    }
    (first, taps)
}

pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Linear convolution, FFT-based for long inputs.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 64 {
        let mut out = vec![0.0; out_len];
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let n = out_len.next_power_of_two();
    let fa = rfft(a, n);
    let fb = rfft(b, n);
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let mut out = irfft(&prod, n);
    out.truncate(out_len);
    out
}

/// Band-limited resampling by direct windowed-sinc interpolation.
///
/// The kernel cutoff sits at the lower of the two Nyquist frequencies and
/// spans `half_width` input-rate zero crossings on each side.
pub fn resample(input: &[f64], from_fs: f64, to_fs: f64) -> Vec<f64> {
    if from_fs == to_fs {
        return input.to_vec();
    }
    let ratio = to_fs / from_fs;
    let out_len = ((input.len() as f64) * ratio).ceil() as usize;
    let cutoff = ratio.min(1.0);
    let half_width = 64.0 / cutoff;
    (0..out_len)
        .map(|i| {
            let t = i as f64 / ratio;
            let lo = ((t - half_width).ceil().max(0.0)) as usize;
            let hi = ((t + half_width).floor() as usize).min(input.len().saturating_sub(1));
            let mut acc = 0.0;
            for (n, &x) in input.iter().enumerate().take(hi + 1).skip(lo) {
                let d = t - n as f64;
                let window = 0.5 * (1.0 + (PI * d / half_width).cos());
                acc += x * cutoff * sinc(cutoff * d) * window;
            }
            acc
        })
        .collect()
}
