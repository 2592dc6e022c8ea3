//! Special functions for the piston and rigid-sphere models.
//!
//! Spherical Bessel functions of the first kind use Miller's downward
//! recurrence (normalized against whichever of `j_0`, `j_1` is larger in
//! magnitude) whenever the order range reaches past the argument, and the
//! upward recurrence otherwise. `y_n` always uses the upward recurrence,
//! which is stable for the dominant solution.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation control for the spherical-harmonic series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesControl {
    /// Hard cap on the series order.
    pub max_order: usize,
    /// Relative term magnitude below which the series counts as converged.
    pub term_tol: f64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            max_order: 80,
            term_tol: 1e-9,
        }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.term_tol > 0.0 && self.term_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "term_tol must be positive, got {}",
                self.term_tol
            )));
        }
        Ok(())
    }
}

const RESCALE_AT: f64 = 1e250;

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> f64 {
    if x < 0.0 {
        return -bessel_j1(-x);
    }
    if x < 1e-4 {
        let x2 = x * x;
        return 0.5 * x * (1.0 - x2 / 8.0);
    }
    // Miller: J_{n-1} = (2n/x) J_n - J_{n+1}, normalized by J_0 + 2 sum J_{2k} = 1.
    let mut start = (x.max(10.0) + 15.0 + (40.0 * x.max(10.0)).sqrt()) as usize;
    start += start % 2;
    let mut next = 0.0_f64;
    let mut cur = 1e-300_f64;
    let mut norm = 0.0_f64;
    let mut j1 = 0.0_f64;
    for n in (1..=start).rev() {
        let prev = 2.0 * n as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // `cur` now holds J_{n-1}
        let order = n - 1;
        if order == 1 {
            j1 = cur;
        }
        if order % 2 == 0 && order > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > RESCALE_AT {
            cur /= RESCALE_AT;
            next /= RESCALE_AT;
            norm /= RESCALE_AT;
            j1 /= RESCALE_AT;
        }
    }
    norm += cur;
    j1 / norm
}

/// `j_n(x)` for a single order.
pub fn spherical_bessel_j(n: usize, x: f64) -> f64 {
    if x < 0.0 {
        let v = spherical_bessel_j(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    spherical_bessel_j_all(n, x)[n]
}

/// `j_0(x) ..= j_{n_max}(x)` for `x >= 0`.
pub fn spherical_bessel_j_all(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let (sin, cos) = x.sin_cos();
    let j0 = sin / x;
    if n_max == 0 {
        out[0] = j0;
        return out;
    }
    if x > (n_max + 1) as f64 {
        out[0] = j0;
        out[1] = sin / (x * x) - cos / x;
        for n in 1..n_max {
            out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
        }
        return out;
    }

    let reach = n_max.max(x.ceil() as usize);
    let start = reach + 20 + (40.0 * reach as f64).sqrt() as usize;
    let mut next = 0.0_f64;
    let mut cur = 1e-300_f64;
    for n in (1..=start).rev() {
        let prev = (2 * n + 1) as f64 / x * cur - next;
        next = cur;
        cur = prev;
        let order = n - 1;
        if order <= n_max {
            out[order] = cur;
        }
        if cur.abs() > RESCALE_AT {
            cur /= RESCALE_AT;
            next /= RESCALE_AT;
            if order <= n_max {
                for v in out[order..].iter_mut() {
                    *v /= RESCALE_AT;
                }
            }
        }
    }
    // j_1 small-argument series avoids the cancellation in its closed form.
    let j1 = if x < 0.1 {
        let x2 = x * x;
        x / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0)))
    } else {
        sin / (x * x) - cos / x
    };
    let scale = if j0.abs() >= j1.abs() {
        j0 / out[0]
    } else {
        j1 / out[1]
    };
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// `y_0(x) ..= y_{n_max}(x)` for `x > 0`, upward recurrence.
pub fn spherical_bessel_y_all(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    let (sin, cos) = x.sin_cos();
    out[0] = -cos / x;
    if n_max >= 1 {
        out[1] = -cos / (x * x) - sin / x;
    }
    for n in 1..n_max {
        out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
    }
    out
}

/// `h⁽¹⁾_0(x) ..= h⁽¹⁾_{n_max}(x)`.
pub fn spherical_hankel1_all(n_max: usize, x: f64) -> Result<Vec<Complex64>> {
    if x == 0.0 {
        return Err(Error::SingularArgument {
            what: "spherical_hankel1",
        });
    }
    check_positive(x, "spherical_hankel1")?;
    let j = spherical_bessel_j_all(n_max, x);
    let y = spherical_bessel_y_all(n_max, x);
    Ok(j.into_iter()
        .zip(y)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

pub fn spherical_hankel1(n: usize, x: f64) -> Result<Complex64> {
    Ok(spherical_hankel1_all(n, x)?[n])
}

fn check_positive(x: f64, what: &'static str) -> Result<()> {
    if x == 0.0 {
        return Err(Error::SingularArgument { what });
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{what}: argument must be positive and finite, got {x}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphKind {
    BesselJ,
    Hankel1,
}

/// Derivatives of a spherical-function ladder `f_0 ..= f_N` at `x`:
/// `f_n' = f_{n-1} - (n+1)/x f_n`, with `f_0' = -f_1`. Returns orders
/// `0 ..= N-1`.
pub fn ladder_derivatives<T>(values: &[T], x: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Neg<Output = T>,
{
    let n_top = values.len().saturating_sub(1);
    (0..n_top)
        .map(|n| {
            if n == 0 {
                -values[1]
            } else {
                values[n - 1] - values[n] * ((n + 1) as f64 / x)
            }
        })
        .collect()
}

/// `f_n'(x)` for `f = j_n` or `f = h⁽¹⁾_n`.
pub fn sph_derivative(kind: SphKind, n: usize, x: f64) -> Result<Complex64> {
    check_positive(x, "sph_derivative")?;
    let top = n + 1;
    let values: Vec<Complex64> = match kind {
        SphKind::BesselJ => spherical_bessel_j_all(top, x)
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect(),
        SphKind::Hankel1 => spherical_hankel1_all(top, x)?,
    };
    Ok(ladder_derivatives(&values, x)[n])
}

/// Legendre polynomial `P_n(x)` by the Bonnet recurrence.
pub fn legendre_p(n: usize, x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!(
            "legendre_p: |x| must not exceed 1, got {x}"
        )));
    }
    Ok(legendre_p_all(n, x)[n])
}

/// `P_0(x) ..= P_{n_max}(x)`; the caller guarantees `|x| <= 1`.
pub fn legendre_p_all(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    out[0] = 1.0;
    if n_max >= 1 {
        out[1] = x;
    }
    for n in 1..n_max {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + 1.0) * x * out[n] - nf * out[n - 1]) / (nf + 1.0);
    }
    out
}

/// Rigid (Neumann) boundary coefficient `j_n'(x) / h⁽¹⁾_n'(x)`.
pub fn rigid_sphere_alpha(n: usize, x: f64) -> Result<Complex64> {
    check_positive(x, "rigid_sphere_alpha")?;
    Ok(rigid_sphere_alpha_all(n, x)[n])
}

/// `α_0(x) ..= α_{n_max}(x)`, `x > 0`.
pub(crate) fn rigid_sphere_alpha_all(n_max: usize, x: f64) -> Vec<Complex64> {
    let j = spherical_bessel_j_all(n_max + 1, x);
    let y = spherical_bessel_y_all(n_max + 1, x);
    let dj = ladder_derivatives(&j, x);
    let dy = ladder_derivatives(&y, x);
    dj.into_iter()
        .zip(dy)
        .map(|(dj, dy)| Complex64::new(dj, 0.0) / Complex64::new(dj, dy))
        .collect()
}
