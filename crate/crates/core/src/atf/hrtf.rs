//! Normalized rigid-sphere head-related transfer function.
//!
//! The series is the spherical-harmonic expansion of a point source at
//! `r_speaker` observed at `r_point` (both relative to the sphere center),
//! minus the field scattered by a rigid sphere of radius `R`:
//!
//! ```text
//! S_n  = j_n(k r<) h_n(k r>) - α_n(kR) h_n(k r_s) h_n(k r_p)
//! H    = conj( i k Σ (2n+1) S_n P_n(cos γ) · d e^{-ikd} )
//! ```
//!
//! The Bessel ladders follow the `e^{+ikr}` outgoing-wave convention, in
//! which `i k Σ (2n+1) j_n h_n P_n = e^{ikd}/d` without the sphere. The
//! normalized ratio is conjugated into the `e^{-iωt}` convention of the
//! FFT spectra it multiplies, so `H = 1` exactly when the sphere is absent.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{angle_between, Vec3};
use crate::specfun::{legendre_p_all, rigid_sphere_alpha_all, spherical_hankel1_all, SeriesControl};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereBoundary {
    /// Rigid (sound-hard) surface.
    Rigid,
    /// No scatterer: `α_n = 0`, leaving only the free-field expansion.
    Transparent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOutcome {
    pub value: Complex64,
    /// Highest order summed.
    pub order: usize,
}

/// Rigid-sphere HRTF normalized by the free-field Green's function.
pub fn rs_hrtf(omega: f64, r_speaker: Vec3, r_point: Vec3, radius: f64, c: f64, ctl: &SeriesControl) -> Result<Complex64> {
    sphere_series(omega, r_speaker, r_point, radius, c, ctl, SphereBoundary::Rigid).map(|o| o.value)
}

pub fn sphere_series(
    omega: f64,
    r_speaker: Vec3,
    r_point: Vec3,
    radius: f64,
    c: f64,
    ctl: &SeriesControl,
    boundary: SphereBoundary,
) -> Result<SeriesOutcome> {
    ctl.validate()?;
    let rs = r_speaker.norm();
    let rp = r_point.norm();
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("sphere radius must be positive, got {radius}")));
    }
    if !(rs > radius) {
        return Err(Error::InvalidArgument(format!(
            "loudspeaker at distance {rs} m is inside the {radius} m sphere"
        )));
    }
    if rp < radius * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "control point at distance {rp} m is inside the {radius} m sphere"
        )));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
    }

    let k = omega / c;
    let gamma = angle_between(r_speaker, r_point)?;
    let n_max = ctl.max_order;
    let legendre = legendre_p_all(n_max, gamma.cos());
    let h_s = spherical_hankel1_all(n_max, k * rs)?;
    let h_p = spherical_hankel1_all(n_max, k * rp)?;
    let (inner, outer) = if rp <= rs { (&h_p, &h_s) } else { (&h_s, &h_p) };
    let r_inner = rs.min(rp);
    let alpha = match boundary {
        SphereBoundary::Rigid => Some(rigid_sphere_alpha_all(n_max, k * radius)),
        SphereBoundary::Transparent => None,
    };

    let mut sum = Complex64::default();
    let mut last_term = f64::INFINITY;
    for n in 0..=n_max {
        let mut s_n = outer[n] * inner[n].re;
        if let Some(alpha) = &alpha {
            s_n -= alpha[n] * h_s[n] * h_p[n];
        }
        let weight = (2 * n + 1) as f64;
        sum += s_n * (weight * legendre[n]);
        // |P_n| <= 1, so this bounds the term whatever the angle
        let bound = weight * s_n.norm();
        last_term = bound / sum.norm();
        if !last_term.is_finite() {
            break;
        }
        if n as f64 > k * r_inner && last_term < ctl.term_tol {
            let d = r_speaker.distance(r_point);
            let ratio = Complex64::i() * k * sum * d * Complex64::from_polar(1.0, -k * d);
            return Ok(SeriesOutcome {
                value: ratio.conj(),
                order: n,
            });
        }
    }
    Err(Error::Convergence {
        max_order: n_max,
        last_term,
        tol: ctl.term_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{ladder_derivatives, spherical_bessel_j_all, spherical_bessel_y_all};
    use std::f64::consts::PI;

    const C: f64 = 343.0;
    const R: f64 = 0.0875;

    fn omega(f: f64) -> f64 {
        2.0 * PI * f
    }

    /// Surface pressure on a rigid sphere from the Wronskian form
    /// `j_n - α_n h_n = i / (x² h_n'(x))`, evaluated with an independent
    /// high-order ladder.
    fn surface_oracle(f: f64, rs: f64, gamma: f64) -> Complex64 {
        let k = omega(f) / C;
        let n_max = 120;
        let x = k * R;
        let j = spherical_bessel_j_all(n_max + 1, x);
        let y = spherical_bessel_y_all(n_max + 1, x);
        let dh: Vec<Complex64> = ladder_derivatives(&j, x)
            .into_iter()
            .zip(ladder_derivatives(&y, x))
            .map(|(a, b)| Complex64::new(a, b))
            .collect();
        let hs = spherical_hankel1_all(n_max, k * rs).unwrap();
        let p = legendre_p_all(n_max, gamma.cos());
        let mut sum = Complex64::default();
        for n in 0..=n_max {
            let term = hs[n] * Complex64::i() / (x * x * dh[n]) * ((2 * n + 1) as f64 * p[n]);
            if !term.is_finite() {
                break;
            }
            sum += term;
        }
        let d = (rs * rs + R * R - 2.0 * rs * R * gamma.cos()).sqrt();
        (Complex64::i() * k * sum * d * Complex64::from_polar(1.0, -k * d)).conj()
    }

    fn geometry(rs: f64, gamma: f64) -> (Vec3, Vec3) {
        (
            Vec3::new(rs * gamma.sin(), 0.0, rs * gamma.cos()),
            Vec3::new(0.0, 0.0, R),
        )
    }

    #[test]
    fn transparent_sphere_is_unity() {
        let ctl = SeriesControl {
            max_order: 250,
            ..SeriesControl::default()
        };
        for &f in &[100.0, 1000.0, 5000.0, 16000.0] {
            for &(rs, gamma, rp) in &[(1.1f64, 0.3f64, R), (0.6, 2.0, 0.1), (2.0, 3.1, R), (1.0, 1.2, 0.3)] {
                let sp = Vec3::new(rs * gamma.sin(), 0.0, rs * gamma.cos());
                let pt = Vec3::new(0.0, 0.0, rp);
                let out = sphere_series(omega(f), sp, pt, R, C, &ctl, SphereBoundary::Transparent).unwrap();
                assert!((out.value - Complex64::new(1.0, 0.0)).norm() < 1e-6, "f={f} {:?}", out);
            }
        }
    }

    #[test]
    fn matches_surface_oracle() {
        let ctl = SeriesControl::default();
        for &f in &[200.0, 2000.0, 8000.0, 19000.0] {
            for &gamma in &[0.0, 0.7, PI / 2.0, 2.5, PI] {
                let (sp, pt) = geometry(1.2, gamma);
                let got = rs_hrtf(omega(f), sp, pt, R, C, &ctl).unwrap();
                let want = surface_oracle(f, 1.2, gamma);
                assert!((got - want).norm() < 1e-7 * want.norm(), "f={f} γ={gamma}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn low_frequency_limit() {
        let f = 100.0;
        assert!(omega(f) / C * R < 0.2);
        let ctl = SeriesControl::default();
        for &gamma in &[0.0, 1.0, 2.0, PI] {
            let (sp, pt) = geometry(1.1, gamma);
            let h = rs_hrtf(omega(f), sp, pt, R, C, &ctl).unwrap();
            let db = 20.0 * h.norm().log10();
            assert!(db.abs() < 0.5, "{db} dB");
        }
    }

    #[test]
    fn head_shadow_at_8k() {
        let ctl = SeriesControl::default();
        let (sp, pt) = geometry(1.1, 0.2);
        let ipsi = rs_hrtf(omega(8000.0), sp, pt, R, C, &ctl).unwrap();
        let (sp, pt) = geometry(1.1, PI - 0.2);
        let contra = rs_hrtf(omega(8000.0), sp, pt, R, C, &ctl).unwrap();
        assert!(contra.norm() < ipsi.norm());
    }

    #[test]
    fn doubling_max_order_is_stable() {
        let base = SeriesControl::default();
        let doubled = SeriesControl {
            max_order: 2 * base.max_order,
            ..base
        };
        for &f in &[150.0, 3000.0, 12000.0, 20000.0] {
            let (sp, pt) = geometry(1.3, 1.9);
            let a = rs_hrtf(omega(f), sp, pt, R, C, &base).unwrap();
            let b = rs_hrtf(omega(f), sp, pt, R, C, &doubled).unwrap();
            assert!((a - b).norm() < 1e-6 * b.norm());
        }
    }

    #[test]
    fn convergence_failure_is_reported() {
        let ctl = SeriesControl {
            max_order: 5,
            term_tol: 1e-9,
        };
        let (sp, pt) = geometry(1.1, 1.0);
        assert!(matches!(
            rs_hrtf(omega(10000.0), sp, pt, R, C, &ctl),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn rejects_speaker_inside_sphere() {
        let ctl = SeriesControl::default();
        let r = rs_hrtf(omega(1000.0), Vec3::new(0.0, 0.0, 0.05), Vec3::new(0.0, 0.0, R), R, C, &ctl);
        assert!(r.is_err());
    }
}
