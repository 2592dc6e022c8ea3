use crate::specfun::bessel_j1;

/// Far-field amplitude directivity of a baffled circular piston,
/// `2 J₁(u) / u` with `u = (ω / c) a sin θ`.
///
/// Returns exactly 1 for `u < 1e-8`, which covers the acoustic axis and
/// the `ω → 0` limit. The value is signed past the first null.
pub fn piston_directivity(omega: f64, theta: f64, radius: f64, c: f64) -> f64 {
    let u = omega / c * radius * theta.sin();
    if u.abs() < 1e-8 {
        return 1.0;
    }
    2.0 * bessel_j1(u) / u
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn on_axis_is_exactly_one() {
        for &omega in &[0.0, 1.0, 2.0 * PI * 20_000.0] {
            assert_eq!(piston_directivity(omega, 0.0, 0.05, 343.0), 1.0);
        }
    }

    #[test]
    fn first_null() {
        let c = 343.0;
        let a = 0.05;
        let theta = PI / 3.0;
        let omega = 3.8317059702 * c / (a * theta.sin());
        assert!(piston_directivity(omega, theta, a, c).abs() < 1e-7);
    }

    #[test]
    fn low_frequency_is_omnidirectional() {
        for i in 0..=20 {
            let theta = PI * i as f64 / 20.0;
            assert!((piston_directivity(1e-3, theta, 0.1, 343.0) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn bounded_by_one() {
        for fi in 0..400 {
            let omega = 2.0 * PI * 50.0 * fi as f64;
            for ti in 0..=90 {
                let theta = PI * ti as f64 / 90.0;
                let d = piston_directivity(omega, theta, 0.04, 343.0);
                assert!(d.abs() <= 1.0);
            }
        }
    }
}
