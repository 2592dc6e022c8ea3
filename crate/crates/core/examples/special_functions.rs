//! Spherical Bessel and Hankel ladders, Legendre polynomials and the
//! rigid-sphere coefficients that feed the head model.

use psz::specfun::{
    bessel_j1, legendre_p_all, rigid_sphere_alpha, spherical_bessel_j_all, spherical_bessel_y_all,
    spherical_hankel1_all,
};

fn main() -> psz::Result<()> {
    let x = 2.5;
    let j = spherical_bessel_j_all(6, x);
    let y = spherical_bessel_y_all(6, x);
    println!("x = {x}");
    println!("{:>3} {:>14} {:>14} {:>14}", "n", "j_n", "y_n", "x² W - 1");
    for n in 0..6 {
        // Wronskian j_{n+1} y_n - j_n y_{n+1} = 1/x²
        let w = j[n + 1] * y[n] - j[n] * y[n + 1];
        println!("{n:>3} {:>14.6e} {:>14.6e} {:>14.2e}", j[n], y[n], x * x * w - 1.0);
    }

    let h = spherical_hankel1_all(2, 1.0)?;
    println!("\nh_0(1) = {:.6}  (expected -i e^i)", h[0]);

    let p = legendre_p_all(4, 0.3);
    println!("P_0..P_4(0.3) = {:?}", p.iter().map(|v| format!("{v:.5}")).collect::<Vec<_>>());

    // first zero of J1 by bisection
    let (mut lo, mut hi) = (3.0, 4.5);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if bessel_j1(lo) * bessel_j1(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    println!("first J1 zero ≈ {:.10}", 0.5 * (lo + hi));

    println!("\nrigid-sphere α_n at kR = 3:");
    for n in 0..5 {
        let a = rigid_sphere_alpha(n, 3.0)?;
        println!("  α_{n} = {a:.6}  |α| = {:.6}", a.norm());
    }
    Ok(())
}
