//! Rigid-sphere head response at the two ears of a listener, for a source
//! one metre away at 60° to the left.

use std::f64::consts::PI;

use psz::atf::{rs_hrtf, sphere_series, SphereBoundary};
use psz::geometry::{Vec3, DEFAULT_HEAD_RADIUS};
use psz::specfun::SeriesControl;

fn main() -> psz::Result<()> {
    let r = DEFAULT_HEAD_RADIUS;
    let c = 343.0;
    let ctl = SeriesControl::default();
    let az = 60f64.to_radians();
    let source = Vec3::new(az.sin(), az.cos(), 0.0);
    let (left, right) = (Vec3::new(r, 0.0, 0.0), Vec3::new(-r, 0.0, 0.0));

    println!("{:>8} {:>10} {:>10} {:>8}", "f (Hz)", "left dB", "right dB", "order");
    for f in [100.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0, 20000.0] {
        let w = 2.0 * PI * f;
        let hl = rs_hrtf(w, source, left, r, c, &ctl)?;
        let out = sphere_series(w, source, right, r, c, &ctl, SphereBoundary::Rigid)?;
        println!(
            "{f:>8} {:>10.2} {:>10.2} {:>8}",
            20.0 * hl.norm().log10(),
            20.0 * out.value.norm().log10(),
            out.order
        );
    }

    let free = sphere_series(2.0 * PI * 5000.0, source, left, r, c, &ctl, SphereBoundary::Transparent)?;
    println!("\nwithout the sphere the ratio is {:.3e}", free.value);
    Ok(())
}
