//! Far-field directivity of the testbed woofer and tweeter pistons.

use std::f64::consts::PI;

use psz::atf::piston_directivity;

fn main() {
    let c = 343.0;
    let drivers = [("woofer", 0.04), ("tweeter", 0.0125)];
    let angles = [0.0, 15.0, 30.0, 45.0, 60.0, 90.0];
    for (name, a) in drivers {
        println!("{name} (a = {a} m), 20 log10 |D| in dB");
        print!("{:>8}", "f (Hz)");
        for t in angles {
            print!("{:>8}", format!("{t}°"));
        }
        println!();
        for f in [500.0, 1000.0, 2000.0, 5000.0, 10000.0, 20000.0] {
            print!("{f:>8}");
            for t in angles {
                let d = piston_directivity(2.0 * PI * f, f64::to_radians(t), a, c);
                print!("{:>8.1}", 20.0 * d.abs().max(1e-6).log10());
            }
            println!();
        }
        // ka at which the first null reaches 90°
        println!("  first null at 90° from {:.0} Hz\n", 3.8317 * c / (2.0 * PI * a));
    }
}
