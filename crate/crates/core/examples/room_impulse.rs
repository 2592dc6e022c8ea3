//! Image-source room response between one loudspeaker and one ear, split
//! into the direct arrival and the reflections.

use std::f64::consts::PI;

use psz::geometry::Vec3;
use psz::room::{enumerate_images, simulate_rir, RoomSpec};

fn main() -> psz::Result<()> {
    let room = RoomSpec::default();
    let (src, rcv) = (Vec3::new(2.0, 1.0, 1.15), Vec3::new(2.1, 2.0, 1.2));
    let (c, fs) = (343.0, 48_000.0);
    let rir = simulate_rir(&room, src, rcv, c, fs)?;

    let d = src.distance(rcv);
    let direct_sum: f64 = rir.direct.iter().sum();
    println!("distance {d:.3} m, arrival at sample {:.2}", d / c * fs);
    println!("direct amplitude {direct_sum:.6} (1/4πd = {:.6})", 1.0 / (4.0 * PI * d));

    let e = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    println!(
        "reflected / direct energy: {:.2} dB",
        10.0 * (e(&rir.reflected) / e(&rir.direct)).log10()
    );

    let images = enumerate_images(&room, src, rcv);
    println!("{} images up to order {}", images.len(), room.max_image_order);
    let mut first: Vec<_> = images.iter().filter(|i| i.order == 1).collect();
    first.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    for i in first {
        println!("  order 1 at {:7.2} samples, gain {:.2}", i.distance / c * fs, i.gain);
    }

    // decay of the reflected tail in 50 ms windows
    let win = (0.05 * fs) as usize;
    for (n, chunk) in rir.reflected.chunks(win).enumerate() {
        println!("  {:>3}-{:<3} ms {:8.1} dB", n * 50, (n + 1) * 50, 10.0 * e(chunk).max(1e-30).log10());
    }
    Ok(())
}
