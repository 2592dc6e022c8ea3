//! Shoebox image-source room impulse responses, split into the direct
//! (order-0) arrival and the superposition of all reflected images.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    /// Room extent along x, y, z; the room spans `[0, dimensions]`.
    pub dimensions: Vec3,
    /// Amplitude reflection coefficients for the walls
    /// `x = 0, x = Lx, y = 0, y = Ly, z = 0, z = Lz`.
    pub reflectances: [f64; 6],
    pub max_image_order: usize,
    /// Impulse response length in samples.
    pub rir_length: usize,
}

impl Default for RoomSpec {
    fn default() -> Self {
        RoomSpec {
            dimensions: Vec3::new(5.0, 4.5, 2.7),
            reflectances: [0.6; 6],
            max_image_order: 6,
            rir_length: 12_000,
        }
    }
}

impl RoomSpec {
    pub fn anechoic(dimensions: Vec3, rir_length: usize) -> Self {
        RoomSpec {
            dimensions,
            reflectances: [0.0; 6],
            max_image_order: 0,
            rir_length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimensions;
        if !(d.x > 0.0 && d.y > 0.0 && d.z > 0.0) || !d.is_finite() {
            return Err(Error::InvalidScene(format!(
                "room dimensions must be positive, got {d:?}"
            )));
        }
        if self.reflectances.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::InvalidScene(format!(
                "wall reflectances must lie in [0, 1], got {:?}",
                self.reflectances
            )));
        }
        if self.rir_length == 0 {
            return Err(Error::InvalidScene("rir_length must be at least 1".into()));
        }
        Ok(())
    }

    /// Strictly inside the box.
    pub fn contains(&self, p: Vec3) -> bool {
        let d = self.dimensions;
        p.x > 0.0 && p.x < d.x && p.y > 0.0 && p.y < d.y && p.z > 0.0 && p.z < d.z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedRir {
    pub direct: Vec<f64>,
    pub reflected: Vec<f64>,
    pub sample_rate: f64,
}

/// One image source: its distance to the receiver and the product of the
/// reflectances along its reflection sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Image {
    pub order: usize,
    pub distance: f64,
    pub gain: f64,
}

/// All images up to `max_image_order`, in lexicographic
/// `(nx, ny, nz, qx, qy, qz)` order. The order-0 image comes first.
pub fn enumerate_images(room: &RoomSpec, source: Vec3, receiver: Vec3) -> Vec<Image> {
    let max = room.max_image_order as i64;
    let dims = [room.dimensions.x, room.dimensions.y, room.dimensions.z];
    let src = [source.x, source.y, source.z];
    let rcv = [receiver.x, receiver.y, receiver.z];
    let beta = room.reflectances;

    let mut direct = None;
    let mut images = Vec::new();
    for nx in -max..=max {
        for ny in -max..=max {
            for nz in -max..=max {
                for q in 0..8u8 {
                    let n = [nx, ny, nz];
                    let qs = [(q >> 2) & 1, (q >> 1) & 1, q & 1];
                    let mut order = 0usize;
                    let mut gain = 1.0;
                    let mut dist2 = 0.0;
                    for axis in 0..3 {
                        let qa = qs[axis] as i64;
                        let near = (n[axis] - qa).unsigned_abs() as usize;
                        let far = n[axis].unsigned_abs() as usize;
                        order += near + far;
                        gain *= beta[2 * axis].powi(near as i32) * beta[2 * axis + 1].powi(far as i32);
                        let img = (1 - 2 * qa) as f64 * src[axis] + 2.0 * n[axis] as f64 * dims[axis];
                        let delta = img - rcv[axis];
                        dist2 += delta * delta;
                    }
                    if order > room.max_image_order {
                        continue;
                    }
                    let image = Image {
                        order,
                        distance: dist2.sqrt(),
                        gain,
                    };
                    if order == 0 {
                        direct = Some(image);
                    } else {
                        images.push(image);
                    }
                }
            }
        }
    }
    let mut out = Vec::with_capacity(images.len() + 1);
    out.extend(direct);
    out.extend(images);
    out
}

fn add_arrival(buf: &mut [f64], delay: f64, amplitude: f64) {
    let (first, taps) = dsp::fractional_delay(delay);
    for (i, tap) in taps.iter().enumerate() {
        let idx = first + i as i64;
        if idx >= 0 && (idx as usize) < buf.len() {
            buf[idx as usize] += amplitude * tap;
        }
    }
}

/// Point-source impulse response from `source` to `receiver`.
///
/// Each image contributes a fractional-delay pulse at `d / c` seconds with
/// amplitude `gain / (4π d)`; arrivals past `rir_length` are dropped.
pub fn simulate_rir(room: &RoomSpec, source: Vec3, receiver: Vec3, c: f64, fs: f64) -> Result<DecomposedRir> {
    room.validate()?;
    for (name, p) in [("source", source), ("receiver", receiver)] {
        if !room.contains(p) {
            return Err(Error::OutsideRoom(format!("{name} at {p:?}")));
        }
    }
    if source.distance(receiver) == 0.0 {
        return Err(Error::InvalidArgument("source and receiver coincide".into()));
    }
    let len = room.rir_length;
    let images = enumerate_images(room, source, receiver);
    let direct_image = images[0];
    let direct_delay = direct_image.distance / c * fs;
    if direct_delay.floor() as usize >= len {
        return Err(Error::Length {
            len,
            reason: format!("direct arrival at sample {direct_delay:.1} lies beyond the response"),
        });
    }

    let mut direct = vec![0.0; len];
    add_arrival(&mut direct, direct_delay, 1.0 / (4.0 * PI * direct_image.distance));

    let mut reflected = vec![0.0; len];
    let horizon = (len + dsp::FRACTIONAL_DELAY_TAPS) as f64;
    for image in &images[1..] {
        if image.gain == 0.0 {
            continue;
        }
        let delay = image.distance / c * fs;
        if delay >= horizon {
            continue;
        }
        add_arrival(&mut reflected, delay, image.gain / (4.0 * PI * image.distance));
    }

    Ok(DecomposedRir {
        direct,
        reflected,
        sample_rate: fs,
    })
}
