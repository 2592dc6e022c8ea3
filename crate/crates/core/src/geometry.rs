//! Scene description: room, loudspeaker array, listeners and ear control
//! points, plus the angle computations feeding the directivity and
//! rigid-sphere models.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::room::RoomSpec;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Angle between two nonzero vectors, in `[0, π]`.
///
/// `atan2(|a × b|, a · b)` stays accurate near 0 and π where `acos` of the
/// normalized dot product loses half its digits.
pub fn angle_between(a: Vec3, b: Vec3) -> Result<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if !(na > 0.0 && nb > 0.0) || !na.is_finite() || !nb.is_finite() {
        return Err(Error::InvalidArgument(
            "angle between a zero-length or non-finite vector".into(),
        ));
    }
    Ok(a.cross(b).norm().atan2(a.dot(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Woofer,
    Tweeter,
    Fullrange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Loudspeaker {
    pub id: String,
    pub position: Vec3,
    /// Unit vector along the acoustic axis.
    pub axis: Vec3,
    /// Effective piston radius in meters.
    pub piston_radius: f64,
    pub band: Band,
    /// `[f_lo, f_hi]` in Hz.
    pub band_edges: [f64; 2],
    /// Name of the measured response to use; defaults to `id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fr_id: Option<String>,
}

impl Loudspeaker {
    pub fn fr_key(&self) -> &str {
        self.fr_id.as_deref().unwrap_or(&self.id)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScene(format!("speaker {}: {msg}", self.id)));
        if !self.position.is_finite() {
            return bad("non-finite position".into());
        }
        if (self.axis.norm() - 1.0).abs() > 1e-9 {
            return bad(format!("axis is not unit length (|axis| = {})", self.axis.norm()));
        }
        if !(self.piston_radius > 0.0) {
            return bad(format!("piston radius must be positive, got {}", self.piston_radius));
        }
        let [lo, hi] = self.band_edges;
        if !(lo < hi) {
            return bad(format!("band edges must satisfy f_lo < f_hi, got [{lo}, {hi}]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Ear {
    Left,
    Right,
}

impl Ear {
    pub const BOTH: [Ear; 2] = [Ear::Left, Ear::Right];

    pub fn index(self) -> usize {
        match self {
            Ear::Left => 0,
            Ear::Right => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Ear::Left => "L",
            Ear::Right => "R",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Listener {
    pub head_center: Vec3,
    pub head_radius: f64,
    /// Look direction in the horizontal plane: `(cos yaw, sin yaw, 0)`.
    pub yaw: f64,
    #[serde(default = "one")]
    pub control_points_per_ear: usize,
    #[serde(default = "default_ring_radius")]
    pub control_ring_radius: f64,
}

fn one() -> usize {
    1
}

fn default_ring_radius() -> f64 {
    0.01
}

impl Listener {
    pub fn new(head_center: Vec3, yaw: f64) -> Self {
        Listener {
            head_center,
            head_radius: DEFAULT_HEAD_RADIUS,
            yaw,
            control_points_per_ear: 1,
            control_ring_radius: default_ring_radius(),
        }
    }

    pub fn look_direction(&self) -> Vec3 {
        Vec3::new(self.yaw.cos(), self.yaw.sin(), 0.0)
    }

    /// Unit direction from the head center to the given ear; the two ears are
    /// antipodal along the interaural axis.
    pub fn ear_direction(&self, ear: Ear) -> Vec3 {
        let left = Vec3::new(-self.yaw.sin(), self.yaw.cos(), 0.0);
        match ear {
            Ear::Left => left,
            Ear::Right => -left,
        }
    }

    /// Copy of this listener with `M = 1` (in-ear evaluation points).
    pub fn with_single_point(&self) -> Listener {
        Listener {
            control_points_per_ear: 1,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.head_radius > 0.0) {
            return Err(Error::InvalidScene(format!(
                "head radius must be positive, got {}",
                self.head_radius
            )));
        }
        if self.control_points_per_ear == 0 {
            return Err(Error::InvalidScene("control_points_per_ear must be >= 1".into()));
        }
        if !self.head_center.is_finite() || !self.yaw.is_finite() {
            return Err(Error::InvalidScene("non-finite listener pose".into()));
        }
        Ok(())
    }
}

pub const DEFAULT_HEAD_RADIUS: f64 = 0.0875;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPoint {
    pub ear: Ear,
    pub index: usize,
    pub position: Vec3,
}

/// Control points around both ears, left ear first.
///
/// With one point per ear the point sits on the sphere surface in the ear
/// direction. With `M > 1` the points lie on a circle of
/// `control_ring_radius` around the ear axis, in the plane tangent to the
/// sphere at the ear, so every point is at or outside the surface.
pub fn ear_control_points(listener: &Listener) -> Vec<ControlPoint> {
    let m = listener.control_points_per_ear;
    let r = listener.head_radius;
    let mut points = Vec::with_capacity(2 * m);
    for ear in Ear::BOTH {
        let dir = listener.ear_direction(ear);
        let surface = listener.head_center + dir * r;
        if m == 1 {
            points.push(ControlPoint {
                ear,
                index: 0,
                position: surface,
            });
            continue;
        }
        let u = Vec3::new(0.0, 0.0, 1.0);
        let v = dir.cross(u).normalized();
        for idx in 0..m {
            let phi = std::f64::consts::TAU * idx as f64 / m as f64;
            let offset = (u * phi.cos() + v * phi.sin()) * listener.control_ring_radius;
            points.push(ControlPoint {
                ear,
                index: idx,
                position: surface + offset,
            });
        }
    }
    points
}

/// Angle between a loudspeaker's acoustic axis and the direction to `point`.
pub fn off_axis_angle(speaker: &Loudspeaker, point: Vec3) -> Result<f64> {
    let to_point = point - speaker.position;
    if to_point.norm() == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "point coincides with loudspeaker {}",
            speaker.id
        )));
    }
    angle_between(speaker.axis, to_point)
}

/// Angle at the head center between the loudspeaker and the control point.
pub fn incidence_angle(listener: &Listener, speaker: &Loudspeaker, control_point: Vec3) -> Result<f64> {
    angle_between(
        speaker.position - listener.head_center,
        control_point - listener.head_center,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub room: RoomSpec,
    pub speed_of_sound: f64,
    pub sample_rate: f64,
    pub speakers: Vec<Loudspeaker>,
    pub listeners: Vec<Listener>,
}

impl Scene {
    pub fn n_speakers(&self) -> usize {
        self.speakers.len()
    }

    pub fn n_listeners(&self) -> usize {
        self.listeners.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        if self.speakers.is_empty() {
            return Err(Error::InvalidScene("scene has no loudspeakers".into()));
        }
        if self.listeners.is_empty() {
            return Err(Error::InvalidScene("scene has no listeners".into()));
        }
        if !(self.speed_of_sound > 0.0) || !(self.sample_rate > 0.0) {
            return Err(Error::InvalidScene(
                "speed of sound and sample rate must be positive".into(),
            ));
        }
        let mut ids = std::collections::BTreeSet::new();
        for s in &self.speakers {
            s.validate()?;
            if !ids.insert(s.id.as_str()) {
                return Err(Error::InvalidScene(format!("duplicate speaker id {}", s.id)));
            }
            if !self.room.contains(s.position) {
                return Err(Error::InvalidScene(format!(
                    "speaker {} at {:?} is not strictly inside the room",
                    s.id, s.position
                )));
            }
        }
        for (k, l) in self.listeners.iter().enumerate() {
            l.validate().map_err(|e| e.context(format!("listener {}", k + 1)))?;
            for cp in ear_control_points(l) {
                if !self.room.contains(cp.position) {
                    return Err(Error::InvalidScene(format!(
                        "listener {} control point {:?} is not strictly inside the room",
                        k + 1,
                        cp.position
                    )));
                }
            }
            for s in &self.speakers {
                if s.position.distance(l.head_center) <= l.head_radius {
                    return Err(Error::InvalidScene(format!(
                        "speaker {} lies inside listener {}'s head sphere",
                        s.id,
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Same scene with every listener reduced to one point per ear.
    pub fn with_single_ear_points(&self) -> Scene {
        Scene {
            listeners: self.listeners.iter().map(Listener::with_single_point).collect(),
            ..self.clone()
        }
    }

    /// The two-listener, 24-element testbed with default layout.
    pub fn testbed() -> Scene {
        TestbedLayout::default().build()
    }
}

/// Parameters of the default two-row array testbed.
///
/// Loudspeakers sit in the plane `y = array_y`, pointing toward `+y`; the
/// listeners face the array, so their interaural axes run parallel to it.
#[derive(Debug, Clone, PartialEq)]
pub struct TestbedLayout {
    pub room: RoomSpec,
    pub array_y: f64,
    pub height: f64,
    pub array_width: f64,
    pub row_separation: f64,
    pub n_woofers: usize,
    pub n_tweeters: usize,
    pub woofer_radius: f64,
    pub tweeter_radius: f64,
    pub woofer_band: [f64; 2],
    pub tweeter_band: [f64; 2],
    pub listener_distance: f64,
    pub lateral_offset: f64,
    pub head_radius: f64,
    pub control_points_per_ear: usize,
    pub speed_of_sound: f64,
    pub sample_rate: f64,
}

impl Default for TestbedLayout {
    fn default() -> Self {
        TestbedLayout {
            room: RoomSpec::default(),
            array_y: 1.0,
            height: 1.2,
            array_width: 1.2,
            row_separation: 0.1,
            n_woofers: 8,
            n_tweeters: 16,
            woofer_radius: 0.04,
            tweeter_radius: 0.0125,
            woofer_band: [100.0, 2000.0],
            tweeter_band: [2000.0, 20000.0],
            listener_distance: 1.0,
            lateral_offset: 0.5,
            head_radius: DEFAULT_HEAD_RADIUS,
            control_points_per_ear: 1,
            speed_of_sound: 343.0,
            sample_rate: 48000.0,
        }
    }
}

impl TestbedLayout {
    pub fn build(&self) -> Scene {
        let center_x = self.room.dimensions.x / 2.0;
        let axis = Vec3::new(0.0, 1.0, 0.0);
        let row = |count: usize, z: f64, prefix: &str, radius: f64, band: Band, edges: [f64; 2]| {
            (0..count).map(|i| {
                let x = if count == 1 {
                    center_x
                } else {
                    center_x - self.array_width / 2.0
                        + self.array_width * i as f64 / (count - 1) as f64
                };
                Loudspeaker {
                    id: format!("{prefix}{}", i + 1),
                    position: Vec3::new(x, self.array_y, z),
                    axis,
                    piston_radius: radius,
                    band,
                    band_edges: edges,
                    fr_id: None,
                }
            })
            .collect::<Vec<_>>()
        };
        let half = self.row_separation / 2.0;
        let speakers = row(
            self.n_woofers,
            self.height - half,
            "W",
            self.woofer_radius,
            Band::Woofer,
            self.woofer_band,
        )
        .into_iter()
        .chain(row(
            self.n_tweeters,
            self.height + half,
            "T",
            self.tweeter_radius,
            Band::Tweeter,
            self.tweeter_band,
        ))
        .collect();

        let facing_array = -FRAC_PI_2;
        let listeners = [-self.lateral_offset, self.lateral_offset]
            .into_iter()
            .map(|dx| Listener {
                head_center: Vec3::new(
                    center_x + dx,
                    self.array_y + self.listener_distance,
                    self.height,
                ),
                head_radius: self.head_radius,
                yaw: facing_array,
                control_points_per_ear: self.control_points_per_ear,
                control_ring_radius: default_ring_radius(),
            })
            .collect();

        Scene {
            room: self.room.clone(),
            speed_of_sound: self.speed_of_sound,
            sample_rate: self.sample_rate,
            speakers,
            listeners,
        }
    }
}
