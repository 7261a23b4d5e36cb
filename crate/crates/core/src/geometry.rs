//! Boxes, vectors and yaw handling.
//!
//! Every compiled object is an [`OrientedBox`]: a center, full extents
//! `(L, W, H)` and a rotation about the vertical axis only. `L` is the
//! extent along the object's local x axis at yaw 0, which is also the
//! direction the object faces.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn is_positive(&self) -> bool {
        self.x > 0.0 && self.y > 0.0 && self.z > 0.0
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Rotation about +z by `yaw` radians.
    pub fn rotate_z(self, yaw: f64) -> Vec3 {
        let (s, c) = yaw.sin_cos();
        Vec3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
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

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Converts an integer yaw in degrees to radians in `[0, 2π)`.
///
/// The reduction happens on the integer first, so `d` and `d + 360k`
/// map to bit-identical results.
pub fn normalize_yaw(deg: i64) -> f64 {
    let reduced = deg.rem_euclid(360);
    reduced as f64 * PI / 180.0
}

/// Reduces an arbitrary angle in radians into `[0, 2π)`.
pub fn normalize_angle(rad: f64) -> f64 {
    let r = rad.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Smallest absolute difference between two angles, in `[0, π]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    let d = normalize_angle(a - b);
    if d > PI {
        TAU - d
    } else {
        d
    }
}

/// Yaw-only oriented box. `size` holds full extents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    center: Vec3,
    size: Vec3,
    yaw: f64,
}

impl OrientedBox {
    pub fn new(center: Vec3, size: Vec3, yaw: f64) -> Result<Self, GeometryError> {
        if !center.is_finite() {
            return Err(GeometryError::NonFinite("center"));
        }
        if !size.is_finite() || !size.is_positive() {
            return Err(GeometryError::NonPositiveSize(size.to_array()));
        }
        if !yaw.is_finite() {
            return Err(GeometryError::NonFinite("yaw"));
        }
        Ok(OrientedBox {
            center,
            size,
            yaw: normalize_angle(yaw),
        })
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn size(&self) -> Vec3 {
        self.size
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn half_extents(&self) -> Vec3 {
        self.size * 0.5
    }

    pub fn bottom(&self) -> f64 {
        self.center.z - self.size.z / 2.0
    }

    pub fn top(&self) -> f64 {
        self.center.z + self.size.z / 2.0
    }

    /// World-space unit vector of the local x axis (the facing direction).
    pub fn axis_x(&self) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c, s, 0.0)
    }

    pub fn axis_y(&self) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(-s, c, 0.0)
    }

    /// Half-length of the box projected onto a horizontal unit axis.
    pub fn projected_radius_xy(&self, axis: Vec3) -> f64 {
        let h = self.half_extents();
        h.x * self.axis_x().dot(axis).abs() + h.y * self.axis_y().dot(axis).abs()
    }

    /// Footprint corners in the xy plane, counter-clockwise seen from above:
    /// local (-,-), (+,-), (+,+), (-,+).
    pub fn footprint(&self) -> [(f64, f64); 4] {
        let h = self.half_extents();
        let local = [(-h.x, -h.y), (h.x, -h.y), (h.x, h.y), (-h.x, h.y)];
        let (s, c) = self.yaw.sin_cos();
        local.map(|(lx, ly)| (self.center.x + c * lx - s * ly, self.center.y + s * lx + c * ly))
    }

    /// The eight corners: bottom face counter-clockwise, then top face in the
    /// same order.
    pub fn corners(&self) -> [Vec3; 8] {
        let fp = self.footprint();
        let (b, t) = (self.bottom(), self.top());
        [
            Vec3::new(fp[0].0, fp[0].1, b),
            Vec3::new(fp[1].0, fp[1].1, b),
            Vec3::new(fp[2].0, fp[2].1, b),
            Vec3::new(fp[3].0, fp[3].1, b),
            Vec3::new(fp[0].0, fp[0].1, t),
            Vec3::new(fp[1].0, fp[1].1, t),
            Vec3::new(fp[2].0, fp[2].1, t),
            Vec3::new(fp[3].0, fp[3].1, t),
        ]
    }

    /// Point containment with tolerance `tol` (positive grows the box).
    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        let d = p - self.center;
        let h = self.half_extents();
        d.dot(self.axis_x()).abs() <= h.x + tol
            && d.dot(self.axis_y()).abs() <= h.y + tol
            && d.z.abs() <= h.z + tol
    }

    pub fn with_center(&self, center: Vec3) -> OrientedBox {
        OrientedBox { center, ..*self }
    }
}

/// Same as [`OrientedBox::corners`]; kept as a free function for callers that
/// only hold a reference.
pub fn box_corners(b: &OrientedBox) -> [Vec3; 8] {
    b.corners()
}
