use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Vector;

use super::HoughPlane;

/// A rigid rotation about an axis line.
///
/// In 2D the axis is `±z` and `center` is the fixed point in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub center: Vector,
    pub axis: Vector,
    pub angle: f64,
}

impl Rotation {
    pub fn apply(&self, p: &Vector) -> Vector {
        let v = p - self.center;
        let (s, c) = self.angle.sin_cos();
        let u = &self.axis;
        let rotated = v * c + u.cross(&v) * s + u * (u.dot(&v) * (1.0 - c));
        self.center + rotated
    }

    /// Counter-clockwise angle about `+z`, in `[0, 2π)`.
    pub fn planar_angle(&self) -> f64 {
        let a = if self.axis.z < 0.0 {
            2.0 * PI - self.angle
        } else {
            self.angle
        };
        a.rem_euclid(2.0 * PI)
    }
}

/// The rotation equal to reflecting across `first` and then across `second`.
///
/// The axis is the planes' intersection and the angle is twice the dihedral
/// angle between them.
pub fn compose_rotation(first: &HoughPlane, second: &HoughPlane) -> Result<Rotation> {
    let (n1, n2) = (first.normal(), second.normal());
    let c = n1.dot(n2).clamp(-1.0, 1.0);
    if c.abs() >= 1.0 - 1e-9 {
        return Err(Error::ParallelPlanes);
    }
    let axis = n1.cross(n2).normalize();
    let (l1, l2) = (first.offset(), second.offset());
    let det = 1.0 - c * c;
    let a = (l1 - c * l2) / det;
    let b = (l2 - c * l1) / det;
    Ok(Rotation {
        center: n1 * a + n2 * b,
        axis,
        angle: 2.0 * c.acos(),
    })
}
