//! Point pair features.

use crate::error::{Error, Result};
use crate::transform::Vec3;

/// `(F1, F2, F3, F4)`: distance, the angles of each normal against the
/// connecting segment, and the angle between the normals. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpfDescriptor {
    pub distance: f64,
    pub angle_first: f64,
    pub angle_second: f64,
    pub angle_normals: f64,
}

/// Angle between two vectors. The `atan2` form stays accurate near 0 and π,
/// where `acos` of the dot product loses about half the significant digits.
#[inline]
pub(crate) fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

pub fn compute_ppf(p1: &Vec3, n1: &Vec3, p2: &Vec3, n2: &Vec3) -> Result<PpfDescriptor> {
    let d = p2 - p1;
    let distance = d.norm();
    if distance == 0.0 {
        return Err(Error::DegeneratePair);
    }
    Ok(PpfDescriptor {
        distance,
        angle_first: angle_between(n1, &d),
        angle_second: angle_between(n2, &d),
        angle_normals: angle_between(n1, n2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{RigidTransform, RotationVector};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn perpendicular_geometry() {
        let f = compute_ppf(&Vec3::zeros(), &Vec3::z(), &Vec3::x(), &Vec3::z()).unwrap();
        assert_eq!(f.distance, 1.0);
        assert!((f.angle_first - FRAC_PI_2).abs() < 1e-15);
        assert!((f.angle_second - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(f.angle_normals, 0.0);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        assert!(matches!(
            compute_ppf(&Vec3::x(), &Vec3::z(), &Vec3::x(), &Vec3::y()),
            Err(Error::DegeneratePair)
        ));
    }

    #[test]
    fn rigid_motion_leaves_features_unchanged() {
        let (p1, n1) = (Vec3::new(0.3, -1.0, 2.0), Vec3::new(1.0, 2.0, -0.5).normalize());
        let (p2, n2) = (Vec3::new(-0.7, 0.4, 1.1), Vec3::new(-0.2, 0.9, 0.4).normalize());
        let t = RigidTransform::from_rotation_vector(&RotationVector(Vec3::new(0.5, -2.0, 1.0)), Vec3::new(4.0, 5.0, -6.0));
        let a = compute_ppf(&p1, &n1, &p2, &n2).unwrap();
        let b = compute_ppf(
            &t.apply_point(&p1),
            &t.apply_vector(&n1),
            &t.apply_point(&p2),
            &t.apply_vector(&n2),
        )
        .unwrap();
        assert!((a.distance - b.distance).abs() < 1e-9);
        assert!((a.angle_first - b.angle_first).abs() < 1e-9);
        assert!((a.angle_second - b.angle_second).abs() < 1e-9);
        assert!((a.angle_normals - b.angle_normals).abs() < 1e-9);
    }
}
