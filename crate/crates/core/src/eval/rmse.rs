//! Root-mean-square displacement induced by the error transform `T̃ = T_gt⁻¹·T`.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::io::TransformRecord;

const PROPER_TOLERANCE: f64 = 1e-6;

/// `sqrt((Σ_x ‖T̃⁻¹x − x‖² + Σ_y ‖T̃y − y‖²) / (|X| + |Y|))`.
///
/// Both transforms are isometries, so `‖T̃y − y‖ = ‖T·y − T_gt·y‖` and
/// `‖T̃⁻¹x − x‖ = ‖T_gt·x − T·x‖`. Evaluating it that way avoids forming
/// `T_gt⁻¹·T`, whose rounding would leave a nonzero result for `T = T_gt`.
pub fn rmse(x: &PointCloud, y: &PointCloud, estimated: &TransformRecord, ground_truth: &TransformRecord) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("RMSE needs non-empty clouds"));
    }
    for (name, t) in [("estimated", estimated), ("ground-truth", ground_truth)] {
        if !t.0.is_proper(PROPER_TOLERANCE) {
            return Err(Error::invalid(format!("{name} transform is not a proper rigid motion")));
        }
    }
    let (est, gt) = (&estimated.0, &ground_truth.0);
    let gap = |p: &crate::transform::Vec3| (est.apply_point(p) - gt.apply_point(p)).norm_squared();
    let ex: f64 = x.points().iter().map(gap).sum();
    let ey: f64 = y.points().iter().map(gap).sum();
    Ok(((ex + ey) / (x.len() + y.len()) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{RigidTransform, Vec3};
    use nalgebra::Matrix4;

    fn cloud() -> PointCloud {
        PointCloud::new((0..10).map(|i| Vec3::new(i as f64, (i * i) as f64 * 0.1, -1.0)).collect())
    }

    #[test]
    fn equal_transforms_give_zero() {
        let t = TransformRecord(RigidTransform::rotation_y(0.3).compose(&RigidTransform::translation(Vec3::new(1.0, 2.0, 3.0))));
        assert_eq!(rmse(&cloud(), &cloud(), &t, &t).unwrap(), 0.0);
    }

    #[test]
    fn equal_arbitrary_transforms_give_exact_zero() {
        let t = TransformRecord(RigidTransform::from_rotation_vector(
            &crate::transform::RotationVector(Vec3::new(0.3, -1.1, 0.7)),
            Vec3::new(-4.0, 0.5, 9.0),
        ));
        assert_eq!(rmse(&cloud(), &cloud(), &t, &t).unwrap(), 0.0);
    }

    #[test]
    fn singular_input_rejected() {
        let mut m = Matrix4::identity();
        m[(0, 0)] = 0.0;
        let bad = TransformRecord(RigidTransform {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            translation: Vec3::zeros(),
        });
        let id = TransformRecord(RigidTransform::identity());
        assert!(rmse(&cloud(), &cloud(), &bad, &id).is_err());
        assert!(rmse(&PointCloud::default(), &cloud(), &id, &id).is_err());
    }
}
