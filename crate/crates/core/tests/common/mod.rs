#![allow(dead_code)]

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tripreg::correspondence::{Correspondence, MatchedPoint};
use tripreg::{RigidTransform, RotationVector, Vec3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn point_in_box(rng: &mut ChaCha8Rng, half: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-half..half),
        rng.random_range(-half..half),
        rng.random_range(-half..half),
    )
}

pub fn random_motion(rng: &mut ChaCha8Rng, max_translation: f64) -> RigidTransform {
    let angle = rng.random_range(0.0..std::f64::consts::PI * 0.999);
    let r = RotationVector(unit(rng) * angle);
    RigidTransform::from_rotation_vector(&r, point_in_box(rng, max_translation))
}

pub fn matched(id: usize, position: Vec3, normal: Vec3) -> MatchedPoint {
    MatchedPoint {
        keypoint: id,
        index: id,
        position,
        normal,
        curvature: 0.0,
    }
}

pub fn correspondence(order: usize, src: MatchedPoint, dst: MatchedPoint) -> Correspondence {
    Correspondence {
        src,
        dst,
        descriptor_distance: 0.0,
        order,
        reliability: None,
    }
}

/// Angle in radians between two rotation matrices.
pub fn rotation_gap(a: &RigidTransform, b: &RigidTransform) -> f64 {
    a.rotation_error(b)
}

/// Eigenvalues of a symmetric 3×3 matrix in descending order, from the
/// closed-form roots of its characteristic polynomial.
pub fn symmetric_eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut d = [a[0][0], a[1][1], a[2][2]];
        d.sort_by(|x, y| y.total_cmp(x));
        return d;
    }
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = *a;
    for (i, row) in b.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}
