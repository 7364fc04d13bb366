//! Approximate-curvature keypoints.

use crate::cloud::{PointCloud, MAX_CURVATURE};
use crate::error::{Error, Result};
use crate::fpfh::FpfhDescriptor;
use crate::transform::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    /// Index into the source cloud.
    pub index: usize,
    pub position: Vec3,
    pub normal: Vec3,
    pub curvature: f64,
    pub descriptor: FpfhDescriptor,
}

/// Curvatures computed by [`compute_curvatures`], with the points whose
/// eigenvalues summed to zero.
#[derive(Debug, Clone)]
pub struct CurvatureOutput {
    pub cloud: PointCloud,
    pub degenerate: Vec<usize>,
}

/// `σ̃ = λ3 / (λ1 + λ2 + λ3)` from the cached covariance eigenvalues.
///
/// A zero eigenvalue sum yields `σ̃ = 0` and lists the point in `degenerate`.
pub fn compute_curvatures(cloud: &PointCloud) -> Result<CurvatureOutput> {
    let eig = cloud
        .eigenvalues()
        .ok_or_else(|| Error::invalid("curvature needs cached eigenvalues (run estimate_normals)"))?;
    let mut degenerate = Vec::new();
    let curvatures = eig
        .iter()
        .enumerate()
        .map(|(i, [l1, l2, l3])| {
            let sum = l1 + l2 + l3;
            if sum > 0.0 {
                (l3 / sum).clamp(0.0, MAX_CURVATURE)
            } else {
                degenerate.push(i);
                0.0
            }
        })
        .collect();
    Ok(CurvatureOutput {
        cloud: cloud.clone().with_curvatures(curvatures)?,
        degenerate,
    })
}

/// The `count` points of largest curvature, descending, ties by ascending index.
pub fn detect_keypoints(cloud: &PointCloud, count: usize) -> Result<Vec<Keypoint>> {
    let curv = cloud
        .curvatures()
        .ok_or_else(|| Error::invalid("keypoint detection needs curvatures"))?;
    let normals = cloud
        .normals()
        .ok_or_else(|| Error::invalid("keypoint detection needs normals"))?;
    if count == 0 {
        return Err(Error::invalid("keypoint count must be positive"));
    }
    if count > cloud.len() {
        return Err(Error::invalid(format!(
            "requested {count} keypoints from a cloud of {} points",
            cloud.len()
        )));
    }
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&a, &b| curv[b].total_cmp(&curv[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(count)
        .map(|i| Keypoint {
            index: i,
            position: cloud.points()[i],
            normal: normals[i],
            curvature: curv[i],
            descriptor: FpfhDescriptor::zero(),
        })
        .collect())
}
