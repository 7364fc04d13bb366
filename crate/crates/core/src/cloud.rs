//! Point cloud container, PCA normals and the median nearest-neighbor scale.

use nalgebra::SymmetricEigen;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kdtree::SpatialIndex;
use crate::transform::{Mat3, RigidTransform, Vec3};

const UNIT_TOLERANCE: f64 = 1e-6;
pub(crate) const MAX_CURVATURE: f64 = 1.0 / 3.0;

/// Points with optional per-point normals, curvatures and covariance eigenvalues.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
    curvatures: Option<Vec<f64>>,
    eigenvalues: Option<Vec<[f64; 3]>>,
    viewpoint: Option<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud {
            points,
            ..Default::default()
        }
    }

    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "{} normals for {} points",
                normals.len(),
                self.points.len()
            )));
        }
        if let Some(i) = normals
            .iter()
            .position(|n| (n.norm() - 1.0).abs() > UNIT_TOLERANCE)
        {
            return Err(Error::invalid(format!("normal {i} is not unit length")));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_curvatures(mut self, curvatures: Vec<f64>) -> Result<Self> {
        if curvatures.len() != self.points.len() {
            return Err(Error::invalid("curvature count does not match point count"));
        }
        if let Some(i) = curvatures
            .iter()
            .position(|c| !(0.0..=MAX_CURVATURE).contains(c))
        {
            return Err(Error::invalid(format!("curvature {i} outside [0, 1/3]")));
        }
        self.curvatures = Some(curvatures);
        Ok(self)
    }

    /// Covariance eigenvalues `λ1 ≥ λ2 ≥ λ3 ≥ 0` per point.
    pub fn with_eigenvalues(mut self, eigenvalues: Vec<[f64; 3]>) -> Result<Self> {
        if eigenvalues.len() != self.points.len() {
            return Err(Error::invalid("eigenvalue count does not match point count"));
        }
        if eigenvalues
            .iter()
            .any(|e| !(e[0] >= e[1] && e[1] >= e[2] && e[2] >= 0.0 && e[0].is_finite()))
        {
            return Err(Error::invalid("eigenvalues must be finite, non-negative and descending"));
        }
        self.eigenvalues = Some(eigenvalues);
        Ok(self)
    }

    pub fn with_viewpoint(mut self, viewpoint: Option<Vec3>) -> Self {
        self.viewpoint = viewpoint;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn curvatures(&self) -> Option<&[f64]> {
        self.curvatures.as_deref()
    }

    pub fn eigenvalues(&self) -> Option<&[[f64; 3]]> {
        self.eigenvalues.as_deref()
    }

    pub fn viewpoint(&self) -> Option<Vec3> {
        self.viewpoint
    }

    pub fn spatial_index(&self) -> SpatialIndex {
        SpatialIndex::new(self.points.iter().map(|p| [p.x, p.y, p.z]).collect())
    }

    /// Keeps the entries at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let pick = |v: &Vec<Vec3>| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        PointCloud {
            points: pick(&self.points),
            normals: self.normals.as_ref().map(pick),
            curvatures: self
                .curvatures
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
            eigenvalues: self
                .eigenvalues
                .as_ref()
                .map(|e| indices.iter().map(|&i| e[i]).collect()),
            viewpoint: self.viewpoint,
        }
    }

    /// Applies `x ↦ R·x + t` to points and the viewpoint; normals are only rotated.
    pub fn transformed(&self, transform: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| transform.apply_point(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| transform.apply_vector(n)).collect()),
            curvatures: self.curvatures.clone(),
            eigenvalues: self.eigenvalues.clone(),
            viewpoint: self.viewpoint.map(|v| transform.apply_point(&v)),
        }
    }

    pub fn centroid(&self) -> Vec3 {
        if self.points.is_empty() {
            return Vec3::zeros();
        }
        self.points.iter().sum::<Vec3>() / self.points.len() as f64
    }
}

/// Free-function form of [`PointCloud::transformed`].
pub fn apply_transform(transform: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    cloud.transformed(transform)
}

/// PCA normals over each point's `neighbor_count` nearest neighbors (the point itself included).
///
/// The covariance is taken about the query point rather than the neighborhood
/// mean. Normals are flipped to face `viewpoint`, falling back to the cloud's own
/// viewpoint and then to `+z`. Eigenvalues are cached for curvature.
pub fn estimate_normals(
    cloud: &PointCloud,
    neighbor_count: usize,
    viewpoint: Option<Vec3>,
) -> Result<PointCloud> {
    if cloud.len() < 3 {
        return Err(Error::invalid(format!(
            "normal estimation needs at least 3 points, got {}",
            cloud.len()
        )));
    }
    if neighbor_count < 3 {
        return Err(Error::invalid("neighbor_count must be at least 3"));
    }
    if cloud.len() < neighbor_count {
        return Err(Error::invalid(format!(
            "cloud has {} points, fewer than neighbor_count {}",
            cloud.len(),
            neighbor_count
        )));
    }
    let viewpoint = viewpoint.or(cloud.viewpoint);
    let index = cloud.spatial_index();
    let points = &cloud.points;

    let per_point: Vec<(Vec3, [f64; 3])> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let x = points[i];
            let neighbors = index.knn(&[x.x, x.y, x.z], neighbor_count);
            let mut cov = Mat3::zeros();
            for n in &neighbors {
                let d = points[n.index] - x;
                cov += d * d.transpose();
            }
            cov /= neighbors.len() as f64;
            if cov.trace() <= 0.0 {
                return Err(Error::DegenerateNeighborhood { index: i });
            }
            let (normal, eig) = smallest_eigenvector(cov);
            let facing = match viewpoint {
                Some(v) => normal.dot(&(v - x)),
                None => normal.z,
            };
            let normal = if facing < 0.0 { -normal } else { normal };
            Ok((normal, eig))
        })
        .collect::<Result<_>>()?;

    let (normals, eigenvalues): (Vec<_>, Vec<_>) = per_point.into_iter().unzip();
    let mut out = cloud.clone();
    out.normals = Some(normals);
    out.eigenvalues = Some(eigenvalues);
    out.viewpoint = viewpoint;
    Ok(out)
}

/// Unit eigenvector of the smallest eigenvalue, and eigenvalues sorted descending (clamped at 0).
pub(crate) fn smallest_eigenvector(cov: Mat3) -> (Vec3, [f64; 3]) {
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.map(|i| eig.eigenvalues[i].max(0.0));
    let normal = eig.eigenvectors.column(order[2]).normalize();
    (normal, values)
}

/// Median distance from each point to its nearest other point.
pub fn median_nn_distance(cloud: &PointCloud) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::invalid("medD needs at least 2 points per cloud"));
    }
    let index = cloud.spatial_index();
    let mut dists: Vec<f64> = cloud
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            index
                .knn(&[p.x, p.y, p.z], 2)
                .into_iter()
                .find(|n| n.index != i)
                .map(|n| n.distance())
                .unwrap_or(0.0)
        })
        .collect();
    Ok(median(&mut dists))
}

/// Mean of the two clouds' median nearest-neighbor distances.
pub fn compute_medd(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    Ok(0.5 * (median_nn_distance(x)? + median_nn_distance(y)?))
}

/// Median with the two middle values averaged for even lengths. Sorts in place.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, spacing: f64) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
            }
        }
        PointCloud::new(pts)
    }

    #[test]
    fn plane_normals_face_viewpoint() {
        let cloud = estimate_normals(&grid(10, 1.0), 20, Some(Vec3::new(0.0, 0.0, 1.0))).unwrap();
        for n in cloud.normals().unwrap() {
            assert!((n - Vec3::z()).norm() < 1e-6);
        }
        let below = estimate_normals(&grid(10, 1.0), 20, Some(Vec3::new(0.0, 0.0, -5.0))).unwrap();
        assert!(below.normals().unwrap().iter().all(|n| (n + Vec3::z()).norm() < 1e-6));
    }

    #[test]
    fn too_few_points_rejected() {
        let cloud = PointCloud::new(vec![Vec3::zeros(), Vec3::x()]);
        assert!(matches!(estimate_normals(&cloud, 3, None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn coincident_neighborhood_is_degenerate() {
        let cloud = PointCloud::new(vec![Vec3::new(1.0, 1.0, 1.0); 5]);
        assert!(matches!(
            estimate_normals(&cloud, 3, None),
            Err(Error::DegenerateNeighborhood { .. })
        ));
    }

    #[test]
    fn medd_on_grids() {
        let a = grid(8, 1.0);
        let b = grid(8, 3.0);
        assert_eq!(compute_medd(&a, &a).unwrap(), 1.0);
        assert_eq!(compute_medd(&a, &b).unwrap(), 2.0);
        assert!(compute_medd(&a, &PointCloud::new(vec![Vec3::zeros()])).is_err());
    }

    #[test]
    fn medd_matches_all_pairs_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut cloud = || {
            PointCloud::new(
                (0..1000)
                    .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
                    .collect(),
            )
        };
        let (x, y) = (cloud(), cloud());
        let brute = |c: &PointCloud| {
            let mut d: Vec<f64> = (0..c.len())
                .map(|i| {
                    (0..c.len())
                        .filter(|&j| j != i)
                        .map(|j| (c.points()[i] - c.points()[j]).norm())
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            d.sort_by(f64::total_cmp);
            0.5 * (d[499] + d[500])
        };
        let want = 0.5 * (brute(&x) + brute(&y));
        assert!((compute_medd(&x, &y).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn transform_round_trip() {
        let cloud = estimate_normals(&grid(5, 0.5), 6, None).unwrap();
        let t = RigidTransform::rotation_y(0.7).compose(&RigidTransform::translation(Vec3::new(1.0, 2.0, 3.0)));
        let back = apply_transform(&t.inverse(), &apply_transform(&t, &cloud));
        for (a, b) in back.points().iter().zip(cloud.points()) {
            assert!((a - b).norm() < 1e-9);
        }
        let moved = apply_transform(&RigidTransform::translation(Vec3::new(1.0, 2.0, 3.0)), &PointCloud::new(vec![Vec3::zeros()]));
        assert_eq!(moved.points()[0], Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(apply_transform(&RigidTransform::identity(), &cloud), cloud);
    }

    #[test]
    fn invariants_enforced_on_construction() {
        let c = PointCloud::new(vec![Vec3::zeros(); 2]);
        assert!(c.clone().with_normals(vec![Vec3::new(0.0, 0.0, 2.0); 2]).is_err());
        assert!(c.clone().with_normals(vec![Vec3::z()]).is_err());
        assert!(c.clone().with_curvatures(vec![0.0, 0.4]).is_err());
        assert!(c.with_curvatures(vec![0.0, 1.0 / 3.0]).is_ok());
    }
}
