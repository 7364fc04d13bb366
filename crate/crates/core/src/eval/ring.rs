//! Ring partial views: rotate a model about the global Y axis in fixed steps
//! and keep what a fixed camera can see.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use parry3d_f64::math::Vector3 as HullPoint;
use parry3d_f64::transformation::try_convex_hull;
use rayon::prelude::*;

use crate::cloud::{estimate_normals, PointCloud};
use crate::error::{Error, Result};
use crate::io::{read_ply, read_transform, write_ply, write_transform, TransformRecord};
use crate::transform::{RigidTransform, Vec3};

/// Neighbors used when the model arrives without normals.
const MODEL_NORMAL_K: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct RingConfig {
    pub views: usize,
    pub step_deg: f64,
    /// Fixed camera position. `None` places it on the `+z` side of the model
    /// at ten bounding radii from the centroid.
    pub camera: Option<Vec3>,
    /// Spherical-flip radius as a multiple of the farthest point distance.
    pub hpr_radius_factor: f64,
}

impl Default for RingConfig {
    fn default() -> Self {
        RingConfig {
            views: 18,
            step_deg: 20.0,
            camera: None,
            hpr_radius_factor: 100.0,
        }
    }
}

impl RingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.views < 2 {
            return Err(Error::invalid("a ring needs at least 2 views"));
        }
        if !(self.step_deg > 0.0) {
            return Err(Error::invalid("step must be positive"));
        }
        let total = self.views as f64 * self.step_deg;
        if (total - 360.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "views x step must equal 360 degrees, got {} x {} = {total}",
                self.views, self.step_deg
            )));
        }
        if !(self.hpr_radius_factor > 1.0) {
            return Err(Error::invalid("hidden-point-removal radius factor must exceed 1"));
        }
        Ok(())
    }
}

/// Partial views of one model with their exact model-to-view transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct RingDataset {
    pub model: String,
    pub views: Vec<PointCloud>,
    /// `ground_truth[i]` maps model coordinates into view `i`.
    pub ground_truth: Vec<RigidTransform>,
    /// Model indices kept in each view, in view order. Empty when loaded from disk.
    pub visible: Vec<Vec<usize>>,
}

impl RingDataset {
    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// Adjacent pairs `(i, i+1)` including the wraparound pair.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).map(|i| (i, (i + 1) % n)).collect()
    }

    /// The transform taking view `j` onto view `i`.
    pub fn relative(&self, i: usize, j: usize) -> RigidTransform {
        self.ground_truth[i].compose(&self.ground_truth[j].inverse())
    }

    /// Writes `view_NN.ply` and `view_NN.gt` for every view.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, (view, gt)) in self.views.iter().zip(&self.ground_truth).enumerate() {
            write_ply(view, view_path(dir, i, "ply"))?;
            write_transform(&TransformRecord(*gt), view_path(dir, i, "gt"))?;
        }
        Ok(())
    }

    /// Loads every `view_NN.ply` / `view_NN.gt` pair in `dir`.
    ///
    /// The view count is one past the highest index present; any gap in
    /// `0..count` is reported with the full list of absent files.
    pub fn read(dir: impl AsRef<Path>) -> Result<RingDataset> {
        let dir = dir.as_ref();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut highest = None;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            let Some(stem) = name.strip_prefix("view_") else { continue };
            let Some(num) = stem.strip_suffix(".ply").or_else(|| stem.strip_suffix(".gt")) else {
                continue;
            };
            if let Ok(i) = num.parse::<usize>() {
                highest = Some(highest.map_or(i, |h: usize| h.max(i)));
            }
        }
        let count = highest.map_or(0, |h| h + 1);
        if count < 2 {
            return Err(Error::invalid(format!(
                "{} does not contain a ring dataset (need view_00.ply, view_01.ply, ...)",
                dir.display()
            )));
        }
        let missing: Vec<String> = (0..count)
            .flat_map(|i| [view_path(dir, i, "ply"), view_path(dir, i, "gt")])
            .filter(|p| !p.is_file())
            .map(|p| p.display().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::invalid(format!("missing dataset files: {}", missing.join(", "))));
        }
        let mut views = Vec::with_capacity(count);
        let mut ground_truth = Vec::with_capacity(count);
        for i in 0..count {
            views.push(read_ply(view_path(dir, i, "ply"))?);
            ground_truth.push(read_transform(view_path(dir, i, "gt"))?.0);
        }
        let model = dir
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("dataset")
            .to_string();
        Ok(RingDataset {
            model,
            views,
            ground_truth,
            visible: Vec::new(),
        })
    }
}

pub fn view_path(dir: &Path, i: usize, ext: &str) -> PathBuf {
    dir.join(format!("view_{i:02}.{ext}"))
}

fn bounding_sphere(points: &[Vec3]) -> (Vec3, f64) {
    let c = points.iter().sum::<Vec3>() / points.len() as f64;
    let r = points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    (c, r)
}

/// Gives a normal-less model outward normals: PCA normals flipped away from the centroid.
fn outward_normals(model: &PointCloud) -> Result<PointCloud> {
    let estimated = estimate_normals(model, MODEL_NORMAL_K, None)?;
    let c = model.centroid();
    let normals: Vec<Vec3> = estimated
        .normals()
        .expect("estimate_normals sets normals")
        .iter()
        .zip(model.points())
        .map(|(n, p)| if n.dot(&(p - c)) < 0.0 { -n } else { *n })
        .collect();
    PointCloud::new(model.points().to_vec()).with_normals(normals)
}

/// Spherical-flip hidden point removal.
///
/// Every point is mirrored through a sphere of radius
/// `radius_factor · max‖p − camera‖` centered at the camera; the points whose
/// images are vertices of the convex hull of the images plus the camera are
/// the visible ones. Returns visible indices in ascending order.
pub fn hidden_point_removal(points: &[Vec3], camera: Vec3, radius_factor: f64) -> Result<Vec<usize>> {
    if points.len() < 4 {
        return Ok((0..points.len()).collect());
    }
    let rel: Vec<Vec3> = points.iter().map(|p| p - camera).collect();
    let far = rel.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(far > 0.0) {
        return Err(Error::invalid("all points coincide with the camera"));
    }
    let radius = radius_factor * far;
    let mut flipped: Vec<HullPoint> = Vec::with_capacity(rel.len() + 1);
    for v in &rel {
        let d = v.norm();
        if d == 0.0 {
            return Err(Error::invalid("a point coincides with the camera"));
        }
        let f = v * (2.0 * radius / d - 1.0);
        flipped.push(HullPoint::new(f.x, f.y, f.z));
    }
    flipped.push(HullPoint::new(0.0, 0.0, 0.0));

    let key = |p: &HullPoint| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
    let mut owners: HashMap<[u64; 3], Vec<usize>> = HashMap::with_capacity(rel.len());
    for (i, p) in flipped[..rel.len()].iter().enumerate() {
        owners.entry(key(p)).or_default().push(i);
    }
    let (hull, _) = try_convex_hull(&flipped)
        .map_err(|e| Error::invalid(format!("hidden point removal hull failed: {e:?}")))?;
    let mut visible: Vec<usize> = hull
        .iter()
        .filter_map(|p| owners.get(&key(p)))
        .flatten()
        .copied()
        .collect();
    visible.sort_unstable();
    visible.dedup();
    Ok(visible)
}

/// Renders `cfg.views` partial views of `model`.
///
/// View `i` is the model rotated by `i · step` about the global Y axis,
/// restricted to points whose normal faces the camera and that survive
/// hidden point removal. Each view's viewpoint is the camera.
pub fn generate_ring_views(model: &PointCloud, name: &str, cfg: &RingConfig) -> Result<RingDataset> {
    cfg.validate()?;
    if model.len() < 4 {
        return Err(Error::invalid("ring generation needs at least 4 model points"));
    }
    let model = match model.normals() {
        Some(_) => model.clone(),
        None => outward_normals(model)?,
    };
    let (center, radius) = bounding_sphere(model.points());
    let camera = cfg
        .camera
        .unwrap_or_else(|| center + Vec3::new(0.0, 0.0, 10.0 * radius.max(f64::MIN_POSITIVE)));

    let ground_truth: Vec<RigidTransform> = (0..cfg.views)
        .map(|i| RigidTransform::rotation_y((i as f64 * cfg.step_deg).to_radians()))
        .collect();
    for gt in &ground_truth {
        if (camera - gt.apply_point(&center)).norm() <= radius {
            return Err(Error::invalid(format!(
                "camera ({}, {}, {}) lies inside the model's bounding sphere",
                camera.x, camera.y, camera.z
            )));
        }
    }

    let rendered: Vec<(PointCloud, Vec<usize>)> = ground_truth
        .par_iter()
        .map(|gt| {
            let posed = model.transformed(gt);
            let unoccluded = hidden_point_removal(posed.points(), camera, cfg.hpr_radius_factor)?;
            let normals = posed.normals().expect("model has normals");
            let keep: Vec<usize> = unoccluded
                .into_iter()
                .filter(|&i| normals[i].dot(&(camera - posed.points()[i])) > 0.0)
                .collect();
            let view = PointCloud::new(keep.iter().map(|&i| posed.points()[i]).collect())
                .with_viewpoint(Some(camera));
            Ok((view, keep))
        })
        .collect::<Result<_>>()?;
    let (views, visible) = rendered.into_iter().unzip();
    Ok(RingDataset {
        model: name.to_string(),
        views,
        ground_truth,
        visible,
    })
}
