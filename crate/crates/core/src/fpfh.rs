//! Fast Point Feature Histograms.
//!
//! Each point's simplified histogram (SPFH) bins the Darboux-frame angular
//! features `(α, φ, θ)` of its pairs with every radius neighbor into 11 bins
//! per feature. The FPFH of a keypoint is its own SPFH plus the
//! `1/distance`-weighted SPFHs of its neighbors, each 11-bin block then
//! normalized to sum to 100. SPFHs are only evaluated on the union of the
//! keypoint neighborhoods.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::keypoints::Keypoint;
use crate::kdtree::SpatialIndex;
use crate::transform::Vec3;

pub const BINS_PER_FEATURE: usize = 11;
pub const FPFH_DIM: usize = 3 * BINS_PER_FEATURE;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpfhDescriptor {
    pub bins: [f64; FPFH_DIM],
}

impl Default for FpfhDescriptor {
    fn default() -> Self {
        Self::zero()
    }
}

impl FpfhDescriptor {
    pub fn zero() -> Self {
        FpfhDescriptor {
            bins: [0.0; FPFH_DIM],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bins.iter().all(|&b| b == 0.0)
    }

    pub fn distance(&self, other: &FpfhDescriptor) -> f64 {
        self.bins
            .iter()
            .zip(&other.bins)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.bins.iter().map(|b| b * b).sum::<f64>().sqrt()
    }
}

/// Darboux-frame features of an oriented point pair: `(α, φ, θ)` where `α`
/// and `φ` are cosines in `[-1, 1]` and `θ ∈ [-π, π]`.
///
/// The source of the frame is whichever point's normal is more aligned with
/// the connecting segment. Returns `None` for coincident points or a normal
/// parallel to the segment.
pub fn pair_features(p1: &Vec3, n1: &Vec3, p2: &Vec3, n2: &Vec3) -> Option<[f64; 3]> {
    let mut dp = p2 - p1;
    let dist = dp.norm();
    if dist == 0.0 {
        return None;
    }
    let angle1 = n1.dot(&dp) / dist;
    let angle2 = n2.dot(&dp) / dist;
    let (ns, nt, phi) = if angle1.abs().clamp(0.0, 1.0).acos() > angle2.abs().clamp(0.0, 1.0).acos() {
        dp = -dp;
        (n2, n1, -angle2)
    } else {
        (n1, n2, angle1)
    };
    let v = dp.cross(ns);
    let v_norm = v.norm();
    if v_norm == 0.0 {
        return None;
    }
    let v = v / v_norm;
    let w = ns.cross(&v);
    let alpha = v.dot(nt);
    let theta = w.dot(nt).atan2(ns.dot(nt));
    Some([alpha, phi, theta])
}

fn bin_of(value: f64, lo: f64, hi: f64) -> usize {
    let b = ((value - lo) / (hi - lo) * BINS_PER_FEATURE as f64).floor();
    if b.is_nan() || b < 0.0 {
        0
    } else {
        (b as usize).min(BINS_PER_FEATURE - 1)
    }
}

/// Simplified histogram of point `i` over its radius neighbors, each block summing to 100.
fn spfh(points: &[Vec3], normals: &[Vec3], index: &SpatialIndex, i: usize, radius: f64) -> [f64; FPFH_DIM] {
    let p = points[i];
    let n = normals[i];
    let mut hist = [0.0; FPFH_DIM];
    let mut count = 0usize;
    let mut feats = Vec::new();
    for nb in index.within_radius(&[p.x, p.y, p.z], radius) {
        if nb.index == i {
            continue;
        }
        count += 1;
        if let Some(f) = pair_features(&p, &n, &points[nb.index], &normals[nb.index]) {
            feats.push(f);
        }
    }
    if count == 0 {
        return hist;
    }
    let incr = 100.0 / count as f64;
    for [alpha, phi, theta] in feats {
        hist[bin_of(theta, -PI, PI)] += incr;
        hist[BINS_PER_FEATURE + bin_of(alpha, -1.0, 1.0)] += incr;
        hist[2 * BINS_PER_FEATURE + bin_of(phi, -1.0, 1.0)] += incr;
    }
    hist
}

/// Fills `keypoints[*].descriptor` and returns the positions (in `keypoints`)
/// of keypoints with no neighbor within `radius`; those keep a zero descriptor.
pub fn compute_fpfh(cloud: &PointCloud, keypoints: &mut [Keypoint], radius: f64) -> Result<Vec<usize>> {
    let normals = cloud
        .normals()
        .ok_or_else(|| Error::invalid("FPFH needs normals"))?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("FPFH radius must be positive"));
    }
    if let Some(k) = keypoints.iter().find(|k| k.index >= cloud.len()) {
        return Err(Error::invalid(format!("keypoint index {} out of range", k.index)));
    }
    let points = cloud.points();
    let index = cloud.spatial_index();

    let neighborhoods: Vec<Vec<(usize, f64)>> = keypoints
        .par_iter()
        .map(|k| {
            let p = points[k.index];
            index
                .within_radius(&[p.x, p.y, p.z], radius)
                .into_iter()
                .filter(|n| n.index != k.index)
                .map(|n| (n.index, n.distance()))
                .collect()
        })
        .collect();

    // slot[i] = position of point i's SPFH in `spfhs`
    let mut slot = vec![usize::MAX; cloud.len()];
    let mut needed = Vec::new();
    for (k, nbs) in keypoints.iter().zip(&neighborhoods) {
        for i in std::iter::once(k.index).chain(nbs.iter().map(|&(i, _)| i)) {
            if slot[i] == usize::MAX {
                slot[i] = needed.len();
                needed.push(i);
            }
        }
    }
    let spfhs: Vec<[f64; FPFH_DIM]> = needed
        .par_iter()
        .map(|&i| spfh(points, normals, &index, i, radius))
        .collect();

    let mut isolated = Vec::new();
    for (pos, (k, nbs)) in keypoints.iter_mut().zip(&neighborhoods).enumerate() {
        if nbs.is_empty() {
            k.descriptor = FpfhDescriptor::zero();
            isolated.push(pos);
            continue;
        }
        let mut acc = spfhs[slot[k.index]];
        for &(i, d) in nbs {
            if d == 0.0 {
                continue;
            }
            let w = 1.0 / d;
            for (a, s) in acc.iter_mut().zip(&spfhs[slot[i]]) {
                *a += w * s;
            }
        }
        for block in acc.chunks_mut(BINS_PER_FEATURE) {
            let sum: f64 = block.iter().sum();
            if sum > 0.0 {
                block.iter_mut().for_each(|b| *b *= 100.0 / sum);
            }
        }
        k.descriptor = FpfhDescriptor { bins: acc };
    }
    Ok(isolated)
}
