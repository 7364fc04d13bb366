//! Triplet search over the reliability-ordered correspondence graph.
//!
//! Node `i` (a correspondence, in descending reliability) gets an edge to
//! every earlier node `j` whose point pair has similar PPF descriptors in
//! both clouds. Each two-hop path `i → j → k` that also closes with an edge
//! `i → k`, and whose two triangles are not too thin, is a triplet. The
//! search stops after the node at which enough triplets exist or the scan
//! fraction of the list is reached.

use rayon::prelude::*;

use crate::correspondence::{Correspondence, CorrespondenceSet};
use crate::error::{Error, Result};
use crate::ppf::{compute_ppf, PpfDescriptor};
use crate::transform::Vec3;

/// `(ϑ1, ϑ2, ϑ3)`: distance ratio bound, segment-angle and normal-angle tolerances in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpfThresholds {
    pub ratio: f64,
    pub angle_deg: f64,
    pub normal_angle_deg: f64,
}

impl Default for PpfThresholds {
    fn default() -> Self {
        PpfThresholds {
            ratio: 0.95,
            angle_deg: 3.0,
            normal_angle_deg: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletSearchConfig {
    pub ppf: PpfThresholds,
    /// Minimum triangle angle `ϑ△`, degrees. Zero disables the test.
    pub triangle_threshold_deg: f64,
    pub min_triplets: usize,
    pub scan_fraction: f64,
}

impl Default for TripletSearchConfig {
    fn default() -> Self {
        TripletSearchConfig {
            ppf: PpfThresholds::default(),
            triangle_threshold_deg: 20.0,
            min_triplets: 150_000,
            scan_fraction: 0.6,
        }
    }
}

impl TripletSearchConfig {
    /// Accepts the closed ends (`ϑ1 = 0`, `ϑ2 = ϑ3 = 180°`, `ϑ△ = 0`) so gates can be opened fully.
    pub fn validate(&self) -> Result<()> {
        let p = &self.ppf;
        if !(0.0..1.0).contains(&p.ratio) {
            return Err(Error::invalid("PPF ratio threshold must lie in [0, 1)"));
        }
        if !(p.angle_deg > 0.0 && p.angle_deg <= 180.0) || !(p.normal_angle_deg > 0.0 && p.normal_angle_deg <= 180.0) {
            return Err(Error::invalid("PPF angle thresholds must lie in (0, 180] degrees"));
        }
        if !(0.0..180.0).contains(&self.triangle_threshold_deg) {
            return Err(Error::invalid("triangle threshold must lie in [0, 180) degrees"));
        }
        if self.min_triplets == 0 {
            return Err(Error::invalid("min_triplets must be at least 1"));
        }
        if !(self.scan_fraction > 0.0 && self.scan_fraction <= 1.0) {
            return Err(Error::invalid("scan_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// PPF similarity: ratio test on distances, absolute differences on angles.
pub fn ppf_similar(f: &PpfDescriptor, g: &PpfDescriptor, t: &PpfThresholds) -> Result<bool> {
    if g.distance == 0.0 {
        return Err(Error::DegeneratePair);
    }
    let ratio = f.distance / g.distance;
    let angle = t.angle_deg.to_radians();
    Ok(t.ratio < ratio
        && ratio * t.ratio < 1.0
        && (f.angle_first - g.angle_first).abs() < angle
        && (f.angle_second - g.angle_second).abs() < angle
        && (f.angle_normals - g.angle_normals).abs() < t.normal_angle_deg.to_radians())
}

/// Minimum-angle test: with `a` the shortest edge, passes iff
/// `b² + c² − a² < 2·√(b²c²)·cos ϑ△`, i.e. the smallest angle exceeds `ϑ△`.
pub fn triangle_ok(pa: &Vec3, pb: &Vec3, pc: &Vec3, threshold_rad: f64) -> bool {
    let mut e = [
        (pb - pc).norm_squared(),
        (pa - pc).norm_squared(),
        (pa - pb).norm_squared(),
    ];
    e.sort_by(f64::total_cmp);
    let [a2, b2, c2] = e;
    if a2 == 0.0 {
        return false;
    }
    b2 + c2 - a2 < 2.0 * (b2 * c2).sqrt() * threshold_rad.cos()
}

/// Edge test between two correspondences: distinct keypoints on each side and
/// similar PPF of the `X` pair and the `Y` pair.
pub fn correspondences_compatible(a: &Correspondence, b: &Correspondence, t: &PpfThresholds) -> bool {
    if a.src.keypoint == b.src.keypoint || a.dst.keypoint == b.dst.keypoint {
        return false;
    }
    let f = compute_ppf(&a.src.position, &a.src.normal, &b.src.position, &b.src.normal);
    let g = compute_ppf(&a.dst.position, &a.dst.normal, &b.dst.position, &b.dst.normal);
    match (f, g) {
        (Ok(f), Ok(g)) => ppf_similar(&f, &g, t).unwrap_or(false),
        _ => false,
    }
}

/// Three correspondences by position `i > j > k` in the sorted set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub indices: [usize; 3],
    /// `X`-side keypoint positions.
    pub src: [Vec3; 3],
    /// `Y`-side keypoint positions.
    pub dst: [Vec3; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `|C1| < 3`: nothing was searched.
    TooFewCorrespondences,
    MinTriplets,
    ScanFraction,
}

#[derive(Debug, Clone)]
pub struct TripletSearch {
    pub triplets: Vec<Triplet>,
    pub nodes_scanned: usize,
    pub edges: usize,
    pub termination: Termination,
}

/// Runs the incremental graph search. Triplets come out `i` ascending, then
/// `j` and `k` descending.
pub fn generate_triplets(set: &CorrespondenceSet, cfg: &TripletSearchConfig) -> Result<TripletSearch> {
    cfg.validate()?;
    let items = &set.items;
    let n = items.len();
    if items
        .windows(2)
        .any(|w| matches!((w[0].reliability, w[1].reliability), (Some(a), Some(b)) if a < b))
    {
        return Err(Error::invalid("correspondences must be sorted by descending reliability"));
    }
    if n < 3 {
        return Ok(TripletSearch {
            triplets: Vec::new(),
            nodes_scanned: 0,
            edges: 0,
            termination: Termination::TooFewCorrespondences,
        });
    }
    let triangle = cfg.triangle_threshold_deg.to_radians();
    let scan_limit = cfg.scan_fraction * n as f64;

    let mut edges: Vec<Vec<u32>> = Vec::with_capacity(n);
    let mut stamp = vec![u32::MAX; n];
    let mut triplets = Vec::new();
    let mut edge_count = 0usize;
    let mut termination = Termination::ScanFraction;
    let mut scanned = 0;

    for i in 0..n {
        let ci = &items[i];
        let mut out: Vec<u32> = (0..i as u32)
            .into_par_iter()
            .with_min_len(512)
            .filter(|&j| correspondences_compatible(ci, &items[j as usize], &cfg.ppf))
            .collect();
        out.reverse();
        edge_count += out.len();
        for &j in &out {
            stamp[j as usize] = i as u32;
        }
        for &j in &out {
            let cj = &items[j as usize];
            for &k in &edges[j as usize] {
                if stamp[k as usize] != i as u32 {
                    continue;
                }
                let ck = &items[k as usize];
                let src = [ci.src.position, cj.src.position, ck.src.position];
                let dst = [ci.dst.position, cj.dst.position, ck.dst.position];
                if triangle_ok(&src[0], &src[1], &src[2], triangle)
                    && triangle_ok(&dst[0], &dst[1], &dst[2], triangle)
                {
                    triplets.push(Triplet {
                        indices: [i, j as usize, k as usize],
                        src,
                        dst,
                    });
                }
            }
        }
        edges.push(out);
        scanned = i + 1;
        if triplets.len() >= cfg.min_triplets {
            termination = Termination::MinTriplets;
            break;
        }
        if scanned as f64 >= scan_limit {
            termination = Termination::ScanFraction;
            break;
        }
    }
    if triplets.is_empty() {
        return Err(Error::Empty("triplet set"));
    }
    Ok(TripletSearch {
        triplets,
        nodes_scanned: scanned,
        edges: edge_count,
        termination,
    })
}
