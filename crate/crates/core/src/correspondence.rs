//! FPFH-space correspondences and their length-consistency reliability.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fpfh::FPFH_DIM;
use crate::kdtree::KdTree;
use crate::keypoints::Keypoint;
use crate::transform::Vec3;

/// One side of a correspondence: a keypoint without its descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPoint {
    /// Position in the keypoint list.
    pub keypoint: usize,
    /// Index into the source cloud.
    pub index: usize,
    pub position: Vec3,
    pub normal: Vec3,
    pub curvature: f64,
}

impl MatchedPoint {
    fn of(position_in_list: usize, k: &Keypoint) -> Self {
        MatchedPoint {
            keypoint: position_in_list,
            index: k.index,
            position: k.position,
            normal: k.normal,
            curvature: k.curvature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    /// Keypoint of `X`.
    pub src: MatchedPoint,
    /// Keypoint of `Y`.
    pub dst: MatchedPoint,
    pub descriptor_distance: f64,
    /// Position in the list before scoring (keypoint-major, neighbor-minor).
    pub order: usize,
    pub reliability: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct CorrespondenceSet {
    pub items: Vec<Correspondence>,
    pub medd: f64,
}

impl CorrespondenceSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_scored(&self) -> bool {
        !self.items.is_empty() && self.items.iter().all(|c| c.reliability.is_some())
    }
}

/// `C1`: for each `X` keypoint, its `k` nearest `Y` keypoints in descriptor
/// space whose curvature differs by less than `curvature_threshold`.
pub fn build_correspondences(
    px: &[Keypoint],
    py: &[Keypoint],
    k: usize,
    curvature_threshold: f64,
    medd: f64,
) -> Result<CorrespondenceSet> {
    build_correspondences_with(px, py, k, curvature_threshold, medd, |_, _| true)
}

/// [`build_correspondences`] with an extra admission predicate over `(p_x, p_y)`.
pub fn build_correspondences_with<F>(
    px: &[Keypoint],
    py: &[Keypoint],
    k: usize,
    curvature_threshold: f64,
    medd: f64,
    admit: F,
) -> Result<CorrespondenceSet>
where
    F: Fn(&Keypoint, &Keypoint) -> bool + Sync,
{
    if px.is_empty() || py.is_empty() {
        return Err(Error::invalid("correspondence search needs keypoints on both sides"));
    }
    if k == 0 {
        return Err(Error::invalid("knn_k must be at least 1"));
    }
    let tree: KdTree<FPFH_DIM> = KdTree::new(py.iter().map(|p| p.descriptor.bins).collect());
    let per_src: Vec<Vec<(usize, f64)>> = px
        .par_iter()
        .map(|p| {
            tree.knn(&p.descriptor.bins, k)
                .into_iter()
                .filter(|n| {
                    let q = &py[n.index];
                    (p.curvature - q.curvature).abs() < curvature_threshold && admit(p, q)
                })
                .map(|n| (n.index, n.distance()))
                .collect()
        })
        .collect();

    let mut items = Vec::new();
    for (si, matches) in per_src.into_iter().enumerate() {
        for (di, distance) in matches {
            items.push(Correspondence {
                src: MatchedPoint::of(si, &px[si]),
                dst: MatchedPoint::of(di, &py[di]),
                descriptor_distance: distance,
                order: items.len(),
                reliability: None,
            });
        }
    }
    if items.is_empty() {
        return Err(Error::Empty("correspondence set"));
    }
    Ok(CorrespondenceSet { items, medd })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReliabilityReport {
    pub divisions_used: usize,
    /// True when the requested divisions exceeded `|C1|`.
    pub clamped: bool,
}

/// Length-consistency kernel `1 / (1 + h⁻²(d_x² − d_y²)²)`.
#[inline]
pub fn consistency(a: &Correspondence, b: &Correspondence, inv_h_sq: f64) -> f64 {
    let dx_sq = (a.src.position - b.src.position).norm_squared();
    let dy_sq = (a.dst.position - b.dst.position).norm_squared();
    let diff = dx_sq - dy_sq;
    1.0 / (1.0 + inv_h_sq * diff * diff)
}

/// Scores every correspondence and sorts the set by descending reliability.
///
/// The set is split round-robin (by current position) into `divisions`
/// subsets; each score sums the kernel over its own subset, self-term
/// included, scaled by `|C1| / |C1^k|`. Ties keep the pre-score order.
pub fn score_reliability(
    set: &mut CorrespondenceSet,
    h_r: f64,
    divisions: usize,
) -> Result<ReliabilityReport> {
    let n = set.items.len();
    if n == 0 {
        return Err(Error::Empty("correspondence set"));
    }
    let h = h_r * set.medd;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("reliability range h = h_r * medD = {h} must be positive")));
    }
    if divisions == 0 {
        return Err(Error::invalid("divisions must be at least 1"));
    }
    let clamped = divisions > n;
    let d = divisions.min(n);
    let inv_h_sq = 1.0 / (h * h);

    let items = &set.items;
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let subset = i % d;
            let size = (n - subset).div_ceil(d);
            let sum: f64 = (subset..n)
                .step_by(d)
                .map(|j| consistency(&items[i], &items[j], inv_h_sq))
                .sum();
            sum * (n as f64 / size as f64)
        })
        .collect();

    for (c, s) in set.items.iter_mut().zip(scores) {
        c.reliability = Some(s);
    }
    // stable: equal scores keep their current order
    set.items.sort_by(|a, b| {
        b.reliability
            .unwrap_or(0.0)
            .total_cmp(&a.reliability.unwrap_or(0.0))
    });
    Ok(ReliabilityReport {
        divisions_used: d,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpfh::FpfhDescriptor;

    fn kp(i: usize, pos: Vec3, curvature: f64, first_bin: f64) -> Keypoint {
        let mut descriptor = FpfhDescriptor::zero();
        descriptor.bins[0] = first_bin;
        Keypoint {
            index: i,
            position: pos,
            normal: Vec3::z(),
            curvature,
            descriptor,
        }
    }

    fn corr(order: usize, src: Vec3, dst: Vec3) -> Correspondence {
        let mp = |p| MatchedPoint {
            keypoint: order,
            index: order,
            position: p,
            normal: Vec3::z(),
            curvature: 0.0,
        };
        Correspondence {
            src: mp(src),
            dst: mp(dst),
            descriptor_distance: 0.0,
            order,
            reliability: None,
        }
    }

    #[test]
    fn identical_keypoints_self_match() {
        let kps: Vec<Keypoint> = (0..8)
            .map(|i| kp(i, Vec3::new(i as f64, 0.0, 0.0), 0.01 * i as f64, 10.0 * i as f64))
            .collect();
        let set = build_correspondences(&kps, &kps, 1, 0.05, 1.0).unwrap();
        assert_eq!(set.len(), 8);
        for c in &set.items {
            assert_eq!(c.src.index, c.dst.index);
            assert_eq!(c.descriptor_distance, 0.0);
        }
    }

    #[test]
    fn curvature_gap_rejects_pair() {
        let a = [kp(0, Vec3::zeros(), 0.25, 1.0)];
        let b = [kp(0, Vec3::zeros(), 0.05, 1.0)];
        assert!(matches!(
            build_correspondences(&a, &b, 1, 0.05, 1.0),
            Err(Error::Empty(_))
        ));
        assert!(build_correspondences(&[], &b, 1, 0.05, 1.0).is_err());
    }

    #[test]
    fn extra_predicate_filters() {
        let kps: Vec<Keypoint> = (0..4).map(|i| kp(i, Vec3::zeros(), 0.1, i as f64)).collect();
        let set = build_correspondences_with(&kps, &kps, 2, 0.05, 1.0, |p, q| p.index != q.index).unwrap();
        assert!(set.items.iter().all(|c| c.src.index != c.dst.index));
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn singleton_scores_one() {
        let mut set = CorrespondenceSet {
            items: vec![corr(0, Vec3::zeros(), Vec3::x())],
            medd: 1.0,
        };
        let rep = score_reliability(&mut set, 10.0, 4).unwrap();
        assert!(rep.clamped);
        assert_eq!(rep.divisions_used, 1);
        assert_eq!(set.items[0].reliability, Some(1.0));
    }

    #[test]
    fn consistent_pair_scores_two() {
        let mut set = CorrespondenceSet {
            items: vec![
                corr(0, Vec3::zeros(), Vec3::new(5.0, 5.0, 5.0)),
                corr(1, Vec3::new(1.0, 2.0, 2.0), Vec3::new(8.0, 5.0, 5.0)),
            ],
            medd: 1.0,
        };
        score_reliability(&mut set, 10.0, 1).unwrap();
        assert!(set.items.iter().all(|c| c.reliability == Some(2.0)));
        assert!(set.is_scored());
    }

    #[test]
    fn non_positive_range_rejected() {
        let mut set = CorrespondenceSet {
            items: vec![corr(0, Vec3::zeros(), Vec3::x())],
            medd: 0.0,
        };
        assert!(score_reliability(&mut set, 10.0, 1).is_err());
    }
}
