//! Pose voting: one rigid transform per triplet, then the per-axis histogram
//! mode of the rotation-vector and translation votes in their PCA frames.
//!
//! All transforms estimated here map `Y`-side points onto `X`-side points.

use std::f64::consts::PI;

use nalgebra::{SymmetricEigen, SVD};
use rayon::prelude::*;

use crate::cloud::median;
use crate::error::{Error, Result};
use crate::transform::{Mat3, RigidTransform, RotationVector, Vec3};
use crate::triplets::Triplet;

/// Cap on the automatic bin count.
pub const MAX_BINS: usize = 1024;

/// Relative area below which a triangle counts as collinear.
const COLLINEAR_TOLERANCE: f64 = 1e-12;

/// Least-squares rigid transform with `to ≈ R·from + t`, reflections excluded.
pub fn fit_rigid(from: &[Vec3], to: &[Vec3]) -> Result<RigidTransform> {
    if from.len() != to.len() || from.len() < 3 {
        return Err(Error::invalid("rigid fit needs at least 3 paired points"));
    }
    let n = from.len() as f64;
    let cf = from.iter().sum::<Vec3>() / n;
    let ct = to.iter().sum::<Vec3>() / n;
    let mut h = Mat3::zeros();
    for (f, t) in from.iter().zip(to) {
        h += (f - cf) * (t - ct).transpose();
    }
    let svd = SVD::new(h, true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateTriplet),
    };
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    Ok(RigidTransform {
        rotation,
        translation: ct - rotation * cf,
    })
}

fn collinear(p: &[Vec3; 3]) -> bool {
    let a = p[1] - p[0];
    let b = p[2] - p[0];
    let scale = a.norm_squared().max(b.norm_squared()).max((p[2] - p[1]).norm_squared());
    scale == 0.0 || a.cross(&b).norm() <= COLLINEAR_TOLERANCE * scale
}

/// Transform taking the triplet's `Y` keypoints onto its `X` keypoints.
pub fn estimate_triplet_transform(triplet: &Triplet) -> Result<RigidTransform> {
    if collinear(&triplet.src) || collinear(&triplet.dst) {
        return Err(Error::DegenerateTriplet);
    }
    fit_rigid(&triplet.dst, &triplet.src)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteKind {
    Rotation,
    Translation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteSet {
    pub kind: VoteKind,
    pub vectors: Vec<Vec3>,
}

impl VoteSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Votes {
    pub rotations: VoteSet,
    pub translations: VoteSet,
    /// Triplets skipped as collinear.
    pub degenerate: usize,
}

/// One rotation vector and one translation per non-degenerate triplet, in triplet order.
pub fn collect_votes(triplets: &[Triplet]) -> Result<Votes> {
    if triplets.is_empty() {
        return Err(Error::Empty("triplet set"));
    }
    let fits: Vec<Option<RigidTransform>> = triplets
        .par_iter()
        .map(|t| estimate_triplet_transform(t).ok())
        .collect();
    let degenerate = fits.iter().filter(|f| f.is_none()).count();
    let (rotations, translations): (Vec<Vec3>, Vec<Vec3>) = fits
        .into_iter()
        .flatten()
        .map(|t| (RotationVector::from_matrix(&t.rotation).0, t.translation))
        .unzip();
    if rotations.is_empty() {
        return Err(Error::Empty("vote set (every triplet degenerate)"));
    }
    Ok(Votes {
        rotations: VoteSet {
            kind: VoteKind::Rotation,
            vectors: rotations,
        },
        translations: VoteSet {
            kind: VoteKind::Translation,
            vectors: translations,
        },
        degenerate,
    })
}

/// Replaces rotation votes by their equivalent `(θ − 2π)·α` when that lies
/// nearer the component-wise median vote. Only affects votes close to `θ = π`,
/// where one rotation has two distant parameterizations.
pub fn canonicalize_rotations(votes: &mut [Vec3]) {
    if votes.is_empty() {
        return;
    }
    let mut reference = Vec3::zeros();
    for axis in 0..3 {
        let mut comp: Vec<f64> = votes.iter().map(|v| v[axis]).collect();
        reference[axis] = median(&mut comp);
    }
    if reference.norm() == 0.0 {
        return;
    }
    for v in votes.iter_mut() {
        let theta = v.norm();
        if theta <= PI / 2.0 {
            continue;
        }
        let alt = *v * ((theta - 2.0 * PI) / theta);
        if (alt - reference).norm() < (*v - reference).norm() {
            *v = alt;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecorrelatedFrame {
    /// Orthonormal `U_V`, columns by descending variance.
    pub basis: Mat3,
    /// `v̂ = U_Vᵀ·v`, split per axis.
    pub coords: [Vec<f64>; 3],
    /// Identity basis used because there were fewer than two votes or zero spread.
    pub fallback: bool,
}

impl DecorrelatedFrame {
    pub fn restore(&self, v_hat: &Vec3) -> Vec3 {
        self.basis * v_hat
    }
}

/// PCA of the votes about their mean.
pub fn decorrelate(votes: &[Vec3]) -> DecorrelatedFrame {
    let project = |basis: Mat3, fallback| {
        let bt = basis.transpose();
        let mut coords = [Vec::with_capacity(votes.len()), Vec::with_capacity(votes.len()), Vec::with_capacity(votes.len())];
        for v in votes {
            let h = bt * v;
            for a in 0..3 {
                coords[a].push(h[a]);
            }
        }
        DecorrelatedFrame {
            basis,
            coords,
            fallback,
        }
    };
    if votes.len() < 2 {
        return project(Mat3::identity(), true);
    }
    let n = votes.len() as f64;
    let mean = votes.iter().sum::<Vec3>() / n;
    let mut cov = Mat3::zeros();
    for v in votes {
        let d = v - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    if cov.amax() == 0.0 {
        return project(Mat3::identity(), true);
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis = Mat3::zeros();
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).normalize();
        if col[col.iamax()] < 0.0 {
            col = -col;
        }
        basis.set_column(dst, &col);
    }
    project(basis, false)
}

/// Linear-interpolated quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Freedman–Diaconis width `2·IQR·n^(-1/3)`.
pub fn freedman_diaconis_width(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    2.0 * iqr * (sorted.len() as f64).powf(-1.0 / 3.0)
}

/// Median-anchored histogram: value `v` goes to `⌊(v − med)/h + B/2⌋`, and
/// values landing outside `[0, B − 1]` are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteHistogram {
    pub bin_count: usize,
    pub width: f64,
    pub median: f64,
    pub counts: Vec<usize>,
    pub members: Vec<Vec<f64>>,
    pub discarded: usize,
}

impl VoteHistogram {
    /// `None` when the Freedman–Diaconis width is zero. `bins = None` picks
    /// just enough bins to keep every value, capped at [`MAX_BINS`].
    pub fn build(values: &[f64], bins: Option<usize>) -> Result<Option<Self>> {
        if values.is_empty() {
            return Err(Error::Empty("histogram input"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite histogram value"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let width = freedman_diaconis_width(&sorted);
        let med = median(&mut sorted);
        if !(width > 0.0 && width.is_finite()) {
            return Ok(None);
        }
        let bin_count = match bins {
            Some(0) => return Err(Error::invalid("bin count must be positive")),
            Some(b) => b,
            None => {
                let reach = (sorted[sorted.len() - 1] - med).max(med - sorted[0]);
                let half = (reach / width).ceil();
                if half >= (MAX_BINS / 2) as f64 {
                    MAX_BINS
                } else {
                    2 * half as usize + 2
                }
            }
        };
        let mut hist = VoteHistogram {
            bin_count,
            width,
            median: med,
            counts: vec![0; bin_count],
            members: vec![Vec::new(); bin_count],
            discarded: 0,
        };
        for &v in values {
            match hist.bin_of(v) {
                Some(b) => {
                    hist.counts[b] += 1;
                    hist.members[b].push(v);
                }
                None => hist.discarded += 1,
            }
        }
        Ok(Some(hist))
    }

    pub fn bin_of(&self, v: f64) -> Option<usize> {
        let x = (v / self.width - self.median / self.width + self.bin_count as f64 / 2.0).floor();
        (x >= 0.0 && x < self.bin_count as f64).then_some(x as usize)
    }

    /// Fullest bin; ties go to the bin nearest `⌊B/2⌋`, then the lower index.
    pub fn mode_bin(&self) -> usize {
        let center = self.bin_count / 2;
        (0..self.bin_count)
            .min_by(|&a, &b| {
                self.counts[b]
                    .cmp(&self.counts[a])
                    .then(a.abs_diff(center).cmp(&b.abs_diff(center)))
                    .then(a.cmp(&b))
            })
            .unwrap_or(center)
    }

    /// Lower edge of bin `b` in value units.
    pub fn bin_lower(&self, b: usize) -> f64 {
        self.median + (b as f64 - self.bin_count as f64 / 2.0) * self.width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeEstimate {
    pub value: f64,
    /// Value range of the bins averaged (`[lo, hi)`; a single point when degenerate).
    pub window: (f64, f64),
    pub histogram: Option<VoteHistogram>,
    /// Zero Freedman–Diaconis width: `value` is the median.
    pub degenerate: bool,
}

impl ModeEstimate {
    pub fn contains(&self, v: f64) -> bool {
        if self.degenerate {
            v == self.value
        } else {
            v >= self.window.0 && v < self.window.1
        }
    }

    pub fn discarded(&self) -> usize {
        self.histogram.as_ref().map_or(0, |h| h.discarded)
    }
}

/// Mean of the values in the mode bin and its `delta` neighbors on either side.
pub fn histogram_mode(values: &[f64], bins: Option<usize>, delta: usize) -> Result<ModeEstimate> {
    let Some(hist) = VoteHistogram::build(values, bins)? else {
        let mut sorted = values.to_vec();
        let med = median(&mut sorted);
        return Ok(ModeEstimate {
            value: med,
            window: (med, med),
            histogram: None,
            degenerate: true,
        });
    };
    let mode = hist.mode_bin();
    let lo = mode.saturating_sub(delta);
    let hi = (mode + delta).min(hist.bin_count - 1);
    let (sum, count) = hist.members[lo..=hi]
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    let window = (hist.bin_lower(lo), hist.bin_lower(hi + 1));
    Ok(ModeEstimate {
        value: sum / count as f64,
        window,
        histogram: Some(hist),
        degenerate: false,
    })
}

/// The mode of one vote set, reassembled in the original coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisModes {
    pub frame: DecorrelatedFrame,
    pub modes: [ModeEstimate; 3],
    pub vector: Vec3,
}

pub fn vote_mode(votes: &[Vec3], bins: Option<usize>, delta: usize) -> Result<AxisModes> {
    if votes.is_empty() {
        return Err(Error::Empty("vote set"));
    }
    let frame = decorrelate(votes);
    let modes = [
        histogram_mode(&frame.coords[0], bins, delta)?,
        histogram_mode(&frame.coords[1], bins, delta)?,
        histogram_mode(&frame.coords[2], bins, delta)?,
    ];
    let v_hat = Vec3::new(modes[0].value, modes[1].value, modes[2].value);
    let vector = frame.restore(&v_hat);
    Ok(AxisModes {
        frame,
        modes,
        vector,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub transform: RigidTransform,
    pub rotation: AxisModes,
    pub translation: AxisModes,
    /// Fraction of votes inside the mode window on all six axes.
    pub consensus: f64,
    /// Values dropped for falling outside a histogram, summed over axes.
    pub discarded: usize,
}

/// Pose from index-aligned rotation and translation votes.
pub fn estimate_pose(rotations: &VoteSet, translations: &VoteSet, bins: Option<usize>, delta: usize) -> Result<PoseEstimate> {
    if rotations.is_empty() || translations.is_empty() {
        return Err(Error::Empty("vote set"));
    }
    if rotations.len() != translations.len() {
        return Err(Error::invalid("rotation and translation vote counts differ"));
    }
    let mut rvotes = rotations.vectors.clone();
    canonicalize_rotations(&mut rvotes);
    let rotation = vote_mode(&rvotes, bins, delta)?;
    let translation = vote_mode(&translations.vectors, bins, delta)?;

    let inside = (0..rvotes.len())
        .filter(|&i| {
            (0..3).all(|a| {
                rotation.modes[a].contains(rotation.frame.coords[a][i])
                    && translation.modes[a].contains(translation.frame.coords[a][i])
            })
        })
        .count();
    let discarded = rotation
        .modes
        .iter()
        .chain(&translation.modes)
        .map(ModeEstimate::discarded)
        .sum();
    let transform = RigidTransform::from_rotation_vector(&RotationVector(rotation.vector), translation.vector);
    Ok(PoseEstimate {
        transform,
        consensus: inside as f64 / rvotes.len() as f64,
        discarded,
        rotation,
        translation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn triangle(p: [Vec3; 3], t: &RigidTransform) -> Triplet {
        Triplet {
            indices: [2, 1, 0],
            src: p,
            dst: p.map(|q| t.apply_point(&q)),
        }
    }

    #[test]
    fn identical_triangles_give_identity() {
        let p = [Vec3::zeros(), Vec3::new(1.0, 0.2, 0.0), Vec3::new(0.3, 1.0, 0.5)];
        let t = estimate_triplet_transform(&triangle(p, &RigidTransform::identity())).unwrap();
        assert!((t.rotation - Mat3::identity()).amax() < 1e-12);
        assert!(t.translation.amax() < 1e-12);
    }

    #[test]
    fn recovers_inverse_of_planted_motion() {
        let p = [Vec3::new(1.0, 2.0, 0.0), Vec3::new(-1.0, 0.5, 2.0), Vec3::new(0.3, -2.0, 1.0)];
        let planted = RigidTransform::rotation_y(20f64.to_radians()).compose(&RigidTransform::translation(Vec3::new(0.5, 0.0, -1.0)));
        let est = estimate_triplet_transform(&triangle(p, &planted)).unwrap();
        let want = planted.inverse();
        assert!((est.rotation - want.rotation).amax() < 1e-9);
        assert!((est.translation - want.translation).amax() < 1e-9);
    }

    #[test]
    fn mirrored_triangle_still_proper() {
        let src = [Vec3::zeros(), Vec3::x(), Vec3::new(0.2, 1.0, 0.0)];
        let dst = src.map(|p| Vec3::new(-p.x, p.y, p.z + 1.0));
        let t = fit_rigid(&dst, &src).unwrap();
        assert_relative_eq!(t.rotation.determinant(), 1.0, epsilon = 1e-12);
        assert!(t.is_proper(1e-9));
    }

    #[test]
    fn collinear_triplet_rejected() {
        let p = [Vec3::zeros(), Vec3::x(), Vec3::new(2.0, 0.0, 0.0)];
        assert!(matches!(
            estimate_triplet_transform(&triangle(p, &RigidTransform::identity())),
            Err(Error::DegenerateTriplet)
        ));
    }

    #[test]
    fn collect_counts_non_degenerate() {
        let good = triangle([Vec3::zeros(), Vec3::x(), Vec3::y()], &RigidTransform::rotation_y(0.1));
        let bad = triangle([Vec3::zeros(), Vec3::x(), Vec3::new(3.0, 0.0, 0.0)], &RigidTransform::identity());
        let votes = collect_votes(&[good, bad, good]).unwrap();
        assert_eq!(votes.rotations.len(), 2);
        assert_eq!(votes.translations.len(), 2);
        assert_eq!(votes.degenerate, 1);
        assert!(collect_votes(&[bad]).is_err());
        assert!(collect_votes(&[]).is_err());
    }

    #[test]
    fn identical_votes_use_identity_basis() {
        let v = vec![Vec3::new(0.1, 0.2, 0.3); 5];
        let f = decorrelate(&v);
        assert!(f.fallback);
        assert_eq!(f.basis, Mat3::identity());
        assert_eq!(f.coords[2], vec![0.3; 5]);
    }

    #[test]
    fn line_votes_align_first_axis() {
        let dir = Vec3::new(1.0, 1.0, 1.0).normalize();
        let v: Vec<Vec3> = (0..20).map(|i| dir * (i as f64 - 7.0)).collect();
        let f = decorrelate(&v);
        assert!((f.basis.column(0) - dir).norm() < 1e-6 || (f.basis.column(0) + dir).norm() < 1e-6);
        for (i, orig) in v.iter().enumerate() {
            let back = f.restore(&Vec3::new(f.coords[0][i], f.coords[1][i], f.coords[2][i]));
            assert!((back - orig).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_values_return_constant() {
        let m = histogram_mode(&[2.5; 9], None, 1).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.value, 2.5);
        assert!(histogram_mode(&[], None, 1).is_err());
    }

    #[test]
    fn single_vote_is_returned_verbatim() {
        let r = VoteSet {
            kind: VoteKind::Rotation,
            vectors: vec![Vec3::new(0.1, -0.2, 0.3)],
        };
        let t = VoteSet {
            kind: VoteKind::Translation,
            vectors: vec![Vec3::new(1.0, 2.0, 3.0)],
        };
        let est = estimate_pose(&r, &t, None, 1).unwrap();
        assert_eq!(est.rotation.vector, r.vectors[0]);
        assert_eq!(est.translation.vector, t.vectors[0]);
        assert_eq!(est.consensus, 1.0);
    }

    #[test]
    fn auto_bins_keep_every_value() {
        let values: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 * 0.1 + if i % 10 == 0 { 50.0 } else { 0.0 }).collect();
        let h = VoteHistogram::build(&values, None).unwrap().unwrap();
        assert_eq!(h.discarded, 0);
        assert_eq!(h.counts.iter().sum::<usize>(), values.len());
        for (b, members) in h.members.iter().enumerate() {
            assert!(members.iter().all(|&v| h.bin_of(v) == Some(b)));
        }
        let capped = VoteHistogram::build(&values, Some(4)).unwrap().unwrap();
        assert_eq!(capped.counts.iter().sum::<usize>() + capped.discarded, values.len());
        assert!(capped.discarded > 0);
    }

    #[test]
    fn mode_ties_prefer_center() {
        let h = VoteHistogram {
            bin_count: 8,
            width: 1.0,
            median: 0.0,
            counts: vec![3, 0, 0, 3, 0, 3, 0, 0],
            members: vec![Vec::new(); 8],
            discarded: 0,
        };
        assert_eq!(h.mode_bin(), 3);
    }

    #[test]
    fn near_pi_votes_are_merged() {
        let axis = Vec3::new(0.0, 1.0, 0.0);
        let mut v = vec![axis * 3.1, axis * 3.1, axis * 3.1, -axis * 3.13];
        canonicalize_rotations(&mut v);
        assert!((v[3] - axis * (2.0 * PI - 3.13)).norm() < 1e-12);
        assert_eq!(v[0], axis * 3.1);
    }
}
