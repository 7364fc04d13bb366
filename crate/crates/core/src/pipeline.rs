//! End-to-end registration and its configuration.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::cloud::{compute_medd, estimate_normals, PointCloud};
use crate::correspondence::{build_correspondences, score_reliability};
use crate::error::{Error, Result, Stage, StageExt};
use crate::fpfh::compute_fpfh;
use crate::keypoints::{compute_curvatures, detect_keypoints, Keypoint};
use crate::transform::RigidTransform;
use crate::triplets::{generate_triplets, PpfThresholds, Termination, Triplet, TripletSearchConfig};
use crate::voting::{collect_votes, estimate_pose, PoseEstimate, Votes};

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationConfig {
    pub keypoint_count: usize,
    /// FPFH search radius in multiples of medD.
    pub fpfh_radius_factor: f64,
    pub knn_k: usize,
    /// Largest curvature gap allowed between matched keypoints.
    pub curvature_threshold: f64,
    /// Length-consistency range in multiples of medD.
    pub reliability_range: f64,
    pub divisions: usize,
    pub ppf: PpfThresholds,
    pub triangle_threshold_deg: f64,
    pub min_triplets: usize,
    pub scan_fraction: f64,
    /// Half-width, in bins, of the window averaged around the histogram mode.
    pub mode_delta: usize,
    pub normal_k: usize,
    /// Fixed histogram bin count; `None` sizes each histogram from its data.
    pub histogram_bins: Option<usize>,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        let triplets = TripletSearchConfig::default();
        RegistrationConfig {
            keypoint_count: 1500,
            fpfh_radius_factor: 10.0,
            knn_k: 15,
            curvature_threshold: 0.05,
            reliability_range: 10.0,
            divisions: 4,
            ppf: triplets.ppf,
            triangle_threshold_deg: triplets.triangle_threshold_deg,
            min_triplets: triplets.min_triplets,
            scan_fraction: triplets.scan_fraction,
            mode_delta: 1,
            normal_k: 20,
            histogram_bins: None,
        }
    }
}

/// Every key accepted by [`RegistrationConfig::set`], in file order.
pub const CONFIG_KEYS: [&str; 15] = [
    "keypoint_count",
    "fpfh_radius_factor",
    "knn_k",
    "curvature_threshold",
    "reliability_range",
    "divisions",
    "ppf_ratio",
    "ppf_angle_deg",
    "ppf_normal_angle_deg",
    "triangle_threshold_deg",
    "min_triplets",
    "scan_fraction",
    "mode_delta",
    "normal_k",
    "histogram_bins",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

impl RegistrationConfig {
    pub fn triplet_config(&self) -> TripletSearchConfig {
        TripletSearchConfig {
            ppf: self.ppf,
            triangle_threshold_deg: self.triangle_threshold_deg,
            min_triplets: self.min_triplets,
            scan_fraction: self.scan_fraction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("fpfh_radius_factor", self.fpfh_radius_factor)?;
        positive("reliability_range", self.reliability_range)?;
        if !(self.curvature_threshold >= 0.0) {
            return Err(Error::Config("curvature_threshold must be non-negative".into()));
        }
        for (name, v) in [
            ("keypoint_count", self.keypoint_count),
            ("knn_k", self.knn_k),
            ("divisions", self.divisions),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.normal_k < 3 {
            return Err(Error::Config("normal_k must be at least 3".into()));
        }
        if self.histogram_bins == Some(0) {
            return Err(Error::Config("histogram_bins must be positive or 'auto'".into()));
        }
        self.triplet_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Overrides one field by its config-file name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "keypoint_count" => self.keypoint_count = parse_num(key, value)?,
            "fpfh_radius_factor" => self.fpfh_radius_factor = parse_num(key, value)?,
            "knn_k" => self.knn_k = parse_num(key, value)?,
            "curvature_threshold" => self.curvature_threshold = parse_num(key, value)?,
            "reliability_range" => self.reliability_range = parse_num(key, value)?,
            "divisions" => self.divisions = parse_num(key, value)?,
            "ppf_ratio" => self.ppf.ratio = parse_num(key, value)?,
            "ppf_angle_deg" => self.ppf.angle_deg = parse_num(key, value)?,
            "ppf_normal_angle_deg" => self.ppf.normal_angle_deg = parse_num(key, value)?,
            "triangle_threshold_deg" => self.triangle_threshold_deg = parse_num(key, value)?,
            "min_triplets" => self.min_triplets = parse_num(key, value)?,
            "scan_fraction" => self.scan_fraction = parse_num(key, value)?,
            "mode_delta" => self.mode_delta = parse_num(key, value)?,
            "normal_k" => self.normal_k = parse_num(key, value)?,
            "histogram_bins" => {
                self.histogram_bins = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown key '{other}' (expected one of: {})",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored; a repeated key keeps its last value.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// The full configuration in the format [`Self::from_text`] reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let bins = self
            .histogram_bins
            .map_or_else(|| "auto".to_string(), |b| b.to_string());
        let fields: [(&str, String); 15] = [
            ("keypoint_count", self.keypoint_count.to_string()),
            ("fpfh_radius_factor", self.fpfh_radius_factor.to_string()),
            ("knn_k", self.knn_k.to_string()),
            ("curvature_threshold", self.curvature_threshold.to_string()),
            ("reliability_range", self.reliability_range.to_string()),
            ("divisions", self.divisions.to_string()),
            ("ppf_ratio", self.ppf.ratio.to_string()),
            ("ppf_angle_deg", self.ppf.angle_deg.to_string()),
            ("ppf_normal_angle_deg", self.ppf.normal_angle_deg.to_string()),
            ("triangle_threshold_deg", self.triangle_threshold_deg.to_string()),
            ("min_triplets", self.min_triplets.to_string()),
            ("scan_fraction", self.scan_fraction.to_string()),
            ("mode_delta", self.mode_delta.to_string()),
            ("normal_k", self.normal_k.to_string()),
            ("histogram_bins", bins),
        ];
        for (k, v) in fields {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Wall time per stage, in execution order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings(pub Vec<(Stage, Duration)>);

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.0.iter().map(|(_, d)| *d).sum()
    }

    pub fn get(&self, stage: Stage) -> Duration {
        self.0
            .iter()
            .filter(|(s, _)| *s == stage)
            .map(|(_, d)| *d)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub medd: f64,
    pub keypoints: [usize; 2],
    /// Keypoints with no neighbor inside the FPFH radius, per cloud.
    pub isolated_keypoints: [usize; 2],
    /// Points whose covariance eigenvalues summed to zero, per cloud.
    pub degenerate_points: [usize; 2],
    pub correspondences: usize,
    pub divisions_used: usize,
    pub graph_edges: usize,
    pub nodes_scanned: usize,
    pub triplets: usize,
    pub termination: Termination,
    pub degenerate_triplets: usize,
    pub discarded_votes: usize,
    /// Share of votes falling inside the mode window on all six axes. Near
    /// zero when the votes agree to rounding error, since the windows then
    /// shrink to that scale.
    pub window_consensus: f64,
    /// Share of triplets whose three `Y` points land within
    /// `SUPPORT_RADIUS · medD` of their `X` partners under the final pose.
    pub support: f64,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    /// Maps `Y` onto `X`.
    pub transform: RigidTransform,
    pub pose: PoseEstimate,
    pub votes: Votes,
    pub diagnostics: Diagnostics,
}

/// Alignment tolerance, in medD, for counting a triplet as supporting the pose.
pub const SUPPORT_RADIUS: f64 = 2.0;

fn triplet_support(triplets: &[Triplet], t: &RigidTransform, tol: f64) -> f64 {
    let agree = triplets
        .iter()
        .filter(|tr| (0..3).all(|k| (t.apply_point(&tr.dst[k]) - tr.src[k]).norm() <= tol))
        .count();
    agree as f64 / triplets.len() as f64
}

struct Timer {
    timings: Vec<(Stage, Duration)>,
}

impl Timer {
    fn run<T>(&mut self, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().at(stage);
        self.timings.push((stage, start.elapsed()));
        out
    }
}

struct Prepared {
    keypoints: Vec<Keypoint>,
    isolated: usize,
    degenerate: usize,
}

fn prepare(cloud: &PointCloud, cfg: &RegistrationConfig, timer: &mut Timer) -> Result<PointCloud> {
    timer.run(Stage::Normals, || estimate_normals(cloud, cfg.normal_k, None))
}

fn describe(cloud: &PointCloud, medd: f64, cfg: &RegistrationConfig, timer: &mut Timer) -> Result<Prepared> {
    let (cloud, degenerate, mut keypoints) = timer.run(Stage::Keypoints, || {
        let curv = compute_curvatures(cloud)?;
        let keypoints = detect_keypoints(&curv.cloud, cfg.keypoint_count)?;
        Ok((curv.cloud, curv.degenerate.len(), keypoints))
    })?;
    let isolated = timer.run(Stage::Descriptors, || {
        compute_fpfh(&cloud, &mut keypoints, cfg.fpfh_radius_factor * medd)
    })?;
    Ok(Prepared {
        keypoints,
        isolated: isolated.len(),
        degenerate,
    })
}

/// Estimates the rigid transform taking `y` onto `x`.
///
/// Normals are recomputed on both clouds, oriented toward each cloud's own
/// viewpoint when it has one. Errors carry the stage they came from.
pub fn register(x: &PointCloud, y: &PointCloud, cfg: &RegistrationConfig) -> Result<RegistrationResult> {
    cfg.validate()?;
    for (name, c) in [("X", x), ("Y", y)] {
        if c.len() < cfg.keypoint_count {
            return Err(Error::invalid(format!(
                "cloud {name} has {} points, fewer than keypoint_count = {}",
                c.len(),
                cfg.keypoint_count
            )));
        }
    }
    let mut timer = Timer { timings: Vec::new() };

    let xn = prepare(x, cfg, &mut timer)?;
    let yn = prepare(y, cfg, &mut timer)?;
    let medd = timer.run(Stage::Scale, || {
        let m = compute_medd(&xn, &yn)?;
        if m > 0.0 {
            Ok(m)
        } else {
            Err(Error::invalid("median nearest-neighbor distance is zero"))
        }
    })?;
    let px = describe(&xn, medd, cfg, &mut timer)?;
    let py = describe(&yn, medd, cfg, &mut timer)?;

    let mut set = timer.run(Stage::Correspondences, || {
        build_correspondences(&px.keypoints, &py.keypoints, cfg.knn_k, cfg.curvature_threshold, medd)
    })?;
    let report = timer.run(Stage::Reliability, || {
        score_reliability(&mut set, cfg.reliability_range, cfg.divisions)
    })?;
    let search = timer.run(Stage::Triplets, || {
        let s = generate_triplets(&set, &cfg.triplet_config())?;
        if s.triplets.is_empty() {
            return Err(Error::Empty("triplet set"));
        }
        Ok(s)
    })?;
    let (votes, pose) = timer.run(Stage::Voting, || {
        let votes = collect_votes(&search.triplets)?;
        let pose = estimate_pose(&votes.rotations, &votes.translations, cfg.histogram_bins, cfg.mode_delta)?;
        Ok((votes, pose))
    })?;

    let diagnostics = Diagnostics {
        medd,
        keypoints: [px.keypoints.len(), py.keypoints.len()],
        isolated_keypoints: [px.isolated, py.isolated],
        degenerate_points: [px.degenerate, py.degenerate],
        correspondences: set.len(),
        divisions_used: report.divisions_used,
        graph_edges: search.edges,
        nodes_scanned: search.nodes_scanned,
        triplets: search.triplets.len(),
        termination: search.termination,
        degenerate_triplets: votes.degenerate,
        discarded_votes: pose.discarded,
        window_consensus: pose.consensus,
        support: triplet_support(&search.triplets, &pose.transform, SUPPORT_RADIUS * medd),
        timings: StageTimings(timer.timings),
    };
    Ok(RegistrationResult {
        transform: pose.transform,
        pose,
        votes,
        diagnostics,
    })
}
