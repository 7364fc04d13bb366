//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints its own PASS/FAIL line, and exits non-zero if any fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;
use tripreg::correspondence::{score_reliability, Correspondence, CorrespondenceSet, MatchedPoint};
use tripreg::eval::fixtures::{cube_with_bumps, Fixture};
use tripreg::eval::{generate_ring_views, rmse, RingConfig};
use tripreg::fpfh::{compute_fpfh, FpfhDescriptor};
use tripreg::io::{write_ply, TransformRecord};
use tripreg::keypoints::Keypoint;
use tripreg::ppf::compute_ppf;
use tripreg::triplets::{generate_triplets, PpfThresholds, Triplet, TripletSearchConfig};
use tripreg::voting::{estimate_triplet_transform, freedman_diaconis_width, histogram_mode};
use tripreg::{
    estimate_normals, register, PointCloud, RegistrationConfig, RigidTransform, RotationVector, Vec3,
};
use tripreg_cli::{cmd_bench, cmd_synth, BenchArgs, SynthArgs};

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit(r: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn in_box(r: &mut ChaCha8Rng, half: f64) -> Vec3 {
    Vec3::new(r.random_range(-half..half), r.random_range(-half..half), r.random_range(-half..half))
}

fn motion(r: &mut ChaCha8Rng, reach: f64) -> RigidTransform {
    let angle = r.random_range(0.0..std::f64::consts::PI * 0.999);
    RigidTransform::from_rotation_vector(&RotationVector(unit(r) * angle), in_box(r, reach))
}

fn gauss(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn smallest_angle(p: &[Vec3; 3]) -> f64 {
    (0..3)
        .map(|i| {
            let (a, b) = (p[(i + 1) % 3] - p[i], p[(i + 2) % 3] - p[i]);
            (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
        })
        .fold(f64::INFINITY, f64::min)
}

fn svd_recovery() -> Outcome {
    let mut r = rng(1);
    let mut cases = Vec::with_capacity(1000);
    while cases.len() < 1000 {
        let dst = [in_box(&mut r, 5.0), in_box(&mut r, 5.0), in_box(&mut r, 5.0)];
        if smallest_angle(&dst) < 5f64.to_radians() {
            continue;
        }
        let t = motion(&mut r, 10.0);
        let src = dst.map(|p| t.apply_point(&p));
        cases.push((Triplet { indices: [0, 1, 2], src, dst }, t));
    }
    let start = Instant::now();
    let estimates: Vec<_> = cases.iter().map(|(tr, _)| estimate_triplet_transform(tr)).collect();
    let elapsed = start.elapsed();
    let (mut worst_r, mut worst_t) = (0.0f64, 0.0f64);
    for (est, (_, truth)) in estimates.into_iter().zip(&cases) {
        let Ok(est) = est else {
            return outcome(false, "a non-degenerate triplet was rejected".into());
        };
        worst_r = worst_r.max((est.rotation - truth.rotation).norm());
        worst_t = worst_t.max((est.translation - truth.translation).norm());
    }
    outcome(
        worst_r <= 1e-9 && worst_t <= 1e-9 && elapsed < Duration::from_secs(1),
        format!("max rotation err {worst_r:.2e}, max translation err {worst_t:.2e}, {elapsed:.2?} for 1000"),
    )
}

fn descriptor_invariance() -> Outcome {
    let mut r = rng(2);
    let points: Vec<Vec3> = (0..5000)
        .map(|_| {
            let u = unit(&mut r);
            u * (2.0 + 0.3 * (3.0 * u.x).sin() + 0.2 * (2.0 * u.y + 1.0).cos())
        })
        .collect();
    let cloud = PointCloud::new(points).with_viewpoint(Some(Vec3::zeros()));
    let radius = 0.45;
    let pairs: Vec<(usize, usize)> = (0..2000)
        .map(|_| (r.random_range(0..5000), r.random_range(0..5000)))
        .filter(|(a, b)| a != b)
        .collect();
    let describe = |c: &PointCloud| {
        let c = estimate_normals(c, 15, None).unwrap();
        let normals = c.normals().unwrap();
        let mut kps: Vec<Keypoint> = (0..c.len())
            .map(|i| Keypoint {
                index: i,
                position: c.points()[i],
                normal: normals[i],
                curvature: 0.0,
                descriptor: FpfhDescriptor::zero(),
            })
            .collect();
        compute_fpfh(&c, &mut kps, radius).unwrap();
        let ppf: Vec<[f64; 4]> = pairs
            .iter()
            .map(|&(a, b)| {
                let f = compute_ppf(&c.points()[a], &normals[a], &c.points()[b], &normals[b]).unwrap();
                [f.distance, f.angle_first, f.angle_second, f.angle_normals]
            })
            .collect();
        (kps, ppf)
    };
    let (base_fpfh, base_ppf) = describe(&cloud);
    let (mut worst_fpfh, mut worst_ppf) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (fpfh, ppf) = describe(&cloud.transformed(&motion(&mut r, 20.0)));
        for (a, b) in base_fpfh.iter().zip(&fpfh) {
            let norm = a.descriptor.norm();
            let rel = if norm > 0.0 { a.descriptor.distance(&b.descriptor) / norm } else { b.descriptor.norm() };
            worst_fpfh = worst_fpfh.max(rel);
        }
        for (a, b) in base_ppf.iter().zip(&ppf) {
            for k in 0..4 {
                worst_ppf = worst_ppf.max((a[k] - b[k]).abs());
            }
        }
    }
    outcome(
        worst_fpfh <= 1e-6 && worst_ppf <= 1e-9,
        format!("max FPFH rel L2 {worst_fpfh:.2e}, max PPF abs {worst_ppf:.2e} over 100 motions"),
    )
}

/// Mean of the samples in the fullest half-open window `[s, s + w)`, trying
/// every sample as the window start.
fn window_mode(values: &[f64], w: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let (mut best, mut best_lo, mut hi) = (0, 0, 0);
    for lo in 0..s.len() {
        while hi < s.len() && s[hi] < s[lo] + w {
            hi += 1;
        }
        if hi - lo > best {
            best = hi - lo;
            best_lo = lo;
        }
    }
    s[best_lo..best_lo + best].iter().sum::<f64>() / best as f64
}

/// Vote-like data: a tight inlier spike, a weaker second spike and a broad
/// uniform background.
fn mode_sample(r: &mut ChaCha8Rng) -> Vec<f64> {
    let n = r.random_range(10..=5000usize);
    let center = r.random_range(-50.0..50.0);
    let scale = r.random_range(0.01..5.0);
    let inliers = ((r.random_range(0.1..0.4) * n as f64).round() as usize).max(3);
    let side = (r.random_range(0.0..0.6) * inliers as f64) as usize;
    let tight = r.random_range(0.001..0.02) * scale;
    let offset = r.random_range(0.2..0.8) * scale * if r.random_range(0.0..1.0) < 0.5 { -1.0 } else { 1.0 };
    (0..n)
        .map(|i| {
            if i < inliers {
                center + tight * gauss(r)
            } else if i < inliers + side {
                center + offset + 2.0 * tight * gauss(r)
            } else {
                center + r.random_range(-1.0..1.0) * scale
            }
        })
        .collect()
}

fn histogram_oracle() -> Outcome {
    let mut r = rng(3);
    let mut agree = 0;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let v = mode_sample(&mut r);
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let h = freedman_diaconis_width(&sorted);
        let got = histogram_mode(&v, None, 1).unwrap().value;
        let gap = (got - window_mode(&v, h)).abs() / h;
        worst = worst.max(gap);
        if gap <= 1.0 {
            agree += 1;
        }
    }
    outcome(agree == 200, format!("{agree}/200 within one bin width, worst gap {worst:.3} h"))
}

fn ppf_tuple(p1: &Vec3, n1: &Vec3, p2: &Vec3, n2: &Vec3) -> Option<[f64; 4]> {
    let d = p2 - p1;
    let ang = |a: &Vec3, b: &Vec3| a.cross(b).norm().atan2(a.dot(b));
    (d.norm() > 0.0).then(|| [d.norm(), ang(n1, &d), ang(n2, &d), ang(n1, n2)])
}

fn edge(a: &Correspondence, b: &Correspondence, t: &PpfThresholds) -> bool {
    if a.src.keypoint == b.src.keypoint || a.dst.keypoint == b.dst.keypoint {
        return false;
    }
    let (Some(f), Some(g)) = (
        ppf_tuple(&a.src.position, &a.src.normal, &b.src.position, &b.src.normal),
        ppf_tuple(&a.dst.position, &a.dst.normal, &b.dst.position, &b.dst.normal),
    ) else {
        return false;
    };
    let ratio = f[0] / g[0];
    t.ratio < ratio
        && ratio * t.ratio < 1.0
        && (f[1] - g[1]).abs() < t.angle_deg.to_radians()
        && (f[2] - g[2]).abs() < t.angle_deg.to_radians()
        && (f[3] - g[3]).abs() < t.normal_angle_deg.to_radians()
}

fn brute_force(set: &CorrespondenceSet, cfg: &TripletSearchConfig) -> BTreeSet<[usize; 3]> {
    let it = &set.items;
    let th = cfg.triangle_threshold_deg.to_radians();
    let mut out = BTreeSet::new();
    for i in 0..it.len() {
        for j in 0..i {
            for k in 0..j {
                if !(edge(&it[i], &it[j], &cfg.ppf) && edge(&it[i], &it[k], &cfg.ppf) && edge(&it[j], &it[k], &cfg.ppf)) {
                    continue;
                }
                let src = [it[i].src.position, it[j].src.position, it[k].src.position];
                let dst = [it[i].dst.position, it[j].dst.position, it[k].dst.position];
                if smallest_angle(&src) > th && smallest_angle(&dst) > th {
                    out.insert([i, j, k]);
                }
            }
        }
    }
    out
}

fn point(id: usize, position: Vec3, normal: Vec3) -> MatchedPoint {
    MatchedPoint { keypoint: id, index: id, position, normal, curvature: 0.0 }
}

fn mixed_set(r: &mut ChaCha8Rng, n: usize, inliers: usize) -> CorrespondenceSet {
    let inv = motion(r, 2.0).inverse();
    let items = (0..n)
        .map(|i| {
            let x = in_box(r, 3.0);
            let nx = unit(r);
            let (y, ny) = if i < inliers {
                (inv.apply_point(&x), inv.apply_vector(&nx))
            } else {
                (in_box(r, 3.0), unit(r))
            };
            Correspondence {
                src: point(r.random_range(0..2 * n), x, nx),
                dst: point(r.random_range(0..2 * n), y, ny),
                descriptor_distance: 0.0,
                order: i,
                reliability: Some((n - i) as f64),
            }
        })
        .collect();
    CorrespondenceSet { items, medd: 0.1 }
}

fn triplet_oracle() -> Outcome {
    let cfg = TripletSearchConfig {
        min_triplets: usize::MAX,
        scan_fraction: 1.0,
        ..TripletSearchConfig::default()
    };
    let mut r = rng(4);
    let (mut matched, mut total) = (0, 0);
    for _ in 0..40 {
        let n = r.random_range(3..=60);
        let inliers = r.random_range(0..=n);
        let set = mixed_set(&mut r, n, inliers);
        let want = brute_force(&set, &cfg);
        let got: BTreeSet<[usize; 3]> = match generate_triplets(&set, &cfg) {
            Ok(s) => s.triplets.iter().map(|t| t.indices).collect(),
            Err(tripreg::Error::Empty(_)) => BTreeSet::new(),
            Err(e) => return outcome(false, format!("search failed: {e}")),
        };
        total += want.len();
        if got == want {
            matched += 1;
        }
    }
    outcome(
        matched == 40 && total > 100,
        format!("{matched}/40 sets identical to brute force ({total} triplets in total)"),
    )
}

fn end_to_end() -> Outcome {
    let cfg = RegistrationConfig::default();
    let mut lines = Vec::new();
    let (mut good, mut pairs, mut catastrophic) = (0, 0, 0);
    let mut slowest = Duration::ZERO;
    for (fixture, points) in [(Fixture::SphereUnion, 55_000), (Fixture::CubeWithBumps, 70_000)] {
        let model = fixture.build(points, 7).unwrap();
        let ds = generate_ring_views(&model, fixture.name(), &RingConfig::default()).unwrap();
        let sizes: Vec<usize> = ds.views.iter().map(PointCloud::len).collect();
        let (mut worst_rot, mut worst_rmse) = (0.0f64, 0.0f64);
        for (i, j) in ds.pairs() {
            pairs += 1;
            let gt = ds.relative(i, j);
            let start = Instant::now();
            let res = register(&ds.views[i], &ds.views[j], &cfg);
            slowest = slowest.max(start.elapsed());
            let Ok(res) = res else {
                catastrophic += 1;
                continue;
            };
            let rot = res.transform.rotation_error(&gt).to_degrees();
            let err = rmse(&ds.views[i], &ds.views[j], &TransformRecord(res.transform), &TransformRecord(gt)).unwrap()
                / res.diagnostics.medd;
            worst_rot = worst_rot.max(rot);
            worst_rmse = worst_rmse.max(err);
            if rot < 3.0 && err < 5.0 {
                good += 1;
            }
            if rot > 30.0 {
                catastrophic += 1;
            }
        }
        lines.push(format!(
            "{} views {}..{} pts, worst {worst_rot:.3} deg / {worst_rmse:.3} medD",
            fixture.name(),
            sizes.iter().min().unwrap(),
            sizes.iter().max().unwrap()
        ));
    }
    let fraction = good as f64 / pairs as f64;
    outcome(
        fraction >= 0.9 && catastrophic == 0 && slowest < Duration::from_secs(60),
        format!(
            "{good}/{pairs} pairs accurate, {catastrophic} failures, slowest pair {slowest:.2?}; {}",
            lines.join("; ")
        ),
    )
}

fn translation_rmse() -> Outcome {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let cloud = |r: &mut ChaCha8Rng| {
            let n = r.random_range(1..5000);
            let half = r.random_range(0.1..100.0);
            PointCloud::new((0..n).map(|_| in_box(r, half)).collect())
        };
        let (x, y) = (cloud(&mut r), cloud(&mut r));
        let gt = motion(&mut r, 50.0);
        let u = in_box(&mut r, 10.0);
        let est = gt.compose(&RigidTransform::translation(u));
        let got = rmse(&x, &y, &TransformRecord(est), &TransformRecord(gt)).unwrap();
        worst = worst.max((got - u.norm()).abs());
    }
    outcome(worst <= 1e-12, format!("max |RMSE - |u|| = {worst:.2e} over 100 trials"))
}

fn bench_determinism(dir: &Path) -> Outcome {
    let model = dir.join("cube.ply");
    write_ply(&cube_with_bumps(16_000, 9).unwrap(), &model).unwrap();
    let ring = dir.join("ring");
    cmd_synth(&SynthArgs { model, views: 18, step_deg: 20.0, camera: None, out: ring.clone() }).unwrap();
    let run = |threads: usize, name: &str| {
        let out = dir.join(name);
        cmd_bench(&BenchArgs {
            dataset: ring.clone(),
            overrides: vec!["keypoint_count=600".into()],
            out: out.clone(),
            threads: Some(threads),
            ..BenchArgs::default()
        })
        .unwrap();
        std::fs::read(out).unwrap()
    };
    let reports = [run(1, "a.tsv"), run(1, "b.tsv"), run(2, "c.tsv"), run(4, "d.tsv")];
    let same = reports.iter().all(|r| *r == reports[0]);
    outcome(
        same,
        format!("4 runs (threads 1, 1, 2, 4), {} bytes each, identical: {same}", reports[0].len()),
    )
}

fn planted(r: &mut ChaCha8Rng, n: usize, fraction: f64) -> (CorrespondenceSet, Vec<bool>) {
    let inv = motion(r, 3.0).inverse();
    let mut inlier = Vec::with_capacity(n);
    let items = (0..n)
        .map(|i| {
            let x = in_box(r, 5.0);
            let is_in = r.random_range(0.0..1.0) < fraction;
            inlier.push(is_in);
            let y = if is_in { inv.apply_point(&x) } else { in_box(r, 5.0) };
            Correspondence {
                src: point(i, x, Vec3::z()),
                dst: point(i, y, Vec3::z()),
                descriptor_distance: 0.0,
                order: i,
                reliability: None,
            }
        })
        .collect();
    (CorrespondenceSet { items, medd: 0.3 }, inlier)
}

fn reliability_discrimination() -> Outcome {
    let mut r = rng(8);
    let mut wins = 0;
    for _ in 0..100 {
        let (mut set, inlier) = planted(&mut r, 300, 0.3);
        score_reliability(&mut set, 10.0, 4).unwrap();
        let (mut si, mut so, mut ni, mut no) = (0.0, 0.0, 0, 0);
        for c in &set.items {
            let v = c.reliability.unwrap();
            if inlier[c.order] {
                si += v;
                ni += 1;
            } else {
                so += v;
                no += 1;
            }
        }
        if ni > 0 && no > 0 && si / ni as f64 > so / no as f64 {
            wins += 1;
        }
    }
    outcome(wins >= 95, format!("inliers ahead in {wins}/100 trials"))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Check)> = vec![
        ("1 svd pose recovery", Box::new(svd_recovery)),
        ("2 descriptor invariance", Box::new(descriptor_invariance)),
        ("3 histogram mode oracle", Box::new(histogram_oracle)),
        ("4 triplet gate oracle", Box::new(triplet_oracle)),
        ("5 end-to-end ring views", Box::new(end_to_end)),
        ("6 translation rmse", Box::new(translation_rmse)),
        ("7 bench determinism", Box::new(|| bench_determinism(dir.path()))),
        ("8 reliability discrimination", Box::new(reliability_discrimination)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({}) [{:.1?}]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
