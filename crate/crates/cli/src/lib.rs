//! Command implementations behind the `tripreg` binary.
//!
//! Each `cmd_*` function does the work of one subcommand and returns a
//! [`CliError`] carrying the process exit code on failure, so the binary
//! stays a thin argument parser.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use tripreg::eval::fixtures::Fixture;
use tripreg::eval::ring::view_path;
use tripreg::eval::{generate_ring_views, rmse, RingConfig, RingDataset};
use tripreg::io::dump::write_vote_dump;
use tripreg::io::{read_ply, write_ply, write_transform, TransformRecord};
use tripreg::pipeline::StageTimings;
use tripreg::{compute_medd, register, Error, RegistrationConfig, RigidTransform, Stage, Vec3};

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const PARSE: i32 = 4;
    pub const CONFIG: i32 = 5;
    pub const PIPELINE: i32 = 6;
}

/// A failed command: exit code plus a one-line message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: exit::USAGE,
            message: format!("usage: {}", msg.into()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } => exit::IO,
            Error::Parse { .. } => exit::PARSE,
            Error::Config(_) => exit::CONFIG,
            _ => exit::PIPELINE,
        };
        let label = e.stage().map_or("input".to_string(), |s| s.to_string());
        // keep the message on one line whatever the source error contains
        let text = e.to_string().replace('\n', " ");
        let text = match e.stage() {
            Some(s) => text
                .strip_prefix(&format!("{s}: "))
                .map(str::to_string)
                .unwrap_or(text),
            None => text,
        };
        CliError {
            code,
            message: format!("[{label}] {text}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Defaults, then the config file, then `key=value` overrides.
pub fn load_config(file: Option<&Path>, overrides: &[String]) -> CliResult<RegistrationConfig> {
    let mut cfg = match file {
        Some(p) => RegistrationConfig::from_file(p)?,
        None => RegistrationConfig::default(),
    };
    for item in overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects key=value, got '{item}'")))?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn thread_pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError {
        code: exit::USAGE,
        message: format!("cannot start thread pool: {e}"),
    })
}

#[derive(Debug, Clone, Default)]
pub struct RegisterArgs {
    pub src: PathBuf,
    pub dst: PathBuf,
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub out: PathBuf,
    pub dump_votes: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RegisterOutcome {
    pub transform: RigidTransform,
    pub summary: String,
}

/// Registers `dst` (Y) onto `src` (X) and writes the Y→X transform.
pub fn cmd_register(args: &RegisterArgs) -> CliResult<RegisterOutcome> {
    let cfg = load_config(args.config.as_deref(), &args.overrides)?;
    let x = read_ply(&args.src)?;
    let y = read_ply(&args.dst)?;
    let result = thread_pool(args.threads)?.install(|| register(&x, &y, &cfg))?;
    write_transform(&TransformRecord(result.transform), &args.out)?;
    if let Some(dir) = &args.dump_votes {
        write_vote_dump(dir, &result.votes.rotations, &result.votes.translations, &result.pose)?;
    }
    let d = &result.diagnostics;
    let summary = format!(
        "medD {} | correspondences {} | triplets {} ({:?}) | degenerate triplets {} | support {:.3} | {:.2?}",
        d.medd,
        d.correspondences,
        d.triplets,
        d.termination,
        d.degenerate_triplets,
        d.support,
        d.timings.total()
    );
    Ok(RegisterOutcome {
        transform: result.transform,
        summary,
    })
}

#[derive(Debug, Clone, Default)]
pub struct BenchArgs {
    pub dataset: PathBuf,
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub out: PathBuf,
    /// Use the ground truth as the estimate instead of registering.
    pub dry_run: bool,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub model: String,
    pub x_view: usize,
    pub y_view: usize,
    pub medd: f64,
    /// `None` when registration failed; the error goes in `status`.
    pub rotation_error_deg: Option<f64>,
    pub rmse: Option<f64>,
    pub status: String,
    pub timings: StageTimings,
}

impl BenchRow {
    pub fn rmse_medd(&self) -> Option<f64> {
        self.rmse.map(|r| r / self.medd)
    }
}

/// Minimum, median, mean and maximum of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
        Some(Summary {
            min: s[0],
            median,
            mean: values.iter().sum::<f64>() / n as f64,
            max: s[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

pub const REPORT_HEADER: &str = "model\tx_view\ty_view\tmedd\trotation_error_deg\trmse\trmse_medd\tstatus";

const TIMED_STAGES: [Stage; 8] = [
    Stage::Normals,
    Stage::Scale,
    Stage::Keypoints,
    Stage::Descriptors,
    Stage::Correspondences,
    Stage::Reliability,
    Stage::Triplets,
    Stage::Voting,
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl BenchReport {
    pub fn rmse_summary(&self) -> Option<Summary> {
        Summary::of(&self.rows.iter().filter_map(|r| r.rmse).collect::<Vec<_>>())
    }

    pub fn rmse_medd_summary(&self) -> Option<Summary> {
        Summary::of(&self.rows.iter().filter_map(|r| r.rmse_medd()).collect::<Vec<_>>())
    }

    pub fn time_summary(&self) -> Option<Summary> {
        Summary::of(
            &self
                .rows
                .iter()
                .map(|r| r.timings.total().as_secs_f64())
                .collect::<Vec<_>>(),
        )
    }

    /// The report table. Contains nothing timing-dependent, so repeated runs
    /// produce identical bytes.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{REPORT_HEADER}");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.model,
                r.x_view,
                r.y_view,
                r.medd,
                opt(r.rotation_error_deg),
                opt(r.rmse),
                opt(r.rmse_medd()),
                r.status
            );
        }
        let ok = self.rows.iter().filter(|r| r.rmse.is_some()).count();
        let _ = writeln!(s, "# pairs\t{}\tregistered\t{ok}", self.rows.len());
        for (name, summary) in [("rmse", self.rmse_summary()), ("rmse_medd", self.rmse_medd_summary())] {
            if let Some(m) = summary {
                let _ = writeln!(s, "# {name}\tmin\t{}\tmedian\t{}\tmean\t{}\tmax\t{}", m.min, m.median, m.mean, m.max);
            }
        }
        s
    }

    /// Per-pair stage timings in seconds, with a summary line.
    pub fn timings_tsv(&self) -> String {
        let mut s = String::from("x_view\ty_view");
        for st in TIMED_STAGES {
            let _ = write!(s, "\t{st}");
        }
        s.push_str("\ttotal\n");
        for r in &self.rows {
            let _ = write!(s, "{}\t{}", r.x_view, r.y_view);
            for st in TIMED_STAGES {
                let _ = write!(s, "\t{:.6}", r.timings.get(st).as_secs_f64());
            }
            let _ = writeln!(s, "\t{:.6}", r.timings.total().as_secs_f64());
        }
        if let Some(m) = self.time_summary() {
            let _ = writeln!(s, "# seconds\tmin\t{:.6}\tmedian\t{:.6}\tmean\t{:.6}\tmax\t{:.6}", m.min, m.median, m.mean, m.max);
        }
        s
    }
}

/// The timing sidecar written next to a bench report.
pub fn timings_path(report: &Path) -> PathBuf {
    let mut name = report.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".timings.tsv");
    report.with_file_name(name)
}

fn bench_pair(ds: &RingDataset, i: usize, j: usize, cfg: &RegistrationConfig, dry_run: bool) -> BenchRow {
    let (x, y) = (&ds.views[i], &ds.views[j]);
    let gt = ds.relative(i, j);
    let mut row = BenchRow {
        model: ds.model.clone(),
        x_view: i,
        y_view: j,
        medd: f64::NAN,
        rotation_error_deg: None,
        rmse: None,
        status: "ok".to_string(),
        timings: StageTimings::default(),
    };
    let estimate = if dry_run {
        let start = Instant::now();
        match compute_medd(x, y) {
            Ok(m) => row.medd = m,
            Err(e) => row.status = CliError::from(e).message,
        }
        row.timings = StageTimings(vec![(Stage::Scale, start.elapsed())]);
        Some(gt)
    } else {
        match register(x, y, cfg) {
            Ok(r) => {
                row.medd = r.diagnostics.medd;
                row.timings = r.diagnostics.timings;
                Some(r.transform)
            }
            Err(e) => {
                if let Ok(m) = compute_medd(x, y) {
                    row.medd = m;
                }
                row.status = format!("failed {}", CliError::from(e).message).replace('\t', " ");
                None
            }
        }
    };
    if let Some(est) = estimate {
        row.rotation_error_deg = Some(est.rotation_error(&gt).to_degrees());
        match rmse(x, y, &TransformRecord(est), &TransformRecord(gt)) {
            Ok(v) => row.rmse = Some(v),
            Err(e) => row.status = format!("failed {}", CliError::from(e).message).replace('\t', " "),
        }
    }
    row
}

/// Registers every adjacent pair of a ring dataset and writes the report
/// plus a `.timings.tsv` sidecar.
pub fn cmd_bench(args: &BenchArgs) -> CliResult<BenchReport> {
    let cfg = load_config(args.config.as_deref(), &args.overrides)?;
    let ds = RingDataset::read(&args.dataset)?;
    let pairs = ds.pairs();
    let rows: Vec<BenchRow> = thread_pool(args.threads)?.install(|| {
        pairs
            .par_iter()
            .map(|&(i, j)| bench_pair(&ds, i, j, &cfg, args.dry_run))
            .collect()
    });
    let report = BenchReport { rows };
    write_text(&args.out, &report.to_tsv())?;
    write_text(&timings_path(&args.out), &report.timings_tsv())?;
    Ok(report)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::from(Error::Io { path: dir.into(), source: e }))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::from(Error::Io { path: path.into(), source: e }))
}

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub model: PathBuf,
    pub views: usize,
    pub step_deg: f64,
    pub camera: Option<Vec3>,
    pub out: PathBuf,
}

/// Renders a ring dataset from a model PLY into `out`.
pub fn cmd_synth(args: &SynthArgs) -> CliResult<RingDataset> {
    let cfg = RingConfig {
        views: args.views,
        step_deg: args.step_deg,
        camera: args.camera,
        ..RingConfig::default()
    };
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let model = read_ply(&args.model)?;
    let name = args
        .model
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();
    let ds = generate_ring_views(&model, &name, &cfg)?;
    ds.write(&args.out)?;
    write_ply(&model, args.out.join("model.ply"))?;
    Ok(ds)
}

/// Writes a synthetic model to `out`.
pub fn cmd_fixture(kind: &str, points: usize, seed: u64, out: &Path) -> CliResult<()> {
    let fixture = Fixture::from_name(kind).ok_or_else(|| {
        let names: Vec<&str> = Fixture::ALL.iter().map(|f| f.name()).collect();
        CliError::usage(format!("unknown fixture '{kind}' (expected one of: {})", names.join(", ")))
    })?;
    let cloud = fixture.build(points, seed)?;
    write_ply(&cloud, out)?;
    Ok(())
}

/// Parses `x,y,z`.
pub fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad coordinate '{t}'")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected x,y,z, got '{s}'")),
    }
}

/// Every view and ground-truth file a ring of `views` views keeps in `dir`.
pub fn dataset_files(dir: &Path, views: usize) -> Vec<PathBuf> {
    (0..views)
        .flat_map(|i| [view_path(dir, i, "ply"), view_path(dir, i, "gt")])
        .collect()
}
