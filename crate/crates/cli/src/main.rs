//! `symmode`: symmetry detection from the command line.

mod manifest;
mod render;

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use symmode::apps::{asymmetry_residual, symmetrize, SymmetrizeConfig};
use symmode::cluster::DbscanConfig;
use symmode::error::Error;
use symmode::extract::{kind_name, ResultFile, SymmetryResult};
use symmode::geodesic::{GeodesicSpace, GeometryMode};
use symmode::geometry::io::{load, save, Format};
use symmode::geometry::shapes::{gen_shape, ShapeKind, ShapeParams};
use symmode::geometry::{add_noise, normalize_with_transform, vector_from_slice, NoiseMode, PointCloud, Vector};
use symmode::langevin::LangevinConfig;
use symmode::meanshift::BaselineExtraction;
use symmode::metrics::{compress, evaluate, GroundTruth};
use symmode::pipeline::{detect, detect_mean_shift, BaselineRunConfig, DetectConfig};
use symmode::symmetry::Symmetry;
use symmode::transform::{SpaceKind, TransformSpace};

use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "symmode", version, about = "Partial symmetry detection in 2D and 3D point clouds")]
struct Cli {
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic shape with its analytic ground truth.
    Gen(GenArgs),
    /// Detect symmetries with annealed Langevin sampling.
    Detect(DetectArgs),
    /// Detect symmetries with the mean-shift baseline.
    Baseline(BaselineArgs),
    /// Score predicted symmetries against ground truth.
    Eval(EvalArgs),
    /// Pull a shape toward exact symmetry about a detected plane.
    Symmetrize(SymmetrizeArgs),
    /// Compress a shape by removing points regenerated by its symmetries.
    Compress(CompressArgs),
    /// Draw a shape, its symmetries and optionally the vote space as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Reflective,
    Translational,
    Rotational,
}

impl From<Kind> for SpaceKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Reflective => SpaceKind::Reflective,
            Kind::Translational => SpaceKind::Translational,
            Kind::Rotational => SpaceKind::Rotational2d,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NoiseArg {
    Isotropic,
    Normal,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// square, regular_ngon, letter_like, cube, cylinder or composite.
    #[arg(long)]
    kind: String,
    /// Gaussian noise as a fraction of the normalized shape size.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Isotropic in 2D and along normals in 3D unless given.
    #[arg(long, value_enum)]
    noise_mode: Option<NoiseArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    points: Option<usize>,
    /// Sides of a regular polygon.
    #[arg(long, default_value_t = 3)]
    sides: usize,
    /// Output cloud (.json keeps the ground truth; .xyz/.obj get a sibling .gt.json).
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Point cloud (.xyz, .obj or .json).
    #[arg(short, long)]
    input: PathBuf,
    /// Expected dimension; inferred from the file when absent.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum, default_value_t = Kind::Reflective)]
    kind: Kind,
    /// Point pairs voting in the transformation space.
    #[arg(long, default_value_t = 50_000)]
    pairs: usize,
    /// Invalid-ball radius; 0.3 in 2D, 0.5 in 3D if unset.
    #[arg(long)]
    k: Option<f64>,
    /// Point association radius for support [default: 0.02 in 2D, 0.05 in 3D].
    #[arg(long)]
    support_eps: Option<f64>,
    /// Use exactly --support-eps instead of raising it to the estimated noise.
    #[arg(long)]
    fixed_eps: bool,
    /// Significance threshold.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Result JSON.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    io: InputArgs,
    /// Langevin walkers.
    #[arg(long, default_value_t = 200)]
    walkers: usize,
    /// Total Langevin steps across all levels.
    #[arg(long, default_value_t = 50_000)]
    steps: usize,
    /// Final kernel size; 0.025 in 2D, 0.08 in 3D if unset.
    #[arg(long)]
    kernel: Option<f64>,
    /// Step size fraction; 0.06 in 2D, 0.02 in 3D if unset.
    #[arg(long)]
    step_size: Option<f64>,
    /// Initial noise scale.
    #[arg(long, default_value_t = 0.5)]
    sigma_max: f64,
    /// Noise levels on the geometric schedule.
    #[arg(long, default_value_t = 10)]
    levels: usize,
    /// Stochasticity multiplier.
    #[arg(long, default_value_t = symmode::langevin::DEFAULT_BETA)]
    beta: f64,
    /// Share of the final level spent on noise-free mean-shift steps.
    #[arg(long, default_value_t = symmode::langevin::DEFAULT_QUENCH)]
    quench: f64,
    /// Most votes scored at any noise level.
    #[arg(long, default_value_t = symmode::langevin::DEFAULT_VOTE_BUDGET)]
    vote_budget: usize,
    /// Ignore the invalid ball when moving walkers (ablation).
    #[arg(long)]
    flat: bool,
    /// Score every vote at every level.
    #[arg(long)]
    exact: bool,
    /// Record every n-th walker position into the trace.
    #[arg(long)]
    trace_every: Option<usize>,
    /// Walker trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Vote space as JSON.
    #[arg(long)]
    space: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Extraction {
    Meanshift,
    Dbscan,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[command(flatten)]
    io: InputArgs,
    /// Mean-shift bandwidth.
    #[arg(long, default_value_t = 0.05)]
    bandwidth: f64,
    /// How modes are pulled out of the votes.
    #[arg(long, value_enum, default_value_t = Extraction::Meanshift)]
    extraction: Extraction,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predicted result JSON.
    #[arg(short, long)]
    pred: PathBuf,
    /// Ground truth: a cloud JSON with gt_symmetries, or a ground-truth JSON.
    #[arg(short, long)]
    gt: PathBuf,
    /// Cloud for association and compression when --gt has no points.
    #[arg(long)]
    cloud: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Match threshold in transformation space.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// [default: 0.02 in 2D, 0.05 in 3D]
    #[arg(long)]
    support_eps: Option<f64>,
    /// [default: 0.3 in 2D, 0.5 in 3D]
    #[arg(long)]
    k: Option<f64>,
    /// Report JSON; printed to stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SymmetrizeArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
    /// Result JSON with detected planes.
    #[arg(short, long)]
    results: PathBuf,
    /// Which result to use, most significant first.
    #[arg(long, default_value_t = 0)]
    plane: usize,
    #[arg(long, default_value_t = 1.0)]
    blend: f64,
    #[arg(long, default_value_t = 3)]
    iterations: usize,
    /// Correspondence radius in normalized units [default: 0.02 in 2D, 0.05 in 3D].
    #[arg(long)]
    support_eps: Option<f64>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompressArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(short, long)]
    results: PathBuf,
    /// [default: 0.02 in 2D, 0.05 in 3D]
    #[arg(long)]
    support_eps: Option<f64>,
    /// Compressed object JSON.
    #[arg(short, long)]
    out: PathBuf,
    /// Also write the point set after each stage as <dir>/stage_<i>.xyz.
    #[arg(long)]
    stages: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(short, long)]
    results: Option<PathBuf>,
    /// Vote space JSON written by `detect --space`.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Walker trace written by `detect --trace`.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Io(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = match &e {
            Error::InvalidConfig(m) => m.clone(),
            other => other.to_string(),
        };
        match e {
            Error::InvalidConfig(_) | Error::UnknownShape(_) | Error::UnsupportedDimension(_) => Failure::Usage(msg),
            Error::Io(_) | Error::Json(_) | Error::Parse { .. } | Error::DimensionMismatch { .. } => Failure::Io(msg),
            _ => Failure::Numeric(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn with_path<T>(path: &Path, r: symmode::error::Result<T>) -> CliResult<T> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Io(m) => Failure::Io(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn format_of(path: &Path) -> CliResult<Format> {
    Format::from_path(path)
        .ok_or_else(|| Failure::Usage(format!("{}: unknown file extension (use .xyz, .obj or .json)", path.display())))
}

fn load_cloud(path: &Path, dim: Option<usize>) -> CliResult<PointCloud> {
    with_path(path, load(path, format_of(path)?, dim))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_results(path: &Path) -> CliResult<(ResultFile, Vec<SymmetryResult>)> {
    let file: ResultFile = serde_json::from_str(&read(path)?).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let results = with_path(path, file.results())?;
    Ok((file, results))
}

fn default_eps(dim: usize) -> f64 {
    if dim == 3 {
        0.05
    } else {
        0.02
    }
}

fn cmd_gen(a: &GenArgs) -> CliResult<()> {
    let kind: ShapeKind = a.kind.parse()?;
    let mut params = ShapeParams::for_kind(kind);
    params.sides = a.sides;
    if let Some(n) = a.points {
        params.num_points = n;
    }
    let clean = gen_shape(kind, &params)?;
    let mode = match a.noise_mode {
        Some(NoiseArg::Isotropic) => NoiseMode::Isotropic,
        Some(NoiseArg::Normal) => NoiseMode::AlongNormal,
        None if kind.dim() == 3 => NoiseMode::AlongNormal,
        None => NoiseMode::Isotropic,
    };
    let cloud = add_noise(&clean, a.noise, mode, a.seed)?;
    let format = format_of(&a.out)?;
    with_path(&a.out, save(&cloud, &a.out, format))?;
    let mut m = RunManifest::new("gen", Some(a.seed), json!({"kind": a.kind, "noise": a.noise, "points": cloud.len()}));
    m.output(&a.out);
    if format != Format::Json {
        let gt_path = a.out.with_extension("gt.json");
        let gt = GroundTruth::analytic(clean.ground_truth().unwrap_or_default().to_vec());
        write(&gt_path, &gt.to_json(cloud.dim()))?;
        m.output(&gt_path);
    }
    m.write_beside(&a.out)?;
    Ok(())
}

fn space_k(a: &InputArgs, dim: usize) -> f64 {
    a.k.unwrap_or(LangevinConfig::default_for(dim).k)
}

fn print_results(results: &[SymmetryResult]) {
    println!("{} symmetries", results.len());
    for (i, r) in results.iter().enumerate() {
        println!("  #{i}: significance {:.3}, {:?}", r.significance, r.symmetry);
    }
}

fn cmd_detect(a: &DetectArgs) -> CliResult<()> {
    let io = &a.io;
    let cloud = load_cloud(&io.input, io.dim)?;
    let dim = cloud.dim();
    let mut cfg = DetectConfig::default_for(dim);
    cfg.kind = io.kind.into();
    cfg.num_pairs = io.pairs;
    let lv = &mut cfg.langevin;
    lv.num_walkers = a.walkers;
    lv.num_levels = a.levels;
    lv.sigma_max = a.sigma_max;
    lv.beta = a.beta;
    lv.quench = a.quench;
    lv.vote_budget = a.vote_budget;
    lv.seed = io.seed;
    lv.k = space_k(io, dim);
    lv.trace_every = a.trace_every;
    if let Some(v) = a.kernel {
        lv.kernel_size = v;
    }
    if let Some(v) = a.step_size {
        lv.step_size = v;
    }
    if a.exact {
        lv.coarse_votes = None;
    }
    if a.steps == 0 {
        return Err(Failure::Usage("steps must be ≥ 1".into()));
    }
    cfg.langevin = cfg.langevin.clone().with_total_steps(a.steps);
    cfg.sync_extract_defaults(dim);
    cfg.extract.tau = io.tau;
    cfg.extract.support_eps = io.support_eps.unwrap_or(default_eps(dim));
    cfg.extract.adaptive_eps = !io.fixed_eps;
    if a.flat {
        cfg.geometry = GeometryMode::Euclidean;
    }
    let det = detect(&cloud, &cfg)?;
    let file = ResultFile::new("langevin", cfg.kind, dim, &det.results);
    write(&io.out, &serde_json::to_string_pretty(&file).expect("results serialize"))?;
    let lv = &cfg.langevin;
    let mut m = RunManifest::new(
        "detect",
        Some(io.seed),
        json!({
            "kind": kind_name(cfg.kind), "dim": dim, "pairs": cfg.num_pairs, "walkers": lv.num_walkers,
            "steps": lv.total_steps(), "levels": lv.num_levels, "kernel": lv.kernel_size, "sigma_max": lv.sigma_max,
            "step_size": lv.step_size, "beta": lv.beta, "quench": lv.quench, "vote_budget": lv.vote_budget,
            "k": lv.k, "exact": a.exact,
            "geometry": if a.flat { "euclidean" } else { "riemannian" },
            "support_eps": cfg.extract.support_eps, "adaptive_eps": cfg.extract.adaptive_eps, "tau": cfg.extract.tau,
            "dbscan_eps": cfg.extract.dbscan.eps, "dbscan_min_pts": cfg.extract.dbscan.min_pts,
        }),
    );
    m.input(&io.input)?;
    m.timings(&det.timings);
    m.output(&io.out);
    if let Some(path) = &a.trace {
        let f = fs::File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(f);
        det.trace.write_jsonl(&mut w, det.space.dim, lv.total_steps())?;
        w.flush()?;
        m.output(path);
    }
    if let Some(path) = &a.space {
        write(path, &det.space.to_json())?;
        m.output(path);
    }
    m.write_beside(&io.out)?;
    print_results(&det.results);
    Ok(())
}

fn cmd_baseline(a: &BaselineArgs) -> CliResult<()> {
    let io = &a.io;
    let cloud = load_cloud(&io.input, io.dim)?;
    let dim = cloud.dim();
    let mut cfg = BaselineRunConfig::default_for(dim, a.bandwidth);
    cfg.kind = io.kind.into();
    cfg.num_pairs = io.pairs;
    cfg.k = space_k(io, dim);
    cfg.seed = io.seed;
    cfg.baseline.extract.tau = io.tau;
    cfg.baseline.extract.support_eps = io.support_eps.unwrap_or(default_eps(dim));
    cfg.baseline.extract.adaptive_eps = !io.fixed_eps;
    if let Extraction::Dbscan = a.extraction {
        cfg.baseline.extraction = BaselineExtraction::Dbscan(DbscanConfig {
            eps: a.bandwidth,
            min_pts: 10,
        });
    }
    let det = detect_mean_shift(&cloud, &cfg)?;
    let file = ResultFile::new("meanshift", cfg.kind, dim, &det.results);
    write(&io.out, &serde_json::to_string_pretty(&file).expect("results serialize"))?;
    let mut m = RunManifest::new(
        "baseline",
        Some(io.seed),
        json!({
            "kind": kind_name(cfg.kind), "dim": dim, "pairs": cfg.num_pairs, "k": cfg.k, "bandwidth": a.bandwidth,
            "extraction": format!("{:?}", a.extraction).to_lowercase(),
            "support_eps": cfg.baseline.extract.support_eps, "adaptive_eps": cfg.baseline.extract.adaptive_eps,
            "tau": cfg.baseline.extract.tau,
        }),
    );
    m.input(&io.input)?;
    m.timings(&det.timings);
    m.output(&io.out);
    m.write_beside(&io.out)?;
    print_results(&det.results);
    Ok(())
}

/// Ground truth from either a cloud file carrying `gt_symmetries` or a plain
/// ground-truth file; the cloud comes along when present.
fn load_ground_truth(path: &Path, dim: Option<usize>) -> CliResult<(Vec<Symmetry>, Option<PointCloud>)> {
    let text = read(path)?;
    if let Ok(gt) = GroundTruth::from_json(&text) {
        return Ok((gt.symmetries, None));
    }
    let cloud = load_cloud(path, dim)?;
    let gt = cloud
        .ground_truth()
        .ok_or_else(|| Failure::Usage(format!("{}: no ground-truth symmetries", path.display())))?
        .to_vec();
    Ok((gt, Some(cloud)))
}

fn cmd_eval(a: &EvalArgs) -> CliResult<()> {
    let (_, results) = load_results(&a.pred)?;
    let pred: Vec<Symmetry> = results.iter().map(|r| r.symmetry).collect();
    let (gt, gt_cloud) = load_ground_truth(&a.gt, a.dim)?;
    let cloud = match (&a.cloud, gt_cloud) {
        (Some(p), _) => load_cloud(p, a.dim)?,
        (None, Some(c)) => c,
        (None, None) => return Err(Failure::Usage("--cloud is required when --gt holds no points".into())),
    };
    let dim = cloud.dim();
    // Scores are computed in the normalized frame the thresholds refer to.
    let (norm, tf) = normalize_with_transform(&cloud)?;
    let pred: Vec<Symmetry> = pred.iter().map(|s| tf.apply_symmetry(s)).collect();
    let gt: Vec<Symmetry> = gt.iter().map(|s| tf.apply_symmetry(s)).collect();
    let k = a.k.unwrap_or(LangevinConfig::default_for(dim).k);
    let geo = GeodesicSpace::riemannian(k, dim)?;
    let eps = a.support_eps.unwrap_or(default_eps(dim));
    let report = evaluate(&pred, &gt, &norm, a.delta, eps, &geo)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    match &a.out {
        Some(path) => {
            write(path, &text)?;
            let mut m = RunManifest::new("eval", None, json!({"delta": a.delta, "support_eps": eps, "k": k}));
            m.input(&a.pred)?;
            m.input(&a.gt)?;
            m.output(path);
            m.write_beside(path)?;
            println!(
                "precision {:.3} recall {:.3} f1 {:.3}",
                report.precision, report.recall, report.f1
            );
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_symmetrize(a: &SymmetrizeArgs) -> CliResult<()> {
    let cloud = load_cloud(&a.input, a.dim)?;
    let dim = cloud.dim();
    let (_, results) = load_results(&a.results)?;
    let r = results
        .get(a.plane)
        .ok_or_else(|| Failure::Usage(format!("plane {} out of range ({} results)", a.plane, results.len())))?;
    let plane = r
        .symmetry
        .as_plane()
        .ok_or_else(|| Failure::Usage("symmetrize needs a reflective result".into()))?;
    let (_, tf) = normalize_with_transform(&cloud)?;
    let eps = a.support_eps.unwrap_or(default_eps(dim)) * tf.scale;
    let cfg = SymmetrizeConfig {
        blend: a.blend,
        iterations: a.iterations,
    };
    let out = symmetrize(&cloud, plane, &cfg, eps)?;
    let before = asymmetry_residual(cloud.points(), dim, plane);
    let after = asymmetry_residual(out.points(), dim, plane);
    with_path(&a.out, save(&out, &a.out, format_of(&a.out)?))?;
    let mut m = RunManifest::new(
        "symmetrize",
        None,
        json!({"plane": a.plane, "blend": a.blend, "iterations": a.iterations, "support_eps": eps,
               "residual_before": before, "residual_after": after}),
    );
    m.input(&a.input)?;
    m.input(&a.results)?;
    m.output(&a.out);
    m.write_beside(&a.out)?;
    println!("asymmetry residual {before:.6} -> {after:.6}");
    Ok(())
}

fn cmd_compress(a: &CompressArgs) -> CliResult<()> {
    let cloud = load_cloud(&a.input, a.dim)?;
    let dim = cloud.dim();
    let (_, results) = load_results(&a.results)?;
    let syms: Vec<Symmetry> = results.iter().map(|r| r.symmetry).collect();
    let (_, tf) = normalize_with_transform(&cloud)?;
    let eps = a.support_eps.unwrap_or(default_eps(dim)) * tf.scale;
    let c = compress(&cloud, &syms, eps)?;
    write(&a.out, &c.to_json())?;
    let mut m = RunManifest::new("compress", None, json!({"support_eps": eps, "ratio": c.ratio(), "stage_sizes": c.stage_sizes()}));
    m.input(&a.input)?;
    m.input(&a.results)?;
    m.output(&a.out);
    if let Some(dir) = &a.stages {
        fs::create_dir_all(dir)?;
        for (i, pts) in c.snapshots().into_iter().enumerate() {
            let path = dir.join(format!("stage_{i}.xyz"));
            let snap = PointCloud::new(dim, pts)?;
            with_path(&path, save(&snap, &path, Format::Xyz))?;
            m.output(&path);
        }
    }
    m.write_beside(&a.out)?;
    println!("ratio {:.4}, stage sizes {:?}", c.ratio(), c.stage_sizes());
    Ok(())
}

/// Walker polylines from a JSON-lines trace, in walker order.
fn load_trace(path: &Path) -> CliResult<Vec<Vec<Vector>>> {
    #[derive(serde::Deserialize)]
    struct Rec {
        walker: usize,
        step: usize,
        x: Vec<f64>,
    }
    let f = fs::File::open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut paths: Vec<Vec<(usize, Vector)>> = Vec::new();
    for (no, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Rec =
            serde_json::from_str(&line).map_err(|e| Failure::Io(format!("{}:{}: {e}", path.display(), no + 1)))?;
        if paths.len() <= rec.walker {
            paths.resize(rec.walker + 1, Vec::new());
        }
        paths[rec.walker].push((rec.step, vector_from_slice(&rec.x)));
    }
    Ok(paths
        .into_iter()
        .map(|mut p| {
            p.sort_by_key(|(s, _)| *s);
            p.into_iter().map(|(_, x)| x).collect()
        })
        .collect())
}

fn cmd_render(a: &RenderArgs) -> CliResult<()> {
    let cloud = load_cloud(&a.input, a.dim)?;
    let syms = match &a.results {
        Some(p) => load_results(p)?.1.into_iter().map(|r| r.symmetry).collect(),
        None => Vec::new(),
    };
    let space = match &a.space {
        Some(p) => Some(with_path(p, TransformSpace::from_json(&read(p)?))?),
        None => None,
    };
    let paths = match &a.trace {
        Some(p) => load_trace(p)?,
        None => Vec::new(),
    };
    let svg = render::render(&render::Scene {
        dim: cloud.dim(),
        points: cloud.points(),
        symmetries: &syms,
        space: space.as_ref(),
        paths: &paths,
    });
    write(&a.out, &svg)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("threads must be ≥ 1".into()));
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Symmetrize(a) => cmd_symmetrize(a),
        Command::Compress(a) => cmd_compress(a),
        Command::Render(a) => cmd_render(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
