//! End-to-end detection: normalize, vote, sample, extract.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::extract::{extract, ExtractConfig, SymmetryResult};
use crate::geodesic::{GeodesicSpace, GeometryMode};
use crate::geometry::{normalize_with_transform, Normalization, PointCloud};
use crate::langevin::{LangevinConfig, Sampler, WalkerTrace};
use crate::meanshift::{detect_baseline, BaselineConfig};
use crate::transform::{
    build_reflective_space, build_rotation_space, build_translation_space, SpaceKind, TransformSpace,
};

pub const DEFAULT_PAIRS: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectConfig {
    pub kind: SpaceKind,
    pub num_pairs: usize,
    pub langevin: LangevinConfig,
    pub extract: ExtractConfig,
    /// Flat geometry ignores the invalid ball (ablation).
    pub geometry: GeometryMode,
}

impl DetectConfig {
    pub fn default_for(dim: usize) -> Self {
        let langevin = LangevinConfig::default_for(dim);
        let extract = ExtractConfig::default_for(dim, langevin.kernel_size, langevin.num_walkers);
        DetectConfig {
            kind: SpaceKind::Reflective,
            num_pairs: DEFAULT_PAIRS,
            langevin,
            extract,
            geometry: GeometryMode::Riemannian,
        }
    }

    /// Re-derives extraction defaults that depend on the Langevin settings.
    pub fn sync_extract_defaults(&mut self, dim: usize) {
        let fresh = ExtractConfig::default_for(dim, self.langevin.kernel_size, self.langevin.num_walkers);
        self.extract.dbscan = fresh.dbscan;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Detection {
    /// Symmetries in the input cloud's frame.
    pub results: Vec<SymmetryResult>,
    pub trace: WalkerTrace,
    /// Votes, in normalized coordinates.
    pub space: TransformSpace,
    pub normalization: Normalization,
    pub timings: Vec<Timing>,
}

struct Stopwatch {
    last: Instant,
    timings: Vec<Timing>,
}

impl Stopwatch {
    fn new() -> Self {
        Stopwatch {
            last: Instant::now(),
            timings: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.timings.push(Timing {
            stage,
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

/// Builds the vote space of the requested kind on a normalized cloud.
pub fn build_space(cloud: &PointCloud, kind: SpaceKind, num_pairs: usize, k: f64, seed: u64) -> Result<TransformSpace> {
    if num_pairs == 0 {
        return Err(Error::InvalidConfig("pairs must be ≥ 1".into()));
    }
    match kind {
        SpaceKind::Reflective => build_reflective_space(cloud, num_pairs, k, seed),
        SpaceKind::Translational => build_translation_space(cloud, num_pairs, seed),
        SpaceKind::Rotational2d => build_rotation_space(cloud, num_pairs, seed),
    }
}

fn geometry_for(space: &TransformSpace, mode: GeometryMode) -> Result<GeodesicSpace> {
    if space.kind == SpaceKind::Reflective && mode == GeometryMode::Riemannian {
        GeodesicSpace::riemannian(space.k, space.dim)
    } else {
        Ok(GeodesicSpace::euclidean(space.dim))
    }
}

fn to_input_frame(results: Vec<SymmetryResult>, tf: &Normalization) -> Vec<SymmetryResult> {
    results
        .into_iter()
        .map(|mut r| {
            r.symmetry = tf.invert_symmetry(&r.symmetry);
            r
        })
        .collect()
}

/// Full Langevin detector.
pub fn detect(cloud: &PointCloud, cfg: &DetectConfig) -> Result<Detection> {
    cfg.langevin.validate()?;
    cfg.extract.validate()?;
    let mut watch = Stopwatch::new();
    let (norm, tf) = normalize_with_transform(cloud)?;
    let space = build_space(&norm, cfg.kind, cfg.num_pairs, cfg.langevin.k, cfg.langevin.seed)?;
    watch.lap("votes");
    let geo = geometry_for(&space, cfg.geometry)?;
    let trace = Sampler::new(&space, geo, &cfg.langevin)?.run()?;
    watch.lap("langevin");
    let results = extract(&trace.final_positions, &space, &norm, &cfg.extract)?;
    watch.lap("extract");
    Ok(Detection {
        results: to_input_frame(results, &tf),
        trace,
        space,
        normalization: tf,
        timings: watch.timings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRunConfig {
    pub kind: SpaceKind,
    pub num_pairs: usize,
    pub k: f64,
    pub seed: u64,
    pub baseline: BaselineConfig,
}

impl BaselineRunConfig {
    pub fn default_for(dim: usize, bandwidth: f64) -> Self {
        BaselineRunConfig {
            kind: SpaceKind::Reflective,
            num_pairs: DEFAULT_PAIRS,
            k: LangevinConfig::default_for(dim).k,
            seed: 0,
            baseline: BaselineConfig::default_for(dim, bandwidth),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineDetection {
    pub results: Vec<SymmetryResult>,
    pub space: TransformSpace,
    pub normalization: Normalization,
    pub timings: Vec<Timing>,
}

/// Mean-shift baseline on the same vote space the Langevin detector uses.
pub fn detect_mean_shift(cloud: &PointCloud, cfg: &BaselineRunConfig) -> Result<BaselineDetection> {
    let mut watch = Stopwatch::new();
    let (norm, tf) = normalize_with_transform(cloud)?;
    let space = build_space(&norm, cfg.kind, cfg.num_pairs, cfg.k, cfg.seed)?;
    watch.lap("votes");
    let results = detect_baseline(&space, &norm, &cfg.baseline)?;
    watch.lap("meanshift");
    Ok(BaselineDetection {
        results: to_input_frame(results, &tf),
        space,
        normalization: tf,
        timings: watch.timings,
    })
}
