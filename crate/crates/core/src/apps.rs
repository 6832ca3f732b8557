//! Uses of detected symmetries: pulling a noisy shape toward exact symmetry
//! and compressing it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extract::SymmetryResult;
use crate::geometry::{reflect_point, NeighborIndex, PointCloud, Vector};
use crate::metrics::{compress, Compressed};
use crate::transform::HoughPlane;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetrizeConfig {
    /// 0 leaves points alone, 1 replaces a point by its pair's symmetric average.
    pub blend: f64,
    pub iterations: usize,
}

impl Default for SymmetrizeConfig {
    fn default() -> Self {
        SymmetrizeConfig {
            blend: 1.0,
            iterations: 3,
        }
    }
}

/// `max_p |reflect(p) - NN(reflect(p))|` over the whole cloud.
pub fn asymmetry_residual(points: &[Vector], dim: usize, plane: &HoughPlane) -> f64 {
    let index = NeighborIndex::new(points, dim);
    points
        .iter()
        .map(|p| index.nearest(&reflect_point(p, plane)).map_or(0.0, |(_, d)| d))
        .fold(0.0, f64::max)
}

/// Moves every point whose mirror image has a correspondent within
/// `support_eps` toward the symmetric average of the pair.
pub fn symmetrize(cloud: &PointCloud, plane: &HoughPlane, cfg: &SymmetrizeConfig, support_eps: f64) -> Result<PointCloud> {
    if !(0.0..=1.0).contains(&cfg.blend) {
        return Err(Error::InvalidConfig("blend must be in [0, 1]".into()));
    }
    let mut points = cloud.points().to_vec();
    for _ in 0..cfg.iterations {
        if cfg.blend == 0.0 {
            break;
        }
        let index = NeighborIndex::new(&points, cloud.dim());
        points = points
            .par_iter()
            .map(|p| match index.nearest(&reflect_point(p, plane)) {
                Some((j, d)) if d < support_eps => {
                    let target = 0.5 * (p + reflect_point(&points[j], plane));
                    p * (1.0 - cfg.blend) + target * cfg.blend
                }
                _ => *p,
            })
            .collect();
    }
    cloud.with_points(points)
}

/// Greedy compression driven by detected (rather than ground-truth)
/// symmetries; the result's snapshots show each stage.
pub fn sequential_compress(cloud: &PointCloud, results: &[SymmetryResult], support_eps: f64) -> Result<Compressed> {
    let syms: Vec<_> = results.iter().map(|r| r.symmetry).collect();
    compress(cloud, &syms, support_eps)
}
