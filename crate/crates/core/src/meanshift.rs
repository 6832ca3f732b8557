//! Mean-shift clustering of raw votes, the baseline detector.
//!
//! Runs directly in the embedded space with Euclidean distances, so it is
//! blind to the `(n, 0) = (-n, 0)` identification.

use rayon::prelude::*;

use crate::cluster::{centroids, dbscan, DbscanConfig, Metric};
use crate::error::{Error, Result};
use crate::extract::{score_candidates, ExtractConfig, SymmetryResult};
use crate::geometry::{NeighborIndex, PointCloud, Vector};
use crate::transform::TransformSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    /// Weight at squared distance `d2` for bandwidth `h`.
    pub fn weight(self, d2: f64, h: f64) -> f64 {
        let u = d2 / (h * h);
        match self {
            Kernel::Gaussian => (-u).exp(),
            Kernel::Epanechnikov => (1.0 - u).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanShiftConfig {
    pub bandwidth: f64,
    /// Votes farther than this do not contribute; `None` uses every vote.
    pub neighborhood_radius: Option<f64>,
    pub max_iters: usize,
    /// Stop once an iterate moves less than this.
    pub convergence_tol: f64,
    pub kernel: Kernel,
    /// Trajectories start from at most this many votes.
    pub max_starts: usize,
    /// Converged points closer than this are one mode.
    pub merge_radius: f64,
}

impl MeanShiftConfig {
    /// Gaussian kernel, neighborhood radius `3h`, merge radius `h/2`.
    pub fn with_bandwidth(h: f64) -> Self {
        MeanShiftConfig {
            bandwidth: h,
            neighborhood_radius: Some(3.0 * h),
            max_iters: 500,
            convergence_tol: 1e-5,
            kernel: Kernel::Gaussian,
            max_starts: 2000,
            merge_radius: 0.5 * h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) || !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidConfig("bandwidth and tolerance must be > 0".into()));
        }
        if self.max_starts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidConfig("need at least one start and one iteration".into()));
        }
        Ok(())
    }
}

impl Default for MeanShiftConfig {
    fn default() -> Self {
        Self::with_bandwidth(0.05)
    }
}

/// A density mode with the number of trajectories that reached it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub point: Vector,
    pub count: usize,
}

/// One mean-shift iteration: the kernel-weighted mean of the votes around `x`.
/// Returns `x` unchanged when no vote carries weight.
pub fn mean_shift_step(x: &Vector, votes: &[Vector], index: &NeighborIndex, cfg: &MeanShiftConfig) -> Vector {
    let mut acc = Vector::zeros();
    let mut total = 0.0;
    let mut add = |y: &Vector| {
        let w = cfg.kernel.weight((x - y).norm_squared(), cfg.bandwidth);
        acc += y * w;
        total += w;
    };
    match cfg.neighborhood_radius {
        Some(r) => index.within(x, r).iter().for_each(|&i| add(&votes[i])),
        None => votes.iter().for_each(&mut add),
    }
    if total > 0.0 {
        acc / total
    } else {
        *x
    }
}

/// Runs mean shift from (a subsample of) the votes and merges converged
/// points into modes, most populated first.
pub fn mean_shift(space: &TransformSpace, cfg: &MeanShiftConfig) -> Result<Vec<Mode>> {
    cfg.validate()?;
    if space.is_empty() {
        return Err(Error::EmptyData);
    }
    let votes = &space.samples;
    let index = NeighborIndex::new(votes, space.dim);
    let stride = votes.len().div_ceil(cfg.max_starts);
    let converged: Vec<Vector> = votes
        .par_iter()
        .step_by(stride)
        .map(|start| {
            let mut x = *start;
            for _ in 0..cfg.max_iters {
                let next = mean_shift_step(&x, votes, &index, cfg);
                let moved = (next - x).norm();
                x = next;
                if moved < cfg.convergence_tol {
                    break;
                }
            }
            x
        })
        .collect();
    let groups = dbscan(
        &converged,
        &DbscanConfig {
            eps: cfg.merge_radius,
            min_pts: 1,
        },
        Metric::Euclidean,
        space.dim,
    );
    let points = centroids(&converged, &groups.clusters, Metric::Euclidean);
    let mut modes: Vec<Mode> = points
        .into_iter()
        .zip(&groups.clusters)
        .map(|(point, members)| Mode {
            point,
            count: members.len(),
        })
        .collect();
    modes.sort_by_key(|m| std::cmp::Reverse(m.count));
    Ok(modes)
}

/// How baseline candidates are pulled out of the vote space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineExtraction {
    /// Mean-shift modes reached by at least `min_count` trajectories.
    MeanShift { min_count: usize },
    /// DBSCAN directly on the votes, Euclidean metric.
    Dbscan(DbscanConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub mean_shift: MeanShiftConfig,
    pub extraction: BaselineExtraction,
    pub extract: ExtractConfig,
}

impl BaselineConfig {
    pub fn default_for(dim: usize, bandwidth: f64) -> Self {
        let mut extract = ExtractConfig::default_for(dim, bandwidth, 200);
        extract.dbscan = DbscanConfig {
            eps: bandwidth,
            min_pts: 10,
        };
        BaselineConfig {
            mean_shift: MeanShiftConfig::with_bandwidth(bandwidth),
            extraction: BaselineExtraction::MeanShift { min_count: 10 },
            extract,
        }
    }
}

/// Baseline detection: vote-space clusters, projected back into the valid
/// region, scored by support.
pub fn detect_baseline(space: &TransformSpace, cloud: &PointCloud, cfg: &BaselineConfig) -> Result<Vec<SymmetryResult>> {
    let candidates: Vec<(Vector, usize)> = match cfg.extraction {
        BaselineExtraction::MeanShift { min_count } => mean_shift(space, &cfg.mean_shift)?
            .into_iter()
            .filter(|m| m.count >= min_count)
            .map(|m| (m.point, m.count))
            .collect(),
        BaselineExtraction::Dbscan(db) => {
            let groups = dbscan(&space.samples, &db, Metric::Euclidean, space.dim);
            centroids(&space.samples, &groups.clusters, Metric::Euclidean)
                .into_iter()
                .zip(groups.clusters.iter().map(Vec::len))
                .collect()
        }
    };
    score_candidates(&candidates, space, cloud, &cfg.extract)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::SpaceKind;

    fn space(samples: Vec<Vector>) -> TransformSpace {
        TransformSpace {
            kind: SpaceKind::Reflective,
            k: 0.3,
            dim: 2,
            samples,
        }
    }

    fn cluster(c: Vector, n: usize, s: f64) -> Vec<Vector> {
        (0..n)
            .map(|i| {
                let a = i as f64 * 2.399963;
                let r = s * ((i as f64 + 0.5) / n as f64).sqrt();
                c + Vector::new(r * a.cos(), r * a.sin(), 0.0)
            })
            .collect()
    }

    #[test]
    fn single_cluster_gives_one_mode_at_its_mean() {
        let votes = cluster(Vector::new(0.6, 0.2, 0.0), 80, 0.01);
        let mean = votes.iter().sum::<Vector>() / votes.len() as f64;
        let modes = mean_shift(&space(votes), &MeanShiftConfig::with_bandwidth(0.05)).unwrap();
        assert_eq!(modes.len(), 1);
        assert_eq!(modes[0].count, 80);
        assert!((modes[0].point - mean).norm() < 0.05);
    }

    #[test]
    fn two_clusters_two_modes() {
        let mut votes = cluster(Vector::new(0.6, 0.2, 0.0), 50, 0.01);
        votes.extend(cluster(Vector::new(-0.5, 0.9, 0.0), 50, 0.01));
        let modes = mean_shift(&space(votes), &MeanShiftConfig::with_bandwidth(0.02)).unwrap();
        assert_eq!(modes.len(), 2);
    }

    #[test]
    fn iterates_stay_in_the_hull() {
        let votes = cluster(Vector::new(0.6, 0.2, 0.0), 40, 0.1);
        let index = NeighborIndex::new(&votes, 2);
        let cfg = MeanShiftConfig::with_bandwidth(0.05);
        let (lo, hi) = votes.iter().fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(v.x), h.max(v.x)));
        let x = mean_shift_step(&votes[3], &votes, &index, &cfg);
        assert!(x.x >= lo && x.x <= hi);
    }

    #[test]
    fn epanechnikov_has_compact_support() {
        assert_eq!(Kernel::Epanechnikov.weight(4.0, 1.0), 0.0);
        assert!(Kernel::Epanechnikov.weight(0.25, 1.0) > 0.0);
        assert_eq!(Kernel::Gaussian.weight(0.0, 1.0), 1.0);
    }
}
