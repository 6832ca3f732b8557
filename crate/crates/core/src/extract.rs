//! From converged walkers to scored symmetries.

use rayon::prelude::*;
use std::sync::OnceLock;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::cluster::{centroids, dbscan, DbscanConfig, Metric};
use crate::error::{Error, Result};
use crate::geodesic::GeodesicSpace;
use crate::geometry::{NeighborIndex, PointCloud, Vector};
use crate::symmetry::{Symmetry, SymmetryRecord};
use crate::transform::{decode_rotation, HoughPlane, decode_sample, SpaceKind, TransformSample, TransformSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    pub dbscan: DbscanConfig,
    pub support_eps: f64,
    pub tau: f64,
    /// Radius of the graph whose largest component is reported as support;
    /// `None` uses four times the mean nearest-neighbor spacing.
    pub connect_radius: Option<f64>,
    /// Raise `support_eps` to `NOISE_EPS_FACTOR` times the estimated surface
    /// noise when that is larger.
    pub adaptive_eps: bool,
    /// Correspondence refits applied to each candidate before scoring.
    pub refine_iters: usize,
}

/// Mirror residuals of two independently perturbed points have standard
/// deviation `√2 σ` across the surface; 2.5σ keeps about 92% of them.
pub const NOISE_EPS_FACTOR: f64 = 2.5;

impl ExtractConfig {
    /// DBSCAN radius twice the kernel size, density threshold
    /// `max(5, walkers / 40)`, ε = 0.02 (2D) or 0.05 (3D), τ = 0.1.
    pub fn default_for(dim: usize, kernel_size: f64, num_walkers: usize) -> Self {
        ExtractConfig {
            dbscan: DbscanConfig {
                eps: 2.0 * kernel_size,
                min_pts: (num_walkers / 40).max(5),
            },
            support_eps: if dim == 3 { 0.05 } else { 0.02 },
            tau: 0.1,
            connect_radius: None,
            adaptive_eps: true,
            refine_iters: 30,
        }
    }

    /// Association radius actually used on `ctx`'s cloud.
    pub fn effective_eps(&self, ctx: &SupportContext) -> f64 {
        if self.adaptive_eps {
            self.support_eps.max(NOISE_EPS_FACTOR * ctx.noise())
        } else {
            self.support_eps
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.dbscan.eps > 0.0) || self.dbscan.min_pts < 1 {
            return bad("dbscan needs eps > 0 and min_pts >= 1");
        }
        if !(self.support_eps > 0.0) {
            return bad("support eps must be > 0");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must be in (0, 1]");
        }
        if matches!(self.connect_radius, Some(r) if !(r > 0.0)) {
            return bad("connect radius must be > 0");
        }
        Ok(())
    }
}

/// Points whose image under a symmetry lands on the shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    /// Every associated point.
    pub raw: Vec<usize>,
    /// Largest connected component of `raw`.
    pub component: Vec<usize>,
    pub significance: f64,
    pub raw_proportion: f64,
}

/// A cloud with its spatial index, reused across many support queries.
#[derive(Debug, Clone)]
pub struct SupportContext<'a> {
    cloud: &'a PointCloud,
    index: NeighborIndex,
    connect_radius: f64,
    spacing: f64,
    noise: OnceLock<f64>,
}

impl<'a> SupportContext<'a> {
    pub fn new(cloud: &'a PointCloud, connect_radius: Option<f64>) -> Self {
        let index = cloud.index();
        let spacing = index.mean_spacing();
        let connect_radius = connect_radius.unwrap_or(4.0 * spacing);
        SupportContext {
            cloud,
            index,
            connect_radius,
            spacing,
            noise: OnceLock::new(),
        }
    }

    pub fn connect_radius(&self) -> f64 {
        self.connect_radius
    }

    /// Estimated surface noise of the cloud, computed on first use.
    pub fn noise(&self) -> f64 {
        *self.noise.get_or_init(|| estimate_noise(self.cloud, &self.index))
    }

    /// `(p, q)` pairs for every `p` whose image `S(p)` has a neighbor closer
    /// than `radius`. `q` is a Gaussian average of the samples around the
    /// image rather than the nearest one, which removes most of the offset
    /// along the surface that snapping to a discrete sample would add.
    pub fn correspondences(&self, sym: &Symmetry, radius: f64) -> Vec<(Vector, Vector)> {
        let pts = self.cloud.points();
        let h = self.spacing.max(f64::MIN_POSITIVE);
        pts.iter()
            .filter_map(|p| {
                let image = sym.apply(p);
                let (j, d) = self.index.nearest(&image)?;
                if d >= radius {
                    return None;
                }
                let (mut acc, mut total) = (Vector::zeros(), 0.0);
                for i in self.index.within(&image, d + 2.0 * h) {
                    let w = (-(pts[i] - image).norm_squared() / (h * h)).exp();
                    acc += pts[i] * w;
                    total += w;
                }
                Some((*p, if total > 0.0 { acc / total } else { pts[j] }))
            })
            .collect()
    }

    /// Refits `sym` to its own correspondences: the plane normal follows the
    /// dominant direction of `p - q` and passes through the pair midpoints,
    /// a translation becomes the mean offset. Rotations are returned as is.
    pub fn refine(&self, sym: &Symmetry, radius: f64, iters: usize) -> Symmetry {
        let dim = self.cloud.dim();
        let mut cur = *sym;
        for _ in 0..iters {
            let pairs = self.correspondences(&cur, radius);
            if pairs.len() < dim + 1 {
                break;
            }
            let next = match cur {
                Symmetry::Reflection(plane) => {
                    let mut scatter = Matrix3::zeros();
                    for (p, q) in &pairs {
                        let d = p - q;
                        scatter += d * d.transpose();
                    }
                    if dim == 2 {
                        scatter[(2, 2)] = -1.0;
                    }
                    let eig = scatter.symmetric_eigen();
                    let top = eig.eigenvalues.imax();
                    let mut n: Vector = eig.eigenvectors.column(top).into_owned();
                    if dim == 2 {
                        n.z = 0.0;
                    }
                    if !(n.norm() > 0.0) || eig.eigenvalues[top] <= 0.0 {
                        break;
                    }
                    n.normalize_mut();
                    if n.dot(plane.normal()) < 0.0 {
                        n = -n;
                    }
                    let l = pairs.iter().map(|(p, q)| n.dot(&(0.5 * (p + q)))).sum::<f64>() / pairs.len() as f64;
                    Symmetry::Reflection(HoughPlane::from_normal_offset(n, l))
                }
                Symmetry::Translation(_) => {
                    let v = pairs.iter().map(|(p, q)| q - p).sum::<Vector>() / pairs.len() as f64;
                    Symmetry::Translation(v)
                }
                Symmetry::Rotation(_) => return cur,
            };
            let moved = match (&cur, &next) {
                (Symmetry::Reflection(a), Symmetry::Reflection(b)) => {
                    (a.normal() - b.normal()).norm() + (a.offset() - b.offset()).abs()
                }
                (Symmetry::Translation(a), Symmetry::Translation(b)) => (a - b).norm(),
                _ => 0.0,
            };
            cur = next;
            if moved < 1e-9 {
                break;
            }
        }
        cur
    }

    /// Indices `p` with `|S(p) - NN(S(p))| < eps`.
    pub fn associated(&self, sym: &Symmetry, eps: f64) -> Vec<usize> {
        self.cloud
            .points()
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let image = sym.apply(p);
                self.index.nearest(&image).is_some_and(|(_, d)| d < eps)
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Largest connected component of `members` under the radius graph.
    pub fn largest_component(&self, members: &[usize]) -> Vec<usize> {
        let n = self.cloud.len();
        let mut inside = vec![false; n];
        for &i in members {
            inside[i] = true;
        }
        let mut seen = vec![false; n];
        let mut best: Vec<usize> = Vec::new();
        for &start in members {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut head = 0;
            while head < comp.len() {
                let p = self.cloud.points()[comp[head]];
                head += 1;
                for j in self.index.within(&p, self.connect_radius) {
                    if inside[j] && !seen[j] {
                        seen[j] = true;
                        comp.push(j);
                    }
                }
            }
            if comp.len() > best.len() {
                best = comp;
            }
        }
        best.sort_unstable();
        best
    }

    pub fn support(&self, sym: &Symmetry, eps: f64) -> Support {
        let raw = self.associated(sym, eps);
        let component = self.largest_component(&raw);
        let n = self.cloud.len().max(1) as f64;
        Support {
            significance: component.len() as f64 / n,
            raw_proportion: raw.len() as f64 / n,
            raw,
            component,
        }
    }
}

/// Median over points of the spread normal to the locally fitted line or
/// plane, using neighbors within four mean spacings. Zero for clean samples
/// of smooth curves and surfaces.
pub fn estimate_noise(cloud: &PointCloud, index: &NeighborIndex) -> f64 {
    let dim = cloud.dim();
    let radius = 4.0 * index.mean_spacing();
    let pts = cloud.points();
    let mut spreads: Vec<f64> = pts
        .par_iter()
        .filter_map(|p| {
            let nb = index.within(p, radius);
            if nb.len() < dim + 2 {
                return None;
            }
            let mean = nb.iter().map(|&j| pts[j]).sum::<Vector>() / nb.len() as f64;
            let mut cov = Matrix3::zeros();
            for &j in &nb {
                let d = pts[j] - mean;
                cov += d * d.transpose();
            }
            cov /= nb.len() as f64;
            let eig = cov.symmetric_eigen().eigenvalues;
            let mut vals: Vec<f64> = eig.iter().copied().collect();
            vals.sort_by(f64::total_cmp);
            // In 2D the padded z row contributes the extra zero eigenvalue.
            let smallest = if dim == 2 { vals[1] } else { vals[0] };
            Some(smallest.max(0.0).sqrt())
        })
        .collect();
    if spreads.is_empty() {
        return 0.0;
    }
    let mid = spreads.len() / 2;
    *spreads.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// Support of `sym` on `cloud` and its significance `|component| / |S|`.
pub fn compute_support(sym: &Symmetry, cloud: &PointCloud, support_eps: f64, connect_radius: Option<f64>) -> Support {
    SupportContext::new(cloud, connect_radius).support(sym, support_eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryResult {
    pub symmetry: Symmetry,
    pub support: Vec<usize>,
    pub significance: f64,
    pub raw_support: Vec<usize>,
    pub raw_significance: f64,
    /// Walkers (or trajectories) in the cluster that produced this result.
    pub cluster_size: usize,
}

/// Decodes a transform-space point according to the space kind.
pub fn decode_point(x: &Vector, kind: SpaceKind, k: f64) -> Result<Symmetry> {
    Ok(match kind {
        SpaceKind::Reflective => Symmetry::Reflection(decode_sample(&TransformSample { embed: *x, k })?),
        SpaceKind::Translational => Symmetry::Translation(*x),
        SpaceKind::Rotational2d => Symmetry::Rotation(decode_rotation(x)),
    })
}

/// Metric for clustering in a vote space of the given kind.
pub fn space_metric(space: &TransformSpace) -> Result<Metric> {
    Ok(match space.kind {
        SpaceKind::Reflective => Metric::Geodesic(GeodesicSpace::riemannian(space.k, space.dim)?),
        _ => Metric::Euclidean,
    })
}

/// Decodes candidate transform points, scores them on `cloud` and keeps those
/// with significance above `tau`, most significant first.
pub fn score_candidates(
    candidates: &[(Vector, usize)],
    space: &TransformSpace,
    cloud: &PointCloud,
    cfg: &ExtractConfig,
) -> Result<Vec<SymmetryResult>> {
    cfg.validate()?;
    let ctx = SupportContext::new(cloud, cfg.connect_radius);
    let decoded: Vec<(Symmetry, usize)> = candidates
        .iter()
        .filter(|(x, _)| space.kind != SpaceKind::Reflective || x.norm() > 0.0)
        .map(|(x, size)| {
            // Flat-space averaging can land inside the invalid ball; the
            // nearest valid point encodes the same normal.
            let r = x.norm();
            let x = if space.kind == SpaceKind::Reflective && r < space.k {
                x / r * space.k
            } else {
                *x
            };
            Ok((decode_point(&x, space.kind, space.k)?, *size))
        })
        .collect::<Result<_>>()?;
    let eps = cfg.effective_eps(&ctx);
    let mut results: Vec<SymmetryResult> = decoded
        .par_iter()
        .map(|(sym, size)| {
            let sym = ctx.refine(sym, REFINE_RADIUS_FACTOR * eps, cfg.refine_iters);
            let s = ctx.support(&sym, eps);
            SymmetryResult {
                symmetry: sym,
                support: s.component,
                significance: s.significance,
                raw_support: s.raw,
                raw_significance: s.raw_proportion,
                cluster_size: *size,
            }
        })
        .filter(|r| r.significance > cfg.tau)
        .collect();
    results.sort_by(|a, b| {
        b.significance
            .total_cmp(&a.significance)
            .then(b.cluster_size.cmp(&a.cluster_size))
    });
    // Separate candidates can refit onto the same symmetry.
    let mut kept: Vec<SymmetryResult> = Vec::with_capacity(results.len());
    for r in results {
        match kept.iter_mut().find(|k| same_symmetry(&k.symmetry, &r.symmetry, DUPLICATE_TOL)) {
            Some(k) => k.cluster_size += r.cluster_size,
            None => kept.push(r),
        }
    }
    Ok(kept)
}

/// Correspondences for refitting are searched within this many support radii.
pub const REFINE_RADIUS_FACTOR: f64 = 3.0;
const DUPLICATE_TOL: f64 = 0.01;

/// Parameter-space closeness; planes compare up to the sign of `(n, l)`.
pub fn same_symmetry(a: &Symmetry, b: &Symmetry, tol: f64) -> bool {
    match (a, b) {
        (Symmetry::Reflection(p), Symmetry::Reflection(q)) => {
            let same = (p.normal() - q.normal()).norm() + (p.offset() - q.offset()).abs();
            let flipped = (p.normal() + q.normal()).norm() + (p.offset() + q.offset()).abs();
            same.min(flipped) < tol
        }
        (Symmetry::Translation(u), Symmetry::Translation(v)) => (u - v).norm() < tol,
        (Symmetry::Rotation(r), Symmetry::Rotation(t)) => {
            (r.center - t.center).norm() + (r.axis - t.axis).norm() + (r.angle - t.angle).abs() < tol
        }
        _ => false,
    }
}

/// DBSCAN over final walker positions, then centroids, decoding and
/// significance filtering.
pub fn extract(
    positions: &[Vector],
    space: &TransformSpace,
    cloud: &PointCloud,
    cfg: &ExtractConfig,
) -> Result<Vec<SymmetryResult>> {
    cfg.validate()?;
    let metric = space_metric(space)?;
    let clustering = dbscan(positions, &cfg.dbscan, metric, space.dim);
    let cents = centroids(positions, &clustering.clusters, metric);
    let candidates: Vec<(Vector, usize)> = cents
        .into_iter()
        .zip(clustering.clusters.iter().map(Vec::len))
        .collect();
    score_candidates(&candidates, space, cloud, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    #[serde(flatten)]
    pub symmetry: SymmetryRecord,
    pub significance: f64,
    #[serde(default)]
    pub support: Vec<usize>,
    #[serde(default)]
    pub raw_significance: f64,
    #[serde(default)]
    pub raw_support: Vec<usize>,
    #[serde(default)]
    pub cluster_size: usize,
}

/// Detector output, shared by the Langevin and mean-shift pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub method: String,
    pub kind: SpaceKind,
    #[serde(default)]
    pub dim: Option<usize>,
    pub symmetries: Vec<ResultRecord>,
}

impl ResultFile {
    pub fn new(method: &str, kind: SpaceKind, dim: usize, results: &[SymmetryResult]) -> Self {
        ResultFile {
            method: method.to_string(),
            kind,
            dim: Some(dim),
            symmetries: results
                .iter()
                .map(|r| ResultRecord {
                    symmetry: r.symmetry.to_record(dim),
                    significance: r.significance,
                    support: r.support.clone(),
                    raw_significance: r.raw_significance,
                    raw_support: r.raw_support.clone(),
                    cluster_size: r.cluster_size,
                })
                .collect(),
        }
    }

    pub fn results(&self) -> Result<Vec<SymmetryResult>> {
        self.symmetries
            .iter()
            .map(|r| {
                let mut rec = r.symmetry.clone();
                if rec.kind.is_none() {
                    rec.kind = Some(kind_name(self.kind).to_string());
                }
                Ok(SymmetryResult {
                    symmetry: rec.to_symmetry()?,
                    support: r.support.clone(),
                    significance: r.significance,
                    raw_support: r.raw_support.clone(),
                    raw_significance: r.raw_significance,
                    cluster_size: r.cluster_size,
                })
            })
            .collect()
    }

    pub fn symmetries(&self) -> Result<Vec<Symmetry>> {
        Ok(self.results()?.into_iter().map(|r| r.symmetry).collect())
    }
}

pub fn kind_name(kind: SpaceKind) -> &'static str {
    match kind {
        SpaceKind::Reflective => "reflective",
        SpaceKind::Translational => "translational",
        SpaceKind::Rotational2d => "rotational",
    }
}
