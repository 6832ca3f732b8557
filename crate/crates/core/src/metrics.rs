//! Scoring detected symmetries against ground truth, association and
//! symmetry-driven compression.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{centroids, dbscan, DbscanConfig, Metric};
use crate::error::{Error, Result};
use crate::geodesic::GeodesicSpace;
use crate::geometry::{chamfer_points, NeighborIndex, PointCloud, Vector};
use crate::symmetry::{Symmetry, SymmetryRecord};
use crate::transform::{embed_plane, embed_rotation, pair_to_plane, HoughPlane};
use crate::extract::SupportContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GtSource {
    Annotated,
    Analytic,
    Proposed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub symmetries: Vec<Symmetry>,
    pub source: GtSource,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthFile {
    symmetries: Vec<SymmetryRecord>,
    source: GtSource,
}

impl GroundTruth {
    pub fn analytic(symmetries: Vec<Symmetry>) -> Self {
        GroundTruth {
            symmetries,
            source: GtSource::Analytic,
        }
    }

    pub fn to_json(&self, dim: usize) -> String {
        let file = GroundTruthFile {
            symmetries: self.symmetries.iter().map(|s| s.to_record(dim)).collect(),
            source: self.source,
        };
        serde_json::to_string_pretty(&file).expect("ground truth serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GroundTruthFile = serde_json::from_str(text)?;
        Ok(GroundTruth {
            symmetries: file
                .symmetries
                .iter()
                .map(SymmetryRecord::to_symmetry)
                .collect::<Result<_>>()?,
            source: file.source,
        })
    }
}

/// Distance between two symmetries of the same kind: the transform-space
/// geodesic between plane embeddings, the Euclidean distance between
/// translation vectors, or between rotation embeddings with the angle taken
/// modulo a full turn. Symmetries of different kinds are infinitely apart.
pub fn symmetry_distance(a: &Symmetry, b: &Symmetry, geo: &GeodesicSpace) -> f64 {
    match (a, b) {
        (Symmetry::Reflection(p), Symmetry::Reflection(q)) => {
            let (x, y) = (embed_plane(p, geo.k()).embed, embed_plane(q, geo.k()).embed);
            geo.distance_unchecked(&x, &y)
        }
        (Symmetry::Translation(u), Symmetry::Translation(v)) => (u - v).norm(),
        (Symmetry::Rotation(r), Symmetry::Rotation(s)) => {
            let (x, y) = (embed_rotation(r), embed_rotation(s));
            let mut diff = x - y;
            diff.z = diff.z.rem_euclid(2.0);
            diff.z = diff.z.min(2.0 - diff.z);
            diff.norm()
        }
        _ => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub pred: usize,
    pub gt: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matches: Vec<Match>,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Greedy one-to-one matching, closest pairs first; a pair matches when its
/// distance is at most `delta`. Precision is 0 for an empty prediction.
pub fn match_f1(pred: &[Symmetry], gt: &[Symmetry], delta: f64, geo: &GeodesicSpace) -> Result<MatchReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig("delta must be > 0".into()));
    }
    let mut pairs: Vec<Match> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            let d = symmetry_distance(p, g, geo);
            if d <= delta {
                pairs.push(Match {
                    pred: i,
                    gt: j,
                    distance: d,
                });
            }
        }
    }
    pairs.sort_by(|a, b| a.distance.total_cmp(&b.distance).then((a.pred, a.gt).cmp(&(b.pred, b.gt))));
    let (mut used_p, mut used_g) = (vec![false; pred.len()], vec![false; gt.len()]);
    let mut matches = Vec::new();
    for m in pairs {
        if !used_p[m.pred] && !used_g[m.gt] {
            used_p[m.pred] = true;
            used_g[m.gt] = true;
            matches.push(m);
        }
    }
    let hits = matches.len() as f64;
    let precision = if pred.is_empty() { 0.0 } else { hits / pred.len() as f64 };
    let recall = if gt.is_empty() { 0.0 } else { hits / gt.len() as f64 };
    Ok(MatchReport {
        precision,
        recall,
        f1: f1_score(precision, recall),
        matches,
    })
}

/// Mean fraction of points associated with each predicted symmetry; 0 for
/// an empty prediction.
pub fn association(pred: &[Symmetry], cloud: &PointCloud, support_eps: f64) -> f64 {
    if pred.is_empty() || cloud.is_empty() {
        return 0.0;
    }
    let ctx = SupportContext::new(cloud, None);
    let n = cloud.len() as f64;
    let total: f64 = pred
        .par_iter()
        .map(|s| ctx.associated(s, support_eps).len() as f64 / n)
        .sum();
    total / pred.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub association: f64,
    pub compression_ratio: f64,
    pub delta: f64,
    pub matches: Vec<Match>,
}

/// Full evaluation of a prediction against ground truth on `cloud`.
pub fn evaluate(
    pred: &[Symmetry],
    gt: &[Symmetry],
    cloud: &PointCloud,
    delta: f64,
    support_eps: f64,
    geo: &GeodesicSpace,
) -> Result<EvalReport> {
    let m = match_f1(pred, gt, delta, geo)?;
    Ok(EvalReport {
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        association: association(pred, cloud, support_eps),
        compression_ratio: compress(cloud, pred, support_eps)?.ratio(),
        delta,
        matches: m.matches,
    })
}

/// One greedy compression step: `symmetry` maps each `(source, removed)`
/// pair's source onto the removed point (indices into the points remaining
/// before this stage).
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub symmetry: Symmetry,
    pub pairs: Vec<(usize, usize)>,
    /// Points left after this stage.
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compressed {
    pub dim: usize,
    pub original_len: usize,
    pub points: Vec<Vector>,
    pub stages: Vec<Stage>,
}

impl Compressed {
    pub fn original_bytes(&self) -> usize {
        self.original_len * self.dim * 8
    }

    /// Remaining coordinates plus one `(d + 2)`-float record per used symmetry.
    pub fn compressed_bytes(&self) -> usize {
        self.points.len() * self.dim * 8 + self.stages.len() * (self.dim + 2) * 8
    }

    pub fn ratio(&self) -> f64 {
        if self.original_len == 0 {
            return 1.0;
        }
        self.compressed_bytes() as f64 / self.original_bytes() as f64
    }

    /// Replays the stages in reverse, regenerating each removed point from its
    /// source.
    pub fn decompress(&self) -> Vec<Vector> {
        let mut points = self.points.clone();
        for stage in self.stages.iter().rev() {
            let before = points.len() + stage.pairs.len();
            let mut slots: Vec<Option<Vector>> = vec![None; before];
            let removed: std::collections::HashSet<usize> = stage.pairs.iter().map(|p| p.1).collect();
            let mut kept = points.iter();
            for (i, slot) in slots.iter_mut().enumerate() {
                if !removed.contains(&i) {
                    *slot = kept.next().copied();
                }
            }
            for &(src, dst) in &stage.pairs {
                let p = slots[src].expect("sources are kept");
                slots[dst] = Some(stage.symmetry.apply(&p));
            }
            points = slots.into_iter().map(|s| s.expect("every slot filled")).collect();
        }
        points
    }

    /// Point counts after each stage, starting with the original.
    pub fn stage_sizes(&self) -> Vec<usize> {
        std::iter::once(self.original_len)
            .chain(self.stages.iter().map(|s| s.remaining))
            .collect()
    }

    /// Point sets after each stage, starting with the original.
    pub fn snapshots(&self) -> Vec<Vec<Vector>> {
        let mut out = vec![self.decompress()];
        let mut partial = self.clone();
        for i in 0..self.stages.len() {
            partial.stages = self.stages[i + 1..].to_vec();
            out.push(partial.decompress());
        }
        out.pop();
        out.push(self.points.clone());
        out
    }

    pub fn to_json(&self) -> String {
        let file = CompressedFile {
            dim: self.dim,
            original_len: self.original_len,
            points: self.points.iter().map(|p| crate::geometry::to_coords(p, self.dim)).collect(),
            planes: self.stages.iter().map(|s| s.symmetry.to_record(self.dim)).collect(),
            order: (0..self.stages.len()).collect(),
            pairs: self.stages.iter().map(|s| s.pairs.clone()).collect(),
            ratio: self.ratio(),
        };
        serde_json::to_string(&file).expect("compressed object serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CompressedFile = serde_json::from_str(text)?;
        let points: Vec<Vector> = file.points.iter().map(|p| crate::geometry::vector_from_slice(p)).collect();
        let mut remaining = points.len() + file.pairs.iter().map(Vec::len).sum::<usize>();
        let mut stages = Vec::new();
        for &i in &file.order {
            let (rec, pairs) = file
                .planes
                .get(i)
                .zip(file.pairs.get(i))
                .ok_or_else(|| Error::InvalidConfig(format!("stage {i} missing")))?;
            remaining -= pairs.len();
            stages.push(Stage {
                symmetry: rec.to_symmetry()?,
                pairs: pairs.clone(),
                remaining,
            });
        }
        Ok(Compressed {
            dim: file.dim,
            original_len: file.original_len,
            points,
            stages,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CompressedFile {
    dim: usize,
    original_len: usize,
    points: Vec<Vec<f64>>,
    planes: Vec<SymmetryRecord>,
    order: Vec<usize>,
    pairs: Vec<Vec<(usize, usize)>>,
    ratio: f64,
}

/// Whether `p` is a source under `sym`: the positive side of a plane, every
/// point for other kinds.
fn is_source_side(sym: &Symmetry, p: &Vector) -> bool {
    match sym {
        Symmetry::Reflection(plane) => plane.signed_distance(p) > 0.0,
        _ => true,
    }
}

/// Pairs `(source, removed)` that `sym` would remove from `points`.
fn removal_pairs(points: &[Vector], index: &NeighborIndex, sym: &Symmetry, eps: f64) -> Vec<(usize, usize)> {
    let n = points.len();
    let mut role = vec![0u8; n]; // 1 = source, 2 = removed
    let mut pairs = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if role[i] != 0 || !is_source_side(sym, p) {
            continue;
        }
        let image = sym.apply(p);
        let Some((j, d)) = index.nearest_where(&image, |j| j != i && role[j] == 0) else {
            continue;
        };
        if d < eps && !(matches!(sym, Symmetry::Reflection(_)) && is_source_side(sym, &points[j])) {
            role[i] = 1;
            role[j] = 2;
            pairs.push((i, j));
        }
    }
    pairs
}

/// Greedy symmetry compression: repeatedly applies the symmetry that removes
/// the most points, while the removal saves more than one symmetry record
/// costs. Each symmetry is used at most once.
pub fn compress(cloud: &PointCloud, pred: &[Symmetry], support_eps: f64) -> Result<Compressed> {
    if !(support_eps > 0.0) {
        return Err(Error::InvalidConfig("support eps must be > 0".into()));
    }
    let dim = cloud.dim();
    let mut points = cloud.points().to_vec();
    let mut available: Vec<Symmetry> = pred.to_vec();
    let mut stages = Vec::new();
    while !available.is_empty() && !points.is_empty() {
        let index = NeighborIndex::new(&points, dim);
        let candidates: Vec<Vec<(usize, usize)>> = available
            .par_iter()
            .map(|s| removal_pairs(&points, &index, s, support_eps))
            .collect();
        let (best, pairs) = candidates
            .into_iter()
            .enumerate()
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
            .expect("non-empty");
        if pairs.len() * dim <= dim + 2 {
            break;
        }
        let symmetry = available.remove(best);
        let mut removed = vec![false; points.len()];
        for &(_, j) in &pairs {
            removed[j] = true;
        }
        points = points
            .iter()
            .zip(&removed)
            .filter(|(_, &r)| !r)
            .map(|(p, _)| *p)
            .collect();
        stages.push(Stage {
            symmetry,
            pairs,
            remaining: points.len(),
        });
    }
    Ok(Compressed {
        dim,
        original_len: cloud.len(),
        points,
        stages,
    })
}

/// Chamfer distance between a decompressed object and the original cloud.
pub fn roundtrip_chamfer(c: &Compressed, cloud: &PointCloud) -> Result<f64> {
    chamfer_points(&c.decompress(), cloud.points(), cloud.dim())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalConfig {
    /// Minimum fraction of points a proposed plane must associate.
    pub vote_threshold: f64,
    /// DBSCAN radius for merging surviving proposals in the embedding.
    pub cluster_eps: f64,
    pub support_eps: f64,
    /// Embedding radius used for clustering.
    pub k: f64,
    /// Cap on enumerated pairs; beyond it pairs are strided evenly.
    pub max_pairs: usize,
}

impl ProposalConfig {
    pub fn default_for(dim: usize) -> Self {
        ProposalConfig {
            vote_threshold: 0.1,
            cluster_eps: 0.05,
            support_eps: if dim == 3 { 0.05 } else { 0.02 },
            k: if dim == 3 { 0.5 } else { 0.3 },
            max_pairs: 1_000_000,
        }
    }
}

/// Brute-force reflective ground-truth proposal: every point pair's bisector
/// plane is scored by association, survivors above the threshold are
/// clustered and their centroids proposed for review.
pub fn propose_ground_truth(cloud: &PointCloud, cfg: &ProposalConfig) -> Result<GroundTruth> {
    let n = cloud.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let total_pairs = n * (n - 1) / 2;
    let stride = total_pairs.div_ceil(cfg.max_pairs).max(1);
    let pts = cloud.points();
    // Many pairs share a plane; score each quantized embedding cell once.
    let cell = cfg.cluster_eps / 4.0;
    let mut seen = std::collections::HashMap::new();
    let mut t = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            t += 1;
            if !t.is_multiple_of(stride) {
                continue;
            }
            let Ok(plane) = pair_to_plane(&pts[i], &pts[j]) else {
                continue;
            };
            let e = embed_plane(&plane, cfg.k).embed;
            let key = (
                (e.x / cell).round() as i64,
                (e.y / cell).round() as i64,
                (e.z / cell).round() as i64,
            );
            seen.entry(key).or_insert(plane);
        }
    }
    let mut planes: Vec<(_, HoughPlane)> = seen.into_iter().collect();
    planes.sort_by_key(|(key, _)| *key);
    let ctx = SupportContext::new(cloud, None);
    let index = cloud.index();
    let probe: Vec<Vector> = (0..64.min(n)).map(|i| pts[i * n / 64.min(n)]).collect();
    let need = (cfg.vote_threshold * n as f64).ceil() as usize;
    let survivors: Vec<Vector> = planes
        .par_iter()
        .filter_map(|(_, plane)| {
            let sym = Symmetry::Reflection(*plane);
            // Reject early when even a generous reading of a point sample
            // falls short.
            let hits = probe
                .iter()
                .filter(|p| index.nearest(&sym.apply(p)).is_some_and(|(_, d)| d < cfg.support_eps))
                .count();
            if (hits as f64) < 0.5 * cfg.vote_threshold * probe.len() as f64 {
                return None;
            }
            (ctx.associated(&sym, cfg.support_eps).len() >= need).then(|| embed_plane(plane, cfg.k).embed)
        })
        .collect();
    let geo = GeodesicSpace::riemannian(cfg.k, cloud.dim())?;
    let metric = Metric::Geodesic(geo);
    let clusters = dbscan(
        &survivors,
        &DbscanConfig {
            eps: cfg.cluster_eps,
            min_pts: 1,
        },
        metric,
        cloud.dim(),
    );
    let symmetries = centroids(&survivors, &clusters.clusters, metric)
        .iter()
        .map(|c| {
            let r = c.norm();
            Symmetry::Reflection(HoughPlane::from_normal_offset(c / r, (r - cfg.k).max(0.0)))
        })
        .collect();
    Ok(GroundTruth {
        symmetries,
        source: GtSource::Proposed,
    })
}
