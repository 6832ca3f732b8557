//! Density clustering of walker positions and cluster centroids.

use std::collections::VecDeque;

use crate::geodesic::{GeodesicSpace, GeometryMode};
use crate::geometry::{NeighborIndex, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanConfig {
    pub eps: f64,
    pub min_pts: usize,
}

/// Distance used for neighborhoods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclidean,
    /// Geodesic in a reflective space, where `x` and `-x` are close near the
    /// boundary.
    Geodesic(GeodesicSpace),
}

impl Metric {
    pub fn distance(&self, a: &Vector, b: &Vector) -> f64 {
        match self {
            Metric::Euclidean => (a - b).norm(),
            Metric::Geodesic(g) => g.distance_unchecked(a, b),
        }
    }

    fn wraps(&self) -> bool {
        matches!(self, Metric::Geodesic(g) if g.mode() == GeometryMode::Riemannian)
    }
}

pub const NOISE: i32 = -1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    /// Cluster id per point, or [`NOISE`].
    pub labels: Vec<i32>,
    pub clusters: Vec<Vec<usize>>,
}

struct Neighborhoods<'a> {
    points: &'a [Vector],
    index: NeighborIndex,
    eps: f64,
    metric: Metric,
}

impl Neighborhoods<'_> {
    /// Indices within `eps` of point `i`, including `i` itself.
    fn of(&self, i: usize) -> Vec<usize> {
        let p = &self.points[i];
        let mut ids = self.index.within(p, self.eps);
        if self.metric.wraps() {
            // The geodesic never exceeds min(|x - y|, |x + y|) from below, so
            // candidates lie near `p` or near `-p`.
            ids.extend(self.index.within(&-p, self.eps));
            ids.sort_unstable();
            ids.dedup();
        }
        ids.retain(|&j| j == i || self.metric.distance(p, &self.points[j]) <= self.eps);
        ids
    }
}

/// Classic DBSCAN. A point is core when its closed `eps`-neighborhood holds at
/// least `min_pts` points; border points join the first cluster reaching them.
pub fn dbscan(points: &[Vector], cfg: &DbscanConfig, metric: Metric, dim: usize) -> Clustering {
    let n = points.len();
    let mut labels = vec![NOISE; n];
    let mut clusters = Vec::new();
    if n == 0 {
        return Clustering { labels, clusters };
    }
    let hoods = Neighborhoods {
        points,
        index: NeighborIndex::new(points, dim),
        eps: cfg.eps,
        metric,
    };
    let mut visited = vec![false; n];
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let seeds = hoods.of(start);
        if seeds.len() < cfg.min_pts {
            continue;
        }
        let id = clusters.len() as i32;
        let mut members = vec![start];
        labels[start] = id;
        let mut queue: VecDeque<usize> = seeds.into_iter().filter(|&j| j != start).collect();
        while let Some(j) = queue.pop_front() {
            if labels[j] == NOISE {
                labels[j] = id;
                members.push(j);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let next = hoods.of(j);
            if next.len() >= cfg.min_pts {
                queue.extend(next.into_iter().filter(|&m| !visited[m] || labels[m] == NOISE));
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    Clustering { labels, clusters }
}

/// Maps `x` through the invalid ball to the representation of the same plane
/// with the opposite normal: `(n, l)` becomes `(-n, -l)`, i.e. `-x̂ (2k - |x|)`.
/// Near the boundary this is plain negation.
fn flip_chart(x: &Vector, k: f64) -> Vector {
    let r = x.norm();
    if r == 0.0 {
        return *x;
    }
    -x / r * (2.0 * k - r)
}

/// Per-cluster means. Under the geodesic metric members on the far side of
/// the cluster's first point are first moved to its side of the
/// identification, and the mean is re-projected to the valid region.
pub fn centroids(points: &[Vector], clusters: &[Vec<usize>], metric: Metric) -> Vec<Vector> {
    clusters
        .iter()
        .filter(|c| !c.is_empty())
        .map(|members| {
            let seed = points[members[0]];
            let k = match metric {
                Metric::Geodesic(g) if metric.wraps() => Some(g.k()),
                _ => None,
            };
            let mut sum = Vector::zeros();
            for &i in members {
                let p = points[i];
                sum += match k {
                    Some(k) if p.dot(&seed) < 0.0 => flip_chart(&p, k),
                    _ => p,
                };
            }
            let mean = sum / members.len() as f64;
            match k {
                Some(k) if mean.norm() < k => flip_chart(&mean, k),
                _ => mean,
            }
        })
        .collect()
}
