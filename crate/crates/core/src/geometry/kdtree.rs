//! Exact k-d tree over 2D/3D points.

use super::Vector;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Spatial index supporting exact nearest-neighbor and radius queries.
///
/// Read-only after construction, so it can be shared across threads.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    dim: usize,
    points: Vec<Vector>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    root: usize,
}

impl NeighborIndex {
    pub fn new(points: &[Vector], dim: usize) -> Self {
        let mut index = NeighborIndex {
            dim: dim.clamp(1, 3),
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
            root: 0,
        };
        if !points.is_empty() {
            index.root = index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Vector {
        &self.points[i]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        let axis = self.widest_axis(start, end);
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let value = self.points[self.order[mid]][axis];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes.push(Node::Split {
            axis,
            value,
            left,
            right,
        });
        self.nodes.len() - 1
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for axis in 0..self.dim {
            let (lo, hi) = self.order[start..end]
                .iter()
                .map(|&i| self.points[i][axis])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            if hi - lo > best.1 {
                best = (axis, hi - lo);
            }
        }
        best.0
    }

    /// Nearest point to `query`, as `(index, distance)`.
    pub fn nearest(&self, query: &Vector) -> Option<(usize, f64)> {
        self.nearest_where(query, |_| true)
    }

    /// Nearest point whose index passes `accept`.
    pub fn nearest_where<F>(&self, query: &Vector, accept: F) -> Option<(usize, f64)>
    where
        F: Fn(usize) -> bool,
    {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(self.root, query, &accept, &mut best);
        (best.0 != usize::MAX).then(|| (best.0, best.1.sqrt()))
    }

    fn nearest_rec<F>(&self, node: usize, query: &Vector, accept: &F, best: &mut (usize, f64))
    where
        F: Fn(usize) -> bool,
    {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if !accept(i) {
                        continue;
                    }
                    let d2 = (self.points[i] - query).norm_squared();
                    if d2 < best.1 || (d2 == best.1 && i < best.0) {
                        *best = (i, d2);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, query, accept, best);
                if diff * diff <= best.1 {
                    self.nearest_rec(far, query, accept, best);
                }
            }
        }
    }

    /// Indices of all points with `|p - query| <= radius`, in ascending order.
    pub fn within(&self, query: &Vector, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.within_into(query, radius, &mut out);
        out.sort_unstable();
        out
    }

    /// Appends the indices `within` would return, in tree order.
    pub fn within_into(&self, query: &Vector, radius: f64, out: &mut Vec<usize>) {
        if !self.points.is_empty() && radius >= 0.0 {
            self.within_rec(self.root, query, radius * radius, out);
        }
    }

    fn within_rec(&self, node: usize, query: &Vector, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(
                    self.order[start..end]
                        .iter()
                        .copied()
                        .filter(|&i| (self.points[i] - query).norm_squared() <= r2),
                );
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.within_rec(left, query, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.within_rec(right, query, r2, out);
                }
            }
        }
    }

    /// Mean distance from each point to its nearest distinct neighbor.
    pub fn mean_spacing(&self) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        let total: f64 = (0..self.points.len())
            .map(|i| {
                self.nearest_where(&self.points[i], |j| j != i)
                    .map_or(0.0, |(_, d)| d)
            })
            .sum();
        total / self.points.len() as f64
    }
}
