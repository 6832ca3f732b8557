//! Helpers shared by the integration suites.
#![allow(dead_code)]

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::Rng;
use std::f64::consts::PI;

use symmode::geodesic::Branch;
use symmode::geometry::Vector;

pub fn v2(x: f64, y: f64) -> Vector {
    Vector::new(x, y, 0.0)
}

/// A point of the valid 2D region with radius uniform in `[k, k + 1.5]`.
pub fn random_valid_2d<R: Rng>(rng: &mut R, k: f64) -> Vector {
    let r = k + 1.5 * rng.random::<f64>();
    let a = rng.random_range(0.0..2.0 * PI);
    v2(r * a.cos(), r * a.sin())
}

/// Uniform random unit vector in the first `dim` coordinates.
pub fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let mut v = Vector::zeros();
        for c in 0..dim {
            v[c] = rng.random_range(-1.0..1.0);
        }
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Whether the closed segment `a -> b` stays out of the open ball of radius `k`.
fn visible(a: &Vector, b: &Vector, k: f64) -> bool {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 { (-a.dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + d * t).norm() >= k - 1e-12
}

/// Shortest paths on a discretized 2D transformation space: a ring of
/// boundary nodes joined by chords, zero-length edges between antipodal
/// boundary nodes, and straight visibility edges from the query points.
pub struct GraphOracle {
    k: f64,
    ring: Vec<Vector>,
    graph: UnGraph<(), f64>,
}

impl GraphOracle {
    pub fn new(k: f64, nodes: usize) -> Self {
        assert!(nodes.is_multiple_of(2));
        let ring: Vec<Vector> = (0..nodes)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / nodes as f64;
                v2(k * a.cos(), k * a.sin())
            })
            .collect();
        let mut graph = UnGraph::new_undirected();
        let ids: Vec<NodeIndex> = ring.iter().map(|_| graph.add_node(())).collect();
        for i in 0..nodes {
            let j = (i + 1) % nodes;
            graph.add_edge(ids[i], ids[j], (ring[i] - ring[j]).norm());
            if i < nodes / 2 {
                graph.add_edge(ids[i], ids[i + nodes / 2], 0.0);
            }
        }
        GraphOracle { k, ring, graph }
    }

    pub fn distance(&self, x: &Vector, y: &Vector) -> f64 {
        let mut g = self.graph.clone();
        let (nx, ny) = (g.add_node(()), g.add_node(()));
        if visible(x, y, self.k) {
            g.add_edge(nx, ny, (x - y).norm());
        }
        for (i, b) in self.ring.iter().enumerate() {
            let node = NodeIndex::new(i);
            if visible(x, b, self.k) {
                g.add_edge(nx, node, (x - b).norm());
            }
            if visible(y, b, self.k) {
                g.add_edge(ny, node, (y - b).norm());
            }
        }
        *dijkstra(&g, nx, Some(ny), |e| *e.weight())
            .get(&ny)
            .expect("the quotient space is connected")
    }
}

/// Same branch kind, ignoring the crossing point.
pub fn same_branch(a: &Branch, b: &Branch) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
}
