//! Point clouds and the basic geometric operations on them.
//!
//! Coordinates are stored as 3-vectors regardless of dimension; a 2D cloud
//! keeps its third coordinate at zero so that every operation (reflection,
//! rotation, distances) works unchanged in the plane.

mod kdtree;
pub mod io;
pub mod shapes;

pub use kdtree::NeighborIndex;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::symmetry::Symmetry;
use crate::transform::HoughPlane;

pub type Vector = Vector3<f64>;

/// Builds a vector from a coordinate slice of length 2 or 3.
pub fn vector_from_slice(coords: &[f64]) -> Vector {
    let mut v = Vector::zeros();
    for (c, &x) in coords.iter().take(3).enumerate() {
        v[c] = x;
    }
    v
}

/// First `dim` coordinates of `v`.
pub fn to_coords(v: &Vector, dim: usize) -> Vec<f64> {
    v.iter().take(dim).copied().collect()
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    match dim {
        2 | 3 => Ok(()),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// A shape S: a finite set of 2D or 3D points with optional unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Vector>,
    normals: Option<Vec<Vector>>,
    ground_truth: Option<Vec<Symmetry>>,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<Vector>) -> Result<Self> {
        check_dim(dim)?;
        for p in &points {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidConfig("non-finite coordinate".into()));
            }
            if dim == 2 && p.z != 0.0 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    got: 3,
                });
            }
        }
        Ok(PointCloud {
            dim,
            points,
            normals: None,
            ground_truth: None,
        })
    }

    /// Attaches per-point normals; they are rescaled to unit length.
    pub fn with_normals(mut self, normals: Vec<Vector>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::InvalidConfig(format!(
                "{} normals for {} points",
                normals.len(),
                self.points.len()
            )));
        }
        let normals = normals
            .into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 && len.is_finite() {
                    Ok(n / len)
                } else {
                    Err(Error::InvalidConfig("zero-length normal".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_ground_truth(mut self, gt: Vec<Symmetry>) -> Self {
        self.ground_truth = Some(gt);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector]> {
        self.normals.as_deref()
    }

    pub fn ground_truth(&self) -> Option<&[Symmetry]> {
        self.ground_truth.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self) -> NeighborIndex {
        NeighborIndex::new(&self.points, self.dim)
    }

    pub fn centroid(&self) -> Vector {
        if self.points.is_empty() {
            return Vector::zeros();
        }
        self.points.iter().sum::<Vector>() / self.points.len() as f64
    }

    /// Replaces the point positions, keeping dimension, normals and metadata.
    pub fn with_points(&self, points: Vec<Vector>) -> Result<Self> {
        let mut out = PointCloud::new(self.dim, points)?;
        if let Some(n) = &self.normals {
            if n.len() == out.points.len() {
                out.normals = Some(n.clone());
            }
        }
        out.ground_truth = self.ground_truth.clone();
        Ok(out)
    }
}

/// The similarity `x -> (x - center) / scale` applied by [`normalize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub center: Vector,
    pub scale: f64,
}

impl Normalization {
    pub fn apply(&self, p: &Vector) -> Vector {
        (p - self.center) / self.scale
    }

    pub fn invert(&self, p: &Vector) -> Vector {
        p * self.scale + self.center
    }

    /// Maps a symmetry expressed in normalized coordinates back to the
    /// original frame.
    pub fn invert_symmetry(&self, sym: &Symmetry) -> Symmetry {
        match sym {
            Symmetry::Reflection(plane) => {
                let offset = plane.offset() * self.scale + plane.normal().dot(&self.center);
                Symmetry::Reflection(HoughPlane::from_normal_offset(*plane.normal(), offset))
            }
            Symmetry::Translation(v) => Symmetry::Translation(v * self.scale),
            Symmetry::Rotation(r) => {
                let mut r = *r;
                r.center = self.invert(&r.center);
                Symmetry::Rotation(r)
            }
        }
    }

    pub fn apply_symmetry(&self, sym: &Symmetry) -> Symmetry {
        match sym {
            Symmetry::Reflection(plane) => {
                let offset = (plane.offset() - plane.normal().dot(&self.center)) / self.scale;
                Symmetry::Reflection(HoughPlane::from_normal_offset(*plane.normal(), offset))
            }
            Symmetry::Translation(v) => Symmetry::Translation(v / self.scale),
            Symmetry::Rotation(r) => {
                let mut r = *r;
                r.center = self.apply(&r.center);
                Symmetry::Rotation(r)
            }
        }
    }
}

/// Centers the cloud at its centroid and scales it uniformly so the largest
/// absolute coordinate is 1. Ground-truth metadata is mapped along.
pub fn normalize(cloud: &PointCloud) -> Result<PointCloud> {
    Ok(normalize_with_transform(cloud)?.0)
}

pub fn normalize_with_transform(cloud: &PointCloud) -> Result<(PointCloud, Normalization)> {
    if cloud.is_empty() {
        return Err(Error::EmptyShape);
    }
    let center = cloud.centroid();
    let max_abs = cloud
        .points
        .iter()
        .flat_map(|p| (p - center).iter().copied().collect::<Vec<_>>())
        .fold(0.0f64, |m, c| m.max(c.abs()));
    let scale = if max_abs > 0.0 { max_abs } else { 1.0 };
    let tf = Normalization { center, scale };
    let points = cloud.points.iter().map(|p| tf.apply(p)).collect();
    let mut out = PointCloud::new(cloud.dim, points)?;
    out.normals = cloud.normals.clone();
    out.ground_truth = cloud
        .ground_truth
        .as_ref()
        .map(|gt| gt.iter().map(|s| tf.apply_symmetry(s)).collect());
    Ok((out, tf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Isotropic,
    AlongNormal,
}

/// Gaussian perturbation scaled by `level`; deterministic in `seed`.
pub fn add_noise(cloud: &PointCloud, level: f64, mode: NoiseMode, seed: u64) -> Result<PointCloud> {
    if !(level >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise level {level} < 0")));
    }
    let normals = match mode {
        NoiseMode::AlongNormal => Some(cloud.normals().ok_or(Error::MissingNormals)?),
        NoiseMode::Isotropic => None,
    };
    if level == 0.0 {
        return Ok(cloud.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| match normals {
            Some(ns) => {
                let g: f64 = StandardNormal.sample(&mut rng);
                p + ns[i] * (level * g)
            }
            None => {
                let mut q = *p;
                for c in 0..cloud.dim {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    q[c] += level * g;
                }
                q
            }
        })
        .collect();
    cloud.with_points(points)
}

fn mean_nn_distance(from: &[Vector], to: &NeighborIndex) -> f64 {
    let total: f64 = from
        .iter()
        .map(|p| to.nearest(p).map_or(0.0, |(_, d)| d))
        .sum();
    total / from.len() as f64
}

/// Two-sided Chamfer distance: the sum of both directed mean
/// nearest-neighbor distances.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    chamfer_points(&a.points, &b.points, a.dim)
}

pub fn chamfer_points(a: &[Vector], b: &[Vector], dim: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyShape);
    }
    let ia = NeighborIndex::new(a, dim);
    let ib = NeighborIndex::new(b, dim);
    Ok(mean_nn_distance(a, &ib) + mean_nn_distance(b, &ia))
}

/// Mirror image of `x` across `plane`.
pub fn reflect_point(x: &Vector, plane: &HoughPlane) -> Vector {
    let n = plane.normal();
    x + n * (2.0 * (plane.offset() - x.dot(n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn v2(x: f64, y: f64) -> Vector {
        Vector::new(x, y, 0.0)
    }

    fn cloud2(pts: &[(f64, f64)]) -> PointCloud {
        PointCloud::new(2, pts.iter().map(|&(x, y)| v2(x, y)).collect()).unwrap()
    }

    fn max_abs(c: &PointCloud) -> f64 {
        c.points()
            .iter()
            .flat_map(|p| p.iter().copied().collect::<Vec<_>>())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn normalize_rectangle() {
        let c = cloud2(&[(2.0, 0.0), (4.0, 0.0), (2.0, 2.0), (4.0, 2.0)]);
        let n = normalize(&c).unwrap();
        assert!(n.centroid().norm() < 1e-12);
        assert!((max_abs(&n) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_unit_square_is_unchanged() {
        let c = cloud2(&[(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]);
        let n = normalize(&c).unwrap();
        for (a, b) in c.points().iter().zip(n.points()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn normalize_is_idempotent_in_3d() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = (0..500)
            .map(|_| Vector::new(rng.random_range(-3.0..5.0), rng.random(), rng.random_range(0.0..9.0)))
            .collect();
        let once = normalize(&PointCloud::new(3, pts).unwrap()).unwrap();
        let twice = normalize(&once).unwrap();
        for (a, b) in once.points().iter().zip(twice.points()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn normalize_empty_fails() {
        let c = PointCloud::new(2, vec![]).unwrap();
        assert!(matches!(normalize(&c), Err(Error::EmptyShape)));
        assert_eq!(Error::EmptyShape.to_string(), "empty shape");
    }

    #[test]
    fn normalize_maps_ground_truth_planes() {
        // Vertical axis x = 3 of a rectangle centred at (3, 1).
        let c = cloud2(&[(2.0, 0.0), (4.0, 0.0), (2.0, 2.0), (4.0, 2.0)]).with_ground_truth(vec![
            Symmetry::Reflection(HoughPlane::from_normal_offset(v2(1.0, 0.0), 3.0)),
        ]);
        let n = normalize(&c).unwrap();
        let Symmetry::Reflection(p) = &n.ground_truth().unwrap()[0] else {
            panic!()
        };
        assert!(p.offset().abs() < 1e-12);
        for q in n.points() {
            let r = reflect_point(q, p);
            assert!(n.points().iter().any(|s| (s - r).norm() < 1e-12));
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let c = cloud2(&[(0.1, 0.2), (0.3, -0.4)]);
        assert_eq!(add_noise(&c, 0.0, NoiseMode::Isotropic, 5).unwrap(), c);
    }

    #[test]
    fn noise_is_seeded() {
        let c = cloud2(&[(0.1, 0.2), (0.3, -0.4), (0.9, 0.9)]);
        let a = add_noise(&c, 0.03, NoiseMode::Isotropic, 11).unwrap();
        let b = add_noise(&c, 0.03, NoiseMode::Isotropic, 11).unwrap();
        let other = add_noise(&c, 0.03, NoiseMode::Isotropic, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn noise_moments_match_gaussian() {
        // E|g| = sqrt(2/pi) for a standard normal; per-coordinate mean
        // absolute displacement should be level * sqrt(2/pi).
        let pts: Vec<Vector> = (0..10_000)
            .map(|i| {
                let t = i as f64 / 10_000.0 * 8.0;
                let (x, y) = match t as usize {
                    0 | 1 => (-1.0 + t, -1.0),
                    2 | 3 => (1.0, -1.0 + (t - 2.0)),
                    4 | 5 => (1.0 - (t - 4.0), 1.0),
                    _ => (-1.0, 1.0 - (t - 6.0)),
                };
                v2(x, y)
            })
            .collect();
        let c = PointCloud::new(2, pts).unwrap();
        let level = 0.05;
        let noisy = add_noise(&c, level, NoiseMode::Isotropic, 99).unwrap();
        let mean_abs: f64 = c
            .points()
            .iter()
            .zip(noisy.points())
            .map(|(a, b)| ((a.x - b.x).abs() + (a.y - b.y).abs()) / 2.0)
            .sum::<f64>()
            / c.len() as f64;
        let expected = level * (2.0 / std::f64::consts::PI).sqrt();
        // Standard error of the mean over 20K draws is about 0.5%.
        assert!((mean_abs - expected).abs() / expected < 0.02, "{mean_abs} vs {expected}");
        assert!(noisy.points().iter().all(|p| p.z == 0.0));
    }

    #[test]
    fn along_normal_requires_normals() {
        let c = cloud2(&[(0.1, 0.2)]);
        assert!(matches!(
            add_noise(&c, 0.01, NoiseMode::AlongNormal, 1),
            Err(Error::MissingNormals)
        ));
        let c = PointCloud::new(3, vec![Vector::new(0.0, 0.0, 1.0)])
            .unwrap()
            .with_normals(vec![Vector::new(0.0, 0.0, 2.0)])
            .unwrap();
        let n = add_noise(&c, 0.02, NoiseMode::AlongNormal, 1).unwrap();
        let d = n.points()[0] - c.points()[0];
        assert!(d.x == 0.0 && d.y == 0.0 && d.z != 0.0);
    }

    #[test]
    fn chamfer_examples() {
        let a = cloud2(&[(0.0, 0.0)]);
        let b = cloud2(&[(1.0, 0.0)]);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer(&a, &b).unwrap(), 2.0);
        let c3 = PointCloud::new(3, vec![Vector::zeros()]).unwrap();
        assert!(matches!(chamfer(&a, &c3), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn reflect_examples() {
        let plane = HoughPlane::from_normal_offset(v2(1.0, 0.0), 0.0);
        let r = reflect_point(&v2(0.7, 0.2), &plane);
        assert!((r - v2(-0.7, 0.2)).norm() < 1e-15);
        let plane = HoughPlane::from_normal_offset(v2(0.6, 0.8), 0.5);
        let on = v2(0.3, 0.4);
        assert!((reflect_point(&on, &plane) - on).norm() < 1e-15);
    }

    fn arb_vec3() -> impl Strategy<Value = Vector> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Vector::new(x, y, z))
    }

    fn arb_plane() -> impl Strategy<Value = HoughPlane> {
        (arb_vec3(), 0.0..1.5f64)
            .prop_filter("nonzero normal", |(n, _)| n.norm() > 1e-3)
            .prop_map(|(n, l)| HoughPlane::from_normal_offset(n, l))
    }

    proptest! {
        #[test]
        fn reflection_is_involutive_isometry(x in arb_vec3(), y in arb_vec3(), plane in arb_plane()) {
            let rx = reflect_point(&x, &plane);
            let ry = reflect_point(&y, &plane);
            prop_assert!((reflect_point(&rx, &plane) - x).norm() < 1e-12);
            prop_assert!(((rx - ry).norm() - (x - y).norm()).abs() < 1e-12);
        }

        #[test]
        fn chamfer_is_symmetric_and_nonnegative(
            a in prop::collection::vec(arb_vec3(), 1..40),
            b in prop::collection::vec(arb_vec3(), 1..40),
        ) {
            let ca = PointCloud::new(3, a).unwrap();
            let cb = PointCloud::new(3, b).unwrap();
            let ab = chamfer(&ca, &cb).unwrap();
            let ba = chamfer(&cb, &ca).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-12);
        }
    }
}
