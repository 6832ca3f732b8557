//! Transformation spaces: each sampled point pair casts one vote.
//!
//! Reflective votes use the Hesse normal form `(n, l)` of the bisecting
//! hyperplane, embedded as `n (k + l)` so that every plane lands outside a ball
//! of radius `k` around the origin. Translational votes are raw displacements.
//! Rotational votes (2D only) compose two reflective votes.

mod rotation;

pub use rotation::{compose_rotation, Rotation};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dim, to_coords, vector_from_slice, PointCloud, Vector};

/// Below this, an offset is treated as exactly zero and the normal is
/// canonicalized.
const ZERO_OFFSET: f64 = 1e-12;

/// Hyperplane `{x : x·n = l}` with unit normal and `l >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughPlane {
    normal: Vector,
    offset: f64,
}

impl HoughPlane {
    /// Normalizes `normal` and orients the plane so that `offset >= 0`.
    /// Planes through the origin get a normal whose first nonzero coordinate
    /// is positive.
    pub fn from_normal_offset(normal: Vector, offset: f64) -> Self {
        let len = normal.norm();
        debug_assert!(len > 0.0, "zero normal");
        let (mut n, mut l) = (normal / len, offset / len);
        if l < 0.0 {
            n = -n;
            l = -l;
        }
        if l <= ZERO_OFFSET {
            l = 0.0;
            if let Some(c) = n.iter().find(|c| c.abs() > ZERO_OFFSET) {
                if *c < 0.0 {
                    n = -n;
                }
            }
        }
        HoughPlane {
            normal: n,
            offset: l,
        }
    }

    pub fn new(normal: Vector, offset: f64) -> Result<Self> {
        if !(normal.norm() > 0.0) || !offset.is_finite() {
            return Err(Error::InvalidConfig("plane needs a nonzero normal".into()));
        }
        Ok(Self::from_normal_offset(normal, offset))
    }

    pub fn normal(&self) -> &Vector {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Signed distance of `p` from the plane, positive on the normal side.
    pub fn signed_distance(&self, p: &Vector) -> f64 {
        p.dot(&self.normal) - self.offset
    }
}

/// A vote embedded in the reflective transformation space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformSample {
    pub embed: Vector,
    pub k: f64,
}

impl TransformSample {
    pub fn new(embed: Vector, k: f64) -> Result<Self> {
        let norm = embed.norm();
        if norm < k - 1e-9 {
            return Err(Error::InsideInvalidRegion { norm, k });
        }
        Ok(TransformSample { embed, k })
    }
}

/// Bisecting plane of the pair: the reflection that swaps `p` and `q`.
pub fn pair_to_plane(p: &Vector, q: &Vector) -> Result<HoughPlane> {
    let diff = p - q;
    let len = diff.norm();
    if len <= 1e-12 {
        return Err(Error::DegeneratePair);
    }
    let n = diff / len;
    let l = 0.5 * (p + q).dot(&n);
    Ok(HoughPlane::from_normal_offset(n, l))
}

/// Embeds a plane as `n (k + l)`; `sign(0)` counts as `+1`.
pub fn embed_plane(plane: &HoughPlane, k: f64) -> TransformSample {
    TransformSample {
        embed: plane.normal * (k + plane.offset),
        k,
    }
}

/// Inverse of [`embed_plane`].
pub fn decode_sample(sample: &TransformSample) -> Result<HoughPlane> {
    let norm = sample.embed.norm();
    if norm < sample.k - 1e-6 || norm == 0.0 {
        return Err(Error::InsideInvalidRegion { norm, k: sample.k });
    }
    Ok(HoughPlane::from_normal_offset(
        sample.embed / norm,
        (norm - sample.k).max(0.0),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Reflective,
    Translational,
    #[serde(rename = "rotational")]
    Rotational2d,
}

/// The vote cloud `{T_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpace {
    pub kind: SpaceKind,
    pub k: f64,
    /// Dimension of the embedding (3 for the planar rotational space).
    pub dim: usize,
    pub samples: Vec<Vector>,
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    kind: SpaceKind,
    k: f64,
    dim: usize,
    samples: Vec<Vec<f64>>,
}

impl TransformSpace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> TransformSample {
        TransformSample {
            embed: self.samples[i],
            k: self.k,
        }
    }

    pub fn to_json(&self) -> String {
        let file = SpaceFile {
            kind: self.kind,
            k: self.k,
            dim: self.dim,
            samples: self.samples.iter().map(|s| to_coords(s, self.dim)).collect(),
        };
        serde_json::to_string(&file).expect("space serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpaceFile = serde_json::from_str(text)?;
        check_dim(file.dim)?;
        Ok(TransformSpace {
            kind: file.kind,
            k: file.k,
            dim: file.dim,
            samples: file.samples.iter().map(|s| vector_from_slice(s)).collect(),
        })
    }
}

const CHUNK: usize = 4096;

/// Draws `count` ordered index pairs `(i, j)` with `i != j`, uniformly with
/// replacement. Each chunk has its own random stream so the result does not
/// depend on the thread count.
fn sample_pairs<T, F>(n: usize, count: usize, seed: u64, make: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize, &mut ChaCha8Rng) -> Option<T> + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let todo = CHUNK.min(count - c * CHUNK);
            let mut out = Vec::with_capacity(todo);
            let mut misses = 0usize;
            while out.len() < todo {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                match (i != j).then(|| make(i, j, &mut rng)).flatten() {
                    Some(t) => out.push(t),
                    None => {
                        misses += 1;
                        if misses > 1000 + 100 * todo {
                            break;
                        }
                    }
                }
            }
            out
        })
        .collect()
}

fn check_cloud(cloud: &PointCloud) -> Result<()> {
    if cloud.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: cloud.len(),
        });
    }
    Ok(())
}

fn finish(kind: SpaceKind, k: f64, dim: usize, samples: Vec<Vector>, wanted: usize) -> Result<TransformSpace> {
    if samples.len() < wanted || samples.is_empty() {
        return Err(Error::InvalidConfig(
            "could not draw enough non-degenerate pairs".into(),
        ));
    }
    Ok(TransformSpace {
        kind,
        k,
        dim,
        samples,
    })
}

/// Reflective votes from `num_pairs` random point pairs (degenerate pairs are
/// re-drawn).
pub fn build_reflective_space(cloud: &PointCloud, num_pairs: usize, k: f64, seed: u64) -> Result<TransformSpace> {
    check_cloud(cloud)?;
    if !(k > 0.0) {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    let pts = cloud.points();
    let samples = sample_pairs(pts.len(), num_pairs, seed, |i, j, _| {
        pair_to_plane(&pts[i], &pts[j])
            .ok()
            .map(|plane| embed_plane(&plane, k).embed)
    });
    finish(SpaceKind::Reflective, k, cloud.dim(), samples, num_pairs)
}

/// Displacement votes `q - p` over ordered random pairs.
pub fn build_translation_space(cloud: &PointCloud, num_pairs: usize, seed: u64) -> Result<TransformSpace> {
    check_cloud(cloud)?;
    let pts = cloud.points();
    let samples = sample_pairs(pts.len(), num_pairs, seed, |i, j, _| {
        let v = pts[j] - pts[i];
        (v.norm() > 1e-12).then_some(v)
    });
    finish(SpaceKind::Translational, 0.0, cloud.dim(), samples, num_pairs)
}

/// Embeds a planar rotation as `(c_x, c_y, θ/π)`, θ counter-clockwise in `[0, 2π)`.
pub fn embed_rotation(rot: &Rotation) -> Vector {
    Vector::new(rot.center.x, rot.center.y, rot.planar_angle() / PI)
}

pub fn decode_rotation(x: &Vector) -> Rotation {
    Rotation {
        center: Vector::new(x.x, x.y, 0.0),
        axis: Vector::z(),
        angle: x.z * PI,
    }
}

/// Planar rotation votes: each vote composes the bisectors of two random
/// point pairs.
pub fn build_rotation_space(cloud: &PointCloud, num_votes: usize, seed: u64) -> Result<TransformSpace> {
    check_cloud(cloud)?;
    if cloud.dim() != 2 {
        return Err(Error::InvalidConfig(
            "rotational space is only supported for 2D shapes".into(),
        ));
    }
    let pts = cloud.points();
    let n = pts.len();
    let samples = sample_pairs(n, num_votes, seed, |i, j, rng| {
        let first = pair_to_plane(&pts[i], &pts[j]).ok()?;
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let second = pair_to_plane(&pts[a], &pts[b]).ok()?;
        compose_rotation(&first, &second)
            .ok()
            .map(|r| embed_rotation(&r))
    });
    finish(SpaceKind::Rotational2d, 0.0, 3, samples, num_votes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::reflect_point;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vector {
        Vector::new(x, y, z)
    }

    #[test]
    fn pair_examples() {
        let p = pair_to_plane(&v(1.0, 0.0, 0.0), &v(-1.0, 0.0, 0.0)).unwrap();
        assert_eq!(*p.normal(), v(1.0, 0.0, 0.0));
        assert_eq!(p.offset(), 0.0);
        let p = pair_to_plane(&v(0.8, 0.0, 0.0), &v(0.2, 0.0, 0.0)).unwrap();
        assert!((p.normal() - v(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((p.offset() - 0.5).abs() < 1e-15);
        assert!(matches!(
            pair_to_plane(&v(0.3, 0.3, 0.0), &v(0.3, 0.3, 0.0)),
            Err(Error::DegeneratePair)
        ));
    }

    #[test]
    fn canonical_orientation_at_zero_offset() {
        let p = HoughPlane::from_normal_offset(v(-1.0, 1.0, 0.0), 0.0);
        assert!(p.normal().x > 0.0);
        let p = HoughPlane::from_normal_offset(v(0.0, -2.0, 0.0), 0.0);
        assert_eq!(*p.normal(), v(0.0, 1.0, 0.0));
        let p = HoughPlane::from_normal_offset(v(0.0, 1.0, 0.0), -0.5);
        assert_eq!((*p.normal(), p.offset()), (v(0.0, -1.0, 0.0), 0.5));
    }

    #[test]
    fn embed_examples() {
        let s = embed_plane(&HoughPlane::from_normal_offset(v(1.0, 0.0, 0.0), 0.0), 0.3);
        assert_eq!(s.embed, v(0.3, 0.0, 0.0));
        let s = embed_plane(&HoughPlane::from_normal_offset(v(0.0, 1.0, 0.0), 0.5), 0.3);
        assert!((s.embed - v(0.0, 0.8, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn decode_examples() {
        let p = decode_sample(&TransformSample { embed: v(0.3, 0.0, 0.0), k: 0.3 }).unwrap();
        assert_eq!((*p.normal(), p.offset()), (v(1.0, 0.0, 0.0), 0.0));
        let p = decode_sample(&TransformSample { embed: v(0.0, -0.9, 0.0), k: 0.5 }).unwrap();
        assert_eq!(*p.normal(), v(0.0, -1.0, 0.0));
        assert!((p.offset() - 0.4).abs() < 1e-15);
        let err = decode_sample(&TransformSample { embed: v(0.1, 0.0, 0.0), k: 0.3 }).unwrap_err();
        assert!(err.to_string().starts_with("inside invalid region"));
    }

    #[test]
    fn two_point_cloud_gives_its_bisector() {
        let (p, q) = (v(0.2, 0.7, 0.0), v(-0.4, 0.1, 0.0));
        let cloud = PointCloud::new(2, vec![p, q]).unwrap();
        let space = build_reflective_space(&cloud, 1, 0.3, 4).unwrap();
        let want = embed_plane(&pair_to_plane(&p, &q).unwrap(), 0.3).embed;
        assert_eq!(space.samples.len(), 1);
        assert!((space.samples[0] - want).norm() < 1e-15);
    }

    #[test]
    fn too_small_clouds_are_rejected() {
        let cloud = PointCloud::new(2, vec![v(0.0, 0.0, 0.0)]).unwrap();
        assert!(matches!(
            build_reflective_space(&cloud, 10, 0.3, 0),
            Err(Error::TooFewPoints { .. })
        ));
        assert!(matches!(
            build_translation_space(&cloud, 10, 0),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn space_construction_is_seeded() {
        let pts = (0..50).map(|i| v((i as f64).sin(), (i as f64 * 0.7).cos(), 0.0)).collect();
        let cloud = PointCloud::new(2, pts).unwrap();
        let a = build_reflective_space(&cloud, 10_000, 0.3, 9).unwrap();
        let b = build_reflective_space(&cloud, 10_000, 0.3, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10_000);
        assert!(a.samples.iter().all(|s| s.norm() >= 0.3 - 1e-12));
        let back = TransformSpace::from_json(&a.to_json()).unwrap();
        assert_eq!(back.len(), a.len());
        assert!(back.samples.iter().zip(&a.samples).all(|(x, y)| (x - y).norm() < 1e-12));
    }

    #[test]
    fn rotation_embedding_round_trip() {
        let r = Rotation { center: v(0.2, -0.1, 0.0), axis: -Vector::z(), angle: PI / 2.0 };
        let back = decode_rotation(&embed_rotation(&r));
        let p = v(0.9, 0.4, 0.0);
        assert!((back.apply(&p) - r.apply(&p)).norm() < 1e-12);
    }

    fn arb_point() -> impl Strategy<Value = Vector> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| v(x, y, z))
    }

    proptest! {
        #[test]
        fn vote_swaps_its_pair(p in arb_point(), q in arb_point()) {
            prop_assume!((p - q).norm() > 1e-6);
            let plane = pair_to_plane(&p, &q).unwrap();
            prop_assert!((reflect_point(&p, &plane) - q).norm() < 1e-12);
            prop_assert_eq!(plane, pair_to_plane(&q, &p).unwrap());
            prop_assert!(plane.offset() >= 0.0);
            prop_assert!((plane.normal().norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn embedding_round_trips(p in arb_point(), q in arb_point(), k in 0.1..0.8f64) {
            prop_assume!((p - q).norm() > 1e-6);
            let plane = pair_to_plane(&p, &q).unwrap();
            let s = embed_plane(&plane, k);
            prop_assert!(s.embed.norm() >= k - 1e-9);
            let back = decode_sample(&s).unwrap();
            prop_assert!((back.normal() - plane.normal()).norm() < 1e-12);
            prop_assert!((back.offset() - plane.offset()).abs() < 1e-12);
            prop_assert!((embed_plane(&back, k).embed - s.embed).norm() < 1e-12);
        }
    }
}
