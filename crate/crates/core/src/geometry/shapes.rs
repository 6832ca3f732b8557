//! Synthetic shapes with analytically known symmetries.
//!
//! Curves are sampled uniformly in arc length with samples placed at segment
//! midpoint parameters, which keeps the sample set itself invariant under the
//! shape's symmetry group.

use std::f64::consts::PI;
use std::str::FromStr;

use super::{normalize_with_transform, PointCloud, Vector};
use crate::error::{Error, Result};
use crate::symmetry::Symmetry;
use crate::transform::HoughPlane;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Square,
    RegularNgon,
    LetterLike,
    Cube,
    Cylinder,
    Composite,
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "square" => ShapeKind::Square,
            "regular_ngon" | "ngon" => ShapeKind::RegularNgon,
            "letter_like" | "letter" => ShapeKind::LetterLike,
            "cube" => ShapeKind::Cube,
            "cylinder" => ShapeKind::Cylinder,
            "composite" => ShapeKind::Composite,
            other => return Err(Error::UnknownShape(other.to_string())),
        })
    }
}

impl ShapeKind {
    pub fn dim(self) -> usize {
        match self {
            ShapeKind::Cube | ShapeKind::Cylinder => 3,
            _ => 2,
        }
    }

    pub fn default_points(self) -> usize {
        match self {
            ShapeKind::Cube | ShapeKind::Cylinder => 2400,
            ShapeKind::RegularNgon => 300,
            _ => 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeParams {
    pub num_points: usize,
    /// Side count for regular polygons.
    pub sides: usize,
    /// Displacement between the two motif copies of a composite shape.
    pub shift: f64,
}

impl ShapeParams {
    pub fn for_kind(kind: ShapeKind) -> Self {
        ShapeParams {
            num_points: kind.default_points(),
            sides: 3,
            shift: 1.0,
        }
    }
}

fn v2(x: f64, y: f64) -> Vector {
    Vector::new(x, y, 0.0)
}

/// Line through the origin with direction angle `alpha`, as a plane.
fn axis_line(alpha: f64) -> Symmetry {
    Symmetry::Reflection(HoughPlane::from_normal_offset(
        v2(-alpha.sin(), alpha.cos()),
        0.0,
    ))
}

fn origin_plane(n: Vector) -> Symmetry {
    Symmetry::Reflection(HoughPlane::from_normal_offset(n, 0.0))
}

/// Samples `count` points on segment `a -> b` at midpoint parameters, with the
/// segment's right-hand normal (outward for counter-clockwise boundaries).
fn sample_segment(a: Vector, b: Vector, count: usize, pts: &mut Vec<Vector>, normals: &mut Vec<Vector>) {
    let d = b - a;
    let normal = v2(d.y, -d.x).normalize();
    for j in 0..count {
        let t = (j as f64 + 0.5) / count as f64;
        pts.push(a + d * t);
        normals.push(normal);
    }
}

fn polyline(segments: &[(Vector, Vector)], num_points: usize) -> (Vec<Vector>, Vec<Vector>) {
    let total: f64 = segments.iter().map(|(a, b)| (b - a).norm()).sum();
    let (mut pts, mut normals) = (Vec::new(), Vec::new());
    for (a, b) in segments {
        let count = ((b - a).norm() / total * num_points as f64).round().max(1.0) as usize;
        sample_segment(*a, *b, count, &mut pts, &mut normals);
    }
    (pts, normals)
}

fn square(n: usize) -> (Vec<Vector>, Vec<Vector>, Vec<Symmetry>) {
    let corners = [v2(-1.0, -1.0), v2(1.0, -1.0), v2(1.0, 1.0), v2(-1.0, 1.0)];
    let segs: Vec<_> = (0..4).map(|i| (corners[i], corners[(i + 1) % 4])).collect();
    let per_side = (n / 4).max(1);
    let (mut pts, mut normals) = (Vec::new(), Vec::new());
    for (a, b) in segs {
        sample_segment(a, b, per_side, &mut pts, &mut normals);
    }
    let gt = vec![
        origin_plane(v2(1.0, 0.0)),
        origin_plane(v2(0.0, 1.0)),
        origin_plane(v2(1.0, 1.0)),
        origin_plane(v2(1.0, -1.0)),
    ];
    (pts, normals, gt)
}

fn regular_ngon(sides: usize, n: usize) -> Result<(Vec<Vector>, Vec<Vector>, Vec<Symmetry>)> {
    if sides < 3 {
        return Err(Error::InvalidConfig(format!("a polygon needs >= 3 sides, got {sides}")));
    }
    let vert = |i: usize| {
        let a = PI / 2.0 + 2.0 * PI * i as f64 / sides as f64;
        v2(a.cos(), a.sin())
    };
    let per_side = (n / sides).max(1);
    let (mut pts, mut normals) = (Vec::new(), Vec::new());
    for i in 0..sides {
        sample_segment(vert(i), vert(i + 1), per_side, &mut pts, &mut normals);
    }
    let gt = (0..sides)
        .map(|j| axis_line(PI / 2.0 + PI * j as f64 / sides as f64))
        .collect();
    Ok((pts, normals, gt))
}

/// A "T" with a foot serif on one side: mirror-symmetric about its stem except
/// for the serif.
fn letter_like(n: usize) -> (Vec<Vector>, Vec<Vector>, Vec<Symmetry>) {
    let segs = [
        (v2(0.0, 1.0), v2(-0.8, 1.0)),
        (v2(0.0, 1.0), v2(0.8, 1.0)),
        (v2(0.0, 1.0), v2(0.0, -1.0)),
        (v2(0.0, -1.0), v2(0.4, -1.0)),
    ];
    let (pts, normals) = polyline(&segs, n);
    (pts, normals, vec![origin_plane(v2(1.0, 0.0))])
}

fn cube(n: usize) -> (Vec<Vector>, Vec<Vector>, Vec<Symmetry>) {
    let g = ((n as f64 / 6.0).sqrt().round() as usize).max(1);
    let (mut pts, mut normals) = (Vec::new(), Vec::new());
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut normal = Vector::zeros();
            normal[axis] = sign;
            for i in 0..g {
                for j in 0..g {
                    let u = -1.0 + 2.0 * (i as f64 + 0.5) / g as f64;
                    let w = -1.0 + 2.0 * (j as f64 + 0.5) / g as f64;
                    let mut p = Vector::zeros();
                    p[axis] = sign;
                    p[(axis + 1) % 3] = u;
                    p[(axis + 2) % 3] = w;
                    pts.push(p);
                    normals.push(normal);
                }
            }
        }
    }
    let mut gt = vec![
        origin_plane(Vector::x()),
        origin_plane(Vector::y()),
        origin_plane(Vector::z()),
    ];
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        for s in [1.0, -1.0] {
            let mut n = Vector::zeros();
            n[a] = 1.0;
            n[b] = s;
            gt.push(origin_plane(n));
        }
    }
    (pts, normals, gt)
}

const CYLINDER_SECTORS: usize = 32;

/// Unit-radius cylinder of height 2 (side and both caps), sampled on a
/// `CYLINDER_SECTORS`-fold angular grid.
fn cylinder(n: usize) -> (Vec<Vector>, Vec<Vector>, Vec<Symmetry>) {
    let a = CYLINDER_SECTORS;
    let side_rings = ((0.6 * n as f64) / a as f64).round().max(1.0) as usize;
    let cap_rings = ((0.2 * n as f64) / a as f64).round().max(1.0) as usize;
    let angle = |j: usize| 2.0 * PI * j as f64 / a as f64;
    let (mut pts, mut normals) = (Vec::new(), Vec::new());
    for r in 0..side_rings {
        let z = -1.0 + 2.0 * (r as f64 + 0.5) / side_rings as f64;
        for j in 0..a {
            let (s, c) = angle(j).sin_cos();
            pts.push(Vector::new(c, s, z));
            normals.push(Vector::new(c, s, 0.0));
        }
    }
    for z in [-1.0, 1.0] {
        for r in 0..cap_rings {
            let rad = (r as f64 + 0.5) / cap_rings as f64;
            for j in 0..a {
                let (s, c) = angle(j).sin_cos();
                pts.push(Vector::new(rad * c, rad * s, z));
                normals.push(Vector::new(0.0, 0.0, z));
            }
        }
    }
    let mut gt = vec![origin_plane(Vector::z())];
    gt.extend((0..a).map(|j| axis_line(PI * j as f64 / a as f64)));
    (pts, normals, gt)
}

/// Two translated copies of an asymmetric "L" motif.
fn composite(n: usize, shift: f64) -> (Vec<Vector>, Vec<Vector>, Vec<Symmetry>) {
    let motif = [
        (v2(0.0, 0.0), v2(0.0, 0.6)),
        (v2(0.0, 0.0), v2(0.3, 0.0)),
        (v2(0.3, 0.0), v2(0.3, 0.15)),
    ];
    let (base, base_normals) = polyline(&motif, n / 2);
    let offset = v2(shift, 0.0);
    let mut pts = base.clone();
    pts.extend(base.iter().map(|p| p + offset));
    let mut normals = base_normals.clone();
    normals.extend(base_normals);
    (pts, normals, vec![Symmetry::Translation(offset)])
}

/// Generates a normalized synthetic shape with its analytic ground truth.
pub fn gen_shape(kind: ShapeKind, params: &ShapeParams) -> Result<PointCloud> {
    if params.num_points == 0 {
        return Err(Error::InvalidConfig("num_points must be positive".into()));
    }
    let n = params.num_points;
    let (pts, normals, gt) = match kind {
        ShapeKind::Square => square(n),
        ShapeKind::RegularNgon => regular_ngon(params.sides, n)?,
        ShapeKind::LetterLike => letter_like(n),
        ShapeKind::Cube => cube(n),
        ShapeKind::Cylinder => cylinder(n),
        ShapeKind::Composite => composite(n, params.shift),
    };
    let cloud = PointCloud::new(kind.dim(), pts)?
        .with_normals(normals)?
        .with_ground_truth(gt);
    Ok(normalize_with_transform(&cloud)?.0)
}

pub fn gen_named(kind: &str, num_points: Option<usize>) -> Result<PointCloud> {
    let kind: ShapeKind = kind.parse()?;
    let mut params = ShapeParams::for_kind(kind);
    if let Some(n) = num_points {
        params.num_points = n;
    }
    gen_shape(kind, &params)
}
