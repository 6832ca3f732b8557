//! Distance between embedded reflective symmetries and the kernel score field.
//!
//! The valid region is everything outside the ball of radius `k`. Two planes
//! are close either along a path that stays outside the ball (a straight
//! segment, or tangent-arc-tangent when the ball is in the way), or along a
//! path that passes through the origin: boundary points `z` and `-z` encode the
//! same plane `(n, 0) = (-n, 0)`, so such a path costs `|x - z| + |y + z|`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, Vector};
use crate::transform::TransformSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryMode {
    Riemannian,
    Euclidean,
}

/// Which piece of the premetric realizes the minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Branch {
    Segment,
    TangentArc,
    /// Through the origin, crossing the boundary at `z`.
    Through { z: Vector },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicSpace {
    k: f64,
    dim: usize,
    mode: GeometryMode,
}

/// Angle between two nonzero vectors, robust near 0 and π.
fn angle_between(a: &Vector, b: &Vector) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Unit vector orthogonal to `a`, in the plane of `a` and `b` and on `b`'s side.
/// Falls back to an arbitrary fixed perpendicular when `b` is parallel to `a`.
fn perpendicular_towards(a_hat: &Vector, b: &Vector) -> Vector {
    let t = b - a_hat * a_hat.dot(b);
    let len = t.norm();
    if len > 1e-14 * b.norm().max(1e-300) {
        return t / len;
    }
    let helper = if a_hat.x.abs() < 0.9 { Vector::x() } else { Vector::y() };
    let t = helper - a_hat * a_hat.dot(&helper);
    t.normalize()
}

impl GeodesicSpace {
    pub fn riemannian(k: f64, dim: usize) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidConfig(format!("k must be positive, got {k}")));
        }
        Ok(GeodesicSpace {
            k,
            dim,
            mode: GeometryMode::Riemannian,
        })
    }

    pub fn euclidean(dim: usize) -> Self {
        GeodesicSpace {
            k: 0.0,
            dim,
            mode: GeometryMode::Euclidean,
        }
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> GeometryMode {
        self.mode
    }

    pub fn is_valid(&self, x: &Vector) -> bool {
        x.norm() >= self.k - 1e-9
    }

    fn check(&self, x: &Vector) -> Result<()> {
        if self.is_valid(x) {
            Ok(())
        } else {
            Err(Error::InvalidTransformPoint {
                norm: x.norm(),
                k: self.k,
            })
        }
    }

    /// Geodesic distance; both points must lie outside the invalid ball.
    pub fn distance(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    pub fn distance_unchecked(&self, x: &Vector, y: &Vector) -> f64 {
        self.evaluate(x, y).0
    }

    /// Cheap lower bound: `d(x, y) >= min(|x - y|, |x + y|)`.
    pub fn lower_bound(&self, x: &Vector, y: &Vector) -> f64 {
        match self.mode {
            GeometryMode::Euclidean => (x - y).norm(),
            GeometryMode::Riemannian => (x - y).norm().min((x + y).norm()),
        }
    }

    /// Distance together with the branch that attains it. Ties go to the
    /// outside branch.
    pub fn evaluate(&self, x: &Vector, y: &Vector) -> (f64, Branch) {
        self.evaluate_within(x, y, f64::INFINITY)
            .expect("unbounded evaluation always succeeds")
    }

    /// Like [`evaluate`](Self::evaluate), but returns `None` as soon as the
    /// distance is known to exceed `radius`.
    pub fn evaluate_within(&self, x: &Vector, y: &Vector, radius: f64) -> Option<(f64, Branch)> {
        let direct = (x - y).norm();
        if self.mode == GeometryMode::Euclidean {
            return (direct <= radius).then_some((direct, Branch::Segment));
        }
        // |x - z| + |y + z| >= |x + y| by the triangle inequality, and the
        // outside path is never shorter than the chord.
        let flipped = (x + y).norm();
        if direct.min(flipped) > radius {
            return None;
        }
        let (outside, branch) = self.outside(x, y, direct);
        if flipped >= outside || flipped > radius {
            return (outside <= radius).then_some((outside, branch));
        }
        let (through, z) = self.through(x, y);
        if through < outside {
            (through <= radius).then_some((through, Branch::Through { z }))
        } else {
            (outside <= radius).then_some((outside, branch))
        }
    }

    /// Shortest path that never enters the open ball.
    fn outside(&self, x: &Vector, y: &Vector, direct: f64) -> (f64, Branch) {
        let k = self.k;
        let (r1, r2) = (x.norm(), y.norm());
        if r1 == 0.0 || r2 == 0.0 {
            return (direct, Branch::Segment);
        }
        let t1 = (r1 * r1 - k * k).max(0.0).sqrt();
        let t2 = (r2 * r2 - k * k).max(0.0).sqrt();
        let arc = excess_angle(x, y, k, t1, t2);
        if arc <= 0.0 {
            (direct, Branch::Segment)
        } else {
            (t1 + t2 + k * arc, Branch::TangentArc)
        }
    }

    /// `min_{|z| = k} |x - z| + |y + z|` and its minimizer.
    fn through(&self, x: &Vector, y: &Vector) -> (f64, Vector) {
        let k = self.k;
        let w = -y;
        let (r1, r2) = (x.norm(), w.norm());
        let t1 = (r1 * r1 - k * k).max(0.0).sqrt();
        let t2 = (r2 * r2 - k * k).max(0.0).sqrt();
        if excess_angle(x, &w, k, t1, t2) > 0.0 {
            // The segment x -> -y crosses the ball; the minimum is its length,
            // attained where it first meets the sphere.
            let d = w - x;
            let (a, b, c) = (d.norm_squared(), x.dot(&d), x.norm_squared() - k * k);
            let disc = (b * b - a * c).max(0.0);
            let t = ((-b - disc.sqrt()) / a).clamp(0.0, 1.0);
            return (d.norm(), x + d * t);
        }
        let e1 = x / r1;
        let gamma = angle_between(x, &w);
        if gamma <= 1e-15 {
            let z = e1 * k;
            return ((x - z).norm() + (w - z).norm(), z);
        }
        let e2 = perpendicular_towards(&e1, &w);
        let theta = minimize_arc(r1, r2, k, gamma);
        let (s, c) = theta.sin_cos();
        let z = (e1 * c + e2 * s) * k;
        ((x - z).norm() + (w - z).norm(), z)
    }

    /// Gradient of the distance with respect to `x`.
    pub fn gradient(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        self.check(x)?;
        self.check(y)?;
        let (d, g) = self.distance_and_gradient(x, y);
        if d == 0.0 || (x - y).norm() == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        Ok(g)
    }

    /// Distance and its gradient in one pass. The gradient is zero when the
    /// distance is zero.
    pub fn distance_and_gradient(&self, x: &Vector, y: &Vector) -> (f64, Vector) {
        let (d, branch) = self.evaluate(x, y);
        (d, self.branch_gradient(x, y, d, branch))
    }

    pub(crate) fn branch_gradient(&self, x: &Vector, y: &Vector, d: f64, branch: Branch) -> Vector {
        if d == 0.0 {
            return Vector::zeros();
        }
        match branch {
            Branch::Segment => (x - y) / (x - y).norm(),
            Branch::TangentArc => {
                let r = x.norm();
                let x_hat = x / r;
                let u = perpendicular_towards(&x_hat, y);
                let radial = (r * r - self.k * self.k).max(0.0).sqrt() / r;
                x_hat * radial - u * (self.k / r)
            }
            Branch::Through { z } => {
                let to_x = x - z;
                let len = to_x.norm();
                if len > 1e-12 {
                    to_x / len
                } else {
                    x / x.norm()
                }
            }
        }
    }
}

/// `∠(a, b) - acos(k/|a|) - acos(k/|b|)`: positive exactly when the segment
/// between `a` and `b` dips into the ball. `t1`, `t2` are the tangent lengths.
fn excess_angle(a: &Vector, b: &Vector, k: f64, t1: f64, t2: f64) -> f64 {
    let (cos_g, sin_g) = (a.dot(b), a.cross(b).norm());
    let (cos_t, sin_t) = (k * k - t1 * t2, k * (t1 + t2));
    (sin_g * cos_t - cos_g * sin_t).atan2(cos_g * cos_t + sin_g * sin_t)
}

/// Minimizes `f(θ) = |x - z(θ)| + |w - z(θ)|` over the arc `θ ∈ [0, γ]`, where
/// `x = r1·e1`, `w = r2·(cos γ e1 + sin γ e2)` and `z(θ) = k(cos θ e1 + sin θ e2)`.
/// Safeguarded Newton on `f'`, which is negative at 0 and positive at `γ`;
/// falls back to false position, then bisection, where `f` is not convex.
fn minimize_arc(r1: f64, r2: f64, k: f64, gamma: f64) -> f64 {
    let (sin_g, cos_g) = gamma.sin_cos();
    let (p1, p2) = (r1 * k, r2 * k);
    let (q1, q2) = (r1 * r1 + k * k, r2 * r2 + k * k);
    let deriv = |theta: f64| {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = (sin_g * ct - cos_g * st, cos_g * ct + sin_g * st);
        let inv_a = 1.0 / (q1 - 2.0 * p1 * ct).max(0.0).sqrt().max(1e-300);
        let inv_b = 1.0 / (q2 - 2.0 * p2 * cp).max(0.0).sqrt().max(1e-300);
        let (s1, s2) = (p1 * st * inv_a, p2 * sp * inv_b);
        let d1 = s1 - s2;
        let d2 = (p1 * ct - s1 * s1) * inv_a + (p2 * cp - s2 * s2) * inv_b;
        (d1, d2)
    };
    let (mut lo, mut hi) = (0.0, gamma);
    let (mut f_lo, mut f_hi) = (-1.0, 1.0);
    let mut theta = gamma * r2 / (r1 + r2);
    let mut fell_back = false;
    for _ in 0..100 {
        let (d1, d2) = deriv(theta);
        if d1 == 0.0 {
            return theta;
        }
        if d1 < 0.0 {
            (lo, f_lo) = (theta, d1);
        } else {
            (hi, f_hi) = (theta, d1);
        }
        let newton = theta - d1 / d2;
        let next = if d2 > 0.0 && newton > lo && newton < hi {
            fell_back = false;
            newton
        } else {
            let secant = lo - f_lo * (hi - lo) / (f_hi - f_lo);
            let inner = lo + 0.05 * (hi - lo) < secant && secant < hi - 0.05 * (hi - lo);
            let pick = if !fell_back && inner { secant } else { 0.5 * (lo + hi) };
            fell_back = true;
            pick
        };
        // Newton converges quadratically, so a step this small leaves an
        // error far below it.
        if (next - theta).abs() < 1e-10 || hi - lo < 1e-12 {
            return next;
        }
        theta = next;
    }
    theta
}

/// Vote samples with a spatial index, shared by score fields at every noise
/// level.
#[derive(Debug)]
struct Votes {
    samples: Vec<Vector>,
    index: NeighborIndex,
}

/// Kernel-smoothed score field over a vote cloud.
#[derive(Debug, Clone)]
pub struct ScoreField {
    votes: Arc<Votes>,
    space: GeodesicSpace,
    sigma: f64,
    /// Votes beyond `cutoff * sigma` are ignored; `None` sums over all votes.
    cutoff: Option<f64>,
}

/// Votes whose weight is below `exp(-CUTOFF^2)` (about 1e-7) of the nearest
/// vote are dropped by default.
pub const DEFAULT_CUTOFF: f64 = 4.0;

impl ScoreField {
    pub fn new(data: &TransformSpace, space: GeodesicSpace, sigma: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
        }
        if space.mode == GeometryMode::Riemannian && (data.k - space.k).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "vote space k = {} but geodesic k = {}",
                data.k, space.k
            )));
        }
        Ok(ScoreField {
            votes: Arc::new(Votes {
                index: NeighborIndex::new(&data.samples, data.dim),
                samples: data.samples.clone(),
            }),
            space,
            sigma,
            cutoff: Some(DEFAULT_CUTOFF),
        })
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        ScoreField {
            sigma,
            ..self.clone()
        }
    }

    /// Sum over every vote instead of a `cutoff * sigma` neighborhood.
    pub fn exact(mut self) -> Self {
        self.cutoff = None;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn space(&self) -> &GeodesicSpace {
        &self.space
    }

    pub fn votes(&self) -> &[Vector] {
        &self.votes.samples
    }

    fn candidates(&self, x: &Vector) -> Option<Vec<usize>> {
        Some(self.gather(x, self.cutoff? * self.sigma))
    }

    /// Votes within `radius` of `x` or of `-x`, each once.
    fn gather(&self, x: &Vector, radius: f64) -> Vec<usize> {
        let index = &self.votes.index;
        let mut ids = Vec::new();
        index.within_into(x, radius, &mut ids);
        if self.space.mode == GeometryMode::Riemannian {
            let start = ids.len();
            index.within_into(&-x, radius, &mut ids);
            let r2 = radius * radius;
            let mut keep = start;
            for j in start..ids.len() {
                let i = ids[j];
                if (index.point(i) - x).norm_squared() > r2 {
                    ids[keep] = i;
                    keep += 1;
                }
            }
            ids.truncate(keep);
        }
        ids
    }

    /// `(vote index, distance, gradient)` for the votes that contribute at `x`.
    fn terms(&self, x: &Vector) -> Vec<(usize, f64, Vector)> {
        let eval = |i: usize, radius: f64| {
            let y = &self.votes.samples[i];
            let (d, branch) = self.space.evaluate_within(x, y, radius)?;
            Some((i, d, self.space.branch_gradient(x, y, d, branch)))
        };
        if let (Some(ids), Some(c)) = (self.candidates(x), self.cutoff) {
            let radius = c * self.sigma;
            let near: Vec<_> = ids.into_iter().filter_map(|i| eval(i, radius)).collect();
            if !near.is_empty() {
                return near;
            }
            // Nothing close: the nearest vote bounds the closest distance, and
            // anything more than `radius` beyond it in squared terms is dropped.
            let index = &self.votes.index;
            let mut seeds = vec![index.nearest(x)];
            if self.space.mode == GeometryMode::Riemannian {
                seeds.push(index.nearest(&-x));
            }
            let bound = seeds
                .into_iter()
                .flatten()
                .filter_map(|(i, _)| eval(i, f64::INFINITY).map(|t| t.1))
                .fold(f64::INFINITY, f64::min);
            if bound.is_finite() {
                let reach = (bound * bound + radius * radius).sqrt();
                let near: Vec<_> = self
                    .gather(x, reach)
                    .into_iter().filter_map(|i| eval(i, reach)).collect();
                if !near.is_empty() {
                    return near;
                }
            }
        }
        (0..self.votes.samples.len())
            .filter_map(|i| eval(i, f64::INFINITY))
            .collect()
    }

    fn normalized_weights(&self, terms: &[(usize, f64, Vector)]) -> Vec<f64> {
        let s2 = self.sigma * self.sigma;
        let d_min = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        let raw: Vec<f64> = terms
            .iter()
            .map(|t| (-(t.1 * t.1 - d_min * d_min) / s2).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    /// Posterior weights `w_i ∝ exp(-d(x, y_i)^2 / σ^2)` over contributing votes.
    pub fn weights(&self, x: &Vector) -> Result<Vec<(usize, f64)>> {
        self.space.check(x)?;
        let terms = self.terms(x);
        let w = self.normalized_weights(&terms);
        Ok(terms.iter().map(|t| t.0).zip(w).collect())
    }

    /// `g_σ(x) = Σ w_i d_i ∇d_i / |∇d_i|^2`.
    ///
    /// Points away from the votes: stepping `x - c·g` with `c > 0` moves
    /// toward the data.
    pub fn score(&self, x: &Vector) -> Result<Vector> {
        self.space.check(x)?;
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &Vector) -> Vector {
        let terms = self.terms(x);
        let weights = self.normalized_weights(&terms);
        let mut g = Vector::zeros();
        for ((_, d, grad), w) in terms.iter().zip(weights) {
            if *d == 0.0 {
                continue;
            }
            let n2 = grad.norm_squared();
            debug_assert!((n2 - 1.0).abs() < 1e-6, "|grad d|^2 = {n2}");
            g += grad * (w * d / n2);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn v2(x: f64, y: f64) -> Vector {
        Vector::new(x, y, 0.0)
    }

    #[test]
    fn identity_distance_is_zero() {
        let s = GeodesicSpace::riemannian(0.3, 2).unwrap();
        let x = v2(0.5, 0.2);
        assert_eq!(s.distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn through_origin_beats_going_around() {
        let s = GeodesicSpace::riemannian(0.3, 2).unwrap();
        let (x, y) = (v2(0.5, 0.0), v2(-0.5, 0.0));
        let (d, branch) = s.evaluate(&x, &y);
        assert!((d - 0.4).abs() < 1e-12, "{d}");
        assert!(matches!(branch, Branch::Through { .. }));
        let around = s.outside(&x, &y, 1.0).0;
        let want = 2.0 * 0.4 + 0.3 * (PI - 2.0 * (0.6f64).acos());
        assert!((around - want).abs() < 1e-12);
        assert!((around - 1.186).abs() < 1e-3);
    }

    #[test]
    fn collinear_outside_segment() {
        let s = GeodesicSpace::riemannian(0.3, 2).unwrap();
        let d = s.distance(&v2(0.4, 0.0), &v2(0.8, 0.0)).unwrap();
        assert!((d - 0.4).abs() < 1e-15);
    }

    #[test]
    fn antipodal_boundary_points_coincide() {
        let s = GeodesicSpace::riemannian(0.3, 2).unwrap();
        assert!(s.distance(&v2(0.3, 0.0), &v2(-0.3, 0.0)).unwrap() < 1e-15);
    }

    #[test]
    fn inside_ball_is_rejected() {
        let s = GeodesicSpace::riemannian(0.3, 2).unwrap();
        let err = s.distance(&v2(0.1, 0.0), &v2(0.5, 0.0)).unwrap_err();
        assert!(err.to_string().starts_with("invalid transform point"));
        assert!(matches!(
            s.gradient(&v2(0.5, 0.0), &v2(0.5, 0.0)),
            Err(Error::CoincidentPoints)
        ));
    }

    #[test]
    fn euclidean_mode_is_plain_distance() {
        let s = GeodesicSpace::euclidean(2);
        let (x, y) = (v2(0.01, 0.0), v2(-0.02, 0.3));
        assert_eq!(s.distance(&x, &y).unwrap(), (x - y).norm());
    }

    #[test]
    fn segment_gradient_is_unit_direction() {
        let s = GeodesicSpace::riemannian(0.3, 2).unwrap();
        let (x, y) = (v2(0.9, 0.1), v2(0.6, 0.5));
        let g = s.gradient(&x, &y).unwrap();
        assert!((g - (x - y).normalize()).norm() < 1e-15);
    }

    #[test]
    fn score_single_datum_attracts() {
        let data = TransformSpace {
            kind: crate::transform::SpaceKind::Translational,
            k: 0.0,
            dim: 2,
            samples: vec![v2(0.7, 0.0)],
        };
        let field = ScoreField::new(&data, GeodesicSpace::euclidean(2), 0.1).unwrap();
        let x = v2(0.2, 0.4);
        let g = field.score(&x).unwrap();
        let y = v2(0.7, 0.0);
        assert!((g - (x - y)).norm() < 1e-12);
        let stepped = x - g * 0.5;
        assert!((stepped - y).norm() < (x - y).norm());
        assert!((stepped - y).normalize().dot(&(x - y).normalize()) > 1.0 - 1e-12);
    }

    #[test]
    fn symmetric_data_cancels_along_axis() {
        let data = TransformSpace {
            kind: crate::transform::SpaceKind::Translational,
            k: 0.0,
            dim: 2,
            samples: vec![v2(0.5, 0.2), v2(-0.5, 0.2)],
        };
        let field = ScoreField::new(&data, GeodesicSpace::euclidean(2), 0.3).unwrap();
        let g = field.score(&v2(0.0, 0.9)).unwrap();
        assert!(g.x.abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(x in -1.0..1.0f64, y in -1.0..1.0f64, sigma in 0.01..0.5f64) {
            let samples: Vec<Vector> = (0..60)
                .map(|i| {
                    let a = i as f64 * 0.37;
                    v2(a.cos(), a.sin()) * (0.3 + 0.01 * i as f64)
                })
                .collect();
            let data = TransformSpace {
                kind: crate::transform::SpaceKind::Reflective,
                k: 0.3,
                dim: 2,
                samples,
            };
            let field = ScoreField::new(&data, GeodesicSpace::riemannian(0.3, 2).unwrap(), sigma).unwrap();
            let mut p = v2(x, y);
            if p.norm() < 0.3 {
                p = p.normalize() * 0.35 + v2(1e-3, 0.0);
            }
            let total: f64 = field.weights(&p).unwrap().iter().map(|w| w.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn far_walkers_score_like_the_full_sum() {
        let data = TransformSpace {
            kind: crate::transform::SpaceKind::Reflective,
            k: 0.3,
            dim: 2,
            samples: vec![v2(0.8, 0.1), v2(0.75, 0.12), v2(-0.2, 0.9)],
        };
        let geo = GeodesicSpace::riemannian(0.3, 2).unwrap();
        let near = ScoreField::new(&data, geo, 0.025).unwrap();
        let full = near.clone().exact();
        for x in [v2(1.5, -1.0), v2(-0.9, -0.9), v2(0.0, 0.31), v2(0.3, 1.4)] {
            assert!((near.score(&x).unwrap() - full.score(&x).unwrap()).norm() < 1e-9);
        }
    }
}
