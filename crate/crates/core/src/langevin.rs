//! Annealed Langevin dynamics over a transformation space.
//!
//! At noise level `σ_i` every step perturbs a walker with Gaussian noise and
//! then moves it against the kernel score field `g_σ`. Both moves go through
//! [`walk`], which sends motion that would enter the invalid ball out through
//! the antipodal boundary point instead.
//!
//! `step_size` is the dimensionless fraction `λ` of the per-level step
//! `α_i = λ σ_i²`: noise is `β √α_i ε` and drift is `-λ g_σ(x)`. With `λ = 1`,
//! `β = 0` and flat geometry, one step is exactly a Gaussian mean-shift step.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesic::{GeodesicSpace, GeometryMode, ScoreField};
use crate::geometry::{to_coords, Vector};
use crate::transform::TransformSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinConfig {
    /// Final (smallest) noise scale `σ_k`.
    pub kernel_size: f64,
    pub num_levels: usize,
    /// Initial (largest) noise scale.
    pub sigma_max: f64,
    /// Fraction `λ` in `α_i = λ σ_i²`.
    pub step_size: f64,
    pub steps_per_level: usize,
    pub num_walkers: usize,
    /// Stochasticity multiplier; 0 gives deterministic hill climbing and 1
    /// samples the smoothed vote density itself.
    pub beta: f64,
    /// Invalid-ball radius for reflective spaces built with this config.
    pub k: f64,
    pub seed: u64,
    /// Record every n-th step of every walker; `None` keeps only final positions.
    pub trace_every: Option<usize>,
    /// Smallest vote subset used at coarse levels. Level `i` scores against
    /// `max(floor, M (σ_k/σ_i)^d)` votes of a fixed random permutation, where
    /// `M = min(N, vote_budget)`; `None` always uses every vote.
    pub coarse_votes: Option<usize>,
    /// Most votes scored at any level.
    pub vote_budget: usize,
    /// Share of the final level's steps replaced by noise-free mean-shift
    /// steps (`λ = 1`), so walkers settle on their modes before clustering.
    pub quench: f64,
}

pub const DEFAULT_TOTAL_STEPS: usize = 50_000;
pub const DEFAULT_VOTE_BUDGET: usize = 16_000;
pub const DEFAULT_QUENCH: f64 = 0.2;

/// Walkers at full temperature spread along the ridges that partial
/// symmetries leave in the vote density. Much cooler chains lock onto the
/// strongest ridges and starve weaker modes.
pub const DEFAULT_BETA: f64 = 0.5;

impl LangevinConfig {
    /// Tuned hyperparameters per dimension: kernel 0.025 / k 0.3 / step 0.06 in
    /// 2D, kernel 0.08 / k 0.5 / step 0.02 in 3D, 200 walkers, 50K steps.
    pub fn default_for(dim: usize) -> Self {
        let (kernel_size, step_size, k) = if dim == 3 {
            (0.08, 0.02, 0.5)
        } else {
            (0.025, 0.06, 0.3)
        };
        let num_levels = 10;
        LangevinConfig {
            kernel_size,
            num_levels,
            sigma_max: 0.5,
            step_size,
            steps_per_level: DEFAULT_TOTAL_STEPS / num_levels,
            num_walkers: 200,
            beta: DEFAULT_BETA,
            k,
            seed: 0,
            trace_every: None,
            coarse_votes: Some(256),
            vote_budget: DEFAULT_VOTE_BUDGET,
            quench: DEFAULT_QUENCH,
        }
    }

    pub fn total_steps(&self) -> usize {
        self.steps_per_level * self.num_levels
    }

    /// Splits `total` steps evenly across levels (rounding up).
    pub fn with_total_steps(mut self, total: usize) -> Self {
        self.steps_per_level = total.div_ceil(self.num_levels.max(1));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.kernel_size > 0.0) {
            return bad("kernel size must be > 0");
        }
        if !(self.sigma_max >= self.kernel_size) {
            return bad("sigma_max must be ≥ kernel size");
        }
        if !(self.step_size > 0.0) {
            return bad("step size must be > 0");
        }
        if self.steps_per_level < 1 {
            return bad("steps must be ≥ 1");
        }
        if self.num_levels < 1 {
            return bad("levels must be ≥ 1");
        }
        if self.num_walkers < 1 {
            return bad("walkers must be ≥ 1");
        }
        if !(self.beta >= 0.0) {
            return bad("beta must be ≥ 0");
        }
        if self.trace_every == Some(0) {
            return bad("trace interval must be ≥ 1");
        }
        if !(0.0..=1.0).contains(&self.quench) {
            return bad("quench must be in [0, 1]");
        }
        if self.vote_budget < 1 {
            return bad("vote budget must be ≥ 1");
        }
        if self.coarse_votes == Some(0) {
            return bad("coarse vote floor must be ≥ 1");
        }
        Ok(())
    }

    /// Number of votes scored at each level out of `total`.
    pub fn level_vote_counts(&self, total: usize, dim: usize) -> Vec<usize> {
        self.noise_levels()
            .iter()
            .map(|&sigma| match self.coarse_votes {
                None => total,
                Some(floor) => {
                    let share = (self.kernel_size / sigma).powi(dim as i32);
                    let budget = total.min(self.vote_budget);
                    ((budget as f64 * share).ceil() as usize).max(floor).min(budget)
                }
            })
            .collect()
    }

    /// Geometric schedule from `sigma_max` down to `kernel_size`.
    pub fn noise_levels(&self) -> Vec<f64> {
        let n = self.num_levels;
        if n == 1 {
            return vec![self.kernel_size];
        }
        let ratio = self.kernel_size / self.sigma_max;
        (0..n)
            .map(|i| self.sigma_max * ratio.powf(i as f64 / (n - 1) as f64))
            .collect()
    }
}

/// Moves `x` by `g` in the transformation space.
///
/// A target outside the ball of radius `k` is returned as is. A target inside
/// it stops the motion at the entry point `Y`, jumps to `-Y` (the same plane),
/// and spends the rest of the displacement there: its tangential part as arc
/// length around the sphere, mirrored to match the flipped normal, and its
/// inward radial part as outward radial motion.
pub fn walk(x: &Vector, g: &Vector, k: f64) -> Result<Vector> {
    let r = x.norm();
    if r < k - 1e-9 {
        return Err(Error::InsideInvalidRegion { norm: r, k });
    }
    let target = x + g;
    let a = g.norm_squared();
    if k == 0.0 || a == 0.0 || target.norm() >= k {
        return Ok(target);
    }
    let b = x.dot(g);
    let c = r * r - k * k;
    let disc = b * b - a * c;
    if b >= 0.0 || disc <= 0.0 {
        return Ok(target);
    }
    let t = ((-b - disc.sqrt()) / a).max(0.0);
    if t >= 1.0 {
        return Ok(target);
    }
    let entry = x + g * t;
    let y_hat = entry / entry.norm();
    let rest = g * (1.0 - t);
    let radial = rest.dot(&y_hat);
    let tangential = rest - y_hat * radial;
    let arc = tangential.norm();
    let moved = if arc > 0.0 {
        let phi = arc / k;
        y_hat * phi.cos() + (tangential / arc) * phi.sin()
    } else {
        y_hat
    };
    Ok(-moved * (k + radial.abs()))
}

/// Per-walker final positions and, optionally, decimated trajectories.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WalkerTrace {
    pub final_positions: Vec<Vector>,
    /// `paths[w]` holds `(step, position)` records for walker `w`.
    pub paths: Option<Vec<Vec<(usize, Vector)>>>,
}

#[derive(Serialize)]
struct TraceRecord {
    walker: usize,
    step: usize,
    x: Vec<f64>,
}

impl WalkerTrace {
    /// JSON lines, one `{"walker":i,"step":t,"x":[...]}` record per sample.
    /// Without recorded paths, emits the final positions as `step` = `last_step`.
    pub fn write_jsonl<W: Write>(&self, out: &mut W, dim: usize, last_step: usize) -> Result<()> {
        let mut emit = |walker, step, x: &Vector| -> Result<()> {
            let rec = TraceRecord {
                walker,
                step,
                x: to_coords(x, dim),
            };
            serde_json::to_writer(&mut *out, &rec)?;
            out.write_all(b"\n")?;
            Ok(())
        };
        match &self.paths {
            Some(paths) => {
                for (w, path) in paths.iter().enumerate() {
                    for (step, x) in path {
                        emit(w, *step, x)?;
                    }
                }
            }
            None => {
                for (w, x) in self.final_positions.iter().enumerate() {
                    emit(w, last_step, x)?;
                }
            }
        }
        Ok(())
    }
}

type Path = Vec<(usize, Vector)>;

/// Annealed Langevin sampler bound to one vote space.
#[derive(Debug, Clone)]
pub struct Sampler {
    field: ScoreField,
    level_fields: Vec<ScoreField>,
    cfg: LangevinConfig,
    levels: Vec<f64>,
}

impl Sampler {
    pub fn new(space: &TransformSpace, geo: GeodesicSpace, cfg: &LangevinConfig) -> Result<Self> {
        cfg.validate()?;
        if space.dim != geo.dim() {
            return Err(Error::DimensionMismatch {
                expected: geo.dim(),
                got: space.dim,
            });
        }
        let levels = cfg.noise_levels();
        let field = ScoreField::new(space, geo, levels[0])?;
        let n = space.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        order.shuffle(&mut rng);
        let counts = cfg.level_vote_counts(n, space.dim);
        let level_fields = levels
            .iter()
            .zip(counts)
            .map(|(&sigma, m)| {
                if m == n {
                    return Ok(field.with_sigma(sigma));
                }
                let subset = TransformSpace {
                    kind: space.kind,
                    k: space.k,
                    dim: space.dim,
                    samples: order[..m].iter().map(|&i| space.samples[i]).collect(),
                };
                ScoreField::new(&subset, geo, sigma)
            })
            .collect::<Result<_>>()?;
        Ok(Sampler {
            field,
            level_fields,
            cfg: cfg.clone(),
            levels,
        })
    }

    /// Sums the score over every vote at every level, with no neighborhood
    /// truncation.
    pub fn exact(mut self) -> Self {
        self.field = self.field.exact();
        self.level_fields = self.levels.iter().map(|&s| self.field.with_sigma(s)).collect();
        self
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    fn k(&self) -> f64 {
        self.field.space().k()
    }

    fn dim(&self) -> usize {
        self.field.space().dim()
    }

    /// One noise-then-drift update at noise scale `sigma` with a field already
    /// set to that scale.
    fn step_with(&self, field: &ScoreField, x: &Vector, sigma: f64, rng: &mut ChaCha8Rng) -> Vector {
        self.update(field, x, sigma, self.cfg.step_size, self.cfg.beta, rng)
    }

    fn update(&self, field: &ScoreField, x: &Vector, sigma: f64, lambda: f64, beta: f64, rng: &mut ChaCha8Rng) -> Vector {
        let k = self.k();
        let mut perturbed = *x;
        if beta > 0.0 {
            let scale = beta * lambda.sqrt() * sigma;
            let mut eps = Vector::zeros();
            for c in 0..self.dim() {
                let e: f64 = StandardNormal.sample(rng);
                eps[c] = e;
            }
            perturbed = walk(x, &(eps * scale), k).expect("walker stays valid");
        }
        let g = field.score_unchecked(&perturbed);
        walk(&perturbed, &(-g * lambda), k).expect("walker stays valid")
    }

    /// One update at noise scale `sigma`, scored against every vote.
    pub fn step(&self, x: &Vector, sigma: f64, rng: &mut ChaCha8Rng) -> Result<Vector> {
        if !self.field.space().is_valid(x) {
            return Err(Error::InvalidTransformPoint {
                norm: x.norm(),
                k: self.k(),
            });
        }
        let field = self.field.with_sigma(sigma);
        Ok(self.step_with(&field, x, sigma, rng))
    }

    fn walker_rng(&self, walker: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(walker as u64);
        rng
    }

    /// Uniform random direction, radius uniform in `[k, k + √d]`. Flat
    /// spaces have no such annulus, so walkers start on random votes.
    fn initial_position(&self, rng: &mut ChaCha8Rng) -> Vector {
        if self.field.space().mode() == GeometryMode::Euclidean {
            let votes = self.field.votes();
            return votes[rng.random_range(0..votes.len())];
        }
        let dim = self.dim();
        let dir = loop {
            let mut v = Vector::zeros();
            for c in 0..dim {
                let e: f64 = StandardNormal.sample(rng);
                v[c] = e;
            }
            let n = v.norm();
            if n > 1e-12 {
                break v / n;
            }
        };
        let r = self.k() + rng.random::<f64>() * (dim as f64).sqrt();
        dir * r
    }

    pub fn initial_positions(&self) -> Vec<Vector> {
        (0..self.cfg.num_walkers)
            .map(|w| {
                let mut rng = self.walker_rng(w);
                // Burn a distinct stream offset so initialization and dynamics
                // draw from different parts of the walker's stream.
                rng.set_word_pos(1 << 40);
                self.initial_position(&mut rng)
            })
            .collect()
    }

    pub fn run(&self) -> Result<WalkerTrace> {
        self.run_from(self.initial_positions())
    }

    pub fn run_from(&self, init: Vec<Vector>) -> Result<WalkerTrace> {
        for x in &init {
            if !self.field.space().is_valid(x) {
                return Err(Error::InvalidTransformPoint {
                    norm: x.norm(),
                    k: self.k(),
                });
            }
        }
        let fields = &self.level_fields;
        let trace_every = self.cfg.trace_every;
        let per_level = self.cfg.steps_per_level;
        let hot_final = per_level - (self.cfg.quench * per_level as f64).round() as usize;
        let results: Vec<(Vector, Option<Path>)> = init
            .into_par_iter()
            .enumerate()
            .map(|(w, mut x)| {
                let mut rng = self.walker_rng(w);
                let mut path = trace_every.map(|_| vec![(0, x)]);
                let mut step = 0;
                let last = fields.len() - 1;
                for (level, (field, &sigma)) in fields.iter().zip(&self.levels).enumerate() {
                    for i in 0..per_level {
                        if level == last && i >= hot_final {
                            let next = self.update(field, &x, sigma, 1.0, 0.0, &mut rng);
                            let moved = (next - x).norm();
                            x = next;
                            if moved < 1e-9 * sigma {
                                step += per_level - i;
                                break;
                            }
                        } else {
                            x = self.step_with(field, &x, sigma, &mut rng);
                        }
                        step += 1;
                        if let (Some(p), Some(every)) = (path.as_mut(), trace_every) {
                            if step % every == 0 {
                                p.push((step, x));
                            }
                        }
                    }
                }
                (x, path)
            })
            .collect();
        let final_positions = results.iter().map(|r| r.0).collect();
        let paths = trace_every.map(|_| results.into_iter().map(|r| r.1.unwrap_or_default()).collect());
        Ok(WalkerTrace {
            final_positions,
            paths,
        })
    }
}

/// Runs the full annealed schedule from the default initialization.
pub fn run_langevin(space: &TransformSpace, geo: &GeodesicSpace, cfg: &LangevinConfig) -> Result<WalkerTrace> {
    if geo.mode() == GeometryMode::Riemannian && (space.k - geo.k()).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "vote space k = {} but geodesic k = {}",
            space.k,
            geo.k()
        )));
    }
    Sampler::new(space, *geo, cfg)?.run()
}
