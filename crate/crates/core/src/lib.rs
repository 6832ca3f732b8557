//! Partial and global symmetry detection for 2D/3D point clouds.
//!
//! Point pairs vote for candidate transformations in a bounded embedding of
//! the transformation space; annealed Langevin dynamics under a geodesic that
//! respects the `(n, 0) = (-n, 0)` identification then concentrates walkers on
//! the density modes, which are clustered and decoded into symmetries.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apps;
pub mod cluster;
pub mod error;
pub mod extract;
pub mod geodesic;
pub mod geometry;
pub mod langevin;
pub mod meanshift;
pub mod metrics;
pub mod pipeline;
pub mod symmetry;
pub mod transform;

pub use error::{Error, Result};
