//! Manifold denoising by projection onto an estimated convex hull.
//!
//! The pipeline fits a PCA subspace on a first block of noisy samples,
//! estimates the support function of the projected latent set from the
//! Gaussian tails of a second block, and projects every remaining sample
//! onto the resulting convex body by exhaustive search over a sphere net.
//!
//! Around that pipeline live the exact geometric oracles used for
//! validation ([`hull`]), seeded generators ([`datagen`]), calculators
//! for the closed-form error bounds ([`bounds`]) and a synthetic Cryo-EM
//! forward model ([`cryoem`]).
//!
//! Data-parallel loops go through [`par`]; they run on rayon when the
//! `parallel` feature is enabled (the default) and sequentially otherwise,
//! with identical results either way.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cryoem;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod hull;
pub mod io;
pub mod oracle;
pub mod par;
pub mod pca;
pub mod projection;

pub use error::{Error, Result};
pub use geometry::{Hyperplane, PointCloud, SphereNet};
