//! Numerical path-space calculus for sub-Riemannian Lie groups.
//!
//! Pick a left-invariant sub-Riemannian structure with a complement
//! ([`registry`] or a model file), build its canonical connection
//! ([`geometry`]), develop smooth controls or simulate the horizontal diffusion
//! together with its transports ([`development`], [`diffusion`]), and check the
//! gradient formulas and functional inequalities on path space ([`pathcalc`],
//! [`verify`]).

pub mod development;
pub mod diffusion;
pub mod error;
pub mod functions;
pub mod geometry;
pub mod linalg;
pub mod pathcalc;
pub mod registry;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
