//! Space and space-time projection-based reduced-order models for
//! parametrized linear advection–diffusion(–reaction) problems, with Monte
//! Carlo and stochastic Galerkin uncertainty propagation.

pub mod affine;
pub mod banded;
pub mod error;
pub mod fom;
pub mod mc;
pub mod pod;
pub mod rom;
pub mod sg;
pub mod spacetime;
pub mod sparse;

pub use error::{Error, Result};
