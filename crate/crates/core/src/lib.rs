//! Expected exit times of symmetric α-stable processes from convex planar
//! domains, their harmonic extensions to the upper half-space, and tools for
//! checking concavity and Hessian signatures numerically.

pub mod analysis;
pub mod closedform;
pub mod error;
pub mod extension;
pub mod geom;
pub mod linalg;
pub mod phi;
pub mod quad;
pub mod rng;
pub mod wos;

pub use error::{Error, Result};
