//! Mean curvature flow of compact spacelike-convex submanifolds of one
//! spacelike codimension in pseudo-Euclidean space R^{n+1,k}.
//!
//! The crate provides the signature-space kernel, discrete immersions in
//! vertex and Gauss/support parameterization, the scalar invariants that are
//! monotone or bounded along the flow (pinching, noncollapsing, acausality),
//! raw and normalized flow integration, and spectral analysis of the
//! normalized flow around the round sphere.

pub mod convergence;
pub mod diagnostics;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod immersion;
pub mod normalized;
pub mod runner;
pub mod space;
pub mod spherical;

pub use error::{Error, Result};
