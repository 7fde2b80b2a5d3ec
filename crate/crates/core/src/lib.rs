//! Spectral numerics for fractional Sobolev bubbles near their manifold
//! and for the rescaled fractional fast-diffusion flow.
//!
//! Everything numerical happens on the sphere `S^N` (`N` in `{1, 2}`), where
//! `(-Δ)^s` becomes the diagonal operator `A_s` with eigenvalues `alpha(k)`.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constants;
pub mod discretization;
pub mod error;
pub mod fde;
pub mod functional;
pub mod harmonics;
pub mod manifold;
pub mod optimize;
pub mod sphere;
pub mod stability;
pub mod table;

pub use constants::{ConstantTable, ProblemParams};
pub use discretization::Discretization;
pub use error::{Error, Result};
pub use harmonics::{DegreeProjector, SphereField};
pub use manifold::{BubbleParams, Decomposition};
pub use sphere::{QuadratureGrid, SpherePoint};
