//! Spectral bundle solver for semidefinite programs.
//!
//! Solves `max ⟨C, X⟩ s.t. 𝒜X ∈ 𝒦, X ⪰ 0` (with `𝒦` mixing equality and
//! inequality rows) by minimizing the penalized dual
//! `f(y) = α·[λ_max(C − 𝒜*y)]₊ + ⟨b, y⟩` over `y_ℐ ≥ 0` with a proximal
//! bundle method whose model lives on a low-dimensional spectral set.
//! The primal iterate is tracked either explicitly or through a Nyström
//! sketch.

pub mod error;
pub mod bundle;
pub mod eigsolve;
pub mod problem;
pub mod rounding;
pub mod sketch;
pub mod subqp;
pub mod symlin;

pub use error::{Error, Result};
pub use nalgebra;
