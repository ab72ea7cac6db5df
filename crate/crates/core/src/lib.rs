//! Numerical laboratory for gradient blow-up between two nearly touching
//! insulating inclusions.
//!
//! The pipeline runs from the inclusion geometry to a weighted eigenproblem
//! on the sphere, then to the exponent `α(λ₁)` and the predicted rate
//! `ε^{(α−1)/2}`. The reduced disk solver, the full gap solver and the
//! radial mode ODE check the prediction independently.

pub mod error;
pub mod exponents;
pub mod gapfull;
pub mod geometry;
pub mod harness;
pub mod numerics;
pub mod radialode;
pub mod reduced;
pub mod spectral;

pub use error::{GapError, Result};
