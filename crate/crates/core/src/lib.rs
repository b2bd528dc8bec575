//! Forward and inverse analysis of fractional diffusion driven by a
//! separable source `f(x) μ(t)`.

pub mod asymptotic;
pub mod error;
pub mod forward;
pub mod inverse;
pub mod mittag_leffler;
pub mod quadrature;
pub mod special;
pub mod spectral;
pub mod temporal;

pub use error::{Error, Result};
