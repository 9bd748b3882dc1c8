//! Shared numerical kernels: Krylov solver, FFT helpers, quadrature, interpolation.

pub mod fft2;
pub mod gmres;
pub mod interp;
pub mod quad;
pub mod radial;

pub use gmres::{gmres, GmresOutcome, Scalar};
