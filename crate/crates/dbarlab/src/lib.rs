//! Inverse problem for the 2D Schrödinger equation at negative energy.
//!
//! The pipeline runs in four stages:
//!
//! - [`forward_dtn`]: the Dirichlet-to-Neumann matrix Φ(E) on the unit disk;
//! - [`faddeev`]: Faddeev eigenfunctions μ(x, k) from the Lippmann–Schwinger equation;
//! - [`scattering`]: the scattering amplitude b(λ), the ∂̄ data r(λ) and the boundary identity for b₂ − b₁;
//! - [`dbar_reconstruct`]: the ∂̄ equation in λ, μ₋₁(z) and the potential v = −2√|E| ∂_z μ₋₁.
//!
//! [`stability_lab`] runs stability experiments on top of these stages. [`cli`] drives them from the command line.
//!
//! All quantities assume E < 0. In this setting √E = i√|E| and
//! k(λ) = (i√|E|(λ + 1/λ)/2, √|E|(λ − 1/λ)/2).

pub mod cli;
pub mod core_types;
pub mod dbar_reconstruct;
pub mod error;
pub mod faddeev;
pub mod forward_dtn;
pub mod io;
pub mod numerics;
pub mod scattering;
pub mod stability_lab;

pub use error::{Error, Result};
pub use num_complex::Complex64;
