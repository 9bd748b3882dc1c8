//! Weak bump: b(λ) against the Born value (2π)^{-2} v̂(p(λ)) at 20 random λ with 0.2 ≤ |λ| ≤ 5.
//!
//! cargo run --release --example born_check -- [seed]

use dbarlab::core_types::{fourier_transform_at, make_bump_potential};
use dbarlab::faddeev::{k_of_lambda, LsGrid, LsOptions};
use dbarlab::scattering::scattering_b_at;
use dbarlab::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dbarlab::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let energy = -30.0;
    let v = make_bump_potential([0.1, -0.05], 0.7, 0.01, 5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let rho = (0.2f64.ln() + (25f64).ln() * rng.random::<f64>()).exp();
        let lambda = Complex64::from_polar(rho, 2.0 * std::f64::consts::PI * rng.random::<f64>());
        let b = scattering_b_at(&v, lambda, energy, LsGrid::default(), LsOptions::default())?;
        let born = fourier_transform_at(&v, k_of_lambda(lambda, energy)?.p());
        let rel = (b - born).norm() / born.norm();
        worst = worst.max(rel);
        println!("λ = {:>7.3}{:+.3}i  |b| = {:.4e}  relative deviation from Born = {:.4}", lambda.re, lambda.im, b.norm(), rel);
    }
    println!("max relative deviation {worst:.4}");
    Ok(())
}
