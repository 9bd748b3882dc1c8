//! DtN matrix of v = 0 against the Bessel ratios κI′ₙ(κ)/Iₙ(κ), κ = √|E|.
//!
//! cargo run --release --example dtn_bessel -- [E...]

use dbarlab::core_types::{EnergyContext, GridSpec, PotentialGrid};
use dbarlab::forward_dtn::{dtn_map, free_dtn_eigenvalue};
use std::time::Instant;

fn main() -> dbarlab::Result<()> {
    let mut energies: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    if energies.is_empty() {
        energies = vec![-1.0, -30.0];
    }
    let v = PotentialGrid::zeros(GridSpec::default());
    for e in energies {
        let t = Instant::now();
        let phi = dtn_map(&v, &EnergyContext::new(e)?, 16)?;
        let mut diag: f64 = 0.0;
        let mut off: f64 = 0.0;
        for n in -16..=16i64 {
            for m in -16..=16i64 {
                if n == m {
                    let exact = free_dtn_eigenvalue(n, e);
                    diag = diag.max((phi.get(n, n).re - exact).abs() / exact.abs());
                } else {
                    off = off.max(phi.get(n, m).norm());
                }
            }
        }
        println!("E = {e}: Φ₀₀ = {:.6}, max relative diagonal error {diag:.2e}, max off-diagonal {off:.2e} ({:.1?})", phi.get(0, 0).re, t.elapsed());
    }
    Ok(())
}
