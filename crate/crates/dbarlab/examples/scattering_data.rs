//! Scattering data b and r of a bump potential on a λ-grid.
//!
//! cargo run --release --example scattering_data -- [n_rho n_phi]

use dbarlab::core_types::make_bump_potential;
use dbarlab::scattering::{b_decay_envelope, scattering_transform, LambdaGrid, ScatterOptions};
use std::time::Instant;

fn main() -> dbarlab::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (n_rho, n_phi) = (*args.first().unwrap_or(&16), *args.get(1).unwrap_or(&32));
    let v = make_bump_potential([0.1, -0.05], 0.7, 1.0, 5)?;
    let grid = LambdaGrid::new(n_rho, n_phi, 0.125, 8.0)?;
    let t = Instant::now();
    let data = scattering_transform(&v, -30.0, &grid, ScatterOptions::default())?;
    println!("{} nodes in {:.1?}", grid.len(), t.elapsed());
    for i in (0..n_rho).step_by((n_rho / 8).max(1)) {
        println!("|λ| = {:7.4}  |b| = {:.3e}  |r| = {:.3e}", grid.rho(i), data.b[i * n_phi].norm(), data.r[i * n_phi].norm());
    }
    println!("decay envelope (m = 3, |λ| ≥ 4): {:.4e}", b_decay_envelope(&data, 3, 4.0));
    Ok(())
}
