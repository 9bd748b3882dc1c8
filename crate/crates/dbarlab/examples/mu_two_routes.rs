//! μ(z, λ) two ways: from the ∂̄ equation on the scattering data and from the Lippmann–Schwinger equation at k(λ).
//!
//! cargo run --release --example mu_two_routes -- [n_rho n_phi]

use dbarlab::core_types::make_bump_potential;
use dbarlab::dbar_reconstruct::{DbarOptions, DbarSolver};
use dbarlab::faddeev::{k_of_lambda, solve_mu_ls_on, LsGrid, LsOptions};
use dbarlab::scattering::{scattering_transform, LambdaGrid, ScatterOptions};
use dbarlab::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dbarlab::Result<()> {
    let a: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let grid = LambdaGrid::new(*a.first().unwrap_or(&64), *a.get(1).unwrap_or(&128), 0.125, 8.0)?;
    let energy = -30.0;
    let v = make_bump_potential([0.1, -0.05], 0.7, 1.0, 5)?;
    let data = scattering_transform(&v, energy, &grid, ScatterOptions::default())?;
    let solver = DbarSolver::new(&data, DbarOptions::default())?;
    let ls = LsGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        // z on an LS node inside |z| < 0.8, λ on a grid node with 0.2 ≤ |λ| ≤ 5
        let (iz, jz) = loop {
            let (i, j) = (rng.random_range(0..ls.n), rng.random_range(0..ls.n));
            if ls.coord(i).hypot(ls.coord(j)) < 0.8 {
                break (i, j);
            }
        };
        let node = loop {
            let idx = rng.random_range(0..grid.len());
            let r = grid.rho(idx / grid.n_phi);
            if (0.2..=5.0).contains(&r) {
                break idx;
            }
        };
        let z = Complex64::new(ls.coord(iz), ls.coord(jz));
        let lambda = grid.nodes()[node];
        let from_dbar = solver.solve(z)?.mu[node];
        let from_ls = solve_mu_ls_on(&v, &k_of_lambda(lambda, energy)?, ls, LsOptions::default())?.values[iz * ls.n + jz];
        let rel = (from_dbar - from_ls).norm() / from_ls.norm();
        worst = worst.max(rel);
        println!("z = {:+.3}{:+.3}i  λ = {:+.3}{:+.3}i  relative difference {:.2e}", z.re, z.im, lambda.re, lambda.im, rel);
    }
    println!("max relative difference {worst:.3e}");
    Ok(())
}
