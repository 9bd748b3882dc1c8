//! Forward scattering data of a bump, then reconstruction of the potential from r.
//!
//! cargo run --release --example reconstruct -- [n_rho n_phi z_n]

use dbarlab::core_types::{make_bump_potential, GridSpec};
use dbarlab::dbar_reconstruct::{reconstruct_v, ReconOptions};
use dbarlab::scattering::{scattering_transform, LambdaGrid, ScatterOptions};
use std::time::Instant;

fn main() -> dbarlab::Result<()> {
    let a: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let (n_rho, n_phi, z_n) = (*a.first().unwrap_or(&32), *a.get(1).unwrap_or(&64), *a.get(2).unwrap_or(&32));
    let energy = -30.0;
    let v = make_bump_potential([0.1, -0.05], 0.7, 1.0, 5)?;
    let grid = LambdaGrid::new(n_rho, n_phi, 0.125, 8.0)?;

    let t = Instant::now();
    let data = scattering_transform(&v, energy, &grid, ScatterOptions::default())?;
    println!("scattering data on {} nodes: {:.1?}", grid.len(), t.elapsed());

    let t = Instant::now();
    let opts = ReconOptions { z_grid: GridSpec { n: z_n, half_width: 1.0 }, ..Default::default() };
    let rec = reconstruct_v(&data, opts)?;
    println!("reconstruction on {z_n}² z-nodes: {:.1?}", t.elapsed());

    let mut err: f64 = 0.0;
    for i in 0..z_n {
        for j in 0..z_n {
            let (x, y) = (opts.z_grid.coord(i), opts.z_grid.coord(j));
            err = err.max((rec.v.at(i, j) - v.sample(x, y)).abs());
        }
    }
    println!("relative sup error      {:.4}", err / v.sup_norm());
    println!("two-route discrepancy   {:.4}", rec.report.two_route_discrepancy);
    println!("ring fit discrepancy    {:.4}", rec.report.ring_discrepancy);
    println!("imaginary part fraction {:.2e}", rec.report.max_imag_fraction);
    println!("max dbar residual       {:.2e}", rec.report.max_residual);
    Ok(())
}
