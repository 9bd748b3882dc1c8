//! Fixed potential pair reconstructed at several energies, with the bound shapes overlaid.
//!
//! cargo run --release --example energy_sweep -- [energies...]

use dbarlab::core_types::make_bump_potential;
use dbarlab::stability_lab::{energy_report, energy_sweep, PipelineConfig};

fn main() -> dbarlab::Result<()> {
    let mut energies: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    if energies.is_empty() {
        energies = vec![-10.0, -30.0, -100.0];
    }
    let v1 = make_bump_potential([0.1, -0.05], 0.7, 1.0, 5)?;
    let w = make_bump_potential([-0.2, 0.2], 0.5, 1.0, 5)?;
    let v2 = v1.add_scaled(&w, 1e-2)?;
    // λ-grid 64 × 64 at E = −30, refined like √|E| above it; 48² z-nodes
    let mut cfg = PipelineConfig::sweep();
    cfg.lambda_grid.n_rho = 64;
    cfg.recon.z_grid.n = 48;
    cfg.resolution_reference = Some(-30.0);
    let recs = energy_sweep(&v1, &v2, &energies, &cfg, 5)?;
    let rep = energy_report(&recs);
    println!("{:>8} {:>11} {:>11} {:>11} {:>10} {:>10} {:>6}", "E", "delta", "sup_error", "rec_error", "est2", "est3", "gate");
    for r in &rep.rows {
        let e3 = r.est3_log10_shape.map_or("-".to_string(), |x| format!("{x:.2}"));
        println!(
            "{:>8} {:>11.4e} {:>11.4e} {:>11.4e} {:>10.2} {:>10} {:>6}",
            r.energy, r.delta, r.sup_error, r.rec_error, r.est2_log10_shape, e3, r.est3_eligible
        );
    }
    println!("log10 c2 = {:.3}", rep.log10_c2);
    println!("reconstruction error non-increasing in |E|: {}", rep.rec_error_non_increasing);
    Ok(())
}
