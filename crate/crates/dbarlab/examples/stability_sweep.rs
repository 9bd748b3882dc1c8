//! Perturbation sweep v₂ = v₁ + t·w at E = −30 and the fitted exponent for several bump powers.
//!
//! cargo run --release --example stability_sweep -- [powers...]

use dbarlab::core_types::make_bump_potential;
use dbarlab::stability_lab::{fit_log_exponent, perturbation_sweep, ratio_band, PipelineConfig};
use std::time::Instant;

fn main() -> dbarlab::Result<()> {
    let mut powers: Vec<u32> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    if powers.is_empty() {
        powers = vec![4, 6, 8];
    }
    let ts: Vec<f64> = (0..5).map(|k| 10f64.powf(-1.0 - 0.75 * k as f64)).collect();
    let cfg = PipelineConfig::sweep();
    for s in powers {
        let t0 = Instant::now();
        let v1 = make_bump_potential([0.1, -0.05], 0.7, 1.0, s)?;
        let w = make_bump_potential([-0.2, 0.2], 0.5, 1.0, s)?;
        let recs = perturbation_sweep(&v1, &w, &ts, -30.0, &cfg, s)?;
        println!("s = {s}  ({:.1?})", t0.elapsed());
        println!("  {:>9} {:>11} {:>11} {:>11}", "t", "delta", "sup_error", "rec_error");
        for r in &recs {
            println!("  {:>9.2e} {:>11.4e} {:>11.4e} {:>11.4e}", r.t, r.delta, r.sup_error, r.rec_error);
        }
        let pts: Vec<(f64, f64)> = recs.iter().map(|r| (r.delta, r.sup_error)).collect();
        let fit = fit_log_exponent(&pts)?;
        println!("  alpha = {:.3}  residual = {:.2e}  band = {:.3}", fit.alpha, fit.residual, ratio_band(&pts, fit.alpha));
    }
    Ok(())
}
