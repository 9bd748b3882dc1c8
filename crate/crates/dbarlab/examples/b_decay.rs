//! Decay envelope |b|(1 + |E|(|λ| − 1/|λ|)²)^{m/2} over 4 ≤ |λ| ≤ 8 and 4 ≤ |λ| ≤ 16.
//!
//! cargo run --release --example b_decay

use dbarlab::core_types::make_bump_potential;
use dbarlab::scattering::ScatterOptions;
use dbarlab::stability_lab::verify_b_decay;

fn main() -> dbarlab::Result<()> {
    let v = make_bump_potential([0.1, -0.05], 0.7, 1.0, 5)?;
    let r = verify_b_decay(&v, -30.0, 3, 16, 64, ScatterOptions::default())?;
    println!("sup over [4, 8]  {:.4e}", r.sup_to_8);
    println!("sup over [4, 16] {:.4e}", r.sup_to_16);
    println!("Fourier decay norm {:.4e}", r.fourier_norm);
    println!("non-increasing: {}, within 6x the Fourier norm: {}", r.non_increasing, r.within_fourier_bound);
    Ok(())
}
