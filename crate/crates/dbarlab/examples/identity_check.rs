//! b₂ − b₁ from the boundary identity against forward transforms, for v₁ = 0 and a bump v₂, on two grid levels.
//!
//! cargo run --release --example identity_check

use dbarlab::core_types::{make_bump_potential, PotentialGrid};
use dbarlab::stability_lab::{verify_b_diff, IdentityConfig};
use dbarlab::Complex64;

fn main() -> dbarlab::Result<()> {
    let energy = -30.0;
    let v2 = make_bump_potential([0.1, -0.05], 0.7, 1.0, 5)?;
    let v1 = PotentialGrid::zeros(v2.grid);
    let lambdas: Vec<Complex64> = [0.5, 2.0]
        .iter()
        .flat_map(|&r| (0..4).map(move |k| Complex64::from_polar(r, 0.3 + k as f64 * std::f64::consts::FRAC_PI_2)))
        .collect();
    let coarse = verify_b_diff(&v1, &v2, energy, &lambdas, &IdentityConfig::coarse())?;
    let fine = verify_b_diff(&v1, &v2, energy, &lambdas, &IdentityConfig::default())?;
    for (c, f) in coarse.entries.iter().zip(&fine.entries) {
        println!("λ = {:+.3}{:+.3}i  coarse {:.3e}  default {:.3e}", f.lambda[0], f.lambda[1], c.rel_discrepancy, f.rel_discrepancy);
    }
    println!("max discrepancy: coarse {:.3e}, default {:.3e}", coarse.max_discrepancy, fine.max_discrepancy);
    println!("observed order {:.2}", (coarse.max_discrepancy / fine.max_discrepancy).log2());
    Ok(())
}
