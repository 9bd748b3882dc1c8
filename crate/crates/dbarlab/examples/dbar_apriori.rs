//! Manufactured solutions of ∂u/∂λ̄ = q₁ conj(u) + q₂ and the implied constant of the a-priori bound.
//!
//! cargo run --release --example dbar_apriori -- [seed count]

use dbarlab::stability_lab::{dbar_apriori_family, Exponents};

fn main() -> dbarlab::Result<()> {
    let a: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let (seed, count) = (*a.first().unwrap_or(&1), *a.get(1).unwrap_or(&20) as usize);
    let ex = Exponents::default();
    let r = dbar_apriori_family(seed, count, ex)?;
    println!("exponents s = {:.4}, s1 = {}, s2 = {}, s~ = {}", ex.s, ex.s1, ex.s2, ex.s_tilde());
    for (k, i) in r.instances.iter().enumerate() {
        println!("{k:>3}: |q1|_s1 {:.3} |q1|_s2 {:.3} |q2|_s {:.3} |u|_s~ {:.3}  c~ {:.4}", i.q1_s1, i.q1_s2, i.q2_s, i.u_s_tilde, i.c_tilde);
    }
    println!("max recovery error {:.2e}, c~ spread {:.2}", r.max_recovery_error, r.c_tilde_spread);
    Ok(())
}
