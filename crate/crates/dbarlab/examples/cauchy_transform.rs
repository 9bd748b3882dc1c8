//! Cauchy transform of the unit-disk indicator on a uniform grid, against λ̄ inside and 1/λ outside,
//! and recovery of a Gaussian u from C[∂u/∂λ̄].
//!
//! cargo run --release --example cauchy_transform -- [n]

use dbarlab::dbar_reconstruct::UniformCauchy;
use dbarlab::Complex64;
use std::time::Instant;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(512);
    let t = Instant::now();
    let c = UniformCauchy::new(n, 1.5);
    let disk = |l: Complex64| Complex64::new(if l.norm_sqr() <= 1.0 { 1.0 } else { 0.0 }, 0.0);
    let out = c.apply_piecewise(&disk, 16, 2);
    let (mut inside, mut outside): (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let l = c.node(i, j);
            if l.norm() <= 1.0 {
                inside = inside.max((out[i * n + j] - l.conj()).norm());
            } else {
                outside = outside.max((out[i * n + j] - 1.0 / l).norm());
            }
        }
    }
    println!("{n}² grid on [-1.5, 1.5]², {:.1?}", t.elapsed());
    println!("max error inside the disk  {inside:.3e}");
    println!("max error outside the disk {outside:.3e}");

    let s2 = 0.09;
    let u = |l: Complex64| (-l.norm_sqr() / s2).exp();
    let du = |l: Complex64| -l / s2 * u(l);
    let f: Vec<Complex64> = (0..n * n).map(|idx| du(c.node(idx / n, idx % n))).collect();
    let back = c.apply(&f);
    let err = (0..n * n).map(|idx| (back[idx] - u(c.node(idx / n, idx % n))).norm()).fold(0.0, f64::max);
    println!("max error of C[dbar u] - u  {err:.3e}");
}
