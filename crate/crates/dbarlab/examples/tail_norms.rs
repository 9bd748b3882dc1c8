//! Inner tail norms ‖|λ|^j r‖_{L^p(|λ| < a)} for a = 1/2, 1/4, 1/8 and their log-log slopes.
//!
//! cargo run --release --example tail_norms

use dbarlab::core_types::make_bump_potential;
use dbarlab::faddeev::LsOptions;
use dbarlab::scattering::ScatterOptions;
use dbarlab::stability_lab::verify_tail_norms;

fn main() -> dbarlab::Result<()> {
    let v = make_bump_potential([0.1, -0.05], 0.7, 1.0, 5)?;
    // b is tiny near λ = 0, so the LS solves run to a tighter tolerance
    let opts = ScatterOptions { ls_opts: LsOptions { tol: 1e-12, ..Default::default() }, ..Default::default() };
    let r = verify_tail_norms(&v, -30.0, 3, 4.0 / 3.0, 16, 64, opts)?;
    for s in &r.slopes {
        println!("j = {:+}: norms {:.3e} {:.3e} {:.3e}  slope {:.2} (needs >= {:.2})", s.j, s.norms[0], s.norms[1], s.norms[2], s.slope, s.threshold);
    }
    Ok(())
}
