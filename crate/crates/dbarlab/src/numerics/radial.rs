//! Product integration on a uniform grid t_j = t₀ + jΔ against exponential weights e^{cs}.
//!
//! Each interval [t_j, t_{j+1}] integrates a p-point Lagrange interpolant, with the stencil
//! centred on the interval and clamped at the ends.

use super::quad::GL16;

/// First stencil node for interval j on a grid of `n` nodes.
pub fn stencil_start(j: usize, n: usize, p: usize) -> usize {
    (j.saturating_sub(p / 2 - 1)).min(n - p)
}

/// Jump of the integrand inside interval `interval`, at t_interval + frac·Δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Break {
    pub interval: usize,
    pub frac: f64,
}

/// Part of interval j integrated with one stencil: first node and local range [lo, hi]·Δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub start: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Stencils for interval j; with a break, no stencil reaches across it.
pub fn pieces(j: usize, n: usize, p: usize, brk: Option<Break>) -> Vec<Piece> {
    let Some(b) = brk else {
        return vec![Piece { start: stencil_start(j, n, p), lo: 0.0, hi: 1.0 }];
    };
    let nb = b.interval + 1;
    if j < b.interval {
        vec![Piece { start: stencil_start(j, nb, p), lo: 0.0, hi: 1.0 }]
    } else if j > b.interval {
        vec![Piece { start: nb + stencil_start(j - nb, n - nb, p), lo: 0.0, hi: 1.0 }]
    } else {
        vec![Piece { start: nb - p, lo: 0.0, hi: b.frac }, Piece { start: nb, lo: b.frac, hi: 1.0 }]
    }
}

/// ∫_{loΔ}^{hiΔ} ℓ_m(s) e^{cs} ds for the Lagrange basis on nodes (m − off)Δ, m = 0..p.
pub fn interval_weights_on(p: usize, off: i64, c: f64, dt: f64, lo: f64, hi: f64) -> Vec<f64> {
    let nodes: Vec<f64> = (0..p).map(|k| (k as f64 - off as f64) * dt).collect();
    let mut w = vec![0.0; p];
    for (s, ws) in GL16.on(lo * dt, hi * dt) {
        let e = ws * (c * s).exp();
        for (m, wm) in w.iter_mut().enumerate() {
            let mut l = 1.0;
            for k in 0..p {
                if k != m {
                    l *= (s - nodes[k]) / (nodes[m] - nodes[k]);
                }
            }
            *wm += l * e;
        }
    }
    w
}

/// ∫₀^Δ ℓ_m(s) e^{cs} ds for the Lagrange basis on nodes (m − off)Δ, m = 0..p.
pub fn interval_weights(p: usize, off: usize, c: f64, dt: f64) -> Vec<f64> {
    interval_weights_on(p, off as i64, c, dt, 0.0, 1.0)
}

/// Weights for interval j, summed over its pieces: (node index, weight).
pub fn interval_node_weights(j: usize, n: usize, p: usize, c: f64, dt: f64, brk: Option<Break>) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(2 * p);
    for pc in pieces(j, n, p, brk) {
        let w = interval_weights_on(p, j as i64 - pc.start as i64, c, dt, pc.lo, pc.hi);
        out.extend(w.into_iter().enumerate().map(|(m, x)| (pc.start + m, x)));
    }
    out
}

/// Weights w_j with Σ w_j F(t_j) ≈ ∫ F(t) e^{c(t − t₀)} dt over [t₀ − Δ/2, t_{n−1} + Δ/2]; the end half-cells use F constant.
pub fn full_weights(n: usize, dt: f64, c: f64, p: usize, brk: Option<Break>) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let ec = |x: f64| if c == 0.0 { x } else { ((c * x).exp() - 1.0) / c };
    w[0] += -ec(-0.5 * dt);
    w[n - 1] += (c * (n - 1) as f64 * dt).exp() * ec(0.5 * dt);
    for j in 0..n - 1 {
        let base = (c * j as f64 * dt).exp();
        for (m, x) in interval_node_weights(j, n, p, c, dt, brk) {
            w[m] += base * x;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomial_times_exponential() {
        let (n, dt, c) = (40, 0.05, 2.0);
        let w = full_weights(n, dt, c, 6, None);
        // constants are exact including the half-cells
        let s: f64 = w.iter().sum();
        let exact = ((c * (n as f64 - 0.5) * dt).exp() - (-c * 0.5 * dt).exp()) / c;
        assert!((s - exact).abs() < 1e-13 * exact);
        // a smooth function vanishing near the ends
        let f = |t: f64| (-(t - 1.0).powi(2) * 20.0).exp();
        let approx: f64 = (0..n).map(|j| w[j] * f(j as f64 * dt)).sum();
        let fine: f64 = (0..20000).map(|k| {
            let t = -0.025 + (k as f64 + 0.5) * 2.0 / 20000.0;
            f(t) * (c * t).exp() * 2.0 / 20000.0
        }).sum();
        assert!((approx - fine).abs() < 1e-5 * fine, "{approx} {fine}");
    }

    #[test]
    fn break_keeps_high_order_for_a_jump() {
        let (n, dt, c) = (80, 0.025, 2.0);
        let b = Break { interval: 39, frac: 0.5 };
        let tb = 39.5 * dt;
        let f = |t: f64| (-20.0 * (t - 1.0).powi(2)).exp() * if t < tb { 1.0 } else { 2.0 + t };
        let mid = |a: f64, b: f64| {
            let m = 200000;
            let h = (b - a) / m as f64;
            (0..m).map(|k| a + (k as f64 + 0.5) * h).map(|t| f(t) * (c * t).exp() * h).sum::<f64>()
        };
        let exact = mid(-0.5 * dt, tb) + mid(tb, (n as f64 - 0.5) * dt);
        let sum = |w: Vec<f64>| (0..n).map(|j| w[j] * f(j as f64 * dt)).sum::<f64>();
        let split = sum(full_weights(n, dt, c, 6, Some(b)));
        let plain = sum(full_weights(n, dt, c, 6, None));
        assert!((split - exact).abs() < 1e-6 * exact, "{split} {plain} {exact}");
        assert!((plain - exact).abs() > 1e-5 * exact, "{plain} {exact}");
    }
}
