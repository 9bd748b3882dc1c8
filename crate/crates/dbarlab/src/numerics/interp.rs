/// Keys cubic-convolution weights (a = −1/2) for fractional offset `t ∈ [0, 1)`.
fn keys(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

/// Bicubic interpolation of row-major `values` on the node grid x_i = x0 + i·h (both axes).
///
/// Row index runs along x₁. Points outside the grid evaluate to zero; stencils
/// reaching past the edge use zero padding.
pub fn bicubic(values: &[f64], n: usize, x0: f64, h: f64, x1: f64, x2: f64) -> f64 {
    let u = (x1 - x0) / h;
    let w = (x2 - x0) / h;
    if !(u >= 0.0 && w >= 0.0 && u <= (n - 1) as f64 && w <= (n - 1) as f64) {
        return 0.0;
    }
    let i = (u.floor() as isize).min(n as isize - 2);
    let j = (w.floor() as isize).min(n as isize - 2);
    let a = keys(u - i as f64);
    let b = keys(w - j as f64);
    let mut s = 0.0;
    for (p, ap) in a.iter().enumerate() {
        let ii = i + p as isize - 1;
        if ii < 0 || ii >= n as isize {
            continue;
        }
        let row = &values[ii as usize * n..(ii as usize + 1) * n];
        let mut t = 0.0;
        for (q, bq) in b.iter().enumerate() {
            let jj = j + q as isize - 1;
            if jj >= 0 && jj < n as isize {
                t += bq * row[jj as usize];
            }
        }
        s += ap * t;
    }
    s
}
