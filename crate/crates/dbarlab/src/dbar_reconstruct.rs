//! ∂̄ problem in the spectral variable: Cauchy transforms, the ℝ-linear solve for μ(z, ·),
//! μ₋₁(z), and reconstruction of v from r.

use crate::core_types::{GridSpec, PotentialGrid};
use crate::error::{invalid, Error, Result};
use crate::faddeev::{MuField, MuKind};
use crate::numerics::fft2::{freq, Fft2};
use crate::numerics::gmres;
use crate::numerics::radial::interval_node_weights;
use crate::scattering::{LambdaGrid, Region, ScatteringData, RADIAL_ORDER};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// C f(λ) = −(1/π)∫ f(λ′)/(λ′ − λ) dA(λ′) on a [`LambdaGrid`], mode by mode in the angle.
///
/// Angular mode n of the output comes from mode n + 1 of f through a one-sided radial integral,
/// outward for n ≥ 0 and inward for n < 0.
pub struct PolarCauchy {
    pub grid: LambdaGrid,
    /// weights[k][j]: (node, weight) pairs of radial interval j for output FFT bin k.
    weights: Vec<Vec<Vec<(usize, f64)>>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl PolarCauchy {
    pub fn new(grid: &LambdaGrid) -> Result<Self> {
        grid.validate()?;
        let dt = grid.dt();
        let p = RADIAL_ORDER;
        let brk = grid.radial_break();
        let weights = (0..grid.n_phi)
            .map(|k| {
                let c = 1.0 - freq(k, grid.n_phi) as f64;
                (0..grid.n_rho - 1).map(|j| interval_node_weights(j, grid.n_rho, p, c, dt, brk)).collect()
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(PolarCauchy { grid: *grid, weights, fwd: planner.plan_fft_forward(grid.n_phi), inv: planner.plan_fft_inverse(grid.n_phi) })
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let (nr, np) = (self.grid.n_rho, self.grid.n_phi);
        let dt = self.grid.dt();
        let mut coef = f.to_vec();
        self.fwd.process(&mut coef);
        let scale = 1.0 / np as f64;
        let mut out = vec![Complex64::default(); nr * np];
        let mut g = vec![Complex64::default(); nr.saturating_sub(1)];
        let half = (np / 2) as i64;
        for k in 0..np {
            let n = freq(k, np);
            let m = n + 1;
            if m >= half || m < -half {
                continue;
            }
            let mk = m.rem_euclid(np as i64) as usize;
            let c = 1.0 - n as f64;
            let fm = |i: usize| coef[i * np + mk] * scale;
            for (j, gj) in g.iter_mut().enumerate() {
                *gj = self.weights[k][j].iter().map(|&(i, w)| fm(i) * w).sum();
            }
            let q = (c * dt).exp();
            if n >= 0 {
                let mut acc = if c == 0.0 { fm(nr - 1) * (0.5 * dt) } else { fm(nr - 1) * (((0.5 * c * dt).exp() - 1.0) / c) };
                for i in (0..nr).rev() {
                    if i < nr - 1 {
                        acc = g[i] + acc * q;
                    }
                    out[i * np + k] = -2.0 * self.grid.rho(i) * acc;
                }
            } else {
                let mut acc = fm(0) * ((1.0 - (-0.5 * c * dt).exp()) / c);
                for i in 0..nr {
                    if i > 0 {
                        acc = (acc + g[i - 1]) / q;
                    }
                    out[i * np + k] = 2.0 * self.grid.rho(i) * acc;
                }
            }
        }
        self.inv.process(&mut out);
        out
    }
}

/// ∫∫ 1/(x + iy) dx dy over [x₀, x₁] × [y₀, y₁], in closed form.
fn cell_integral_inv(x0: f64, x1: f64, y0: f64, y1: f64) -> Complex64 {
    let at = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (b / a).atan() };
    let lg = |a: f64, b: f64| {
        let r2 = a * a + b * b;
        if r2 == 0.0 {
            0.0
        } else {
            r2.ln()
        }
    };
    // ∂²G/∂x∂y = x/(x² + y²), ∂²H/∂x∂y = y/(x² + y²)
    let g = |x: f64, y: f64| 0.5 * y * lg(x, y) - y + at(x, y);
    let hh = |x: f64, y: f64| 0.5 * x * lg(x, y) - x + at(y, x);
    let rect = |f: &dyn Fn(f64, f64) -> f64| f(x1, y1) - f(x0, y1) - f(x1, y0) + f(x0, y0);
    Complex64::new(rect(&g), -rect(&hh))
}

/// Cauchy transform on a uniform n × n node grid over [−L, L]², piecewise-constant f with exact cell integrals of the kernel.
pub struct UniformCauchy {
    pub n: usize,
    pub half_width: f64,
    khat: Vec<Complex64>,
    fft: Fft2,
}

impl UniformCauchy {
    pub fn new(n: usize, half_width: f64) -> Self {
        let h = 2.0 * half_width / (n - 1) as f64;
        let nn = 2 * n;
        let mut pad = vec![Complex64::default(); nn * nn];
        let ni = n as i64;
        for d1 in -(ni - 1)..ni {
            for d2 in -(ni - 1)..ni {
                let (c1, c2) = (d1 as f64 * h, d2 as f64 * h);
                let val = cell_integral_inv(c1 - 0.5 * h, c1 + 0.5 * h, c2 - 0.5 * h, c2 + 0.5 * h) / PI;
                pad[d1.rem_euclid(nn as i64) as usize * nn + d2.rem_euclid(nn as i64) as usize] = val;
            }
        }
        let fft = Fft2::new(nn, nn);
        fft.forward(&mut pad);
        let s = 1.0 / (nn * nn) as f64;
        pad.iter_mut().for_each(|x| *x *= s);
        UniformCauchy { n, half_width, khat: pad, fft }
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    /// Node λ_{ij} = x_i + i y_j.
    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(-self.half_width + i as f64 * self.step(), -self.half_width + j as f64 * self.step())
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let (n, nn) = (self.n, 2 * self.n);
        let mut pad = vec![Complex64::default(); nn * nn];
        for i in 0..n {
            pad[i * nn..i * nn + n].copy_from_slice(&f[i * n..(i + 1) * n]);
        }
        self.fft.forward(&mut pad);
        for (p, k) in pad.iter_mut().zip(&self.khat) {
            *p *= k;
        }
        self.fft.inverse(&mut pad);
        (0..n * n).map(|idx| pad[(idx / n) * nn + idx % n]).collect()
    }
}

impl UniformCauchy {
    fn subsamples(&self, idx: usize, sub: usize, f: &dyn Fn(Complex64) -> Complex64) -> Vec<(Complex64, Complex64)> {
        let h = self.step();
        let c = self.node(idx / self.n, idx % self.n);
        let mut out = Vec::with_capacity(sub * sub);
        for a in 0..sub {
            for b in 0..sub {
                let w = c + Complex64::new(h * ((a as f64 + 0.5) / sub as f64 - 0.5), h * ((b as f64 + 0.5) / sub as f64 - 0.5));
                out.push((w, f(w)));
            }
        }
        out
    }

    /// Transform of a piecewise-constant field given pointwise, e.g. an indicator.
    ///
    /// Cell means come from `sub × sub` subsampling. Cells cut by a jump get their contribution
    /// to nodes within `near` cells recomputed from the subsamples instead of the cell mean.
    pub fn apply_piecewise(&self, f: &dyn Fn(Complex64) -> Complex64, sub: usize, near: usize) -> Vec<Complex64> {
        let n = self.n;
        let h = self.step();
        let hs2 = (h / sub as f64).powi(2);
        let mut means = vec![Complex64::default(); n * n];
        let mut cut = Vec::new();
        for (idx, m) in means.iter_mut().enumerate() {
            let s = self.subsamples(idx, sub, f);
            *m = s.iter().map(|x| x.1).sum::<Complex64>() / (sub * sub) as f64;
            if s.iter().any(|x| x.1 != s[0].1) {
                cut.push(idx);
            }
        }
        let mut out = self.apply(&means);
        let ni = n as i64;
        let nr = near as i64;
        for &j in &cut {
            let s = self.subsamples(j, sub, f);
            let (j1, j2) = ((j / n) as i64, (j % n) as i64);
            for i1 in (j1 - nr).max(0)..=(j1 + nr).min(ni - 1) {
                for i2 in (j2 - nr).max(0)..=(j2 + nr).min(ni - 1) {
                    let l = self.node(i1 as usize, i2 as usize);
                    let direct: Complex64 = s.iter().map(|(w, fv)| fv / (w - l)).sum::<Complex64>() * hs2;
                    let (c1, c2) = ((j1 - i1) as f64 * h, (j2 - i2) as f64 * h);
                    let mean = means[j] * cell_integral_inv(c1 - 0.5 * h, c1 + 0.5 * h, c2 - 0.5 * h, c2 + 0.5 * h);
                    out[i1 as usize * n + i2 as usize] -= (direct - mean) / PI;
                }
            }
        }
        out
    }
}

/// Centred-difference ∂/∂λ̄ = ½(∂ₓ + i∂ᵧ) on a uniform node grid; zero on the outer ring.
pub fn dbar_fd(values: &[Complex64], n: usize, h: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); n * n];
    let i_ = Complex64::new(0.0, 1.0);
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let dx = (values[(i + 1) * n + j] - values[(i - 1) * n + j]) / (2.0 * h);
            let dy = (values[i * n + j + 1] - values[i * n + j - 1]) / (2.0 * h);
            out[i * n + j] = 0.5 * (dx + i_ * dy);
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct DbarOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for DbarOptions {
    fn default() -> Self {
        DbarOptions { tol: 1e-12, restart: 60, max_iter: 600 }
    }
}

/// Solves u − C[q conj(u)] = rhs by GMRES on the real/imaginary splitting; returns (u, relative residual).
pub fn solve_rlinear(cauchy: &PolarCauchy, q: &[Complex64], rhs: &[Complex64], opts: DbarOptions) -> Result<(Vec<Complex64>, f64)> {
    let n = rhs.len();
    if q.iter().all(|z| *z == Complex64::default()) {
        return Ok((rhs.to_vec(), 0.0));
    }
    let op = |u: &[Complex64]| -> Vec<Complex64> {
        let f: Vec<Complex64> = q.iter().zip(u).map(|(a, b)| a * b.conj()).collect();
        let c = cauchy.apply(&f);
        u.iter().zip(&c).map(|(a, b)| a - b).collect()
    };
    let b: Vec<f64> = rhs.iter().map(|z| z.re).chain(rhs.iter().map(|z| z.im)).collect();
    let out = gmres(
        |x: &[f64], y: &mut [f64]| {
            let u: Vec<Complex64> = (0..n).map(|i| Complex64::new(x[i], x[n + i])).collect();
            let r = op(&u);
            for i in 0..n {
                y[i] = r[i].re;
                y[n + i] = r[i].im;
            }
        },
        &b,
        opts.tol,
        opts.restart,
        opts.max_iter,
    );
    let u: Vec<Complex64> = (0..n).map(|i| Complex64::new(out.x[i], out.x[n + i])).collect();
    let r = op(&u);
    let num = r.iter().zip(rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let den = u.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let res = num / den;
    if !(res <= 1e-8) {
        return Err(Error::DbarFailed { iterations: out.iterations, residual: res, history: out.history });
    }
    Ok((u, res))
}

/// μ(z, ·) on the λ-grid.
#[derive(Debug, Clone)]
pub struct DbarField {
    pub z: Complex64,
    pub mu: Vec<Complex64>,
    pub mu_minus_one: Complex64,
    pub residual: f64,
}

impl DbarField {
    pub fn to_mu_field(&self, grid: &LambdaGrid) -> MuField {
        MuField {
            kind: MuKind::Spectral { z: self.z, n_rho: grid.n_rho, n_phi: grid.n_phi, a1: grid.a1, a2: grid.a2 },
            values: self.mu.clone(),
            residual: self.residual,
        }
    }
}

/// Solver for μ = 1 + C[r(z, ·) conj(μ)] sharing one Cauchy operator across z.
pub struct DbarSolver<'a> {
    pub data: &'a ScatteringData,
    pub cauchy: PolarCauchy,
    pub weights: Vec<f64>,
    pub opts: DbarOptions,
}

impl<'a> DbarSolver<'a> {
    pub fn new(data: &'a ScatteringData, opts: DbarOptions) -> Result<Self> {
        Ok(DbarSolver { data, cauchy: PolarCauchy::new(&data.grid)?, weights: data.grid.weights(), opts })
    }

    pub fn solve(&self, z: Complex64) -> Result<DbarField> {
        let n = self.data.grid.len();
        let rz = self.data.r_at_z(z);
        let (mu, residual) = solve_rlinear(&self.cauchy, &rz, &vec![Complex64::new(1.0, 0.0); n], self.opts)?;
        let mu_minus_one = self.integral(&rz, &mu);
        Ok(DbarField { z, mu, mu_minus_one, residual })
    }

    /// (1/π)∫ r(z, λ) conj(μ) dA.
    fn integral(&self, rz: &[Complex64], mu: &[Complex64]) -> Complex64 {
        rz.iter().zip(mu).zip(&self.weights).map(|((r, m), w)| r * m.conj() * *w).sum::<Complex64>() / PI
    }

    /// μ₋₁ from the e^{−iφ} mode of μ − 1 on the ring 0.8a₂ ≤ |λ| ≤ a₂, where μ − 1 ≈ μ₋₁/λ.
    pub fn ring_fit(&self, field: &DbarField) -> Complex64 {
        let g = &self.data.grid;
        let rows: Vec<usize> = (0..g.n_rho).filter(|&i| g.rho(i) >= 0.8 * g.a2).collect();
        let rows = if rows.is_empty() { vec![g.n_rho - 1] } else { rows };
        let mut acc = Complex64::default();
        for &i in &rows {
            let mode: Complex64 = (0..g.n_phi)
                .map(|k| (field.mu[i * g.n_phi + k] - 1.0) * Complex64::from_polar(1.0, g.phi(k)))
                .sum::<Complex64>()
                / g.n_phi as f64;
            acc += mode * g.rho(i);
        }
        acc / rows.len() as f64
    }

    /// Right-hand side of the explicit formula, with ∂μ/∂z̄ from centred differences of neighbouring solves.
    pub fn explicit_v(&self, z: Complex64, step: f64) -> Result<Complex64> {
        let kap = (-self.data.energy).sqrt();
        let base = self.solve(z)?;
        let px = self.solve(z + step)?;
        let mx = self.solve(z - step)?;
        let py = self.solve(z + Complex64::new(0.0, step))?;
        let my = self.solve(z - Complex64::new(0.0, step))?;
        let rz = self.data.r_at_z(z);
        let nodes = self.data.grid.nodes();
        let i_ = Complex64::new(0.0, 1.0);
        let mut s = Complex64::default();
        for idx in 0..rz.len() {
            let dzb = 0.5 * ((px.mu[idx] - mx.mu[idx]) + i_ * (py.mu[idx] - my.mu[idx])) / (2.0 * step);
            let l = nodes[idx];
            let t = -0.5 * kap * (l.conj() - 1.0 / l) * base.mu[idx].conj() + dzb.conj();
            s += rz[idx] * t * self.weights[idx];
        }
        Ok(-2.0 * kap / PI * s)
    }
}

/// μ solved at one z.
pub fn solve_mu_dbar(data: &ScatteringData, z: Complex64) -> Result<DbarField> {
    DbarSolver::new(data, DbarOptions::default())?.solve(z)
}

/// μ₋₁ by area quadrature for an already solved field.
pub fn mu_minus_one(data: &ScatteringData, field: &DbarField) -> Complex64 {
    let rz = data.r_at_z(field.z);
    let w = data.grid.weights();
    rz.iter().zip(&field.mu).zip(&w).map(|((r, m), w)| r * m.conj() * *w).sum::<Complex64>() / PI
}

#[derive(Debug, Clone, Copy)]
pub struct ReconOptions {
    pub z_grid: GridSpec,
    /// Number of checkpoints for the explicit-formula cross-check.
    pub checkpoints: usize,
    pub fd_step: f64,
    pub dbar: DbarOptions,
}

impl Default for ReconOptions {
    fn default() -> Self {
        ReconOptions { z_grid: GridSpec { n: 64, half_width: 1.0 }, checkpoints: 8, fd_step: 5e-4, dbar: DbarOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Checkpoint {
    pub z: [f64; 2],
    pub v_primary: [f64; 2],
    pub v_explicit: [f64; 2],
    pub mu_minus_one_integral: [f64; 2],
    pub mu_minus_one_ring: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconReport {
    pub energy: f64,
    pub a1: f64,
    pub a2: f64,
    pub n_rho: usize,
    pub n_phi: usize,
    pub z_n: usize,
    pub z_half_width: f64,
    pub max_residual: f64,
    pub sup_v: f64,
    pub max_imag_fraction: f64,
    /// max |v_explicit − v_primary| / sup|v_primary| over checkpoints.
    pub two_route_discrepancy: f64,
    /// max |μ₋₁(integral) − μ₋₁(ring)| / max |μ₋₁| over checkpoints.
    pub ring_discrepancy: f64,
    /// ‖r‖_{L²} on the innermost and outermost radial octave of the grid.
    pub inner_tail_l2: f64,
    pub outer_tail_l2: f64,
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub v: PotentialGrid,
    pub v_complex: Vec<Complex64>,
    pub mu_minus_one: Vec<Complex64>,
    pub report: ReconReport,
}

/// Fourth-order ∂/∂z = ½(∂ₓ − i∂ᵧ) on a node grid; one-sided five-point stencils at the edges.
pub fn dz_fd4(values: &[Complex64], n: usize, h: f64) -> Vec<Complex64> {
    let d = |get: &dyn Fn(usize) -> Complex64, i: usize| -> Complex64 {
        if i >= 2 && i + 2 < n {
            (get(i - 2) - 8.0 * get(i - 1) + 8.0 * get(i + 1) - get(i + 2)) / (12.0 * h)
        } else if i < 2 {
            let c = [-25.0, 48.0, -36.0, 16.0, -3.0];
            let s: Complex64 = (0..5).map(|q| get(q) * c[q]).sum();
            // stencil anchored at 0, shifted derivative for i = 1
            if i == 0 {
                s / (12.0 * h)
            } else {
                (get(0) * -3.0 - get(1) * 10.0 + get(2) * 18.0 - get(3) * 6.0 + get(4)) / (12.0 * h)
            }
        } else if i == n - 1 {
            let c = [-25.0, 48.0, -36.0, 16.0, -3.0];
            -(0..5).map(|q| get(n - 1 - q) * c[q]).sum::<Complex64>() / (12.0 * h)
        } else {
            -(get(n - 1) * -3.0 - get(n - 2) * 10.0 + get(n - 3) * 18.0 - get(n - 4) * 6.0 + get(n - 5)) / (12.0 * h)
        }
    };
    let mut out = vec![Complex64::default(); n * n];
    for i in 0..n {
        for j in 0..n {
            let dx = d(&|q| values[q * n + j], i);
            let dy = d(&|q| values[i * n + q], j);
            out[i * n + j] = 0.5 * (dx - Complex64::new(0.0, 1.0) * dy);
        }
    }
    out
}

/// Deterministic checkpoints: z-grid nodes on a ring of radius ≈ 0.4 plus the node nearest the origin.
fn checkpoint_nodes(g: GridSpec, count: usize) -> Vec<usize> {
    let n = g.n;
    let nearest = |x: f64, y: f64| {
        let i = ((x + g.half_width) / g.step()).round().clamp(0.0, (n - 1) as f64) as usize;
        let j = ((y + g.half_width) / g.step()).round().clamp(0.0, (n - 1) as f64) as usize;
        i * n + j
    };
    let mut out = vec![nearest(0.0, 0.0)];
    for c in 0..count.saturating_sub(1) {
        let t = 2.0 * PI * c as f64 / (count - 1) as f64;
        let idx = nearest(0.4 * t.cos(), 0.4 * t.sin());
        if !out.contains(&idx) {
            out.push(idx);
        }
    }
    out.truncate(count);
    out
}

/// v = −2√|E| ∂μ₋₁/∂z on the z-grid, masked to the unit disk, with the explicit formula as cross-check.
pub fn reconstruct_v(data: &ScatteringData, opts: ReconOptions) -> Result<Reconstruction> {
    let g = opts.z_grid;
    if g.n < 5 {
        return invalid("z-grid needs at least 5 nodes per side");
    }
    let n = g.n;
    let h = g.step();
    let kap = (-data.energy).sqrt();
    let solver = DbarSolver::new(data, opts.dbar)?;
    let z_of = |idx: usize| Complex64::new(g.coord(idx / n), g.coord(idx % n));
    let fields: Vec<(Complex64, f64)> = (0..n * n)
        .into_par_iter()
        .map(|idx| solver.solve(z_of(idx)).map(|f| (f.mu_minus_one, f.residual)))
        .collect::<Result<_>>()?;
    let m1: Vec<Complex64> = fields.iter().map(|f| f.0).collect();
    let max_residual = fields.iter().map(|f| f.1).fold(0.0, f64::max);
    let dz = dz_fd4(&m1, n, h);
    let mut vc: Vec<Complex64> = dz.iter().map(|d| -2.0 * kap * d).collect();
    for (idx, v) in vc.iter_mut().enumerate() {
        if z_of(idx).norm() >= 1.0 {
            *v = Complex64::default();
        }
    }
    let sup_v = vc.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let max_imag = vc.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let values: Vec<f64> = vc.iter().map(|v| v.re).collect();
    let v = PotentialGrid::new(g, values, 1.0, 3, sup_v.max(f64::MIN_POSITIVE))?;

    let mut checkpoints = Vec::new();
    let (mut disc, mut ring_disc): (f64, f64) = (0.0, 0.0);
    let m1max = m1.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !data.is_zero() {
        for idx in checkpoint_nodes(g, opts.checkpoints) {
            let z = z_of(idx);
            let f = solver.solve(z)?;
            let ring = solver.ring_fit(&f);
            let ve = solver.explicit_v(z, opts.fd_step)?;
            disc = disc.max((ve - vc[idx]).norm());
            ring_disc = ring_disc.max((ring - f.mu_minus_one).norm());
            checkpoints.push(Checkpoint {
                z: [z.re, z.im],
                v_primary: [vc[idx].re, vc[idx].im],
                v_explicit: [ve.re, ve.im],
                mu_minus_one_integral: [f.mu_minus_one.re, f.mu_minus_one.im],
                mu_minus_one_ring: [ring.re, ring.im],
            });
        }
    }
    let grid = &data.grid;
    let rabs: Vec<f64> = data.r.iter().map(|z| z.norm()).collect();
    let report = ReconReport {
        energy: data.energy,
        a1: grid.a1,
        a2: grid.a2,
        n_rho: grid.n_rho,
        n_phi: grid.n_phi,
        z_n: n,
        z_half_width: g.half_width,
        max_residual,
        sup_v,
        max_imag_fraction: if sup_v > 0.0 { max_imag / sup_v } else { 0.0 },
        two_route_discrepancy: if sup_v > 0.0 { disc / sup_v } else { 0.0 },
        ring_discrepancy: if m1max > 0.0 { ring_disc / m1max } else { 0.0 },
        inner_tail_l2: crate::scattering::lp_norm(grid, &rabs, 2.0, Region::Inner(2.0 * grid.a1)),
        outer_tail_l2: crate::scattering::lp_norm(grid, &rabs, 2.0, Region::Outer(0.5 * grid.a2)),
        checkpoints,
    };
    Ok(Reconstruction { v, v_complex: vc, mu_minus_one: m1, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_integral_matches_quadrature() {
        let exact = cell_integral_inv(0.5, 1.0, -0.25, 0.5);
        let mut q = Complex64::default();
        let m = 400;
        for a in 0..m {
            for b in 0..m {
                let x = 0.5 + 0.5 * (a as f64 + 0.5) / m as f64;
                let y = -0.25 + 0.75 * (b as f64 + 0.5) / m as f64;
                q += 1.0 / Complex64::new(x, y) * (0.5 * 0.75 / (m * m) as f64);
            }
        }
        assert!((exact - q).norm() < 1e-6, "{exact} {q}");
        // odd kernel: the centred cell integrates to zero
        assert!(cell_integral_inv(-0.5, 0.5, -0.5, 0.5).norm() < 1e-15);
    }

    #[test]
    fn polar_transform_of_gaussian_ring() {
        // u = |λ|⁴ e^{−|λ|²} λ̄ has ∂̄u = f in closed form and vanishes at both ends of the annulus
        let g = LambdaGrid::new(64, 32, 0.05, 8.0).unwrap();
        let c = PolarCauchy::new(&g).unwrap();
        let u = |l: Complex64| {
            let r2 = l.norm_sqr();
            r2 * r2 * (-r2).exp() * l.conj()
        };
        // ∂̄(r⁴e^{−r²}λ̄) = r⁴e^{−r²} + λ̄·λ(2r² − r⁴)e^{−r²}
        let f = |l: Complex64| {
            let r2 = l.norm_sqr();
            Complex64::new(r2 * r2 * (-r2).exp() + r2 * (2.0 * r2 - r2 * r2) * (-r2).exp(), 0.0)
        };
        let nodes = g.nodes();
        let fv: Vec<Complex64> = nodes.iter().map(|&l| f(l)).collect();
        let out = c.apply(&fv);
        let err = nodes.iter().zip(&out).map(|(&l, o)| (o - u(l)).norm()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn uniform_transform_of_disk() {
        let c = UniformCauchy::new(128, 1.5);
        let disk = |l: Complex64| Complex64::new(if l.norm_sqr() <= 1.0 { 1.0 } else { 0.0 }, 0.0);
        let out = c.apply_piecewise(&disk, 16, 2);
        let mut err: f64 = 0.0;
        for i in 0..c.n {
            for j in 0..c.n {
                let l = c.node(i, j);
                let ex = if l.norm() <= 1.0 { l.conj() } else { 1.0 / l };
                err = err.max((out[i * c.n + j] - ex).norm());
            }
        }
        assert!(err < 2e-3, "{err}");
    }

    #[test]
    fn zero_data_gives_unit_mu_and_zero_potential() {
        let g = LambdaGrid::new(8, 8, 0.25, 4.0).unwrap();
        let d = ScatteringData::zeros(g, -30.0).unwrap();
        let f = solve_mu_dbar(&d, Complex64::new(0.2, 0.1)).unwrap();
        assert!(f.mu.iter().all(|m| *m == Complex64::new(1.0, 0.0)));
        assert_eq!(f.mu_minus_one, Complex64::default());
        let rec = reconstruct_v(&d, ReconOptions { z_grid: GridSpec { n: 9, half_width: 1.0 }, ..Default::default() }).unwrap();
        assert!(rec.v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fd4_derivative_of_polynomial() {
        let n = 11;
        let h = 0.1;
        let vals: Vec<Complex64> = (0..n * n)
            .map(|idx| {
                let z = Complex64::new(idx as f64 / n as f64 * 0.0 + (idx / n) as f64 * h, (idx % n) as f64 * h);
                z * z * z + z.conj() * z.conj()
            })
            .collect();
        let d = dz_fd4(&vals, n, h);
        for idx in 0..n * n {
            let z = Complex64::new((idx / n) as f64 * h, (idx % n) as f64 * h);
            assert!((d[idx] - 3.0 * z * z).norm() < 1e-10, "{idx}");
        }
    }

    #[test]
    fn rlinear_solve_recovers_manufactured_solution() {
        let g = LambdaGrid::new(48, 32, 0.05, 6.0).unwrap();
        let c = PolarCauchy::new(&g).unwrap();
        let nodes = g.nodes();
        let bump = |l: Complex64, c0: Complex64, s: f64| (-(l - c0).norm_sqr() / (s * s)).exp();
        let u0: Vec<Complex64> = nodes.iter().map(|&l| Complex64::new(bump(l, Complex64::new(1.0, 0.5), 0.4), 0.3 * bump(l, Complex64::new(-0.8, 0.2), 0.5))).collect();
        let q: Vec<Complex64> = nodes.iter().map(|&l| Complex64::new(0.5, 0.2) * bump(l, Complex64::new(0.3, -0.6), 0.6)).collect();
        // u − C[q conj u] = C[∂̄u₀ − q conj u₀] + C[q conj u₀] = u₀ when u₀ decays
        let rhs: Vec<Complex64> = {
            let qc: Vec<Complex64> = q.iter().zip(&u0).map(|(a, b)| a * b.conj()).collect();
            let cq = c.apply(&qc);
            u0.iter().zip(&cq).map(|(a, b)| a - b).collect()
        };
        let (u, res) = solve_rlinear(&c, &q, &rhs, DbarOptions::default()).unwrap();
        assert!(res <= 1e-8);
        let err = u.iter().zip(&u0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
}
