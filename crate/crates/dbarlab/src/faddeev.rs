//! Spectral parameter map, Faddeev Green's function and the Lippmann–Schwinger solve for μ(x, k).
//!
//! For real λ = ρ the kernel factors as g(x) = e^{−iax₂}h(x) with a = κ(ρ − 1/ρ)/2 and h real and
//! even in x₂. A general λ = ρe^{iφ} reduces to that case by rotation: g(x, k(λ)) = g(R_{−φ}x, k(ρ)).

use crate::core_types::{BoundaryFunction, PotentialGrid};
use crate::error::{invalid, Error, Result};
use crate::io::{data_lines, parse_f64, split_fields};
use crate::numerics::fft2::{freq, Fft2};
use crate::numerics::gmres;
use crate::numerics::quad::{GL12, GL16};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt::Write as _;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A point of Σ_E = {k ∈ ℂ²: k₁² + k₂² = E}, tagged with its spectral parameter λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPoint {
    pub k: [Complex64; 2],
    pub lambda: Complex64,
    pub energy: f64,
}

impl KPoint {
    pub fn kappa(&self) -> f64 {
        (-self.energy).sqrt()
    }

    /// k·x for real x.
    pub fn dot(&self, x: [f64; 2]) -> Complex64 {
        self.k[0] * x[0] + self.k[1] * x[1]
    }

    /// k + conj(k), a real vector.
    pub fn p(&self) -> [f64; 2] {
        [2.0 * self.k[0].re, 2.0 * self.k[1].re]
    }

    /// The KPoint of conj(k(λ)), which is k(−1/λ̄).
    pub fn conjugate(&self) -> KPoint {
        k_of_lambda(-1.0 / self.lambda.conj(), self.energy).expect("nonzero lambda")
    }
}

/// k(λ) = (i√|E|(λ + 1/λ)/2, √|E|(λ − 1/λ)/2).
pub fn k_of_lambda(lambda: Complex64, energy: f64) -> Result<KPoint> {
    if lambda.norm() == 0.0 || !lambda.is_finite() {
        return invalid("lambda must be a nonzero finite complex number");
    }
    if !(energy < 0.0) {
        return invalid("energy must be negative");
    }
    let kap = (-energy).sqrt();
    let inv = 1.0 / lambda;
    Ok(KPoint { k: [I * kap * 0.5 * (lambda + inv), kap * 0.5 * (lambda - inv)], lambda, energy })
}

/// Fourier multiplier −1/(ξ² + 2k·ξ) of convolution with g(·, k).
pub fn faddeev_symbol(xi: [f64; 2], k: &KPoint) -> Result<Complex64> {
    let d = xi[0] * xi[0] + xi[1] * xi[1] + 2.0 * (k.k[0] * xi[0] + k.k[1] * xi[1]);
    let guard = 1e-12 * (1.0 + xi[0].hypot(xi[1])) * (1.0 + k.k[0].norm() + k.k[1].norm());
    if d.norm() <= guard {
        return Err(Error::ResonantNode);
    }
    Ok(-1.0 / d)
}

/// Real zeros of ξ² + 2k·ξ: the origin and −2(k_R·n)n with n ⊥ k_I.
pub fn symbol_zeros(k: &KPoint) -> [[f64; 2]; 2] {
    let (kr, ki) = ([k.k[0].re, k.k[1].re], [k.k[0].im, k.k[1].im]);
    let nrm = ki[0].hypot(ki[1]);
    let n = [-ki[1] / nrm, ki[0] / nrm];
    let t = -2.0 * (kr[0] * n[0] + kr[1] * n[1]);
    [[0.0, 0.0], [t * n[0], t * n[1]]]
}

/// ∫_{t₀}^∞ e^{−z(cosh τ − cosh t₀)} dτ with c₀ = cosh t₀ ≥ 1, via w² = z(cosh τ − c₀).
pub fn incomplete_k(z: f64, c0: f64) -> f64 {
    let p = z * (c0 - 1.0).max(0.0);
    let q = z * (c0 + 1.0);
    let f = |w: f64| {
        let w2 = w * w;
        2.0 * w * (-w2).exp() / ((w2 + p) * (w2 + q)).sqrt()
    };
    let scale = if p > 0.0 { p.sqrt().min(q.sqrt()) } else { q.sqrt() };
    let mut lo = (scale / 8.0).max(1e-13);
    let mut s = 0.0;
    let mut a = 0.0;
    if lo < 1.0 {
        s += GL12.on(0.0, lo).map(|(w, wt)| wt * f(w)).sum::<f64>();
        a = lo;
        while a < 1.0 {
            let b = (2.0 * a).min(1.0);
            s += GL12.on(a, b).map(|(w, wt)| wt * f(w)).sum::<f64>();
            a = b;
        }
        lo = 1.0;
    }
    let _ = lo;
    while a < 6.5 {
        let b = (a + 0.75).min(6.5);
        s += GL12.on(a, b).map(|(w, wt)| wt * f(w)).sum::<f64>();
        a = b;
    }
    s
}

/// Modified Bessel K₀(z) for z > 0.
pub fn bessel_k0(z: f64) -> f64 {
    (-z).exp() * incomplete_k(z, 1.0)
}

/// Real part h of g(x, k(ρ)) = e^{−iax₂}h(x) for real λ = ρ > 0.
pub fn green_h(x1: f64, x2: f64, rho: f64, kappa: f64) -> f64 {
    let a = 0.5 * kappa * (rho - 1.0 / rho);
    let b = 0.5 * kappa * (rho + 1.0 / rho);
    let c0 = (b / kappa).max(1.0);
    let t0 = c0.acosh();
    let r = x1.hypot(x2);
    let pref = -1.0 / (4.0 * PI);
    if x1 <= 0.0 {
        let t1 = 2.0 * (b * x1).exp() * bessel_k0(kappa * r);
        let mut i2 = 0.0;
        if t0 > 0.0 {
            let np = 1 + (t0 * (b * x2.abs() + a.abs() * x1.abs()) / 2.5).ceil() as usize;
            let w = t0 / np as f64;
            for k in 0..np {
                i2 += GL16
                    .on(k as f64 * w, (k + 1) as f64 * w)
                    .map(|(t, wt)| wt * ((b - kappa * t.cosh()) * x1).exp() * (kappa * x2 * t.sinh()).cos())
                    .sum::<f64>();
            }
        }
        pref * (t1 - 2.0 * i2)
    } else {
        let t1 = 2.0 * (-b * (r - x1)).exp() * incomplete_k(kappa * r, c0);
        let th = x2.atan2(x1);
        let mut i2 = 0.0;
        if th != 0.0 && a != 0.0 {
            let tha = th.abs();
            let np = 1 + (tha * (b * r + a.abs() * r) / 2.5).ceil() as usize;
            let w = tha / np as f64;
            for k in 0..np {
                i2 += GL16
                    .on(k as f64 * w, (k + 1) as f64 * w)
                    .map(|(ph, wt)| wt * (b * (x1 - r * ph.cos())).exp() * (a.abs() * r * ph.sin()).sin())
                    .sum::<f64>();
            }
        }
        pref * (t1 - 2.0 * i2)
    }
}

/// g(x, k(ρ)) for real λ = ρ.
pub fn green_real(x1: f64, x2: f64, rho: f64, kappa: f64) -> Complex64 {
    let a = 0.5 * kappa * (rho - 1.0 / rho);
    Complex64::from_polar(green_h(x1, x2, rho, kappa), -a * x2)
}

/// Faddeev Green's function g(x, k(λ)) at x ≠ 0.
pub fn green(x: [f64; 2], lambda: Complex64, kappa: f64) -> Complex64 {
    let (rho, phi) = (lambda.norm(), lambda.arg());
    let (c, s) = (phi.cos(), phi.sin());
    green_real(c * x[0] + s * x[1], -s * x[0] + c * x[1], rho, kappa)
}

/// Mean of `g` over the square cell of side h centred at (c1, c2); polar quadrature when the cell holds the origin.
fn cell_average(g: &dyn Fn(f64, f64) -> Complex64, c1: f64, c2: f64, h: f64) -> Complex64 {
    let mut tot = Complex64::default();
    if c1 == 0.0 && c2 == 0.0 {
        for k in 0..4 {
            let rot = k as f64 * FRAC_PI_2;
            for (ph, wph) in GL16.on(-FRAC_PI_4, FRAC_PI_4) {
                let rmax = 0.5 * h / ph.cos();
                let ang = ph + rot;
                let (ca, sa) = (ang.cos(), ang.sin());
                for (rr, wr) in GL16.on(0.0, rmax) {
                    tot += g(rr * ca, rr * sa) * (wph * wr * rr);
                }
            }
        }
    } else {
        let q = h / 4.0;
        for s1 in [-1.0, 1.0] {
            for s2 in [-1.0, 1.0] {
                for (u, wu) in GL16.on(c1 + s1 * q - q, c1 + s1 * q + q) {
                    for (v, wv) in GL16.on(c2 + s2 * q - q, c2 + s2 * q + q) {
                        tot += g(u, v) * (wu * wv);
                    }
                }
            }
        }
    }
    tot / (h * h)
}

/// Node grid for Lippmann–Schwinger solves, covering the support disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsGrid {
    pub n: usize,
    pub half_width: f64,
}

impl Default for LsGrid {
    fn default() -> Self {
        LsGrid { n: 81, half_width: 1.0 }
    }
}

impl LsGrid {
    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }
}

/// Convolution with g on an LS grid: table on the difference lattice, applied by zero-padded FFT.
#[derive(Clone)]
pub struct KernelTable {
    pub grid: LsGrid,
    khat: Vec<Complex64>,
    fft: Fft2,
}

impl KernelTable {
    /// Table for real λ = ρ; uses the evenness of h in x₂.
    pub fn radial(grid: LsGrid, rho: f64, kappa: f64) -> Self {
        let a = 0.5 * kappa * (rho - 1.0 / rho);
        let n = grid.n as i64;
        let h = grid.step();
        let half: Vec<Vec<f64>> = (-(n - 1)..n)
            .map(|m1| (0..n).map(|m2| if m1 == 0 && m2 == 0 { 0.0 } else { green_h(m1 as f64 * h, m2 as f64 * h, rho, kappa) }).collect())
            .collect();
        let gfun = move |x1: f64, x2: f64| green_real(x1, x2, rho, kappa);
        Self::assemble(grid, &gfun, |m1, m2| {
            Complex64::from_polar(half[(m1 + n - 1) as usize][m2.unsigned_abs() as usize], -a * m2 as f64 * h)
        })
    }

    /// Table for arbitrary λ, evaluating the rotated kernel at every lattice point.
    pub fn general(grid: LsGrid, lambda: Complex64, kappa: f64) -> Self {
        let h = grid.step();
        let gfun = move |x1: f64, x2: f64| green([x1, x2], lambda, kappa);
        let g2 = gfun;
        Self::assemble(grid, &gfun, move |m1, m2| g2(m1 as f64 * h, m2 as f64 * h))
    }

    fn assemble(grid: LsGrid, gfun: &dyn Fn(f64, f64) -> Complex64, point: impl Fn(i64, i64) -> Complex64) -> Self {
        let n = grid.n;
        let nn = 2 * n;
        let h = grid.step();
        let mut pad = vec![Complex64::default(); nn * nn];
        let ni = n as i64;
        for m1 in -(ni - 1)..ni {
            for m2 in -(ni - 1)..ni {
                let val = if m1.abs() <= 1 && m2.abs() <= 1 {
                    cell_average(gfun, m1 as f64 * h, m2 as f64 * h, h)
                } else {
                    point(m1, m2)
                };
                pad[m1.rem_euclid(nn as i64) as usize * nn + m2.rem_euclid(nn as i64) as usize] = val;
            }
        }
        let fft = Fft2::new(nn, nn);
        fft.forward(&mut pad);
        let s = h * h / (nn * nn) as f64;
        for x in pad.iter_mut() {
            *x *= s;
        }
        KernelTable { grid, khat: pad, fft }
    }

    /// (g ∗ f)(x_i) ≈ h² Σ_j g(x_i − x_j) f(x_j), cell-averaged near the diagonal.
    pub fn apply(&self, f: &[Complex64], out: &mut [Complex64]) {
        let n = self.grid.n;
        let nn = 2 * n;
        let mut pad = vec![Complex64::default(); nn * nn];
        for i in 0..n {
            pad[i * nn..i * nn + n].copy_from_slice(&f[i * n..(i + 1) * n]);
        }
        self.fft.forward(&mut pad);
        for (p, k) in pad.iter_mut().zip(&self.khat) {
            *p *= k;
        }
        self.fft.inverse(&mut pad);
        for i in 0..n {
            out[i * n..(i + 1) * n].copy_from_slice(&pad[i * nn..i * nn + n]);
        }
    }
}

/// Tolerances for the Lippmann–Schwinger GMRES.
#[derive(Debug, Clone, Copy)]
pub struct LsOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for LsOptions {
    fn default() -> Self {
        LsOptions { tol: 1e-10, restart: 40, max_iter: 400 }
    }
}

/// Solves μ = 1 + g ∗ (vμ) for the sampled potential `vs` on the table's grid; returns (μ, residual).
pub fn solve_on_table(table: &KernelTable, vs: &[f64], opts: LsOptions) -> Result<(Vec<Complex64>, f64)> {
    let n2 = table.grid.n * table.grid.n;
    if vs.iter().all(|&v| v == 0.0) {
        return Ok((vec![Complex64::new(1.0, 0.0); n2], 0.0));
    }
    let mut tmp = vec![Complex64::default(); n2];
    let rhs = vec![Complex64::new(1.0, 0.0); n2];
    let out = gmres(
        |x: &[Complex64], y: &mut [Complex64]| {
            for ((t, &xi), &v) in tmp.iter_mut().zip(x).zip(vs) {
                *t = xi * v;
            }
            table.apply(&tmp, y);
            for (yi, &xi) in y.iter_mut().zip(x) {
                *yi = xi - *yi;
            }
        },
        &rhs,
        opts.tol,
        opts.restart,
        opts.max_iter,
    );
    let res = ls_residual(table, vs, &out.x);
    if !out.converged || !(res <= 1e-8) {
        return Err(Error::LsNonConvergence { iterations: out.iterations, residual: res, history: out.history });
    }
    Ok((out.x, res))
}

/// ‖μ − 1 − g∗(vμ)‖_∞ / ‖μ‖_∞.
pub fn ls_residual(table: &KernelTable, vs: &[f64], mu: &[Complex64]) -> f64 {
    let vm: Vec<Complex64> = mu.iter().zip(vs).map(|(m, &v)| m * v).collect();
    let mut conv = vec![Complex64::default(); mu.len()];
    table.apply(&vm, &mut conv);
    let num = mu.iter().zip(&conv).map(|(m, c)| (m - 1.0 - c).norm()).fold(0.0, f64::max);
    let den = mu.iter().map(|m| m.norm()).fold(0.0, f64::max).max(1e-300);
    num / den
}

/// v sampled on the LS grid in the frame rotated by φ: ṽ(x') = v(R_φ x').
pub fn sample_rotated(v: &PotentialGrid, grid: LsGrid, phi: f64) -> Vec<f64> {
    let (c, s) = (phi.cos(), phi.sin());
    let n = grid.n;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let x1 = grid.coord(i);
        for j in 0..n {
            let x2 = grid.coord(j);
            out[i * n + j] = v.sample(c * x1 - s * x2, s * x1 + c * x2);
        }
    }
    out
}

/// Where a [`MuField`] lives.
#[derive(Debug, Clone, PartialEq)]
pub enum MuKind {
    /// μ(·, k) on an LS grid.
    Spatial { grid: LsGrid, k: KPoint },
    /// μ(z, ·) on a polar λ-grid, `n_rho × n_phi` row-major.
    Spectral { z: Complex64, n_rho: usize, n_phi: usize, a1: f64, a2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuField {
    pub kind: MuKind,
    pub values: Vec<Complex64>,
    pub residual: f64,
}

impl MuField {
    pub fn to_cfield(&self) -> String {
        let mut s = match &self.kind {
            MuKind::Spatial { grid, k } => format!(
                "{} {:?} spatial {:?} {:?} {:?} {:?} {:?}\n",
                grid.n, grid.half_width, k.k[0].re, k.k[0].im, k.k[1].re, k.k[1].im, self.residual
            ),
            MuKind::Spectral { z, n_rho, n_phi, a1, a2 } => {
                format!("{n_rho} {n_phi} spectral {:?} {:?} {a1:?} {a2:?} {:?}\n", z.re, z.im, self.residual)
            }
        };
        for v in &self.values {
            let _ = writeln!(s, "{:?} {:?}", v.re, v.im);
        }
        s
    }

    /// Parses a spatial `.cfield`; the energy is needed to rebuild λ from k.
    pub fn from_cfield(text: &str, energy: f64) -> Result<MuField> {
        let mut lines = data_lines(text);
        let head = split_fields(lines.next().ok_or_else(|| Error::Parse("empty cfield".into()))?);
        if head.len() != 8 {
            return Err(Error::Parse("cfield header has 8 fields".into()));
        }
        let nums: Vec<f64> = [0, 1, 3, 4, 5, 6, 7].iter().map(|&i| parse_f64(head[i])).collect::<Result<_>>()?;
        let mut values = Vec::new();
        for line in lines {
            let f = split_fields(line);
            if f.len() != 2 {
                return Err(Error::Parse(format!("expected `re im`, got {line:?}")));
            }
            values.push(Complex64::new(parse_f64(f[0])?, parse_f64(f[1])?));
        }
        let kind = match head[2] {
            "spatial" => {
                let k = [Complex64::new(nums[2], nums[3]), Complex64::new(nums[4], nums[5])];
                let kap = (-energy).sqrt();
                // k₁ = iκ(λ+1/λ)/2, k₂ = κ(λ−1/λ)/2  ⇒  λ = (k₂ − i k₁)/κ
                let lambda = (k[1] - I * k[0]) / kap;
                MuKind::Spatial { grid: LsGrid { n: nums[0] as usize, half_width: nums[1] }, k: KPoint { k, lambda, energy } }
            }
            "spectral" => MuKind::Spectral {
                z: Complex64::new(nums[2], nums[3]),
                n_rho: nums[0] as usize,
                n_phi: nums[1] as usize,
                a1: nums[4],
                a2: nums[5],
            },
            other => return Err(Error::Parse(format!("unknown cfield kind {other:?}"))),
        };
        Ok(MuField { kind, values, residual: nums[6] })
    }
}

fn check_support(v: &PotentialGrid, grid: LsGrid) -> Result<()> {
    if v.support_radius > grid.half_width + 1e-12 {
        return invalid("LS grid does not cover the potential support");
    }
    Ok(())
}

/// μ(·, k) on `grid`, solved in the original frame.
pub fn solve_mu_ls_on(v: &PotentialGrid, k: &KPoint, grid: LsGrid, opts: LsOptions) -> Result<MuField> {
    check_support(v, grid)?;
    let table = KernelTable::general(grid, k.lambda, k.kappa());
    let vs = sample_rotated(v, grid, 0.0);
    let (values, residual) = solve_on_table(&table, &vs, opts)?;
    Ok(MuField { kind: MuKind::Spatial { grid, k: *k }, values, residual })
}

/// μ(·, k) on the default LS grid.
pub fn solve_mu_ls(v: &PotentialGrid, k: &KPoint) -> Result<MuField> {
    solve_mu_ls_on(v, k, LsGrid::default(), LsOptions::default())
}

/// ψ = e^{ik·x}μ on the field's grid.
pub fn psi_from_mu(mu: &MuField) -> Result<Vec<Complex64>> {
    let MuKind::Spatial { grid, k } = &mu.kind else {
        return invalid("psi_from_mu needs a spatial field");
    };
    let n = grid.n;
    Ok((0..n * n).map(|idx| (I * k.dot([grid.coord(idx / n), grid.coord(idx % n)])).exp() * mu.values[idx]).collect())
}

/// (∂μ/∂z, ∂μ/∂z̄), computed as g ∗ ∂_j(vμ) with spectral derivatives of the compactly supported vμ.
pub fn mu_z_derivatives(v: &PotentialGrid, mu: &MuField) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let MuKind::Spatial { grid, k } = &mu.kind else {
        return invalid("mu_z_derivatives needs a spatial field");
    };
    let n = grid.n;
    let vs = sample_rotated(v, *grid, 0.0);
    if vs.iter().all(|&x| x == 0.0) {
        return Ok((vec![Complex64::default(); n * n], vec![Complex64::default(); n * n]));
    }
    let table = KernelTable::general(*grid, k.lambda, k.kappa());
    let mut f: Vec<Complex64> = mu.values.iter().zip(&vs).map(|(m, &x)| m * x).collect();
    let fft = Fft2::new(n, n);
    fft.forward(&mut f);
    let dk = 2.0 * PI / (n as f64 * grid.step());
    let mut d1 = f.clone();
    let mut d2 = f;
    for i in 0..n {
        let q1 = if 2 * i == n { 0.0 } else { freq(i, n) as f64 * dk };
        for j in 0..n {
            let q2 = if 2 * j == n { 0.0 } else { freq(j, n) as f64 * dk };
            let s = 1.0 / (n * n) as f64;
            d1[i * n + j] *= I * q1 * s;
            d2[i * n + j] *= I * q2 * s;
        }
    }
    fft.inverse(&mut d1);
    fft.inverse(&mut d2);
    let mut g1 = vec![Complex64::default(); n * n];
    let mut g2 = vec![Complex64::default(); n * n];
    table.apply(&d1, &mut g1);
    table.apply(&d2, &mut g2);
    let dz = g1.iter().zip(&g2).map(|(a, b)| 0.5 * (a - I * b)).collect();
    let dzb = g1.iter().zip(&g2).map(|(a, b)| 0.5 * (a + I * b)).collect();
    Ok((dz, dzb))
}

/// μ at points off the support, by direct quadrature of 1 + ∫g(x − y)v(y)μ(y)dy.
pub fn mu_at_points(v: &PotentialGrid, mu: &MuField, points: &[[f64; 2]]) -> Result<Vec<Complex64>> {
    let MuKind::Spatial { grid, k } = &mu.kind else {
        return invalid("mu_at_points needs a spatial field");
    };
    let n = grid.n;
    let h = grid.step();
    let vs = sample_rotated(v, *grid, 0.0);
    let src: Vec<(f64, f64, Complex64)> = (0..n * n)
        .filter(|&i| vs[i] != 0.0)
        .map(|i| (grid.coord(i / n), grid.coord(i % n), mu.values[i] * vs[i]))
        .collect();
    let kap = k.kappa();
    let (rho, phi) = (k.lambda.norm(), k.lambda.arg());
    let (c, s) = (phi.cos(), phi.sin());
    Ok(points
        .iter()
        .map(|p| {
            let mut acc = Complex64::default();
            for &(y1, y2, w) in &src {
                let (d1, d2) = (p[0] - y1, p[1] - y2);
                if d1 == 0.0 && d2 == 0.0 {
                    continue;
                }
                acc += green_real(c * d1 + s * d2, -s * d1 + c * d2, rho, kap) * w;
            }
            1.0 + acc * (h * h)
        })
        .collect())
}

/// Fourier coefficients of ψ(·, k) on the unit circle from `n_theta` samples.
pub fn psi_boundary_trace(v: &PotentialGrid, k: &KPoint, grid: LsGrid, n_theta: usize, n_max: usize) -> Result<BoundaryFunction> {
    let pts: Vec<[f64; 2]> = (0..n_theta).map(|j| 2.0 * PI * j as f64 / n_theta as f64).map(|t| [t.cos(), t.sin()]).collect();
    let mu_b = if v.is_zero() {
        vec![Complex64::new(1.0, 0.0); n_theta]
    } else {
        let mu = solve_mu_ls_on(v, k, grid, LsOptions::default())?;
        mu_at_points(v, &mu, &pts)?
    };
    let samples: Vec<Complex64> = pts.iter().zip(&mu_b).map(|(x, m)| (I * k.dot(*x)).exp() * m).collect();
    Ok(BoundaryFunction::from_samples(&samples, n_max))
}
