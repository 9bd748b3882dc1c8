//! Grids, norms, boundary functions and test potentials shared by all stages.

use crate::error::{invalid, Error, Result};
use crate::io::{data_lines, parse_f64, split_fields};
use crate::numerics::fft2::{freq, Fft2};
use crate::numerics::interp::bicubic;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Uniform node grid over [−L, L]²: x_i = −L + i·h, h = 2L/(n−1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub half_width: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 256, half_width: 1.25 }
    }
}

impl GridSpec {
    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }
}

/// Real potential on a Cartesian node grid, compactly supported in the disk of radius `support_radius`.
///
/// `values[i * n + j]` is v(x_i, y_j).
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub support_radius: f64,
    pub smoothness_m: u32,
    pub norm_bound: f64,
}

impl PotentialGrid {
    pub fn new(grid: GridSpec, values: Vec<f64>, support_radius: f64, smoothness_m: u32, norm_bound: f64) -> Result<Self> {
        if grid.n < 2 || grid.half_width <= 0.0 {
            return invalid("grid needs n >= 2 and L > 0");
        }
        if values.len() != grid.n * grid.n {
            return invalid(format!("expected {} values, got {}", grid.n * grid.n, values.len()));
        }
        if !(support_radius > 0.0 && support_radius <= 1.0) {
            return invalid("support radius must lie in (0, 1]");
        }
        if smoothness_m <= 2 {
            return invalid("smoothness m must exceed 2");
        }
        if !(norm_bound > 0.0) {
            return invalid("norm bound N must be positive");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite potential value");
        }
        let v = PotentialGrid { grid, values, support_radius, smoothness_m, norm_bound };
        for i in 0..grid.n {
            for j in 0..grid.n {
                let (x, y) = (grid.coord(i), grid.coord(j));
                if x.hypot(y) >= support_radius && v.values[i * grid.n + j] != 0.0 {
                    return invalid(format!("nonzero value outside the support at ({x:.4}, {y:.4})"));
                }
            }
        }
        Ok(v)
    }

    pub fn zeros(grid: GridSpec) -> Self {
        PotentialGrid { grid, values: vec![0.0; grid.n * grid.n], support_radius: 1.0, smoothness_m: 3, norm_bound: 1.0 }
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn step(&self) -> f64 {
        self.grid.step()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n + j]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Bicubic interpolant at an arbitrary point, zero outside the support disk.
    pub fn sample(&self, x1: f64, x2: f64) -> f64 {
        if x1.hypot(x2) >= self.support_radius {
            return 0.0;
        }
        bicubic(&self.values, self.grid.n, -self.grid.half_width, self.step(), x1, x2)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + t·w` on the same grid.
    pub fn add_scaled(&self, w: &PotentialGrid, t: f64) -> Result<PotentialGrid> {
        if self.grid != w.grid {
            return invalid("potentials live on different grids");
        }
        let values = self.values.iter().zip(&w.values).map(|(a, b)| a + t * b).collect();
        Ok(PotentialGrid {
            grid: self.grid,
            values,
            support_radius: self.support_radius.max(w.support_radius),
            smoothness_m: self.smoothness_m.min(w.smoothness_m),
            norm_bound: self.norm_bound + t.abs() * w.norm_bound,
        })
    }

    pub fn to_pgrid(&self) -> String {
        let g = self.grid;
        let mut s = format!("{} {:?} {:?} {} {:?}\n", g.n, g.half_width, self.support_radius, self.smoothness_m, self.norm_bound);
        for i in 0..g.n {
            let row: Vec<String> = self.values[i * g.n..(i + 1) * g.n].iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    pub fn from_pgrid(text: &str) -> Result<Self> {
        let mut lines = data_lines(text);
        let head = lines.next().ok_or_else(|| Error::Parse("empty pgrid".into()))?;
        let h = split_fields(head);
        if h.len() != 5 {
            return Err(Error::Parse("pgrid header must read `n L support_radius m N`".into()));
        }
        let n: usize = h[0].parse().map_err(|_| Error::Parse(format!("bad n {:?}", h[0])))?;
        let l = parse_f64(h[1])?;
        let sr = parse_f64(h[2])?;
        let m: u32 = h[3].parse().map_err(|_| Error::Parse(format!("bad m {:?}", h[3])))?;
        let nb = parse_f64(h[4])?;
        let mut values = Vec::with_capacity(n * n);
        for line in lines {
            for tok in split_fields(line) {
                values.push(parse_f64(tok)?);
            }
        }
        PotentialGrid::new(GridSpec { n, half_width: l }, values, sr, m, nb)
    }
}

/// Energy tag with the solvability diagnostic attached by the forward solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyContext {
    pub energy: f64,
    pub solvability_margin: f64,
}

impl EnergyContext {
    pub fn new(energy: f64) -> Result<Self> {
        if !(energy < 0.0) || !energy.is_finite() {
            return invalid(format!("energy must be negative, got {energy}"));
        }
        Ok(EnergyContext { energy, solvability_margin: f64::NAN })
    }

    /// κ = √|E|.
    pub fn kappa(&self) -> f64 {
        (-self.energy).sqrt()
    }
}

/// Trigonometric coefficients f̂_n, n = −n_max..n_max, of a function on the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunction {
    pub n_max: usize,
    pub coeffs: Vec<Complex64>,
}

impl BoundaryFunction {
    pub fn zeros(n_max: usize) -> Self {
        BoundaryFunction { n_max, coeffs: vec![Complex64::default(); 2 * n_max + 1] }
    }

    pub fn mode(n_max: usize, n: i64) -> Self {
        let mut f = Self::zeros(n_max);
        *f.get_mut(n) = Complex64::new(1.0, 0.0);
        f
    }

    pub fn get(&self, n: i64) -> Complex64 {
        let k = n + self.n_max as i64;
        if k < 0 || k as usize >= self.coeffs.len() {
            Complex64::default()
        } else {
            self.coeffs[k as usize]
        }
    }

    pub fn get_mut(&mut self, n: i64) -> &mut Complex64 {
        let k = (n + self.n_max as i64) as usize;
        &mut self.coeffs[k]
    }

    /// Coefficients of the trigonometric interpolant of samples at θ_j = 2πj/N.
    pub fn from_samples(samples: &[Complex64], n_max: usize) -> Self {
        let nn = samples.len();
        let mut f = Self::zeros(n_max);
        let mut buf = samples.to_vec();
        rustfft::FftPlanner::new().plan_fft_forward(nn).process(&mut buf);
        for n in -(n_max as i64)..=n_max as i64 {
            if 2 * n.unsigned_abs() as usize >= nn {
                continue;
            }
            *f.get_mut(n) = buf[n.rem_euclid(nn as i64) as usize] / nn as f64;
        }
        f
    }

    pub fn eval(&self, theta: f64) -> Complex64 {
        (-(self.n_max as i64)..=self.n_max as i64).map(|n| self.get(n) * Complex64::from_polar(1.0, n as f64 * theta)).sum()
    }

    /// True when f̂_{−n} = conj(f̂_n) within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        (0..=self.n_max as i64).all(|n| (self.get(-n) - self.get(n).conj()).norm() <= tol)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for n in -(self.n_max as i64)..=self.n_max as i64 {
            let c = self.get(n);
            let _ = writeln!(s, "{n},{},{}", c.re, c.im);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for line in data_lines(text) {
            let f = split_fields(line);
            if f.len() != 3 {
                return Err(Error::Parse(format!("expected `n, re, im`, got {line:?}")));
            }
            let n: i64 = f[0].parse().map_err(|_| Error::Parse(format!("bad mode {:?}", f[0])))?;
            rows.push((n, Complex64::new(parse_f64(f[1])?, parse_f64(f[2])?)));
        }
        let n_max = rows.iter().map(|(n, _)| n.unsigned_abs() as usize).max().unwrap_or(0);
        let mut out = Self::zeros(n_max);
        for (n, c) in rows {
            *out.get_mut(n) = c;
        }
        Ok(out)
    }
}

/// ‖v‖_{m,1}: max over |J| ≤ m of the L¹ norm of the centered-difference ∂^J v.
pub fn sobolev_norm_m1(v: &PotentialGrid, m: u32) -> Result<f64> {
    if m > v.smoothness_m {
        return invalid(format!("m = {m} exceeds the declared smoothness {}", v.smoothness_m));
    }
    let n = v.n();
    let h = v.step();
    if n < 4 * m as usize + 3 || v.support_radius / h < 2.0 * m as f64 {
        return Err(Error::InsufficientResolution(format!("n = {n} cannot resolve derivatives of order {m}")));
    }
    let dx = |f: &[f64], axis: usize| -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (a, b) = if axis == 0 {
                    (if i + 1 < n { f[(i + 1) * n + j] } else { 0.0 }, if i > 0 { f[(i - 1) * n + j] } else { 0.0 })
                } else {
                    (if j + 1 < n { f[i * n + j + 1] } else { 0.0 }, if j > 0 { f[i * n + j - 1] } else { 0.0 })
                };
                out[i * n + j] = (a - b) / (2.0 * h);
            }
        }
        out
    };
    let mut best: f64 = 0.0;
    let mut by_first = v.values.clone();
    for j1 in 0..=m {
        let mut f = by_first.clone();
        for j2 in 0..=(m - j1) {
            best = best.max(h * h * f.iter().map(|x| x.abs()).sum::<f64>());
            if j2 < m - j1 {
                f = dx(&f, 1);
            }
        }
        if j1 < m {
            by_first = dx(&by_first, 0);
        }
    }
    Ok(best)
}

/// sup over the DFT lattice of (1 + |p|²)^{m/2}|v̂(p)|, v̂(p) = (2π)^{−2}∫e^{ip·x}v(x)dx.
pub fn fourier_decay_norm(v: &PotentialGrid, m: u32) -> f64 {
    let n = v.n();
    let h = v.step();
    let mut buf: Vec<Complex64> = v.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Fft2::new(n, n).forward(&mut buf);
    let dp = 2.0 * PI / (n as f64 * h);
    let scale = h * h / (4.0 * PI * PI);
    let mut best: f64 = 0.0;
    for i in 0..n {
        let p1 = freq(i, n) as f64 * dp;
        for j in 0..n {
            let p2 = freq(j, n) as f64 * dp;
            let w = (1.0 + p1 * p1 + p2 * p2).powf(m as f64 / 2.0);
            best = best.max(w * scale * buf[i * n + j].norm());
        }
    }
    best
}

/// v̂(p) = (2π)^{−2}∫ e^{ip·x} v(x) dx by direct node summation.
pub fn fourier_transform_at(v: &PotentialGrid, p: [f64; 2]) -> Complex64 {
    let n = v.n();
    let h = v.step();
    let mut s = Complex64::default();
    for i in 0..n {
        let x = v.grid.coord(i);
        for j in 0..n {
            let val = v.values[i * n + j];
            if val != 0.0 {
                s += Complex64::from_polar(val, p[0] * x + p[1] * v.grid.coord(j));
            }
        }
    }
    s * (h * h / (4.0 * PI * PI))
}

/// A(1 − |x − x₀|²/ρ²)^s₊ on the given grid.
pub fn make_bump_potential_on(grid: GridSpec, center: [f64; 2], radius: f64, amplitude: f64, power: u32) -> Result<PotentialGrid> {
    if center[0].hypot(center[1]) + radius > 1.0 + 1e-12 {
        return invalid("bump support leaves the unit disk");
    }
    if power < 3 {
        return invalid("bump power must be at least 3");
    }
    if !(radius > 0.0) {
        return invalid("bump radius must be positive");
    }
    let n = grid.n;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = bump_value(grid.coord(i), grid.coord(j), center, radius, amplitude, power);
        }
    }
    let mut v = PotentialGrid { grid, values, support_radius: 1.0, smoothness_m: power, norm_bound: 1.0 };
    let nb = if amplitude == 0.0 { 0.0 } else { sobolev_norm_m1(&v, power.min(3)).unwrap_or(amplitude.abs()) };
    v.norm_bound = if nb > 0.0 { nb } else { 1.0 };
    Ok(v)
}

/// Bump on the default 256² grid over [−1.25, 1.25]².
pub fn make_bump_potential(center: [f64; 2], radius: f64, amplitude: f64, power: u32) -> Result<PotentialGrid> {
    make_bump_potential_on(GridSpec::default(), center, radius, amplitude, power)
}

pub fn bump_value(x1: f64, x2: f64, center: [f64; 2], radius: f64, amplitude: f64, power: u32) -> f64 {
    let q = 1.0 - ((x1 - center[0]).powi(2) + (x2 - center[1]).powi(2)) / (radius * radius);
    if q > 0.0 {
        amplitude * q.powi(power as i32)
    } else {
        0.0
    }
}

/// (Σ (1 + n²)^s |f̂_n|²)^{1/2}.
pub fn hs_boundary_norm(f: &BoundaryFunction, s: f64) -> f64 {
    (-(f.n_max as i64)..=f.n_max as i64)
        .map(|n| (1.0 + (n * n) as f64).powf(s) * f.get(n).norm_sqr())
        .sum::<f64>()
        .sqrt()
}
