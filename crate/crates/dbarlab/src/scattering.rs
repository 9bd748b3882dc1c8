//! Scattering transform b(λ, E), the ∂̄ data r(λ) and r(z, λ), the boundary identity for b₂ − b₁,
//! and weighted L^p norms of r over parts of the λ-plane.

use crate::core_types::{BoundaryFunction, PotentialGrid};
use crate::error::{invalid, Error, Result};
use crate::faddeev::{k_of_lambda, sample_rotated, solve_mu_ls_on, solve_on_table, KernelTable, LsGrid, LsOptions, MuField, MuKind};
use crate::forward_dtn::DtNMatrix;
use crate::io::{data_lines, parse_f64, split_fields};
use crate::numerics::radial::{full_weights, Break};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Radial interpolation order of the λ-plane quadratures.
pub const RADIAL_ORDER: usize = 6;

/// Polar grid on a₁ ≤ |λ| ≤ a₂: cell-centred geometric radii, uniform angles, row-major (radius, angle).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    pub n_rho: usize,
    pub n_phi: usize,
    pub a1: f64,
    pub a2: f64,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid { n_rho: 64, n_phi: 128, a1: 0.125, a2: 8.0 }
    }
}

impl LambdaGrid {
    pub fn new(n_rho: usize, n_phi: usize, a1: f64, a2: f64) -> Result<Self> {
        let g = LambdaGrid { n_rho, n_phi, a1, a2 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a1 > 0.0 && self.a2 > self.a1 && self.a2.is_finite()) {
            return invalid("need 0 < a1 < a2");
        }
        if self.n_rho < RADIAL_ORDER || self.n_phi < 4 {
            return invalid(format!("lambda grid needs at least {RADIAL_ORDER} radii and 4 angles"));
        }
        if (0..self.n_rho).any(|i| (self.rho(i) - 1.0).abs() < 1e-3) {
            return invalid("a lambda node falls in the unit-circle exclusion ring");
        }
        Ok(())
    }

    /// r jumps across |λ| = 1; the radial interval containing it, if it lies between two nodes
    /// with at least [`RADIAL_ORDER`] radii on each side.
    pub fn radial_break(&self) -> Option<Break> {
        let u = -self.rho(0).ln() / self.dt();
        if u <= 0.0 || u >= (self.n_rho - 1) as f64 {
            return None;
        }
        let interval = u.floor() as usize;
        (interval + 1 >= RADIAL_ORDER && self.n_rho - interval - 1 >= RADIAL_ORDER).then(|| Break { interval, frac: u - interval as f64 })
    }

    pub fn len(&self) -> usize {
        self.n_rho * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// log-spacing Δ.
    pub fn dt(&self) -> f64 {
        (self.a2 / self.a1).ln() / self.n_rho as f64
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.a1 * ((i as f64 + 0.5) * self.dt()).exp()
    }

    pub fn phi(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_phi as f64
    }

    pub fn node(&self, i: usize, k: usize) -> Complex64 {
        Complex64::from_polar(self.rho(i), self.phi(k))
    }

    pub fn nodes(&self) -> Vec<Complex64> {
        (0..self.len()).map(|idx| self.node(idx / self.n_phi, idx % self.n_phi)).collect()
    }

    /// High-order area weights (radial product integration in log|λ|).
    pub fn weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let r0 = self.rho(0);
        let wr = full_weights(self.n_rho, dt, 2.0, RADIAL_ORDER, self.radial_break());
        let dphi = 2.0 * PI / self.n_phi as f64;
        (0..self.len()).map(|idx| wr[idx / self.n_phi] * r0 * r0 * dphi).collect()
    }

    /// Exact cell areas ρ²sinh(Δ)·2π/n_φ; used for region-restricted norms.
    pub fn cell_weights(&self) -> Vec<f64> {
        let s = self.dt().sinh() * 2.0 * PI / self.n_phi as f64;
        (0..self.len()).map(|idx| self.rho(idx / self.n_phi).powi(2) * s).collect()
    }
}

/// r(λ) = (π/λ̄)·sgn(|λ|² − 1)·b.
pub fn r_of_lambda(b: Complex64, lambda: Complex64) -> Result<Complex64> {
    let m = lambda.norm_sqr();
    if m == 1.0 || m == 0.0 {
        return invalid("sgn(|λ|² − 1) is undefined on the unit circle");
    }
    Ok(PI / lambda.conj() * (m - 1.0).signum() * b)
}

/// r(z, λ) = r(λ)·exp(iκ(1 − 1/|λ|²) Im(λ z̄)), the coefficient in ∂μ/∂λ̄ = r(z, λ) conj(μ).
pub fn r_of_z_lambda(r: Complex64, z: Complex64, lambda: Complex64, energy: f64) -> Result<Complex64> {
    let m = lambda.norm_sqr();
    if m == 1.0 || m == 0.0 {
        return invalid("sgn(|λ|² − 1) is undefined on the unit circle");
    }
    let kap = (-energy).sqrt();
    Ok(r * Complex64::from_polar(1.0, kap * (1.0 - 1.0 / m) * (lambda * z.conj()).im))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringData {
    pub grid: LambdaGrid,
    pub energy: f64,
    pub b: Vec<Complex64>,
    pub r: Vec<Complex64>,
}

impl ScatteringData {
    pub fn from_b(grid: LambdaGrid, energy: f64, b: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if b.len() != grid.len() {
            return invalid("b does not match the lambda grid");
        }
        let r = grid.nodes().iter().zip(&b).map(|(&l, &bb)| r_of_lambda(bb, l)).collect::<Result<_>>()?;
        Ok(ScatteringData { grid, energy, b, r })
    }

    pub fn zeros(grid: LambdaGrid, energy: f64) -> Result<Self> {
        Self::from_b(grid, energy, vec![Complex64::default(); grid.len()])
    }

    pub fn is_zero(&self) -> bool {
        self.r.iter().all(|z| *z == Complex64::default())
    }

    /// r(z, ·) on the grid.
    pub fn r_at_z(&self, z: Complex64) -> Vec<Complex64> {
        let kap = (-self.energy).sqrt();
        let g = &self.grid;
        (0..g.len())
            .map(|idx| {
                let (i, k) = (idx / g.n_phi, idx % g.n_phi);
                let rho = g.rho(i);
                let lam = g.node(i, k);
                self.r[idx] * Complex64::from_polar(1.0, kap * (1.0 - 1.0 / (rho * rho)) * (lam * z.conj()).im)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut s = format!("{:?} {:?} {:?} {} {}\n", self.energy, g.a1, g.a2, g.n_rho, g.n_phi);
        for (idx, l) in g.nodes().iter().enumerate() {
            let (b, r) = (self.b[idx], self.r[idx]);
            let _ = writeln!(s, "{:?},{:?},{:?},{:?},{:?},{:?}", l.re, l.im, b.re, b.im, r.re, r.im);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = data_lines(text);
        let head = split_fields(lines.next().ok_or_else(|| Error::Parse("empty scattering file".into()))?);
        if head.len() != 5 {
            return Err(Error::Parse("scattering header is `E a1 a2 n_rho n_phi`".into()));
        }
        let energy = parse_f64(head[0])?;
        let grid = LambdaGrid::new(parse_f64(head[3])? as usize, parse_f64(head[4])? as usize, parse_f64(head[1])?, parse_f64(head[2])?)?;
        let nodes = grid.nodes();
        let (mut b, mut r) = (Vec::new(), Vec::new());
        for (idx, line) in lines.enumerate() {
            let f: Vec<f64> = split_fields(line).into_iter().map(parse_f64).collect::<Result<_>>()?;
            if f.len() != 6 || idx >= nodes.len() {
                return Err(Error::Parse(format!("bad scattering row {line:?}")));
            }
            if (Complex64::new(f[0], f[1]) - nodes[idx]).norm() > 1e-9 * nodes[idx].norm() {
                return Err(Error::Parse(format!("row {idx} is not at the expected lambda node")));
            }
            b.push(Complex64::new(f[2], f[3]));
            r.push(Complex64::new(f[4], f[5]));
        }
        if b.len() != nodes.len() {
            return Err(Error::Parse(format!("expected {} rows, got {}", nodes.len(), b.len())));
        }
        Ok(ScatteringData { grid, energy, b, r })
    }
}

/// b(λ, E) = (2π)^{−2}∫ e^{ip·x} v μ dx, p = k + conj(k), from a spatial μ.
pub fn scattering_b(v: &PotentialGrid, mu: &MuField) -> Result<Complex64> {
    let MuKind::Spatial { grid, k } = &mu.kind else {
        return invalid("scattering_b needs a spatial field");
    };
    let n = grid.n;
    let h = grid.step();
    let vs = sample_rotated(v, *grid, 0.0);
    let p = k.p();
    let mut s = Complex64::default();
    for idx in 0..n * n {
        if vs[idx] != 0.0 {
            let (x1, x2) = (grid.coord(idx / n), grid.coord(idx % n));
            s += Complex64::from_polar(vs[idx], p[0] * x1 + p[1] * x2) * mu.values[idx];
        }
    }
    Ok(s * (h * h / (4.0 * PI * PI)))
}

/// b at one λ via a direct solve.
pub fn scattering_b_at(v: &PotentialGrid, lambda: Complex64, energy: f64, ls: LsGrid, opts: LsOptions) -> Result<Complex64> {
    if v.is_zero() {
        return Ok(Complex64::default());
    }
    let k = k_of_lambda(lambda, energy)?;
    let mu = solve_mu_ls_on(v, &k, ls, opts)?;
    scattering_b(v, &mu)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ScatterOptions {
    pub ls: LsGrid,
    pub ls_opts: LsOptions,
}

/// b and r on the whole λ-grid; one kernel table per radius, all angles by rotating v.
pub fn scattering_transform(v: &PotentialGrid, energy: f64, grid: &LambdaGrid, opts: ScatterOptions) -> Result<ScatteringData> {
    grid.validate()?;
    if !(energy < 0.0) {
        return invalid("energy must be negative");
    }
    if v.is_zero() {
        return ScatteringData::zeros(*grid, energy);
    }
    if v.support_radius > opts.ls.half_width + 1e-12 {
        return invalid("LS grid does not cover the potential support");
    }
    let kap = (-energy).sqrt();
    let ls = opts.ls;
    let n = ls.n;
    let h = ls.step();
    let rows: Vec<Vec<Complex64>> = (0..grid.n_rho)
        .into_par_iter()
        .map(|i| {
            let rho = grid.rho(i);
            let a = 0.5 * kap * (rho - 1.0 / rho);
            let table = KernelTable::radial(ls, rho, kap);
            (0..grid.n_phi)
                .map(|k| {
                    let vs = sample_rotated(v, ls, grid.phi(k));
                    let (mu, _) = solve_on_table(&table, &vs, opts.ls_opts)?;
                    let mut s = Complex64::default();
                    for idx in 0..n * n {
                        if vs[idx] != 0.0 {
                            s += Complex64::from_polar(vs[idx], 2.0 * a * ls.coord(idx % n)) * mu[idx];
                        }
                    }
                    Ok(s * (h * h / (4.0 * PI * PI)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    ScatteringData::from_b(*grid, energy, rows.concat())
}

/// b₂(λ) − b₁(λ) = (2π)^{−2}∫_{∂D} ψ₁(·, conj k) (Φ₂ − Φ₁) ψ₂(·, k) dθ in Fourier coefficients.
pub fn b_diff_from_dtn(psi1_conj: &BoundaryFunction, psi2: &BoundaryFunction, phi1: &DtNMatrix, phi2: &DtNMatrix) -> Result<Complex64> {
    let n = phi1.n_max;
    if psi1_conj.n_max != n || psi2.n_max != n {
        return invalid("boundary traces and DtN matrices use different mode ranges");
    }
    let delta = phi2.sub(phi1)?;
    let g = delta.apply(psi2);
    let s: Complex64 = (-(n as i64)..=n as i64).map(|j| psi1_conj.get(-j) * g.get(j)).sum();
    Ok(s * (2.0 * PI) / (4.0 * PI * PI))
}

/// Part of the λ-plane for restricted norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    All,
    /// |λ| < a.
    Inner(f64),
    /// |λ| > a.
    Outer(f64),
    /// lo ≤ |λ| ≤ hi.
    Annulus(f64, f64),
}

impl Region {
    pub fn contains(&self, rho: f64) -> bool {
        match *self {
            Region::All => true,
            Region::Inner(a) => rho < a,
            Region::Outer(a) => rho > a,
            Region::Annulus(lo, hi) => rho >= lo && rho <= hi,
        }
    }
}

/// (Σ_{nodes in region} w |f|^p)^{1/p} with cell weights.
pub fn lp_norm(grid: &LambdaGrid, f: &[f64], p: f64, region: Region) -> f64 {
    let w = grid.cell_weights();
    let s: f64 = (0..grid.len()).filter(|&i| region.contains(grid.rho(i / grid.n_phi))).map(|i| w[i] * f[i].abs().powf(p)).sum();
    s.powf(1.0 / p)
}

/// ‖|λ|^j r‖_{L^p(region)}.
pub fn weighted_tail_norms(data: &ScatteringData, j: i32, p: f64, region: Region) -> Result<f64> {
    if p < 1.0 {
        return invalid("p must be at least 1");
    }
    let g = &data.grid;
    if !(0..g.n_rho).any(|i| region.contains(g.rho(i))) {
        return invalid("region holds no grid nodes");
    }
    let f: Vec<f64> = (0..g.len()).map(|i| g.rho(i / g.n_phi).powi(j) * data.r[i].norm()).collect();
    Ok(lp_norm(g, &f, p, region))
}

/// sup over nodes with |λ| ≥ rho_min of |b|(1 + |E|(|λ| − 1/|λ|)²)^{m/2}.
pub fn b_decay_envelope(data: &ScatteringData, m: u32, rho_min: f64) -> f64 {
    let g = &data.grid;
    (0..g.len())
        .filter(|&i| g.rho(i / g.n_phi) >= rho_min)
        .map(|i| {
            let rho = g.rho(i / g.n_phi);
            let w = 1.0 - data.energy * (rho - 1.0 / rho).powi(2);
            data.b[i].norm() * w.powf(m as f64 / 2.0)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_types::{fourier_transform_at, make_bump_potential_on, GridSpec};
    use crate::forward_dtn::DtNMatrix;
    use nalgebra::DMatrix;

    #[test]
    fn grid_weights_sum_to_annulus_area() {
        let g = LambdaGrid::default();
        let exact = PI * (g.a2 * g.a2 - g.a1 * g.a1);
        assert!((g.weights().iter().sum::<f64>() - exact).abs() < 1e-10 * exact);
        assert!((g.cell_weights().iter().sum::<f64>() - exact).abs() < 1e-10 * exact);
        assert!(g.weights().iter().all(|&w| w > 0.0));
        assert!(LambdaGrid::new(15, 8, 0.5, 2.0).is_err());
    }

    #[test]
    fn r_examples() {
        let one = Complex64::new(1.0, 0.0);
        assert!((r_of_lambda(one, Complex64::new(2.0, 0.0)).unwrap() - PI / 2.0).norm() < 1e-15);
        assert!((r_of_lambda(one, Complex64::new(0.5, 0.0)).unwrap() + 2.0 * PI).norm() < 1e-14);
        assert!(r_of_lambda(one, Complex64::new(0.0, 1.0)).is_err());
        let r = Complex64::new(0.3, -0.2);
        let l = Complex64::new(1.5, 0.7);
        assert_eq!(r_of_z_lambda(r, Complex64::default(), l, -30.0).unwrap(), r);
        let rz = r_of_z_lambda(r, Complex64::new(0.4, -0.3), l, -30.0).unwrap();
        assert!((rz.norm() - r.norm()).abs() < 1e-15);
    }

    #[test]
    fn csv_roundtrip() {
        let g = LambdaGrid::new(6, 4, 0.5, 3.0).unwrap();
        let b: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new(i as f64 * 0.1, -(i as f64) * 0.01)).collect();
        let d = ScatteringData::from_b(g, -30.0, b).unwrap();
        assert_eq!(ScatteringData::from_csv(&d.to_csv()).unwrap(), d);
    }

    #[test]
    fn tail_norm_of_power_law() {
        let g = LambdaGrid::new(60, 16, 0.5, 32.0).unwrap();
        let m = 3.0;
        let b: Vec<Complex64> = g.nodes().iter().map(|l| Complex64::new(l.norm().powf(-m), 0.0) * l.conj() / PI).collect();
        let d = ScatteringData::from_b(g, -30.0, b).unwrap();
        let p = 4.0 / 3.0;
        let got = weighted_tail_norms(&d, 0, p, Region::Outer(2.0)).unwrap();
        // ∫_2^{a₂} ρ^{−mp} 2πρ dρ
        let e = 2.0 - m * p;
        let exact = (2.0 * PI * (32f64.powf(e) - 2f64.powf(e)) / e).powf(1.0 / p);
        assert!((got - exact).abs() < 0.01 * exact, "{got} {exact}");
        let parts = [Region::Inner(1.0), Region::Annulus(1.0, 4.0), Region::Outer(4.0)]
            .iter()
            .map(|&r| weighted_tail_norms(&d, 1, p, r).unwrap().powf(p))
            .sum::<f64>();
        assert!((parts - weighted_tail_norms(&d, 1, p, Region::All).unwrap().powf(p)).abs() < 1e-10 * parts);
    }

    #[test]
    fn identity_vanishes_for_equal_maps() {
        let phi = DtNMatrix { n_max: 2, entries: DMatrix::from_element(5, 5, Complex64::new(1.0, 0.5)), energy: -3.0, condition_diag: 1.0 };
        let f = BoundaryFunction::mode(2, 1);
        assert_eq!(b_diff_from_dtn(&f, &f, &phi, &phi).unwrap(), Complex64::default());
        assert!(b_diff_from_dtn(&BoundaryFunction::mode(3, 1), &f, &phi, &phi).is_err());
    }

    #[test]
    fn sweep_matches_direct_solve() {
        let g = GridSpec { n: 129, half_width: 1.25 };
        let v = make_bump_potential_on(g, [0.1, -0.05], 0.7, 1.0, 5).unwrap();
        let ls = LsGrid { n: 41, half_width: 1.0 };
        let grid = LambdaGrid::new(6, 4, 1.5, 3.0).unwrap();
        let opts = ScatterOptions { ls, ..Default::default() };
        let d = scattering_transform(&v, -30.0, &grid, opts).unwrap();
        for idx in [0, 7, 22] {
            let l = grid.node(idx / 4, idx % 4);
            let direct = scattering_b_at(&v, l, -30.0, ls, LsOptions::default()).unwrap();
            assert!((direct - d.b[idx]).norm() < 1e-6 * direct.norm(), "{idx}: {direct} {}", d.b[idx]);
        }
        // weak coupling: b tracks the Fourier transform
        let w = make_bump_potential_on(g, [0.1, -0.05], 0.7, 0.01, 5).unwrap();
        let l = Complex64::new(2.0, 0.6);
        let k = k_of_lambda(l, -30.0).unwrap();
        let b = scattering_b_at(&w, l, -30.0, ls, LsOptions::default()).unwrap();
        let vh = fourier_transform_at(&w, k.p());
        assert!((b - vh).norm() < 0.05 * vh.norm());
    }
}
