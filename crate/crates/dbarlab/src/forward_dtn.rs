//! Dirichlet problem (−Δ + v − E)u = 0 on the unit disk and the Dirichlet-to-Neumann matrix.
//!
//! Discretization: Chebyshev collocation in r on (−1, 1), folded through the origin by the parity
//! of each angular mode, times Fourier in θ. The potential couples modes pseudo-spectrally; each
//! solve is GMRES right-preconditioned by the exact inverse of the mode blocks with v replaced by
//! its angular mean.

use crate::core_types::{BoundaryFunction, EnergyContext, PotentialGrid};
use crate::error::{invalid, Error, Result};
use crate::io::{data_lines, parse_f64, split_fields};
use crate::numerics::fft2::freq;
use crate::numerics::gmres;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Debug, Clone, Copy)]
pub struct DtnOptions {
    /// Interior radial nodes in (0, 1).
    pub n_r: usize,
    pub n_theta: usize,
    pub tol: f64,
    /// Below this the solvability diagnostic is treated as a Dirichlet eigenvalue hit.
    pub min_margin: f64,
}

impl Default for DtnOptions {
    fn default() -> Self {
        DtnOptions { n_r: 32, n_theta: 128, tol: 1e-12, min_margin: 1e-3 }
    }
}

/// Solution on the polar grid: row 0 is r = 1, then the interior radii in decreasing order.
#[derive(Debug, Clone)]
pub struct InteriorField {
    pub radii: Vec<f64>,
    pub n_theta: usize,
    pub values: Vec<Complex64>,
    pub boundary_trace: BoundaryFunction,
}

impl InteriorField {
    pub fn at(&self, ir: usize, it: usize) -> Complex64 {
        self.values[ir * self.n_theta + it]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtNMatrix {
    pub n_max: usize,
    /// Row n, column n' (both offset by n_max): n-th coefficient of Φ e^{in'θ}.
    pub entries: DMatrix<Complex64>,
    pub energy: f64,
    pub condition_diag: f64,
}

impl DtNMatrix {
    pub fn get(&self, n: i64, np: i64) -> Complex64 {
        let o = self.n_max as i64;
        self.entries[((n + o) as usize, (np + o) as usize)]
    }

    pub fn sub(&self, other: &DtNMatrix) -> Result<DtNMatrix> {
        if self.n_max != other.n_max || self.energy != other.energy {
            return invalid("DtN matrices differ in n_max or energy");
        }
        Ok(DtNMatrix {
            n_max: self.n_max,
            entries: &self.entries - &other.entries,
            energy: self.energy,
            condition_diag: self.condition_diag.min(other.condition_diag),
        })
    }

    /// Φ applied to boundary coefficients.
    pub fn apply(&self, f: &BoundaryFunction) -> BoundaryFunction {
        let mut out = BoundaryFunction::zeros(self.n_max);
        let o = self.n_max as i64;
        for n in -o..=o {
            *out.get_mut(n) = (-o..=o).map(|np| self.get(n, np) * f.get(np)).sum();
        }
        out
    }

    /// max |Φ_{n,n'} − Φ_{−n',−n}| / max |Φ|.
    pub fn symmetry_defect(&self) -> f64 {
        let o = self.n_max as i64;
        let mut num: f64 = 0.0;
        for n in -o..=o {
            for np in -o..=o {
                num = num.max((self.get(n, np) - self.get(-np, -n)).norm());
            }
        }
        num / self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{} {}\n", self.n_max, self.energy);
        let o = self.n_max as i64;
        for n in -o..=o {
            for np in -o..=o {
                let z = self.get(n, np);
                let _ = writeln!(s, "{n},{np},{:?},{:?}", z.re, z.im);
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<DtNMatrix> {
        let mut lines = data_lines(text);
        let head = split_fields(lines.next().ok_or_else(|| Error::Parse("empty DtN file".into()))?);
        if head.len() != 2 {
            return Err(Error::Parse("DtN header is `n_max E`".into()));
        }
        let n_max: usize = head[0].parse().map_err(|_| Error::Parse(format!("bad n_max {:?}", head[0])))?;
        let energy = parse_f64(head[1])?;
        let d = 2 * n_max + 1;
        let mut entries = DMatrix::zeros(d, d);
        for line in lines {
            let f = split_fields(line);
            if f.len() != 4 {
                return Err(Error::Parse(format!("expected `n,n',re,im`, got {line:?}")));
            }
            let n = parse_f64(f[0])? as i64 + n_max as i64;
            let np = parse_f64(f[1])? as i64 + n_max as i64;
            if n < 0 || np < 0 || n >= d as i64 || np >= d as i64 {
                return Err(Error::Parse(format!("index out of range in {line:?}")));
            }
            entries[(n as usize, np as usize)] = Complex64::new(parse_f64(f[2])?, parse_f64(f[3])?);
        }
        Ok(DtNMatrix { n_max, entries, energy, condition_diag: f64::NAN })
    }
}

/// Largest singular value of W₋ ΔΦ W₊⁻¹ with W_± = diag (1 + n²)^{±1/4}.
pub fn dtn_operator_norm(delta: &DtNMatrix) -> f64 {
    let o = delta.n_max as i64;
    let w: Vec<f64> = (-o..=o).map(|n| (1.0 + (n * n) as f64).powf(-0.25)).collect();
    let m = DMatrix::from_fn(w.len(), w.len(), |i, j| delta.entries[(i, j)] * (w[i] * w[j]));
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Chebyshev differentiation matrix on x_j = cos(πj/N).
fn cheb(n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
    let c: Vec<f64> = (0..=n).map(|j| if j == 0 || j == n { 2.0 } else { 1.0 } * if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c[i] / c[j] / (x[i] - x[j]);
            }
        }
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (d, x)
}

struct ModeBlock {
    a: DMatrix<f64>,
    bcol: DVector<f64>,
    d1row: DVector<f64>,
    pinv: DMatrix<f64>,
}

/// Discretized interior problem for one potential and energy.
pub struct DtnSolver {
    pub opts: DtnOptions,
    pub energy: f64,
    radii: Vec<f64>,
    vpol: Vec<f64>,
    /// Block for |n|, n = 0..=n_theta/2.
    blocks: Vec<ModeBlock>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    radial: bool,
}

impl DtnSolver {
    pub fn new(v: &PotentialGrid, e: &EnergyContext, opts: DtnOptions) -> Result<Self> {
        if opts.n_r < 4 || opts.n_theta < 8 {
            return invalid("DtN grid too small");
        }
        if v.support_radius > 1.0 + 1e-12 {
            return invalid("potential support must lie in the unit disk");
        }
        let nc = 2 * opts.n_r + 1;
        let h = opts.n_r + 1;
        let (d, x) = cheb(nc);
        let d2 = &d * &d;
        let radii: Vec<f64> = x[1..h].to_vec();
        let m = opts.n_theta;
        let mut vpol = vec![0.0; opts.n_r * m];
        for (i, &r) in radii.iter().enumerate() {
            for j in 0..m {
                let t = 2.0 * PI * j as f64 / m as f64;
                vpol[i * m + j] = v.sample(r * t.cos(), r * t.sin());
            }
        }
        let vbar: Vec<f64> = (0..opts.n_r).map(|i| vpol[i * m..(i + 1) * m].iter().sum::<f64>() / m as f64).collect();
        let radial = (0..opts.n_r).all(|i| vpol[i * m..(i + 1) * m].iter().all(|&x| (x - vbar[i]).abs() <= 1e-14 * (1.0 + x.abs())));
        let mut blocks = Vec::new();
        for n in 0..=m / 2 {
            let sg = if n % 2 == 0 { 1.0 } else { -1.0 };
            // x_{N−j} = −x_j is the point across the origin, where mode n picks up (−1)^n
            let fold = |mat: &DMatrix<f64>| DMatrix::from_fn(h, h, |i, j| mat[(i, j)] + sg * mat[(i, nc - j)]);
            let d1f = fold(&d);
            let d2f = fold(&d2);
            let n2 = (n * n) as f64;
            let full = DMatrix::from_fn(h - 1, h, |i, j| {
                let r = radii[i];
                let mut val = -(d2f[(i + 1, j)] + d1f[(i + 1, j)] / r);
                if j == i + 1 {
                    val += n2 / (r * r) - e.energy;
                }
                val
            });
            let a = full.columns(1, h - 1).into_owned();
            let bcol = full.column(0).into_owned();
            let d1row = d1f.row(0).transpose();
            let pinv = (&a + DMatrix::from_diagonal(&DVector::from_vec(vbar.clone())))
                .try_inverse()
                .ok_or(Error::DirichletProximity(0.0))?;
            blocks.push(ModeBlock { a, bcol, d1row, pinv });
        }
        let mut planner = FftPlanner::new();
        Ok(DtnSolver {
            opts,
            energy: e.energy,
            radii,
            vpol,
            blocks,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
            radial,
        })
    }

    fn block(&self, k: usize) -> &ModeBlock {
        &self.blocks[freq(k, self.opts.n_theta).unsigned_abs() as usize]
    }

    /// Coefficient layout: row per interior radius, FFT-ordered angular modes.
    fn apply_op(&self, uc: &[Complex64], out: &mut [Complex64]) {
        let (nr, m) = (self.opts.n_r, self.opts.n_theta);
        let mut u = uc.to_vec();
        self.inv.process(&mut u);
        for (x, &v) in u.iter_mut().zip(&self.vpol) {
            *x *= v / m as f64;
        }
        self.fwd.process(&mut u);
        out.copy_from_slice(&u);
        for k in 0..m {
            let a = &self.block(k).a;
            for i in 0..nr {
                let mut s = Complex64::default();
                for j in 0..nr {
                    s += uc[j * m + k] * a[(i, j)];
                }
                out[i * m + k] += s;
            }
        }
    }

    fn apply_prec(&self, y: &[Complex64], out: &mut [Complex64]) {
        let (nr, m) = (self.opts.n_r, self.opts.n_theta);
        for k in 0..m {
            let p = &self.block(k).pinv;
            for i in 0..nr {
                let mut s = Complex64::default();
                for j in 0..nr {
                    s += y[j * m + k] * p[(i, j)];
                }
                out[i * m + k] = s;
            }
        }
    }

    /// Solves the interior system A U = rhs (zero boundary data already folded into rhs).
    fn solve_interior(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = rhs.len();
        let mut tmp = vec![Complex64::default(); n];
        let out = gmres(
            |x: &[Complex64], y: &mut [Complex64]| {
                self.apply_prec(x, &mut tmp);
                self.apply_op(&tmp, y);
            },
            rhs,
            self.opts.tol,
            60,
            if self.radial { 5 } else { 600 },
        );
        if !out.converged {
            return Err(Error::Solver(format!(
                "interior GMRES stalled at residual {:.3e} after {} iterations",
                out.residual(),
                out.iterations
            )));
        }
        let mut u = vec![Complex64::default(); n];
        self.apply_prec(&out.x, &mut u);
        Ok(u)
    }

    fn boundary_coeffs(&self, f: &BoundaryFunction) -> Result<Vec<Complex64>> {
        let m = self.opts.n_theta;
        if 2 * f.n_max >= m {
            return invalid(format!("boundary modes up to {} need n_theta > {}", f.n_max, 2 * f.n_max));
        }
        let mut c = vec![Complex64::default(); m];
        for n in -(f.n_max as i64)..=f.n_max as i64 {
            c[n.rem_euclid(m as i64) as usize] = f.get(n);
        }
        Ok(c)
    }

    /// Interior coefficients for boundary data with coefficients `fc` (FFT order).
    fn solve_coeffs(&self, fc: &[Complex64]) -> Result<Vec<Complex64>> {
        let (nr, m) = (self.opts.n_r, self.opts.n_theta);
        let mut rhs = vec![Complex64::default(); nr * m];
        for (k, &f) in fc.iter().enumerate() {
            if f != Complex64::default() {
                let b = &self.block(k).bcol;
                for i in 0..nr {
                    rhs[i * m + k] = -f * b[i];
                }
            }
        }
        if rhs.iter().all(|z| *z == Complex64::default()) {
            return Ok(rhs);
        }
        self.solve_interior(&rhs)
    }

    pub fn solve(&self, f: &BoundaryFunction) -> Result<InteriorField> {
        let m = self.opts.n_theta;
        let fc = self.boundary_coeffs(f)?;
        let uc = self.solve_coeffs(&fc)?;
        let mut values = fc.clone();
        values.extend_from_slice(&uc);
        for row in values.chunks_mut(m) {
            self.inv.process(row);
        }
        let mut radii = vec![1.0];
        radii.extend_from_slice(&self.radii);
        Ok(InteriorField { radii, n_theta: m, values, boundary_trace: f.clone() })
    }

    /// ∂u/∂r at r = 1 as boundary coefficients up to `n_max`.
    fn normal_derivative(&self, fc: &[Complex64], uc: &[Complex64], n_max: usize) -> BoundaryFunction {
        let (nr, m) = (self.opts.n_r, self.opts.n_theta);
        let mut out = BoundaryFunction::zeros(n_max);
        for n in -(n_max as i64)..=n_max as i64 {
            let k = n.rem_euclid(m as i64) as usize;
            let d = &self.block(k).d1row;
            let mut s = fc[k] * d[0];
            for i in 0..nr {
                s += uc[i * m + k] * d[i + 1];
            }
            *out.get_mut(n) = s;
        }
        out
    }

    /// Φf.
    pub fn apply_dtn(&self, f: &BoundaryFunction) -> Result<BoundaryFunction> {
        let fc = self.boundary_coeffs(f)?;
        let uc = self.solve_coeffs(&fc)?;
        Ok(self.normal_derivative(&fc, &uc, f.n_max))
    }

    /// Smallest eigenvalue modulus of the discrete −Δ + v − E with zero Dirichlet data, by inverse iteration.
    pub fn solvability(&self) -> Result<f64> {
        let (nr, m) = (self.opts.n_r, self.opts.n_theta);
        let mut x: Vec<Complex64> = (0..nr * m)
            .map(|idx| {
                let (i, k) = (idx / m, idx % m);
                let r = self.radii[i];
                let amp = (1.0 - r * r) / (1.0 + freq(k, m).pow(2) as f64);
                Complex64::new(amp * (1.0 + 0.1 * ((7 * idx) % 13) as f64 / 13.0), 0.0)
            })
            .collect();
        let mut est = f64::NAN;
        for _ in 0..60 {
            let nx = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            x.iter_mut().for_each(|z| *z /= nx);
            let y = self.solve_interior(&x)?;
            let ny = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let new = 1.0 / ny;
            let done = (new - est).abs() <= 1e-10 * new;
            est = new;
            x = y;
            if done {
                break;
            }
        }
        Ok(est)
    }

    /// Φ(E) on modes |n|, |n'| ≤ n_max, one interior solve per column.
    pub fn matrix(&self, n_max: usize) -> Result<DtNMatrix> {
        let d = 2 * n_max + 1;
        let margin = self.solvability()?;
        if !(margin > self.opts.min_margin) {
            return Err(Error::DirichletProximity(margin));
        }
        let cols: Vec<BoundaryFunction> = (0..d)
            .into_par_iter()
            .map(|j| self.apply_dtn(&BoundaryFunction::mode(n_max, j as i64 - n_max as i64)))
            .collect::<Result<_>>()?;
        let entries = DMatrix::from_fn(d, d, |i, j| cols[j].coeffs[i]);
        Ok(DtNMatrix { n_max, entries, energy: self.energy, condition_diag: margin })
    }
}

pub fn check_dirichlet_solvability(v: &PotentialGrid, e: &EnergyContext) -> Result<f64> {
    DtnSolver::new(v, e, DtnOptions::default())?.solvability()
}

pub fn solve_dirichlet(v: &PotentialGrid, e: &EnergyContext, f: &BoundaryFunction) -> Result<InteriorField> {
    let s = DtnSolver::new(v, e, DtnOptions::default())?;
    let margin = s.solvability()?;
    if !(margin > s.opts.min_margin) {
        return Err(Error::DirichletProximity(margin));
    }
    s.solve(f)
}

pub fn dtn_map(v: &PotentialGrid, e: &EnergyContext, n_max: usize) -> Result<DtNMatrix> {
    dtn_map_with(v, e, n_max, DtnOptions::default())
}

pub fn dtn_map_with(v: &PotentialGrid, e: &EnergyContext, n_max: usize, opts: DtnOptions) -> Result<DtNMatrix> {
    DtnSolver::new(v, e, opts)?.matrix(n_max)
}

/// I_n(x) by its power series.
pub fn bessel_i(n: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = (0..n).fold(1.0, |t, k| t * h / (k + 1) as f64);
    let mut s = term;
    for k in 1..500 {
        term *= h * h / (k as f64 * (k + n as usize) as f64);
        s += term;
        if term < 1e-17 * s {
            break;
        }
    }
    s
}

/// Φ(E) eigenvalue κI'_n(κ)/I_n(κ) for v ≡ 0.
pub fn free_dtn_eigenvalue(n: i64, energy: f64) -> f64 {
    let k = (-energy).sqrt();
    let n = n.unsigned_abs() as u32;
    // I'_n = I_{n+1} + (n/x) I_n
    k * bessel_i(n + 1, k) / bessel_i(n, k) + n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_types::{make_bump_potential_on, GridSpec};

    fn zero() -> PotentialGrid {
        PotentialGrid::zeros(GridSpec { n: 65, half_width: 1.25 })
    }

    #[test]
    fn bessel_values() {
        assert!((bessel_i(0, 1.0) - 1.2660658777520082).abs() < 1e-15);
        assert!((bessel_i(1, 1.0) - 0.5651591039924851).abs() < 1e-15);
        assert!((free_dtn_eigenvalue(0, -1.0) - 0.44639).abs() < 1e-5);
    }

    #[test]
    fn free_dtn_is_bessel_diagonal() {
        for e in [-1.0, -30.0] {
            let m = dtn_map(&zero(), &EnergyContext::new(e).unwrap(), 16).unwrap();
            for n in -16..=16i64 {
                let ex = free_dtn_eigenvalue(n, e);
                assert!((m.get(n, n).re - ex).abs() <= 1e-3 * ex.abs(), "{e} {n}");
                for np in -16..=16i64 {
                    if np != n {
                        assert!(m.get(n, np).norm() <= 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn free_interior_solution() {
        let e = EnergyContext::new(-30.0).unwrap();
        let k = e.kappa();
        for n in [0i64, 3, -7] {
            let u = solve_dirichlet(&zero(), &e, &BoundaryFunction::mode(8, n)).unwrap();
            let mut err: f64 = 0.0;
            for (ir, &r) in u.radii.iter().enumerate() {
                for it in 0..u.n_theta {
                    let t = 2.0 * PI * it as f64 / u.n_theta as f64;
                    let ex = Complex64::from_polar(bessel_i(n.unsigned_abs() as u32, k * r) / bessel_i(n.unsigned_abs() as u32, k), n as f64 * t);
                    err = err.max((u.at(ir, it) - ex).norm());
                }
            }
            assert!(err <= 1e-3, "{n}: {err}");
        }
        let u = solve_dirichlet(&zero(), &e, &BoundaryFunction::zeros(4)).unwrap();
        assert!(u.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn solvability_grows_with_energy() {
        let s1 = check_dirichlet_solvability(&zero(), &EnergyContext::new(-1.0).unwrap()).unwrap();
        let s30 = check_dirichlet_solvability(&zero(), &EnergyContext::new(-30.0).unwrap()).unwrap();
        // first Dirichlet eigenvalue of −Δ on the disk is j₀,₁²
        let j01 = 2.404825557695773f64;
        assert!((s1 - (j01 * j01 + 1.0)).abs() < 1e-6, "{s1}");
        assert!(s30 > s1);
    }

    #[test]
    fn bump_dtn_is_symmetric() {
        let g = GridSpec { n: 129, half_width: 1.25 };
        let v = make_bump_potential_on(g, [0.2, -0.1], 0.6, 1.0, 5).unwrap();
        let e = EnergyContext::new(-30.0).unwrap();
        let opts = DtnOptions { n_r: 24, n_theta: 64, ..Default::default() };
        let m = dtn_map_with(&v, &e, 8, opts).unwrap();
        assert!(m.condition_diag > 0.0);
        assert!(m.symmetry_defect() <= 1e-4, "{}", m.symmetry_defect());
    }

    #[test]
    fn radial_potential_gives_diagonal_matrix() {
        let g = GridSpec { n: 129, half_width: 1.25 };
        let v = make_bump_potential_on(g, [0.0, 0.0], 0.8, 2.0, 4).unwrap();
        let e = EnergyContext::new(-10.0).unwrap();
        let opts = DtnOptions { n_r: 16, n_theta: 32, ..Default::default() };
        let m = dtn_map_with(&v, &e, 6, opts).unwrap();
        let diag = (0..13).map(|i| m.entries[(i, i)].norm()).fold(0.0, f64::max);
        for i in 0..13 {
            for j in 0..13 {
                if i != j {
                    assert!(m.entries[(i, j)].norm() < 1e-3 * diag, "{i} {j}");
                }
            }
        }
    }

    #[test]
    fn operator_norm_closed_forms() {
        let mut d = DtNMatrix { n_max: 2, entries: DMatrix::zeros(5, 5), energy: -1.0, condition_diag: 1.0 };
        assert_eq!(dtn_operator_norm(&d), 0.0);
        d.entries[(4, 4)] = Complex64::new(0.0, 3.0);
        assert!((dtn_operator_norm(&d) - 3.0 / 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn csv_roundtrip_and_mismatch() {
        let mut d = DtNMatrix { n_max: 1, entries: DMatrix::zeros(3, 3), energy: -2.5, condition_diag: 1.0 };
        d.entries[(0, 2)] = Complex64::new(1.5, -0.25);
        d.entries[(1, 1)] = Complex64::new(-3.0, 0.0);
        let b = DtNMatrix::from_csv(&d.to_csv()).unwrap();
        assert_eq!(b.entries, d.entries);
        assert_eq!(b.energy, -2.5);
        let other = DtNMatrix { n_max: 2, entries: DMatrix::zeros(5, 5), energy: -2.5, condition_diag: 1.0 };
        assert!(d.sub(&other).is_err());
    }
}
