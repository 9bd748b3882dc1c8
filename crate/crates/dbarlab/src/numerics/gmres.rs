use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Field scalar for [`gmres`]: `f64` for ℝ-linear problems, `Complex64` for ℂ-linear ones.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Default
{
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn from_real(x: f64) -> Self;
}

impl Scalar for f64 {
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn from_real(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex64 {
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Relative residual ‖b − Ax‖/‖b‖ after each inner step.
    pub history: Vec<f64>,
    pub converged: bool,
}

impl<T> GmresOutcome<T> {
    pub fn residual(&self) -> f64 {
        self.history.last().copied().unwrap_or(0.0)
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::default(), |s, (&x, &y)| s + x.conj() * y)
}

fn norm<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.modulus().powi(2)).sum::<f64>().sqrt()
}

/// Restarted GMRES(m) for `apply(x) = b`, starting from x = 0.
///
/// Stops once the relative residual drops below `tol`, or after `max_iter` inner steps.
pub fn gmres<T: Scalar, F>(mut apply: F, b: &[T], tol: f64, restart: usize, max_iter: usize) -> GmresOutcome<T>
where
    F: FnMut(&[T], &mut [T]),
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![T::default(); n];
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return GmresOutcome { x, iterations: 0, history: vec![0.0], converged: true };
    }
    let m = restart.max(1);
    let mut r = b.to_vec();
    let mut w = vec![T::default(); n];
    let mut total = 0;
    loop {
        let beta = norm(&r);
        if beta / bnorm <= tol {
            history.push(beta / bnorm);
            return GmresOutcome { x, iterations: total, history, converged: true };
        }
        let mut v: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|&ri| ri * T::from_real(1.0 / beta)).collect());
        let mut h = vec![vec![T::default(); m]; m + 1];
        let mut cs = vec![T::default(); m];
        let mut sn = vec![T::default(); m];
        let mut g = vec![T::default(); m + 1];
        g[0] = T::from_real(beta);
        let mut k_used = 0;
        let mut done = false;
        for k in 0..m {
            apply(&v[k], &mut w);
            for j in 0..=k {
                let hjk = dot(&v[j], &w);
                h[j][k] = hjk;
                for (wi, &vi) in w.iter_mut().zip(&v[j]) {
                    *wi = *wi - hjk * vi;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = T::from_real(hn);
            for j in 0..k {
                let t = cs[j].conj() * h[j][k] + sn[j].conj() * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let a = h[k][k];
            let bb = h[k + 1][k];
            let den = (a.modulus().powi(2) + bb.modulus().powi(2)).sqrt();
            if den == 0.0 {
                cs[k] = T::from_real(1.0);
                sn[k] = T::default();
            } else {
                cs[k] = a * T::from_real(1.0 / den);
                sn[k] = bb * T::from_real(1.0 / den);
            }
            h[k][k] = T::from_real(den);
            h[k + 1][k] = T::default();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            total += 1;
            k_used = k + 1;
            let rel = g[k + 1].modulus() / bnorm;
            history.push(rel);
            if rel <= tol || total >= max_iter || hn == 0.0 {
                done = true;
                break;
            }
            v.push(w.iter().map(|&wi| wi * T::from_real(1.0 / hn)).collect());
        }
        let mut y = vec![T::default(); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s = s - h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, &yj) in y.iter().enumerate() {
            for (xi, &vi) in x.iter_mut().zip(&v[j]) {
                *xi = *xi + yj * vi;
            }
        }
        apply(&x, &mut w);
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
        if done {
            let rel = norm(&r) / bnorm;
            if let Some(last) = history.last_mut() {
                *last = rel;
            }
            let converged = rel <= tol * 10.0;
            return GmresOutcome { x, iterations: total, history, converged };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_complex_system() {
        let a = [
            [Complex64::new(4.0, 1.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5)],
            [Complex64::new(1.0, -1.0), Complex64::new(3.0, 0.0), Complex64::new(1.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 2.0), Complex64::new(5.0, 0.0)],
        ];
        let xs = [Complex64::new(1.0, 2.0), Complex64::new(-1.0, 0.5), Complex64::new(0.3, -0.7)];
        let b: Vec<Complex64> = (0..3).map(|i| (0..3).map(|j| a[i][j] * xs[j]).sum()).collect();
        let out = gmres(
            |x, y| {
                for i in 0..3 {
                    y[i] = (0..3).map(|j| a[i][j] * x[j]).sum();
                }
            },
            &b,
            1e-13,
            10,
            50,
        );
        assert!(out.converged);
        for i in 0..3 {
            assert!((out.x[i] - xs[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn restarts_on_real_system() {
        let n = 40;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 3.0 * x[i] - l - 0.5 * r;
            }
        };
        let b = vec![1.0; n];
        let out = gmres(apply, &b, 1e-12, 5, 500);
        assert!(out.converged);
        let mut y = vec![0.0; n];
        apply(&out.x, &mut y);
        assert!(y.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}
