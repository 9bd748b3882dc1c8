use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Unnormalized 2D FFT on row-major `n1 × n2` arrays.
#[derive(Clone)]
pub struct Fft2 {
    pub n1: usize,
    pub n2: usize,
    rf: Arc<dyn Fft<f64>>,
    ri: Arc<dyn Fft<f64>>,
    cf: Arc<dyn Fft<f64>>,
    ci: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n1: usize, n2: usize) -> Self {
        let mut p = FftPlanner::new();
        Fft2 {
            n1,
            n2,
            rf: p.plan_fft_forward(n2),
            ri: p.plan_fft_inverse(n2),
            cf: p.plan_fft_forward(n1),
            ci: p.plan_fft_inverse(n1),
        }
    }

    fn run(&self, data: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.n1 * self.n2);
        row.process(data);
        let mut buf = vec![Complex64::default(); self.n1];
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                buf[i] = data[i * self.n2 + j];
            }
            col.process(&mut buf);
            for i in 0..self.n1 {
                data[i * self.n2 + j] = buf[i];
            }
        }
    }

    /// Σ f[m] e^{−2πi(j·m)/n}.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.rf, &self.cf);
    }

    /// Σ f[m] e^{+2πi(j·m)/n}, without the 1/(n1 n2) factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.ri, &self.ci);
    }
}

/// Signed integer frequency of FFT bin `j` for length `n`.
pub fn freq(j: usize, n: usize) -> i64 {
    if j < n.div_ceil(2) {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_single_mode() {
        let (n1, n2) = (6, 10);
        let f = Fft2::new(n1, n2);
        let mut d: Vec<Complex64> = (0..n1 * n2).map(|i| Complex64::new(i as f64 * 0.1, (i % 7) as f64)).collect();
        let orig = d.clone();
        f.forward(&mut d);
        f.inverse(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a / (n1 * n2) as f64 - b).norm() < 1e-12);
        }
        let mut e = vec![Complex64::default(); n1 * n2];
        e[0] = Complex64::new(1.0, 0.0);
        f.forward(&mut e);
        assert!(e.iter().all(|x| (x - 1.0).norm() < 1e-14));
    }

    #[test]
    fn signed_frequencies() {
        assert_eq!(freq(0, 8), 0);
        assert_eq!(freq(3, 8), 3);
        assert_eq!(freq(4, 8), -4);
        assert_eq!(freq(4, 7), -3);
    }
}
