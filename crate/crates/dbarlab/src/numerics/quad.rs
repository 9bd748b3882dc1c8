use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;
use std::sync::LazyLock;

/// Gauss–Legendre nodes and weights on [−1, 1].
#[derive(Debug, Clone)]
pub struct Rule {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl Rule {
    pub fn new(n: usize) -> Self {
        let q = GaussLegendre::new(NonZeroUsize::new(n).expect("positive order"));
        let (x, w) = q.iter().map(|(x, w)| (*x, *w)).unzip();
        Rule { x, w }
    }

    /// Nodes and weights mapped to [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        self.x.iter().zip(&self.w).map(move |(&x, &w)| (c + h * x, h * w))
    }
}

pub static GL12: LazyLock<Rule> = LazyLock::new(|| Rule::new(12));
pub static GL16: LazyLock<Rule> = LazyLock::new(|| Rule::new(16));

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let s: f64 = GL12.on(0.0, 2.0).map(|(x, w)| w * x.powi(23)).sum();
        assert!((s - 2f64.powi(24) / 24.0).abs() / s < 1e-13);
        let t: f64 = GL16.on(-1.0, 1.0).map(|(_, w)| w).sum();
        assert!((t - 2.0).abs() < 1e-14);
    }
}
