//! Gauss–Legendre rules and tensor grids used for expectations over the
//! consumption vector when no closed form is available.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A finite set of weighted points approximating a probability measure on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    /// Row-major, `len * dim`.
    pub points: Vec<f64>,
    /// Weights summing to one.
    pub weights: Vec<f64>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.weights
            .iter()
            .copied()
            .zip(self.points.chunks_exact(self.dim))
    }

    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(|(w, a)| w * f(a)).sum()
    }

    /// Tensorized Gauss–Legendre rule for the uniform law on `prod [lo_i, hi_i]`.
    pub fn tensor_uniform(lo: &[f64], hi: &[f64], nodes_per_dim: usize) -> Self {
        let dim = lo.len();
        let (x, w) = gauss_legendre(nodes_per_dim);
        let total = nodes_per_dim.pow(dim as u32);
        let mut points = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut weight = 1.0;
            for (i, &k) in idx.iter().enumerate() {
                let half = 0.5 * (hi[i] - lo[i]);
                points.push(lo[i] + half * (x[k] + 1.0));
                weight *= 0.5 * w[k];
            }
            weights.push(weight);
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < nodes_per_dim {
                    break;
                }
                *slot = 0;
            }
        }
        PointSet {
            dim,
            points,
            weights,
        }
    }

    /// Equal-weight sample from the uniform law on a box.
    pub fn monte_carlo_uniform(lo: &[f64], hi: &[f64], n: usize, seed: u64) -> Self {
        use rand::Rng;
        let dim = lo.len();
        let mut rng = crate::rng::rng_from_seed(seed);
        let mut points = Vec::with_capacity(n * dim);
        for _ in 0..n {
            for i in 0..dim {
                points.push(lo[i] + (hi[i] - lo[i]) * rng.random::<f64>());
            }
        }
        PointSet {
            dim,
            points,
            weights: vec![1.0 / n as f64; n],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(64);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        // int_{-1}^{1} x^10 = 2/11
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-13);
        let (x5, w5) = gauss_legendre(5);
        let s: f64 = x5.iter().zip(&w5).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn tensor_rule_is_a_probability_measure() {
        let q = PointSet::tensor_uniform(&[1.0, 1.0], &[2.0, 3.0], 8);
        assert_eq!(q.len(), 64);
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        let mean1 = q.expect(|a| a[1]);
        assert!((mean1 - 2.0).abs() < 1e-13);
        let prod = q.expect(|a| a[0] * a[1] * a[1]);
        // E[a0] E[a1^2] = 1.5 * (27 - 1) / 6
        assert!((prod - 1.5 * 26.0 / 6.0).abs() < 1e-12);
    }
}
