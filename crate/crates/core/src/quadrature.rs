//! Gauss–Legendre rules on `[0,1]` and their tensor products.

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `points`-point rule on `[0,1]`, exact for polynomials of degree
    /// `2·points - 1`.
    pub fn new(points: usize) -> Self {
        assert!(points >= 1, "quadrature needs at least one point");
        let mut nodes = vec![0.0; points];
        let mut weights = vec![0.0; points];
        let nf = points as f64;
        for i in 0..points.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(points, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(points, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = 0.5 * (1.0 - z);
            nodes[points - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = 0.5 * w;
            weights[points - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Tensor rule on `[0,1]^dim` as `(point, weight)` pairs. `dim = 0` is
    /// the single empty point with weight one.
    pub fn tensor(&self, dim: usize) -> Vec<(Vec<f64>, f64)> {
        let q = self.len();
        let total = q.pow(dim as u32);
        (0..total)
            .map(|mut flat| {
                let mut pt = vec![0.0; dim];
                let mut w = 1.0;
                for j in (0..dim).rev() {
                    let i = flat % q;
                    flat /= q;
                    pt[j] = self.nodes[i];
                    w *= self.weights[i];
                }
                (pt, w)
            })
            .collect()
    }
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}
