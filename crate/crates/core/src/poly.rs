//! Dense multivariate polynomials with per-variable degree bounds.

/// Coefficients of `Σ c_e x^e` over the grid `e_i ≤ degs[i]`, row-major with
/// axis 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    degs: Vec<usize>,
    coeffs: Vec<f64>,
}

fn grid_len(degs: &[usize]) -> usize {
    degs.iter().map(|d| d + 1).product()
}

impl Poly {
    pub fn zero(n: usize) -> Self {
        Self { degs: vec![0; n], coeffs: vec![0.0] }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self { degs: vec![0; n], coeffs: vec![c] }
    }

    pub fn from_grid(degs: Vec<usize>, coeffs: Vec<f64>) -> Self {
        assert_eq!(grid_len(&degs), coeffs.len(), "coefficient grid size");
        Self { degs, coeffs }
    }

    /// `∏_i u_i(x_i)` from univariate coefficient lists (lowest power first).
    pub fn tensor(factors: &[Vec<f64>]) -> Self {
        let degs: Vec<usize> = factors.iter().map(|f| f.len().saturating_sub(1)).collect();
        let mut coeffs = vec![1.0; grid_len(&degs)];
        for (flat, c) in coeffs.iter_mut().enumerate() {
            let e = unflatten(&degs, flat);
            for (f, &ei) in factors.iter().zip(&e) {
                *c *= f[ei];
            }
        }
        Self { degs, coeffs }
    }

    /// `∏_i x_i^{a_i} (1 - x_i)^{b_i}`.
    pub fn bernstein_product(exponents: &[(usize, usize)]) -> Self {
        let factors: Vec<Vec<f64>> = exponents.iter().map(|&(a, b)| univariate_power_product(a, b)).collect();
        Self::tensor(&factors)
    }

    pub fn nvars(&self) -> usize {
        self.degs.len()
    }

    pub fn degree_bounds(&self) -> &[usize] {
        &self.degs
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, e: &[usize]) -> f64 {
        if e.iter().zip(&self.degs).any(|(a, d)| a > d) {
            return 0.0;
        }
        self.coeffs[flatten(&self.degs, e)]
    }

    /// Iterator over `(exponent, coefficient)` pairs of the stored grid.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.coeffs.iter().enumerate().map(|(i, &c)| (unflatten(&self.degs, i), c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Highest power of each variable with a coefficient above `tol` in
    /// magnitude (relative to the largest coefficient).
    pub fn effective_degrees(&self, tol: f64) -> Vec<usize> {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut out = vec![0; self.nvars()];
        if scale == 0.0 {
            return out;
        }
        for (e, c) in self.terms() {
            if c.abs() > tol * scale {
                for (o, ei) in out.iter_mut().zip(e) {
                    *o = (*o).max(ei);
                }
            }
        }
        out
    }

    fn reshaped(&self, degs: &[usize]) -> Self {
        let mut coeffs = vec![0.0; grid_len(degs)];
        for (e, c) in self.terms() {
            coeffs[flatten(degs, &e)] += c;
        }
        Self { degs: degs.to_vec(), coeffs }
    }

    pub fn add_scaled(&mut self, other: &Poly, s: f64) {
        assert_eq!(self.nvars(), other.nvars());
        if self.degs.iter().zip(&other.degs).any(|(a, b)| b > a) {
            let degs: Vec<usize> = self.degs.iter().zip(&other.degs).map(|(a, b)| *a.max(b)).collect();
            *self = self.reshaped(&degs);
        }
        for (e, c) in other.terms() {
            let i = flatten(&self.degs, &e);
            self.coeffs[i] += s * c;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { degs: self.degs.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Self {
        assert_eq!(self.nvars(), other.nvars());
        let degs: Vec<usize> = self.degs.iter().zip(&other.degs).map(|(a, b)| a + b).collect();
        let mut coeffs = vec![0.0; grid_len(&degs)];
        for (ea, ca) in self.terms() {
            if ca == 0.0 {
                continue;
            }
            for (eb, cb) in other.terms() {
                let e: Vec<usize> = ea.iter().zip(&eb).map(|(a, b)| a + b).collect();
                coeffs[flatten(&degs, &e)] += ca * cb;
            }
        }
        Self { degs, coeffs }
    }

    pub fn derivative(&self, axis: usize) -> Self {
        let mut degs = self.degs.clone();
        if degs[axis] == 0 {
            return Self::zero(self.nvars());
        }
        degs[axis] -= 1;
        let mut coeffs = vec![0.0; grid_len(&degs)];
        for (e, c) in self.terms() {
            if e[axis] == 0 {
                continue;
            }
            let mut t = e.clone();
            t[axis] -= 1;
            coeffs[flatten(&degs, &t)] += c * e[axis] as f64;
        }
        Self { degs, coeffs }
    }

    /// Nested Horner evaluation, last axis innermost.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nvars());
        horner(&self.degs, &self.coeffs, x)
    }
}

fn horner(degs: &[usize], coeffs: &[f64], x: &[f64]) -> f64 {
    if degs.is_empty() {
        return coeffs[0];
    }
    let stride = coeffs.len() / (degs[0] + 1);
    let mut acc = 0.0;
    for e in (0..=degs[0]).rev() {
        let inner = horner(&degs[1..], &coeffs[e * stride..(e + 1) * stride], &x[1..]);
        acc = acc * x[0] + inner;
    }
    acc
}

pub(crate) fn flatten(degs: &[usize], e: &[usize]) -> usize {
    degs.iter().zip(e).fold(0, |acc, (d, ei)| acc * (d + 1) + ei)
}

pub(crate) fn unflatten(degs: &[usize], mut flat: usize) -> Vec<usize> {
    let mut e = vec![0; degs.len()];
    for i in (0..degs.len()).rev() {
        e[i] = flat % (degs[i] + 1);
        flat /= degs[i] + 1;
    }
    e
}

/// Coefficients of `x^a (1-x)^b` in the monomial basis.
pub fn univariate_power_product(a: usize, b: usize) -> Vec<f64> {
    let mut out = vec![0.0; a + b + 1];
    let mut binom = 1.0;
    for j in 0..=b {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        out[a + j] = sign * binom;
        binom = binom * (b - j) as f64 / (j + 1) as f64;
    }
    out
}

/// `x^a (1-x)^b` evaluated directly.
#[inline]
pub fn power_product(x: f64, a: usize, b: usize) -> f64 {
    x.powi(a as i32) * (1.0 - x).powi(b as i32)
}
