//! Rank, least-squares and null-space decisions. Matrices are nalgebra
//! `DMatrix`; the SVDs run in faer, which stays accurate on the wide,
//! rank-deficient derivative matrices where nalgebra's SVD loses digits.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold for rank and invertibility decisions.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
}

impl Spectrum {
    pub fn condition(&self) -> f64 {
        if self.sigma_min == 0.0 {
            f64::INFINITY
        } else {
            self.sigma_max / self.sigma_min
        }
    }

    /// Full column rank with the smallest singular value above
    /// `RANK_TOL * sigma_max`.
    pub fn full_rank(&self, cols: usize) -> bool {
        self.rank == cols && self.sigma_min > RANK_TOL * self.sigma_max
    }
}

pub fn spectrum(m: &DMatrix<f64>) -> Spectrum {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Spectrum { rank: 0, sigma_max: 0.0, sigma_min: 0.0 };
    }
    let sv = to_faer(m).singular_values().expect("SVD converges");
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let sigma_min = if m.nrows() >= m.ncols() { sv.iter().copied().fold(f64::INFINITY, f64::min) } else { 0.0 };
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * sigma_max).count();
    Spectrum { rank, sigma_max, sigma_min }
}

/// Least-squares solution through the SVD, discarding singular values below
/// the relative threshold.
pub fn least_squares(m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(m.ncols());
    }
    let svd = to_faer(m).thin_svd().expect("SVD converges");
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let smax = s.iter().copied().fold(0.0, f64::max);
    let mut x = DVector::zeros(m.ncols());
    for i in 0..s.nrows() {
        if s[i] <= RANK_TOL * smax {
            continue;
        }
        let proj: f64 = (0..m.nrows()).map(|r| u[(r, i)] * rhs[r]).sum::<f64>() / s[i];
        for c in 0..m.ncols() {
            x[c] += proj * v[(c, i)];
        }
    }
    x
}

/// Orthonormal basis of the null space (columns).
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let svd = to_faer(m).svd().expect("SVD converges");
    let (s, v) = (svd.S().column_vector(), svd.V());
    let smax = s.iter().copied().fold(0.0, f64::max);
    // singular values come sorted in decreasing order; V is cols × cols
    let rank = s.iter().filter(|&&x| x > RANK_TOL * smax.max(f64::MIN_POSITIVE)).count();
    DMatrix::from_fn(cols, cols - rank, |r, j| v[(r, rank + j)])
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::derivative_matrix;

    #[test]
    fn rank_and_null_space_of_small_matrix() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(spectrum(&m).rank, 1);
        let ns = null_space(&m);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-14);
        assert!((ns.transpose() * &ns - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn least_squares_on_wide_rank_deficient_matrix() {
        // nalgebra's SVD recomposes this one only to ~1e-5
        let m = derivative_matrix(3, 1, 2).unwrap();
        let x: DVector<f64> = DVector::from_fn(m.ncols(), |i, _| ((i * 7 % 11) as f64 - 5.0) / 5.0);
        let b = &m * &x;
        let y = least_squares(&m, &b);
        assert!((&m * y - &b).norm() < 1e-12);
    }

    #[test]
    fn empty_shapes() {
        let m = DMatrix::<f64>::zeros(0, 3);
        assert_eq!(null_space(&m).ncols(), 3);
        assert_eq!(least_squares(&m, &DVector::zeros(0)).len(), 3);
        assert_eq!(spectrum(&m).rank, 0);
    }
}
