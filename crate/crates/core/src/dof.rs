//! Degrees of freedom: integrals of basis forms over small cubes.
//!
//! Entries are computed in closed form. On a small cube parallel to the basis
//! form's direction plane the lowest-order factor is constant, so the integral
//! reduces to an average of a product of `x^a (1-x)^b` factors, which splits
//! into pinned-axis point values and one-dimensional integrals
//! ([`integral_1d`]). Non-parallel pairs vanish.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::combinatorics::{binomial_u128, MultiIndex};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::forms::basis_exponents;
use crate::linalg::{self, Spectrum, RANK_TOL};
use crate::smallcubes::{direction_blocks, enumerate_small_cubes, SmallCube};

/// `∫₀¹ (z + x)^n (y + 1 - x)^m dx`, evaluated as the finite double sum
/// `Σ_i Σ_j C(m,i) C(n,j) y^(m-i) z^(n-j) i! j! / (i+j+1)!`.
pub fn integral_1d(m: usize, n: usize, y: f64, z: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..=m {
        let cmi = binomial_u128(m as u64, i as u64) as f64;
        let ypow = y.powi((m - i) as i32);
        for j in 0..=n {
            let cnj = binomial_u128(n as u64, j as u64) as f64;
            // i! j! / (i+j+1)! = 1 / ((i+j+1) C(i+j, i)), exact in integers
            let denom = (i + j + 1) as u128 * binomial_u128((i + j) as u64, i as u64);
            total += cmi * cnj * ypow * z.powi((n - j) as i32) / denom as f64;
        }
    }
    total
}

/// Average over `cube` of `∏ x_i^{a_i} (1 - x_i)^{b_i}` with arbitrary
/// per-axis exponents. Pinned axes contribute point values, free axes a
/// scaled [`integral_1d`].
pub fn average_of_product(exps: &[(usize, usize)], cube: &SmallCube) -> Result<f64> {
    if exps.len() != cube.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: cube.ambient_dim(), got: exps.len() });
    }
    let order = cube.order();
    let kf = order as f64;
    let anchor = cube.anchor_numerators();
    let mut value = 1.0;
    for (axis, (&(a, b), &num)) in exps.iter().zip(&anchor).enumerate() {
        let scale = kf.powi(-((a + b) as i32));
        if cube.face().is_free(axis) {
            value *= scale * integral_1d(b, a, (order - 1 - num) as f64, num as f64);
        } else {
            value *= scale * (num as f64).powi(a as i32) * ((order - num) as f64).powi(b as i32);
        }
    }
    Ok(value)
}

/// Average of `∏ x_i^{e_i} (1 - x_i)^{k - e_i}` over a small cube of any
/// order, with `e ∈ J(n, k)`.
pub fn average_over_small_cube(expo: &MultiIndex, k: usize, cube: &SmallCube) -> Result<f64> {
    if !expo.within(k) {
        return Err(Error::InvalidArgument(format!("exponent {expo} not in J(n, {k})")));
    }
    let exps: Vec<(usize, usize)> = expo.components().iter().map(|&e| (e, k - e)).collect();
    average_of_product(&exps, cube)
}

/// `∫_cube w(basis)` with the cube carrying its canonical orientation.
/// Zero unless both share a direction set; otherwise the average of the
/// folded basis coefficient times `(1/k)^p`. For `p = 0` this is point
/// evaluation.
pub fn dof_value(cube: &SmallCube, basis: &SmallCube) -> Result<f64> {
    if cube.ambient_dim() != basis.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: basis.ambient_dim(), got: cube.ambient_dim() });
    }
    if cube.degree() != basis.degree() {
        return Err(Error::InvalidArgument(format!(
            "degree mismatch: cube {} vs basis {}",
            cube.degree(),
            basis.degree()
        )));
    }
    if cube.order() != basis.order() {
        return Err(Error::InvalidArgument(format!(
            "order mismatch: cube {} vs basis {}",
            cube.order(),
            basis.order()
        )));
    }
    if cube.directions() != basis.directions() {
        return Ok(0.0);
    }
    Ok(average_of_product(&basis_exponents(basis), cube)? * cube.volume())
}

#[derive(Debug, Clone)]
pub struct DofBlock {
    pub directions: Vec<usize>,
    pub range: Range<usize>,
    pub matrix: DMatrix<f64>,
}

/// `A[i][j] = ∫_{υ_i} w_j` over canonical small-cube orderings, with the
/// per-direction-set diagonal blocks kept separately.
#[derive(Debug, Clone)]
pub struct DofMatrix {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub dense: DMatrix<f64>,
    pub blocks: Vec<DofBlock>,
}

impl DofMatrix {
    pub fn size(&self) -> usize {
        self.dense.nrows()
    }

    /// True iff every entry outside the direction blocks is exactly zero.
    pub fn is_block_diagonal(&self) -> bool {
        let size = self.size();
        let block_of = |i: usize| self.blocks.iter().position(|b| b.range.contains(&i));
        (0..size).all(|i| (0..size).all(|j| block_of(i) == block_of(j) || self.dense[(i, j)] == 0.0))
    }

    /// `row,col,value` lines for every nonzero entry, row-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for i in 0..self.size() {
            for j in 0..self.size() {
                let v = self.dense[(i, j)];
                if v != 0.0 {
                    out.push_str(&format!("{i},{j},{v:e}\n"));
                }
            }
        }
        out
    }
}

pub fn assemble_dof_matrix(n: usize, p: usize, k: usize) -> Result<DofMatrix> {
    assemble_dof_matrix_with(n, p, k, Execution::default())
}

pub fn assemble_dof_matrix_with(n: usize, p: usize, k: usize, mode: Execution) -> Result<DofMatrix> {
    let cubes = enumerate_small_cubes(n, p, k)?;
    let size = cubes.len();
    let rows: Vec<Vec<f64>> =
        exec::map_indexed(mode, size, |i| cubes.iter().map(|b| dof_value(&cubes[i], b).expect("same shape")).collect());
    let dense = DMatrix::from_fn(size, size, |i, j| rows[i][j]);
    let blocks = direction_blocks(n, p, k)
        .into_iter()
        .map(|(directions, range)| {
            let len = range.len();
            let matrix = dense.view((range.start, range.start), (len, len)).into_owned();
            DofBlock { directions, range, matrix }
        })
        .collect();
    Ok(DofMatrix { n, p, k, dense, blocks })
}

#[derive(Debug, Clone)]
pub struct BlockCondition {
    pub directions: Vec<usize>,
    pub spectrum: Spectrum,
}

#[derive(Debug, Clone)]
pub struct UnisolvenceReport {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub size: usize,
    pub invertible: bool,
    pub block_diagonal: bool,
    pub condition_estimate: f64,
    pub blocks: Vec<BlockCondition>,
}

pub fn check_unisolvence(n: usize, p: usize, k: usize) -> Result<UnisolvenceReport> {
    let a = assemble_dof_matrix(n, p, k)?;
    let full = linalg::spectrum(&a.dense);
    let blocks = a
        .blocks
        .iter()
        .map(|b| BlockCondition { directions: b.directions.clone(), spectrum: linalg::spectrum(&b.matrix) })
        .collect();
    Ok(UnisolvenceReport {
        n,
        p,
        k,
        size: a.size(),
        invertible: full.full_rank(a.size()),
        block_diagonal: a.is_block_diagonal(),
        condition_estimate: full.condition(),
        blocks,
    })
}

/// Factored reference DOF matrix, solved one direction block at a time.
#[derive(Debug, Clone)]
pub struct ReferenceSolver {
    matrix: DofMatrix,
    factors: Vec<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl ReferenceSolver {
    pub fn new(n: usize, p: usize, k: usize) -> Result<Self> {
        let matrix = assemble_dof_matrix(n, p, k)?;
        let mut factors = Vec::with_capacity(matrix.blocks.len());
        for b in &matrix.blocks {
            let s = linalg::spectrum(&b.matrix);
            if !s.full_rank(b.matrix.ncols()) {
                return Err(Error::SingularBlock {
                    directions: b.directions.clone(),
                    ratio: s.sigma_min / s.sigma_max,
                });
            }
            factors.push(b.matrix.clone().lu());
        }
        Ok(Self { matrix, factors })
    }

    pub fn matrix(&self) -> &DofMatrix {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.size()
    }

    /// Solves `A c = values`; the residual is checked against
    /// `1e-10·‖values‖` per block.
    pub fn solve(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.size() {
            return Err(Error::DimensionMismatch { expected: self.size(), got: values.len() });
        }
        let mut out = vec![0.0; values.len()];
        for (b, lu) in self.matrix.blocks.iter().zip(&self.factors) {
            let rhs = DVector::from_column_slice(&values[b.range.clone()]);
            let c =
                lu.solve(&rhs).ok_or_else(|| Error::SingularBlock { directions: b.directions.clone(), ratio: 0.0 })?;
            let residual = (&b.matrix * &c - &rhs).norm();
            if residual > RANK_TOL * rhs.norm().max(1.0) {
                return Err(Error::SingularBlock { directions: b.directions.clone(), ratio: residual });
            }
            out[b.range.clone()].copy_from_slice(c.as_slice());
        }
        Ok(out)
    }
}

/// One-shot version of [`ReferenceSolver::solve`].
pub fn solve_reference_coefficients(values: &[f64], n: usize, p: usize, k: usize) -> Result<Vec<f64>> {
    ReferenceSolver::new(n, p, k)?.solve(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::FaceId;
    use crate::forms::eval_basis_coefficient;
    use crate::quadrature::GaussLegendre;
    use approx::assert_relative_eq;

    #[test]
    fn integral_1d_examples() {
        assert_eq!(integral_1d(0, 0, 3.0, -2.0), 1.0);
        assert_relative_eq!(integral_1d(0, 1, 0.0, 0.0), 0.5);
        // ∫ (2+x)(2-x) dx over [0,1]
        let g = GaussLegendre::new(4);
        let oracle = g.integrate(|x| (2.0 + x) * (2.0 - x));
        assert_relative_eq!(oracle, 11.0 / 3.0, epsilon = 1e-13);
        assert_relative_eq!(integral_1d(1, 1, 1.0, 2.0), 11.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn constant_average_is_one() {
        for sc in enumerate_small_cubes(3, 2, 3).unwrap() {
            assert_relative_eq!(average_over_small_cube(&MultiIndex::zeros(3), 0, &sc).unwrap(), 1.0);
        }
    }

    #[test]
    fn point_evaluation_branch() {
        let sc = SmallCube::new(1, MultiIndex::zeros(1), FaceId::new(1, vec![], &[1]).unwrap()).unwrap();
        assert_relative_eq!(average_over_small_cube(&MultiIndex::new(vec![1]), 1, &sc).unwrap(), 1.0);
    }

    #[test]
    fn average_rejects_out_of_range_exponent() {
        let sc = SmallCube::new(1, MultiIndex::zeros(2), FaceId::whole(2)).unwrap();
        assert!(average_over_small_cube(&MultiIndex::new(vec![3, 0]), 2, &sc).is_err());
    }

    #[test]
    fn average_matches_quadrature_on_small_square() {
        // k = 2, e = (1,1): x(1-x) y(1-y) over [0,1/2]^2
        let sc = SmallCube::new(2, MultiIndex::zeros(2), FaceId::whole(2)).unwrap();
        let g = GaussLegendre::new(4);
        let oracle: f64 = g
            .tensor(2)
            .iter()
            .map(|(t, w)| {
                let x = sc.point_at(t);
                w * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])
            })
            .sum();
        let got = average_over_small_cube(&MultiIndex::new(vec![1, 1]), 2, &sc).unwrap();
        assert_relative_eq!(got, oracle, epsilon = 1e-14);
    }

    #[test]
    fn dof_examples() {
        let edge = enumerate_small_cubes(1, 1, 1).unwrap();
        assert_relative_eq!(dof_value(&edge[0], &edge[0]).unwrap(), 1.0);

        // (1 - x2) dx1 over the edge x2 = 1
        let edges = enumerate_small_cubes(2, 1, 1).unwrap();
        let bottom = edges.iter().find(|e| e.directions() == [0] && e.anchor_numerators() == [0, 0]).unwrap();
        let top = edges.iter().find(|e| e.directions() == [0] && e.anchor_numerators() == [0, 1]).unwrap();
        assert_eq!(dof_value(top, bottom).unwrap(), 0.0);

        let halves = enumerate_small_cubes(1, 1, 2).unwrap();
        assert_relative_eq!(dof_value(&halves[0], &halves[0]).unwrap(), 3.0 / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn dof_matches_product_of_average_and_pairing() {
        // average of the prefactor alone times the lowest-order form paired
        // with the p-vector of the cube
        for p in 0..=3 {
            for k in 1..=3 {
                let cubes = enumerate_small_cubes(3, p, k).unwrap();
                for cube in &cubes {
                    for basis in cubes.iter().filter(|b| b.directions() == cube.directions()) {
                        let pre: Vec<(usize, usize)> =
                            basis.multi_index().components().iter().map(|&m| (m, k - 1 - m)).collect();
                        let avg = average_of_product(&pre, cube).unwrap();
                        let x = cube.anchor();
                        let low: f64 =
                            basis.face().fixed().iter().map(|&(a, y)| if y == 1 { x[a] } else { 1.0 - x[a] }).product();
                        let pairing = low * cube.volume();
                        assert_relative_eq!(dof_value(cube, basis).unwrap(), avg * pairing, epsilon = 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn dof_matches_quadrature_of_basis() {
        let g = GaussLegendre::new(4);
        for p in 0..=2 {
            for k in 1..=3 {
                let cubes = enumerate_small_cubes(2, p, k).unwrap();
                for cube in &cubes {
                    for basis in cubes.iter().filter(|b| b.directions() == cube.directions()) {
                        let exps = basis_exponents(basis);
                        let q: f64 = g
                            .tensor(p)
                            .iter()
                            .map(|(t, w)| w * eval_basis_coefficient(&exps, &cube.point_at(t)))
                            .sum::<f64>()
                            * cube.volume();
                        assert_relative_eq!(dof_value(cube, basis).unwrap(), q, epsilon = 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let a = &enumerate_small_cubes(2, 1, 2).unwrap()[0];
        let b = &enumerate_small_cubes(2, 1, 3).unwrap()[0];
        let c = &enumerate_small_cubes(2, 0, 2).unwrap()[0];
        assert!(dof_value(a, b).is_err());
        assert!(dof_value(a, c).is_err());
    }

    #[test]
    fn small_matrices() {
        let a = assemble_dof_matrix(1, 0, 1).unwrap();
        assert_eq!(a.dense, DMatrix::identity(2, 2));
        let a = assemble_dof_matrix(1, 1, 1).unwrap();
        assert_eq!(a.dense, DMatrix::from_element(1, 1, 1.0));
        let a = assemble_dof_matrix(2, 1, 2).unwrap();
        assert_eq!(a.size(), 12);
        assert_eq!(a.blocks.len(), 2);
        assert!(a.blocks.iter().all(|b| b.range.len() == 6));
        assert!(a.is_block_diagonal());
    }

    #[test]
    fn unisolvence_examples() {
        let r = check_unisolvence(1, 0, 1).unwrap();
        assert!(r.invertible);
        assert_relative_eq!(r.condition_estimate, 1.0, epsilon = 1e-12);
        assert!(check_unisolvence(2, 1, 2).unwrap().invertible);
        let r = check_unisolvence(3, 2, 3).unwrap();
        assert!(r.invertible && r.block_diagonal);
        assert_eq!(r.blocks.len(), 3);
    }

    #[test]
    fn reference_solves() {
        let solver = ReferenceSolver::new(2, 1, 2).unwrap();
        let a = &solver.matrix().dense;
        for j in [0, 5, 6, 11] {
            let mut e = vec![0.0; 12];
            e[j] = 1.0;
            let vals: Vec<f64> = (a * DVector::from_vec(e.clone())).iter().copied().collect();
            let c = solver.solve(&vals).unwrap();
            for (ci, ei) in c.iter().zip(&e) {
                assert_relative_eq!(ci, ei, epsilon = 1e-12);
            }
        }
        assert_eq!(solver.solve(&[0.0; 12]).unwrap(), vec![0.0; 12]);
        assert!(solver.solve(&[0.0; 3]).is_err());
    }
}
