//! Cubical p-forms on the unit n-cube.
//!
//! A [`PolyForm`] is `Σ_I f_I dx_I` with `I` an increasing direction list and
//! each `f_I` a dense [`Poly`]. Basis forms are built from the product
//! factors `x^a (1-x)^b` and stored expanded into monomials.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::combinatorics::{combinations, sort_sign, FaceId};
use crate::error::{Error, Result};
use crate::linalg;
use crate::poly::{power_product, Poly};
use crate::smallcubes::{enumerate_small_cubes, SmallCube};

/// Relative coefficient threshold used when reading off polynomial degrees.
const DEGREE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyForm {
    n: usize,
    p: usize,
    terms: BTreeMap<Vec<usize>, Poly>,
}

/// Component values of a form at a point, ordered like `combinations(n, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub components: Vec<f64>,
    pub inside_unit_cube: bool,
}

impl PolyForm {
    /// The zero p-form (no terms).
    pub fn zero(n: usize, p: usize) -> Self {
        Self { n, p, terms: BTreeMap::new() }
    }

    /// A single term `f dx_I`. The direction list must be increasing.
    pub fn monomial_term(n: usize, directions: Vec<usize>, coeff: Poly) -> Result<Self> {
        if directions.windows(2).any(|w| w[0] >= w[1]) || directions.iter().any(|&d| d >= n) {
            return Err(Error::InvalidArgument(format!("bad direction list {directions:?}")));
        }
        if coeff.nvars() != n {
            return Err(Error::DimensionMismatch { expected: n, got: coeff.nvars() });
        }
        let p = directions.len();
        let mut terms = BTreeMap::new();
        terms.insert(directions, coeff);
        Ok(Self { n, p, terms })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, Poly> {
        &self.terms
    }

    pub fn term(&self, directions: &[usize]) -> Option<&Poly> {
        self.terms.get(directions)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(Poly::is_zero)
    }

    pub fn add_scaled(&mut self, other: &PolyForm, s: f64) {
        assert_eq!((self.n, self.p), (other.n, other.p), "form shape mismatch");
        for (dirs, f) in &other.terms {
            self.terms.entry(dirs.clone()).and_modify(|g| g.add_scaled(f, s)).or_insert_with(|| f.scaled(s));
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let components =
            combinations(self.n, self.p).iter().map(|dirs| self.terms.get(dirs).map_or(0.0, |f| f.eval(x))).collect();
        let inside_unit_cube = x.iter().all(|&xi| (0.0..=1.0).contains(&xi));
        Ok(Evaluation { components, inside_unit_cube })
    }

    /// `d(f dx_I) = Σ_i ∂_i f dx_i ∧ dx_I`, with wedges re-sorted. For
    /// `p = n` this is the empty (n+1)-form.
    pub fn exterior_derivative(&self) -> PolyForm {
        let mut out = PolyForm::zero(self.n, self.p + 1);
        if self.p >= self.n {
            return out;
        }
        for (dirs, f) in &self.terms {
            for axis in 0..self.n {
                if dirs.contains(&axis) {
                    continue;
                }
                let df = f.derivative(axis);
                if df.is_zero() {
                    continue;
                }
                let mut wedge = vec![axis];
                wedge.extend_from_slice(dirs);
                let (sign, sorted) = sort_sign(&wedge).expect("distinct axes");
                out.terms
                    .entry(sorted)
                    .and_modify(|g| g.add_scaled(&df, sign as f64))
                    .or_insert_with(|| df.scaled(sign as f64));
            }
        }
        out
    }

    /// Checks the `Q_k^- Λ^p` degree pattern: every coefficient has degree at
    /// most `k` in each variable and at most `k - 1` in its own directions.
    pub fn check_trimmed(&self, k: usize) -> Result<()> {
        for (dirs, f) in &self.terms {
            let degs = f.effective_degrees(DEGREE_TOL);
            if f.is_zero() {
                continue;
            }
            for (axis, &d) in degs.iter().enumerate() {
                let cap = if dirs.contains(&axis) { k.checked_sub(1) } else { Some(k) };
                if cap.is_none_or(|c| d > c) {
                    return Err(Error::DegreePattern {
                        order: k,
                        detail: format!("term {dirs:?} has degree {d} in x{axis}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Coordinates in the monomial basis of `Q_k^- Λ^p` (see
    /// [`trimmed_monomials`]). Fails if the degree pattern is violated.
    pub fn trimmed_coordinates(&self, k: usize) -> Result<Vec<f64>> {
        self.check_trimmed(k)?;
        Ok(trimmed_monomials(self.n, self.p, k)
            .iter()
            .map(|(dirs, e)| self.terms.get(dirs).map_or(0.0, |f| f.coeff(e)))
            .collect())
    }
}

/// The monomials `x^e dx_I` spanning `Q_k^- Λ^p(□^n)`, ordered by `I` then
/// by exponent.
pub fn trimmed_monomials(n: usize, p: usize, k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    for dirs in combinations(n, p) {
        let caps: Vec<usize> = (0..n).map(|a| if dirs.contains(&a) { k - 1 } else { k }).collect();
        let total: usize = caps.iter().map(|c| c + 1).product();
        for flat in 0..total {
            out.push((dirs.clone(), crate::poly::unflatten(&caps, flat)));
        }
    }
    out
}

/// `(∏_{pinned j} x_j^{y_j} (1-x_j)^{1-y_j}) dx_{i_1} ∧ … ∧ dx_{i_p}`.
pub fn lowest_order_form(face: &FaceId) -> PolyForm {
    let n = face.ambient_dim();
    let exps: Vec<(usize, usize)> = (0..n)
        .map(|axis| match face.fixed_value(axis) {
            Some(y) => (y as usize, 1 - y as usize),
            None => (0, 0),
        })
        .collect();
    PolyForm::monomial_term(n, face.directions().to_vec(), Poly::bernstein_product(&exps))
        .expect("face directions are valid")
}

/// Per-axis `(a, b)` of the basis coefficient `∏ x_i^{a_i} (1-x_i)^{b_i}`.
///
/// This folds the lowest-order factor into the prefactor: `a_i` is the anchor
/// numerator, `a_i + b_i` is `k - 1` on free axes and `k` on pinned ones.
pub fn basis_exponents(sc: &SmallCube) -> Vec<(usize, usize)> {
    let k = sc.order();
    sc.anchor_numerators()
        .into_iter()
        .enumerate()
        .map(|(axis, a)| if sc.face().is_free(axis) { (a, k - 1 - a) } else { (a, k - a) })
        .collect()
}

/// The kth order basis form `(∏ x_i^{m_i} (1-x_i)^{k-1-m_i}) Wτ` of a small cube.
pub fn basis_form(sc: &SmallCube) -> PolyForm {
    let k = sc.order();
    let prefactor: Vec<(usize, usize)> = sc.multi_index().components().iter().map(|&m| (m, k - 1 - m)).collect();
    let low = lowest_order_form(sc.face());
    let coeff = Poly::bernstein_product(&prefactor).mul(low.term(sc.directions()).expect("single term"));
    PolyForm::monomial_term(sc.ambient_dim(), sc.directions().to_vec(), coeff).expect("valid face")
}

/// Evaluates a basis coefficient straight from its product factors.
pub fn eval_basis_coefficient(exps: &[(usize, usize)], x: &[f64]) -> f64 {
    exps.iter().zip(x).map(|(&(a, b), &xi)| power_product(xi, a, b)).product()
}

/// All kth order basis p-forms in canonical small-cube order.
pub fn basis_forms(n: usize, p: usize, k: usize) -> Result<Vec<PolyForm>> {
    Ok(enumerate_small_cubes(n, p, k)?.iter().map(basis_form).collect())
}

/// Columns: trimmed-monomial coordinates of each basis form.
pub fn basis_expansion_matrix(n: usize, p: usize, k: usize) -> Result<DMatrix<f64>> {
    let forms = basis_forms(n, p, k)?;
    let rows = trimmed_monomials(n, p, k).len();
    let mut m = DMatrix::zeros(rows, forms.len());
    for (j, f) in forms.iter().enumerate() {
        let col = f.trimmed_coordinates(k)?;
        m.set_column(j, &DVector::from_vec(col));
    }
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct Membership {
    pub member: bool,
    pub residual: f64,
    /// Least-squares coefficients over the basis forms.
    pub coefficients: Vec<f64>,
}

/// Membership tolerance on the least-squares residual, relative to
/// `max(1, ‖f‖)`.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Decides whether `f` lies in the span of the kth order basis forms by a
/// least-squares solve in the monomial basis.
pub fn span_membership(f: &PolyForm, k: usize) -> Result<Membership> {
    let rhs = DVector::from_vec(f.trimmed_coordinates(k)?);
    let m = basis_expansion_matrix(f.dim(), f.degree(), k)?;
    let c = linalg::least_squares(&m, &rhs);
    let residual = (&m * &c - &rhs).norm();
    let member = residual <= MEMBERSHIP_TOL * rhs.norm().max(1.0);
    Ok(Membership { member, residual, coefficients: c.iter().copied().collect() })
}

/// Matrix of `d: Q_k^- Λ^p → Q_k^- Λ^{p+1}` in trimmed-monomial coordinates.
pub fn derivative_matrix(n: usize, p: usize, k: usize) -> Result<DMatrix<f64>> {
    let src = trimmed_monomials(n, p, k);
    let dst_len = trimmed_monomials(n, p + 1, k).len();
    let mut m = DMatrix::zeros(dst_len, src.len());
    for (j, (dirs, e)) in src.iter().enumerate() {
        let caps: Vec<usize> = e.clone();
        let total: usize = caps.iter().map(|c| c + 1).product();
        let mut coeffs = vec![0.0; total];
        coeffs[total - 1] = 1.0;
        let form = PolyForm::monomial_term(n, dirs.clone(), Poly::from_grid(caps, coeffs))?;
        let col = form.exterior_derivative().trimmed_coordinates(k)?;
        m.set_column(j, &DVector::from_vec(col));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::MultiIndex;
    use approx::assert_relative_eq;

    fn face(n: usize, dirs: Vec<usize>, vals: &[u8]) -> FaceId {
        FaceId::new(n, dirs, vals).unwrap()
    }

    #[test]
    fn lowest_order_examples() {
        let v = lowest_order_form(&face(1, vec![], &[1]));
        assert_relative_eq!(v.evaluate(&[0.3]).unwrap().components[0], 0.3);

        let e = lowest_order_form(&face(2, vec![0], &[0]));
        let val = e.evaluate(&[0.2, 0.7]).unwrap().components;
        // (1 - x2) dx1, components ordered (dx1, dx2)
        assert_relative_eq!(val[0], 0.3, epsilon = 1e-15);
        assert_eq!(val[1], 0.0);

        let top = lowest_order_form(&FaceId::whole(3));
        assert_eq!(top.evaluate(&[0.1, 0.2, 0.3]).unwrap().components, vec![1.0]);
    }

    #[test]
    fn basis_form_examples() {
        let sc = SmallCube::new(2, MultiIndex::new(vec![1]), face(1, vec![], &[0])).unwrap();
        let f = basis_form(&sc);
        assert_eq!(f.term(&[]).unwrap().coeffs(), &[0.0, 1.0, -1.0]);

        let sc = SmallCube::new(2, MultiIndex::new(vec![0]), FaceId::whole(1)).unwrap();
        assert_eq!(basis_form(&sc).term(&[0]).unwrap().coeffs(), &[1.0, -1.0]);

        // x1 (1 - x2)^2 dx1: grid over (deg x1 = 1, deg x2 = 2)
        let sc = SmallCube::new(2, MultiIndex::new(vec![1, 0]), face(2, vec![0], &[0])).unwrap();
        let f = basis_form(&sc);
        let g = f.term(&[0]).unwrap();
        let symbolic = Poly::from_grid(vec![1, 2], vec![0.0, 0.0, 0.0, 1.0, -2.0, 1.0]);
        assert_eq!(g.degree_bounds(), &[1, 2]);
        for (e, c) in symbolic.terms() {
            assert_relative_eq!(g.coeff(&e), c);
        }
        let val = f.evaluate(&[0.5, 0.5]).unwrap().components;
        assert_relative_eq!(val[0], 0.125);
    }

    #[test]
    fn order_one_basis_is_lowest_order() {
        for n in 1..=3 {
            for p in 0..=n {
                for sc in enumerate_small_cubes(n, p, 1).unwrap() {
                    assert_eq!(basis_form(&sc), lowest_order_form(sc.face()));
                }
            }
        }
    }

    #[test]
    fn folded_exponents_match_literal_construction() {
        let x = [0.17, 0.61, 0.83];
        for p in 0..=3 {
            for k in 1..=3 {
                for sc in enumerate_small_cubes(3, p, k).unwrap() {
                    let f = basis_form(&sc);
                    let direct = eval_basis_coefficient(&basis_exponents(&sc), &x);
                    assert_relative_eq!(f.term(sc.directions()).unwrap().eval(&x), direct, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn basis_forms_have_trimmed_pattern() {
        for n in 1..=3 {
            for p in 0..=n {
                for k in 1..=3 {
                    for f in basis_forms(n, p, k).unwrap() {
                        f.check_trimmed(k).unwrap();
                    }
                }
            }
        }
    }

    #[test]
    fn derivative_of_x_is_dx() {
        let x = PolyForm::monomial_term(1, vec![], Poly::from_grid(vec![1], vec![0.0, 1.0])).unwrap();
        let dx = x.exterior_derivative();
        assert_eq!(dx.degree(), 1);
        assert_eq!(dx.term(&[0]).unwrap().eval(&[0.4]), 1.0);
    }

    #[test]
    fn derivative_sign_from_reordering() {
        // d(x1 (1-x2)^2 dx1) = -2 x1 (1-x2) dx2^dx1 = 2 x1 (1-x2) dx1^dx2
        let f = PolyForm::monomial_term(2, vec![0], Poly::bernstein_product(&[(1, 0), (0, 2)])).unwrap();
        let df = f.exterior_derivative();
        for x in [[0.2, 0.3], [0.9, 0.1]] {
            assert_relative_eq!(df.term(&[0, 1]).unwrap().eval(&x), 2.0 * x[0] * (1.0 - x[1]), epsilon = 1e-14);
        }
    }

    #[test]
    fn top_degree_derivative_is_empty() {
        let f = basis_form(&enumerate_small_cubes(2, 2, 2).unwrap()[0]);
        let df = f.exterior_derivative();
        assert_eq!(df.degree(), 3);
        assert!(df.terms().is_empty());
    }

    #[test]
    fn evaluate_rejects_wrong_dimension() {
        let f = lowest_order_form(&FaceId::whole(2));
        assert!(matches!(f.evaluate(&[0.1]), Err(Error::DimensionMismatch { .. })));
        assert!(!f.evaluate(&[1.5, 0.0]).unwrap().inside_unit_cube);
    }

    #[test]
    fn binomial_reexpansion_member() {
        for k in 1..=4 {
            let mut grid = vec![0.0; k + 1];
            grid[k] = 1.0;
            let f = PolyForm::monomial_term(2, vec![1], Poly::from_grid(vec![k, 0], grid)).unwrap();
            let m = span_membership(&f, k).unwrap();
            assert!(m.member, "k={k} residual={}", m.residual);
        }
    }

    #[test]
    fn own_direction_degree_rejected() {
        let k = 2;
        let f = PolyForm::monomial_term(2, vec![0], Poly::from_grid(vec![k, 0], vec![0.0, 0.0, 1.0])).unwrap();
        assert!(matches!(span_membership(&f, k), Err(Error::DegreePattern { .. })));
    }

    #[test]
    fn expansion_matrix_has_full_column_rank() {
        for n in 1..=3 {
            for p in 0..=n {
                for k in 1..=3 {
                    let m = basis_expansion_matrix(n, p, k).unwrap();
                    assert_eq!(m.nrows(), m.ncols());
                    assert!(linalg::spectrum(&m).full_rank(m.ncols()), "n={n} p={p} k={k}");
                }
            }
        }
    }
}
