//! The de Rham map `C_k`, the interpolation operator `W` and the cochain
//! coboundary on a refined mesh.
//!
//! `W` works cell by cell. Integration is invariant under pullback, so the
//! DOFs of a pulled-back basis form over a physical small cube equal the
//! reference DOFs; cochain values only need their orientation sign corrected
//! before the reference solve.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::combinatorics::{binomial, combination_rank};
use crate::dof::ReferenceSolver;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::forms::{basis_exponents, basis_form, PolyForm};
use crate::mesh::RefinedMesh;
use crate::quadrature::GaussLegendre;

/// A p-form on the physical domain, evaluated to its components over
/// `combinations(n, p)`.
pub trait PhysicalForm: Sync {
    fn dim(&self) -> usize;
    fn degree(&self) -> usize;
    fn eval(&self, y: &[f64]) -> Vec<f64>;

    /// Evaluation at `y` known to lie in the closed cell `cell`. Piecewise
    /// forms override this to skip point location.
    fn eval_in_cell(&self, _cell: usize, y: &[f64]) -> Vec<f64> {
        self.eval(y)
    }
}

/// A physical form given by a closure.
pub struct FnForm<F> {
    n: usize,
    p: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> FnForm<F> {
    pub fn new(n: usize, p: usize, f: F) -> Self {
        Self { n, p, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> PhysicalForm for FnForm<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn degree(&self) -> usize {
        self.p
    }
    fn eval(&self, y: &[f64]) -> Vec<f64> {
        (self.f)(y)
    }
}

/// Real values on the global small p-cubes of a refinement, relative to the
/// canonical global orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    degree: usize,
    values: Vec<f64>,
}

impl Cochain {
    pub fn new(refined: &RefinedMesh, degree: usize, values: Vec<f64>) -> Result<Self> {
        if degree > refined.dim() {
            return Err(Error::InvalidArgument(format!("degree {degree} exceeds dimension {}", refined.dim())));
        }
        if values.len() != refined.count(degree) {
            return Err(Error::DimensionMismatch { expected: refined.count(degree), got: values.len() });
        }
        Ok(Self { degree, values })
    }

    pub fn zeros(refined: &RefinedMesh, degree: usize) -> Self {
        Self { degree, values: vec![0.0; refined.count(degree)] }
    }

    /// Uniform values in `[-1, 1]` from a seeded generator.
    pub fn random(refined: &RefinedMesh, degree: usize, rng: &mut impl Rng) -> Self {
        Self { degree, values: (0..refined.count(degree)).map(|_| rng.random_range(-1.0..=1.0)).collect() }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max_abs_diff(&self, other: &Cochain) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `id,value` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v:e}\n"));
        }
        out
    }

    /// Parses `id,value` lines. Ids must cover `0..count` exactly once; the
    /// header line is optional.
    pub fn from_csv(refined: &RefinedMesh, degree: usize, text: &str) -> Result<Self> {
        let count = refined.count(degree);
        let mut values = vec![None; count];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            let location = format!("line {}", lineno + 1);
            if line.is_empty() || (lineno == 0 && line.starts_with("id")) {
                continue;
            }
            let mut fields = line.split(',');
            let (Some(id), Some(val), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse { location, message: "expected `id,value`".into() });
            };
            let id: usize = id
                .trim()
                .parse()
                .map_err(|e| Error::Parse { location: location.clone(), message: format!("bad id: {e}") })?;
            let val: f64 = val
                .trim()
                .parse()
                .map_err(|e| Error::Parse { location: location.clone(), message: format!("bad value: {e}") })?;
            let slot = values.get_mut(id).ok_or_else(|| Error::Parse {
                location: location.clone(),
                message: format!("id {id} out of range (expected < {count})"),
            })?;
            if slot.replace(val).is_some() {
                return Err(Error::Parse { location, message: format!("duplicate id {id}") });
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| Error::Parse { location: "end of input".into(), message: format!("missing id {i}") })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { degree, values })
    }
}

/// Default Gauss points per axis for the de Rham map at order `k`.
pub fn default_quad_order(k: usize) -> usize {
    2 * k + 2
}

/// `C_k`: integrates `form` over every global small p-cube with its
/// canonical orientation (point evaluation for `p = 0`).
pub fn de_rham(form: &dyn PhysicalForm, refined: &RefinedMesh, quad_order: usize) -> Result<Cochain> {
    de_rham_with(form, refined, quad_order, Execution::default())
}

pub fn de_rham_with(
    form: &dyn PhysicalForm,
    refined: &RefinedMesh,
    quad_order: usize,
    mode: Execution,
) -> Result<Cochain> {
    let n = refined.dim();
    let p = form.degree();
    if form.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: form.dim() });
    }
    if p > n {
        return Err(Error::InvalidArgument(format!("degree {p} exceeds dimension {n}")));
    }
    if quad_order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be at least 1".into()));
    }
    let rule = GaussLegendre::new(quad_order).tensor(p);
    let scale = (1.0 / refined.order() as f64).powi(p as i32);
    let values = exec::map_indexed(mode, refined.count(p), |id| {
        let (cell, sc) = refined.carrier(p, id);
        let map = refined.mesh().cell_map(cell);
        let pv = map.push_multivector(sc.directions());
        rule.iter()
            .map(|(t, w)| {
                let y = map.apply(&sc.point_at(t));
                let comps = form.eval_in_cell(cell, &y);
                w * comps.iter().zip(&pv).map(|(c, v)| c * v).sum::<f64>()
            })
            .sum::<f64>()
            * scale
    });
    Ok(Cochain { degree: p, values })
}

/// `(dX)(c) = Σ ±X(f)` over the signed boundary of `c`.
pub fn coboundary(x: &Cochain, refined: &RefinedMesh) -> Result<Cochain> {
    let q = x.degree + 1;
    if q > refined.dim() {
        return Err(Error::InvalidArgument(format!("no coboundary of a top-degree cochain (p = {})", x.degree)));
    }
    if x.values.len() != refined.count(x.degree) {
        return Err(Error::DimensionMismatch { expected: refined.count(x.degree), got: x.values.len() });
    }
    let values = (0..refined.count(q))
        .map(|c| refined.boundary(q, c).iter().map(|&(f, s)| s as f64 * x.values[f]).sum())
        .collect();
    Ok(Cochain { degree: q, values })
}

/// Reference data shared by every cell: the factored DOF matrix and the basis
/// forms in product and expanded form.
#[derive(Debug)]
pub struct ReferenceBasis {
    n: usize,
    p: usize,
    k: usize,
    solver: ReferenceSolver,
    exponents: Vec<Vec<(usize, usize)>>,
    component: Vec<usize>,
    forms: Vec<PolyForm>,
}

impl ReferenceBasis {
    pub fn new(n: usize, p: usize, k: usize) -> Result<Self> {
        let solver = ReferenceSolver::new(n, p, k)?;
        let cubes = crate::smallcubes::enumerate_small_cubes(n, p, k)?;
        let exponents = cubes.iter().map(basis_exponents).collect();
        let component = cubes.iter().map(|c| combination_rank(n, c.directions())).collect();
        let forms = cubes.iter().map(basis_form).collect();
        Ok(Self { n, p, k, solver, exponents, component, forms })
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn solver(&self) -> &ReferenceSolver {
        &self.solver
    }

    /// Reference components of `Σ c_j w_j` at `x`.
    pub fn evaluate(&self, coeffs: &[f64], x: &[f64]) -> Vec<f64> {
        // powers of x_i and 1 - x_i up to k, shared by all basis functions
        let k1 = self.k + 1;
        let mut up = vec![1.0; self.n * k1];
        let mut down = vec![1.0; self.n * k1];
        for (i, &xi) in x.iter().enumerate() {
            for e in 1..k1 {
                up[i * k1 + e] = up[i * k1 + e - 1] * xi;
                down[i * k1 + e] = down[i * k1 + e - 1] * (1.0 - xi);
            }
        }
        let mut out = vec![0.0; binomial(self.n, self.p)];
        for ((c, exps), &comp) in coeffs.iter().zip(&self.exponents).zip(&self.component) {
            if *c != 0.0 {
                let v: f64 = exps.iter().enumerate().map(|(i, &(a, b))| up[i * k1 + a] * down[i * k1 + b]).product();
                out[comp] += c * v;
            }
        }
        out
    }

    /// `Σ c_j w_j` as an expanded polynomial form.
    pub fn combine(&self, coeffs: &[f64]) -> PolyForm {
        let mut f = PolyForm::zero(self.n, self.p);
        for (c, w) in coeffs.iter().zip(&self.forms) {
            if *c != 0.0 {
                f.add_scaled(w, *c);
            }
        }
        f
    }
}

/// An element of `Q_k^p(K)`: reference coefficients per cell.
#[derive(Debug, Clone)]
pub struct PiecewiseForm<'a> {
    refined: &'a RefinedMesh,
    basis: Arc<ReferenceBasis>,
    coeffs: Vec<Vec<f64>>,
}

/// `W`: the unique element of `Q_k^p(K)` whose integral over every global
/// small p-cube equals the cochain value.
pub fn interpolate<'a>(x: &Cochain, refined: &'a RefinedMesh) -> Result<PiecewiseForm<'a>> {
    let basis = Arc::new(ReferenceBasis::new(refined.dim(), x.degree, refined.order())?);
    interpolate_with(x, refined, basis, Execution::default())
}

pub fn interpolate_with<'a>(
    x: &Cochain,
    refined: &'a RefinedMesh,
    basis: Arc<ReferenceBasis>,
    mode: Execution,
) -> Result<PiecewiseForm<'a>> {
    let p = x.degree;
    if basis.p != p || basis.k != refined.order() || basis.n != refined.dim() {
        return Err(Error::InvalidArgument("reference basis does not match the cochain".into()));
    }
    if x.values.len() != refined.count(p) {
        return Err(Error::DimensionMismatch { expected: refined.count(p), got: x.values.len() });
    }
    let coeffs = exec::try_map_indexed(mode, refined.mesh().num_cells(), |cell| {
        let local: Vec<f64> = refined.local_table(p, cell).iter().map(|&(gid, s)| s as f64 * x.values[gid]).collect();
        basis.solver.solve(&local)
    })?;
    Ok(PiecewiseForm { refined, basis, coeffs })
}

impl<'a> PiecewiseForm<'a> {
    pub fn refined(&self) -> &'a RefinedMesh {
        self.refined
    }

    pub fn basis(&self) -> &Arc<ReferenceBasis> {
        &self.basis
    }

    pub fn cell_coefficients(&self, cell: usize) -> &[f64] {
        &self.coeffs[cell]
    }

    /// Physical components at reference point `x` of `cell`.
    pub fn evaluate_reference(&self, cell: usize, x: &[f64]) -> Vec<f64> {
        let r = self.basis.evaluate(&self.coeffs[cell], x);
        self.refined.mesh().cell_map(cell).pull_covector(self.basis.p, &r)
    }

    pub fn evaluate_in_cell(&self, cell: usize, y: &[f64]) -> Vec<f64> {
        let x = self.refined.mesh().cell_map(cell).apply_inverse(y);
        self.evaluate_reference(cell, &x)
    }

    /// Locates `y` (lowest cell index on shared faces) and evaluates there.
    pub fn evaluate(&self, y: &[f64]) -> Result<Vec<f64>> {
        let (cell, x) = self.refined.mesh().locate(y).ok_or_else(|| Error::PointOutsideMesh(y.to_vec()))?;
        Ok(self.evaluate_reference(cell, &x))
    }

    /// Cellwise exterior derivative, exact on each cell's polynomial.
    pub fn exterior_derivative(&self) -> PiecewisePoly<'a> {
        let forms = self.coeffs.iter().map(|c| self.basis.combine(c).exterior_derivative()).collect();
        PiecewisePoly { refined: self.refined, degree: self.basis.p + 1, forms }
    }
}

impl PhysicalForm for PiecewiseForm<'_> {
    fn dim(&self) -> usize {
        self.basis.n
    }
    fn degree(&self) -> usize {
        self.basis.p
    }
    fn eval(&self, y: &[f64]) -> Vec<f64> {
        self.evaluate(y).expect("point inside mesh")
    }
    fn eval_in_cell(&self, cell: usize, y: &[f64]) -> Vec<f64> {
        self.evaluate_in_cell(cell, y)
    }
}

/// Per-cell reference polynomial forms, pulled back on evaluation.
#[derive(Debug, Clone)]
pub struct PiecewisePoly<'a> {
    refined: &'a RefinedMesh,
    degree: usize,
    forms: Vec<PolyForm>,
}

impl PiecewisePoly<'_> {
    pub fn evaluate_reference(&self, cell: usize, x: &[f64]) -> Vec<f64> {
        let n = self.refined.dim();
        if self.degree > n {
            return Vec::new();
        }
        let r = self.forms[cell].evaluate(x).expect("dimension checked").components;
        self.refined.mesh().cell_map(cell).pull_covector(self.degree, &r)
    }
}

impl PhysicalForm for PiecewisePoly<'_> {
    fn dim(&self) -> usize {
        self.refined.dim()
    }
    fn degree(&self) -> usize {
        self.degree
    }
    fn eval(&self, y: &[f64]) -> Vec<f64> {
        let (cell, x) = self.refined.mesh().locate(y).expect("point inside mesh");
        self.evaluate_reference(cell, &x)
    }
    fn eval_in_cell(&self, cell: usize, y: &[f64]) -> Vec<f64> {
        let x = self.refined.mesh().cell_map(cell).apply_inverse(y);
        self.evaluate_reference(cell, &x)
    }
}

/// Pass threshold of each operator identity.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct IdentityConfig {
    /// Random cochains (and random forms) per identity.
    pub trials: usize,
    /// Random reference sample points per cell.
    pub points_per_cell: usize,
    pub seed: u64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self { trials: 20, points_per_cell: 8, seed: 0x5eed }
    }
}

/// Worst deviation of one identity and where it occurred.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub max_error: f64,
    /// Global small-cube id (cochain identities) or cell index.
    pub location: usize,
    /// Physical sample point for pointwise identities.
    pub point: Option<Vec<f64>>,
}

impl Deviation {
    fn none() -> Self {
        Self { max_error: 0.0, location: 0, point: None }
    }

    fn absorb(&mut self, err: f64, location: usize, point: Option<&[f64]>) {
        if err > self.max_error || err.is_nan() {
            self.max_error = err;
            self.location = location;
            self.point = point.map(<[f64]>::to_vec);
        }
    }

    pub fn passed(&self) -> bool {
        self.max_error <= IDENTITY_TOL
    }
}

#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub degree: usize,
    /// `‖C_k W X − X‖_∞`
    pub right_inverse: Deviation,
    /// sampled `|W C_k ω − ω|` for `ω ∈ Q_k^p(K)`
    pub projection: Deviation,
    /// sampled `|W dX − d W X|`; absent for `p = n`
    pub commutation: Option<Deviation>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.right_inverse.passed()
            && self.projection.passed()
            && self.commutation.as_ref().is_none_or(Deviation::passed)
    }

    /// First failing identity, if any.
    pub fn failure(&self) -> Option<String> {
        let fmt = |name: &str, d: &Deviation| {
            format!("{name} fails: error {:e} at {} {:?}", d.max_error, d.location, d.point)
        };
        if !self.right_inverse.passed() {
            return Some(fmt("C_k W X = X", &self.right_inverse));
        }
        if !self.projection.passed() {
            return Some(fmt("W C_k w = w", &self.projection));
        }
        match &self.commutation {
            Some(d) if !d.passed() => Some(fmt("W dX = d W X", d)),
            _ => None,
        }
    }
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sample_points(refined: &RefinedMesh, count: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, Vec<f64>)> {
    let n = refined.dim();
    let mut out = Vec::new();
    for cell in 0..refined.mesh().num_cells() {
        for s in 0..count {
            let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            // every other sample pinned to a facet so traces are exercised
            if s % 2 == 1 {
                let axis = rng.random_range(0..n);
                x[axis] = if rng.random::<bool>() { 1.0 } else { 0.0 };
            }
            out.push((cell, x));
        }
    }
    out
}

/// Checks `C_k W X = X`, `W C_k ω = ω` on `Q_k^p(K)`, and `W dX = d W X` with
/// random data.
pub fn verify_identities(refined: &RefinedMesh, p: usize, config: IdentityConfig) -> Result<IdentityReport> {
    let n = refined.dim();
    let k = refined.order();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ((p as u64) << 32));
    let basis = Arc::new(ReferenceBasis::new(n, p, k)?);
    let next = if p < n { Some(Arc::new(ReferenceBasis::new(n, p + 1, k)?)) } else { None };
    // everything integrated below is a polynomial of degree ≤ k per variable
    let quad = k + 1;
    let samples = sample_points(refined, config.points_per_cell, &mut rng);

    let mut right_inverse = Deviation::none();
    let mut projection = Deviation::none();
    let mut commutation = next.as_ref().map(|_| Deviation::none());
    for _ in 0..config.trials {
        let x = Cochain::random(refined, p, &mut rng);
        let wx = interpolate_with(&x, refined, basis.clone(), Execution::default())?;
        let back = de_rham(&wx, refined, quad)?;
        for (id, (a, b)) in back.values.iter().zip(&x.values).enumerate() {
            right_inverse.absorb((a - b).abs(), id, None);
        }

        // ω = W X' for an independent X' spans Q_k^p(K)
        let omega_x = Cochain::random(refined, p, &mut rng);
        let omega = interpolate_with(&omega_x, refined, basis.clone(), Execution::default())?;
        let recovered =
            interpolate_with(&de_rham(&omega, refined, quad)?, refined, basis.clone(), Execution::default())?;
        for (cell, xr) in &samples {
            let err = max_abs(&recovered.evaluate_reference(*cell, xr), &omega.evaluate_reference(*cell, xr));
            let y = refined.mesh().cell_map(*cell).apply(xr);
            projection.absorb(err, *cell, Some(&y));
        }

        if let (Some(dev), Some(next)) = (commutation.as_mut(), next.as_ref()) {
            let wdx = interpolate_with(&coboundary(&x, refined)?, refined, next.clone(), Execution::default())?;
            let dwx = wx.exterior_derivative();
            for (cell, xr) in &samples {
                let err = max_abs(&wdx.evaluate_reference(*cell, xr), &dwx.evaluate_reference(*cell, xr));
                let y = refined.mesh().cell_map(*cell).apply(xr);
                dev.absorb(err, *cell, Some(&y));
            }
        }
    }
    Ok(IdentityReport { degree: p, right_inverse, projection, commutation })
}
