//! Convergence experiments for `W C_k ω → ω` on structured meshes, with a
//! small catalog of smooth test forms.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::combinatorics::{binomial, combinations};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::interp::{de_rham_with, default_quad_order, interpolate_with, PhysicalForm, ReferenceBasis};
use crate::mesh::{structured_mesh, RefinedMesh};

/// Identifiers accepted by [`catalog_form`].
pub const CATALOG: &[(&str, &str)] = &[
    ("sinprod", "prod_i sin(pi x_i) on dx_0^...^dx_{p-1}, other components zero"),
    ("trig", "component r: prod_i cos(pi x_i + 0.3 (r+1)(i+1))"),
    ("exp", "component r: exp(sum_i a_ri x_i) with a_ri = ((r+i) mod 3 + 1)/2"),
    ("poly", "component J: prod_{i in J} (1+x_i)^(k-1) prod_{i not in J} (1+x_i)^k; exact on unsheared meshes"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    SinProd,
    Trig,
    Exp,
    Poly,
}

/// A smooth p-form on `R^n` from the built-in catalog.
#[derive(Debug, Clone)]
pub struct CatalogForm {
    kind: Kind,
    n: usize,
    p: usize,
    k: usize,
    directions: Vec<Vec<usize>>,
}

/// Looks up `id` for dimension `n`, degree `p` and (for `poly`) order `k`.
pub fn catalog_form(id: &str, n: usize, p: usize, k: usize) -> Result<CatalogForm> {
    let kind = match id {
        "sinprod" => Kind::SinProd,
        "trig" => Kind::Trig,
        "exp" => Kind::Exp,
        "poly" => Kind::Poly,
        _ => {
            let known: Vec<&str> = CATALOG.iter().map(|(id, _)| *id).collect();
            return Err(Error::UnknownForm(format!("`{id}` (known: {})", known.join(", "))));
        }
    };
    if n == 0 || p > n {
        return Err(Error::InvalidArgument(format!("no {p}-forms in dimension {n}")));
    }
    if kind == Kind::Poly && k == 0 {
        return Err(Error::InvalidArgument("poly form needs k ≥ 1".into()));
    }
    Ok(CatalogForm { kind, n, p, k, directions: combinations(n, p) })
}

impl PhysicalForm for CatalogForm {
    fn dim(&self) -> usize {
        self.n
    }

    fn degree(&self) -> usize {
        self.p
    }

    fn eval(&self, y: &[f64]) -> Vec<f64> {
        let count = binomial(self.n, self.p);
        match self.kind {
            Kind::SinProd => {
                let mut out = vec![0.0; count];
                out[0] = y.iter().map(|&x| (PI * x).sin()).product();
                out
            }
            Kind::Trig => (0..count)
                .map(|r| {
                    y.iter().enumerate().map(|(i, &x)| (PI * x + 0.3 * (r + 1) as f64 * (i + 1) as f64).cos()).product()
                })
                .collect(),
            Kind::Exp => (0..count)
                .map(|r| y.iter().enumerate().map(|(i, &x)| ((r + i) % 3 + 1) as f64 * 0.5 * x).sum::<f64>().exp())
                .collect(),
            Kind::Poly => self
                .directions
                .iter()
                .map(|dirs| {
                    y.iter()
                        .enumerate()
                        .map(|(i, &x)| {
                            let e = if dirs.contains(&i) { self.k - 1 } else { self.k };
                            (1.0 + x).powi(e as i32)
                        })
                        .product()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceConfig {
    pub shear: f64,
    /// Sample points per axis and cell, uniformly spaced including the cell
    /// boundary.
    pub samples_per_axis: usize,
    /// Gauss points per axis in the de Rham map.
    pub quad_order: Option<usize>,
    pub mode: Execution,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self { shear: 0.0, samples_per_axis: 5, quad_order: None, mode: Execution::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    /// Cells per axis.
    pub m: usize,
    /// Largest cell diameter.
    pub h: f64,
    /// Smallest cell fullness.
    pub fullness: f64,
    pub sup_error: f64,
    /// `log(e_prev / e) / log(h_prev / h)`, absent on the first row.
    pub eoc: Option<f64>,
}

/// Sampled sup error of `W C_k ω` against `ω` on one mesh.
pub fn sup_error(form: &dyn PhysicalForm, refined: &RefinedMesh, config: &ConvergenceConfig) -> Result<f64> {
    let n = refined.dim();
    let k = refined.order();
    let s = config.samples_per_axis;
    if s < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples per axis".into()));
    }
    let quad = config.quad_order.unwrap_or_else(|| default_quad_order(k));
    let basis = Arc::new(ReferenceBasis::new(n, form.degree(), k)?);
    let cochain = de_rham_with(form, refined, quad, config.mode)?;
    let w = interpolate_with(&cochain, refined, basis, config.mode)?;
    let per_cell = exec::map_indexed(config.mode, refined.mesh().num_cells(), |cell| {
        let map = refined.mesh().cell_map(cell);
        let mut worst: f64 = 0.0;
        for flat in 0..s.pow(n as u32) {
            let mut rest = flat;
            let mut x = vec![0.0; n];
            for xi in x.iter_mut().rev() {
                *xi = (rest % s) as f64 / (s - 1) as f64;
                rest /= s;
            }
            let approx = w.evaluate_reference(cell, &x);
            let exact = form.eval(&map.apply(&x));
            for (a, e) in approx.iter().zip(&exact) {
                worst = worst.max((a - e).abs());
            }
        }
        worst
    });
    let err = per_cell.into_iter().fold(0.0, f64::max);
    if !err.is_finite() {
        return Err(Error::InvalidArgument("non-finite interpolation error".into()));
    }
    Ok(err)
}

/// One row per entry of `m_list` (strictly increasing).
pub fn run_convergence(
    form: &dyn PhysicalForm,
    k: usize,
    m_list: &[usize],
    config: &ConvergenceConfig,
) -> Result<Vec<ConvergenceRow>> {
    if m_list.is_empty() || m_list.windows(2).any(|w| w[0] >= w[1]) || m_list[0] == 0 {
        return Err(Error::InvalidArgument(format!("m list must be positive and strictly increasing: {m_list:?}")));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let mesh = structured_mesh(form.dim(), m, config.shear)?;
        let (h, fullness) = (mesh.h(), mesh.min_fullness());
        let refined = RefinedMesh::new(mesh, k)?;
        let err = sup_error(form, &refined, config)?;
        let eoc = rows.last().map(|prev| (prev.sup_error / err).ln() / (prev.h / h).ln());
        rows.push(ConvergenceRow { m, h, fullness, sup_error: err, eoc });
    }
    Ok(rows)
}

/// Whether the last observed order lies in `[k - 0.3, k + 0.5]`.
pub fn eoc_gate(rows: &[ConvergenceRow], k: usize) -> bool {
    rows.last().and_then(|r| r.eoc).is_some_and(|e| e >= k as f64 - 0.3 && e <= k as f64 + 0.5)
}

/// `m,h,fullness,sup_error,eoc`; the first row has an empty `eoc`.
pub fn rows_to_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("m,h,fullness,sup_error,eoc\n");
    for r in rows {
        let eoc = r.eoc.map(|e| format!("{e:.4}")).unwrap_or_default();
        let _ = writeln!(out, "{},{:.10e},{:.10e},{:.6e},{}", r.m, r.h, r.fullness, r.sup_error, eoc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_lookup() {
        assert!(matches!(catalog_form("nope", 2, 1, 1), Err(Error::UnknownForm(_))));
        assert!(catalog_form("sinprod", 2, 3, 1).is_err());
        let f = catalog_form("sinprod", 2, 1, 1).unwrap();
        let v = f.eval(&[0.5, 0.5]);
        assert_eq!(v.len(), 2);
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1] == 0.0);
        for (id, _) in CATALOG {
            assert_eq!(catalog_form(id, 3, 2, 2).unwrap().eval(&[0.1, 0.2, 0.3]).len(), 3);
        }
    }

    #[test]
    fn poly_entry_is_reproduced() {
        for (n, p, k) in [(2, 0, 1), (2, 1, 2), (2, 2, 2), (3, 1, 1)] {
            let f = catalog_form("poly", n, p, k).unwrap();
            let rows = run_convergence(&f, k, &[1, 2], &ConvergenceConfig::default()).unwrap();
            assert!(rows.iter().all(|r| r.sup_error <= 1e-9), "{n} {p} {k}: {rows:?}");
        }
    }

    #[test]
    fn first_order_rate_for_sinprod() {
        let f = catalog_form("sinprod", 2, 1, 1).unwrap();
        let rows = run_convergence(&f, 1, &[2, 4, 8], &ConvergenceConfig::default()).unwrap();
        assert!(rows[0].eoc.is_none());
        assert!(rows.windows(2).all(|w| w[1].h < w[0].h));
        assert!(eoc_gate(&rows, 1), "{rows:?}");
    }

    #[test]
    fn rejects_bad_m_list() {
        let f = catalog_form("trig", 2, 1, 1).unwrap();
        let cfg = ConvergenceConfig::default();
        assert!(run_convergence(&f, 1, &[], &cfg).is_err());
        assert!(run_convergence(&f, 1, &[4, 2], &cfg).is_err());
        assert!(run_convergence(&f, 1, &[0, 2], &cfg).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            ConvergenceRow { m: 2, h: 0.5, fullness: 0.5, sup_error: 0.25, eoc: None },
            ConvergenceRow { m: 4, h: 0.25, fullness: 0.5, sup_error: 0.125, eoc: Some(1.0) },
        ];
        let csv = rows_to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "m,h,fullness,sup_error,eoc");
        assert!(lines[1].ends_with(','));
        assert!(lines[2].ends_with(",1.0000"));
    }
}
