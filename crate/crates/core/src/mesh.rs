//! Parallelotope meshes and their kth order refinement.
//!
//! Cells list `2^n` vertex indices in binary-corner order: bit `j` of the
//! corner index is reference coordinate `j`. Every cell is the image of the
//! unit cube under `φ(x) = v₀ + E x`.
//!
//! The refinement identifies small cubes across cells exactly. A reference
//! point with numerators `c ∈ {0..k}^n` is keyed by its multilinear weights on
//! the cell's vertices (integers over `k^n`); shared faces carry the same
//! vertices, so both sides produce the same key. A small cube is keyed by its
//! sorted corner point ids.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::combinatorics::combinations;
use crate::error::{Error, Result};
use crate::forms::PolyForm;
use crate::smallcubes::{enumerate_small_cubes, small_cube_position, SmallCube};

/// Relative tolerance of the parallelotope test.
pub const PARALLELOTOPE_TOL: f64 = 1e-12;
/// Relative tolerance of the degeneracy test on `det E`.
pub const DEGENERACY_TOL: f64 = 1e-14;
/// Containment slack, in reference coordinates, for point location.
pub const CONTAINMENT_TOL: f64 = 1e-12;

/// On-disk mesh layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshFile {
    pub dimension: usize,
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<Vec<usize>>,
}

/// The affine bijection `φ: □^n → σ`.
#[derive(Debug, Clone)]
pub struct CellMap {
    origin: Vec<f64>,
    jacobian: DMatrix<f64>,
    inverse: DMatrix<f64>,
    det: f64,
    /// `push[p][(J, I)] = det E[J, I]`: image of `e_I` in the `e_J` basis.
    push: Vec<DMatrix<f64>>,
    /// `pull[p][(J, I)] = det E⁻¹[I, J]`: `(φ⁻¹)^* dx_I` in the `dy_J` basis.
    pull: Vec<DMatrix<f64>>,
}

fn minor(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() {
        return 1.0;
    }
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]).determinant()
}

fn compound(m: &DMatrix<f64>, p: usize, transpose: bool) -> DMatrix<f64> {
    let n = m.nrows();
    let subsets = combinations(n, p);
    DMatrix::from_fn(subsets.len(), subsets.len(), |a, b| {
        if transpose {
            minor(m, &subsets[b], &subsets[a])
        } else {
            minor(m, &subsets[a], &subsets[b])
        }
    })
}

impl CellMap {
    pub fn new(origin: Vec<f64>, jacobian: DMatrix<f64>) -> Result<Self> {
        let n = origin.len();
        if jacobian.nrows() != n || jacobian.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: jacobian.nrows() });
        }
        let det = jacobian.determinant();
        let scale = jacobian.column_iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        if det.abs() < DEGENERACY_TOL * scale.powi(n as i32) || scale == 0.0 {
            return Err(Error::Mesh(format!("degenerate cell: |det E| = {:e}", det.abs())));
        }
        let inverse = jacobian.clone().try_inverse().ok_or_else(|| Error::Mesh("singular cell map".into()))?;
        let push = (0..=n).map(|p| compound(&jacobian, p, false)).collect();
        let pull = (0..=n).map(|p| compound(&inverse, p, true)).collect();
        Ok(Self { origin, jacobian, inverse, det, push, pull })
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// Columns are the edge vectors.
    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    pub fn inverse_jacobian(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.origin[i] + (0..n).map(|j| self.jacobian[(i, j)] * x[j]).sum::<f64>()).collect()
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let d: Vec<f64> = (0..n).map(|i| y[i] - self.origin[i]).collect();
        (0..n).map(|i| (0..n).map(|j| self.inverse[(i, j)] * d[j]).sum()).collect()
    }

    /// Reference covector components (over `combinations(n, p)`) pulled back
    /// through `φ⁻¹` to physical components.
    pub fn pull_covector(&self, p: usize, reference: &[f64]) -> Vec<f64> {
        let m = &self.pull[p];
        (0..m.nrows()).map(|j| (0..m.ncols()).map(|i| m[(j, i)] * reference[i]).sum()).collect()
    }

    /// Physical p-vector components of `E e_{d_1} ∧ … ∧ E e_{d_p}`.
    pub fn push_multivector(&self, directions: &[usize]) -> Vec<f64> {
        let p = directions.len();
        let col = crate::combinatorics::combination_rank(self.dim(), directions);
        self.push[p].column(col).iter().copied().collect()
    }

    pub fn volume(&self) -> f64 {
        self.det.abs()
    }

    /// Longest distance between two corners of the cell.
    pub fn diameter(&self) -> f64 {
        let n = self.dim();
        let mut best = 0.0f64;
        for a in 0..1usize << n {
            for b in 0..1usize << n {
                let d2: f64 = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| (((a >> j) & 1) as f64 - ((b >> j) & 1) as f64) * self.jacobian[(i, j)])
                            .sum::<f64>()
                            .powi(2)
                    })
                    .sum();
                best = best.max(d2.sqrt());
            }
        }
        best
    }

    /// Fullness `|σ| / diam(σ)^n`.
    pub fn fullness(&self) -> f64 {
        self.volume() / self.diameter().powi(self.dim() as i32)
    }
}

#[derive(Debug, Clone)]
pub struct CubicalMesh {
    n: usize,
    vertices: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    maps: Vec<CellMap>,
}

impl CubicalMesh {
    /// Validates and builds a mesh. Errors name the offending cell and corner.
    pub fn new(n: usize, vertices: Vec<Vec<f64>>, cells: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Mesh("dimension must be at least 1".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != n {
                return Err(Error::Mesh(format!("vertex {i} has {} coordinates, expected {n}", v.len())));
            }
        }
        let corners = 1usize << n;
        let mut maps = Vec::with_capacity(cells.len());
        for (ci, cell) in cells.iter().enumerate() {
            if cell.len() != corners {
                return Err(Error::Mesh(format!("cell {ci} has {} vertices, expected {corners}", cell.len())));
            }
            if let Some(&bad) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!("cell {ci} references missing vertex {bad}")));
            }
            let v0 = &vertices[cell[0]];
            let jac = DMatrix::from_fn(n, n, |i, j| vertices[cell[1 << j]][i] - v0[i]);
            let scale = jac.column_iter().map(|c| c.norm()).fold(0.0f64, f64::max);
            for (b, &vid) in cell.iter().enumerate() {
                let dev = (0..n)
                    .map(|i| {
                        let expect = v0[i] + (0..n).filter(|j| (b >> j) & 1 == 1).map(|j| jac[(i, j)]).sum::<f64>();
                        (vertices[vid][i] - expect).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                if dev > PARALLELOTOPE_TOL * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::Mesh(format!(
                        "cell {ci} is not a parallelotope: corner {b} (vertex {vid}) deviates by {dev:.3e}"
                    )));
                }
            }
            let map = CellMap::new(v0.clone(), jac).map_err(|e| Error::Mesh(format!("cell {ci}: {e}")))?;
            maps.push(map);
        }
        let mesh = Self { n, vertices, cells, maps };
        mesh.check_shared_faces()?;
        Ok(mesh)
    }

    fn check_shared_faces(&self) -> Result<()> {
        let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
        for (ci, cell) in self.cells.iter().enumerate() {
            let mut seen = cell.clone();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Mesh(format!("cell {ci} repeats a vertex")));
            }
            for &v in cell {
                incident.entry(v).or_default().push(ci);
            }
        }
        let mut pairs: Vec<(usize, usize)> = incident
            .values()
            .flat_map(|cs| cs.iter().flat_map(move |&a| cs.iter().filter(move |&&b| b > a).map(move |&b| (a, b))))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        for (a, b) in pairs {
            let shared: Vec<usize> = self.cells[a].iter().copied().filter(|v| self.cells[b].contains(v)).collect();
            for c in [a, b] {
                let bits: Vec<usize> =
                    shared.iter().map(|v| self.cells[c].iter().position(|w| w == v).unwrap()).collect();
                if !is_cube_face(&bits) {
                    return Err(Error::Mesh(format!(
                        "cells {a} and {b} share vertices {shared:?} that do not form a face of cell {c}"
                    )));
                }
            }
        }
        // coincident vertices with different indices break face matching
        let scale = self.maps.iter().map(|m| m.diameter()).fold(0.0f64, f64::max).max(1.0);
        let mut order: Vec<usize> = (0..self.vertices.len()).collect();
        order.sort_by(|&i, &j| self.vertices[i][0].total_cmp(&self.vertices[j][0]));
        let tol = 1e-10 * scale;
        for (pos, &i) in order.iter().enumerate() {
            for &j in &order[pos + 1..] {
                if self.vertices[j][0] - self.vertices[i][0] > tol {
                    break;
                }
                let d: f64 =
                    (0..self.n).map(|c| (self.vertices[i][c] - self.vertices[j][c]).powi(2)).sum::<f64>().sqrt();
                if d <= tol && incident.contains_key(&i) && incident.contains_key(&j) {
                    return Err(Error::Mesh(format!(
                        "vertices {i} and {j} coincide; shared faces must reuse vertex indices"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_file(file: MeshFile) -> Result<Self> {
        Self::new(file.dimension, file.vertices, file.cells)
    }

    pub fn to_file(&self) -> MeshFile {
        MeshFile { dimension: self.n, vertices: self.vertices.clone(), cells: self.cells.clone() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_map(&self, cell: usize) -> &CellMap {
        &self.maps[cell]
    }

    /// Largest cell diameter.
    pub fn h(&self) -> f64 {
        self.maps.iter().map(CellMap::diameter).fold(0.0, f64::max)
    }

    /// Smallest cell fullness.
    pub fn min_fullness(&self) -> f64 {
        self.maps.iter().map(CellMap::fullness).fold(f64::INFINITY, f64::min)
    }

    /// The lowest-index cell containing `y`, with its reference coordinates.
    pub fn locate(&self, y: &[f64]) -> Option<(usize, Vec<f64>)> {
        self.maps.iter().enumerate().find_map(|(ci, m)| {
            if !self.in_bounding_box(ci, y) {
                return None;
            }
            let x = m.apply_inverse(y);
            x.iter().all(|&xi| (-CONTAINMENT_TOL..=1.0 + CONTAINMENT_TOL).contains(&xi)).then_some((ci, x))
        })
    }

    fn in_bounding_box(&self, cell: usize, y: &[f64]) -> bool {
        let scale = self.maps[cell].diameter();
        (0..self.n).all(|i| {
            let (lo, hi) = self.cells[cell].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(self.vertices[v][i]), hi.max(self.vertices[v][i]))
            });
            y[i] >= lo - 1e-12 * scale && y[i] <= hi + 1e-12 * scale
        })
    }
}

fn is_cube_face(bits: &[usize]) -> bool {
    if bits.is_empty() {
        return true;
    }
    let and = bits.iter().fold(usize::MAX, |a, &b| a & b);
    let or = bits.iter().fold(0, |a, &b| a | b);
    let free = (and ^ or).count_ones();
    let mut sorted = bits.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len() == 1usize << free && sorted.iter().all(|&b| b & !(and ^ or) == and & !(and ^ or))
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<CubicalMesh> {
    let text = std::fs::read_to_string(path)?;
    let file: MeshFile = serde_json::from_str(&text)?;
    CubicalMesh::from_file(file)
}

/// `m^n` congruent cells covering `[0,1]^n`, then sheared by
/// `x₁ ← x₁ + shear·x₂` (for `n ≥ 2`).
pub fn structured_mesh(n: usize, m: usize, shear: f64) -> Result<CubicalMesh> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("structured mesh needs n ≥ 1 and m ≥ 1".into()));
    }
    let side = m + 1;
    let nverts = side.pow(n as u32);
    let index = |g: &[usize]| g.iter().fold(0, |acc, &gi| acc * side + gi);
    let grid = |mut flat: usize, radix: usize| {
        let mut g = vec![0; n];
        for i in (0..n).rev() {
            g[i] = flat % radix;
            flat /= radix;
        }
        g
    };
    let vertices: Vec<Vec<f64>> = (0..nverts)
        .map(|f| {
            let g = grid(f, side);
            let mut x: Vec<f64> = g.iter().map(|&gi| gi as f64 / m as f64).collect();
            if n >= 2 {
                x[0] += shear * x[1];
            }
            x
        })
        .collect();
    let cells = (0..m.pow(n as u32))
        .map(|f| {
            let g = grid(f, m);
            (0..1usize << n)
                .map(|b| {
                    let c: Vec<usize> = (0..n).map(|j| g[j] + ((b >> j) & 1)).collect();
                    index(&c)
                })
                .collect()
        })
        .collect();
    CubicalMesh::new(n, vertices, cells)
}

/// One owner of a global small cube: cell, position in the cell's local
/// small-cube list, and the sign relating the cell's local orientation to the
/// global one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Owner {
    pub cell: usize,
    pub local: usize,
    pub sign: i8,
}

#[derive(Debug, Clone)]
pub struct GlobalCube {
    pub degree: usize,
    pub owners: Vec<Owner>,
    pub corners: Vec<usize>,
}

/// The mesh `K_k` of kth order small cubes of every cell.
#[derive(Debug, Clone)]
pub struct RefinedMesh {
    mesh: CubicalMesh,
    k: usize,
    points: Vec<Vec<f64>>,
    reference: Vec<Vec<SmallCube>>,
    cubes: Vec<Vec<GlobalCube>>,
    /// `local[q][cell][i] = (global id, sign)`.
    local: Vec<Vec<Vec<(usize, i8)>>>,
    /// `incidence[q][c]`: signed boundary of global q-cube `c` in (q-1)-cubes.
    incidence: Vec<Vec<Vec<(usize, i8)>>>,
}

impl RefinedMesh {
    pub fn new(mesh: CubicalMesh, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("order k must be at least 1".into()));
        }
        let n = mesh.dim();
        let corners = 1usize << n;
        let side = k + 1;
        let npts_local = side.pow(n as u32);

        // global points keyed by integer multilinear weights on cell vertices
        let mut point_ids: HashMap<Vec<(usize, u64)>, usize> = HashMap::new();
        let mut points = Vec::new();
        let mut cell_points = Vec::with_capacity(mesh.num_cells());
        for (ci, cell) in mesh.cells().iter().enumerate() {
            let mut ids = Vec::with_capacity(npts_local);
            for flat in 0..npts_local {
                let c = unflatten_radix(flat, side, n);
                let mut key: Vec<(usize, u64)> = (0..corners)
                    .filter_map(|b| {
                        let w: u64 =
                            (0..n).map(|j| if (b >> j) & 1 == 1 { c[j] as u64 } else { (k - c[j]) as u64 }).product();
                        (w != 0).then_some((cell[b], w))
                    })
                    .collect();
                key.sort_unstable();
                let next = points.len();
                let id = *point_ids.entry(key).or_insert(next);
                if id == next {
                    let x: Vec<f64> = c.iter().map(|&ci| ci as f64 / k as f64).collect();
                    points.push(mesh.cell_map(ci).apply(&x));
                }
                ids.push(id);
            }
            cell_points.push(ids);
        }

        let reference: Vec<Vec<SmallCube>> = (0..=n).map(|q| enumerate_small_cubes(n, q, k)).collect::<Result<_>>()?;
        let mut cubes: Vec<Vec<GlobalCube>> = vec![Vec::new(); n + 1];
        let mut local: Vec<Vec<Vec<(usize, i8)>>> = vec![Vec::with_capacity(mesh.num_cells()); n + 1];
        for q in 0..=n {
            let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
            for (ci, points) in cell_points.iter().enumerate() {
                let mut table = Vec::with_capacity(reference[q].len());
                for (li, sc) in reference[q].iter().enumerate() {
                    let mut key: Vec<usize> = sc
                        .corner_numerators()
                        .iter()
                        .map(|c| points[c.iter().fold(0, |acc, &x| acc * side + x)])
                        .collect();
                    let corners_in_order = key.clone();
                    key.sort_unstable();
                    match ids.get(&key) {
                        None => {
                            let gid = cubes[q].len();
                            ids.insert(key, gid);
                            cubes[q].push(GlobalCube {
                                degree: q,
                                owners: vec![Owner { cell: ci, local: li, sign: 1 }],
                                corners: corners_in_order,
                            });
                            table.push((gid, 1));
                        }
                        Some(&gid) => {
                            let first = cubes[q][gid].owners[0];
                            let sign = relative_sign(
                                &mesh,
                                (first.cell, reference[q][first.local].directions()),
                                (ci, sc.directions()),
                            );
                            cubes[q][gid].owners.push(Owner { cell: ci, local: li, sign });
                            table.push((gid, sign));
                        }
                    }
                }
                local[q].push(table);
            }
        }

        let mut incidence = vec![Vec::new(); n + 1];
        for q in 1..=n {
            incidence[q] = cubes[q]
                .iter()
                .map(|gc| {
                    let owner = gc.owners[0];
                    let sc = &reference[q][owner.local];
                    local_boundary(n, k, sc)
                        .into_iter()
                        .map(|(pos, s)| {
                            let (gid, fs) = local[q - 1][owner.cell][pos];
                            (gid, s * fs * owner.sign)
                        })
                        .collect()
                })
                .collect();
        }

        Ok(Self { mesh, k, points, reference, cubes, local, incidence })
    }

    pub fn mesh(&self) -> &CubicalMesh {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn count(&self, q: usize) -> usize {
        self.cubes[q].len()
    }

    pub fn cubes(&self, q: usize) -> &[GlobalCube] {
        &self.cubes[q]
    }

    /// Reference small q-cubes in the local order shared by every cell.
    pub fn reference_cubes(&self, q: usize) -> &[SmallCube] {
        &self.reference[q]
    }

    /// `(global id, sign)` for each local small q-cube of `cell`.
    pub fn local_table(&self, q: usize, cell: usize) -> &[(usize, i8)] {
        &self.local[q][cell]
    }

    /// Signed boundary of global q-cube `id`, `q ≥ 1`.
    pub fn boundary(&self, q: usize, id: usize) -> &[(usize, i8)] {
        &self.incidence[q][id]
    }

    /// Reference-to-physical parametrisation of a global cube through its
    /// first owner: `(cell, small cube)`. The first owner's local orientation
    /// is the global orientation.
    pub fn carrier(&self, q: usize, id: usize) -> (usize, &SmallCube) {
        let o = self.cubes[q][id].owners[0];
        (o.cell, &self.reference[q][o.local])
    }

    /// Physical anchor of a global cube.
    pub fn anchor(&self, q: usize, id: usize) -> Vec<f64> {
        let (cell, sc) = self.carrier(q, id);
        self.mesh.cell_map(cell).apply(&sc.anchor())
    }

    /// Every global (q-2)-cube coefficient of `∂∂` on q-cubes is zero.
    pub fn boundary_of_boundary_is_zero(&self) -> bool {
        (2..=self.dim()).all(|q| {
            (0..self.count(q)).all(|c| {
                let mut acc: HashMap<usize, i32> = HashMap::new();
                for &(f, s) in self.boundary(q, c) {
                    for &(g, t) in self.boundary(q - 1, f) {
                        *acc.entry(g).or_default() += (s * t) as i32;
                    }
                }
                acc.values().all(|&v| v == 0)
            })
        })
    }

    /// `id,q,owners,anchor` debugging dump, owners and anchor coordinates
    /// separated by `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,q,owners,anchor\n");
        for q in 0..=self.dim() {
            for (id, gc) in self.cubes[q].iter().enumerate() {
                let owners: Vec<String> = gc.owners.iter().map(|o| o.cell.to_string()).collect();
                let anchor: Vec<String> = self.anchor(q, id).iter().map(|a| format!("{a}")).collect();
                out.push_str(&format!("{id},{q},{},{}\n", owners.join(";"), anchor.join(";")));
            }
        }
        out
    }
}

fn unflatten_radix(mut flat: usize, radix: usize, n: usize) -> Vec<usize> {
    let mut c = vec![0; n];
    for i in (0..n).rev() {
        c[i] = flat % radix;
        flat /= radix;
    }
    c
}

/// Local boundary of a reference small cube: for sorted directions
/// `d_1 < … < d_q`, the faces normal to `d_j` carry `(-1)^(j-1)·(top - bottom)`.
pub fn local_boundary(n: usize, k: usize, sc: &SmallCube) -> Vec<(usize, i8)> {
    let dirs = sc.directions();
    let anchor = sc.anchor_numerators();
    let mut out = Vec::with_capacity(2 * dirs.len());
    for (j, &d) in dirs.iter().enumerate() {
        let sign: i8 = if j % 2 == 0 { 1 } else { -1 };
        let face_dirs: Vec<usize> = dirs.iter().copied().filter(|&e| e != d).collect();
        let mut top = anchor.clone();
        top[d] += 1;
        out.push((small_cube_position(n, k, &face_dirs, &anchor), -sign));
        out.push((small_cube_position(n, k, &face_dirs, &top), sign));
    }
    out
}

/// Sign of `det(UᵀV)` for the physical edge frames of two parametrisations of
/// the same small cube.
fn relative_sign(mesh: &CubicalMesh, a: (usize, &[usize]), b: (usize, &[usize])) -> i8 {
    let p = a.1.len();
    if p == 0 {
        return 1;
    }
    let ea = mesh.cell_map(a.0).jacobian();
    let eb = mesh.cell_map(b.0).jacobian();
    let n = mesh.dim();
    let gram = DMatrix::from_fn(p, p, |i, j| (0..n).map(|r| ea[(r, a.1[i])] * eb[(r, b.1[j])]).sum::<f64>());
    if gram.determinant() > 0.0 {
        1
    } else {
        -1
    }
}

/// A reference form pulled back through `φ⁻¹` onto a cell.
#[derive(Debug, Clone, Copy)]
pub struct PulledBack<'a> {
    pub map: &'a CellMap,
    pub form: &'a PolyForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalValue {
    pub components: Vec<f64>,
    pub inside_cell: bool,
}

pub fn pullback_basis<'a>(map: &'a CellMap, form: &'a PolyForm) -> PulledBack<'a> {
    PulledBack { map, form }
}

impl PulledBack<'_> {
    pub fn evaluate(&self, y: &[f64]) -> Result<PhysicalValue> {
        let x = self.map.apply_inverse(y);
        let reference = self.form.evaluate(&x)?;
        let inside_cell = x.iter().all(|&xi| (-CONTAINMENT_TOL..=1.0 + CONTAINMENT_TOL).contains(&xi));
        Ok(PhysicalValue { components: self.map.pull_covector(self.form.degree(), &reference.components), inside_cell })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::FaceId;
    use crate::forms::{basis_form, lowest_order_form};
    use approx::assert_relative_eq;

    fn unit_square() -> CubicalMesh {
        CubicalMesh::new(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            vec![vec![0, 1, 2, 3]],
        )
        .unwrap()
    }

    fn two_squares() -> CubicalMesh {
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 1.0]];
        CubicalMesh::new(2, v, vec![vec![0, 1, 3, 4], vec![1, 2, 4, 5]]).unwrap()
    }

    #[test]
    fn parallelogram_accepted_trapezoid_rejected() {
        unit_square();
        let sheared = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.4, 1.0], vec![1.4, 1.0]];
        CubicalMesh::new(2, sheared, vec![vec![0, 1, 2, 3]]).unwrap();
        let trap = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0 + 1e-3, 1.0]];
        let err = CubicalMesh::new(2, trap, vec![vec![0, 1, 2, 3]]).unwrap_err().to_string();
        assert!(err.contains("cell 0") && err.contains("corner 3") && err.contains("1.000e-3"), "{err}");
    }

    #[test]
    fn dangling_vertex_rejected() {
        let err = CubicalMesh::new(1, vec![vec![0.0], vec![1.0]], vec![vec![0, 2]]).unwrap_err();
        assert!(err.to_string().contains("missing vertex 2"));
    }

    #[test]
    fn mismatched_shared_face_rejected() {
        // second cell duplicates the shared vertices instead of reusing them
        let v = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 1.0],
        ];
        assert!(CubicalMesh::new(2, v, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]).is_err());
        // sharing a diagonal pair is not a face
        let v = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![2.0, 1.0],
            vec![1.0, 2.0],
            vec![2.0, 2.0],
        ];
        assert!(CubicalMesh::new(2, v, vec![vec![0, 1, 2, 3], vec![3, 4, 5, 6], vec![1, 4, 3, 6]]).is_err());
    }

    #[test]
    fn structured_generator() {
        let m = structured_mesh(2, 1, 0.0).unwrap();
        assert_eq!(m.num_cells(), 1);
        assert_eq!(m.cell_map(0).jacobian(), &DMatrix::identity(2, 2));
        let m = structured_mesh(2, 4, 0.0).unwrap();
        assert_eq!(m.num_cells(), 16);
        assert_relative_eq!(m.h(), 2f64.sqrt() / 4.0, epsilon = 1e-15);
        let m = structured_mesh(2, 2, 0.3).unwrap();
        assert_eq!(m.num_cells(), 4);
        assert!(m.h() <= 2f64.sqrt() * 1.3 / 2.0 + 1e-15);
        for n in 1..=3 {
            let m = structured_mesh(n, 3, 0.2).unwrap();
            assert!(m.h() <= (n as f64).sqrt() * 1.2 / 3.0 + 1e-15);
        }
    }

    #[test]
    fn cell_maps() {
        let m = unit_square();
        assert_eq!(m.cell_map(0).apply(&[0.3, 0.4]), vec![0.3, 0.4]);
        let v = vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![1.0, 1.0], vec![2.0, 1.0]];
        let m = CubicalMesh::new(2, v, vec![vec![0, 1, 2, 3]]).unwrap();
        assert_eq!(m.cell_map(0).apply(&[0.25, 0.5]), vec![1.25, 0.5]);

        let s = 0.3;
        let m = structured_mesh(2, 2, s).unwrap();
        let map = m.cell_map(3);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, s, 0.0, 1.0]) / 2.0;
        assert!((map.jacobian() - expect).abs().max() < 1e-15);
        for x in [[0.1, 0.9], [0.5, 0.5], [1.0, 0.0]] {
            let back = map.apply_inverse(&map.apply(&x));
            assert_relative_eq!(back[0], x[0], epsilon = 1e-13);
            assert_relative_eq!(back[1], x[1], epsilon = 1e-13);
        }
    }

    #[test]
    fn degenerate_cell_rejected() {
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]];
        assert!(CubicalMesh::new(2, v, vec![vec![0, 1, 2, 3]]).is_err());
    }

    #[test]
    fn single_cell_counts() {
        let r = RefinedMesh::new(unit_square(), 1).unwrap();
        assert_eq!((r.count(0), r.count(1), r.count(2)), (4, 4, 1));
        let r = RefinedMesh::new(unit_square(), 2).unwrap();
        assert_eq!((r.count(0), r.count(1), r.count(2)), (9, 12, 4));
    }

    #[test]
    fn two_cells_share_small_edges() {
        // brute-force oracle: dedupe small edges by rounded physical endpoints
        let k = 2;
        let r = RefinedMesh::new(two_squares(), k).unwrap();
        let mut keys = std::collections::BTreeSet::new();
        for cell in 0..2 {
            let map = r.mesh().cell_map(cell);
            for sc in enumerate_small_cubes(2, 1, k).unwrap() {
                let mut ends: Vec<Vec<i64>> = sc
                    .corner_numerators()
                    .iter()
                    .map(|c| {
                        let x: Vec<f64> = c.iter().map(|&ci| ci as f64 / k as f64).collect();
                        map.apply(&x).iter().map(|v| (v * 1e6).round() as i64).collect()
                    })
                    .collect();
                ends.sort();
                keys.insert(ends);
            }
        }
        assert_eq!(keys.len(), 22);
        assert_eq!(r.count(1), 22);
        let shared: Vec<_> = r.cubes(1).iter().filter(|c| c.owners.len() == 2).collect();
        assert_eq!(shared.len(), 2);
    }

    #[test]
    fn single_cell_matches_reference_counts() {
        for n in 1..=3 {
            for k in 1..=3 {
                let r = RefinedMesh::new(structured_mesh(n, 1, 0.0).unwrap(), k).unwrap();
                for q in 0..=n {
                    assert_eq!(r.count(q), crate::combinatorics::small_cube_count(n, q, k));
                }
            }
        }
    }

    #[test]
    fn boundary_squared_vanishes() {
        for n in 1..=3 {
            for k in 1..=3 {
                for (m, shear) in [(1, 0.0), (2, 0.3)] {
                    let r = RefinedMesh::new(structured_mesh(n, m, shear).unwrap(), k).unwrap();
                    assert!(r.boundary_of_boundary_is_zero(), "n={n} k={k} m={m}");
                }
            }
        }
        let r = RefinedMesh::new(structured_mesh(2, 4, 0.0).unwrap(), 3).unwrap();
        assert!(r.boundary_of_boundary_is_zero());
    }

    #[test]
    fn mirrored_cells_get_relative_signs() {
        // second cell lists its corners mirrored in x; the shared edges run
        // along y in both cells, while its interior x-edges are reversed
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 1.0]];
        let mesh = CubicalMesh::new(2, v, vec![vec![0, 1, 3, 4], vec![2, 1, 5, 4]]).unwrap();
        let r = RefinedMesh::new(mesh, 2).unwrap();
        assert!(r.boundary_of_boundary_is_zero());
        let shared_x: Vec<_> = r.cubes(1).iter().filter(|c| c.owners.len() == 2).collect();
        assert_eq!(shared_x.len(), 2);
        assert!(shared_x.iter().all(|c| c.owners[1].sign == 1));
        assert_eq!(r.count(1), 22);
    }

    #[test]
    fn pullback_identity_translation_shear() {
        let f = basis_form(&enumerate_small_cubes(2, 1, 2).unwrap()[3]);
        let m = unit_square();
        let pb = pullback_basis(m.cell_map(0), &f);
        let y = [0.3, 0.8];
        assert_eq!(pb.evaluate(&y).unwrap().components, f.evaluate(&y).unwrap().components);

        let v = vec![vec![2.0, 1.0], vec![3.0, 1.0], vec![2.0, 2.0], vec![3.0, 2.0]];
        let shifted = CubicalMesh::new(2, v, vec![vec![0, 1, 2, 3]]).unwrap();
        let pb = pullback_basis(shifted.cell_map(0), &f);
        let got = pb.evaluate(&[2.3, 1.8]).unwrap();
        let want = f.evaluate(&y).unwrap().components;
        assert_relative_eq!(got.components[0], want[0], epsilon = 1e-15);
        assert_relative_eq!(got.components[1], want[1], epsilon = 1e-15);
        assert!(!pb.evaluate(&[0.0, 0.0]).unwrap().inside_cell);

        // ⟨(φ⁻¹)^* dx₁, E e_j⟩ = δ_1j
        let sheared = structured_mesh(2, 2, 0.3).unwrap();
        let map = sheared.cell_map(1);
        let dx1 = lowest_order_form(&FaceId::new(2, vec![0], &[0]).unwrap());
        let dx1 = {
            let mut g = dx1.clone();
            g.add_scaled(&lowest_order_form(&FaceId::new(2, vec![0], &[1]).unwrap()), 1.0);
            g
        };
        let cov = pullback_basis(map, &dx1).evaluate(&map.apply(&[0.5, 0.5])).unwrap().components;
        for j in 0..2 {
            let pairing: f64 = (0..2).map(|i| cov[i] * map.jacobian()[(i, j)]).sum();
            assert_relative_eq!(pairing, if j == 0 { 1.0 } else { 0.0 }, epsilon = 1e-14);
        }
        assert_relative_eq!(cov[0], map.inverse_jacobian()[(0, 0)], epsilon = 1e-15);
        assert_relative_eq!(cov[1], map.inverse_jacobian()[(0, 1)], epsilon = 1e-15);
    }

    #[test]
    fn mesh_json_round_trip() {
        let m = structured_mesh(2, 2, 0.1).unwrap();
        let text = serde_json::to_string(&m.to_file()).unwrap();
        let back = CubicalMesh::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.cells(), m.cells());
    }

    #[test]
    fn locate_prefers_lowest_cell_on_shared_face() {
        let m = two_squares();
        assert_eq!(m.locate(&[1.0, 0.5]).unwrap().0, 0);
        assert_eq!(m.locate(&[1.5, 0.5]).unwrap().0, 1);
        assert!(m.locate(&[2.5, 0.5]).is_none());
    }
}
