//! kth order small cubes of the unit n-cube.
//!
//! A small p-cube is the image of a p-face `τ` under the homothety
//! `x ↦ (m + x)/k` with `m ∈ J(n, k-1)`. Different `(m, τ)` pairs can produce
//! the same point set; geometry is therefore keyed on exact integer anchor
//! numerators (the anchor is `numerators / k`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    combination_rank, combinations, enumerate_faces, enumerate_multi_indices, small_cube_count, FaceId, MultiIndex,
};
use crate::error::{Error, Result};

/// The homothety `x ↦ offset + scale·x` attached to a multi-index.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeMap {
    pub scale: f64,
    pub offset: Vec<f64>,
}

impl CubeMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.offset.iter().zip(x).map(|(o, xi)| o + self.scale * xi).collect()
    }
}

/// The map `x ↦ (mi + x)/k`. The order `k` is part of the map: the same
/// components describe a different map for a different index set.
pub fn small_cube_map(mi: &MultiIndex, k: usize) -> Result<CubeMap> {
    if k == 0 {
        return Err(Error::InvalidArgument("order k must be at least 1".into()));
    }
    if !mi.within(k - 1) {
        return Err(Error::InvalidArgument(format!("multi-index {mi} not in J(n, {})", k - 1)));
    }
    let kf = k as f64;
    Ok(CubeMap { scale: 1.0 / kf, offset: mi.components().iter().map(|&c| c as f64 / kf).collect() })
}

/// A kth order small p-cube, stored by one generating pair `(m, τ)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SmallCube {
    order: usize,
    multi_index: MultiIndex,
    face: FaceId,
}

impl SmallCube {
    pub fn new(order: usize, multi_index: MultiIndex, face: FaceId) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("order k must be at least 1".into()));
        }
        if multi_index.dim() != face.ambient_dim() {
            return Err(Error::DimensionMismatch { expected: face.ambient_dim(), got: multi_index.dim() });
        }
        if !multi_index.within(order - 1) {
            return Err(Error::InvalidArgument(format!("multi-index {multi_index} not in J(n, {})", order - 1)));
        }
        Ok(Self { order, multi_index, face })
    }

    /// The canonical generator of the small cube with the given directions
    /// and anchor numerators. Pinned axes prefer the larger face value, which
    /// gives the lexicographically smallest multi-index.
    pub fn from_anchor(n: usize, k: usize, directions: &[usize], anchor: &[usize]) -> Result<Self> {
        if anchor.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: anchor.len() });
        }
        let mut mi = vec![0; n];
        let mut values = Vec::new();
        for axis in 0..n {
            let a = anchor[axis];
            if directions.contains(&axis) {
                if a >= k {
                    return Err(Error::InvalidArgument(format!("anchor {a} on free axis {axis} must be below {k}")));
                }
                mi[axis] = a;
            } else {
                if a > k {
                    return Err(Error::InvalidArgument(format!("anchor {a} exceeds {k}")));
                }
                if a >= 1 {
                    mi[axis] = a - 1;
                    values.push(1);
                } else {
                    values.push(0);
                }
            }
        }
        let face = FaceId::new(n, directions.to_vec(), &values)?;
        Self::new(k, MultiIndex::new(mi), face)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ambient_dim(&self) -> usize {
        self.face.ambient_dim()
    }

    pub fn degree(&self) -> usize {
        self.face.degree()
    }

    pub fn multi_index(&self) -> &MultiIndex {
        &self.multi_index
    }

    pub fn face(&self) -> &FaceId {
        &self.face
    }

    pub fn directions(&self) -> &[usize] {
        self.face.directions()
    }

    /// Integer numerators of the anchor: `m_i + y_i`, with `y_i = 0` on free
    /// axes. Each lies in `0..=k`.
    pub fn anchor_numerators(&self) -> Vec<usize> {
        let corner = self.face.base_corner();
        self.multi_index.components().iter().zip(corner).map(|(&m, y)| m + y as usize).collect()
    }

    pub fn anchor(&self) -> Vec<f64> {
        let k = self.order as f64;
        self.anchor_numerators().into_iter().map(|a| a as f64 / k).collect()
    }

    pub fn edge_length(&self) -> f64 {
        1.0 / self.order as f64
    }

    /// p-dimensional volume `(1/k)^p`.
    pub fn volume(&self) -> f64 {
        self.edge_length().powi(self.degree() as i32)
    }

    /// Exact geometric identity: direction set plus anchor numerators.
    pub fn key(&self) -> (Vec<usize>, Vec<usize>) {
        (self.directions().to_vec(), self.anchor_numerators())
    }

    /// Corner numerators (denominator k), in binary-corner order over the
    /// free directions.
    pub fn corner_numerators(&self) -> Vec<Vec<usize>> {
        let anchor = self.anchor_numerators();
        let dirs = self.directions();
        (0..1usize << dirs.len())
            .map(|bits| {
                let mut c = anchor.clone();
                for (j, &d) in dirs.iter().enumerate() {
                    c[d] += (bits >> j) & 1;
                }
                c
            })
            .collect()
    }

    /// Reference point at local parameters `t ∈ [0,1]^p` along the free directions.
    pub fn point_at(&self, t: &[f64]) -> Vec<f64> {
        let mut x = self.anchor();
        let h = self.edge_length();
        for (&d, &ti) in self.directions().iter().zip(t) {
            x[d] += h * ti;
        }
        x
    }
}

/// Every distinct kth order small p-cube of `[0,1]^n`, ordered by
/// `(directions, anchor)`. Duplicates keep the smallest `(m, τ)` generator.
pub fn enumerate_small_cubes(n: usize, p: usize, k: usize) -> Result<Vec<SmallCube>> {
    if k == 0 {
        return Err(Error::InvalidArgument("order k must be at least 1".into()));
    }
    let faces = enumerate_faces(n, p)?;
    let mut seen: BTreeMap<(Vec<usize>, Vec<usize>), SmallCube> = BTreeMap::new();
    for mi in enumerate_multi_indices(n, k - 1)? {
        for face in &faces {
            let sc = SmallCube { order: k, multi_index: mi.clone(), face: face.clone() };
            seen.entry(sc.key()).or_insert(sc);
        }
    }
    Ok(seen.into_values().collect())
}

/// Number of small p-cubes sharing one direction set.
pub fn block_size(n: usize, p: usize, k: usize) -> usize {
    k.pow(p as u32) * (k + 1).pow((n - p) as u32)
}

/// Position of a small cube in the canonical order of
/// [`enumerate_small_cubes`], computed without enumerating.
pub fn small_cube_position(n: usize, k: usize, directions: &[usize], anchor: &[usize]) -> usize {
    let p = directions.len();
    let mut within = 0;
    for (axis, &a) in anchor.iter().enumerate() {
        let radix = if directions.contains(&axis) { k } else { k + 1 };
        within = within * radix + a;
    }
    combination_rank(n, directions) * block_size(n, p, k) + within
}

/// Index ranges of the per-direction-set blocks in canonical order.
pub fn direction_blocks(n: usize, p: usize, k: usize) -> Vec<(Vec<usize>, std::ops::Range<usize>)> {
    let size = block_size(n, p, k);
    combinations(n, p).into_iter().enumerate().map(|(i, dirs)| (dirs, i * size..(i + 1) * size)).collect()
}

/// True iff the `k^n` small n-cubes tile `[0,1]^n`: the volumes sum to one
/// and no two occupy the same grid slot.
pub fn pave_check(n: usize, k: usize) -> bool {
    let Ok(cells) = enumerate_small_cubes(n, n, k) else {
        return false;
    };
    let total: f64 = cells.iter().map(SmallCube::volume).sum();
    let mut slots = vec![false; k.pow(n as u32)];
    for c in &cells {
        let a = c.anchor_numerators();
        if a.iter().any(|&ai| ai >= k) {
            return false;
        }
        let slot = a.iter().fold(0, |acc, &ai| acc * k + ai);
        if std::mem::replace(&mut slots[slot], true) {
            return false;
        }
    }
    cells.len() == k.pow(n as u32) && slots.iter().all(|&s| s) && (total - 1.0).abs() < 1e-12
}

/// Sanity helper used by tests and the CLI: count equals the closed form.
pub fn count_matches_formula(n: usize, p: usize, k: usize) -> Result<bool> {
    Ok(enumerate_small_cubes(n, p, k)?.len() == small_cube_count(n, p, k))
}
