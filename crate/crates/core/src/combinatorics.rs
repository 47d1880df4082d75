//! Multi-indices and faces of the unit n-cube.
//!
//! Coordinates are 0-based throughout. All enumerations are lexicographic so
//! that matrix layouts built on top of them are reproducible.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An n-tuple of nonnegative integers.
///
/// Used both for small-cube translations (`J(n, k-1)`) and for polynomial
/// exponent patterns.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(components: Vec<usize>) -> Self {
        Self(components)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }

    /// Membership in `J(n, bound)`: every component is at most `bound`.
    pub fn within(&self, bound: usize) -> bool {
        self.0.iter().all(|&c| c <= bound)
    }
}

impl std::ops::Index<usize> for MultiIndex {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices with `n` components in `0..=bound`, lexicographic.
pub fn enumerate_multi_indices(n: usize, bound: usize) -> Result<Vec<MultiIndex>> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let base = bound + 1;
    let total = base.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0usize; n];
    for _ in 0..total {
        out.push(MultiIndex(cur.clone()));
        // odometer, last component fastest
        for j in (0..n).rev() {
            cur[j] += 1;
            if cur[j] < base {
                break;
            }
            cur[j] = 0;
        }
    }
    Ok(out)
}

/// A p-face of the unit n-cube.
///
/// `directions` are the coordinates the face is parallel to (strictly
/// increasing); every other coordinate is pinned to 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaceId {
    n: usize,
    directions: Vec<usize>,
    /// `(axis, value)` pairs for the pinned coordinates, increasing axis.
    fixed: Vec<(usize, u8)>,
}

impl FaceId {
    /// Builds a face from its direction list and the values of the remaining
    /// coordinates, given in increasing axis order.
    pub fn new(n: usize, directions: Vec<usize>, fixed_values: &[u8]) -> Result<Self> {
        if directions.windows(2).any(|w| w[0] >= w[1]) || directions.iter().any(|&d| d >= n) {
            return Err(Error::InvalidArgument(format!(
                "face directions {directions:?} must be strictly increasing and below {n}"
            )));
        }
        let fixed_axes: Vec<usize> = (0..n).filter(|a| !directions.contains(a)).collect();
        if fixed_axes.len() != fixed_values.len() || fixed_values.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument(format!(
                "expected {} fixed values in {{0,1}}, got {fixed_values:?}",
                fixed_axes.len()
            )));
        }
        let fixed = fixed_axes.into_iter().zip(fixed_values.iter().copied()).collect();
        Ok(Self { n, directions, fixed })
    }

    /// The top cell `[0,1]^n`.
    pub fn whole(n: usize) -> Self {
        Self { n, directions: (0..n).collect(), fixed: Vec::new() }
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[usize] {
        &self.directions
    }

    pub fn fixed(&self) -> &[(usize, u8)] {
        &self.fixed
    }

    pub fn is_free(&self, axis: usize) -> bool {
        self.directions.binary_search(&axis).is_ok()
    }

    /// Value of a pinned coordinate, `None` on free axes.
    pub fn fixed_value(&self, axis: usize) -> Option<u8> {
        self.fixed.iter().find(|(a, _)| *a == axis).map(|&(_, v)| v)
    }

    /// The corner of the face with all free coordinates set to 0.
    pub fn base_corner(&self) -> Vec<u8> {
        let mut c = vec![0u8; self.n];
        for &(a, v) in &self.fixed {
            c[a] = v;
        }
        c
    }

    fn fixed_bits(&self) -> impl Iterator<Item = u8> + '_ {
        self.fixed.iter().map(|&(_, v)| v)
    }
}

impl PartialOrd for FaceId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FaceId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| self.directions.cmp(&other.directions))
            .then_with(|| self.fixed_bits().cmp(other.fixed_bits()))
    }
}

/// Increasing `p`-subsets of `0..n`, lexicographic.
pub fn combinations(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if p > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..p).collect();
    loop {
        out.push(cur.clone());
        let mut i = p;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - p + i {
                cur[i] += 1;
                for j in i + 1..p {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Position of an increasing direction list among `combinations(n, p)`.
pub fn combination_rank(n: usize, dirs: &[usize]) -> usize {
    // number of p-subsets lexicographically before `dirs`
    let p = dirs.len();
    let mut rank = 0;
    let mut prev = 0;
    for (j, &d) in dirs.iter().enumerate() {
        for skipped in prev..d {
            rank += binomial(n - skipped - 1, p - j - 1);
        }
        prev = d + 1;
    }
    rank
}

/// All p-faces of `[0,1]^n` in canonical order.
pub fn enumerate_faces(n: usize, p: usize) -> Result<Vec<FaceId>> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if p > n {
        return Err(Error::InvalidArgument(format!("face degree {p} exceeds dimension {n}")));
    }
    let mut out = Vec::with_capacity(binomial(n, p) << (n - p));
    for dirs in combinations(n, p) {
        let fixed_count = n - p;
        for bits in 0..(1usize << fixed_count) {
            // first pinned axis is the most significant bit
            let values: Vec<u8> = (0..fixed_count).map(|j| ((bits >> (fixed_count - 1 - j)) & 1) as u8).collect();
            out.push(FaceId::new(n, dirs.clone(), &values)?);
        }
    }
    Ok(out)
}

/// Binomial coefficient, exact in `u128` for the ranges used here.
pub fn binomial(n: usize, r: usize) -> usize {
    binomial_u128(n as u64, r as u64) as usize
}

pub(crate) fn binomial_u128(n: u64, r: u64) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `C(n,p) k^p (k+1)^(n-p)`: the number of kth order small p-cubes of the
/// unit n-cube, equal to the dimension of the cubical form space.
pub fn small_cube_count(n: usize, p: usize, k: usize) -> usize {
    if p > n {
        return 0;
    }
    binomial(n, p) * k.pow(p as u32) * (k + 1).pow((n - p) as u32)
}

/// Sign of the permutation that sorts `seq` (distinct entries), together
/// with the sorted sequence. Returns `None` on a repeated entry.
pub fn sort_sign(seq: &[usize]) -> Option<(i32, Vec<usize>)> {
    let mut v = seq.to_vec();
    let mut sign = 1;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((sign, v))
}
