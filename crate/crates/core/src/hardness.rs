//! Constraint matrices of the unregularized problem and a brute-force total
//! unimodularity checker.
//!
//! `L_{n,1} = I_n` and `L_{n,t} = [1_n ⊗ L_{n,t-1}, I_n ⊗ 1_{n^(t-1)}]`. Row
//! `r` of `L_{n,t}` is the plan entry with row-major multi-index
//! `(i_1, .., i_t)`; column block `b` (n columns each) indicates `i_(t-b)`.

use std::fmt;

use serde::Serialize;

use crate::error::{MotError, Result};

/// Cap on matrix entries built by this module.
pub const DEFAULT_MATRIX_CAP: usize = 10_000_000;

/// Default number of submatrices [`tu_check`] may examine.
pub const DEFAULT_TU_BUDGET: u64 = 50_000_000;

/// Largest order whose determinant is guaranteed exact in `i128`.
pub const MAX_EXACT_ORDER: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(MotError::Shape("ragged integer matrix".into()));
        }
        Ok(IntMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Keep the listed columns (0-based), in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (jj, &j) in cols.iter().enumerate() {
                out.set(i, jj, self.get(i, j));
            }
        }
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        IntMatrix {
            rows: rows.len(),
            cols: self.cols,
            data: rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
        }
    }

    pub fn is_ternary(&self) -> bool {
        self.data.iter().all(|v| (-1..=1).contains(v))
    }

    /// Rank over the rationals, by fraction-free elimination.
    pub fn rank(&self) -> usize {
        let mut a: Vec<Vec<i128>> = (0..self.rows).map(|i| self.row(i).iter().map(|&v| v as i128).collect()).collect();
        let mut rank = 0;
        for c in 0..self.cols {
            let Some(p) = (rank..self.rows).find(|&r| a[r][c] != 0) else {
                continue;
            };
            a.swap(rank, p);
            for r in rank + 1..self.rows {
                if a[r][c] != 0 {
                    let (f, g) = (a[r][c], a[rank][c]);
                    for j in 0..self.cols {
                        a[r][j] = a[r][j] * g - a[rank][j] * f;
                    }
                    let h = a[r].iter().fold(0i128, |h, &v| gcd(h, v));
                    if h > 1 {
                        a[r].iter_mut().for_each(|v| *v /= h);
                    }
                }
            }
            rank += 1;
        }
        rank
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:>2}")).collect();
            writeln!(f, "[{}]", line.join(" "))?;
        }
        Ok(())
    }
}

fn check_cap(entries: Option<usize>, cap: usize) -> Result<usize> {
    match entries {
        Some(e) if e <= cap => Ok(e),
        other => Err(MotError::SizeCap {
            what: "constraint matrix entries",
            requested: other.map_or(u128::MAX, |e| e as u128),
            cap: cap as u128,
        }),
    }
}

/// `L_{n,t}`, shape `n^t × n t`.
pub fn build_l(n: usize, t: usize) -> Result<IntMatrix> {
    if n == 0 || t == 0 {
        return Err(MotError::Domain("build_l needs n >= 1 and t >= 1".into()));
    }
    let rows = u32::try_from(t).ok().and_then(|t| n.checked_pow(t));
    let rows = check_cap(rows.and_then(|r| r.checked_mul(n * t)), DEFAULT_MATRIX_CAP)? / (n * t);
    let mut l = IntMatrix::identity(n);
    for _ in 1..t {
        let prev = l;
        let block = prev.rows;
        let mut next = IntMatrix::zeros(n * block, prev.cols + n);
        for i in 0..n {
            for r in 0..block {
                let row = i * block + r;
                for j in 0..prev.cols {
                    next.set(row, j, prev.get(r, j));
                }
                next.set(row, prev.cols + i, 1);
            }
        }
        l = next;
    }
    debug_assert_eq!(l.rows, rows);
    Ok(l)
}

/// Column block of `L_{n,m}` kept whole by [`build_primal_constraints`].
pub const DEFAULT_FULL_BLOCK: usize = 1;

/// `L_{n,m}ᵀ` with `m - 1` redundant rows removed, shape `(m n - m + 1) × n^m`.
///
/// One column block of `L_{n,m}` is kept whole and listed first; every other
/// block contributes its first `n - 1` columns, in block order. With the
/// default block this is the arrangement printed for `(n, m) = (2, 3)`;
/// [`build_primal_constraints_with`] with block 0 instead strips columns
/// `2n, 3n, .., mn` in place.
pub fn build_primal_constraints(n: usize, m: usize) -> Result<IntMatrix> {
    build_primal_constraints_with(n, m, DEFAULT_FULL_BLOCK.min(m.saturating_sub(1)))
}

pub fn build_primal_constraints_with(n: usize, m: usize, full_block: usize) -> Result<IntMatrix> {
    if full_block >= m.max(1) {
        return Err(MotError::AxisOutOfRange { axis: full_block, order: m });
    }
    let l = build_l(n, m)?;
    let mut cols: Vec<usize> = (full_block * n..(full_block + 1) * n).collect();
    for b in (0..m).filter(|&b| b != full_block) {
        cols.extend(b * n..b * n + n - 1);
    }
    Ok(l.select_columns(&cols).transpose())
}

/// Determinant by Bareiss fraction-free elimination.
pub fn det_bareiss(a: &[Vec<i128>]) -> i128 {
    let k = a.len();
    if k == 0 {
        return 1;
    }
    let mut m: Vec<Vec<i128>> = a.to_vec();
    let mut sign = 1;
    let mut prev = 1i128;
    for p in 0..k - 1 {
        if m[p][p] == 0 {
            match (p + 1..k).find(|&r| m[r][p] != 0) {
                Some(r) => {
                    m.swap(p, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in p + 1..k {
            for j in p + 1..k {
                m[i][j] = (m[i][j] * m[p][p] - m[i][p] * m[p][j]) / prev;
            }
        }
        prev = m[p][p];
    }
    sign * m[k - 1][k - 1]
}

/// Square submatrix with `|det| >= 2`; indices are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TuWitness {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub det: i128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum TuVerdict {
    /// Every square submatrix up to `order` has determinant in {-1, 0, 1}.
    TuUpToOrder { order: usize, checked: u64 },
    Witness(TuWitness),
    /// Budget exhausted; no witness among the `checked` submatrices examined,
    /// which cover all orders above `incomplete_order` completely.
    Partial { incomplete_order: usize, checked: u64 },
}

impl TuVerdict {
    pub fn witness(&self) -> Option<&TuWitness> {
        match self {
            TuVerdict::Witness(w) => Some(w),
            _ => None,
        }
    }
}

/// Advance a lexicographic k-combination of `0..n`; false when exhausted.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Search square submatrices for one with `|det| >= 2`.
///
/// Orders are scanned from `min(max_order, rows, cols)` down to 1; within an
/// order, row sets then column sets are taken in lexicographic order, so the
/// reported witness is the first in that sequence.
pub fn tu_check(m: &IntMatrix, max_order: Option<usize>) -> Result<TuVerdict> {
    tu_check_with_budget(m, max_order, DEFAULT_TU_BUDGET)
}

pub fn tu_check_with_budget(m: &IntMatrix, max_order: Option<usize>, budget: u64) -> Result<TuVerdict> {
    if !m.is_ternary() {
        return Err(MotError::Domain("tu_check expects entries in {-1, 0, 1}".into()));
    }
    let top = max_order.unwrap_or(usize::MAX).min(m.rows).min(m.cols);
    if top > MAX_EXACT_ORDER {
        return Err(MotError::SizeCap {
            what: "submatrix order",
            requested: top as u128,
            cap: MAX_EXACT_ORDER as u128,
        });
    }
    let mut checked = 0u64;
    for k in (1..=top).rev() {
        let mut rows: Vec<usize> = (0..k).collect();
        loop {
            let mut cols: Vec<usize> = (0..k).collect();
            loop {
                if checked >= budget {
                    return Ok(TuVerdict::Partial { incomplete_order: k, checked });
                }
                checked += 1;
                let sub: Vec<Vec<i128>> = rows
                    .iter()
                    .map(|&i| cols.iter().map(|&j| m.get(i, j) as i128).collect())
                    .collect();
                let det = det_bareiss(&sub);
                if det.abs() >= 2 {
                    return Ok(TuVerdict::Witness(TuWitness {
                        rows: rows.iter().map(|i| i + 1).collect(),
                        cols: cols.iter().map(|j| j + 1).collect(),
                        det,
                    }));
                }
                if !next_combination(&mut cols, m.cols) {
                    break;
                }
            }
            if !next_combination(&mut rows, m.rows) {
                break;
            }
        }
    }
    Ok(TuVerdict::TuUpToOrder { order: top, checked })
}

/// Row 2-colouring certifying total unimodularity by the two-nonzeros rule:
/// entries in {-1, 0, 1}, at most two nonzeros per column, and two nonzeros
/// of a column lie in the same set exactly when their signs differ.
/// Returns the set index of every row, or `None` if no such colouring exists.
pub fn tu_partition(m: &IntMatrix) -> Option<Vec<u8>> {
    if !m.is_ternary() {
        return None;
    }
    // union-find with parity relative to the parent
    let mut parent: Vec<usize> = (0..m.rows).collect();
    let mut parity = vec![0u8; m.rows];
    fn find(parent: &mut [usize], parity: &mut [u8], x: usize) -> (usize, u8) {
        if parent[x] == x {
            return (x, 0);
        }
        let (root, p) = find(parent, parity, parent[x]);
        parity[x] ^= p;
        parent[x] = root;
        (root, parity[x])
    }
    for j in 0..m.cols {
        let nz: Vec<usize> = (0..m.rows).filter(|&i| m.get(i, j) != 0).collect();
        match nz.len() {
            0 | 1 => {}
            2 => {
                let want = u8::from(m.get(nz[0], j) == m.get(nz[1], j));
                let (ra, pa) = find(&mut parent, &mut parity, nz[0]);
                let (rb, pb) = find(&mut parent, &mut parity, nz[1]);
                if ra == rb {
                    if pa ^ pb != want {
                        return None;
                    }
                } else {
                    parent[ra] = rb;
                    parity[ra] = pa ^ pb ^ want;
                }
            }
            _ => return None,
        }
    }
    Some((0..m.rows).map(|i| find(&mut parent, &mut parity, i).1).collect())
}

/// True when [`tu_partition`] finds a certificate; true implies TU.
pub fn sufficient_tu(m: &IntMatrix) -> bool {
    tu_partition(m).is_some()
}

/// Node-arc incidence matrix: arc `(u, v)` has `+1` at `u` and `-1` at `v`.
pub fn incidence_matrix(nodes: usize, arcs: &[(usize, usize)]) -> Result<IntMatrix> {
    let mut m = IntMatrix::zeros(nodes, arcs.len());
    for (j, &(u, v)) in arcs.iter().enumerate() {
        if u >= nodes || v >= nodes || u == v {
            return Err(MotError::Domain(format!("bad arc ({u}, {v})")));
        }
        m.set(u, j, 1);
        m.set(v, j, -1);
    }
    Ok(m)
}
