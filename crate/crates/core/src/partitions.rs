//! Partition structures behind the asymptotic variance.
//!
//! The covariance of two order-`k` estimates expands into products of joint
//! cumulants of DFT values. Each term is indexed by a partition of the
//! `2k+2` frequency slots `{λ}` (slots `0..=k`) and `{ω}` (slots `k+1..=2k+1`)
//! into blocks that each touch both sides. A partition with `m` blocks is
//! encoded by two `m×(k+1)` binary matrices `A` and `B`: row `j` of `A`
//! marks the `λ` slots in block `j`, row `j` of `B` the `ω` slots. The block
//! constraint reads `A{λ} = B{ω}`.
//!
//! Schemes are enumerated as unordered set partitions by default, with the
//! blocks listed by their smallest `λ` slot. The ordered variant repeats each
//! scheme once per row permutation, `m!` times in total.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Ordered tuple of positive integers summing to `k+1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Composition {
    pub parts: Vec<usize>,
}

/// Binary `m×(k+1)` matrix with exactly one 1 per column and no empty row.
///
/// Stored column-wise: `row_of[c]` is the row holding column `c`'s one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IncidenceMatrix {
    rows: usize,
    row_of: Vec<usize>,
}

impl IncidenceMatrix {
    pub fn from_row_of(rows: usize, row_of: Vec<usize>) -> Result<Self> {
        let mut counts = vec![0usize; rows];
        for &r in &row_of {
            if r >= rows {
                return Err(Error::Input(format!("row index {r} out of range {rows}")));
            }
            counts[r] += 1;
        }
        if counts.contains(&0) {
            return Err(Error::Input("incidence matrix has an empty row".into()));
        }
        Ok(Self { rows, row_of })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.row_of.len()
    }

    /// Row holding the single 1 of column `c`.
    pub fn row_of(&self, c: usize) -> usize {
        self.row_of[c]
    }

    pub fn entry(&self, r: usize, c: usize) -> u8 {
        u8::from(self.row_of[c] == r)
    }

    /// Columns with a 1 in row `r`, increasing.
    pub fn row_support(&self, r: usize) -> Vec<usize> {
        (0..self.cols()).filter(|&c| self.row_of[c] == r).collect()
    }

    pub fn row_sum(&self, r: usize) -> usize {
        self.row_of.iter().filter(|&&x| x == r).count()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|r| (0..self.cols()).map(|c| self.entry(r, c)).collect())
            .collect()
    }

    fn permute_rows(&self, perm: &[usize]) -> Self {
        // perm[new_row] = old_row
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        Self {
            rows: self.rows,
            row_of: self.row_of.iter().map(|&r| inv[r]).collect(),
        }
    }
}

/// One term of the variance expansion.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionScheme {
    pub a: IncidenceMatrix,
    pub b: IncidenceMatrix,
    pub m: usize,
    /// `r_j = (row sum of A) + (row sum of B) - 1`: the polyspectrum order of block `j`.
    pub block_orders: Vec<usize>,
}

impl PartitionScheme {
    fn from_matrices(a: IncidenceMatrix, b: IncidenceMatrix) -> Self {
        let m = a.rows();
        let block_orders = (0..m).map(|j| a.row_sum(j) + b.row_sum(j) - 1).collect();
        Self {
            a,
            b,
            m,
            block_orders,
        }
    }

    /// Order `k` of the estimates this scheme belongs to.
    pub fn k(&self) -> usize {
        self.a.cols() - 1
    }

    /// Pivot `ω` column for each row: the first column of `B` in that row.
    pub fn pivots(&self) -> Vec<usize> {
        (0..self.m).map(|j| self.b.row_support(j)[0]).collect()
    }

    /// Non-pivot `ω` columns (the free integration coordinates), increasing.
    pub fn free_columns(&self) -> Vec<usize> {
        let piv = self.pivots();
        (0..self.b.cols()).filter(|c| !piv.contains(c)).collect()
    }

    /// Rank of the constraint system after eliminating `λ_{k+1}` and `ω_{k+1}`.
    pub fn constraint_rank(&self) -> usize {
        let k = self.k();
        // coefficient rows over (λ_1..λ_k, ω_1..ω_k)
        let slot_coeffs = |c: usize| -> Vec<i64> {
            if c < k {
                let mut v = vec![0; k];
                v[c] = 1;
                v
            } else {
                vec![-1; k]
            }
        };
        let rows: Vec<Vec<i64>> = (0..self.m)
            .map(|j| {
                let mut row = vec![0i64; 2 * k];
                for c in self.a.row_support(j) {
                    for (i, x) in slot_coeffs(c).into_iter().enumerate() {
                        row[i] += x;
                    }
                }
                for c in self.b.row_support(j) {
                    for (i, x) in slot_coeffs(c).into_iter().enumerate() {
                        row[k + i] -= x;
                    }
                }
                row
            })
            .collect();
        integer_rank(rows)
    }

    /// Blocks as lists of slot numbers (`λ` slots `0..=k`, `ω` slots `k+1..=2k+1`).
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let k1 = self.a.cols();
        (0..self.m)
            .map(|j| {
                let mut blk = self.a.row_support(j);
                blk.extend(self.b.row_support(j).into_iter().map(|c| c + k1));
                blk
            })
            .collect()
    }
}

impl fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_rows = |mat: &IncidenceMatrix| {
            mat.to_rows()
                .iter()
                .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(""))
                .collect::<Vec<_>>()
                .join("/")
        };
        write!(
            f,
            "m={} A={} B={} orders={:?}",
            self.m,
            fmt_rows(&self.a),
            fmt_rows(&self.b),
            self.block_orders
        )
    }
}

/// Whether schemes are counted once per set partition or once per row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SchemeCounting {
    #[default]
    Unordered,
    Ordered,
}

/// All ordered `m`-tuples of positive integers summing to `k+1`.
pub fn compositions(m: usize, k: usize) -> Result<Vec<Composition>> {
    if m == 0 || m > k + 1 {
        return Err(Error::Input(format!("need 1 <= m <= k+1, got m={m}, k={k}")));
    }
    fn rec(rem: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Composition>) {
        if slots == 1 {
            cur.push(rem);
            out.push(Composition { parts: cur.clone() });
            cur.pop();
            return;
        }
        for first in 1..=rem - (slots - 1) {
            cur.push(first);
            rec(rem - first, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k + 1, m, &mut Vec::new(), &mut out);
    Ok(out)
}

/// All incidence matrices whose row `i` carries `l.parts[i]` ones.
pub fn incidence_matrices(l: &Composition, k: usize) -> Result<Vec<IncidenceMatrix>> {
    if l.parts.iter().sum::<usize>() != k + 1 || l.parts.contains(&0) {
        return Err(Error::Input(format!(
            "composition {:?} does not split {} into positive parts",
            l.parts,
            k + 1
        )));
    }
    let m = l.parts.len();
    let mut out = Vec::new();
    let mut remaining = l.parts.clone();
    let mut row_of = Vec::with_capacity(k + 1);
    fn rec(
        col: usize,
        cols: usize,
        remaining: &mut [usize],
        row_of: &mut Vec<usize>,
        out: &mut Vec<IncidenceMatrix>,
    ) {
        if col == cols {
            out.push(IncidenceMatrix {
                rows: remaining.len(),
                row_of: row_of.clone(),
            });
            return;
        }
        for r in 0..remaining.len() {
            if remaining[r] > 0 {
                remaining[r] -= 1;
                row_of.push(r);
                rec(col + 1, cols, remaining, row_of, out);
                row_of.pop();
                remaining[r] += 1;
            }
        }
    }
    rec(0, k + 1, &mut remaining, &mut row_of, &mut out);
    debug_assert!(out.iter().all(|mat| mat.rows() == m));
    Ok(out)
}

/// All set partitions of `{0, .., n-1}`; blocks ordered by smallest element.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    fn rec(i: usize, n: usize, max: usize, labels: &mut [usize], out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            let nb = labels.iter().copied().max().map_or(0, |x| x + 1);
            let mut blocks = vec![Vec::new(); nb];
            for (e, &b) in labels.iter().enumerate() {
                blocks[b].push(e);
            }
            out.push(blocks);
            return;
        }
        let limit = if i == 0 { 0 } else { max + 1 };
        for b in 0..=limit {
            labels[i] = b;
            rec(i + 1, n, max.max(b), labels, out);
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    rec(0, n, 0, &mut labels, &mut out);
    out
}

type SchemeKey = (usize, usize, SchemeCounting);

fn cache() -> &'static Mutex<HashMap<SchemeKey, Arc<Vec<PartitionScheme>>>> {
    static CACHE: OnceLock<Mutex<HashMap<SchemeKey, Arc<Vec<PartitionScheme>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Unordered schemes with `m` blocks for order `k`.
pub fn partition_schemes(k: usize, m: usize) -> Result<Arc<Vec<PartitionScheme>>> {
    partition_schemes_with(k, m, SchemeCounting::Unordered)
}

/// Schemes with `m` blocks under the chosen counting convention (memoized).
pub fn partition_schemes_with(
    k: usize,
    m: usize,
    counting: SchemeCounting,
) -> Result<Arc<Vec<PartitionScheme>>> {
    if k == 0 || m == 0 || m > k + 1 {
        return Err(Error::Input(format!("need k >= 1 and 1 <= m <= k+1, got k={k}, m={m}")));
    }
    if let Some(hit) = cache().lock().expect("scheme cache poisoned").get(&(k, m, counting)) {
        return Ok(hit.clone());
    }
    let built = Arc::new(build_schemes(k, m, counting));
    cache()
        .lock()
        .expect("scheme cache poisoned")
        .insert((k, m, counting), built.clone());
    Ok(built)
}

/// Every scheme for order `k`, all block counts.
pub fn all_schemes(k: usize, counting: SchemeCounting) -> Result<Vec<PartitionScheme>> {
    let mut out = Vec::new();
    for m in 1..=k + 1 {
        out.extend(partition_schemes_with(k, m, counting)?.iter().cloned());
    }
    Ok(out)
}

fn build_schemes(k: usize, m: usize, counting: SchemeCounting) -> Vec<PartitionScheme> {
    let k1 = k + 1;
    let mut out = Vec::new();
    for blocks in set_partitions(2 * k1) {
        if blocks.len() != m {
            continue;
        }
        let mixed = blocks
            .iter()
            .all(|b| b.iter().any(|&s| s < k1) && b.iter().any(|&s| s >= k1));
        if !mixed {
            continue;
        }
        let mut a_row = vec![0; k1];
        let mut b_row = vec![0; k1];
        for (j, blk) in blocks.iter().enumerate() {
            for &s in blk {
                if s < k1 {
                    a_row[s] = j;
                } else {
                    b_row[s - k1] = j;
                }
            }
        }
        let a = IncidenceMatrix { rows: m, row_of: a_row };
        let b = IncidenceMatrix { rows: m, row_of: b_row };
        match counting {
            SchemeCounting::Unordered => out.push(PartitionScheme::from_matrices(a, b)),
            SchemeCounting::Ordered => {
                for perm in permutations(m) {
                    out.push(PartitionScheme::from_matrices(
                        a.permute_rows(&perm),
                        b.permute_rows(&perm),
                    ));
                }
            }
        }
    }
    out
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

/// Rank of an integer matrix by fraction-free elimination.
pub fn integer_rank(mut rows: Vec<Vec<i64>>) -> usize {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && rows[r][col] != 0 {
                let (f, g) = (rows[rank][col], rows[r][col]);
                let pivot = rows[rank].clone();
                for (x, y) in rows[r].iter_mut().zip(pivot) {
                    *x = *x * f - y * g;
                }
                let gcd = rows[r].iter().fold(0i64, |acc, &v| gcd(acc, v.abs()));
                if gcd > 1 {
                    rows[r].iter_mut().for_each(|v| *v /= gcd);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
