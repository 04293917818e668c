//! Sparse matrix substrate: CSR storage, column-block partitioning, and the
//! block grid that encoding and decoding operate on.
//!
//! Matrices are kept canonical at all times: per row, column indices are
//! strictly increasing and no explicit zero is stored. Structural equality of
//! canonical matrices is therefore mathematical equality. Every operation
//! that does arithmetic also returns its multiply-add count so callers can
//! account for compute cost.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum MatrixError {
    #[error("entry ({row}, {col}) outside a {rows}x{cols} matrix")]
    InvalidTriplet {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("non-finite value at ({row}, {col})")]
    NonFiniteValue { row: usize, col: usize },
    #[error("cannot split {cols} columns into {parts} parts")]
    InvalidPartition { cols: usize, parts: usize },
    #[error("{context}: dimension {left} does not match {right}")]
    ShapeMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    #[error("block ({i}, {j}) missing from grid")]
    MissingBlock { i: usize, j: usize },
}

// ---------------------------------------------------------------------------
// SparseMatrix
// ---------------------------------------------------------------------------

/// Compressed sparse row matrix with double-precision values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a canonical matrix from (row, col, value) triplets. Duplicate
    /// positions are summed; entries that are or become zero are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self, MatrixError> {
        for &(r, c, v) in entries {
            if r >= rows || c >= cols {
                return Err(MatrixError::InvalidTriplet {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
            if !v.is_finite() {
                return Err(MatrixError::NonFiniteValue { row: r, col: c });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = entries.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut iter = sorted.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a canonical matrix from unsorted per-row (col, value) lists.
    fn from_row_lists(rows: usize, cols: usize, mut lists: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert_eq!(lists.len(), rows);
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for (r, list) in lists.iter_mut().enumerate() {
            list.sort_by_key(|&(c, _)| c);
            let mut iter = list.iter().peekable();
            while let Some(&(c, mut v)) = iter.next() {
                while let Some(&&(c2, v2)) = iter.peek() {
                    if c2 == c {
                        v += v2;
                        iter.next();
                    } else {
                        break;
                    }
                }
                if v != 0.0 {
                    row_ptr[r + 1] += 1;
                    col_idx.push(c);
                    values.push(v);
                }
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (r, c, v) in self.iter_entries() {
            out[r][c] = v;
        }
        out
    }

    /// True if every stored value is an integer.
    pub fn is_integer_valued(&self) -> bool {
        self.values.iter().all(|v| v.fract() == 0.0)
    }

    /// Splits into `parts` column blocks of equal width `ceil(cols/parts)`;
    /// the last block is implicitly padded with zero columns.
    pub fn split_columns(&self, parts: usize) -> Result<Vec<SparseMatrix>, MatrixError> {
        if parts == 0 || parts > self.cols {
            return Err(MatrixError::InvalidPartition {
                cols: self.cols,
                parts,
            });
        }
        let width = self.cols.div_ceil(parts);
        let mut lists: Vec<Vec<Vec<(usize, f64)>>> =
            vec![vec![Vec::new(); self.rows]; parts];
        for (r, c, v) in self.iter_entries() {
            let part = c / width;
            lists[part][r].push((c - part * width, v));
        }
        Ok(lists
            .into_iter()
            .map(|rows| SparseMatrix::from_row_lists(self.rows, width, rows))
            .collect())
    }

    /// Entry-wise division by a nonzero scalar.
    pub fn divided(&self, divisor: f64) -> SparseMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            *v /= divisor;
        }
        out
    }
}

/// `A^T B` without materializing the transpose: row `k` of `A` pairs with
/// row `k` of `B`, and products accumulate into the output row indexed by
/// `A`'s column. Returns the result and the multiply-add count.
pub fn block_product(
    a: &SparseMatrix,
    b: &SparseMatrix,
) -> Result<(SparseMatrix, u64), MatrixError> {
    if a.rows != b.rows {
        return Err(MatrixError::ShapeMismatch {
            context: "block product shared dimension",
            left: a.rows,
            right: b.rows,
        });
    }
    let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); a.cols];
    let mut flops = 0u64;
    for k in 0..a.rows {
        let (acols, avals) = a.row(k);
        let (bcols, bvals) = b.row(k);
        if acols.is_empty() || bcols.is_empty() {
            continue;
        }
        flops += (acols.len() * bcols.len()) as u64;
        for (pos, &ci) in acols.iter().enumerate() {
            let av = avals[pos];
            let list = &mut lists[ci];
            for (qos, &cj) in bcols.iter().enumerate() {
                list.push((cj, av * bvals[qos]));
            }
        }
    }
    Ok((
        SparseMatrix::from_row_lists(a.cols, b.cols, lists),
        flops,
    ))
}

/// `acc + coeff * x`, canonicalized. The multiply-add count is `nnz(x)`.
pub fn scaled_accumulate(
    acc: &SparseMatrix,
    coeff: f64,
    x: &SparseMatrix,
) -> Result<(SparseMatrix, u64), MatrixError> {
    if acc.rows != x.rows || acc.cols != x.cols {
        return Err(MatrixError::ShapeMismatch {
            context: "accumulate shapes",
            left: acc.rows * acc.cols,
            right: x.rows * x.cols,
        });
    }
    let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); acc.rows];
    for r in 0..acc.rows {
        let (acols, avals) = acc.row(r);
        let (xcols, xvals) = x.row(r);
        let list = &mut lists[r];
        let (mut i, mut j) = (0, 0);
        while i < acols.len() || j < xcols.len() {
            let next_a = acols.get(i).copied().unwrap_or(usize::MAX);
            let next_x = xcols.get(j).copied().unwrap_or(usize::MAX);
            if next_a < next_x {
                list.push((next_a, avals[i]));
                i += 1;
            } else if next_x < next_a {
                list.push((next_x, coeff * xvals[j]));
                j += 1;
            } else {
                list.push((next_a, avals[i] + coeff * xvals[j]));
                i += 1;
                j += 1;
            }
        }
    }
    Ok((
        SparseMatrix::from_row_lists(acc.rows, acc.cols, lists),
        x.nnz() as u64,
    ))
}

// ---------------------------------------------------------------------------
// BlockGrid
// ---------------------------------------------------------------------------

/// The `m x n` grid of product blocks `C_ij = A_i^T B_j`. Blocks are indexed
/// flat in row-major order: block `(i, j)` lives at `i * n + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid {
    m: usize,
    n: usize,
    block_rows: usize,
    block_cols: usize,
    blocks: Vec<Option<SparseMatrix>>,
}

impl BlockGrid {
    pub fn new(m: usize, n: usize, block_rows: usize, block_cols: usize) -> Self {
        BlockGrid {
            m,
            n,
            block_rows,
            block_cols,
            blocks: vec![None; m * n],
        }
    }

    /// Computes the full grid from the un-split inputs, returning the total
    /// block-product multiply-add count alongside.
    pub fn from_inputs(
        a: &SparseMatrix,
        b: &SparseMatrix,
        m: usize,
        n: usize,
    ) -> Result<(Self, u64), MatrixError> {
        if a.rows() != b.rows() {
            return Err(MatrixError::ShapeMismatch {
                context: "input shared dimension",
                left: a.rows(),
                right: b.rows(),
            });
        }
        let a_parts = a.split_columns(m)?;
        let b_parts = b.split_columns(n)?;
        let mut grid = BlockGrid::new(m, n, a_parts[0].cols(), b_parts[0].cols());
        let mut flops = 0u64;
        for i in 0..m {
            for j in 0..n {
                let (block, f) = block_product(&a_parts[i], &b_parts[j])?;
                flops += f;
                grid.blocks[i * n + j] = Some(block);
            }
        }
        Ok((grid, flops))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_rows(&self) -> usize {
        self.block_rows
    }

    pub fn block_cols(&self) -> usize {
        self.block_cols
    }

    pub fn flat(&self, i: usize, j: usize) -> usize {
        assert!(i < self.m && j < self.n);
        i * self.n + j
    }

    pub fn set(&mut self, i: usize, j: usize, block: SparseMatrix) -> Result<(), MatrixError> {
        let flat = self.flat(i, j);
        self.set_flat(flat, block)
    }

    pub fn set_flat(&mut self, flat: usize, block: SparseMatrix) -> Result<(), MatrixError> {
        if block.rows() != self.block_rows || block.cols() != self.block_cols {
            return Err(MatrixError::ShapeMismatch {
                context: "block shape",
                left: block.rows() * block.cols(),
                right: self.block_rows * self.block_cols,
            });
        }
        self.blocks[flat] = Some(block);
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&SparseMatrix> {
        self.blocks[i * self.n + j].as_ref()
    }

    pub fn get_flat(&self, flat: usize) -> Option<&SparseMatrix> {
        self.blocks[flat].as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.blocks.iter().all(Option::is_some)
    }

    /// Reassembles the full product, stripping zero padding down to the
    /// requested output shape.
    pub fn assemble(&self, out_rows: usize, out_cols: usize) -> Result<SparseMatrix, MatrixError> {
        let mut triplets = Vec::new();
        for i in 0..self.m {
            for j in 0..self.n {
                let block = self.blocks[i * self.n + j]
                    .as_ref()
                    .ok_or(MatrixError::MissingBlock { i, j })?;
                for (r, c, v) in block.iter_entries() {
                    triplets.push((i * self.block_rows + r, j * self.block_cols + c, v));
                }
            }
        }
        SparseMatrix::from_triplets(out_rows, out_cols, &triplets)
    }
}

// ---------------------------------------------------------------------------
// RationalMatrix
// ---------------------------------------------------------------------------

/// Sparse matrix with exact rational entries. The polynomial-code path runs
/// on these: its Vandermonde weights overflow the exact-integer range of
/// f64, so carrying doubles would corrupt low-order blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), BigRational>,
}

impl RationalMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    /// Exact conversion; every f64 is a rational.
    pub fn from_sparse(m: &SparseMatrix) -> Self {
        let entries = m
            .iter_entries()
            .map(|(r, c, v)| ((r, c), BigRational::from_float(v).expect("finite value")))
            .collect();
        RationalMatrix {
            rows: m.rows(),
            cols: m.cols(),
            entries,
        }
    }

    /// Rounds each entry to the nearest f64.
    pub fn to_sparse(&self) -> SparseMatrix {
        let triplets: Vec<(usize, usize, f64)> = self
            .entries
            .iter()
            .map(|(&(r, c), v)| (r, c, rational_to_f64(v)))
            .collect();
        SparseMatrix::from_triplets(self.rows, self.cols, &triplets)
            .expect("entries are in bounds and finite")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &BigRational)> + '_ {
        self.entries.iter().map(|(&(r, c), v)| (r, c, v))
    }

    /// `self += coeff * other`, exactly. Returns the multiply-add count.
    pub fn add_scaled(
        &mut self,
        coeff: &BigRational,
        other: &RationalMatrix,
    ) -> Result<u64, MatrixError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatrixError::ShapeMismatch {
                context: "rational accumulate shapes",
                left: self.rows * self.cols,
                right: other.rows * other.cols,
            });
        }
        for (&pos, v) in &other.entries {
            let term = coeff * v;
            match self.entries.entry(pos) {
                std::collections::btree_map::Entry::Vacant(slot) => {
                    if !term.is_zero() {
                        slot.insert(term);
                    }
                }
                std::collections::btree_map::Entry::Occupied(mut slot) => {
                    *slot.get_mut() += term;
                    if slot.get().is_zero() {
                        slot.remove();
                    }
                }
            }
        }
        Ok(other.entries.len() as u64)
    }

    /// Exact `A^T B`, same pairing as [`block_product`].
    pub fn transpose_product(
        a: &RationalMatrix,
        b: &RationalMatrix,
    ) -> Result<(RationalMatrix, u64), MatrixError> {
        if a.rows != b.rows {
            return Err(MatrixError::ShapeMismatch {
                context: "rational product shared dimension",
                left: a.rows,
                right: b.rows,
            });
        }
        let mut a_rows: Vec<Vec<(usize, &BigRational)>> = vec![Vec::new(); a.rows];
        for (&(r, c), v) in &a.entries {
            a_rows[r].push((c, v));
        }
        let mut b_rows: Vec<Vec<(usize, &BigRational)>> = vec![Vec::new(); b.rows];
        for (&(r, c), v) in &b.entries {
            b_rows[r].push((c, v));
        }
        let mut out = RationalMatrix::zero(a.cols, b.cols);
        let mut flops = 0u64;
        for k in 0..a.rows {
            flops += (a_rows[k].len() * b_rows[k].len()) as u64;
            for &(ci, av) in &a_rows[k] {
                for &(cj, bv) in &b_rows[k] {
                    let term = av * bv;
                    match out.entries.entry((ci, cj)) {
                        std::collections::btree_map::Entry::Vacant(slot) => {
                            if !term.is_zero() {
                                slot.insert(term);
                            }
                        }
                        std::collections::btree_map::Entry::Occupied(mut slot) => {
                            *slot.get_mut() += term;
                            if slot.get().is_zero() {
                                slot.remove();
                            }
                        }
                    }
                }
            }
        }
        Ok((out, flops))
    }
}

/// Nearest-f64 conversion that survives numerators and denominators too wide
/// for `ToPrimitive` to handle directly.
pub fn rational_to_f64(v: &BigRational) -> f64 {
    if let Some(x) = v.to_f64() {
        return x;
    }
    let digits = 30;
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = (v * BigRational::from_integer(scale.clone())).round();
    match scaled.numer().to_f64() {
        Some(x) => x / 1e30,
        None => {
            if v.is_negative() {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Exact `sum_k coeff_k * mat_k` over f64 matrices with rational weights.
///
/// Equivalent to [`RationalMatrix::add_scaled`] over exact views of the
/// inputs, but clears the coefficients to a common denominator first. Every
/// f64 entry is dyadic, so each running sum stays an integer over a power of
/// two and never needs a gcd; the one full rational reduction per output
/// entry happens at the end. On the matrix sizes the rooting path combines,
/// that ordering is roughly an order of magnitude cheaper than reducing
/// after every multiply-add.
///
/// Terms with a zero coefficient contribute nothing and are not charged.
/// Returns the sum and the multiply-add count, one per contributing entry.
pub fn rational_combination(
    terms: &[(&BigRational, &SparseMatrix)],
    rows: usize,
    cols: usize,
) -> Result<(RationalMatrix, u64), MatrixError> {
    let mut denom = BigInt::one();
    for (coeff, mat) in terms {
        if mat.rows != rows || mat.cols != cols {
            return Err(MatrixError::ShapeMismatch {
                context: "rational combination shapes",
                left: rows * cols,
                right: mat.rows * mat.cols,
            });
        }
        if !coeff.is_zero() {
            denom = denom.lcm(coeff.denom());
        }
    }

    // Each running entry is `num / 2^shift`, all scaled up by `denom`.
    let mut acc: BTreeMap<(usize, usize), (BigInt, u32)> = BTreeMap::new();
    let mut ops = 0u64;
    for (coeff, mat) in terms {
        if coeff.is_zero() {
            continue;
        }
        let scaled = coeff.numer() * (&denom / coeff.denom());
        for (r, c, v) in mat.iter_entries() {
            let (mant, exp, sign) = Float::integer_decode(v);
            if mant == 0 {
                continue;
            }
            let mut term = &scaled * BigInt::from(mant);
            if sign < 0 {
                term = -term;
            }
            let (term, shift) = if exp >= 0 {
                (term << exp as u32, 0u32)
            } else {
                (term, (-exp) as u32)
            };
            match acc.entry((r, c)) {
                std::collections::btree_map::Entry::Vacant(slot) => {
                    slot.insert((term, shift));
                }
                std::collections::btree_map::Entry::Occupied(mut slot) => {
                    let (num, s) = slot.get_mut();
                    if shift > *s {
                        *num = &*num << (shift - *s);
                        *s = shift;
                    }
                    *num += term << (*s - shift);
                }
            }
        }
        ops += mat.nnz() as u64;
    }

    let mut out = RationalMatrix::zero(rows, cols);
    for ((r, c), (num, shift)) in acc {
        if num.is_zero() {
            continue;
        }
        out.entries
            .insert((r, c), BigRational::new(num, &denom << shift));
    }
    Ok((out, ops))
}

// ---------------------------------------------------------------------------
