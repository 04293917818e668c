//! Hybrid decoding: peel degree-1 rows while they last, and when the ripple
//! dries up, recover one block by exact elimination (a "rooting" step) to
//! restart it.
//!
//! All coefficient arithmetic (rank tracking, rooting coefficients) is exact
//! rational over big integers, so decodability decisions are never perturbed
//! by floating error. Block data stays in f64 on the peeling path, where
//! every update is an integer-weighted subtraction; rooting combinations
//! apply their rational coefficients through exact accumulation so that
//! integer-valued products decode bit-exactly.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::encode::{CodedTask, TaskOutput, WeightRow};
use crate::matrix::{
    rational_combination, scaled_accumulate, BlockGrid, MatrixError, RationalMatrix, SparseMatrix,
};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum DecodeError {
    #[error("coefficient rows have rank {rank}, need {needed}")]
    RankDeficient { rank: usize, needed: usize },
    #[error("block {col} is not recoverable from the given rows")]
    BlockNotRecoverable { col: usize },
    #[error("singular system: {context}")]
    SingularSystem { context: &'static str },
    #[error("worker {worker_id} has no stored result")]
    MissingResult { worker_id: usize },
    #[error("worker {worker_id} carries a {got} result, expected {expected}")]
    WrongOutputKind {
        worker_id: usize,
        expected: &'static str,
        got: &'static str,
    },
    #[error("task of worker {worker_id} is malformed: {detail}")]
    InvalidTask { worker_id: usize, detail: String },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

// ---------------------------------------------------------------------------
// Exact echelon tracking
// ---------------------------------------------------------------------------

/// Reduced row echelon form over exact rationals, maintained incrementally.
/// Each pivot row also carries the combination of inserted rows that
/// produced it, which is what rooting needs.
#[derive(Debug, Clone)]
pub struct EchelonState {
    width: usize,
    inserted: usize,
    /// pivot column -> (reduced row, combination over inserted row indices)
    pivots: BTreeMap<usize, (Vec<BigRational>, BTreeMap<usize, BigRational>)>,
}

impl EchelonState {
    pub fn new(width: usize) -> Self {
        EchelonState {
            width,
            inserted: 0,
            pivots: BTreeMap::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn inserted(&self) -> usize {
        self.inserted
    }

    pub fn is_full_rank(&self) -> bool {
        self.pivots.len() == self.width
    }

    /// Inserts a sparse integer row, reducing it against the current pivots
    /// and the current pivots against it (Gauss-Jordan). Returns whether the
    /// rank grew.
    pub fn insert(&mut self, row: &[(usize, BigInt)]) -> bool {
        let row_index = self.inserted;
        self.inserted += 1;

        let mut dense = vec![BigRational::zero(); self.width];
        for (col, w) in row {
            assert!(*col < self.width, "row column out of range");
            dense[*col] = BigRational::from_integer(w.clone());
        }
        let mut combo: BTreeMap<usize, BigRational> = BTreeMap::new();
        combo.insert(row_index, BigRational::from_integer(BigInt::from(1)));

        // Reduce the incoming row.
        for (&pcol, (prow, pcombo)) in &self.pivots {
            if dense[pcol].is_zero() {
                continue;
            }
            let factor = dense[pcol].clone();
            for c in 0..self.width {
                if !prow[c].is_zero() {
                    let delta = &factor * &prow[c];
                    dense[c] -= delta;
                }
            }
            for (ri, coeff) in pcombo {
                let delta = &factor * coeff;
                let slot = combo.entry(*ri).or_insert_with(BigRational::zero);
                *slot -= delta;
                if slot.is_zero() {
                    combo.remove(ri);
                }
            }
        }

        let Some(lead) = dense.iter().position(|v| !v.is_zero()) else {
            return false;
        };

        // Normalize to a unit pivot.
        let inv = dense[lead].recip();
        for v in &mut dense {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        for coeff in combo.values_mut() {
            *coeff *= &inv;
        }

        // Eliminate the new pivot column from existing rows.
        for (_, (prow, pcombo)) in self.pivots.iter_mut() {
            if prow[lead].is_zero() {
                continue;
            }
            let factor = prow[lead].clone();
            for c in 0..self.width {
                if !dense[c].is_zero() {
                    let delta = &factor * &dense[c];
                    prow[c] -= delta;
                }
            }
            for (ri, coeff) in &combo {
                let delta = &factor * coeff;
                let slot = pcombo.entry(*ri).or_insert_with(BigRational::zero);
                *slot -= delta;
                if slot.is_zero() {
                    pcombo.remove(ri);
                }
            }
        }

        self.pivots.insert(lead, (dense, combo));
        true
    }

    /// The combination `u` with `sum_k u_k row_k = e_col`, if `e_col` lies in
    /// the row span. `u` is dense over the rows inserted so far.
    pub fn unit_combination(&self, col: usize) -> Option<Vec<BigRational>> {
        let (prow, pcombo) = self.pivots.get(&col)?;
        let is_unit = prow
            .iter()
            .enumerate()
            .all(|(c, v)| if c == col { v.is_one() } else { v.is_zero() });
        if !is_unit {
            return None;
        }
        let mut u = vec![BigRational::zero(); self.inserted];
        for (&ri, coeff) in pcombo {
            u[ri] = coeff.clone();
        }
        Some(u)
    }
}

/// Solves `sum_k u_k M_k = e_col` over the given rows, exactly.
pub fn rooting_combination(
    rows: &[WeightRow],
    width: usize,
    col: usize,
) -> Result<Vec<BigRational>, DecodeError> {
    let mut state = EchelonState::new(width);
    for row in rows {
        state.insert(row);
    }
    state
        .unit_combination(col)
        .ok_or(DecodeError::BlockNotRecoverable { col })
}

// ---------------------------------------------------------------------------
// Peeling plan
// ---------------------------------------------------------------------------

/// How the decoder picks the block to root when the ripple is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootingRule {
    /// Root the unresolved block held by the most rows; ties to the lowest
    /// block index. Deterministic, and it maximizes the subtractions that
    /// can restart the ripple.
    MaxIncidence,
    /// Uniform choice among unresolved blocks from a dedicated seeded
    /// generator.
    UniformRandom { seed: u64 },
}

impl Default for RootingRule {
    fn default() -> Self {
        RootingRule::MaxIncidence
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStep {
    /// Row `row` (a position into the task slice) has degree one: divide it
    /// by its weight to recover block `col`.
    Peel { row: usize, col: usize },
    /// Recover block `col` by exact elimination over the live rows.
    Root { col: usize },
}

/// Runs the control skeleton of the hybrid decoder on supports alone.
/// `ids` breaks ripple ties (lowest id first) and must align with
/// `supports`. The plan always completes: rooting can recover any block.
pub fn peeling_plan(
    supports: &[Vec<usize>],
    ids: &[usize],
    width: usize,
    rule: RootingRule,
) -> Vec<PlanStep> {
    assert_eq!(supports.len(), ids.len());
    let mut remaining: Vec<BTreeSet<usize>> = supports
        .iter()
        .map(|s| s.iter().copied().collect())
        .collect();
    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); width];
    for (pos, support) in supports.iter().enumerate() {
        for &col in support {
            assert!(col < width, "support column out of range");
            col_rows[col].push(pos);
        }
    }
    // Ripple keyed by (id, position) so the lowest id peels first.
    let mut ripple: BTreeSet<(usize, usize)> = remaining
        .iter()
        .enumerate()
        .filter(|(_, s)| s.len() == 1)
        .map(|(pos, _)| (ids[pos], pos))
        .collect();
    let mut resolved = vec![false; width];
    let mut unresolved: usize = width;
    let mut rng = match rule {
        RootingRule::UniformRandom { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        RootingRule::MaxIncidence => None,
    };
    let mut plan = Vec::with_capacity(width);

    while unresolved > 0 {
        let col = if let Some(&(id, pos)) = ripple.iter().next() {
            let col = *remaining[pos].iter().next().expect("ripple row has a column");
            ripple.remove(&(id, pos));
            plan.push(PlanStep::Peel { row: pos, col });
            col
        } else {
            let col = match (&rule, rng.as_mut()) {
                (RootingRule::MaxIncidence, _) => (0..width)
                    .filter(|&c| !resolved[c])
                    .max_by_key(|&c| (col_rows[c].len(), std::cmp::Reverse(c)))
                    .expect("unresolved column exists"),
                (RootingRule::UniformRandom { .. }, Some(rng)) => {
                    let candidates: Vec<usize> =
                        (0..width).filter(|&c| !resolved[c]).collect();
                    candidates[rng.gen_range(0..candidates.len())]
                }
                _ => unreachable!(),
            };
            plan.push(PlanStep::Root { col });
            col
        };

        resolved[col] = true;
        unresolved -= 1;
        for &pos in &col_rows[col] {
            let before = remaining[pos].len();
            remaining[pos].remove(&col);
            let after = remaining[pos].len();
            if before == 1 {
                ripple.remove(&(ids[pos], pos));
            } else if after == 1 {
                ripple.insert((ids[pos], pos));
            }
        }
    }
    plan
}

// ---------------------------------------------------------------------------
// Hybrid decode
// ---------------------------------------------------------------------------

/// Counters describing one decode run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeStats {
    /// Blocks recovered by dividing a degree-1 row.
    pub peeled: usize,
    /// Blocks recovered by exact elimination.
    pub rooted: usize,
    /// Block-data multiply-adds spent (divisions, combinations,
    /// subtractions).
    pub block_op_count: u64,
    /// Rows handed to the decoder.
    pub rows_used: usize,
    /// Flat block indices in recovery order.
    pub recovery_order: Vec<usize>,
}

pub fn hybrid_decode(
    tasks: &[CodedTask],
    m: usize,
    n: usize,
) -> Result<(BlockGrid, DecodeStats), DecodeError> {
    hybrid_decode_with(tasks, m, n, RootingRule::MaxIncidence)
}

pub fn hybrid_decode_with(
    tasks: &[CodedTask],
    m: usize,
    n: usize,
    rule: RootingRule,
) -> Result<(BlockGrid, DecodeStats), DecodeError> {
    let mn = m * n;

    // Pull out rows and working copies of the results.
    let mut weights: Vec<BTreeMap<usize, BigInt>> = Vec::with_capacity(tasks.len());
    let mut data: Vec<SparseMatrix> = Vec::with_capacity(tasks.len());
    for task in tasks {
        for (flat, w) in &task.weights {
            if *flat >= mn {
                return Err(DecodeError::InvalidTask {
                    worker_id: task.worker_id,
                    detail: format!("block index {flat} outside grid of {mn}"),
                });
            }
            if w.is_zero() {
                return Err(DecodeError::InvalidTask {
                    worker_id: task.worker_id,
                    detail: format!("zero weight on block {flat}"),
                });
            }
        }
        match &task.result {
            Some(TaskOutput::Dense(mat)) => data.push(mat.clone()),
            Some(TaskOutput::Exact(_)) => {
                return Err(DecodeError::WrongOutputKind {
                    worker_id: task.worker_id,
                    expected: "dense",
                    got: "exact",
                })
            }
            None => {
                return Err(DecodeError::MissingResult {
                    worker_id: task.worker_id,
                })
            }
        }
        weights.push(task.weights.iter().cloned().collect());
    }
    let (block_rows, block_cols) = match data.first() {
        Some(first) => (first.rows(), first.cols()),
        None => {
            return Err(DecodeError::RankDeficient {
                rank: 0,
                needed: mn,
            })
        }
    };
    for (task, mat) in tasks.iter().zip(&data) {
        if mat.rows() != block_rows || mat.cols() != block_cols {
            return Err(DecodeError::InvalidTask {
                worker_id: task.worker_id,
                detail: "result block shape differs across tasks".to_string(),
            });
        }
    }

    // Decodability is a pure rank condition; check it up front.
    let mut state = EchelonState::new(mn);
    for task in tasks {
        state.insert(&task.weights);
    }
    if !state.is_full_rank() {
        return Err(DecodeError::RankDeficient {
            rank: state.rank(),
            needed: mn,
        });
    }

    let supports: Vec<Vec<usize>> = tasks
        .iter()
        .map(|t| t.weights.iter().map(|(flat, _)| *flat).collect())
        .collect();
    let ids: Vec<usize> = tasks.iter().map(|t| t.worker_id).collect();
    let plan = peeling_plan(&supports, &ids, mn, rule);

    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); mn];
    for (pos, support) in supports.iter().enumerate() {
        for &col in support {
            col_rows[col].push(pos);
        }
    }

    let mut grid = BlockGrid::new(m, n, block_rows, block_cols);
    let mut stats = DecodeStats {
        peeled: 0,
        rooted: 0,
        block_op_count: 0,
        rows_used: tasks.len(),
        recovery_order: Vec::with_capacity(mn),
    };

    for step in plan {
        let (col, block) = match step {
            PlanStep::Peel { row, col } => {
                let w = weights[row]
                    .get(&col)
                    .expect("planned peel row holds the column")
                    .to_f64()
                    .expect("weight fits in f64");
                stats.block_op_count += data[row].nnz() as u64;
                stats.peeled += 1;
                (col, data[row].divided(w))
            }
            PlanStep::Root { col } => {
                let live: Vec<usize> = (0..weights.len())
                    .filter(|&p| !weights[p].is_empty())
                    .collect();
                let rows: Vec<WeightRow> = live
                    .iter()
                    .map(|&p| {
                        weights[p]
                            .iter()
                            .map(|(c, w)| (*c, w.clone()))
                            .collect()
                    })
                    .collect();
                let u = rooting_combination(&rows, mn, col)?;
                let terms: Vec<(&BigRational, &SparseMatrix)> = u
                    .iter()
                    .zip(&live)
                    .filter(|(coeff, _)| !coeff.is_zero())
                    .map(|(coeff, &p)| (coeff, &data[p]))
                    .collect();
                let (acc, cost) = rational_combination(&terms, block_rows, block_cols)?;
                stats.block_op_count += cost;
                stats.rooted += 1;
                (col, acc.to_sparse())
            }
        };

        // Substitute the recovered block out of every row that holds it.
        for &pos in &col_rows[col] {
            let Some(w) = weights[pos].remove(&col) else {
                continue;
            };
            if weights[pos].is_empty() {
                // The row is spent; its data is exactly w * block.
                data[pos] = SparseMatrix::zero(block_rows, block_cols);
            } else {
                let coeff = -w.to_f64().expect("weight fits in f64");
                let (next, cost) = scaled_accumulate(&data[pos], coeff, &block)?;
                data[pos] = next;
                stats.block_op_count += cost;
            }
        }
        stats.recovery_order.push(col);
        grid.set_flat(col, block)?;
    }

    Ok((grid, stats))
}

// ---------------------------------------------------------------------------
// Polynomial decode
// ---------------------------------------------------------------------------

/// Interpolation decoding for the polynomial baseline: takes the first `mn`
/// completed tasks, solves the power-weight system exactly, and combines the
/// exact results into blocks.
pub fn decode_polynomial(
    tasks: &[CodedTask],
    m: usize,
    n: usize,
) -> Result<(BlockGrid, DecodeStats), DecodeError> {
    let mn = m * n;
    if tasks.len() < mn {
        return Err(DecodeError::RankDeficient {
            rank: tasks.len(),
            needed: mn,
        });
    }
    let chosen = &tasks[..mn];
    let mut data: Vec<&RationalMatrix> = Vec::with_capacity(mn);
    for task in chosen {
        match &task.result {
            Some(TaskOutput::Exact(mat)) => data.push(mat),
            Some(TaskOutput::Dense(_)) => {
                return Err(DecodeError::WrongOutputKind {
                    worker_id: task.worker_id,
                    expected: "exact",
                    got: "dense",
                })
            }
            None => {
                return Err(DecodeError::MissingResult {
                    worker_id: task.worker_id,
                })
            }
        }
    }
    let (block_rows, block_cols) = (data[0].rows(), data[0].cols());

    let mut state = EchelonState::new(mn);
    for task in chosen {
        state.insert(&task.weights);
    }
    if !state.is_full_rank() {
        return Err(DecodeError::SingularSystem {
            context: "polynomial rows are not independent (duplicate points?)",
        });
    }

    let mut grid = BlockGrid::new(m, n, block_rows, block_cols);
    let mut stats = DecodeStats {
        peeled: 0,
        rooted: mn,
        block_op_count: 0,
        rows_used: mn,
        recovery_order: Vec::with_capacity(mn),
    };
    for col in 0..mn {
        let u = state
            .unit_combination(col)
            .ok_or(DecodeError::BlockNotRecoverable { col })?;
        let mut acc = RationalMatrix::zero(block_rows, block_cols);
        for (pos, coeff) in u.iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            stats.block_op_count += data[pos].nnz() as u64;
            acc.add_scaled(coeff, data[pos])?;
        }
        grid.set_flat(col, acc.to_sparse())?;
        stats.recovery_order.push(col);
    }
    Ok((grid, stats))
}

// ---------------------------------------------------------------------------
