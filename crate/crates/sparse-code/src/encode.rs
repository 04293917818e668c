//! Task generation: each worker is handed an integer-weighted combination of
//! product blocks to compute.
//!
//! Three schemes share the [`CodedTask`] shape. The sparse code draws a
//! support from a degree distribution and uniform weights from `{1..m^2n^2}`;
//! the polynomial baseline uses Vandermonde-style power weights; the uncoded
//! baseline assigns one block per worker, round-robin.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::degree::DegreeDistribution;
use crate::matrix::{scaled_accumulate, BlockGrid, MatrixError, RationalMatrix, SparseMatrix};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EncodeError {
    #[error("degree distribution covers {dist_d} degrees but the grid has {grid} blocks")]
    DimensionMismatch { dist_d: usize, grid: usize },
    #[error("{scheme} needs at least {needed} workers, got {got}")]
    InsufficientWorkers {
        scheme: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("task references block {flat} outside a grid of {blocks} blocks")]
    BadBlockIndex { flat: usize, blocks: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("bad serialized task set: {0}")]
    Parse(String),
}

/// Sparse integer weight row over flat block indices, sorted by index.
pub type WeightRow = Vec<(usize, BigInt)>;

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

/// The uniform weight pool `{1..max}` for the sparse code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightSet {
    max: u64,
}

impl WeightSet {
    /// Pool sized for an `m x n` grid: `max = (mn)^2`.
    pub fn for_grid(m: usize, n: usize) -> Self {
        let mn = (m * n) as u64;
        WeightSet { max: mn * mn }
    }

    pub fn max(&self) -> u64 {
        self.max
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen_range(1..=self.max)
    }
}

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

/// A worker's computed combination. The sparse and uncoded schemes carry
/// doubles; the polynomial baseline carries exact rationals because its
/// power weights overflow the exact-integer range of f64.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskOutput {
    Dense(SparseMatrix),
    Exact(RationalMatrix),
}

/// One worker's assignment: compute `sum_k w_k C_k` over its weight row.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedTask {
    pub worker_id: usize,
    pub weights: WeightRow,
    pub result: Option<TaskOutput>,
    pub completion_time: Option<f64>,
}

impl CodedTask {
    pub fn new(worker_id: usize, weights: WeightRow) -> Self {
        debug_assert!(weights.windows(2).all(|w| w[0].0 < w[1].0));
        CodedTask {
            worker_id,
            weights,
            result: None,
            completion_time: None,
        }
    }

    /// Number of blocks this task touches.
    pub fn degree(&self) -> usize {
        self.weights.len()
    }

    /// Evaluates the weighted block sum against a computed grid, returning
    /// the combination and its accumulation multiply-add count. Weights must
    /// be exactly representable as f64, which sparse-code and uncoded
    /// weights always are.
    pub fn evaluate(&self, grid: &BlockGrid) -> Result<(SparseMatrix, u64), EncodeError> {
        let blocks = grid.m() * grid.n();
        let mut acc = SparseMatrix::zero(grid.block_rows(), grid.block_cols());
        let mut ops = 0u64;
        for (flat, w) in &self.weights {
            let block = grid
                .get_flat(*flat)
                .ok_or(EncodeError::BadBlockIndex {
                    flat: *flat,
                    blocks,
                })?;
            let coeff = w.to_f64().expect("weight fits in f64");
            let (next, cost) = scaled_accumulate(&acc, coeff, block)?;
            acc = next;
            ops += cost;
        }
        Ok((acc, ops))
    }
}

/// Stacked weight rows of a task set; rank decisions read from here.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    cols: usize,
    rows: Vec<WeightRow>,
}

impl CoefficientMatrix {
    pub fn from_tasks(tasks: &[CodedTask], cols: usize) -> Self {
        CoefficientMatrix {
            cols,
            rows: tasks.iter().map(|t| t.weights.clone()).collect(),
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[WeightRow] {
        &self.rows
    }
}

// ---------------------------------------------------------------------------
// Scheme encoders
// ---------------------------------------------------------------------------

/// Draws `num_workers` sparse-code tasks: support size from `dist`, support
/// uniform at that size, weights uniform from the grid's weight pool.
pub fn encode_sparse<R: Rng + ?Sized>(
    dist: &DegreeDistribution,
    m: usize,
    n: usize,
    num_workers: usize,
    rng: &mut R,
) -> Result<Vec<CodedTask>, EncodeError> {
    let mn = m * n;
    if dist.d() != mn {
        return Err(EncodeError::DimensionMismatch {
            dist_d: dist.d(),
            grid: mn,
        });
    }
    if num_workers == 0 {
        return Err(EncodeError::InsufficientWorkers {
            scheme: "sparse code",
            needed: 1,
            got: 0,
        });
    }
    let pool = WeightSet::for_grid(m, n);
    Ok((0..num_workers)
        .map(|worker| {
            let support = dist.sample_support(mn, rng);
            let weights = support
                .into_iter()
                .map(|flat| (flat, BigInt::from(pool.sample(rng))))
                .collect();
            CodedTask::new(worker, weights)
        })
        .collect())
}

/// Draws the weight row for a single additional sparse-code task. Encoding
/// is stateless per task, so a stream of these is exactly what
/// [`encode_sparse`] produces.
pub fn sparse_task_row<R: Rng + ?Sized>(
    dist: &DegreeDistribution,
    m: usize,
    n: usize,
    rng: &mut R,
) -> WeightRow {
    let pool = WeightSet::for_grid(m, n);
    dist.sample_support(m * n, rng)
        .into_iter()
        .map(|flat| (flat, BigInt::from(pool.sample(rng))))
        .collect()
}

/// Polynomial-code tasks with integer evaluation points `x_k = k` for worker
/// `k` (1-based point for 0-based id). Block `(i, j)` carries weight
/// `x^(i + j m)` with 1-based `i`, `j`; the exponents are distinct, so any
/// `mn` rows form a nonsingular generalized Vandermonde system.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialEncoding {
    pub tasks: Vec<CodedTask>,
    pub points: Vec<u64>,
}

pub fn encode_polynomial(
    m: usize,
    n: usize,
    num_workers: usize,
) -> Result<PolynomialEncoding, EncodeError> {
    let mn = m * n;
    if num_workers < mn {
        return Err(EncodeError::InsufficientWorkers {
            scheme: "polynomial code",
            needed: mn,
            got: num_workers,
        });
    }
    let mut tasks = Vec::with_capacity(num_workers);
    let mut points = Vec::with_capacity(num_workers);
    for worker in 0..num_workers {
        let x = BigInt::from((worker + 1) as u64);
        let mut weights = Vec::with_capacity(mn);
        for flat in 0..mn {
            let (i, j) = (flat / n + 1, flat % n + 1);
            weights.push((flat, x.pow((i + j * m) as u32)));
        }
        tasks.push(CodedTask::new(worker, weights));
        points.push((worker + 1) as u64);
    }
    Ok(PolynomialEncoding { tasks, points })
}

/// Evaluates one polynomial task exactly: forms the coded operands
/// `sum_i x^i A_i` and `sum_j x^(jm) B_j` and multiplies them. Returns the
/// result, the product multiply-add count, and the operand nonzero count
/// (what the master ships to the worker).
pub fn evaluate_polynomial_task(
    a_parts: &[SparseMatrix],
    b_parts: &[SparseMatrix],
    point: u64,
) -> Result<(RationalMatrix, u64, u64), EncodeError> {
    let m = a_parts.len();
    let x = BigInt::from(point);
    let mut coded_a = RationalMatrix::zero(a_parts[0].rows(), a_parts[0].cols());
    let mut operand_nnz = 0u64;
    for (idx, part) in a_parts.iter().enumerate() {
        let coeff = num_rational::BigRational::from_integer(x.pow((idx + 1) as u32));
        coded_a.add_scaled(&coeff, &RationalMatrix::from_sparse(part))?;
        operand_nnz += part.nnz() as u64;
    }
    let mut coded_b = RationalMatrix::zero(b_parts[0].rows(), b_parts[0].cols());
    for (idx, part) in b_parts.iter().enumerate() {
        let coeff =
            num_rational::BigRational::from_integer(x.pow(((idx + 1) * m) as u32));
        coded_b.add_scaled(&coeff, &RationalMatrix::from_sparse(part))?;
        operand_nnz += part.nnz() as u64;
    }
    let (product, flops) = RationalMatrix::transpose_product(&coded_a, &coded_b)?;
    Ok((product, flops, operand_nnz))
}

/// Uncoded assignment: worker `k` computes block `k mod mn`, so the first
/// `mn` workers cover the grid once and the rest hold round-robin copies.
pub fn assign_uncoded(m: usize, n: usize, num_workers: usize) -> Result<Vec<CodedTask>, EncodeError> {
    let mn = m * n;
    if num_workers < mn {
        return Err(EncodeError::InsufficientWorkers {
            scheme: "uncoded",
            needed: mn,
            got: num_workers,
        });
    }
    Ok((0..num_workers)
        .map(|worker| CodedTask::new(worker, vec![(worker % mn, BigInt::one())]))
        .collect())
}

// ---------------------------------------------------------------------------
// Serialization: replayable task sets
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TaskJson {
    worker_id: usize,
    weights: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct TaskSetJson {
    schema: String,
    m: usize,
    n: usize,
    tasks: Vec<TaskJson>,
}

const TASK_SCHEMA: &str = "sparse-code/tasks/v1";

pub fn tasks_to_json(tasks: &[CodedTask], m: usize, n: usize) -> String {
    let repr = TaskSetJson {
        schema: TASK_SCHEMA.to_string(),
        m,
        n,
        tasks: tasks
            .iter()
            .map(|t| TaskJson {
                worker_id: t.worker_id,
                weights: t
                    .weights
                    .iter()
                    .map(|(flat, w)| (flat.to_string(), w.to_string()))
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&repr).expect("task set serializes")
}

pub fn tasks_from_json(text: &str) -> Result<(Vec<CodedTask>, usize, usize), EncodeError> {
    let repr: TaskSetJson =
        serde_json::from_str(text).map_err(|e| EncodeError::Parse(e.to_string()))?;
    if repr.schema != TASK_SCHEMA {
        return Err(EncodeError::Parse(format!(
            "unknown schema {:?}, expected {TASK_SCHEMA:?}",
            repr.schema
        )));
    }
    let blocks = repr.m * repr.n;
    let mut tasks = Vec::with_capacity(repr.tasks.len());
    for t in &repr.tasks {
        let mut weights = Vec::with_capacity(t.weights.len());
        for (flat_str, w_str) in &t.weights {
            let flat: usize = flat_str
                .parse()
                .map_err(|_| EncodeError::Parse(format!("bad block index {flat_str:?}")))?;
            if flat >= blocks {
                return Err(EncodeError::BadBlockIndex { flat, blocks });
            }
            let w: BigInt = w_str
                .parse()
                .map_err(|_| EncodeError::Parse(format!("bad weight {w_str:?}")))?;
            weights.push((flat, w));
        }
        weights.sort_by_key(|&(flat, _)| flat);
        tasks.push(CodedTask::new(t.worker_id, weights));
    }
    Ok((tasks, repr.m, repr.n))
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::block_product;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sparse(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> SparseMatrix {
        SparseMatrix::from_triplets(rows, cols, entries).unwrap()
    }

    #[test]
    fn weight_pool_covers_one_through_m2n2() {
        let pool = WeightSet::for_grid(2, 2);
        assert_eq!(pool.max(), 16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen_min = u64::MAX;
        let mut seen_max = 0;
        for _ in 0..2000 {
            let w = pool.sample(&mut rng);
            assert!((1..=16).contains(&w));
            seen_min = seen_min.min(w);
            seen_max = seen_max.max(w);
        }
        assert_eq!((seen_min, seen_max), (1, 16));
    }

    #[test]
    fn sparse_encoding_is_seeded_and_well_formed() {
        let dist = DegreeDistribution::wave_soliton(4).unwrap();
        let mut rng_a = ChaCha8Rng::seed_from_u64(9);
        let mut rng_b = ChaCha8Rng::seed_from_u64(9);
        let tasks_a = encode_sparse(&dist, 2, 2, 30, &mut rng_a).unwrap();
        let tasks_b = encode_sparse(&dist, 2, 2, 30, &mut rng_b).unwrap();
        assert_eq!(tasks_a, tasks_b);
        for (k, task) in tasks_a.iter().enumerate() {
            assert_eq!(task.worker_id, k);
            assert!(!task.weights.is_empty() && task.weights.len() <= 4);
            assert!(task.weights.windows(2).all(|w| w[0].0 < w[1].0));
            for (flat, w) in &task.weights {
                assert!(*flat < 4);
                assert!(*w >= BigInt::one() && *w <= BigInt::from(16));
            }
        }
    }

    #[test]
    fn sparse_encoding_rejects_mismatched_distribution() {
        let dist = DegreeDistribution::wave_soliton(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            encode_sparse(&dist, 2, 3, 5, &mut rng).unwrap_err(),
            EncodeError::DimensionMismatch { dist_d: 4, grid: 6 }
        );
    }

    #[test]
    fn polynomial_weights_match_hand_powers() {
        // m = n = 2, worker with x = 2: weights 2^(i+2j) over (i,j) in
        // {1,2}^2, flat order (1,1),(1,2),(2,1),(2,2) -> [8, 32, 16, 64].
        let enc = encode_polynomial(2, 2, 4).unwrap();
        let row: Vec<u64> = enc.tasks[1]
            .weights
            .iter()
            .map(|(_, w)| w.to_u64().unwrap())
            .collect();
        assert_eq!(row, vec![8, 32, 16, 64]);
        assert_eq!(enc.points, vec![1, 2, 3, 4]);
        assert!(encode_polynomial(2, 2, 3).is_err());
    }

    #[test]
    fn uncoded_assignment_round_robins() {
        let tasks = assign_uncoded(2, 2, 6).unwrap();
        let flats: Vec<usize> = tasks.iter().map(|t| t.weights[0].0).collect();
        assert_eq!(flats, vec![0, 1, 2, 3, 0, 1]);
        assert!(tasks.iter().all(|t| t.weights[0].1.is_one()));
        assert!(assign_uncoded(2, 2, 3).is_err());
    }

    #[test]
    fn task_evaluation_combines_blocks() {
        // Grid blocks [2] and [3]; weights 3 and 5 -> 21.
        let mut grid = BlockGrid::new(1, 2, 1, 1);
        grid.set(0, 0, sparse(1, 1, &[(0, 0, 2.0)])).unwrap();
        grid.set(0, 1, sparse(1, 1, &[(0, 0, 3.0)])).unwrap();
        let task = CodedTask::new(0, vec![(0, BigInt::from(3)), (1, BigInt::from(5))]);
        let (result, ops) = task.evaluate(&grid).unwrap();
        assert_eq!(result.get(0, 0), 21.0);
        assert_eq!(ops, 2);
    }

    #[test]
    fn polynomial_evaluation_matches_weighted_block_sum() {
        // Integer instance small enough that the weighted sum stays exact.
        let a = sparse(3, 4, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, -1.0), (0, 3, 3.0)]);
        let b = sparse(3, 2, &[(0, 0, 2.0), (1, 1, -3.0), (2, 0, 1.0)]);
        let a_parts = a.split_columns(2).unwrap();
        let b_parts = b.split_columns(2).unwrap();
        let point = 2u64;
        let (exact, _, operand_nnz) =
            evaluate_polynomial_task(&a_parts, &b_parts, point).unwrap();
        assert_eq!(operand_nnz, (a.nnz() + b.nnz()) as u64);

        // Reference: sum of x^(i+jm) * (A_i^T B_j) over the grid.
        let mut expect = SparseMatrix::zero(2, 1);
        for i in 0..2usize {
            for j in 0..2usize {
                let (block, _) = block_product(&a_parts[i], &b_parts[j]).unwrap();
                let w = 2f64.powi((i + 1 + (j + 1) * 2) as i32);
                let (next, _) = scaled_accumulate(&expect, w, &block).unwrap();
                expect = next;
            }
        }
        assert_eq!(exact.to_sparse(), expect);
    }

    #[test]
    fn task_sets_round_trip_through_json() {
        let dist = DegreeDistribution::wave_soliton(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tasks = encode_sparse(&dist, 2, 2, 8, &mut rng).unwrap();
        let json = tasks_to_json(&tasks, 2, 2);
        let (back, m, n) = tasks_from_json(&json).unwrap();
        assert_eq!((m, n), (2, 2));
        assert_eq!(back, tasks);

        assert!(tasks_from_json("{}").is_err());
        let bad = json.replace("sparse-code/tasks/v1", "sparse-code/tasks/v9");
        assert!(tasks_from_json(&bad).is_err());
    }
}
