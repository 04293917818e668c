//! Master/worker simulation on a virtual clock: generate inputs, hand every
//! worker its task, model completion times (with injected stragglers),
//! consume results in completion order, decode, and account for every phase.
//!
//! Times are simulated, never measured: a task's clock time is a function of
//! its real flop and byte counts (or a shifted-exponential draw), so runs
//! are deterministic under a seed and independent of the host machine. The
//! arithmetic itself is not simulated: workers really multiply their blocks,
//! and the decoded product is checked against the direct computation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};
use thiserror::Error;

use crate::decode::{decode_polynomial, hybrid_decode, DecodeError};
use crate::degree::DegreeDistribution;
use crate::encode::{
    assign_uncoded, encode_polynomial, encode_sparse, evaluate_polynomial_task, CodedTask,
    EncodeError, TaskOutput,
};
use crate::matrix::{block_product, BlockGrid, MatrixError, SparseMatrix};

/// Modeled size of one shipped sparse entry: an 8-byte value plus a packed
/// 4-byte coordinate.
const BYTES_PER_ENTRY: u64 = 12;

/// Relaunch limit for the sparse scheme; hitting it means the distribution
/// essentially never covers some block.
const MAX_ROUNDS: usize = 64;

#[derive(Error, Debug)]
pub enum SimError {
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: String },
    #[error("no decodable prefix after {rounds} dispatch rounds")]
    StalledDecode { rounds: usize },
    #[error("decoded product disagrees with the direct computation")]
    VerificationFailed,
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// How a task's completion time is generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeModel {
    /// `flops / flop_rate + bytes / byte_rate`: time tracks measured work.
    Deterministic { flop_rate: f64, byte_rate: f64 },
    /// `shift + Exp(rate)`, independent of task size.
    ShiftedExponential { shift: f64, rate: f64 },
}

impl TimeModel {
    fn sample<R: Rng + ?Sized>(&self, flops: u64, bytes: u64, rng: &mut R) -> f64 {
        match *self {
            TimeModel::Deterministic {
                flop_rate,
                byte_rate,
            } => flops as f64 / flop_rate + bytes as f64 / byte_rate,
            TimeModel::ShiftedExponential { shift, rate } => {
                shift - (1.0 - rng.gen::<f64>()).ln() / rate
            }
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |name: &'static str, value: f64| {
            Err(SimError::InvalidParameter {
                name,
                value: value.to_string(),
            })
        };
        match *self {
            TimeModel::Deterministic {
                flop_rate,
                byte_rate,
            } => {
                if !(flop_rate > 0.0) || !flop_rate.is_finite() {
                    return bad("flop_rate", flop_rate);
                }
                if !(byte_rate > 0.0) || !byte_rate.is_finite() {
                    return bad("byte_rate", byte_rate);
                }
            }
            TimeModel::ShiftedExponential { shift, rate } => {
                if !(shift >= 0.0) || !shift.is_finite() {
                    return bad("shift", shift);
                }
                if !(rate > 0.0) || !rate.is_finite() {
                    return bad("rate", rate);
                }
            }
        }
        Ok(())
    }
}

/// The worker pool: size, how many run degraded, and by how much.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerModel {
    pub n_workers: usize,
    pub straggler_count: usize,
    pub slowdown: f64,
    pub time_model: TimeModel,
}

impl WorkerModel {
    fn validate(&self) -> Result<(), SimError> {
        if self.n_workers == 0 {
            return Err(SimError::InvalidParameter {
                name: "n_workers",
                value: "0".to_string(),
            });
        }
        if self.straggler_count > self.n_workers {
            return Err(SimError::InvalidParameter {
                name: "straggler_count",
                value: format!("{} > {} workers", self.straggler_count, self.n_workers),
            });
        }
        if !(self.slowdown >= 1.0) || !self.slowdown.is_finite() {
            return Err(SimError::InvalidParameter {
                name: "slowdown",
                value: self.slowdown.to_string(),
            });
        }
        self.time_model.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    Uncoded,
    Sparse { dist: DegreeDistribution },
    Polynomial,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Uncoded => "uncoded",
            Scheme::Sparse { .. } => "sparse",
            Scheme::Polynomial => "polynomial",
        }
    }
}

/// Value law for generated test matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueLaw {
    /// Every stored entry is 1.
    One,
    /// Uniform nonzero integers from `lo..=hi` (zero draws are rerolled).
    UniformInt { lo: i64, hi: i64 },
}

/// Knobs that are not part of the worker model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Results consumed beyond the first decodable prefix.
    pub extra_rows: usize,
    /// Replay one fixed task set across trials instead of re-drawing
    /// weights per trial (completion times still vary).
    pub reuse_encoding: bool,
    /// Check the decoded product against the direct computation.
    pub verify: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            extra_rows: 0,
            reuse_encoding: false,
            verify: true,
        }
    }
}

/// Everything measured in one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub scheme: String,
    /// Results the master consumed before it could stop listening.
    pub k_used: usize,
    /// Tasks handed out (all of them burn flops, consumed or not).
    pub tasks_executed: usize,
    pub rooting_steps: usize,
    /// Nonzeros shipped master -> workers, summed over executed tasks.
    pub encode_nnz_in: u64,
    /// Multiply-adds actually performed by the workers.
    pub compute_flops: u64,
    /// Modeled result bytes shipped workers -> master (consumed results).
    pub bytes_out: u64,
    /// Decoder multiply-add count.
    pub decode_ops: u64,
    pub wall_model_time: f64,
}

// ---------------------------------------------------------------------------
// Input generation
// ---------------------------------------------------------------------------

/// Random sparse matrix with exactly `nnz_target` distinct positions,
/// uniform over the grid (Floyd's sampling), values per `law`.
pub fn generate_random_sparse<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    nnz_target: usize,
    law: ValueLaw,
    rng: &mut R,
) -> Result<SparseMatrix, SimError> {
    let total = rows as u64 * cols as u64;
    if nnz_target as u64 > total {
        return Err(SimError::InvalidParameter {
            name: "nnz_target",
            value: format!("{nnz_target} > {rows}x{cols}"),
        });
    }
    if let ValueLaw::UniformInt { lo, hi } = law {
        if lo > hi || (lo == 0 && hi == 0) {
            return Err(SimError::InvalidParameter {
                name: "value_law",
                value: format!("UniformInt {lo}..={hi}"),
            });
        }
    }
    // Floyd's subset sampling: each j in the tail window lands either on
    // itself or on an earlier unclaimed cell, giving a uniform nnz-subset in
    // O(nnz) draws. Positions are kept in draw order so values are
    // reproducible too.
    let mut seen: HashSet<u64> = HashSet::with_capacity(nnz_target);
    let mut cells: Vec<u64> = Vec::with_capacity(nnz_target);
    for j in (total - nnz_target as u64)..total {
        let t = rng.gen_range(0..=j);
        let cell = if seen.contains(&t) { j } else { t };
        seen.insert(cell);
        cells.push(cell);
    }
    let mut triplets = Vec::with_capacity(nnz_target);
    for cell in cells {
        let value = match law {
            ValueLaw::One => 1.0,
            ValueLaw::UniformInt { lo, hi } => loop {
                let v = rng.gen_range(lo..=hi);
                if v != 0 {
                    break v as f64;
                }
            },
        };
        triplets.push(((cell / cols as u64) as usize, (cell % cols as u64) as usize, value));
    }
    Ok(SparseMatrix::from_triplets(rows, cols, &triplets)?)
}

// ---------------------------------------------------------------------------
// One trial
// ---------------------------------------------------------------------------

/// The precomputed context every scheme shares: true blocks and what each
/// one cost, so per-task accounting can charge real numbers.
struct Instance {
    m: usize,
    n: usize,
    a_parts: Vec<SparseMatrix>,
    b_parts: Vec<SparseMatrix>,
    truth: BlockGrid,
    block_flops: Vec<u64>,
    out_rows: usize,
    out_cols: usize,
}

impl Instance {
    fn build(a: &SparseMatrix, b: &SparseMatrix, m: usize, n: usize) -> Result<Self, SimError> {
        if a.rows() != b.rows() {
            return Err(SimError::InvalidParameter {
                name: "inputs",
                value: format!("A has {} rows, B has {}", a.rows(), b.rows()),
            });
        }
        let a_parts = a.split_columns(m)?;
        let b_parts = b.split_columns(n)?;
        let mut truth = BlockGrid::new(m, n, a.cols() / m, b.cols() / n);
        let mut block_flops = vec![0u64; m * n];
        for i in 0..m {
            for j in 0..n {
                let (block, flops) = block_product(&a_parts[i], &b_parts[j])?;
                block_flops[i * n + j] = flops;
                truth.set_flat(i * n + j, block)?;
            }
        }
        Ok(Instance {
            m,
            n,
            a_parts,
            b_parts,
            truth,
            block_flops,
            out_rows: a.cols(),
            out_cols: b.cols(),
        })
    }

    /// Nonzeros shipped to a worker holding this weight row: one copy of
    /// each distinct input block the row touches.
    fn shipped_nnz(&self, weights: &[(usize, num_bigint::BigInt)]) -> u64 {
        let rows: BTreeSet<usize> = weights.iter().map(|(flat, _)| flat / self.n).collect();
        let cols: BTreeSet<usize> = weights.iter().map(|(flat, _)| flat % self.n).collect();
        rows.iter().map(|&i| self.a_parts[i].nnz() as u64).sum::<u64>()
            + cols.iter().map(|&j| self.b_parts[j].nnz() as u64).sum::<u64>()
    }

    fn verify(&self, decoded: &BlockGrid) -> Result<(), SimError> {
        let got = decoded.assemble(self.out_rows, self.out_cols)?;
        let want = self.truth.assemble(self.out_rows, self.out_cols)?;
        if got == want {
            Ok(())
        } else {
            Err(SimError::VerificationFailed)
        }
    }
}

/// Fills in `result` and `completion_time` for a batch of coded tasks
/// (sparse or uncoded) and returns per-task (flops, result_nnz).
fn execute_coded(
    instance: &Instance,
    tasks: &mut [CodedTask],
    model: &WorkerModel,
    stragglers: &[bool],
    clock_start: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(u64, u64)>, SimError> {
    let mut measured = Vec::with_capacity(tasks.len());
    for task in tasks.iter_mut() {
        let (combined, accumulate_ops) = task.evaluate(&instance.truth)?;
        let product_ops: u64 = task
            .weights
            .iter()
            .map(|(flat, _)| instance.block_flops[*flat])
            .sum();
        let flops = product_ops + accumulate_ops;
        let result_nnz = combined.nnz() as u64;
        let bytes =
            BYTES_PER_ENTRY * (instance.shipped_nnz(&task.weights) + result_nnz);
        let mut time = model.time_model.sample(flops, bytes, rng);
        if stragglers[task.worker_id % model.n_workers] {
            time *= model.slowdown;
        }
        task.result = Some(TaskOutput::Dense(combined));
        task.completion_time = Some(clock_start + time);
        measured.push((flops, result_nnz));
    }
    Ok(measured)
}

/// Completion order: virtual clock, ties to the lower worker id.
fn completion_order(tasks: &[CodedTask]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&x, &y| {
        let tx = tasks[x].completion_time.expect("time assigned");
        let ty = tasks[y].completion_time.expect("time assigned");
        tx.partial_cmp(&ty)
            .expect("finite times")
            .then(tasks[x].worker_id.cmp(&tasks[y].worker_id))
    });
    order
}

pub fn run_trial<R: Rng + ?Sized>(
    scheme: &Scheme,
    a: &SparseMatrix,
    b: &SparseMatrix,
    m: usize,
    n: usize,
    model: &WorkerModel,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<TrialResult, SimError> {
    let mut seeded = ChaCha8Rng::seed_from_u64(rng.gen());
    trial_with_preset(scheme, a, b, m, n, model, cfg, None, &mut seeded)
}

#[allow(clippy::too_many_arguments)]
fn trial_with_preset(
    scheme: &Scheme,
    a: &SparseMatrix,
    b: &SparseMatrix,
    m: usize,
    n: usize,
    model: &WorkerModel,
    cfg: &SimConfig,
    preset: Option<&[CodedTask]>,
    rng: &mut ChaCha8Rng,
) -> Result<TrialResult, SimError> {
    model.validate()?;
    let instance = Instance::build(a, b, m, n)?;
    let mut stragglers = vec![false; model.n_workers];
    for idx in rand::seq::index::sample(rng, model.n_workers, model.straggler_count) {
        stragglers[idx] = true;
    }
    match scheme {
        Scheme::Uncoded => {
            run_uncoded(&instance, model, cfg, &stragglers, rng)
        }
        Scheme::Polynomial => run_polynomial(&instance, model, cfg, &stragglers, rng),
        Scheme::Sparse { dist } => {
            run_sparse(&instance, dist, model, cfg, &stragglers, preset, rng)
        }
    }
}

fn run_uncoded(
    instance: &Instance,
    model: &WorkerModel,
    cfg: &SimConfig,
    stragglers: &[bool],
    rng: &mut ChaCha8Rng,
) -> Result<TrialResult, SimError> {
    let mn = instance.m * instance.n;
    let mut tasks = assign_uncoded(instance.m, instance.n, model.n_workers)?;
    let measured = execute_coded(instance, &mut tasks, model, stragglers, 0.0, rng)?;

    let mut grid = BlockGrid::new(
        instance.m,
        instance.n,
        instance.truth.block_rows(),
        instance.truth.block_cols(),
    );
    let mut covered = 0usize;
    let mut k_used = 0usize;
    let mut bytes_out = 0u64;
    let mut wall = 0.0f64;
    for idx in completion_order(&tasks) {
        let task = &tasks[idx];
        k_used += 1;
        bytes_out += BYTES_PER_ENTRY * measured[idx].1;
        wall = task.completion_time.expect("time assigned");
        let flat = task.weights[0].0;
        if grid.get_flat(flat).is_none() {
            let TaskOutput::Dense(block) = task.result.as_ref().expect("result filled") else {
                unreachable!("uncoded results are plain blocks");
            };
            grid.set_flat(flat, block.clone())?;
            covered += 1;
            if covered == mn {
                break;
            }
        }
    }
    if covered < mn {
        return Err(SimError::StalledDecode { rounds: 1 });
    }
    if cfg.verify {
        instance.verify(&grid)?;
    }
    Ok(TrialResult {
        trial: 0,
        scheme: "uncoded".to_string(),
        k_used,
        tasks_executed: tasks.len(),
        rooting_steps: 0,
        encode_nnz_in: tasks
            .iter()
            .map(|t| instance.shipped_nnz(&t.weights))
            .sum(),
        compute_flops: measured.iter().map(|&(f, _)| f).sum(),
        bytes_out,
        decode_ops: 0,
        wall_model_time: wall,
    })
}

fn run_polynomial(
    instance: &Instance,
    model: &WorkerModel,
    cfg: &SimConfig,
    stragglers: &[bool],
    rng: &mut ChaCha8Rng,
) -> Result<TrialResult, SimError> {
    let mn = instance.m * instance.n;
    let encoding = encode_polynomial(instance.m, instance.n, model.n_workers)?;
    let mut tasks = encoding.tasks;
    let mut encode_nnz_in = 0u64;
    let mut compute_flops = 0u64;
    let mut result_nnz = vec![0u64; tasks.len()];
    for (idx, task) in tasks.iter_mut().enumerate() {
        let (product, flops, operand_nnz) = evaluate_polynomial_task(
            &instance.a_parts,
            &instance.b_parts,
            encoding.points[idx],
        )?;
        encode_nnz_in += operand_nnz;
        compute_flops += flops;
        result_nnz[idx] = product.nnz() as u64;
        let bytes = BYTES_PER_ENTRY * (operand_nnz + result_nnz[idx]);
        let mut time = model.time_model.sample(flops, bytes, rng);
        if stragglers[task.worker_id % model.n_workers] {
            time *= model.slowdown;
        }
        task.result = Some(TaskOutput::Exact(product));
        task.completion_time = Some(time);
    }

    let order = completion_order(&tasks);
    let consumed: Vec<CodedTask> = order[..mn].iter().map(|&i| tasks[i].clone()).collect();
    let bytes_out = BYTES_PER_ENTRY * order[..mn].iter().map(|&i| result_nnz[i]).sum::<u64>();
    let wall = consumed
        .last()
        .and_then(|t| t.completion_time)
        .expect("mn >= 1");
    let (grid, stats) = decode_polynomial(&consumed, instance.m, instance.n)?;
    if cfg.verify {
        instance.verify(&grid)?;
    }
    Ok(TrialResult {
        trial: 0,
        scheme: "polynomial".to_string(),
        k_used: mn,
        tasks_executed: tasks.len(),
        rooting_steps: stats.rooted,
        encode_nnz_in,
        compute_flops,
        bytes_out,
        decode_ops: stats.block_op_count,
        wall_model_time: wall,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_sparse(
    instance: &Instance,
    dist: &DegreeDistribution,
    model: &WorkerModel,
    cfg: &SimConfig,
    stragglers: &[bool],
    preset: Option<&[CodedTask]>,
    rng: &mut ChaCha8Rng,
) -> Result<TrialResult, SimError> {
    let mn = instance.m * instance.n;
    let mut state = crate::decode::EchelonState::new(mn);
    let mut consumed: Vec<CodedTask> = Vec::new();
    let mut encode_nnz_in = 0u64;
    let mut compute_flops = 0u64;
    let mut bytes_out = 0u64;
    let mut tasks_executed = 0usize;
    let mut wall = 0.0f64;
    let mut clock = 0.0f64;
    let mut extra_left = cfg.extra_rows;

    for round in 0..MAX_ROUNDS {
        let mut tasks = match (round, preset) {
            (0, Some(fixed)) => fixed.to_vec(),
            _ => encode_sparse(dist, instance.m, instance.n, model.n_workers, rng)?,
        };
        for task in tasks.iter_mut() {
            task.worker_id += round * model.n_workers;
        }
        let measured = execute_coded(instance, &mut tasks, model, stragglers, clock, rng)?;
        tasks_executed += tasks.len();
        compute_flops += measured.iter().map(|&(f, _)| f).sum::<u64>();
        encode_nnz_in += tasks
            .iter()
            .map(|t| instance.shipped_nnz(&t.weights))
            .sum::<u64>();
        clock = tasks
            .iter()
            .map(|t| t.completion_time.expect("time assigned"))
            .fold(clock, f64::max);

        let order = completion_order(&tasks);
        let mut done = false;
        for idx in order {
            if state.is_full_rank() && extra_left == 0 {
                done = true;
                break;
            }
            if state.is_full_rank() {
                extra_left -= 1;
            } else {
                state.insert(&tasks[idx].weights);
            }
            bytes_out += BYTES_PER_ENTRY * measured[idx].1;
            wall = tasks[idx].completion_time.expect("time assigned");
            consumed.push(tasks[idx].clone());
        }
        if done || (state.is_full_rank() && extra_left == 0) {
            break;
        }
        if round + 1 == MAX_ROUNDS {
            return Err(SimError::StalledDecode { rounds: MAX_ROUNDS });
        }
        // The master only learns the batch was insufficient once everything
        // arrived; the next wave starts at the batch's last completion.
    }
    if !state.is_full_rank() {
        return Err(SimError::StalledDecode { rounds: MAX_ROUNDS });
    }

    let (grid, stats) = hybrid_decode(&consumed, instance.m, instance.n)?;
    if cfg.verify {
        instance.verify(&grid)?;
    }
    Ok(TrialResult {
        trial: 0,
        scheme: "sparse".to_string(),
        k_used: consumed.len(),
        tasks_executed,
        rooting_steps: stats.rooted,
        encode_nnz_in,
        compute_flops,
        bytes_out,
        decode_ops: stats.block_op_count,
        wall_model_time: wall,
    })
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub m: usize,
    pub n: usize,
    pub model: WorkerModel,
    pub trials: usize,
    pub seed: u64,
    pub sim: SimConfig,
}

/// Runs seeded trials in parallel. Trial `t` uses stream `t` of the master
/// seed, so the output is independent of thread scheduling.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    a: &SparseMatrix,
    b: &SparseMatrix,
) -> Result<Vec<TrialResult>, SimError> {
    if cfg.trials == 0 {
        return Err(SimError::InvalidParameter {
            name: "trials",
            value: "0".to_string(),
        });
    }
    let preset = if cfg.sim.reuse_encoding {
        if let Scheme::Sparse { dist } = &cfg.scheme {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(u64::MAX);
            Some(encode_sparse(dist, cfg.m, cfg.n, cfg.model.n_workers, &mut rng)?)
        } else {
            None
        }
    } else {
        None
    };
    let mut results: Vec<TrialResult> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(trial);
            trial_with_preset(
                &cfg.scheme,
                a,
                b,
                cfg.m,
                cfg.n,
                &cfg.model,
                &cfg.sim,
                preset.as_deref(),
                &mut rng,
            )
            .map(|mut r| {
                r.trial = trial as usize;
                r
            })
        })
        .collect::<Result<_, _>>()?;
    results.sort_by_key(|r| r.trial);
    Ok(results)
}

// ---------------------------------------------------------------------------
// Aggregation and emission
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std_dev: f64,
}

fn stat(values: impl Iterator<Item = f64> + Clone) -> Stat {
    let count = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / count;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    Stat {
        mean,
        std_dev: var.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeSummary {
    pub scheme: String,
    pub trials: usize,
    pub k_used: Stat,
    pub rooting_steps: Stat,
    pub encode_nnz_in: Stat,
    pub compute_flops: Stat,
    /// Mean worker cost: compute_flops / tasks_executed, averaged.
    pub flops_per_task: Stat,
    pub bytes_out: Stat,
    pub decode_ops: Stat,
    pub wall_model_time: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub schema: String,
    pub schemes: Vec<SchemeSummary>,
}

impl ExperimentSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Per-scheme means and standard deviations, schemes in first-seen order.
pub fn aggregate(trials: &[TrialResult]) -> Result<ExperimentSummary, SimError> {
    if trials.is_empty() {
        return Err(SimError::InvalidParameter {
            name: "trials",
            value: "empty".to_string(),
        });
    }
    let mut names: Vec<&str> = Vec::new();
    for t in trials {
        if !names.contains(&t.scheme.as_str()) {
            names.push(&t.scheme);
        }
    }
    let schemes = names
        .iter()
        .map(|name| {
            let rows: Vec<&TrialResult> =
                trials.iter().filter(|t| t.scheme == *name).collect();
            let of = |f: fn(&TrialResult) -> f64| stat(rows.iter().map(|r| f(r)));
            SchemeSummary {
                scheme: name.to_string(),
                trials: rows.len(),
                k_used: of(|r| r.k_used as f64),
                rooting_steps: of(|r| r.rooting_steps as f64),
                encode_nnz_in: of(|r| r.encode_nnz_in as f64),
                compute_flops: of(|r| r.compute_flops as f64),
                flops_per_task: of(|r| r.compute_flops as f64 / r.tasks_executed as f64),
                bytes_out: of(|r| r.bytes_out as f64),
                decode_ops: of(|r| r.decode_ops as f64),
                wall_model_time: of(|r| r.wall_model_time),
            }
        })
        .collect();
    Ok(ExperimentSummary {
        schema: "sparse-code/v1".to_string(),
        schemes,
    })
}

/// One CSV row per trial, stable column order, reproducible byte for byte.
pub fn trials_csv(trials: &[TrialResult]) -> String {
    let mut out = String::from(
        "trial,scheme,k_used,tasks_executed,rooting_steps,encode_nnz_in,compute_flops,bytes_out,decode_ops,wall_model_time\n",
    );
    for t in trials {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            t.trial,
            t.scheme,
            t.k_used,
            t.tasks_executed,
            t.rooting_steps,
            t.encode_nnz_in,
            t.compute_flops,
            t.bytes_out,
            t.decode_ops,
            t.wall_model_time,
        ));
    }
    out
}

// ---------------------------------------------------------------------------
