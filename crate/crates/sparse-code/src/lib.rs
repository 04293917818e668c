//! Coded computation of sparse matrix products.
//!
//! The product `C = A^T B` is split column-wise into an `m x n` grid of
//! blocks `C_ij = A_i^T B_j`. Each worker computes one random integer
//! combination of blocks; once slightly more than `m*n` workers finish, the
//! master decodes the whole grid, so stragglers never hold up the job.
//!
//! * [`matrix`]: CSR matrices, column splitting, block grids.
//! * [`degree`]: degree distributions over `{1..mn}` with exact rational mass.
//! * [`encode`]: sparse-code, polynomial-code, and uncoded task generation.
//! * [`decode`]: hybrid peeling/rooting decoder and exact rank tracking.
//! * [`analysis`]: exact decodability numbers and Monte Carlo thresholds.
//! * [`optimize`]: LP-based design of sampling degree distributions.
//! * [`sim`]: virtual-clock straggler simulation comparing the schemes.

pub mod degree;
pub mod analysis;
pub mod decode;
pub mod encode;
pub mod matrix;
pub mod optimize;
pub mod sim;

pub use analysis::{
    decodability_check, decodability_check_strengthened, degree_evolution,
    estimate_recovery_threshold, perfect_matching_probability, sequential_matching_probability,
    AnalysisError,
    DecodabilityReport, DegreeEvolution, ThresholdSummary,
};
pub use decode::{
    decode_polynomial, hybrid_decode, hybrid_decode_with, peeling_plan, rooting_combination,
    DecodeError, DecodeStats, EchelonState, PlanStep, RootingRule,
};
pub use encode::{CodedTask, CoefficientMatrix, EncodeError, PolynomialEncoding, TaskOutput, WeightRow, WeightSet};
pub use optimize::{
    feasibility_report, optimize_distribution, FeasibilityReport, OptimizationReport,
    OptimizeError, OptimizerConfig,
};
pub use sim::{
    aggregate, generate_random_sparse, run_experiment, run_trial, trials_csv, ExperimentConfig,
    ExperimentSummary, Scheme, SimConfig, SimError, TimeModel, TrialResult, ValueLaw, WorkerModel,
};
pub use degree::{DegreeDistribution, DegreeError, GeneratingEvaluation};
pub use matrix::{BlockGrid, MatrixError, RationalMatrix, SparseMatrix};

pub use num_bigint::BigInt;
pub use num_rational::BigRational;
