//! Exact and Monte Carlo analysis of a degree distribution: how row degrees
//! evolve as blocks resolve, the probability that a square system supports a
//! perfect matching, a grid check of the peeling decodability inequality,
//! and an empirical recovery-threshold estimator.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::decode::{peeling_plan, EchelonState, PlanStep, RootingRule};
use crate::degree::DegreeDistribution;
use crate::encode::sparse_task_row;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: String },
    #[error("distribution supports degrees up to {dist_d}, grid has {grid} blocks")]
    DimensionMismatch { dist_d: usize, grid: usize },
}

// ---------------------------------------------------------------------------
// Degree evolution and perfect matching
// ---------------------------------------------------------------------------

/// Exact table of degree probabilities as the pool of unresolved blocks
/// shrinks from `d` to 1. `stage(s)` is the distribution of a row's degree
/// restricted to a uniform set of `s` surviving blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeEvolution {
    d: usize,
    /// `table[s - 1]` holds `[p_0^(s), ..., p_s^(s)]`.
    table: Vec<Vec<BigRational>>,
}

impl DegreeEvolution {
    pub fn d(&self) -> usize {
        self.d
    }

    /// The stage-`s` vector `[p_0^(s), ..., p_s^(s)]`, `1 <= s <= d`.
    pub fn stage(&self, s: usize) -> &[BigRational] {
        &self.table[s - 1]
    }

    /// Probability that a row has no surviving neighbors at stage `s`.
    pub fn isolated_probability(&self, s: usize) -> &BigRational {
        &self.table[s - 1][0]
    }
}

/// Runs the backward recursion
/// `p_k^(s) = p_k^(s+1) (1 - k/(s+1)) + p_{k+1}^(s+1) (k+1)/(s+1)`
/// from the full pool (`s = d`, where the table equals the distribution with
/// `p_0 = 0`) down to a single surviving block.
pub fn degree_evolution(dist: &DegreeDistribution) -> DegreeEvolution {
    let d = dist.d();
    let mut table = vec![Vec::new(); d];
    let mut current: Vec<BigRational> = std::iter::once(BigRational::zero())
        .chain((1..=d).map(|k| dist.prob(k).clone()))
        .collect();
    table[d - 1] = current.clone();
    for s in (1..d).rev() {
        // Step from s+1 surviving blocks to s.
        let next_pool = BigRational::from_integer(BigInt::from(s as u64 + 1));
        let mut reduced = vec![BigRational::zero(); s + 1];
        for (k, slot) in reduced.iter_mut().enumerate() {
            let keep = &current[k]
                * (BigRational::one()
                    - BigRational::from_integer(BigInt::from(k as u64)) / &next_pool);
            let drop = &current[k + 1]
                * (BigRational::from_integer(BigInt::from(k as u64 + 1)) / &next_pool);
            *slot = keep + drop;
        }
        table[s - 1] = reduced.clone();
        current = reduced;
    }
    DegreeEvolution { d, table }
}

/// Fast sequential estimate of the matching probability: the product of
/// `1 - p_0^(s)` over all evolution stages. This models a matcher that
/// pairs one row per stage against an independently re-drawn pool, so it
/// ignores the freedom to re-route earlier choices. It coincides with the
/// exact probability for singleton-only distributions and sits at or below
/// it on every instance we have checked; the optimizer uses it as a cheap
/// conservative surrogate (it is affine stage by stage in the input
/// probabilities, which the cutting-plane solver relies on).
pub fn sequential_matching_probability(dist: &DegreeDistribution) -> BigRational {
    let evolution = degree_evolution(dist);
    let mut product = BigRational::one();
    for s in 1..=dist.d() {
        product *= BigRational::one() - evolution.isolated_probability(s);
    }
    product
}

/// Exact probability that `d` independent rows drawn from the distribution
/// (over `d` blocks) form a bipartite graph with a perfect matching.
///
/// Computed by summing over unordered support profiles with multinomial
/// weights and testing each profile with an augmenting-path matcher, so the
/// cost grows exponentially in `d`; it is meant for small `d` (a handful of
/// milliseconds through d = 4, seconds at d = 5).
pub fn perfect_matching_probability(dist: &DegreeDistribution) -> BigRational {
    let d = dist.d();
    debug_assert!(d <= 31, "support masks use u32");
    // Distinct supports with their draw probabilities, zero-probability
    // degrees dropped.
    let mut supports: Vec<(u32, BigRational)> = Vec::new();
    for k in 1..=d {
        let pk = dist.prob(k);
        if pk.is_zero() {
            continue;
        }
        let mut ways = BigRational::one();
        for i in 0..k {
            ways *= BigRational::from_integer(BigInt::from((d - i) as u64))
                / BigRational::from_integer(BigInt::from((i + 1) as u64));
        }
        let share = pk / ways;
        for mask in 1u32..(1u32 << d) {
            if mask.count_ones() as usize == k {
                supports.push((mask, share.clone()));
            }
        }
    }

    let mut total = BigRational::zero();
    let mut chosen: Vec<usize> = Vec::with_capacity(d);
    let mut masks: Vec<u32> = Vec::with_capacity(d);
    profile_sum(
        &supports,
        d,
        0,
        &BigRational::one(),
        &mut chosen,
        &mut masks,
        &mut total,
    );
    total
}

/// DFS over nondecreasing support indices; prunes any prefix whose rows are
/// already unmatchable (adding rows never repairs that), so every completed
/// profile admits a perfect matching. At a leaf, adds the profile's draw
/// probability times the number of orderings (a multinomial over repeated
/// picks).
fn profile_sum(
    supports: &[(u32, BigRational)],
    d: usize,
    start: usize,
    prob_so_far: &BigRational,
    chosen: &mut Vec<usize>,
    masks: &mut Vec<u32>,
    total: &mut BigRational,
) {
    if chosen.len() == d {
        let mut orderings = BigRational::one();
        for i in 2..=d {
            orderings *= BigRational::from_integer(BigInt::from(i as u64));
        }
        let mut run = 1usize;
        for w in 1..chosen.len() {
            if chosen[w] == chosen[w - 1] {
                run += 1;
            } else {
                for i in 2..=run {
                    orderings /= BigRational::from_integer(BigInt::from(i as u64));
                }
                run = 1;
            }
        }
        for i in 2..=run {
            orderings /= BigRational::from_integer(BigInt::from(i as u64));
        }
        *total += prob_so_far * orderings;
        return;
    }
    for i in start..supports.len() {
        masks.push(supports[i].0);
        if !rows_saturable(masks, d) {
            masks.pop();
            continue;
        }
        chosen.push(i);
        let extended = prob_so_far * &supports[i].1;
        profile_sum(supports, d, i, &extended, chosen, masks, total);
        chosen.pop();
        masks.pop();
    }
}

/// Whether every row can be matched to a distinct column of `0..d`, via
/// augmenting paths.
fn rows_saturable(masks: &[u32], d: usize) -> bool {
    const FREE: usize = usize::MAX;
    fn try_row(row: usize, masks: &[u32], owner: &mut Vec<usize>, seen: &mut Vec<bool>) -> bool {
        for col in 0..owner.len() {
            if masks[row] >> col & 1 == 1 && !seen[col] {
                seen[col] = true;
                let current = owner[col];
                if current == FREE || try_row(current, masks, owner, seen) {
                    owner[col] = row;
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![FREE; d];
    for row in 0..masks.len() {
        let mut seen = vec![false; d];
        if !try_row(row, masks, &mut owner, &mut seen) {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Decodability inequality
// ---------------------------------------------------------------------------

/// Margins of the peeling decodability inequality on a grid. Positive
/// margins everywhere mean the condition holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodabilityReport {
    pub k_rows: usize,
    pub grid: Vec<f64>,
    pub margins: Vec<f64>,
    pub feasible: bool,
}

/// Plain form: for x on a uniform grid over `[b/d, 1]`, requires
/// `[1 - omega'(1-x)/d]^(K-1) <= x`. The margin stored per point is the
/// right side minus the left.
pub fn decodability_check(
    dist: &DegreeDistribution,
    k_rows: usize,
    b: usize,
    grid_points: usize,
) -> Result<DecodabilityReport, AnalysisError> {
    let d = dist.d();
    if k_rows < 1 {
        return Err(AnalysisError::InvalidParameter {
            name: "k_rows",
            value: k_rows.to_string(),
        });
    }
    if b < 1 || b >= d {
        return Err(AnalysisError::InvalidParameter {
            name: "b",
            value: b.to_string(),
        });
    }
    if grid_points < 2 {
        return Err(AnalysisError::InvalidParameter {
            name: "grid_points",
            value: grid_points.to_string(),
        });
    }
    let lo = b as f64 / d as f64;
    let mut grid = Vec::with_capacity(grid_points);
    let mut margins = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        let x = lo + (1.0 - lo) * i as f64 / (grid_points - 1) as f64;
        let omega_prime = dist.omega_eval(1.0 - x).omega_prime;
        let base = (1.0 - omega_prime / d as f64).max(0.0);
        margins.push(x - base.powi(k_rows as i32 - 1));
        grid.push(x);
    }
    let feasible = margins.iter().all(|&m| m >= 0.0);
    Ok(DecodabilityReport {
        k_rows,
        grid,
        margins,
        feasible,
    })
}

/// Strengthened form used by the optimizer: for x on a uniform grid over
/// `[0, 1 - b/d]`, requires
/// `[1 - omega'(x)/d]^(d+c) <= 1 - x - c0 sqrt((1-x)/d)`.
pub fn decodability_check_strengthened(
    dist: &DegreeDistribution,
    c: f64,
    c0: f64,
    b: usize,
    grid_points: usize,
) -> Result<DecodabilityReport, AnalysisError> {
    let d = dist.d();
    if b < 1 || b >= d {
        return Err(AnalysisError::InvalidParameter {
            name: "b",
            value: b.to_string(),
        });
    }
    if grid_points < 2 {
        return Err(AnalysisError::InvalidParameter {
            name: "grid_points",
            value: grid_points.to_string(),
        });
    }
    if !c.is_finite() || !c0.is_finite() || c0 < 0.0 {
        return Err(AnalysisError::InvalidParameter {
            name: "c/c0",
            value: format!("{c}/{c0}"),
        });
    }
    let hi = 1.0 - b as f64 / d as f64;
    let mut grid = Vec::with_capacity(grid_points);
    let mut margins = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        let x = hi * i as f64 / (grid_points - 1) as f64;
        let omega_prime = dist.omega_eval(x).omega_prime;
        let base = (1.0 - omega_prime / d as f64).max(0.0);
        let rhs = 1.0 - x - c0 * ((1.0 - x) / d as f64).sqrt();
        margins.push(rhs - base.powf(d as f64 + c));
        grid.push(x);
    }
    let feasible = margins.iter().all(|&m| m >= 0.0);
    Ok(DecodabilityReport {
        k_rows: d,
        grid,
        margins,
        feasible,
    })
}

// ---------------------------------------------------------------------------
// Recovery-threshold estimation
// ---------------------------------------------------------------------------

/// Monte Carlo summary of the minimal number of rows needed for full rank,
/// plus how often the decoder would have to fall back to rooting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSummary {
    pub mn: usize,
    pub trials: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: usize,
    pub max: usize,
    /// (minimal K, trial count), ascending in K.
    pub histogram: Vec<(usize, usize)>,
    pub rooted_mean: f64,
    pub rooted_histogram: Vec<(usize, usize)>,
    /// Fraction of trials where the first `mn` rows already had full rank.
    pub full_rank_rate_at_mn: f64,
}

impl ThresholdSummary {
    /// The minimal-K histogram as CSV with a `K,count` header.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("K,count\n");
        for (k, count) in &self.histogram {
            out.push_str(&format!("{k},{count}\n"));
        }
        out
    }
}

/// Streams coded rows trial by trial, recording the minimal K reaching rank
/// `mn` and the rooting steps the decoder would take on those K rows.
/// Trials run in parallel; trial `t` uses stream `t` of a generator seeded
/// with `seed`, so results are reproducible regardless of thread count.
pub fn estimate_recovery_threshold(
    dist: &DegreeDistribution,
    m: usize,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<ThresholdSummary, AnalysisError> {
    let mn = m * n;
    if trials < 1 {
        return Err(AnalysisError::InvalidParameter {
            name: "trials",
            value: trials.to_string(),
        });
    }
    if dist.d() != mn {
        return Err(AnalysisError::DimensionMismatch {
            dist_d: dist.d(),
            grid: mn,
        });
    }

    let per_trial: Vec<(usize, usize)> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let mut rows: Vec<Vec<usize>> = Vec::new();
            let mut state = EchelonState::new(mn);
            let cap = 1000 * mn + 50;
            while !state.is_full_rank() {
                assert!(
                    rows.len() < cap,
                    "trial exceeded {cap} rows without reaching full rank"
                );
                let row = sparse_task_row(dist, m, n, &mut rng);
                rows.push(row.iter().map(|(col, _)| *col).collect());
                state.insert(&row);
            }
            let ids: Vec<usize> = (0..rows.len()).collect();
            let plan = peeling_plan(&rows, &ids, mn, RootingRule::MaxIncidence);
            let rooted = plan
                .iter()
                .filter(|step| matches!(step, PlanStep::Root { .. }))
                .count();
            (rows.len(), rooted)
        })
        .collect();

    let mean = per_trial.iter().map(|&(k, _)| k as f64).sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        per_trial
            .iter()
            .map(|&(k, _)| (k as f64 - mean).powi(2))
            .sum::<f64>()
            / (trials as f64 - 1.0)
    } else {
        0.0
    };
    let rooted_mean =
        per_trial.iter().map(|&(_, r)| r as f64).sum::<f64>() / trials as f64;
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let mut rooted_histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let mut at_mn = 0usize;
    for &(k, rooted) in &per_trial {
        *histogram.entry(k).or_insert(0) += 1;
        *rooted_histogram.entry(rooted).or_insert(0) += 1;
        if k == mn {
            at_mn += 1;
        }
    }
    Ok(ThresholdSummary {
        mn,
        trials,
        mean,
        std_dev: var.sqrt(),
        min: per_trial.iter().map(|&(k, _)| k).min().unwrap(),
        max: per_trial.iter().map(|&(k, _)| k).max().unwrap(),
        histogram: histogram.into_iter().collect(),
        rooted_mean,
        rooted_histogram: rooted_histogram.into_iter().collect(),
        full_rank_rate_at_mn: at_mn as f64 / trials as f64,
    })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn point_mass(d: usize, at: usize) -> DegreeDistribution {
        let mut probs = vec![BigRational::zero(); d];
        probs[at - 1] = BigRational::one();
        DegreeDistribution::from_probs(probs).unwrap()
    }

    fn from_ratios(entries: &[(i64, i64)]) -> DegreeDistribution {
        DegreeDistribution::from_probs(
            entries.iter().map(|&(n, d)| rat(n, d)).collect(),
        )
        .unwrap()
    }

    // ---- independent enumeration oracle ----

    fn factorial(n: usize) -> BigInt {
        (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
    }

    fn binomial(n: usize, k: usize) -> BigInt {
        &factorial(n) / (factorial(k) * factorial(n - k))
    }

    fn has_perfect_matching(masks: &[u32], d: usize) -> bool {
        fn assign(row: usize, masks: &[u32], used: u32, d: usize) -> bool {
            if row == masks.len() {
                return true;
            }
            for col in 0..d {
                let bit = 1u32 << col;
                if masks[row] & bit != 0 && used & bit == 0
                    && assign(row + 1, masks, used | bit, d)
                {
                    return true;
                }
            }
            false
        }
        masks.len() == d && assign(0, masks, 0, d)
    }

    /// Walks every ordered assignment of one support per row with an
    /// odometer, multiplies the independent row probabilities, and asks a
    /// permutation-backtracking matcher whether the graph matches. The
    /// dumbest possible computation; shares nothing with the library's
    /// profile enumeration or its augmenting-path matcher.
    fn enumerate_matching_probability(dist: &DegreeDistribution) -> BigRational {
        let d = dist.d();
        let mut supports: Vec<(u32, BigRational)> = Vec::new();
        for k in 1..=d {
            let pk = dist.prob(k).clone();
            if pk.is_zero() {
                continue;
            }
            let share = pk / BigRational::from_integer(binomial(d, k));
            for mask in 1u32..(1 << d) {
                if mask.count_ones() as usize == k {
                    supports.push((mask, share.clone()));
                }
            }
        }
        let mut total = BigRational::zero();
        let mut odometer = vec![0usize; d];
        loop {
            let masks: Vec<u32> = odometer.iter().map(|&i| supports[i].0).collect();
            if has_perfect_matching(&masks, d) {
                let mut prob = BigRational::one();
                for &i in &odometer {
                    prob *= &supports[i].1;
                }
                total += prob;
            }
            // advance
            let mut pos = 0;
            loop {
                if pos == d {
                    return total;
                }
                odometer[pos] += 1;
                if odometer[pos] < supports.len() {
                    break;
                }
                odometer[pos] = 0;
                pos += 1;
            }
        }
    }

    // ---- degree evolution ----

    #[test]
    fn evolution_rows_sum_to_one_exactly() {
        for dist in [
            DegreeDistribution::wave_soliton(6).unwrap(),
            DegreeDistribution::robust_soliton(8, 0.05, 0.5).unwrap(),
            from_ratios(&[(1, 3), (1, 3), (1, 3)]),
        ] {
            let evo = degree_evolution(&dist);
            for s in 1..=dist.d() {
                let sum: BigRational = evo.stage(s).iter().sum();
                assert!(sum.is_one(), "stage {s} sums to {sum}");
                assert!(evo.stage(s).iter().all(|p| !p.is_negative()));
            }
            // The top stage is the distribution itself with p_0 = 0.
            assert!(evo.stage(dist.d())[0].is_zero());
            for k in 1..=dist.d() {
                assert_eq!(&evo.stage(dist.d())[k], dist.prob(k));
            }
        }
    }

    #[test]
    fn single_step_hand_values() {
        let evo = degree_evolution(&point_mass(2, 1));
        assert_eq!(*evo.isolated_probability(1), rat(1, 2));
        let evo = degree_evolution(&point_mass(2, 2));
        assert_eq!(*evo.isolated_probability(1), rat(0, 1));
    }

    // ---- matching probability vs enumeration ----

    #[test]
    fn matching_matches_enumeration_for_small_d() {
        let cases: Vec<DegreeDistribution> = vec![
            point_mass(2, 1),
            point_mass(2, 2),
            from_ratios(&[(1, 2), (1, 2)]),
            point_mass(3, 1),
            point_mass(3, 2),
            point_mass(3, 3),
            from_ratios(&[(1, 3), (1, 3), (1, 3)]),
            from_ratios(&[(1, 2), (0, 1), (1, 2)]),
            DegreeDistribution::wave_soliton(3).unwrap(),
            point_mass(4, 1),
            point_mass(4, 2),
            from_ratios(&[(1, 4), (1, 4), (1, 4), (1, 4)]),
            from_ratios(&[(1, 6), (1, 3), (1, 3), (1, 6)]),
            DegreeDistribution::wave_soliton(4).unwrap(),
        ];
        for dist in &cases {
            let exact = perfect_matching_probability(dist);
            let brute = enumerate_matching_probability(dist);
            assert_eq!(exact, brute, "d = {}", dist.d());
        }
    }

    #[test]
    fn matching_frozen_values() {
        assert_eq!(perfect_matching_probability(&point_mass(2, 1)), rat(1, 2));
        assert_eq!(perfect_matching_probability(&point_mass(2, 2)), rat(1, 1));
        assert_eq!(perfect_matching_probability(&point_mass(3, 1)), rat(2, 9));
        // Half singletons, half pairs over two blocks: fails only when both
        // rows draw the same singleton, so 1 - 2/16.
        assert_eq!(
            perfect_matching_probability(&from_ratios(&[(1, 2), (1, 2)])),
            rat(7, 8)
        );
        // All-pairs over three blocks: fails only when the rows coincide.
        assert_eq!(perfect_matching_probability(&point_mass(3, 2)), rat(8, 9));
    }

    #[test]
    fn sequential_estimate_is_frozen_and_never_above_truth() {
        // Exact for singletons, where adaptivity buys nothing.
        assert_eq!(sequential_matching_probability(&point_mass(2, 1)), rat(1, 2));
        assert_eq!(sequential_matching_probability(&point_mass(3, 1)), rat(2, 9));
        // Below the truth once degrees mix (7/8 and 8/9 above).
        assert_eq!(
            sequential_matching_probability(&from_ratios(&[(1, 2), (1, 2)])),
            rat(3, 4)
        );
        assert_eq!(sequential_matching_probability(&point_mass(3, 2)), rat(2, 3));
        assert_eq!(
            sequential_matching_probability(&point_mass(6, 2)),
            rat(168, 1125)
        );
        for dist in [
            point_mass(4, 2),
            from_ratios(&[(1, 4), (1, 4), (1, 4), (1, 4)]),
            from_ratios(&[(1, 6), (1, 3), (1, 3), (1, 6)]),
            DegreeDistribution::wave_soliton(4).unwrap(),
            DegreeDistribution::wave_soliton(3).unwrap(),
        ] {
            let estimate = sequential_matching_probability(&dist);
            let truth = perfect_matching_probability(&dist);
            assert!(estimate <= truth, "estimate {estimate} above truth {truth}");
        }
    }

    #[test]
    fn matching_monotone_under_upward_degree_shifts() {
        // Moving mass from degree k to degree k+1 cannot hurt matching.
        let chain = vec![
            point_mass(3, 1),
            from_ratios(&[(1, 2), (1, 2), (0, 1)]),
            point_mass(3, 2),
            from_ratios(&[(0, 1), (1, 2), (1, 2)]),
            point_mass(3, 3),
        ];
        for pair in chain.windows(2) {
            let lo = perfect_matching_probability(&pair[0]);
            let hi = perfect_matching_probability(&pair[1]);
            assert!(lo <= hi, "{lo} > {hi}");
        }
        // The sequential estimate shares the property, cheap enough to
        // check at the optimizer's working size.
        let chain = vec![
            point_mass(6, 1),
            point_mass(6, 2),
            point_mass(6, 3),
            point_mass(6, 6),
        ];
        for pair in chain.windows(2) {
            let lo = sequential_matching_probability(&pair[0]);
            let hi = sequential_matching_probability(&pair[1]);
            assert!(lo <= hi, "{lo} > {hi}");
        }
    }

    // ---- decodability ----

    #[test]
    fn decodability_margin_at_one_is_never_negative() {
        for dist in [
            DegreeDistribution::wave_soliton(8).unwrap(),
            point_mass(5, 1),
            point_mass(5, 5),
        ] {
            for k_rows in [1, 2, 10] {
                let report = decodability_check(&dist, k_rows, 2, 50).unwrap();
                assert!(report.margins.last().unwrap() >= &0.0);
                assert_eq!(report.grid.len(), 50);
                assert_eq!(*report.grid.last().unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn decodability_closed_form_full_degree() {
        // All rows full degree: omega'(1-x)/d = (1-x)^(d-1).
        let d = 3;
        let dist = point_mass(d, d);
        let k_rows = 4;
        let report = decodability_check(&dist, k_rows, 1, 7).unwrap();
        for (x, margin) in report.grid.iter().zip(&report.margins) {
            let base: f64 = 1.0 - (1.0 - x).powi(d as i32 - 1);
            let expect = x - base.powi(k_rows as i32 - 1);
            assert!((margin - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn decodability_feasibility_is_monotone_in_k() {
        let dist = DegreeDistribution::wave_soliton(16).unwrap();
        let mut first_feasible = None;
        for k_rows in 1..200 {
            let report = decodability_check(&dist, k_rows, 2, 100).unwrap();
            if report.feasible {
                first_feasible = Some(k_rows);
                break;
            }
        }
        let k_star = first_feasible.expect("some K is feasible");
        assert!(!decodability_check(&dist, k_star - 1, 2, 100).unwrap().feasible);
        assert!(decodability_check(&dist, k_star + 5, 2, 100).unwrap().feasible);
        // Margins grow pointwise with K.
        let lo = decodability_check(&dist, 20, 2, 100).unwrap();
        let hi = decodability_check(&dist, 21, 2, 100).unwrap();
        for (a, b) in lo.margins.iter().zip(&hi.margins) {
            assert!(b >= a);
        }
    }

    #[test]
    fn strengthened_form_runs_and_matches_hand_value_at_zero() {
        let dist = DegreeDistribution::wave_soliton(6).unwrap();
        let report = decodability_check_strengthened(&dist, 2.0, 0.1, 2, 5).unwrap();
        assert_eq!(report.grid[0], 0.0);
        let p1 = crate::matrix::rational_to_f64(dist.prob(1));
        let expect = (1.0 - 0.1 * (1.0f64 / 6.0).sqrt())
            - (1.0 - p1 / 6.0).powf(8.0);
        assert!((report.margins[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn parameter_validation() {
        let dist = DegreeDistribution::wave_soliton(6).unwrap();
        assert!(decodability_check(&dist, 0, 2, 10).is_err());
        assert!(decodability_check(&dist, 5, 0, 10).is_err());
        assert!(decodability_check(&dist, 5, 6, 10).is_err());
        assert!(decodability_check(&dist, 5, 2, 1).is_err());
        assert!(estimate_recovery_threshold(&dist, 2, 2, 10, 7).is_err());
        assert!(estimate_recovery_threshold(&dist, 2, 3, 0, 7).is_err());
    }

    // ---- threshold estimation ----

    #[test]
    fn coupon_collector_threshold_matches_analytic_mean() {
        let mn = 9;
        let dist = point_mass(mn, 1);
        let summary = estimate_recovery_threshold(&dist, 3, 3, 300, 11).unwrap();
        let h: f64 = (1..=mn).map(|k| 1.0 / k as f64).sum();
        let analytic = mn as f64 * h;
        assert!(
            (summary.mean - analytic).abs() / analytic < 0.10,
            "mean {} vs analytic {analytic}",
            summary.mean
        );
        // Singleton rows never need rooting.
        assert_eq!(summary.rooted_mean, 0.0);
    }

    #[test]
    fn threshold_summary_is_deterministic_and_consistent() {
        let dist = DegreeDistribution::wave_soliton(9).unwrap();
        let a = estimate_recovery_threshold(&dist, 3, 3, 60, 5).unwrap();
        let b = estimate_recovery_threshold(&dist, 3, 3, 60, 5).unwrap();
        assert_eq!(a, b);
        let total: usize = a.histogram.iter().map(|(_, c)| c).sum();
        assert_eq!(total, a.trials);
        let weighted: f64 = a
            .histogram
            .iter()
            .map(|&(k, c)| k as f64 * c as f64)
            .sum::<f64>()
            / a.trials as f64;
        assert!((weighted - a.mean).abs() < 1e-9);
        assert!(a.min >= 9 && a.max >= a.min);
        assert!(a.full_rank_rate_at_mn >= 0.0 && a.full_rank_rate_at_mn <= 1.0);
        let csv = a.histogram_csv();
        assert!(csv.starts_with("K,count\n"));
        assert_eq!(csv.lines().count(), a.histogram.len() + 1);
    }

    #[test]
    fn wave_threshold_runs_close_to_mn() {
        let dist = DegreeDistribution::wave_soliton(9).unwrap();
        let summary = estimate_recovery_threshold(&dist, 3, 3, 120, 3).unwrap();
        assert!(summary.mean >= 9.0);
        assert!(
            summary.mean <= 1.35 * 9.0,
            "wave(9) mean {}",
            summary.mean
        );
    }
}
