//! Degree distributions over `{1..d}` with exact rational probability mass.
//!
//! A coded task's support size is drawn from one of these distributions, so
//! their tails decide both the decoding threshold and the per-worker compute
//! cost. Probabilities are kept as exact rationals: downstream analysis
//! multiplies hundreds of them together and must make decodability decisions
//! that floating error cannot perturb.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::rational_to_f64;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum DegreeError {
    #[error("support size {d} below minimum {min}")]
    UnsupportedSupport { d: usize, min: usize },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("probabilities must be nonnegative and sum to 1, got sum {sum}")]
    NotNormalized { sum: String },
    #[error("bad serialized distribution: {0}")]
    Parse(String),
}

/// `tau = 35/18`, the wave soliton scaling constant.
fn tau() -> BigRational {
    BigRational::new(BigInt::from(35), BigInt::from(18))
}

// ---------------------------------------------------------------------------
// DegreeDistribution
// ---------------------------------------------------------------------------

/// Probability distribution over support sizes `1..=d`. `probs[k-1]` is the
/// probability of degree `k`; the masses are exact and sum to exactly one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DegreeDistributionRepr", into = "DegreeDistributionRepr")]
pub struct DegreeDistribution {
    d: usize,
    probs: Vec<BigRational>,
}

impl DegreeDistribution {
    /// Validates and wraps explicit probabilities.
    pub fn from_probs(probs: Vec<BigRational>) -> Result<Self, DegreeError> {
        if probs.is_empty() {
            return Err(DegreeError::UnsupportedSupport { d: 0, min: 1 });
        }
        if probs.iter().any(|p| p.is_negative()) {
            return Err(DegreeError::NotNormalized {
                sum: "negative mass".to_string(),
            });
        }
        let sum: BigRational = probs.iter().sum();
        if !sum.is_one() {
            return Err(DegreeError::NotNormalized {
                sum: sum.to_string(),
            });
        }
        Ok(DegreeDistribution {
            d: probs.len(),
            probs,
        })
    }

    /// Wave soliton distribution: `p_1 = tau/d`, `p_2 = tau/70`, and
    /// `p_k = tau/(k(k-1))` for `3 <= k <= d`. The tail telescopes to
    /// `1/2 - 1/d`, which cancels the `tau/d` head, so the mass sums to
    /// `tau * (1/70 + 1/2) = 1` exactly for every `d >= 3`.
    pub fn wave_soliton(d: usize) -> Result<Self, DegreeError> {
        if d < 3 {
            return Err(DegreeError::UnsupportedSupport { d, min: 3 });
        }
        let t = tau();
        let mut probs = Vec::with_capacity(d);
        probs.push(&t / BigInt::from(d as u64));
        probs.push(&t / BigInt::from(70));
        for k in 3..=d {
            probs.push(&t / BigInt::from((k * (k - 1)) as u64));
        }
        let dist = DegreeDistribution { d, probs };
        debug_assert!(dist.probs.iter().sum::<BigRational>().is_one());
        Ok(dist)
    }

    /// Standard robust soliton construction with spike parameter
    /// `R = c * ln(d/delta) * sqrt(d)`, renormalized exactly.
    pub fn robust_soliton(d: usize, c: f64, delta: f64) -> Result<Self, DegreeError> {
        if d < 1 {
            return Err(DegreeError::UnsupportedSupport { d, min: 1 });
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(DegreeError::InvalidParameter {
                name: "c",
                value: c,
            });
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(DegreeError::InvalidParameter {
                name: "delta",
                value: delta,
            });
        }
        let df = d as f64;
        let r = c * (df / delta).ln() * df.sqrt();
        let spike = ((df / r).round() as usize).clamp(1, d);
        let mut weights = Vec::with_capacity(d);
        for k in 1..=d {
            // Ideal soliton part, exact.
            let rho = if k == 1 {
                BigRational::new(BigInt::one(), BigInt::from(d as u64))
            } else {
                BigRational::new(BigInt::one(), BigInt::from((k * (k - 1)) as u64))
            };
            // Spike part, lifted exactly from its f64 value.
            let t = if k < spike {
                r / (k as f64 * df)
            } else if k == spike {
                (r * (r / delta).ln() / df).max(0.0)
            } else {
                0.0
            };
            weights.push(rho + BigRational::from_float(t).expect("finite weight"));
        }
        let total: BigRational = weights.iter().sum();
        let probs = weights.into_iter().map(|w| w / &total).collect();
        Ok(DegreeDistribution { d, probs })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn probs(&self) -> &[BigRational] {
        &self.probs
    }

    /// Probability of degree `k`, `1 <= k <= d`.
    pub fn prob(&self, k: usize) -> &BigRational {
        &self.probs[k - 1]
    }

    /// `sum_k k^s p_k`, exact.
    pub fn moment(&self, s: u32) -> BigRational {
        let mut acc = BigRational::zero();
        for (idx, p) in self.probs.iter().enumerate() {
            let k = BigInt::from((idx + 1) as u64);
            acc += p * BigRational::from_integer(k.pow(s));
        }
        acc
    }

    /// Mean support size, exact.
    pub fn mean_degree(&self) -> BigRational {
        self.moment(1)
    }

    /// Evaluates the generating polynomial `omega(x) = sum p_k x^k` and its
    /// derivative. Internally exact: at `x = 1` the derivative equals
    /// `mean_degree` down to the last bit.
    pub fn omega_eval(&self, x: f64) -> GeneratingEvaluation {
        let xr = BigRational::from_float(x).expect("finite evaluation point");
        let mut omega = BigRational::zero();
        let mut omega_prime = BigRational::zero();
        let mut pow = BigRational::one(); // x^(k-1)
        for (idx, p) in self.probs.iter().enumerate() {
            let k = idx + 1;
            omega_prime += p * BigRational::from_integer(BigInt::from(k as u64)) * &pow;
            pow *= &xr;
            omega += p * &pow;
        }
        GeneratingEvaluation {
            at: x,
            omega: rational_to_f64(&omega),
            omega_prime: rational_to_f64(&omega_prime),
        }
    }

    /// Right edge-degree view `omega'(x) / omega'(1)`.
    pub fn rho(&self, x: f64) -> f64 {
        self.omega_eval(x).omega_prime / rational_to_f64(&self.mean_degree())
    }

    /// Left edge-degree view for a decoder holding `k_rows` results:
    /// `[1 - omega'(1) (1 - x) / d]^(k_rows - 1)`.
    pub fn lambda(&self, x: f64, k_rows: usize) -> f64 {
        let mean = rational_to_f64(&self.mean_degree());
        (1.0 - mean * (1.0 - x) / self.d as f64).powi(k_rows as i32 - 1)
    }

    /// Draws a support: degree by inverse CDF, then a uniform subset of
    /// `{0..positions-1}` of that size, returned sorted. `positions` must
    /// equal `d`.
    pub fn sample_support<R: Rng + ?Sized>(&self, positions: usize, rng: &mut R) -> Vec<usize> {
        assert_eq!(
            positions, self.d,
            "support positions must match the distribution's d"
        );
        let mut cdf = Vec::with_capacity(self.d);
        let mut acc = BigRational::zero();
        for p in &self.probs {
            acc += p;
            cdf.push(rational_to_f64(&acc));
        }
        let u: f64 = rng.gen();
        let degree = cdf.partition_point(|&c| c <= u) + 1;
        let degree = degree.min(self.d);
        let mut support: Vec<usize> = rand::seq::index::sample(rng, positions, degree).into_vec();
        support.sort_unstable();
        support
    }
}

/// A generating-polynomial evaluation at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratingEvaluation {
    pub at: f64,
    pub omega: f64,
    pub omega_prime: f64,
}

// ---------------------------------------------------------------------------
// Serialization: {"d": 4, "probs": ["35/72", "1/36", ...]}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DegreeDistributionRepr {
    d: usize,
    probs: Vec<String>,
}

impl From<DegreeDistribution> for DegreeDistributionRepr {
    fn from(dist: DegreeDistribution) -> Self {
        DegreeDistributionRepr {
            d: dist.d,
            probs: dist
                .probs
                .iter()
                .map(|p| format!("{}/{}", p.numer(), p.denom()))
                .collect(),
        }
    }
}

impl TryFrom<DegreeDistributionRepr> for DegreeDistribution {
    type Error = DegreeError;

    fn try_from(repr: DegreeDistributionRepr) -> Result<Self, DegreeError> {
        if repr.d != repr.probs.len() {
            return Err(DegreeError::Parse(format!(
                "d = {} but {} probabilities",
                repr.d,
                repr.probs.len()
            )));
        }
        let probs = repr
            .probs
            .iter()
            .map(|s| s.parse::<BigRational>().map_err(|e| {
                DegreeError::Parse(format!("bad rational {s:?}: {e}"))
            }))
            .collect::<Result<Vec<_>, _>>()?;
        DegreeDistribution::from_probs(probs)
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Independent harmonic number, for the closed-form mean check.
    fn harmonic(n: usize) -> BigRational {
        (1..=n).map(|k| rat(1, k as i64)).sum()
    }

    #[test]
    fn wave_soliton_d4_matches_hand_values() {
        let w = DegreeDistribution::wave_soliton(4).unwrap();
        assert_eq!(
            w.probs(),
            &[rat(35, 72), rat(1, 36), rat(35, 108), rat(35, 216)]
        );
        let decimals: Vec<f64> = w.probs().iter().map(rational_to_f64).collect();
        let expect = [0.48611, 0.02778, 0.32407, 0.16204];
        for (got, want) in decimals.iter().zip(expect) {
            assert!((got - want).abs() < 5e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn wave_soliton_mass_is_exactly_one() {
        for d in 3..=80 {
            let w = DegreeDistribution::wave_soliton(d).unwrap();
            assert!(w.probs().iter().sum::<BigRational>().is_one(), "d = {d}");
        }
    }

    #[test]
    fn wave_soliton_rejects_tiny_support() {
        assert_eq!(
            DegreeDistribution::wave_soliton(2).unwrap_err(),
            DegreeError::UnsupportedSupport { d: 2, min: 3 }
        );
    }

    #[test]
    fn wave_mean_matches_closed_form() {
        // mean = tau * (1/d + 1/35 + H_{d-1} - 1)
        for d in 3..=40 {
            let w = DegreeDistribution::wave_soliton(d).unwrap();
            let closed =
                tau() * (rat(1, d as i64) + rat(1, 35) + harmonic(d - 1) - BigRational::one());
            assert_eq!(w.mean_degree(), closed, "d = {d}");
        }
        // Frozen: mean at d = 4 is 3269/1512 = 2.16204...
        let w4 = DegreeDistribution::wave_soliton(4).unwrap();
        assert_eq!(w4.mean_degree(), rat(3269, 1512));
    }

    #[test]
    fn omega_eval_is_exact_at_the_ends() {
        let w = DegreeDistribution::wave_soliton(4).unwrap();
        let at_one = w.omega_eval(1.0);
        assert_eq!(at_one.omega, 1.0);
        assert_eq!(at_one.omega_prime, rational_to_f64(&w.mean_degree()));
        assert!((at_one.omega_prime - 2.16204).abs() < 5e-6);
        let at_zero = w.omega_eval(0.0);
        assert_eq!(at_zero.omega, 0.0);
        assert_eq!(at_zero.omega_prime, rational_to_f64(w.prob(1)));
    }

    #[test]
    fn omega_is_monotone_on_unit_interval() {
        let w = DegreeDistribution::wave_soliton(6).unwrap();
        let mut last = -1.0;
        for i in 0..=20 {
            let e = w.omega_eval(i as f64 / 20.0);
            assert!(e.omega >= last);
            assert!(e.omega_prime >= 0.0);
            last = e.omega;
        }
        assert_eq!(w.rho(1.0), 1.0);
    }

    #[test]
    fn robust_soliton_normalizes_and_spikes() {
        for &(d, c, delta) in &[(16usize, 0.1, 0.5), (64, 0.1, 0.5), (25, 0.3, 0.2), (8, 0.9, 0.9)]
        {
            let r = DegreeDistribution::robust_soliton(d, c, delta).unwrap();
            assert!(r.probs().iter().sum::<BigRational>().is_one());
            assert!(r.probs().iter().all(|p| !p.is_negative()));
        }
        // d=64, c=0.1, delta=0.5: R = 0.1 * ln(128) * 8 = 3.881, spike at 16.
        let r = DegreeDistribution::robust_soliton(64, 0.1, 0.5).unwrap();
        assert!(r.prob(16) > r.prob(15), "spike missing");
        assert!(r.prob(17) < r.prob(16));
    }

    #[test]
    fn robust_soliton_approaches_ideal_for_vanishing_c() {
        let r = DegreeDistribution::robust_soliton(32, 1e-12, 0.5).unwrap();
        let p1 = rational_to_f64(r.prob(1));
        let p2 = rational_to_f64(r.prob(2));
        assert!((p1 - 1.0 / 32.0).abs() < 1e-6);
        assert!((p2 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn robust_soliton_rejects_bad_parameters() {
        assert!(DegreeDistribution::robust_soliton(8, 0.0, 0.5).is_err());
        assert!(DegreeDistribution::robust_soliton(8, 0.1, 0.0).is_err());
        assert!(DegreeDistribution::robust_soliton(8, 0.1, 1.0).is_err());
    }

    #[test]
    fn from_probs_validates() {
        assert!(DegreeDistribution::from_probs(vec![rat(1, 2), rat(1, 2)]).is_ok());
        assert!(matches!(
            DegreeDistribution::from_probs(vec![rat(1, 2), rat(1, 3)]),
            Err(DegreeError::NotNormalized { .. })
        ));
        assert!(DegreeDistribution::from_probs(vec![rat(3, 2), rat(-1, 2)]).is_err());
        assert!(DegreeDistribution::from_probs(vec![]).is_err());
    }

    #[test]
    fn serialization_round_trips_with_rational_strings() {
        let w = DegreeDistribution::wave_soliton(4).unwrap();
        let json = serde_json::to_string(&w).unwrap();
        assert!(json.contains("\"35/72\""), "json was {json}");
        assert!(json.contains("\"d\":4"));
        let back: DegreeDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, w);

        let parsed: DegreeDistribution =
            serde_json::from_str(r#"{"d":2,"probs":["1/2","1/2"]}"#).unwrap();
        assert_eq!(parsed.prob(1), &rat(1, 2));

        let bad = serde_json::from_str::<DegreeDistribution>(r#"{"d":2,"probs":["1/2","1/3"]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn sampling_is_deterministic_under_a_seed() {
        let w = DegreeDistribution::wave_soliton(8).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            assert_eq!(w.sample_support(8, &mut a), w.sample_support(8, &mut b));
        }
    }

    #[test]
    fn sampled_supports_are_sorted_distinct_and_in_range() {
        let w = DegreeDistribution::wave_soliton(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let s = w.sample_support(6, &mut rng);
            assert!(!s.is_empty() && s.len() <= 6);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.iter().all(|&i| i < 6));
        }
    }

    #[test]
    fn sampled_degree_histogram_matches_mass_within_three_sigma() {
        let w = DegreeDistribution::wave_soliton(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20240501);
        let n = 10_000usize;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[w.sample_support(4, &mut rng).len() - 1] += 1;
        }
        for k in 1..=4 {
            let p = rational_to_f64(w.prob(k));
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            let observed = counts[k - 1] as f64;
            assert!(
                (observed - n as f64 * p).abs() <= 3.0 * sigma,
                "degree {k}: observed {observed}, expected {}",
                n as f64 * p
            );
        }
    }
}
