//! Accumulation of the ensemble moments Pₙ(k) = ⟨Prob(k)ⁿ⟩ over random
//! unitaries: per outcome k, pooled over outcomes, with empirical standard
//! errors and the order-to-order covariances the error propagation needs.
//!
//! Accumulators form a commutative monoid under [`MomentAccumulator::merge`],
//! so a unitary stream can be split across workers and combined in any
//! order. Compensated summation keeps the merge laws tight (≤ 1e-12
//! relative) and makes results independent of the work schedule.
//!
//! Finite-shot data enters through the factorial-moment estimator
//! c(c−1)⋯(c−n+1)/(S(S−1)⋯(S−n+1)), whose expectation under multinomial
//! sampling is exactly Prob(k)ⁿ — unlike the naive plug-in (c/S)ⁿ, which is
//! biased high at O(1/S).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::OutcomeProbabilities;

/// Highest moment order the accumulator can track.
pub const MAX_STRUCTURAL_ORDER: usize = 8;
/// Covariances are tracked between orders up to this (the invertible range).
const COV_ORDERS: usize = 4;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
struct CompensatedSum {
    sum: f64,
    residue: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.residue += (self.sum - t) + v;
        } else {
            self.residue += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.residue);
    }

    fn value(&self) -> f64 {
        self.sum + self.residue
    }
}

fn pair_slot(a: usize, b: usize) -> usize {
    debug_assert!(a < b && (1..=COV_ORDERS).contains(&a) && b <= COV_ORDERS);
    match (a, b) {
        (1, 2) => 0,
        (1, 3) => 1,
        (1, 4) => 2,
        (2, 3) => 3,
        (2, 4) => 4,
        _ => 5,
    }
}

/// Unbiased estimator of Prob(k)ⁿ from a count of `c` in `s` shots:
/// the ratio of falling factorials c⁽ⁿ⁾/s⁽ⁿ⁾; zero when c < n.
pub fn factorial_moment_estimate(c: u64, s: u64, order: usize) -> f64 {
    debug_assert!(s as usize >= order);
    let mut v = 1.0;
    for i in 0..order as u64 {
        if c <= i {
            return 0.0;
        }
        v *= (c - i) as f64 / (s - i) as f64;
    }
    v
}

/// Running moment sums over absorbed unitaries.
///
/// Tracks, for each order n = 1..=max_n and outcome k: Σ cₙ(k) and
/// Σ cₙ(k)², where cₙ(k) is the per-unitary contribution (Prob(k)ⁿ in exact
/// mode, the factorial-moment estimate from counts otherwise); plus the
/// same sums for the k-averaged contributions and their order-pair cross
/// products (orders ≤ 4), from which [`MomentTable`] derives covariances.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentAccumulator {
    m: usize,
    max_n: usize,
    count: u64,
    sums: Vec<Vec<CompensatedSum>>,
    sumsq: Vec<Vec<CompensatedSum>>,
    cross: Vec<Vec<CompensatedSum>>,
    pooled_sums: Vec<CompensatedSum>,
    pooled_sumsq: Vec<CompensatedSum>,
    pooled_cross: Vec<CompensatedSum>,
}

impl MomentAccumulator {
    /// Tracks orders 1..=4, the invertible range.
    pub fn new(m: usize) -> Self {
        Self::with_max_order(m, 4).expect("default order is valid")
    }

    pub fn with_max_order(m: usize, max_n: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidDimension);
        }
        if !(1..=MAX_STRUCTURAL_ORDER).contains(&max_n) {
            return Err(Error::OrderOutOfRange(max_n, 1, MAX_STRUCTURAL_ORDER));
        }
        let zeros_k = || vec![CompensatedSum::default(); m];
        Ok(Self {
            m,
            max_n,
            count: 0,
            sums: (0..max_n).map(|_| zeros_k()).collect(),
            sumsq: (0..max_n).map(|_| zeros_k()).collect(),
            cross: (0..6).map(|_| zeros_k()).collect(),
            pooled_sums: vec![CompensatedSum::default(); max_n],
            pooled_sumsq: vec![CompensatedSum::default(); max_n],
            pooled_cross: vec![CompensatedSum::default(); 6],
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    /// Unitaries absorbed so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    fn absorb_contributions(&mut self, contrib: &[Vec<f64>]) {
        let cov_n = self.max_n.min(COV_ORDERS);
        let mut pooled = vec![0.0f64; self.max_n];
        for (n, per_k) in contrib.iter().enumerate() {
            for (k, &c) in per_k.iter().enumerate() {
                self.sums[n][k].add(c);
                self.sumsq[n][k].add(c * c);
                pooled[n] += c;
            }
            pooled[n] /= self.m as f64;
        }
        for n in 0..self.max_n {
            self.pooled_sums[n].add(pooled[n]);
            self.pooled_sumsq[n].add(pooled[n] * pooled[n]);
        }
        for a in 1..=cov_n {
            for b in (a + 1)..=cov_n {
                let slot = pair_slot(a, b);
                for k in 0..self.m {
                    let prod = contrib[a - 1][k] * contrib[b - 1][k];
                    self.cross[slot][k].add(prod);
                }
                self.pooled_cross[slot].add(pooled[a - 1] * pooled[b - 1]);
            }
        }
        self.count += 1;
    }

    /// Absorbs one unitary's exact outcome probabilities: cₙ(k) = value[k]ⁿ.
    pub fn absorb_exact(&mut self, probs: &OutcomeProbabilities) -> Result<()> {
        if probs.m() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: probs.m() });
        }
        if probs.shots_used() != 0 {
            return Err(Error::InvalidScenario(
                "absorb_exact requires analytic probabilities, not frequencies".into(),
            ));
        }
        let mut contrib = vec![vec![0.0f64; self.m]; self.max_n];
        for (k, &p) in probs.values().iter().enumerate() {
            let mut pw = 1.0;
            for n in 0..self.max_n {
                pw *= p;
                contrib[n][k] = pw;
            }
        }
        self.absorb_contributions(&contrib);
        Ok(())
    }

    /// Absorbs one unitary's finite-shot counts through the unbiased
    /// factorial-moment estimator. `counts` covers the M outcomes (a
    /// trailing residual bucket is allowed and ignored).
    pub fn absorb_counts(&mut self, counts: &[u64], shots: u64) -> Result<()> {
        if counts.len() != self.m && counts.len() != self.m + 1 {
            return Err(Error::DimensionMismatch { expected: self.m, got: counts.len() });
        }
        if (shots as usize) < self.max_n {
            return Err(Error::InsufficientShots { needed: self.max_n, got: shots });
        }
        let total: u64 = counts.iter().sum();
        if total != shots {
            return Err(Error::InvalidScenario(format!(
                "counts sum to {total}, expected {shots} shots"
            )));
        }
        let mut contrib = vec![vec![0.0f64; self.m]; self.max_n];
        for k in 0..self.m {
            for n in 0..self.max_n {
                contrib[n][k] = factorial_moment_estimate(counts[k], shots, n + 1);
            }
        }
        self.absorb_contributions(&contrib);
        Ok(())
    }

    /// Combines two accumulators over disjoint unitary streams. Exactly the
    /// monoid operation: `merge(a, b)` equals accumulating both streams into
    /// one accumulator, up to compensated-summation rounding.
    pub fn merge(&mut self, other: &MomentAccumulator) -> Result<()> {
        if self.m != other.m || self.max_n != other.max_n {
            return Err(Error::AccumulatorShapeMismatch(self.m, self.max_n, other.m, other.max_n));
        }
        self.count += other.count;
        for n in 0..self.max_n {
            for k in 0..self.m {
                self.sums[n][k].merge(&other.sums[n][k]);
                self.sumsq[n][k].merge(&other.sumsq[n][k]);
            }
            self.pooled_sums[n].merge(&other.pooled_sums[n]);
            self.pooled_sumsq[n].merge(&other.pooled_sumsq[n]);
        }
        for slot in 0..6 {
            for k in 0..self.m {
                self.cross[slot][k].merge(&other.cross[slot][k]);
            }
            self.pooled_cross[slot].merge(&other.pooled_cross[slot]);
        }
        Ok(())
    }

    /// Derives the moment table: per-outcome and pooled Pₙ estimates with
    /// standard errors and covariances of the means. Needs ≥ 2 unitaries.
    pub fn moment_table(&self) -> Result<MomentTable> {
        if self.count < 2 {
            return Err(Error::InsufficientData { needed: 2, got: self.count });
        }
        let count = self.count as f64;
        let cov_n = self.max_n.min(COV_ORDERS);
        let build = |sum: &dyn Fn(usize) -> f64,
                     sq: &dyn Fn(usize) -> f64,
                     cr: &dyn Fn(usize) -> f64|
         -> MomentEstimates {
            let mut p = vec![0.0; self.max_n];
            let mut std_err = vec![0.0; self.max_n];
            let mut cov = [[0.0f64; COV_ORDERS]; COV_ORDERS];
            for n in 0..self.max_n {
                p[n] = sum(n) / count;
                // Sample variance of the mean, (count − 1) normalization.
                let var = (sq(n) / count - p[n] * p[n]).max(0.0) / (count - 1.0);
                std_err[n] = var.sqrt();
                if n < COV_ORDERS {
                    cov[n][n] = var;
                }
            }
            for a in 1..=cov_n {
                for b in (a + 1)..=cov_n {
                    let mean_ab = cr(pair_slot(a, b)) / count;
                    let c = (mean_ab - p[a - 1] * p[b - 1]) / (count - 1.0);
                    cov[a - 1][b - 1] = c;
                    cov[b - 1][a - 1] = c;
                }
            }
            MomentEstimates { count: self.count, p, std_err, cov }
        };
        let per_k = (0..self.m)
            .map(|k| {
                build(
                    &|n| self.sums[n][k].value(),
                    &|n| self.sumsq[n][k].value(),
                    &|s| self.cross[s][k].value(),
                )
            })
            .collect();
        let pooled = build(
            &|n| self.pooled_sums[n].value(),
            &|n| self.pooled_sumsq[n].value(),
            &|s| self.pooled_cross[s].value(),
        );
        Ok(MomentTable { m: self.m, max_n: self.max_n, count: self.count, per_k, pooled })
    }
}

/// A set of moment estimates P₁..P_max with empirical standard errors and
/// (orders ≤ 4) the covariance matrix of the mean estimators.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub count: u64,
    /// `p[n-1]` estimates Pₙ.
    pub p: Vec<f64>,
    /// Standard error of each mean.
    pub std_err: Vec<f64>,
    cov: [[f64; COV_ORDERS]; COV_ORDERS],
}

impl MomentEstimates {
    /// Synthetic moment set with zero variance — e.g. analytically known
    /// moments fed to an inversion, where no sampling noise exists.
    pub fn from_values(p: Vec<f64>, count: u64) -> Self {
        let std_err = vec![0.0; p.len()];
        Self { count, p, std_err, cov: [[0.0; COV_ORDERS]; COV_ORDERS] }
    }

    /// Synthetic moment set with a prescribed covariance of the means, for
    /// exercising the error propagation against known inputs.
    #[cfg(test)]
    pub(crate) fn from_values_with_cov(
        p: Vec<f64>,
        cov: [[f64; COV_ORDERS]; COV_ORDERS],
        count: u64,
    ) -> Self {
        let std_err = (0..p.len()).map(|i| cov[i][i].sqrt()).collect();
        Self { count, p, std_err, cov }
    }

    pub fn max_n(&self) -> usize {
        self.p.len()
    }

    /// Pₙ point estimate (1-based order).
    pub fn moment(&self, n: usize) -> f64 {
        self.p[n - 1]
    }

    /// Covariance of the mean estimators of P_a and P_b (1-based orders,
    /// both ≤ 4).
    pub fn covariance(&self, a: usize, b: usize) -> f64 {
        self.cov[a - 1][b - 1]
    }
}

/// Moment estimates per outcome plus pooled over outcomes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentTable {
    pub m: usize,
    pub max_n: usize,
    pub count: u64,
    pub per_k: Vec<MomentEstimates>,
    /// Estimates from k-averaged contributions — the "pool moments, then
    /// invert once" path.
    pub pooled: MomentEstimates,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn probs(values: &[f64]) -> OutcomeProbabilities {
        OutcomeProbabilities::from_values(values.to_vec(), 0).unwrap()
    }

    #[test]
    fn absorb_exact_accumulates_powers() {
        let mut acc = MomentAccumulator::new(2);
        acc.absorb_exact(&probs(&[0.5, 0.25])).unwrap();
        assert_eq!(acc.count(), 1);
        // Internal sums are exposed only via the table; absorb a second
        // time and read means instead.
        acc.absorb_exact(&probs(&[0.5, 0.25])).unwrap();
        let table = acc.moment_table().unwrap();
        assert_abs_diff_eq!(table.per_k[0].moment(2), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(table.per_k[1].moment(2), 0.0625, epsilon = 1e-15);
        assert_abs_diff_eq!(table.per_k[0].moment(4), 0.0625, epsilon = 1e-15);
        // Identical absorptions: zero standard error.
        assert_eq!(table.per_k[0].std_err[1], 0.0);
        assert_eq!(table.pooled.std_err[0], 0.0);
        assert_abs_diff_eq!(table.pooled.moment(1), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn absorb_exact_rejects_mismatch_and_frequencies() {
        let mut acc = MomentAccumulator::new(2);
        assert!(acc.absorb_exact(&probs(&[1.0])).is_err());
        let freqs = OutcomeProbabilities::from_counts(&[3, 7], 10).unwrap();
        assert!(matches!(acc.absorb_exact(&freqs), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn factorial_estimates_edge_values() {
        // All shots on one outcome: estimator is 1 at every order.
        for n in 1..=4 {
            assert_abs_diff_eq!(factorial_moment_estimate(100, 100, n), 1.0, epsilon = 1e-15);
        }
        // One count carries no pair evidence.
        assert_eq!(factorial_moment_estimate(1, 1000, 2), 0.0);
        assert_eq!(factorial_moment_estimate(0, 1000, 1), 0.0);
        assert_abs_diff_eq!(
            factorial_moment_estimate(5, 10, 2),
            20.0 / 90.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            factorial_moment_estimate(5, 10, 3),
            60.0 / 720.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn absorb_counts_validation() {
        let mut acc = MomentAccumulator::new(4);
        assert!(matches!(
            acc.absorb_counts(&[1, 1, 1, 0, 0], 2),
            Err(Error::InsufficientShots { .. })
        ));
        assert!(acc.absorb_counts(&[1, 1], 4).is_err());
        // Counts must sum to the stated shots.
        assert!(acc.absorb_counts(&[1, 1, 1, 0, 0], 4).is_err());
        acc.absorb_counts(&[2, 1, 1, 0, 0], 4).unwrap();
        acc.absorb_counts(&[4, 0, 0, 0], 4).unwrap();
        assert_eq!(acc.count(), 2);
    }

    #[test]
    fn counts_and_exact_agree_in_the_large_shot_limit() {
        let mut from_counts = MomentAccumulator::new(2);
        let mut exact = MomentAccumulator::new(2);
        // Deterministic "counts" exactly proportional to the probabilities.
        for _ in 0..2 {
            from_counts.absorb_counts(&[600_000, 400_000], 1_000_000).unwrap();
            exact.absorb_exact(&probs(&[0.6, 0.4])).unwrap();
        }
        let a = from_counts.moment_table().unwrap();
        let b = exact.moment_table().unwrap();
        for n in 1..=4 {
            assert_abs_diff_eq!(a.pooled.moment(n), b.pooled.moment(n), epsilon = 2e-6);
        }
    }

    #[test]
    fn table_requires_two_unitaries() {
        let mut acc = MomentAccumulator::new(2);
        assert!(matches!(acc.moment_table(), Err(Error::InsufficientData { .. })));
        acc.absorb_exact(&probs(&[0.5, 0.5])).unwrap();
        assert!(acc.moment_table().is_err());
        acc.absorb_exact(&probs(&[0.5, 0.5])).unwrap();
        assert!(acc.moment_table().is_ok());
    }

    #[test]
    fn uniform_probabilities_have_zero_variance() {
        // The maximally mixed state at M = N gives Prob(k) = 1/N for every
        // unitary; the moment table must be exact with zero error bars.
        let mut acc = MomentAccumulator::new(4);
        for _ in 0..50 {
            acc.absorb_exact(&probs(&[0.25; 4])).unwrap();
        }
        let table = acc.moment_table().unwrap();
        for k in 0..4 {
            for n in 1..=4 {
                assert_abs_diff_eq!(
                    table.per_k[k].moment(n),
                    0.25f64.powi(n as i32),
                    epsilon = 1e-15
                );
                assert_eq!(table.per_k[k].std_err[n - 1], 0.0);
            }
        }
        assert_eq!(table.pooled.std_err[1], 0.0);
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let mut acc = MomentAccumulator::new(3);
        acc.absorb_exact(&probs(&[0.2, 0.3, 0.1])).unwrap();
        acc.absorb_exact(&probs(&[0.4, 0.1, 0.2])).unwrap();
        let before = acc.moment_table().unwrap();
        acc.merge(&MomentAccumulator::new(3)).unwrap();
        let after = acc.moment_table().unwrap();
        assert_eq!(before.pooled.p, after.pooled.p);
        assert_eq!(before.count, after.count);
    }

    #[test]
    fn merge_shape_mismatch() {
        let mut a = MomentAccumulator::new(3);
        assert!(matches!(
            a.merge(&MomentAccumulator::new(2)),
            Err(Error::AccumulatorShapeMismatch(..))
        ));
        let b = MomentAccumulator::with_max_order(3, 6).unwrap();
        assert!(a.merge(&b).is_err());
    }

    #[test]
    fn merge_is_commutative() {
        let mk = |vals: &[[f64; 2]]| {
            let mut acc = MomentAccumulator::new(2);
            for v in vals {
                acc.absorb_exact(&probs(v)).unwrap();
            }
            acc
        };
        let a = mk(&[[0.1, 0.7], [0.3, 0.3]]);
        let b = mk(&[[0.9, 0.05], [0.2, 0.6], [0.5, 0.25]]);
        let mut ab = a.clone();
        ab.merge(&b).unwrap();
        let mut ba = b.clone();
        ba.merge(&a).unwrap();
        let ta = ab.moment_table().unwrap();
        let tb = ba.moment_table().unwrap();
        for n in 1..=4 {
            assert_abs_diff_eq!(ta.pooled.moment(n), tb.pooled.moment(n), epsilon = 1e-15);
            assert_abs_diff_eq!(
                ta.per_k[0].std_err[n - 1],
                tb.per_k[0].std_err[n - 1],
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn higher_structural_orders_accumulate() {
        let mut acc = MomentAccumulator::with_max_order(1, 8).unwrap();
        acc.absorb_exact(&probs(&[0.5])).unwrap();
        acc.absorb_exact(&probs(&[0.5])).unwrap();
        let table = acc.moment_table().unwrap();
        assert_abs_diff_eq!(table.pooled.moment(8), 0.5f64.powi(8), epsilon = 1e-15);
        assert!(MomentAccumulator::with_max_order(1, 9).is_err());
        assert!(MomentAccumulator::with_max_order(1, 0).is_err());
        assert!(MomentAccumulator::with_max_order(0, 4).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut acc = MomentAccumulator::new(2);
        acc.absorb_exact(&probs(&[0.25, 0.5])).unwrap();
        acc.absorb_exact(&probs(&[0.5, 0.1])).unwrap();
        let text = serde_json::to_string(&acc).unwrap();
        let back: MomentAccumulator = serde_json::from_str(&text).unwrap();
        let a = acc.moment_table().unwrap();
        let b = back.moment_table().unwrap();
        assert_eq!(a.pooled.p, b.pooled.p);
        assert_eq!(a.per_k[1].std_err, b.per_k[1].std_err);
        assert_eq!(a.per_k[0].covariance(1, 2), b.per_k[0].covariance(1, 2));
    }

    #[test]
    fn covariance_diagonal_matches_std_err() {
        let mut acc = MomentAccumulator::new(2);
        let mut rng = crate::rng::SeededRng::from_seed(40);
        use rand::Rng;
        for _ in 0..100 {
            let a: f64 = rng.random_range(0.0..0.5);
            let b: f64 = rng.random_range(0.0..0.5);
            acc.absorb_exact(&probs(&[a, b])).unwrap();
        }
        let table = acc.moment_table().unwrap();
        for n in 1..=4 {
            let se = table.pooled.std_err[n - 1];
            assert_abs_diff_eq!(table.pooled.covariance(n, n), se * se, epsilon = 1e-15);
        }
        // Powers of the same probability are strongly positively correlated.
        assert!(table.per_k[0].covariance(1, 2) > 0.0);
        assert!(table.pooled.covariance(2, 3) > 0.0);
    }

    #[test]
    fn factorial_estimator_is_unbiased() {
        // Binomial(S, p) counts: mean of c(c−1)/(S(S−1)) must sit on p²
        // while the naive (c/S)² sits high by ≈ p(1−p)/S.
        use crate::measure::sample_counts;
        let p = 0.3;
        let shots = 500u64;
        let reps = 20_000;
        let target = probs(&[p]);
        let mut rng = crate::rng::SeededRng::from_seed(41);
        let (mut sum_u, mut sumsq_u, mut sum_naive) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..reps {
            let counts = sample_counts(&target, shots, &mut rng).unwrap();
            let u = factorial_moment_estimate(counts[0], shots, 2);
            let f = counts[0] as f64 / shots as f64;
            sum_u += u;
            sumsq_u += u * u;
            sum_naive += f * f;
        }
        let nf = reps as f64;
        let mean_u = sum_u / nf;
        let se_u = ((sumsq_u / nf - mean_u * mean_u) / (nf - 1.0)).sqrt();
        assert!(
            (mean_u - p * p).abs() < 4.0 * se_u,
            "unbiased mean {mean_u}, se {se_u}"
        );
        let bias_naive = sum_naive / nf - p * p;
        let predicted = p * (1.0 - p) / shots as f64;
        assert!(
            bias_naive > 0.5 * predicted,
            "naive bias {bias_naive}, predicted {predicted}"
        );
    }

    proptest! {
        /// Chunked accumulation then merge reproduces the single-stream
        /// table to 1e-12 relative, regardless of how the stream is split.
        #[test]
        fn merge_matches_single_stream(
            values in proptest::collection::vec((0.0f64..0.45, 0.0f64..0.45), 4..60),
            split in 1usize..5,
        ) {
            let mut single = MomentAccumulator::new(2);
            for (a, b) in &values {
                single.absorb_exact(&probs(&[*a, *b])).unwrap();
            }
            let mut merged = MomentAccumulator::new(2);
            for chunk in values.chunks(split) {
                let mut part = MomentAccumulator::new(2);
                for (a, b) in chunk {
                    part.absorb_exact(&probs(&[*a, *b])).unwrap();
                }
                merged.merge(&part).unwrap();
            }
            let ts = single.moment_table().unwrap();
            let tm = merged.moment_table().unwrap();
            for n in 1..=4 {
                let (x, y) = (ts.pooled.moment(n), tm.pooled.moment(n));
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
                let (sx, sy) = (ts.per_k[0].std_err[n - 1], tm.per_k[0].std_err[n - 1]);
                prop_assert!((sx - sy).abs() <= 1e-12 * sx.abs().max(1.0));
            }
        }

        /// The factorial-moment estimate always lies in [0, 1] and never
        /// exceeds the naive plug-in power.
        #[test]
        fn factorial_estimate_bounds(c in 0u64..=100, order in 1usize..=4) {
            let s = 100u64;
            let est = factorial_moment_estimate(c, s, order);
            prop_assert!((0.0..=1.0).contains(&est));
            let naive = (c as f64 / s as f64).powi(order as i32);
            prop_assert!(est <= naive + 1e-15);
        }
    }
}
