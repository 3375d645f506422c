//! Inversion of outcome-probability moments into trace-power estimates.
//!
//! Under Haar averaging the moments are polynomial in the trace powers:
//!
//! ```text
//! P₁ = 1/N          P₂ = (1 + p₂)/D₂          P₃ = (1 + 3p₂ + 2p₃)/D₃
//! P₄ = (1 + 3p₂² + 6p₂ + 8p₃ + 6p₄)/D₄
//! ```
//!
//! with Dₙ = N(N+1)⋯(N+n−1) = Nⁿ·Cₙ. Solving sequentially for p₂, p₃, p₄
//! gives the estimators. Four variants: the rotated dimension N either
//! known ("bar") or itself estimated from the first moment as 1/P₁
//! ("tilde"), each with the exact finite-N Dₙ or the large-N ("gaussian")
//! approximation Dₙ = Nⁿ.
//!
//! Estimates are never clamped to the physical range [1/M, 1]: clamping
//! would bias the trial means visible in scatter reproductions. Use
//! [`EstimateReport::physical`] to flag out-of-range values instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::MomentEstimates;

/// Exact finite-N moment correction factors.
///
/// Cₙ = Π_{j=1}^{n−1}(1 + j/N) and Dₙ = Nⁿ·Cₙ (stored exactly in that
/// relation); for integer N, Dₙ equals the rising factorial
/// N(N+1)⋯(N+n−1) = (N+n−1)!/(N−1)! up to rounding.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CorrectionFactors {
    n: f64,
    c: [f64; 4],
    d: [f64; 4],
}

impl CorrectionFactors {
    pub fn for_dim(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension);
        }
        Ok(Self::build(n as f64))
    }

    /// Real-valued dimension, as used by the tilde variants with
    /// N estimated from 1/P₁ (kept unrounded: rounding would introduce a
    /// discontinuous bias).
    pub fn for_real_dim(n: f64) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegenerateMoment(n));
        }
        Ok(Self::build(n))
    }

    fn build(n: f64) -> Self {
        let mut c = [1.0f64; 4];
        for order in 2..=4 {
            c[order - 1] = c[order - 2] * (1.0 + (order - 1) as f64 / n);
        }
        let mut d = [0.0f64; 4];
        for order in 1..=4 {
            d[order - 1] = n.powi(order as i32) * c[order - 1];
        }
        Self { n, c, d }
    }

    pub fn dim(&self) -> f64 {
        self.n
    }

    /// Cₙ for n in 1..=4.
    pub fn c(&self, n: usize) -> f64 {
        self.c[n - 1]
    }

    /// Dₙ for n in 1..=4.
    pub fn d(&self, n: usize) -> f64 {
        self.d[n - 1]
    }
}

/// Estimator variant: known vs estimated N × exact vs large-N factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    BarExact,
    TildeExact,
    BarGaussian,
    TildeGaussian,
}

impl Variant {
    pub const ALL: [Variant; 4] =
        [Variant::BarExact, Variant::TildeExact, Variant::BarGaussian, Variant::TildeGaussian];

    /// True for the variants that take N as known input.
    pub fn knows_dim(self) -> bool {
        matches!(self, Variant::BarExact | Variant::BarGaussian)
    }

    /// True for the exact finite-N factor variants.
    pub fn exact_factors(self) -> bool {
        matches!(self, Variant::BarExact | Variant::TildeExact)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::BarExact => "bar-exact",
            Variant::TildeExact => "tilde-exact",
            Variant::BarGaussian => "bar-gaussian",
            Variant::TildeGaussian => "tilde-gaussian",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bar-exact" => Ok(Variant::BarExact),
            "tilde-exact" => Ok(Variant::TildeExact),
            "bar-gaussian" => Ok(Variant::BarGaussian),
            "tilde-gaussian" => Ok(Variant::TildeGaussian),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant {other:?}; expected one of bar-exact, tilde-exact, bar-gaussian, tilde-gaussian"
            ))),
        }
    }
}

/// Trace-power estimates p̂₂, p̂₃, p̂₄ from one moment set.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EstimateReport {
    pub variant: Variant,
    /// `p_hat[n-2]` estimates pₙ for n = 2, 3, 4.
    pub p_hat: [f64; 3],
    /// Error propagated from the empirical moment covariances
    /// (delta method through the inversion).
    pub empirical_err: [f64; 3],
    /// A-priori predicted error where a formula exists: the large-N
    /// variance prediction for p̂₂ under the known-N variants, evaluated at
    /// the estimated trace powers. None elsewhere.
    pub predicted_err: [Option<f64>; 3],
    /// N as used by the inversion (the estimate 1/P₁ for tilde variants).
    pub n_used: f64,
    /// Unitaries behind the moment set.
    pub n_rand: u64,
}

impl EstimateReport {
    /// Flags which estimates lie in the physical range [1/M^(n−1), 1]
    /// (with 1e-9 slack) for a system of dimension `m`.
    pub fn physical(&self, m: usize) -> [bool; 3] {
        let mut out = [false; 3];
        for (i, n) in (2..=4).enumerate() {
            let floor = (m as f64).powi(1 - n as i32);
            out[i] = self.p_hat[i] >= floor - 1e-9 && self.p_hat[i] <= 1.0 + 1e-9;
        }
        out
    }
}

/// Moments P₁..P₄ of one outcome under Haar averaging, from trace powers
/// (p₂, p₃, p₄) at rotated dimension N — the forward map the inversions
/// undo. `exact` selects finite-N Dₙ; otherwise the large-N Dₙ = Nⁿ.
pub fn forward_moments(p: [f64; 3], dim: f64, exact: bool) -> Result<[f64; 4]> {
    let factors = CorrectionFactors::for_real_dim(dim)?;
    let [p2, p3, p4] = p;
    let numerators = [
        1.0,
        1.0 + p2,
        1.0 + 3.0 * p2 + 2.0 * p3,
        1.0 + 3.0 * p2 * p2 + 6.0 * p2 + 8.0 * p3 + 6.0 * p4,
    ];
    let mut out = [0.0f64; 4];
    for n in 1..=4 {
        let d = if exact { factors.d(n) } else { dim.powi(n as i32) };
        out[n - 1] = numerators[n - 1] / d;
    }
    Ok(out)
}

/// Shared inversion core: given Dₙ values and their derivatives with
/// respect to P₁ (zero for known-N variants), produce estimates and the
/// gradient of each estimate in (P₁, P₂, P₃, P₄) for error propagation.
fn invert_with_factors(
    moments: &MomentEstimates,
    d: [f64; 4],
    dd_dp1: [f64; 4],
) -> ([f64; 3], [[f64; 4]; 3]) {
    let pm: [f64; 4] = [
        moments.moment(1),
        moments.moment(2),
        moments.moment(3),
        moments.moment(4),
    ];
    let p2 = d[1] * pm[1] - 1.0;
    let p3 = 0.5 * (d[2] * pm[2] - 1.0 - 3.0 * p2);
    let p4 = (d[3] * pm[3] - 1.0 - 3.0 * p2 * p2 - 6.0 * p2 - 8.0 * p3) / 6.0;

    let mut g2 = [0.0f64; 4];
    g2[0] = pm[1] * dd_dp1[1];
    g2[1] = d[1];
    let mut g3 = [0.0f64; 4];
    g3[0] = 0.5 * (pm[2] * dd_dp1[2] - 3.0 * g2[0]);
    g3[1] = 0.5 * (-3.0 * g2[1]);
    g3[2] = 0.5 * d[2];
    let mut g4 = [0.0f64; 4];
    for i in 0..4 {
        let direct = if i == 0 { pm[3] * dd_dp1[3] } else if i == 3 { d[3] } else { 0.0 };
        g4[i] = (direct - (6.0 * p2 + 6.0) * g2[i] - 8.0 * g3[i]) / 6.0;
    }
    ([p2, p3, p4], [g2, g3, g4])
}

fn propagate_errors(moments: &MomentEstimates, grads: &[[f64; 4]; 3]) -> [f64; 3] {
    let mut out = [0.0f64; 3];
    for (slot, g) in grads.iter().enumerate() {
        let mut var = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                var += g[a] * g[b] * moments.covariance(a + 1, b + 1);
            }
        }
        out[slot] = var.max(0.0).sqrt();
    }
    out
}

/// Large-N prediction of the p̂₂ statistical error at the given estimates;
/// None when the radicand goes negative (possible with noisy estimates).
fn gaussian_predicted_p2(p: [f64; 3], n_rand: u64) -> Option<f64> {
    if n_rand < 2 {
        return None;
    }
    let radicand = 4.0 * p[0] + 2.0 * p[0] * p[0] + 8.0 * p[1] + 6.0 * p[2];
    (radicand >= 0.0).then(|| radicand.sqrt() / ((n_rand - 1) as f64).sqrt())
}

/// Inverts one moment set under the chosen variant. `dim` is required for
/// the known-N (bar) variants and ignored by the tilde variants, which
/// estimate N = 1/P₁ themselves.
pub fn invert(moments: &MomentEstimates, variant: Variant, dim: Option<usize>) -> Result<EstimateReport> {
    if moments.max_n() < 4 {
        return Err(Error::OrderOutOfRange(moments.max_n(), 4, 8));
    }
    let n_used = if variant.knows_dim() {
        let n = dim.ok_or_else(|| {
            Error::InvalidConfig(format!("variant {variant} requires the rotated dimension N"))
        })?;
        if n == 0 {
            return Err(Error::InvalidDimension);
        }
        n as f64
    } else {
        let p1 = moments.moment(1);
        if !(p1 > 0.0) {
            return Err(Error::DegenerateMoment(p1));
        }
        1.0 / p1
    };

    let (d, dd_dn): ([f64; 4], [f64; 4]) = if variant.exact_factors() {
        let f = CorrectionFactors::for_real_dim(n_used)?;
        let d = [f.d(1), f.d(2), f.d(3), f.d(4)];
        // dDₙ/dN = Dₙ · Σ_{j<n} 1/(N+j).
        let mut dd = [0.0f64; 4];
        let mut harmonic = 0.0;
        for n in 1..=4 {
            harmonic += 1.0 / (n_used + (n - 1) as f64);
            dd[n - 1] = d[n - 1] * harmonic;
        }
        (d, dd)
    } else {
        let mut d = [0.0f64; 4];
        let mut dd = [0.0f64; 4];
        for n in 1..=4usize {
            d[n - 1] = n_used.powi(n as i32);
            dd[n - 1] = n as f64 * n_used.powi(n as i32 - 1);
        }
        (d, dd)
    };
    // Chain rule through N = 1/P₁ for the estimated-N variants.
    let dd_dp1 = if variant.knows_dim() {
        [0.0f64; 4]
    } else {
        let dn_dp1 = -n_used * n_used;
        [
            dd_dn[0] * dn_dp1,
            dd_dn[1] * dn_dp1,
            dd_dn[2] * dn_dp1,
            dd_dn[3] * dn_dp1,
        ]
    };

    let (p_hat, grads) = invert_with_factors(moments, d, dd_dp1);
    let empirical_err = propagate_errors(moments, &grads);
    let predicted_err = if variant.knows_dim() {
        [gaussian_predicted_p2(p_hat, moments.count), None, None]
    } else {
        [None, None, None]
    };
    Ok(EstimateReport {
        variant,
        p_hat,
        empirical_err,
        predicted_err,
        n_used,
        n_rand: moments.count,
    })
}

/// Known-N inversion with exact finite-N factors.
pub fn invert_bar(moments: &MomentEstimates, dim: usize) -> Result<EstimateReport> {
    invert(moments, Variant::BarExact, Some(dim))
}

/// Estimated-N (1/P₁) inversion with exact finite-N factors.
pub fn invert_tilde(moments: &MomentEstimates) -> Result<EstimateReport> {
    invert(moments, Variant::TildeExact, None)
}

/// Large-N inversion; known N when `dim` is given, estimated otherwise.
pub fn invert_gaussian(moments: &MomentEstimates, dim: Option<usize>) -> Result<EstimateReport> {
    let variant = if dim.is_some() { Variant::BarGaussian } else { Variant::TildeGaussian };
    invert(moments, variant, dim)
}

/// Which a-priori error prediction to evaluate.
#[derive(Clone, Copy, Debug)]
pub enum ErrorRegime {
    /// Large-N variance of p̂₂ at the given trace powers.
    Gaussian,
    /// Exact finite-N variance of p̂₂ for a pure state at dimension N
    /// (single outcome, known-N variant).
    ExactPure { dim: f64 },
}

/// √(N_rand − 1)-normalized coefficient of the exact pure-state p̂₂ error:
/// √(24(1+1/N)/((1+2/N)(1+3/N)) − 4). Increases with N from √(52/7) at
/// N = 4 toward the large-N limit √20.
pub fn pure_state_error_coefficient(dim: f64) -> f64 {
    let inv = 1.0 / dim;
    (24.0 * (1.0 + inv) / ((1.0 + 2.0 * inv) * (1.0 + 3.0 * inv)) - 4.0).sqrt()
}

/// Predicted statistical error of p̂₂ after averaging over `n_rand`
/// unitaries.
pub fn predicted_error_p2(
    p2: f64,
    p3: f64,
    p4: f64,
    n_rand: u64,
    regime: ErrorRegime,
) -> Result<f64> {
    if n_rand < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n_rand });
    }
    let scale = ((n_rand - 1) as f64).sqrt();
    match regime {
        ErrorRegime::Gaussian => {
            let radicand = 4.0 * p2 + 2.0 * p2 * p2 + 8.0 * p3 + 6.0 * p4;
            if radicand < 0.0 {
                return Err(Error::DegenerateMoment(radicand));
            }
            Ok(radicand.sqrt() / scale)
        }
        ErrorRegime::ExactPure { dim } => {
            if !(dim > 0.0) {
                return Err(Error::InvalidDimension);
            }
            Ok(pure_state_error_coefficient(dim) / scale)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn exact_moments(p: [f64; 3], dim: f64) -> MomentEstimates {
        MomentEstimates::from_values(forward_moments(p, dim, true).unwrap().to_vec(), 1000)
    }

    #[test]
    fn correction_factors_at_four() {
        let f = CorrectionFactors::for_dim(4).unwrap();
        assert_eq!(f.c(1), 1.0);
        assert_eq!(f.c(2), 1.25);
        assert_eq!(f.c(3), 1.875);
        assert_eq!(f.c(4), 3.28125);
        assert_eq!(f.d(2), 20.0);
        assert_eq!(f.d(3), 120.0);
        assert_eq!(f.d(4), 840.0);
        assert!(CorrectionFactors::for_dim(0).is_err());
    }

    #[test]
    fn correction_factors_limit_and_identity() {
        let f = CorrectionFactors::for_real_dim(1e9).unwrap();
        for n in 1..=4 {
            assert_abs_diff_eq!(f.c(n), 1.0, epsilon = 1e-8);
        }
        for dim in [2usize, 3, 4, 7, 32, 101] {
            let f = CorrectionFactors::for_dim(dim).unwrap();
            for n in 1..=4 {
                // Dₙ = Nⁿ·Cₙ holds exactly by construction…
                assert_eq!(f.d(n), (dim as f64).powi(n as i32) * f.c(n));
                // …and matches the rising factorial to rounding.
                let rising: f64 = (0..n).map(|j| (dim + j) as f64).product();
                assert_abs_diff_eq!(f.d(n), rising, epsilon = 1e-12 * rising);
            }
        }
    }

    #[test]
    fn bar_inverts_pure_state_moments() {
        // P = (1/4, 2/20, 6/120, 24/840) is the exact pure-state forward
        // image at N = 4.
        let m = exact_moments([1.0, 1.0, 1.0], 4.0);
        assert_abs_diff_eq!(m.moment(2), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(m.moment(3), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(m.moment(4), 24.0 / 840.0, epsilon = 1e-15);
        let report = invert_bar(&m, 4).unwrap();
        for v in report.p_hat {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
        assert_eq!(report.physical(4), [true; 3]);
        assert_eq!(report.n_used, 4.0);
    }

    #[test]
    fn bar_inverts_maximally_mixed_moments() {
        let m = exact_moments([0.25, 0.0625, 0.015625], 4.0);
        let report = invert_bar(&m, 4).unwrap();
        assert_abs_diff_eq!(report.p_hat[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(report.p_hat[1], 0.0625, epsilon = 1e-12);
        assert_abs_diff_eq!(report.p_hat[2], 0.015625, epsilon = 1e-12);
    }

    #[test]
    fn unphysical_moments_invert_below_floor() {
        // P₂ = 1/D₂ is the forward image of p₂ = 0, below the 1/M floor.
        let mut p = forward_moments([0.25, 0.0625, 0.015625], 4.0, true).unwrap();
        p[1] = 1.0 / 20.0;
        let m = MomentEstimates::from_values(p.to_vec(), 10);
        let report = invert_bar(&m, 4).unwrap();
        assert_abs_diff_eq!(report.p_hat[0], 0.0, epsilon = 1e-12);
        assert!(!report.physical(4)[0]);
    }

    #[test]
    fn tilde_recovers_dimension_and_powers() {
        let m = exact_moments([1.0, 1.0, 1.0], 4.0);
        let report = invert_tilde(&m).unwrap();
        assert_abs_diff_eq!(report.n_used, 4.0, epsilon = 1e-12);
        for v in report.p_hat {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn tilde_gaussian_reduces_to_moment_ratio() {
        // p̃₂ = P₂/P₁² − 1, so P₂ = P₁² inverts to zero.
        let m = MomentEstimates::from_values(vec![0.25, 0.0625, 0.02, 0.008], 10);
        let report = invert_gaussian(&m, None).unwrap();
        assert_eq!(report.variant, Variant::TildeGaussian);
        assert_abs_diff_eq!(report.p_hat[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tilde_rejects_degenerate_first_moment() {
        let m = MomentEstimates::from_values(vec![0.0, 0.1, 0.01, 0.001], 10);
        assert!(matches!(invert_tilde(&m), Err(Error::DegenerateMoment(_))));
    }

    #[test]
    fn bar_requires_dimension() {
        let m = exact_moments([1.0, 1.0, 1.0], 4.0);
        assert!(invert(&m, Variant::BarExact, None).is_err());
        assert!(invert(&m, Variant::BarExact, Some(0)).is_err());
    }

    #[test]
    fn gaussian_matches_exact_at_large_n() {
        let p = [0.6, 0.4, 0.3];
        let big = 1e6;
        let moments = MomentEstimates::from_values(forward_moments(p, big, true).unwrap().to_vec(), 10);
        let exact = invert_bar(&moments, big as usize).unwrap();
        let gauss = invert_gaussian(&moments, Some(big as usize)).unwrap();
        assert_abs_diff_eq!(exact.p_hat[0], gauss.p_hat[0], epsilon = 1e-5);
    }

    #[test]
    fn gaussian_underestimates_at_small_n() {
        let pure = exact_moments([1.0, 1.0, 1.0], 4.0);
        let report = invert_gaussian(&pure, Some(4)).unwrap();
        // 16 · (2/20) − 1 = 0.6: a 40% underestimate of p₂ = 1.
        assert_abs_diff_eq!(report.p_hat[0], 0.6, epsilon = 1e-12);

        let mixed = exact_moments([0.25, 0.0625, 0.015625], 4.0);
        let report = invert_gaussian(&mixed, Some(4)).unwrap();
        // 16 · (1.25/20) − 1 = 0.
        assert_abs_diff_eq!(report.p_hat[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn forward_moments_validate_dimension() {
        assert!(forward_moments([1.0, 1.0, 1.0], 0.0, true).is_err());
        let g = forward_moments([1.0, 1.0, 1.0], 4.0, false).unwrap();
        assert_abs_diff_eq!(g[1], 2.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn predicted_error_values() {
        // Pure state, large-N regime: √(4+2+8+6) = √20.
        let e = predicted_error_p2(1.0, 1.0, 1.0, 101, ErrorRegime::Gaussian).unwrap();
        assert_abs_diff_eq!(e, 20.0f64.sqrt() / 10.0, epsilon = 1e-12);
        // Exact pure-state value at N = 4, 100 unitaries: √(52/7)/√99.
        let e = predicted_error_p2(1.0, 1.0, 1.0, 100, ErrorRegime::ExactPure { dim: 4.0 }).unwrap();
        assert_abs_diff_eq!(e, (52.0f64 / 7.0).sqrt() / 99.0f64.sqrt(), epsilon = 1e-12);
        assert!((e - 0.274).abs() < 1e-3);
        assert!(predicted_error_p2(1.0, 1.0, 1.0, 1, ErrorRegime::Gaussian).is_err());
        assert!(
            predicted_error_p2(1.0, 1.0, 1.0, 100, ErrorRegime::ExactPure { dim: 0.0 }).is_err()
        );
    }

    #[test]
    fn pure_state_coefficient_endpoints() {
        assert_abs_diff_eq!(
            pure_state_error_coefficient(4.0),
            (52.0f64 / 7.0).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(pure_state_error_coefficient(1e6), 20.0f64.sqrt(), epsilon = 1e-3);
        let mut prev = 0.0;
        for dim in [4.0, 8.0, 16.0, 64.0] {
            let v = pure_state_error_coefficient(dim);
            assert!(v > prev, "coefficient not increasing at N = {dim}");
            prev = v;
        }
    }

    #[test]
    fn empirical_error_matches_finite_differences() {
        // Perturb each moment numerically and compare the reported
        // delta-method error against a finite-difference gradient.
        let p_true = [0.55, 0.35, 0.25];
        let dim = 4.0;
        let base = forward_moments(p_true, dim, true).unwrap();
        let sigma = [3e-4, 2e-4, 1e-4, 5e-5];
        let mut cov = [[0.0f64; 4]; 4];
        for i in 0..4 {
            cov[i][i] = sigma[i] * sigma[i];
        }
        for variant in Variant::ALL {
            let dim_arg = variant.knows_dim().then_some(dim as usize);
            let moments = MomentEstimates::from_values_with_cov(base.to_vec(), cov, 500);
            let report = invert(&moments, variant, dim_arg).unwrap();
            for slot in 0..3 {
                let mut var = 0.0;
                for i in 0..4 {
                    let h = 1e-7 * base[i].max(1e-3);
                    let mut up = base;
                    up[i] += h;
                    let mut dn = base;
                    dn[i] -= h;
                    let f_up = invert(
                        &MomentEstimates::from_values(up.to_vec(), 500),
                        variant,
                        dim_arg,
                    )
                    .unwrap()
                    .p_hat[slot];
                    let f_dn = invert(
                        &MomentEstimates::from_values(dn.to_vec(), 500),
                        variant,
                        dim_arg,
                    )
                    .unwrap()
                    .p_hat[slot];
                    let g = (f_up - f_dn) / (2.0 * h);
                    var += g * g * sigma[i] * sigma[i];
                }
                let expected = var.sqrt();
                let got = report.empirical_err[slot];
                assert!(
                    (got - expected).abs() <= 1e-4 * expected.max(1e-12),
                    "{variant} slot {slot}: delta-method {got} vs finite-diff {expected}"
                );
            }
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            let parsed: Variant = v.name().parse().unwrap();
            assert_eq!(parsed, v);
        }
        assert!("overline-exact".parse::<Variant>().is_err());
    }

    proptest! {
        /// Forward then invert is the identity for any valid spectrum, at
        /// small and large N, for both known-N variants and the tilde.
        #[test]
        fn round_trip_recovers_trace_powers(
            raw in proptest::collection::vec(0.01f64..1.0, 4),
            dim in prop_oneof![Just(4usize), Just(8), Just(32)],
        ) {
            let total: f64 = raw.iter().sum();
            let lam: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let p: Vec<f64> = (2..=4).map(|n| lam.iter().map(|l| l.powi(n)).sum()).collect();
            let p = [p[0], p[1], p[2]];
            let m = MomentEstimates::from_values(
                forward_moments(p, dim as f64, true).unwrap().to_vec(), 100);
            let bar = invert_bar(&m, dim).unwrap();
            let tilde = invert_tilde(&m).unwrap();
            for i in 0..3 {
                prop_assert!((bar.p_hat[i] - p[i]).abs() < 1e-10);
                prop_assert!((tilde.p_hat[i] - p[i]).abs() < 1e-10);
            }
            let g = MomentEstimates::from_values(
                forward_moments(p, dim as f64, false).unwrap().to_vec(), 100);
            let gauss = invert_gaussian(&g, Some(dim)).unwrap();
            for i in 0..3 {
                prop_assert!((gauss.p_hat[i] - p[i]).abs() < 1e-10);
            }
        }
    }
}
