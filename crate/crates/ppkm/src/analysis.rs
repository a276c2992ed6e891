//! Security arithmetic: perturbation error terms, divergence lower bounds
//! on what quotient-taking adversaries learn, and the known-sample attack
//! cost model.
//!
//! Everything here is a closed-form evaluation — none of the attacks are
//! executed. Logarithms are natural unless a name says `log2`.

use serde::{Deserialize, Serialize};

use crate::dataset::Point;
use crate::params::RandomizationParams;
use crate::{Error, Result};

/// Per-coordinate error decomposition of a perturbed squared distance, plus
/// the exact and approximate distances it feeds.
///
/// For coordinate `i` with scale `r_i`, plaintext gap `Δ_i = x1_i - x2_i`
/// and noise combination `g_i = eps1*x1_i - eps2*x2_i`:
///
/// * `lambda2[i] = 2 * r_i * Δ_i * g_i` — the linear error term,
/// * `lambda1[i] = g_i^2 + lambda2[i]` — the full error term,
///
/// so the exact perturbed squared distance is `Σ (r_i^2 Δ_i^2 + lambda1[i])`
/// and the servers' working approximation drops the quadratic part:
/// `Σ (r_i^2 Δ_i^2 + lambda2[i])`. `lambda1[i] - lambda2[i] = g_i^2 >= 0`
/// always.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorTerms {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Distance between the two perturbed points (shifts cancel).
    pub exact_distance: f64,
    /// Distance with the quadratic noise term neglected.
    pub approx_distance: f64,
}

/// Decomposes the perturbed distance between two points under the given
/// parameters and explicit noise values.
///
/// Fails when the approximate squared distance goes negative — that can only
/// happen when the noise exceeds its admissible ceiling, so it is reported
/// as a bound violation rather than clamped.
pub fn error_terms(
    x1: &Point,
    x2: &Point,
    eps1: f64,
    eps2: f64,
    params: &RandomizationParams,
) -> Result<ErrorTerms> {
    let d = x1.coords.len();
    if x2.coords.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x2.coords.len() });
    }
    if params.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: params.dim() });
    }

    let mut lambda1 = Vec::with_capacity(d);
    let mut lambda2 = Vec::with_capacity(d);
    let mut exact_sq = 0.0;
    let mut approx_sq = 0.0;
    for i in 0..d {
        let r = params.scale(i);
        let delta = x1.coords[i] - x2.coords[i];
        let g = eps1 * x1.coords[i] - eps2 * x2.coords[i];
        let l2 = 2.0 * r * delta * g;
        let l1 = g * g + l2;
        exact_sq += r * r * delta * delta + l1;
        approx_sq += r * r * delta * delta + l2;
        lambda1.push(l1);
        lambda2.push(l2);
    }

    if approx_sq < 0.0 {
        return Err(Error::DivergenceBound(format!(
            "approximate squared distance is negative ({approx_sq:e}); \
             noise exceeds the admissible ceiling for this point pair"
        )));
    }
    Ok(ErrorTerms {
        lambda1,
        lambda2,
        exact_distance: exact_sq.max(0.0).sqrt(),
        approx_distance: approx_sq.sqrt(),
    })
}

/// Divergence lower bound on the coordinate-quotient view: what an honest
/// server comparing perturbed coordinate differences against plaintext ones
/// must see, in nats. Evaluates
/// `d * (x11-x21)/(x41-x31) * ln((r1 + eps*x41/(x41-x31)) / (r1 - eps*x21/(x11-x21)))`
/// and grows strictly with `eps` inside its validity region.
pub fn kd_quotient_bound(
    x11: f64,
    x21: f64,
    x31: f64,
    x41: f64,
    r1: f64,
    eps: f64,
    d: u32,
) -> Result<f64> {
    let d12 = x11 - x21;
    let d34 = x41 - x31;
    if d12 == 0.0 || d34 == 0.0 {
        return Err(Error::InvalidParameter(
            "quotient bound needs x11 != x21 and x41 != x31".into(),
        ));
    }
    let numerator = r1 + eps * x41 / d34;
    let denominator = r1 - eps * x21 / d12;
    if numerator <= 0.0 || denominator <= 0.0 {
        return Err(Error::DivergenceBound(format!(
            "noise {eps} too large for bound validity (log argument {numerator} / {denominator})"
        )));
    }
    Ok(d as f64 * (d12 / d34) * (numerator / denominator).ln())
}

/// Sums the aggregator's per-cluster coordinate-sum-to-count ratios,
/// `Σ_j Σ_coord d_j[coord] / m_j`, the data factor in
/// [`kd_aggregator_ratio`]. Clusters with zero counts are a caller bug —
/// the divergence value is undefined there — and fail loudly.
pub fn sum_dij_over_mij(sums: &[Vec<f64>], counts: &[f64]) -> Result<f64> {
    if sums.len() != counts.len() {
        return Err(Error::InvalidParameter(format!(
            "{} sum vectors against {} counts",
            sums.len(),
            counts.len()
        )));
    }
    let mut total = 0.0;
    for (j, (d, &m)) in sums.iter().zip(counts).enumerate() {
        if m == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cluster {j} has a zero count; its ratio is undefined"
            )));
        }
        total += d.iter().map(|v| v / m).sum::<f64>();
    }
    Ok(total)
}

/// Divergence of the aggregator's masked-ratio view from the unmasked one:
/// `-ln(x/y) * Σ d_ij/m_ij`, in nats. Zero exactly when the two masks
/// collide — the case the masking argument excludes. The sign follows the
/// mask ordering; distance from zero is what matters, so callers usually
/// also look at `|·|`.
pub fn kd_aggregator_ratio(x: f64, y: f64, dij_over_mij_sum: f64) -> Result<f64> {
    if !(x > 0.0) || !(y > 0.0) {
        return Err(Error::InvalidParameter(format!("masks must be positive, got ({x}, {y})")));
    }
    Ok(-(x / y).ln() * dij_over_mij_sum)
}

/// Divergence of the cross-round masked-sum quotient view: `-ln(x1/x2) * z`
/// with `z` the number of values compared. Same sign caveat as
/// [`kd_aggregator_ratio`].
pub fn kd_same_mask(x1: f64, x2: f64, z: f64) -> Result<f64> {
    if !(x1 > 0.0) || !(x2 > 0.0) {
        return Err(Error::InvalidParameter(format!("masks must be positive, got ({x1}, {x2})")));
    }
    Ok(-(x1 / x2).ln() * z)
}

/// Bundled divergence evaluations for a report; fields are `None` when the
/// corresponding inputs were not supplied.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LeakageReport {
    pub kd_quotient_bound: Option<f64>,
    pub kd_aggregator_ratio: Option<f64>,
    pub kd_aggregator_ratio_abs: Option<f64>,
    pub kd_same_mask: Option<f64>,
    pub kd_same_mask_abs: Option<f64>,
    /// The inputs the values were computed from, echoed for the reader.
    pub inputs: serde_json::Value,
}

/// Cost of the known-sample grid-intersection attack, as a base-2 exponent:
/// `log2(C(K,2) * (R/c)^d)` intersection steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackCostReport {
    pub known_points: u64,
    pub range: f64,
    pub cell: f64,
    pub dim: u32,
    pub log2_steps: f64,
}

/// Evaluates the attack cost model. Strictly increasing in `d` and in the
/// resolution ratio `R/c`.
pub fn attack_cost(known_points: u64, range: f64, cell: f64, dim: u32) -> Result<AttackCostReport> {
    if known_points < 2 {
        return Err(Error::InvalidParameter(format!(
            "attack needs at least 2 known points, got {known_points}"
        )));
    }
    if !(range > 0.0) || !(cell > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "range and cell must be positive, got ({range}, {cell})"
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let pair_choices = known_points as u128 * (known_points as u128 - 1) / 2;
    let log2_steps = (pair_choices as f64).log2() + dim as f64 * (range / cell).log2();
    Ok(AttackCostReport { known_points, range, cell, dim, log2_steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_1d(r: f64, shift: f64) -> RandomizationParams {
        RandomizationParams { r: vec![r, shift], epsilons: vec![], eps_max: 1.0 }
    }

    #[test]
    fn zero_noise_collapses_the_error_terms() {
        let p = params_1d(10.0, 3.0);
        let t = error_terms(&Point::new(0, vec![4.0]), &Point::new(1, vec![1.0]), 0.0, 0.0, &p)
            .unwrap();
        assert_eq!(t.lambda1, vec![0.0]);
        assert_eq!(t.lambda2, vec![0.0]);
        assert_eq!(t.exact_distance, 30.0);
        assert_eq!(t.approx_distance, 30.0);
    }

    #[test]
    fn identical_points_equal_noise_have_zero_gap_terms() {
        let p = params_1d(10.0, 3.0);
        let t = error_terms(&Point::new(0, vec![5.0]), &Point::new(1, vec![5.0]), 0.2, 0.2, &p)
            .unwrap();
        // Δ = 0 kills λ2; λ1 keeps only the quadratic part (eps * 5 - eps * 5 = 0).
        assert_eq!(t.lambda2, vec![0.0]);
        assert_eq!(t.lambda1, vec![0.0]);
        assert_eq!(t.exact_distance, 0.0);
    }

    #[test]
    fn error_term_identity_holds() {
        let p = RandomizationParams {
            r: vec![7.0, 1.0, 11.0, 2.0],
            epsilons: vec![],
            eps_max: 1.0,
        };
        let a = Point::new(0, vec![4.0, 2.5]);
        let b = Point::new(1, vec![1.5, 6.0]);
        let t = error_terms(&a, &b, 0.03, 0.07, &p).unwrap();
        for i in 0..2 {
            let g = 0.03 * a.coords[i] - 0.07 * b.coords[i];
            assert!((t.lambda1[i] - t.lambda2[i] - g * g).abs() < 1e-12);
            assert!(t.lambda1[i] >= t.lambda2[i]);
        }
        // Exact distance must equal measuring the transformed points.
        let direct: f64 = (0..2)
            .map(|i| {
                let u = (p.scale(i) + 0.03) * a.coords[i] - (p.scale(i) + 0.07) * b.coords[i];
                u * u
            })
            .sum::<f64>()
            .sqrt();
        assert!((t.exact_distance - direct).abs() < 1e-9);
    }

    #[test]
    fn oversized_noise_is_a_bound_violation() {
        // Huge negative cross-term: r small, noise large, opposite gaps.
        let p = params_1d(1.0, 0.0);
        let err = error_terms(&Point::new(0, vec![10.0]), &Point::new(1, vec![9.0]), 0.0, 2.0, &p)
            .unwrap_err();
        assert!(matches!(err, Error::DivergenceBound(_)));
    }

    #[test]
    fn quotient_bound_is_zero_without_noise() {
        assert_eq!(kd_quotient_bound(4.0, 1.0, 2.0, 6.0, 10.0, 0.0, 8).unwrap(), 0.0);
    }

    #[test]
    fn quotient_bound_matches_high_precision_value() {
        let v = kd_quotient_bound(4.0, 1.0, 2.0, 6.0, 10.0, 0.1, 8).unwrap();
        assert!((v - 0.109_365_082_555_591_72).abs() < 1e-15, "{v}");
        let half = kd_quotient_bound(4.0, 1.0, 2.0, 6.0, 10.0, 0.05, 8).unwrap();
        assert!((half - 0.054_840_431_636_388_09).abs() < 1e-15, "{half}");
    }

    #[test]
    fn quotient_bound_grows_with_noise() {
        let lo = kd_quotient_bound(4.0, 1.0, 2.0, 6.0, 10.0, 0.05, 8).unwrap();
        let hi = kd_quotient_bound(4.0, 1.0, 2.0, 6.0, 10.0, 0.10, 8).unwrap();
        assert!(hi > lo && lo > 0.0);
    }

    #[test]
    fn quotient_bound_rejects_invalid_regions() {
        // Degenerate quotient.
        assert!(kd_quotient_bound(3.0, 3.0, 2.0, 6.0, 10.0, 0.1, 8).is_err());
        // Noise large enough to push the log argument non-positive.
        let err = kd_quotient_bound(4.0, 1.0, 2.0, 6.0, 0.01, 5.0, 8).unwrap_err();
        assert!(matches!(err, Error::DivergenceBound(_)));
    }

    #[test]
    fn aggregator_ratio_fixture() {
        let v = kd_aggregator_ratio(2.0, 4.0, 3.0).unwrap();
        assert!((v - 2.079_441_541_679_835_9).abs() < 1e-15, "{v}");
        assert_eq!(kd_aggregator_ratio(5.0, 5.0, 123.0).unwrap(), 0.0);
    }

    #[test]
    fn same_mask_fixture() {
        assert_eq!(kd_same_mask(7.0, 7.0, 9.0).unwrap(), 0.0);
        let v = kd_same_mask(2.0, 4.0, 3.0).unwrap();
        assert!((v - 2.079_441_541_679_835_9).abs() < 1e-15);
        assert!(kd_same_mask(-1.0, 4.0, 3.0).is_err());
    }

    #[test]
    fn ratio_sum_helper_counts_all_coordinates() {
        let sums = vec![vec![2.0, 4.0], vec![9.0, 3.0]];
        let counts = vec![2.0, 3.0];
        let v = sum_dij_over_mij(&sums, &counts).unwrap();
        assert!((v - (1.0 + 2.0 + 3.0 + 1.0)).abs() < 1e-12);
        assert!(sum_dij_over_mij(&sums, &[2.0, 0.0]).is_err());
        assert!(sum_dij_over_mij(&sums, &[2.0]).is_err());
    }

    #[test]
    fn attack_cost_fixtures() {
        let r1 = attack_cost(2, 1000.0, 0.01, 2).unwrap();
        assert!((r1.log2_steps - 33.219).abs() < 1e-2, "{}", r1.log2_steps);
        let r6 = attack_cost(2, 10.0, 0.001, 8).unwrap();
        assert!((r6.log2_steps - 106.301).abs() < 1e-2, "{}", r6.log2_steps);
        let trivial = attack_cost(2, 5.0, 5.0, 13).unwrap();
        assert_eq!(trivial.log2_steps, 0.0);
    }

    #[test]
    fn attack_cost_monotonicity() {
        let base = attack_cost(2, 100.0, 0.1, 4).unwrap().log2_steps;
        assert!(attack_cost(2, 100.0, 0.1, 5).unwrap().log2_steps > base);
        assert!(attack_cost(2, 200.0, 0.1, 4).unwrap().log2_steps > base);
        assert!(attack_cost(2, 100.0, 0.05, 4).unwrap().log2_steps > base);
        assert!(attack_cost(3, 100.0, 0.1, 4).unwrap().log2_steps > base);
    }

    #[test]
    fn attack_cost_rejects_bad_domains() {
        assert!(attack_cost(1, 10.0, 0.1, 2).is_err());
        assert!(attack_cost(2, 0.0, 0.1, 2).is_err());
        assert!(attack_cost(2, 10.0, -1.0, 2).is_err());
        assert!(attack_cost(2, 10.0, 0.1, 0).is_err());
    }
}
