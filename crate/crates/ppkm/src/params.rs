//! Perturbation parameter bounds, sampling, and key-length planning.
//!
//! The transform multiplies each coordinate by `r_scale + eps_point` and adds
//! `r_shift` (see [`crate::transform`]). For clustering on the perturbed data
//! to reproduce plaintext clustering, the scales must be large relative to
//! the data and the per-point noise must be small relative to the scales.
//! This module derives those limits from a concrete dataset (strict mode),
//! or takes the constant rule `r > w`, `eps < w/2` on faith (weak mode), and
//! then samples concrete parameters inside the admissible region.
//!
//! Strict mode computes three data quantities, each minimised/maximised by
//! exhaustive sweep over point triples (accelerated with Gram-matrix algebra
//! but semantically an exhaustive sweep):
//!
//! * `r_lower` — lower bound for every scale/shift entry: the largest value
//!   of `(|x_i|^2 - |x_i - x_k|^2) / (2(|x_i - x_k|^2 - <x_i, x_i - x_j>))`
//!   over ordered point triples `(i, j, k)` with a positive denominator.
//! * `eps_upper` — noise ceiling per unit of scale, guaranteeing that the
//!   even-order error term never outweighs the scaled squared difference on
//!   any coordinate (no negative radicand in the approximate distance): the
//!   smallest `(x_ik - x_jk) / (2 x_ik)` over point pairs and dimensions
//!   with `x_ik > x_jk` and `x_ik > 0`.
//! * `eps_order` — noise ceiling per unit of scale under which worst-case
//!   noise provably cannot reorder any strictly ordered pair of plaintext
//!   point distances (see [`strict_bounds`] for the inequality).
//!
//! Both ceilings are stored at unit scale: multiply by the sampled scale to
//! get the admissible noise magnitude. Weak mode stores `w/2` directly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::{Error, Result};

/// Where a [`BoundReport`] came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    Strict,
    Weak,
}

/// Admissible parameter region for one dataset (strict) or one constant
/// (weak).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub mode: BoundMode,
    /// Every sampled scale and shift must exceed this.
    pub r_lower: f64,
    /// Noise ceiling. Strict mode: per unit of scale (multiply by the
    /// sampled scale). Weak mode: the absolute constant `w/2`.
    pub eps_upper: f64,
    /// Order-preservation noise ceiling per unit of scale; strict mode only.
    pub eps_order: Option<f64>,
    /// The constant the weak rule was built from.
    pub w: Option<f64>,
    /// True when no triple had a positive denominator and the scale bound
    /// fell back to "any positive value" (`r_lower = 0`).
    pub r_fallback: bool,
}

/// Concrete sampled perturbation parameters for one dataset.
///
/// `r` holds `2d` entries laid out scale-first per dimension: `r[2j]` is the
/// multiplicative scale for dimension `j` and `r[2j + 1]` the additive shift.
/// `epsilons[i]` is the per-point noise for the i-th point of the dataset the
/// parameters were sampled for (positional, not by id).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizationParams {
    pub r: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// The cap the noise entries were drawn below.
    pub eps_max: f64,
}

impl RandomizationParams {
    pub fn dim(&self) -> usize {
        self.r.len() / 2
    }

    pub fn scale(&self, j: usize) -> f64 {
        self.r[2 * j]
    }

    pub fn shift(&self, j: usize) -> f64 {
        self.r[2 * j + 1]
    }
}

/// Safety margin (in bits) between the triple-derived order-preservation
/// ceiling and the noise actually sampled. Point triples can be enumerated,
/// but Lloyd's iterations also compare distances against *centroids* — data
/// dependent means whose near-ties no data-only sweep can enumerate ahead of
/// time — so the sampler backs off by this factor.
pub const ORDER_MARGIN_BITS: u32 = 12;

/// Guessing probabilities below `2^-80` count as secure.
pub const SECURE_LOG2_P: f64 = -80.0;

/// Key-length plan: guessing probabilities for the two published attack
/// shapes on the transform, as base-2 logarithms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecurityPlan {
    pub n: u64,
    pub d: u64,
    pub ell1: u32,
    pub ell2: u32,
    /// log2 probability of guessing one scale, one shift and one noise value
    /// from a single perturbed point: `log2(C(2d,2) * n) - 2*ell1 - ell2`.
    pub log2_p_point_guess: f64,
    /// log2 probability of guessing one scale and three noise values from a
    /// coordinate quotient: `log2(2d * C(n,3)) - ell1 - 3*ell2`.
    pub log2_p_quotient_guess: f64,
    /// Smallest `2*ell1 + ell2` making the point guess hit `2^-80`.
    pub required_point_bits: f64,
    /// Smallest `ell1 + 3*ell2` making the quotient guess hit `2^-80`.
    pub required_quotient_bits: f64,
    pub secure: bool,
}

fn all_points_identical(ds: &Dataset) -> bool {
    let first = &ds.points()[0].coords;
    ds.points().iter().all(|p| &p.coords == first)
}

fn validate_non_negative(ds: &Dataset) -> Result<()> {
    for p in ds.points() {
        for (dim, &c) in p.coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFinite { id: p.id, dim });
            }
            if c < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "strict bounds need non-negative data (translate first); \
                     point id {} has {} at dimension {}",
                    p.id, c, dim
                )));
            }
        }
    }
    Ok(())
}

/// Solves `2*M^2*e^2 + 2*M*(d12 + d13)*e <= gap` for the largest admissible
/// `e` — the worst-case-noise order-preservation condition for one strictly
/// ordered triple, at unit scale. `d12 < d13` are plaintext distances, `gap`
/// their squared-distance difference, `M` the coordinate-maximum envelope.
fn order_eps_for_pair(m: f64, d12: f64, d13: f64, gap: f64) -> f64 {
    let a = 2.0 * m * m;
    let b = 2.0 * m * (d12 + d13);
    // Largest root of a*e^2 + b*e - gap = 0.
    (-b + (b * b + 4.0 * a * gap).sqrt()) / (2.0 * a)
}

/// Derives the strict parameter bounds for a non-negative dataset.
///
/// The scale bound sweeps every ordered triple of points (repeats included;
/// a repeated index only ever adds a constraint, never removes one) and keeps
/// the largest quotient among those with positive denominators. The noise
/// ceilings sweep every ordered pair. All three sweeps are exact; the
/// implementation uses precomputed inner products and sorted projections so
/// the whole derivation runs in `O(n^2 (d + log n))` instead of `O(n^3 d)`.
///
/// Errors: empty/identical datasets (`no admissible triples`), negative or
/// non-finite coordinates.
pub fn strict_bounds(ds: &Dataset) -> Result<BoundReport> {
    validate_non_negative(ds)?;
    if all_points_identical(ds) {
        return Err(Error::NoAdmissibleTriples);
    }

    let n = ds.len();
    let points: Vec<&[f64]> = ds.points().iter().map(|p| p.coords.as_slice()).collect();
    let sqnorm: Vec<f64> =
        points.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();

    // Envelope for the order-preservation bound: every coordinate any point
    // or centroid can take is within [0, max_l], so a Cauchy-Schwarz step
    // bounds the worst-case cross term by M * |delta|.
    let maxs = ds.max_per_dim();
    let envelope = maxs.iter().map(|m| m * m).sum::<f64>().sqrt();

    let mut r_lower = f64::NEG_INFINITY;
    let mut any_triple = false;
    let mut eps_order = f64::INFINITY;

    // Reused per-row buffers.
    let mut dots = vec![0.0; n];
    let mut dots_sorted = vec![0.0; n];
    let mut dist = vec![0.0; n];

    for i in 0..n {
        let xi = points[i];
        for j in 0..n {
            dots[j] = xi.iter().zip(points[j]).map(|(a, b)| a * b).sum();
        }
        dots_sorted.copy_from_slice(&dots);
        dots_sorted.sort_unstable_by(f64::total_cmp);
        let dot_max = dots_sorted[n - 1];

        for k in 0..n {
            // |x_i - x_k|^2 via the Gram identity, clamped against rounding.
            let d2 = (sqnorm[i] + sqnorm[k] - 2.0 * dots[k]).max(0.0);
            let num = sqnorm[i] - d2;
            // Denominator is 2 * (d2 - |x_i|^2 + <x_i, x_j>); admissible when
            // positive, i.e. when <x_i, x_j> > |x_i|^2 - d2.
            let floor = sqnorm[i] - d2;
            if num > 0.0 {
                // Want the smallest admissible denominator: the smallest
                // projection strictly above the floor.
                let idx = dots_sorted.partition_point(|&v| v <= floor);
                if idx < n {
                    any_triple = true;
                    let den = 2.0 * (d2 - sqnorm[i] + dots_sorted[idx]);
                    if den > 0.0 {
                        r_lower = r_lower.max(num / den);
                    }
                }
            } else if dot_max > floor {
                // Zero or negative numerator: the largest denominator gives
                // the largest (least negative) quotient.
                any_triple = true;
                let den = 2.0 * (d2 - sqnorm[i] + dot_max);
                if den > 0.0 {
                    r_lower = r_lower.max(num / den);
                }
            }
            dist[k] = d2.sqrt();
        }

        // Order preservation: among triples (i, j, k) with dist(i,j) <
        // dist(i,k), the binding constraint for fixed i is an adjacent pair
        // in the sorted distance row (the admissible eps grows with both the
        // gap and the distance sum, so any wider pair dominates an adjacent
        // one).
        dist.sort_unstable_by(f64::total_cmp);
        for w in dist.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b > a {
                let gap = b * b - a * a;
                eps_order = eps_order.min(order_eps_for_pair(envelope, a, b, gap));
            }
        }
    }

    let (r_lower, r_fallback) = if any_triple && r_lower.is_finite() {
        (r_lower, false)
    } else {
        // No positive denominator anywhere: every positive scale works.
        (0.0, true)
    };

    // Radicand ceiling: per dimension, the binding pair among sorted distinct
    // values is adjacent (fix the smaller value; the best larger value is the
    // next distinct one).
    let mut eps_upper = f64::INFINITY;
    let mut column = vec![0.0; n];
    for l in 0..ds.dim() {
        for (i, p) in points.iter().enumerate() {
            column[i] = p[l];
        }
        column.sort_unstable_by(f64::total_cmp);
        for w in column.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi > lo && hi > 0.0 {
                eps_upper = eps_upper.min((hi - lo) / (2.0 * hi));
            }
        }
    }
    if !eps_upper.is_finite() || eps_upper <= 0.0 {
        return Err(Error::NoStrictNoiseBound);
    }

    Ok(BoundReport {
        mode: BoundMode::Strict,
        r_lower,
        eps_upper,
        eps_order: Some(eps_order),
        w: None,
        r_fallback,
    })
}

/// The constant weak rule: scales above `w`, noise below `w/2`. Dataset
/// independent and O(1); no ordering guarantee comes with it.
pub fn weak_bounds(w: f64) -> Result<BoundReport> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::InvalidParameter(format!("weak bound needs w > 0, got {w}")));
    }
    Ok(BoundReport {
        mode: BoundMode::Weak,
        r_lower: w,
        eps_upper: w / 2.0,
        eps_order: None,
        w: Some(w),
        r_fallback: false,
    })
}

/// Samples concrete perturbation parameters inside a bound report.
///
/// All `2d` scale/shift entries are uniform in `(max(r_lower, 2^(ell1-1)),
/// 2^ell1)` — the magnitude class of `ell1`-bit values. The *scale* entries
/// share a single draw: the order-preservation argument cancels the scaled
/// plaintext terms across the two sides of a comparison, which requires one
/// common scale (independent per-dimension scales reorder distances even
/// with zero noise). Shifts are independent draws; they cancel in distances
/// regardless.
///
/// Noise entries are `(u / 2^ell2) * eps_max` with `u` uniform in
/// `[1, 2^ell2)`, i.e. `ell2` bits of granularity, where `eps_max` is the
/// bound report's ceiling scaled to the sampled scale (strict mode applies
/// the [`ORDER_MARGIN_BITS`] back-off to the order-preservation ceiling) and
/// capped at `2^ell2`.
pub fn sample_params(
    ds: &Dataset,
    bounds: &BoundReport,
    ell1: u32,
    ell2: u32,
    seed: u64,
) -> Result<RandomizationParams> {
    if ell1 == 0 || ell1 > 1000 {
        return Err(Error::InvalidParameter(format!("ell1 must be in [1, 1000], got {ell1}")));
    }
    if ell2 == 0 || ell2 > 62 {
        return Err(Error::InvalidParameter(format!("ell2 must be in [1, 62], got {ell2}")));
    }
    if ell1 <= ell2 {
        return Err(Error::InvalidParameter(format!(
            "ell1 must exceed ell2 so noise stays below the scales (got {ell1} <= {ell2})"
        )));
    }

    let hi = (ell1 as f64).exp2();
    let lo = bounds.r_lower.max(((ell1 - 1) as f64).exp2());
    if !(lo < hi) {
        return Err(Error::Ell1TooSmall { r_lower: bounds.r_lower, ell1, limit: hi });
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scale = rng.gen_range(lo..hi);
    let d = ds.dim();
    let mut r = Vec::with_capacity(2 * d);
    for _ in 0..d {
        r.push(scale);
        r.push(rng.gen_range(lo..hi));
    }

    let ceiling = match bounds.mode {
        BoundMode::Strict => {
            let order = bounds
                .eps_order
                .ok_or_else(|| Error::InvalidParameter("strict report lacks eps_order".into()))?;
            let unit = bounds.eps_upper.min(order / (ORDER_MARGIN_BITS as f64).exp2());
            unit * scale
        }
        BoundMode::Weak => bounds.eps_upper,
    };
    let eps_max = ceiling.min((ell2 as f64).exp2());
    if !(eps_max > 0.0) {
        return Err(Error::NoStrictNoiseBound);
    }

    let granules = 1u64 << ell2;
    let epsilons = (0..ds.len())
        .map(|_| (rng.gen_range(1..granules) as f64 / granules as f64) * eps_max)
        .collect();

    Ok(RandomizationParams { r, epsilons, eps_max })
}

/// Draws `count` fresh noise values below `eps_max`, same granularity rule
/// as [`sample_params`]. Used when new points join an existing run.
pub fn sample_fresh_epsilons(count: usize, eps_max: f64, ell2: u32, seed: u64) -> Vec<f64> {
    let granules = 1u64 << ell2.clamp(1, 62);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count).map(|_| (rng.gen_range(1..granules) as f64 / granules as f64) * eps_max).collect()
}

/// Suggests the smallest `ell1 >= floor` whose magnitude class sits above
/// `r_lower`, for recovering from [`Error::Ell1TooSmall`].
pub fn suggest_ell1(r_lower: f64, floor: u32) -> u32 {
    let mut ell1 = floor.max(2);
    while bounds_interval_empty(r_lower, ell1) && ell1 < 1000 {
        ell1 += 1;
    }
    ell1
}

fn bounds_interval_empty(r_lower: f64, ell1: u32) -> bool {
    r_lower.max(((ell1 - 1) as f64).exp2()) >= (ell1 as f64).exp2()
}

/// Evaluates the two guessing probabilities for key lengths `(ell1, ell2)`
/// against a dataset shape `(n, d)` and the number of bits each attack must
/// recover. Probabilities are exact base-2 logarithms of
/// `count / 2^(bits recovered)`; `secure` requires both at or below
/// [`SECURE_LOG2_P`]. With `n < 3` no coordinate quotient exists and the
/// quotient-guess probability is reported as `-inf`.
pub fn security_plan(n: u64, d: u64, ell1: u32, ell2: u32) -> SecurityPlan {
    // C(2d, 2) = d * (2d - 1); counts how many ways the attacker can pick
    // the two transform entries hidden in one perturbed coordinate pair.
    let log2_pairs = (d as f64).log2() + ((2 * d - 1) as f64).log2();
    let log2_point_count = log2_pairs + (n as f64).log2();
    // 2d * C(n, 3): a dimension choice plus the three points whose noises
    // appear in the quotient.
    let log2_quotient_count = if n >= 3 {
        ((2 * d) as f64).log2()
            + (n as f64).log2()
            + ((n - 1) as f64).log2()
            + ((n - 2) as f64).log2()
            - 6f64.log2()
    } else {
        f64::NEG_INFINITY
    };

    let log2_p_point_guess = log2_point_count - (2 * ell1 + ell2) as f64;
    let log2_p_quotient_guess = log2_quotient_count - (ell1 + 3 * ell2) as f64;

    SecurityPlan {
        n,
        d,
        ell1,
        ell2,
        log2_p_point_guess,
        log2_p_quotient_guess,
        required_point_bits: log2_point_count - SECURE_LOG2_P,
        required_quotient_bits: log2_quotient_count - SECURE_LOG2_P,
        secure: log2_p_point_guess <= SECURE_LOG2_P && log2_p_quotient_guess <= SECURE_LOG2_P,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[&[f64]]) -> Dataset {
        Dataset::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn strict_bounds_unit_interval() {
        let report = strict_bounds(&ds(&[&[0.0], &[1.0]])).unwrap();
        assert_eq!(report.mode, BoundMode::Strict);
        // Noise ceiling at unit scale: (1 - 0) / (2 * 1).
        assert_eq!(report.eps_upper, 0.5);
        // Quotients over the triple sweep are {-0.5, 0}; max is 0.
        assert_eq!(report.r_lower, 0.0);
        assert!(!report.r_fallback);
    }

    #[test]
    fn strict_bounds_rejects_identical_points() {
        let err = strict_bounds(&ds(&[&[2.0, 3.0], &[2.0, 3.0]])).unwrap_err();
        assert!(matches!(err, Error::NoAdmissibleTriples));
    }

    #[test]
    fn strict_bounds_rejects_negative_data() {
        let err = strict_bounds(&ds(&[&[-1.0], &[1.0]])).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn strict_bounds_ignores_duplicate_points_for_noise() {
        // Duplicates contribute no admissible pair; the distinct pair rules.
        let report = strict_bounds(&ds(&[&[1.0], &[1.0], &[4.0]])).unwrap();
        assert_eq!(report.eps_upper, (4.0 - 1.0) / 8.0);
    }

    #[test]
    fn weak_bounds_ratio() {
        let report = weak_bounds(2.0).unwrap();
        assert_eq!(report.mode, BoundMode::Weak);
        assert_eq!(report.r_lower, 2.0);
        assert_eq!(report.eps_upper, 1.0);
        let report = weak_bounds(0.5).unwrap();
        assert_eq!(report.eps_upper / report.r_lower, 0.5);
    }

    #[test]
    fn weak_bounds_rejects_non_positive() {
        assert!(weak_bounds(0.0).is_err());
        assert!(weak_bounds(-3.0).is_err());
        assert!(weak_bounds(f64::NAN).is_err());
    }

    #[test]
    fn sampled_params_live_in_their_intervals() {
        let data = ds(&[&[0.0, 1.0], &[2.0, 3.0], &[4.0, 0.5]]);
        let bounds = strict_bounds(&data).unwrap();
        let p = sample_params(&data, &bounds, 34, 32, 7).unwrap();
        assert_eq!(p.r.len(), 4);
        assert_eq!(p.epsilons.len(), 3);
        let lo = 33f64.exp2().max(bounds.r_lower);
        let hi = 34f64.exp2();
        for &ri in &p.r {
            assert!(ri > lo - 1.0 && ri < hi, "r entry {ri} outside ({lo}, {hi})");
        }
        // One shared scale across dimensions.
        assert_eq!(p.scale(0), p.scale(1));
        assert!(p.shift(0) != p.shift(1));
        for &e in &p.epsilons {
            assert!(e > 0.0 && e < p.eps_max);
        }
        // Strict mode: the cap respects the radicand ceiling at the sampled
        // scale.
        assert!(p.eps_max <= bounds.eps_upper * p.scale(0));
    }

    #[test]
    fn sample_params_is_deterministic() {
        let data = ds(&[&[0.0], &[1.0], &[5.0]]);
        let bounds = strict_bounds(&data).unwrap();
        let a = sample_params(&data, &bounds, 34, 32, 99).unwrap();
        let b = sample_params(&data, &bounds, 34, 32, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_params(&data, &bounds, 34, 32, 100).unwrap();
        assert!(a.r != c.r);
    }

    #[test]
    fn sample_params_accepts_published_smallest_secure_row() {
        // ell1 = 34, ell2 = 32 with a plain dataset shape must be accepted.
        let data = ds(&[&[0.0, 2.0], &[1.0, 7.0], &[3.0, 0.0]]);
        let bounds = strict_bounds(&data).unwrap();
        assert!(sample_params(&data, &bounds, 34, 32, 1).is_ok());
    }

    #[test]
    fn sample_params_rejects_empty_interval() {
        let data = ds(&[&[0.0], &[1.0]]);
        let mut bounds = strict_bounds(&data).unwrap();
        bounds.r_lower = 40f64.exp2();
        let err = sample_params(&data, &bounds, 34, 32, 1).unwrap_err();
        assert!(matches!(err, Error::Ell1TooSmall { ell1: 34, .. }));
        let ell1 = suggest_ell1(bounds.r_lower, 34);
        assert!(sample_params(&data, &bounds, ell1, 32, 1).is_ok());
    }

    #[test]
    fn sample_params_rejects_inverted_bit_lengths() {
        let data = ds(&[&[0.0], &[1.0]]);
        let bounds = strict_bounds(&data).unwrap();
        assert!(sample_params(&data, &bounds, 16, 32, 1).is_err());
        assert!(sample_params(&data, &bounds, 32, 32, 1).is_err());
    }

    #[test]
    fn security_plan_published_shape() {
        // n = 2^16, d = 2^4: count terms are C(32,2) * 2^16 and 32 * C(2^16, 3).
        let plan = security_plan(1 << 16, 1 << 4, 34, 32);
        assert!((plan.log2_p_point_guess - -75.0458).abs() < 1e-3, "{}", plan.log2_p_point_guess);
        assert!(
            (plan.log2_p_quotient_guess - -79.585).abs() < 1e-3,
            "{}",
            plan.log2_p_quotient_guess
        );
        // Marginal row: the point guess misses the 2^-80 target.
        assert!(!plan.secure);

        let plan = security_plan(1 << 16, 1 << 4, 64, 32);
        assert!((plan.log2_p_quotient_guess - -109.585).abs() < 1e-3);
        assert!(plan.secure);

        // Required combined bit lengths at the 2^-80 target.
        assert_eq!(plan.required_point_bits.ceil(), 105.0);
        assert_eq!(plan.required_quotient_bits.ceil(), 131.0);
    }

    #[test]
    fn security_plan_zero_lengths_is_insecure() {
        let plan = security_plan(100, 4, 1, 1);
        assert!(plan.log2_p_point_guess > 0.0 - 3.0 - 1.0 + 0.0); // count term dominates
        assert!(!plan.secure);
    }

    #[test]
    fn security_plan_monotone_in_key_lengths() {
        let base = security_plan(1000, 8, 40, 20);
        let more1 = security_plan(1000, 8, 41, 20);
        let more2 = security_plan(1000, 8, 40, 21);
        assert!(more1.log2_p_point_guess < base.log2_p_point_guess);
        assert!(more1.log2_p_quotient_guess < base.log2_p_quotient_guess);
        assert!(more2.log2_p_point_guess < base.log2_p_point_guess);
        assert!(more2.log2_p_quotient_guess < base.log2_p_quotient_guess);
    }

    #[test]
    fn security_plan_tiny_n_has_no_quotient_attack() {
        let plan = security_plan(2, 4, 34, 32);
        assert_eq!(plan.log2_p_quotient_guess, f64::NEG_INFINITY);
    }
}
