//! Closed forms for the binary, 50/50 gender special case: two-item
//! matching, 1-of-N matching with perfect classification, and verification,
//! with and without classification noise. These double as consistency
//! anchors for the general modules.
//!
//! Conventions follow the worked case: gallery entries are faces with
//! classification error `e_f`, probes are voices with error `e_v`, and both
//! genders are equally likely.

use crate::error::{Error, Result};
use crate::prob::{Channel, CovariateSpace, Distribution, WorldModel};

/// Gender classification error rates for faces (gallery side) and voices
/// (probe side).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenderErrorRates {
    pub e_f: f64,
    pub e_v: f64,
}

impl GenderErrorRates {
    pub fn new(e_f: f64, e_v: f64) -> Result<Self> {
        for (name, e) in [("e_f", e_f), ("e_v", e_v)] {
            if !(0.0..=1.0).contains(&e) || e.is_nan() {
                return Err(Error::Domain(format!(
                    "gender error rate {name} = {e} outside [0, 1]"
                )));
            }
        }
        Ok(GenderErrorRates { e_f, e_v })
    }
}

/// The optimal two-item matching strategy: on an observed gender mismatch
/// between the gallery items, pick the one matching the observed probe
/// gender with probability `p_same`; the optimum is always 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchStrategy12 {
    pub p_same: f64,
    pub error: f64,
}

/// One row of the eight-way case analysis for two-item matching on an
/// actually mismatched gallery pair: which classifications were correct,
/// the probability of that pattern, and the matching-error it incurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchTypeRow {
    pub probe_correct: bool,
    pub gallery_match_correct: bool,
    pub gallery_imposter_correct: bool,
    /// Probability of this classification pattern (error factor excluded).
    pub pattern_prob: f64,
    /// Matching-error probability conditioned on the pattern.
    pub error_factor: f64,
    /// `pattern_prob · error_factor`.
    pub error_prob: f64,
}

/// Error of optimal 1:2 matching with perfect gender classification.
pub fn match12_perfect() -> f64 {
    0.25
}

/// The optimal two-item strategy under noisy classification.
///
/// `p_same` follows the threshold rule: pick the observed-gender match
/// whenever `e_f + e_v < 2·e_f·e_v + 0.5`, otherwise pick the other item.
pub fn match12_imperfect(rates: GenderErrorRates) -> MatchStrategy12 {
    let GenderErrorRates { e_f, e_v } = rates;
    if e_f + e_v < 2.0 * e_f * e_v + 0.5 {
        MatchStrategy12 {
            p_same: 1.0,
            error: 0.25 + 0.5 * (e_f + e_v - 2.0 * e_v * e_f),
        }
    } else {
        MatchStrategy12 {
            p_same: 0.0,
            error: 0.75 + e_f * e_v - 0.5 * (e_v + e_f),
        }
    }
}

/// Two-item matching error of an arbitrary `p_same`, via the eight-type
/// enumeration: `0.25 + 0.5 · Σ error_prob`.
pub fn match12_error_for_strategy(rates: GenderErrorRates, p_same: f64) -> f64 {
    let total: f64 = mismatch_type_table(rates, p_same)
        .iter()
        .map(|row| row.error_prob)
        .sum();
    0.25 + 0.5 * total
}

/// The eight classification-correctness patterns for a truly mismatched
/// gallery pair, with their probabilities and per-pattern matching error
/// under strategy `p`.
pub fn mismatch_type_table(rates: GenderErrorRates, p: f64) -> [MismatchTypeRow; 8] {
    let GenderErrorRates { e_f, e_v } = rates;
    let pv = [1.0 - e_v, e_v]; // probe: correct, flipped
    let pf = [1.0 - e_f, e_f]; // each gallery item: correct, flipped
    let mut rows = [MismatchTypeRow {
        probe_correct: false,
        gallery_match_correct: false,
        gallery_imposter_correct: false,
        pattern_prob: 0.0,
        error_factor: 0.0,
        error_prob: 0.0,
    }; 8];
    // Table order: (probe, match, imposter) = (✓✓✓, ✓×✓, ✓✓×, ✓××, ×✓✓, ××✓, ×✓×, ×××).
    let patterns = [
        (true, true, true),
        (true, false, true),
        (true, true, false),
        (true, false, false),
        (false, true, true),
        (false, false, true),
        (false, true, false),
        (false, false, false),
    ];
    for (slot, &(probe_ok, match_ok, imposter_ok)) in patterns.iter().enumerate() {
        let pattern_prob = pv[usize::from(!probe_ok)]
            * pf[usize::from(!match_ok)]
            * pf[usize::from(!imposter_ok)];
        // With the pair truly mismatched, the observed pair looks mismatched
        // when the two gallery classifications agree in correctness; then
        // picking the observed-probe match errs iff the observed probe
        // points at the imposter. Otherwise the pair looks matched and the
        // uniform pick errs half the time.
        let error_factor = if match_ok == imposter_ok {
            let observed_match_is_true_match = probe_ok == match_ok;
            if observed_match_is_true_match {
                1.0 - p
            } else {
                p
            }
        } else {
            0.5
        };
        rows[slot] = MismatchTypeRow {
            probe_correct: probe_ok,
            gallery_match_correct: match_ok,
            gallery_imposter_correct: imposter_ok,
            pattern_prob,
            error_factor,
            error_prob: pattern_prob * error_factor,
        };
    }
    rows
}

/// Error of optimal 1:N matching with perfect gender classification:
/// `1 - (2 - 0.5^{N-1}) / N`.
pub fn match1n_perfect(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain(
            "gallery size must be at least 1".to_string(),
        ));
    }
    let halves = if n <= i32::MAX as u64 {
        0.5f64.powi(n as i32 - 1)
    } else {
        0.0 // underflows many orders of magnitude before this
    };
    Ok(1.0 - (2.0 - halves) / n as f64)
}

/// Verification with perfect gender classification: accept same-gender pairs
/// with probability 2/3 for an equal error rate of 1/3.
pub fn verify_eer_perfect() -> (f64, f64) {
    (2.0 / 3.0, 1.0 / 3.0)
}

/// Closed form for verification under noisy classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyEer {
    /// Probability of calling the polarity (same / different) of the pair's
    /// gender relationship correctly.
    pub alpha: f64,
    /// Acceptance probability for pairs observed as gender-matched.
    pub p_accept: f64,
    /// Acceptance probability for pairs observed as gender-mismatched.
    pub q_accept: f64,
    pub eer: f64,
}

/// Optimal verification under noisy classification: reject observed
/// mismatches, accept observed matches `2/(1+2α)` of the time, for an EER of
/// `1/(1+2α)` with `α = (1-e_f)(1-e_v) + e_f·e_v`.
///
/// Rates above 0.5 are reduced by relabeling symmetry (`e ← 1 - e`): a
/// worse-than-chance classifier is a better-than-chance one read backwards.
pub fn verify_eer_imperfect(rates: GenderErrorRates) -> VerifyEer {
    let e_f = if rates.e_f > 0.5 { 1.0 - rates.e_f } else { rates.e_f };
    let e_v = if rates.e_v > 0.5 { 1.0 - rates.e_v } else { rates.e_v };
    let alpha = (1.0 - e_f) * (1.0 - e_v) + e_f * e_v;
    VerifyEer {
        alpha,
        p_accept: 2.0 / (1.0 + 2.0 * alpha),
        q_accept: 0.0,
        eer: 1.0 / (1.0 + 2.0 * alpha),
    }
}

/// The 50/50 binary gender world: uniform priors, symmetric probe channel
/// with flip probability `e_v`, symmetric gallery channel with `e_f`.
pub fn gender_model(rates: GenderErrorRates) -> WorldModel {
    let space = CovariateSpace::binary_gender();
    WorldModel::new(
        Distribution::uniform(&space),
        Distribution::uniform(&space),
        Channel::binary_symmetric(&space, rates.e_v).expect("binary space"),
        Channel::binary_symmetric(&space, rates.e_f).expect("binary space"),
    )
    .expect("components share the space")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval;
    use crate::verification;

    fn rates(e_f: f64, e_v: f64) -> GenderErrorRates {
        GenderErrorRates::new(e_f, e_v).unwrap()
    }

    #[test]
    fn rates_validate() {
        assert!(GenderErrorRates::new(0.0, 1.0).is_ok());
        assert!(matches!(
            GenderErrorRates::new(-0.1, 0.5),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            GenderErrorRates::new(0.1, 1.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn match12_perfect_value_and_limits() {
        assert_eq!(match12_perfect(), 0.25);
        let zero = match12_imperfect(rates(0.0, 0.0));
        assert_eq!(zero.p_same, 1.0);
        assert_eq!(zero.error, 0.25);
        // Cross-module anchor: the general optimum on the noiseless model.
        let ans = retrieval::optimal_policy(&gender_model(rates(0.0, 0.0)), 2).unwrap();
        assert_eq!(ans.overall_error, 0.25);
    }

    #[test]
    fn match12_imperfect_examples() {
        let coin = match12_imperfect(rates(0.5, 0.0));
        assert!((coin.error - 0.5).abs() < 1e-15);

        let s = match12_imperfect(rates(0.1, 0.2));
        assert_eq!(s.p_same, 1.0);
        assert!((s.error - 0.38).abs() < 1e-15);
    }

    #[test]
    fn match12_threshold_picks_the_better_branch() {
        // One classifier worse than random: picking the observed mismatch wins.
        let s = match12_imperfect(rates(0.9, 0.1));
        assert_eq!(s.p_same, 0.0);
        let p0 = match12_error_for_strategy(rates(0.9, 0.1), 0.0);
        let p1 = match12_error_for_strategy(rates(0.9, 0.1), 1.0);
        assert!(p0 < p1);
        assert!((s.error - p0).abs() < 1e-12);
    }

    #[test]
    fn type_table_row_values() {
        let table = mismatch_type_table(rates(0.0, 0.0), 1.0);
        assert_eq!(table[0].error_prob, 0.0); // all correct, strategy never errs

        let table = mismatch_type_table(rates(0.1, 0.2), 1.0);
        // Row 4: probe correct, both gallery items flipped.
        assert!((table[3].error_prob - 0.8 * 0.01 * 1.0).abs() < 1e-15);
        // Row 5: probe flipped, both gallery items correct.
        assert!((table[4].error_prob - 0.2 * 0.81 * 1.0).abs() < 1e-15);
    }

    #[test]
    fn type_table_patterns_cover_everything() {
        for &(e_f, e_v) in &[(0.0, 0.0), (0.1, 0.2), (0.37, 0.49), (0.5, 0.5)] {
            for p in [0.0, 0.3, 1.0] {
                let table = mismatch_type_table(rates(e_f, e_v), p);
                let total: f64 = table.iter().map(|r| r.pattern_prob).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_identity_reproduces_branch_formulas() {
        let mut e = 0.0;
        while e <= 0.5 {
            let mut f = 0.0;
            while f <= 0.5 {
                let r = rates(f, e);
                let s = match12_imperfect(r);
                let enumerated = match12_error_for_strategy(r, s.p_same);
                assert!(
                    (s.error - enumerated).abs() < 1e-12,
                    "e_f={f} e_v={e}: branch {} enum {enumerated}",
                    s.error
                );
                f += 0.05;
            }
            e += 0.05;
        }
    }

    #[test]
    fn match1n_perfect_examples() {
        assert_eq!(match1n_perfect(1).unwrap(), 0.0);
        assert_eq!(match1n_perfect(2).unwrap(), 0.25);
        assert_eq!(match1n_perfect(4).unwrap(), 0.53125);
        assert!(matches!(match1n_perfect(0), Err(Error::Domain(_))));
    }

    #[test]
    fn match1n_perfect_monotone_and_limits() {
        let mut prev = match1n_perfect(2).unwrap();
        for n in 3..=40 {
            let cur = match1n_perfect(n).unwrap();
            assert!(cur > prev, "n={n}");
            prev = cur;
        }
        assert!(match1n_perfect(1 << 20).unwrap() > 0.999_99);
    }

    #[test]
    fn verify_perfect_values() {
        let (p, eer) = verify_eer_perfect();
        assert_eq!(p, 2.0 / 3.0);
        assert_eq!(eer, 1.0 / 3.0);
        let v = verify_eer_imperfect(rates(0.0, 0.0));
        assert_eq!(v.alpha, 1.0);
        assert_eq!((v.p_accept, v.eer), (p, eer));
        assert_eq!(v.q_accept, 0.0);
    }

    #[test]
    fn verify_imperfect_examples() {
        let v = verify_eer_imperfect(rates(0.5, 0.5));
        assert_eq!(v.alpha, 0.5);
        assert_eq!(v.p_accept, 1.0);
        assert_eq!(v.eer, 0.5);

        let v = verify_eer_imperfect(rates(0.1, 0.2));
        assert!((v.alpha - 0.74).abs() < 1e-12);
        assert!((v.p_accept - 2.0 / 2.48).abs() < 1e-12);
        assert!((v.eer - 1.0 / 2.48).abs() < 1e-12);
    }

    #[test]
    fn verify_symmetry_reduction_for_worse_than_chance_rates() {
        let direct = verify_eer_imperfect(rates(0.1, 0.2));
        let flipped = verify_eer_imperfect(rates(0.9, 0.8));
        assert_eq!(direct, flipped);
        // The general solver finds the relabeled policy on its own.
        let sol = verification::optimal_eer(&gender_model(rates(0.9, 0.8)));
        assert!((sol.eer - direct.eer).abs() < 1e-12);
    }

    #[test]
    fn verify_eer_monotone_in_each_rate() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.05).collect();
        for &fixed in &grid {
            let mut prev = f64::NEG_INFINITY;
            for &e in &grid {
                let eer = verify_eer_imperfect(rates(e, fixed)).eer;
                assert!(eer >= prev - 1e-15, "e_f={e} e_v={fixed}");
                prev = eer;
            }
            let mut prev = f64::NEG_INFINITY;
            for &e in &grid {
                let eer = verify_eer_imperfect(rates(fixed, e)).eer;
                assert!(eer >= prev - 1e-15, "e_f={fixed} e_v={e}");
                prev = eer;
            }
        }
    }

    #[test]
    fn verify_embedding_matches_general_module_on_grid() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.05).collect();
        for &e_f in &grid {
            for &e_v in &grid {
                let closed = verify_eer_imperfect(rates(e_f, e_v));
                let sol = verification::optimal_eer(&gender_model(rates(e_f, e_v)));
                assert!(
                    (closed.eer - sol.eer).abs() < 1e-9,
                    "e_f={e_f} e_v={e_v}: closed {} general {}",
                    closed.eer,
                    sol.eer
                );
            }
        }
    }

    #[test]
    fn match1n_embedding_matches_general_module() {
        let model = gender_model(rates(0.0, 0.0));
        for n in 1..=12 {
            let closed = match1n_perfect(n).unwrap();
            let general = retrieval::optimal_policy(&model, n).unwrap().overall_error;
            assert!(
                (closed - general).abs() < 1e-12,
                "n={n}: closed {closed} general {general}"
            );
        }
    }

    #[test]
    fn match12_general_optimum_dominates_two_item_strategy() {
        // The two-item strategy inspects both gallery classifications, which
        // the value-targeting policy class cannot; its error is a lower
        // bound, met exactly when classification is noiseless.
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.05).collect();
        for &e_f in &grid {
            for &e_v in &grid {
                let r = rates(e_f, e_v);
                let closed = match12_imperfect(r).error;
                let general = retrieval::optimal_policy(&gender_model(r), 2)
                    .unwrap()
                    .overall_error;
                assert!(
                    general >= closed - 1e-12,
                    "e_f={e_f} e_v={e_v}: general {general} closed {closed}"
                );
            }
        }
    }
}
