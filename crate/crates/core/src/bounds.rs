//! The improvement bound and the no-go results as checkable predicates.
//!
//! For any interferometer, ensemble and record with `D` detected photons,
//! `c₁/c₀ ≤ (M − D)·R` with `R = p_max/(1 − p_max)` and `M` the number of
//! inputs with `p_i > 0`. Special cases where the bound collapses to `R`
//! (no improvement possible):
//!
//! * `D = 0`;
//! * `D = 1` with all nonzero `p_i` equal;
//! * `D = M − 1`, where additionally `c₁ ≤ p_max`.

use serde::{Deserialize, Serialize};

use crate::conditional::{evaluate, ConditionalDistribution};
use crate::ensemble::{DetectionPattern, InputEnsemble};
use crate::unitary::Unitary;
use crate::{Error, Result, THEOREM_SLACK};

/// Tolerance for deciding that the nonzero `p_i` are equal.
pub const EQUAL_P_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TheoremTag {
    GeneralBound,
    DEqualsZero,
    DEqualsMMinusOne,
    DEqualsOneEqualP,
}

/// `(M − D)·R`, zero once `D ≥ M`.
pub fn general_bound(ensemble: &InputEnsemble, pattern: &DetectionPattern) -> Result<f64> {
    let odds = ensemble.odds_ratio().ok_or(Error::PMaxOne)?;
    let available = ensemble.active_modes().saturating_sub(pattern.total());
    Ok(available as f64 * odds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub pattern: DetectionPattern,
    pub detected: usize,
    pub active_modes: usize,
    pub p_max: f64,
    pub odds_ratio: f64,
    pub herald_prob: f64,
    pub c0: f64,
    pub c1: f64,
    pub bound_value: f64,
    pub observed_ratio: Option<f64>,
    /// `bound_value − observed_ratio`.
    pub slack: Option<f64>,
    pub satisfied: bool,
    pub theorem_tags: Vec<TheoremTag>,
    pub violations: Vec<TheoremTag>,
}

/// Evaluates the scenario and tests every applicable result against it.
pub fn check(unitary: &Unitary, ensemble: &InputEnsemble, pattern: &DetectionPattern) -> Result<BoundReport> {
    let bound_value = general_bound(ensemble, pattern)?;
    let dist = evaluate(unitary, ensemble, pattern)?;
    report(ensemble, &dist, bound_value)
}

/// [`check`] for every record with `D ≤ N`, in [`DetectionPattern::enumerate`] order.
pub fn check_exhaustive(unitary: &Unitary, ensemble: &InputEnsemble) -> Result<Vec<BoundReport>> {
    let n = unitary.dim();
    DetectionPattern::enumerate(n, n)
        .iter()
        .map(|p| check(unitary, ensemble, p))
        .collect()
}

fn report(ensemble: &InputEnsemble, dist: &ConditionalDistribution, bound_value: f64) -> Result<BoundReport> {
    let odds_ratio = ensemble.odds_ratio().ok_or(Error::PMaxOne)?;
    let p_max = ensemble.p_max();
    let detected = dist.pattern.total();
    let active_modes = ensemble.active_modes();
    if detected > active_modes && dist.herald_prob > 0.0 {
        return Err(Error::NumericIntegrity(format!(
            "{detected} photons detected from {active_modes} sources with probability {:e}",
            dist.herald_prob
        )));
    }

    let c0 = dist.coefficient(0);
    let c1 = dist.coefficient(1);
    let observed = dist.ratio_10;
    // c₀ = 0 with c₁ > 0 means an infinite ratio, which no bound admits.
    let exceeds = |limit: f64| match observed {
        Some(r) => r > limit + THEOREM_SLACK,
        None => dist.is_heralded() && c1 > 0.0,
    };

    let mut theorem_tags = vec![TheoremTag::GeneralBound];
    let mut violations = Vec::new();
    if exceeds(bound_value) {
        violations.push(TheoremTag::GeneralBound);
    }
    if detected == 0 {
        theorem_tags.push(TheoremTag::DEqualsZero);
        if exceeds(odds_ratio) {
            violations.push(TheoremTag::DEqualsZero);
        }
    }
    if detected + 1 == active_modes {
        theorem_tags.push(TheoremTag::DEqualsMMinusOne);
        if exceeds(odds_ratio) || c1 > p_max + THEOREM_SLACK {
            violations.push(TheoremTag::DEqualsMMinusOne);
        }
    }
    if detected == 1 && ensemble.nonzero_probs_equal(EQUAL_P_TOLERANCE) {
        theorem_tags.push(TheoremTag::DEqualsOneEqualP);
        if exceeds(odds_ratio) {
            violations.push(TheoremTag::DEqualsOneEqualP);
        }
    }

    Ok(BoundReport {
        pattern: dist.pattern.clone(),
        detected,
        active_modes,
        p_max,
        odds_ratio,
        herald_prob: dist.herald_prob,
        c0,
        c1,
        bound_value,
        observed_ratio: observed,
        slack: observed.map(|r| bound_value - r),
        satisfied: violations.is_empty(),
        theorem_tags,
        violations,
    })
}

/// True unless some heralded record has `c₁ > 0` with `c₀ = 0`, i.e. a
/// perfect single photon from imperfect sources.
pub fn perfect_output_impossible<'a>(reports: impl IntoIterator<Item = &'a BoundReport>) -> bool {
    reports
        .into_iter()
        .all(|r| !(r.herald_prob > 0.0 && r.c1 > 0.0 && r.c0 <= 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unitary::{epsilon_scheme, haar_random, EpsilonSchemeSpec};
    use approx::assert_abs_diff_eq;

    fn ens(p: &[f64]) -> InputEnsemble {
        InputEnsemble::new(p.to_vec()).unwrap()
    }

    fn pat(c: &[usize]) -> DetectionPattern {
        DetectionPattern::new(c.to_vec())
    }

    #[test]
    fn bound_values() {
        let b = general_bound(&ens(&[0.1; 4]), &pat(&[2, 0, 0])).unwrap();
        assert_abs_diff_eq!(b, 2.0 / 9.0, epsilon = 1e-15);
        assert_eq!(general_bound(&ens(&[0.5, 0.0, 0.0]), &pat(&[0, 0])).unwrap(), 1.0);
        let e = ens(&[0.2, 0.3, 0.0, 0.25]);
        let r = e.odds_ratio().unwrap();
        assert_eq!(general_bound(&e, &pat(&[1, 1, 0])).unwrap(), r);
        assert_eq!(general_bound(&e, &pat(&[3, 1, 0])).unwrap(), 0.0);
        assert_eq!(general_bound(&ens(&[1.0, 0.2]), &pat(&[0])), Err(Error::PMaxOne));
    }

    #[test]
    fn bound_monotonicity_grid() {
        let patterns: Vec<_> = (0..=5).map(|d| pat(&[d, 0, 0, 0])).collect();
        let mut prev_p = vec![-1.0; patterns.len()];
        for step in 0..50 {
            let p = step as f64 / 50.0;
            let e = ens(&[p, p * 0.5, 0.1, 0.3, 0.0]);
            let values: Vec<f64> = patterns.iter().map(|q| general_bound(&e, q).unwrap()).collect();
            assert!(values.windows(2).all(|w| w[0] >= w[1]));
            // p_max only moves once p exceeds the fixed 0.3 entry.
            for (v, prev) in values.iter().zip(prev_p.iter_mut()) {
                assert!(*v >= *prev);
                *prev = *v;
            }
        }
    }

    #[test]
    fn epsilon_scheme_report_is_tight_but_satisfied() {
        let u = epsilon_scheme(EpsilonSchemeSpec {
            n_modes: 4,
            epsilon: 1e-3,
        })
        .unwrap();
        let rep = check(&u, &ens(&[0.01; 4]), &pat(&[2, 0, 0])).unwrap();
        assert!(rep.satisfied);
        assert_eq!(rep.theorem_tags, vec![TheoremTag::GeneralBound]);
        assert!(rep.observed_ratio.unwrap() > rep.odds_ratio);
    }

    #[test]
    fn tags_follow_detection_count() {
        let u = haar_random(3, 4).unwrap();
        let e = ens(&[0.3, 0.3, 0.3]);
        let zero = check(&u, &e, &pat(&[0, 0])).unwrap();
        assert!(zero.theorem_tags.contains(&TheoremTag::DEqualsZero));
        let one = check(&u, &e, &pat(&[0, 1])).unwrap();
        assert!(one.theorem_tags.contains(&TheoremTag::DEqualsOneEqualP));
        let two = check(&u, &e, &pat(&[1, 1])).unwrap();
        assert!(two.theorem_tags.contains(&TheoremTag::DEqualsMMinusOne));
        for r in [zero, one, two] {
            assert!(r.satisfied, "{r:?}");
        }
    }

    #[test]
    fn over_detection_is_zero_herald() {
        let u = haar_random(3, 5).unwrap();
        let rep = check(&u, &ens(&[0.4, 0.0, 0.2]), &pat(&[2, 1])).unwrap();
        assert_eq!(rep.bound_value, 0.0);
        assert_eq!(rep.herald_prob, 0.0);
        assert!(rep.satisfied);
    }

    #[test]
    fn near_perfect_sources_keep_ratio_finite() {
        let e = ens(&[0.999, 0.999, 0.999]);
        for seed in 0..5 {
            let u = haar_random(3, seed).unwrap();
            let reports = check_exhaustive(&u, &e).unwrap();
            assert!(perfect_output_impossible(&reports));
            for r in reports.iter().filter(|r| r.herald_prob > 0.0) {
                let bound = (r.active_modes.saturating_sub(r.detected)) as f64 * 999.0;
                assert!(r.c1 <= bound * r.c0 * (1.0 + 1e-9) + 1e-12);
            }
        }
    }

    #[test]
    fn counterexample_is_detected() {
        let fake = BoundReport {
            pattern: pat(&[0]),
            detected: 0,
            active_modes: 2,
            p_max: 0.5,
            odds_ratio: 1.0,
            herald_prob: 0.5,
            c0: 0.0,
            c1: 1.0,
            bound_value: 2.0,
            observed_ratio: None,
            slack: None,
            satisfied: false,
            theorem_tags: vec![TheoremTag::GeneralBound],
            violations: vec![TheoremTag::GeneralBound],
        };
        assert!(!perfect_output_impossible([&fake]));
    }
}
