//! Heralded photon-number distribution of output mode 1.
//!
//! For a detection record `n₂ … n_N` the unnormalized weight of `n₁` photons
//! left in mode 1 is
//!
//! ```text
//! ⟨n|ρ_trans|n⟩ = Σ_{s : Σs = D + n₁} P_s |S_{s,n}|² / (n₁! Π_j n_j!)
//! ```
//!
//! and the conditional coefficients `c_{n₁}` are these weights divided by
//! their sum, the heralding probability of the record.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::ensemble::{weight, DetectionPattern, InputEnsemble, OccupationVector};
use crate::permanent::compute_s;
use crate::unitary::Unitary;
use crate::{Error, Result, THEOREM_SLACK};

/// Coefficients more negative than this are reported as numeric failures.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeraldStatus {
    Heralded,
    /// The record has probability zero; coefficients are all zero.
    ZeroHerald,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDistribution {
    pub pattern: DetectionPattern,
    pub status: HeraldStatus,
    /// Unconditional probability of observing `pattern`.
    pub herald_prob: f64,
    /// `c₀ … c_{M−D}`.
    pub coefficients: Vec<f64>,
    /// `c₁/c₀`, `None` when `c₀ = 0`.
    pub ratio_10: Option<f64>,
    /// `c₂/c₁`, `None` when `c₁ = 0`.
    pub ratio_21: Option<f64>,
}

impl ConditionalDistribution {
    /// `c_{n₁}`, zero past the end of the support.
    pub fn coefficient(&self, n1: usize) -> f64 {
        self.coefficients.get(n1).copied().unwrap_or(0.0)
    }

    /// Total weight on two or more photons.
    pub fn multiphoton_weight(&self) -> f64 {
        self.coefficients.iter().skip(2).sum()
    }

    pub fn is_heralded(&self) -> bool {
        self.status == HeraldStatus::Heralded
    }
}

fn check_dims(unitary: &Unitary, ensemble: &InputEnsemble, pattern: &DetectionPattern) -> Result<()> {
    let n = unitary.dim();
    if ensemble.len() != n || pattern.len() + 1 != n {
        return Err(Error::Dimension(format!(
            "unitary has {n} modes, ensemble {}, pattern {} detectors (expected {})",
            ensemble.len(),
            pattern.len(),
            n - 1
        )));
    }
    Ok(())
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `⟨n|ρ_trans|n⟩` for the full occupation `(n1, pattern)`.
///
/// Input occupations are visited in lexicographic order of their supports
/// within the photon-number sector `D + n1`, and summed sequentially, so the
/// result is bit-reproducible.
pub fn unnormalized_coefficient(
    unitary: &Unitary,
    ensemble: &InputEnsemble,
    pattern: &DetectionPattern,
    n1: usize,
) -> Result<f64> {
    check_dims(unitary, ensemble, pattern)?;
    let n = unitary.dim();
    let photons = pattern.total() + n1;
    if photons > n {
        return Ok(0.0);
    }
    let output = pattern.with_first(n1);
    let norm = output.iter().map(|&k| factorial(k)).product::<f64>();
    let mut total = 0.0;
    for support in (0..n).combinations(photons) {
        let s = OccupationVector::from_support(n, &support);
        let p_s = weight(ensemble, &s)?;
        if p_s == 0.0 {
            continue;
        }
        let amp = compute_s(unitary, &s, &output)?;
        total += p_s * amp.norm_sqr();
    }
    Ok(total / norm)
}

/// Conditional state of mode 1 given `pattern` on modes `2..N`.
pub fn evaluate(
    unitary: &Unitary,
    ensemble: &InputEnsemble,
    pattern: &DetectionPattern,
) -> Result<ConditionalDistribution> {
    check_dims(unitary, ensemble, pattern)?;
    let detected = pattern.total();
    let max_n1 = ensemble.active_modes().saturating_sub(detected);
    let raw = (0..=max_n1)
        .map(|n1| unnormalized_coefficient(unitary, ensemble, pattern, n1))
        .collect::<Result<Vec<_>>>()?;
    let herald_prob: f64 = raw.iter().sum();

    if herald_prob <= 0.0 {
        return Ok(ConditionalDistribution {
            pattern: pattern.clone(),
            status: HeraldStatus::ZeroHerald,
            herald_prob: 0.0,
            coefficients: vec![0.0; raw.len()],
            ratio_10: None,
            ratio_21: None,
        });
    }

    let coefficients = raw
        .iter()
        .enumerate()
        .map(|(n1, &w)| {
            let c = w / herald_prob;
            if c < -NEGATIVE_CLAMP {
                Err(Error::NumericIntegrity(format!("c_{n1} = {c:e} is negative")))
            } else {
                Ok(c.max(0.0))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let at = |k: usize| coefficients.get(k).copied().unwrap_or(0.0);
    let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
    Ok(ConditionalDistribution {
        pattern: pattern.clone(),
        status: HeraldStatus::Heralded,
        herald_prob,
        ratio_10: ratio(at(1), at(0)),
        ratio_21: ratio(at(2), at(1)),
        coefficients,
    })
}

/// Whether a heralded output beats the best input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementVerdict {
    pub odds_ratio: f64,
    pub p_max: f64,
    /// `c₁/c₀ > R`.
    pub ratio_improved: bool,
    /// `c₁ > p_max`.
    pub prob_improved: bool,
    /// No weight on two or more photons.
    pub single_photon_clean: bool,
    /// `c₀ = 0`, so the ratio test could not be made.
    pub ratio_undefined: bool,
    /// `c₁/c₀ − R`.
    pub ratio_margin: Option<f64>,
    /// `c₁ − p_max`.
    pub prob_margin: f64,
}

/// Tolerance for calling a higher-photon coefficient zero.
pub const CLEAN_TOLERANCE: f64 = 1e-12;

/// Compares `dist` against the ensemble's best input. Improvements must
/// exceed [`THEOREM_SLACK`] so round-off on a tie never reads as a gain.
pub fn improvement_verdict(dist: &ConditionalDistribution, ensemble: &InputEnsemble) -> Result<ImprovementVerdict> {
    let odds_ratio = ensemble.odds_ratio().ok_or(Error::PMaxOne)?;
    let p_max = ensemble.p_max();
    let ratio_margin = dist.ratio_10.map(|r| r - odds_ratio);
    let prob_margin = dist.coefficient(1) - p_max;
    Ok(ImprovementVerdict {
        odds_ratio,
        p_max,
        ratio_improved: ratio_margin.is_some_and(|m| m > THEOREM_SLACK),
        prob_improved: dist.is_heralded() && prob_margin > THEOREM_SLACK,
        single_photon_clean: dist.coefficients.iter().skip(2).all(|&c| c <= CLEAN_TOLERANCE),
        ratio_undefined: dist.ratio_10.is_none(),
        ratio_margin,
        prob_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unitary::{dft, epsilon_scheme, haar_random, EpsilonSchemeSpec};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use num_complex::Complex64;

    fn ens(p: &[f64]) -> InputEnsemble {
        InputEnsemble::new(p.to_vec()).unwrap()
    }

    fn pat(c: &[usize]) -> DetectionPattern {
        DetectionPattern::new(c.to_vec())
    }

    fn splitter() -> Unitary {
        let h = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        Unitary::from_entries(array![[h, h], [h, -h]]).unwrap()
    }

    #[test]
    fn identity_passes_input_through() {
        let id = Unitary::identity(2).unwrap();
        let v = unnormalized_coefficient(&id, &ens(&[0.3, 0.0]), &pat(&[0]), 1).unwrap();
        assert_abs_diff_eq!(v, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn bunching_probability() {
        let v = unnormalized_coefficient(&splitter(), &ens(&[1.0, 1.0]), &pat(&[0]), 2).unwrap();
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn too_many_photons_is_zero() {
        let u = haar_random(3, 1).unwrap();
        let v = unnormalized_coefficient(&u, &ens(&[0.4, 0.5, 0.6]), &pat(&[2, 1]), 1).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn identity_three_modes_heralds_second_input() {
        let id = Unitary::identity(3).unwrap();
        let d = evaluate(&id, &ens(&[0.3, 0.6, 0.0]), &pat(&[1, 0])).unwrap();
        assert_abs_diff_eq!(d.herald_prob, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(d.coefficient(0), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(d.coefficient(1), 0.3, epsilon = 1e-15);
        assert_eq!(d.coefficients.len(), 2);
    }

    #[test]
    fn epsilon_scheme_four_modes_ratio() {
        let u = epsilon_scheme(EpsilonSchemeSpec {
            n_modes: 4,
            epsilon: 1e-3,
        })
        .unwrap();
        let e = InputEnsemble::uniform(4, 0.01).unwrap();
        let d = evaluate(&u, &e, &pat(&[2, 0, 0])).unwrap();
        let r = e.odds_ratio().unwrap();
        let factor = d.ratio_10.unwrap() / r;
        assert!((factor / (4.0 / 3.0) - 1.0).abs() < 0.01, "factor {factor}");
        let verdict = improvement_verdict(&d, &e).unwrap();
        assert!(verdict.ratio_improved);
        assert!(verdict.prob_improved);
        assert!(!verdict.single_photon_clean);
    }

    #[test]
    fn coefficients_are_normalized() {
        let u = dft(3).unwrap();
        let d = evaluate(&u, &ens(&[0.2, 0.2, 0.2]), &pat(&[1, 0])).unwrap();
        assert_abs_diff_eq!(d.coefficients.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(d.coefficients.len(), 3);
    }

    #[test]
    fn impossible_pattern_is_zero_herald() {
        let id = Unitary::identity(3).unwrap();
        let d = evaluate(&id, &ens(&[0.3, 0.0, 0.5]), &pat(&[1, 0])).unwrap();
        assert_eq!(d.status, HeraldStatus::ZeroHerald);
        assert_eq!(d.ratio_10, None);
        let d = evaluate(&id, &ens(&[0.3, 0.2, 0.5]), &pat(&[3, 1])).unwrap();
        assert_eq!(d.status, HeraldStatus::ZeroHerald);
    }

    #[test]
    fn perfect_inputs_give_undefined_ratio() {
        let id = Unitary::identity(2).unwrap();
        let e = ens(&[1.0, 0.5]);
        let d = evaluate(&id, &e, &pat(&[0])).unwrap();
        assert_eq!(d.coefficient(1), 1.0);
        assert_eq!(d.ratio_10, None);
        assert_eq!(improvement_verdict(&d, &e), Err(Error::PMaxOne));
    }

    #[test]
    fn identity_zero_pattern_never_improves() {
        let id = Unitary::identity(3).unwrap();
        for p in [[0.3, 0.3, 0.3], [0.5, 0.1, 0.2], [0.05, 0.9, 0.9]] {
            let e = ens(&p);
            let d = evaluate(&id, &e, &pat(&[0, 0])).unwrap();
            let v = improvement_verdict(&d, &e).unwrap();
            assert!(!v.ratio_improved && !v.prob_improved);
            assert!(v.single_photon_clean);
        }
    }

    #[test]
    fn dimension_checks() {
        let id = Unitary::identity(3).unwrap();
        assert!(matches!(
            evaluate(&id, &ens(&[0.1, 0.1]), &pat(&[0, 0])),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            evaluate(&id, &ens(&[0.1, 0.1, 0.1]), &pat(&[0])),
            Err(Error::Dimension(_))
        ));
    }
}
