//! Inputs and measurement records.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-mode single-photon probabilities `p_i`: input `i` carries
/// `(1 − p_i)|0⟩⟨0| + p_i|1⟩⟨1|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct InputEnsemble {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for InputEnsemble {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<InputEnsemble> for Vec<f64> {
    fn from(e: InputEnsemble) -> Self {
        e.probs
    }
}

impl InputEnsemble {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Dimension("empty input ensemble".into()));
        }
        for (mode, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidProbability { mode, value });
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_modes: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n_modes])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn p_max(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// Number of inputs that can emit a photon.
    pub fn active_modes(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    /// Odds ratio `R = p_max/(1 − p_max)`; `None` when `p_max = 1`.
    pub fn odds_ratio(&self) -> Option<f64> {
        let p = self.p_max();
        (p < 1.0).then(|| p / (1.0 - p))
    }

    /// True when every nonzero `p_i` agrees to within `tol`.
    pub fn nonzero_probs_equal(&self, tol: f64) -> bool {
        let mut nonzero = self.probs.iter().filter(|&&p| p > 0.0);
        match nonzero.next() {
            None => true,
            Some(&first) => nonzero.all(|&p| (p - first).abs() <= tol),
        }
    }

    /// Ensemble with input modes reordered: entry `j` is `p[order[j]]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::Dimension("permutation length mismatch".into()));
        }
        Self::new(order.iter().map(|&j| self.probs[j]).collect())
    }
}

/// Binary input pattern `s`: which inputs carry a photon.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OccupationVector {
    bits: Vec<bool>,
}

impl OccupationVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidParameter(format!("occupation bit {other}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    /// Occupation with photons exactly at `support` (indices must be `< n`).
    pub fn from_support(n: usize, support: &[usize]) -> Self {
        let mut bits = vec![false; n];
        for &i in support {
            bits[i] = true;
        }
        Self { bits }
    }

    /// The vacuum input.
    pub fn empty(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Total photon number `Σ_s`.
    pub fn photons(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Occupied inputs `Φ_s`, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// All `2^n` occupations in counting order (bit 0 is mode 1).
    pub fn all(n: usize) -> impl Iterator<Item = Self> {
        (0u64..1 << n).map(move |mask| Self {
            bits: (0..n).map(|i| mask >> i & 1 == 1).collect(),
        })
    }
}

/// `P_s = Π p_i^{s_i} (1 − p_i)^{1 − s_i}`.
pub fn weight(ensemble: &InputEnsemble, s: &OccupationVector) -> Result<f64> {
    if ensemble.len() != s.len() {
        return Err(Error::Dimension(format!(
            "ensemble has {} modes, occupation has {}",
            ensemble.len(),
            s.len()
        )));
    }
    Ok(ensemble
        .probs()
        .iter()
        .zip(s.bits())
        .map(|(&p, &b)| if b { p } else { 1.0 - p })
        .product())
}

/// Photon counts `n₂ … n_N` registered on the detected modes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DetectionPattern {
    counts: Vec<usize>,
}

impl DetectionPattern {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Number of detected modes, `N − 1`.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total detected photons `D`.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Full output occupation `(n₁, n₂, …, n_N)`.
    pub fn with_first(&self, n1: usize) -> Vec<usize> {
        std::iter::once(n1).chain(self.counts.iter().copied()).collect()
    }

    /// Every pattern on `n_modes − 1` detectors with total at most `max_total`,
    /// ordered by total then lexicographically (descending counts first).
    pub fn enumerate(n_modes: usize, max_total: usize) -> Vec<Self> {
        let slots = n_modes.saturating_sub(1);
        let mut out = Vec::new();
        for total in 0..=max_total {
            let mut current = Vec::with_capacity(slots);
            compositions(slots, total, &mut current, &mut out);
        }
        out
    }

    /// Patterns up to relabelling of the detected modes: nonincreasing counts.
    pub fn enumerate_canonical(n_modes: usize, max_total: usize) -> Vec<Self> {
        Self::enumerate(n_modes, max_total)
            .into_iter()
            .filter(|p| p.counts.windows(2).all(|w| w[0] >= w[1]))
            .collect()
    }
}

fn compositions(slots: usize, remaining: usize, current: &mut Vec<usize>, out: &mut Vec<DetectionPattern>) {
    if current.len() + 1 == slots {
        current.push(remaining);
        out.push(DetectionPattern::new(current.clone()));
        current.pop();
        return;
    }
    if slots == 0 {
        if remaining == 0 {
            out.push(DetectionPattern::new(Vec::new()));
        }
        return;
    }
    for k in (0..=remaining).rev() {
        current.push(k);
        compositions(slots, remaining - k, current, out);
        current.pop();
    }
}
