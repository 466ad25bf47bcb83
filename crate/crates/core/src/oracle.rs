//! Brute-force reference simulator.
//!
//! Multiplies out `Π_{i ∈ Φ_s} (Σ_k Λ_ki â_k†)` monomial by monomial and
//! reads amplitudes off the resulting Fock expansion. No permanents are
//! involved, so agreement with [`crate::conditional`] is a genuine cross-check.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::ensemble::{weight, InputEnsemble, OccupationVector};
use crate::unitary::Unitary;
use crate::{Error, Result};

/// Largest photon number [`expand`] accepts.
pub const MAX_ORACLE_PHOTONS: usize = 12;
/// Amplitudes below this magnitude are dropped from the expansion.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Output state `Σ_n amp(n) |n⟩` of a fixed input occupation.
#[derive(Clone, Debug, PartialEq)]
pub struct FockPolynomial {
    n_modes: usize,
    grade: usize,
    terms: BTreeMap<Vec<usize>, Complex64>,
}

impl FockPolynomial {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Photon number shared by every term.
    pub fn grade(&self) -> usize {
        self.grade
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, Complex64> {
        &self.terms
    }

    /// Fock amplitude of `occupation`; zero if absent.
    pub fn amplitude(&self, occupation: &[usize]) -> Complex64 {
        self.terms.get(occupation).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }
}

/// Expands the transformed input `s` into Fock amplitudes.
pub fn expand(unitary: &Unitary, s: &OccupationVector) -> Result<FockPolynomial> {
    let n = unitary.dim();
    if s.len() != n {
        return Err(Error::Dimension(format!(
            "unitary has {n} modes, occupation {}",
            s.len()
        )));
    }
    let grade = s.photons();
    if grade > MAX_ORACLE_PHOTONS {
        return Err(Error::SizeExceeded {
            size: grade,
            limit: MAX_ORACLE_PHOTONS,
        });
    }

    // Coefficients of monomials Π (â_k†)^{m_k}, keyed by exponent vector.
    let mut monomials: BTreeMap<Vec<usize>, Complex64> = BTreeMap::new();
    monomials.insert(vec![0; n], Complex64::new(1.0, 0.0));
    for input in s.support() {
        let mut next: BTreeMap<Vec<usize>, Complex64> = BTreeMap::new();
        for (exponents, coeff) in &monomials {
            for out in 0..n {
                let factor = unitary.get(out, input);
                if factor == Complex64::default() {
                    continue;
                }
                let mut key = exponents.clone();
                key[out] += 1;
                *next.entry(key).or_default() += coeff * factor;
            }
        }
        monomials = next;
    }

    // (â†)^m |0⟩ = √(m!) |m⟩.
    let terms = monomials
        .into_iter()
        .filter_map(|(exponents, coeff)| {
            let scale: f64 = exponents
                .iter()
                .map(|&m| (1..=m).map(|j| j as f64).product::<f64>())
                .product::<f64>()
                .sqrt();
            let amp = coeff * scale;
            (amp.norm() >= PRUNE_THRESHOLD).then_some((exponents, amp))
        })
        .collect();
    Ok(FockPolynomial {
        n_modes: n,
        grade,
        terms,
    })
}

/// `⟨n|ρ_trans|n⟩` for the mixed input described by `ensemble`.
pub fn outcome_probability(unitary: &Unitary, ensemble: &InputEnsemble, occupation: &[usize]) -> Result<f64> {
    let n = unitary.dim();
    if ensemble.len() != n || occupation.len() != n {
        return Err(Error::Dimension(format!(
            "unitary has {n} modes, ensemble {}, occupation {}",
            ensemble.len(),
            occupation.len()
        )));
    }
    let photons: usize = occupation.iter().sum();
    let mut total = 0.0;
    for s in OccupationVector::all(n) {
        if s.photons() != photons {
            continue;
        }
        let p_s = weight(ensemble, &s)?;
        if p_s == 0.0 {
            continue;
        }
        total += p_s * expand(unitary, &s)?.amplitude(occupation).norm_sqr();
    }
    Ok(total)
}
