//! Interferometer matrices.
//!
//! A passive interferometer maps input creation operators as
//! `â_i† ↦ Σ_k Λ_ki â_k†`, so row `k` of [`Unitary`] is an output mode and
//! column `i` an input mode. Every constructor in this module returns a matrix
//! that has been checked against [`UNITARITY_TOLERANCE`].

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Maximum allowed `max_jk |(U†U − I)_jk|`.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

/// A validated `N × N` unitary, `N ≥ 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct Unitary {
    entries: Array2<Complex64>,
}

/// Row-major JSON exchange form `{"dim": N, "re": [[..]], "im": [[..]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl TryFrom<MatrixJson> for Unitary {
    type Error = Error;

    fn try_from(m: MatrixJson) -> Result<Self> {
        let n = m.dim;
        let rows_ok = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !rows_ok(&m.re) || !rows_ok(&m.im) {
            return Err(Error::Dimension(format!(
                "matrix JSON declares dim {n} but re/im are not {n}x{n}"
            )));
        }
        let entries = Array2::from_shape_fn((n, n), |(k, i)| Complex64::new(m.re[k][i], m.im[k][i]));
        Unitary::from_entries(entries)
    }
}

impl From<Unitary> for MatrixJson {
    fn from(u: Unitary) -> Self {
        let n = u.dim();
        let part = |f: fn(&Complex64) -> f64| {
            (0..n)
                .map(|k| (0..n).map(|i| f(&u.entries[[k, i]])).collect())
                .collect()
        };
        MatrixJson {
            dim: n,
            re: part(|z| z.re),
            im: part(|z| z.im),
        }
    }
}

impl Unitary {
    /// Validates `entries` and wraps them.
    pub fn from_entries(entries: Array2<Complex64>) -> Result<Self> {
        let (rows, cols) = entries.dim();
        if rows != cols {
            return Err(Error::Dimension(format!("matrix is {rows}x{cols}, not square")));
        }
        if rows < 2 {
            return Err(Error::Dimension(format!("need at least 2 modes, got {rows}")));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonUnitary {
                max_deviation: f64::INFINITY,
            });
        }
        let max_deviation = unitarity_deviation(&entries);
        if max_deviation > UNITARITY_TOLERANCE {
            return Err(Error::NonUnitary { max_deviation });
        }
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_entries(Array2::eye(dim))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `Λ_ki`: amplitude for a photon entering mode `input` to leave in mode `output`.
    #[inline]
    pub fn get(&self, output: usize, input: usize) -> Complex64 {
        self.entries[[output, input]]
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn max_unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.entries)
    }

    /// Returns the matrix with input columns reordered: column `j` of the
    /// result is column `order[j]` of `self`.
    pub fn permute_inputs(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.dim())?;
        let n = self.dim();
        let entries = Array2::from_shape_fn((n, n), |(k, j)| self.entries[[k, order[j]]]);
        Self::from_entries(entries)
    }

    /// Returns the matrix with output rows reordered: row `j` of the result
    /// is row `order[j]` of `self`.
    pub fn permute_outputs(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.dim())?;
        let n = self.dim();
        let entries = Array2::from_shape_fn((n, n), |(j, i)| self.entries[[order[j], i]]);
        Self::from_entries(entries)
    }
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::Dimension(format!(
            "permutation of length {} for dim {n}",
            order.len()
        )));
    }
    for &j in order {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidParameter(format!("{order:?} is not a permutation")));
        }
    }
    Ok(())
}

fn unitarity_deviation(m: &Array2<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            let dot: Complex64 = (0..n).map(|r| m[[r, j]].conj() * m[[r, k]]).sum();
            let target = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).norm());
        }
    }
    worst
}

/// Parameters of the near-identity heralding interferometer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchemeSpec {
    pub n_modes: usize,
    pub epsilon: f64,
}

/// Builds the ε-scheme interferometer.
///
/// Output rows 1 and 2 (indices 0 and 1) are fixed:
///
/// * `Λ_12 = −ε`, `Λ_22 = √(1 − ε²)`,
/// * `Λ_1i = √((1 − ε²)/(N − 1))`, `Λ_2i = ε/√(N − 1)` for `i ≠ 2`.
///
/// Mode 2 therefore sees input 2 almost exclusively, while mode 1 collects
/// the remaining inputs evenly. Rows `3..N` never carry detected photons in
/// the scheme's heralding pattern; they are completed by modified Gram–Schmidt
/// starting from `e₃ … e_N`, which is deterministic.
pub fn epsilon_scheme(spec: EpsilonSchemeSpec) -> Result<Unitary> {
    let n = spec.n_modes;
    let eps = spec.epsilon;
    if n < 2 {
        return Err(Error::Dimension(format!("ε-scheme needs at least 2 modes, got {n}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("ε must lie in (0, 1), got {eps}")));
    }
    let spread = ((1.0 - eps * eps) / (n - 1) as f64).sqrt();
    let leak = eps / ((n - 1) as f64).sqrt();

    let mut first = vec![Complex64::new(spread, 0.0); n];
    first[1] = Complex64::new(-eps, 0.0);
    let mut second = vec![Complex64::new(leak, 0.0); n];
    second[1] = Complex64::new((1.0 - eps * eps).sqrt(), 0.0);

    let mut rows = vec![first, second];
    for k in 2..n {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[k] = Complex64::new(1.0, 0.0);
        let v = orthonormalize_against(v, &rows)
            .ok_or_else(|| Error::NumericIntegrity(format!("ε-scheme completion degenerate at row {k}")))?;
        rows.push(v);
    }
    let entries = Array2::from_shape_fn((n, n), |(k, i)| rows[k][i]);
    Unitary::from_entries(entries)
}

/// Removes the components of `v` along each (orthonormal) vector in `basis`,
/// twice for stability, and normalizes. `None` if nothing is left.
fn orthonormalize_against(mut v: Vec<Complex64>, basis: &[Vec<Complex64>]) -> Option<Vec<Complex64>> {
    for _ in 0..2 {
        for b in basis {
            let proj: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            for (y, x) in v.iter_mut().zip(b) {
                *y -= proj * x;
            }
        }
    }
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return None;
    }
    v.iter_mut().for_each(|z| *z /= norm);
    Some(v)
}

/// Haar-random unitary, deterministic in `seed`.
///
/// Draws a complex Ginibre matrix from ChaCha20 and orthonormalizes its
/// columns. Gram–Schmidt produces the QR factor with a positive real diagonal
/// on `R`, which is exactly the phase fix that makes `Q` Haar distributed.
pub fn haar_random(dim: usize, seed: u64) -> Result<Unitary> {
    if dim < 2 {
        return Err(Error::Dimension(format!("need at least 2 modes, got {dim}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    loop {
        let columns: Vec<Vec<Complex64>> = (0..dim)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(re, im)
                    })
                    .collect()
            })
            .collect();
        let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
        for col in columns {
            match orthonormalize_against(col, &q) {
                Some(v) => q.push(v),
                None => break,
            }
        }
        // Rank-deficient draws have probability zero; redraw if one happens.
        if q.len() == dim {
            let entries = Array2::from_shape_fn((dim, dim), |(k, i)| q[i][k]);
            return Unitary::from_entries(entries);
        }
    }
}

/// Discrete Fourier transform `Λ_ki = exp(2πi·k·i/N)/√N` (zero-based indices).
pub fn dft(dim: usize) -> Result<Unitary> {
    if dim < 2 {
        return Err(Error::Dimension(format!("need at least 2 modes, got {dim}")));
    }
    let scale = 1.0 / (dim as f64).sqrt();
    let entries = Array2::from_shape_fn((dim, dim), |(k, i)| {
        let phase = TAU * ((k * i) % dim) as f64 / dim as f64;
        Complex64::from_polar(scale, phase)
    });
    Unitary::from_entries(entries)
}

/// Box coordinates on `U(N)`.
///
/// `realize` computes `T₁ T₂ ⋯ T_m · diag(e^{iφ})` where each `T` is a complex
/// Givens rotation on adjacent modes
///
/// ```text
/// T(θ, ϕ) = [[ cos θ,           −e^{iϕ} sin θ ],
///            [ e^{−iϕ} sin θ,    cos θ        ]]
/// ```
///
/// in the order produced by [`givens_pairs`]. `phases` holds the `m` rotation
/// phases followed by the `N` diagonal phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GivensParameterization {
    pub dim: usize,
    pub angles: Vec<f64>,
    pub phases: Vec<f64>,
}

/// Mode pairs of the rotations, in product order. The sequence is the
/// adjacent-row elimination order of a Givens QR sweep, which is what
/// [`GivensParameterization::from_unitary`] inverts.
pub fn givens_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(dim * dim.saturating_sub(1) / 2);
    for col in 0..dim.saturating_sub(1) {
        for row in (col + 1..dim).rev() {
            pairs.push((row - 1, row));
        }
    }
    pairs
}

impl GivensParameterization {
    pub fn rotation_count(dim: usize) -> usize {
        dim * dim.saturating_sub(1) / 2
    }

    /// All angles and phases zero, which realizes the identity.
    pub fn zeros(dim: usize) -> Self {
        let m = Self::rotation_count(dim);
        Self {
            dim,
            angles: vec![0.0; m],
            phases: vec![0.0; m + dim],
        }
    }

    fn validate(&self) -> Result<()> {
        let m = Self::rotation_count(self.dim);
        if self.dim < 2 {
            return Err(Error::Dimension(format!("need at least 2 modes, got {}", self.dim)));
        }
        if self.angles.len() != m || self.phases.len() != m + self.dim {
            return Err(Error::Dimension(format!(
                "dim {} needs {} angles and {} phases, got {} and {}",
                self.dim,
                m,
                m + self.dim,
                self.angles.len(),
                self.phases.len()
            )));
        }
        if self.angles.iter().chain(&self.phases).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Givens coordinate".into()));
        }
        Ok(())
    }

    pub fn realize(&self) -> Result<Unitary> {
        self.validate()?;
        let n = self.dim;
        let m = Self::rotation_count(n);
        let mut u = Array2::<Complex64>::zeros((n, n));
        for j in 0..n {
            u[[j, j]] = Complex64::from_polar(1.0, self.phases[m + j]);
        }
        let pairs = givens_pairs(n);
        for (idx, &(p, q)) in pairs.iter().enumerate().rev() {
            let (s, c) = self.angles[idx].sin_cos();
            let e = Complex64::from_polar(1.0, self.phases[idx]);
            for col in 0..n {
                let a = u[[p, col]];
                let b = u[[q, col]];
                u[[p, col]] = a * c - e * b * s;
                u[[q, col]] = e.conj() * a * s + b * c;
            }
        }
        Unitary::from_entries(u)
    }

    /// Inverse of [`realize`](Self::realize): angles land in `[0, π/2]`,
    /// phases in `[0, 2π)`.
    pub fn from_unitary(u: &Unitary) -> Self {
        let n = u.dim();
        let mut w = u.entries().clone();
        let mut angles = Vec::with_capacity(Self::rotation_count(n));
        let mut phases = Vec::with_capacity(Self::rotation_count(n) + n);
        for col in 0..n - 1 {
            for row in (col + 1..n).rev() {
                let (p, q) = (row - 1, row);
                let a = w[[p, col]];
                let b = w[[q, col]];
                let theta = b.norm().atan2(a.norm());
                let phi = if a.norm() > 0.0 && b.norm() > 0.0 {
                    (a.arg() - b.arg()).rem_euclid(TAU)
                } else {
                    0.0
                };
                let (s, c) = theta.sin_cos();
                let e = Complex64::from_polar(1.0, phi);
                for k in 0..n {
                    let x = w[[p, k]];
                    let y = w[[q, k]];
                    w[[p, k]] = x * c + e * y * s;
                    w[[q, k]] = -e.conj() * x * s + y * c;
                }
                angles.push(theta.clamp(0.0, FRAC_PI_2));
                phases.push(phi);
            }
        }
        phases.extend((0..n).map(|j| w[[j, j]].arg().rem_euclid(TAU)));
        Self { dim: n, angles, phases }
    }

    /// Maps arbitrary coordinates into the canonical box: angles clamped to
    /// `[0, π/2]`, phases wrapped into `[0, 2π)`.
    pub fn canonicalize(&mut self) {
        self.angles.iter_mut().for_each(|a| *a = a.clamp(0.0, FRAC_PI_2));
        self.phases.iter_mut().for_each(|p| *p = p.rem_euclid(2.0 * PI));
    }
}
