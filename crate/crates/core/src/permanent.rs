//! Matrix permanents and multiphoton transition amplitudes.
//!
//! The amplitude for single photons in inputs `Φ_s` to leave with occupation
//! `n` is a sum over all orderings of `Φ_s` of products of `Λ` entries, which
//! is the permanent of the `Σ_s × Σ_s` matrix taking the columns `Φ_s` of `Λ`
//! and repeating output row `k` exactly `n_k` times.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::ensemble::OccupationVector;
use crate::unitary::Unitary;
use crate::{Error, Result};

/// Largest matrix accepted by [`permanent`].
pub const RYSER_LIMIT: usize = 20;
/// Largest matrix accepted by [`naive_permanent`].
pub const NAIVE_LIMIT: usize = 9;

fn square_size(matrix: &ArrayView2<Complex64>) -> Result<usize> {
    let (r, c) = matrix.dim();
    if r != c {
        return Err(Error::Dimension(format!("permanent of a {r}x{c} matrix")));
    }
    Ok(r)
}

/// Permanent by Ryser's inclusion–exclusion formula, visiting column subsets
/// in Gray-code order so each step updates the row sums with one column.
/// `O(2^m · m)`; the empty matrix has permanent 1.
pub fn permanent(matrix: ArrayView2<Complex64>) -> Result<Complex64> {
    let m = square_size(&matrix)?;
    if m > RYSER_LIMIT {
        return Err(Error::SizeExceeded {
            size: m,
            limit: RYSER_LIMIT,
        });
    }
    Ok(ryser(&matrix).0)
}

/// Ryser value together with `Σ |term|`, the scale of its rounding error.
fn ryser(a: &ArrayView2<Complex64>) -> (Complex64, f64) {
    let m = a.nrows();
    match m {
        0 => return (Complex64::new(1.0, 0.0), 1.0),
        1 => return (a[[0, 0]], a[[0, 0]].norm()),
        2 => {
            let (x, y) = (a[[0, 0]] * a[[1, 1]], a[[0, 1]] * a[[1, 0]]);
            return (x + y, x.norm() + y.norm());
        }
        _ => {}
    }
    let mut row_sums = vec![Complex64::new(0.0, 0.0); m];
    let mut total = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    for k in 1u64..1 << m {
        let col = k.trailing_zeros() as usize;
        let gray = k ^ (k >> 1);
        if gray >> col & 1 == 1 {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += a[[i, col]];
            }
        } else {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= a[[i, col]];
            }
        }
        let prod: Complex64 = row_sums.iter().product();
        magnitude += prod.norm();
        if (m as u32 - gray.count_ones()).is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    (total, magnitude)
}

/// Permanent by expansion along rows, memoized over the set of used columns.
///
/// Also `O(2^m · m)` but subtraction-free, so its rounding error is bounded by
/// a small multiple of `m · ε_mach · per(|A|)` rather than by the size of
/// Ryser's alternating terms. Returns the value and `per(|A|)`.
fn minor_expansion(a: &ArrayView2<Complex64>) -> (Complex64, f64) {
    let m = a.nrows();
    let full = (1usize << m) - 1;
    let mut value = vec![Complex64::new(0.0, 0.0); full + 1];
    let mut scale = vec![0.0f64; full + 1];
    value[0] = Complex64::new(1.0, 0.0);
    scale[0] = 1.0;
    for mask in 0..full {
        if scale[mask] == 0.0 {
            continue;
        }
        let row = mask.count_ones() as usize;
        let (v, s) = (value[mask], scale[mask]);
        for col in 0..m {
            if mask >> col & 1 == 0 {
                let next = mask | 1 << col;
                value[next] += v * a[[row, col]];
                scale[next] += s * a[[row, col]].norm();
            }
        }
    }
    (value[full], scale[full])
}

/// Relative accuracy demanded of a Ryser result before it is trusted.
const RYSER_TRUST: f64 = 1e-10;

/// Permanent with guarded accuracy, used for transition amplitudes.
///
/// Ryser is tried first. When its error scale `(m + 1)·ε_mach·Σ|term|` is not
/// small against the result (near-cancelling or structurally tiny
/// amplitudes), the value is recomputed by [`minor_expansion`], and anything
/// below that kernel's own error bound is returned as exactly zero.
pub fn stable_permanent(matrix: ArrayView2<Complex64>) -> Result<Complex64> {
    let m = square_size(&matrix)?;
    if m > RYSER_LIMIT {
        return Err(Error::SizeExceeded {
            size: m,
            limit: RYSER_LIMIT,
        });
    }
    let (value, magnitude) = ryser(&matrix);
    let ryser_error = (m + 1) as f64 * f64::EPSILON * magnitude;
    if ryser_error <= RYSER_TRUST * value.norm() {
        return Ok(value);
    }
    let (value, abs_permanent) = minor_expansion(&matrix);
    let floor = 4.0 * (m + 1) as f64 * f64::EPSILON * abs_permanent;
    Ok(if value.norm() <= floor {
        Complex64::new(0.0, 0.0)
    } else {
        value
    })
}

/// Permanent as the literal sum over all `m!` permutations.
///
/// Shares nothing with [`permanent`] and exists to check it.
pub fn naive_permanent(matrix: ArrayView2<Complex64>) -> Result<Complex64> {
    let m = square_size(&matrix)?;
    if m > NAIVE_LIMIT {
        return Err(Error::SizeExceeded {
            size: m,
            limit: NAIVE_LIMIT,
        });
    }
    let mut used = vec![false; m];
    Ok(permutation_sum(&matrix, 0, &mut used, Complex64::new(1.0, 0.0)))
}

fn permutation_sum(a: &ArrayView2<Complex64>, row: usize, used: &mut [bool], acc: Complex64) -> Complex64 {
    if row == a.nrows() {
        return acc;
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for col in 0..a.ncols() {
        if !used[col] {
            used[col] = true;
            sum += permutation_sum(a, row + 1, used, acc * a[[row, col]]);
            used[col] = false;
        }
    }
    sum
}

/// Builds the transition submatrix: columns `Φ_s` of `Λ`, output row `k`
/// repeated `output[k]` times.
pub fn transition_matrix(unitary: &Unitary, s: &OccupationVector, output: &[usize]) -> Result<Array2<Complex64>> {
    let n = unitary.dim();
    if s.len() != n || output.len() != n {
        return Err(Error::Dimension(format!(
            "unitary has {n} modes, occupation {} and output {}",
            s.len(),
            output.len()
        )));
    }
    let photons_in = s.photons();
    let photons_out: usize = output.iter().sum();
    if photons_in != photons_out {
        return Err(Error::ConservationViolation {
            input: photons_in,
            output: photons_out,
        });
    }
    let cols = s.support();
    let rows: Vec<usize> = output
        .iter()
        .enumerate()
        .flat_map(|(k, &count)| std::iter::repeat_n(k, count))
        .collect();
    Ok(Array2::from_shape_fn((rows.len(), cols.len()), |(r, c)| {
        unitary.get(rows[r], cols[c])
    }))
}

/// Amplitude sum `S_{s,n}` for inputs `s` and full output occupation `output`.
pub fn compute_s(unitary: &Unitary, s: &OccupationVector, output: &[usize]) -> Result<Complex64> {
    let sub = transition_matrix(unitary, s, output)?;
    stable_permanent(sub.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_matrix(m: usize, rng: &mut ChaCha8Rng) -> Array2<Complex64> {
        Array2::from_shape_fn((m, m), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn small_fixtures() {
        let eye: Array2<Complex64> = Array2::eye(3);
        assert_abs_diff_eq!((permanent(eye.view()).unwrap() - 1.0).norm(), 0.0);
        let ones = Array2::from_elem((3, 3), c(1.0));
        assert_abs_diff_eq!((permanent(ones.view()).unwrap() - 6.0).norm(), 0.0, epsilon = 1e-12);
        let empty = Array2::<Complex64>::zeros((0, 0));
        assert_eq!(permanent(empty.view()).unwrap(), c(1.0));
        assert_eq!(naive_permanent(empty.view()).unwrap(), c(1.0));
    }

    #[test]
    fn naive_fixtures() {
        let m = array![[c(1.0), c(2.0)], [c(3.0), c(4.0)]];
        assert_eq!(naive_permanent(m.view()).unwrap(), c(10.0));
        let z = Complex64::new(0.3, -1.2);
        assert_eq!(naive_permanent(array![[z]].view()).unwrap(), z);
        let eye: Array2<Complex64> = Array2::eye(4);
        assert_eq!(naive_permanent(eye.view()).unwrap(), c(1.0));
    }

    #[test]
    fn ryser_matches_naive_on_six_by_six() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_matrix(6, &mut rng);
        let fast = permanent(a.view()).unwrap();
        let slow = naive_permanent(a.view()).unwrap();
        assert!((fast - slow).norm() <= 1e-10);
    }

    #[test]
    fn stable_kernel_agrees_with_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for m in 0..8 {
            let a = random_matrix(m, &mut rng);
            let stable = stable_permanent(a.view()).unwrap();
            let slow = naive_permanent(a.view()).unwrap();
            assert!((stable - slow).norm() <= 1e-10);
            let (expanded, _) = minor_expansion(&a.view());
            assert!((expanded - slow).norm() <= 1e-10);
        }
    }

    #[test]
    fn stable_kernel_resolves_tiny_permanents() {
        // Strongly diagonal-dominant matrix with a permanent of order δ^4:
        // Ryser's terms are O(1), so it cannot resolve the value.
        let d = 1e-6;
        let a = Array2::from_shape_fn((4, 4), |(i, j)| {
            if j == 0 {
                c(1.0)
            } else if i == j {
                c(d)
            } else {
                c(d * d)
            }
        });
        let exact = naive_permanent(a.view()).unwrap();
        let stable = stable_permanent(a.view()).unwrap();
        assert!((stable - exact).norm() <= 1e-12 * exact.norm(), "{stable} vs {exact}");
    }

    #[test]
    fn ryser_is_row_multilinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in 1..8 {
            let a = random_matrix(m, &mut rng);
            let lambda = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let row = rng.random_range(0..m);
            let mut b = a.clone();
            b.row_mut(row).mapv_inplace(|z| z * lambda);
            let lhs = permanent(b.view()).unwrap();
            let rhs = permanent(a.view()).unwrap() * lambda;
            assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn size_limits() {
        let big = Array2::<Complex64>::zeros((21, 21));
        assert!(matches!(
            permanent(big.view()),
            Err(Error::SizeExceeded { size: 21, limit: 20 })
        ));
        let ten = Array2::<Complex64>::zeros((10, 10));
        assert!(matches!(
            naive_permanent(ten.view()),
            Err(Error::SizeExceeded { size: 10, limit: 9 })
        ));
        let rect = Array2::<Complex64>::zeros((2, 3));
        assert!(matches!(permanent(rect.view()), Err(Error::Dimension(_))));
    }

    fn splitter() -> Unitary {
        let h = 1.0 / 2f64.sqrt();
        Unitary::from_entries(array![[c(h), c(h)], [c(h), c(-h)]]).unwrap()
    }

    #[test]
    fn amplitude_fixtures() {
        let id = Unitary::identity(2).unwrap();
        let s = OccupationVector::from_bits(&[1, 0]).unwrap();
        assert_eq!(compute_s(&id, &s, &[1, 0]).unwrap(), c(1.0));

        let both = OccupationVector::from_bits(&[1, 1]).unwrap();
        let bunched = compute_s(&splitter(), &both, &[2, 0]).unwrap();
        assert_abs_diff_eq!((bunched - 1.0).norm(), 0.0, epsilon = 1e-15);
        let h = 1.0 / 2f64.sqrt();
        let sub = Array2::from_elem((2, 2), c(h));
        assert_abs_diff_eq!(
            (naive_permanent(sub.view()).unwrap() - bunched).norm(),
            0.0,
            epsilon = 1e-15
        );

        // Two-photon interference cancels the coincidence amplitude.
        let coincidence = compute_s(&splitter(), &both, &[1, 1]).unwrap();
        assert_abs_diff_eq!(coincidence.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn single_photon_amplitude_is_matrix_entry() {
        let u = crate::unitary::haar_random(4, 3).unwrap();
        for i in 0..4 {
            for k in 0..4 {
                let mut out = vec![0; 4];
                out[k] = 1;
                let s = OccupationVector::from_support(4, &[i]);
                assert_eq!(compute_s(&u, &s, &out).unwrap(), u.get(k, i));
            }
        }
    }

    #[test]
    fn conservation_is_enforced() {
        let u = splitter();
        let s = OccupationVector::from_bits(&[1, 0]).unwrap();
        assert!(matches!(
            compute_s(&u, &s, &[1, 1]),
            Err(Error::ConservationViolation { input: 1, output: 2 })
        ));
    }
}
