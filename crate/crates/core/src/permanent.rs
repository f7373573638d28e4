//! Matrix permanents and the transition amplitudes they give for passive linear optics.
//!
//! This is a second, independent route to the amplitudes produced by
//! [`ModeUnitary::lift_apply`](crate::lift::ModeUnitary::lift_apply) and is used to
//! cross-check it.

use num_complex::Complex64 as C64;

use crate::fock::OccupationVector;
use crate::lift::ModeUnitary;
use crate::linalg::CMatrix;

/// Permanent by Ryser's inclusion–exclusion formula, iterating subsets in Gray-code
/// order so each step updates the row sums by one column.
pub fn permanent(m: &CMatrix) -> C64 {
    let n = m.nrows();
    assert!(m.is_square(), "permanent of a non-square matrix");
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    assert!(n < usize::BITS as usize, "matrix too large for Ryser enumeration");

    let mut row_sums = vec![C64::new(0.0, 0.0); n];
    let mut total = C64::new(0.0, 0.0);
    let mut gray_prev = 0usize;
    for k in 1..(1usize << n) {
        let gray = k ^ (k >> 1);
        let changed = (gray ^ gray_prev).trailing_zeros() as usize;
        let added = gray & (1 << changed) != 0;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if added {
                *s += m[(i, changed)];
            } else {
                *s -= m[(i, changed)];
            }
        }
        gray_prev = gray;
        let prod: C64 = row_sums.iter().product();
        let sign = if gray.count_ones() as usize % 2 == n % 2 {
            1.0
        } else {
            -1.0
        };
        total += prod * sign;
    }
    total
}

/// `⟨output| U |input⟩` from the permanent of the row/column-repeated submatrix of
/// `conj(U)`. Mismatched photon numbers give zero.
pub fn amplitude_permanent(u: &ModeUnitary, input: &OccupationVector, output: &OccupationVector) -> C64 {
    if input.total() != output.total() {
        return C64::new(0.0, 0.0);
    }
    let rows: Vec<usize> = input
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| std::iter::repeat_n(i, n as usize))
        .collect();
    let cols: Vec<usize> = output
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(j, &n)| std::iter::repeat_n(j, n as usize))
        .collect();
    let sub = CMatrix::from_fn(rows.len(), cols.len(), |r, c| u.matrix()[(rows[r], cols[c])].conj());
    permanent(&sub) / (input.factorial_product() * output.factorial_product()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sum over all permutations; exponential but obviously correct.
    fn permanent_by_permutations(m: &CMatrix) -> C64 {
        fn rec(m: &CMatrix, row: usize, used: &mut Vec<bool>) -> C64 {
            if row == m.nrows() {
                return C64::new(1.0, 0.0);
            }
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..m.ncols() {
                if !used[j] {
                    used[j] = true;
                    acc += m[(row, j)] * rec(m, row + 1, used);
                    used[j] = false;
                }
            }
            acc
        }
        rec(m, 0, &mut vec![false; m.ncols()])
    }

    #[test]
    fn permanent_of_ones_is_factorial() {
        for n in 0..7 {
            let m = CMatrix::from_element(n, n, C64::new(1.0, 0.0));
            let expected: f64 = (1..=n).map(|k| k as f64).product();
            assert!((permanent(&m) - C64::new(expected, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn two_by_two() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 2.0),
                C64::new(3.0, 0.0),
                C64::new(0.0, -1.0),
                C64::new(4.0, 1.0),
            ],
        );
        let expected = m[(0, 0)] * m[(1, 1)] + m[(0, 1)] * m[(1, 0)];
        assert!((permanent(&m) - expected).norm() < 1e-12);
    }

    #[test]
    fn ryser_matches_permutation_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in 1..=6 {
            let m = CMatrix::from_fn(n, n, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            assert!((permanent(&m) - permanent_by_permutations(&m)).norm() < 1e-10);
        }
    }
}
