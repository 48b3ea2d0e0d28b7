//! Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// Solves `A x = rhs` in place, where `A` has sub-diagonal `lower`
/// (`lower[0]` unused), diagonal `diag` and super-diagonal `upper`
/// (`upper[n-1]` unused). `scratch` must have the length of `rhs`.
///
/// No pivoting: intended for diagonally dominant M-matrices.
pub fn solve_in_place(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let n = rhs.len();
    debug_assert!(lower.len() == n && diag.len() == n && upper.len() == n);
    debug_assert!(scratch.len() >= n);
    if n == 0 {
        return Ok(());
    }
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::ZeroPivot { row: 0 });
    }
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::ZeroPivot { row: i });
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn apply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += upper[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    #[test]
    fn solves_small_system() {
        // [2 -1 0; -1 2 -1; 0 -1 2] x = [1 0 1] -> x = [1 1 1]
        let lower = [0.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, 0.0];
        let mut rhs = [1.0, 0.0, 1.0];
        let mut scratch = [0.0; 3];
        solve_in_place(&lower, &diag, &upper, &mut rhs, &mut scratch).unwrap();
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut rhs = [1.0, 1.0];
        let mut scratch = [0.0; 2];
        let err = solve_in_place(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &mut rhs, &mut scratch);
        assert_eq!(err, Err(Error::ZeroPivot { row: 0 }));
    }

    proptest! {
        #[test]
        fn residual_small_for_m_matrices(
            off in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0), 2..60),
            extra in proptest::collection::vec(0.0f64..5.0, 60),
            b in proptest::collection::vec(-1.0f64..1.0, 60),
        ) {
            let n = off.len();
            let lower: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { -off[i].0 }).collect();
            let upper: Vec<f64> = (0..n).map(|i| if i + 1 == n { 0.0 } else { -off[i].1 }).collect();
            let diag: Vec<f64> = (0..n).map(|i| 1.0 + extra[i] + lower[i].abs() + upper[i].abs()).collect();
            let mut x = b[..n].to_vec();
            let mut scratch = vec![0.0; n];
            solve_in_place(&lower, &diag, &upper, &mut x, &mut scratch).unwrap();
            let r = apply(&lower, &diag, &upper, &x);
            for i in 0..n {
                prop_assert!((r[i] - b[i]).abs() < 1e-12);
            }
        }
    }
}
