//! Singular values and norms.
//!
//! Only singular values are ever needed, so the SVD backend is asked for
//! neither `U` nor `V`.

use nalgebra::linalg::SVD;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PaError, Result};

/// Relative convergence tolerance handed to the SVD backend.
pub const SVD_TOLERANCE: f64 = 1e-10;

/// Singular values in nonincreasing order, all nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
    pub n: usize,
    pub p: usize,
}

impl SingularSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// k-th largest singular value, 0-based.
    pub fn get(&self, k: usize) -> Option<f64> {
        self.values.get(k).copied()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|s| s * s).sum()
    }
}

pub fn check_finite(x: &DMatrix<f64>) -> Result<()> {
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            if !x[(i, j)].is_finite() {
                return Err(PaError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Top `min(cap, n, p)` singular values of `x`, descending.
pub fn singular_values(x: &DMatrix<f64>, cap: Option<usize>) -> Result<SingularSpectrum> {
    check_finite(x)?;
    let (n, p) = x.shape();
    let full = n.min(p);
    let keep = cap.map_or(full, |c| c.min(full));
    if full == 0 {
        return Ok(SingularSpectrum {
            values: Vec::new(),
            n,
            p,
        });
    }
    // The backend works on the tall orientation; singular values are shared
    // with the transpose.
    let work = if n >= p { x.clone() } else { x.transpose() };
    let svd = SVD::try_new(work, false, false, SVD_TOLERANCE, 0).ok_or(PaError::SvdFailed)?;
    let mut values: Vec<f64> = svd.singular_values.iter().map(|s| s.max(0.0)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values.truncate(keep);
    Ok(SingularSpectrum { values, n, p })
}

/// Largest singular value; 0 for an empty matrix.
pub fn operator_norm(x: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(x, Some(1))?.get(0).unwrap_or(0.0))
}

/// Sum of squared entries.
///
/// Squares within each column are summed in sorted order, so the result
/// depends only on the multiset of entries in each column and is bit-identical
/// for any per-column permutation of `x`.
pub fn frobenius_sq(x: &DMatrix<f64>) -> f64 {
    let mut buf = Vec::with_capacity(x.nrows());
    let mut total = 0.0;
    for col in x.column_iter() {
        buf.clear();
        buf.extend(col.iter().map(|v| v * v));
        buf.sort_by(f64::total_cmp);
        total += buf.iter().sum::<f64>();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permute::PermutationArray;
    use crate::seed::stream;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    /// One-sided (Hestenes) Jacobi SVD: orthogonalizes column pairs of a copy
    /// of `x` until all pairs are orthogonal; the column norms are then the
    /// singular values. Independent of the Golub-Kahan backend.
    fn jacobi_singular_values(x: &DMatrix<f64>) -> Vec<f64> {
        let mut a = if x.nrows() >= x.ncols() { x.clone() } else { x.transpose() };
        let cols = a.ncols();
        for _sweep in 0..100 {
            let mut rotated = false;
            for j in 0..cols {
                for k in (j + 1)..cols {
                    let alpha: f64 = a.column(j).norm_squared();
                    let beta: f64 = a.column(k).norm_squared();
                    let gamma: f64 = a.column(j).dot(&a.column(k));
                    if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..a.nrows() {
                        let aj = a[(i, j)];
                        let ak = a[(i, k)];
                        a[(i, j)] = c * aj - s * ak;
                        a[(i, k)] = s * aj + c * ak;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn identity_and_diagonal() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_close(&singular_values(&id, None).unwrap().values, &[1.0, 1.0, 1.0], 1e-12);
        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        assert_close(&singular_values(&d, None).unwrap().values, &[3.0, 1.0], 1e-12);
    }

    #[test]
    fn rank_one_outer_product() {
        // |u| = 2, |v| = 3.
        let u = nalgebra::DVector::from_vec(vec![2.0, 0.0, 0.0, 0.0]);
        let v = nalgebra::DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let x = &u * v.transpose();
        let s = singular_values(&x, None).unwrap();
        assert_close(&s.values, &[6.0, 0.0, 0.0], 1e-12);
    }

    #[test]
    fn operator_norm_small_cases() {
        assert_eq!(operator_norm(&DMatrix::zeros(3, 2)).unwrap(), 0.0);
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!((operator_norm(&x).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cap_and_wide_matrices() {
        let x = DMatrix::from_fn(3, 7, |i, j| ((i + 2 * j) % 5) as f64 - 2.0);
        let full = singular_values(&x, None).unwrap();
        assert_eq!(full.len(), 3);
        let top = singular_values(&x, Some(2)).unwrap();
        assert_eq!(top.values, full.values[..2]);
        assert_eq!(singular_values(&x, Some(10)).unwrap().len(), 3);
    }

    #[test]
    fn rejects_non_finite() {
        let mut x = DMatrix::zeros(2, 2);
        x[(1, 0)] = f64::NAN;
        assert!(matches!(
            singular_values(&x, None),
            Err(PaError::NonFinite { row: 1, col: 0 })
        ));
        x[(1, 0)] = f64::INFINITY;
        assert!(operator_norm(&x).is_err());
    }

    /// Bulk edge of an n^{-1/2}-scaled square Gaussian matrix is 2.
    #[test]
    fn gaussian_bulk_edge() {
        let n = 2000;
        let mut rng = stream(11, &[]);
        let scale = 1.0 / (n as f64).sqrt();
        let x = DMatrix::from_fn(n, n, |_, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * scale
        });
        let norm = operator_norm(&x).unwrap();
        assert!((norm - 2.0).abs() <= 0.05, "norm = {norm}");
    }

    /// Every 2x2 and 2x3 integer matrix with entries in [-3, 3].
    #[test]
    fn exhaustive_small_integer_matrices() {
        for (rows, cols) in [(2usize, 2usize), (2, 3)] {
            let cells = rows * cols;
            let total = 7usize.pow(cells as u32);
            for code in 0..total {
                let mut c = code;
                let x = DMatrix::from_fn(rows, cols, |_, _| {
                    let v = (c % 7) as f64 - 3.0;
                    c /= 7;
                    v
                });
                let got = singular_values(&x, None).unwrap().values;
                assert_close(&got, &jacobi_singular_values(&x), 1e-8);
            }
        }
    }

    fn int_matrix() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..=4, 1usize..=4).prop_flat_map(|(n, p)| {
            prop::collection::vec(-3i32..=3, n * p)
                .prop_map(move |v| DMatrix::from_iterator(n, p, v.into_iter().map(f64::from)))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn matches_jacobi_oracle(x in int_matrix()) {
            let got = singular_values(&x, None).unwrap();
            let want = jacobi_singular_values(&x);
            for (a, b) in got.values.iter().zip(&want) {
                prop_assert!((a - b).abs() <= 1e-8, "{:?} vs {:?}", got.values, want);
            }
            prop_assert!(got.values.windows(2).all(|w| w[0] >= w[1]));
            let fro = frobenius_sq(&x);
            prop_assert!((got.sum_of_squares() - fro).abs() <= 1e-8 * fro.max(1.0));
        }

        #[test]
        fn permutation_keeps_energy(x in int_matrix(), seed in any::<u64>()) {
            let pi = PermutationArray::sample_uniform(x.nrows(), x.ncols(), &mut stream(seed, &[])).unwrap();
            let y = pi.apply(&x).unwrap();
            prop_assert_eq!(frobenius_sq(&x).to_bits(), frobenius_sq(&y).to_bits());
            let a = singular_values(&x, None).unwrap().sum_of_squares();
            let b = singular_values(&y, None).unwrap().sum_of_squares();
            prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0));
        }
    }
}
