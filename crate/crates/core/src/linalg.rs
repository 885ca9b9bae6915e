//! Small dense symmetric eigen-solver (cyclic Jacobi) and leading principal
//! minors.

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Result};
use crate::tolerances::SYMMETRY_RTOL;

#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: DVector<f64>,
    /// Unit eigenvectors, column `k` pairs with `values[k]`.
    pub vectors: DMatrix<f64>,
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return domain(format!("matrix is {}x{}, expected square", a.nrows(), a.ncols()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return domain("matrix has non-finite entries");
    }
    let scale = a.amax().max(1.0);
    let n = a.nrows();
    for i in 0..n {
        for j in i + 1..n {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                return domain(format!("matrix is not symmetric at ({i},{j})"));
            }
        }
    }
    Ok(())
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Intended for the small matrices met here (Laplacians of up to a few
/// dozen agents); cost is O(n³) per sweep.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<SymEigen> {
    check_symmetric(a)?;
    let n = a.nrows();
    let mut m = a.clone();
    // Symmetrise exactly so rounding in the input cannot bias the sweep.
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let total: f64 = m.iter().map(|x| x * x).sum();

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off <= f64::EPSILON * f64::EPSILON * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    Ok(SymEigen { values, vectors })
}

/// Leading principal minors `det(A[..k, ..k])` for k = 1..=n.
///
/// Gaussian elimination without pivoting yields every leading minor as a
/// running product of pivots. If a pivot vanishes the remaining minors are
/// computed directly with a pivoted LU.
pub fn leading_principal_minors(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !a.is_square() {
        return domain("leading minors need a square matrix");
    }
    let n = a.nrows();
    let mut u = a.clone();
    let mut minors = Vec::with_capacity(n);
    let mut det = 1.0;
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let pivot = u[(k, k)];
        if pivot.abs() <= 1e-13 * scale {
            for m in k + 1..=n {
                minors.push(a.view((0, 0), (m, m)).into_owned().lu().determinant());
            }
            return Ok(minors);
        }
        det *= pivot;
        minors.push(det);
        for i in k + 1..n {
            let f = u[(i, k)] / pivot;
            if f != 0.0 {
                for j in k..n {
                    u[(i, j)] -= f * u[(k, j)];
                }
            }
        }
    }
    Ok(minors)
}

/// Sylvester's criterion: returns the verdict and the minors it was based on.
pub fn is_positive_definite_minors(a: &DMatrix<f64>) -> Result<(bool, Vec<f64>)> {
    check_symmetric(a)?;
    let minors = leading_principal_minors(a)?;
    let pd = minors.iter().all(|&m| m > 0.0);
    Ok((pd, minors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        m.qr().q()
    }

    #[test]
    fn diagonal_input_is_sorted() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = symmetric_eigen(&a).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn asymmetric_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(symmetric_eigen(&a).is_err());
        assert!(is_positive_definite_minors(&a).is_err());
    }

    #[test]
    fn reconstruction_on_random_spectra() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=8 {
            for _ in 0..20 {
                let q = random_orthogonal(n, &mut rng);
                let mut lam: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
                let a = &q * DMatrix::from_diagonal(&DVector::from_vec(lam.clone())) * q.transpose();
                let a = (&a + a.transpose()) * 0.5;
                let e = symmetric_eigen(&a).unwrap();
                lam.sort_by(f64::total_cmp);
                for (got, want) in e.values.iter().zip(&lam) {
                    assert!((got - want).abs() < 1e-12, "n={n}");
                }
                let rec = &e.vectors * DMatrix::from_diagonal(&e.values) * e.vectors.transpose();
                assert!((rec - &a).amax() < 1e-12);
                let orth = e.vectors.transpose() * &e.vectors;
                assert!((orth - DMatrix::identity(n, n)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn minors_of_known_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let m = leading_principal_minors(&a).unwrap();
        assert!((m[0] - 2.0).abs() < 1e-14);
        assert!((m[1] - 3.0).abs() < 1e-14);
        assert!((m[2] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn minors_survive_a_zero_pivot() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        let m = leading_principal_minors(&a).unwrap();
        assert_eq!(m[0], 0.0);
        assert!((m[1] + 1.0).abs() < 1e-14);
        assert!((m[2] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn minors_agree_with_eigenvalue_verdict() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pd_seen = 0;
        for _ in 0..1000 {
            let n = rng.random_range(1..=8);
            let q = random_orthogonal(n, &mut rng);
            let pd = rng.random_bool(0.5);
            let lam: Vec<f64> = (0..n)
                .map(|_| {
                    let mag = rng.random_range(0.1..3.0);
                    if pd || rng.random_bool(0.7) {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect();
            let a = &q * DMatrix::from_diagonal(&DVector::from_vec(lam)) * q.transpose();
            let a = (&a + a.transpose()) * 0.5;
            let (verdict, _) = is_positive_definite_minors(&a).unwrap();
            let e = symmetric_eigen(&a).unwrap();
            assert_eq!(verdict, e.values[0] > 0.0);
            pd_seen += verdict as usize;
        }
        assert!(pd_seen > 300 && pd_seen < 900);
    }

    proptest! {
        #[test]
        fn eigenvalues_sum_to_trace(vals in proptest::collection::vec(-10.0f64..10.0, 36)) {
            let n = 6;
            let mut a = DMatrix::from_vec(n, n, vals);
            a = (&a + a.transpose()) * 0.5;
            let e = symmetric_eigen(&a).unwrap();
            prop_assert!((e.values.sum() - a.trace()).abs() < 1e-10);
            for k in 1..n {
                prop_assert!(e.values[k - 1] <= e.values[k]);
            }
        }
    }
}
