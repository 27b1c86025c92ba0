//! Dense generalized symmetric eigensolver.
//!
//! Solves `K phi = omega^2 M phi` for small SPD pairs by reducing with the
//! Cholesky factor of `M` and running cyclic Jacobi sweeps on the resulting
//! symmetric standard problem.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative gap below which two eigenvalues are treated as a degenerate pair.
pub const DEGENERACY_TOL: f64 = 1e-9;

const JACOBI_SWEEP_LIMIT: usize = 64;

/// Generalized symmetric eigenproblem `K x = lambda M x` with `M` SPD.
///
/// Returns eigenvalues in ascending order and M-orthonormal eigenvectors as
/// matrix columns. Fails on an indefinite `M` or on a spectrum with a
/// degenerate pair.
pub fn generalized_symmetric_eigen(
    mass: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = mass.nrows();
    if stiffness.nrows() != n || !mass.is_square() || !stiffness.is_square() {
        return Err(Error::invalid(
            "mass and stiffness must be square of equal size",
        ));
    }

    let chol = nalgebra::Cholesky::new(mass.clone()).ok_or_else(|| {
        Error::DecompositionFailure("mass matrix is not positive definite".into())
    })?;
    let l = chol.l();

    // A = L^-1 K L^-T, symmetric; solve the standard problem on it.
    let mut a = stiffness.clone();
    // L X = K  => X = L^-1 K
    l.solve_lower_triangular_mut(&mut a);
    // Y L^T = X  <=>  L Y^T = X^T
    a.transpose_mut();
    l.solve_lower_triangular_mut(&mut a);
    // symmetrize away the rounding skew
    let a_t = a.transpose();
    let mut a = (a + a_t) * 0.5;

    let mut q = DMatrix::<f64>::identity(n, n);
    jacobi_eigen(&mut a, &mut q)?;

    // back-substitute: phi = L^-T q
    l.transpose().solve_upper_triangular_mut(&mut q);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = a[(src, src)];
        vectors.set_column(dst, &q.column(src));
    }

    let scale = values[n - 1].abs().max(1.0);
    for k in 1..n {
        let gap = values[k] - values[k - 1];
        if gap.abs() <= DEGENERACY_TOL * scale {
            return Err(Error::DegenerateSpectrum {
                lo: values[k - 1],
                hi: values[k],
                tol: DEGENERACY_TOL,
            });
        }
    }

    // sign convention: largest-magnitude entry of each column positive
    for k in 0..n {
        let col = vectors.column(k);
        let mut imax = 0;
        for i in 1..n {
            if col[i].abs() > col[imax].abs() {
                imax = i;
            }
        }
        if col[imax] < 0.0 {
            let negated = -vectors.column(k);
            vectors.set_column(k, &negated);
        }
    }

    Ok((values, vectors))
}

/// Cyclic Jacobi on a symmetric matrix; diagonal of `a` converges to the
/// eigenvalues, `q` accumulates the rotations.
fn jacobi_eigen(a: &mut DMatrix<f64>, q: &mut DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    if n < 2 {
        return Ok(());
    }
    for _ in 0..JACOBI_SWEEP_LIMIT {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-14 * a.norm().max(1e-300) {
            return Ok(());
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let (c, s) = jacobi_rotation(a[(p, p)], a[(r, r)], apr);
                apply_rotation(a, q, p, r, c, s);
            }
        }
    }
    Err(Error::DecompositionFailure(
        "Jacobi sweeps did not converge".into(),
    ))
}

fn jacobi_rotation(app: f64, arr: f64, apr: f64) -> (f64, f64) {
    let tau = (arr - app) / (2.0 * apr);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, t * c)
}

fn apply_rotation(a: &mut DMatrix<f64>, q: &mut DMatrix<f64>, p: usize, r: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akr = a[(k, r)];
        a[(k, p)] = c * akp - s * akr;
        a[(k, r)] = s * akp + c * akr;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let ark = a[(r, k)];
        a[(p, k)] = c * apk - s * ark;
        a[(r, k)] = s * apk + c * ark;
    }
    for k in 0..n {
        let qkp = q[(k, p)];
        let qkr = q[(k, r)];
        q[(k, p)] = c * qkp - s * qkr;
        q[(k, r)] = s * qkp + c * qkr;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_mass_diagonal_stiffness() {
        let m = DMatrix::identity(3, 3);
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 9.0]));
        let (vals, vecs) = generalized_symmetric_eigen(&m, &k).unwrap();
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[2], 9.0, epsilon = 1e-12);
        // columns must be signed-normalized unit vectors
        assert_abs_diff_eq!(vecs.column(0)[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn m_orthonormality() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let k = DMatrix::from_row_slice(2, 2, &[4.0, -1.0, -1.0, 3.0]);
        let (vals, vecs) = generalized_symmetric_eigen(&m, &k).unwrap();
        let gram = vecs.transpose() * &m * &vecs;
        assert_abs_diff_eq!(gram[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gram[(1, 1)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gram[(0, 1)], 0.0, epsilon = 1e-12);
        // residual K phi - lambda M phi
        for j in 0..2 {
            let r = &k * vecs.column(j) - &m * vecs.column(j) * vals[j];
            assert!(r.norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_indefinite_mass() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let k = DMatrix::identity(2, 2);
        assert!(matches!(
            generalized_symmetric_eigen(&m, &k),
            Err(Error::DecompositionFailure(_))
        ));
    }

    #[test]
    fn rejects_degenerate_spectrum() {
        let m = DMatrix::identity(2, 2);
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        assert!(matches!(
            generalized_symmetric_eigen(&m, &k),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }
}
