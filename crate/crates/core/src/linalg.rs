//! Dense kernels: sorted SVD with a measured backward error, a real
//! eigendecomposition that refuses complex spectra, and conditioned solves.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Thin singular value decomposition `A = U diag(sigma) V^T`.
///
/// `u` is `m x r` and `v` is `n x r` with `r = min(m, n)`.
#[derive(Debug, Clone)]
pub struct SvdResult<T: Scalar = f64> {
    pub u: DMatrix<T>,
    /// Nonincreasing.
    pub sigma: DVector<T>,
    pub v: DMatrix<T>,
    /// Upper bound on `||A - U diag(sigma) V^T||_2`, measured after the fact.
    pub backward_error: T,
}

impl<T: Scalar> SvdResult<T> {
    pub fn reconstruct(&self) -> DMatrix<T> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    /// Best rank-`r` approximation (Eckart-Young).
    pub fn truncate(&self, r: usize) -> DMatrix<T> {
        let r = r.min(self.sigma.len());
        let mut us = self.u.columns(0, r).into_owned();
        for j in 0..r {
            us.column_mut(j).scale_mut(self.sigma[j]);
        }
        us * self.v.columns(0, r).transpose()
    }
}

/// Real eigendecomposition with eigenvalues sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct EigResult<T: Scalar = f64> {
    pub eigenvalues: DVector<T>,
    /// Unit 2-norm columns, paired with `eigenvalues`.
    pub eigenvectors: DMatrix<T>,
    /// Largest imaginary part that was discarded.
    pub max_imag_residual: T,
    /// Largest `||A v - lambda v||_2` over the returned pairs.
    pub max_defect: T,
}

fn check_finite<T: Scalar>(a: &DMatrix<T>) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// `(U, sigma, V)` with `sigma` descending; factors only when requested.
type SortedSvd<T> = (Option<DMatrix<T>>, DVector<T>, Option<DMatrix<T>>);

fn sorted_svd<T: Scalar>(a: &DMatrix<T>, want_u: bool, want_v: bool) -> Result<SortedSvd<T>> {
    check_finite(a)?;
    let (m, n) = a.shape();
    let r = m.min(n);
    if r == 0 {
        return Ok((
            want_u.then(|| DMatrix::zeros(m, 0)),
            DVector::zeros(0),
            want_v.then(|| DMatrix::zeros(n, 0)),
        ));
    }
    let dec = nalgebra::SVD::try_new(a.clone(), want_u, want_v, T::EPSILON, 0).ok_or(Error::NoConvergence("svd"))?;
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| {
        dec.singular_values[j]
            .partial_cmp(&dec.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sigma = DVector::from_iterator(r, order.iter().map(|&i| dec.singular_values[i]));
    let u = dec.u.map(|u| DMatrix::from_fn(m, r, |row, col| u[(row, order[col])]));
    let v = dec
        .v_t
        .map(|vt| DMatrix::from_fn(n, r, |row, col| vt[(order[col], row)]));
    Ok((u, sigma, v))
}

/// Thin SVD with singular values sorted nonincreasing.
pub fn svd<T: Scalar>(a: &DMatrix<T>) -> Result<SvdResult<T>> {
    let (u, sigma, v) = sorted_svd(a, true, true)?;
    let mut res = SvdResult {
        u: u.expect("requested"),
        sigma,
        v: v.expect("requested"),
        backward_error: T::zero(),
    };
    let resid = (a - res.reconstruct()).norm();
    let (m, n) = a.shape();
    // rounding in the residual evaluation itself
    let slack = T::EPSILON * a.norm() * T::from_count(m + n);
    res.backward_error = resid + slack;
    Ok(res)
}

/// Singular values only, sorted nonincreasing.
pub fn singular_values<T: Scalar>(a: &DMatrix<T>) -> Result<DVector<T>> {
    Ok(sorted_svd(a, false, false)?.1)
}

/// Right singular vectors (as columns, sorted with the singular values).
pub fn right_singular_vectors<T: Scalar>(a: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    let (_, s, v) = sorted_svd(a, false, true)?;
    Ok((s, v.expect("requested")))
}

/// The `k`-th largest singular value, `k` counted from 1.
pub fn sigma_k<T: Scalar>(a: &DMatrix<T>, k: usize) -> Result<T> {
    let r = a.nrows().min(a.ncols());
    if k == 0 || k > r {
        return Err(Error::IndexOutOfRange(format!(
            "sigma_{k} requested for a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(singular_values(a)?[k - 1])
}

pub fn spectral_norm<T: Scalar>(a: &DMatrix<T>) -> Result<T> {
    if a.is_empty() {
        return Ok(T::zero());
    }
    Ok(singular_values(a)?[0])
}

/// Maximum absolute row sum.
pub fn inf_norm<T: Scalar>(a: &DMatrix<T>) -> T {
    a.row_iter()
        .map(|row| row.iter().fold(T::zero(), |acc, x| acc + x.abs()))
        .fold(T::zero(), |acc, x| if x > acc { x } else { acc })
}

/// Default imaginary-part tolerance for [`eig_real`]: `1e-6 * ||A||_2`.
pub fn default_imag_tol<T: Scalar>(a: &DMatrix<T>) -> Result<T> {
    Ok(T::tol(1e-6) * spectral_norm(a)?)
}

fn fix_sign<T: Scalar>(mut v: DVector<T>) -> DVector<T> {
    let norm = v.norm();
    if norm > T::zero() {
        v /= norm;
    }
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < T::zero() {
        v = -v;
    }
    v
}

/// Eigendecomposition of a square matrix whose spectrum is expected to be real.
///
/// Fails with [`Error::ComplexSpectrum`] when some eigenvalue has an imaginary
/// part above `imag_tol` (default: [`default_imag_tol`]). Eigenvectors are the
/// null vectors of `A - lambda I` taken from an SVD, normalized to unit length
/// with their largest-magnitude entry positive.
pub fn eig_real<T: Scalar>(a: &DMatrix<T>, imag_tol: Option<T>) -> Result<EigResult<T>> {
    check_finite(a)?;
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let k = a.nrows();
    let imag_tol = match imag_tol {
        Some(t) => t,
        None => default_imag_tol(a)?,
    };
    if k == 0 {
        return Ok(EigResult {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
            max_imag_residual: T::zero(),
            max_defect: T::zero(),
        });
    }
    let schur = Schur::try_new(a.clone(), T::EPSILON, 0).ok_or(Error::NoConvergence("schur"))?;
    let spectrum = schur.complex_eigenvalues();
    let mut max_imag = T::zero();
    let mut values: Vec<T> = Vec::with_capacity(k);
    for z in spectrum.iter() {
        if z.im.abs() > max_imag {
            max_imag = z.im.abs();
        }
        values.push(z.re);
    }
    if max_imag > imag_tol {
        return Err(Error::ComplexSpectrum {
            max_imag: max_imag.to_f64_lossy(),
            tol: imag_tol.to_f64_lossy(),
        });
    }
    values.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));

    let identity = DMatrix::<T>::identity(k, k);
    let mut vectors = DMatrix::zeros(k, k);
    let mut max_defect = T::zero();
    for (j, &lambda) in values.iter().enumerate() {
        let shifted = a - &identity * lambda;
        let (_, v) = right_singular_vectors(&shifted)?;
        let vec = fix_sign(v.column(k - 1).into_owned());
        let defect = (&shifted * &vec).norm();
        if defect > max_defect {
            max_defect = defect;
        }
        vectors.set_column(j, &vec);
    }
    Ok(EigResult {
        eigenvalues: DVector::from_vec(values),
        eigenvectors: vectors,
        max_imag_residual: max_imag,
        max_defect,
    })
}

fn check_conditioning<T: Scalar>(a: &DMatrix<T>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "linear solve with a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let s = singular_values(a)?;
    if s.is_empty() {
        return Ok(());
    }
    let ratio = if s[0] > T::zero() {
        s[s.len() - 1] / s[0]
    } else {
        T::zero()
    };
    if ratio <= T::tol(1e-13) {
        return Err(Error::NearSingular {
            ratio: ratio.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Solves `A X = B` for square, numerically nonsingular `A`.
///
/// LU with partial pivoting followed by one step of iterative refinement.
pub fn solve_matrix<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_finite(a)?;
    check_finite(b)?;
    check_conditioning(a)?;
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {} rows, matrix has {}",
            b.nrows(),
            a.nrows()
        )));
    }
    let lu = a.clone().lu();
    let mut x = lu.solve(b).ok_or(Error::NearSingular { ratio: 0.0 })?;
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(x)
}

/// Solves `A x = b`; see [`solve_matrix`].
pub fn solve<T: Scalar>(a: &DMatrix<T>, b: &DVector<T>) -> Result<DVector<T>> {
    let bm = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = solve_matrix(a, &bm)?;
    Ok(DVector::from_column_slice(x.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn svd_of_simple_matrices() {
        let s = svd(&DMatrix::<f64>::identity(2, 2)).unwrap();
        assert_eq!(s.sigma.as_slice(), &[1.0, 1.0]);
        let s = svd(&DMatrix::<f64>::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])).unwrap();
        assert!((s.sigma[0] - 3.0).abs() < 1e-14 && (s.sigma[1] - 2.0).abs() < 1e-14);
        let s = svd(&DMatrix::<f64>::from_element(2, 2, 1.0)).unwrap();
        // rank one: sigma_1 = ||A||_F
        assert!((s.sigma[0] - 2.0).abs() < 1e-14);
        assert!(s.sigma[1].abs() < 1e-14);
    }

    #[test]
    fn svd_contract_on_random_rectangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(m, n) in &[(1, 1), (3, 5), (5, 3), (8, 8), (16, 4)] {
            let a = random_matrix(&mut rng, m, n);
            let s = svd(&a).unwrap();
            let r = m.min(n);
            for i in 1..r {
                assert!(s.sigma[i - 1] >= s.sigma[i]);
            }
            let utu = s.u.transpose() * &s.u;
            let vtv = s.v.transpose() * &s.v;
            assert!((utu - DMatrix::identity(r, r)).amax() < 1e-10);
            assert!((vtv - DMatrix::identity(r, r)).amax() < 1e-10);
            let resid = spectral_norm(&(&a - s.reconstruct())).unwrap();
            assert!(resid <= s.backward_error);
            assert!(s.backward_error <= 1e-10 * spectral_norm(&a).unwrap());
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert_eq!(svd(&a).unwrap_err(), Error::NonFinite);
    }

    #[test]
    fn sigma_k_examples() {
        let d = DMatrix::<f64>::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0]);
        assert!((sigma_k(&d, 2).unwrap() - 2.0).abs() < 1e-14);
        assert!(sigma_k(&DMatrix::<f64>::from_element(2, 2, 1.0), 2).unwrap().abs() < 1e-14);
        // Hadamard extension of m = [[0, 1]]: rows (1, 1) and (0, 1).
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let expected = ((3.0 - 5f64.sqrt()) / 2.0).sqrt();
        assert!((sigma_k(&h, 2).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.6180).abs() < 1e-4);
        assert!(matches!(sigma_k(&d, 3), Err(Error::IndexOutOfRange(_))));
        assert!(matches!(sigma_k(&d, 0), Err(Error::IndexOutOfRange(_))));
    }

    #[test]
    fn eig_real_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.8]);
        let e = eig_real(&a, None).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[0.8, 0.2]);
        assert!((e.eigenvectors.column(0) - DVector::from_vec(vec![0.0, 1.0])).amax() < 1e-14);
        assert!((e.eigenvectors.column(1) - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-14);
    }

    #[test]
    fn eig_real_rejects_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(eig_real(&a, Some(0.5)), Err(Error::ComplexSpectrum { .. })));
        assert!(matches!(eig_real(&a, None), Err(Error::ComplexSpectrum { .. })));
    }

    #[test]
    fn eig_real_similarity_invariance() {
        let p = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let p_inv = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]);
        let a = &p * DMatrix::from_diagonal(&DVector::from_vec(vec![0.9, 0.1])) * p_inv;
        let e = eig_real(&a, None).unwrap();
        assert!((e.eigenvalues[0] - 0.9).abs() < 1e-12);
        assert!((e.eigenvalues[1] - 0.1).abs() < 1e-12);
        assert!(e.max_defect <= 1e-8 * spectral_norm(&a).unwrap());
        for j in 0..2 {
            assert!((e.eigenvectors.column(j).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_examples() {
        let b = DVector::from_vec(vec![0.3, -0.7]);
        let x = solve(&DMatrix::identity(2, 2), &b).unwrap();
        assert_eq!(x, b);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = solve(&a, &DVector::from_vec(vec![2.0, 4.0])).unwrap();
        assert!((x - DVector::from_vec(vec![1.0, 1.0])).amax() < 1e-15);
    }

    #[test]
    fn solve_recovers_planted_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 4, 4) + DMatrix::identity(4, 4) * 3.0;
            let x = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let b = &a * &x;
            let got = solve(&a, &b).unwrap();
            assert!((&got - &x).norm() <= 1e-10 * x.norm());
            let resid = (&a * &got - &b).norm();
            assert!(resid <= 1e-10 * (spectral_norm(&a).unwrap() * got.norm() + b.norm()));
        }
    }

    #[test]
    fn solve_flags_singular_systems() {
        let a = DMatrix::from_element(2, 2, 1.0);
        let err = solve(&a, &DVector::from_vec(vec![1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::NearSingular { .. }));
    }

    #[test]
    fn single_precision_svd() {
        let a = DMatrix::<f32>::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0]);
        let s = svd(&a).unwrap();
        assert!((s.sigma[1] - 2.0).abs() < 1e-6);
    }
}
