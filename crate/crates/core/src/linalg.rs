//! Dense complex linear algebra used throughout the pipeline.
//!
//! Vectors and matrices are plain `nalgebra` containers over [`C64`]. The
//! matrices that occur here are small (at most a few hundred rows) and dense,
//! so everything is double precision and direct.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Relative tolerance under which a matrix counts as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub fn is_finite_vec(v: &CVector) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_finite_mat(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `max |A - Aᴴ| <= tol * max |A|`, entrywise.
pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = max_abs(a);
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst <= tol * scale
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Real inner product `Re tr(Aᴴ B)`, which equals `tr(A B)` for Hermitian `A`, `B`.
pub fn trace_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// `(scale · v vᴴ + sigma2 · I)⁻¹` by the rank-one update identity
///
/// `(σ²I + s v vᴴ)⁻¹ = (I − s v vᴴ / (σ² + s‖v‖²)) / σ²`.
///
/// The result is exactly Hermitian: entry `(j, i)` is computed with the same
/// floating point operations as the conjugate of entry `(i, j)`.
pub fn sherman_morrison_inv(scale: f64, v: &CVector, sigma2: f64) -> Result<CMatrix> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::invalid(format!("noise power must be positive, got {sigma2}")));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::invalid(format!("scale must be non-negative, got {scale}")));
    }
    if !is_finite_vec(v) {
        return Err(Error::invalid("vector has non-finite entries"));
    }
    let n = v.len();
    let inv_sigma2 = 1.0 / sigma2;
    let coeff = scale / (sigma2 + scale * v.norm_squared()) * inv_sigma2;
    Ok(CMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { inv_sigma2 } else { 0.0 };
        C64::new(diag, 0.0) - v[i] * v[j].conj() * coeff
    }))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn eig_min_hermitian(a: &CMatrix) -> Result<f64> {
    check_hermitian(a)?;
    if a.nrows() == 0 {
        return Err(Error::invalid("empty matrix has no eigenvalues"));
    }
    let eig = hermitian_part(a).symmetric_eigenvalues();
    Ok(eig.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Factor `L` with `L Lᴴ = A'`, where `A'` is `A` with negative eigenvalues clipped to zero.
///
/// Eigenvalues below `-clip_tol` are rejected with [`Error::NotPsd`]. Eigenvalues within
/// rounding noise of zero (relative to the largest) are treated as exact zeros, so a
/// numerically rank-one input yields an exactly rank-one factor.
pub fn psd_sqrt(a: &CMatrix, clip_tol: f64) -> Result<CMatrix> {
    check_hermitian(a)?;
    let eig = hermitian_part(a).symmetric_eigen();
    let eig_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if eig_min < -clip_tol {
        return Err(Error::NotPsd { eig_min });
    }
    let eig_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = 16.0 * a.nrows() as f64 * f64::EPSILON * eig_max;
    let mut l = eig.eigenvectors;
    for (mut col, &lambda) in l.column_iter_mut().zip(eig.eigenvalues.iter()) {
        let root = if lambda > floor { lambda.sqrt() } else { 0.0 };
        col *= C64::new(root, 0.0);
    }
    Ok(l)
}

fn check_hermitian(a: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_finite_mat(a) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if !is_hermitian(a, HERMITIAN_TOL) {
        return Err(Error::invalid("matrix is not Hermitian"));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use rand::Rng;

    pub fn random_cvector<R: Rng>(rng: &mut R, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    pub fn random_cmatrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
        hermitian_part(&random_cmatrix(rng, n, n))
    }

    /// Gauss-Jordan inverse with partial pivoting, independent of nalgebra's LU.
    pub fn gauss_jordan_inverse(a: &CMatrix) -> CMatrix {
        let n = a.nrows();
        let mut m = a.clone();
        let mut inv = CMatrix::identity(n, n);
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| m[(i, col)].norm().total_cmp(&m[(j, col)].norm())).unwrap();
            m.swap_rows(col, pivot);
            inv.swap_rows(col, pivot);
            let p = m[(col, col)];
            for k in 0..n {
                m[(col, k)] /= p;
                inv[(col, k)] /= p;
            }
            for row in 0..n {
                if row != col {
                    let f = m[(row, col)];
                    for k in 0..n {
                        let mk = m[(col, k)];
                        let ik = inv[(col, k)];
                        m[(row, k)] -= f * mk;
                        inv[(row, k)] -= f * ik;
                    }
                }
            }
        }
        inv
    }

    /// Determinant by Gaussian elimination.
    pub fn determinant(a: &CMatrix) -> C64 {
        let n = a.nrows();
        let mut m = a.clone();
        let mut det = C64::new(1.0, 0.0);
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| m[(i, col)].norm().total_cmp(&m[(j, col)].norm())).unwrap();
            if pivot != col {
                m.swap_rows(col, pivot);
                det = -det;
            }
            let p = m[(col, col)];
            if p.norm() == 0.0 {
                return C64::new(0.0, 0.0);
            }
            det *= p;
            for row in col + 1..n {
                let f = m[(row, col)] / p;
                for k in col..n {
                    let mk = m[(col, k)];
                    m[(row, k)] -= f * mk;
                }
            }
        }
        det
    }

    /// Smallest root of the characteristic polynomial `det(A − λI)` of a Hermitian
    /// matrix, located by a sign scan from the Gershgorin lower bound and refined by bisection.
    pub fn char_poly_min_root(a: &CMatrix) -> f64 {
        let n = a.nrows();
        let lower = (0..n)
            .map(|i| a[(i, i)].re - (0..n).filter(|&j| j != i).map(|j| a[(i, j)].norm()).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            - 1.0;
        let p = |lambda: f64| determinant(&(a - CMatrix::identity(n, n) * C64::new(lambda, 0.0))).re;
        let steps = 20_000;
        let upper = lower + 2.0 * (a.norm() + 1.0);
        let h = (upper - lower) / steps as f64;
        let mut lo = lower;
        let mut plo = p(lo);
        for k in 1..=steps {
            let hi = lower + h * k as f64;
            let phi = p(hi);
            if plo == 0.0 {
                return lo;
            }
            if plo.signum() != phi.signum() {
                let (mut a0, mut b0, mut pa) = (lo, hi, plo);
                for _ in 0..200 {
                    let mid = 0.5 * (a0 + b0);
                    let pm = p(mid);
                    if pm.signum() == pa.signum() {
                        a0 = mid;
                        pa = pm;
                    } else {
                        b0 = mid;
                    }
                }
                return 0.5 * (a0 + b0);
            }
            lo = hi;
            plo = phi;
        }
        panic!("no sign change found");
    }
}
