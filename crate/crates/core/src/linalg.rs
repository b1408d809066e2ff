//! Dense kernels not provided directly by nalgebra: eigenvectors of a
//! general complex matrix (via its complex Schur form) and a truncated
//! pseudo-inverse solve.

use nalgebra::{DMatrix, Dyn, Schur, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::{CMat, RMat};

const SCHUR_MAX_ITER: usize = 100_000;

/// Eigenvalues and unit-norm right eigenvectors (as columns).
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: CMat,
}

/// Eigenvalues of a general complex matrix, from its Schur form.
pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let (_, balanced) = balance(a);
    let schur = Schur::try_new(balanced, f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Singular { what: "Schur iteration did not converge".into(), omega: None })?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// Full eigendecomposition `A V = V Λ` of a general complex matrix.
///
/// The matrix is balanced by powers of two, reduced to complex Schur form
/// `A = Q T Q^H`, and the eigenvectors of the triangular factor are found by
/// back substitution.
pub fn eig(a: &CMat) -> Result<Eigen> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Eigen { values: Vec::new(), vectors: CMat::zeros(0, 0) });
    }
    let (scale, balanced) = balance(a);
    let schur = Schur::try_new(balanced, f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Singular { what: "Schur iteration did not converge".into(), omega: None })?;
    let (q, t) = schur.unpack();
    let values: Vec<Complex64> = t.diagonal().iter().copied().collect();

    let tnorm = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < small {
                denom = Complex64::new(small, 0.0);
            }
            y[(i, k)] = -acc / denom;
        }
    }
    let mut vectors = q * y;
    for i in 0..n {
        let s = scale[i];
        for k in 0..n {
            vectors[(i, k)] *= s;
        }
    }
    normalize_columns(&mut vectors);
    Ok(Eigen { values, vectors })
}

fn normalize_columns(v: &mut CMat) {
    for mut col in v.column_iter_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.unscale_mut(norm);
        }
    }
}

/// Diagonal similarity `D⁻¹ A D` with power-of-two entries that roughly
/// equalizes row and column norms. Returns the diagonal of `D`.
pub fn balance(a: &CMat) -> (Vec<f64>, CMat) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let mut m = a.clone();
    let mut d = vec![1.0; n];
    let abs1 = |z: Complex64| z.re.abs() + z.im.abs();
    for _sweep in 0..100 {
        let mut converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += abs1(m[(j, i)]);
                    r += abs1(m[(i, j)]);
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
    (d, m)
}

/// 2-norm condition number of a complex matrix.
pub fn condition_number(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Tighter convergence threshold tried by [`svd`] alongside nalgebra's
/// default.
const SVD_EPS: f64 = 1e-17;
const SVD_MAX_ITER: usize = 10_000;

/// SVD that guards against nalgebra's convergence test. With the default
/// threshold, clustered singular values can leave vectors that reconstruct
/// the input only to ~1e-8; a tighter threshold fixes that but can go wrong
/// on rank-deficient input. Both are computed and the one that reconstructs
/// the input better is returned.
pub fn svd(m: RMat, vectors: bool) -> SVD<f64, Dyn, Dyn> {
    let default = SVD::new(m.clone(), true, true);
    let err = |s: &SVD<f64, Dyn, Dyn>| s.clone().recompose().map(|r| (r - &m).norm()).unwrap_or(f64::INFINITY);
    let mut best = default;
    if err(&best) > 1e-14 * m.norm() {
        if let Some(tight) = SVD::try_new(m.clone(), true, true, SVD_EPS, SVD_MAX_ITER) {
            if err(&tight) < err(&best) {
                best = tight;
            }
        }
    }
    if !vectors {
        best.u = None;
        best.v_t = None;
    }
    best
}

/// Solves `X·A ≈ H` in the least-squares sense, `X = H·A⁺`, with singular
/// values of `A` below `rtol·σ_max` truncated.
///
/// Returns the solution and the effective rank of `A`.
pub fn right_pinv_solve(h: &RMat, a: &RMat, rtol: f64) -> Result<(RMat, usize)> {
    if h.ncols() != a.ncols() {
        return Err(Error::Dimension(format!("target has {} columns, design matrix has {}", h.ncols(), a.ncols())));
    }
    // For a wide A, reduce to the small factor of Aᵀ = QR first: X·Rᵀ = H·Q.
    // A direct SVD of a long matrix loses digits that the QR route keeps.
    let (h, a) = if a.nrows() < a.ncols() {
        let qr = a.transpose().qr();
        (h * qr.q(), qr.r().transpose())
    } else {
        (h.clone(), a.clone())
    };
    let svd = svd(a, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > rtol * smax && s > 0.0).count();
    // H A⁺ = H V Σ⁺ Uᵀ
    let hv = h * v_t.transpose();
    let mut scaled = DMatrix::zeros(hv.nrows(), hv.ncols());
    for (k, &s) in sv.iter().enumerate() {
        if s > rtol * smax && s > 0.0 {
            scaled.set_column(k, &(hv.column(k) / s));
        }
    }
    Ok((scaled * u.transpose(), rank))
}
