//! Reference computations written independently of the library code paths
//! they check.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use ssdss::{CMat, RMat};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `(K − ω²M + jωC)⁻¹` restricted to `dofs`, by complex LU.
pub fn receptance(m: &RMat, cd: &RMat, k: &RMat, omega: f64, dofs: &[usize]) -> CMat {
    let z = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| c(k[(i, j)] - omega * omega * m[(i, j)], omega * cd[(i, j)]));
    let inv = z.lu().try_inverse().expect("dynamic stiffness is regular");
    CMat::from_fn(dofs.len(), dofs.len(), |i, j| inv[(dofs[i], dofs[j])])
}

/// `Σ ψl/(jω−λ) + ψ*l*/(jω−λ*) − LR/ω² + UR`, term by term.
pub fn modal_sum(poles: &[Complex64], psi: &CMat, l: &CMat, lr: &RMat, ur: &RMat, omega: f64) -> CMat {
    let jw = c(0.0, omega);
    let mut h = CMat::from_fn(ur.nrows(), ur.ncols(), |i, j| c(ur[(i, j)] - lr[(i, j)] / (omega * omega), 0.0));
    for (r, &p) in poles.iter().enumerate() {
        let outer = psi.column(r) * l.row(r);
        h += outer.map(|z| z / (jw - p)) + outer.map(|z| z.conj() / (jw - p.conj()));
    }
    h
}

/// `H − H·Bᵀ·(B·H·Bᵀ)⁻¹·B·H` for a signed Boolean `B` given as pairs.
pub fn dual_assembly(h: &CMat, pairs: &[(usize, usize)]) -> CMat {
    let n = h.nrows();
    let b = CMat::from_fn(pairs.len(), n, |r, i| {
        if i == pairs[r].0 {
            c(1.0, 0.0)
        } else if i == pairs[r].1 {
            c(-1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let hb = h * b.transpose();
    let inv = (&b * &hb).lu().try_inverse().expect("interface matrix is regular");
    h - &hb * inv * (&b * h)
}

pub fn block_diag(blocks: &[CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(n, m);
    let (mut r, mut k) = (0, 0);
    for b in blocks {
        out.view_mut((r, k), b.shape()).copy_from(b);
        r += b.nrows();
        k += b.ncols();
    }
    out
}

/// Velocity FRF of damped Newton RCMs in closed form:
/// `ω_c²·CB/(ω_c² − ω² + 2jξωω_c) − CB`.
pub fn newton_velocity(cb: &RMat, omega_c: f64, xi: f64, omega: f64) -> CMat {
    let g = c(omega_c * omega_c, 0.0) / c(omega_c * omega_c - omega * omega, 2.0 * xi * omega * omega_c) - c(1.0, 0.0);
    cb.map(|x| g * x)
}

/// `max_ω ‖T − R‖_F / ‖R‖_F`.
pub fn max_frobenius_rel(test: &[CMat], reference: &[CMat]) -> f64 {
    test.iter().zip(reference).map(|(t, r)| (t - r).norm() / r.norm()).fold(0.0, f64::max)
}

/// `‖T − R‖_F / ‖R‖_F` over all frequencies together.
pub fn rms_rel(test: &[CMat], reference: &[CMat]) -> f64 {
    let num: f64 = test.iter().zip(reference).map(|(t, r)| (t - r).norm_squared()).sum();
    let den: f64 = reference.iter().map(|r| r.norm_squared()).sum();
    (num / den).sqrt()
}

/// Classical fourth-order Runge–Kutta for `ẋ = f(t, x)` with `sub` steps per
/// output interval `dt`; returns the state at each output instant.
pub fn rk4(f: impl Fn(f64, &[f64]) -> Vec<f64>, x0: &[f64], dt: f64, n_out: usize, sub: usize) -> Vec<Vec<f64>> {
    let h = dt / sub as f64;
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut out = vec![x.clone()];
    let axpy = |x: &[f64], a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect() };
    for _ in 1..n_out {
        for _ in 0..sub {
            let k1 = f(t, &x);
            let k2 = f(t + h / 2.0, &axpy(&x, h / 2.0, &k1));
            let k3 = f(t + h / 2.0, &axpy(&x, h / 2.0, &k2));
            let k4 = f(t + h, &axpy(&x, h, &k3));
            for i in 0..x.len() {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
        }
        out.push(x.clone());
    }
    out
}

pub fn log_grid(w0: f64, w1: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| (w0.ln() + (w1.ln() - w0.ln()) * k as f64 / (n - 1) as f64).exp()).collect()
}
