//! First-order-hold discretization and time-domain simulation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::analysis::poles;
use crate::error::{Error, Result};
use crate::modal::to_real_form;
use crate::types::{Domain, StateSpaceModel};

/// Outputs above this magnitude mark a simulation as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Discrete-time model with first-order-hold input interpolation:
///
/// `x[k+1] = Ad·x[k] + Bd0·u[k] + Bd1·u[k+1]`, `y[k] = Cd·x[k] + Dd·u[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteModel {
    pub ad: DMatrix<f64>,
    pub bd0: DMatrix<f64>,
    pub bd1: DMatrix<f64>,
    pub cd: DMatrix<f64>,
    pub dd: DMatrix<f64>,
    /// Sampling rate in Hz.
    pub fs: f64,
    pub domain: Domain,
}

impl DiscreteModel {
    pub fn n_states(&self) -> usize {
        self.ad.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.bd0.ncols()
    }
    pub fn n_outputs(&self) -> usize {
        self.cd.nrows()
    }
}

/// Largest natural frequency `|λ|/2π` of a model's poles, in Hz.
pub fn max_natural_frequency_hz(m: &StateSpaceModel) -> Result<f64> {
    Ok(poles(m)?.iter().map(|p| p.norm()).fold(0.0, f64::max) / (2.0 * PI))
}

/// FOH discretization at `fs` Hz.
///
/// With `T = 1/fs`, the exponential of
/// `[[A, B, 0], [0, 0, I/T], [0, 0, 0]]·T` holds `Φ` in its first block row
/// together with `Γ₁` and `Γ₂`; then `Ad = Φ`, `Bd0 = Γ₁ − Γ₂`, `Bd1 = Γ₂`.
/// Diagonal-complex models are converted to real form first.
pub fn foh_discretize(m: &StateSpaceModel, fs: f64) -> Result<DiscreteModel> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::InvalidParameter(format!("sampling rate must be positive, got {fs}")));
    }
    let real = to_real_form(m)?;
    if !real.is_real() {
        return Err(Error::Structure("FOH discretization needs a real-valued model".into()));
    }
    let re = |x: &crate::types::CMat| x.map(|z| z.re);
    let (a, b, c, d) = (re(real.a()), re(real.b()), re(real.c()), re(real.d()));
    if a.iter().chain(b.iter()).chain(c.iter()).chain(d.iter()).any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("model has non-finite entries".into()));
    }
    if real.n_states() > 0 {
        let fmax = max_natural_frequency_hz(&real)?;
        if fs < 2.0 * fmax {
            log::warn!("sampling rate {fs:.4e} Hz is below twice the fastest mode ({fmax:.4e} Hz)");
        }
    }
    let (n, ni) = (a.nrows(), b.ncols());
    let t = 1.0 / fs;
    let size = n + 2 * ni;
    let mut aug = DMatrix::<f64>::zeros(size, size);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&a * t));
    aug.view_mut((0, n), (n, ni)).copy_from(&(&b * t));
    aug.view_mut((n, n + ni), (ni, ni)).fill_with_identity();
    let e = aug.exp();
    let phi = e.view((0, 0), (n, n)).into_owned();
    let g1 = e.view((0, n), (n, ni)).into_owned();
    let g2 = e.view((0, n + ni), (n, ni)).into_owned();
    Ok(DiscreteModel { ad: phi, bd0: &g1 - &g2, bd1: g2, cd: c, dd: d, fs, domain: real.domain() })
}

/// Linear sine sweep from `f0` to `f1` Hz over `duration` s, sampled at
/// `fs`, with raised-cosine fades over `fade_fraction·duration` at both ends
/// and peak magnitude 1.
pub fn sweep_signal(f0: f64, f1: f64, duration: f64, fs: f64, fade_fraction: f64) -> Result<Vec<f64>> {
    if !(f0 > 0.0 && f0 < f1 && f1 < fs / 2.0) {
        return Err(Error::InvalidParameter(format!("sweep needs 0 < f0 < f1 < fs/2, got {f0}, {f1}, fs = {fs}")));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter(format!("sweep duration must be positive, got {duration}")));
    }
    if !(0.0..0.5).contains(&fade_fraction) {
        return Err(Error::InvalidParameter(format!("fade fraction must be in [0, 0.5), got {fade_fraction}")));
    }
    let n = (duration * fs).round() as usize;
    let fade = fade_fraction * duration;
    let rate = (f1 - f0) / duration;
    let window = |t: f64| -> f64 {
        if fade <= 0.0 {
            1.0
        } else if t < fade {
            0.5 * (1.0 - (PI * t / fade).cos())
        } else if t > duration - fade {
            0.5 * (1.0 - (PI * (duration - t) / fade).cos())
        } else {
            1.0
        }
    };
    let mut u: Vec<f64> = (0..n)
        .map(|k| {
            let t = k as f64 / fs;
            window(t) * (2.0 * PI * (f0 * t + 0.5 * rate * t * t)).sin()
        })
        .collect();
    let peak = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        u.iter_mut().for_each(|x| *x /= peak);
    }
    Ok(u)
}

/// Response of a discrete model.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    /// `n_outputs × n_samples`; shorter than the input if the run diverged.
    pub outputs: DMatrix<f64>,
    /// First sample whose output exceeded [`DIVERGENCE_LIMIT`] or was not
    /// finite. The recursion stops there.
    pub diverged_at: Option<usize>,
}

impl Simulation {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// Runs the FOH recursion on `u` (`n_inputs × n_samples`) from `x0`
/// (zero when `None`).
pub fn simulate(dm: &DiscreteModel, u: &DMatrix<f64>, x0: Option<&DVector<f64>>) -> Result<Simulation> {
    let (n, ni, no) = (dm.n_states(), dm.n_inputs(), dm.n_outputs());
    if u.nrows() != ni {
        return Err(Error::Dimension(format!("input has {} channels, model has {ni}", u.nrows())));
    }
    let ns = u.ncols();
    if ns == 0 {
        return Err(Error::Dimension("input has no samples".into()));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() != n => {
            return Err(Error::Dimension(format!("x0 has {} entries, model has {n} states", x0.len())))
        }
        Some(x0) => x0.clone(),
        None => DVector::zeros(n),
    };
    let mut next = DVector::zeros(n);
    let mut y = DVector::zeros(no);
    let mut out = DMatrix::zeros(no, ns);
    for k in 0..ns {
        let uk = u.column(k);
        y.gemv(1.0, &dm.cd, &x, 0.0);
        y.gemv(1.0, &dm.dd, &uk, 1.0);
        if y.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            log::warn!("output exceeded {DIVERGENCE_LIMIT:e} at sample {k}; stopping");
            return Ok(Simulation { outputs: out.columns(0, k).into_owned(), diverged_at: Some(k) });
        }
        out.set_column(k, &y);
        if k + 1 < ns {
            next.gemv(1.0, &dm.ad, &x, 0.0);
            next.gemv(1.0, &dm.bd0, &uk, 1.0);
            next.gemv(1.0, &dm.bd1, &u.column(k + 1), 1.0);
            std::mem::swap(&mut x, &mut next);
        }
    }
    Ok(Simulation { outputs: out, diverged_at: None })
}

/// Independent simulations run in parallel.
pub fn simulate_many(jobs: &[(&DiscreteModel, &DMatrix<f64>)]) -> Result<Vec<Simulation>> {
    jobs.par_iter().map(|(dm, u)| simulate(dm, u, None)).collect()
}

/// Relative RMS deviation of `test` from `reference` over samples
/// `range`, all channels together.
pub fn rms_deviation(test: &DMatrix<f64>, reference: &DMatrix<f64>, range: std::ops::Range<usize>) -> Result<f64> {
    if test.nrows() != reference.nrows() || range.end > test.ncols().min(reference.ncols()) || range.is_empty() {
        return Err(Error::Dimension("signals do not cover the comparison window".into()));
    }
    let len = range.len();
    let (t, r) = (test.columns(range.start, len), reference.columns(range.start, len));
    let den = r.norm();
    let num = (t - r).norm();
    Ok(if den == 0.0 { num } else { num / den })
}

/// Sample range of a sweep that excludes both fades.
pub fn unfaded_range(n_samples: usize, fade_fraction: f64) -> std::ops::Range<usize> {
    let skip = (fade_fraction * n_samples as f64).ceil() as usize;
    skip..n_samples.saturating_sub(skip).max(skip)
}
