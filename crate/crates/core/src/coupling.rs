//! Lagrange-multiplier coupling and decoupling of displacement state-space
//! models, plus the frequency-domain dual assembly used as its reference.
//!
//! Models are combined block-diagonally with stacked inputs and outputs, and
//! each row of the [`InterfaceMap`] enforces `y[plus] = y[minus]`. Inputs
//! are collocated with outputs, so every model must be square.

use nalgebra::{DVector, SVD};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis;
use crate::error::{Error, Result};
use crate::frf::FrfSet;
use crate::modal::to_real_form;
use crate::types::{CMat, Domain, InterfaceMap, Representation, StateSpaceModel};

/// Components must satisfy `max|C·B| ≤ NEWTON_TOL · Σ_k max|C_k|·max|B_k|`.
pub const NEWTON_TOL: f64 = 1e-8;
/// Interface operators with a smaller reciprocal condition number are singular.
pub const MIN_RCOND: f64 = 1e-12;

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Block-diagonal FRF of several models with stacked outputs and inputs.
pub fn stack_frfs(parts: &[FrfSet]) -> Result<FrfSet> {
    let first = parts.first().ok_or_else(|| Error::Dimension("nothing to stack".into()))?;
    for p in parts {
        if p.grid() != first.grid() {
            return Err(Error::Dimension("FRF grids differ".into()));
        }
        if p.domain() != first.domain() {
            return Err(Error::Domain("FRF domains differ".into()));
        }
    }
    let n_o: usize = parts.iter().map(|p| p.shape().0).sum();
    let n_i: usize = parts.iter().map(|p| p.shape().1).sum();
    let values = (0..first.n_freqs())
        .map(|f| {
            let mut h = CMat::zeros(n_o, n_i);
            let (mut r, mut c) = (0, 0);
            for p in parts {
                let (o, i) = p.shape();
                h.view_mut((r, c), (o, i)).copy_from(&p.values()[f]);
                r += o;
                c += i;
            }
            h
        })
        .collect();
    FrfSet::new(first.grid().to_vec(), values, first.domain())
}

/// Frequency-domain dual assembly `H̄ = H − H·Bᵀ·(B·H·Bᵀ)⁻¹·B·H`.
///
/// `frfs` is the block-diagonal FRF of the stacked models; redundant
/// outputs are kept.
pub fn dual_assembly_frf(frfs: &FrfSet, map: &InterfaceMap) -> Result<FrfSet> {
    let (n_o, n_i) = frfs.shape();
    if n_o != n_i {
        return Err(Error::Dimension(format!("dual assembly needs collocated FRFs, got {n_o}×{n_i}")));
    }
    if map.n_outputs() != n_o {
        return Err(Error::Dimension(format!("interface map spans {} outputs, FRFs have {n_o}", map.n_outputs())));
    }
    if map.is_empty() {
        return Ok(frfs.clone());
    }
    let bb = map.matrix_f64().map(real);
    let values = frfs
        .grid()
        .par_iter()
        .zip(frfs.values().par_iter())
        .map(|(&w, h)| {
            let hbt = h * bb.transpose();
            let z = &bb * &hbt;
            let inv = checked_inverse(&z)
                .ok_or_else(|| Error::Singular { what: "interface FRF matrix B·H·Bᵀ".into(), omega: Some(w) })?;
            Ok(h - &hbt * inv * (&bb * h))
        })
        .collect::<Result<Vec<_>>>()?;
    frfs.with_values(values)
}

fn rcond(m: &CMat) -> f64 {
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

fn checked_inverse(m: &CMat) -> Option<CMat> {
    if rcond(m) < MIN_RCOND {
        return None;
    }
    m.clone().try_inverse()
}

/// Block-diagonal model with stacked outputs and inputs.
pub fn stack_models(models: &[StateSpaceModel]) -> Result<StateSpaceModel> {
    let first = models.first().ok_or_else(|| Error::Dimension("nothing to stack".into()))?;
    let domain = first.domain();
    if let Some(m) = models.iter().find(|m| m.domain() != domain) {
        return Err(Error::Domain(format!("cannot stack {} and {domain} models", m.domain())));
    }
    let n: usize = models.iter().map(|m| m.n_states()).sum();
    let n_o: usize = models.iter().map(|m| m.n_outputs()).sum();
    let n_i: usize = models.iter().map(|m| m.n_inputs()).sum();
    let mut a = CMat::zeros(n, n);
    let mut b = CMat::zeros(n, n_i);
    let mut c = CMat::zeros(n_o, n);
    let mut d = CMat::zeros(n_o, n_i);
    let (mut s, mut o, mut i) = (0, 0, 0);
    for m in models {
        let (ns, no, ni) = (m.n_states(), m.n_outputs(), m.n_inputs());
        a.view_mut((s, s), (ns, ns)).copy_from(m.a());
        b.view_mut((s, i), (ns, ni)).copy_from(m.b());
        c.view_mut((o, s), (no, ns)).copy_from(m.c());
        d.view_mut((o, i), (no, ni)).copy_from(m.d());
        s += ns;
        o += no;
        i += ni;
    }
    let representation =
        if models.iter().filter(|m| m.n_states() > 0).all(|m| m.representation() == Representation::DiagonalComplex) {
            Representation::DiagonalComplex
        } else if models.iter().all(|m| m.is_real()) {
            Representation::RealValued
        } else {
            Representation::General
        };
    StateSpaceModel::new(a, b, c, d, domain, representation)
}

fn check_component(m: &StateSpaceModel, k: usize) -> Result<()> {
    if m.domain() != Domain::Displacement {
        return Err(Error::Domain(format!("model {k} is a {} model; coupling needs displacement models", m.domain())));
    }
    if m.n_outputs() != m.n_inputs() {
        return Err(Error::Dimension(format!(
            "model {k} is {}×{}; coupling needs collocated inputs and outputs",
            m.n_outputs(),
            m.n_inputs()
        )));
    }
    let bound = NEWTON_TOL * m.cb_scale();
    let max_cb = m.max_abs_cb();
    if max_cb > bound {
        return Err(Error::NewtonViolation { max_cb, bound });
    }
    Ok(())
}

/// Couples displacement models through rigid interface constraints.
///
/// The constraint `e = B_bool·y` is enforced through its second derivative,
/// stabilized as `ë + D₁ė + D₀e = 0` with distinct real negative roots, so
/// the constraint modes are real, stable and uncontrollable from the input
/// and the realization stays diagonalizable. With
/// `W = B_bool·C·A·B·B_boolᵀ`:
///
/// `Ā = A − B·B_boolᵀ·W⁻¹·B_bool·C·(A² + D₁A + D₀)`,
/// `B̄ = B − B·B_boolᵀ·W⁻¹·B_bool·C·A·B`, `C̄ = C`, `D̄ = 0`.
///
/// Diagonal-complex inputs are converted to real form first, so real
/// components give a real coupled model.
pub fn lm_couple(models: &[StateSpaceModel], map: &InterfaceMap) -> Result<StateSpaceModel> {
    if models.is_empty() {
        return Err(Error::Dimension("no models to couple".into()));
    }
    for (k, m) in models.iter().enumerate() {
        check_component(m, k)?;
    }
    let reference = reference_frequency(models)?;
    let parts = models
        .iter()
        .map(|m| match m.representation() {
            Representation::DiagonalComplex => to_real_form(m),
            _ => Ok(m.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    let stacked = stack_models(&parts)?;
    if map.n_outputs() != stacked.n_outputs() {
        return Err(Error::Dimension(format!(
            "interface map spans {} outputs, stacked models have {}",
            map.n_outputs(),
            stacked.n_outputs()
        )));
    }
    if map.is_empty() {
        return Ok(stacked.with_provenance("coupled"));
    }
    let (a, b, c, _) = stacked.clone().into_parts();
    let bb = map.matrix_f64().map(real);
    let bbc = &bb * &c;
    let bbca = &bbc * &a;
    let bbcab = &bbca * &b;
    let w = &bbcab * bb.transpose();
    let w_inv = checked_inverse(&w).ok_or_else(|| Error::Singular {
        what: format!("interface operator B_bool·C·A·B·B_boolᵀ (rcond {:.3e})", rcond(&w)),
        omega: None,
    })?;
    let (d1, d0) = constraint_gains(map.n_constraints(), reference);
    let feedback = &bbca * &a + scale_rows(&d1, &bbca) + scale_rows(&d0, &bbc);
    let g = &b * bb.transpose() * w_inv;
    let a_bar = &a - &g * feedback;
    let b_bar = &b - &g * bbcab;
    let representation = if a_bar.iter().chain(b_bar.iter()).chain(c.iter()).all(|z| z.im == 0.0) {
        Representation::RealValued
    } else {
        Representation::General
    };
    Ok(StateSpaceModel::strictly_proper(a_bar, b_bar, c, Domain::Displacement, representation)?
        .with_provenance("coupled"))
}

/// `diag(d)·m`.
fn scale_rows(d: &DVector<f64>, m: &CMat) -> CMat {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= real(d[i]);
    }
    out
}

/// Median pole magnitude of the components, used to place the constraint
/// modes within the dynamic range of the model.
fn reference_frequency(models: &[StateSpaceModel]) -> Result<f64> {
    let mut mags = Vec::new();
    for m in models {
        mags.extend(analysis::poles(m)?.iter().map(|p| p.norm()).filter(|x| *x > 0.0));
    }
    if mags.is_empty() {
        return Ok(1.0);
    }
    mags.sort_by(f64::total_cmp);
    Ok(mags[mags.len() / 2])
}

/// Gains `D₁ = −(p₁+p₂)`, `D₀ = p₁p₂` per constraint row, with all roots
/// distinct, real and spread over `[−1.4, −0.6]·ω_ref`.
fn constraint_gains(n: usize, omega_ref: f64) -> (DVector<f64>, DVector<f64>) {
    let root = |k: usize| -omega_ref * (0.6 + 0.8 * (k as f64 + 0.5) / (2 * n) as f64);
    let mut d1 = DVector::zeros(n);
    let mut d0 = DVector::zeros(n);
    for row in 0..n {
        let (p1, p2) = (root(2 * row), root(2 * row + 1));
        d1[row] = -(p1 + p2);
        d0[row] = p1 * p2;
    }
    (d1, d0)
}

/// Removes `subtrahends` from `assembly` by coupling with their negated
/// responses. The stacked output order is `[assembly, subtrahends...]`.
pub fn lm_decouple(
    assembly: &StateSpaceModel,
    subtrahends: &[StateSpaceModel],
    map: &InterfaceMap,
) -> Result<StateSpaceModel> {
    let mut models = Vec::with_capacity(subtrahends.len() + 1);
    models.push(assembly.clone());
    models.extend(subtrahends.iter().map(|m| m.negated()));
    Ok(lm_couple(&models, map)?.with_provenance("decoupled"))
}

/// Negated FRF, the frequency-domain counterpart of a subtrahend in
/// [`lm_decouple`].
pub fn negate_frf(frf: &FrfSet) -> Result<FrfSet> {
    frf.with_values(frf.values().iter().map(|h| -h).collect())
}
