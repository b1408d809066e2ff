//! Displacement state-space models from modal parameters: in-band modes,
//! residual compensation modes (RCMs) for the lower/upper residuals and for
//! Newton's second law, and the real-valued similarity transform.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, pair_structure, PoleGroup, PAIRING_TOL};
use crate::error::{Error, Result};
use crate::frf::{validate_grid, FrfSet};
use crate::types::{
    check_damping, max_abs, CMat, Domain, ModalModel, RMat, RcmConfig, Representation, StateSpaceModel,
};

/// Singular values below `SVD_DROP_TOL · σ_max` produce no RCM.
pub const SVD_DROP_TOL: f64 = 1e-12;
/// Quality threshold above which [`rcm_quality`] logs a warning.
pub const RCM_QUALITY_WARN: f64 = 0.01;

/// Displacement FRF of a modal model including both residual terms.
pub fn modal_frf(model: &ModalModel, grid: &[f64]) -> Result<FrfSet> {
    validate_grid(grid)?;
    let values = grid.par_iter().map(|&w| modal_frf_at(model, w)).collect::<Result<Vec<_>>>()?;
    FrfSet::new(grid.to_vec(), values, Domain::Displacement)
}

/// Single-frequency evaluation of the modal sum; `ω` must be nonzero
/// because of the lower-residual term.
pub fn modal_frf_at(model: &ModalModel, omega: f64) -> Result<CMat> {
    if omega == 0.0 {
        return Err(Error::Singular { what: "lower residual term at zero frequency".into(), omega: Some(0.0) });
    }
    let jw = Complex64::new(0.0, omega);
    let (n_o, n_i) = (model.n_outputs(), model.n_inputs());
    let mut h = CMat::from_fn(n_o, n_i, |i, j| {
        Complex64::new(model.upper_residual()[(i, j)] - model.lower_residual()[(i, j)] / (omega * omega), 0.0)
    });
    for (r, &lambda) in model.poles().iter().enumerate() {
        let g1 = (jw - lambda).inv();
        let g2 = (jw - lambda.conj()).inv();
        for j in 0..n_i {
            let l = model.part_factors()[(r, j)];
            let (a, b) = (l * g1, l.conj() * g2);
            for i in 0..n_o {
                let psi = model.mode_shapes()[(i, r)];
                h[(i, j)] += psi * a + psi.conj() * b;
            }
        }
    }
    Ok(h)
}

fn expand_pairs(poles: &[Complex64], shapes: &CMat, factors: &CMat) -> (CMat, CMat, CMat) {
    let n = poles.len();
    let diag: Vec<Complex64> = poles.iter().copied().chain(poles.iter().map(|p| p.conj())).collect();
    let a = CMat::from_diagonal(&DVector::from_vec(diag));
    let mut b = CMat::zeros(2 * n, factors.ncols());
    b.rows_mut(0, n).copy_from(factors);
    b.rows_mut(n, n).copy_from(&factors.map(|z| z.conj()));
    let mut c = CMat::zeros(shapes.nrows(), 2 * n);
    c.columns_mut(0, n).copy_from(shapes);
    c.columns_mut(n, n).copy_from(&shapes.map(|z| z.conj()));
    (a, b, c)
}

/// In-band model: `A = diag(Λ, Λ*)`, `B = [L; L*]`, `C = [Ψ, Ψ*]`, `D = 0`.
pub fn build_inband(model: &ModalModel) -> StateSpaceModel {
    let (a, b, c) = expand_pairs(model.poles(), model.mode_shapes(), model.part_factors());
    StateSpaceModel::strictly_proper(a, b, c, Domain::Displacement, Representation::DiagonalComplex)
        .expect("modal model dimensions are validated at construction")
        .with_provenance("ib")
}

/// Which matrix a set of residual compensation modes reproduces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RcmSource {
    Ur,
    Lr,
    Cb,
}

impl RcmSource {
    fn tag(self) -> &'static str {
        match self {
            RcmSource::Ur => "UR",
            RcmSource::Lr => "LR",
            RcmSource::Cb => "CB",
        }
    }
}

/// Modal parameters of residual compensation modes, one per retained
/// singular value.
#[derive(Clone, Debug, PartialEq)]
pub struct RcmSet {
    pub poles: Vec<Complex64>,
    pub shapes: CMat,
    pub factors: CMat,
    pub source: RcmSource,
}

impl RcmSet {
    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    /// Expanded conjugate-pair model whose displacement FRF at `ω = 0`
    /// equals the decomposed matrix.
    pub fn to_model(&self) -> StateSpaceModel {
        let (a, b, c) = expand_pairs(&self.poles, &self.shapes, &self.factors);
        StateSpaceModel::strictly_proper(a, b, c, Domain::Displacement, Representation::DiagonalComplex)
            .expect("RCM dimensions are consistent by construction")
            .with_provenance(self.source.tag())
    }
}

/// Retained singular triplets of a real matrix, with the sign of each pair
/// of singular vectors fixed so the largest-magnitude entry of `U_r` is
/// positive.
fn truncated_svd(m: &RMat) -> Vec<(f64, DVector<f64>, DVector<f64>)> {
    if m.is_empty() {
        return Vec::new();
    }
    let svd = crate::linalg::svd(m.clone(), true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for (r, &s) in svd.singular_values.iter().enumerate() {
        if smax == 0.0 || s <= SVD_DROP_TOL * smax {
            continue;
        }
        let mut ur = u.column(r).clone_owned();
        let mut vr = v_t.row(r).transpose();
        let pivot = ur.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
        if pivot < 0.0 {
            ur.neg_mut();
            vr.neg_mut();
        }
        out.push((s, ur, vr));
    }
    out
}

/// SVD-based RCM parameters for a real matrix `M`:
/// `λ = −ξω + jω√(1−ξ²)`, `ψ = ω/√(1−ξ²)·√σ·U_r`, `l = −(j/2)·√σ·V_rᵀ`.
pub fn rcm_params(m: &RMat, omega: f64, xi: f64, source: RcmSource) -> Result<RcmSet> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("RCM natural frequency {omega} must be positive")));
    }
    check_damping("RCM damping ratio", xi)?;
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("RCM source matrix has non-finite entries".into()));
    }
    let triplets = truncated_svd(m);
    let n = triplets.len();
    let root = (1.0 - xi * xi).sqrt();
    let lambda = Complex64::new(-xi * omega, omega * root);
    let mut shapes = CMat::zeros(m.nrows(), n);
    let mut factors = CMat::zeros(n, m.ncols());
    for (r, (s, u, v)) in triplets.iter().enumerate() {
        let ss = s.sqrt();
        for i in 0..m.nrows() {
            shapes[(i, r)] = Complex64::new(omega / root * ss * u[i], 0.0);
        }
        for j in 0..m.ncols() {
            factors[(r, j)] = Complex64::new(0.0, -0.5 * ss * v[j]);
        }
    }
    Ok(RcmSet { poles: vec![lambda; n], shapes, factors, source })
}

/// RCMs reproducing a constant upper residual in the band.
pub fn ur_rcm_model(ur: &RMat, cfg: &RcmConfig) -> Result<StateSpaceModel> {
    Ok(rcm_params(ur, cfg.omega_ur, cfg.xi_ur, RcmSource::Ur)?.to_model())
}

/// RCMs reproducing the `LR/(jω)²` lower-residual term well above `ω_LR`.
pub fn lr_rcm_model(lr: &RMat, cfg: &RcmConfig) -> Result<StateSpaceModel> {
    let scaled = lr / (cfg.omega_lr * cfg.omega_lr);
    Ok(rcm_params(&scaled, cfg.omega_lr, cfg.xi_lr, RcmSource::Lr)?.to_model())
}

fn require_diag_displacement(m: &StateSpaceModel, what: &str) -> Result<()> {
    if m.domain() != Domain::Displacement {
        return Err(Error::Domain(format!("{what} must be a displacement model, got {}", m.domain())));
    }
    if m.representation() != Representation::DiagonalComplex {
        return Err(Error::Structure(format!("{what} must be diagonal-complex")));
    }
    Ok(())
}

/// Block-diagonal assembly of the in-band and residual models.
pub fn assemble_full(inband: &StateSpaceModel, lr: &StateSpaceModel, ur: &StateSpaceModel) -> Result<StateSpaceModel> {
    for (m, what) in [(inband, "in-band model"), (lr, "LR model"), (ur, "UR model")] {
        require_diag_displacement(m, what)?;
    }
    Ok(analysis::concat_block(&[inband.clone(), lr.clone(), ur.clone()])?.with_provenance("full"))
}

/// `C·B` of a displacement model, which is real for conjugate-pair models.
pub fn compute_cb(m: &StateSpaceModel) -> Result<RMat> {
    if m.domain() != Domain::Displacement {
        return Err(Error::Domain(format!("C·B is defined here for displacement models, got {}", m.domain())));
    }
    let cb = m.cb();
    let max_re = cb.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let max_im = cb.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    // Rounding in the sum scales with the individual terms, not with the result.
    let bound = (1e-10 * max_re).max(1e-14).max(1e-13 * m.cb_scale());
    if max_im > bound {
        return Err(Error::Structure(format!(
            "C·B has imaginary part {max_im:.3e} (real part {max_re:.3e}); conjugate structure is broken"
        )));
    }
    Ok(cb.map(|z| z.re))
}

/// Displacement model of the RCMs that cancel `C·B`: velocity-form RCMs of
/// `cb` converted with `C_CB = C_vel·A⁻¹`, so that `C_CB·B_CB = −cb`.
pub fn cb_rcm_model(cb: &RMat, omega_cb: f64, xi_cb: f64) -> Result<StateSpaceModel> {
    let set = rcm_params(cb, omega_cb, xi_cb, RcmSource::Cb)?;
    let (a, b, mut c) = expand_pairs(&set.poles, &set.shapes, &set.factors);
    for k in 0..a.nrows() {
        let inv = a[(k, k)].inv();
        for i in 0..c.nrows() {
            c[(i, k)] *= inv;
        }
    }
    Ok(StateSpaceModel::strictly_proper(a, b, c, Domain::Displacement, Representation::DiagonalComplex)?
        .with_provenance("CB"))
}

fn newton_noise_floor(m: &StateSpaceModel) -> f64 {
    1e-13 * m.cb_scale()
}

/// Appends damped CB RCMs so that the velocity model has no feed-through.
/// Returns the input unchanged when `C·B` is already at rounding level.
pub fn impose_newton(full: &StateSpaceModel, cfg: &RcmConfig) -> Result<StateSpaceModel> {
    require_diag_displacement(full, "model")?;
    check_damping("xi_cb", cfg.xi_cb)?;
    let cb = compute_cb(full)?;
    let cb_max = cb.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if cb_max <= newton_noise_floor(full) {
        log::info!("C·B = {cb_max:.3e} is at rounding level; Newton RCMs not needed");
        return Ok(full.clone());
    }
    let rcm = cb_rcm_model(&cb, cfg.omega_cb, cfg.xi_cb)?;
    let prov = format!("{}+INL", if full.provenance().is_empty() { "full" } else { full.provenance() });
    Ok(analysis::concat_block(&[full.clone(), rcm])?.with_provenance(prov))
}

/// One undamped state per singular value of `cb`, pole `+jω_AL`,
/// `B = −√σ·Vᵀ`, `C = U·√σ`, appended as-is to the displacement model.
pub fn legacy_rcm_model(cb: &RMat, omega_al: f64) -> Result<StateSpaceModel> {
    if !(omega_al > 0.0 && omega_al.is_finite()) {
        return Err(Error::InvalidParameter(format!("legacy RCM frequency {omega_al} must be positive")));
    }
    let triplets = truncated_svd(cb);
    let n = triplets.len();
    let a = CMat::from_diagonal_element(n, n, Complex64::new(0.0, omega_al));
    let mut b = CMat::zeros(n, cb.ncols());
    let mut c = CMat::zeros(cb.nrows(), n);
    for (r, (s, u, v)) in triplets.iter().enumerate() {
        let ss = s.sqrt();
        for j in 0..cb.ncols() {
            b[(r, j)] = Complex64::new(-ss * v[j], 0.0);
        }
        for i in 0..cb.nrows() {
            c[(i, r)] = Complex64::new(ss * u[i], 0.0);
        }
    }
    Ok(StateSpaceModel::strictly_proper(a, b, c, Domain::Displacement, Representation::DiagonalComplex)?
        .with_provenance("CB,AL"))
}

/// Earlier single-undamped-pole method for enforcing `C·B = 0`, kept for
/// comparison with [`impose_newton`].
pub fn impose_newton_legacy(full: &StateSpaceModel, omega_al: f64) -> Result<StateSpaceModel> {
    require_diag_displacement(full, "model")?;
    let cb = compute_cb(full)?;
    let cb_max = cb.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if cb_max <= newton_noise_floor(full) {
        log::info!("C·B = {cb_max:.3e} is at rounding level; legacy RCMs not needed");
        return Ok(full.clone());
    }
    let rcm = legacy_rcm_model(&cb, omega_al)?;
    let prov = format!("{}+AL", if full.provenance().is_empty() { "full" } else { full.provenance() });
    Ok(analysis::concat_block(&[full.clone(), rcm])?.with_provenance(prov))
}

/// `ω_CB²·CB/(−ω² + 2jωξω_CB + ω_CB²) − CB` at one frequency (`ω ≥ 0`).
pub fn cb_velocity_closed_form_at(cb: &RMat, omega_cb: f64, xi_cb: f64, omega: f64) -> CMat {
    let den = Complex64::new(omega_cb * omega_cb - omega * omega, 2.0 * omega * xi_cb * omega_cb);
    let g = Complex64::new(omega_cb * omega_cb, 0.0) / den - 1.0;
    cb.map(|x| g * x)
}

/// Velocity FRF of the CB RCMs in closed form, on a grid.
pub fn cb_velocity_closed_form(cb: &RMat, cfg: &RcmConfig, grid: &[f64]) -> Result<FrfSet> {
    validate_grid(grid)?;
    let values = grid.iter().map(|&w| cb_velocity_closed_form_at(cb, cfg.omega_cb, cfg.xi_cb, w)).collect();
    FrfSet::new(grid.to_vec(), values, Domain::Velocity)
}

/// Legacy counterpart: `ω_AL·CB/(ω_AL − ω) − CB`.
pub fn legacy_velocity_closed_form_at(cb: &RMat, omega_al: f64, omega: f64) -> CMat {
    let g = omega_al / (omega_al - omega) - 1.0;
    cb.map(|x| Complex64::new(g * x, 0.0))
}

/// Converts a diagonal-complex model with exact conjugate structure to an
/// equivalent real model. Each pair `(λ, λ*)`, `λ = σ + jω`, becomes the
/// block `[[σ, ω], [−ω, σ]]` with `B = [Re b; −Im b]`, `C = [2Re c, 2Im c]`.
pub fn to_real_form(m: &StateSpaceModel) -> Result<StateSpaceModel> {
    if m.representation() != Representation::DiagonalComplex {
        if m.is_real() {
            return Ok(m.clone());
        }
        return Err(Error::Structure("real form requires a diagonal-complex model".into()));
    }
    let poles = m.diagonal_poles();
    // D = C·A·B of a differentiated model is real only up to rounding of a
    // sum whose terms scale with |λ_k|.
    let d_scale = m.cb_scale() * poles.iter().map(|p| p.norm()).fold(1.0, f64::max);
    if m.d().iter().any(|z| z.im.abs() > 1e-10 * d_scale) {
        return Err(Error::Structure("feed-through is not real".into()));
    }
    let n = poles.len();
    let (b, c) = (m.b(), m.c());
    let mut ar = CMat::zeros(n, n);
    let mut br = CMat::zeros(n, m.n_inputs());
    let mut cr = CMat::zeros(m.n_outputs(), n);
    let re = |z: Complex64| Complex64::new(z.re, 0.0);
    let mut k = 0;
    for g in pair_structure(&poles) {
        match g {
            PoleGroup::Real(s) => {
                check_real_state(m, s)?;
                ar[(k, k)] = re(poles[s]);
                br.row_mut(k).copy_from(&b.row(s).map(re));
                cr.column_mut(k).copy_from(&c.column(s).map(re));
                k += 1;
            }
            PoleGroup::Pair { pos, neg } => {
                check_conjugate_states(m, pos, neg)?;
                let (sigma, w) = (poles[pos].re, poles[pos].im);
                ar[(k, k)] = re(Complex64::new(sigma, 0.0));
                ar[(k, k + 1)] = re(Complex64::new(w, 0.0));
                ar[(k + 1, k)] = re(Complex64::new(-w, 0.0));
                ar[(k + 1, k + 1)] = re(Complex64::new(sigma, 0.0));
                for j in 0..m.n_inputs() {
                    br[(k, j)] = Complex64::new(b[(pos, j)].re, 0.0);
                    br[(k + 1, j)] = Complex64::new(-b[(pos, j)].im, 0.0);
                }
                for i in 0..m.n_outputs() {
                    cr[(i, k)] = Complex64::new(2.0 * c[(i, pos)].re, 0.0);
                    cr[(i, k + 1)] = Complex64::new(2.0 * c[(i, pos)].im, 0.0);
                }
                k += 2;
            }
            PoleGroup::Unpaired(s) => {
                return Err(Error::Structure(format!("pole {} has no conjugate partner", poles[s])));
            }
        }
    }
    let prov = if m.provenance().is_empty() { "real".to_string() } else { format!("{},real", m.provenance()) };
    let d = m.d().map(|z| Complex64::new(z.re, 0.0));
    Ok(StateSpaceModel::new(ar, br, cr, d, m.domain(), Representation::RealValued)?.with_provenance(prov))
}

fn rel_mismatch(x: impl Iterator<Item = (Complex64, Complex64)>) -> f64 {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for (a, b) in x {
        num = num.max((a - b).norm());
        den = den.max(a.norm()).max(b.norm());
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn check_conjugate_states(m: &StateSpaceModel, pos: usize, neg: usize) -> Result<()> {
    let db = rel_mismatch(m.b().row(pos).iter().zip(m.b().row(neg).iter()).map(|(x, y)| (x.conj(), *y)));
    let dc = rel_mismatch(m.c().column(pos).iter().zip(m.c().column(neg).iter()).map(|(x, y)| (x.conj(), *y)));
    if db > PAIRING_TOL || dc > PAIRING_TOL {
        return Err(Error::Structure(format!(
            "states {pos} and {neg} have conjugate poles but non-conjugate B/C (mismatch {:.3e})",
            db.max(dc)
        )));
    }
    Ok(())
}

fn check_real_state(m: &StateSpaceModel, s: usize) -> Result<()> {
    let bmax = m.b().row(s).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let cmax = m.c().column(s).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let bim = m.b().row(s).iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let cim = m.c().column(s).iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if bim > PAIRING_TOL * bmax || cim > PAIRING_TOL * cmax {
        return Err(Error::Structure(format!("real pole at state {s} has complex B/C entries")));
    }
    Ok(())
}

/// Per-frequency accuracy of each RCM family relative to the term it
/// replaces (max entry deviation over max reference entry).
#[derive(Clone, Debug, PartialEq)]
pub struct RcmQuality {
    pub grid: Vec<f64>,
    pub ur: Vec<f64>,
    pub lr: Vec<f64>,
    pub cb: Vec<f64>,
}

impl RcmQuality {
    pub fn max_ur(&self) -> f64 {
        self.ur.iter().copied().fold(0.0, f64::max)
    }
    pub fn max_lr(&self) -> f64 {
        self.lr.iter().copied().fold(0.0, f64::max)
    }
    pub fn max_cb(&self) -> f64 {
        self.cb.iter().copied().fold(0.0, f64::max)
    }
}

/// Checks how well the UR, LR and CB RCMs of `model` match their targets
/// over `grid`. Logs a warning when any deviation exceeds 1%.
pub fn rcm_quality(model: &ModalModel, cfg: &RcmConfig, grid: &[f64]) -> Result<RcmQuality> {
    validate_grid(grid)?;
    let ur_m = ur_rcm_model(model.upper_residual(), cfg)?;
    let lr_m = lr_rcm_model(model.lower_residual(), cfg)?;
    let cb = compute_cb(&build_inband(model))?;
    let ur_ref = model.upper_residual().map(|x| Complex64::new(x, 0.0));
    let ur_scale = max_abs(&ur_ref);
    let cb_scale = cb.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let rel = |dev: f64, scale: f64| if scale > 0.0 { dev / scale } else { 0.0 };
    let mut q = RcmQuality { grid: grid.to_vec(), ur: Vec::new(), lr: Vec::new(), cb: Vec::new() };
    for &w in grid {
        let hu = analysis::eval_frf_at(&ur_m, w)?;
        q.ur.push(rel(max_abs(&(hu - &ur_ref)), ur_scale));
        let lr_ref = model.lower_residual().map(|x| Complex64::new(-x / (w * w), 0.0));
        let hl = analysis::eval_frf_at(&lr_m, w)?;
        q.lr.push(rel(max_abs(&(hl - &lr_ref)), max_abs(&lr_ref)));
        let hc = cb_velocity_closed_form_at(&cb, cfg.omega_cb, cfg.xi_cb, w);
        q.cb.push(rel(max_abs(&hc), cb_scale));
    }
    for (name, v) in [("UR", q.max_ur()), ("LR", q.max_lr()), ("CB", q.max_cb())] {
        if v > RCM_QUALITY_WARN {
            log::warn!("{name} RCMs deviate by {:.2}% in the band; consider a higher RCM frequency", 100.0 * v);
        }
    }
    Ok(q)
}

/// Complete displacement model: in-band modes, LR and UR RCMs and, when
/// `newton` is set, the CB RCMs.
pub fn build_full(model: &ModalModel, cfg: &RcmConfig, newton: bool) -> Result<StateSpaceModel> {
    cfg.validate()?;
    let full = assemble_full(
        &build_inband(model),
        &lr_rcm_model(model.lower_residual(), cfg)?,
        &ur_rcm_model(model.upper_residual(), cfg)?,
    )?;
    if newton {
        impose_newton(&full, cfg)
    } else {
        Ok(full)
    }
}
