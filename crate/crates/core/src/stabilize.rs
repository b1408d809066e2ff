//! Turning an unstable coupled model into a stable one: reflect the unstable
//! poles across the imaginary axis, re-estimate mode shapes and residuals of
//! the reflected pairs by least squares (LSFD) against the original FRFs,
//! rebuild, and re-impose Newton's second law.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::analysis::{concat_block, diagonalize, eval_frf, pair_structure, partition, select_states, PoleGroup};
use crate::error::{Error, Result};
use crate::frf::{jw_pow, rel_rms_deviation, validate_grid, FrfSet};
use crate::linalg::right_pinv_solve;
use crate::modal::{build_full, impose_newton};
use crate::types::{CMat, Domain, ModalModel, RMat, RcmConfig, Representation, StateSpaceModel};

/// Singular values of the design matrix below this fraction of the largest
/// are truncated in the least-squares solve.
pub const PINV_RTOL: f64 = 1e-10;
/// Pairs whose participation factors are this small relative to the largest
/// cannot be re-estimated and are passed through unchanged.
pub const NEGLIGIBLE_FACTOR: f64 = 1e-8;
/// Newton re-enforcement runs when `max|C·B| > NEWTON_TRIGGER·‖C‖_F·‖B‖_F`.
pub const NEWTON_TRIGGER: f64 = 1e-10;
/// Damping ratio given to poles that remain on the imaginary axis after
/// the flip.
pub const MARGINAL_DAMPING: f64 = 1e-6;

/// Response quantity in which the least-squares fit is carried out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Displacement,
    Velocity,
    #[default]
    Acceleration,
}

impl Weighting {
    pub fn domain(self) -> Domain {
        match self {
            Weighting::Displacement => Domain::Displacement,
            Weighting::Velocity => Domain::Velocity,
            Weighting::Acceleration => Domain::Acceleration,
        }
    }

    /// `1`, `jω` or `−ω²`.
    pub fn factor(self, omega: f64) -> Complex64 {
        jw_pow(omega, self.domain().order())
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.domain().fmt(f)
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "displacement" => Ok(Weighting::Displacement),
            "velocity" => Ok(Weighting::Velocity),
            "acceleration" => Ok(Weighting::Acceleration),
            other => Err(Error::InvalidParameter(format!("unknown weighting '{other}'"))),
        }
    }
}

/// Least-squares re-estimation of mode shapes and residual matrices for
/// fixed poles and participation factors.
#[derive(Clone, Debug)]
pub struct LsfdProblem {
    target: FrfSet,
    poles: Vec<Complex64>,
    part_factors: CMat,
    weighting: Weighting,
}

impl LsfdProblem {
    /// `poles` are the `+Im` representatives of stable pairs and
    /// `part_factors` has one row per pole.
    pub fn new(target: FrfSet, poles: Vec<Complex64>, part_factors: CMat, weighting: Weighting) -> Result<Self> {
        if target.n_freqs() == 0 {
            return Err(Error::Dimension("LSFD target has no frequency lines".into()));
        }
        if part_factors.nrows() != poles.len() || part_factors.ncols() != target.shape().1 {
            return Err(Error::Dimension(format!(
                "participation factors are {}×{}, expected {}×{}",
                part_factors.nrows(),
                part_factors.ncols(),
                poles.len(),
                target.shape().1
            )));
        }
        if let Some(p) = poles.iter().find(|p| !(p.re < 0.0 && p.im > 0.0)) {
            return Err(Error::InvalidParameter(format!("LSFD pole {p} is not a stable pair representative")));
        }
        Ok(Self { target, poles, part_factors, weighting })
    }

    pub fn target(&self) -> &FrfSet {
        &self.target
    }
    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }
    pub fn part_factors(&self) -> &CMat {
        &self.part_factors
    }
    pub fn weighting(&self) -> Weighting {
        self.weighting
    }
    pub fn n_modes(&self) -> usize {
        self.poles.len()
    }
}

/// Rows `[a_Re; b_Re]` and `[a_Im; 0]` of the design matrix at one frequency,
/// each `(2n_m + 2n_i) × n_i`, multiplied by the weighting factor `w`.
fn design_block(poles: &[Complex64], l: &CMat, omega: f64, w: Complex64) -> (RMat, RMat) {
    let (n_m, n_i) = (poles.len(), l.ncols());
    let rows = 2 * n_m + 2 * n_i;
    let mut re = RMat::zeros(rows, n_i);
    let mut im = RMat::zeros(rows, n_i);
    let jw = Complex64::new(0.0, omega);
    for (r, &lambda) in poles.iter().enumerate() {
        let da = w / (jw - lambda);
        let db = w / (jw - lambda.conj());
        for j in 0..n_i {
            let a = l[(r, j)] * da;
            let b = l[(r, j)].conj() * db;
            // Coefficient of Re ψ is a + b, of Im ψ is j(a − b).
            let p = a + b;
            let q = Complex64::new(0.0, 1.0) * (a - b);
            re[(r, j)] = p.re;
            im[(r, j)] = p.im;
            re[(n_m + r, j)] = q.re;
            im[(n_m + r, j)] = q.im;
        }
    }
    let lr = w / (-omega * omega);
    for j in 0..n_i {
        re[(2 * n_m + j, j)] = lr.re;
        im[(2 * n_m + j, j)] = lr.im;
        re[(2 * n_m + n_i + j, j)] = w.re;
        im[(2 * n_m + n_i + j, j)] = w.im;
    }
    (re, im)
}

/// Design matrix `Ã`, `(2n_m + 2n_i) × (2n_i·n_f)`: the real-part blocks of
/// every frequency followed by the imaginary-part blocks.
///
/// Row order is `[Re ψ (n_m) | Im ψ (n_m) | LR (n_i) | UR (n_i)]`. Each block
/// carries the weighting factor (`1`, `jω` or `−ω²`), so for real weightings
/// the residual rows are `[w·I/(−ω²); w·I]` in the real block and zero in the
/// imaginary block.
pub fn lsfd_design_matrix(p: &LsfdProblem) -> Result<RMat> {
    let grid = p.target.grid();
    validate_grid(grid)?;
    let (n_m, n_i, n_f) = (p.n_modes(), p.part_factors.ncols(), grid.len());
    let rows = 2 * n_m + 2 * n_i;
    let blocks: Vec<(RMat, RMat)> =
        grid.par_iter().map(|&w| design_block(&p.poles, &p.part_factors, w, p.weighting.factor(w))).collect();
    let mut a = RMat::zeros(rows, 2 * n_i * n_f);
    for (f, (re, im)) in blocks.iter().enumerate() {
        a.view_mut((0, f * n_i), (rows, n_i)).copy_from(re);
        a.view_mut((0, (n_f + f) * n_i), (rows, n_i)).copy_from(im);
    }
    Ok(a)
}

/// Target matrix `H̃ = [Re H_1 … Re H_nf | Im H_1 … Im H_nf]`, with the
/// target converted into the weighting domain.
fn target_matrix(p: &LsfdProblem) -> RMat {
    let grid = p.target.grid();
    let (n_o, n_i) = p.target.shape();
    let n_f = grid.len();
    let shift = p.weighting.domain().order() - p.target.domain().order();
    let mut h = RMat::zeros(n_o, 2 * n_i * n_f);
    for (f, (&w, hf)) in grid.iter().zip(p.target.values()).enumerate() {
        let hw = hf * jw_pow(w, shift);
        h.view_mut((0, f * n_i), (n_o, n_i)).copy_from(&hw.map(|z| z.re));
        h.view_mut((0, (n_f + f) * n_i), (n_o, n_i)).copy_from(&hw.map(|z| z.im));
    }
    h
}

/// Output of [`lsfd_solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct LsfdSolution {
    pub mode_shapes: CMat,
    pub lower_residual: RMat,
    pub upper_residual: RMat,
    /// Effective rank of the design matrix.
    pub rank: usize,
}

/// `[Υ | LR | UR] = H̃·Ã⁺` with `Υ = [Re Ψ | Im Ψ]`.
///
/// Rows of `Ã` are scaled to unit norm before the pseudo-inverse, since the
/// modal, `1/ω²` and constant rows differ by many orders of magnitude; the
/// scaling is undone on the solution.
pub fn lsfd_solve(p: &LsfdProblem) -> Result<LsfdSolution> {
    let a = lsfd_design_matrix(p)?;
    let h = target_matrix(p);
    let (n_m, n_i) = (p.n_modes(), p.part_factors.ncols());
    let required = 2 * n_m + 2 * n_i;
    let scale: Vec<f64> = a.row_iter().map(|r| r.norm()).map(|n| if n > 0.0 { 1.0 / n } else { 1.0 }).collect();
    let mut a_eq = a;
    for (i, mut row) in a_eq.row_iter_mut().enumerate() {
        row *= scale[i];
    }
    let (mut x, rank) = right_pinv_solve(&h, &a_eq, PINV_RTOL)?;
    if rank < required {
        return Err(Error::RankDeficient { rank, required });
    }
    for (i, mut col) in x.column_iter_mut().enumerate() {
        col *= scale[i];
    }
    let n_o = h.nrows();
    let mode_shapes = CMat::from_fn(n_o, n_m, |i, r| Complex64::new(x[(i, r)], x[(i, n_m + r)]));
    let lower_residual = x.columns(2 * n_m, n_i).into_owned();
    let upper_residual = x.columns(2 * n_m + n_i, n_i).into_owned();
    Ok(LsfdSolution { mode_shapes, lower_residual, upper_residual, rank })
}

/// `H_target = H_ut − H_rp`: what the re-estimated pairs have to reproduce
/// once the reflected real poles are accounted for.
pub fn target_frf(unstable_frf: &FrfSet, real_pole_model_frf: &FrfSet) -> Result<FrfSet> {
    unstable_frf.sub(real_pole_model_frf)
}

/// Reflects every pole of a diagonal model across the imaginary axis:
/// `Re λ → −Re λ` with `Im λ`, `B` and `C` unchanged. This is the same as
/// negating the damping ratio at fixed natural frequency.
pub fn flip_damping(unstable: &StateSpaceModel) -> Result<StateSpaceModel> {
    if unstable.representation() != Representation::DiagonalComplex {
        return Err(Error::Structure("flip_damping requires a diagonal-complex model".into()));
    }
    let poles = unstable.diagonal_poles();
    if let Some(p) = poles.iter().find(|p| p.re < 0.0) {
        return Err(Error::InvalidParameter(format!("pole {p} is already stable; partition the model first")));
    }
    let flipped: Vec<Complex64> = poles.iter().map(|p| Complex64::new(-p.re, p.im)).collect();
    let a = CMat::from_diagonal(&DVector::from_vec(flipped));
    Ok(StateSpaceModel::new(
        a,
        unstable.b().clone(),
        unstable.c().clone(),
        unstable.d().clone(),
        unstable.domain(),
        Representation::DiagonalComplex,
    )?
    .with_provenance(tag(unstable.provenance(), "stbz")))
}

fn tag(prov: &str, t: &str) -> String {
    if prov.is_empty() {
        t.to_string()
    } else {
        format!("{prov},{t}")
    }
}

/// Settings of [`stabilize`].
#[derive(Clone, Debug, PartialEq)]
pub struct StabilizeOptions {
    pub weighting: Weighting,
    /// RCM settings for the rebuilt pairs and the Newton RCMs. When `None`,
    /// `ω_UR = ω_CB = 5·max|Im λ|`, `ω_LR = min(grid)/50`, all `ξ = 0.1`.
    pub rcm: Option<RcmConfig>,
}

impl Default for StabilizeOptions {
    fn default() -> Self {
        Self { weighting: Weighting::Acceleration, rcm: None }
    }
}

/// Bookkeeping and accuracy of a stabilization run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizeDiagnostics {
    pub n_poles: usize,
    pub n_unstable: usize,
    /// Unstable poles that became stable real poles (not re-estimated).
    pub n_real_stabilized: usize,
    /// Reflected pairs passed through without re-estimation because their
    /// participation factors vanish.
    pub n_passthrough_pairs: usize,
    /// Relative RMS deviation of the output FRFs from the input FRFs over the
    /// grid, evaluated in the weighting domain.
    pub frf_rel_rms_deviation: f64,
    pub deviation_domain: Domain,
    pub n_states_in: usize,
    pub n_states_out: usize,
    pub no_op: bool,
}

impl StabilizeDiagnostics {
    /// States added on top of the input, as opposed to the `6·min(n_o, n_i)`
    /// bound for residual and Newton RCMs.
    pub fn added_states(&self) -> isize {
        self.n_states_out as isize - self.n_states_in as isize
    }
}

/// Stable model and diagnostics.
#[derive(Clone, Debug)]
pub struct Stabilized {
    pub model: StateSpaceModel,
    pub diagnostics: StabilizeDiagnostics,
}

/// RCM settings derived from the model's poles and the grid.
pub fn default_rcm_config(poles: &[Complex64], grid: &[f64]) -> Result<RcmConfig> {
    validate_grid(grid)?;
    let w_max = poles.iter().map(|p| p.im.abs()).fold(0.0, f64::max).max(grid[grid.len() - 1]);
    RcmConfig::new(grid[0] / 50.0, 0.1, 5.0 * w_max, 0.1, 5.0 * w_max, 0.1)
}

fn deviation(out: &StateSpaceModel, input: &StateSpaceModel, grid: &[f64], weighting: Weighting) -> Result<f64> {
    let k = weighting.domain().order();
    let reweight = |frf: FrfSet| -> Result<FrfSet> {
        let vals = frf.grid().iter().zip(frf.values()).map(|(&w, h)| h * jw_pow(w, k)).collect();
        frf.with_values(vals)
    };
    rel_rms_deviation(&reweight(eval_frf(out, grid)?)?, &reweight(eval_frf(input, grid)?)?)
}

/// Replaces the unstable poles of a displacement model by stable ones while
/// keeping its FRFs over `grid` (rad/s) as close as possible.
///
/// Steps: diagonalize; split into stable and unstable (`Re λ ≥ 0`) parts;
/// reflect the unstable poles; keep reflected real poles (and pairs with
/// vanishing participation factors) as they are; re-estimate mode shapes
/// and residuals of the reflected pairs by LSFD against the unstable part's
/// FRFs minus the kept poles' FRFs; rebuild those pairs with UR/LR RCMs;
/// concatenate `[stable | rebuilt | kept]` and append Newton RCMs when
/// `C·B` is no longer zero.
pub fn stabilize(coupled: &StateSpaceModel, grid: &[f64], opts: &StabilizeOptions) -> Result<Stabilized> {
    if coupled.domain() != Domain::Displacement {
        return Err(Error::Domain(format!("stabilize expects a displacement model, got {}", coupled.domain())));
    }
    validate_grid(grid)?;
    let dm = diagonalize(coupled)?;
    let all_poles = dm.diagonal_poles();
    let (stable, unstable) = partition(&dm, |d| d.value.re < 0.0)?;
    let n_unstable = unstable.n_states();
    let mut diag = StabilizeDiagnostics {
        n_poles: all_poles.len(),
        n_unstable,
        n_real_stabilized: 0,
        n_passthrough_pairs: 0,
        frf_rel_rms_deviation: 0.0,
        deviation_domain: opts.weighting.domain(),
        n_states_in: coupled.n_states(),
        n_states_out: coupled.n_states(),
        no_op: n_unstable == 0,
    };
    if n_unstable == 0 {
        log::info!("all {} poles are stable; nothing to do", all_poles.len());
        return Ok(Stabilized { model: coupled.clone(), diagnostics: diag });
    }
    let cfg = match opts.rcm {
        Some(c) => c,
        None => default_rcm_config(&all_poles, grid)?,
    };

    let flipped = floor_marginal(&flip_damping(&unstable)?)?;
    let groups = complete_pairs(&flipped)?;
    let poles = groups.model.diagonal_poles();
    let b = groups.model.b();
    let factor_norm = |k: usize| b.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let max_factor = groups.pairs.iter().map(|&(pos, _)| factor_norm(pos)).fold(0.0, f64::max);

    let mut fitted = Vec::new();
    let mut kept: Vec<usize> = groups.real.clone();
    for &(pos, neg) in &groups.pairs {
        if factor_norm(pos) <= NEGLIGIBLE_FACTOR * max_factor {
            kept.push(pos);
            kept.push(neg);
            diag.n_passthrough_pairs += 1;
        } else {
            fitted.push(pos);
        }
    }
    diag.n_real_stabilized = groups.real.len();

    let kept_model = select_states(&groups.model, &kept)?;
    let mut parts = vec![stable];
    if !fitted.is_empty() {
        let target = target_frf(&eval_frf(&unstable, grid)?, &eval_frf(&kept_model, grid)?)?;
        let problem = LsfdProblem::new(
            target,
            fitted.iter().map(|&k| poles[k]).collect(),
            b.select_rows(&fitted),
            opts.weighting,
        )?;
        let sol = lsfd_solve(&problem)?;
        let modal = ModalModel::new(
            problem.poles().to_vec(),
            sol.mode_shapes,
            problem.part_factors().clone(),
            sol.lower_residual,
            sol.upper_residual,
        )?;
        parts.push(build_full(&modal, &cfg, false)?.with_provenance("LSFD"));
    } else {
        // Residuals of the target are still needed when every reflected
        // pole is kept; with nothing to fit there is nothing to add.
        log::info!("no reflected pairs to re-estimate");
    }
    parts.push(kept_model);
    let joined = concat_block(&parts)?;
    let c_norm = joined.c().norm();
    let b_norm = joined.b().norm();
    let model =
        if joined.max_abs_cb() > NEWTON_TRIGGER * c_norm * b_norm { impose_newton(&joined, &cfg)? } else { joined };
    let model = model.with_provenance("stable");
    if let Some(p) = model.diagonal_poles().iter().find(|p| p.re.is_nan() || p.re >= 0.0) {
        return Err(Error::Structure(format!("stabilized model still has pole {p}")));
    }
    diag.n_states_out = model.n_states();
    diag.frf_rel_rms_deviation = deviation(&model, coupled, grid, opts.weighting)?;
    log::info!(
        "{} of {} poles were unstable; {:+} states; FRF deviation {:.3e} ({})",
        n_unstable,
        diag.n_poles,
        diag.added_states(),
        diag.frf_rel_rms_deviation,
        diag.deviation_domain
    );
    Ok(Stabilized { model, diagnostics: diag })
}

/// Moves poles left on the imaginary axis slightly into the left half-plane.
fn floor_marginal(m: &StateSpaceModel) -> Result<StateSpaceModel> {
    let poles = m.diagonal_poles();
    if poles.iter().all(|p| p.re < 0.0) {
        return Ok(m.clone());
    }
    let fixed: Vec<Complex64> = poles
        .iter()
        .map(|&p| {
            if p.re < 0.0 {
                p
            } else {
                log::warn!("pole {p} is marginally stable; giving it damping ratio {MARGINAL_DAMPING:e}");
                let wn = p.norm().max(f64::MIN_POSITIVE);
                Complex64::new(-MARGINAL_DAMPING * wn, p.im)
            }
        })
        .collect();
    let a = CMat::from_diagonal(&DVector::from_vec(fixed));
    Ok(StateSpaceModel::new(
        a,
        m.b().clone(),
        m.c().clone(),
        m.d().clone(),
        m.domain(),
        Representation::DiagonalComplex,
    )?
    .with_provenance(m.provenance().to_string()))
}

struct Groups {
    model: StateSpaceModel,
    real: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

/// Real states and conjugate pairs of a diagonal model. A complex pole
/// without a partner gets one appended (conjugate pole, `B` row and `C`
/// column), with a warning.
fn complete_pairs(m: &StateSpaceModel) -> Result<Groups> {
    let poles = m.diagonal_poles();
    let mut real = Vec::new();
    let mut pairs = Vec::new();
    let mut extra = Vec::new();
    for g in pair_structure(&poles) {
        match g {
            PoleGroup::Real(k) => real.push(k),
            PoleGroup::Pair { pos, neg } => pairs.push((pos, neg)),
            PoleGroup::Unpaired(k) => {
                log::warn!("pole {} has no conjugate partner; adding one", poles[k]);
                extra.push(k);
            }
        }
    }
    if extra.is_empty() {
        return Ok(Groups { model: m.clone(), real, pairs });
    }
    let n = m.n_states();
    let total = n + extra.len();
    let mut a = CMat::zeros(total, total);
    let mut b = CMat::zeros(total, m.n_inputs());
    let mut c = CMat::zeros(m.n_outputs(), total);
    a.view_mut((0, 0), (n, n)).copy_from(m.a());
    b.view_mut((0, 0), (n, m.n_inputs())).copy_from(m.b());
    c.view_mut((0, 0), (m.n_outputs(), n)).copy_from(m.c());
    for (i, &k) in extra.iter().enumerate() {
        let s = n + i;
        a[(s, s)] = poles[k].conj();
        b.set_row(s, &m.b().row(k).map(|z| z.conj()));
        c.set_column(s, &m.c().column(k).map(|z| z.conj()));
        if poles[k].im > 0.0 {
            pairs.push((k, s));
        } else {
            pairs.push((s, k));
        }
    }
    let model = StateSpaceModel::new(a, b, c, m.d().clone(), m.domain(), Representation::DiagonalComplex)?
        .with_provenance(m.provenance().to_string());
    Ok(Groups { model, real, pairs })
}
