//! Generic state-space machinery: FRF evaluation, domain conversion,
//! diagonalization, pole classification, partitioning and concatenation.

use nalgebra::{DVector, LU};
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::frf::{validate_grid, FrfSet};
use crate::linalg;
use crate::types::{max_abs, CMat, Domain, PoleClass, PoleDescriptor, Representation, StateSpaceModel};

/// `|Im λ| ≤ REALNESS_TOL · max(1, |λ|)` classifies a pole as real.
pub const REALNESS_TOL: f64 = 1e-9;
/// Relative mismatch allowed when matching conjugate partners.
pub const PAIRING_TOL: f64 = 1e-8;
/// Eigenvector matrices with a larger 2-norm condition number are rejected.
pub const MAX_EIGVEC_CONDITION: f64 = 1e12;

const RESONANCE_TOL: f64 = 1e-12;

/// `H(jω) = C (jωI − A)⁻¹ B + D` on every grid point.
pub fn eval_frf(m: &StateSpaceModel, grid: &[f64]) -> Result<FrfSet> {
    validate_grid(grid)?;
    let values = grid.par_iter().map(|&w| eval_frf_at(m, w)).collect::<Result<Vec<_>>>()?;
    FrfSet::new(grid.to_vec(), values, m.domain())
}

/// FRF matrix at a single angular frequency; `ω = 0` is allowed.
pub fn eval_frf_at(m: &StateSpaceModel, omega: f64) -> Result<CMat> {
    let jw = Complex64::new(0.0, omega);
    let n = m.n_states();
    let mut h = m.d().clone();
    if n == 0 {
        return Ok(h);
    }
    if m.representation() == Representation::DiagonalComplex {
        let (b, c) = (m.b(), m.c());
        for k in 0..n {
            let lambda = m.a()[(k, k)];
            let gap = jw - lambda;
            if gap.norm() <= RESONANCE_TOL * lambda.norm().max(1.0) {
                return Err(Error::Singular { what: format!("jω coincides with pole {lambda}"), omega: Some(omega) });
            }
            let g = gap.inv();
            for j in 0..h.ncols() {
                let bj = b[(k, j)] * g;
                if bj == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for i in 0..h.nrows() {
                    h[(i, j)] += c[(i, k)] * bj;
                }
            }
        }
        return Ok(h);
    }
    let mut sys = -m.a().clone();
    for k in 0..n {
        sys[(k, k)] += jw;
    }
    let lu = LU::new(sys);
    let u = lu.u();
    let dmax = u.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dmin = u.diagonal().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if dmin <= RESONANCE_TOL * dmax.max(1.0) * f64::EPSILON.sqrt() {
        return Err(Error::Singular { what: "jωI − A is singular".into(), omega: Some(omega) });
    }
    let x =
        lu.solve(m.b()).ok_or_else(|| Error::Singular { what: "jωI − A is singular".into(), omega: Some(omega) })?;
    h += m.c() * x;
    Ok(h)
}

fn append_tag(prov: &str, tag: &str) -> String {
    if prov.is_empty() {
        tag.to_string()
    } else {
        format!("{prov}{tag}")
    }
}

/// Velocity (or acceleration) model from a displacement (or velocity) one:
/// `A' = A`, `B' = B`, `C' = C·A`, `D' = C·B`.
///
/// A nonzero `D` would add an improper `jω·D` term, so the input `D` must be
/// negligible against the scale of `C·B`.
pub fn differentiate(m: &StateSpaceModel) -> Result<StateSpaceModel> {
    let domain = match m.domain() {
        Domain::Displacement | Domain::Velocity => m.domain().shifted(1)?,
        Domain::Acceleration => return Err(Error::Domain("cannot differentiate an acceleration model".into())),
    };
    let dmax = max_abs(m.d());
    if dmax > 0.0 && dmax > 1e-10 * m.cb_scale() {
        return Err(Error::Domain(format!(
            "feed-through {dmax:.3e} is not negligible; the derivative model would be improper"
        )));
    }
    let c = m.c() * m.a();
    let d = m.c() * m.b();
    Ok(StateSpaceModel::new(m.a().clone(), m.b().clone(), c, d, domain, m.representation())?
        .with_provenance(append_tag(m.provenance(), "'")))
}

/// Inverse of [`differentiate`]: `C' = C·A⁻¹`, `D' = 0`.
///
/// Requires `D = C·A⁻¹·B` so that the integrated response has no pole at the
/// origin.
pub fn integrate(m: &StateSpaceModel) -> Result<StateSpaceModel> {
    let domain = match m.domain() {
        Domain::Velocity | Domain::Acceleration => m.domain().shifted(-1)?,
        Domain::Displacement => return Err(Error::Domain("cannot integrate a displacement model".into())),
    };
    let n = m.n_states();
    let c_new = if m.representation() == Representation::DiagonalComplex {
        let poles = m.diagonal_poles();
        let pmax = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
        if let Some(p) = poles.iter().find(|p| p.norm() <= 1e-12 * pmax.max(f64::MIN_POSITIVE)) {
            return Err(Error::Singular { what: format!("state matrix has a pole at the origin ({p})"), omega: None });
        }
        let mut c = m.c().clone();
        for k in 0..n {
            let inv = poles[k].inv();
            for i in 0..c.nrows() {
                c[(i, k)] *= inv;
            }
        }
        c
    } else {
        let lu = LU::new(m.a().transpose());
        let dmax = lu.u().diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max);
        let dmin = lu.u().diagonal().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if n > 0 && dmin <= 1e-13 * dmax {
            return Err(Error::Singular { what: "state matrix is singular".into(), omega: None });
        }
        let x = lu
            .solve(&m.c().transpose())
            .ok_or_else(|| Error::Singular { what: "state matrix is singular".into(), omega: None })?;
        x.transpose()
    };
    let dc = &c_new * m.b();
    let scale = max_abs(&dc).max(max_abs(m.d()));
    let mismatch = max_abs(&(m.d() - &dc));
    if mismatch > 1e-8 * scale && mismatch > 0.0 {
        return Err(Error::Domain(format!(
            "D differs from C·A⁻¹·B by {mismatch:.3e}; the integral would have a pole at the origin"
        )));
    }
    Ok(StateSpaceModel::strictly_proper(m.a().clone(), m.b().clone(), c_new, domain, m.representation())?
        .with_provenance(append_tag(m.provenance(), "∫")))
}

/// Natural frequency, damping ratio and class of a pole.
///
/// `ω_n = |λ|` and `ξ = −Re(λ)/|λ|`; for complex pairs this is the unique
/// solution of `−ξω_n = Re λ`, `ω_n√(1−ξ²) = |Im λ|`, `ω_n ≥ 0`, and for real
/// poles it gives `ξ = ∓1`.
pub fn pole_params(lambda: Complex64) -> Result<PoleDescriptor> {
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::InvalidParameter(format!("pole {lambda} is not finite")));
    }
    let wn = lambda.norm();
    if wn == 0.0 {
        return Err(Error::InvalidParameter("pole at the origin has no damping ratio".into()));
    }
    let xi = -lambda.re / wn;
    let real = lambda.im.abs() <= REALNESS_TOL * wn.max(1.0);
    let stable = lambda.re < 0.0;
    let class = match (real, stable) {
        (false, true) => PoleClass::StablePair,
        (false, false) => PoleClass::UnstablePair,
        (true, true) => PoleClass::StableReal,
        (true, false) => PoleClass::UnstableReal,
    };
    Ok(PoleDescriptor { value: lambda, natural_freq: wn, damping_ratio: xi, class })
}

/// Pole recomputed from a natural frequency and (sign-carrying) damping
/// ratio, keeping the sign of the imaginary part of `like`.
pub fn pole_from_params(wn: f64, xi: f64, imag_sign: f64) -> Complex64 {
    let im = if xi.abs() >= 1.0 { 0.0 } else { wn * (1.0 - xi * xi).sqrt() };
    Complex64::new(-xi * wn, imag_sign.signum() * im)
}

/// Poles of a model: the diagonal for diagonal models, eigenvalues otherwise.
pub fn poles(m: &StateSpaceModel) -> Result<Vec<Complex64>> {
    if m.representation() == Representation::DiagonalComplex {
        Ok(m.diagonal_poles())
    } else {
        linalg::eigenvalues(m.a())
    }
}

/// Groups of states in a diagonal model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoleGroup {
    Real(usize),
    /// State indices of the `+Im` and `−Im` members.
    Pair {
        pos: usize,
        neg: usize,
    },
    /// Complex pole whose conjugate partner is missing.
    Unpaired(usize),
}

/// Matches every `+Im` pole with its nearest conjugate among the `−Im`
/// poles. Poles without a partner within [`PAIRING_TOL`] are reported as
/// [`PoleGroup::Unpaired`].
pub fn pair_structure(poles: &[Complex64]) -> Vec<PoleGroup> {
    let mut groups = Vec::new();
    let mut used = vec![false; poles.len()];
    let is_real = |p: &Complex64| p.im.abs() <= REALNESS_TOL * p.norm().max(1.0);
    for (i, p) in poles.iter().enumerate() {
        if is_real(p) {
            used[i] = true;
        }
    }
    for (i, p) in poles.iter().enumerate() {
        if used[i] {
            if is_real(p) {
                groups.push(PoleGroup::Real(i));
            }
            continue;
        }
        // Match from whichever member of the pair comes first.
        let target = p.conj();
        let best = poles
            .iter()
            .enumerate()
            .filter(|(j, q)| *j != i && !used[*j] && q.im.signum() != p.im.signum())
            .map(|(j, q)| (j, (q - target).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        used[i] = true;
        match best {
            Some((j, dist)) if dist <= PAIRING_TOL * p.norm().max(1.0) => {
                used[j] = true;
                if p.im > 0.0 {
                    groups.push(PoleGroup::Pair { pos: i, neg: j });
                } else {
                    groups.push(PoleGroup::Pair { pos: j, neg: i });
                }
            }
            _ => groups.push(PoleGroup::Unpaired(i)),
        }
    }
    groups
}

/// Modal (diagonal) form `A' = T⁻¹AT`, `B' = T⁻¹B`, `C' = CT`.
///
/// Eigenvectors are scaled to unit 2-norm. For real models the conjugate
/// structure is made exact: real poles get real eigenvectors, and each
/// complex pair is stored as adjacent `(λ, λ*)` states with conjugate
/// eigenvectors, so the output is a valid block modal form.
pub fn diagonalize(m: &StateSpaceModel) -> Result<StateSpaceModel> {
    if m.representation() == Representation::DiagonalComplex {
        return Ok(m.clone());
    }
    let n = m.n_states();
    let e = linalg::eig(m.a())?;
    let (values, t) = if m.is_real() { conjugate_structure(&e)? } else { (e.values.clone(), e.vectors.clone()) };

    let cond = linalg::condition_number(&t);
    if cond.is_nan() || cond > MAX_EIGVEC_CONDITION {
        return Err(Error::Defective { condition: cond, cluster: closest_cluster(&values) });
    }
    let lu = LU::new(t.clone());
    let mut b = lu
        .solve(m.b())
        .ok_or_else(|| Error::Defective { condition: f64::INFINITY, cluster: closest_cluster(&values) })?;
    let c = m.c() * &t;
    if m.is_real() {
        for g in pair_structure(&values) {
            if let PoleGroup::Pair { pos, neg } = g {
                let row = b.row(pos).map(|z| z.conj());
                b.set_row(neg, &row);
            }
        }
        for g in pair_structure(&values) {
            if let PoleGroup::Real(k) = g {
                for z in b.row_mut(k).iter_mut() {
                    z.im = 0.0;
                }
            }
        }
    }
    let a = CMat::from_diagonal(&DVector::from_vec(values));
    debug_assert_eq!(a.nrows(), n);
    Ok(StateSpaceModel::new(a, b, c, m.d().clone(), m.domain(), Representation::DiagonalComplex)?
        .with_provenance(append_tag(m.provenance(), ",df")))
}

fn closest_cluster(values: &[Complex64]) -> String {
    let mut best = (f64::INFINITY, 0, 0);
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            let d = (values[i] - values[j]).norm() / values[i].norm().max(1.0);
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    if values.len() < 2 {
        return format!("{values:?}");
    }
    format!("{} and {}", values[best.1], values[best.2])
}

/// Reorders eigenpairs of a real matrix into exact conjugate structure.
fn conjugate_structure(e: &linalg::Eigen) -> Result<(Vec<Complex64>, CMat)> {
    let n = e.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| e.values[i].norm().total_cmp(&e.values[j].norm()));
    let sorted: Vec<Complex64> = order.iter().map(|&i| e.values[i]).collect();
    let groups = pair_structure(&sorted);

    let mut values = Vec::with_capacity(n);
    let mut cols: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    for g in groups {
        match g {
            PoleGroup::Real(k) => {
                let v = e.vectors.column(order[k]).clone_owned();
                values.push(Complex64::new(sorted[k].re, 0.0));
                cols.push(realify(v));
            }
            PoleGroup::Pair { pos, neg } => {
                let lam = (sorted[pos] + sorted[neg].conj()) * 0.5;
                let v = e.vectors.column(order[pos]).clone_owned();
                values.push(lam);
                values.push(lam.conj());
                cols.push(v.clone());
                cols.push(v.map(|z| z.conj()));
            }
            PoleGroup::Unpaired(k) => {
                return Err(Error::Structure(format!(
                    "eigenvalue {} of a real matrix has no conjugate partner within {PAIRING_TOL:e}",
                    sorted[k]
                )));
            }
        }
    }
    let t = CMat::from_columns(&cols);
    Ok((values, t))
}

/// Real eigenvector of a real eigenvalue: remove the common phase, keep the
/// real part and renormalize.
fn realify(v: DVector<Complex64>) -> DVector<Complex64> {
    let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(Complex64::new(1.0, 0.0));
    let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { Complex64::new(1.0, 0.0) };
    let r: DVector<f64> = v.map(|z| (z * phase).re);
    let norm = r.norm();
    r.map(|x| Complex64::new(if norm > 0.0 { x / norm } else { x }, 0.0))
}

/// Splits a diagonal model into (states whose pole satisfies `pred`, the rest).
pub fn partition(
    m: &StateSpaceModel,
    pred: impl Fn(&PoleDescriptor) -> bool,
) -> Result<(StateSpaceModel, StateSpaceModel)> {
    if m.representation() != Representation::DiagonalComplex {
        return Err(Error::Structure("partition requires a diagonal-complex model".into()));
    }
    let mut yes = Vec::new();
    let mut no = Vec::new();
    for (k, &p) in m.diagonal_poles().iter().enumerate() {
        if pred(&pole_params(p)?) {
            yes.push(k);
        } else {
            no.push(k);
        }
    }
    let first = select_states(m, &yes)?;
    // The feed-through belongs to exactly one side.
    let second = select_states(m, &no)?;
    let zero_d = CMat::zeros(m.n_outputs(), m.n_inputs());
    let first = StateSpaceModel::new(
        first.a().clone(),
        first.b().clone(),
        first.c().clone(),
        m.d().clone(),
        m.domain(),
        Representation::DiagonalComplex,
    )?
    .with_provenance(first.provenance());
    let second = StateSpaceModel::new(
        second.a().clone(),
        second.b().clone(),
        second.c().clone(),
        zero_d,
        m.domain(),
        Representation::DiagonalComplex,
    )?
    .with_provenance(second.provenance());
    Ok((first, second))
}

/// Subset of the states of a diagonal model, with `D = 0`.
pub fn select_states(m: &StateSpaceModel, states: &[usize]) -> Result<StateSpaceModel> {
    if m.representation() != Representation::DiagonalComplex {
        return Err(Error::Structure("state selection requires a diagonal-complex model".into()));
    }
    crate::types::check_indices(states, m.n_states(), "state")?;
    let poles: Vec<Complex64> = states.iter().map(|&k| m.a()[(k, k)]).collect();
    let a = CMat::from_diagonal(&DVector::from_vec(poles));
    let b = m.b().select_rows(states);
    let c = m.c().select_columns(states);
    Ok(StateSpaceModel::strictly_proper(a, b, c, m.domain(), Representation::DiagonalComplex)?
        .with_provenance(m.provenance().to_string()))
}

/// Parallel connection: block-diagonal A, stacked B, concatenated C, summed D.
pub fn concat_block(models: &[StateSpaceModel]) -> Result<StateSpaceModel> {
    let first = models.first().ok_or_else(|| Error::Dimension("nothing to concatenate".into()))?;
    let (n_o, n_i, domain) = (first.n_outputs(), first.n_inputs(), first.domain());
    for m in models {
        if m.n_outputs() != n_o || m.n_inputs() != n_i {
            return Err(Error::Dimension(format!(
                "cannot concatenate {}×{} with {}×{} models",
                m.n_outputs(),
                m.n_inputs(),
                n_o,
                n_i
            )));
        }
        if m.domain() != domain {
            return Err(Error::Domain(format!("cannot concatenate {} and {} models", m.domain(), domain)));
        }
    }
    let n: usize = models.iter().map(|m| m.n_states()).sum();
    let mut a = CMat::zeros(n, n);
    let mut b = CMat::zeros(n, n_i);
    let mut c = CMat::zeros(n_o, n);
    let mut d = CMat::zeros(n_o, n_i);
    let mut off = 0;
    for m in models {
        let k = m.n_states();
        a.view_mut((off, off), (k, k)).copy_from(m.a());
        b.view_mut((off, 0), (k, n_i)).copy_from(m.b());
        c.view_mut((0, off), (n_o, k)).copy_from(m.c());
        d += m.d();
        off += k;
    }
    let all_diag =
        models.iter().filter(|m| m.n_states() > 0).all(|m| m.representation() == Representation::DiagonalComplex);
    let all_real = models.iter().all(|m| m.is_real());
    let representation = if all_diag {
        Representation::DiagonalComplex
    } else if all_real {
        Representation::RealValued
    } else {
        Representation::General
    };
    let prov = models.iter().map(|m| m.provenance()).filter(|p| !p.is_empty()).collect::<Vec<_>>().join("|");
    Ok(StateSpaceModel::new(a, b, c, d, domain, representation)?.with_provenance(prov))
}

/// CSV rows `re,im,omega_n_rad_s,xi,class` for every pole, plus the count of
/// unstable ones.
pub fn poles_report(poles: &[Complex64]) -> Result<(String, usize)> {
    let mut out = String::from("re,im,omega_n_rad_s,xi,class\n");
    let mut unstable = 0;
    for &p in poles {
        let d = pole_params(p)?;
        if !d.class.is_stable() {
            unstable += 1;
        }
        writeln!(out, "{:e},{:e},{:e},{:e},{}", p.re, p.im, d.natural_freq, d.damping_ratio, d.class.as_str())
            .expect("writing to a String");
    }
    Ok((out, unstable))
}
