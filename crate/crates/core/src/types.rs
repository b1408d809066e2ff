//! Domain value types shared by every stage of the pipeline.
//!
//! All types validate their dimensions at construction and are immutable
//! afterwards. Angular frequencies are rad/s throughout.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

/// Response quantity of a model or FRF set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Displacement,
    Velocity,
    Acceleration,
}

impl Domain {
    /// Number of time differentiations from displacement.
    pub fn order(self) -> i32 {
        match self {
            Domain::Displacement => 0,
            Domain::Velocity => 1,
            Domain::Acceleration => 2,
        }
    }

    fn from_order(order: i32) -> Option<Self> {
        match order {
            0 => Some(Domain::Displacement),
            1 => Some(Domain::Velocity),
            2 => Some(Domain::Acceleration),
            _ => None,
        }
    }

    /// Domain reached after `k` time differentiations (negative `k` integrates).
    pub fn shifted(self, k: i32) -> Result<Self> {
        Domain::from_order(self.order() + k)
            .ok_or_else(|| Error::Domain(format!("cannot shift {self} by {k} differentiation steps")))
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Domain::Displacement => "displacement",
            Domain::Velocity => "velocity",
            Domain::Acceleration => "acceleration",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "displacement" => Ok(Domain::Displacement),
            "velocity" => Ok(Domain::Velocity),
            "acceleration" => Ok(Domain::Acceleration),
            other => Err(Error::InvalidParameter(format!("unknown domain '{other}'"))),
        }
    }
}

/// Structural form of the state matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    DiagonalComplex,
    RealValued,
    General,
}

/// Modal parameters of a structure: in-band poles with their mode shapes and
/// participation factors, plus lower and upper residual matrices.
///
/// Each underdamped mode is stored once, by the member of its conjugate pair
/// with positive imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalModel {
    poles: Vec<Complex64>,
    part_factors: CMat,
    mode_shapes: CMat,
    lower_residual: RMat,
    upper_residual: RMat,
}

impl ModalModel {
    pub fn new(
        poles: Vec<Complex64>,
        mode_shapes: CMat,
        part_factors: CMat,
        lower_residual: RMat,
        upper_residual: RMat,
    ) -> Result<Self> {
        let n_m = poles.len();
        let (n_o, n_i) = lower_residual.shape();
        if upper_residual.shape() != (n_o, n_i) {
            return Err(Error::Dimension(format!(
                "upper residual is {:?}, lower residual is {:?}",
                upper_residual.shape(),
                (n_o, n_i)
            )));
        }
        if mode_shapes.shape() != (n_o, n_m) {
            return Err(Error::Dimension(format!(
                "mode shapes are {:?}, expected {:?}",
                mode_shapes.shape(),
                (n_o, n_m)
            )));
        }
        if part_factors.shape() != (n_m, n_i) {
            return Err(Error::Dimension(format!(
                "participation factors are {:?}, expected {:?}",
                part_factors.shape(),
                (n_m, n_i)
            )));
        }
        for (r, p) in poles.iter().enumerate() {
            if !(p.re.is_finite() && p.im.is_finite()) {
                return Err(Error::InvalidParameter(format!("pole {r} is not finite")));
            }
            if p.im <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "pole {r} = {p} must have strictly positive imaginary part"
                )));
            }
        }
        let finite = mode_shapes.iter().chain(part_factors.iter()).all(|z| z.re.is_finite() && z.im.is_finite())
            && lower_residual.iter().chain(upper_residual.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("modal model contains non-finite entries".into()));
        }
        Ok(Self { poles, part_factors, mode_shapes, lower_residual, upper_residual })
    }

    /// Modal model with no residual terms.
    pub fn without_residuals(poles: Vec<Complex64>, mode_shapes: CMat, part_factors: CMat) -> Result<Self> {
        let (n_o, n_i) = (mode_shapes.nrows(), part_factors.ncols());
        Self::new(poles, mode_shapes, part_factors, RMat::zeros(n_o, n_i), RMat::zeros(n_o, n_i))
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }
    pub fn part_factors(&self) -> &CMat {
        &self.part_factors
    }
    pub fn mode_shapes(&self) -> &CMat {
        &self.mode_shapes
    }
    pub fn lower_residual(&self) -> &RMat {
        &self.lower_residual
    }
    pub fn upper_residual(&self) -> &RMat {
        &self.upper_residual
    }
    pub fn n_modes(&self) -> usize {
        self.poles.len()
    }
    pub fn n_outputs(&self) -> usize {
        self.lower_residual.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.lower_residual.ncols()
    }

    /// Restricts the model to a subset of outputs and inputs.
    pub fn select(&self, outputs: &[usize], inputs: &[usize]) -> Result<Self> {
        check_indices(outputs, self.n_outputs(), "output")?;
        check_indices(inputs, self.n_inputs(), "input")?;
        Self::new(
            self.poles.clone(),
            self.mode_shapes.select_rows(outputs),
            self.part_factors.select_columns(inputs),
            self.lower_residual.select_rows(outputs).select_columns(inputs),
            self.upper_residual.select_rows(outputs).select_columns(inputs),
        )
    }

    /// Keeps only the modes whose index satisfies `keep`; residuals untouched.
    pub fn retain_modes(&self, keep: impl Fn(usize, Complex64) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.n_modes()).filter(|&r| keep(r, self.poles[r])).collect();
        Self {
            poles: idx.iter().map(|&r| self.poles[r]).collect(),
            mode_shapes: self.mode_shapes.select_columns(&idx),
            part_factors: self.part_factors.select_rows(&idx),
            lower_residual: self.lower_residual.clone(),
            upper_residual: self.upper_residual.clone(),
        }
    }

    pub fn with_residuals(&self, lower: RMat, upper: RMat) -> Result<Self> {
        Self::new(self.poles.clone(), self.mode_shapes.clone(), self.part_factors.clone(), lower, upper)
    }
}

pub(crate) fn check_indices(idx: &[usize], bound: usize, what: &str) -> Result<()> {
    match idx.iter().find(|&&i| i >= bound) {
        Some(i) => Err(Error::Dimension(format!("{what} index {i} out of range 0..{bound}"))),
        None => Ok(()),
    }
}

/// Continuous-time LTI model `ẋ = A x + B u`, `y = C x + D u`.
///
/// Matrices are stored complex; real-valued models carry zero imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    a: CMat,
    b: CMat,
    c: CMat,
    d: CMat,
    domain: Domain,
    representation: Representation,
    provenance: String,
}

impl StateSpaceModel {
    pub fn new(a: CMat, b: CMat, c: CMat, d: CMat, domain: Domain, representation: Representation) -> Result<Self> {
        let n_s = a.nrows();
        if a.ncols() != n_s {
            return Err(Error::Dimension(format!("A is {:?}, must be square", a.shape())));
        }
        if b.nrows() != n_s {
            return Err(Error::Dimension(format!("B has {} rows, A has {n_s}", b.nrows())));
        }
        if c.ncols() != n_s {
            return Err(Error::Dimension(format!("C has {} columns, A has {n_s}", c.ncols())));
        }
        if d.shape() != (c.nrows(), b.ncols()) {
            return Err(Error::Dimension(format!("D is {:?}, expected {:?}", d.shape(), (c.nrows(), b.ncols()))));
        }
        let finite =
            a.iter().chain(b.iter()).chain(c.iter()).chain(d.iter()).all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("state-space matrices contain non-finite entries".into()));
        }
        if domain == Domain::Displacement && d.iter().any(|z| *z != Complex64::new(0.0, 0.0)) {
            return Err(Error::Domain("a displacement model must have D = 0".into()));
        }
        match representation {
            Representation::DiagonalComplex => {
                for j in 0..n_s {
                    for i in 0..n_s {
                        if i != j && a[(i, j)] != Complex64::new(0.0, 0.0) {
                            return Err(Error::Structure("diagonal-complex model has off-diagonal A entries".into()));
                        }
                    }
                }
            }
            Representation::RealValued => {
                if a.iter().chain(b.iter()).chain(c.iter()).chain(d.iter()).any(|z| z.im != 0.0) {
                    return Err(Error::Structure("real-valued model has complex entries".into()));
                }
            }
            Representation::General => {}
        }
        Ok(Self { a, b, c, d, domain, representation, provenance: String::new() })
    }

    /// Model with `D = 0` in the given domain.
    pub fn strictly_proper(a: CMat, b: CMat, c: CMat, domain: Domain, representation: Representation) -> Result<Self> {
        let d = CMat::zeros(c.nrows(), b.ncols());
        Self::new(a, b, c, d, domain, representation)
    }

    /// State-less displacement model with the given output/input counts.
    pub fn empty(n_outputs: usize, n_inputs: usize) -> Self {
        Self {
            a: CMat::zeros(0, 0),
            b: CMat::zeros(0, n_inputs),
            c: CMat::zeros(n_outputs, 0),
            d: CMat::zeros(n_outputs, n_inputs),
            domain: Domain::Displacement,
            representation: Representation::DiagonalComplex,
            provenance: String::new(),
        }
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }
    pub fn b(&self) -> &CMat {
        &self.b
    }
    pub fn c(&self) -> &CMat {
        &self.c
    }
    pub fn d(&self) -> &CMat {
        &self.d
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn representation(&self) -> Representation {
        self.representation
    }
    pub fn provenance(&self) -> &str {
        &self.provenance
    }
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    /// True when every matrix entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.a.iter().chain(self.b.iter()).chain(self.c.iter()).chain(self.d.iter()).all(|z| z.im == 0.0)
    }

    /// Diagonal of A; meaningful for diagonal-complex models.
    pub fn diagonal_poles(&self) -> Vec<Complex64> {
        self.a.diagonal().iter().copied().collect()
    }

    /// The feed-through of the corresponding velocity model, `C·B`.
    pub fn cb(&self) -> CMat {
        &self.c * &self.b
    }

    /// Largest entry magnitude of `C·B`.
    pub fn max_abs_cb(&self) -> f64 {
        max_abs(&self.cb())
    }

    /// Scale of the terms summed in `C·B`: Σ_k max|C[:,k]| · max|B[k,:]|.
    pub fn cb_scale(&self) -> f64 {
        (0..self.n_states())
            .map(|k| {
                let cmax = self.c.column(k).iter().map(|z| z.norm()).fold(0.0, f64::max);
                let bmax = self.b.row(k).iter().map(|z| z.norm()).fold(0.0, f64::max);
                cmax * bmax
            })
            .sum()
    }

    /// Keeps the given outputs and inputs.
    pub fn select_io(&self, outputs: &[usize], inputs: &[usize]) -> Result<Self> {
        check_indices(outputs, self.n_outputs(), "output")?;
        check_indices(inputs, self.n_inputs(), "input")?;
        let m = Self {
            a: self.a.clone(),
            b: self.b.select_columns(inputs),
            c: self.c.select_rows(outputs),
            d: self.d.select_rows(outputs).select_columns(inputs),
            domain: self.domain,
            representation: self.representation,
            provenance: self.provenance.clone(),
        };
        Ok(m)
    }

    /// Same dynamics with the sign of every response flipped (`B → −B`, `D → −D`).
    pub fn negated(&self) -> Self {
        let mut m = self.clone();
        m.b = -&self.b;
        m.d = -&self.d;
        m
    }

    pub fn into_parts(self) -> (CMat, CMat, CMat, CMat) {
        (self.a, self.b, self.c, self.d)
    }
}

pub(crate) fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Stability and realness class of a pole.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoleClass {
    StablePair,
    UnstablePair,
    StableReal,
    UnstableReal,
}

impl PoleClass {
    pub fn is_stable(self) -> bool {
        matches!(self, PoleClass::StablePair | PoleClass::StableReal)
    }
    pub fn is_real(self) -> bool {
        matches!(self, PoleClass::StableReal | PoleClass::UnstableReal)
    }
    pub fn as_str(self) -> &'static str {
        match self {
            PoleClass::StablePair => "stable-pair",
            PoleClass::UnstablePair => "unstable-pair",
            PoleClass::StableReal => "stable-real",
            PoleClass::UnstableReal => "unstable-real",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoleDescriptor {
    pub value: Complex64,
    pub natural_freq: f64,
    pub damping_ratio: f64,
    pub class: PoleClass,
}

/// Natural frequencies (rad/s) and damping ratios of the three families of
/// residual compensation modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcmConfig {
    pub omega_lr: f64,
    pub xi_lr: f64,
    pub omega_ur: f64,
    pub xi_ur: f64,
    pub omega_cb: f64,
    pub xi_cb: f64,
}

impl RcmConfig {
    pub fn new(omega_lr: f64, xi_lr: f64, omega_ur: f64, xi_ur: f64, omega_cb: f64, xi_cb: f64) -> Result<Self> {
        let cfg = Self { omega_lr, xi_lr, omega_ur, xi_ur, omega_cb, xi_cb };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rules of thumb for a band `[omega_min, omega_max]` (rad/s):
    /// `ω_LR = ω_min/5`, `ω_UR = ω_CB = 10·ω_max`, all damping ratios 0.1.
    pub fn for_band(omega_min: f64, omega_max: f64) -> Result<Self> {
        if !(omega_min > 0.0 && omega_max > omega_min) {
            return Err(Error::InvalidParameter(format!("invalid band [{omega_min}, {omega_max}] rad/s")));
        }
        Self::new(omega_min / 5.0, 0.1, 10.0 * omega_max, 0.1, 10.0 * omega_max, 0.1)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("omega_lr", self.omega_lr), ("omega_ur", self.omega_ur), ("omega_cb", self.omega_cb)] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {w} must be positive")));
            }
        }
        for (name, xi) in [("xi_lr", self.xi_lr), ("xi_ur", self.xi_ur), ("xi_cb", self.xi_cb)] {
            check_damping(name, xi)?;
        }
        Ok(())
    }
}

pub(crate) fn check_damping(name: &str, xi: f64) -> Result<()> {
    if xi > 0.0 && xi < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {xi} must lie in (0, 1)")))
    }
}

pub fn hz_to_rad(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// One rigid pairing `y[plus] − y[minus] = 0` between two outputs of the
/// concatenated output vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfacePair {
    pub plus_output: usize,
    pub minus_output: usize,
}

/// Signed Boolean compatibility matrix, stored row by row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterfaceMap {
    n_outputs: usize,
    pairs: Vec<InterfacePair>,
}

impl InterfaceMap {
    pub fn new(n_outputs: usize, pairs: Vec<InterfacePair>) -> Result<Self> {
        for (row, p) in pairs.iter().enumerate() {
            if p.plus_output >= n_outputs || p.minus_output >= n_outputs {
                return Err(Error::Dimension(format!("interface row {row} references output beyond {n_outputs}")));
            }
            if p.plus_output == p.minus_output {
                return Err(Error::InvalidParameter(format!(
                    "interface row {row} pairs output {} with itself",
                    p.plus_output
                )));
            }
        }
        Ok(Self { n_outputs, pairs })
    }

    /// Pairs `plus[k]` with `minus[k]` for every k.
    pub fn from_pairs(n_outputs: usize, plus: &[usize], minus: &[usize]) -> Result<Self> {
        if plus.len() != minus.len() {
            return Err(Error::Dimension("plus/minus index lists differ in length".into()));
        }
        let pairs = plus.iter().zip(minus).map(|(&p, &m)| InterfacePair { plus_output: p, minus_output: m }).collect();
        Self::new(n_outputs, pairs)
    }

    /// Builds a map from the raw signed matrix; each row needs exactly one +1 and one −1.
    pub fn from_matrix(matrix: &DMatrix<i32>) -> Result<Self> {
        let mut pairs = Vec::with_capacity(matrix.nrows());
        for (row, r) in matrix.row_iter().enumerate() {
            let mut plus = None;
            let mut minus = None;
            for (col, &v) in r.iter().enumerate() {
                match v {
                    0 => {}
                    1 if plus.is_none() => plus = Some(col),
                    -1 if minus.is_none() => minus = Some(col),
                    _ => {
                        return Err(Error::InvalidParameter(format!(
                            "interface row {row} is not a single +1/−1 pairing"
                        )))
                    }
                }
            }
            match (plus, minus) {
                (Some(p), Some(m)) => pairs.push(InterfacePair { plus_output: p, minus_output: m }),
                _ => {
                    return Err(Error::InvalidParameter(format!("interface row {row} needs exactly one +1 and one −1")))
                }
            }
        }
        Self::new(matrix.ncols(), pairs)
    }

    pub fn empty(n_outputs: usize) -> Self {
        Self { n_outputs, pairs: Vec::new() }
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }
    pub fn n_constraints(&self) -> usize {
        self.pairs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
    pub fn pairs(&self) -> &[InterfacePair] {
        &self.pairs
    }

    pub fn matrix(&self) -> DMatrix<i32> {
        let mut m = DMatrix::zeros(self.pairs.len(), self.n_outputs);
        for (row, p) in self.pairs.iter().enumerate() {
            m[(row, p.plus_output)] = 1;
            m[(row, p.minus_output)] = -1;
        }
        m
    }

    pub fn matrix_f64(&self) -> RMat {
        self.matrix().map(f64::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn modal_model_rejects_inconsistent_dimensions() {
        let err = ModalModel::new(
            vec![c(-1.0, 10.0)],
            CMat::zeros(2, 2),
            CMat::zeros(1, 1),
            RMat::zeros(2, 1),
            RMat::zeros(2, 1),
        );
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn modal_model_rejects_negative_imag_pole() {
        let err = ModalModel::without_residuals(vec![c(-1.0, -10.0)], CMat::zeros(1, 1), CMat::zeros(1, 1));
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn displacement_model_requires_zero_feedthrough() {
        let one = CMat::from_element(1, 1, c(1.0, 0.0));
        let err = StateSpaceModel::new(
            one.clone(),
            one.clone(),
            one.clone(),
            one.clone(),
            Domain::Displacement,
            Representation::General,
        );
        assert!(matches!(err, Err(Error::Domain(_))));
        assert!(StateSpaceModel::new(
            one.clone(),
            one.clone(),
            one.clone(),
            one,
            Domain::Velocity,
            Representation::General
        )
        .is_ok());
    }

    #[test]
    fn diagonal_representation_is_checked() {
        let a = CMat::from_element(2, 2, c(1.0, 0.0));
        let err = StateSpaceModel::strictly_proper(
            a,
            CMat::zeros(2, 1),
            CMat::zeros(1, 2),
            Domain::Displacement,
            Representation::DiagonalComplex,
        );
        assert!(matches!(err, Err(Error::Structure(_))));
    }

    #[test]
    fn domain_shift_stays_in_range() {
        assert_eq!(Domain::Displacement.shifted(2).unwrap(), Domain::Acceleration);
        assert_eq!(Domain::Acceleration.shifted(-1).unwrap(), Domain::Velocity);
        assert!(Domain::Acceleration.shifted(1).is_err());
        assert!(Domain::Displacement.shifted(-1).is_err());
    }

    #[test]
    fn rcm_config_bounds() {
        assert!(RcmConfig::new(1.0, 0.1, 1.0, 1.0, 1.0, 0.1).is_err());
        assert!(RcmConfig::new(0.0, 0.1, 1.0, 0.1, 1.0, 0.1).is_err());
        let cfg = RcmConfig::for_band(hz_to_rad(20.0), hz_to_rad(500.0)).unwrap();
        assert!((cfg.omega_ur - hz_to_rad(5000.0)).abs() < 1e-9);
        assert!((cfg.omega_lr - hz_to_rad(4.0)).abs() < 1e-12);
    }

    #[test]
    fn interface_map_round_trips_through_matrix() {
        let map = InterfaceMap::from_pairs(4, &[0, 1], &[2, 3]).unwrap();
        let m = map.matrix();
        assert_eq!(m[(0, 0)], 1);
        assert_eq!(m[(0, 2)], -1);
        assert_eq!(InterfaceMap::from_matrix(&m).unwrap(), map);
    }

    #[test]
    fn interface_map_rejects_bad_rows() {
        assert!(InterfaceMap::from_pairs(3, &[0], &[3]).is_err());
        assert!(InterfaceMap::from_pairs(3, &[1], &[1]).is_err());
        let bad = DMatrix::from_row_slice(1, 3, &[1, 1, -1]);
        assert!(InterfaceMap::from_matrix(&bad).is_err());
        let bad = DMatrix::from_row_slice(1, 3, &[1, 0, 2]);
        assert!(InterfaceMap::from_matrix(&bad).is_err());
    }
}
