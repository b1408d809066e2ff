//! Frequency response function sets and the metrics used to compare them.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::{CMat, Domain};

/// Complex FRF matrices sampled on a strictly increasing grid of positive
/// angular frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct FrfSet {
    grid: Vec<f64>,
    values: Vec<CMat>,
    domain: Domain,
}

impl FrfSet {
    pub fn new(grid: Vec<f64>, values: Vec<CMat>, domain: Domain) -> Result<Self> {
        validate_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!("{} FRF matrices for {} frequencies", values.len(), grid.len())));
        }
        if let Some(first) = values.first() {
            let shape = first.shape();
            if values.iter().any(|v| v.shape() != shape) {
                return Err(Error::Dimension("FRF matrices differ in shape".into()));
            }
        }
        if values.iter().flat_map(|v| v.iter()).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter("FRF contains non-finite values".into()));
        }
        Ok(Self { grid, values, domain })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
    pub fn values(&self) -> &[CMat] {
        &self.values
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn n_freqs(&self) -> usize {
        self.grid.len()
    }
    pub fn shape(&self) -> (usize, usize) {
        self.values.first().map(|v| v.shape()).unwrap_or((0, 0))
    }
    pub fn into_values(self) -> Vec<CMat> {
        self.values
    }

    /// Same grid and domain, new values.
    pub fn with_values(&self, values: Vec<CMat>) -> Result<Self> {
        Self::new(self.grid.clone(), values, self.domain)
    }

    /// Single response entry across the grid.
    pub fn entry(&self, output: usize, input: usize) -> Vec<Complex64> {
        self.values.iter().map(|v| v[(output, input)]).collect()
    }

    /// Elementwise sum; grids, domains and shapes must agree.
    pub fn add(&self, other: &FrfSet) -> Result<FrfSet> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        FrfSet::new(self.grid.clone(), values, self.domain)
    }

    /// Elementwise difference; grids, domains and shapes must agree.
    pub fn sub(&self, other: &FrfSet) -> Result<FrfSet> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        FrfSet::new(self.grid.clone(), values, self.domain)
    }

    pub fn check_compatible(&self, other: &FrfSet) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Dimension("FRF grids differ".into()));
        }
        if self.domain != other.domain {
            return Err(Error::Domain(format!("FRF domains differ: {} vs {}", self.domain, other.domain)));
        }
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!("FRF shapes differ: {:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(())
    }
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::InvalidParameter("frequency grid must be finite and strictly positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("frequency grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `n` points from `w0` to `w1` inclusive, linearly spaced.
pub fn linear_grid(w0: f64, w1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![w0],
        _ => (0..n).map(|k| w0 + (w1 - w0) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` points from `w0` to `w1` inclusive, logarithmically spaced.
pub fn log_grid(w0: f64, w1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![w0],
        _ => {
            let (l0, l1) = (w0.ln(), w1.ln());
            (0..n).map(|k| (l0 + (l1 - l0) * k as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

/// Multiplies every FRF by `(jω)^k`, moving the domain `k` steps
/// (displacement → velocity → acceleration for positive `k`).
pub fn frf_reweight(frf: &FrfSet, k: i32) -> Result<FrfSet> {
    if !matches!(k, -2 | -1 | 1 | 2) {
        return Err(Error::InvalidParameter(format!("unsupported reweighting exponent {k}")));
    }
    let domain = frf.domain.shifted(k)?;
    let values = frf.grid.iter().zip(&frf.values).map(|(&w, h)| h * jw_pow(w, k)).collect();
    FrfSet::new(frf.grid.clone(), values, domain)
}

/// `(jω)^k` for small integer `k`, computed without complex powers so that
/// `k` and `−k` are exact reciprocals up to one rounding.
pub(crate) fn jw_pow(w: f64, k: i32) -> Complex64 {
    match k {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, w),
        2 => Complex64::new(-w * w, 0.0),
        -1 => Complex64::new(0.0, -1.0 / w),
        -2 => Complex64::new(-1.0 / (w * w), 0.0),
        _ => Complex64::new(0.0, w).powi(k),
    }
}

/// Relative RMS deviation `‖test − reference‖₂ / ‖reference‖₂` over every
/// frequency and entry.
pub fn rel_rms_deviation(test: &FrfSet, reference: &FrfSet) -> Result<f64> {
    test.check_compatible(reference)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, r) in test.values.iter().zip(&reference.values) {
        num += (t - r).iter().map(|z| z.norm_sqr()).sum::<f64>();
        den += r.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok(if den == 0.0 { num.sqrt() } else { (num / den).sqrt() })
}

/// Largest per-entry relative deviation, skipping reference entries whose
/// magnitude is below `floor`.
pub fn max_rel_deviation(test: &FrfSet, reference: &FrfSet, floor: f64) -> Result<f64> {
    test.check_compatible(reference)?;
    let mut worst: f64 = 0.0;
    for (t, r) in test.values.iter().zip(&reference.values) {
        for (a, b) in t.iter().zip(r.iter()) {
            if b.norm() >= floor {
                worst = worst.max((a - b).norm() / b.norm());
            }
        }
    }
    Ok(worst)
}

/// Largest per-frequency deviation relative to the largest reference entry
/// at that frequency (a matrix-norm view that ignores tiny off-diagonal terms).
pub fn max_rel_deviation_matrix(test: &FrfSet, reference: &FrfSet) -> Result<f64> {
    test.check_compatible(reference)?;
    let mut worst: f64 = 0.0;
    for (t, r) in test.values.iter().zip(&reference.values) {
        let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let dev = (t - r).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale > 0.0 {
            worst = worst.max(dev / scale);
        } else {
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn acceleration_of_unit_frf() {
        let frf = FrfSet::new(vec![2.0], vec![CMat::from_element(1, 1, c(1.0, 0.0))], Domain::Displacement).unwrap();
        let acc = frf_reweight(&frf, 2).unwrap();
        assert_eq!(acc.domain(), Domain::Acceleration);
        assert_eq!(acc.values()[0][(0, 0)], c(-4.0, 0.0));
    }

    #[test]
    fn reweight_inverse_pair_is_exact_to_an_ulp() {
        let grid = vec![0.3, 1.7, 12.5, 990.0];
        let values: Vec<CMat> = grid
            .iter()
            .enumerate()
            .map(|(k, _)| CMat::from_fn(2, 2, |i, j| c(1.0 + i as f64 * 0.37 - k as f64, 0.11 * j as f64 - 2.0)))
            .collect();
        let frf = FrfSet::new(grid, values, Domain::Velocity).unwrap();
        let back = frf_reweight(&frf_reweight(&frf, 1).unwrap(), -1).unwrap();
        for (a, b) in back.values().iter().zip(frf.values()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x.re - y.re).abs() <= 2.0 * f64::EPSILON * y.re.abs().max(y.im.abs()));
                assert!((x.im - y.im).abs() <= 2.0 * f64::EPSILON * y.re.abs().max(y.im.abs()));
            }
        }
        assert_eq!(back.domain(), Domain::Velocity);
    }

    #[test]
    fn reweight_rejects_bad_exponents_and_domains() {
        let frf = FrfSet::new(vec![1.0], vec![CMat::zeros(1, 1)], Domain::Acceleration).unwrap();
        assert!(frf_reweight(&frf, 3).is_err());
        assert!(frf_reweight(&frf, 0).is_err());
        assert!(frf_reweight(&frf, 1).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(FrfSet::new(vec![1.0, 1.0], vec![CMat::zeros(1, 1); 2], Domain::Displacement).is_err());
        assert!(FrfSet::new(vec![0.0], vec![CMat::zeros(1, 1)], Domain::Displacement).is_err());
        assert!(FrfSet::new(vec![1.0], vec![], Domain::Displacement).is_err());
        let nan = CMat::from_element(1, 1, c(f64::NAN, 0.0));
        assert!(FrfSet::new(vec![1.0], vec![nan], Domain::Displacement).is_err());
    }
}
