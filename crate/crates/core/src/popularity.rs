//! Request popularity.
//!
//! Files are ranked `1..=M` by popularity and requested according to the Mandelbrot-Zipf
//! law `P_r(f) ∝ (f + q)^(-γ)`, where `γ` is the tail exponent and `q` the plateau factor.
//! `q = 0` is the ordinary Zipf law.
//!
//! The normalizer is the generalized harmonic sum `H(a, b, γ, q) = Σ_{f=a}^{b} (f + q)^(-γ)`,
//! always evaluated by compensated summation. The integral brackets around `H` and around
//! `Σ log(f + q)` are exposed separately; the analytic outage expressions are built on them.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};

/// Generalized harmonic sum `Σ_{f=a}^{b} (f + q)^(-γ)`.
pub fn harmonic_h(a: u64, b: u64, gamma: f64, q: f64) -> Result<f64> {
    if a > b {
        return Err(Error::InvalidRange { a, b });
    }
    if a == 0 {
        return Err(Error::param("harmonic sum starts at index 1"));
    }
    check_shape(gamma, q)?;
    // Smallest terms first.
    let mut acc = CompensatedSum::new();
    for f in (a..=b).rev() {
        acc.add((f as f64 + q).powf(-gamma));
    }
    Ok(acc.value())
}

/// `(x^(1-γ) - y^(1-γ)) / (1-γ)` evaluated without cancellation when `γ` is close to one.
fn power_difference(x: f64, y: f64, gamma: f64) -> f64 {
    let e = 1.0 - gamma;
    y.powf(e) * (e * (x / y).ln()).exp_m1() / e
}

/// Integral brackets `lower ≤ H(a, b, γ, q) ≤ upper`, valid for `γ ≠ 1`.
///
/// `lower = [(b+q+1)^(1-γ) - (a+q)^(1-γ)] / (1-γ)` and
/// `upper = [(b+q)^(1-γ) - (a+q)^(1-γ)] / (1-γ) + (a+q)^(-γ)`.
pub fn harmonic_h_bounds(a: u64, b: u64, gamma: f64, q: f64) -> Result<(f64, f64)> {
    if a > b {
        return Err(Error::InvalidRange { a, b });
    }
    if a == 0 {
        return Err(Error::param("harmonic sum starts at index 1"));
    }
    check_shape(gamma, q)?;
    if gamma == 1.0 {
        return Err(Error::param("harmonic bounds require gamma != 1"));
    }
    let (a, b) = (a as f64 + q, b as f64 + q);
    let lower = power_difference(b + 1.0, a, gamma);
    let upper = power_difference(b, a, gamma) + a.powf(-gamma);
    Ok((lower, upper))
}

/// Riemann-sum brackets `lower ≤ Σ_{f=1}^{F} log(f + q) ≤ upper` for `F > 1`, `q ≥ 0`.
pub fn log_sum_bounds(files: u64, q: f64) -> Result<(f64, f64)> {
    if files <= 1 {
        return Err(Error::param(format!(
            "log-sum bounds need F > 1, got {files}"
        )));
    }
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::param(format!(
            "plateau factor must be >= 0, got {q}"
        )));
    }
    let f = files as f64;
    let xlx = |x: f64| x * x.ln();
    let upper = xlx(f + q + 1.0) - f - xlx(1.0 + q);
    let lower = (1.0 + q).ln() + xlx(f + q) - f - xlx(1.0 + q) + 1.0;
    Ok((lower, upper))
}

/// Exact `Σ_{f=1}^{F} log(f + q)`.
pub fn log_sum(files: u64, q: f64) -> f64 {
    compensated_sum((1..=files).map(|f| (f as f64 + q).ln()))
}

/// Mandelbrot-Zipf probability mass function over files `1..=M` (index 0 is file 1).
pub fn mzipf_pmf(gamma: f64, q: f64, library_size: usize) -> Result<Vec<f64>> {
    if library_size == 0 {
        return Err(Error::param("library size must be at least 1"));
    }
    check_shape(gamma, q)?;
    let weights: Vec<f64> = (1..=library_size)
        .map(|f| (f as f64 + q).powf(-gamma))
        .collect();
    let norm = compensated_sum(weights.iter().rev().copied());
    Ok(weights.into_iter().map(|w| w / norm).collect())
}

fn check_shape(gamma: f64, q: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::param(format!("gamma must be > 0, got {gamma}")));
    }
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::param(format!(
            "plateau factor must be >= 0, got {q}"
        )));
    }
    Ok(())
}

/// Parametric family behind a [`PopularityModel`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    MZipf {
        gamma: f64,
        q: f64,
    },
    /// A user-supplied non-increasing pmf.
    Custom,
}

/// Request distribution with a precomputed cumulative table for `O(log M)` sampling.
#[derive(Clone, Debug)]
pub struct PopularityModel {
    shape: Shape,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl PopularityModel {
    pub fn mzipf(gamma: f64, q: f64, library_size: usize) -> Result<Self> {
        let pmf = mzipf_pmf(gamma, q, library_size)?;
        Ok(Self::build(Shape::MZipf { gamma, q }, pmf))
    }

    pub fn zipf(gamma: f64, library_size: usize) -> Result<Self> {
        Self::mzipf(gamma, 0.0, library_size)
    }

    /// Wraps an explicit pmf. Entries must be positive, non-increasing and sum to one.
    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self> {
        validate_pmf(&pmf)?;
        let total = compensated_sum(pmf.iter().copied());
        let pmf = pmf.into_iter().map(|p| p / total).collect();
        Ok(Self::build(Shape::Custom, pmf))
    }

    fn build(shape: Shape, pmf: Vec<f64>) -> Self {
        let mut acc = CompensatedSum::new();
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|&p| {
                acc.add(p);
                acc.value()
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self { shape, pmf, cdf }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.shape {
            Shape::MZipf { gamma, .. } => Some(gamma),
            Shape::Custom => None,
        }
    }

    pub fn plateau(&self) -> Option<f64> {
        match self.shape {
            Shape::MZipf { q, .. } => Some(q),
            Shape::Custom => None,
        }
    }

    pub fn library_size(&self) -> usize {
        self.pmf.len()
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Probability of file `f` (1-based).
    pub fn prob(&self, f: usize) -> f64 {
        self.pmf[f - 1]
    }

    /// Draws a file index in `1..=M`.
    pub fn sample_request<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sample_index(rng) + 1
    }

    /// Draws a 0-based file index.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.pmf.len() - 1)
    }
}

pub(crate) fn validate_pmf(pmf: &[f64]) -> Result<()> {
    if pmf.is_empty() {
        return Err(Error::param("pmf must be non-empty"));
    }
    if pmf.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::param("pmf entries must be positive and finite"));
    }
    if pmf.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::param("pmf must be non-increasing in the file index"));
    }
    let total = compensated_sum(pmf.iter().copied());
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::param(format!("pmf sums to {total}, expected 1")));
    }
    Ok(())
}
