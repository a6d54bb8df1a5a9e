//! Confidence intervals and log-log regression.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

/// Wilson score interval for a proportion `p_hat` observed over `n` trials.
pub fn wilson_interval(p_hat: f64, n: usize, z: f64) -> Interval {
    if n == 0 {
        return Interval {
            lower: 0.0,
            upper: 1.0,
        };
    }
    let n = n as f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt();
    Interval {
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
    }
}

/// Sample mean and standard error (zero with fewer than two samples).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Normal-approximation interval `mean ± z·se`.
pub fn normal_interval(xs: &[f64], z: f64) -> Interval {
    let (mean, se) = mean_and_se(xs);
    Interval {
        lower: mean - z * se,
        upper: mean + z * se,
    }
}

/// Coefficient of variation `sd/|mean|` with the sample standard deviation.
pub fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let (mean, se) = mean_and_se(xs);
    se * (xs.len() as f64).sqrt() / mean.abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares fit of `ln y = intercept + slope·ln x`.
pub fn fit_scaling_exponent(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 4 {
        return Err(Error::InsufficientPoints {
            need: 4,
            got: points.len(),
        });
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(Error::param(format!(
            "log-log fit needs positive values, got ({x}, {y})"
        )));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = points.len() as f64;
    let mx = pairwise_sum(&lx) / n;
    let my = pairwise_sum(&ly) / n;
    let sxy: Vec<f64> = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (x - mx) * (y - my))
        .collect();
    let sxx: Vec<f64> = lx.iter().map(|x| (x - mx).powi(2)).collect();
    let syy: Vec<f64> = ly.iter().map(|y| (y - my).powi(2)).collect();
    let (sxy, sxx, syy) = (pairwise_sum(&sxy), pairwise_sum(&sxx), pairwise_sum(&syy));
    if sxx == 0.0 {
        return Err(Error::param(
            "log-log fit needs at least two distinct x values",
        ));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(PowerLawFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}
