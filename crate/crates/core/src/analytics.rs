//! Closed-form outage probabilities and throughput-outage curves.
//!
//! [`outage_exact`] evaluates the cluster outage `Σ P_r(f)·exp(-g_c·P_c(f))` for any policy.
//! The remaining expressions are the regime approximations built on it: an upper bound for
//! `γ < 1` when `g_c` grows linearly in `M`, a general two-term expression for
//! `g_c < γM/(C1·S)`, and its limit for `γ > 1` with `g_c, q = o(M)`.
//!
//! Throughput curves carry an explicit `constant_convention` for their hidden order constant.
//! It is 1 for every generator here, so curve values are meaningful only up to a fixed factor.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, log_sum_exp};
use crate::policy::{c1_for_rho, mzipf_params, outer_policy, solve_c1, CachingPolicy, DEFAULT_TOL};
use crate::popularity::{harmonic_h_bounds, PopularityModel};

/// Outage probability of a cluster with mean size `g_c` under `policy`.
pub fn outage_exact(model: &PopularityModel, policy: &CachingPolicy, g_c: f64) -> Result<f64> {
    outage_for_pmf(model.pmf(), policy.probs(), g_c)
}

pub(crate) fn outage_for_pmf(pmf: &[f64], probs: &[f64], g_c: f64) -> Result<f64> {
    if pmf.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            expected: pmf.len(),
            got: probs.len(),
        });
    }
    if !(g_c > 0.0) {
        return Err(Error::param(format!("cluster size must be > 0, got {g_c}")));
    }
    Ok(compensated_sum(
        pmf.iter().zip(probs).map(|(p, c)| p * (-g_c * c).exp()),
    ))
}

/// Upper bound on the outage for `γ < 1` with `g_c = ρM/(C1·S)`:
///
/// `(1-γ)·e^{-(ρ/C1-γ)}·D^{γD}·(1+D)^{-γ(1+D)} / ((1+D)^{1-γ} - D^{1-γ})`.
///
/// `D = 0` is taken by continuity and gives `(1-γ)·e^{-(ρ/C1-γ)}`.
pub fn outage_upper_gamma_lt1(gamma: f64, d: f64, rho: f64, c1: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidRegime(format!(
            "needs 0 < gamma < 1, got {gamma}"
        )));
    }
    if !(d >= 0.0) || !(c1 >= 1.0) {
        return Err(Error::param(format!(
            "need D >= 0 and C1 >= 1; got {d}, {c1}"
        )));
    }
    if !(rho >= gamma) {
        return Err(Error::InvalidRegime(format!(
            "needs rho >= gamma, got rho = {rho}"
        )));
    }
    let e = 1.0 - gamma;
    let mut log_value = e.ln() - (rho / c1 - gamma);
    if d > 0.0 {
        // γD·ln D - γ(1+D)·ln(1+D) = -γ·[D·ln(1 + 1/D) + ln(1 + D)]
        log_value -= gamma * (d * (1.0 / d).ln_1p() + d.ln_1p());
        // (1+D)^{1-γ} - D^{1-γ} = D^{1-γ}·expm1((1-γ)·ln(1 + 1/D))
        log_value -= e * d.ln() + (e * (1.0 / d).ln_1p()).exp_m1().ln();
    }
    Ok(log_value.exp())
}

/// Two-term outage expression valid for `γ ≠ 1` and `g_c < γM/(C1·S)`.
///
/// `gc_over_m` is `g_c/M`. With `A = C1·S·g_c/(γM)` and `B = C2·S·g_c/(γM)` the expression is
/// `1 + A^{1-γ}·[(1-γ)·e^{-γ(1/C1-1)}·F - G] / ((1+B)^{1-γ} - B^{1-γ})` where
/// `F = (C1/(C1+C2))^γ·(C2/(C1+C2))^{γC2/C1}` and `G = (1+C2/C1)^{1-γ} - (C2/C1)^{1-γ}`.
pub fn outage_expr_general(
    gamma: f64,
    c1: f64,
    c2: f64,
    gc_over_m: f64,
    budget: f64,
) -> Result<f64> {
    if !(gamma > 0.0) || gamma == 1.0 {
        return Err(Error::InvalidRegime(format!(
            "needs gamma > 0, gamma != 1; got {gamma}"
        )));
    }
    if !(c1 >= 1.0) || !(c2 >= 0.0) || !(gc_over_m > 0.0) || !(budget > 0.0) {
        return Err(Error::param(format!(
            "need C1 >= 1, C2 >= 0, g_c/M > 0, S > 0; got {c1}, {c2}, {gc_over_m}, {budget}"
        )));
    }
    let a = c1 * budget * gc_over_m / gamma;
    if a >= 1.0 {
        return Err(Error::InvalidRegime(format!(
            "needs g_c < gamma·M/(C1·S); C1·S·g_c/(gamma·M) = {a}"
        )));
    }
    let e = 1.0 - gamma;
    let lead = e * (-gamma * (1.0 / c1 - 1.0)).exp() * tail_factor(gamma, c1, c2);
    if c2 == 0.0 {
        if gamma > 1.0 {
            return Err(Error::InvalidRegime("gamma > 1 needs q > 0".into()));
        }
        // B = 0: the denominator is 1 and G = 1.
        return Ok(1.0 + a.powf(e) * (lead - 1.0));
    }
    let u = c2 * budget * gc_over_m / gamma;
    // A^{1-γ} / ((1+B)^{1-γ} - B^{1-γ}) with A/B = C1/C2.
    let ratio = (c1 / c2).powf(e) / (e * (1.0 / u).ln_1p()).exp_m1();
    let g = (c2 / c1).powf(e) * (e * (c1 / c2).ln_1p()).exp_m1();
    Ok(1.0 + ratio * (lead - g))
}

/// `(C1/(C1+C2))^γ·(C2/(C1+C2))^{γC2/C1}`, with the `C2 = 0` limit equal to 1.
fn tail_factor(gamma: f64, c1: f64, c2: f64) -> f64 {
    let s = c1 + c2;
    let mut log_f = gamma * (c1 / s).ln();
    if c2 > 0.0 {
        log_f += gamma * c2 / c1 * (c2 / s).ln();
    }
    log_f.exp()
}

/// A probability with a flag recording whether rounding pushed it out of `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Clamped {
    pub value: f64,
    pub clamped: bool,
}

const CLAMP_SLACK: f64 = 1e-12;

fn clamp_probability(x: f64) -> Result<Clamped> {
    if (0.0..=1.0).contains(&x) {
        return Ok(Clamped {
            value: x,
            clamped: false,
        });
    }
    if x > -CLAMP_SLACK && x < 1.0 + CLAMP_SLACK {
        return Ok(Clamped {
            value: x.clamp(0.0, 1.0),
            clamped: true,
        });
    }
    Err(Error::NoConvergence(format!(
        "probability {x} outside [0, 1]"
    )))
}

/// Outage for `γ > 1` with `g_c = o(M)` and `q = o(M)`:
///
/// `1 + (γ-1)·e^{-γ(1/C1-1)}·(C1/(C1+C2))^γ·(C2/(C1+C2))^{γC2/C1}·(C2/C1)^{γ-1}
///  - ((C1/C2)^{γ-1} - (C1/(C1+C2))^{γ-1})·(C2/C1)^{γ-1}`,
///
/// evaluated in the equivalent form `(γ-1)·e^{..}·F·(C2/C1)^{γ-1} + (C2/(C1+C2))^{γ-1}`.
pub fn outage_expr_gamma_gt1(gamma: f64, c1: f64, c2: f64) -> Result<Clamped> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidRegime(format!(
            "needs gamma > 1, got {gamma}"
        )));
    }
    if !(c1 > 1.0) || !(c2 > 0.0) {
        return Err(Error::param(format!(
            "need C1 > 1 and C2 > 0; got {c1}, {c2}"
        )));
    }
    let g1 = gamma - 1.0;
    let log_first =
        g1.ln() - gamma * (1.0 / c1 - 1.0) + tail_factor(gamma, c1, c2).ln() + g1 * (c2 / c1).ln();
    let second = (g1 * (c2 / (c1 + c2)).ln()).exp();
    clamp_probability(log_first.exp() + second)
}

/// [`outage_expr_gamma_gt1`] for `C2 = γ/α1`, i.e. `g_c = α1·q/S`.
pub fn outage_gamma_gt1_alpha(gamma: f64, alpha1: f64) -> Result<Clamped> {
    if !(alpha1 > 0.0) {
        return Err(Error::param(format!("alpha1 must be > 0, got {alpha1}")));
    }
    let c2 = gamma / alpha1;
    outage_expr_gamma_gt1(gamma, solve_c1(c2, DEFAULT_TOL)?, c2)
}

/// Popularity regimes, split by tail exponent and by whether the plateau grows with `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    GammaLt1,
    GammaGt1,
    ZipfLt1,
    ZipfGt1,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::GammaLt1 => "gamma_lt1",
            Regime::GammaGt1 => "gamma_gt1",
            Regime::ZipfLt1 => "zipf_lt1",
            Regime::ZipfGt1 => "zipf_gt1",
        }
    }

    fn check(self, gamma: f64, q: f64) -> Result<()> {
        let ok = match self {
            Regime::GammaLt1 | Regime::ZipfLt1 => gamma < 1.0,
            Regime::GammaGt1 => gamma > 1.0 && q > 0.0,
            Regime::ZipfGt1 => gamma > 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::RegimeMismatch(format!(
                "{} does not apply to gamma = {gamma}, q = {q}",
                self.as_str()
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Achievable,
    Outer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Sweep value (`ρ` or `α1`) that produced the point.
    pub param: f64,
    pub throughput: f64,
    pub outage: f64,
}

/// Throughput-outage pairs from one closed-form expression, sorted by outage.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryCurve {
    pub points: Vec<CurvePoint>,
    pub regime: Regime,
    pub kind: CurveKind,
    /// Hidden order constant multiplying every throughput; 1 unless rescaled.
    pub constant_convention: f64,
}

impl TheoryCurve {
    fn new(mut points: Vec<CurvePoint>, regime: Regime, kind: CurveKind) -> Self {
        points.sort_by(|a, b| a.outage.total_cmp(&b.outage));
        Self {
            points,
            regime,
            kind,
            constant_convention: 1.0,
        }
    }

    /// Rescales throughputs to a different hidden constant.
    pub fn with_constant(mut self, constant: f64) -> Self {
        let factor = constant / self.constant_convention;
        for p in &mut self.points {
            p.throughput *= factor;
        }
        self.constant_convention = constant;
        self
    }

    /// Throughput at outage `p` by linear interpolation; `None` outside the curve's span.
    pub fn throughput_at_outage(&self, p: f64) -> Option<f64> {
        let i = self.points.partition_point(|pt| pt.outage < p);
        if i < self.points.len() && self.points[i].outage == p {
            return Some(self.points[i].throughput);
        }
        if i == 0 || i == self.points.len() {
            return None;
        }
        let (a, b) = (self.points[i - 1], self.points[i]);
        let w = (p - a.outage) / (b.outage - a.outage);
        Some(a.throughput + w * (b.throughput - a.throughput))
    }
}

fn check_sweep(sweep: &[f64], name: &str) -> Result<()> {
    if sweep.is_empty() {
        return Err(Error::param(format!("{name} sweep is empty")));
    }
    if let Some(x) = sweep.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::param(format!(
            "{name} values must be positive, got {x}"
        )));
    }
    Ok(())
}

/// Achievable `(T, P_o)` pairs as the regime's sweep parameter varies.
///
/// `sweep` holds `ρ` values for the `γ < 1` regimes and `α1` values for `γ > 1`.
pub fn achievable_curve(
    regime: Regime,
    model: &PopularityModel,
    budget: f64,
    reuse: f64,
    sweep: &[f64],
) -> Result<TheoryCurve> {
    let (gamma, q) = mzipf_params(model)?;
    regime.check(gamma, q)?;
    if !(reuse >= 1.0) || !(budget > 0.0) {
        return Err(Error::param(format!(
            "need K >= 1 and S > 0; got {reuse}, {budget}"
        )));
    }
    let m = model.library_size() as f64;
    let d = q / m;
    let name = match regime {
        Regime::GammaLt1 | Regime::ZipfLt1 => "rho",
        Regime::GammaGt1 | Regime::ZipfGt1 => "alpha1",
    };
    check_sweep(sweep, name)?;
    let points = sweep
        .iter()
        .map(|&x| {
            let (outage, root) = match regime {
                Regime::GammaLt1 => {
                    let c1 = c1_for_rho(gamma, d, x)?;
                    (
                        outage_upper_gamma_lt1(gamma, d, x, c1)?,
                        c1 * budget / (x * m),
                    )
                }
                Regime::ZipfLt1 => (
                    outage_upper_gamma_lt1(gamma, 0.0, x, 1.0)?,
                    budget / (x * m),
                ),
                Regime::GammaGt1 => (outage_gamma_gt1_alpha(gamma, x)?.value, budget / (x * q)),
                Regime::ZipfGt1 => (x.powf(-(gamma - 1.0)).min(1.0), budget / x),
            };
            Ok(CurvePoint {
                param: x,
                throughput: (1.0 - outage) / reuse * root.sqrt(),
                outage,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoryCurve::new(points, regime, CurveKind::Achievable))
}

/// Outer-bound `(T, P_o)` pairs with the order constant set to 1.
///
/// `γ < 1`: `T = √(S/(ρ'M))`, `P_o = e^{-ρ'}`. `γ > 1`: `T = √(S/(α'q))` (or `√(S/α')` for
/// the Zipf regime) with `P_o = α'^{-(γ-1)}`.
pub fn outer_curve(
    regime: Regime,
    model: &PopularityModel,
    budget: f64,
    sweep: &[f64],
) -> Result<TheoryCurve> {
    let (gamma, q) = mzipf_params(model)?;
    regime.check(gamma, q)?;
    if !(budget > 0.0) {
        return Err(Error::param(format!("S must be > 0, got {budget}")));
    }
    check_sweep(sweep, "outer sweep")?;
    let m = model.library_size() as f64;
    let points = sweep
        .iter()
        .map(|&x| {
            let (outage, root) = match regime {
                Regime::GammaLt1 | Regime::ZipfLt1 => ((-x).exp(), budget / (x * m)),
                Regime::GammaGt1 => (x.powf(-(gamma - 1.0)).min(1.0), budget / (x * q)),
                Regime::ZipfGt1 => (x.powf(-(gamma - 1.0)).min(1.0), budget / x),
            };
            CurvePoint {
                param: x,
                throughput: root.sqrt(),
                outage,
            }
        })
        .collect();
    Ok(TheoryCurve::new(points, regime, CurveKind::Outer))
}

/// Miss probability after searching `n_s` caches filled with the outer policy.
///
/// When every file is cached with positive probability this is
/// `(M-S)^{n_s}·(Σ_f P_r(f)^{-1/(n_s-1)})^{-(n_s-1)}`, evaluated in the log domain;
/// otherwise the policy is summed directly.
pub fn p_miss_exact(model: &PopularityModel, n_s: u64, budget: f64) -> Result<f64> {
    let m = model.library_size();
    if budget >= m as f64 {
        return Err(Error::param(
            "miss probability needs cache size below library size",
        ));
    }
    let policy = outer_policy(model, n_s, budget)?;
    if policy.m_star() == m {
        let k = (n_s - 1) as f64;
        let terms: Vec<f64> = model.pmf().iter().map(|p| -p.ln() / k).collect();
        let log_p = n_s as f64 * (m as f64 - budget).ln() - k * log_sum_exp(&terms);
        Ok(log_p.exp())
    } else {
        Ok(p_miss_direct(model.pmf(), policy.probs(), n_s))
    }
}

/// `Σ P_r(f)·(1 - P_c(f))^{n_s}`.
pub fn p_miss_direct(pmf: &[f64], probs: &[f64], n_s: u64) -> f64 {
    compensated_sum(
        pmf.iter()
            .zip(probs)
            .map(|(p, c)| p * (n_s as f64 * (-c).ln_1p()).exp()),
    )
}

/// Lower bound on the miss probability for `γ > 1`.
///
/// `n_s` caches hold at most `S·n_s` distinct files, so the miss probability is at least
/// `1 - H(1, S·n_s)/H(1, M)`; the harmonic sums are replaced by their upper and lower
/// integral brackets respectively. Zero when `S·n_s ≥ M`.
pub fn p_miss_lower_gamma_gt1(
    gamma: f64,
    q: f64,
    library_size: u64,
    budget: f64,
    n_s: u64,
) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidRegime(format!(
            "needs gamma > 1, got {gamma}"
        )));
    }
    if !(budget > 0.0) || n_s == 0 || library_size == 0 {
        return Err(Error::param("need S > 0, n_s >= 1 and M >= 1"));
    }
    let searched = (budget * n_s as f64).ceil();
    if searched >= library_size as f64 {
        return Ok(0.0);
    }
    let (_, head_upper) = harmonic_h_bounds(1, searched as u64, gamma, q)?;
    let (total_lower, _) = harmonic_h_bounds(1, library_size, gamma, q)?;
    Ok((1.0 - head_upper / total_lower).max(0.0))
}

/// Chernoff bound `P(Poisson(N) ≤ U) ≤ e^{-(N(1-1/e) - U)}`, capped at 1.
pub fn poisson_tail_bound(mean: f64, upto: f64) -> Result<f64> {
    if !(mean > 0.0) || !(upto >= 0.0) {
        return Err(Error::param(format!(
            "need N > 0 and U >= 0; got {mean}, {upto}"
        )));
    }
    let exponent = mean * (1.0 - (-1.0f64).exp()) - upto;
    Ok((-exponent).exp().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{optimal_policy_kkt, RegimeParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{DiscreteCDF, Poisson};

    #[test]
    fn outage_hand_values() {
        let model = PopularityModel::from_pmf(vec![0.75, 0.25]).unwrap();
        let policy = CachingPolicy::from_probs(vec![1.0, 0.0]).unwrap();
        let p = outage_exact(&model, &policy, 1.0).unwrap();
        assert_relative_eq!(p, 0.75 * (-1.0f64).exp() + 0.25, epsilon = 1e-15);
        assert_relative_eq!(p, 0.52591, epsilon = 1e-5);

        let zero = CachingPolicy::from_probs(vec![0.0, 0.0]).unwrap();
        assert_eq!(outage_exact(&model, &zero, 5.0).unwrap(), 1.0);

        let model = PopularityModel::mzipf(0.7, 3.0, 40).unwrap();
        let uniform = CachingPolicy::uniform(40, 2.0).unwrap();
        assert_relative_eq!(
            outage_exact(&model, &uniform, 30.0).unwrap(),
            (-30.0 * 2.0 / 40.0f64).exp(),
            epsilon = 1e-14
        );

        let short = CachingPolicy::uniform(39, 2.0).unwrap();
        assert!(matches!(
            outage_exact(&model, &short, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn prop1_reference_values() {
        // High-precision evaluation at γ = 0.6, D = 0.1, ρ/C1 = 2.
        let v = outage_upper_gamma_lt1(0.6, 0.1, 2.0, 1.0).unwrap();
        assert_relative_eq!(v, 0.125_903_537_230_917_13, max_relative = 1e-13);
        let c1 = c1_for_rho(0.6, 0.1, 2.0).unwrap();
        let v2 = outage_upper_gamma_lt1(0.6, 0.1, 2.0 * c1, c1).unwrap();
        assert_relative_eq!(v, v2, max_relative = 1e-13);

        // D = 0 reduces to the plain Zipf bound.
        let v = outage_upper_gamma_lt1(0.4, 0.0, 1.5, 1.0).unwrap();
        assert_relative_eq!(v, 0.6 * (-(1.5f64 - 0.4)).exp(), epsilon = 1e-15);

        assert!(matches!(
            outage_upper_gamma_lt1(1.2, 0.1, 2.0, 1.0),
            Err(Error::InvalidRegime(_))
        ));
    }

    #[test]
    fn prop1_large_d_is_finite_and_matches_direct_form() {
        let (gamma, rho, c1): (f64, f64, f64) = (0.5, 3.0, 1.2);
        for &d in &[1e-3f64, 0.5, 10.0, 1e4] {
            let direct = (1.0 - gamma)
                * (-(rho / c1 - gamma)).exp()
                * d.powf(gamma * d)
                * (1.0 + d).powf(-gamma * (1.0 + d))
                / ((1.0 + d).powf(1.0 - gamma) - d.powf(1.0 - gamma));
            let v = outage_upper_gamma_lt1(gamma, d, rho, c1).unwrap();
            if direct.is_finite() && direct > 0.0 {
                assert_relative_eq!(v, direct, max_relative = 1e-8);
            }
            assert!(v.is_finite() && v > 0.0);
        }
        let v = outage_upper_gamma_lt1(0.5, 1e9, 3.0, 1.2).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn prop1_decreases_in_rho() {
        let vals: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0, 64.0]
            .iter()
            .map(|&r| {
                outage_upper_gamma_lt1(0.6, 0.1, r, c1_for_rho(0.6, 0.1, r).unwrap()).unwrap()
            })
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!(*vals.last().unwrap() < 1e-20);
    }

    #[test]
    fn prop2_tends_to_one_for_vanishing_cluster() {
        let (gamma, q, budget) = (0.6, 100.0, 1.0);
        for &x in &[1e-2, 1e-4, 1e-6, 1e-8] {
            let g_c = x * 1e12;
            let c2 = q * gamma / (budget * g_c);
            let c1 = solve_c1(c2, 1e-13).unwrap();
            let p = outage_expr_general(gamma, c1, c2, x, budget).unwrap();
            assert!(p <= 1.0 && p > 1.0 - 2.0 * x.powf(0.4), "{x} -> {p}");
        }
    }

    #[test]
    fn prop2_regime_guard() {
        assert!(matches!(
            outage_expr_general(0.6, 1.5, 0.4, 0.9, 1.0),
            Err(Error::InvalidRegime(_))
        ));
        assert!(matches!(
            outage_expr_general(1.0, 1.5, 0.4, 0.01, 1.0),
            Err(Error::InvalidRegime(_))
        ));
    }

    #[test]
    fn prop2_limit_matches_prop3() {
        for &gamma in &[1.2, 1.6, 2.5] {
            for &c2 in &[0.05, 0.5, 3.0, 40.0] {
                let c1 = solve_c1(c2, 1e-14).unwrap();
                let p3 = outage_expr_gamma_gt1(gamma, c1, c2).unwrap().value;
                // The neglected term is of order (g_c/M)^{γ-1}.
                let p2 = outage_expr_general(gamma, c1, c2, 1e-100, 1.0).unwrap();
                assert_relative_eq!(p2, p3, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn prop3_matches_unsimplified_display() {
        let (gamma, c2) = (1.6, 0.7);
        let c1 = solve_c1(c2, 1e-14).unwrap();
        let g1 = gamma - 1.0;
        let literal = 1.0
            + g1 * (-gamma * (1.0 / c1 - 1.0)).exp()
                * (c1 / (c1 + c2)).powf(gamma)
                * (c2 / (c1 + c2)).powf(gamma * c2 / c1)
                * (c2 / c1).powf(g1)
            - ((c1 / c2).powf(g1) - (c1 / (c1 + c2)).powf(g1)) * (c2 / c1).powf(g1);
        let v = outage_expr_gamma_gt1(gamma, c1, c2).unwrap();
        assert_relative_eq!(v.value, literal, max_relative = 1e-12);
        assert!(!v.clamped);
    }

    #[test]
    fn prop3_monotone_and_vanishing() {
        let gamma = 1.6;
        let vals: Vec<f64> = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0]
            .iter()
            .map(|&c2| {
                outage_expr_gamma_gt1(gamma, solve_c1(c2, 1e-13).unwrap(), c2)
                    .unwrap()
                    .value
            })
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");

        // Large α1: outage shrinks like α1^{-(γ-1)}.
        let a = outage_gamma_gt1_alpha(gamma, 1e4).unwrap().value;
        let b = outage_gamma_gt1_alpha(gamma, 2e4).unwrap().value;
        assert!(a < 0.01);
        assert_relative_eq!(a / b, 2f64.powf(gamma - 1.0), max_relative = 0.05);
        assert!(matches!(
            outage_expr_gamma_gt1(0.8, 1.5, 0.5),
            Err(Error::InvalidRegime(_))
        ));
    }

    #[test]
    fn regime_expressions_track_exact_outage() {
        // γ < 1 with g_c chosen so the cutoff covers the library.
        let model = PopularityModel::mzipf(0.6, 100.0, 1000).unwrap();
        let r = RegimeParams::for_model(&model, 1.0, 1000.0).unwrap();
        let policy = optimal_policy_kkt(&model, 1000.0, 1.0, DEFAULT_TOL).unwrap();
        let exact = outage_exact(&model, &policy, 1000.0).unwrap();
        let p1 = outage_upper_gamma_lt1(0.6, r.d, r.rho, r.c1).unwrap();
        assert_relative_eq!(p1, exact, max_relative = 0.01);

        let model = PopularityModel::mzipf(1.6, 50.0, 1000).unwrap();
        let r = RegimeParams::for_model(&model, 1.0, 20.0).unwrap();
        let policy = optimal_policy_kkt(&model, 20.0, 1.0, DEFAULT_TOL).unwrap();
        let exact = outage_exact(&model, &policy, 20.0).unwrap();
        let p2 = outage_expr_general(1.6, r.c1, r.c2, 20.0 / 1000.0, 1.0).unwrap();
        assert_relative_eq!(p2, exact, max_relative = 0.01);
    }

    #[test]
    fn curves_scale_as_advertised() {
        let sweep = [0.8, 1.0, 2.0, 4.0];
        let scaled: Vec<f64> = [1000usize, 4000, 16000]
            .iter()
            .map(|&m| {
                let model = PopularityModel::mzipf(0.6, 0.1 * m as f64, m).unwrap();
                let c = achievable_curve(Regime::GammaLt1, &model, 1.0, 4.0, &sweep).unwrap();
                c.points[0].throughput * (m as f64).sqrt()
            })
            .collect();
        for w in scaled.windows(2) {
            assert_relative_eq!(w[0], w[1], max_relative = 1e-12);
        }

        let model = PopularityModel::mzipf(1.6, 50.0, 10000).unwrap();
        let a = achievable_curve(Regime::GammaGt1, &model, 1.0, 1.0, &[2.0, 4.0, 8.0]).unwrap();
        assert!(a.points.windows(2).all(|w| w[0].outage <= w[1].outage));
        for p in &a.points {
            let expected = (1.0 - p.outage) * (1.0 / (p.param * 50.0)).sqrt();
            assert_relative_eq!(p.throughput, expected, max_relative = 1e-12);
        }

        let model = PopularityModel::zipf(1.5, 2000).unwrap();
        let z = achievable_curve(Regime::ZipfGt1, &model, 2.0, 1.0, &[4.0, 16.0]).unwrap();
        assert_relative_eq!(z.points[0].outage, 16f64.powf(-0.5));
        assert!(matches!(
            achievable_curve(Regime::GammaLt1, &model, 1.0, 1.0, &[1.0]),
            Err(Error::RegimeMismatch(_))
        ));
    }

    #[test]
    fn outer_over_achievable_ratio_is_constant_in_m() {
        let target = 0.05;
        let ratio = |m: usize, regime: Regime, gamma: f64, q: f64| {
            let model = PopularityModel::mzipf(gamma, q, m).unwrap();
            let sweep: Vec<f64> = (0..400).map(|i| 0.6 * 1.03f64.powi(i)).collect();
            let ach = achievable_curve(regime, &model, 1.0, 1.0, &sweep).unwrap();
            let outer_sweep: Vec<f64> = (0..600).map(|i| 0.01 * 1.03f64.powi(i)).collect();
            let out = outer_curve(regime, &model, 1.0, &outer_sweep).unwrap();
            out.throughput_at_outage(target).unwrap() / ach.throughput_at_outage(target).unwrap()
        };
        let r1 = ratio(1000, Regime::GammaLt1, 0.6, 100.0);
        let r2 = ratio(8000, Regime::GammaLt1, 0.6, 800.0);
        assert_relative_eq!(r1, r2, max_relative = 1e-9);
        let r1 = ratio(1000, Regime::GammaGt1, 1.6, 20.0);
        let r2 = ratio(64000, Regime::GammaGt1, 1.6, 20.0);
        assert_relative_eq!(r1, r2, max_relative = 1e-9);
    }

    #[test]
    fn outer_outage_decays_exponentially() {
        let model = PopularityModel::mzipf(0.6, 10.0, 100).unwrap();
        let c = outer_curve(Regime::GammaLt1, &model, 1.0, &[1.0, 5.0, 30.0]).unwrap();
        let last = c.points.iter().find(|p| p.param == 30.0).unwrap();
        assert_relative_eq!(last.outage, (-30.0f64).exp());
        assert_eq!(c.kind, CurveKind::Outer);
        assert_eq!(c.constant_convention, 1.0);
        let doubled = c.clone().with_constant(2.0);
        assert_relative_eq!(doubled.points[0].throughput, 2.0 * c.points[0].throughput);
    }

    #[test]
    fn p_miss_reference_values() {
        let model = PopularityModel::mzipf(1.0, 1.0, 3).unwrap();
        let policy = outer_policy(&model, 3, 1.0).unwrap();
        let exact = p_miss_exact(&model, 3, 1.0).unwrap();
        let direct = p_miss_direct(model.pmf(), policy.probs(), 3);
        assert!((exact - direct).abs() <= 1e-12);
        assert_relative_eq!(exact, 0.278_832_694_361_563_1, max_relative = 1e-12);

        let model = PopularityModel::mzipf(1e-13, 0.0, 10).unwrap();
        for n in [2u64, 5, 40] {
            assert_relative_eq!(
                p_miss_exact(&model, n, 3.0).unwrap(),
                0.7f64.powi(n as i32),
                max_relative = 1e-9
            );
        }
        assert!(p_miss_exact(&model, 1, 3.0).is_err());
        assert!(p_miss_exact(&model, 3, 10.0).is_err());
    }

    #[test]
    fn p_miss_decreases_in_search_size() {
        let model = PopularityModel::mzipf(1.3, 4.0, 200).unwrap();
        let vals: Vec<f64> = [2u64, 4, 8, 32, 128, 1024]
            .iter()
            .map(|&n| p_miss_exact(&model, n, 2.0).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    }

    #[test]
    fn p_miss_lower_bound_holds() {
        let model = PopularityModel::mzipf(1.6, 100.0, 100_000).unwrap();
        let exact = p_miss_exact(&model, 500, 1.0).unwrap();
        let lower = p_miss_lower_gamma_gt1(1.6, 100.0, 100_000, 1.0, 500).unwrap();
        assert_relative_eq!(lower, 0.32665, max_relative = 1e-4);
        assert!(lower <= exact, "{lower} > {exact}");

        // Searching few caches relative to the plateau: bound close to 1.
        let small = p_miss_lower_gamma_gt1(1.6, 1e6, 1_000_000_000, 1.0, 10).unwrap();
        assert!(small > 0.99);

        // Large-α1' regime halves in α1'^{γ-1}.
        let q = 1000.0;
        let a = p_miss_lower_gamma_gt1(1.6, q, 1_000_000_000, 1.0, (50.0 * q) as u64).unwrap();
        let b = p_miss_lower_gamma_gt1(1.6, q, 1_000_000_000, 1.0, (100.0 * q) as u64).unwrap();
        assert_relative_eq!(a / b, 2f64.powf(0.6), max_relative = 0.03);

        assert!(matches!(
            p_miss_lower_gamma_gt1(0.9, 1.0, 10, 1.0, 2),
            Err(Error::InvalidRegime(_))
        ));
    }

    #[test]
    fn poisson_bound_values() {
        let v = poisson_tail_bound(100.0, 50.0).unwrap();
        assert_relative_eq!(v, 1.828_424_514_680_617_5e-6, max_relative = 1e-12);
        assert_relative_eq!(v, (-13.212_055_882_855_767f64).exp(), max_relative = 1e-12);
        let n = 7.0;
        let at_zero = poisson_tail_bound(n, 0.0).unwrap();
        assert!(at_zero >= (-n).exp());
    }

    #[test]
    fn markov_bound_on_region_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let n = rng.random_range(20..400usize);
            let side: f64 = rng.random_range(0.05..0.5);
            let threshold = rng.random_range(1..60usize);
            let reps = 200;
            let hits = (0..reps)
                .filter(|_| {
                    let inside = (0..n)
                        .filter(|_| rng.random::<f64>() < side && rng.random::<f64>() < side)
                        .count();
                    inside >= threshold
                })
                .count();
            let bound = n as f64 * side * side / threshold as f64;
            let freq = hits as f64 / reps as f64;
            let se = (bound.min(1.0) * (1.0 - bound.min(1.0)) / reps as f64).sqrt();
            assert!(freq <= bound + 3.0 * se + 1e-12, "{freq} > {bound}");
        }
    }

    proptest! {
        #[test]
        fn chernoff_dominates_poisson_cdf(n in 0.5f64..500.0, frac in 0.0f64..1.0) {
            let u = (frac * n * (1.0 - (-1.0f64).exp())).floor();
            let cdf = Poisson::new(n).unwrap().cdf(u as u64);
            prop_assert!(cdf <= poisson_tail_bound(n, u).unwrap() * (1.0 + 1e-12));
        }

        #[test]
        fn prop3_in_unit_interval(gamma in 1.01f64..3.0, c2 in 1e-3f64..100.0) {
            let c1 = solve_c1(c2, 1e-12).unwrap();
            let v = outage_expr_gamma_gt1(gamma, c1, c2).unwrap();
            prop_assert!((0.0..=1.0).contains(&v.value));
        }

        #[test]
        fn curves_stay_in_range(gamma in 0.1f64..0.95, rho in 1.0f64..20.0, d in 0.0f64..2.0) {
            let m = 1000usize;
            let model = PopularityModel::mzipf(gamma, d * m as f64, m).unwrap();
            let c = achievable_curve(Regime::GammaLt1, &model, 1.0, 4.0, &[rho]).unwrap();
            let p = c.points[0];
            prop_assert!((0.0..=1.0).contains(&p.outage), "{:?}", p);
            prop_assert!(p.throughput.is_finite() && p.throughput >= 0.0);
        }
    }
}
