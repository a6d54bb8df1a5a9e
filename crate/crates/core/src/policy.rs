//! Decentralized caching distributions.
//!
//! Every user fills its `S` cache slots independently so that file `f` is held with marginal
//! probability `P_c(f)`, subject to `Σ P_c(f) = S` and `0 ≤ P_c(f) ≤ 1`. With cluster size
//! `g_c` the outage probability is `Σ P_r(f)·exp(-g_c·P_c(f))`, which is separable and convex.
//!
//! Writing `z_f = P_r(f)^(1/g_c)`, the minimizer has the water-filling form
//! `P_c(f) = clamp(ln z_f - ln ν, 0, 1)`. [`optimal_policy_kkt`] finds `ln ν` with the box
//! constraint enforced exactly; [`optimal_policy_closed_form`] scans for the cutoff `m*` and
//! ignores the upper cap, falling back to the exact solver when the cap would bind.
//!
//! [`outer_policy`] minimizes the miss probability `Σ P_r(f)(1 - P_c(f))^{n_s}` of a user
//! searching `n_s` caches, which underlies the outer bound on the tradeoff.

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::popularity::{validate_pmf, PopularityModel};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_BISECTION_ITERS: usize = 200;

/// Which procedure produced a [`CachingPolicy`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Kkt,
    ClosedForm,
    Outer,
    /// Built directly from user-supplied probabilities.
    Explicit,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Kkt => "kkt",
            Solver::ClosedForm => "closed_form",
            Solver::Outer => "outer",
            Solver::Explicit => "explicit",
        }
    }
}

/// Per-file cache probabilities with their budget and cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct CachingPolicy {
    probs: Vec<f64>,
    budget: f64,
    m_star: usize,
    multiplier: f64,
    solver: Solver,
    fallback: bool,
}

impl CachingPolicy {
    /// Wraps explicit probabilities; the budget is their sum.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::param("policy must cover at least one file"));
        }
        if let Some((f, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, &p)| !(0.0..=1.0).contains(&p))
        {
            return Err(Error::Infeasible(format!(
                "cache probability {p} of file {} outside [0, 1]",
                f + 1
            )));
        }
        let budget = compensated_sum(probs.iter().copied());
        Ok(Self {
            m_star: cutoff(&probs),
            probs,
            budget,
            multiplier: f64::NAN,
            solver: Solver::Explicit,
            fallback: false,
        })
    }

    /// `P_c(f) = S/M` for every file.
    pub fn uniform(library_size: usize, budget: f64) -> Result<Self> {
        check_budget(library_size, budget)?;
        Self::from_probs(vec![budget / library_size as f64; library_size])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Cache probability of file `f` (1-based).
    pub fn prob(&self, f: usize) -> f64 {
        self.probs[f - 1]
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn library_size(&self) -> usize {
        self.probs.len()
    }

    /// Number of files with nonzero cache probability.
    pub fn m_star(&self) -> usize {
        self.m_star
    }

    /// Water level `ν`: `P_c(f) = [ln(z_f/ν)]^+` for the outage-optimal policies and
    /// `P_c(f) = [1 - ν/z_f]^+` for the outer policy. NaN for explicit policies.
    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    pub fn solver(&self) -> Solver {
        self.solver
    }

    /// True when the closed form exceeded the unit cap and the exact solver was used instead.
    pub fn fallback(&self) -> bool {
        self.fallback
    }
}

fn cutoff(probs: &[f64]) -> usize {
    probs.iter().rposition(|&p| p > 0.0).map_or(0, |i| i + 1)
}

fn check_budget(library_size: usize, budget: f64) -> Result<()> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::param(format!(
            "cache size must be > 0, got {budget}"
        )));
    }
    if budget > library_size as f64 {
        return Err(Error::Infeasible(format!(
            "cache size {budget} exceeds library size {library_size}"
        )));
    }
    Ok(())
}

fn check_cluster(g_c: f64) -> Result<()> {
    if !(g_c > 0.0) || !g_c.is_finite() {
        return Err(Error::param(format!("cluster size must be > 0, got {g_c}")));
    }
    Ok(())
}

/// Root `C1 > 1` of `C1 = 1 + c2·ln(1 + C1/c2)`.
pub fn solve_c1(c2: f64, tol: f64) -> Result<f64> {
    if !(c2 > 0.0) || !c2.is_finite() {
        return Err(Error::param(format!("c2 must be > 0, got {c2}")));
    }
    if !(tol > 0.0) {
        return Err(Error::param(format!("tolerance must be > 0, got {tol}")));
    }
    let h = |c1: f64| c1 - 1.0 - c2 * (c1 / c2).ln_1p();
    let mut lo = 1.0;
    let mut hi = 1.0 + c2 * ((1.0 + 2.0 * c2) / c2).ln_1p() + 2.0 * c2.sqrt() + 2.0;
    debug_assert!(h(lo) < 0.0 && h(hi) > 0.0);
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let root = if h(hi).abs() < h(lo).abs() { hi } else { lo };
    if h(root).abs() > tol {
        return Err(Error::NoConvergence(format!(
            "C1 bisection residual {} above {tol}",
            h(root).abs()
        )));
    }
    Ok(root.max(1.0 + f64::EPSILON))
}

/// `C1` when the cluster size is chosen as `g_c = ρM/(C1·S)`.
///
/// Then `C2 = γ·D·C1/ρ` and the fixed point becomes linear in `C1`:
/// `C1 = 1 / (1 - (γD/ρ)·ln(1 + ρ/(γD)))`.
pub fn c1_for_rho(gamma: f64, d: f64, rho: f64) -> Result<f64> {
    if !(gamma > 0.0) || !(d >= 0.0) || !(rho > 0.0) {
        return Err(Error::param(format!(
            "need gamma > 0, D >= 0, rho > 0; got {gamma}, {d}, {rho}"
        )));
    }
    if d == 0.0 {
        return Ok(1.0);
    }
    let x = gamma * d / rho;
    Ok(1.0 / (1.0 - x * (1.0 / x).ln_1p()))
}

/// The constants tying cluster size to the regime parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeParams {
    pub c1: f64,
    /// `qγ/(S·g_c)`.
    pub c2: f64,
    pub g_c: f64,
    /// `C1·S·g_c/M`.
    pub rho: f64,
    /// `S·g_c/q`; infinite when `q = 0`.
    pub alpha1: f64,
    /// `q/M`.
    pub d: f64,
}

impl RegimeParams {
    pub fn new(gamma: f64, q: f64, library_size: usize, budget: f64, g_c: f64) -> Result<Self> {
        check_cluster(g_c)?;
        check_budget(library_size, budget)?;
        if !(gamma > 0.0) || !(q >= 0.0) {
            return Err(Error::param(format!(
                "need gamma > 0 and q >= 0; got {gamma}, {q}"
            )));
        }
        let m = library_size as f64;
        let c2 = q * gamma / (budget * g_c);
        let c1 = if c2 == 0.0 {
            1.0
        } else {
            solve_c1(c2, DEFAULT_TOL)?
        };
        Ok(Self {
            c1,
            c2,
            g_c,
            rho: c1 * budget * g_c / m,
            alpha1: if q == 0.0 {
                f64::INFINITY
            } else {
                budget * g_c / q
            },
            d: q / m,
        })
    }

    pub fn for_model(model: &PopularityModel, budget: f64, g_c: f64) -> Result<Self> {
        let (gamma, q) = mzipf_params(model)?;
        Self::new(gamma, q, model.library_size(), budget, g_c)
    }
}

pub(crate) fn mzipf_params(model: &PopularityModel) -> Result<(f64, f64)> {
    match (model.gamma(), model.plateau()) {
        (Some(g), Some(q)) => Ok((g, q)),
        _ => Err(Error::param("operation requires an MZipf model")),
    }
}

/// `P_c(f) = clamp(a_f - t, 0, 1)` summed, where `a_f = ln z_f`.
fn capped_mass(log_z: &[f64], t: f64) -> f64 {
    compensated_sum(log_z.iter().map(|&a| (a - t).clamp(0.0, 1.0)))
}

/// Exact outage-minimizing policy with the unit cap enforced.
pub fn optimal_policy_kkt(
    model: &PopularityModel,
    g_c: f64,
    budget: f64,
    tol: f64,
) -> Result<CachingPolicy> {
    kkt_from_pmf(model.pmf(), g_c, budget, tol)
}

pub(crate) fn kkt_from_pmf(pmf: &[f64], g_c: f64, budget: f64, tol: f64) -> Result<CachingPolicy> {
    check_cluster(g_c)?;
    check_budget(pmf.len(), budget)?;
    if !(tol > 0.0) {
        return Err(Error::param(format!("tolerance must be > 0, got {tol}")));
    }
    let log_z: Vec<f64> = pmf.iter().map(|p| p.ln() / g_c).collect();
    let a_max = log_z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a_min = log_z.iter().copied().fold(f64::INFINITY, f64::min);

    // Mass is M at t = a_min - 1 and 0 at t = a_max.
    let (mut lo, mut hi) = (a_min - 1.0, a_max);
    let mut t = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..MAX_BISECTION_ITERS {
        t = 0.5 * (lo + hi);
        let mass = capped_mass(&log_z, t);
        if (mass - budget).abs() <= 0.25 * tol || hi - lo <= f64::EPSILON * t.abs().max(1.0) {
            converged = true;
            break;
        }
        if mass > budget {
            lo = t;
        } else {
            hi = t;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(
            "water level bisection exhausted".into(),
        ));
    }
    let t = polish_level(&log_z, budget, t);

    let probs: Vec<f64> = log_z.iter().map(|&a| (a - t).clamp(0.0, 1.0)).collect();
    let total = compensated_sum(probs.iter().copied());
    if (total - budget).abs() > tol {
        return Err(Error::NoConvergence(format!(
            "budget mismatch {} after solve",
            (total - budget).abs()
        )));
    }
    Ok(CachingPolicy {
        m_star: cutoff(&probs),
        probs,
        budget,
        multiplier: t.exp(),
        solver: Solver::Kkt,
        fallback: false,
    })
}

/// Recomputes the level exactly from the active sets identified by bisection.
fn polish_level(log_z: &[f64], budget: f64, mut t: f64) -> f64 {
    let gap = |t: f64| (capped_mass(log_z, t) - budget).abs();
    for _ in 0..8 {
        let mut interior = CompensatedSum::new();
        let mut n_interior = 0usize;
        let mut n_capped = 0usize;
        for &a in log_z {
            let p = a - t;
            if p >= 1.0 {
                n_capped += 1;
            } else if p > 0.0 {
                interior.add(a);
                n_interior += 1;
            }
        }
        if n_interior == 0 {
            return t;
        }
        let next = (interior.value() + n_capped as f64 - budget) / n_interior as f64;
        if next == t || gap(next) > gap(t) {
            return t;
        }
        t = next;
    }
    t
}

/// Water-filling closed form without the unit cap; exact solver used if the cap would bind.
pub fn optimal_policy_closed_form(
    model: &PopularityModel,
    g_c: f64,
    budget: f64,
) -> Result<CachingPolicy> {
    let pmf = model.pmf();
    check_cluster(g_c)?;
    check_budget(pmf.len(), budget)?;
    let log_z: Vec<f64> = pmf.iter().map(|p| p.ln() / g_c).collect();

    let mut prefix = CompensatedSum::new();
    let mut level = None;
    for (i, &a) in log_z.iter().enumerate() {
        prefix.add(a);
        let m = (i + 1) as f64;
        let t = (prefix.value() - budget) / m;
        let next_off = log_z.get(i + 1).is_none_or(|&b| b <= t);
        if a > t && next_off {
            level = Some(t);
            break;
        }
    }

    let fallback = || -> Result<CachingPolicy> {
        let mut p = kkt_from_pmf(pmf, g_c, budget, DEFAULT_TOL)?;
        p.fallback = true;
        Ok(p)
    };
    let Some(t) = level else {
        return fallback();
    };
    let probs: Vec<f64> = log_z.iter().map(|&a| (a - t).max(0.0)).collect();
    if probs.iter().any(|&p| p > 1.0 + 1e-12) {
        return fallback();
    }
    let probs: Vec<f64> = probs.into_iter().map(|p| p.min(1.0)).collect();
    Ok(CachingPolicy {
        m_star: cutoff(&probs),
        probs,
        budget,
        multiplier: t.exp(),
        solver: Solver::ClosedForm,
        fallback: false,
    })
}

/// Order predictor `round(min(C1·S·g_c/γ, M))` for the cutoff, hidden constant taken as 1.
pub fn m_star_theory(model: &PopularityModel, g_c: f64, budget: f64) -> Result<usize> {
    let (gamma, _) = mzipf_params(model)?;
    let regime = RegimeParams::for_model(model, budget, g_c)?;
    let m = model.library_size() as f64;
    Ok((regime.c1 * budget * g_c / gamma).min(m).round() as usize)
}

/// Largest relative spread of `g_c·P_r(f)·exp(-g_c·P_c(f))` across interior coordinates.
///
/// Zero when at most one coordinate is strictly inside `(0, 1)`.
pub fn kkt_residual(pmf: &[f64], policy: &CachingPolicy, g_c: f64) -> Result<f64> {
    if pmf.len() != policy.library_size() {
        return Err(Error::DimensionMismatch {
            expected: pmf.len(),
            got: policy.library_size(),
        });
    }
    let grads: Vec<f64> = pmf
        .iter()
        .zip(policy.probs())
        .filter(|(_, &c)| c > 0.0 && c < 1.0)
        .map(|(&p, &c)| g_c * p * (-g_c * c).exp())
        .collect();
    if grads.len() < 2 {
        return Ok(0.0);
    }
    let max = grads.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = grads.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((max - min) / max)
}

/// Minimizer of the miss probability `Σ P_r(f)(1 - P_c(f))^{n_s}` under the cache budget.
pub fn outer_policy(model: &PopularityModel, n_s: u64, budget: f64) -> Result<CachingPolicy> {
    outer_from_pmf(model.pmf(), n_s, budget)
}

pub(crate) fn outer_from_pmf(pmf: &[f64], n_s: u64, budget: f64) -> Result<CachingPolicy> {
    if n_s < 2 {
        return Err(Error::param(format!("search size must be >= 2, got {n_s}")));
    }
    check_budget(pmf.len(), budget)?;
    if budget >= pmf.len() as f64 {
        return Err(Error::param(
            "outer policy needs cache size below library size",
        ));
    }
    let exponent = 1.0 / (n_s - 1) as f64;
    // z_f / z_1, bounded in (0, 1].
    let w: Vec<f64> = pmf
        .iter()
        .map(|&p| ((p / pmf[0]).ln() * exponent).exp())
        .collect();

    let mut inv_sum = CompensatedSum::new();
    let mut level = None;
    for (i, &wf) in w.iter().enumerate() {
        inv_sum.add(1.0 / wf);
        let m = (i + 1) as f64;
        if m <= budget {
            continue;
        }
        let nu = (m - budget) / inv_sum.value();
        let next_off = w.get(i + 1).is_none_or(|&b| b <= nu);
        if wf > nu && next_off {
            level = Some(nu);
            break;
        }
    }
    let nu = level.ok_or_else(|| Error::NoConvergence("outer policy cutoff not found".into()))?;
    let probs: Vec<f64> = w.iter().map(|&wf| (1.0 - nu / wf).max(0.0)).collect();
    if probs.iter().any(|&p| p > 1.0) {
        return Err(Error::Infeasible(
            "outer policy exceeds the unit cap".into(),
        ));
    }
    Ok(CachingPolicy {
        m_star: cutoff(&probs),
        probs,
        budget,
        multiplier: nu * (pmf[0].ln() * exponent).exp(),
        solver: Solver::Outer,
        fallback: false,
    })
}

/// [`optimal_policy_kkt`] for a raw pmf.
pub fn kkt_policy_for_pmf(pmf: &[f64], g_c: f64, budget: f64, tol: f64) -> Result<CachingPolicy> {
    validate_pmf(pmf)?;
    kkt_from_pmf(pmf, g_c, budget, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn objective(pmf: &[f64], probs: &[f64], g_c: f64) -> f64 {
        pmf.iter()
            .zip(probs)
            .map(|(p, c)| p * (-g_c * c).exp())
            .sum()
    }

    #[test]
    fn c1_reference_values() {
        let c1 = solve_c1(1.0, 1e-12).unwrap();
        assert_relative_eq!(c1, 2.14619322062058, epsilon = 1e-10);
        let c1 = solve_c1(100.0, 1e-12).unwrap();
        assert!((c1 / 200f64.sqrt() - 1.0).abs() < 0.15, "{c1}");
        let c1 = solve_c1(1e-9, 1e-12).unwrap();
        assert!(c1 > 1.0 && c1 < 1.0 + 1e-6);
        assert!(solve_c1(0.0, 1e-10).is_err());
        assert!(solve_c1(-1.0, 1e-10).is_err());
    }

    #[test]
    fn c1_for_rho_matches_fixed_point() {
        for &(gamma, d, rho) in &[
            (0.6, 0.1, 1.0),
            (0.6, 0.1, 3.0),
            (0.8, 0.5, 0.9),
            (0.3, 0.01, 5.0),
        ] {
            let c1 = c1_for_rho(gamma, d, rho).unwrap();
            let c2 = gamma * d * c1 / rho;
            assert_relative_eq!(c1, solve_c1(c2, 1e-13).unwrap(), epsilon = 1e-9);
        }
        assert_eq!(c1_for_rho(0.6, 0.0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn two_file_cap_binds() {
        let model = PopularityModel::from_pmf(vec![0.75, 0.25]).unwrap();
        let p = optimal_policy_kkt(&model, 1.0, 1.0, DEFAULT_TOL).unwrap();
        assert_relative_eq!(p.probs()[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.probs()[1], 0.0, epsilon = 1e-12);
        assert_eq!(p.m_star(), 1);
        let cf = optimal_policy_closed_form(&model, 1.0, 1.0).unwrap();
        assert_relative_eq!(cf.probs()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_falls_back_when_cap_binds() {
        let model = PopularityModel::from_pmf(vec![0.7, 0.2, 0.1]).unwrap();
        let cf = optimal_policy_closed_form(&model, 1.0, 2.0).unwrap();
        assert!(cf.fallback());
        let kkt = optimal_policy_kkt(&model, 1.0, 2.0, DEFAULT_TOL).unwrap();
        assert_eq!(cf.probs(), kkt.probs());
        assert_relative_eq!(cf.probs()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn uniform_pmf_gives_uniform_policy() {
        let model = PopularityModel::mzipf(1e-13, 0.0, 10).unwrap();
        for &(g_c, s) in &[(0.5, 1.0), (7.0, 3.0), (200.0, 2.5)] {
            let p = optimal_policy_kkt(&model, g_c, s, DEFAULT_TOL).unwrap();
            for &x in p.probs() {
                assert_relative_eq!(x, s / 10.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn saturated_cutoff_uses_full_library() {
        let model = PopularityModel::mzipf(0.6, 10.0, 50).unwrap();
        let p = optimal_policy_closed_form(&model, 1000.0, 1.0).unwrap();
        assert_eq!(p.m_star(), 50);
        let log_z: Vec<f64> = model.pmf().iter().map(|x| x.ln() / 1000.0).collect();
        let t = (log_z.iter().sum::<f64>() - 1.0) / 50.0;
        assert_relative_eq!(p.multiplier(), t.exp(), epsilon = 1e-12);
        assert!(p.probs().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn m_star_theory_hand_values() {
        let model = PopularityModel::zipf(0.5, 1000).unwrap();
        assert_eq!(m_star_theory(&model, 100.0, 1.0).unwrap(), 200);
        assert_eq!(m_star_theory(&model, 1e6, 1.0).unwrap(), 1000);

        let model = PopularityModel::mzipf(0.6, 500.0, 5000).unwrap();
        let theory = m_star_theory(&model, 600.0, 1.0).unwrap() as f64;
        let exact = optimal_policy_kkt(&model, 600.0, 1.0, DEFAULT_TOL)
            .unwrap()
            .m_star() as f64;
        assert!((theory / exact - 1.0).abs() < 0.1, "{theory} vs {exact}");
    }

    #[test]
    fn bad_inputs_rejected() {
        let model = PopularityModel::zipf(0.8, 5).unwrap();
        assert!(matches!(
            optimal_policy_kkt(&model, 1.0, 6.0, DEFAULT_TOL),
            Err(Error::Infeasible(_))
        ));
        assert!(optimal_policy_kkt(&model, 0.0, 1.0, DEFAULT_TOL).is_err());
        assert!(optimal_policy_kkt(&model, 1.0, 0.0, DEFAULT_TOL).is_err());
        assert!(outer_policy(&model, 1, 1.0).is_err());
        assert!(outer_policy(&model, 3, 5.0).is_err());
    }

    #[test]
    fn full_budget_caches_everything() {
        let model = PopularityModel::zipf(1.2, 4).unwrap();
        let p = optimal_policy_kkt(&model, 3.0, 4.0, DEFAULT_TOL).unwrap();
        assert!(p.probs().iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn outer_policy_three_file_reference() {
        let model = PopularityModel::mzipf(1.0, 1.0, 3).unwrap();
        let p = outer_policy(&model, 3, 1.0).unwrap();
        for (got, want) in p.probs().iter().zip([0.45039218, 0.32687065, 0.22273717]) {
            assert_relative_eq!(*got, want, epsilon = 1e-8);
        }
        assert_relative_eq!(p.budget(), 1.0);
    }

    #[test]
    fn outer_policy_uniform_is_uniform() {
        let model = PopularityModel::mzipf(1e-13, 0.0, 8).unwrap();
        let p = outer_policy(&model, 5, 3.0).unwrap();
        for &x in p.probs() {
            assert_relative_eq!(x, 3.0 / 8.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn outer_cutoff_grows_with_search_size() {
        let model = PopularityModel::mzipf(1.4, 5.0, 400).unwrap();
        let cutoffs: Vec<usize> = [2u64, 4, 8, 16, 64, 256, 4096]
            .iter()
            .map(|&n| outer_policy(&model, n, 2.0).unwrap().m_star())
            .collect();
        assert!(cutoffs.windows(2).all(|w| w[0] <= w[1]), "{cutoffs:?}");
        assert_eq!(*cutoffs.last().unwrap(), 400);
    }

    proptest! {
        #[test]
        fn kkt_policy_invariants(
            gamma in 0.1f64..2.5,
            q in 0.0f64..50.0,
            m in 2usize..300,
            g_c in 0.2f64..500.0,
            frac in 0.01f64..1.0,
        ) {
            let model = PopularityModel::mzipf(gamma, q, m).unwrap();
            let s = (frac * m as f64).max(0.5);
            let p = optimal_policy_kkt(&model, g_c, s, DEFAULT_TOL).unwrap();
            prop_assert!(p.probs().iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!((compensated_sum(p.probs().iter().copied()) - s).abs() <= 1e-9);
            prop_assert!(p.probs().windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(p.probs()[p.m_star() - 1] > 0.0);
            prop_assert!(p.probs()[p.m_star()..].iter().all(|&x| x == 0.0));
            prop_assert!(kkt_residual(model.pmf(), &p, g_c).unwrap() <= 1e-8);

            let cf = optimal_policy_closed_form(&model, g_c, s).unwrap();
            if !cf.fallback() {
                let sup = cf.probs().iter().zip(p.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                prop_assert!(sup <= 1e-6, "sup-norm gap {}", sup);
            }
        }

        #[test]
        fn outer_policy_beats_perturbations(
            gamma in 0.2f64..2.0,
            m in 3usize..40,
            n_s in 2u64..50,
            shift in 0.0f64..0.05,
        ) {
            let model = PopularityModel::zipf(gamma, m).unwrap();
            let p = outer_policy(&model, n_s, 1.0).unwrap();
            let miss = |c: &[f64]| -> f64 {
                model.pmf().iter().zip(c).map(|(r, x)| r * (1.0 - x).powi(n_s as i32)).sum()
            };
            let base = miss(p.probs());
            // Move mass between the first and last cached file.
            let mut c = p.probs().to_vec();
            let last = p.m_star() - 1;
            let delta = shift.min(c[last]).min(1.0 - c[0]);
            c[0] += delta;
            c[last] -= delta;
            prop_assert!(miss(&c) >= base - 1e-14);
            prop_assert!((compensated_sum(p.probs().iter().copied()) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn kkt_beats_pairwise_transfers(gamma in 0.2f64..2.0, m in 2usize..30, g_c in 0.5f64..30.0, i in 0usize..30, j in 0usize..30, eps in 0.0f64..0.2) {
            let model = PopularityModel::zipf(gamma, m).unwrap();
            let p = optimal_policy_kkt(&model, g_c, 1.0, DEFAULT_TOL).unwrap();
            let (i, j) = (i % m, j % m);
            let mut c = p.probs().to_vec();
            let delta = eps.min(c[i]).min(1.0 - c[j]);
            c[i] -= delta;
            c[j] += delta;
            prop_assert!(objective(model.pmf(), &c, g_c) >= objective(model.pmf(), p.probs(), g_c) - 1e-13);
        }
    }
}
