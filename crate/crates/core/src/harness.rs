//! Experiment orchestration: sweeps, confidence intervals, scaling fits and CSV output.
//!
//! An [`ExperimentConfig`] names a popularity model, a sweep over cluster sizes (given
//! directly or through the regime parameters `ρ` and `α1`) and a trial count. Every sweep
//! point gets one [`SummaryRow`] holding the simulated statistics next to the matching theory
//! values. Trial `t` of point `p` is seeded from `(master_seed, p, t)` alone, and aggregation
//! runs over ordered vectors, so output is identical at any thread count.

use std::io::Write;
use std::path::Path;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{
    outage_exact, outage_expr_gamma_gt1, outage_expr_general, outage_upper_gamma_lt1,
};
use crate::error::{Error, Result};
use crate::numeric::{mix_seed, pairwise_sum};
use crate::policy::{
    c1_for_rho, m_star_theory, optimal_policy_closed_form, optimal_policy_kkt, RegimeParams,
    DEFAULT_TOL,
};
use crate::popularity::PopularityModel;
use crate::sim::{simulate_pair, ClusterConfig, TrialResult};
use crate::stats::{
    fit_scaling_exponent, mean_and_se, normal_interval, wilson_interval, PowerLawFit, Z95,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OutageValidation,
    MStarValidation,
    Tradeoff,
    SingleHopCompare,
    ScalingFit,
}

/// How cluster sizes are chosen across sweep points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sweep {
    /// Cluster sizes given directly.
    ClusterSize { values: Vec<f64> },
    /// `g_c = ρM/(C1·S)`.
    Rho { values: Vec<f64> },
    /// `g_c = α1·q/S`.
    Alpha1 { values: Vec<f64> },
    /// Library sizes at fixed `ρ`, with the plateau growing as `q = plateau_ratio·M`.
    LibrarySize {
        values: Vec<usize>,
        rho: f64,
        plateau_ratio: f64,
    },
    /// Plateau factors at fixed `α1` and library size.
    Plateau { values: Vec<f64>, alpha1: f64 },
}

impl Sweep {
    fn name(&self) -> &'static str {
        match self {
            Sweep::ClusterSize { .. } => "g_c",
            Sweep::Rho { .. } => "rho",
            Sweep::Alpha1 { .. } => "alpha1",
            Sweep::LibrarySize { .. } => "library_size",
            Sweep::Plateau { .. } => "q",
        }
    }

    fn len(&self) -> usize {
        match self {
            Sweep::ClusterSize { values } | Sweep::Rho { values } | Sweep::Alpha1 { values } => {
                values.len()
            }
            Sweep::LibrarySize { values, .. } => values.len(),
            Sweep::Plateau { values, .. } => values.len(),
        }
    }
}

fn default_per_side() -> usize {
    1
}
fn default_reuse() -> u32 {
    4
}
fn default_c0() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub gamma: f64,
    pub q: f64,
    pub library_size: usize,
    pub cache_size: usize,
    pub sweep: Sweep,
    /// Clusters per side of the network; the PPP density is `g_c` times its square.
    #[serde(default = "default_per_side")]
    pub clusters_per_side: usize,
    #[serde(default = "default_reuse")]
    pub reuse: u32,
    #[serde(default = "default_c0")]
    pub c0: f64,
    pub trials: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Err(Error::config(field, reason));
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad("gamma", format!("must be > 0, got {}", self.gamma));
        }
        if !(self.q >= 0.0) || !self.q.is_finite() {
            return bad("q", format!("must be >= 0, got {}", self.q));
        }
        if self.library_size == 0 {
            return bad("library_size", "must be >= 1".into());
        }
        if self.cache_size == 0 {
            return bad("cache_size", "must be >= 1".into());
        }
        if self.trials == 0 {
            return bad("trials", "must be >= 1".into());
        }
        if self.clusters_per_side == 0 {
            return bad("clusters_per_side", "must be >= 1".into());
        }
        if self.sweep.len() == 0 {
            return bad("sweep.values", "sweep is empty".into());
        }
        let positive = |xs: &[f64]| xs.iter().all(|x| *x > 0.0 && x.is_finite());
        match &self.sweep {
            Sweep::ClusterSize { values } | Sweep::Rho { values } | Sweep::Alpha1 { values } => {
                if !positive(values) {
                    return bad("sweep.values", "values must be positive".into());
                }
            }
            Sweep::LibrarySize {
                values,
                rho,
                plateau_ratio,
            } => {
                if values.iter().any(|&m| m < self.cache_size) {
                    return bad("sweep.values", "library sizes must be >= cache_size".into());
                }
                if !(*rho > 0.0) || !(*plateau_ratio >= 0.0) {
                    return bad("sweep", "need rho > 0 and plateau_ratio >= 0".into());
                }
            }
            Sweep::Plateau { values, alpha1 } => {
                if !positive(values) || !(*alpha1 > 0.0) {
                    return bad("sweep", "plateau values and alpha1 must be positive".into());
                }
            }
        }
        if matches!(self.sweep, Sweep::Alpha1 { .. }) && self.q == 0.0 {
            return bad("q", "an alpha1 sweep needs q > 0".into());
        }
        if self.cache_size > self.library_size && !matches!(self.sweep, Sweep::LibrarySize { .. }) {
            return bad("cache_size", "exceeds library_size".into());
        }
        if self.mode == Mode::ScalingFit && self.sweep.len() < 4 {
            return bad(
                "sweep.values",
                "a scaling fit needs at least 4 points".into(),
            );
        }
        let probe = ClusterConfig {
            reuse: self.reuse,
            c0: self.c0,
            ..ClusterConfig::tiled(1.0, self.clusters_per_side)
        };
        probe.validate()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_string(self)?;
        let digest = Sha256::digest(json.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    fn points(&self) -> Result<Vec<PointSpec>> {
        let s = self.cache_size as f64;
        let base = |x: f64, g_c: f64| PointSpec {
            sweep_value: x,
            gamma: self.gamma,
            q: self.q,
            library_size: self.library_size,
            g_c,
        };
        let m = self.library_size as f64;
        let d = self.q / m;
        match &self.sweep {
            Sweep::ClusterSize { values } => Ok(values.iter().map(|&g| base(g, g)).collect()),
            Sweep::Rho { values } => values
                .iter()
                .map(|&rho| Ok(base(rho, rho * m / (c1_for_rho(self.gamma, d, rho)? * s))))
                .collect(),
            Sweep::Alpha1 { values } => {
                Ok(values.iter().map(|&a| base(a, a * self.q / s)).collect())
            }
            Sweep::LibrarySize {
                values,
                rho,
                plateau_ratio,
            } => values
                .iter()
                .map(|&lib| {
                    let c1 = c1_for_rho(self.gamma, *plateau_ratio, *rho)?;
                    Ok(PointSpec {
                        sweep_value: lib as f64,
                        gamma: self.gamma,
                        q: plateau_ratio * lib as f64,
                        library_size: lib,
                        g_c: rho * lib as f64 / (c1 * s),
                    })
                })
                .collect(),
            Sweep::Plateau { values, alpha1 } => Ok(values
                .iter()
                .map(|&q| PointSpec {
                    q,
                    ..base(q, alpha1 * q / s)
                })
                .collect()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct PointSpec {
    sweep_value: f64,
    gamma: f64,
    q: f64,
    library_size: usize,
    g_c: f64,
}

/// Seed of trial `trial` at sweep point `point`.
pub fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    mix_seed(mix_seed(master ^ mix_seed(point as u64)) ^ trial as u64)
}

/// One sweep point. Simulation columns are empty in `m_star_validation` mode and theory
/// columns are empty where no expression applies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub point: usize,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub gamma: f64,
    pub q: f64,
    pub library_size: usize,
    pub cache_size: usize,
    pub g_c: f64,
    pub density: f64,
    pub trials: usize,
    pub m_star_kkt: usize,
    pub m_star_closed_form: usize,
    pub m_star_theory: usize,
    /// Closed-form cutoff over the exact cutoff.
    pub m_star_ratio: f64,
    pub closed_form_fallback: bool,
    pub outage_exact: f64,
    pub outage_theory: Option<f64>,
    pub outage_theory_label: String,
    pub outage_theory_valid: bool,
    pub outage_general: Option<f64>,
    pub outage_sim_mean: Option<f64>,
    pub outage_sim_se: Option<f64>,
    pub outage_ci_lower: Option<f64>,
    pub outage_ci_upper: Option<f64>,
    pub throughput_sim_mean: Option<f64>,
    pub throughput_ci_lower: Option<f64>,
    pub throughput_ci_upper: Option<f64>,
    pub effective_throughput_mean: Option<f64>,
    pub effective_ci_lower: Option<f64>,
    pub effective_ci_upper: Option<f64>,
    pub single_hop_throughput_mean: Option<f64>,
    pub single_hop_effective_mean: Option<f64>,
    pub mean_max_load: Option<f64>,
    pub throughput_theory: f64,
    pub throughput_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub rows: Vec<SummaryRow>,
    pub fit: Option<PowerLawFit>,
}

/// Writes `records` as CSV with a header row taken from the field names.
pub fn write_records<T: Serialize, W: Write>(records: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl ExperimentSummary {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_records(&self.rows, out)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    /// Writes `path` and a `path.json` sidecar echoing the config, hash and fit.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        self.write_csv(std::fs::File::create(path)?)?;
        let sidecar = serde_json::json!({
            "config": self.config,
            "config_hash": self.config_hash,
            "fit": self.fit,
        });
        let mut json_path = path.as_os_str().to_owned();
        json_path.push(".json");
        std::fs::write(json_path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
        Ok(())
    }
}

/// Regime expression for the outage at one point, with its label and validity.
struct RegimeOutage {
    value: Option<f64>,
    label: &'static str,
    valid: bool,
    general: Option<f64>,
}

/// Picks the closed-form outage that applies to `(γ, q)`.
///
/// `γ < 1`: the upper bound, valid when `ρ = C1·S·g_c/M ≥ γ`. `γ > 1`: the `o(M)` limit, valid
/// when `q < M` and the predicted cutoff stays below `M/20`. The general expression is
/// reported wherever `g_c < γM/(C1·S)`.
fn regime_outage(model: &PopularityModel, spec: &PointSpec, s: f64) -> Result<RegimeOutage> {
    let r = RegimeParams::for_model(model, s, spec.g_c)?;
    let m = spec.library_size as f64;
    let general = if spec.gamma != 1.0 && r.c1 * s * spec.g_c < spec.gamma * m {
        outage_expr_general(spec.gamma, r.c1, r.c2, spec.g_c / m, s).ok()
    } else {
        None
    };
    let out = if spec.gamma < 1.0 {
        let valid = r.rho >= spec.gamma;
        RegimeOutage {
            value: outage_upper_gamma_lt1(spec.gamma, r.d, r.rho.max(spec.gamma), r.c1)
                .ok()
                .filter(|_| valid),
            label: "upper_bound_gamma_lt1",
            valid,
            general,
        }
    } else if spec.gamma > 1.0 && spec.q > 0.0 {
        let cutoff = m_star_theory(model, spec.g_c, s)? as f64;
        RegimeOutage {
            value: Some(outage_expr_gamma_gt1(spec.gamma, r.c1, r.c2)?.value),
            label: "limit_gamma_gt1",
            valid: spec.q < m && cutoff <= m / 20.0,
            general,
        }
    } else {
        RegimeOutage {
            value: None,
            label: "none",
            valid: false,
            general,
        }
    };
    Ok(out)
}

fn simulate_point(
    config: &ExperimentConfig,
    point: usize,
    model: &PopularityModel,
    policy: &crate::policy::CachingPolicy,
    cluster: &ClusterConfig,
) -> Result<Vec<(TrialResult, TrialResult)>> {
    (0..config.trials)
        .into_par_iter()
        .map(|t| {
            simulate_pair(
                model,
                policy,
                cluster,
                config.cache_size,
                trial_seed(config.master_seed, point, t),
            )
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Runs every sweep point and attaches theory values.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let s = config.cache_size as f64;
    let per_side = config.clusters_per_side;
    let mut rows = Vec::new();
    for (i, spec) in config.points()?.into_iter().enumerate() {
        if config.cache_size > spec.library_size {
            return Err(Error::config(
                "cache_size",
                "exceeds library size at a sweep point",
            ));
        }
        let model = PopularityModel::mzipf(spec.gamma, spec.q, spec.library_size)?;
        let policy = optimal_policy_closed_form(&model, spec.g_c, s)?;
        let kkt = optimal_policy_kkt(&model, spec.g_c, s, DEFAULT_TOL)?;
        let m_theory = m_star_theory(&model, spec.g_c, s)?;
        let exact = outage_exact(&model, &policy, spec.g_c)?;
        let regime = regime_outage(&model, &spec, s)?;
        let cluster = ClusterConfig {
            reuse: config.reuse,
            c0: config.c0,
            ..ClusterConfig::tiled(spec.g_c, per_side)
        };
        let throughput_theory = (1.0 - exact) / spec.g_c.sqrt();

        let mut row = SummaryRow {
            point: i,
            sweep_param: config.sweep.name().to_string(),
            sweep_value: spec.sweep_value,
            gamma: spec.gamma,
            q: spec.q,
            library_size: spec.library_size,
            cache_size: config.cache_size,
            g_c: spec.g_c,
            density: cluster.density,
            trials: config.trials,
            m_star_kkt: kkt.m_star(),
            m_star_closed_form: policy.m_star(),
            m_star_theory: m_theory,
            m_star_ratio: policy.m_star() as f64 / kkt.m_star() as f64,
            closed_form_fallback: policy.fallback(),
            outage_exact: exact,
            outage_theory: regime.value,
            outage_theory_label: regime.label.to_string(),
            outage_theory_valid: regime.valid,
            outage_general: regime.general,
            outage_sim_mean: None,
            outage_sim_se: None,
            outage_ci_lower: None,
            outage_ci_upper: None,
            throughput_sim_mean: None,
            throughput_ci_lower: None,
            throughput_ci_upper: None,
            effective_throughput_mean: None,
            effective_ci_lower: None,
            effective_ci_upper: None,
            single_hop_throughput_mean: None,
            single_hop_effective_mean: None,
            mean_max_load: None,
            throughput_theory,
            throughput_ratio: None,
        };

        if config.mode != Mode::MStarValidation {
            info!(
                "point {i}: {} = {}, g_c = {:.3}, {} trials",
                config.sweep.name(),
                spec.sweep_value,
                spec.g_c,
                config.trials
            );
            let results = simulate_point(config, i, &model, &policy, &cluster)?;
            let outage: Vec<f64> = results.iter().map(|(m, _)| m.outage_fraction).collect();
            let sym: Vec<f64> = results.iter().map(|(m, _)| m.sym_throughput).collect();
            let eff: Vec<f64> = results
                .iter()
                .map(|(m, _)| m.sym_throughput * (1.0 - m.outage_fraction))
                .collect();
            let single: Vec<f64> = results.iter().map(|(_, s)| s.sym_throughput).collect();
            let single_eff: Vec<f64> = results
                .iter()
                .map(|(_, s)| s.sym_throughput * (1.0 - s.outage_fraction))
                .collect();
            let loads: Vec<f64> = results.iter().map(|(m, _)| m.max_load as f64).collect();

            let (o_mean, o_se) = mean_and_se(&outage);
            let o_ci = wilson_interval(o_mean, config.trials, Z95);
            let t_ci = normal_interval(&sym, Z95);
            let e_ci = normal_interval(&eff, Z95);
            let e_mean = mean(&eff);
            row.outage_sim_mean = Some(o_mean);
            row.outage_sim_se = Some(o_se);
            row.outage_ci_lower = Some(o_ci.lower);
            row.outage_ci_upper = Some(o_ci.upper);
            row.throughput_sim_mean = Some(mean(&sym));
            row.throughput_ci_lower = Some(t_ci.lower);
            row.throughput_ci_upper = Some(t_ci.upper);
            row.effective_throughput_mean = Some(e_mean);
            row.effective_ci_lower = Some(e_ci.lower);
            row.effective_ci_upper = Some(e_ci.upper);
            row.single_hop_throughput_mean = Some(mean(&single));
            row.single_hop_effective_mean = Some(mean(&single_eff));
            row.mean_max_load = Some(mean(&loads));
            row.throughput_ratio = (e_mean > 0.0).then(|| throughput_theory / e_mean);
        }
        rows.push(row);
    }

    let fit = if config.mode == Mode::ScalingFit {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.sweep_value, r.throughput_sim_mean.unwrap_or(0.0)))
            .collect();
        Some(fit_scaling_exponent(&points)?)
    } else {
        None
    };
    Ok(ExperimentSummary {
        config: config.clone(),
        config_hash: config.hash()?,
        rows,
        fit,
    })
}

/// Closed-form, exact and predicted cutoffs over a grid of models and cluster sizes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MStarRow {
    pub gamma: f64,
    pub q: f64,
    pub library_size: usize,
    pub g_c: f64,
    pub m_star_theory: usize,
    pub m_star_kkt: usize,
    pub m_star_closed_form: usize,
    /// Closed-form cutoff over the exact cutoff.
    pub ratio: f64,
    /// Order predictor over the exact cutoff.
    pub theory_ratio: f64,
}

pub fn m_star_report(
    models: &[PopularityModel],
    g_cs: &[f64],
    cache_size: f64,
) -> Result<Vec<MStarRow>> {
    let mut out = Vec::with_capacity(models.len() * g_cs.len());
    for model in models {
        let gamma = model
            .gamma()
            .ok_or_else(|| Error::param("m* report needs MZipf models"))?;
        for &g_c in g_cs {
            let theory = m_star_theory(model, g_c, cache_size)?;
            let kkt = optimal_policy_kkt(model, g_c, cache_size, DEFAULT_TOL)?.m_star();
            let closed = optimal_policy_closed_form(model, g_c, cache_size)?.m_star();
            out.push(MStarRow {
                gamma,
                q: model.plateau().unwrap_or(0.0),
                library_size: model.library_size(),
                g_c,
                m_star_theory: theory,
                m_star_kkt: kkt,
                m_star_closed_form: closed,
                ratio: closed as f64 / kkt as f64,
                theory_ratio: theory as f64 / kkt as f64,
            });
        }
    }
    Ok(out)
}
