//! Subcommand implementations.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::Result;
use d2dcache::analytics::{
    achievable_curve, outage_exact, outage_expr_general, outage_gamma_gt1_alpha,
    outage_upper_gamma_lt1, outer_curve, p_miss_exact, p_miss_lower_gamma_gt1, Regime,
};
use d2dcache::harness::{
    run_experiment, trial_seed, write_records, ExperimentConfig, ExperimentSummary, Mode, Sweep,
};
use d2dcache::numeric::pairwise_sum;
use d2dcache::policy::{
    c1_for_rho, optimal_policy_closed_form, optimal_policy_kkt, RegimeParams, DEFAULT_TOL,
};
use d2dcache::sim::{simulate_trial, ClusterConfig, RateMode, TrialResult};
use d2dcache::PopularityModel;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, apply_overrides};
use crate::{Cli, Command, GlobalArgs, ModelArgs, UsageError};

#[derive(Serialize)]
struct PolicyRow {
    file: usize,
    request_prob: f64,
    cache_prob: f64,
    m_star: usize,
    multiplier: f64,
    solver: &'static str,
    fallback: bool,
}

#[derive(Serialize)]
struct Quantity {
    name: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct CurveRow {
    kind: &'static str,
    regime: &'static str,
    param: f64,
    outage: f64,
    throughput: f64,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn output_path(global: &GlobalArgs, name: &str) -> PathBuf {
    global
        .output
        .clone()
        .unwrap_or_else(|| global.out_dir.join(format!("{name}.csv")))
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(File::create(path)?)
}

fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    write_records(rows, create(path)?)?;
    Ok(())
}

fn model_of(m: &ModelArgs) -> Result<PopularityModel> {
    Ok(PopularityModel::mzipf(m.gamma, m.q, m.library_size)?)
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (step * i as f64).exp()).collect()
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let global = &cli.global;
    match cli.command {
        Command::Policy { model, gc, solver } => policy(global, &model, gc, &solver),
        Command::Outage {
            gamma,
            d,
            rho_mult,
            alpha1,
            q,
            library_size,
            cache_size,
            gc,
        } => outage(
            global,
            gamma,
            d,
            rho_mult,
            alpha1,
            q,
            library_size,
            cache_size,
            gc,
        ),
        Command::Tradeoff {
            model,
            reuse,
            points,
        } => tradeoff(global, &model, reuse, points),
        Command::Simulate {
            model,
            gc,
            trials,
            seed,
            clusters_per_side,
            reuse,
            c0,
            physical,
        } => {
            let cluster = ClusterConfig {
                reuse,
                c0,
                mode: if physical {
                    RateMode::Physical
                } else {
                    RateMode::Normalized
                },
                ..ClusterConfig::tiled(gc, clusters_per_side)
            };
            simulate(global, &model, &cluster, trials, seed)
        }
        Command::Sweep {
            config,
            overrides,
            seed,
            trials,
        } => {
            let mut file = config::load(config.as_deref(), &overrides)?;
            if let Some(s) = seed {
                file.seed = s;
            }
            if let Some(t) = trials {
                file.trials = t;
            }
            let experiment = file.into_experiment()?;
            let summary = run_experiment(&experiment)?;
            report(global, &summary, "sweep")
        }
        Command::Validate {
            figure,
            gamma,
            q,
            library_size,
            cache_size,
            trials,
            seed,
            overrides,
        } => {
            let mut experiment = preset(figure, gamma, q, library_size, cache_size, trials, seed)?;
            if !overrides.is_empty() {
                experiment = override_preset(experiment, &overrides)?;
            }
            let summary = run_experiment(&experiment)?;
            report(global, &summary, &format!("figure{figure}"))
        }
        Command::Pmiss { model, ns } => pmiss(global, &model, ns),
    }
}

fn policy(global: &GlobalArgs, args: &ModelArgs, gc: f64, solver: &str) -> Result<()> {
    let model = model_of(args)?;
    let s = args.cache_size as f64;
    let policy = match solver {
        "kkt" => optimal_policy_kkt(&model, gc, s, DEFAULT_TOL)?,
        _ => optimal_policy_closed_form(&model, gc, s)?,
    };
    let solver_name = policy.solver().as_str();
    let rows: Vec<PolicyRow> = model
        .pmf()
        .iter()
        .zip(policy.probs())
        .enumerate()
        .map(|(i, (&p, &c))| PolicyRow {
            file: i + 1,
            request_prob: p,
            cache_prob: c,
            m_star: policy.m_star(),
            multiplier: policy.multiplier(),
            solver: solver_name,
            fallback: policy.fallback(),
        })
        .collect();
    let path = output_path(global, "policy");
    write_csv(&rows, &path)?;
    println!(
        "m_star={} multiplier={} solver={} fallback={} outage={:.6}",
        policy.m_star(),
        policy.multiplier(),
        solver_name,
        policy.fallback(),
        outage_exact(&model, &policy, gc)?
    );
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn outage(
    global: &GlobalArgs,
    gamma: f64,
    d: f64,
    rho_mult: Option<f64>,
    alpha1: Option<f64>,
    q: f64,
    library_size: Option<usize>,
    cache_size: Option<usize>,
    gc: Option<f64>,
) -> Result<()> {
    let mut rows = Vec::new();
    if let Some(mult) = rho_mult {
        let rho = mult * gamma;
        let c1 = c1_for_rho(gamma, d, rho)?;
        rows.push(Quantity {
            name: "rho",
            value: rho,
        });
        rows.push(Quantity {
            name: "c1",
            value: c1,
        });
        rows.push(Quantity {
            name: "outage_upper_bound",
            value: outage_upper_gamma_lt1(gamma, d, rho, c1)?,
        });
    }
    if let Some(a) = alpha1 {
        let limit = outage_gamma_gt1_alpha(gamma, a)?;
        rows.push(Quantity {
            name: "outage_limit",
            value: limit.value,
        });
        rows.push(Quantity {
            name: "outage_limit_clamped",
            value: f64::from(u8::from(limit.clamped)),
        });
    }
    match (library_size, cache_size, gc) {
        (Some(m), Some(s), Some(g)) => {
            let model = PopularityModel::mzipf(gamma, q, m)?;
            let s = s as f64;
            let policy = optimal_policy_closed_form(&model, g, s)?;
            let r = RegimeParams::for_model(&model, s, g)?;
            rows.push(Quantity {
                name: "outage_exact",
                value: outage_exact(&model, &policy, g)?,
            });
            rows.push(Quantity {
                name: "regime_rho",
                value: r.rho,
            });
            rows.push(Quantity {
                name: "regime_c1",
                value: r.c1,
            });
            rows.push(Quantity {
                name: "regime_c2",
                value: r.c2,
            });
            if gamma != 1.0 && r.c1 * s * g < gamma * m as f64 {
                rows.push(Quantity {
                    name: "outage_general",
                    value: outage_expr_general(gamma, r.c1, r.c2, g / m as f64, s)?,
                });
            }
        }
        (None, None, None) => {}
        _ => return Err(usage("--M, --S and --gc must be given together")),
    }
    if rows.is_empty() {
        return Err(usage(
            "nothing to evaluate: give --rho-mult, --alpha1 or --M/--S/--gc",
        ));
    }
    let path = output_path(global, "outage");
    write_csv(&rows, &path)?;
    for r in &rows {
        println!("{} = {}", r.name, r.value);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn tradeoff(global: &GlobalArgs, args: &ModelArgs, reuse: f64, points: usize) -> Result<()> {
    if points == 0 {
        return Err(usage("--points must be >= 1"));
    }
    let model = model_of(args)?;
    let (gamma, q) = (args.gamma, args.q);
    let (regime, inner, outer) = if gamma < 1.0 {
        let r = if q > 0.0 {
            Regime::GammaLt1
        } else {
            Regime::ZipfLt1
        };
        (
            r,
            geometric(gamma, 20.0 * gamma, points),
            geometric(0.01, 10.0, points),
        )
    } else if gamma > 1.0 {
        let r = if q > 0.0 {
            Regime::GammaGt1
        } else {
            Regime::ZipfGt1
        };
        (
            r,
            geometric(1.0, 1000.0, points),
            geometric(1.0, 1000.0, points),
        )
    } else {
        return Err(usage("tradeoff curves need gamma != 1"));
    };
    let s = args.cache_size as f64;
    let mut rows = Vec::new();
    for (kind, curve) in [
        (
            "achievable",
            achievable_curve(regime, &model, s, reuse, &inner)?,
        ),
        ("outer", outer_curve(regime, &model, s, &outer)?),
    ] {
        rows.extend(curve.points.iter().map(|p| CurveRow {
            kind,
            regime: regime.as_str(),
            param: p.param,
            outage: p.outage,
            throughput: p.throughput,
        }));
    }
    let path = output_path(global, "tradeoff");
    write_csv(&rows, &path)?;
    println!(
        "regime={} points={} (hidden order constant = 1)",
        regime.as_str(),
        rows.len()
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn simulate(
    global: &GlobalArgs,
    args: &ModelArgs,
    cluster: &ClusterConfig,
    trials: usize,
    seed: u64,
) -> Result<()> {
    if trials == 0 {
        return Err(usage("--trials must be >= 1"));
    }
    cluster.validate()?;
    let model = model_of(args)?;
    let policy = optimal_policy_closed_form(&model, cluster.g_c, args.cache_size as f64)?;
    let results: Vec<TrialResult> = (0..trials)
        .into_par_iter()
        .map(|t| {
            simulate_trial(
                &model,
                &policy,
                cluster,
                args.cache_size,
                trial_seed(seed, 0, t),
            )
        })
        .collect::<d2dcache::Result<_>>()?;
    let path = output_path(global, "simulate");
    write_csv(&results, &path)?;
    let mean = |f: fn(&TrialResult) -> f64| {
        let xs: Vec<f64> = results.iter().map(f).collect();
        pairwise_sum(&xs) / xs.len() as f64
    };
    println!(
        "trials={trials} mean_outage={:.6} outage_exact={:.6} mean_sym_throughput={:.6}",
        mean(|r| r.outage_fraction),
        outage_exact(&model, &policy, cluster.g_c)?,
        mean(|r| r.sym_throughput)
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn pmiss(global: &GlobalArgs, args: &ModelArgs, ns: u64) -> Result<()> {
    let model = model_of(args)?;
    let s = args.cache_size as f64;
    let mut rows = vec![Quantity {
        name: "p_miss_exact",
        value: p_miss_exact(&model, ns, s)?,
    }];
    if args.gamma > 1.0 {
        rows.push(Quantity {
            name: "p_miss_lower_bound",
            value: p_miss_lower_gamma_gt1(args.gamma, args.q, args.library_size as u64, s, ns)?,
        });
    }
    let path = output_path(global, "pmiss");
    write_csv(&rows, &path)?;
    for r in &rows {
        println!("{} = {}", r.name, r.value);
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Built-in experiment for each reproduced figure; flags replace the defaults.
fn preset(
    figure: u8,
    gamma: Option<f64>,
    q: Option<f64>,
    library_size: Option<usize>,
    cache_size: Option<usize>,
    trials: Option<usize>,
    seed: u64,
) -> Result<ExperimentConfig> {
    let pick = |d_gamma: f64, d_m: usize| {
        let g = gamma.unwrap_or(d_gamma);
        let m = library_size.unwrap_or(d_m);
        (g, m)
    };
    let (mode, gamma, q, m, s, sweep, default_trials) = match figure {
        3 => {
            let (g, m) = pick(0.6, 5000);
            let values = (0..12).map(|i| 2f64.powi(i)).collect();
            (
                Mode::MStarValidation,
                g,
                q.unwrap_or(0.0),
                m,
                1,
                Sweep::ClusterSize { values },
                1,
            )
        }
        4 => {
            let (g, m) = pick(0.6, 1000);
            let (default_q, values) = if g < 1.0 {
                (
                    0.1 * m as f64,
                    vec![100.0, 200.0, 400.0, 600.0, 800.0, 1000.0, 1500.0, 2000.0],
                )
            } else {
                (50.0, vec![5.0, 10.0, 20.0, 30.0, 60.0, 120.0, 250.0, 500.0])
            };
            let q = q.unwrap_or(default_q);
            (
                Mode::OutageValidation,
                g,
                q,
                m,
                1,
                Sweep::ClusterSize { values },
                10_000,
            )
        }
        5 => {
            let (g, m) = pick(0.6, 1000);
            if g < 1.0 {
                let values = [1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0]
                    .iter()
                    .map(|x| x * g)
                    .collect();
                (
                    Mode::Tradeoff,
                    g,
                    q.unwrap_or(0.1 * m as f64),
                    m,
                    1,
                    Sweep::Rho { values },
                    200,
                )
            } else {
                let values = vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
                (
                    Mode::Tradeoff,
                    g,
                    q.unwrap_or(50.0),
                    m,
                    1,
                    Sweep::Alpha1 { values },
                    200,
                )
            }
        }
        6 => {
            let (g, m) = pick(1.16, 7345);
            let values = vec![100.0, 200.0, 300.0, 500.0, 700.0, 900.0];
            (
                Mode::SingleHopCompare,
                g,
                q.unwrap_or(22.0),
                m,
                5,
                Sweep::ClusterSize { values },
                500,
            )
        }
        other => return Err(usage(format!("unknown figure {other}"))),
    };
    Ok(ExperimentConfig {
        mode,
        gamma,
        q,
        library_size: m,
        cache_size: cache_size.unwrap_or(s),
        sweep,
        clusters_per_side: 1,
        reuse: 4,
        c0: 2.0,
        trials: trials.unwrap_or(default_trials),
        master_seed: seed,
    })
}

/// Applies `key=value` overrides to a preset.
fn override_preset(experiment: ExperimentConfig, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table = toml::Table::try_from(&experiment)?;
    apply_overrides(&mut table, overrides)?;
    toml::Value::Table(table)
        .try_into::<ExperimentConfig>()
        .map_err(|e| usage(format!("override: {}", e.to_string().trim())))
}

fn report(global: &GlobalArgs, summary: &ExperimentSummary, name: &str) -> Result<()> {
    let path = output_path(global, name);
    summary.save(&path)?;
    println!(
        "{:>10} {:>10} {:>10} {:>10} {:>21} {:>11} {:>11}",
        summary
            .rows
            .first()
            .map_or("sweep", |r| r.sweep_param.as_str()),
        "g_c",
        "exact",
        "sim",
        "95% CI",
        "throughput",
        "theory"
    );
    for r in &summary.rows {
        let ci = match (r.outage_ci_lower, r.outage_ci_upper) {
            (Some(lo), Some(hi)) => format!("[{lo:.4}, {hi:.4}]"),
            _ => "-".into(),
        };
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.5}"));
        println!(
            "{:>10.4} {:>10.3} {:>10.5} {:>10} {:>21} {:>11} {:>11}",
            r.sweep_value,
            r.g_c,
            r.outage_exact,
            fmt(r.outage_sim_mean),
            ci,
            fmt(r.throughput_sim_mean),
            fmt(r.outage_theory.filter(|_| r.outage_theory_valid)),
        );
    }
    if let Some(fit) = &summary.fit {
        println!("slope={:.4} r2={:.4}", fit.slope, fit.r2);
    }
    println!("config_hash={}", summary.config_hash);
    println!("wrote {}", path.display());
    Ok(())
}
