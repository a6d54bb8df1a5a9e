//! Flat TOML experiment files and `key=value` overrides.

use std::path::Path;

use anyhow::{Context, Result};
use d2dcache::harness::{ExperimentConfig, Mode, Sweep};
use serde::Deserialize;

use crate::UsageError;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    #[serde(rename = "g_c")]
    ClusterSize,
    Rho,
    Alpha1,
    LibrarySize,
    Plateau,
}

/// One experiment as a single flat table.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Mode,
    pub gamma: f64,
    #[serde(default)]
    pub q: f64,
    pub library_size: usize,
    pub cache_size: usize,
    pub sweep: SweepKind,
    pub values: Vec<f64>,
    pub rho: Option<f64>,
    pub plateau_ratio: Option<f64>,
    pub alpha1: Option<f64>,
    #[serde(default = "one")]
    pub clusters_per_side: usize,
    #[serde(default = "four")]
    pub reuse: u32,
    #[serde(default = "two")]
    pub c0: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}
fn four() -> u32 {
    4
}
fn two() -> f64 {
    2.0
}

fn required(value: Option<f64>, key: &str, sweep: &str) -> Result<f64> {
    value.ok_or_else(|| UsageError(format!("sweep = \"{sweep}\" needs `{key}`")).into())
}

impl FileConfig {
    pub fn into_experiment(self) -> Result<ExperimentConfig> {
        let values = self.values;
        let sweep = match self.sweep {
            SweepKind::ClusterSize => Sweep::ClusterSize { values },
            SweepKind::Rho => Sweep::Rho { values },
            SweepKind::Alpha1 => Sweep::Alpha1 { values },
            SweepKind::LibrarySize => {
                let sizes = values
                    .iter()
                    .map(|&v| {
                        if v >= 1.0 && v.fract() == 0.0 {
                            Ok(v as usize)
                        } else {
                            Err(UsageError(format!(
                                "library size {v} is not a positive integer"
                            )))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Sweep::LibrarySize {
                    values: sizes,
                    rho: required(self.rho, "rho", "library_size")?,
                    plateau_ratio: self.plateau_ratio.unwrap_or(0.0),
                }
            }
            SweepKind::Plateau => Sweep::Plateau {
                values,
                alpha1: required(self.alpha1, "alpha1", "plateau")?,
            },
        };
        Ok(ExperimentConfig {
            mode: self.mode,
            gamma: self.gamma,
            q: self.q,
            library_size: self.library_size,
            cache_size: self.cache_size,
            sweep,
            clusters_per_side: self.clusters_per_side,
            reuse: self.reuse,
            c0: self.c0,
            trials: self.trials,
            master_seed: self.seed,
        })
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

/// Applies `key=value` overrides on top of `table`.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| UsageError(format!("override `{item}` is not key=value")))?;
        table.insert(key.trim().to_string(), parse_value(value.trim()));
    }
    Ok(())
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<FileConfig> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(|e| UsageError(format!("{e:#}")))?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| UsageError(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    apply_overrides(&mut table, overrides)?;
    toml::Value::Table(table)
        .try_into::<FileConfig>()
        .map_err(|e| UsageError(format!("config: {}", e.to_string().trim())).into())
}
