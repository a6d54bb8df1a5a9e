use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    link_rate, match_pairs, place_users, realize_caches, route_and_load, ClusterConfig,
    ClusterGrid, Flow, RateMode, UserField,
};
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::policy::CachingPolicy;
use crate::popularity::PopularityModel;

/// Outcome of one network realization.
///
/// `served_users + outage_users = total_users`; self-hits count as served.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    /// Mean over clusters of the fraction of members in outage; an empty cluster counts as 1.
    pub outage_fraction: f64,
    /// Smallest per-cluster symmetric rate among clusters with a served user; 0 if none.
    pub sym_throughput: f64,
    pub max_load: u32,
    pub served_users: usize,
    pub outage_users: usize,
    pub self_hits: usize,
    pub d2d_flows: usize,
    pub total_users: usize,
    pub cluster_count: usize,
    /// Share of relay hops failing the SINR threshold; physical mode only.
    pub infeasible_hop_fraction: Option<f64>,
}

struct Realization {
    grid: ClusterGrid,
    field: UserField,
    members: Vec<Vec<usize>>,
    flows: Vec<Vec<Flow>>,
}

fn realize(
    model: &PopularityModel,
    policy: &CachingPolicy,
    config: &ClusterConfig,
    files_per_user: usize,
    seed: u64,
) -> Result<Realization> {
    config.validate()?;
    if policy.library_size() != model.library_size() {
        return Err(Error::DimensionMismatch {
            expected: model.library_size(),
            got: policy.library_size(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = place_users(config.density, &mut rng)?;
    let grid = config.grid();
    let members = grid.members(&field);
    let caches = realize_caches(field.count(), policy, files_per_user, &mut rng)?;
    let requests: Vec<usize> = (0..field.count())
        .map(|_| model.sample_index(&mut rng))
        .collect();
    let flows = members
        .iter()
        .map(|m| match_pairs(m, &requests, &caches, &mut rng))
        .collect();
    Ok(Realization {
        grid,
        field,
        members,
        flows,
    })
}

impl Realization {
    fn base_result(&self, seed: u64) -> TrialResult {
        let fractions: Vec<f64> = self
            .flows
            .iter()
            .map(|f| {
                if f.is_empty() {
                    1.0
                } else {
                    f.iter().filter(|x| x.is_virtual()).count() as f64 / f.len() as f64
                }
            })
            .collect();
        let all = self.flows.iter().flatten();
        let outage_users = all.clone().filter(|f| f.is_virtual()).count();
        TrialResult {
            seed,
            outage_fraction: pairwise_sum(&fractions) / fractions.len() as f64,
            sym_throughput: 0.0,
            max_load: 0,
            served_users: self.field.count() - outage_users,
            outage_users,
            self_hits: all.clone().filter(|f| f.is_self_hit()).count(),
            d2d_flows: all.filter(|f| f.is_d2d()).count(),
            total_users: self.field.count(),
            cluster_count: self.grid.count(),
            infeasible_hop_fraction: None,
        }
    }

    fn local_positions(&self, cluster: usize) -> Vec<(f64, f64)> {
        let (x0, y0) = self.grid.origin(cluster);
        let below_one = 1.0 - f64::EPSILON;
        self.members[cluster]
            .iter()
            .map(|&u| {
                let (x, y) = self.field.positions[u];
                let s = self.grid.side;
                (
                    ((x - x0) / s).clamp(0.0, below_one),
                    ((y - y0) / s).clamp(0.0, below_one),
                )
            })
            .collect()
    }

    /// Clusters sharing a TDMA slot with `cluster`, as coordinate offsets in cluster units.
    fn co_channel_offsets(&self, cluster: usize, k: usize) -> Vec<(f64, f64)> {
        let l = self.grid.per_side;
        let (cx, cy) = (cluster % l, cluster / l);
        let mut out = Vec::new();
        for oy in 0..l {
            for ox in 0..l {
                if (ox, oy) != (cx, cy) && ox % k == cx % k && oy % k == cy % k {
                    out.push((ox as f64 - cx as f64, oy as f64 - cy as f64));
                }
            }
        }
        out
    }
}

fn rate_scale(config: &ClusterConfig) -> f64 {
    match config.mode {
        RateMode::Normalized => 1.0,
        RateMode::Physical => (1.0 + config.theta).log2() / config.reuse as f64,
    }
}

/// Aggregates per-cluster rates into the network's symmetric rate.
fn symmetric(rates: impl Iterator<Item = Option<f64>>) -> f64 {
    rates.flatten().reduce(f64::min).unwrap_or(0.0)
}

fn evaluate_multi_hop(
    real: &mut Realization,
    config: &ClusterConfig,
    seed: u64,
) -> Result<TrialResult> {
    let mut result = real.base_result(seed);
    let scale = rate_scale(config);
    let mut hops = 0usize;
    let mut infeasible = 0usize;
    let mut rates = Vec::with_capacity(real.flows.len());
    for c in 0..real.flows.len() {
        if real.flows[c].is_empty() {
            rates.push(None);
            continue;
        }
        let local = real.local_positions(c);
        let loads = route_and_load(&local, &mut real.flows[c], config.c0);
        let max_load = loads.max_load();
        result.max_load = result.max_load.max(max_load);
        let served = real.flows[c].iter().any(|f| !f.is_virtual());
        rates.push(served.then(|| scale / max_load.max(1) as f64));

        if config.mode == RateMode::Physical {
            let (h, bad) = check_hops(real, c, &loads.cells, config)?;
            hops += h;
            infeasible += bad;
        }
    }
    result.sym_throughput = symmetric(rates.into_iter());
    if config.mode == RateMode::Physical {
        result.infeasible_hop_fraction = Some(if hops == 0 {
            0.0
        } else {
            infeasible as f64 / hops as f64
        });
    }
    Ok(result)
}

/// Counts relay hops of one cluster and how many fail the SINR threshold.
///
/// Intermediate squarelets relay through their lowest-indexed member. Interference comes from
/// the same transmitter position replicated in every co-channel cluster.
fn check_hops(
    real: &Realization,
    cluster: usize,
    cells: &[usize],
    config: &ClusterConfig,
) -> Result<(usize, usize)> {
    let members = &real.members[cluster];
    let pos = |i: usize| real.field.positions[members[i]];
    let mut representative = std::collections::HashMap::new();
    for (i, &c) in cells.iter().enumerate() {
        representative.entry(c).or_insert(i);
    }
    let offsets = real.co_channel_offsets(cluster, config.reuse_side() as usize);
    let side = real.grid.side;
    let (mut hops, mut bad) = (0, 0);
    for flow in &real.flows[cluster] {
        if flow.path.is_empty() {
            continue;
        }
        let mut chain = vec![pos(flow.src)];
        if flow.path.len() > 2 {
            chain.extend(
                flow.path[1..flow.path.len() - 1]
                    .iter()
                    .map(|c| pos(representative[c])),
            );
        }
        chain.push(pos(flow.dst));
        for w in chain.windows(2) {
            let (tx, rx) = (w[0], w[1]);
            if tx == rx {
                continue;
            }
            let interferers: Vec<(f64, f64)> = offsets
                .iter()
                .map(|&(ox, oy)| (tx.0 + ox * side, tx.1 + oy * side))
                .collect();
            hops += 1;
            if link_rate(config, tx, rx, &interferers)? == 0.0 {
                bad += 1;
            }
        }
    }
    Ok((hops, bad))
}

fn evaluate_single_hop(real: &Realization, config: &ClusterConfig, seed: u64) -> TrialResult {
    let mut result = real.base_result(seed);
    let scale = rate_scale(config);
    let rates = real.flows.iter().map(|flows| {
        let served = flows.iter().any(|f| !f.is_virtual());
        let links = flows.iter().filter(|f| f.is_d2d()).count();
        result.max_load = result.max_load.max(links as u32);
        served.then(|| scale / links.max(1) as f64)
    });
    let sym = symmetric(rates.collect::<Vec<_>>().into_iter());
    result.sym_throughput = sym;
    result
}

/// One trial of the multi-hop scheme.
pub fn simulate_trial(
    model: &PopularityModel,
    policy: &CachingPolicy,
    config: &ClusterConfig,
    files_per_user: usize,
    seed: u64,
) -> Result<TrialResult> {
    let mut real = realize(model, policy, config, files_per_user, seed)?;
    evaluate_multi_hop(&mut real, config, seed)
}

/// Same realization as [`simulate_trial`], but every cluster time-shares direct links
/// among its device-to-device flows.
pub fn single_hop_baseline_trial(
    model: &PopularityModel,
    policy: &CachingPolicy,
    config: &ClusterConfig,
    files_per_user: usize,
    seed: u64,
) -> Result<TrialResult> {
    let real = realize(model, policy, config, files_per_user, seed)?;
    Ok(evaluate_single_hop(&real, config, seed))
}

/// Multi-hop and single-hop results from one shared realization.
pub fn simulate_pair(
    model: &PopularityModel,
    policy: &CachingPolicy,
    config: &ClusterConfig,
    files_per_user: usize,
    seed: u64,
) -> Result<(TrialResult, TrialResult)> {
    let mut real = realize(model, policy, config, files_per_user, seed)?;
    let single = evaluate_single_hop(&real, config, seed);
    let multi = evaluate_multi_hop(&mut real, config, seed)?;
    Ok((multi, single))
}
