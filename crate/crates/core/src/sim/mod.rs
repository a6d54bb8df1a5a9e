//! Monte Carlo realization of the clustered multi-hop delivery scheme.
//!
//! One trial drops a Poisson number of users on the unit square, partitions the square into
//! clusters of side `√(g_c/N)`, fills every cache independently from the caching policy and
//! draws one request per user. Inside each cluster a request is served from the requester's
//! own cache, from a uniformly chosen cluster member holding the file, or else counts as an
//! outage and is replaced by a virtual flow to a random member. Flows are routed over a
//! squarelet grid, and a cluster's symmetric rate is set by its busiest squarelet.

mod caches;
mod link;
mod matching;
mod placement;
mod routing;
mod trial;

pub use caches::{realize_caches, CacheSets};
pub use link::link_rate;
pub use matching::{match_pairs, Flow, FlowFile};
pub use placement::{place_users, UserField};
pub use routing::{route_and_load, squarelet_grid, SquareletLoads};
pub use trial::{simulate_pair, simulate_trial, single_hop_baseline_trial, TrialResult};

use serde::Serialize;

use crate::error::{Error, Result};

/// Whether rates are reported relative to the link capacity and reuse factor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// Drops the `log2(1+ϑ)` and `1/K` factors.
    #[default]
    Normalized,
    /// Keeps both factors and checks every relay hop against the SINR threshold.
    Physical,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterConfig {
    /// Mean number of users per cluster.
    pub g_c: f64,
    /// Mean number of users on the unit square.
    pub density: f64,
    /// TDMA reuse factor; a perfect square.
    pub reuse: u32,
    /// Squarelet sizing constant.
    pub c0: f64,
    /// SINR threshold `ϑ`.
    pub theta: f64,
    pub pathloss_alpha: f64,
    pub chi: f64,
    pub noise: f64,
    pub tx_power: f64,
    pub mode: RateMode,
}

impl ClusterConfig {
    /// Defaults: `K = 4`, `c0 = 2`, `ϑ = 1`, `α = 4`, `χ = 1`, no noise, unit power.
    pub fn new(g_c: f64, density: f64) -> Self {
        Self {
            g_c,
            density,
            reuse: 4,
            c0: 2.0,
            theta: 1.0,
            pathloss_alpha: 4.0,
            chi: 1.0,
            noise: 0.0,
            tx_power: 1.0,
            mode: RateMode::Normalized,
        }
    }

    /// A square network of `per_side × per_side` full clusters.
    pub fn tiled(g_c: f64, per_side: usize) -> Self {
        Self::new(g_c, g_c * (per_side * per_side) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Err(Error::config(field, reason));
        if !(self.g_c > 0.0) || !self.g_c.is_finite() {
            return bad("g_c", format!("must be > 0, got {}", self.g_c));
        }
        if !(self.density > 0.0) || !self.density.is_finite() {
            return bad("density", format!("must be > 0, got {}", self.density));
        }
        if self.g_c > self.density {
            return bad("g_c", "cluster side exceeds the network side".into());
        }
        let k = self.reuse_side();
        if self.reuse == 0 || k * k != self.reuse {
            return bad(
                "reuse",
                format!("must be a positive perfect square, got {}", self.reuse),
            );
        }
        if !(self.c0 > 1.0) {
            return bad("c0", format!("must be > 1, got {}", self.c0));
        }
        if !(self.theta > 0.0) {
            return bad("theta", format!("must be > 0, got {}", self.theta));
        }
        if !(self.pathloss_alpha > 2.0) {
            return bad(
                "pathloss_alpha",
                format!("must be > 2, got {}", self.pathloss_alpha),
            );
        }
        if !(self.chi > 0.0) || !(self.tx_power > 0.0) || !(self.noise >= 0.0) {
            return bad("link", "need chi > 0, tx_power > 0, noise >= 0".into());
        }
        Ok(())
    }

    pub fn cluster_side(&self) -> f64 {
        (self.g_c / self.density).sqrt()
    }

    pub(crate) fn reuse_side(&self) -> u32 {
        (self.reuse as f64).sqrt().round() as u32
    }

    pub(crate) fn grid(&self) -> ClusterGrid {
        let side = self.cluster_side();
        let per_side = ((1.0 / side) - 1e-9).ceil().max(1.0) as usize;
        ClusterGrid { side, per_side }
    }
}

/// Square clusters tiling the unit square; the last row and column may be partial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterGrid {
    pub side: f64,
    pub per_side: usize,
}

impl ClusterGrid {
    pub fn count(&self) -> usize {
        self.per_side * self.per_side
    }

    pub fn coords_of(&self, (x, y): (f64, f64)) -> (usize, usize) {
        let c = |v: f64| ((v / self.side) as usize).min(self.per_side - 1);
        (c(x), c(y))
    }

    pub fn index_of(&self, pos: (f64, f64)) -> usize {
        let (cx, cy) = self.coords_of(pos);
        cy * self.per_side + cx
    }

    pub fn origin(&self, index: usize) -> (f64, f64) {
        let (cx, cy) = (index % self.per_side, index / self.per_side);
        (cx as f64 * self.side, cy as f64 * self.side)
    }

    /// Member lists per cluster, each in increasing user order.
    pub fn members(&self, field: &UserField) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count()];
        for (u, &pos) in field.positions.iter().enumerate() {
            out[self.index_of(pos)].push(u);
        }
        out
    }
}
