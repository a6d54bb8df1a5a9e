use super::ClusterConfig;
use crate::error::{Error, Result};

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Rate of a link under the threshold physical model, in bits/s/Hz.
///
/// The link carries `log2(1+ϑ)` when `P·χ·d^{-α} / (N0 + Σ_i P·χ·d_i^{-α}) ≥ ϑ` and nothing
/// otherwise; every interferer transmits with the same power.
pub fn link_rate(
    config: &ClusterConfig,
    tx: (f64, f64),
    rx: (f64, f64),
    interferers: &[(f64, f64)],
) -> Result<f64> {
    let d = distance(tx, rx);
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let gain = |r: f64| config.tx_power * config.chi * r.powf(-config.pathloss_alpha);
    let interference: f64 = interferers.iter().map(|&p| gain(distance(p, rx))).sum();
    let sinr = gain(d) / (config.noise + interference);
    Ok(if sinr >= config.theta {
        (1.0 + config.theta).log2()
    } else {
        0.0
    })
}
