use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// Users of one network realization.
#[derive(Clone, Debug, PartialEq)]
pub struct UserField {
    pub positions: Vec<(f64, f64)>,
}

impl UserField {
    pub fn count(&self) -> usize {
        self.positions.len()
    }
}

/// Homogeneous Poisson point process of intensity `density` on the unit square.
pub fn place_users<R: Rng + ?Sized>(density: f64, rng: &mut R) -> Result<UserField> {
    let poisson =
        Poisson::new(density).map_err(|e| Error::param(format!("PPP density {density}: {e}")))?;
    let count = poisson.sample(rng) as usize;
    let positions = (0..count)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    Ok(UserField { positions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ClusterConfig;
    use crate::stats::mean_and_se;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn count_mean_matches_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let counts: Vec<f64> = (0..1000)
            .map(|_| place_users(1000.0, &mut rng).unwrap().count() as f64)
            .collect();
        let (mean, _) = mean_and_se(&counts);
        // Standard error of the mean is √(1000/1000) = 1.
        assert!((mean - 1000.0).abs() < 3.0, "{mean}");
    }

    #[test]
    fn positions_in_unit_square_and_deterministic() {
        let a = place_users(300.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = place_users(300.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a
            .positions
            .iter()
            .all(|&(x, y)| (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y)));
    }

    #[test]
    fn cluster_counts_are_poisson() {
        let config = ClusterConfig::tiled(12.0, 10);
        let grid = config.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut counts = Vec::new();
        while counts.len() < 10_000 {
            let field = place_users(config.density, &mut rng).unwrap();
            counts.extend(grid.members(&field).iter().map(|m| m.len() as f64));
        }
        let (mean, se) = mean_and_se(&counts);
        let var = se * se * counts.len() as f64;
        let dispersion = var / mean;
        assert!((mean - 12.0).abs() < 0.15, "{mean}");
        assert!((0.9..=1.1).contains(&dispersion), "{dispersion}");
    }
}
