use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::policy::CachingPolicy;

/// Cache contents of every user: `files_per_user` distinct 0-based file indices each, sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheSets {
    files_per_user: usize,
    files: Vec<usize>,
}

impl CacheSets {
    /// Wraps flat per-user file lists; each user's block must be strictly increasing.
    pub fn from_files(files_per_user: usize, files: Vec<usize>) -> Result<Self> {
        if files_per_user == 0 || !files.len().is_multiple_of(files_per_user) {
            return Err(Error::param(
                "cache contents do not split into equal blocks",
            ));
        }
        if files
            .chunks(files_per_user)
            .any(|c| c.windows(2).any(|w| w[0] >= w[1]))
        {
            return Err(Error::param(
                "each cache must list distinct files in increasing order",
            ));
        }
        Ok(Self {
            files_per_user,
            files,
        })
    }

    pub fn get(&self, user: usize) -> &[usize] {
        &self.files[user * self.files_per_user..(user + 1) * self.files_per_user]
    }

    pub fn users(&self) -> usize {
        self.files
            .len()
            .checked_div(self.files_per_user)
            .unwrap_or(0)
    }

    pub fn files_per_user(&self) -> usize {
        self.files_per_user
    }

    pub fn holds(&self, user: usize, file: usize) -> bool {
        self.get(user).binary_search(&file).is_ok()
    }
}

/// Fills each cache by systematic sampling on the cumulative policy.
///
/// A single uniform offset `u` selects the files whose cumulative interval contains one of
/// `u, u+1, …, u+S-1`. Each file is then included with probability exactly `P_c(f)`, every
/// cache holds `S` distinct files, and users are independent.
pub fn realize_caches<R: Rng + ?Sized>(
    users: usize,
    policy: &CachingPolicy,
    files_per_user: usize,
    rng: &mut R,
) -> Result<CacheSets> {
    let s = files_per_user as f64;
    if files_per_user == 0 {
        return Err(Error::param("cache size must be at least 1"));
    }
    if (policy.budget() - s).abs() > 1e-6 {
        return Err(Error::param(format!(
            "policy budget {} differs from cache size {files_per_user}",
            policy.budget()
        )));
    }
    if policy.probs().iter().any(|&p| p > 1.0) {
        return Err(Error::Infeasible("cache probability above 1".into()));
    }
    let mut acc = CompensatedSum::new();
    let mut upper: Vec<f64> = policy
        .probs()
        .iter()
        .map(|&p| {
            acc.add(p);
            acc.value()
        })
        .collect();
    let scale = s / acc.value();
    upper.iter_mut().for_each(|c| *c *= scale);
    let last = policy.m_star().max(1) - 1;

    let mut files = Vec::with_capacity(users * files_per_user);
    for _ in 0..users {
        let u: f64 = rng.random();
        let start = files.len();
        for k in 0..files_per_user {
            let point = u + k as f64;
            let mut f = upper.partition_point(|&c| c <= point).min(last);
            // Rounding can put two points in one unit-mass interval; move to the next file.
            if files.len() > start && files[files.len() - 1] >= f {
                f = files[files.len() - 1] + 1;
            }
            files.push(f);
        }
        if files[files.len() - 1] >= upper.len() {
            return Err(Error::Infeasible(
                "cache realization overran the library".into(),
            ));
        }
    }
    Ok(CacheSets {
        files_per_user,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_marginal() {
        let policy = CachingPolicy::from_probs(vec![1.0, 0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let caches = realize_caches(50, &policy, 1, &mut rng).unwrap();
        assert!((0..50).all(|u| caches.get(u) == [0]));
    }

    #[test]
    fn half_inclusion_frequencies() {
        let policy = CachingPolicy::from_probs(vec![0.5; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let caches = realize_caches(n, &policy, 2, &mut rng).unwrap();
        let mut counts = [0usize; 4];
        for u in 0..n {
            let c = caches.get(u);
            assert_eq!(c.len(), 2);
            assert!(c[0] < c[1]);
            for &f in c {
                counts[f] += 1;
            }
        }
        let se = (n as f64 * 0.25).sqrt();
        for c in counts {
            assert!((c as f64 - 0.5 * n as f64).abs() < 3.0 * se, "{c}");
        }
    }

    #[test]
    fn saturated_cache_holds_library() {
        let policy = CachingPolicy::from_probs(vec![1.0; 5]).unwrap();
        let caches = realize_caches(10, &policy, 5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!((0..10).all(|u| caches.get(u) == [0, 1, 2, 3, 4]));
    }

    #[test]
    fn budget_must_match() {
        let policy = CachingPolicy::from_probs(vec![0.5; 4]).unwrap();
        assert!(realize_caches(3, &policy, 1, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }

    #[test]
    fn uneven_policy_marginals() {
        let probs = vec![1.0, 0.9, 0.6, 0.3, 0.15, 0.05, 0.0];
        let policy = CachingPolicy::from_probs(probs.clone()).unwrap();
        let n = 200_000;
        let caches = realize_caches(n, &policy, 3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for (f, &p) in probs.iter().enumerate() {
            let hits = (0..n).filter(|&u| caches.holds(u, f)).count() as f64;
            let se = (n as f64 * p * (1.0 - p)).sqrt().max(1.0);
            assert!((hits - p * n as f64).abs() < 4.0 * se, "file {f}: {hits}");
        }
    }
}
