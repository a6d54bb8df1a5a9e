use rand::Rng;

use super::caches::CacheSets;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowFile {
    Real(usize),
    /// Placeholder delivery to a user in outage.
    Virtual,
}

/// One delivery inside a cluster. `src` and `dst` index the cluster's member list.
#[derive(Clone, Debug, PartialEq)]
pub struct Flow {
    pub src: usize,
    pub dst: usize,
    pub file: FlowFile,
    /// Squarelets traversed, filled in by routing.
    pub path: Vec<usize>,
}

impl Flow {
    pub fn is_virtual(&self) -> bool {
        self.file == FlowFile::Virtual
    }

    pub fn is_self_hit(&self) -> bool {
        !self.is_virtual() && self.src == self.dst
    }

    /// A real flow between two distinct users.
    pub fn is_d2d(&self) -> bool {
        !self.is_virtual() && self.src != self.dst
    }
}

/// Pairs each cluster member with a source for its request.
///
/// `members` are global user ids, `requests` are 0-based files indexed by global id. The
/// flow for member `i` has `dst = i`. A member holding its own request is a self-hit; otherwise
/// the source is uniform over the members holding the file; with no holder the flow is
/// virtual and sourced from a uniform other member (itself when alone).
pub fn match_pairs<R: Rng + ?Sized>(
    members: &[usize],
    requests: &[usize],
    caches: &CacheSets,
    rng: &mut R,
) -> Vec<Flow> {
    let mut holders: Vec<(usize, usize)> = members
        .iter()
        .enumerate()
        .flat_map(|(i, &u)| caches.get(u).iter().map(move |&f| (f, i)))
        .collect();
    holders.sort_unstable();

    let n = members.len();
    members
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let want = requests[u];
            let lo = holders.partition_point(|&(f, _)| f < want);
            let hi = holders.partition_point(|&(f, _)| f <= want);
            let (src, file) = if caches.holds(u, want) {
                (i, FlowFile::Real(want))
            } else if hi > lo {
                (holders[rng.random_range(lo..hi)].1, FlowFile::Real(want))
            } else if n > 1 {
                let k = rng.random_range(0..n - 1);
                (if k >= i { k + 1 } else { k }, FlowFile::Virtual)
            } else {
                (i, FlowFile::Virtual)
            };
            Flow {
                src,
                dst: i,
                file,
                path: Vec::new(),
            }
        })
        .collect()
}
