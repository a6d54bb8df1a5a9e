use super::matching::Flow;

/// Squarelets per cluster side for `n_c` members.
///
/// The squarelet side relative to the cluster side is `√min(1, c0·ln(n_c)/n_c)`; the grid
/// count is the largest integer not exceeding its inverse, and at least 1.
pub fn squarelet_grid(n_c: usize, c0: f64) -> usize {
    if n_c <= 1 {
        return 1;
    }
    let n = n_c as f64;
    let rel = (c0 * n.ln() / n).min(1.0).sqrt();
    ((1.0 / rel).floor() as usize).max(1)
}

/// Relay load per squarelet of one cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareletLoads {
    /// Squarelets per side.
    pub grid: usize,
    /// Squarelet of every member, row-major.
    pub cells: Vec<usize>,
    /// Number of flows traversing each squarelet.
    pub loads: Vec<u32>,
}

impl SquareletLoads {
    pub fn max_load(&self) -> u32 {
        self.loads.iter().copied().max().unwrap_or(0)
    }

    pub fn total_load(&self) -> u64 {
        self.loads.iter().map(|&l| l as u64).sum()
    }
}

/// Routes every flow row-then-column over the squarelet grid and accumulates cell loads.
///
/// `local` holds member positions scaled to the cluster, in `[0, 1)²`. A flow travels along
/// its source row to the destination column and then along that column; only occupied
/// squarelets relay, so empty cells on the way are skipped. Self-hits and flows with
/// `src == dst` carry no traffic and get an empty path.
pub fn route_and_load(local: &[(f64, f64)], flows: &mut [Flow], c0: f64) -> SquareletLoads {
    let grid = squarelet_grid(local.len(), c0);
    let coord = |v: f64| ((v * grid as f64) as usize).min(grid - 1);
    let cells: Vec<usize> = local
        .iter()
        .map(|&(x, y)| coord(y) * grid + coord(x))
        .collect();
    let mut occupied = vec![false; grid * grid];
    for &c in &cells {
        occupied[c] = true;
    }
    let mut loads = vec![0u32; grid * grid];

    for flow in flows.iter_mut() {
        flow.path.clear();
        if flow.src == flow.dst {
            continue;
        }
        let (s, d) = (cells[flow.src], cells[flow.dst]);
        let (sx, sy, dx, dy) = (s % grid, s / grid, d % grid, d / grid);
        let path = &mut flow.path;
        let mut visit = |c: usize| {
            if occupied[c] {
                path.push(c);
            }
        };
        let mut x = sx;
        visit(sy * grid + x);
        while x != dx {
            x = if x < dx { x + 1 } else { x - 1 };
            visit(sy * grid + x);
        }
        let mut y = sy;
        while y != dy {
            y = if y < dy { y + 1 } else { y - 1 };
            visit(y * grid + dx);
        }
        for &c in &flow.path {
            loads[c] += 1;
        }
    }
    SquareletLoads { grid, cells, loads }
}
