//! Chemical distances inside excursion sets: label-restricted shortest
//! paths, chemical diameters, the S-statistic over a box, and the
//! stretch-factor scaling experiment.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::collections::HashMap;

use crate::error::CoreError;
use crate::excursion::{excursion_set, Adjacency, ExcursionSet, NO_LABEL};
use crate::field::sample_smooth_field;
use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStatus {
    Connected,
    Disconnected,
    EndpointOutside,
}

/// Answer to one chemical-distance query. `length` is the Euclidean length
/// of the grid geodesic (steps * h); +inf unless connected.
#[derive(Debug, Clone)]
pub struct PathResult {
    pub status: PathStatus,
    pub length: f64,
    /// Linear cell indices from a to b, present iff connected.
    pub path: Vec<usize>,
}

impl PathResult {
    fn not_connected(status: PathStatus) -> Self {
        PathResult {
            status,
            length: f64::INFINITY,
            path: Vec::new(),
        }
    }
}

fn face_neighbors(grid: &Grid, lin: usize, out: &mut Vec<usize>) {
    out.clear();
    let idx = grid.multi(lin);
    for k in 0..grid.dim {
        if idx[k] > 0 {
            let mut nb = idx.clone();
            nb[k] -= 1;
            out.push(grid.linear(&nb));
        }
        if idx[k] + 1 < grid.extent[k] {
            let mut nb = idx.clone();
            nb[k] += 1;
            out.push(grid.linear(&nb));
        }
    }
}

/// Shortest path between two cells through the occupied set, over the
/// face-adjacency graph with edge weight h (priority-queue search).
pub fn chemical_distance(set: &ExcursionSet, a: &[usize], b: &[usize]) -> PathResult {
    let grid = &set.grid;
    let la = grid.linear(a);
    let lb = grid.linear(b);
    if !set.occupied[la] || !set.occupied[lb] {
        return PathResult::not_connected(PathStatus::EndpointOutside);
    }
    // component labels give a cheap disconnection certificate when the set
    // itself was labeled with face adjacency
    if set.adjacency == Adjacency::Face && set.labels[la] != set.labels[lb] {
        return PathResult::not_connected(PathStatus::Disconnected);
    }
    let n = grid.num_cells();
    let mut dist = vec![u64::MAX; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    dist[la] = 0;
    heap.push(Reverse((0, la)));
    let mut nbs = Vec::with_capacity(2 * grid.dim);
    while let Some(Reverse((d, cell))) = heap.pop() {
        if d > dist[cell] {
            continue;
        }
        if cell == lb {
            break;
        }
        face_neighbors(grid, cell, &mut nbs);
        for &nb in &nbs {
            if !set.occupied[nb] {
                continue;
            }
            let nd = d + 1;
            if nd < dist[nb] {
                dist[nb] = nd;
                prev[nb] = cell;
                heap.push(Reverse((nd, nb)));
            }
        }
    }
    if dist[lb] == u64::MAX {
        return PathResult::not_connected(PathStatus::Disconnected);
    }
    let mut path = vec![lb];
    let mut cur = lb;
    while cur != la {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    PathResult {
        status: PathStatus::Connected,
        length: dist[lb] as f64 * grid.spacing,
        path,
    }
}

/// Single-source grid-geodesic step counts restricted to the given cells.
/// Returns steps indexed like `cells`; `u64::MAX` for unreachable.
fn bfs_steps(grid: &Grid, cells: &[usize], local_of: &HashMap<usize, usize>, start: usize) -> Vec<u64> {
    let mut steps = vec![u64::MAX; cells.len()];
    let mut queue = std::collections::VecDeque::new();
    steps[start] = 0;
    queue.push_back(start);
    let mut nbs = Vec::with_capacity(2 * grid.dim);
    while let Some(i) = queue.pop_front() {
        face_neighbors(grid, cells[i], &mut nbs);
        for &nb in &nbs {
            if let Some(&j) = local_of.get(&nb) {
                if steps[j] == u64::MAX {
                    steps[j] = steps[i] + 1;
                    queue.push_back(j);
                }
            }
        }
    }
    steps
}

/// Chemical diameter of one labeled component: exact (all-pairs sweeps)
/// up to 2000 cells, farthest-point double-sweep lower bound beyond that.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChemDiameter {
    pub length: f64,
    pub exact: bool,
}

const EXACT_CHEM_DIAMETER_LIMIT: usize = 2000;

pub fn chemical_diameter(set: &ExcursionSet, component: u32) -> ChemDiameter {
    let grid = &set.grid;
    let cells: Vec<usize> = set
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == component)
        .map(|(lin, _)| lin)
        .collect();
    chem_diameter_of_cells(grid, &cells)
}

fn chem_diameter_of_cells(grid: &Grid, cells: &[usize]) -> ChemDiameter {
    if cells.len() < 2 {
        return ChemDiameter { length: 0.0, exact: true };
    }
    let mut local_of = HashMap::with_capacity(cells.len());
    for (i, &lin) in cells.iter().enumerate() {
        local_of.insert(lin, i);
    }
    let max_finite = |steps: &[u64]| steps.iter().copied().filter(|&s| s != u64::MAX).max().unwrap_or(0);
    if cells.len() <= EXACT_CHEM_DIAMETER_LIMIT {
        let mut best = 0u64;
        for start in 0..cells.len() {
            best = best.max(max_finite(&bfs_steps(grid, cells, &local_of, start)));
        }
        return ChemDiameter {
            length: best as f64 * grid.spacing,
            exact: true,
        };
    }
    // double sweep: farthest point from an arbitrary start, then farthest
    // from that; a lower bound on the true diameter
    let steps = bfs_steps(grid, cells, &local_of, 0);
    let far = steps
        .iter()
        .enumerate()
        .filter(|(_, &s)| s != u64::MAX)
        .max_by_key(|(_, &s)| s)
        .map(|(i, _)| i)
        .unwrap_or(0);
    let best = max_finite(&bfs_steps(grid, cells, &local_of, far));
    ChemDiameter {
        length: best as f64 * grid.spacing,
        exact: false,
    }
}

/// S(s, E): max chemical diameter among components of `set` meeting the box
/// `B_s` around `center`; diameters are taken within the full set, so paths
/// may leave the box. Returns 0 for an empty intersection.
pub fn chemical_s(set: &ExcursionSet, s: f64, center: &[f64]) -> ChemDiameter {
    let mut seen: Vec<u32> = set
        .grid
        .cells_in_box(center, s)
        .into_iter()
        .map(|lin| set.labels[lin])
        .filter(|&l| l != NO_LABEL)
        .collect();
    seen.sort_unstable();
    seen.dedup();
    let mut out = ChemDiameter { length: 0.0, exact: true };
    for label in seen {
        let d = chemical_diameter(set, label);
        if d.length > out.length {
            out = d;
        }
    }
    out
}

/// Empirical tail frequencies of samples at the given thresholds.
pub fn tail_frequencies(samples: &[f64], thresholds: &[f64]) -> Vec<f64> {
    if samples.is_empty() {
        return vec![0.0; thresholds.len()];
    }
    thresholds
        .iter()
        .map(|&t| samples.iter().filter(|&&x| x >= t).count() as f64 / samples.len() as f64)
        .collect()
}

/// Scaling exponent kappa(delta) = (1 + delta)(d - 1)(1/2 + 1/(2 beta - d)).
pub fn kappa_exponent(d: usize, beta: f64, delta: f64) -> Result<f64, CoreError> {
    if 2.0 * beta - d as f64 <= 0.0 {
        return Err(CoreError::invalid("beta", "requires 2*beta - d > 0"));
    }
    if delta < 0.0 {
        return Err(CoreError::invalid("delta", "must be nonnegative"));
    }
    Ok((1.0 + delta) * (d as f64 - 1.0) * (0.5 + 1.0 / (2.0 * beta - d as f64)))
}

/// One trial of the stretch experiment.
#[derive(Debug, Clone)]
pub struct StretchRecord {
    pub seed: u64,
    pub trial: u64,
    pub level: f64,
    pub x_norm: f64,
    pub connected: bool,
    /// +inf when not connected.
    pub d_chem: f64,
    /// d_chem / ||x||; +inf when not connected.
    pub stretch: f64,
    /// Exceedance threshold log^{kappa}(||x||) on the stretch factor.
    pub threshold: f64,
    pub stretched: bool,
}

#[derive(Debug, Clone)]
pub struct StretchParams {
    pub kernel: Kernel,
    pub level: f64,
    pub norms: Vec<f64>,
    pub trials: u64,
    pub spacing: f64,
    /// Margin added around the segment [0, x] so boundary cells do not bias
    /// connectivity.
    pub margin: f64,
    /// Effective decay exponent used only for the kappa target.
    pub kappa_beta: f64,
    pub delta: f64,
    pub seed: u64,
}

const STRETCH_CELL_BUDGET: usize = 4_000_000;

/// For each (||x||, trial): sample a field on a domain containing 0 and
/// x = (||x||, 0, ...), compute d_chem(0, x) in the excursion set at the
/// given level, and record whether the stretch exceeds log^{kappa}(||x||).
pub fn stretch_experiment(params: &StretchParams) -> Result<Vec<StretchRecord>, CoreError> {
    let dim = params.kernel.dim;
    let kappa = kappa_exponent(dim, params.kappa_beta, params.delta)?;
    let mut records = Vec::new();
    for (ni, &norm) in params.norms.iter().enumerate() {
        if norm <= 1.0 {
            return Err(CoreError::invalid("norms", "distances must exceed 1"));
        }
        let mut center = vec![0.0; dim];
        center[0] = norm / 2.0;
        let half = norm / 2.0 + params.margin;
        let grid = Grid::covering(&center, half, params.spacing)?;
        if grid.num_cells() > STRETCH_CELL_BUDGET {
            return Err(CoreError::Budget(format!(
                "stretch domain of {} cells exceeds the {} cell budget (||x|| = {}, h = {})",
                grid.num_cells(),
                STRETCH_CELL_BUDGET,
                norm,
                params.spacing
            )));
        }
        let origin_cell = grid.clamped_cell(&vec![0.0; dim]);
        let mut target = vec![0.0; dim];
        target[0] = norm;
        let target_cell = grid.clamped_cell(&target);
        let threshold = norm.ln().powf(kappa);
        for trial in 0..params.trials {
            let state = RngState::trial(params.seed, (ni as u64) << 32, trial);
            let field = sample_smooth_field(&grid, &params.kernel, &state)?;
            let set = excursion_set(&field, params.level, Adjacency::Face);
            let res = chemical_distance(&set, &origin_cell, &target_cell);
            let connected = res.status == PathStatus::Connected;
            let stretch = if connected { res.length / norm } else { f64::INFINITY };
            records.push(StretchRecord {
                seed: params.seed,
                trial,
                level: params.level,
                x_norm: norm,
                connected,
                d_chem: res.length,
                stretch,
                threshold,
                stretched: connected && stretch > threshold,
            });
        }
    }
    Ok(records)
}

/// Frequency of the stretched event among connected trials, per distance.
pub fn stretch_frequencies(records: &[StretchRecord]) -> Vec<(f64, usize, f64)> {
    let mut norms: Vec<f64> = records.iter().map(|r| r.x_norm).collect();
    norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    norms.dedup();
    norms
        .into_iter()
        .map(|norm| {
            let conn: Vec<&StretchRecord> = records
                .iter()
                .filter(|r| r.x_norm == norm && r.connected)
                .collect();
            let freq = if conn.is_empty() {
                0.0
            } else {
                conn.iter().filter(|r| r.stretched).count() as f64 / conn.len() as f64
            };
            (norm, conn.len(), freq)
        })
        .collect()
}
