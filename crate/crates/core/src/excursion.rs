//! Excursion sets on grids: occupancy, component labeling, box events
//! (Exist / Unique / local uniqueness / small clusters), crossing probes,
//! the deterministic duality implication, and the implicit-function-theorem
//! regularity diagnostic.

use std::collections::HashMap;

use crate::error::CoreError;
use crate::field::{gradient_at, hessian_at, sym_operator_norm};
use crate::grid::{Grid, GridField};
use crate::unionfind::UnionFind;

/// Lattice adjacency convention. Face adjacency (2d neighbors) is used for
/// occupied sets, star adjacency (3^d - 1 neighbors) for their complements
/// in duality arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjacency {
    Face,
    Star,
}

impl Adjacency {
    /// All neighbor offsets, each component in {-1, 0, 1}.
    pub fn offsets(&self, dim: usize) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        let mut cur = vec![-1i64; dim];
        loop {
            let nonzero = cur.iter().filter(|&&v| v != 0).count();
            let keep = match self {
                Adjacency::Face => nonzero == 1,
                Adjacency::Star => nonzero >= 1,
            };
            if keep {
                out.push(cur.clone());
            }
            let mut k = dim;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if cur[k] < 1 {
                    cur[k] += 1;
                    for j in k + 1..dim {
                        cur[j] = -1;
                    }
                    break;
                }
            }
        }
    }
}

/// Euclidean diameter of a finite cell set, possibly as a bracket.
/// `lower == upper` means the value is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiameterEstimate {
    pub lower: f64,
    pub upper: f64,
}

impl DiameterEstimate {
    pub fn exact(v: f64) -> Self {
        DiameterEstimate { lower: v, upper: v }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

/// Exact maximum pairwise distance in 2D via the convex hull of the cell
/// centers (hulls of digital components stay small, so the pairwise pass
/// over hull vertices is cheap).
fn diameter_2d(points: &[[f64; 2]]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let cross = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| -> f64 {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    let hull: Vec<[f64; 2]> = lower.into_iter().chain(upper).collect();
    let mut best = 0.0f64;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            let dx = hull[i][0] - hull[j][0];
            let dy = hull[i][1] - hull[j][1];
            best = best.max(dx * dx + dy * dy);
        }
    }
    best.sqrt()
}

/// Cells above this count fall back to a bracket in 3D; events re-run the
/// exact pass only when the bracket straddles their threshold.
const EXACT_DIAMETER_LIMIT: usize = 2000;

fn diameter_exact_pairwise(points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d2: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

/// Diameter of a set of cell centers; exact in 2D, bracketed for huge 3D
/// components (farthest-point sweeps below, bounding-box diagonal above).
pub fn cell_set_diameter(points: &[Vec<f64>]) -> DiameterEstimate {
    if points.len() < 2 {
        return DiameterEstimate::exact(0.0);
    }
    let dim = points[0].len();
    if dim == 2 {
        let pts2: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
        return DiameterEstimate::exact(diameter_2d(&pts2));
    }
    if points.len() <= EXACT_DIAMETER_LIMIT {
        return DiameterEstimate::exact(diameter_exact_pairwise(points));
    }
    let dist2 = |a: &Vec<f64>, b: &Vec<f64>| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    // double sweep lower bound
    let mut cur = 0usize;
    let mut lower2 = 0.0f64;
    for _ in 0..4 {
        let (far, d2) = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, dist2(p, &points[cur])))
            .fold((cur, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        lower2 = lower2.max(d2);
        cur = far;
    }
    let mut upper2 = 0.0f64;
    for k in 0..dim {
        let lo = points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        upper2 += (hi - lo) * (hi - lo);
    }
    DiameterEstimate {
        lower: lower2.sqrt(),
        upper: upper2.sqrt(),
    }
}

/// Decide `diameter(points) >= threshold`, resolving indecisive brackets
/// with the exact pairwise pass.
pub fn diameter_at_least(points: &[Vec<f64>], threshold: f64) -> bool {
    let est = cell_set_diameter(points);
    if est.lower >= threshold {
        return true;
    }
    if est.upper < threshold {
        return false;
    }
    diameter_exact_pairwise(points) >= threshold
}

pub const NO_LABEL: u32 = u32::MAX;

/// Per-component summary.
#[derive(Debug, Clone)]
pub struct ComponentInfo {
    pub cells: usize,
    pub bbox_min: Vec<usize>,
    pub bbox_max: Vec<usize>,
    pub diameter: DiameterEstimate,
}

/// Binary occupancy over a grid plus component labels.
#[derive(Debug, Clone)]
pub struct ExcursionSet {
    pub grid: Grid,
    pub level: f64,
    pub adjacency: Adjacency,
    pub occupied: Vec<bool>,
    /// Component id per cell, `NO_LABEL` for unoccupied cells.
    pub labels: Vec<u32>,
    pub components: Vec<ComponentInfo>,
}

/// Occupancy is `f(x) >= -level`.
pub fn excursion_set(field: &GridField, level: f64, adjacency: Adjacency) -> ExcursionSet {
    let grid = field.grid.clone();
    let occupied: Vec<bool> = field.values.iter().map(|&v| v >= -level).collect();
    from_occupancy(grid, occupied, level, adjacency)
}

/// Label an explicit occupancy mask (used by tests and by sign-flipped sets).
pub fn from_occupancy(grid: Grid, occupied: Vec<bool>, level: f64, adjacency: Adjacency) -> ExcursionSet {
    let n = grid.num_cells();
    assert_eq!(occupied.len(), n);
    let mut uf = UnionFind::new(n);
    let offsets = adjacency.offsets(grid.dim);
    for lin in 0..n {
        if !occupied[lin] {
            continue;
        }
        let idx = grid.multi(lin);
        for off in &offsets {
            // visit each unordered pair once by requiring a positive first
            // nonzero offset component
            if off.iter().copied().find(|&v| v != 0) != Some(1) {
                continue;
            }
            let mut ok = true;
            let mut nb = Vec::with_capacity(grid.dim);
            for k in 0..grid.dim {
                let v = idx[k] as i64 + off[k];
                if v < 0 || v >= grid.extent[k] as i64 {
                    ok = false;
                    break;
                }
                nb.push(v as usize);
            }
            if !ok {
                continue;
            }
            let nlin = grid.linear(&nb);
            if occupied[nlin] {
                uf.union(lin, nlin);
            }
        }
    }
    let mut labels = vec![NO_LABEL; n];
    let mut roots: HashMap<usize, u32> = HashMap::new();
    let mut comp_cells: Vec<Vec<usize>> = Vec::new();
    for lin in 0..n {
        if !occupied[lin] {
            continue;
        }
        let root = uf.find(lin);
        let next = comp_cells.len() as u32;
        let id = *roots.entry(root).or_insert_with(|| {
            comp_cells.push(Vec::new());
            next
        });
        labels[lin] = id;
        comp_cells[id as usize].push(lin);
    }
    let components = comp_cells
        .iter()
        .map(|cells| {
            let mut bbox_min = vec![usize::MAX; grid.dim];
            let mut bbox_max = vec![0usize; grid.dim];
            let mut pts = Vec::with_capacity(cells.len());
            for &lin in cells {
                let idx = grid.multi(lin);
                for k in 0..grid.dim {
                    bbox_min[k] = bbox_min[k].min(idx[k]);
                    bbox_max[k] = bbox_max[k].max(idx[k]);
                }
                pts.push(grid.point(&idx));
            }
            ComponentInfo {
                cells: cells.len(),
                bbox_min,
                bbox_max,
                diameter: cell_set_diameter(&pts),
            }
        })
        .collect();
    ExcursionSet {
        grid,
        level,
        adjacency,
        occupied,
        labels,
        components,
    }
}

/// Axis-aligned box event geometry: `B_R = center + [-R, R]^d`, enlarged to
/// `B_{R(1+kappa)}` for uniqueness.
#[derive(Debug, Clone)]
pub struct BoxSpec {
    pub center: Vec<f64>,
    pub r: f64,
    pub kappa: f64,
}

impl BoxSpec {
    pub fn new(center: Vec<f64>, r: f64, kappa: f64) -> Result<Self, CoreError> {
        if !(r > 1.0) {
            return Err(CoreError::invalid("R", "must exceed 1"));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(CoreError::invalid("kappa", "must lie in (0,1)"));
        }
        Ok(BoxSpec { center, r, kappa })
    }

    pub fn enlarged_half(&self) -> f64 {
        self.r * (1.0 + self.kappa)
    }
}

/// Labels of `set` restricted to the given cells (connectivity recomputed
/// inside the restriction). Returns (cells, local component id per cell).
pub fn label_restricted(set: &ExcursionSet, cells: &[usize]) -> (Vec<usize>, Vec<u32>) {
    let grid = &set.grid;
    let mut local_of: HashMap<usize, usize> = HashMap::with_capacity(cells.len());
    for (i, &lin) in cells.iter().enumerate() {
        local_of.insert(lin, i);
    }
    let mut uf = UnionFind::new(cells.len());
    let offsets = set.adjacency.offsets(grid.dim);
    for (i, &lin) in cells.iter().enumerate() {
        if !set.occupied[lin] {
            continue;
        }
        let idx = grid.multi(lin);
        for off in &offsets {
            let mut ok = true;
            let mut nb = Vec::with_capacity(grid.dim);
            for k in 0..grid.dim {
                let v = idx[k] as i64 + off[k];
                if v < 0 || v >= grid.extent[k] as i64 {
                    ok = false;
                    break;
                }
                nb.push(v as usize);
            }
            if !ok {
                continue;
            }
            let nlin = grid.linear(&nb);
            if set.occupied[nlin] {
                if let Some(&j) = local_of.get(&nlin) {
                    uf.union(i, j);
                }
            }
        }
    }
    let mut ids = vec![NO_LABEL; cells.len()];
    let mut roots: HashMap<usize, u32> = HashMap::new();
    let mut next = 0u32;
    for (i, &lin) in cells.iter().enumerate() {
        if !set.occupied[lin] {
            continue;
        }
        let root = uf.find(i);
        let id = *roots.entry(root).or_insert_with(|| {
            let v = next;
            next += 1;
            v
        });
        ids[i] = id;
    }
    (cells.to_vec(), ids)
}

fn components_cells(cells: &[usize], ids: &[u32]) -> Vec<Vec<usize>> {
    let ncomp = ids.iter().filter(|&&v| v != NO_LABEL).map(|&v| v + 1).max().unwrap_or(0) as usize;
    let mut out = vec![Vec::new(); ncomp];
    for (i, &id) in ids.iter().enumerate() {
        if id != NO_LABEL {
            out[id as usize].push(cells[i]);
        }
    }
    out
}

/// Exist(R, l): for every axis, one component of `set` inside `B_R` touches
/// both opposite faces.
pub fn exist_event(set: &ExcursionSet, spec: &BoxSpec) -> bool {
    crossed_axes(set, spec).iter().all(|&c| c)
}

/// Crossing along one fixed axis: some component of `set` inside `B_R`
/// touches both opposite faces perpendicular to `axis`. In d = 2 this event
/// is self-dual at the critical level (probability 1/2 for a square box),
/// which makes it the right probe for locating the critical level.
pub fn axis_crossing_event(set: &ExcursionSet, spec: &BoxSpec, axis: usize) -> bool {
    crossed_axes(set, spec)[axis]
}

/// Which axes of `B_R` are crossed by a single component of the restriction.
fn crossed_axes(set: &ExcursionSet, spec: &BoxSpec) -> Vec<bool> {
    let grid = &set.grid;
    let h = grid.spacing;
    let cells = grid.cells_in_box(&spec.center, spec.r);
    if cells.is_empty() {
        return vec![false; grid.dim];
    }
    let (cells, ids) = label_restricted(set, &cells);
    let ncomp = ids.iter().filter(|&&v| v != NO_LABEL).map(|&v| v + 1).max().unwrap_or(0) as usize;
    if ncomp == 0 {
        return vec![false; grid.dim];
    }
    // a cell "touches" a face when it lies in the extremal cell layer of
    // the box along that axis (the layer nearest the face plane, always
    // within h of it); using the plane itself breaks when box faces do not
    // align with the grid
    let tol = h / 100.0;
    let mut crossed = vec![false; grid.dim];
    for axis in 0..grid.dim {
        let coords: Vec<f64> = cells.iter().map(|&lin| grid.point_of_linear(lin)[axis]).collect();
        let lo_layer = coords.iter().copied().fold(f64::INFINITY, f64::min);
        let hi_layer = coords.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lo_touch = vec![false; ncomp];
        let mut hi_touch = vec![false; ncomp];
        for (i, &c) in coords.iter().enumerate() {
            let id = ids[i];
            if id == NO_LABEL {
                continue;
            }
            if (c - lo_layer).abs() <= tol {
                lo_touch[id as usize] = true;
            }
            if (c - hi_layer).abs() <= tol {
                hi_touch[id as usize] = true;
            }
        }
        crossed[axis] = (0..ncomp).any(|c| lo_touch[c] && hi_touch[c]);
    }
    crossed
}

/// Unique(R, l, kappa): all components of `set` inside `B_R` with diameter
/// >= kappa*R are connected inside `B_{R(1+kappa)}`.
pub fn unique_event(set: &ExcursionSet, spec: &BoxSpec) -> bool {
    let grid = &set.grid;
    let threshold = spec.kappa * spec.r;
    let inner = grid.cells_in_box(&spec.center, spec.r);
    let (inner, inner_ids) = label_restricted(set, &inner);
    let comps = components_cells(&inner, &inner_ids);
    let mut representatives = Vec::new();
    for cells in &comps {
        let pts: Vec<Vec<f64>> = cells.iter().map(|&c| grid.point_of_linear(c)).collect();
        if diameter_at_least(&pts, threshold) {
            representatives.push(cells[0]);
        }
    }
    if representatives.len() <= 1 {
        return true;
    }
    let outer = grid.cells_in_box(&spec.center, spec.enlarged_half());
    let (outer, outer_ids) = label_restricted(set, &outer);
    let mut id_of: HashMap<usize, u32> = HashMap::with_capacity(outer.len());
    for (i, &lin) in outer.iter().enumerate() {
        id_of.insert(lin, outer_ids[i]);
    }
    let first = id_of[&representatives[0]];
    representatives.iter().all(|rep| id_of[rep] == first && first != NO_LABEL)
}

/// A(R, l, kappa) = Exist and Unique.
pub fn local_uniqueness(set: &ExcursionSet, spec: &BoxSpec) -> bool {
    exist_event(set, spec) && unique_event(set, spec)
}

/// Every component of `set` inside the enlarged box has diameter < kappa*R.
pub fn small_clusters_property(set: &ExcursionSet, spec: &BoxSpec) -> bool {
    let grid = &set.grid;
    let threshold = spec.kappa * spec.r;
    let cells = grid.cells_in_box(&spec.center, spec.enlarged_half());
    let (cells, ids) = label_restricted(set, &cells);
    for comp in components_cells(&cells, &ids) {
        let pts: Vec<Vec<f64>> = comp.iter().map(|&c| grid.point_of_linear(c)).collect();
        if diameter_at_least(&pts, threshold) {
            return false;
        }
    }
    true
}

/// Which side of the level the probed set lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignSet {
    /// `{f >= -l}` with face adjacency.
    AtLeast,
    /// `{f <= -l}` with star adjacency.
    AtMost,
}

/// Build the sign-set of a field at a level with the conventional adjacency.
pub fn sign_set(field: &GridField, level: f64, sign: SignSet) -> ExcursionSet {
    match sign {
        SignSet::AtLeast => excursion_set(field, level, Adjacency::Face),
        // {f <= -l} = {-f >= l} = excursion of -f at level -l
        SignSet::AtMost => excursion_set(&field.negated(), -level, Adjacency::Star),
    }
}

/// Does one component of `set` intersect both `B_1` and the boundary shell
/// of `B_R` (both boxes centered at `center`)?
pub fn crosses_to_boundary(set: &ExcursionSet, center: &[f64], r: f64) -> bool {
    let grid = &set.grid;
    let h = grid.spacing;
    let inner_cells = grid.cells_in_box(center, 1.0);
    let box_cells = grid.cells_in_box(center, r);
    // boundary shell = extremal cell layers of the box along each axis
    let mut lo_layer = vec![f64::INFINITY; grid.dim];
    let mut hi_layer = vec![f64::NEG_INFINITY; grid.dim];
    for &lin in &box_cells {
        let p = grid.point_of_linear(lin);
        for k in 0..grid.dim {
            lo_layer[k] = lo_layer[k].min(p[k]);
            hi_layer[k] = hi_layer[k].max(p[k]);
        }
    }
    let tol = h / 100.0;
    let shell: Vec<usize> = box_cells
        .into_iter()
        .filter(|&lin| {
            let p = grid.point_of_linear(lin);
            (0..grid.dim)
                .any(|k| (p[k] - lo_layer[k]).abs() <= tol || (p[k] - hi_layer[k]).abs() <= tol)
        })
        .collect();
    let mut inner_labels: Vec<u32> = inner_cells
        .iter()
        .map(|&c| set.labels[c])
        .filter(|&l| l != NO_LABEL)
        .collect();
    inner_labels.sort_unstable();
    inner_labels.dedup();
    if inner_labels.is_empty() {
        return false;
    }
    shell
        .iter()
        .any(|&c| set.labels[c] != NO_LABEL && inner_labels.binary_search(&set.labels[c]).is_ok())
}

/// Outcome of the deterministic duality implication on one sampled field:
/// if `E^- = {f <= -l}` (star adjacency) has the small-clusters property,
/// then `E^+ = {f >= -l}` (face adjacency) must have the unique-cluster and
/// crossing properties.
#[derive(Debug, Clone, Copy)]
pub struct DualityReport {
    pub antecedent: bool,
    pub consequent: bool,
    pub violated: bool,
}

pub fn duality_check(field: &GridField, spec: &BoxSpec, level: f64) -> DualityReport {
    let minus = sign_set(field, level, SignSet::AtMost);
    let antecedent = small_clusters_property(&minus, spec);
    let consequent = if antecedent {
        let plus = sign_set(field, level, SignSet::AtLeast);
        unique_event(&plus, spec) && exist_event(&plus, spec)
    } else {
        // implication vacuous; still report the consequent honestly
        let plus = sign_set(field, level, SignSet::AtLeast);
        unique_event(&plus, spec) && exist_event(&plus, spec)
    };
    DualityReport {
        antecedent,
        consequent,
        violated: antecedent && !consequent,
    }
}

/// Quantitative implicit-function-theorem diagnostic over a box.
#[derive(Debug, Clone, Copy)]
pub struct RegularityProbe {
    /// Minimum finite-difference gradient norm over near-level cells.
    pub lambda: f64,
    /// Max gradient norm plus max Hessian operator norm over the box.
    pub k: f64,
    /// `lambda^2 / (4 k^2 d^{3/2})` when `k > lambda > 0`, else 0.
    pub certified_eps: f64,
    /// Set when a near-level cell has a vanishing gradient estimate.
    pub degenerate: bool,
    /// Set when the formula does not apply (k <= lambda or no near-level cells).
    pub inapplicable: bool,
    pub near_level_cells: usize,
}

pub fn regularity_probe(field: &GridField, center: &[f64], half: f64, level: f64) -> RegularityProbe {
    let grid = &field.grid;
    let h = grid.spacing;
    let d = grid.dim;
    let cells = grid.cells_in_box(center, half);
    let mut max_grad = 0.0f64;
    let mut max_hess = 0.0f64;
    let mut grads = Vec::with_capacity(cells.len());
    for &lin in &cells {
        let idx = grid.multi(lin);
        let g = gradient_at(field, &idx);
        let gn: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        max_grad = max_grad.max(gn);
        let hess = hessian_at(field, &idx);
        max_hess = max_hess.max(sym_operator_norm(&hess, d));
        grads.push(gn);
    }
    let k = max_grad + max_hess;
    let band = h * max_grad;
    let mut lambda = f64::INFINITY;
    let mut near = 0usize;
    for (i, &lin) in cells.iter().enumerate() {
        if (field.values[lin] + level).abs() <= band {
            near += 1;
            lambda = lambda.min(grads[i]);
        }
    }
    if near == 0 {
        return RegularityProbe {
            lambda: 0.0,
            k,
            certified_eps: 0.0,
            degenerate: false,
            inapplicable: true,
            near_level_cells: 0,
        };
    }
    let degenerate = lambda == 0.0;
    let applicable = k > lambda && lambda > 0.0;
    let certified_eps = if applicable {
        lambda * lambda / (4.0 * k * k * (d as f64).powf(1.5))
    } else {
        0.0
    };
    RegularityProbe {
        lambda,
        k,
        certified_eps,
        degenerate,
        inapplicable: !applicable,
        near_level_cells: near,
    }
}
