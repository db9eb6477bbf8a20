//! Renormalization layer: coarse-grained site configurations from field
//! samples, the stochastic-domination bound, star-connected closed cluster
//! (Peierls) statistics, and the constructive global-structure search.

use std::collections::VecDeque;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::excursion::{excursion_set, local_uniqueness, Adjacency, BoxSpec};
use crate::field::{discretize, sample_smooth_field};
use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::rng::RngState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    FieldDerived {
        level: f64,
        kappa: f64,
        trunc_r: f64,
        eps: f64,
    },
    Bernoulli {
        p: f64,
    },
}

/// Renormalized site lattice: site i carries omega_i = 1 iff the local
/// uniqueness event held in the box B_i = (R/10) i + B_R.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteConfiguration {
    pub dim: usize,
    pub extent: Vec<usize>,
    pub omega: Vec<bool>,
    /// Box half-side R of the per-site event geometry.
    pub r_box: f64,
    /// Physical spacing between site centers (R/10).
    pub site_spacing: f64,
    pub provenance: Provenance,
}

impl SiteConfiguration {
    pub fn num_sites(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn linear(&self, idx: &[usize]) -> usize {
        let mut lin = 0usize;
        for k in 0..self.dim {
            debug_assert!(idx[k] < self.extent[k]);
            lin = lin * self.extent[k] + idx[k];
        }
        lin
    }

    pub fn multi(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim];
        for k in (0..self.dim).rev() {
            idx[k] = lin % self.extent[k];
            lin /= self.extent[k];
        }
        idx
    }

    pub fn open(&self, idx: &[usize]) -> bool {
        self.omega[self.linear(idx)]
    }

    pub fn to_json(&self) -> String {
        let mut bytes = vec![0u8; self.omega.len().div_ceil(8)];
        for (i, &b) in self.omega.iter().enumerate() {
            if b {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        let mirror = ConfigJson {
            dim: self.dim,
            extent: self.extent.clone(),
            sites: self.omega.len(),
            omega_b64: B64.encode(&bytes),
            r_box: self.r_box,
            site_spacing: self.site_spacing,
            provenance: self.provenance.clone(),
        };
        serde_json::to_string_pretty(&mirror).expect("config serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        let mirror: ConfigJson = serde_json::from_str(text)?;
        let bytes = B64
            .decode(&mirror.omega_b64)
            .map_err(|e| CoreError::invalid("omega_b64", &e.to_string()))?;
        let expected: usize = mirror.extent.iter().product();
        if mirror.sites != expected || bytes.len() != expected.div_ceil(8) {
            return Err(CoreError::invalid("sites", "inconsistent with extent"));
        }
        let omega = (0..expected)
            .map(|i| bytes[i / 8] & (1 << (i % 8)) != 0)
            .collect();
        Ok(SiteConfiguration {
            dim: mirror.dim,
            extent: mirror.extent,
            omega,
            r_box: mirror.r_box,
            site_spacing: mirror.site_spacing,
            provenance: mirror.provenance,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigJson {
    dim: usize,
    extent: Vec<usize>,
    sites: usize,
    omega_b64: String,
    r_box: f64,
    site_spacing: f64,
    provenance: Provenance,
}

/// Bernoulli(p) configuration on a site lattice.
pub fn bernoulli_config<R: Rng>(extent: &[usize], p: f64, spacing: f64, rng: &mut R) -> SiteConfiguration {
    let n: usize = extent.iter().product();
    SiteConfiguration {
        dim: extent.len(),
        extent: extent.to_vec(),
        omega: (0..n).map(|_| rng.random::<f64>() < p).collect(),
        r_box: spacing * 10.0,
        site_spacing: spacing,
        provenance: Provenance::Bernoulli { p },
    }
}

/// Geometry of the coarse-graining experiment.
#[derive(Debug, Clone)]
pub struct CoarseGeometry {
    /// Event box half-side R (physical units).
    pub r_box: f64,
    pub level: f64,
    pub kappa: f64,
    /// Discretization step; 0 disables the epsilon-discretization pass.
    pub eps: f64,
    /// Grid spacing h.
    pub spacing: f64,
    /// Sites per axis.
    pub extent: Vec<usize>,
}

const COARSE_CELL_BUDGET: usize = 25_000_000;

/// Sample one field over a domain covering every enlarged box and evaluate
/// the local uniqueness event per site.
pub fn coarse_grain(kernel: &Kernel, geom: &CoarseGeometry, state: &RngState) -> Result<SiteConfiguration, CoreError> {
    let dim = kernel.dim;
    if geom.extent.len() != dim {
        return Err(CoreError::invalid("extent", "dimension mismatch with kernel"));
    }
    if !(geom.r_box > 1.0) {
        return Err(CoreError::invalid("r_box", "must exceed 1"));
    }
    let step = geom.r_box / 10.0;
    let enlarged = geom.r_box * (1.0 + geom.kappa);
    let h = geom.spacing;
    // domain spans [-enlarged, step*(n_k - 1) + enlarged] per axis plus one
    // cell of slack
    let mut cells = Vec::with_capacity(dim);
    let mut origin = Vec::with_capacity(dim);
    for k in 0..dim {
        let lo = -enlarged - h;
        let hi = step * (geom.extent[k] as f64 - 1.0) + enlarged + h;
        cells.push(((hi - lo) / h).ceil() as usize + 1);
        origin.push(lo);
    }
    let total: usize = cells.iter().product();
    if total > COARSE_CELL_BUDGET {
        return Err(CoreError::Budget(format!(
            "coarse-grain domain of {} cells exceeds the {} cell budget",
            total, COARSE_CELL_BUDGET
        )));
    }
    let grid = Grid::new(cells, h, origin)?;
    let field = sample_smooth_field(&grid, kernel, state)?;
    let field = if geom.eps > 0.0 {
        discretize(&field, geom.eps)?
    } else {
        field
    };
    let set = excursion_set(&field, geom.level, Adjacency::Face);
    let n: usize = geom.extent.iter().product();
    let mut omega = Vec::with_capacity(n);
    let cfg = SiteConfiguration {
        dim,
        extent: geom.extent.clone(),
        omega: Vec::new(),
        r_box: geom.r_box,
        site_spacing: step,
        provenance: Provenance::FieldDerived {
            level: geom.level,
            kappa: geom.kappa,
            trunc_r: kernel.truncation.unwrap_or(f64::INFINITY),
            eps: geom.eps,
        },
    };
    for lin in 0..n {
        let idx = cfg.multi(lin);
        let center: Vec<f64> = idx.iter().map(|&i| step * i as f64).collect();
        let spec = BoxSpec::new(center, geom.r_box, geom.kappa)?;
        omega.push(local_uniqueness(&set, &spec));
    }
    Ok(SiteConfiguration { omega, ..cfg })
}

/// Smallest site sup-distance M at which the per-site events become
/// independent: enlarged boxes plus the kernel radius r/2 must separate, so
/// conservatively M = ceil((2R(1+kappa) + r) / (R/10)).
pub fn dependence_range_sites(r: f64, r_box: f64, kappa: f64) -> usize {
    assert!(r >= 0.0 && r_box > 0.0 && kappa >= 0.0);
    let step = r_box / 10.0;
    ((2.0 * r_box * (1.0 + kappa) + r) / step).ceil() as usize
}

/// Domination defect bound: alpha(p, d, M) <= 4 (1-p)^{1/(2M+1)^d}, capped
/// at 1.
pub fn lss_alpha(p: f64, m: usize, d: usize) -> f64 {
    assert!((0.0..=1.0).contains(&p));
    lss_alpha_from_gap(1.0 - p, m, d)
}

/// Same bound in terms of the gap 1 - p, so extreme marginals (gaps below
/// f64 resolution around 1.0) stay representable.
pub fn lss_alpha_from_gap(gap: f64, m: usize, d: usize) -> f64 {
    assert!((0.0..=1.0).contains(&gap));
    let exponent = 1.0 / ((2 * m + 1) as f64).powi(d as i32);
    (4.0 * gap.powf(exponent)).min(1.0)
}

#[derive(Debug, Clone)]
pub struct DominationReport {
    /// Empirical event probability under the field-derived measure.
    pub p_mu: f64,
    /// Empirical event probability under Bernoulli(q).
    pub p_pi: f64,
    /// Bernoulli level q = 1 - alpha(p_hat, d, M).
    pub q: f64,
    pub alpha: f64,
    pub mu_trials: usize,
    pub pi_trials: usize,
    /// Three pooled standard errors.
    pub slack: f64,
    /// p_mu >= p_pi - slack.
    pub satisfied: bool,
}

/// Compare an increasing event's frequency under field-derived samples and
/// under the dominated Bernoulli measure pi_{1 - alpha(p_hat, d, M)}. The
/// evaluator is spot-checked for monotonicity on randomized single-site
/// upflips first.
pub fn domination_probe<F>(
    mu_samples: &[SiteConfiguration],
    event: F,
    p_hat: f64,
    m: usize,
    pi_trials: usize,
    state: &RngState,
) -> Result<DominationReport, CoreError>
where
    F: Fn(&SiteConfiguration) -> bool,
{
    if mu_samples.is_empty() {
        return Err(CoreError::invalid("mu_samples", "need at least one sample"));
    }
    let dim = mu_samples[0].dim;
    let extent = mu_samples[0].extent.clone();
    let spacing = mu_samples[0].site_spacing;
    // monotonicity spot check: flipping a closed site open must never turn
    // the event from true to false
    let mut rng = state.rng();
    for _ in 0..200 {
        let mut cfg = bernoulli_config(&extent, rng.random::<f64>(), spacing, &mut rng);
        let before = event(&cfg);
        let site = rng.random_range(0..cfg.omega.len());
        if !cfg.omega[site] {
            cfg.omega[site] = true;
            if before && !event(&cfg) {
                return Err(CoreError::invalid("event", "failed increasing-event spot check"));
            }
        }
    }
    let mu_hits = mu_samples.iter().filter(|c| event(c)).count();
    let p_mu = mu_hits as f64 / mu_samples.len() as f64;
    let alpha = lss_alpha(p_hat, m, dim);
    let q = 1.0 - alpha;
    let mut pi_hits = 0usize;
    for _ in 0..pi_trials {
        let cfg = bernoulli_config(&extent, q, spacing, &mut rng);
        if event(&cfg) {
            pi_hits += 1;
        }
    }
    let p_pi = pi_hits as f64 / pi_trials.max(1) as f64;
    let se = (p_mu * (1.0 - p_mu) / mu_samples.len() as f64
        + p_pi * (1.0 - p_pi) / pi_trials.max(1) as f64)
        .sqrt();
    let slack = 3.0 * se;
    Ok(DominationReport {
        p_mu,
        p_pi,
        q,
        alpha,
        mu_trials: mu_samples.len(),
        pi_trials,
        slack,
        satisfied: p_mu >= p_pi - slack,
    })
}

fn neighbor_sites(extent: &[usize], idx: &[usize], adjacency: Adjacency, out: &mut Vec<Vec<usize>>) {
    out.clear();
    let dim = extent.len();
    for off in adjacency.offsets(dim) {
        let mut nb = Vec::with_capacity(dim);
        let mut ok = true;
        for k in 0..dim {
            let v = idx[k] as i64 + off[k];
            if v < 0 || v >= extent[k] as i64 {
                ok = false;
                break;
            }
            nb.push(v as usize);
        }
        if ok {
            out.push(nb);
        }
    }
}

/// Star-connected cluster of closed sites containing `start`; empty when
/// the start site is open.
pub fn closed_star_cluster(config: &SiteConfiguration, start: &[usize]) -> Vec<usize> {
    let lin = config.linear(start);
    if config.omega[lin] {
        return Vec::new();
    }
    let mut seen = vec![false; config.num_sites()];
    let mut queue = VecDeque::new();
    let mut cluster = Vec::new();
    seen[lin] = true;
    queue.push_back(lin);
    let mut nbs = Vec::new();
    while let Some(cur) = queue.pop_front() {
        cluster.push(cur);
        let idx = config.multi(cur);
        neighbor_sites(&config.extent, &idx, Adjacency::Star, &mut nbs);
        for nb in &nbs {
            let nlin = config.linear(nb);
            if !seen[nlin] && !config.omega[nlin] {
                seen[nlin] = true;
                queue.push_back(nlin);
            }
        }
    }
    cluster
}

/// Empirical tail frequencies P(|C_0| > n) of the star-connected closed
/// cluster at the window center under Bernoulli(p) sites.
pub fn closed_cluster_tail(
    p: f64,
    extent: &[usize],
    ns: &[i64],
    trials: usize,
    state: &RngState,
) -> Result<Vec<(i64, f64)>, CoreError> {
    let d = extent.len();
    let peierls = 1.0 - 3.0f64.powi(-(d as i32));
    if p <= peierls {
        return Err(CoreError::invalid(
            "p",
            &format!("Peierls regime requires p > 1 - 3^-d = {peierls}"),
        ));
    }
    let center: Vec<usize> = extent.iter().map(|&e| e / 2).collect();
    let mut rng = state.rng();
    let mut sizes = Vec::with_capacity(trials);
    for _ in 0..trials {
        let cfg = bernoulli_config(extent, p, 1.0, &mut rng);
        sizes.push(closed_star_cluster(&cfg, &center).len() as i64);
    }
    Ok(ns
        .iter()
        .map(|&n| {
            let hits = sizes.iter().filter(|&&s| s > n).count();
            (n, hits as f64 / trials as f64)
        })
        .collect())
}

/// A validated global structure between two sites.
#[derive(Debug, Clone)]
pub struct GlobalStructure {
    /// Linear site indices of G.
    pub sites: Vec<usize>,
    pub size: usize,
    /// L1 lattice distance from the origin site to G.
    pub dist0: usize,
    /// L1 lattice distance from x to G.
    pub distx: usize,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureOutcome {
    Built(GlobalStructureSummary),
    /// Name of the first violated condition.
    Absent(&'static str),
}

/// Summary carried by `StructureOutcome` (avoids cloning the site list in
/// scans; the full `GlobalStructure` is returned alongside by the builder).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalStructureSummary {
    pub size: usize,
    pub dist0: usize,
    pub distx: usize,
}

fn l1(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum()
}

/// Monotone staircase lattice path between two sites (axis by axis).
pub fn straight_path(from: &[usize], to: &[usize]) -> Vec<Vec<usize>> {
    let mut path = vec![from.to_vec()];
    let mut cur = from.to_vec();
    for k in 0..from.len() {
        while cur[k] != to[k] {
            if cur[k] < to[k] {
                cur[k] += 1;
            } else {
                cur[k] -= 1;
            }
            path.push(cur.clone());
        }
    }
    path
}

/// Constructive global-structure search between `origin` and `x` in the
/// configuration window. Builds A as the union of closures of the closed
/// star-clusters touching the straight path (an open path site contributes
/// itself), takes G as the face-connected component of the open sites of A
/// nearest the origin, and re-checks the five validity conditions
/// independently of the construction.
pub fn global_structure(
    config: &SiteConfiguration,
    origin: &[usize],
    x: &[usize],
    c0: f64,
    delta: f64,
) -> (StructureOutcome, Option<GlobalStructure>) {
    let n1 = l1(origin, x);
    assert!(n1 > 0, "origin and x must differ");
    let nsites = config.num_sites();
    let mut in_a = vec![false; nsites];
    let mut open_a = vec![false; nsites];
    let mut nbs = Vec::new();
    for site in straight_path(origin, x) {
        let lin = config.linear(&site);
        if config.omega[lin] {
            in_a[lin] = true;
            open_a[lin] = true;
            continue;
        }
        // closure of the closed star cluster: the cluster plus its star
        // boundary (which is open by maximality)
        for cl in closed_star_cluster(config, &site) {
            in_a[cl] = true;
            let idx = config.multi(cl);
            neighbor_sites(&config.extent, &idx, Adjacency::Star, &mut nbs);
            for nb in &nbs {
                let nlin = config.linear(nb);
                if config.omega[nlin] {
                    in_a[nlin] = true;
                    open_a[nlin] = true;
                }
            }
        }
    }
    // face-connected component of the open part of A nearest the origin
    // (smallest lexicographic = smallest linear index among nearest sites)
    let candidates: Vec<usize> = (0..nsites).filter(|&i| open_a[i]).collect();
    if candidates.is_empty() {
        return (StructureOutcome::Absent("openness"), None);
    }
    let seed_site = *candidates
        .iter()
        .min_by_key(|&&i| (l1(&config.multi(i), origin), i))
        .unwrap();
    let mut g = vec![false; nsites];
    let mut queue = VecDeque::new();
    g[seed_site] = true;
    queue.push_back(seed_site);
    while let Some(cur) = queue.pop_front() {
        let idx = config.multi(cur);
        neighbor_sites(&config.extent, &idx, Adjacency::Face, &mut nbs);
        for nb in &nbs {
            let nlin = config.linear(nb);
            if open_a[nlin] && !g[nlin] {
                g[nlin] = true;
                queue.push_back(nlin);
            }
        }
    }
    let sites: Vec<usize> = (0..nsites).filter(|&i| g[i]).collect();
    let structure = GlobalStructure {
        size: sites.len(),
        dist0: sites.iter().map(|&i| l1(&config.multi(i), origin)).min().unwrap(),
        distx: sites.iter().map(|&i| l1(&config.multi(i), x)).min().unwrap(),
        connected: true,
        sites,
    };
    match validate_structure(config, &structure, origin, x, c0, delta) {
        Ok(()) => (
            StructureOutcome::Built(GlobalStructureSummary {
                size: structure.size,
                dist0: structure.dist0,
                distx: structure.distx,
            }),
            Some(structure),
        ),
        Err(cond) => (StructureOutcome::Absent(cond), None),
    }
}

/// Independent re-check of the five validity conditions: openness, size
/// bound, face-connectivity, and both log^{1+delta} distance bounds.
pub fn validate_structure(
    config: &SiteConfiguration,
    structure: &GlobalStructure,
    origin: &[usize],
    x: &[usize],
    c0: f64,
    delta: f64,
) -> Result<(), &'static str> {
    if structure.sites.is_empty() {
        return Err("openness");
    }
    if !structure.sites.iter().all(|&i| config.omega[i]) {
        return Err("openness");
    }
    let n1 = l1(origin, x) as f64;
    if (structure.sites.len() as f64) > c0 * n1 {
        return Err("size");
    }
    // connectivity by flood fill from the first site, restricted to G
    let mut member = vec![false; config.num_sites()];
    for &i in &structure.sites {
        member[i] = true;
    }
    let mut seen = vec![false; config.num_sites()];
    let mut queue = VecDeque::new();
    seen[structure.sites[0]] = true;
    queue.push_back(structure.sites[0]);
    let mut count = 1usize;
    let mut nbs = Vec::new();
    while let Some(cur) = queue.pop_front() {
        let idx = config.multi(cur);
        neighbor_sites(&config.extent, &idx, Adjacency::Face, &mut nbs);
        for nb in &nbs {
            let nlin = config.linear(nb);
            if member[nlin] && !seen[nlin] {
                seen[nlin] = true;
                count += 1;
                queue.push_back(nlin);
            }
        }
    }
    if count != structure.sites.len() {
        return Err("connectivity");
    }
    let bound = n1.ln().powf(1.0 + delta);
    let dist0 = structure.sites.iter().map(|&i| l1(&config.multi(i), origin)).min().unwrap();
    if dist0 as f64 > bound {
        return Err("dist0");
    }
    let distx = structure.sites.iter().map(|&i| l1(&config.multi(i), x)).min().unwrap();
    if distx as f64 > bound {
        return Err("distx");
    }
    if dist0 != structure.dist0 || distx != structure.distx || structure.size != structure.sites.len() {
        return Err("consistency");
    }
    Ok(())
}

/// One row of the structure-probability scan.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub p: f64,
    pub x_norm: usize,
    pub trials: usize,
    pub successes: usize,
}

/// Success frequency of the global-structure construction under
/// Bernoulli(p) sites, coupled across p values (shared uniforms per trial)
/// so the frequency is monotone in p per trial.
pub fn structure_probability_scan(
    ps: &[f64],
    x_norms: &[usize],
    c0: f64,
    delta: f64,
    trials: usize,
    state: &RngState,
) -> Result<Vec<ScanRow>, CoreError> {
    for &p in ps {
        if !(0.0 < p && p <= 1.0) {
            return Err(CoreError::invalid("p", "must lie in (0, 1]"));
        }
    }
    let mut rows = Vec::new();
    for (xi, &n1) in x_norms.iter().enumerate() {
        if n1 == 0 {
            return Err(CoreError::invalid("x_norms", "distances must be positive"));
        }
        let margin = ((n1 as f64).ln().powf(1.0 + delta)).ceil() as usize + 2;
        let extent = vec![n1 + 2 * margin + 1, 2 * margin + 1];
        let origin = vec![margin, margin];
        let x = vec![margin + n1, margin];
        let nsites: usize = extent.iter().product();
        let mut successes = vec![0usize; ps.len()];
        for trial in 0..trials {
            let rng_state = RngState::trial(state.seed, state.stream.wrapping_add((xi as u64) << 32), trial as u64);
            let mut rng = rng_state.rng();
            let uniforms: Vec<f64> = (0..nsites).map(|_| rng.random::<f64>()).collect();
            for (pi, &p) in ps.iter().enumerate() {
                let cfg = SiteConfiguration {
                    dim: 2,
                    extent: extent.clone(),
                    omega: uniforms.iter().map(|&u| u < p).collect(),
                    r_box: 10.0,
                    site_spacing: 1.0,
                    provenance: Provenance::Bernoulli { p },
                };
                let (outcome, _) = global_structure(&cfg, &origin, &x, c0, delta);
                if matches!(outcome, StructureOutcome::Built(_)) {
                    successes[pi] += 1;
                }
            }
        }
        for (pi, &p) in ps.iter().enumerate() {
            rows.push(ScanRow {
                p,
                x_norm: n1,
                trials,
                successes: successes[pi],
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::linear_fit;
    use approx::assert_relative_eq;

    fn all_open(extent: &[usize]) -> SiteConfiguration {
        let n: usize = extent.iter().product();
        SiteConfiguration {
            dim: extent.len(),
            extent: extent.to_vec(),
            omega: vec![true; n],
            r_box: 10.0,
            site_spacing: 1.0,
            provenance: Provenance::Bernoulli { p: 1.0 },
        }
    }

    #[test]
    fn json_roundtrip() {
        let mut cfg = all_open(&[3, 5]);
        cfg.omega[4] = false;
        cfg.omega[11] = false;
        cfg.provenance = Provenance::FieldDerived {
            level: 0.5,
            kappa: 0.25,
            trunc_r: 4.0,
            eps: 0.5,
        };
        let text = cfg.to_json();
        let back = SiteConfiguration::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn dependence_range_examples() {
        // r = R, kappa = 0.25: (2.5R + R)/(R/10) = 35
        assert_eq!(dependence_range_sites(8.0, 8.0, 0.25), 35);
        // r -> 0, kappa = 0: 2R/(R/10) = 20
        assert_eq!(dependence_range_sites(0.0, 8.0, 0.0), 20);
        // monotone in r
        assert!(dependence_range_sites(16.0, 8.0, 0.25) > dependence_range_sites(8.0, 8.0, 0.25));
    }

    #[test]
    fn lss_alpha_examples() {
        assert_eq!(lss_alpha(1.0, 5, 2), 0.0);
        // p = 1 - 1e-18 via the gap form (the gap is below f64 resolution
        // next to 1.0): (1e-18)^{1/9} = 1e-2, so alpha = 0.04
        assert_relative_eq!(lss_alpha_from_gap(1e-18, 1, 2), 0.04, max_relative = 1e-9);
        assert_eq!(lss_alpha(0.0, 5, 2), 1.0);
        // decreasing in p (increasing in the gap), increasing in M and d,
        // using gaps small enough to stay below the cap
        assert!(lss_alpha_from_gap(1e-60, 2, 2) > lss_alpha_from_gap(1e-80, 2, 2));
        assert!(lss_alpha_from_gap(1e-80, 3, 2) > lss_alpha_from_gap(1e-80, 2, 2));
        assert!(lss_alpha_from_gap(1e-80, 2, 3) > lss_alpha_from_gap(1e-80, 2, 2));
    }

    #[test]
    fn closed_cluster_shapes() {
        let mut cfg = all_open(&[5, 5]);
        assert!(closed_star_cluster(&cfg, &[2, 2]).is_empty());
        // diagonal pair of closed sites is one star cluster
        let a = cfg.linear(&[2, 2]);
        let b = cfg.linear(&[3, 3]);
        cfg.omega[a] = false;
        cfg.omega[b] = false;
        let cl = closed_star_cluster(&cfg, &[2, 2]);
        assert_eq!(cl.len(), 2);
        assert!(cl.contains(&a) && cl.contains(&b));
    }

    #[test]
    fn peierls_tail_trivial_cases() {
        let state = RngState::new(5, 0);
        // p = 1: tail identically zero
        let rows = closed_cluster_tail(1.0, &[9, 9], &[0, 1, 2], 50, &state).unwrap();
        assert!(rows.iter().all(|&(_, f)| f == 0.0));
        // n = -1: |C_0| >= 0 always
        let rows = closed_cluster_tail(0.95, &[9, 9], &[-1], 50, &state).unwrap();
        assert_eq!(rows[0].1, 1.0);
        // Peierls regime enforced
        assert!(closed_cluster_tail(0.5, &[9, 9], &[1], 10, &state).is_err());
    }

    #[test]
    fn peierls_tail_decays() {
        let state = RngState::new(17, 0);
        let ns: Vec<i64> = (1..=8).collect();
        let rows = closed_cluster_tail(0.9, &[15, 15], &ns, 4000, &state).unwrap();
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|&&(_, f)| f > 0.0)
            .map(|&(n, f)| (n as f64, f.ln()))
            .collect();
        assert!(pts.len() >= 4);
        let (slope, _, r2) = linear_fit(
            &pts.iter().map(|p| p.0).collect::<Vec<_>>(),
            &pts.iter().map(|p| p.1).collect::<Vec<_>>(),
        );
        assert!(slope < 0.0, "slope = {slope}");
        assert!(r2 > 0.8, "r2 = {r2}");
    }

    #[test]
    fn global_structure_all_open() {
        let cfg = all_open(&[21, 9]);
        let (outcome, full) = global_structure(&cfg, &[2, 4], &[18, 4], 9.0, 0.5);
        let summary = match outcome {
            StructureOutcome::Built(s) => s,
            StructureOutcome::Absent(c) => panic!("absent: {c}"),
        };
        assert_eq!(summary.dist0, 0);
        assert_eq!(summary.distx, 0);
        assert_eq!(summary.size, 17); // exactly the straight path
        let full = full.unwrap();
        assert!(validate_structure(&cfg, &full, &[2, 4], &[18, 4], 9.0, 0.5).is_ok());
    }

    #[test]
    fn global_structure_routes_around_defect() {
        let mut cfg = all_open(&[21, 9]);
        let mid = cfg.linear(&[10, 4]);
        cfg.omega[mid] = false;
        let (outcome, full) = global_structure(&cfg, &[2, 4], &[18, 4], 9.0, 0.5);
        let summary = match outcome {
            StructureOutcome::Built(s) => s,
            StructureOutcome::Absent(c) => panic!("absent: {c}"),
        };
        assert_eq!(summary.dist0, 0);
        assert_eq!(summary.distx, 0);
        assert!(summary.size <= 9 * 16);
        let full = full.unwrap();
        assert!(!full.sites.contains(&mid));
        // the ring around the defect joins the path remnants
        assert!(full.sites.len() > 16);
    }

    #[test]
    fn global_structure_all_closed_absent() {
        let mut cfg = all_open(&[9, 9]);
        for v in cfg.omega.iter_mut() {
            *v = false;
        }
        let (outcome, full) = global_structure(&cfg, &[1, 4], &[7, 4], 9.0, 0.5);
        assert_eq!(outcome, StructureOutcome::Absent("openness"));
        assert!(full.is_none());
    }

    #[test]
    fn structure_scan_p_one() {
        let state = RngState::new(3, 0);
        let rows = structure_probability_scan(&[1.0], &[8], 9.0, 0.5, 20, &state).unwrap();
        assert_eq!(rows[0].successes, 20);
    }

    #[test]
    fn structure_scan_monotone_in_p() {
        let state = RngState::new(23, 0);
        let ps = [0.85, 0.95, 0.995];
        let rows = structure_probability_scan(&ps, &[12], 9.0, 0.5, 60, &state).unwrap();
        assert!(rows[0].successes <= rows[1].successes);
        assert!(rows[1].successes <= rows[2].successes);
    }

    #[test]
    fn bernoulli_config_frequency() {
        let state = RngState::new(9, 0);
        let mut rng = state.rng();
        let cfg = bernoulli_config(&[50, 50], 0.8, 1.0, &mut rng);
        let open = cfg.omega.iter().filter(|&&b| b).count() as f64 / 2500.0;
        assert!((open - 0.8).abs() < 0.04, "open fraction {open}");
    }

    #[test]
    fn domination_probe_rejects_decreasing_event() {
        let state = RngState::new(4, 0);
        let mu = vec![all_open(&[4, 4])];
        let res = domination_probe(&mu, |c| !c.omega[0], 0.99, 3, 10, &state);
        assert!(matches!(res, Err(CoreError::Invalid { .. })));
    }

    #[test]
    fn domination_probe_constant_true() {
        let state = RngState::new(4, 0);
        let mu = vec![all_open(&[4, 4]); 10];
        let rep = domination_probe(&mu, |_| true, 0.99, 3, 50, &state).unwrap();
        assert_eq!(rep.p_mu, 1.0);
        assert_eq!(rep.p_pi, 1.0);
        assert!(rep.satisfied);
    }

    #[test]
    fn coarse_grain_extreme_levels() {
        let kernel = crate::kernel::make_kernel(crate::kernel::KernelKind::BargmannFock, 2, None, None).unwrap();
        let state = RngState::new(101, 0);
        let mut geom = CoarseGeometry {
            r_box: 3.0,
            level: 10.0,
            kappa: 0.25,
            eps: 0.0,
            spacing: 0.5,
            extent: vec![3, 3],
        };
        let cfg = coarse_grain(&kernel, &geom, &state).unwrap();
        assert!(cfg.omega.iter().all(|&b| b), "deep supercritical should be all-open");
        geom.level = -10.0;
        let cfg = coarse_grain(&kernel, &geom, &state).unwrap();
        assert!(cfg.omega.iter().all(|&b| !b));
        // determinism
        geom.level = 0.3;
        let a = coarse_grain(&kernel, &geom, &state).unwrap();
        let b = coarse_grain(&kernel, &geom, &state).unwrap();
        assert_eq!(a, b);
    }
}
