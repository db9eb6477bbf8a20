//! Randomized invariant suites. Each suite runs at least 1000 cases.

use std::collections::VecDeque;

use proptest::prelude::*;

use gaussperc_core::chem::{chemical_distance, chemical_s, PathStatus};
use gaussperc_core::excursion::{excursion_set, exist_event, from_occupancy, Adjacency, BoxSpec};
use gaussperc_core::grid::{FieldKind, Grid, GridField};
use gaussperc_core::renorm::{
    bernoulli_config, closed_star_cluster, global_structure, lss_alpha_from_gap, straight_path,
    validate_structure, SiteConfiguration, StructureOutcome,
};
use gaussperc_core::stats::{quantile, wilson_interval};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

/// Independent component oracle: plain recursive flood fill.
fn flood_components(extent: (usize, usize), occ: &[bool], star: bool) -> Vec<i32> {
    let (nx, ny) = extent;
    let mut labels = vec![-1i32; nx * ny];
    let mut next = 0i32;
    for start in 0..nx * ny {
        if !occ[start] || labels[start] >= 0 {
            continue;
        }
        let mut queue = VecDeque::new();
        labels[start] = next;
        queue.push_back(start);
        while let Some(cur) = queue.pop_front() {
            let (x, y) = (cur / ny, cur % ny);
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    if !star && dx != 0 && dy != 0 {
                        continue;
                    }
                    let (vx, vy) = (x as i64 + dx, y as i64 + dy);
                    if vx < 0 || vy < 0 || vx >= nx as i64 || vy >= ny as i64 {
                        continue;
                    }
                    let nb = vx as usize * ny + vy as usize;
                    if occ[nb] && labels[nb] < 0 {
                        labels[nb] = next;
                        queue.push_back(nb);
                    }
                }
            }
        }
        next += 1;
    }
    labels
}

fn grid_2d(nx: usize, ny: usize) -> Grid {
    Grid::new(vec![nx, ny], 1.0, vec![0.0, 0.0]).unwrap()
}

proptest! {
    #![proptest_config(cases(1000))]

    // union-find component labels match exhaustive flood fill, both adjacencies
    #[test]
    fn labels_match_flood_fill(occ in proptest::collection::vec(any::<bool>(), 36), star in any::<bool>()) {
        let grid = grid_2d(6, 6);
        let adj = if star { Adjacency::Star } else { Adjacency::Face };
        let set = from_occupancy(grid, occ.clone(), 0.0, adj);
        let oracle = flood_components((6, 6), &occ, star);
        let ncomp = oracle.iter().copied().max().unwrap_or(-1) + 1;
        prop_assert_eq!(set.components.len() as i32, ncomp);
        for i in 0..36 {
            for j in 0..36 {
                if occ[i] && occ[j] {
                    prop_assert_eq!(set.labels[i] == set.labels[j], oracle[i] == oracle[j]);
                }
            }
        }
    }

    // occupancy and the Exist event are monotone in the level
    #[test]
    fn exist_monotone_in_level(
        vals in proptest::collection::vec(-2.0f64..2.0, 81),
        l1 in -1.0f64..1.0,
        gap in 0.0f64..1.0,
    ) {
        let grid = Grid::centered(vec![9, 9], 1.0, &[0.0, 0.0]).unwrap();
        let field = GridField::new(grid, vals, FieldKind::Smooth).unwrap();
        let l2 = l1 + gap;
        let s1 = excursion_set(&field, l1, Adjacency::Face);
        let s2 = excursion_set(&field, l2, Adjacency::Face);
        for i in 0..81 {
            prop_assert!(!s1.occupied[i] || s2.occupied[i]);
        }
        let spec = BoxSpec::new(vec![0.0, 0.0], 3.0, 0.25).unwrap();
        prop_assert!(!exist_event(&s1, &spec) || exist_event(&s2, &spec));
    }
}

proptest! {
    #![proptest_config(cases(1000))]

    // chemical distance: symmetry, triangle inequality, Euclidean lower
    // bound, monotone under adding occupied cells
    #[test]
    fn chem_distance_metric_properties(
        occ in proptest::collection::vec(any::<bool>(), 36),
        ai in 0usize..36, bi in 0usize..36, ci in 0usize..36,
        extra in 0usize..36,
    ) {
        let grid = grid_2d(6, 6);
        let set = from_occupancy(grid.clone(), occ.clone(), 0.0, Adjacency::Face);
        let cell = |lin: usize| set.grid.multi(lin);
        let (a, b, c) = (cell(ai), cell(bi), cell(ci));
        let dab = chemical_distance(&set, &a, &b);
        let dba = chemical_distance(&set, &b, &a);
        prop_assert_eq!(dab.status, dba.status);
        prop_assert_eq!(dab.length, dba.length);
        if occ[ai] && occ[bi] && occ[ci] {
            let dac = chemical_distance(&set, &a, &c).length;
            let dbc = chemical_distance(&set, &b, &c).length;
            // triangle inequality (inf + inf = inf handles disconnection)
            prop_assert!(dac <= dab.length + dbc + 1e-9);
        }
        if dab.status == PathStatus::Connected {
            let pa = set.grid.point(&a);
            let pb = set.grid.point(&b);
            let euclid: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            prop_assert!(dab.length >= euclid - 1e-9);
            // adding a cell never increases the distance
            let mut bigger = occ.clone();
            bigger[extra] = true;
            let set2 = from_occupancy(grid, bigger, 0.0, Adjacency::Face);
            let d2 = chemical_distance(&set2, &a, &b);
            prop_assert_eq!(d2.status, PathStatus::Connected);
            prop_assert!(d2.length <= dab.length + 1e-9);
        }
    }

    // S statistic is monotone in the box size
    #[test]
    fn chemical_s_monotone(occ in proptest::collection::vec(any::<bool>(), 49), s1 in 0.5f64..3.0, ds in 0.0f64..3.0) {
        let grid = Grid::centered(vec![7, 7], 1.0, &[0.0, 0.0]).unwrap();
        let set = from_occupancy(grid, occ, 0.0, Adjacency::Face);
        let v1 = chemical_s(&set, s1, &[0.0, 0.0]).length;
        let v2 = chemical_s(&set, s1 + ds, &[0.0, 0.0]).length;
        prop_assert!(v2 >= v1 - 1e-12);
    }
}

/// Bellman-Ford style relaxation oracle, independent of the Dijkstra path.
fn relaxation_distance(occ: &[bool; 16], a: usize, b: usize) -> f64 {
    if !occ[a] || !occ[b] {
        return f64::INFINITY;
    }
    let mut dist = [f64::INFINITY; 16];
    dist[a] = 0.0;
    for _ in 0..16 {
        for i in 0..16 {
            if !occ[i] || dist[i].is_infinite() {
                continue;
            }
            let (x, y) = (i / 4, i % 4);
            let mut nbs = Vec::new();
            if x > 0 { nbs.push(i - 4); }
            if x < 3 { nbs.push(i + 4); }
            if y > 0 { nbs.push(i - 1); }
            if y < 3 { nbs.push(i + 1); }
            for nb in nbs {
                if occ[nb] && dist[i] + 1.0 < dist[nb] {
                    dist[nb] = dist[i] + 1.0;
                }
            }
        }
    }
    dist[b]
}

proptest! {
    #![proptest_config(cases(1000))]

    #[test]
    fn dijkstra_matches_relaxation_oracle(pattern in any::<u16>(), a in 0usize..16, b in 0usize..16) {
        let mut occ = [false; 16];
        for (i, o) in occ.iter_mut().enumerate() {
            *o = pattern & (1 << i) != 0;
        }
        let grid = grid_2d(4, 4);
        let set = from_occupancy(grid, occ.to_vec(), 0.0, Adjacency::Face);
        let res = chemical_distance(&set, &set.grid.multi(a), &set.grid.multi(b));
        let oracle = relaxation_distance(&occ, a, b);
        prop_assert_eq!(res.length, oracle);
    }
}

proptest! {
    #![proptest_config(cases(1000))]

    // alpha bound stays in [0,1] and is monotone in the gap, M, and d
    #[test]
    fn lss_alpha_bounds_and_monotonicity(gap in 0.0f64..1.0, dg in 0.0f64..0.5, m in 0usize..6, d in 2usize..4) {
        let a = lss_alpha_from_gap(gap, m, d);
        prop_assert!((0.0..=1.0).contains(&a));
        let a2 = lss_alpha_from_gap((gap + dg).min(1.0), m, d);
        prop_assert!(a2 >= a);
        prop_assert!(lss_alpha_from_gap(gap, m + 1, d) >= a);
        prop_assert!(lss_alpha_from_gap(gap, m, d + 1) >= a);
    }

    // straight lattice path: length, endpoints, unit steps
    #[test]
    fn straight_path_shape(x0 in 0usize..9, y0 in 0usize..9, x1 in 0usize..9, y1 in 0usize..9) {
        let from = vec![x0, y0];
        let to = vec![x1, y1];
        let n1 = x0.abs_diff(x1) + y0.abs_diff(y1);
        let path = straight_path(&from, &to);
        prop_assert_eq!(path.len(), n1 + 1);
        prop_assert_eq!(&path[0], &from);
        prop_assert_eq!(path.last().unwrap(), &to);
        for w in path.windows(2) {
            let step: usize = w[0].iter().zip(&w[1]).map(|(a, b)| a.abs_diff(*b)).sum();
            prop_assert_eq!(step, 1);
        }
    }

    // star clusters match an independent flood fill on the closed sites
    #[test]
    fn star_cluster_matches_oracle(bits in any::<u16>()) {
        let extent = [4usize, 4];
        let omega: Vec<bool> = (0..16).map(|i| bits & (1 << i) != 0).collect();
        let closed: Vec<bool> = omega.iter().map(|&b| !b).collect();
        let cfg = SiteConfiguration {
            dim: 2,
            extent: extent.to_vec(),
            omega,
            r_box: 10.0,
            site_spacing: 1.0,
            provenance: gaussperc_core::renorm::Provenance::Bernoulli { p: 0.5 },
        };
        let oracle = flood_components((4, 4), &closed, true);
        for start in 0..16 {
            let idx = cfg.multi(start);
            let cluster = closed_star_cluster(&cfg, &idx);
            if cfg.omega[start] {
                prop_assert!(cluster.is_empty());
            } else {
                let expected: Vec<usize> = (0..16).filter(|&i| oracle[i] >= 0 && oracle[i] == oracle[start]).collect();
                let mut got = cluster.clone();
                got.sort_unstable();
                prop_assert_eq!(got, expected);
            }
        }
    }
}

proptest! {
    #![proptest_config(cases(1000))]

    #[test]
    fn structure_survives_single_upflip(bits in proptest::collection::vec(any::<bool>(), 13 * 9), flip in 0usize..(13 * 9)) {
        let extent = vec![13usize, 9];
        let mut cfg = SiteConfiguration {
            dim: 2,
            extent,
            omega: bits,
            r_box: 10.0,
            site_spacing: 1.0,
            provenance: gaussperc_core::renorm::Provenance::Bernoulli { p: 0.5 },
        };
        let origin = vec![2usize, 4];
        let x = vec![10usize, 4];
        let (outcome, built) = global_structure(&cfg, &origin, &x, 9.0, 0.5);
        if let (StructureOutcome::Built(_), Some(structure)) = (outcome, built) {
            cfg.omega[flip] = true;
            prop_assert!(validate_structure(&cfg, &structure, &origin, &x, 9.0, 0.5).is_ok());
        }
    }

    // statistics helpers
    #[test]
    fn wilson_contains_point_estimate(succ in 0usize..=100, extra in 0usize..400) {
        let trials = 100 + extra;
        let s = succ.min(trials);
        let (lo, hi) = wilson_interval(s, trials, 1.96);
        let p_hat = s as f64 / trials as f64;
        prop_assert!(lo <= p_hat + 1e-12 && p_hat <= hi + 1e-12);
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
    }

    #[test]
    fn quantile_within_range(mut vals in proptest::collection::vec(-1e6f64..1e6, 1..200), q in 0.0f64..1.0) {
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let v = quantile(&vals, q);
        prop_assert!(v >= vals[0] && v <= vals[vals.len() - 1]);
    }
}

proptest! {
    #![proptest_config(cases(1000))]

    // grid indexing round trip
    #[test]
    fn grid_linear_multi_roundtrip(nx in 2usize..10, ny in 2usize..10, pick in any::<u64>()) {
        let grid = grid_2d(nx, ny);
        let lin = (pick as usize) % (nx * ny);
        prop_assert_eq!(grid.linear(&grid.multi(lin)), lin);
    }

    // Bernoulli configs respect provenance and count
    #[test]
    fn bernoulli_config_basics(seed in any::<u64>(), p in 0.0f64..1.0) {
        use gaussperc_core::rng::RngState;
        let mut rng = RngState::new(seed, 0).rng();
        let cfg = bernoulli_config(&[5, 5], p, 1.0, &mut rng);
        prop_assert_eq!(cfg.num_sites(), 25);
        prop_assert_eq!(cfg.omega.len(), 25);
        prop_assert_eq!(cfg.provenance, gaussperc_core::renorm::Provenance::Bernoulli { p });
    }
}
