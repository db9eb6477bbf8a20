//! Experiment orchestration: dispatches a validated config to the matching
//! driver, streams rows into the result store, and writes the summary and
//! manifest last.

use std::path::PathBuf;

use rand_distr::{Binomial, Distribution};
use serde_json::json;

use gaussperc_core::chem::{
    chemical_distance, chemical_s, kappa_exponent, stretch_experiment, stretch_frequencies,
    tail_frequencies, PathStatus, StretchParams,
};
use gaussperc_core::excursion::{
    axis_crossing_event, duality_check, excursion_set, exist_event, unique_event, Adjacency,
    BoxSpec,
};
use gaussperc_core::field::{discretize, sample_smooth_field};
use gaussperc_core::grid::{Grid, GridField};
use gaussperc_core::kernel::{make_kernel, Kernel};
use gaussperc_core::renorm::{
    coarse_grain, dependence_range_sites, domination_probe, structure_probability_scan,
    CoarseGeometry, SiteConfiguration,
};
use gaussperc_core::rng::RngState;
use gaussperc_core::stats::{linear_fit, logistic_midpoint, quantile, wilson_interval};

use crate::config::{EventSpec, ExperimentConfig, ExperimentKind, FieldSpec};
use crate::error::HarnessError;
use crate::store::{fmt_f64, ResultStore};

#[derive(Debug, Default, Clone)]
pub struct RunOverrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

fn build_kernel(f: &FieldSpec) -> Result<Kernel, HarnessError> {
    Ok(make_kernel(f.kernel, f.dim, f.beta, f.trunc_r)?)
}

fn sample_field(grid: &Grid, kernel: &Kernel, eps: Option<f64>, state: &RngState) -> Result<GridField, HarnessError> {
    let field = sample_smooth_field(grid, kernel, state)?;
    Ok(match eps {
        Some(e) => discretize(&field, e)?,
        None => field,
    })
}

fn domain_grid(f: &FieldSpec, half: f64) -> Result<Grid, HarnessError> {
    Ok(Grid::covering(&vec![0.0; f.dim], half, f.h)?)
}

fn require_level(ev: &EventSpec) -> Result<f64, HarnessError> {
    ev.level
        .ok_or_else(|| HarnessError::validation("events.level", "required for this experiment"))
}

fn bool_cell(b: bool) -> String {
    if b { "1".to_string() } else { "0".to_string() }
}

/// Execute the experiment named in the config; returns the manifest path.
pub fn run(mut config: ExperimentConfig, overrides: &RunOverrides) -> Result<PathBuf, HarnessError> {
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(n) = overrides.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    config.validate()?;
    let out_root = overrides
        .out
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    std::fs::create_dir_all(&out_root)?;
    let mut store = ResultStore::open(&out_root, &config.to_json())?;
    match config.experiment {
        ExperimentKind::Sample => run_sample(&config, &mut store)?,
        ExperimentKind::Events => run_events(&config, &mut store)?,
        ExperimentKind::CrossingScan => run_crossing_scan(&config, &mut store)?,
        ExperimentKind::LevelScan => run_level_scan(&config, &mut store)?,
        ExperimentKind::Chemdist => run_chemdist(&config, &mut store)?,
        ExperimentKind::STail => run_s_tail(&config, &mut store)?,
        ExperimentKind::RenormScan => run_renorm_scan(&config, &mut store)?,
        ExperimentKind::Domination => run_domination(&config, &mut store)?,
        ExperimentKind::Stretch => run_stretch(&config, &mut store)?,
    }
    store.finish()
}

fn run_sample(config: &ExperimentConfig, store: &mut ResultStore) -> Result<(), HarnessError> {
    let kernel = build_kernel(&config.field)?;
    let grid = domain_grid(&config.field, config.field.domain)?;
    let state = RngState::new(config.seed, 0);
    let field = sample_field(&grid, &kernel, config.field.eps, &state)?;
    let path = store.dir.join("field.gpf");
    field.write_gpf(&path)?;
    store.register_file("field.gpf")?;
    store.register_file("field.gpf.json")?;
    Ok(())
}

fn run_events(config: &ExperimentConfig, store: &mut ResultStore) -> Result<(), HarnessError> {
    let ev = config.events.as_ref().unwrap();
    let level = require_level(ev)?;
    let kernel = build_kernel(&config.field)?;
    let half = ev.r_box * (1.0 + ev.kappa) + config.field.h;
    if half > config.field.domain {
        return Err(HarnessError::validation(
            "field.domain",
            "must cover the enlarged event box R(1+kappa)",
        ));
    }
    let grid = domain_grid(&config.field, config.field.domain)?;
    let spec = BoxSpec::new(vec![0.0; config.field.dim], ev.r_box, ev.kappa)?;
    let mut rows = Vec::with_capacity(config.trials as usize);
    let mut counts = [0usize; 4]; // exist, unique, local, violated
    for trial in 0..config.trials {
        let state = RngState::trial(config.seed, 0, trial);
        let field = sample_field(&grid, &kernel, config.field.eps, &state)?;
        let set = excursion_set(&field, level, Adjacency::Face);
        let exist = exist_event(&set, &spec);
        let unique = unique_event(&set, &spec);
        let rep = duality_check(&field, &spec, level);
        counts[0] += exist as usize;
        counts[1] += unique as usize;
        counts[2] += (exist && unique) as usize;
        counts[3] += rep.violated as usize;
        rows.push(vec![
            trial.to_string(),
            bool_cell(exist),
            bool_cell(unique),
            bool_cell(exist && unique),
            bool_cell(rep.antecedent),
            bool_cell(rep.consequent),
            bool_cell(rep.violated),
        ]);
    }
    store.write_csv(
        "events.csv",
        &["trial", "exist", "unique", "local_uniqueness", "dual_antecedent", "dual_consequent", "dual_violated"],
        &rows,
    )?;
    let n = config.trials as f64;
    store.write_json(
        "summary.json",
        &json!({
            "level": level,
            "r_box": ev.r_box,
            "kappa": ev.kappa,
            "trials": config.trials,
            "exist_freq": counts[0] as f64 / n,
            "unique_freq": counts[1] as f64 / n,
            "local_uniqueness_freq": counts[2] as f64 / n,
            "duality_violations": counts[3],
        }),
    )?;
    Ok(())
}

fn run_crossing_scan(config: &ExperimentConfig, store: &mut ResultStore) -> Result<(), HarnessError> {
    let ev = config.events.as_ref().unwrap();
    let level = require_level(ev)?;
    let kernel = build_kernel(&config.field)?;
    let sizes = config.sizes.as_ref().unwrap();
    let mut rows = Vec::new();
    let mut freq_rows = Vec::new();
    let mut lnfreq_pts: Vec<(f64, f64)> = Vec::new();
    for (ri, &r) in sizes.iter().enumerate() {
        if !(r > 1.0) {
            return Err(HarnessError::validation("sizes", "box half-sides must exceed 1"));
        }
        let grid = domain_grid(&config.field, r + config.field.h)?;
        let spec = BoxSpec::new(vec![0.0; config.field.dim], r, ev.kappa)?;
        let mut hits = 0usize;
        for trial in 0..config.trials {
            let state = RngState::trial(config.seed, (ri as u64) << 32, trial);
            let field = sample_field(&grid, &kernel, config.field.eps, &state)?;
            let set = excursion_set(&field, level, Adjacency::Face);
            let exist = exist_event(&set, &spec);
            hits += exist as usize;
            rows.push(vec![fmt_f64(r), trial.to_string(), bool_cell(exist)]);
        }
        let freq = hits as f64 / config.trials as f64;
        freq_rows.push(vec![fmt_f64(r), config.trials.to_string(), hits.to_string(), fmt_f64(freq)]);
        if freq > 0.0 {
            lnfreq_pts.push((r, freq.ln()));
        }
    }
    store.write_csv("crossings.csv", &["r", "trial", "exist"], &rows)?;
    store.write_csv("frequencies.csv", &["r", "trials", "hits", "freq"], &freq_rows)?;
    let rate = if lnfreq_pts.len() >= 2 {
        let (slope, _, r2) = linear_fit(
            &lnfreq_pts.iter().map(|p| p.0).collect::<Vec<_>>(),
            &lnfreq_pts.iter().map(|p| p.1).collect::<Vec<_>>(),
        );
        json!({"exp_rate": -slope, "r2": r2})
    } else {
        json!(null)
    };
    store.write_json(
        "summary.json",
        &json!({"level": level, "sizes": sizes, "trials": config.trials, "decay_fit": rate}),
    )?;
    Ok(())
}

fn run_level_scan(config: &ExperimentConfig, store: &mut ResultStore) -> Result<(), HarnessError> {
    let ev = config.events.as_ref().unwrap();
    let kernel = build_kernel(&config.field)?;
    let levels = config.levels.as_ref().unwrap();
    let grid = domain_grid(&config.field, ev.r_box + config.field.h)?;
    let spec = BoxSpec::new(vec![0.0; config.field.dim], ev.r_box, ev.kappa)?;
    let mut rows = Vec::new();
    let mut hits = vec![0usize; levels.len()];
    let mut crossing_hits = vec![0usize; levels.len()];
    for trial in 0..config.trials {
        let state = RngState::trial(config.seed, 0, trial);
        // one field per trial shared across levels: monotone coupling
        let field = sample_field(&grid, &kernel, config.field.eps, &state)?;
        for (li, &level) in levels.iter().enumerate() {
            let set = excursion_set(&field, level, Adjacency::Face);
            let exist = exist_event(&set, &spec);
            let crossing = axis_crossing_event(&set, &spec, 0);
            hits[li] += exist as usize;
            crossing_hits[li] += crossing as usize;
            rows.push(vec![
                fmt_f64(level),
                trial.to_string(),
                bool_cell(exist),
                bool_cell(crossing),
            ]);
        }
    }
    rows.sort_by(|a, b| {
        let (la, lb) = (a[0].parse::<f64>().unwrap(), b[0].parse::<f64>().unwrap());
        la.partial_cmp(&lb)
            .unwrap()
            .then(a[1].parse::<u64>().unwrap().cmp(&b[1].parse::<u64>().unwrap()))
    });
    store.write_csv("levels.csv", &["level", "trial", "exist", "crossing"], &rows)?;
    let freqs: Vec<f64> = hits.iter().map(|&h| h as f64 / config.trials as f64).collect();
    let cross_freqs: Vec<f64> = crossing_hits
        .iter()
        .map(|&h| h as f64 / config.trials as f64)
        .collect();
    let freq_rows: Vec<Vec<String>> = levels
        .iter()
        .zip(freqs.iter().zip(&cross_freqs))
        .map(|(&l, (&f, &c))| vec![fmt_f64(l), fmt_f64(f), fmt_f64(c)])
        .collect();
    store.write_csv(
        "frequencies.csv",
        &["level", "exist_freq", "crossing_freq"],
        &freq_rows,
    )?;
    // the critical-level estimate uses the single-axis crossing frequency:
    // in d = 2 that event has probability 1/2 at the critical level by
    // self-duality, so its midpoint is an unbiased probe; the all-axes
    // event crosses 1/2 strictly above the critical level at finite R
    let estimate = estimate_critical_level(levels, &cross_freqs, config.trials, config.seed).ok();
    store.write_json(
        "summary.json",
        &json!({
            "levels": levels,
            "trials": config.trials,
            "exist_freq": freqs,
            "crossing_freq": cross_freqs,
            "critical_level": estimate.map(|(est, lo, hi)| json!({"estimate": est, "ci_low": lo, "ci_high": hi})),
        }),
    )?;
    Ok(())
}

/// Level where a monotone logistic fit of a crossing frequency crosses 1/2,
/// with a bootstrap confidence interval. Rejects scans that do not straddle
/// the half-line.
pub fn estimate_critical_level(
    levels: &[f64],
    freqs: &[f64],
    trials_per_level: u64,
    seed: u64,
) -> Result<(f64, f64, f64), HarnessError> {
    if levels.len() < 5 || levels.len() != freqs.len() {
        return Err(HarnessError::validation("levels", "need at least 5 scanned levels"));
    }
    let fmin = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = freqs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(fmin <= 0.5 && fmax >= 0.5) {
        return Err(HarnessError::validation("freqs", "scan must straddle frequency 1/2"));
    }
    let estimate = logistic_midpoint(levels, freqs);
    let mut boots = Vec::with_capacity(200);
    let state = RngState::new(seed, u64::MAX);
    let mut rng = state.rng();
    for _ in 0..200 {
        let resampled: Vec<f64> = freqs
            .iter()
            .map(|&f| {
                let b = Binomial::new(trials_per_level, f.clamp(0.0, 1.0)).unwrap();
                b.sample(&mut rng) as f64 / trials_per_level as f64
            })
            .collect();
        boots.push(logistic_midpoint(levels, &resampled));
    }
    boots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((estimate, quantile(&boots, 0.025), quantile(&boots, 0.975)))
}

fn run_chemdist(config: &ExperimentConfig, store: &mut ResultStore) -> Result<(), HarnessError> {
    let kernel = build_kernel(&config.field)?;
    let level = config
        .events
        .as_ref()
        .and_then(|e| e.level)
        .ok_or_else(|| HarnessError::validation("events.level", "required for chemdist"))?;
    let norms = config.norms.as_ref().unwrap();
    let dim = config.field.dim;
    let mut rows = Vec::new();
    for (ni, &norm) in norms.iter().enumerate() {
        let mut center = vec![0.0; dim];
        center[0] = norm / 2.0;
        let half = norm / 2.0 + 4.0;
        let grid = Grid::covering(&center, half, config.field.h)?;
        let a = grid.clamped_cell(&vec![0.0; dim]);
        let mut xt = vec![0.0; dim];
        xt[0] = norm;
        let b = grid.clamped_cell(&xt);
        for trial in 0..config.trials {
            let state = RngState::trial(config.seed, (ni as u64) << 32, trial);
            let field = sample_field(&grid, &kernel, config.field.eps, &state)?;
            let set = excursion_set(&field, level, Adjacency::Face);
            let res = chemical_distance(&set, &a, &b);
            let status = match res.status {
                PathStatus::Connected => "connected",
                PathStatus::Disconnected => "disconnected",
                PathStatus::EndpointOutside => "endpoint-outside",
            };
            rows.push(vec![fmt_f64(norm), trial.to_string(), status.to_string(), fmt_f64(res.length)]);
        }
    }
    store.write_csv("chemdist.csv", &["x_norm", "trial", "status", "d_chem"], &rows)?;
    Ok(())
}

fn run_s_tail(config: &ExperimentConfig, store: &mut ResultStore) -> Result<(), HarnessError> {
    let kernel = build_kernel(&config.field)?;
    let level = config
        .events
        .as_ref()
        .and_then(|e| e.level)
        .ok_or_else(|| HarnessError::validation("events.level", "required for s-tail"))?;
    let s = config.s.unwrap();
    if s < 10.0 * config.field.h {
        return Err(HarnessError::validation("s", "must be at least 10 grid cells"));
    }
    if s > config.field.domain {
        return Err(HarnessError::validation("s", "exceeds the sampled domain"));
    }
    let thresholds = config.thresholds.as_ref().unwrap();
    let grid = domain_grid(&config.field, config.field.domain)?;
    let mut samples = Vec::with_capacity(config.trials as usize);
    let mut rows = Vec::new();
    for trial in 0..config.trials {
        let state = RngState::trial(config.seed, 0, trial);
        let field = sample_field(&grid, &kernel, config.field.eps, &state)?;
        let set = excursion_set(&field, level, Adjacency::Face);
        let d = chemical_s(&set, s, &vec![0.0; config.field.dim]);
        samples.push(d.length);
        rows.push(vec![trial.to_string(), fmt_f64(d.length), bool_cell(d.exact)]);
    }
    store.write_csv("s_samples.csv", &["trial", "s_value", "exact"], &rows)?;
    let freqs = tail_frequencies(&samples, thresholds);
    let tail_rows: Vec<Vec<String>> = thresholds
        .iter()
        .zip(&freqs)
        .map(|(&t, &f)| vec![fmt_f64(t), fmt_f64(f)])
        .collect();
    store.write_csv("tail.csv", &["threshold", "freq"], &tail_rows)?;
    store.write_json(
        "summary.json",
        &json!({"level": level, "s": s, "trials": config.trials, "thresholds": thresholds, "tail": freqs}),
    )?;
    Ok(())
}

fn run_renorm_scan(config: &ExperimentConfig, store: &mut ResultStore) -> Result<(), HarnessError> {
    let ps = config.p_values.as_ref().unwrap();
    let x_norms = config.x_norms.as_ref().unwrap();
    let c0 = config.c0.unwrap_or(9.0);
    let delta = config.delta.unwrap_or(0.5);
    let state = RngState::new(config.seed, 0);
    let rows = structure_probability_scan(ps, x_norms, c0, delta, config.trials as usize, &state)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let (lo, hi) = wilson_interval(r.successes, r.trials, 1.96);
            vec![
                fmt_f64(r.p),
                r.x_norm.to_string(),
                r.trials.to_string(),
                r.successes.to_string(),
                fmt_f64(lo),
                fmt_f64(hi),
            ]
        })
        .collect();
    store.write_csv(
        "structures.csv",
        &["p", "x_norm", "trials", "successes", "wilson_low", "wilson_high"],
        &csv_rows,
    )?;
    store.write_json("summary.json", &json!({"c0": c0, "delta": delta, "trials": config.trials}))?;
    Ok(())
}

/// Increasing event used by the domination probe: an all-open left-right
/// face-connected crossing of the site block.
pub fn site_crossing(cfg: &SiteConfiguration) -> bool {
    let cols = cfg.extent[0];
    let mut frontier: Vec<usize> = (0..cfg.num_sites())
        .filter(|&i| cfg.multi(i)[0] == 0 && cfg.omega[i])
        .collect();
    let mut seen = vec![false; cfg.num_sites()];
    for &i in &frontier {
        seen[i] = true;
    }
    while let Some(cur) = frontier.pop() {
        let idx = cfg.multi(cur);
        if idx[0] == cols - 1 {
            return true;
        }
        for k in 0..cfg.dim {
            for dir in [-1i64, 1] {
                let v = idx[k] as i64 + dir;
                if v < 0 || v >= cfg.extent[k] as i64 {
                    continue;
                }
                let mut nb = idx.clone();
                nb[k] = v as usize;
                let nlin = cfg.linear(&nb);
                if cfg.omega[nlin] && !seen[nlin] {
                    seen[nlin] = true;
                    frontier.push(nlin);
                }
            }
        }
    }
    false
}

fn run_domination(config: &ExperimentConfig, store: &mut ResultStore) -> Result<(), HarnessError> {
    let ev = config.events.as_ref().unwrap();
    let level = require_level(ev)?;
    let kernel = build_kernel(&config.field)?;
    let extent = config.site_extent.as_ref().unwrap().clone();
    if extent.len() != config.field.dim {
        return Err(HarnessError::validation("site-extent", "dimension mismatch"));
    }
    let geom = CoarseGeometry {
        r_box: ev.r_box,
        level,
        kappa: ev.kappa,
        eps: config.field.eps.unwrap_or(0.0),
        spacing: config.field.h,
        extent: extent.clone(),
    };
    let mut mu = Vec::with_capacity(config.trials as usize);
    for trial in 0..config.trials {
        let state = RngState::trial(config.seed, 0, trial);
        mu.push(coarse_grain(&kernel, &geom, &state)?);
    }
    let opens: usize = mu.iter().map(|c| c.omega.iter().filter(|&&b| b).count()).sum();
    let sites: usize = mu.iter().map(|c| c.num_sites()).sum();
    let p_hat = opens as f64 / sites as f64;
    let r_dep = kernel.truncation.unwrap_or_else(|| 2.0 * kernel.support_radius());
    let m = dependence_range_sites(r_dep, ev.r_box, ev.kappa);
    let state = RngState::new(config.seed, 1 << 48);
    let report = domination_probe(&mu, site_crossing, p_hat, m, config.trials as usize, &state)?;
    store.write_json(
        "summary.json",
        &json!({
            "p_hat": p_hat,
            "m": m,
            "alpha": report.alpha,
            "q": report.q,
            "p_mu": report.p_mu,
            "p_pi": report.p_pi,
            "slack": report.slack,
            "satisfied": report.satisfied,
            "mu_trials": report.mu_trials,
            "pi_trials": report.pi_trials,
        }),
    )?;
    Ok(())
}

fn run_stretch(config: &ExperimentConfig, store: &mut ResultStore) -> Result<(), HarnessError> {
    let kernel = build_kernel(&config.field)?;
    let levels: Vec<f64> = match (&config.levels, config.events.as_ref().and_then(|e| e.level)) {
        (Some(ls), _) => ls.clone(),
        (None, Some(l)) => vec![l],
        (None, None) => return Err(HarnessError::validation("levels", "required for stretch")),
    };
    let norms = config.norms.as_ref().unwrap().clone();
    let kappa_beta = config.kappa_beta.unwrap_or(4.0);
    let delta = config.delta.unwrap_or(0.5);
    let kappa = kappa_exponent(config.field.dim, kappa_beta, delta)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (li, &level) in levels.iter().enumerate() {
        let params = StretchParams {
            kernel: kernel.clone(),
            level,
            norms: norms.clone(),
            trials: config.trials,
            spacing: config.field.h,
            margin: 4.0,
            kappa_beta,
            delta,
            seed: config.seed.wrapping_add(li as u64),
        };
        let records = stretch_experiment(&params)?;
        for r in &records {
            rows.push(vec![
                r.seed.to_string(),
                fmt_f64(r.level),
                fmt_f64(r.x_norm),
                bool_cell(r.connected),
                fmt_f64(r.d_chem),
                fmt_f64(r.stretch),
                fmt_f64(kappa),
            ]);
        }
        for (norm, connected, freq) in stretch_frequencies(&records) {
            let mut stretches: Vec<f64> = records
                .iter()
                .filter(|r| r.x_norm == norm && r.connected)
                .map(|r| r.stretch)
                .collect();
            stretches.sort_by(|a, b| a.partial_cmp(b).unwrap());
            summary.push(json!({
                "level": level,
                "x_norm": norm,
                "connected_trials": connected,
                "exceedance_freq": freq,
                "median_stretch": if stretches.is_empty() { serde_json::Value::Null } else { json!(quantile(&stretches, 0.5)) },
                "q90_stretch": if stretches.is_empty() { serde_json::Value::Null } else { json!(quantile(&stretches, 0.9)) },
            }));
        }
    }
    store.write_csv(
        "stretch.csv",
        &["seed", "level", "x_norm", "connected", "d_chem", "stretch", "kappa_target"],
        &rows,
    )?;
    store.write_json(
        "summary.json",
        &json!({"kappa": kappa, "kappa_beta": kappa_beta, "delta": delta, "per_distance": summary}),
    )?;
    Ok(())
}
