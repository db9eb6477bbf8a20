//! Experiment configuration: a single JSON document per run, validated
//! against the preconditions of the operations it drives.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use gaussperc_core::kernel::KernelKind;

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sample,
    Events,
    CrossingScan,
    LevelScan,
    Chemdist,
    STail,
    RenormScan,
    Domination,
    Stretch,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Sample => "sample",
            ExperimentKind::Events => "events",
            ExperimentKind::CrossingScan => "crossing-scan",
            ExperimentKind::LevelScan => "level-scan",
            ExperimentKind::Chemdist => "chemdist",
            ExperimentKind::STail => "s-tail",
            ExperimentKind::RenormScan => "renorm-scan",
            ExperimentKind::Domination => "domination",
            ExperimentKind::Stretch => "stretch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FieldSpec {
    pub kernel: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Truncation radius r; omitted means the untruncated kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc_r: Option<f64>,
    /// Discretization step; omitted disables the epsilon pass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Grid spacing.
    pub h: f64,
    /// Half-side of the sampled domain.
    pub domain: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EventSpec {
    /// Event box half-side R.
    pub r_box: f64,
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub field: FieldSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<EventSpec>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Level list for level-scan; single levels live in `events.level`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    /// Box half-sides R for crossing-scan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<f64>>,
    /// Physical distances for chemdist / stretch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norms: Option<Vec<f64>>,
    /// Thresholds for s-tail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    /// Box half-side s for s-tail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    /// Bernoulli levels for renorm-scan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_values: Option<Vec<f64>>,
    /// L1 distances for renorm-scan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_norms: Option<Vec<usize>>,
    /// Sites per axis for domination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_extent: Option<Vec<usize>>,
    /// Effective decay exponent for the stretch kappa target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_beta: Option<f64>,
}

/// Default resource budget: 10^8 cells and 2 GiB of field memory per trial.
pub const MAX_CELLS_PER_TRIAL: usize = 100_000_000;
pub const MAX_FIELD_BYTES: usize = 2 << 30;
/// Rough working-set cost per cell (field + FFT buffers).
const BYTES_PER_CELL: usize = 48;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::validation("config", &e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let f = &self.field;
        if !(f.dim == 2 || f.dim == 3) {
            return Err(HarnessError::validation("field.dim", "must be 2 or 3"));
        }
        if !(f.h > 0.0 && f.h.is_finite()) {
            return Err(HarnessError::validation("field.h", "must be positive and finite"));
        }
        if !(f.domain > f.h && f.domain.is_finite()) {
            return Err(HarnessError::validation("field.domain", "must exceed the spacing h"));
        }
        match f.kernel {
            KernelKind::PolynomialDecay => {
                let beta = f
                    .beta
                    .ok_or_else(|| HarnessError::validation("field.beta", "required for the polynomial kernel"))?;
                if !(beta > f.dim as f64) {
                    return Err(HarnessError::validation("field.beta", "must exceed the dimension"));
                }
            }
            KernelKind::BargmannFock => {}
        }
        if let Some(r) = f.trunc_r {
            if !(r > 1.0) {
                return Err(HarnessError::validation("field.trunc-r", "must exceed 1"));
            }
        }
        if let Some(eps) = f.eps {
            if !(eps > 0.0) {
                return Err(HarnessError::validation("field.eps", "must be positive"));
            }
            let ratio = eps / f.h;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio < 0.5 {
                return Err(HarnessError::validation(
                    "field.eps",
                    "must be a positive integer multiple of h",
                ));
            }
            if eps > 2.0 * f.domain {
                return Err(HarnessError::validation("field.eps", "exceeds the domain side"));
            }
        }
        if let Some(ev) = &self.events {
            if !(ev.r_box > 1.0) {
                return Err(HarnessError::validation("events.r-box", "must exceed 1"));
            }
            if !(ev.kappa > 0.0 && ev.kappa < 1.0) {
                return Err(HarnessError::validation("events.kappa", "must lie in (0,1)"));
            }
            if let Some(l) = ev.level {
                if !l.is_finite() {
                    return Err(HarnessError::validation("events.level", "must be finite"));
                }
            }
        }
        if self.trials == 0 && self.experiment != ExperimentKind::Sample {
            return Err(HarnessError::validation("trials", "must be positive"));
        }
        for (name, list) in [("levels", &self.levels), ("sizes", &self.sizes), ("norms", &self.norms)] {
            if let Some(v) = list {
                if v.is_empty() {
                    return Err(HarnessError::validation(name, "must be nonempty when present"));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(HarnessError::validation(name, "entries must be finite"));
                }
            }
        }
        if let Some(ps) = &self.p_values {
            if ps.iter().any(|&p| !(0.0 < p && p <= 1.0)) {
                return Err(HarnessError::validation("p-values", "entries must lie in (0, 1]"));
            }
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(HarnessError::validation("delta", "must be nonnegative"));
            }
        }
        if let Some(c) = self.c0 {
            if !(c > 0.0) {
                return Err(HarnessError::validation("c0", "must be positive"));
            }
        }
        // per-experiment requirements
        match self.experiment {
            ExperimentKind::Events | ExperimentKind::CrossingScan | ExperimentKind::LevelScan => {
                if self.events.is_none() {
                    return Err(HarnessError::validation("events", "required for this experiment"));
                }
                if self.experiment == ExperimentKind::LevelScan && self.levels.is_none() {
                    return Err(HarnessError::validation("levels", "required for level-scan"));
                }
                if self.experiment == ExperimentKind::CrossingScan && self.sizes.is_none() {
                    return Err(HarnessError::validation("sizes", "required for crossing-scan"));
                }
            }
            ExperimentKind::Chemdist | ExperimentKind::Stretch => {
                if self.norms.is_none() {
                    return Err(HarnessError::validation("norms", "required for this experiment"));
                }
            }
            ExperimentKind::STail => {
                if self.s.is_none() {
                    return Err(HarnessError::validation("s", "required for s-tail"));
                }
                if self.thresholds.is_none() {
                    return Err(HarnessError::validation("thresholds", "required for s-tail"));
                }
            }
            ExperimentKind::RenormScan => {
                if self.p_values.is_none() {
                    return Err(HarnessError::validation("p-values", "required for renorm-scan"));
                }
                if self.x_norms.is_none() {
                    return Err(HarnessError::validation("x-norms", "required for renorm-scan"));
                }
            }
            ExperimentKind::Domination => {
                if self.events.is_none() {
                    return Err(HarnessError::validation("events", "required for domination"));
                }
                if self.site_extent.is_none() {
                    return Err(HarnessError::validation("site-extent", "required for domination"));
                }
            }
            ExperimentKind::Sample => {}
        }
        // resource budget: reject, never truncate
        let cells_per_axis = (2.0 * f.domain / f.h).ceil() as usize + 1;
        let cells = cells_per_axis.checked_pow(f.dim as u32).unwrap_or(usize::MAX);
        if cells > MAX_CELLS_PER_TRIAL {
            return Err(HarnessError::Budget(format!(
                "domain requires {cells} cells per trial, over the {MAX_CELLS_PER_TRIAL} cap"
            )));
        }
        if cells.saturating_mul(BYTES_PER_CELL) > MAX_FIELD_BYTES {
            return Err(HarnessError::Budget(format!(
                "domain working set {} bytes exceeds the {} byte cap",
                cells * BYTES_PER_CELL,
                MAX_FIELD_BYTES
            )));
        }
        Ok(())
    }
}
