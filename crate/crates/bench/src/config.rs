//! Benchmark configuration: a JSON object, validated into [`RunConfig`].

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use comadout::VariantId;
use serde::{Deserialize, Serialize};

use crate::ConfigError;

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const DEFAULT_RATIO_GRID: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "AP")]
    Ap,
    #[serde(rename = "AUROC")]
    Auroc,
    #[serde(rename = "AUPRC")]
    Auprc,
    #[serde(rename = "P@N")]
    PAtN,
    #[serde(rename = "RUNTIME")]
    Runtime,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Ap, Metric::Auroc, Metric::Auprc, Metric::PAtN, Metric::Runtime];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ap => "AP",
            Metric::Auroc => "AUROC",
            Metric::Auprc => "AUPRC",
            Metric::PAtN => "P@N",
            Metric::Runtime => "RUNTIME",
        }
    }

    /// Runtime is reported but never ranked.
    pub fn is_quality(self) -> bool {
        self != Metric::Runtime
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let key = s.trim().to_ascii_uppercase();
        Metric::ALL.into_iter().find(|m| m.name() == key).ok_or_else(|| {
            ConfigError::new(format!("unknown metric '{s}' (expected AP, AUROC, AUPRC, P@N or RUNTIME)"))
        })
    }
}

/// How `n` is chosen for precision@n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PAtNMode {
    /// `n` = number of true outliers in the evaluated samples.
    #[default]
    Outliers,
    /// A fixed `n`, capped at the number of evaluated samples.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(ConfigError::new(format!("unknown format '{other}' (csv or markdown)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: PathBuf,
    /// Header name or 0-based index of the label column; the last column by default.
    #[serde(default)]
    pub label: Option<String>,
    /// Display name; the file stem by default.
    #[serde(default)]
    pub name: Option<String>,
}

impl DatasetSpec {
    pub fn from_path(path: impl Into<PathBuf>) -> Self {
        DatasetSpec { path: path.into(), label: None, name: None }
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map_or_else(|| self.path.display().to_string(), |s| s.to_string_lossy().into_owned())
        })
    }
}

/// On-disk form of the configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    datasets: Vec<DatasetSpec>,
    variants: Vec<String>,
    #[serde(default = "default_ratios")]
    component_ratios: Vec<f64>,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
    metrics: Vec<Metric>,
    #[serde(default)]
    p_at_n: PAtNMode,
    #[serde(default)]
    format: Format,
    #[serde(default)]
    grid_search: bool,
    #[serde(default = "default_grid")]
    ratio_grid: Vec<f64>,
    #[serde(default)]
    subsample_fraction: Option<f64>,
    #[serde(default)]
    holdout_fraction: Option<f64>,
    #[serde(default)]
    softmax_scoring: bool,
    #[serde(default = "default_alpha")]
    alpha: f64,
}

fn default_ratios() -> Vec<f64> {
    vec![1.0]
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn default_grid() -> Vec<f64> {
    DEFAULT_RATIO_GRID.to_vec()
}

fn default_alpha() -> f64 {
    0.05
}

/// A validated benchmark configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub datasets: Vec<DatasetSpec>,
    pub variants: Vec<VariantId>,
    pub component_ratios: Vec<f64>,
    /// Seeds only matter when rows are subsampled or held out; the
    /// detectors themselves are deterministic.
    pub seeds: Vec<u64>,
    pub metrics: Vec<Metric>,
    pub p_at_n: PAtNMode,
    pub format: Format,
    pub grid_search: bool,
    pub ratio_grid: Vec<f64>,
    /// Stratified row fraction drawn per seed before fitting.
    pub subsample_fraction: Option<f64>,
    /// Fraction of each class scored but not fitted on. Without it the
    /// detectors are fitted and evaluated on the same samples.
    pub holdout_fraction: Option<f64>,
    pub softmax_scoring: bool,
    /// Significance level of the critical difference: 0.05 or 0.10.
    pub alpha: f64,
}

impl RunConfig {
    /// A configuration with defaults for everything but the essentials.
    pub fn new(datasets: Vec<DatasetSpec>, variants: Vec<VariantId>, metrics: Vec<Metric>) -> Self {
        RunConfig {
            datasets,
            variants,
            component_ratios: default_ratios(),
            seeds: default_seeds(),
            metrics,
            p_at_n: PAtNMode::default(),
            format: Format::default(),
            grid_search: false,
            ratio_grid: default_grid(),
            subsample_fraction: None,
            holdout_fraction: None,
            softmax_scoring: false,
            alpha: default_alpha(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::new(format!("invalid config: {e}")))?;
        let variants = raw
            .variants
            .iter()
            .map(|v| v.parse::<VariantId>().map_err(|e| ConfigError::new(e.to_string())))
            .collect::<Result<_, _>>()?;
        let cfg = RunConfig {
            datasets: raw.datasets,
            variants,
            component_ratios: raw.component_ratios,
            seeds: raw.seeds,
            metrics: raw.metrics,
            p_at_n: raw.p_at_n,
            format: raw.format,
            grid_search: raw.grid_search,
            ratio_grid: raw.ratio_grid,
            subsample_fraction: raw.subsample_fraction,
            holdout_fraction: raw.holdout_fraction,
            softmax_scoring: raw.softmax_scoring,
            alpha: raw.alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative dataset paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for ds in &mut cfg.datasets {
            if ds.path.is_relative() {
                ds.path = base.join(&ds.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let raw = RawConfig {
            datasets: self.datasets.clone(),
            variants: self.variants.iter().map(|v| v.name().to_string()).collect(),
            component_ratios: self.component_ratios.clone(),
            seeds: self.seeds.clone(),
            metrics: self.metrics.clone(),
            p_at_n: self.p_at_n,
            format: self.format,
            grid_search: self.grid_search,
            ratio_grid: self.ratio_grid.clone(),
            subsample_fraction: self.subsample_fraction,
            holdout_fraction: self.holdout_fraction,
            softmax_scoring: self.softmax_scoring,
            alpha: self.alpha,
        };
        serde_json::to_string_pretty(&raw).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::new(m));
        if self.datasets.is_empty() {
            return fail("no datasets configured".into());
        }
        if self.variants.is_empty() {
            return fail("no variants configured".into());
        }
        if self.metrics.is_empty() {
            return fail("no metrics configured".into());
        }
        if self.seeds.is_empty() {
            return fail("no seeds configured".into());
        }
        if self.component_ratios.is_empty() {
            return fail("no component ratios configured".into());
        }
        for &r in
            self.component_ratios.iter().chain(if self.grid_search { &self.ratio_grid[..] } else { &[] })
        {
            if !(r > 0.0 && r <= 1.0) {
                return fail(format!("component ratio {r} is outside (0, 1]"));
            }
        }
        if self.grid_search {
            if self.ratio_grid.is_empty() {
                return fail("grid search needs a non-empty ratio grid".into());
            }
            if !self.metrics.contains(&Metric::Ap) {
                return fail("grid search selects by AP; add AP to the metrics".into());
            }
        }
        let mut names = BTreeSet::new();
        for ds in &self.datasets {
            if !names.insert(ds.display_name()) {
                return fail(format!("duplicate dataset name '{}'", ds.display_name()));
            }
        }
        if let Some(f) = self.subsample_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return fail(format!("subsample fraction {f} is outside (0, 1]"));
            }
        }
        if let Some(f) = self.holdout_fraction {
            if !(f > 0.0 && f < 1.0) {
                return fail(format!("holdout fraction {f} is outside (0, 1)"));
            }
        }
        if let PAtNMode::Fixed(0) = self.p_at_n {
            return fail("precision@n needs n >= 1".into());
        }
        if self.alpha != 0.05 && self.alpha != 0.10 {
            return fail(format!("alpha {} is unsupported (0.05 or 0.10)", self.alpha));
        }
        Ok(())
    }

    /// Ratios that get evaluated: the configured ones, plus the grid when
    /// grid search is on. Sorted ascending, without duplicates.
    pub fn evaluated_ratios(&self) -> Vec<f64> {
        let mut r = self.component_ratios.clone();
        if self.grid_search {
            r.extend(&self.ratio_grid);
        }
        r.sort_by(f64::total_cmp);
        r.dedup();
        r
    }
}
