//! Running the benchmark grid and aggregating it.

use std::collections::BTreeMap;
use std::time::Instant;

use comadout::data::{self, CsvOptions, LabelColumn};
use comadout::detector::FitOptions;
use comadout::metrics::{self, LabeledScores, RankTable, MAX_CD_ALGORITHMS};
use comadout::{Dataset, Matrix, Model, VariantId};
use rayon::prelude::*;

use crate::config::{Metric, PAtNMode, RunConfig};
use crate::{BenchError, ConfigError};

/// Position of a cell in the report axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub dataset: usize,
    pub variant: usize,
    pub ratio: usize,
    pub seed: usize,
}

pub type CellOutcome = Result<BTreeMap<Metric, f64>, String>;

/// Which ratio a summary table describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioSel {
    /// Index into [`BenchmarkReport::ratios`].
    Fixed(usize),
    /// The per-(variant, dataset) ratio picked by grid search.
    Grid,
}

/// One table: a metric at one ratio selection, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub metric: Metric,
    pub ratio: RatioSel,
    /// `means[variant][dataset]`; `None` when any seed of the cell failed.
    pub means: Vec<Vec<Option<f64>>>,
    /// Datasets on which every variant succeeded. Only these enter AVG and ranks.
    pub ranked_datasets: Vec<usize>,
    /// Mean over `ranked_datasets` per variant.
    pub avg: Vec<Option<f64>>,
    /// Ranks over `ranked_datasets`; absent for runtime.
    pub ranks: Option<RankTable>,
    pub cd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridChoice {
    pub variant: usize,
    pub dataset: usize,
    /// `None` if the cell failed at every grid ratio.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub datasets: Vec<String>,
    pub variants: Vec<VariantId>,
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub metrics: Vec<Metric>,
    pub alpha: f64,
    pub cells: BTreeMap<CellKey, CellOutcome>,
    pub summaries: Vec<Summary>,
    pub grid: Vec<GridChoice>,
}

impl BenchmarkReport {
    pub fn failures(&self) -> usize {
        self.cells.values().filter(|c| c.is_err()).count()
    }

    pub fn ratio_label(&self, sel: RatioSel) -> String {
        match sel {
            RatioSel::Fixed(i) => self.ratios[i].to_string(),
            RatioSel::Grid => "grid".into(),
        }
    }

    pub fn summary(&self, metric: Metric, ratio: RatioSel) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.metric == metric && s.ratio == ratio)
    }
}

pub fn load_datasets(cfg: &RunConfig) -> Result<Vec<Dataset>, BenchError> {
    cfg.datasets
        .iter()
        .map(|spec| {
            let opts = CsvOptions {
                label: spec.label.as_deref().map_or(LabelColumn::Last, LabelColumn::from),
                ..CsvOptions::default()
            };
            let mut ds = data::load_csv(&spec.path, &opts)
                .map_err(|e| ConfigError::new(format!("dataset '{}': {e}", spec.display_name())))?;
            ds.name = spec.display_name();
            Ok(ds)
        })
        .collect()
}

/// Loads the configured datasets and runs every cell on `jobs` threads.
pub fn run_benchmark(cfg: &RunConfig, jobs: usize) -> Result<BenchmarkReport, BenchError> {
    cfg.validate()?;
    let datasets = load_datasets(cfg)?;
    run_on(cfg, &datasets, jobs)
}

/// Runs the grid on datasets that are already in memory. `cfg.datasets`
/// is ignored apart from validation.
pub fn run_on(cfg: &RunConfig, datasets: &[Dataset], jobs: usize) -> Result<BenchmarkReport, BenchError> {
    let ratios = cfg.evaluated_ratios();
    let mut keys = Vec::new();
    for dataset in 0..datasets.len() {
        for variant in 0..cfg.variants.len() {
            for ratio in 0..ratios.len() {
                for seed in 0..cfg.seeds.len() {
                    keys.push(CellKey { dataset, variant, ratio, seed });
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ConfigError::new(format!("cannot start {jobs} worker threads: {e}")))?;
    let cells: BTreeMap<CellKey, CellOutcome> = pool.install(|| {
        keys.par_iter()
            .map(|&k| {
                let out = evaluate_cell(
                    cfg,
                    &datasets[k.dataset],
                    cfg.variants[k.variant],
                    ratios[k.ratio],
                    cfg.seeds[k.seed],
                );
                (k, out)
            })
            .collect()
    });

    let mut report = BenchmarkReport {
        datasets: datasets.iter().map(|d| d.name.clone()).collect(),
        variants: cfg.variants.clone(),
        ratios,
        seeds: cfg.seeds.clone(),
        metrics: cfg.metrics.clone(),
        alpha: cfg.alpha,
        cells,
        summaries: Vec::new(),
        grid: Vec::new(),
    };
    for &metric in &cfg.metrics {
        for r in 0..report.ratios.len() {
            let means = seed_means(&report, metric, |_, _| Some(r));
            report.summaries.push(summarize(&report, metric, RatioSel::Fixed(r), means));
        }
    }
    if cfg.grid_search {
        let grid_idx: Vec<usize> = cfg
            .ratio_grid
            .iter()
            .map(|g| report.ratios.iter().position(|r| r == g).expect("grid ratios are evaluated"))
            .collect();
        report.grid = grid_search(&report, &grid_idx);
        for &metric in &cfg.metrics {
            let means = seed_means(&report, metric, |v, d| {
                let choice = &report.grid[v * report.datasets.len() + d];
                choice.ratio.and_then(|c| report.ratios.iter().position(|&r| r == c))
            });
            report.summaries.push(summarize(&report, metric, RatioSel::Grid, means));
        }
    }
    Ok(report)
}

/// Fits on one (possibly subsampled / split) dataset and scores it.
fn evaluate_cell(cfg: &RunConfig, ds: &Dataset, variant: VariantId, ratio: f64, seed: u64) -> CellOutcome {
    let run = || -> comadout::Result<BTreeMap<Metric, f64>> {
        let ds = match cfg.subsample_fraction {
            Some(f) if f < 1.0 => data::subsample(ds, f, seed)?,
            _ => ds.clone(),
        };
        let (train, test) = match cfg.holdout_fraction {
            Some(f) => {
                let (tr, te) = data::holdout_indices(&ds.labels, f, seed)?;
                (ds.features.select_rows(&tr)?, ds.select(&te)?)
            }
            None => (ds.features.clone(), ds.clone()),
        };

        let start = Instant::now();
        let opts = FitOptions { ratio, softmax_scoring: cfg.softmax_scoring };
        let model = Model::fit_with(&train, variant, opts)?;
        let report = model.score(&test.features)?;
        let seconds = start.elapsed().as_secs_f64();

        if let Some(bad) = report.scores.iter().find(|s| !s.is_finite()) {
            return Err(comadout::Error::Numerical {
                message: format!("non-finite score {bad}"),
                fingerprint: "scores".into(),
            });
        }
        let ls = LabeledScores::new(&report.scores, &test.labels)?;
        let mut values = BTreeMap::new();
        for &m in &cfg.metrics {
            let v = match m {
                Metric::Ap => metrics::average_precision(&ls)?,
                Metric::Auroc => metrics::auroc(&ls)?,
                Metric::Auprc => metrics::auprc(&ls)?,
                Metric::PAtN => match cfg.p_at_n {
                    PAtNMode::Outliers => metrics::precision_at_outliers(&ls)?,
                    PAtNMode::Fixed(n) => metrics::precision_at_n(&ls, n.min(ls.len()))?,
                },
                Metric::Runtime => seconds,
            };
            values.insert(m, v);
        }
        Ok(values)
    };
    run().map_err(|e| e.to_string())
}

/// Seed-averaged metric per (variant, dataset) at the ratio index `pick`
/// returns for that pair.
fn seed_means(
    report: &BenchmarkReport,
    metric: Metric,
    pick: impl Fn(usize, usize) -> Option<usize>,
) -> Vec<Vec<Option<f64>>> {
    (0..report.variants.len())
        .map(|variant| {
            (0..report.datasets.len())
                .map(|dataset| {
                    let ratio = pick(variant, dataset)?;
                    let mut sum = 0.0;
                    for seed in 0..report.seeds.len() {
                        let key = CellKey { dataset, variant, ratio, seed };
                        sum += *report.cells[&key].as_ref().ok()?.get(&metric)?;
                    }
                    Some(sum / report.seeds.len() as f64)
                })
                .collect()
        })
        .collect()
}

fn summarize(
    report: &BenchmarkReport,
    metric: Metric,
    ratio: RatioSel,
    means: Vec<Vec<Option<f64>>>,
) -> Summary {
    let ranked_datasets: Vec<usize> =
        (0..report.datasets.len()).filter(|&d| means.iter().all(|row| row[d].is_some())).collect();
    let complete: Vec<Vec<f64>> = means
        .iter()
        .map(|row| ranked_datasets.iter().map(|&d| row[d].expect("complete")).collect())
        .collect();
    let avg = complete
        .iter()
        .map(|row| (!row.is_empty()).then(|| row.iter().sum::<f64>() / row.len() as f64))
        .collect();
    let (ranks, cd) = if metric.is_quality() && !ranked_datasets.is_empty() {
        let ranks = metrics::rank_table(&complete, true).ok();
        let k = report.variants.len();
        let cd = (2..=MAX_CD_ALGORITHMS)
            .contains(&k)
            .then(|| metrics::critical_difference(k, ranked_datasets.len(), report.alpha).ok())
            .flatten();
        (ranks, cd)
    } else {
        (None, None)
    };
    Summary { metric, ratio, means, ranked_datasets, avg, ranks, cd }
}

/// Best ratio per (variant, dataset) by seed-averaged AP over the ratio
/// indices in `grid`; ties go to the smaller ratio. Results are ordered
/// variant-major.
pub fn grid_search(report: &BenchmarkReport, grid: &[usize]) -> Vec<GridChoice> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(|&a, &b| report.ratios[a].total_cmp(&report.ratios[b]));
    let per_ratio: Vec<_> =
        sorted.iter().map(|&r| (r, seed_means(report, Metric::Ap, |_, _| Some(r)))).collect();
    let mut out = Vec::new();
    for variant in 0..report.variants.len() {
        for dataset in 0..report.datasets.len() {
            let mut best: Option<(f64, f64)> = None;
            for (r, means) in &per_ratio {
                if let Some(ap) = means[variant][dataset] {
                    if best.is_none_or(|(b, _)| ap > b) {
                        best = Some((ap, report.ratios[*r]));
                    }
                }
            }
            out.push(GridChoice { variant, dataset, ratio: best.map(|(_, r)| r) });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub variant: VariantId,
    pub row_fraction: f64,
    pub col_fraction: f64,
    pub samples: usize,
    pub features: usize,
    /// Wall-clock fit + score time.
    pub seconds: f64,
}

/// Times fit + score on stratified row subsamples and leading-column
/// subsets of one dataset.
pub fn scale_sweep(
    ds: &Dataset,
    variants: &[VariantId],
    row_fractions: &[f64],
    col_fractions: &[f64],
    ratio: f64,
    seed: u64,
) -> comadout::Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for &rf in row_fractions {
        let rows = data::subsample(ds, rf, seed)?;
        for &cf in col_fractions {
            let d = comadout::decomposition::select_k(ds.dims(), cf)?;
            let cols: Vec<usize> = (0..d).collect();
            let x: Matrix = rows.features.select_columns(&cols)?;
            for &variant in variants {
                let start = Instant::now();
                let model = Model::fit(&x, variant, ratio)?;
                model.score(&x)?;
                out.push(SweepPoint {
                    variant,
                    row_fraction: rf,
                    col_fraction: cf,
                    samples: x.rows(),
                    features: d,
                    seconds: start.elapsed().as_secs_f64(),
                });
            }
        }
    }
    Ok(out)
}
