use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use comadout::data::{self, CsvOptions, LabelColumn};
use comadout::detector::FitOptions;
use comadout::{Dataset, Model, VariantId};
use comadout_bench::{
    emit_report, run_benchmark, BenchError, ConfigError, DatasetSpec, Format, Metric, RunConfig,
};

/// CoMadOut outlier detectors and their benchmark harness.
///
/// Exit codes: 0 success, 1 configuration or input error, 2 some
/// benchmark cells failed (the report is still written).
#[derive(Parser)]
#[command(name = "comadout", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark described by a JSON config.
    Bench(BenchArgs),
    /// Fit one variant on a CSV and print per-sample scores.
    Score(ScoreArgs),
    /// Relabel a CSV by the interquartile-range rule.
    RelabelIqr(RelabelArgs),
    /// Write a synthetic two-dimensional dataset.
    Synth(SynthArgs),
    /// Time fit + score on growing fractions of one dataset.
    ScaleSweep(SweepArgs),
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated CSV paths replacing the configured datasets.
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<PathBuf>>,
    /// Comma-separated variant names, e.g. CMO,CMO+ke,PCA(Ens).
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
    /// Fractions of the feature count kept as components; K = round(ratio * d), at least 1.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated subset of AP, AUROC, AUPRC, P@N, RUNTIME.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    /// Also pick the best ratio per variant and dataset by AP.
    #[arg(long)]
    grid_search: bool,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV.
    #[arg(long)]
    data: PathBuf,
    /// Label column: header name or 0-based index. Defaults to the last column.
    #[arg(long)]
    label: Option<String>,
}

impl DataArgs {
    fn load(&self) -> anyhow::Result<Dataset> {
        let label = self.label.as_deref().map_or(LabelColumn::Last, LabelColumn::from);
        data::load_csv(&self.data, &CsvOptions { label, ..CsvOptions::default() })
            .with_context(|| format!("loading {}", self.data.display()))
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "CMO+ke")]
    variant: String,
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    /// Use the softmax score for CMO.
    #[arg(long)]
    softmax: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RelabelArgs {
    #[arg(long)]
    input: PathBuf,
    /// Column whose IQR fences define the labels.
    #[arg(long, conflicts_with = "any")]
    target: Option<String>,
    /// Mark a row when any column lies outside its fences.
    #[arg(long)]
    any: bool,
    /// With --any, ignore columns holding only two distinct values.
    #[arg(long)]
    skip_binary: bool,
    /// Fence multiplier: Q1 - k·IQR and Q3 + k·IQR.
    #[arg(long, default_value_t = 1.5)]
    k: f64,
    /// Remove the target column from the features.
    #[arg(long)]
    drop_target: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Line,
    Cluster,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(long)]
    inliers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "CMO,CMO+,CMO+k,CMO+e,CMO+ke,CMOEns")]
    variants: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1")]
    row_fractions: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    col_fractions: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_variants(names: &[String]) -> Result<Vec<VariantId>, ConfigError> {
    names.iter().map(|n| n.parse().map_err(|e: comadout::Error| ConfigError::new(e.to_string()))).collect()
}

fn write_out(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn bench(args: BenchArgs) -> Result<ExitCode, BenchError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(paths) = args.datasets {
        cfg.datasets = paths.into_iter().map(DatasetSpec::from_path).collect();
    }
    if let Some(v) = args.variants {
        cfg.variants = parse_variants(&v)?;
    }
    if let Some(r) = args.ratios {
        cfg.component_ratios = r;
    }
    if let Some(s) = args.seeds {
        cfg.seeds = s;
    }
    if let Some(m) = args.metrics {
        cfg.metrics = m.iter().map(|s| s.parse::<Metric>()).collect::<Result<_, _>>()?;
    }
    if let Some(f) = args.format {
        cfg.format = f.parse::<Format>()?;
    }
    cfg.grid_search |= args.grid_search;
    cfg.validate()?;

    let report = run_benchmark(&cfg, args.jobs)?;
    emit_report(&report, cfg.format, args.out.as_deref())?;
    let failed = report.failures();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see the report", report.cells.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn score(args: ScoreArgs) -> anyhow::Result<()> {
    let ds = args.data.load()?;
    let variant: VariantId = args.variant.parse()?;
    let model = Model::fit_with(
        &ds.features,
        variant,
        FitOptions { ratio: args.ratio, softmax_scoring: args.softmax },
    )?;
    let report = model.score(&ds.features)?;
    let mut text = String::from("index,score,predicted,outlier\n");
    for (i, s) in report.scores.iter().enumerate() {
        let predicted = report.labels.as_ref().map_or(String::new(), |l| u8::from(l[i]).to_string());
        text.push_str(&format!("{i},{s},{predicted},{}\n", u8::from(ds.labels[i])));
    }
    write_out(args.out.as_deref(), &text)
}

fn relabel(args: RelabelArgs) -> anyhow::Result<()> {
    let ds = data::load_csv(&args.input, &CsvOptions { label: LabelColumn::None, ..CsvOptions::default() })
        .with_context(|| format!("loading {}", args.input.display()))?;
    let (labels, drop) = match (&args.target, args.any) {
        (Some(t), false) => {
            let col = match t.parse::<usize>() {
                Ok(i) if i < ds.dims() => i,
                Ok(i) => bail!("target index {i} out of range for {} columns", ds.dims()),
                Err(_) => ds
                    .feature_names
                    .iter()
                    .position(|n| n == t)
                    .with_context(|| format!("no column named '{t}'"))?,
            };
            (data::iqr_outlier_labels(&ds.features.column(col), args.k)?, args.drop_target.then_some(col))
        }
        (None, true) => (data::iqr_outlier_labels_any(&ds.features, args.k, args.skip_binary)?, None),
        _ => bail!("choose either --target or --any"),
    };
    let keep: Vec<usize> = (0..ds.dims()).filter(|&c| Some(c) != drop).collect();
    let mut out = ds.select_features(&keep)?;
    out.labels = labels;
    data::write_csv(&out, &args.out)?;
    eprintln!("{} of {} rows labelled outliers", out.outliers(), out.samples());
    Ok(())
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let ds = match args.kind {
        SynthKind::Line => {
            data::synthetic_line_with_outlier(args.inliers.unwrap_or(data::line::DEFAULT_INLIERS), args.seed)?
        }
        SynthKind::Cluster => data::synthetic_cluster_with_outlier(
            args.inliers.unwrap_or(data::cluster::DEFAULT_INLIERS),
            args.seed,
        )?,
    };
    data::write_csv(&ds, &args.out)?;
    Ok(())
}

fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    let ds = args.data.load()?;
    let variants = parse_variants(&args.variants)?;
    let points = comadout_bench::scale_sweep(
        &ds,
        &variants,
        &args.row_fractions,
        &args.col_fractions,
        args.ratio,
        args.seed,
    )?;
    let mut text = String::from("variant,row_fraction,col_fraction,samples,features,seconds\n");
    for p in points {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.variant, p.row_fraction, p.col_fraction, p.samples, p.features, p.seconds
        ));
    }
    write_out(args.out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Bench(args) => bench(args).map_err(anyhow::Error::from),
        Command::Score(args) => score(args).map(|()| ExitCode::SUCCESS),
        Command::RelabelIqr(args) => relabel(args).map(|()| ExitCode::SUCCESS),
        Command::Synth(args) => synth(args).map(|()| ExitCode::SUCCESS),
        Command::ScaleSweep(args) => sweep(args).map(|()| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}
