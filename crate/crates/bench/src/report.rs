//! CSV and markdown rendering of a [`BenchmarkReport`].

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Format, Metric};
use crate::runner::{BenchmarkReport, CellKey, RatioSel, Summary};
use crate::BenchError;

/// One line of the CSV report. Cell rows have `kind = "cell"`; aggregate
/// rows are tagged `MEAN`, `AVG`, `WIN`, `ARK`, `RK`, `CD` or `GRID`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub kind: String,
    pub metric: String,
    pub ratio: String,
    pub dataset: String,
    pub variant: String,
    pub seed: String,
    pub value: Option<f64>,
    pub error: String,
}

impl ReportRow {
    fn new(kind: &str, metric: &str, ratio: &str) -> Self {
        ReportRow {
            kind: kind.into(),
            metric: metric.into(),
            ratio: ratio.into(),
            dataset: String::new(),
            variant: String::new(),
            seed: String::new(),
            value: None,
            error: String::new(),
        }
    }
}

pub fn report_rows(report: &BenchmarkReport) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for (key, outcome) in &report.cells {
        let CellKey { dataset, variant, ratio, seed } = *key;
        for &metric in &report.metrics {
            let mut row = ReportRow::new("cell", metric.name(), &report.ratios[ratio].to_string());
            row.dataset = report.datasets[dataset].clone();
            row.variant = report.variants[variant].name().into();
            row.seed = report.seeds[seed].to_string();
            match outcome {
                Ok(values) => row.value = values.get(&metric).copied(),
                Err(e) => row.error = e.clone(),
            }
            rows.push(row);
        }
    }
    for s in &report.summaries {
        let ratio = report.ratio_label(s.ratio);
        let tagged = |kind: &str, variant: usize, value: Option<f64>| {
            let mut row = ReportRow::new(kind, s.metric.name(), &ratio);
            row.variant = report.variants[variant].name().into();
            row.value = value;
            row
        };
        for (v, means) in s.means.iter().enumerate() {
            for (d, m) in means.iter().enumerate() {
                let mut row = tagged("MEAN", v, *m);
                row.dataset = report.datasets[d].clone();
                rows.push(row);
            }
        }
        for (v, a) in s.avg.iter().enumerate() {
            rows.push(tagged("AVG", v, *a));
        }
        if let Some(t) = &s.ranks {
            for v in 0..report.variants.len() {
                rows.push(tagged("WIN", v, Some(t.wins[v] as f64)));
                rows.push(tagged("ARK", v, Some(t.average_rank[v])));
                rows.push(tagged("RK", v, Some(t.dense_rank[v] as f64)));
            }
        }
        if let Some(cd) = s.cd {
            let mut row = ReportRow::new("CD", s.metric.name(), &ratio);
            row.value = Some(cd);
            rows.push(row);
        }
    }
    for g in &report.grid {
        let mut row = ReportRow::new("GRID", Metric::Ap.name(), "grid");
        row.dataset = report.datasets[g.dataset].clone();
        row.variant = report.variants[g.variant].name().into();
        row.value = g.ratio;
        rows.push(row);
    }
    rows
}

pub fn render_csv(report: &BenchmarkReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in report_rows(report) {
        w.serialize(row).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("UTF-8 CSV")
}

/// Parses a CSV report back into rows, e.g. to diff two runs.
pub fn read_report_csv(text: &str) -> Result<Vec<ReportRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.6}"))
}

/// Renders one table row, bolding the entries equal to the best value.
fn table_row(
    label: &str,
    values: &[Option<f64>],
    render: impl Fn(Option<f64>) -> String,
    lower_is_better: bool,
) -> String {
    let best =
        values.iter().flatten().copied().reduce(|a, b| if lower_is_better { a.min(b) } else { a.max(b) });
    let mut line = format!("| {label} |");
    for v in values {
        let text = render(*v);
        if v.is_some() && *v == best {
            write!(line, " **{text}** |").unwrap();
        } else {
            write!(line, " {text} |").unwrap();
        }
    }
    line
}

fn summary_table(report: &BenchmarkReport, s: &Summary) -> String {
    let mut out = String::new();
    let ratio = match s.ratio {
        RatioSel::Fixed(i) => format!("component ratio {}", report.ratios[i]),
        RatioSel::Grid => "grid-searched component ratio".into(),
    };
    writeln!(out, "## {} ({ratio})\n", s.metric).unwrap();
    let names: Vec<&str> = report.variants.iter().map(|v| v.name()).collect();
    writeln!(out, "| dataset | {} |", names.join(" | ")).unwrap();
    writeln!(out, "|---|{}", "---|".repeat(names.len())).unwrap();
    let lower = !s.metric.is_quality();
    for (d, name) in report.datasets.iter().enumerate() {
        let row: Vec<Option<f64>> = s.means.iter().map(|m| m[d]).collect();
        writeln!(out, "{}", table_row(name, &row, fmt_value, lower)).unwrap();
    }
    writeln!(out, "{}", table_row("AVG", &s.avg, fmt_value, lower)).unwrap();
    if let Some(t) = &s.ranks {
        let int = |v: Option<f64>| v.map_or_else(|| "n/a".into(), |v| format!("{v:.0}"));
        let wins: Vec<Option<f64>> = t.wins.iter().map(|&w| Some(w as f64)).collect();
        let ark: Vec<Option<f64>> = t.average_rank.iter().map(|&r| Some(r)).collect();
        let rk: Vec<Option<f64>> = t.dense_rank.iter().map(|&r| Some(r as f64)).collect();
        writeln!(out, "{}", table_row("WIN", &wins, int, false)).unwrap();
        writeln!(
            out,
            "{}",
            table_row("ARK", &ark, |v| v.map_or_else(String::new, |v| format!("{v:.3}")), true)
        )
        .unwrap();
        writeln!(out, "{}", table_row("RK", &rk, int, true)).unwrap();
    }
    out.push('\n');
    let excluded = report.datasets.len() - s.ranked_datasets.len();
    if excluded > 0 {
        writeln!(out, "{excluded} dataset(s) with failed cells are left out of AVG and the ranks.\n")
            .unwrap();
    }
    if let Some(cd) = s.cd {
        writeln!(
            out,
            "Critical difference (Nemenyi, alpha {}, k = {}, N = {}): {cd:.6}\n",
            report.alpha,
            report.variants.len(),
            s.ranked_datasets.len()
        )
        .unwrap();
    }
    out
}

pub fn render_markdown(report: &BenchmarkReport) -> String {
    let mut out = String::from("# Benchmark report\n\n");
    writeln!(
        out,
        "{} dataset(s), {} variant(s), seeds {:?}; values are means over seeds.\n",
        report.datasets.len(),
        report.variants.len(),
        report.seeds
    )
    .unwrap();
    for s in &report.summaries {
        out.push_str(&summary_table(report, s));
    }
    if !report.grid.is_empty() {
        out.push_str("## Selected component ratios (by AP)\n\n");
        let names: Vec<&str> = report.variants.iter().map(|v| v.name()).collect();
        writeln!(out, "| dataset | {} |", names.join(" | ")).unwrap();
        writeln!(out, "|---|{}", "---|".repeat(names.len())).unwrap();
        for (d, name) in report.datasets.iter().enumerate() {
            let cells: Vec<String> = (0..report.variants.len())
                .map(|v| {
                    report.grid[v * report.datasets.len() + d]
                        .ratio
                        .map_or_else(|| "n/a".into(), |r| r.to_string())
                })
                .collect();
            writeln!(out, "| {name} | {} |", cells.join(" | ")).unwrap();
        }
        out.push('\n');
    }
    let failed: Vec<_> = report.cells.iter().filter_map(|(k, c)| c.as_ref().err().map(|e| (k, e))).collect();
    if !failed.is_empty() {
        out.push_str("## Failed cells\n\n");
        for (k, e) in failed {
            writeln!(
                out,
                "- {} / {} / ratio {} / seed {}: {e}",
                report.datasets[k.dataset],
                report.variants[k.variant],
                report.ratios[k.ratio],
                report.seeds[k.seed]
            )
            .unwrap();
        }
    }
    out
}

/// Writes the report to `destination`, or to stdout when it is `None`.
pub fn emit_report(
    report: &BenchmarkReport,
    format: Format,
    destination: Option<&Path>,
) -> Result<(), BenchError> {
    let text = match format {
        Format::Csv => render_csv(report),
        Format::Markdown => render_markdown(report),
    };
    match destination {
        Some(path) => {
            std::fs::write(path, text).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| BenchError::Io { path: "<stdout>".into(), source }),
    }
}
