//! Labelled datasets: CSV ingestion, IQR relabelling, stratified
//! subsampling and synthetic generators.
//!
//! CSV layout: UTF-8, optional header, numeric feature columns and one
//! label column holding `0` (inlier) or `1` (outlier).

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    /// `true` = outlier.
    pub labels: Vec<bool>,
    pub feature_names: Vec<String>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Matrix, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::invalid(format!("{} labels for {} samples", labels.len(), features.rows())));
        }
        let feature_names = (0..features.cols()).map(|j| format!("x{j}")).collect();
        Ok(Dataset { name: name.into(), features, labels, feature_names, provenance: String::new() })
    }

    pub fn with_provenance(mut self, note: impl Into<String>) -> Self {
        self.provenance = note.into();
        self
    }

    pub fn samples(&self) -> usize {
        self.features.rows()
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    pub fn outliers(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Row subset in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Dataset> {
        Ok(Dataset {
            name: self.name.clone(),
            features: self.features.select_rows(rows)?,
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        })
    }

    /// Keeps only the listed feature columns.
    pub fn select_features(&self, cols: &[usize]) -> Result<Dataset> {
        Ok(Dataset {
            name: self.name.clone(),
            features: self.features.select_columns(cols)?,
            labels: self.labels.clone(),
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
            provenance: self.provenance.clone(),
        })
    }
}

/// Which CSV column carries the labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
    #[default]
    Last,
    /// Every column is a feature; all samples are labelled inliers.
    None,
}

impl From<&str> for LabelColumn {
    /// Integers select by index, anything else by header name.
    fn from(s: &str) -> Self {
        match s.trim().parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.trim().to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label: LabelColumn,
    pub delimiter: u8,
    /// `None` detects a header by the presence of a non-numeric cell in the first record.
    pub has_header: Option<bool>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { label: LabelColumn::Last, delimiter: b',', has_header: None }
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let csv_err = |message: String| Error::Csv { path: path.to_path_buf(), message };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(opts.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_err(e.to_string()))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        records.push(rec);
    }
    let first = records.first().ok_or_else(|| csv_err("file has no records".into()))?;
    let width = first.len();

    let has_header = opts.has_header.unwrap_or_else(|| first.iter().any(|c| c.parse::<f64>().is_err()));
    let header: Option<Vec<String>> = has_header.then(|| first.iter().map(str::to_string).collect());
    let body = if has_header { &records[1..] } else { &records[..] };
    // 1-based line number of the first data row.
    let line0 = if has_header { 2 } else { 1 };

    let label_idx = match &opts.label {
        LabelColumn::None => width,
        LabelColumn::Last => width - 1,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(csv_err(format!("label column index {i} out of range for {width} columns")))
        }
        LabelColumn::Name(name) => header
            .as_ref()
            .ok_or_else(|| csv_err(format!("label column '{name}' requested but file has no header")))?
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_err(format!("unknown label column '{name}'")))?,
    };
    let n_features = if label_idx == width { width } else { width - 1 };
    if n_features == 0 {
        return Err(csv_err("need at least one feature column besides the label".into()));
    }
    if body.is_empty() {
        return Err(csv_err("file has a header but no data rows".into()));
    }

    let mut values = Vec::with_capacity(body.len() * n_features);
    let mut labels = Vec::with_capacity(body.len());
    for (r, rec) in body.iter().enumerate() {
        let line = r + line0;
        if rec.len() != width {
            return Err(csv_err(format!("line {line}: expected {width} columns, found {}", rec.len())));
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| csv_err(format!("line {line}, column {}: non-numeric value '{cell}'", c + 1)))?;
            if !v.is_finite() {
                return Err(csv_err(format!("line {line}, column {}: non-finite value", c + 1)));
            }
            if c == label_idx {
                labels.push(match v {
                    0.0 => false,
                    1.0 => true,
                    _ => return Err(csv_err(format!("line {line}: label must be 0 or 1, found '{cell}'"))),
                });
            } else {
                values.push(v);
            }
        }
    }

    if label_idx == width {
        labels.resize(body.len(), false);
    }
    let features = Matrix::new(body.len(), n_features, values)?;
    let feature_names = match header {
        Some(h) => h.into_iter().enumerate().filter(|&(i, _)| i != label_idx).map(|(_, n)| n).collect(),
        None => (0..width).filter(|&i| i != label_idx).map(|i| format!("x{i}")).collect(),
    };
    let name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Ok(Dataset {
        name,
        features,
        labels,
        feature_names,
        provenance: format!("loaded from {}", path.display()),
    })
}

/// Writes feature columns followed by an `outlier` column, with a header.
/// Values use the shortest representation that round-trips exactly.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut header = ds.feature_names.join(",");
    header.push_str(",outlier\n");
    out.write_all(header.as_bytes()).map_err(io_err)?;
    for (row, &label) in ds.features.row_iter().zip(&ds.labels) {
        let mut line = String::new();
        for v in row {
            line.push_str(&v.to_string());
            line.push(',');
        }
        line.push_str(if label { "1\n" } else { "0\n" });
        out.write_all(line.as_bytes()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Quantile by linear interpolation between order statistics at position
/// `q (n - 1)` of the sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Flags values outside `[Q1 - k·IQR, Q3 + k·IQR]`.
pub fn iqr_outlier_labels(target: &[f64], k: f64) -> Result<Vec<bool>> {
    if target.len() < 4 {
        return Err(Error::invalid("IQR labelling needs at least four values"));
    }
    if target.iter().any(|v| !v.is_finite()) || !k.is_finite() || k < 0.0 {
        return Err(Error::invalid("IQR labelling needs finite values and k >= 0"));
    }
    let mut sorted = target.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - k * iqr, q3 + k * iqr);
    Ok(target.iter().map(|&v| v < lo || v > hi).collect())
}

/// Row-wise OR of [`iqr_outlier_labels`] over the columns of `x`.
///
/// With `skip_binary`, columns taking at most two distinct values are
/// ignored (a 0/1 indicator has IQR 0 and would flag every minority row).
pub fn iqr_outlier_labels_any(x: &Matrix, k: f64, skip_binary: bool) -> Result<Vec<bool>> {
    let mut labels = vec![false; x.rows()];
    for j in 0..x.cols() {
        let col = x.column(j);
        if skip_binary {
            let mut distinct = col.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            if distinct.len() <= 2 {
                continue;
            }
        }
        for (l, flag) in labels.iter_mut().zip(iqr_outlier_labels(&col, k)?) {
            *l |= flag;
        }
    }
    Ok(labels)
}

/// Generator constants for [`synthetic_line_with_outlier`].
pub mod line {
    /// Direction of the inlier line, in degrees from the x axis.
    pub const ANGLE_DEG: f64 = 35.0;
    /// Inliers are spread uniformly over `[-HALF_LENGTH, HALF_LENGTH]` along the line.
    pub const HALF_LENGTH: f64 = 10.0;
    /// Standard deviation of the orthogonal Gaussian noise.
    pub const NOISE_SIGMA: f64 = 0.25;
    /// Outlier position in line coordinates (along, orthogonal).
    pub const OUTLIER: (f64, f64) = (10.0, 40.0);
    pub const DEFAULT_INLIERS: usize = 235;
}

/// 2-D inliers along a line with small orthogonal noise plus one far
/// off-line outlier (the last row). Deterministic in `seed`.
pub fn synthetic_line_with_outlier(n_inliers: usize, seed: u64) -> Result<Dataset> {
    if n_inliers < 2 {
        return Err(Error::invalid("need at least two inliers"));
    }
    let theta = line::ANGLE_DEG * PI / 180.0;
    let (dir, normal) = ((theta.cos(), theta.sin()), (-theta.sin(), theta.cos()));
    let to_plane = |t: f64, o: f64| [t * dir.0 + o * normal.0, t * dir.1 + o * normal.1];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, line::NOISE_SIGMA).expect("valid sigma");
    let mut values = Vec::with_capacity(2 * (n_inliers + 1));
    for _ in 0..n_inliers {
        let t = rng.random_range(-line::HALF_LENGTH..=line::HALF_LENGTH);
        values.extend(to_plane(t, noise.sample(&mut rng)));
    }
    values.extend(to_plane(line::OUTLIER.0, line::OUTLIER.1));

    let mut labels = vec![false; n_inliers];
    labels.push(true);
    let ds = Dataset::new("synthetic-line", Matrix::new(n_inliers + 1, 2, values)?, labels)?;
    Ok(ds.with_provenance(format!("synthetic line with one outlier, seed {seed}")))
}

/// Unit direction of the inlier line in [`synthetic_line_with_outlier`].
pub fn synthetic_line_direction() -> [f64; 2] {
    let theta = line::ANGLE_DEG * PI / 180.0;
    [theta.cos(), theta.sin()]
}

/// Generator constants for [`synthetic_cluster_with_outlier`].
pub mod cluster {
    /// Standard deviations along the cluster's principal axes.
    pub const SIGMAS: (f64, f64) = (8.0, 3.0);
    pub const ANGLE_DEG: f64 = -20.0;
    pub const CENTER: (f64, f64) = (5.0, 2.0);
    /// Outlier offset from the centre, in principal-axis coordinates.
    pub const OUTLIER: (f64, f64) = (10.0, 60.0);
    pub const DEFAULT_INLIERS: usize = 200;
}

/// A rotated elliptical Gaussian cluster plus one extreme outlier (last row).
pub fn synthetic_cluster_with_outlier(n_inliers: usize, seed: u64) -> Result<Dataset> {
    if n_inliers < 2 {
        return Err(Error::invalid("need at least two inliers"));
    }
    let theta = cluster::ANGLE_DEG * PI / 180.0;
    let (c, s) = (theta.cos(), theta.sin());
    let place = |a: f64, b: f64| [cluster::CENTER.0 + a * c - b * s, cluster::CENTER.1 + a * s + b * c];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let major = Normal::new(0.0, cluster::SIGMAS.0).expect("valid sigma");
    let minor = Normal::new(0.0, cluster::SIGMAS.1).expect("valid sigma");
    let mut values = Vec::with_capacity(2 * (n_inliers + 1));
    for _ in 0..n_inliers {
        values.extend(place(major.sample(&mut rng), minor.sample(&mut rng)));
    }
    values.extend(place(cluster::OUTLIER.0, cluster::OUTLIER.1));

    let mut labels = vec![false; n_inliers];
    labels.push(true);
    let ds = Dataset::new("synthetic-cluster", Matrix::new(n_inliers + 1, 2, values)?, labels)?;
    Ok(ds.with_provenance(format!("synthetic cluster with one outlier, seed {seed}")))
}

/// Stratified uniform sample without replacement; row order is preserved.
///
/// Each class contributes `round(fraction · class size)` rows, at least one
/// when the class is non-empty.
pub fn subsample(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    let rows = subsample_indices(&ds.labels, fraction, seed)?;
    let mut out = ds.select(&rows)?;
    if fraction < 1.0 {
        out.provenance = format!("{} | stratified {fraction} subsample, seed {seed}", ds.provenance);
    }
    Ok(out)
}

pub fn subsample_indices(labels: &[bool], fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("subsample fraction {fraction} is outside (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for class in [false, true] {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        let take = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len());
        rows.extend(index::sample(&mut rng, members.len(), take).into_iter().map(|p| members[p]));
    }
    if rows.len() < 2 {
        return Err(Error::invalid(format!(
            "fraction {fraction} leaves {} sample(s); need at least two",
            rows.len()
        )));
    }
    rows.sort_unstable();
    Ok(rows)
}

/// Stratified split into (train, test) row indices; `test_fraction` of each
/// class goes to the test side.
pub fn holdout_indices(labels: &[bool], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("holdout fraction {test_fraction} is outside (0, 1)")));
    }
    let test = subsample_indices(labels, test_fraction, seed)?;
    let mut in_test = vec![false; labels.len()];
    for &i in &test {
        in_test[i] = true;
    }
    let train: Vec<usize> = (0..labels.len()).filter(|&i| !in_test[i]).collect();
    if train.len() < 2 {
        return Err(Error::invalid("holdout leaves fewer than two training samples"));
    }
    Ok((train, test))
}
