//! CoMadOut detectors.
//!
//! Every variant shares the fitted basis (comedian or covariance PCA) and
//! the training projections; they differ only in how per-axis distances
//! are turned into a score:
//!
//! | variant | covariance twin | score per sample |
//! |---------|-----------------|------------------|
//! | `CMO`    | `PCA(NM)`  | mean of `max(0, |c_k| - τ_k)`, plus a hyperrectangle label |
//! | `CMO+`   | `PCA(r)`   | `Σ |c_k|` |
//! | `CMO+k`  | `PCA(k)`   | `Σ κ_k |c_k|` |
//! | `CMO+e`  | `PCA(e)`   | `Σ |c_k| / λ_k` |
//! | `CMO+ke` | `PCA(ke)`  | `Σ κ_k |c_k| / λ_k` |
//! | `CMOEns` | `PCA(Ens)` | max z-score over the four sums, labelled at `|z| > 1` |
//!
//! `τ_k = max(λ_k, ε) + m_k`, where `m_k` is the median absolute training
//! coordinate on axis `k`, and `λ_k` is floored at `ε` wherever it is
//! used as a width or divisor.

use std::fmt;
use std::str::FromStr;

use crate::decomposition::{self, CenterMode, MatrixSource, Projections, Subspace};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Minimum inlier half-width and eigenvalue divisor.
pub const EPSILON: f64 = 1e-6;
/// Ensemble sub-variants whose training score spread is at or below this contribute `z = 0`.
pub const ENSEMBLE_SIGMA_FLOOR: f64 = 1e-12;
/// Ensemble label threshold on `|z|`.
pub const Z_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scoring {
    /// Residual beyond the noise-margin hyperrectangle.
    Cmo,
    Plus,
    PlusK,
    PlusE,
    PlusKe,
    Ensemble,
}

impl Scoring {
    pub const ALL: [Scoring; 6] =
        [Scoring::Cmo, Scoring::Plus, Scoring::PlusK, Scoring::PlusE, Scoring::PlusKe, Scoring::Ensemble];

    /// Members of the ensemble, in a fixed order.
    pub const DISTANCE_SUMS: [Scoring; 4] = [Scoring::Plus, Scoring::PlusK, Scoring::PlusE, Scoring::PlusKe];

    fn weights(self) -> Option<(bool, bool)> {
        match self {
            Scoring::Plus => Some((false, false)),
            Scoring::PlusK => Some((true, false)),
            Scoring::PlusE => Some((false, true)),
            Scoring::PlusKe => Some((true, true)),
            Scoring::Cmo | Scoring::Ensemble => None,
        }
    }
}

/// A detector variant: scoring rule times scatter-matrix source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariantId {
    pub scoring: Scoring,
    pub source: MatrixSource,
}

impl VariantId {
    pub const fn new(scoring: Scoring, source: MatrixSource) -> Self {
        VariantId { scoring, source }
    }

    pub const fn comedian(scoring: Scoring) -> Self {
        VariantId::new(scoring, MatrixSource::Comedian)
    }

    pub const fn covariance(scoring: Scoring) -> Self {
        VariantId::new(scoring, MatrixSource::Covariance)
    }

    /// The six CoMadOut variants.
    pub fn comadout() -> Vec<VariantId> {
        Scoring::ALL.iter().map(|&s| VariantId::comedian(s)).collect()
    }

    /// All twelve variants, CoMadOut first.
    pub fn all() -> Vec<VariantId> {
        let mut v = VariantId::comadout();
        v.extend(Scoring::ALL.iter().map(|&s| VariantId::covariance(s)));
        v
    }

    pub fn name(self) -> &'static str {
        match (self.source, self.scoring) {
            (MatrixSource::Comedian, Scoring::Cmo) => "CMO",
            (MatrixSource::Comedian, Scoring::Plus) => "CMO+",
            (MatrixSource::Comedian, Scoring::PlusK) => "CMO+k",
            (MatrixSource::Comedian, Scoring::PlusE) => "CMO+e",
            (MatrixSource::Comedian, Scoring::PlusKe) => "CMO+ke",
            (MatrixSource::Comedian, Scoring::Ensemble) => "CMOEns",
            (MatrixSource::Covariance, Scoring::Cmo) => "PCA(NM)",
            (MatrixSource::Covariance, Scoring::Plus) => "PCA(r)",
            (MatrixSource::Covariance, Scoring::PlusK) => "PCA(k)",
            (MatrixSource::Covariance, Scoring::PlusE) => "PCA(e)",
            (MatrixSource::Covariance, Scoring::PlusKe) => "PCA(ke)",
            (MatrixSource::Covariance, Scoring::Ensemble) => "PCA(Ens)",
        }
    }

    pub fn center_mode(self) -> CenterMode {
        match self.source {
            MatrixSource::Comedian => CenterMode::Median,
            MatrixSource::Covariance => CenterMode::Mean,
        }
    }

    /// Whether the variant produces binary labels in addition to scores.
    pub fn has_labels(self) -> bool {
        matches!(self.scoring, Scoring::Cmo | Scoring::Ensemble)
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantId {
    type Err = Error;

    /// Accepts display names (`CMO+ke`, `PCA(Ens)`) and identifiers
    /// (`CMO_PLUS_KE`, `PCA_ENS`), case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase();
        let (source, rest) = if let Some(rest) = key.strip_prefix("CMO") {
            (MatrixSource::Comedian, rest)
        } else if let Some(rest) = key.strip_prefix("PCA") {
            (MatrixSource::Covariance, rest)
        } else {
            return Err(Error::invalid(format!("unknown variant '{s}'")));
        };
        let rest = rest.trim_start_matches(['_', '(']).trim_end_matches(')');
        let scoring = match (source, rest) {
            (MatrixSource::Comedian, "") | (MatrixSource::Covariance, "NM") => Scoring::Cmo,
            (MatrixSource::Comedian, "+" | "PLUS") | (MatrixSource::Covariance, "R" | "PLUS") => {
                Scoring::Plus
            }
            (_, "+K" | "PLUS_K" | "K") => Scoring::PlusK,
            (_, "+E" | "PLUS_E" | "E") => Scoring::PlusE,
            (_, "+KE" | "PLUS_KE" | "KE") => Scoring::PlusKe,
            (_, "ENS") => Scoring::Ensemble,
            _ => return Err(Error::invalid(format!("unknown variant '{s}'"))),
        };
        Ok(VariantId { scoring, source })
    }
}

/// Training mean and spread of each distance-sum score, in
/// [`Scoring::DISTANCE_SUMS`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

impl EnsembleStats {
    /// Mean and population standard deviation of each member's training scores.
    pub fn from_training(members: &[Vec<f64>; 4]) -> Self {
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for (slot, s) in members.iter().enumerate() {
            let n = s.len() as f64;
            let mu = s.iter().sum::<f64>() / n;
            mean[slot] = mu;
            std[slot] = (s.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n).sqrt();
        }
        EnsembleStats { mean, std }
    }

    /// Per sample, the largest z-score across the four members. Members
    /// with a spread at or below [`ENSEMBLE_SIGMA_FLOOR`] contribute 0.
    pub fn max_z(&self, members: &[Vec<f64>; 4]) -> Vec<f64> {
        let n = members[0].len();
        let mut best = vec![f64::NEG_INFINITY; n];
        for (slot, scores) in members.iter().enumerate() {
            let (mu, sigma) = (self.mean[slot], self.std[slot]);
            for (b, s) in best.iter_mut().zip(scores) {
                let z = if sigma <= ENSEMBLE_SIGMA_FLOOR { 0.0 } else { (s - mu) / sigma };
                *b = b.max(z);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub variant: VariantId,
    /// Higher means more outlying.
    pub scores: Vec<f64>,
    /// Present for `CMO` and `CMOEns` (and their covariance twins).
    pub labels: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub ratio: f64,
    /// Replace the CMO residual score with the softmax score.
    pub softmax_scoring: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { ratio: 1.0, softmax_scoring: false }
    }
}

/// A fitted detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub variant: VariantId,
    pub subspace: Subspace,
    /// `m_k`: median absolute training coordinate per axis.
    pub noise_margins: Vec<f64>,
    /// `τ_k = max(λ_k, ε) + m_k`.
    pub thresholds: Vec<f64>,
    pub kurtosis_weights: Vec<f64>,
    pub epsilon: f64,
    pub softmax_scoring: bool,
    /// Per-axis training medians of the eigenvalue-scaled residuals.
    pub softmax_medians: Vec<f64>,
    pub ensemble: Option<EnsembleStats>,
}

impl Model {
    pub fn fit(x: &Matrix, variant: VariantId, ratio: f64) -> Result<Model> {
        Model::fit_with(x, variant, FitOptions { ratio, ..FitOptions::default() })
    }

    pub fn fit_with(x: &Matrix, variant: VariantId, opts: FitOptions) -> Result<Model> {
        let subspace = decomposition::fit_subspace(x, opts.ratio, variant.source, variant.center_mode())?;
        let proj = decomposition::project(&subspace, x)?;
        let k = subspace.k;

        let noise_margins = noise_margins(&proj);
        let thresholds =
            subspace.abs_eigenvalues.iter().zip(&noise_margins).map(|(&l, &m)| l.max(EPSILON) + m).collect();
        let kurtosis_weights = if proj.samples() >= 2 { kurtosis_weights(&proj)? } else { vec![0.0; k] };

        let mut model = Model {
            variant,
            subspace,
            noise_margins,
            thresholds,
            kurtosis_weights,
            epsilon: EPSILON,
            softmax_scoring: opts.softmax_scoring,
            softmax_medians: Vec::new(),
            ensemble: None,
        };

        let scaled = model.scaled_residuals(&proj);
        model.softmax_medians = (0..k)
            .map(|a| {
                let mut col: Vec<f64> = scaled.iter().map(|r| r[a]).collect();
                linalg::median_in_place(&mut col)
            })
            .collect();

        if variant.scoring == Scoring::Ensemble {
            let train = Scoring::DISTANCE_SUMS.map(|scoring| model.distance_sums(&proj, scoring));
            model.ensemble = Some(EnsembleStats::from_training(&train));
        }
        Ok(model)
    }

    pub fn k(&self) -> usize {
        self.subspace.k
    }

    /// `max(λ_k, ε)`.
    pub fn floored_eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.subspace.abs_eigenvalues.iter().map(|l| l.max(self.epsilon))
    }

    pub fn project(&self, x: &Matrix) -> Result<Projections> {
        decomposition::project(&self.subspace, x)
    }

    /// `true` marks an outlier: the sample leaves `[-τ_k, τ_k]` on at least one axis.
    pub fn predict_cmo_labels(&self, x: &Matrix) -> Result<Vec<bool>> {
        let proj = self.project(x)?;
        Ok(self.cmo_labels(&proj))
    }

    /// Mean over axes of the non-negative residual `|c_k| - τ_k`.
    pub fn score_cmo(&self, x: &Matrix) -> Result<Vec<f64>> {
        let proj = self.project(x)?;
        Ok(self.cmo_scores(&proj))
    }

    /// Largest per-axis softmax value of the median-corrected, `√λ`-scaled
    /// residuals. Always in `(0, 1]`.
    pub fn score_softmax(&self, x: &Matrix) -> Result<Vec<f64>> {
        let proj = self.project(x)?;
        Ok(self.softmax_scores(&proj))
    }

    /// One of the four distance-sum scores.
    pub fn score_variant(&self, x: &Matrix, scoring: Scoring) -> Result<Vec<f64>> {
        if scoring.weights().is_none() {
            return Err(Error::invalid(format!(
                "{scoring:?} is not a distance-sum variant (expected CMO+, CMO+k, CMO+e or CMO+ke)"
            )));
        }
        let proj = self.project(x)?;
        Ok(self.distance_sums(&proj, scoring))
    }

    pub fn score_ensemble(&self, x: &Matrix) -> Result<ScoreReport> {
        let stats = self.ensemble.as_ref().ok_or_else(|| {
            Error::invalid(format!("model for {} carries no ensemble statistics", self.variant))
        })?;
        let proj = self.project(x)?;
        let members = Scoring::DISTANCE_SUMS.map(|scoring| self.distance_sums(&proj, scoring));
        let scores = stats.max_z(&members);
        let labels = scores.iter().map(|z| z.abs() > Z_THRESHOLD).collect();
        Ok(ScoreReport { variant: self.variant, scores, labels: Some(labels) })
    }

    /// Scores `x` with the model's own variant.
    pub fn score(&self, x: &Matrix) -> Result<ScoreReport> {
        match self.variant.scoring {
            Scoring::Ensemble => self.score_ensemble(x),
            Scoring::Cmo => {
                let proj = self.project(x)?;
                let scores =
                    if self.softmax_scoring { self.softmax_scores(&proj) } else { self.cmo_scores(&proj) };
                Ok(ScoreReport { variant: self.variant, scores, labels: Some(self.cmo_labels(&proj)) })
            }
            scoring => Ok(ScoreReport {
                variant: self.variant,
                scores: self.score_variant(x, scoring)?,
                labels: None,
            }),
        }
    }

    fn cmo_labels(&self, proj: &Projections) -> Vec<bool> {
        proj.sample_iter().map(|c| c.iter().zip(&self.thresholds).any(|(v, t)| v.abs() > *t)).collect()
    }

    fn cmo_scores(&self, proj: &Projections) -> Vec<f64> {
        let k = self.k() as f64;
        proj.sample_iter()
            .map(|c| c.iter().zip(&self.thresholds).map(|(v, t)| (v.abs() - t).max(0.0)).sum::<f64>() / k)
            .collect()
    }

    fn scaled_residuals(&self, proj: &Projections) -> Vec<Vec<f64>> {
        let roots: Vec<f64> = self.floored_eigenvalues().map(f64::sqrt).collect();
        proj.sample_iter()
            .map(|c| {
                c.iter()
                    .zip(&self.thresholds)
                    .zip(&roots)
                    .map(|((v, t), r)| (v.abs() - t).max(0.0) / r)
                    .collect()
            })
            .collect()
    }

    fn softmax_scores(&self, proj: &Projections) -> Vec<f64> {
        self.scaled_residuals(proj)
            .into_iter()
            .map(|row| {
                let shifted: Vec<f64> =
                    row.iter().zip(&self.softmax_medians).map(|(s, m)| (s - m).max(0.0)).collect();
                let top = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let denom: f64 = shifted.iter().map(|s| (s - top).exp()).sum();
                // The largest softmax entry is exp(0) / denom.
                1.0 / denom
            })
            .collect()
    }

    fn distance_sums(&self, proj: &Projections, scoring: Scoring) -> Vec<f64> {
        let (use_kappa, use_lambda) = scoring.weights().expect("distance-sum variant");
        let weights: Vec<f64> = self
            .kurtosis_weights
            .iter()
            .zip(self.floored_eigenvalues())
            .map(|(&kappa, lambda)| {
                let w = if use_kappa { kappa } else { 1.0 };
                if use_lambda {
                    w / lambda
                } else {
                    w
                }
            })
            .collect();
        proj.sample_iter().map(|c| c.iter().zip(&weights).map(|(v, w)| w * v.abs()).sum()).collect()
    }
}

/// `m_k`: median of the absolute coordinates on each axis.
pub fn noise_margins(proj: &Projections) -> Vec<f64> {
    (0..proj.components())
        .map(|a| {
            let mut abs: Vec<f64> = proj.axis(a).iter().map(|v| v.abs()).collect();
            linalg::median_in_place(&mut abs)
        })
        .collect()
}

/// Kurtosis of the signed coordinates on each axis; degenerate axes get 0.
pub fn kurtosis_weights(proj: &Projections) -> Result<Vec<f64>> {
    (0..proj.components()).map(|a| linalg::kurtosis(&proj.axis(a)).map(|k| k.value)).collect()
}
