//! coMAD-PCA and covariance PCA: fitting a K-component basis and
//! projecting samples onto it.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Scatter matrix the basis is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MatrixSource {
    Comedian,
    Covariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CenterMode {
    Median,
    Mean,
}

impl fmt::Display for MatrixSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixSource::Comedian => "comedian",
            MatrixSource::Covariance => "covariance",
        })
    }
}

impl FromStr for CenterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "median" => Ok(CenterMode::Median),
            "mean" => Ok(CenterMode::Mean),
            other => Err(Error::invalid(format!("unknown center mode '{other}'"))),
        }
    }
}

/// A fitted principal basis: the top `k` eigenpairs of the scatter matrix
/// together with the centering vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    /// `k` unit vectors of length `d`.
    pub components: Vec<Vec<f64>>,
    /// `|λ|`, non-increasing.
    pub abs_eigenvalues: Vec<f64>,
    pub raw_eigenvalues: Vec<f64>,
    pub center: Vec<f64>,
    pub k: usize,
    /// Number of possible components, equal to the feature count.
    pub total: usize,
    pub source: MatrixSource,
    pub center_mode: CenterMode,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// Signed coordinates of samples along each retained component.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections {
    n: usize,
    k: usize,
    coords: Vec<f64>,
}

impl Projections {
    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.coords[i * self.k + k]
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.coords[i * self.k..(i + 1) * self.k]
    }

    pub fn sample_iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.k)
    }

    pub fn axis(&self, k: usize) -> Vec<f64> {
        self.sample_iter().map(|s| s[k]).collect()
    }
}

/// Number of components for a fraction of `d`: `round(ratio * d)` with ties
/// away from zero, clamped to `[1, d]`.
pub fn select_k(d: usize, ratio: f64) -> Result<usize> {
    if d == 0 {
        return Err(Error::invalid("feature count must be positive"));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("component ratio {ratio} is outside (0, 1]")));
    }
    Ok(((ratio * d as f64).round() as usize).clamp(1, d))
}

/// Fits the basis. The scatter matrix is shift invariant, so it is computed
/// from `x` directly; `center_mode` only decides the stored origin.
pub fn fit_subspace(
    x: &Matrix,
    ratio: f64,
    source: MatrixSource,
    center_mode: CenterMode,
) -> Result<Subspace> {
    let d = x.cols();
    let k = select_k(d, ratio)?;
    let scatter = match source {
        MatrixSource::Comedian => linalg::comedian_matrix(x),
        MatrixSource::Covariance => linalg::covariance_matrix(x)?,
    };
    let center = match center_mode {
        CenterMode::Median => linalg::column_medians(x),
        CenterMode::Mean => linalg::column_means(x),
    };
    let eig = linalg::sym_eigen(&scatter)?;
    let raw_eigenvalues = eig.values()[..k].to_vec();
    Ok(Subspace {
        components: (0..k).map(|c| eig.vector(c).to_vec()).collect(),
        abs_eigenvalues: raw_eigenvalues.iter().map(|v| v.abs()).collect(),
        raw_eigenvalues,
        center,
        k,
        total: d,
        source,
        center_mode,
    })
}

/// `coords[i][k] = (x_i - center) · u_k`.
pub fn project(sub: &Subspace, x: &Matrix) -> Result<Projections> {
    if x.cols() != sub.dim() {
        return Err(Error::DimensionMismatch { expected: sub.dim(), found: x.cols() });
    }
    let mut centered = vec![0.0; sub.dim()];
    let mut coords = Vec::with_capacity(x.rows() * sub.k);
    for row in x.row_iter() {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&sub.center) {
            *c = v - m;
        }
        coords
            .extend(sub.components.iter().map(|u| u.iter().zip(&centered).map(|(a, b)| a * b).sum::<f64>()));
    }
    Ok(Projections { n: x.rows(), k: sub.k, coords })
}
