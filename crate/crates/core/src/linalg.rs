//! Robust and classical matrix statistics.
//!
//! Medians, the comedian matrix, the sample covariance matrix, Pearson
//! kurtosis and a symmetric eigendecomposition whose output order and
//! eigenvector signs are fully deterministic.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Entries below this magnitude are skipped when choosing an eigenvector's sign.
const SIGN_TOLERANCE: f64 = 1e-12;
const EIGEN_MAX_ITERATIONS: usize = 100_000;

/// Dense row-major `n × d` matrix of finite reals with `n, d ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix must have at least one row and one column, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::invalid(format!("row {i} has {} values, expected {cols}", row.len())));
            }
            data.extend_from_slice(row);
        }
        Matrix::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.row_iter().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::invalid(format!("row index {i} out of range")));
            }
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(indices.len(), self.cols, data)
    }

    pub fn select_columns(&self, indices: &[usize]) -> Result<Matrix> {
        if let Some(&j) = indices.iter().find(|&&j| j >= self.cols) {
            return Err(Error::invalid(format!("column index {j} out of range")));
        }
        let mut data = Vec::with_capacity(indices.len() * self.rows);
        for row in self.row_iter() {
            data.extend(indices.iter().map(|&j| row[j]));
        }
        Matrix::new(self.rows, indices.len(), data)
    }

    /// Applies `f` to every entry. The result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Matrix> {
        Matrix::new(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }
}

/// Square matrix with `S[i][j] == S[j][i]` bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds the matrix from the upper triangle; `entry` is called for `i <= j` only.
    pub fn from_upper(order: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("symmetric matrix order must be at least 1"));
        }
        let mut data = vec![0.0; order * order];
        for i in 0..order {
            for j in i..order {
                let v = entry(i, j);
                if !v.is_finite() {
                    return Err(Error::invalid(format!("non-finite entry at ({i}, {j})")));
                }
                data[i * order + j] = v;
                data[j * order + i] = v;
            }
        }
        Ok(SymmetricMatrix { order, data })
    }

    /// Accepts a full row-major matrix that is exactly symmetric.
    pub fn from_full(order: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != order * order {
            return Err(Error::invalid(format!(
                "expected {} values for order {order}, got {}",
                order * order,
                data.len()
            )));
        }
        for i in 0..order {
            for j in (i + 1)..order {
                if data[i * order + j] != data[j * order + i] {
                    return Err(Error::invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        SymmetricMatrix::from_upper(order, |i, j| data[i * order + j])
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn fingerprint(&self) -> String {
        let mut hasher = DefaultHasher::new();
        for v in &self.data {
            v.to_bits().hash(&mut hasher);
        }
        format!("order={} fro={:.6e} hash={:016x}", self.order, self.frobenius_norm(), hasher.finish())
    }
}

/// Eigenvectors (as columns) and signed eigenvalues, ordered by descending
/// absolute eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    order: usize,
    /// Column-major: eigenvector `k` occupies `vectors[k*order..(k+1)*order]`.
    vectors: Vec<f64>,
    values: Vec<f64>,
}

impl EigenPairs {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Raw (signed) eigenvalues.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.order..(k + 1) * self.order]
    }

    /// `U Λ Uᵀ` as a full row-major matrix.
    pub fn reconstruct(&self) -> Vec<f64> {
        let d = self.order;
        let mut out = vec![0.0; d * d];
        for (k, &lambda) in self.values.iter().enumerate() {
            let u = self.vector(k);
            for i in 0..d {
                let ui = lambda * u[i];
                for j in 0..d {
                    out[i * d + j] += ui * u[j];
                }
            }
        }
        out
    }
}

/// Median of a non-empty sequence; mean of the two middle order statistics
/// for even length.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("median of an empty sequence"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("median input contains non-finite values"));
    }
    let mut buf = values.to_vec();
    Ok(median_in_place(&mut buf))
}

/// Reorders `buf`. Caller guarantees a non-empty, finite slice.
pub(crate) fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    let mid = n / 2;
    let (lower, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (below + upper) / 2.0
    }
}

pub fn column_medians(x: &Matrix) -> Vec<f64> {
    let mut buf = vec![0.0; x.rows()];
    (0..x.cols())
        .map(|j| {
            for (slot, row) in buf.iter_mut().zip(x.row_iter()) {
                *slot = row[j];
            }
            median_in_place(&mut buf)
        })
        .collect()
}

pub fn column_means(x: &Matrix) -> Vec<f64> {
    let n = x.rows() as f64;
    (0..x.cols()).map(|j| x.row_iter().map(|r| r[j]).sum::<f64>() / n).collect()
}

/// Comedian matrix: entry `(i, j)` is the median over samples of the product
/// of median-centred columns `i` and `j`.
pub fn comedian_matrix(x: &Matrix) -> SymmetricMatrix {
    let n = x.rows();
    let medians = column_medians(x);
    let centered: Vec<Vec<f64>> =
        (0..x.cols()).map(|j| x.row_iter().map(|r| r[j] - medians[j]).collect()).collect();
    let mut buf = vec![0.0; n];
    SymmetricMatrix::from_upper(x.cols(), |i, j| {
        for ((slot, a), b) in buf.iter_mut().zip(&centered[i]).zip(&centered[j]) {
            *slot = a * b;
        }
        median_in_place(&mut buf)
    })
    .expect("products of finite values are finite")
}

/// Mean-centred sample covariance with divisor `n - 1`.
pub fn covariance_matrix(x: &Matrix) -> Result<SymmetricMatrix> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::invalid("covariance needs at least two samples"));
    }
    let means = column_means(x);
    let centered: Vec<Vec<f64>> =
        (0..x.cols()).map(|j| x.row_iter().map(|r| r[j] - means[j]).collect()).collect();
    let denom = (n - 1) as f64;
    SymmetricMatrix::from_upper(x.cols(), |i, j| {
        centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum::<f64>() / denom
    })
}

/// Eigendecomposition of a real symmetric (possibly indefinite) matrix.
///
/// Pairs are ordered by descending `|λ|`, ties broken by descending signed
/// `λ` and then by the solver's original index. Each eigenvector is flipped
/// so its first entry of non-negligible magnitude is positive.
pub fn sym_eigen(s: &SymmetricMatrix) -> Result<EigenPairs> {
    let d = s.order();
    let m = DMatrix::from_row_slice(d, d, s.as_slice());
    let eig =
        SymmetricEigen::try_new(m, f64::EPSILON, EIGEN_MAX_ITERATIONS).ok_or_else(|| Error::Numerical {
            message: "symmetric eigendecomposition did not converge".into(),
            fingerprint: s.fingerprint(),
        })?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            message: "symmetric eigendecomposition produced non-finite eigenvalues".into(),
            fingerprint: s.fingerprint(),
        });
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        lb.abs().total_cmp(&la.abs()).then(lb.total_cmp(&la)).then(a.cmp(&b))
    });

    let mut vectors = Vec::with_capacity(d * d);
    let mut values = Vec::with_capacity(d);
    for &k in &order {
        let col = eig.eigenvectors.column(k);
        let flip = col.iter().find(|v| v.abs() > SIGN_TOLERANCE).is_some_and(|v| *v < 0.0);
        vectors.extend(col.iter().map(|&v| if flip { -v } else { v }));
        values.push(eig.eigenvalues[k]);
    }
    Ok(EigenPairs { order: d, vectors, values })
}

/// Pearson (non-excess) kurtosis with its degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kurtosis {
    pub value: f64,
    /// Set when the sample has (numerically) zero variance; `value` is then 0.
    pub degenerate: bool,
}

/// Population kurtosis `μ₄ / σ⁴` with divide-by-`n` moments.
pub fn kurtosis(values: &[f64]) -> Result<Kurtosis> {
    if values.len() < 2 {
        return Err(Error::invalid("kurtosis needs at least two values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("kurtosis input contains non-finite values"));
    }
    const DEGENERATE: Kurtosis = Kurtosis { value: 0.0, degenerate: true };
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Ok(DEGENERATE);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m4) = values.iter().fold((0.0, 0.0), |(m2, m4), &v| {
        let d2 = (v - mean) * (v - mean);
        (m2 + d2, m4 + d2 * d2)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    // Variance lost in rounding relative to the data's magnitude.
    let scale = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let floor = 16.0 * f64::EPSILON * scale;
    if m2 <= floor * floor {
        return Ok(DEGENERATE);
    }
    Ok(Kurtosis { value: m4 / (m2 * m2), degenerate: false })
}
