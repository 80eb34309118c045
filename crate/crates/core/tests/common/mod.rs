#![allow(dead_code)]

use comadout::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    Matrix::new(n, d, (0..n * d).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap()
}

/// Random orthogonal matrix from Gram-Schmidt on Gaussian-ish columns, row-major.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    while basis.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// `x · qᵀ`: each row rotated by `q`.
pub fn rotate_rows(x: &Matrix, q: &[Vec<f64>]) -> Matrix {
    let d = x.cols();
    let mut out = Vec::with_capacity(x.rows() * d);
    for row in x.row_iter() {
        for qr in q {
            out.push(qr.iter().zip(row).map(|(a, b)| a * b).sum());
        }
    }
    Matrix::new(x.rows(), d, out).unwrap()
}

pub fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    idx
}
