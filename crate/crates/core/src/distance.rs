//! Pairwise dissimilarities between representation rows.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Symmetric, non-negative, zero-diagonal `m x m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    d: DMatrix<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry (to 1e-12), a zero diagonal and non-negative finite entries.
    pub fn new(d: DMatrix<f64>) -> Result<Self> {
        let m = d.nrows();
        if d.ncols() != m {
            return Err(Error::Argument("distance matrix must be square".into()));
        }
        for i in 0..m {
            if d[(i, i)] != 0.0 {
                return Err(Error::Argument(format!("d({i},{i}) is not zero")));
            }
            for j in 0..i {
                let (a, b) = (d[(i, j)], d[(j, i)]);
                if !(a.is_finite() && a >= 0.0) || (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::Argument(format!(
                        "d({i},{j}) must be finite, non-negative and symmetric"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { d })
    }

    /// Build from a pairwise function evaluated on `i < j`.
    pub fn from_pairs(m: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
        let values: Vec<f64> = pairs.par_iter().map(|&(i, j)| f(i, j)).collect();
        let mut d = DMatrix::zeros(m, m);
        for (&(i, j), v) in pairs.iter().zip(values) {
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
        DistanceMatrix { d }
    }

    pub fn m(&self) -> usize {
        self.d.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }
}

/// `d(i,j) = ||x_i - x_j||_2` over the rows of `x`.
pub fn euclidean_matrix(x: &DMatrix<f64>) -> DistanceMatrix {
    DistanceMatrix::from_pairs(x.nrows(), |i, j| (x.row(i) - x.row(j)).norm())
}

/// Unconstrained dynamic time warping with absolute-difference cost.
pub fn dtw_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Argument("DTW needs non-empty series".into()));
    }
    let mut prev = vec![f64::INFINITY; y.len() + 1];
    let mut cur = vec![f64::INFINITY; y.len() + 1];
    prev[0] = 0.0;
    for &xi in x {
        cur[0] = f64::INFINITY;
        for (j, &yj) in y.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = (xi - yj).abs() + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[y.len()])
}

/// DTW distances between the rows of `x`.
pub fn dtw_matrix(x: &DMatrix<f64>) -> Result<DistanceMatrix> {
    if x.ncols() == 0 {
        return Err(Error::Argument("DTW needs non-empty series".into()));
    }
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(DistanceMatrix::from_pairs(x.nrows(), |i, j| {
        dtw_distance(&rows[i], &rows[j]).expect("non-empty rows")
    }))
}
