//! Base-error covariance estimation and trace-minimizing reconciliation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovMethod {
    /// `W = I` (ordinary least squares).
    Identity,
    /// `W = diag(sample variances)` (weighted least squares).
    Diagonal,
    /// Diagonal-target shrinkage of the sample covariance (MinT).
    #[default]
    Shrinkage,
}

impl CovMethod {
    pub fn name(&self) -> &'static str {
        match self {
            CovMethod::Identity => "ols",
            CovMethod::Diagonal => "wls",
            CovMethod::Shrinkage => "mint",
        }
    }
}

impl fmt::Display for CovMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" | "identity" => Ok(CovMethod::Identity),
            "wls" | "diagonal" => Ok(CovMethod::Diagonal),
            "mint" | "shrinkage" | "mint_shrink" => Ok(CovMethod::Shrinkage),
            other => Err(Error::Config(format!(
                "unknown reconciliation method '{other}' (expected mint, wls or ols)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CovEstimate {
    pub w: DMatrix<f64>,
    /// Shrinkage intensity (1 for diagonal, 0 for identity).
    pub lambda: f64,
    pub method: CovMethod,
    /// Diagonal jitter added by [`reconcile`] callers when `w` was not
    /// numerically positive definite (0 when untouched).
    pub jitter: f64,
}

impl CovEstimate {
    pub fn identity(n: usize) -> Self {
        CovEstimate {
            w: DMatrix::identity(n, n),
            lambda: 0.0,
            method: CovMethod::Identity,
            jitter: 0.0,
        }
    }

    pub fn from_matrix(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::Argument(format!("W is {}x{}, not square", w.nrows(), w.ncols())));
        }
        Ok(CovEstimate {
            w,
            lambda: 0.0,
            method: CovMethod::Shrinkage,
            jitter: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    /// Cholesky factor of `W`, adding `1e-10 * trace(W) / n` to the diagonal
    /// once if the plain factorization fails.
    fn factor(&mut self) -> Result<Cholesky<f64, Dyn>> {
        if let Some(c) = Cholesky::new(self.w.clone()) {
            return Ok(c);
        }
        let n = self.n();
        let jitter = 1e-10 * self.w.trace() / n as f64;
        let mut w = self.w.clone();
        for i in 0..n {
            w[(i, i)] += jitter;
        }
        match Cholesky::new(w.clone()) {
            Some(c) => {
                self.w = w;
                self.jitter = jitter;
                Ok(c)
            }
            None => Err(Error::Numerical {
                message: "W is not positive definite even after jitter".into(),
                condition: condition_estimate(&self.w),
            }),
        }
    }
}

/// Ratio of extreme absolute eigenvalues of a symmetric matrix.
fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn centered(residuals: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = residuals.clone();
    for mut col in x.column_iter_mut() {
        let mu = col.mean();
        col.add_scalar_mut(-mu);
    }
    x
}

/// Shrinkage intensity toward the diagonal, computed on sample correlations:
///
/// `lambda = sum_{i!=j} Var(r_ij) / sum_{i!=j} r_ij^2`, clamped to `[0, 1]`,
/// with `w_kij = z_ki z_kj` on unit-variance columns, `r_ij = T/(T-1) mean_k w_kij`
/// and `Var(r_ij) = T/(T-1)^3 sum_k (w_kij - mean w_ij)^2`.
fn shrinkage_lambda(x: &DMatrix<f64>, sd: &[f64]) -> f64 {
    let (t, n) = x.shape();
    let tf = t as f64;
    let z = DMatrix::from_fn(t, n, |k, i| x[(k, i)] / sd[i]);
    let z2 = z.map(|v| v * v);
    let cross = z.transpose() * &z; // sum_k w_kij
    let cross2 = z2.transpose() * &z2; // sum_k w_kij^2
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let wbar = cross[(i, j)] / tf;
            let ss = (cross2[(i, j)] - tf * wbar * wbar).max(0.0);
            num += tf / (tf - 1.0).powi(3) * ss;
            let r = tf / (tf - 1.0) * wbar;
            den += r * r;
        }
    }
    if den <= 0.0 {
        return 1.0;
    }
    (num / den).clamp(0.0, 1.0)
}

/// Estimate `W` from a `T x n` residual matrix.
pub fn estimate_w(residuals: &DMatrix<f64>, method: CovMethod) -> Result<CovEstimate> {
    let (t, n) = residuals.shape();
    if method == CovMethod::Identity {
        return Ok(CovEstimate::identity(n));
    }
    if t < 4 {
        return Err(Error::Argument(format!("need at least 4 residual rows, got {t}")));
    }
    if residuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("residual matrix contains non-finite values".into()));
    }
    let x = centered(residuals);
    let cov = (x.transpose() * &x) / (t as f64 - 1.0);
    let mut sd = Vec::with_capacity(n);
    for i in 0..n {
        let v = cov[(i, i)];
        if v <= 0.0 {
            return Err(Error::DegenerateSeries(format!(
                "residual column {i} has zero variance"
            )));
        }
        sd.push(v.sqrt());
    }
    let (w, lambda) = match method {
        CovMethod::Diagonal => (DMatrix::from_diagonal(&cov.diagonal()), 1.0),
        CovMethod::Shrinkage => {
            let lambda = shrinkage_lambda(&x, &sd);
            let mut w = cov * (1.0 - lambda);
            for (i, s) in sd.iter().enumerate() {
                w[(i, i)] = s * s;
            }
            (w, lambda)
        }
        CovMethod::Identity => unreachable!(),
    };
    Ok(CovEstimate {
        w,
        lambda,
        method,
        jitter: 0.0,
    })
}

/// Reconciled forecasts: `ytilde = S btilde` with `btilde` the generalized
/// least-squares solution of `S b ~ yhat` under weight `W^{-1}`.
#[derive(Debug, Clone)]
pub struct Reconciled {
    /// `n x h`.
    pub ytilde: DMatrix<f64>,
    /// `m x h`.
    pub btilde: DMatrix<f64>,
    /// Jitter that had to be added to `W` (0 when none).
    pub jitter: f64,
}

/// Reconcile each column of the `n x h` base-forecast matrix `yhat`.
pub fn reconcile(s: &DMatrix<f64>, w: &CovEstimate, yhat: &DMatrix<f64>) -> Result<Reconciled> {
    let (n, m) = s.shape();
    if w.n() != n || yhat.nrows() != n {
        return Err(Error::Argument(format!(
            "dimension mismatch: S is {n}x{m}, W is {0}x{0}, yhat has {1} rows",
            w.n(),
            yhat.nrows()
        )));
    }
    let mut w = w.clone();
    let chol_w = w.factor()?;
    // whiten: A = L^{-1} S, z = L^{-1} yhat, so S'W^{-1}S = A'A and S'W^{-1}yhat = A'z
    let l = chol_w.l();
    let a = l
        .solve_lower_triangular(s)
        .ok_or_else(|| Error::Numerical {
            message: "triangular solve with the factor of W failed".into(),
            condition: condition_estimate(&w.w),
        })?;
    let z = l
        .solve_lower_triangular(yhat)
        .expect("factor already proven non-singular");
    let normal = a.transpose() * &a;
    let rhs = a.transpose() * z;
    let chol_n = Cholesky::new(normal.clone()).ok_or_else(|| Error::Numerical {
        message: "normal matrix S'W^-1 S is singular".into(),
        condition: condition_estimate(&normal),
    })?;
    let btilde = chol_n.solve(&rhs);
    let ytilde = s * &btilde;
    Ok(Reconciled {
        ytilde,
        btilde,
        jitter: w.jitter,
    })
}

/// Single-horizon convenience wrapper around [`reconcile`].
pub fn reconcile_vector(
    s: &DMatrix<f64>,
    w: &CovEstimate,
    yhat: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let y = DMatrix::from_column_slice(yhat.len(), 1, yhat.as_slice());
    let r = reconcile(s, w, &y)?;
    Ok((r.ytilde.column(0).into_owned(), r.btilde.column(0).into_owned()))
}
