//! Forecast accuracy (RMSSE), expanding-window plans, and the multiple
//! comparison with the best (MCB) on mean ranks.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Root mean squared error scaled by the in-sample seasonal-naive error:
///
/// `sqrt( mean_k (y_{T+k} - yhat_{T+k})^2 / mean_{t=s+1..T} (y_t - y_{t-s})^2 )`.
pub fn rmsse(train: &[f64], actual: &[f64], forecast: &[f64], s: usize) -> Result<f64> {
    let scale = seasonal_scale(train, s)?;
    rmsse_scaled(actual, forecast, scale)
}

/// Mean squared seasonal difference of a training series.
pub fn seasonal_scale(train: &[f64], s: usize) -> Result<f64> {
    if s == 0 || train.len() <= s {
        return Err(Error::Argument(format!(
            "training length {} must exceed the seasonal period {s}",
            train.len()
        )));
    }
    let n = (train.len() - s) as f64;
    let scale = train.windows(s + 1).map(|w| (w[s] - w[0]).powi(2)).sum::<f64>() / n;
    if scale <= 0.0 {
        return Err(Error::Scale(
            "training series repeats itself with the seasonal period; RMSSE is undefined".into(),
        ));
    }
    Ok(scale)
}

pub fn rmsse_scaled(actual: &[f64], forecast: &[f64], scale: f64) -> Result<f64> {
    if actual.len() != forecast.len() || actual.is_empty() {
        return Err(Error::Argument(format!(
            "actual ({}) and forecast ({}) lengths differ or are empty",
            actual.len(),
            forecast.len()
        )));
    }
    let mse = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| (a - f).powi(2))
        .sum::<f64>()
        / actual.len() as f64;
    Ok((mse / scale).sqrt())
}

/// Expanding-window design: window `w` trains on the first `initial + w*step`
/// observations and forecasts the next `horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct WindowPlan {
    pub initial: usize,
    pub step: usize,
    pub horizon: usize,
    pub total: usize,
}

impl WindowPlan {
    pub fn new(total: usize, initial: usize, horizon: usize) -> Result<Self> {
        let plan = WindowPlan {
            initial,
            step: 1,
            horizon,
            total,
        };
        plan.n_windows()?;
        Ok(plan)
    }

    pub fn n_windows(&self) -> Result<usize> {
        if self.horizon == 0 || self.step == 0 || self.initial == 0 {
            return Err(Error::Argument("initial length, step and horizon must be positive".into()));
        }
        if self.total < self.initial + self.horizon {
            return Err(Error::Argument(format!(
                "series of length {} cannot hold {} training and {} test points",
                self.total, self.initial, self.horizon
            )));
        }
        Ok((self.total - self.initial - self.horizon) / self.step + 1)
    }

    pub fn train_len(&self, window: usize) -> usize {
        self.initial + window * self.step
    }
}

/// Ranks of one row, ascending, ties sharing their average rank.
pub fn average_ranks(row: &[f64]) -> Vec<f64> {
    let n = row.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && row[idx[j + 1]] == row[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Standard normal density and distribution.
fn std_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(|| Normal::new(0.0, 1.0).expect("valid normal"))
}

/// `P(R <= q)` for the range of `k` independent standard normals:
/// `k * int phi(z) [Phi(z+q) - Phi(z)]^(k-1) dz`, by composite Simpson.
fn range_cdf(q: f64, k: usize) -> f64 {
    let n = std_normal();
    let (lo, hi, steps) = (-9.0, 9.0, 3600usize);
    let h = (hi - lo) / steps as f64;
    let f = |z: f64| n.pdf(z) * (n.cdf(z + q) - n.cdf(z)).powi(k as i32 - 1);
    let mut acc = f(lo) + f(hi);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    (k as f64 * acc * h / 3.0).min(1.0)
}

fn compute_quantile(alpha: f64, k: usize) -> f64 {
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (0.0, 12.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if range_cdf(mid, k) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Upper-`alpha` quantile of the studentized range for `k` groups and
/// infinite degrees of freedom. Values for `k <= 120` and
/// `alpha in {0.01, 0.05, 0.10}` are memoised on first use.
pub fn studentized_range_quantile(alpha: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Argument("studentized range needs at least two groups".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!("alpha {alpha} outside (0, 1)")));
    }
    let tabulated = [0.01, 0.05, 0.10].iter().any(|a| (a - alpha).abs() < 1e-15) && k <= 120;
    if !tabulated {
        return Ok(compute_quantile(alpha, k));
    }
    static TABLE: OnceLock<Mutex<HashMap<(u64, usize), f64>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (alpha.to_bits(), k);
    if let Some(v) = table.lock().expect("quantile table").get(&key) {
        return Ok(*v);
    }
    let v = compute_quantile(alpha, k);
    table.lock().expect("quantile table").insert(key, v);
    Ok(v)
}

/// Mean ranks with their MCB intervals.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Mcb {
    pub alpha: f64,
    pub mean_ranks: Vec<f64>,
    /// `0.5 * q * sqrt(J (J+1) / (6 N))`.
    pub half_width: f64,
    pub q: f64,
    /// Index of the approach with the lowest mean rank (first on ties).
    pub best: usize,
    /// Whether each interval overlaps the best approach's interval.
    pub indistinguishable: Vec<bool>,
}

impl Mcb {
    pub fn interval(&self, j: usize) -> (f64, f64) {
        (self.mean_ranks[j] - self.half_width, self.mean_ranks[j] + self.half_width)
    }
}

/// Multiple comparison with the best on an `N x J` score matrix (lower is better).
pub fn mcb(scores: &DMatrix<f64>, alpha: f64) -> Result<Mcb> {
    let (n, j) = scores.shape();
    if n < 2 || j < 2 {
        return Err(Error::Argument(format!(
            "MCB needs at least 2 windows and 2 approaches, got {n} x {j}"
        )));
    }
    let mut mean_ranks = vec![0.0; j];
    for row in scores.row_iter() {
        let r: Vec<f64> = row.iter().copied().collect();
        for (m, v) in mean_ranks.iter_mut().zip(average_ranks(&r)) {
            *m += v;
        }
    }
    mean_ranks.iter_mut().for_each(|m| *m /= n as f64);
    let q = studentized_range_quantile(alpha, j)?;
    let half_width = 0.5 * q * ((j * (j + 1)) as f64 / (6.0 * n as f64)).sqrt();
    let best = (0..j)
        .min_by(|&a, &b| mean_ranks[a].total_cmp(&mean_ranks[b]).then(a.cmp(&b)))
        .expect("j >= 2");
    let upper_best = mean_ranks[best] + half_width;
    let indistinguishable = mean_ranks.iter().map(|r| r - half_width <= upper_best).collect();
    Ok(Mcb {
        alpha,
        mean_ranks,
        half_width,
        q,
        best,
        indistinguishable,
    })
}
