//! Clustering inputs built from the bottom series: standardized raw series,
//! standardized one-step residuals, and feature vectors of either, with an
//! optional PCA projection.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::baseforecast::{fit_ets_spec, EtsSpec};
use crate::error::{Error, Result};

/// `(x - mean) / sd` with the unbiased sample standard deviation.
pub fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateSeries("need at least two values to standardize".into()));
    }
    let mu = mean(x);
    let sd = (x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if sd == 0.0 || sd <= 1e-12 * mu.abs() || !sd.is_finite() {
        return Err(Error::DegenerateSeries("series has zero variance".into()));
    }
    Ok(x.iter().map(|v| (v - mu) / sd).collect())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (0 for fewer than two values).
fn var(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let mu = mean(x);
    x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Sample autocorrelations at lags `1..=max_lag` (0 beyond the series length).
fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mu = mean(x);
    let denom: f64 = x.iter().map(|v| (v - mu).powi(2)).sum();
    (1..=max_lag)
        .map(|lag| {
            if lag >= n || denom == 0.0 {
                return 0.0;
            }
            (0..n - lag).map(|t| (x[t] - mu) * (x[t + lag] - mu)).sum::<f64>() / denom
        })
        .collect()
}

/// `acf1, acf2, acf_s, sum of squared acf over lags 1..=10`.
fn acf_stats(x: &[f64], s: usize) -> [f64; 4] {
    let max_lag = s.max(10);
    let r = acf(x, max_lag);
    let acf10 = r.iter().take(10).map(|v| v * v).sum();
    [r[0], r[1], r[s - 1], acf10]
}

/// Classical additive decomposition on the interior points where the
/// centred moving average is defined.
struct Decomposition {
    /// Observations on the interior.
    y: Vec<f64>,
    trend: Vec<f64>,
    seasonal: Vec<f64>,
    remainder: Vec<f64>,
}

fn moving_average_weights(s: usize) -> Vec<f64> {
    if s == 1 {
        vec![0.2; 5]
    } else if s.is_multiple_of(2) {
        let mut w = vec![1.0 / s as f64; s + 1];
        w[0] = 0.5 / s as f64;
        w[s] = 0.5 / s as f64;
        w
    } else {
        vec![1.0 / s as f64; s]
    }
}

fn decompose(y: &[f64], s: usize) -> Decomposition {
    let w = moving_average_weights(s);
    let q = w.len() / 2;
    let n = y.len();
    let interior: Vec<usize> = (q..n - q).collect();
    let trend: Vec<f64> = interior
        .iter()
        .map(|&t| w.iter().enumerate().map(|(i, wi)| wi * y[t + i - q]).sum())
        .collect();
    let detrended: Vec<f64> = interior.iter().zip(&trend).map(|(&t, tr)| y[t] - tr).collect();
    let mut index = vec![0.0; s];
    if s > 1 {
        let mut count = vec![0usize; s];
        for (&t, d) in interior.iter().zip(&detrended) {
            index[t % s] += d;
            count[t % s] += 1;
        }
        for (v, c) in index.iter_mut().zip(&count) {
            *v /= (*c).max(1) as f64;
        }
        let mu = mean(&index);
        index.iter_mut().for_each(|v| *v -= mu);
    }
    let seasonal: Vec<f64> = interior.iter().map(|&t| index[t % s]).collect();
    let remainder = detrended.iter().zip(&seasonal).map(|(d, sv)| d - sv).collect();
    Decomposition {
        y: interior.iter().map(|&t| y[t]).collect(),
        trend,
        seasonal,
        remainder,
    }
}

/// `max(0, 1 - Var(remainder) / Var(other))`; 0 when `other` is flat
/// relative to the series scale `total`.
fn strength(remainder: &[f64], other: &[f64], total: f64) -> f64 {
    let v = var(other);
    if v <= 1e-12 * total {
        return 0.0;
    }
    (1.0 - var(remainder) / v).max(0.0)
}

/// Projections of the trend on orthonormal degree-1 and degree-2 polynomials.
fn linearity_curvature(trend: &[f64]) -> (f64, f64) {
    let n = trend.len();
    let x: Vec<f64> = (0..n).map(|i| i as f64 - (n as f64 - 1.0) / 2.0).collect();
    let norm1 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let p1: Vec<f64> = x.iter().map(|v| v / norm1).collect();
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let sq_mean = mean(&sq);
    let proj = sq.iter().zip(&p1).map(|(a, b)| a * b).sum::<f64>();
    let raw2: Vec<f64> = sq.iter().zip(&p1).map(|(a, b)| a - sq_mean - proj * b).collect();
    let norm2 = raw2.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dot = |p: &[f64]| trend.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
    let lin = dot(&p1);
    let curv = if norm2 > 0.0 {
        dot(&raw2.iter().map(|v| v / norm2).collect::<Vec<_>>())
    } else {
        0.0
    };
    (lin, curv)
}

/// Variance of the leave-one-out variances of `x`.
fn spikiness(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 3 {
        return 0.0;
    }
    let sum: f64 = x.iter().sum();
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    let m = (n - 1) as f64;
    let loo: Vec<f64> = x
        .iter()
        .map(|v| {
            let s = sum - v;
            let ss = sum_sq - v * v;
            (ss - s * s / m) / (m - 1.0)
        })
        .collect();
    var(&loo)
}

/// Shannon entropy of the normalized periodogram, divided by its maximum.
fn spectral_entropy(x: &[f64]) -> f64 {
    let n = x.len();
    let mu = mean(x);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mu, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf[1..=n / 2].iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if total <= 0.0 || power.len() < 2 {
        return 0.0;
    }
    let h: f64 = power
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| {
            let q = p / total;
            -q * q.ln()
        })
        .sum();
    h / (power.len() as f64).ln()
}

/// Variance of block variances and of block means over complete blocks.
fn lumpiness_stability(x: &[f64], width: usize) -> (f64, f64) {
    let blocks: Vec<&[f64]> = x.chunks_exact(width).collect();
    if blocks.len() < 2 {
        return (0.0, 0.0);
    }
    let vars: Vec<f64> = blocks.iter().map(|b| var(b)).collect();
    let means: Vec<f64> = blocks.iter().map(|b| mean(b)).collect();
    (var(&vars), var(&means))
}

fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn crossing_points(x: &[f64]) -> f64 {
    let mid = median(x);
    x.windows(2).filter(|w| (w[0] <= mid) != (w[1] <= mid)).count() as f64
}

/// Longest run of consecutive values falling in the same of ten equal-width bins.
fn flat_spots(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if hi <= lo {
        return x.len() as f64;
    }
    let bin = |v: f64| (((v - lo) / (hi - lo) * 10.0).floor() as usize).min(9);
    let mut best = 1;
    let mut run = 1;
    for w in x.windows(2) {
        if bin(w[0]) == bin(w[1]) {
            run += 1;
            best = best.max(run);
        } else {
            run = 1;
        }
    }
    best as f64
}

pub const FEATURE_NAMES: [&str; 24] = [
    "x_mean",
    "x_var",
    "x_acf1",
    "x_acf2",
    "x_acf_s",
    "x_acf10",
    "diff1_acf1",
    "diff1_acf2",
    "diff1_acf_s",
    "diff1_acf10",
    "trend",
    "seasonal_strength",
    "spike",
    "linearity",
    "curvature",
    "e_acf1",
    "entropy",
    "lumpiness",
    "stability",
    "crossing_points",
    "flat_spots",
    "ann_alpha",
    "aan_alpha",
    "aan_beta",
];

/// Named feature values for one series, in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn names(&self) -> &'static [&'static str] {
        &FEATURE_NAMES
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.values[i])
    }
}

/// Shortest series [`compute_features`] accepts for period `s`.
pub fn min_feature_length(s: usize) -> usize {
    (3 * s).max(2 * s + 4).max(12)
}

pub fn compute_features(y: &[f64], s: usize) -> Result<FeatureVector> {
    if s == 0 {
        return Err(Error::Feature("seasonal period must be positive".into()));
    }
    let min = min_feature_length(s);
    if y.len() < min {
        return Err(Error::Feature(format!(
            "series of length {} is shorter than the minimum {min}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Feature("series contains non-finite values".into()));
    }
    let diff: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let x_acf = acf_stats(y, s);
    let d_acf = acf_stats(&diff, s);

    let dec = decompose(y, s);
    let deseason: Vec<f64> = dec.y.iter().zip(&dec.seasonal).map(|(a, b)| a - b).collect();
    let detrend: Vec<f64> = dec.y.iter().zip(&dec.trend).map(|(a, b)| a - b).collect();
    let total = var(&dec.y);
    let trend = strength(&dec.remainder, &deseason, total);
    let seasonal = if s > 1 { strength(&dec.remainder, &detrend, total) } else { 0.0 };
    let (linearity, curvature) = linearity_curvature(&dec.trend);
    let e_acf1 = acf(&dec.remainder, 1)[0];

    let width = if s > 1 { s } else { 10 };
    let (lumpiness, stability) = lumpiness_stability(y, width);

    let ann = fit_ets_spec(y, 1, EtsSpec::ANN).map_err(|e| Error::Feature(e.to_string()))?;
    let aan = fit_ets_spec(y, 1, EtsSpec::AAN).map_err(|e| Error::Feature(e.to_string()))?;

    let values = vec![
        mean(y),
        var(y),
        x_acf[0],
        x_acf[1],
        x_acf[2],
        x_acf[3],
        d_acf[0],
        d_acf[1],
        d_acf[2],
        d_acf[3],
        trend,
        seasonal,
        spikiness(&dec.remainder),
        linearity,
        curvature,
        e_acf1,
        spectral_entropy(y),
        lumpiness,
        stability,
        crossing_points(y),
        flat_spots(y),
        ann.alpha,
        aan.alpha,
        aan.beta,
    ];
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Feature(format!("feature {} is not finite", FEATURE_NAMES[i])));
    }
    Ok(FeatureVector { values })
}

/// Result of [`pca_reduce`].
#[derive(Debug, Clone)]
pub struct Pca {
    /// `m x p` component scores.
    pub scores: DMatrix<f64>,
    /// `d x p` unit loadings.
    pub loadings: DMatrix<f64>,
    /// Explained-variance ratio of every retained-rank component, descending.
    pub explained: Vec<f64>,
}

impl Pca {
    pub fn p(&self) -> usize {
        self.scores.ncols()
    }
}

/// Project the (column-centred) rows of `x` onto the fewest principal
/// components whose cumulative explained variance reaches `threshold`.
pub fn pca_reduce(x: &DMatrix<f64>, threshold: f64) -> Result<Pca> {
    let (m, d) = x.shape();
    if d == 0 || m == 0 {
        return Err(Error::DegenerateInput("empty matrix".into()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Argument(format!("threshold {threshold} outside (0, 1]")));
    }
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        let mu = col.mean();
        col.add_scalar_mut(-mu);
    }
    let svd = c.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = sv.first().copied().unwrap_or(0.0);
    let tol = top * f64::EPSILON * m.max(d) as f64;
    let rank = sv.iter().take_while(|v| **v > tol).count();
    if rank == 0 {
        return Err(Error::DegenerateInput("matrix has rank zero after centring".into()));
    }
    let total: f64 = sv[..rank].iter().map(|v| v * v).sum();
    let explained: Vec<f64> = sv[..rank].iter().map(|v| v * v / total).collect();
    let mut cum = 0.0;
    let mut p = rank;
    for (i, e) in explained.iter().enumerate() {
        cum += e;
        if cum >= threshold - 1e-12 {
            p = i + 1;
            break;
        }
    }
    let mut loadings = DMatrix::zeros(d, p);
    for (k, &i) in order.iter().take(p).enumerate() {
        let row = v_t.row(i);
        let (mut best, mut idx) = (0.0, 0);
        for (j, v) in row.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                idx = j;
            }
        }
        let sign = if row[idx] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            loadings[(j, k)] = sign * row[j];
        }
    }
    let scores = c * &loadings;
    Ok(Pca {
        scores,
        loadings,
        explained,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepresentationKind {
    Raw,
    Residual,
    RawFeatures,
    ResidualFeatures,
}

impl RepresentationKind {
    pub const ALL: [RepresentationKind; 4] = [
        RepresentationKind::Raw,
        RepresentationKind::Residual,
        RepresentationKind::RawFeatures,
        RepresentationKind::ResidualFeatures,
    ];

    /// Approach-name prefix.
    pub fn code(&self) -> &'static str {
        match self {
            RepresentationKind::Raw => "TS",
            RepresentationKind::Residual => "ER",
            RepresentationKind::RawFeatures => "TSF",
            RepresentationKind::ResidualFeatures => "ERF",
        }
    }

    pub fn is_features(&self) -> bool {
        matches!(self, RepresentationKind::RawFeatures | RepresentationKind::ResidualFeatures)
    }

    pub fn uses_residuals(&self) -> bool {
        matches!(self, RepresentationKind::Residual | RepresentationKind::ResidualFeatures)
    }
}

impl fmt::Display for RepresentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for RepresentationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RepresentationKind::ALL
            .into_iter()
            .find(|k| k.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown representation '{s}'")))
    }
}

/// Rows are bottom series.
#[derive(Debug, Clone)]
pub struct Representation {
    pub kind: RepresentationKind,
    pub data: DMatrix<f64>,
    /// Retained feature columns for feature kinds.
    pub feature_names: Option<Vec<String>>,
}

/// Feature matrix (`m x 24`) for the columns of a `T x m` block.
pub fn feature_matrix(series: &DMatrix<f64>, s: usize) -> Result<DMatrix<f64>> {
    let m = series.ncols();
    let rows = (0..m)
        .into_par_iter()
        .map(|j| {
            let y: Vec<f64> = series.column(j).iter().copied().collect();
            compute_features(&y, s).map_err(|e| match e {
                Error::Feature(msg) => Error::Feature(format!("series {j}: {msg}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(m, FEATURE_NAMES.len(), |i, k| rows[i].values[k]))
}

/// Drop columns constant across all rows and z-score the rest.
fn scale_features(f: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<String>)> {
    let m = f.nrows();
    let mut cols = Vec::new();
    let mut names = Vec::new();
    for (k, name) in FEATURE_NAMES.iter().enumerate() {
        let col: Vec<f64> = f.column(k).iter().copied().collect();
        if let Ok(z) = standardize(&col) {
            cols.push(z);
            names.push(name.to_string());
        }
    }
    if cols.is_empty() {
        return Err(Error::DegenerateInput("every feature is constant across series".into()));
    }
    Ok((DMatrix::from_fn(m, cols.len(), |i, k| cols[k][i]), names))
}

fn standardized_rows(series: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (t, m) = series.shape();
    let mut out = DMatrix::zeros(m, t);
    for j in 0..m {
        let y: Vec<f64> = series.column(j).iter().copied().collect();
        let z = standardize(&y).map_err(|_| {
            Error::DegenerateSeries(format!("bottom series {j} is constant over the window"))
        })?;
        for (k, v) in z.into_iter().enumerate() {
            out[(j, k)] = v;
        }
    }
    Ok(out)
}

/// Build a representation from the `T x m` bottom block and its `T x m`
/// one-step residuals.
pub fn build_representation(
    kind: RepresentationKind,
    bottom: &DMatrix<f64>,
    residuals: &DMatrix<f64>,
    s: usize,
) -> Result<Representation> {
    let source = if kind.uses_residuals() { residuals } else { bottom };
    let (data, feature_names) = if kind.is_features() {
        let (d, names) = scale_features(&feature_matrix(source, s)?)?;
        (d, Some(names))
    } else {
        (standardized_rows(source)?, None)
    };
    Ok(Representation {
        kind,
        data,
        feature_names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, StandardNormal};

    #[test]
    fn standardize_examples() {
        let z = standardize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(z, vec![-1.0, 0.0, 1.0]);
        let zz = standardize(&z).unwrap();
        for (a, b) in z.iter().zip(&zz) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(standardize(&[2.0; 5]).unwrap_err().kind(), "DegenerateSeriesError");
        assert_eq!(standardize(&[0.1; 7]).unwrap_err().kind(), "DegenerateSeriesError");
    }

    #[test]
    fn line_is_all_trend() {
        let y: Vec<f64> = (1..=48).map(|t| t as f64).collect();
        for s in [1, 4, 12] {
            let f = compute_features(&y, s).unwrap();
            assert!(f.get("trend").unwrap() >= 0.99, "s={s}");
            assert!(f.get("seasonal_strength").unwrap() <= 0.01, "s={s}");
        }
    }

    #[test]
    fn alternation_is_all_season() {
        let y: Vec<f64> = (0..48).map(|t| if t % 2 == 0 { 3.0 } else { 1.0 }).collect();
        let f = compute_features(&y, 2).unwrap();
        assert!(f.get("seasonal_strength").unwrap() >= 0.99);
        let y4: Vec<f64> = (0..48).map(|t| [1.0, 4.0, 2.0, 0.0][t % 4]).collect();
        let f4 = compute_features(&y4, 4).unwrap();
        assert!(f4.get("seasonal_strength").unwrap() >= 0.99);
    }

    #[test]
    fn white_noise_acf1_within_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let t = 144;
        let bound = 2.0 / (t as f64).sqrt();
        let draws = 1000;
        let inside = (0..draws)
            .filter(|_| {
                let y: Vec<f64> = (0..t).map(|_| StandardNormal.sample(&mut rng)).collect();
                acf(&y, 1)[0].abs() <= bound
            })
            .count();
        assert!(inside as f64 >= 0.95 * draws as f64, "{inside}/{draws}");
    }

    #[test]
    fn acf_features_ignore_level_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = (0..60).map(|_| StandardNormal.sample(&mut rng)).collect();
        let shifted: Vec<f64> = y.iter().map(|v| v + 100.0).collect();
        let a = compute_features(&y, 4).unwrap();
        let b = compute_features(&shifted, 4).unwrap();
        for name in ["x_acf1", "x_acf2", "x_acf_s", "x_acf10", "diff1_acf1", "e_acf1"] {
            assert!((a.get(name).unwrap() - b.get(name).unwrap()).abs() < 1e-10, "{name}");
        }
    }

    #[test]
    fn features_are_finite_and_short_input_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y: Vec<f64> = (0..40).map(|t| t as f64 * 0.1 + { let e: f64 = StandardNormal.sample(&mut rng); e }).collect();
        let f = compute_features(&y, 2).unwrap();
        assert_eq!(f.values.len(), 24);
        assert!(f.values.iter().all(|v| v.is_finite()));
        assert_eq!(compute_features(&y[..20], 12).unwrap_err().kind(), "FeatureError");
    }

    #[test]
    fn helpers_on_small_inputs() {
        assert_eq!(crossing_points(&[1.0, 3.0, 1.0, 3.0]), 3.0);
        assert_eq!(flat_spots(&[0.0, 0.01, 0.02, 5.0, 10.0]), 3.0);
        let (lump, stab) = lumpiness_stability(&[1.0, 1.0, 2.0, 2.0], 2);
        assert_eq!((lump, stab), (0.0, 0.5));
    }

    #[test]
    fn pca_line_is_rank_one() {
        let x = DMatrix::from_fn(6, 2, |i, j| (i as f64) * if j == 0 { 1.0 } else { 2.0 });
        let p = pca_reduce(&x, 0.8).unwrap();
        assert_eq!(p.p(), 1);
        assert!((p.explained[0] - 1.0).abs() < 1e-12);
        // largest loading is positive
        assert!(p.loadings[(1, 0)] > 0.0);
    }

    #[test]
    fn pca_isotropic_cloud_keeps_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x = DMatrix::from_fn(3000, 3, |_, _| StandardNormal.sample(&mut rng));
        let p = pca_reduce(&x, 0.8).unwrap();
        assert_eq!(p.p(), 3);
        for e in &p.explained {
            assert!((e - 1.0 / 3.0).abs() < 0.03);
        }
    }

    #[test]
    fn pca_full_threshold_preserves_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = DMatrix::<f64>::from_fn(10, 3, |_, _| StandardNormal.sample(&mut rng));
        let mix = DMatrix::<f64>::from_fn(3, 6, |_, _| StandardNormal.sample(&mut rng));
        let x = base * mix; // rank 3 in 6 columns
        let p = pca_reduce(&x, 1.0).unwrap();
        assert_eq!(p.p(), 3);
        for i in 0..10 {
            for j in 0..10 {
                let d0 = (x.row(i) - x.row(j)).norm_squared();
                let d1 = (p.scores.row(i) - p.scores.row(j)).norm_squared();
                assert!((d0 - d1).abs() < 1e-8 * (1.0 + d0));
            }
        }
        assert_eq!(
            pca_reduce(&DMatrix::from_element(4, 2, 3.0), 0.8).unwrap_err().kind(),
            "DegenerateInputError"
        );
    }

    #[test]
    fn representations_have_expected_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = Normal::new(0.0, 1.0).unwrap();
        let bottom = DMatrix::from_fn(40, 5, |t, j| (j as f64 + 1.0) * (t % 2) as f64 + n.sample(&mut rng));
        let resid = DMatrix::from_fn(40, 5, |_, _| n.sample(&mut rng));
        let raw = build_representation(RepresentationKind::Raw, &bottom, &resid, 2).unwrap();
        assert_eq!(raw.data.shape(), (5, 40));
        for row in raw.data.row_iter() {
            let v: Vec<f64> = row.iter().copied().collect();
            assert!(mean(&v).abs() < 1e-12 && (var(&v) - 1.0).abs() < 1e-8);
        }
        let feats = build_representation(RepresentationKind::ResidualFeatures, &bottom, &resid, 2).unwrap();
        let names = feats.feature_names.unwrap();
        assert_eq!(feats.data.shape(), (5, names.len()));
        assert!(feats.data.iter().all(|v| v.is_finite()));
    }
}
