//! Univariate base forecasts: additive-error exponential smoothing with
//! automatic model selection by AICc, plus the seasonal-naive reference.
//!
//! State equations (additive error, damping `phi`, `phi = 1` for an undamped
//! trend, period `p`):
//!
//! ```text
//! yhat_t = l_{t-1} + phi*b_{t-1} + s_{t-p}
//! e_t    = y_t - yhat_t
//! l_t    = l_{t-1} + phi*b_{t-1} + alpha*e_t
//! b_t    = phi*b_{t-1} + beta*e_t
//! s_t    = s_{t-p} + gamma*e_t
//! ```

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optim::NelderMead;
use crate::panel::{Grouping, Level, SeriesPanel, TOP_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum TrendKind {
    None,
    Additive,
    Damped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SeasonKind {
    None,
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct EtsSpec {
    pub trend: TrendKind,
    pub season: SeasonKind,
}

impl EtsSpec {
    pub const ANN: EtsSpec = EtsSpec { trend: TrendKind::None, season: SeasonKind::None };
    pub const AAN: EtsSpec = EtsSpec { trend: TrendKind::Additive, season: SeasonKind::None };
    pub const AADN: EtsSpec = EtsSpec { trend: TrendKind::Damped, season: SeasonKind::None };
    pub const ANA: EtsSpec = EtsSpec { trend: TrendKind::None, season: SeasonKind::Additive };
    pub const AAA: EtsSpec = EtsSpec { trend: TrendKind::Additive, season: SeasonKind::Additive };
    pub const AADA: EtsSpec = EtsSpec { trend: TrendKind::Damped, season: SeasonKind::Additive };

    /// Candidate set searched by [`fit_ets`], in tie-breaking order.
    pub const CANDIDATES: [EtsSpec; 6] = [
        EtsSpec::ANN,
        EtsSpec::AAN,
        EtsSpec::AADN,
        EtsSpec::ANA,
        EtsSpec::AAA,
        EtsSpec::AADA,
    ];

    fn has_trend(&self) -> bool {
        self.trend != TrendKind::None
    }

    fn has_season(&self) -> bool {
        self.season == SeasonKind::Additive
    }
}

impl fmt::Display for EtsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let trend = match self.trend {
            TrendKind::None => "N",
            TrendKind::Additive => "A",
            TrendKind::Damped => "Ad",
        };
        let season = if self.has_season() { "A" } else { "N" };
        write!(f, "ETS(A,{trend},{season})")
    }
}

/// A fitted exponential smoothing model.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EtsModel {
    pub spec: EtsSpec,
    /// Seasonal period used by the seasonal state (1 when non-seasonal).
    pub period: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Damping; exactly 1 for undamped trends.
    pub phi: f64,
    pub initial_level: f64,
    pub initial_slope: f64,
    /// `s_{-p}, ..., s_{-1}`.
    pub initial_season: Vec<f64>,
    pub level: f64,
    pub slope: f64,
    /// Seasonal ring buffer after the last observation; slot `t % period`
    /// holds the state used at time index `t`.
    pub season: Vec<f64>,
    pub n_obs: usize,
    pub sse: f64,
    pub aicc: f64,
    /// In-sample one-step-ahead errors.
    pub residuals: Vec<f64>,
}

const ALPHA_MIN: f64 = 1e-4;
const ALPHA_MAX: f64 = 0.9999;
const STRICT: f64 = 0.9999;
const PHI_MIN: f64 = 0.8;
const PHI_MAX: f64 = 0.98;

#[derive(Debug, Clone, Copy)]
struct Smoothing {
    alpha: f64,
    beta: f64,
    gamma: f64,
    phi: f64,
}

/// Layout of the optimizer vector for one spec.
struct Layout {
    spec: EtsSpec,
}

impl Layout {
    /// Map an unconstrained point onto the admissible box.
    fn decode(&self, x: &[f64]) -> (Smoothing, f64, f64) {
        let mut it = x.iter().copied();
        let alpha = it.next().unwrap().clamp(ALPHA_MIN, ALPHA_MAX);
        let mut s = Smoothing { alpha, beta: 0.0, gamma: 0.0, phi: 1.0 };
        if self.spec.has_trend() {
            s.beta = it.next().unwrap().clamp(0.0, STRICT * alpha);
        }
        if self.spec.trend == TrendKind::Damped {
            s.phi = it.next().unwrap().clamp(PHI_MIN, PHI_MAX);
        }
        if self.spec.has_season() {
            s.gamma = it.next().unwrap().clamp(0.0, STRICT * (1.0 - alpha));
        }
        let l0 = it.next().unwrap();
        let b0 = if self.spec.has_trend() { it.next().unwrap() } else { 0.0 };
        (s, l0, b0)
    }

    fn encode(&self, s: Smoothing, l0: f64, b0: f64) -> Vec<f64> {
        let mut x = vec![s.alpha];
        if self.spec.has_trend() {
            x.push(s.beta);
        }
        if self.spec.trend == TrendKind::Damped {
            x.push(s.phi);
        }
        if self.spec.has_season() {
            x.push(s.gamma);
        }
        x.push(l0);
        if self.spec.has_trend() {
            x.push(b0);
        }
        x
    }

    fn steps(&self, scale: f64) -> Vec<f64> {
        let mut st = vec![0.1];
        if self.spec.has_trend() {
            st.push(0.02);
        }
        if self.spec.trend == TrendKind::Damped {
            st.push(0.05);
        }
        if self.spec.has_season() {
            st.push(0.05);
        }
        st.push(0.25 * scale);
        if self.spec.has_trend() {
            st.push(0.02 * scale);
        }
        st
    }

    /// Number of free parameters counted by AICc (including the error variance).
    fn n_params(&self, period: usize) -> usize {
        let mut k = 1 + 1 + 1; // alpha, l0, sigma^2
        if self.spec.has_trend() {
            k += 2;
        }
        if self.spec.trend == TrendKind::Damped {
            k += 1;
        }
        if self.spec.has_season() {
            k += 1 + (period - 1);
        }
        k
    }
}

struct FilterOutput {
    sse: f64,
    level: f64,
    slope: f64,
    season: Vec<f64>,
}

fn filter(
    y: &[f64],
    s: Smoothing,
    l0: f64,
    b0: f64,
    season0: &[f64],
    mut residuals: Option<&mut Vec<f64>>,
) -> FilterOutput {
    let period = season0.len();
    let mut season = season0.to_vec();
    let (mut l, mut b) = (l0, b0);
    let mut sse = 0.0;
    for (t, &obs) in y.iter().enumerate() {
        let slot = t % period;
        let damped = s.phi * b;
        let e = obs - (l + damped + season[slot]);
        sse += e * e;
        l = l + damped + s.alpha * e;
        b = damped + s.beta * e;
        season[slot] += s.gamma * e;
        if let Some(r) = residuals.as_deref_mut() {
            r.push(e);
        }
    }
    FilterOutput { sse, level: l, slope: b, season }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let mu = mean(x);
    (x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

struct Heuristic {
    l0: f64,
    b0: f64,
    season: Vec<f64>,
}

/// Starting states from the first `2p` points (at least 10 when non-seasonal):
/// level is their mean moved back to time 0, slope is the average first
/// difference, and seasonal indices are detrended phase means.
fn heuristic_states(y: &[f64], spec: EtsSpec, period: usize) -> Heuristic {
    let w = if spec.has_season() { 2 * period } else { 10 }.min(y.len());
    let head = &y[..w];
    let slope = if spec.has_trend() && w > 1 {
        (head[w - 1] - head[0]) / (w - 1) as f64
    } else {
        0.0
    };
    let centre = (w as f64 + 1.0) / 2.0;
    let l0 = mean(head) - slope * centre;
    let season = if spec.has_season() {
        let mut idx = vec![0.0; period];
        let mut cnt = vec![0.0; period];
        let base_slope = (head[w - 1] - head[0]) / (w - 1) as f64;
        let base = mean(head) - base_slope * centre;
        for (t, &v) in head.iter().enumerate() {
            idx[t % period] += v - (base + base_slope * (t + 1) as f64);
            cnt[t % period] += 1.0;
        }
        for (i, c) in idx.iter_mut().zip(&cnt) {
            *i /= c;
        }
        let mu = mean(&idx);
        idx.iter().map(|v| v - mu).collect()
    } else {
        vec![0.0]
    };
    Heuristic { l0, b0: slope, season }
}

fn validate_input(y: &[f64], period: usize) -> Result<()> {
    if period == 0 {
        return Err(Error::fit("", "seasonal period must be positive"));
    }
    let min_len = (2 * period + 4).max(10);
    if y.len() < min_len {
        return Err(Error::fit(
            "",
            format!("series of length {} is shorter than the minimum {min_len}", y.len()),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::fit("", "series contains non-finite values"));
    }
    Ok(())
}

const STARTS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Fit one model specification by minimizing `T log(SSE/T)` over smoothing
/// parameters and initial level/slope from five fixed starting points.
pub fn fit_ets_spec(y: &[f64], period: usize, spec: EtsSpec) -> Result<EtsModel> {
    validate_input(y, period)?;
    let period = if spec.has_season() {
        if period < 2 || y.len() < 2 * period {
            return Err(Error::fit("", format!("{spec} needs period > 1 and 2 full cycles")));
        }
        period
    } else {
        1
    };
    let n = y.len();
    let layout = Layout { spec };
    let heur = heuristic_states(y, spec, period);
    let scale = sample_sd(y).max(1e-8 * (1.0 + mean(y).abs()));
    let sse_floor = n as f64 * (1e-9 * (1.0 + y.iter().map(|v| v.abs()).sum::<f64>() / n as f64)).powi(2);
    let objective = |x: &[f64]| {
        let (s, l0, b0) = layout.decode(x);
        let out = filter(y, s, l0, b0, &heur.season, None);
        n as f64 * (out.sse.max(sse_floor) / n as f64).ln()
    };

    let nm = NelderMead::default();
    let steps = layout.steps(scale);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for &a in &STARTS {
        let start = Smoothing {
            alpha: a,
            beta: 0.1 * a,
            gamma: 0.1 * (1.0 - a),
            phi: 0.9,
        };
        let x0 = layout.encode(start, heur.l0, heur.b0);
        let found = nm.minimize(objective, &x0, &steps);
        if best.as_ref().is_none_or(|(_, v)| found.value < *v) {
            best = Some((found.x, found.value));
        }
    }
    let (x, _) = best.expect("at least one start");
    let (s, l0, b0) = layout.decode(&x);
    let mut residuals = Vec::with_capacity(n);
    let out = filter(y, s, l0, b0, &heur.season, Some(&mut residuals));

    let k = layout.n_params(period);
    let sse = out.sse.max(sse_floor);
    let loglik = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * sse / n as f64).ln() + 1.0);
    let aicc = if n > k + 1 {
        -2.0 * loglik + 2.0 * k as f64 + 2.0 * (k * (k + 1)) as f64 / (n - k - 1) as f64
    } else {
        f64::INFINITY
    };
    Ok(EtsModel {
        spec,
        period,
        alpha: s.alpha,
        beta: s.beta,
        gamma: s.gamma,
        phi: s.phi,
        initial_level: l0,
        initial_slope: b0,
        initial_season: heur.season,
        level: out.level,
        slope: out.slope,
        season: out.season,
        n_obs: n,
        sse: out.sse,
        aicc,
        residuals,
    })
}

/// Select the best model by AICc over the additive candidate set.
///
/// Seasonal candidates are tried only when `period > 1` and the series covers
/// at least two full cycles. Ties go to the earlier (simpler) candidate.
pub fn fit_ets(y: &[f64], period: usize) -> Result<EtsModel> {
    validate_input(y, period)?;
    let seasonal_ok = period > 1 && y.len() >= 2 * period;
    let mut best: Option<EtsModel> = None;
    for spec in EtsSpec::CANDIDATES {
        if spec.has_season() && !seasonal_ok {
            continue;
        }
        let model = fit_ets_spec(y, period, spec)?;
        if best.as_ref().is_none_or(|b| model.aicc < b.aicc) {
            best = Some(model);
        }
    }
    best.ok_or_else(|| Error::fit("", "no admissible model"))
}

/// Point forecasts for `h` steps ahead, iterating the states with zero errors.
pub fn forecast_ets(model: &EtsModel, h: usize) -> Result<Vec<f64>> {
    if h == 0 {
        return Err(Error::Argument("forecast horizon must be positive".into()));
    }
    let mut damp_sum = 0.0;
    let mut damp = 1.0;
    Ok((1..=h)
        .map(|k| {
            damp *= model.phi;
            damp_sum += damp;
            let slot = (model.n_obs + k - 1) % model.period;
            model.level + damp_sum * model.slope + model.season[slot]
        })
        .collect())
}

/// `yhat_{T+k} = y_{T + k - s*ceil(k/s)}`.
pub fn seasonal_naive(y: &[f64], period: usize, h: usize) -> Result<Vec<f64>> {
    if period == 0 || y.len() < period {
        return Err(Error::Argument(format!(
            "seasonal naive needs at least {period} observations, got {}",
            y.len()
        )));
    }
    let t = y.len();
    Ok((1..=h)
        .map(|k| y[t + k - period * k.div_ceil(period) - 1])
        .collect())
}

/// Base forecasts and residuals for every series of a hierarchy.
#[derive(Debug, Clone)]
pub struct ForecastBundle {
    pub ids: Vec<String>,
    pub levels: Vec<Level>,
    /// `n x h`, rows ordered top, middle, bottom.
    pub point_forecasts: DMatrix<f64>,
    /// `T x n` in-sample one-step errors.
    pub residuals: DMatrix<f64>,
    pub models: Vec<EtsModel>,
}

/// Fitted model plus its forecasts for one series.
#[derive(Debug, Clone)]
pub struct SeriesFit {
    pub model: EtsModel,
    pub forecasts: Vec<f64>,
}

pub fn fit_and_forecast(y: &[f64], period: usize, h: usize) -> Result<SeriesFit> {
    let model = fit_ets(y, period)?;
    let forecasts = forecast_ets(&model, h)?;
    Ok(SeriesFit { model, forecasts })
}

/// Aggregate the columns of `bottom` selected by `members`.
pub fn aggregate(bottom: &DMatrix<f64>, members: impl Iterator<Item = usize> + Clone) -> Vec<f64> {
    (0..bottom.nrows())
        .map(|t| members.clone().map(|j| bottom[(t, j)]).sum())
        .collect()
}

/// Fit every series of the hierarchy implied by `grouping` over a `T x m`
/// bottom block.
pub fn forecast_hierarchy(
    bottom: &DMatrix<f64>,
    bottom_ids: &[String],
    period: usize,
    grouping: &Grouping,
    h: usize,
) -> Result<ForecastBundle> {
    let m = bottom.ncols();
    if grouping.m() != m || bottom_ids.len() != m {
        return Err(Error::Argument(format!(
            "grouping over {} series, panel has {m}",
            grouping.m()
        )));
    }
    let mut series: Vec<(String, Level, Vec<f64>)> = Vec::with_capacity(1 + grouping.k() + m);
    series.push((TOP_ID.to_string(), Level::Top, aggregate(bottom, 0..m)));
    for i in 0..grouping.k() {
        let members = grouping.members(i);
        series.push((
            grouping.middle_ids()[i].clone(),
            Level::Middle,
            aggregate(bottom, members.into_iter()),
        ));
    }
    for (j, id) in bottom_ids.iter().enumerate() {
        series.push((id.clone(), Level::Bottom, bottom.column(j).iter().copied().collect()));
    }
    let fits = series
        .par_iter()
        .map(|(id, _, y)| fit_and_forecast(y, period, h).map_err(|e| e.with_series(id)))
        .collect::<Result<Vec<_>>>()?;
    let n = series.len();
    let t = bottom.nrows();
    let point_forecasts = DMatrix::from_fn(n, h, |i, k| fits[i].forecasts[k]);
    let residuals = DMatrix::from_fn(t, n, |r, i| fits[i].model.residuals[r]);
    let (ids, levels): (Vec<_>, Vec<_>) = series.into_iter().map(|(id, l, _)| (id, l)).unzip();
    Ok(ForecastBundle {
        ids,
        levels,
        point_forecasts,
        residuals,
        models: fits.into_iter().map(|f| f.model).collect(),
    })
}

/// Base forecasts for a whole panel (its full length is the training sample).
pub fn forecast_panel(panel: &SeriesPanel, grouping: &Grouping, h: usize) -> Result<ForecastBundle> {
    forecast_hierarchy(
        &panel.bottom(),
        &panel.bottom_ids(),
        panel.seasonal_period(),
        grouping,
        h,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn noise(n: usize, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, sd).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn constant_series_forecasts_constant() {
        let y = vec![4.2; 40];
        let model = fit_ets(&y, 1).unwrap();
        let f = forecast_ets(&model, 6).unwrap();
        for v in f {
            assert!((v - 4.2).abs() < 1e-8);
        }
        assert!(model.residuals.iter().all(|r| r.abs() < 1e-8));
    }

    #[test]
    fn line_is_continued() {
        let y: Vec<f64> = (1..=60).map(|t| t as f64).collect();
        let model = fit_ets(&y, 1).unwrap();
        let f = forecast_ets(&model, 12).unwrap();
        for (k, v) in f.iter().enumerate() {
            let truth = (60 + k + 1) as f64;
            assert!(((v - truth) / truth).abs() < 1e-3, "h={} got {v}", k + 1);
        }
    }

    fn model_with(spec: EtsSpec, phi: f64) -> EtsModel {
        EtsModel {
            spec,
            period: 1,
            alpha: 0.5,
            beta: 0.1,
            gamma: 0.0,
            phi,
            initial_level: 0.0,
            initial_slope: 0.0,
            initial_season: vec![0.0],
            level: 10.0,
            slope: 2.0,
            season: vec![0.0],
            n_obs: 30,
            sse: 0.0,
            aicc: 0.0,
            residuals: vec![],
        }
    }

    #[test]
    fn flat_and_linear_forecasts() {
        let mut ann = model_with(EtsSpec::ANN, 1.0);
        ann.slope = 0.0;
        assert_eq!(forecast_ets(&ann, 4).unwrap(), vec![10.0; 4]);
        let aan = model_with(EtsSpec::AAN, 1.0);
        assert_eq!(forecast_ets(&aan, 3).unwrap(), vec![12.0, 14.0, 16.0]);
        assert_eq!(forecast_ets(&aan, 0).unwrap_err().kind(), "ArgumentError");
    }

    #[test]
    fn damped_forecast_matches_state_iteration() {
        let m = model_with(EtsSpec::AADN, 0.9);
        let f = forecast_ets(&m, 8).unwrap();
        let (mut l, mut b) = (m.level, m.slope);
        for v in f {
            // zero-error state step: l <- l + phi b, b <- phi b; forecast is the prior l + phi b
            let pred = l + m.phi * b;
            assert!((v - pred).abs() < 1e-12);
            l = pred;
            b *= m.phi;
        }
    }

    #[test]
    fn seasonal_naive_examples() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(seasonal_naive(&y, 2, 2).unwrap(), vec![3.0, 4.0]);
        assert_eq!(seasonal_naive(&y, 2, 4).unwrap(), vec![3.0, 4.0, 3.0, 4.0]);
        assert_eq!(seasonal_naive(&y, 1, 3).unwrap(), vec![4.0; 3]);
        assert_eq!(seasonal_naive(&y, 5, 1).unwrap_err().kind(), "ArgumentError");
    }

    #[test]
    fn fit_errors() {
        assert_eq!(fit_ets(&[1.0; 8], 1).unwrap_err().kind(), "FitError");
        assert_eq!(fit_ets(&[1.0; 20], 12).unwrap_err().kind(), "FitError");
        let mut y = vec![1.0; 30];
        y[4] = f64::NAN;
        assert_eq!(fit_ets(&y, 1).unwrap_err().kind(), "FitError");
    }

    #[test]
    fn residuals_reproduce_state_recursion() {
        let base = noise(80, 0.5, 9);
        let y: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(t, e)| 3.0 + 0.05 * t as f64 + if t % 4 == 0 { 1.5 } else { 0.0 } + e)
            .collect();
        let model = fit_ets(&y, 4).unwrap();
        let p = model.period;
        let mut l = model.initial_level;
        let mut b = model.initial_slope;
        let mut s = model.initial_season.clone();
        for (t, &obs) in y.iter().enumerate() {
            let pred = l + model.phi * b + s[t % p];
            let e = obs - pred;
            assert!((e - model.residuals[t]).abs() < 1e-9);
            l = l + model.phi * b + model.alpha * e;
            b = model.phi * b + model.beta * e;
            s[t % p] += model.gamma * e;
        }
        assert!((l - model.level).abs() < 1e-9);
    }

    #[test]
    fn fit_is_deterministic() {
        let y: Vec<f64> = noise(60, 1.0, 2).iter().enumerate().map(|(t, e)| e + (t % 2) as f64).collect();
        let a = fit_ets(&y, 2).unwrap();
        let b = fit_ets(&y, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ann_residual_mean_near_zero() {
        let sd = 1.0;
        let y: Vec<f64> = noise(200, sd, 17).iter().map(|e| 10.0 + e).collect();
        let m = fit_ets_spec(&y, 1, EtsSpec::ANN).unwrap();
        let mu = m.residuals.iter().sum::<f64>() / 200.0;
        assert!(mu.abs() <= 3.0 * sd / (200f64).sqrt(), "mean residual {mu}");
    }

    #[test]
    fn seasonal_model_selected_for_seasonal_data() {
        let y: Vec<f64> = noise(120, 0.3, 4)
            .iter()
            .enumerate()
            .map(|(t, e)| if t % 2 == 0 { 2.5 } else { 0.5 } + e)
            .collect();
        let m = fit_ets(&y, 2).unwrap();
        assert!(m.spec.has_season(), "selected {}", m.spec);
        let f = forecast_ets(&m, 4).unwrap();
        // time index 120 is even -> peak
        assert!(f[0] > 2.0 && f[1] < 1.0 && f[2] > 2.0, "{f:?}");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn admissible_ranges_hold(seed in 0u64..1000, period in 1usize..5, trend in -0.5f64..0.5) {
            let y: Vec<f64> = noise(48, 1.0, seed)
                .iter()
                .enumerate()
                .map(|(t, e)| trend * t as f64 + (t % period) as f64 + e)
                .collect();
            for spec in EtsSpec::CANDIDATES {
                if spec.has_season() && period < 2 {
                    continue;
                }
                let m = fit_ets_spec(&y, period, spec).unwrap();
                proptest::prop_assert!(m.alpha > 0.0 && m.alpha < 1.0);
                proptest::prop_assert!(m.beta >= 0.0 && m.beta < m.alpha);
                proptest::prop_assert!(m.gamma >= 0.0 && m.gamma < 1.0 - m.alpha);
                if spec.trend == TrendKind::Damped {
                    proptest::prop_assert!((0.8..=0.98).contains(&m.phi));
                } else {
                    proptest::prop_assert_eq!(m.phi, 1.0);
                }
                proptest::prop_assert!(m.residuals.iter().all(|r| r.is_finite()));
            }
        }
    }

    #[test]
    fn hierarchy_bundle_shapes() {
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|j| noise(40, 1.0, 30 + j).iter().map(|e| 5.0 + j as f64 + e).collect())
            .collect();
        let bottom = DMatrix::from_fn(40, 3, |t, j| cols[j][t]);
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let two = forecast_hierarchy(&bottom, &ids, 1, &Grouping::two_level(3), 5).unwrap();
        assert_eq!(two.point_forecasts.shape(), (4, 5));
        assert_eq!(two.residuals.shape(), (40, 4));

        // a singleton middle row aggregates exactly one bottom series
        let g = Grouping::from_members(3, &[vec![0, 1], vec![2]]).unwrap();
        let bundle = forecast_hierarchy(&bottom, &ids, 1, &g, 5).unwrap();
        assert_eq!(bundle.ids, vec!["Total", "M1", "M2", "a", "b", "c"]);
        assert_eq!(bundle.point_forecasts.row(2), bundle.point_forecasts.row(5));
        assert_eq!(bundle.residuals.column(2), bundle.residuals.column(5));
    }
}
