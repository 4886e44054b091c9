//! Expanding-window evaluation of forecasting approaches.
//!
//! Every window refits the base models, re-clusters the bottom series, and
//! re-estimates `W` from that window's residuals. Each distinct aggregate
//! series is fitted once per window, however many hierarchies contain it.

use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::baseforecast::{aggregate, fit_and_forecast, SeriesFit};
use crate::cluster::{grouped_hierarchy, ClusterMethod};
use crate::combine::combine;
use crate::error::{Error, Result};
use crate::evaluate::{mcb, rmsse_scaled, seasonal_scale, Mcb, WindowPlan};
use crate::panel::{summing_matrix, Grouping, SeriesPanel, TOP_ID};
use crate::permute::twin;
use crate::reconcile::{estimate_w, reconcile, CovMethod};

/// Where a hierarchy's middle level comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum HierarchySource {
    /// No middle level.
    TwoLevel,
    /// A grouping known in advance (natural hierarchy, true clusters).
    Fixed(Grouping),
    /// Clustering of the window's bottom series.
    Clustered(ClusterMethod),
    /// Union of several hierarchies' middle levels.
    Grouped(Vec<HierarchySource>),
    /// The inner hierarchy with bottom series reassigned by `perm`.
    Twin {
        inner: Box<HierarchySource>,
        perm: Vec<usize>,
    },
}

impl HierarchySource {
    fn cluster_methods(&self, out: &mut Vec<ClusterMethod>) {
        match self {
            HierarchySource::Clustered(c) => out.push(*c),
            HierarchySource::Grouped(parts) => parts.iter().for_each(|p| p.cluster_methods(out)),
            HierarchySource::Twin { inner, .. } => inner.cluster_methods(out),
            HierarchySource::TwoLevel | HierarchySource::Fixed(_) => {}
        }
    }

    fn resolve(&self, m: usize, clusters: &HashMap<ClusterMethod, Grouping>) -> Result<Grouping> {
        match self {
            HierarchySource::TwoLevel => Ok(Grouping::two_level(m)),
            HierarchySource::Fixed(g) => {
                if g.m() != m {
                    return Err(Error::Argument(format!(
                        "fixed grouping covers {} series, panel has {m}",
                        g.m()
                    )));
                }
                Ok(g.clone())
            }
            HierarchySource::Clustered(c) => Ok(clusters[c].clone()),
            HierarchySource::Grouped(parts) => {
                let parts = parts.iter().map(|p| p.resolve(m, clusters)).collect::<Result<Vec<_>>>()?;
                grouped_hierarchy(&parts)
            }
            HierarchySource::Twin { inner, perm } => twin(&inner.resolve(m, clusters)?, perm),
        }
    }

    /// Same hierarchy with its bottom assignment permuted.
    pub fn twinned(&self, perm: &[usize]) -> HierarchySource {
        HierarchySource::Twin {
            inner: Box::new(self.clone()),
            perm: perm.to_vec(),
        }
    }
}

/// A forecasting approach evaluated on top and bottom series.
#[derive(Debug, Clone, PartialEq)]
pub enum Approach {
    /// Unreconciled base forecasts.
    Base,
    Reconciled {
        label: String,
        source: HierarchySource,
    },
    /// Equal-weight average of reconciled forecasts from several hierarchies.
    Combination {
        label: String,
        sources: Vec<HierarchySource>,
    },
}

impl Approach {
    pub fn label(&self) -> &str {
        match self {
            Approach::Base => "Base",
            Approach::Reconciled { label, .. } | Approach::Combination { label, .. } => label,
        }
    }

    pub fn two_level() -> Self {
        Approach::Reconciled {
            label: "Two-level".into(),
            source: HierarchySource::TwoLevel,
        }
    }

    pub fn fixed(label: impl Into<String>, grouping: Grouping) -> Self {
        Approach::Reconciled {
            label: label.into(),
            source: HierarchySource::Fixed(grouping),
        }
    }

    pub fn clustered(method: ClusterMethod) -> Self {
        Approach::Reconciled {
            label: method.name(),
            source: HierarchySource::Clustered(method),
        }
    }

    pub fn grouped(parts: Vec<HierarchySource>) -> Self {
        Approach::Reconciled {
            label: "Grouped".into(),
            source: HierarchySource::Grouped(parts),
        }
    }

    /// The same approach with every hierarchy twinned by one shared permutation.
    pub fn twinned(&self, label: impl Into<String>, perm: &[usize]) -> Result<Self> {
        match self {
            Approach::Base => Err(Error::Argument("base forecasts have no hierarchy to twin".into())),
            Approach::Reconciled { source, .. } => Ok(Approach::Reconciled {
                label: label.into(),
                source: source.twinned(perm),
            }),
            Approach::Combination { sources, .. } => Ok(Approach::Combination {
                label: label.into(),
                sources: sources.iter().map(|s| s.twinned(perm)).collect(),
            }),
        }
    }

    fn sources(&self) -> Vec<&HierarchySource> {
        match self {
            Approach::Base => Vec::new(),
            Approach::Reconciled { source, .. } => vec![source],
            Approach::Combination { sources, .. } => sources.iter().collect(),
        }
    }
}

/// Scores and forecasts for one window.
#[derive(Debug, Clone)]
pub struct WindowResult {
    /// RMSSE averaged over top and bottom series, per approach.
    pub scores: Vec<f64>,
    /// Per approach, RMSSE of each top/bottom series.
    pub series_scores: Vec<Vec<f64>>,
    /// Per approach, number of middle series (mean over a combination's hierarchies).
    pub middle_counts: Vec<f64>,
    /// Per approach, `(m+1) x h` forecasts for top then bottom series.
    pub forecasts: Vec<DMatrix<f64>>,
}

fn top_row(m: usize) -> Vec<bool> {
    vec![true; m]
}

fn unit_row(m: usize, j: usize) -> Vec<bool> {
    let mut r = vec![false; m];
    r[j] = true;
    r
}

fn row_label(row: &[bool], ids: &[String]) -> String {
    let members: Vec<&str> = row
        .iter()
        .zip(ids)
        .filter(|(b, _)| **b)
        .map(|(_, id)| id.as_str())
        .collect();
    match members.len() {
        n if n == ids.len() => TOP_ID.to_string(),
        1 => members[0].to_string(),
        n if n <= 4 => format!("aggregate({})", members.join("+")),
        n => format!("aggregate({}+... {n} series)", members[..3].join("+")),
    }
}

/// Fit every row of `rows` not yet in `cache`.
fn fit_rows(
    cache: &mut HashMap<Vec<bool>, SeriesFit>,
    rows: Vec<Vec<bool>>,
    train: &DMatrix<f64>,
    ids: &[String],
    s: usize,
    h: usize,
) -> Result<()> {
    let mut seen = HashSet::new();
    let todo: Vec<Vec<bool>> = rows
        .into_iter()
        .filter(|r| !cache.contains_key(r) && seen.insert(r.clone()))
        .collect();
    let fits = todo
        .par_iter()
        .map(|row| {
            let members = row.iter().enumerate().filter(|(_, b)| **b).map(|(j, _)| j);
            let y = aggregate(train, members);
            fit_and_forecast(&y, s, h).map_err(|e| e.with_series(&row_label(row, ids)))
        })
        .collect::<Result<Vec<_>>>()?;
    cache.extend(todo.into_iter().zip(fits));
    Ok(())
}

/// Evaluate all approaches on one split: train on the first `train_len` rows
/// of the `T x m` bottom block, score the next `h`.
pub fn evaluate_window(
    bottom: &DMatrix<f64>,
    bottom_ids: &[String],
    s: usize,
    train_len: usize,
    h: usize,
    approaches: &[Approach],
    cov: CovMethod,
) -> Result<WindowResult> {
    let m = bottom.ncols();
    if train_len + h > bottom.nrows() {
        return Err(Error::Argument("window extends past the end of the panel".into()));
    }
    let train = bottom.rows(0, train_len).into_owned();
    let test = bottom.rows(train_len, h).into_owned();

    let mut cache: HashMap<Vec<bool>, SeriesFit> = HashMap::new();
    let mut base_rows = vec![top_row(m)];
    base_rows.extend((0..m).map(|j| unit_row(m, j)));
    fit_rows(&mut cache, base_rows.clone(), &train, bottom_ids, s, h)?;

    let bottom_resid = DMatrix::from_fn(train_len, m, |t, j| cache[&unit_row(m, j)].model.residuals[t]);

    let mut methods = Vec::new();
    for a in approaches {
        for src in a.sources() {
            src.cluster_methods(&mut methods);
        }
    }
    let mut uniq = HashSet::new();
    methods.retain(|c| uniq.insert(*c));
    let clustered = methods
        .par_iter()
        .map(|c| c.grouping(&train, &bottom_resid, s))
        .collect::<Result<Vec<_>>>()?;
    let clusters: HashMap<ClusterMethod, Grouping> = methods.into_iter().zip(clustered).collect();

    let resolved: Vec<Vec<Grouping>> = approaches
        .iter()
        .map(|a| a.sources().iter().map(|src| src.resolve(m, &clusters)).collect())
        .collect::<Result<_>>()?;
    let middle: Vec<Vec<bool>> = resolved
        .iter()
        .flatten()
        .flat_map(|g| g.rows().iter().cloned())
        .collect();
    fit_rows(&mut cache, middle, &train, bottom_ids, s, h)?;

    // scale of each top/bottom training series
    let scales = base_rows
        .iter()
        .map(|row| {
            let members = row.iter().enumerate().filter(|(_, b)| **b).map(|(j, _)| j);
            seasonal_scale(&aggregate(&train, members), s).map_err(|e| e.with_series(&row_label(row, bottom_ids)))
        })
        .collect::<Result<Vec<_>>>()?;
    let actual: Vec<Vec<f64>> = base_rows
        .iter()
        .map(|row| {
            let members = row.iter().enumerate().filter(|(_, b)| **b).map(|(j, _)| j);
            aggregate(&test, members)
        })
        .collect();

    let base_forecasts = DMatrix::from_fn(m + 1, h, |i, k| cache[&base_rows[i]].forecasts[k]);
    let reconciled = |g: &Grouping| -> Result<DMatrix<f64>> {
        let mut rows = vec![top_row(m)];
        rows.extend(g.rows().iter().cloned());
        rows.extend((0..m).map(|j| unit_row(m, j)));
        let fits: Vec<&SeriesFit> = rows.iter().map(|r| &cache[r]).collect();
        let n = fits.len();
        let yhat = DMatrix::from_fn(n, h, |i, k| fits[i].forecasts[k]);
        let resid = DMatrix::from_fn(train_len, n, |t, i| fits[i].model.residuals[t]);
        let w = estimate_w(&resid, cov)?;
        let rec = reconcile(&summing_matrix(g), &w, &yhat)?;
        let k = g.k();
        Ok(DMatrix::from_fn(m + 1, h, |i, c| {
            if i == 0 {
                rec.ytilde[(0, c)]
            } else {
                rec.ytilde[(k + i, c)]
            }
        }))
    };

    let per_approach = approaches
        .par_iter()
        .zip(resolved.par_iter())
        .map(|(a, groupings)| -> Result<(DMatrix<f64>, f64)> {
            let fc = match a {
                Approach::Base => base_forecasts.clone(),
                Approach::Reconciled { .. } => reconciled(&groupings[0])?,
                Approach::Combination { .. } => {
                    let parts = groupings.iter().map(&reconciled).collect::<Result<Vec<_>>>()?;
                    combine(&parts)?
                }
            };
            let k = if groupings.is_empty() {
                0.0
            } else {
                groupings.iter().map(|g| g.k() as f64).sum::<f64>() / groupings.len() as f64
            };
            Ok((fc, k))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = WindowResult {
        scores: Vec::with_capacity(approaches.len()),
        series_scores: Vec::with_capacity(approaches.len()),
        middle_counts: Vec::with_capacity(approaches.len()),
        forecasts: Vec::with_capacity(approaches.len()),
    };
    for (fc, k) in per_approach {
        let series = (0..=m)
            .map(|i| {
                let f: Vec<f64> = fc.row(i).iter().copied().collect();
                rmsse_scaled(&actual[i], &f, scales[i])
            })
            .collect::<Result<Vec<_>>>()?;
        out.scores.push(series.iter().sum::<f64>() / series.len() as f64);
        out.series_scores.push(series);
        out.middle_counts.push(k);
        out.forecasts.push(fc);
    }
    Ok(out)
}

/// Which windows keep their forecasts in the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeepForecasts {
    None,
    #[default]
    Last,
    All,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub labels: Vec<String>,
    /// Top then bottom series ids.
    pub series_ids: Vec<String>,
    /// `N x J`.
    pub rmsse: DMatrix<f64>,
    /// Per approach, `N x (m+1)`.
    pub series_rmsse: Vec<DMatrix<f64>>,
    /// `N x J`.
    pub middle_counts: DMatrix<f64>,
    /// `(window, per-approach (m+1) x h forecasts)` for retained windows.
    pub forecasts: Vec<(usize, Vec<DMatrix<f64>>)>,
}

impl EvalReport {
    fn from_windows(
        labels: Vec<String>,
        series_ids: Vec<String>,
        windows: Vec<WindowResult>,
        keep: KeepForecasts,
    ) -> Self {
        let n = windows.len();
        let j = labels.len();
        let m1 = series_ids.len();
        let rmsse = DMatrix::from_fn(n, j, |w, a| windows[w].scores[a]);
        let middle_counts = DMatrix::from_fn(n, j, |w, a| windows[w].middle_counts[a]);
        let series_rmsse = (0..j)
            .map(|a| DMatrix::from_fn(n, m1, |w, i| windows[w].series_scores[a][i]))
            .collect();
        let forecasts = windows
            .into_iter()
            .enumerate()
            .filter(|(w, _)| match keep {
                KeepForecasts::None => false,
                KeepForecasts::Last => *w + 1 == n,
                KeepForecasts::All => true,
            })
            .map(|(w, r)| (w, r.forecasts))
            .collect();
        EvalReport {
            labels,
            series_ids,
            rmsse,
            series_rmsse,
            middle_counts,
            forecasts,
        }
    }

    pub fn n_windows(&self) -> usize {
        self.rmsse.nrows()
    }

    pub fn mean_rmsse(&self) -> Vec<f64> {
        self.rmsse.column_iter().map(|c| c.mean()).collect()
    }

    pub fn mean_middle_counts(&self) -> Vec<f64> {
        self.middle_counts.column_iter().map(|c| c.mean()).collect()
    }

    pub fn mcb(&self, alpha: f64) -> Result<Mcb> {
        mcb(&self.rmsse, alpha)
    }

    pub fn column(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Stack reports with identical labels (e.g. simulation replications)
    /// as consecutive windows.
    pub fn stack(reports: Vec<EvalReport>) -> Result<EvalReport> {
        let Some(first) = reports.first() else {
            return Err(Error::Argument("no reports to stack".into()));
        };
        let labels = first.labels.clone();
        let series_ids = first.series_ids.clone();
        if reports.iter().any(|r| r.labels != labels || r.series_ids.len() != series_ids.len()) {
            return Err(Error::Argument("reports disagree on approaches or series".into()));
        }
        let n: usize = reports.iter().map(|r| r.n_windows()).sum();
        let j = labels.len();
        let m1 = series_ids.len();
        let mut rmsse = DMatrix::zeros(n, j);
        let mut middle_counts = DMatrix::zeros(n, j);
        let mut series_rmsse = vec![DMatrix::zeros(n, m1); j];
        let mut forecasts = Vec::new();
        let mut at = 0;
        for r in reports {
            let k = r.n_windows();
            rmsse.rows_mut(at, k).copy_from(&r.rmsse);
            middle_counts.rows_mut(at, k).copy_from(&r.middle_counts);
            for (dst, src) in series_rmsse.iter_mut().zip(&r.series_rmsse) {
                dst.rows_mut(at, k).copy_from(src);
            }
            forecasts.extend(r.forecasts.into_iter().map(|(w, f)| (w + at, f)));
            at += k;
        }
        Ok(EvalReport {
            labels,
            series_ids,
            rmsse,
            series_rmsse,
            middle_counts,
            forecasts,
        })
    }
}

/// Run every window of `plan` over a panel's bottom series.
pub fn run_backtest(
    panel: &SeriesPanel,
    approaches: &[Approach],
    plan: &WindowPlan,
    cov: CovMethod,
    keep: KeepForecasts,
) -> Result<EvalReport> {
    run_backtest_on(&panel.bottom(), &panel.bottom_ids(), panel.seasonal_period(), approaches, plan, cov, keep)
}

pub fn run_backtest_on(
    bottom: &DMatrix<f64>,
    bottom_ids: &[String],
    s: usize,
    approaches: &[Approach],
    plan: &WindowPlan,
    cov: CovMethod,
    keep: KeepForecasts,
) -> Result<EvalReport> {
    if approaches.is_empty() {
        return Err(Error::Argument("no approaches to evaluate".into()));
    }
    if plan.total != bottom.nrows() {
        return Err(Error::Argument(format!(
            "plan covers {} observations, panel has {}",
            plan.total,
            bottom.nrows()
        )));
    }
    let mut labels = HashSet::new();
    if let Some(dup) = approaches.iter().find(|a| !labels.insert(a.label())) {
        return Err(Error::Config(format!("approach '{}' listed twice", dup.label())));
    }
    let n = plan.n_windows()?;
    let windows = (0..n)
        .into_par_iter()
        .map(|w| {
            evaluate_window(bottom, bottom_ids, s, plan.train_len(w), plan.horizon, approaches, cov)
                .map_err(|e| Error::Window {
                    window: w,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut series_ids = vec![TOP_ID.to_string()];
    series_ids.extend(bottom_ids.iter().cloned());
    Ok(EvalReport::from_windows(
        approaches.iter().map(|a| a.label().to_string()).collect(),
        series_ids,
        windows,
        keep,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noisy_panel(t: usize, m: usize, seed: u64) -> (DMatrix<f64>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 0.3).unwrap();
        let x = DMatrix::from_fn(t, m, |i, j| {
            5.0 + j as f64 + if (i + j) % 2 == 0 { 1.0 } else { 0.0 } + n.sample(&mut rng)
        });
        (x, (0..m).map(|j| format!("b{j}")).collect())
    }

    #[test]
    fn shapes_and_determinism() {
        let (x, ids) = noisy_panel(40, 4, 1);
        let plan = WindowPlan::new(40, 30, 4).unwrap();
        let g = Grouping::from_members(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        let approaches = vec![
            Approach::Base,
            Approach::two_level(),
            Approach::fixed("Natural", g.clone()),
            Approach::Combination {
                label: "Combination".into(),
                sources: vec![HierarchySource::TwoLevel, HierarchySource::Fixed(g)],
            },
        ];
        let a = run_backtest_on(&x, &ids, 2, &approaches, &plan, CovMethod::Shrinkage, KeepForecasts::All).unwrap();
        assert_eq!(a.rmsse.shape(), (7, 4));
        assert_eq!(a.series_rmsse[0].shape(), (7, 5));
        assert_eq!(a.forecasts.len(), 7);
        assert_eq!(a.middle_counts[(0, 2)], 2.0);
        assert_eq!(a.middle_counts[(0, 3)], 1.0);
        assert!(a.rmsse.iter().all(|v| v.is_finite() && *v >= 0.0));
        for (_, fc) in &a.forecasts {
            for f in &fc[1..] {
                for c in 0..f.ncols() {
                    let bottom: f64 = f.column(c).rows(1, 4).sum();
                    assert!((f[(0, c)] - bottom).abs() < 1e-8 * (1.0 + bottom.abs()));
                }
            }
        }
        let b = run_backtest_on(&x, &ids, 2, &approaches, &plan, CovMethod::Shrinkage, KeepForecasts::All).unwrap();
        assert_eq!(a.rmsse, b.rmsse);
    }

    #[test]
    fn coherent_noiseless_data_gives_equal_scores() {
        // Bottom series are exact lines: every base forecast is exact, hence coherent.
        let m = 3;
        let t = 40;
        let x = DMatrix::from_fn(t, m, |i, j| 1.0 + (j + 1) as f64 * 0.5 * i as f64);
        let ids: Vec<String> = (0..m).map(|j| format!("b{j}")).collect();
        let plan = WindowPlan::new(t, 30, 4).unwrap();
        let r = run_backtest_on(
            &x,
            &ids,
            1,
            &[Approach::Base, Approach::two_level()],
            &plan,
            CovMethod::Identity,
            KeepForecasts::None,
        )
        .unwrap();
        for w in 0..r.n_windows() {
            assert!((r.rmsse[(w, 0)] - r.rmsse[(w, 1)]).abs() < 1e-6);
        }
    }

    #[test]
    fn window_errors_carry_index() {
        let (mut x, ids) = noisy_panel(40, 3, 2);
        // bottom series 0 repeats exactly with period 2
        for i in 0..40 {
            x[(i, 0)] = if i % 2 == 0 { 1.0 } else { 2.0 };
        }
        let plan = WindowPlan::new(40, 36, 4).unwrap();
        let err = run_backtest_on(&x, &ids, 2, &[Approach::Base], &plan, CovMethod::Shrinkage, KeepForecasts::None)
            .unwrap_err();
        assert!(matches!(err, Error::Window { window: 0, .. }));
        assert_eq!(err.kind(), "ScaleError");
    }

    #[test]
    fn twin_with_identity_matches_original() {
        let (x, ids) = noisy_panel(36, 4, 3);
        let plan = WindowPlan::new(36, 30, 6).unwrap();
        let g = Grouping::from_members(4, &[vec![0, 2], vec![1, 3]]).unwrap();
        let nat = Approach::fixed("Natural", g);
        let tw = nat.twinned("Twin-001", &[0, 1, 2, 3]).unwrap();
        let r = run_backtest_on(&x, &ids, 2, &[nat, tw], &plan, CovMethod::Shrinkage, KeepForecasts::None).unwrap();
        assert_eq!(r.rmsse[(0, 0)], r.rmsse[(0, 1)]);
        assert_eq!(
            Approach::Base.twinned("x", &[0, 1]).unwrap_err().kind(),
            "ArgumentError"
        );
    }
}
