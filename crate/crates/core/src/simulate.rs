//! Synthetic panel with six known clusters of trend x seasonality.
//!
//! Each bottom series follows `Y_t = alpha*t + eps_t + S_t + xi_t` where the
//! period-2 seasonal term is `beta` when `t - delta` is even and `gamma`
//! otherwise. Clusters are numbered 1..=6:
//!
//! | cluster | 1 | 2 | 3 | 4 | 5 | 6 |
//! |---|---|---|---|---|---|---|
//! | trend | up | up | none | none | down | down |
//! | seasonality | odd | even | odd | even | odd | even |

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::panel::{parse_period, Grouping, SeriesPanel};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DgpConfig {
    /// Number of bottom series, a multiple of 6.
    pub m: usize,
    /// Observations per series.
    pub t: usize,
    /// Slopes for increasing, decreasing and flat clusters.
    pub alphas: [f64; 3],
    pub beta_range: [f64; 2],
    pub gamma_range: [f64; 2],
    pub var_xi: f64,
    pub var_eps_up: f64,
    pub var_eps_down: f64,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            m: 120,
            t: 144,
            alphas: [0.001, -0.002, 0.0],
            beta_range: [2.0, 3.0],
            gamma_range: [0.0, 1.0],
            var_xi: 0.25,
            var_eps_up: 2.5e-5,
            var_eps_down: 4.9e-5,
            seed: 0,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || !self.m.is_multiple_of(6) {
            return Err(Error::Config(format!("m = {} is not a positive multiple of 6", self.m)));
        }
        if self.t < 2 || !self.t.is_multiple_of(2) {
            return Err(Error::Config(format!("T = {} must be even and at least 2", self.t)));
        }
        for (name, v) in [
            ("var_xi", self.var_xi),
            ("var_eps_up", self.var_eps_up),
            ("var_eps_down", self.var_eps_down),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be a finite non-negative variance")));
            }
        }
        for (name, [lo, hi]) in [("beta_range", self.beta_range), ("gamma_range", self.gamma_range)] {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::Config(format!("{name} = [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }
}

/// Trend direction of a cluster label (1..=6).
pub fn cluster_trend(label: u8) -> Trend {
    match label {
        1 | 2 => Trend::Increase,
        3 | 4 => Trend::Flat,
        _ => Trend::Decrease,
    }
}

/// Whether a cluster label has its seasonal peak at odd `t`.
pub fn cluster_is_odd(label: u8) -> bool {
    label % 2 == 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Increase,
    Flat,
    Decrease,
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn normal(sd: f64) -> Option<Normal<f64>> {
    (sd > 0.0).then(|| Normal::new(0.0, sd).expect("finite positive sd"))
}

/// Generate one panel and the true cluster label (1..=6) of every bottom series.
pub fn simulate_panel(cfg: &DgpConfig) -> Result<(SeriesPanel, Vec<u8>)> {
    cfg.validate()?;
    let per_cluster = cfg.m / 6;
    let mut rng = substream(cfg.seed, "simulate", 0);
    let xi = normal(cfg.var_xi.sqrt());
    let eps_up = normal(cfg.var_eps_up.sqrt());
    let eps_down = normal(cfg.var_eps_down.sqrt());

    let mut values = DMatrix::zeros(cfg.t, cfg.m);
    let mut labels = Vec::with_capacity(cfg.m);
    for j in 0..cfg.m {
        let label = (j / per_cluster + 1) as u8;
        labels.push(label);
        let (alpha, eps) = match cluster_trend(label) {
            Trend::Increase => (cfg.alphas[0], eps_up.as_ref()),
            Trend::Decrease => (cfg.alphas[1], eps_down.as_ref()),
            Trend::Flat => (cfg.alphas[2], None),
        };
        let delta = usize::from(cluster_is_odd(label));
        let beta = uniform(&mut rng, cfg.beta_range);
        let gamma = uniform(&mut rng, cfg.gamma_range);
        for t in 1..=cfg.t {
            let seasonal = if (t + 2 - delta) % 2 == 0 { beta } else { gamma };
            let level = alpha * t as f64 + eps.map_or(0.0, |d| d.sample(&mut rng));
            let noise = xi.as_ref().map_or(0.0, |d| d.sample(&mut rng));
            values[(t - 1, j)] = level + seasonal + noise;
        }
    }
    let ids = (1..=cfg.m).map(|j| format!("S{j:03}")).collect();
    let start = parse_period("2000-01").expect("valid literal");
    let panel = SeriesPanel::from_bottom(ids, values, start, 2)?;
    Ok((panel, labels))
}

/// The configuration of replication `rep`: its own seed substream under `cfg.seed`.
pub fn replication_config(cfg: &DgpConfig, rep: u64) -> DgpConfig {
    DgpConfig {
        seed: crate::rng::substream_seed(cfg.seed, "replication", rep),
        ..cfg.clone()
    }
}

/// Middle-level schemes built from the true clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupingScheme {
    /// Six clusters, one per trend x seasonality pair.
    TrendSeason,
    /// Increasing / flat / decreasing.
    Trend1,
    /// Any trend / no trend.
    Trend2,
    /// Odd / even seasonality.
    Season,
}

impl GroupingScheme {
    pub const ALL: [GroupingScheme; 4] = [
        GroupingScheme::TrendSeason,
        GroupingScheme::Trend1,
        GroupingScheme::Trend2,
        GroupingScheme::Season,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GroupingScheme::TrendSeason => "trend-season",
            GroupingScheme::Trend1 => "trend1",
            GroupingScheme::Trend2 => "trend2",
            GroupingScheme::Season => "season",
        }
    }

    /// Approach label used in reports (`Cluster-trend-season`, ...).
    pub fn label(&self) -> String {
        format!("Cluster-{}", self.name())
    }

    fn group_of(&self, label: u8) -> usize {
        match self {
            GroupingScheme::TrendSeason => usize::from(label - 1),
            GroupingScheme::Trend1 => match cluster_trend(label) {
                Trend::Increase => 0,
                Trend::Flat => 1,
                Trend::Decrease => 2,
            },
            GroupingScheme::Trend2 => usize::from(cluster_trend(label) == Trend::Flat),
            GroupingScheme::Season => usize::from(!cluster_is_odd(label)),
        }
    }

    fn n_groups(&self) -> usize {
        match self {
            GroupingScheme::TrendSeason => 6,
            GroupingScheme::Trend1 => 3,
            GroupingScheme::Trend2 | GroupingScheme::Season => 2,
        }
    }
}

impl FromStr for GroupingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.strip_prefix("Cluster-").unwrap_or(s);
        GroupingScheme::ALL
            .into_iter()
            .find(|g| g.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown grouping scheme '{s}'")))
    }
}

/// Grouping of the bottom series according to their true cluster labels.
pub fn true_grouping(labels: &[u8], scheme: GroupingScheme) -> Result<Grouping> {
    if let Some(bad) = labels.iter().find(|l| !(1..=6).contains(*l)) {
        return Err(Error::Argument(format!("cluster label {bad} outside 1..=6")));
    }
    let m = labels.len();
    let mut rows = vec![vec![false; m]; scheme.n_groups()];
    for (j, &label) in labels.iter().enumerate() {
        rows[scheme.group_of(label)][j] = true;
    }
    rows.retain(|r| r.iter().any(|&b| b));
    Grouping::from_rows(m, rows)
}
