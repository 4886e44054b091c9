//! Config-driven experiments.
//!
//! A config names a data source (a simulated panel or a CSV panel with
//! optional hierarchy metadata), the approaches to compare, an optional set of
//! permutation twins and the window plan. [`run_experiment`] evaluates them
//! and writes an artifact directory:
//!
//! | file | content |
//! |---|---|
//! | `rmsse.csv` | `window,approach,score` |
//! | `series_rmsse.csv` | `approach,series,score` averaged over windows |
//! | `summary.csv` | `approach,mean_rmsse,mean_rank,mean_middle_series` |
//! | `mcb.json` | mean ranks and MCB intervals |
//! | `ranks.svg` | rank-interval plot |
//! | `forecasts.csv` | `window,approach,series,step,value` for retained windows |
//! | `twins.json` | rank position of the twinned hierarchy (twin runs only) |
//! | `manifest.json` | embedded config, its hash, seeds and output hashes |
//!
//! Outputs carry no timestamps, so rerunning a manifest's config
//! reproduces every file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::backtest::{run_backtest, Approach, EvalReport, HierarchySource, KeepForecasts};
use crate::cluster::ClusterMethod;
use crate::error::{Error, Result};
use crate::evaluate::{Mcb, WindowPlan};
use crate::panel::{read_natural_hierarchy, read_panel, read_panel_with_metadata, Grouping, SeriesPanel};
use crate::permute::draw_permutations;
use crate::reconcile::CovMethod;
use crate::simulate::{replication_config, simulate_panel, true_grouping, DgpConfig, GroupingScheme};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream (simulated panels, twin permutations).
    #[serde(default)]
    pub seed: u64,
    /// `mint`, `wls` or `ols`.
    #[serde(default = "default_reconciliation")]
    pub reconciliation: String,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Defaults to 2 for simulated panels and 12 for CSV panels.
    #[serde(default)]
    pub seasonal_period: Option<usize>,
    /// First training length. Defaults to `T - horizon` for simulated panels
    /// (one split per replication) and 96 for CSV panels.
    #[serde(default)]
    pub initial: Option<usize>,
    pub approaches: Vec<String>,
    /// Hierarchies pooled by `Combination` and `Grouped`; all twelve
    /// clustering approaches when omitted.
    #[serde(default)]
    pub members: Option<Vec<String>>,
    /// Number of permutation twins of `twin_of`.
    #[serde(default)]
    pub twins: usize,
    #[serde(default)]
    pub twin_of: Option<String>,
    #[serde(default)]
    pub output_forecasts: KeepForecasts,
    #[serde(default = "default_alpha")]
    pub mcb_alpha: f64,
    pub data: DataSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Simulate {
        #[serde(default = "default_replications")]
        replications: usize,
        /// Generator settings; its `seed` is replaced by the root seed.
        #[serde(default)]
        dgp: DgpConfig,
    },
    Csv {
        path: PathBuf,
        /// Natural hierarchy JSON (`{"middle id": ["bottom id", ...]}`).
        #[serde(default)]
        hierarchy: Option<PathBuf>,
    },
}

fn default_reconciliation() -> String {
    "mint".into()
}

fn default_horizon() -> usize {
    12
}

fn default_alpha() -> f64 {
    0.05
}

fn default_replications() -> usize {
    100
}

impl ExperimentConfig {
    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    /// Read a config file; relative data paths are taken relative to it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        if let DataSource::Csv { path, hierarchy } = &mut cfg.data {
            if path.is_relative() {
                *path = dir.join(&*path);
            }
            if let Some(h) = hierarchy.as_mut().filter(|h| h.is_relative()) {
                *h = dir.join(&*h);
            }
        }
        Ok(cfg)
    }

    pub fn cov_method(&self) -> Result<CovMethod> {
        self.reconciliation.parse()
    }

    pub fn seasonal_period(&self) -> usize {
        self.seasonal_period.unwrap_or(match self.data {
            DataSource::Simulate { .. } => 2,
            DataSource::Csv { .. } => 12,
        })
    }

    /// Canonical JSON form, the input to [`ExperimentConfig::hash`].
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().to_string().as_bytes())
    }

    fn check(&self) -> Result<()> {
        self.cov_method()?;
        if self.approaches.is_empty() && self.twins == 0 {
            return Err(Error::Config("no approaches listed".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if self.seasonal_period() == 0 {
            return Err(Error::Config("seasonal_period must be positive".into()));
        }
        if !(self.mcb_alpha > 0.0 && self.mcb_alpha < 1.0) {
            return Err(Error::Config(format!("mcb_alpha = {} is outside (0, 1)", self.mcb_alpha)));
        }
        if self.twins > 0 && self.twin_of.is_none() {
            return Err(Error::Config("twins requested without twin_of".into()));
        }
        if let DataSource::Simulate { replications, .. } = self.data {
            if replications == 0 {
                return Err(Error::Config("replications must be positive".into()));
            }
        }
        Ok(())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// What a panel knows about its own hierarchies.
struct Context<'a> {
    natural: Option<&'a Grouping>,
    labels: Option<&'a [u8]>,
}

enum Named {
    Base,
    Combination,
    Grouped,
    Hierarchy(String, HierarchySource),
}

fn canonical(name: &str) -> String {
    name.trim().to_ascii_lowercase()
}

fn named(name: &str, ctx: &Context) -> Result<Named> {
    match canonical(name).as_str() {
        "base" => return Ok(Named::Base),
        "combination" => return Ok(Named::Combination),
        "grouped" => return Ok(Named::Grouped),
        "two-level" => return Ok(Named::Hierarchy("Two-level".into(), HierarchySource::TwoLevel)),
        "natural" => {
            let g = ctx.natural.ok_or_else(|| {
                Error::Config("'Natural' requested but the data source has no hierarchy metadata".into())
            })?;
            return Ok(Named::Hierarchy("Natural".into(), HierarchySource::Fixed(g.clone())));
        }
        _ => {}
    }
    if let Ok(method) = name.trim().parse::<ClusterMethod>() {
        return Ok(Named::Hierarchy(method.name(), HierarchySource::Clustered(method)));
    }
    if canonical(name).starts_with("cluster-") {
        let scheme: GroupingScheme = name.trim()["cluster-".len()..].parse()?;
        let labels = ctx.labels.ok_or_else(|| {
            Error::Config(format!("'{name}' needs true cluster labels, available only for simulated data"))
        })?;
        return Ok(Named::Hierarchy(scheme.label(), HierarchySource::Fixed(true_grouping(labels, scheme)?)));
    }
    Err(Error::Config(format!("unknown approach '{name}'")))
}

fn member_sources(cfg: &ExperimentConfig, ctx: &Context) -> Result<Vec<HierarchySource>> {
    let names: Vec<String> = match &cfg.members {
        Some(names) => names.clone(),
        None => ClusterMethod::all().iter().map(|c| c.name()).collect(),
    };
    if names.is_empty() {
        return Err(Error::Config("members list is empty".into()));
    }
    names
        .iter()
        .map(|n| match named(n, ctx)? {
            Named::Hierarchy(_, src) => Ok(src),
            _ => Err(Error::Config(format!("member '{n}' is not a hierarchy"))),
        })
        .collect()
}

fn build_approaches(cfg: &ExperimentConfig, ctx: &Context, perms: &[Vec<usize>]) -> Result<Vec<Approach>> {
    let mut names: Vec<&str> = cfg.approaches.iter().map(String::as_str).collect();
    if let Some(base) = cfg.twin_of.as_deref().filter(|_| cfg.twins > 0) {
        if !names.iter().any(|n| canonical(n) == canonical(base)) {
            names.insert(0, base);
        }
    }
    let pooled = names
        .iter()
        .any(|n| matches!(canonical(n).as_str(), "combination" | "grouped"));
    let members = if pooled { member_sources(cfg, ctx)? } else { Vec::new() };
    let mut out = Vec::with_capacity(names.len() + perms.len());
    let mut twin_base = None;
    for name in names {
        let approach = match named(name, ctx)? {
            Named::Base => Approach::Base,
            Named::Combination => Approach::Combination {
                label: "Combination".into(),
                sources: members.clone(),
            },
            Named::Grouped => Approach::grouped(members.clone()),
            Named::Hierarchy(label, source) => Approach::Reconciled { label, source },
        };
        if cfg.twin_of.as_deref().is_some_and(|b| canonical(b) == canonical(name)) {
            twin_base = Some(approach.clone());
        }
        out.push(approach);
    }
    if !perms.is_empty() {
        let base = twin_base.expect("twin_of is listed");
        for (i, p) in perms.iter().enumerate() {
            out.push(base.twinned(twin_label(i), p).map_err(|e| Error::Config(e.to_string()))?);
        }
    }
    Ok(out)
}

/// Label of the `i`-th (zero-based) twin.
pub fn twin_label(i: usize) -> String {
    format!("Twin-{:03}", i + 1)
}

/// Permutations used for the twins of `cfg` on `m` bottom series.
pub fn twin_permutations(cfg: &ExperimentConfig, m: usize) -> Vec<Vec<usize>> {
    draw_permutations(m, cfg.twins, cfg.seed)
}

/// Where the twinned hierarchy sits among its twins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwinSummary {
    pub label: String,
    pub mean_rank: f64,
    pub best_twin_rank: f64,
    pub worst_twin_rank: f64,
    /// 1 + number of hierarchies (twins) with a strictly lower mean rank.
    pub position: usize,
    pub n_twins: usize,
    /// Twins whose MCB interval overlaps the hierarchy's interval.
    pub overlapping_twins: usize,
    pub strictly_inside: bool,
}

fn twin_summary(report: &EvalReport, mcb: &Mcb, label: &str) -> Result<TwinSummary> {
    let base = report
        .column(label)
        .ok_or_else(|| Error::Config(format!("'{label}' is not among the evaluated approaches")))?;
    let twins: Vec<usize> = (0..report.labels.len())
        .filter(|&j| report.labels[j].starts_with("Twin-"))
        .collect();
    if twins.is_empty() {
        return Err(Error::Config("twin run without twins".into()));
    }
    let r = mcb.mean_ranks[base];
    let ranks: Vec<f64> = twins.iter().map(|&j| mcb.mean_ranks[j]).collect();
    let best = ranks.iter().copied().fold(f64::INFINITY, f64::min);
    let worst = ranks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TwinSummary {
        label: label.to_string(),
        mean_rank: r,
        best_twin_rank: best,
        worst_twin_rank: worst,
        position: 1 + ranks.iter().filter(|&&t| t < r).count(),
        n_twins: twins.len(),
        overlapping_twins: ranks.iter().filter(|&&t| (t - r).abs() <= 2.0 * mcb.half_width).count(),
        strictly_inside: best < r && r < worst,
    })
}

/// Everything an experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: EvalReport,
    /// `None` when there are fewer than two windows or approaches.
    pub mcb: Option<Mcb>,
    pub twins: Option<TwinSummary>,
    pub manifest: Value,
    pub files: Vec<PathBuf>,
}

struct Evaluated {
    report: EvalReport,
    seeds: Value,
    inputs: Value,
}

fn evaluate(cfg: &ExperimentConfig) -> Result<Evaluated> {
    cfg.check()?;
    let cov = cfg.cov_method()?;
    let s = cfg.seasonal_period();
    let h = cfg.horizon;
    match &cfg.data {
        DataSource::Simulate { replications, dgp } => {
            let root = DgpConfig {
                seed: cfg.seed,
                ..dgp.clone()
            };
            root.validate()?;
            let initial = cfg.initial.unwrap_or(root.t.saturating_sub(h));
            let plan = WindowPlan::new(root.t, initial, h).map_err(|e| Error::Config(e.to_string()))?;
            let perms = twin_permutations(cfg, root.m);
            let configs: Vec<DgpConfig> = (0..*replications as u64).map(|r| replication_config(&root, r)).collect();
            let reports = configs
                .par_iter()
                .enumerate()
                .map(|(r, dgp)| {
                    let (panel, labels) = simulate_panel(dgp)?;
                    let panel = panel.with_seasonal_period(s)?;
                    let ctx = Context {
                        natural: None,
                        labels: Some(&labels),
                    };
                    let approaches = build_approaches(cfg, &ctx, &perms)?;
                    run_backtest(&panel, &approaches, &plan, cov, cfg.output_forecasts).map_err(|e| match e {
                        Error::Window { source, .. } => Error::Window { window: r, source },
                        e => e,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut report = EvalReport::stack(reports)?;
            if cfg.output_forecasts == KeepForecasts::Last {
                let last = report.n_windows() - 1;
                report.forecasts.retain(|(w, _)| *w == last);
            }
            Ok(Evaluated {
                report,
                seeds: json!({
                    "root": cfg.seed,
                    "replications": configs.iter().map(|c| c.seed).collect::<Vec<_>>(),
                    "twin_permutations": perms,
                }),
                inputs: Value::Null,
            })
        }
        DataSource::Csv { path, hierarchy } => {
            let (panel, natural) = match hierarchy {
                Some(hpath) => {
                    let panel = read_panel_with_metadata(path, s, hpath)?;
                    let natural = read_natural_hierarchy(hpath, &panel)?.grouping;
                    (panel, Some(natural))
                }
                None => (read_panel(path, s)?, None),
            };
            let plan = WindowPlan::new(panel.len(), cfg.initial.unwrap_or(96), h)
                .map_err(|e| Error::Config(e.to_string()))?;
            let perms = twin_permutations(cfg, panel.m());
            let ctx = Context {
                natural: natural.as_ref(),
                labels: None,
            };
            let approaches = build_approaches(cfg, &ctx, &perms)?;
            let report = run_backtest(&panel, &approaches, &plan, cov, cfg.output_forecasts)?;
            let mut inputs = serde_json::Map::new();
            for p in std::iter::once(path).chain(hierarchy) {
                let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
                inputs.insert(p.display().to_string(), Value::String(sha256_hex(&bytes)));
            }
            Ok(Evaluated {
                report,
                seeds: json!({ "root": cfg.seed, "twin_permutations": perms }),
                inputs: Value::Object(inputs),
            })
        }
    }
}

/// Evaluate every configured approach (plus twins, if any) and write the
/// artifact directory.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<ExperimentOutput> {
    run(cfg, out_dir.as_ref(), false)
}

/// Evaluate `twin_of` against its `twins` permutation twins under identical
/// windows and report where it ranks among them.
pub fn twin_experiment(cfg: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<ExperimentOutput> {
    if cfg.twin_of.is_none() {
        return Err(Error::Config("twin run needs twin_of".into()));
    }
    if cfg.twins == 0 {
        return Err(Error::Config("twin run needs at least one twin".into()));
    }
    run(cfg, out_dir.as_ref(), true)
}

fn run(cfg: &ExperimentConfig, out_dir: &Path, twin_mode: bool) -> Result<ExperimentOutput> {
    let Evaluated { report, seeds, inputs } = evaluate(cfg)?;
    let mcb = if report.n_windows() >= 2 && report.labels.len() >= 2 {
        Some(report.mcb(cfg.mcb_alpha)?)
    } else {
        None
    };
    let twins = match (&mcb, twin_mode) {
        (Some(m), true) => {
            let base = cfg.twin_of.as_deref().expect("checked");
            let label = report
                .labels
                .iter()
                .find(|l| canonical(l) == canonical(base))
                .cloned()
                .unwrap_or_else(|| base.to_string());
            Some(twin_summary(&report, m, &label)?)
        }
        (None, true) => return Err(Error::Config("twin ranks need at least two windows".into())),
        _ => None,
    };

    let mut files: Vec<(&str, String)> = vec![
        ("rmsse.csv", rmsse_csv(&report)),
        ("series_rmsse.csv", series_csv(&report)),
        ("summary.csv", summary_csv(&report, mcb.as_ref())),
    ];
    if let Some(m) = &mcb {
        files.push(("mcb.json", mcb_json(&report, m)));
        files.push(("ranks.svg", rank_svg(&report.labels, m)));
    }
    if !report.forecasts.is_empty() {
        files.push(("forecasts.csv", forecasts_csv(&report)));
    }
    if let Some(t) = &twins {
        files.push(("twins.json", serde_json::to_string_pretty(t).expect("summary serializes") + "\n"));
    }

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut outputs = serde_json::Map::new();
    let mut written = Vec::new();
    for (name, text) in &files {
        let path = out_dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        outputs.insert(name.to_string(), Value::String(sha256_hex(text.as_bytes())));
        written.push(path);
    }
    let manifest = json!({
        "mode": if twin_mode { "twin-run" } else { "run" },
        "config_sha256": cfg.hash(),
        "config": cfg.to_json(),
        "seeds": seeds,
        "inputs": inputs,
        "outputs": outputs,
    });
    let path = out_dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(ExperimentOutput {
        report,
        mcb,
        twins,
        manifest,
        files: written,
    })
}

/// Rerun the experiment recorded in a manifest into `out_dir`.
pub fn rerun_manifest(manifest: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<ExperimentOutput> {
    let path = manifest.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
    let cfg: ExperimentConfig = serde_json::from_value(value["config"].clone())
        .map_err(|e| Error::Config(format!("manifest config: {e}")))?;
    if value["config_sha256"].as_str() != Some(cfg.hash().as_str()) {
        return Err(Error::Config("manifest config does not match its recorded hash".into()));
    }
    match value["mode"].as_str() {
        Some("twin-run") => twin_experiment(&cfg, out_dir),
        _ => run_experiment(&cfg, out_dir),
    }
}

/// Output files whose hash differs from the manifest's record.
pub fn manifest_mismatches(recorded: &Value, rerun: &Value) -> Vec<String> {
    let empty = serde_json::Map::new();
    let a = recorded["outputs"].as_object().unwrap_or(&empty);
    let b = rerun["outputs"].as_object().unwrap_or(&empty);
    let mut names: Vec<&String> = a.keys().chain(b.keys()).collect();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .filter(|n| a.get(*n) != b.get(*n))
        .cloned()
        .collect()
}

fn rmsse_csv(r: &EvalReport) -> String {
    let mut s = String::from("window,approach,score\n");
    for w in 0..r.n_windows() {
        for (j, label) in r.labels.iter().enumerate() {
            let _ = writeln!(s, "{w},{label},{}", r.rmsse[(w, j)]);
        }
    }
    s
}

fn series_csv(r: &EvalReport) -> String {
    let mut s = String::from("approach,series,score\n");
    for (label, m) in r.labels.iter().zip(&r.series_rmsse) {
        for (i, id) in r.series_ids.iter().enumerate() {
            let _ = writeln!(s, "{label},{id},{}", m.column(i).mean());
        }
    }
    s
}

fn summary_csv(r: &EvalReport, mcb: Option<&Mcb>) -> String {
    let mut s = String::from("approach,mean_rmsse,mean_rank,mean_middle_series\n");
    let means = r.mean_rmsse();
    let counts = r.mean_middle_counts();
    for (j, label) in r.labels.iter().enumerate() {
        let rank = mcb.map_or(String::new(), |m| m.mean_ranks[j].to_string());
        let _ = writeln!(s, "{label},{},{rank},{}", means[j], counts[j]);
    }
    s
}

fn mcb_json(r: &EvalReport, m: &Mcb) -> String {
    let (lower, upper): (Vec<f64>, Vec<f64>) = (0..r.labels.len()).map(|j| m.interval(j)).unzip();
    let v = json!({
        "alpha": m.alpha,
        "q": m.q,
        "half_width": m.half_width,
        "windows": r.n_windows(),
        "labels": r.labels,
        "mean_ranks": m.mean_ranks,
        "lower": lower,
        "upper": upper,
        "best": r.labels[m.best],
        "indistinguishable": m.indistinguishable,
    });
    serde_json::to_string_pretty(&v).expect("mcb serializes") + "\n"
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Dot-and-interval plot of mean ranks, best first, with the best
/// approach's interval shaded.
pub fn rank_svg(labels: &[String], m: &Mcb) -> String {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| m.mean_ranks[a].total_cmp(&m.mean_ranks[b]).then(a.cmp(&b)));
    let lo = order.iter().map(|&j| m.interval(j).0).fold(f64::INFINITY, f64::min).min(1.0);
    let hi = order.iter().map(|&j| m.interval(j).1).fold(f64::NEG_INFINITY, f64::max);
    let (left, plot_w, row_h, top) = (190.0, 420.0, 20.0, 30.0);
    let width = left + plot_w + 30.0;
    let height = top + row_h * labels.len() as f64 + 40.0;
    let x = |r: f64| left + (r - lo) / (hi - lo).max(1e-9) * plot_w;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let (blo, bhi) = m.interval(m.best);
    let _ = writeln!(
        s,
        r##"<rect x="{:.2}" y="{top}" width="{:.2}" height="{:.2}" fill="#dde8f5"/>"##,
        x(blo),
        x(bhi) - x(blo),
        row_h * labels.len() as f64
    );
    for (row, &j) in order.iter().enumerate() {
        let y = top + row_h * (row as f64 + 0.5);
        let (a, b) = m.interval(j);
        let colour = if j == m.best {
            "#1f4e8c"
        } else if m.indistinguishable[j] {
            "#555555"
        } else {
            "#b03030"
        };
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{} - {:.2}</text>"#,
            left - 8.0,
            y + 4.0,
            escape_xml(&labels[j]),
            m.mean_ranks[j]
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{colour}" stroke-width="1.5"/>"#,
            x(a),
            x(b)
        );
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{y:.2}" r="3.5" fill="{colour}"/>"#,
            x(m.mean_ranks[j])
        );
    }
    let axis_y = top + row_h * labels.len() as f64 + 8.0;
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{axis_y:.2}" x2="{:.2}" y2="{axis_y:.2}" stroke="black"/>"#,
        left + plot_w
    );
    let step = ((hi - lo) / 8.0).ceil().max(1.0);
    let mut tick = lo.ceil();
    while tick <= hi {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{tick}</text>"#,
            x(tick),
            axis_y + 14.0
        );
        tick += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="16" text-anchor="middle">Mean rank ({}% MCB intervals)</text>"#,
        left + plot_w / 2.0,
        ((1.0 - m.alpha) * 100.0).round()
    );
    s.push_str("</svg>\n");
    s
}

fn forecasts_csv(r: &EvalReport) -> String {
    let mut s = String::from("window,approach,series,step,value\n");
    for (w, per_approach) in &r.forecasts {
        for (label, fc) in r.labels.iter().zip(per_approach) {
            for (i, id) in r.series_ids.iter().enumerate() {
                for k in 0..fc.ncols() {
                    let _ = writeln!(s, "{w},{label},{id},{},{}", k + 1, fc[(i, k)]);
                }
            }
        }
    }
    s
}

/// Load a panel as an experiment would, for the single-step CLI commands.
pub fn load_panel(cfg: &ExperimentConfig) -> Result<(SeriesPanel, Option<Grouping>)> {
    let s = cfg.seasonal_period();
    match &cfg.data {
        DataSource::Csv { path, hierarchy: Some(h) } => {
            let panel = read_panel_with_metadata(path, s, h)?;
            let g = read_natural_hierarchy(h, &panel)?.grouping;
            Ok((panel, Some(g)))
        }
        DataSource::Csv { path, hierarchy: None } => Ok((read_panel(path, s)?, None)),
        DataSource::Simulate { dgp, .. } => {
            let dgp = replication_config(&DgpConfig { seed: cfg.seed, ..dgp.clone() }, 0);
            let (panel, _) = simulate_panel(&dgp)?;
            Ok((panel.with_seasonal_period(s)?, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sim(approaches: &[&str]) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            r#"
seed = 7
horizon = 4
approaches = [{}]
[data]
source = "simulate"
replications = 3
dgp = {{ m = 12, t = 40 }}
"#,
            approaches.iter().map(|a| format!("\"{a}\"")).collect::<Vec<_>>().join(", ")
        ))
        .unwrap()
    }

    #[test]
    fn parses_toml_and_json() {
        let cfg = small_sim(&["Base", "Two-level"]);
        assert_eq!(cfg.seasonal_period(), 2);
        assert_eq!(cfg.cov_method().unwrap(), CovMethod::Shrinkage);
        let json = cfg.to_json().to_string();
        let back = ExperimentConfig::parse(&json).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(ExperimentConfig::parse("approaches = []\nbogus = 1\n[data]\nsource = \"simulate\"").unwrap_err().kind(), "ConfigError");
    }

    #[test]
    fn unknown_names_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_experiment(&small_sim(&["Base", "TS-XYZ-HC"]), dir.path()).unwrap_err();
        assert_eq!(err.kind(), "ConfigError");
        let err = run_experiment(&small_sim(&["Natural"]), dir.path()).unwrap_err();
        assert_eq!(err.kind(), "ConfigError");
        let mut cfg = small_sim(&["Base"]);
        cfg.reconciliation = "bu".into();
        assert_eq!(run_experiment(&cfg, dir.path()).unwrap_err().kind(), "ConfigError");
    }

    #[test]
    fn simulated_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_sim(&["base", "two-level", "Cluster-trend1", "Combination"]);
        let mut cfg = cfg;
        cfg.members = Some(vec!["Cluster-trend1".into(), "Cluster-season".into()]);
        let out = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(out.report.labels, ["Base", "Two-level", "Cluster-trend1", "Combination"]);
        assert_eq!(out.report.n_windows(), 3);
        assert_eq!(out.report.middle_counts[(0, 2)], 3.0);
        assert_eq!(out.report.middle_counts[(0, 3)], 2.5);
        for f in ["rmsse.csv", "series_rmsse.csv", "summary.csv", "mcb.json", "ranks.svg", "forecasts.csv", MANIFEST] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let rmsse = fs::read_to_string(dir.path().join("rmsse.csv")).unwrap();
        assert_eq!(rmsse.lines().count(), 1 + 3 * 4);

        let again = tempfile::tempdir().unwrap();
        let rerun = rerun_manifest(dir.path().join(MANIFEST), again.path()).unwrap();
        assert!(manifest_mismatches(&out.manifest, &rerun.manifest).is_empty());
    }

    #[test]
    fn twin_run_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_sim(&[]);
        cfg.twins = 3;
        cfg.twin_of = Some("Cluster-trend-season".into());
        let out = twin_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(out.report.labels, ["Cluster-trend-season", "Twin-001", "Twin-002", "Twin-003"]);
        let t = out.twins.unwrap();
        assert_eq!(t.n_twins, 3);
        assert!((1..=4).contains(&t.position));
        assert!(dir.path().join("twins.json").exists());
        cfg.twins = 0;
        assert_eq!(twin_experiment(&cfg, dir.path()).unwrap_err().kind(), "ConfigError");
    }
}
