//! `hiercast` command-line interface.
//!
//! Every subcommand prints a one-line JSON summary on success. Failures print
//! `{"error": <kind>, "message": <text>}` to stderr and exit with status 1
//! (2 for usage errors).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hiercast::backtest::KeepForecasts;
use hiercast::baseforecast::{forecast_hierarchy, ForecastBundle};
use hiercast::cluster::ClusterMethod;
use hiercast::combine::combine;
use hiercast::experiment::{
    manifest_mismatches, rerun_manifest, run_experiment, twin_experiment, twin_label, DataSource, ExperimentConfig,
    ExperimentOutput,
};
use hiercast::panel::{
    format_value, read_natural_hierarchy, read_panel, read_panel_with_metadata, summing_matrix, write_hierarchy,
    write_panel, Grouping, Level, SeriesPanel,
};
use hiercast::permute::{draw_permutations, twin};
use hiercast::reconcile::{estimate_w, reconcile, CovMethod};
use hiercast::represent::{feature_matrix, FEATURE_NAMES};
use hiercast::simulate::{replication_config, simulate_panel, DgpConfig};
use hiercast::{Error, Result};
use nalgebra::DMatrix;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "hiercast", version, about = "Cluster-built hierarchies and forecast reconciliation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate panels with six known clusters.
    Simulate(SimulateArgs),
    /// Dump the feature matrix of the bottom series.
    Features(FeaturesArgs),
    /// Build a middle level with one of the twelve clustering approaches.
    Cluster(ClusterArgs),
    /// ETS base forecasts for every series of a hierarchy.
    Forecast(ForecastArgs),
    /// Base forecasts reconciled by trace minimization.
    Reconcile(ReconcileArgs),
    /// Random permutations and twin hierarchies.
    Permute(PermuteArgs),
    /// Equal-weight combination of reconciled forecast files.
    Combine(CombineArgs),
    /// Expanding-window evaluation of approaches on a CSV panel.
    Evaluate(EvaluateArgs),
    /// Run an experiment config, or rerun a manifest.
    Run(RunArgs),
    /// Evaluate a hierarchy against its permutation twins.
    TwinRun(TwinRunArgs),
}

#[derive(Args)]
struct PanelArgs {
    /// Wide panel CSV (`date,<id1>,...`).
    #[arg(long)]
    data: PathBuf,
    /// Natural hierarchy JSON; its keys mark middle-level columns.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    seasonal_period: usize,
}

impl PanelArgs {
    fn load(&self) -> Result<(SeriesPanel, Option<Grouping>)> {
        match &self.hierarchy {
            Some(h) => {
                let panel = read_panel_with_metadata(&self.data, self.seasonal_period, h)?;
                let g = read_natural_hierarchy(h, &panel)?.grouping;
                Ok((panel, Some(g)))
            }
            None => Ok((read_panel(&self.data, self.seasonal_period)?, None)),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 120)]
    m: usize,
    #[arg(long, default_value_t = 144)]
    t: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    panel: PanelArgs,
    /// Compute features of the one-step ETS residuals instead of the series.
    #[arg(long)]
    residuals: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    panel: PanelArgs,
    /// One of the twelve approach names, e.g. `TSF-EUC-HC`.
    #[arg(long)]
    approach: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ForecastArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long, default_value_t = 12)]
    h: usize,
    /// Long CSV `series,level,step,value`.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV of the selected models.
    #[arg(long)]
    models: Option<PathBuf>,
}

#[derive(Args)]
struct ReconcileArgs {
    #[command(flatten)]
    panel: PanelArgs,
    /// Hierarchy JSON to reconcile over instead of the natural one.
    #[arg(long)]
    grouping: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    h: usize,
    #[arg(long, default_value = "mint")]
    recon: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PermuteArgs {
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of bottom series (or give `--data`).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Hierarchy JSON to twin; needs `--data`.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    seasonal_period: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CombineArgs {
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    panel: PanelArgs,
    /// Comma-separated approach names.
    #[arg(long, value_delimiter = ',', required = true)]
    approaches: Vec<String>,
    #[arg(long, default_value_t = 96)]
    initial: usize,
    #[arg(long, default_value_t = 12)]
    h: usize,
    #[arg(long, default_value = "mint")]
    recon: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON experiment config.
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    config: Option<PathBuf>,
    /// Manifest of an earlier run to reproduce.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TwinRunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn level_name(l: Level) -> &'static str {
    match l {
        Level::Top => "top",
        Level::Middle => "middle",
        Level::Bottom => "bottom",
    }
}

fn long_csv(ids: &[String], levels: &[Level], x: &DMatrix<f64>) -> String {
    let mut s = String::from("series,level,step,value\n");
    for (i, (id, l)) in ids.iter().zip(levels).enumerate() {
        for k in 0..x.ncols() {
            let _ = writeln!(s, "{id},{},{},{}", level_name(*l), k + 1, x[(i, k)]);
        }
    }
    s
}

fn base_forecasts(panel: &SeriesPanel, grouping: &Grouping, h: usize) -> Result<ForecastBundle> {
    forecast_hierarchy(&panel.bottom(), &panel.bottom_ids(), panel.seasonal_period(), grouping, h)
}

fn simulate(a: SimulateArgs) -> Result<Value> {
    let root = DgpConfig {
        m: a.m,
        t: a.t,
        seed: a.seed,
        ..DgpConfig::default()
    };
    root.validate()?;
    fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;
    for r in 0..a.reps {
        let cfg = replication_config(&root, r as u64);
        let (panel, labels) = simulate_panel(&cfg)?;
        write_panel(&panel, a.out.join(format!("panel_{:03}.csv", r + 1)))?;
        let mut s = String::from("series,cluster\n");
        for (id, l) in panel.bottom_ids().iter().zip(&labels) {
            let _ = writeln!(s, "{id},{l}");
        }
        write(&a.out.join(format!("labels_{:03}.csv", r + 1)), &s)?;
    }
    Ok(json!({ "replications": a.reps, "m": a.m, "t": a.t, "out": a.out }))
}

fn features(a: FeaturesArgs) -> Result<Value> {
    let (panel, _) = a.panel.load()?;
    let source = if a.residuals {
        let b = base_forecasts(&panel, &Grouping::two_level(panel.m()), 1)?;
        b.residuals.columns(1, panel.m()).into_owned()
    } else {
        panel.bottom()
    };
    let f = feature_matrix(&source, panel.seasonal_period())?;
    let mut s = format!("series,{}\n", FEATURE_NAMES.join(","));
    for (i, id) in panel.bottom_ids().iter().enumerate() {
        s.push_str(id);
        for v in f.row(i).iter() {
            s.push(',');
            s.push_str(&format_value(*v));
        }
        s.push('\n');
    }
    write(&a.out, &s)?;
    Ok(json!({ "series": panel.m(), "features": FEATURE_NAMES.len(), "out": a.out }))
}

fn cluster(a: ClusterArgs) -> Result<Value> {
    let method: ClusterMethod = a.approach.parse()?;
    let (panel, _) = a.panel.load()?;
    let b = base_forecasts(&panel, &Grouping::two_level(panel.m()), 1)?;
    let resid = b.residuals.columns(1, panel.m()).into_owned();
    let g = method.grouping(&panel.bottom(), &resid, panel.seasonal_period())?;
    write_hierarchy(&g, &panel.bottom_ids(), &a.out)?;
    Ok(json!({ "approach": method.name(), "middle_series": g.k(), "out": a.out }))
}

fn forecast(a: ForecastArgs) -> Result<Value> {
    let (panel, natural) = a.panel.load()?;
    let g = natural.unwrap_or_else(|| Grouping::two_level(panel.m()));
    let b = base_forecasts(&panel, &g, a.h)?;
    write(&a.out, &long_csv(&b.ids, &b.levels, &b.point_forecasts))?;
    if let Some(path) = &a.models {
        let mut s = String::from("series,model,alpha,beta,gamma,phi,aicc\n");
        for (id, m) in b.ids.iter().zip(&b.models) {
            let _ = writeln!(s, "{id},{},{},{},{},{},{}", m.spec, m.alpha, m.beta, m.gamma, m.phi, m.aicc);
        }
        write(path, &s)?;
    }
    Ok(json!({ "series": b.ids.len(), "h": a.h, "out": a.out }))
}

fn reconcile_cmd(a: ReconcileArgs) -> Result<Value> {
    let method: CovMethod = a.recon.parse()?;
    let (panel, natural) = a.panel.load()?;
    let g = match &a.grouping {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            hiercast::panel::parse_hierarchy(&text, &panel.bottom_ids(), "Custom")?.grouping
        }
        None => natural.unwrap_or_else(|| Grouping::two_level(panel.m())),
    };
    let b = base_forecasts(&panel, &g, a.h)?;
    let w = estimate_w(&b.residuals, method)?;
    let r = reconcile(&summing_matrix(&g), &w, &b.point_forecasts)?;
    write(&a.out, &long_csv(&b.ids, &b.levels, &r.ytilde))?;
    Ok(json!({
        "series": b.ids.len(),
        "h": a.h,
        "method": method.name(),
        "lambda": w.lambda,
        "jitter": r.jitter,
        "out": a.out,
    }))
}

fn permute(a: PermuteArgs) -> Result<Value> {
    let panel = match &a.data {
        Some(path) => Some(match &a.hierarchy {
            Some(h) => read_panel_with_metadata(path, a.seasonal_period, h)?,
            None => read_panel(path, a.seasonal_period)?,
        }),
        None => None,
    };
    let m = match (&panel, a.m) {
        (Some(p), _) => p.m(),
        (None, Some(m)) => m,
        (None, None) => return Err(Error::Argument("give --m or --data".into())),
    };
    if a.count == 0 {
        return Err(Error::Argument("--count must be at least 1".into()));
    }
    let perms = draw_permutations(m, a.count, a.seed);
    fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;
    write(&a.out.join("permutations.json"), &(serde_json::to_string(&perms).expect("serializes") + "\n"))?;
    let mut twins = 0;
    if let (Some(panel), Some(h)) = (&panel, &a.hierarchy) {
        let g = read_natural_hierarchy(h, panel)?.grouping;
        for (i, p) in perms.iter().enumerate() {
            let t = twin(&g, p)?;
            write_hierarchy(&t, &panel.bottom_ids(), a.out.join(format!("{}.json", twin_label(i).to_lowercase())))?;
            twins += 1;
        }
    }
    Ok(json!({ "m": m, "permutations": perms.len(), "twins": twins, "out": a.out }))
}

type LongForecasts = (Vec<(String, String)>, HashMap<String, Vec<f64>>);

fn read_long(path: &Path) -> Result<LongForecasts> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_error(path, e))?;
    let mut order = Vec::new();
    let mut values: HashMap<String, Vec<f64>> = HashMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_error(path, e))?;
        let bad = |msg: &str| Error::Parse {
            location: format!("{}:{}", path.display(), line + 2),
            message: msg.to_string(),
        };
        if rec.len() != 4 {
            return Err(bad("expected series,level,step,value"));
        }
        let (id, level) = (rec[0].to_string(), rec[1].to_string());
        let step: usize = rec[2].parse().map_err(|_| bad("step is not an integer"))?;
        let v: f64 = rec[3].parse().map_err(|_| bad("value is not a number"))?;
        let entry = values.entry(id.clone()).or_insert_with(|| {
            order.push((id, level));
            Vec::new()
        });
        if step != entry.len() + 1 {
            return Err(bad("steps must run 1, 2, ... per series"));
        }
        entry.push(v);
    }
    Ok((order, values))
}

fn parse_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    }
}

fn combine_cmd(a: CombineArgs) -> Result<Value> {
    let inputs = a.inputs.iter().map(|p| read_long(p)).collect::<Result<Vec<_>>>()?;
    let (order, _) = &inputs[0];
    let kept: Vec<&(String, String)> = order.iter().filter(|(_, l)| l == "top").chain(order.iter().filter(|(_, l)| l == "bottom")).collect();
    if kept.first().is_none_or(|(_, l)| l != "top") {
        return Err(Error::Format("first input has no top series".into()));
    }
    let h = inputs[0].1[&kept[0].0].len();
    let matrices = inputs
        .iter()
        .zip(&a.inputs)
        .map(|((_, values), path)| {
            let mut x = DMatrix::zeros(kept.len(), h);
            for (i, (id, _)) in kept.iter().enumerate() {
                let v = values
                    .get(id)
                    .ok_or_else(|| Error::Format(format!("{} has no series '{id}'", path.display())))?;
                if v.len() != h {
                    return Err(Error::Format(format!("{}: '{id}' has {} steps, expected {h}", path.display(), v.len())));
                }
                x.row_mut(i).copy_from_slice(v);
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    let c = combine(&matrices)?;
    let ids: Vec<String> = kept.iter().map(|(id, _)| id.clone()).collect();
    let levels: Vec<Level> = kept
        .iter()
        .map(|(_, l)| if l == "top" { Level::Top } else { Level::Bottom })
        .collect();
    write(&a.out, &long_csv(&ids, &levels, &c))?;
    Ok(json!({ "inputs": a.inputs.len(), "series": ids.len(), "h": h, "out": a.out }))
}

fn summary(out: &ExperimentOutput, dir: &Path) -> Value {
    let means = out.report.mean_rmsse();
    let approaches: Vec<Value> = out
        .report
        .labels
        .iter()
        .enumerate()
        .map(|(j, l)| {
            json!({
                "approach": l,
                "mean_rmsse": means[j],
                "mean_rank": out.mcb.as_ref().map(|m| m.mean_ranks[j]),
            })
        })
        .collect();
    json!({
        "windows": out.report.n_windows(),
        "approaches": approaches,
        "twins": out.twins,
        "out": dir,
    })
}

fn evaluate(a: EvaluateArgs) -> Result<Value> {
    let cfg = ExperimentConfig {
        seed: 0,
        reconciliation: a.recon,
        horizon: a.h,
        seasonal_period: Some(a.panel.seasonal_period),
        initial: Some(a.initial),
        approaches: a.approaches,
        members: None,
        twins: 0,
        twin_of: None,
        output_forecasts: KeepForecasts::Last,
        mcb_alpha: a.alpha,
        data: DataSource::Csv {
            path: absolute(&a.panel.data),
            hierarchy: a.panel.hierarchy.as_deref().map(absolute),
        },
    };
    let out = run_experiment(&cfg, &a.out)?;
    Ok(summary(&out, &a.out))
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn run(a: RunArgs) -> Result<Value> {
    if let Some(manifest) = &a.manifest {
        let text = fs::read_to_string(manifest).map_err(|e| io_error(manifest, e))?;
        let recorded: Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        let out = rerun_manifest(manifest, &a.out)?;
        let mismatches = manifest_mismatches(&recorded, &out.manifest);
        let mut v = summary(&out, &a.out);
        v["reproduced"] = json!(mismatches.is_empty());
        v["mismatches"] = json!(mismatches);
        return Ok(v);
    }
    let cfg = ExperimentConfig::load(a.config.as_ref().expect("clap requires config or manifest"))?;
    let out = run_experiment(&cfg, &a.out)?;
    Ok(summary(&out, &a.out))
}

fn twin_run(a: TwinRunArgs) -> Result<Value> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let out = twin_experiment(&cfg, &a.out)?;
    Ok(summary(&out, &a.out))
}

fn dispatch(command: Command) -> Result<Value> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Features(a) => features(a),
        Command::Cluster(a) => cluster(a),
        Command::Forecast(a) => forecast(a),
        Command::Reconcile(a) => reconcile_cmd(a),
        Command::Permute(a) => permute(a),
        Command::Combine(a) => combine_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Run(a) => run(a),
        Command::TwinRun(a) => twin_run(a),
    }
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("UsageError", e.render().to_string().trim().to_string(), 2),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("ArgumentError", format!("--threads: {e}"), 2);
        }
    }
    let reproducing = matches!(&cli.command, Command::Run(RunArgs { manifest: Some(_), .. }));
    match dispatch(cli.command) {
        Ok(v) => {
            println!("{v}");
            if reproducing && v["reproduced"] == json!(false) {
                return fail("ReproductionError", format!("outputs differ from manifest: {}", v["mismatches"]), 1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), e.to_string(), 1),
    }
}
