//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines reach stdout uncaptured.
//! Exits nonzero when any criterion fails.

use std::fs;
use std::time::Instant;

use hiercast::backtest::EvalReport;
use hiercast::cluster::{grouping_from_tree, pam, silhouette, ward_tree};
use hiercast::distance::{dtw_distance, DistanceMatrix};
use hiercast::evaluate::{rmsse, WindowPlan};
use hiercast::experiment::{rerun_manifest, run_experiment, twin_experiment, ExperimentConfig, MANIFEST};
use hiercast::panel::{summing_matrix, Grouping};
use hiercast::reconcile::{reconcile, reconcile_vector, CovEstimate};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CLUSTERS: [&str; 4] = ["Cluster-trend-season", "Cluster-trend1", "Cluster-trend2", "Cluster-season"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    println!(
        "criterion {id} [{name}]: {} ({}; {:.1}s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed().as_secs_f64()
    );
    o.pass
}

fn simulation_config(extra: &str) -> ExperimentConfig {
    let approaches: Vec<String> = ["Base", "Two-level"]
        .iter()
        .chain(&CLUSTERS)
        .map(|a| format!("\"{a}\""))
        .collect();
    ExperimentConfig::parse(&format!(
        r#"
seed = 2024
horizon = 12
reconciliation = "mint"
approaches = [{}, "Combination"]
members = [{}]
output_forecasts = "none"
{extra}
[data]
source = "simulate"
replications = 100
"#,
        approaches.join(", "),
        CLUSTERS.map(|c| format!("\"{c}\"")).join(", ")
    ))
    .expect("valid config")
}

fn col(r: &EvalReport, label: &str) -> usize {
    r.column(label).unwrap_or_else(|| panic!("missing column {label}"))
}

fn simulation_reproduction(r: &EvalReport) -> Outcome {
    let means = r.mean_rmsse();
    let base = means[col(r, "Base")];
    let two = means[col(r, "Two-level")];
    let clusters: Vec<f64> = CLUSTERS.iter().map(|c| means[col(r, c)]).collect();
    let scored: Vec<usize> = ["Base", "Two-level"].iter().chain(&CLUSTERS).map(|l| col(r, l)).collect();
    let worst = (0..r.n_windows())
        .filter(|&w| scored[1..].iter().all(|&j| r.rmsse[(w, scored[0])] > r.rmsse[(w, j)]))
        .count() as f64
        / r.n_windows() as f64;
    let base_ok = (base - 0.7764).abs() <= 0.02;
    let two_ok = (two - 0.5971).abs() <= 0.02;
    let clusters_ok = clusters.iter().all(|c| (c - two).abs() <= 0.005);
    let worst_ok = worst >= 0.95;
    Outcome {
        pass: base_ok && two_ok && clusters_ok && worst_ok,
        detail: format!(
            "Base {base:.4} [target 0.7764 +/- 0.02: {}], Two-level {two:.4} [target 0.5971 +/- 0.02: {}], \
             clusters {} [within 0.005 of Two-level: {}], Base strictly worst in {:.0}% of replications [>= 95%: {}]",
            ok(base_ok),
            ok(two_ok),
            clusters.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>().join("/"),
            ok(clusters_ok),
            worst * 100.0,
            ok(worst_ok)
        ),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "missed"
    }
}

fn combination_dominance(r: &EvalReport) -> Outcome {
    let comb = col(r, "Combination");
    let cols: Vec<usize> = CLUSTERS.iter().map(|c| col(r, c)).collect();
    let wins = (0..r.n_windows())
        .filter(|&w| {
            let best = cols.iter().map(|&j| r.rmsse[(w, j)]).fold(f64::INFINITY, f64::min);
            r.rmsse[(w, comb)] <= best
        })
        .count();
    let share = wins as f64 / r.n_windows() as f64;
    Outcome {
        pass: share >= 0.6,
        detail: format!(
            "combination <= best cluster hierarchy in {wins}/{} replications ({:.0}%, need >= 60%); mean {:.4}",
            r.n_windows(),
            share * 100.0,
            r.mean_rmsse()[comb]
        ),
    }
}

fn structure_vs_grouping() -> Outcome {
    let mut cfg = simulation_config("");
    cfg.approaches = vec!["Cluster-trend-season".into()];
    cfg.members = None;
    cfg.twins = 20;
    cfg.twin_of = Some("Cluster-trend-season".into());
    let dir = tempfile::tempdir().expect("tempdir");
    let out = twin_experiment(&cfg, dir.path()).expect("twin run");
    let t = out.twins.expect("twin summary");
    Outcome {
        pass: t.strictly_inside,
        detail: format!(
            "true-cluster mean rank {:.2}, twins {:.2}..{:.2}, position {} of {}, {} of {} twins overlap",
            t.mean_rank,
            t.best_twin_rank,
            t.worst_twin_rank,
            t.position,
            t.n_twins + 1,
            t.overlapping_twins,
            t.n_twins
        ),
    }
}

fn random_grouping(rng: &mut ChaCha8Rng, m: usize, max_k: usize) -> Grouping {
    let mut rows = Vec::new();
    for _ in 0..rng.random_range(0..=max_k) {
        let mut idx: Vec<usize> = (0..m).collect();
        idx.shuffle(rng);
        let size = rng.random_range(1..=m);
        let mut row = vec![false; m];
        idx[..size].iter().for_each(|&j| row[j] = true);
        rows.push(row);
    }
    Grouping::from_rows_pruned(m, rows)
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

fn reconciliation_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut coh, mut ols, mut idem, mut scale) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let m = rng.random_range(2..=30);
        let g = random_grouping(&mut rng, m, 49 - m);
        let s = summing_matrix(&g);
        let n = s.nrows();
        assert!(n <= 50);
        let h = rng.random_range(1..=3);
        let yhat = DMatrix::<f64>::from_fn(n, h, |_, _| rng.random_range(-10.0..10.0));
        let w = random_spd(&mut rng, n);
        let est = CovEstimate::from_matrix(w.clone()).expect("spd");
        let r = reconcile(&s, &est, &yhat).expect("reconcile");
        coh = coh.max(max_abs(&r.ytilde, &(&s * &r.btilde)));

        let id = reconcile(&s, &CovEstimate::identity(n), &yhat).expect("ols");
        let qr = s.clone().qr();
        let qty = qr.q().transpose() * &yhat;
        let b = qr.r().solve_upper_triangular(&qty).expect("full rank");
        ols = ols.max(max_abs(&id.ytilde, &(&s * b)));

        let again = reconcile(&s, &est, &r.ytilde).expect("reconcile");
        idem = idem.max(max_abs(&again.ytilde, &r.ytilde));
        let c = rng.random_range(0.01..100.0);
        let scaled = reconcile(&s, &CovEstimate::from_matrix(w * c).expect("spd"), &yhat).expect("reconcile");
        scale = scale.max(max_abs(&scaled.ytilde, &r.ytilde));
    }
    Outcome {
        pass: coh <= 1e-8 && ols <= 1e-10 && idem <= 1e-10 && scale <= 1e-10,
        detail: format!(
            "1000 instances: coherence {coh:.2e} (<= 1e-8), OLS vs QR {ols:.2e}, idempotence {idem:.2e}, \
             scaling {scale:.2e} (each <= 1e-10)"
        ),
    }
}

fn hand_oracles() -> Outcome {
    let s = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
    let y = DVector::from_vec(vec![10.0, 4.0, 5.0]);
    let (ols, _) = reconcile_vector(&s, &CovEstimate::identity(3), &y).expect("ols");
    let w = CovEstimate::from_matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 1.0]))).expect("wls");
    let (wls, _) = reconcile_vector(&s, &w, &y).expect("wls");
    let mut err = 0.0f64;
    for (a, b) in ols.iter().zip([29.0 / 3.0, 13.0 / 3.0, 16.0 / 3.0]) {
        err = err.max((a - b).abs());
    }
    for (a, b) in wls.iter().zip([9.5, 4.25, 5.25]) {
        err = err.max((a - b).abs());
    }
    let r = rmsse(&[1.0, 3.0, 2.0, 4.0], &[3.0, 5.0], &[2.0, 4.0], 2).expect("rmsse");
    err = err.max((r - 1.0).abs());
    let dtw = [
        (vec![1.0, 5.0, 2.0], vec![1.0, 5.0, 2.0], 0.0),
        (vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 1.0], 0.0),
        (vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], 2.0),
    ];
    for (a, b, want) in &dtw {
        err = err.max((dtw_distance(a, b).expect("dtw") - want).abs());
    }
    Outcome {
        pass: err <= 1e-10,
        detail: format!("2 reconciliation examples, RMSSE = 1 example, 3 DTW examples; max error {err:.2e}"),
    }
}

fn random_distances(rng: &mut ChaCha8Rng, m: usize) -> DistanceMatrix {
    let p = rng.random_range(1..=4);
    let x = DMatrix::<f64>::from_fn(m, p, |_, _| rng.random_range(-5.0..5.0));
    DistanceMatrix::from_pairs(m, |i, j| (x.row(i) - x.row(j)).norm())
}

fn clustering_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    for trial in 0..1000 {
        let m = rng.random_range(3..=25);
        let d = random_distances(&mut rng, m);
        let tree = ward_tree(&d).expect("ward");
        let g = grouping_from_tree(&tree);
        if tree.n_nodes() != 2 * m - 1 || g.k() != m - 2 {
            failures.push(format!("trial {trial}: ward nodes {} rows {}", tree.n_nodes(), g.k()));
        }
        let k = rng.random_range(2..m);
        let p = pam(&d, k).expect("pam");
        if p.cost_history.windows(2).any(|w| w[1] > w[0]) {
            failures.push(format!("trial {trial}: PAM cost increased"));
        }
        let asw = silhouette(&d, &p.labels, p.k());
        if !(-1.0..=1.0).contains(&asw) || p.asw != asw {
            failures.push(format!("trial {trial}: ASW {asw}"));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "1000 random matrices: Ward 2m-1 nodes and m-2 middle rows, PAM cost non-increasing, ASW in [-1,1]".into()
        } else {
            format!("{} violations, first: {}", failures.len(), failures[0])
        },
    }
}

fn window_arithmetic() -> Outcome {
    let a = WindowPlan::new(228, 96, 12).and_then(|p| p.n_windows()).expect("plan");
    let b = WindowPlan::new(252, 96, 12).and_then(|p| p.n_windows()).expect("plan");
    Outcome {
        pass: a == 121 && b == 145,
        detail: format!("T=228 -> {a} windows (121), T=252 -> {b} windows (145)"),
    }
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig::parse(
        r#"
seed = 99
horizon = 6
initial = 48
approaches = ["Base", "Two-level", "TS-EUC-ME", "ER-DTW-HC", "Cluster-trend1", "Grouped", "Combination"]
members = ["TS-EUC-ME", "ER-DTW-HC", "Cluster-trend1"]
twins = 2
twin_of = "TS-EUC-ME"
output_forecasts = "all"
[data]
source = "simulate"
replications = 2
dgp = { m = 18, t = 60 }
"#,
    )
    .expect("valid config");
    let first = tempfile::tempdir().expect("tempdir");
    let second = tempfile::tempdir().expect("tempdir");
    let a = run_experiment(&cfg, first.path()).expect("run");
    rerun_manifest(first.path().join(MANIFEST), second.path()).expect("rerun");
    let mut differing = Vec::new();
    for path in &a.files {
        let name = path.file_name().expect("file name");
        if fs::read(path).ok() != fs::read(second.path().join(name)).ok() {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    Outcome {
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("{} artifacts byte-identical after rerun from manifest", a.files.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    }
}

fn dtw_by_enumeration(x: &[f64], y: &[f64]) -> f64 {
    fn walk(x: &[f64], y: &[f64], i: usize, j: usize, acc: f64) -> f64 {
        let acc = acc + (x[i] - y[j]).abs();
        if i + 1 == x.len() && j + 1 == y.len() {
            return acc;
        }
        let mut best = f64::INFINITY;
        if i + 1 < x.len() {
            best = best.min(walk(x, y, i + 1, j, acc));
        }
        if j + 1 < y.len() {
            best = best.min(walk(x, y, i, j + 1, acc));
        }
        if i + 1 < x.len() && j + 1 < y.len() {
            best = best.min(walk(x, y, i + 1, j + 1, acc));
        }
        best
    }
    walk(x, y, 0, 0, 0.0)
}

fn dtw_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = 0;
    for _ in 0..200 {
        let a: Vec<f64> = (0..rng.random_range(1..=5)).map(|_| rng.random_range(-4..=4) as f64 * 0.5).collect();
        let b: Vec<f64> = (0..rng.random_range(1..=5)).map(|_| rng.random_range(-4..=4) as f64 * 0.5).collect();
        if dtw_distance(&a, &b).expect("dtw") != dtw_by_enumeration(&a, &b) {
            mismatches += 1;
        }
    }
    Outcome {
        pass: mismatches == 0,
        detail: format!("200 random pairs of length <= 5, {mismatches} mismatches"),
    }
}

fn main() {
    let sim = simulation_config("");
    let dir = tempfile::tempdir().expect("tempdir");
    let start = Instant::now();
    let run = run_experiment(&sim, dir.path()).expect("simulation run");
    println!(
        "simulation: {} replications, {} approaches in {:.1}s",
        run.report.n_windows(),
        run.report.labels.len(),
        start.elapsed().as_secs_f64()
    );

    let results = [
        report(1, "simulation reproduction", || simulation_reproduction(&run.report)),
        report(2, "structure vs grouping", structure_vs_grouping),
        report(3, "combination dominance", || combination_dominance(&run.report)),
        report(4, "reconciliation correctness", reconciliation_correctness),
        report(5, "hand oracles", hand_oracles),
        report(6, "clustering structure", clustering_structure),
        report(7, "window arithmetic", window_arithmetic),
        report(8, "determinism", determinism),
        report(9, "DTW oracle equivalence", dtw_oracle),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
