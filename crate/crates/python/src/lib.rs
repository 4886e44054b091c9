//! Python bindings. Matrices cross the boundary as lists of rows.

use hiercast::baseforecast::{fit_ets as fit, forecast_ets};
use hiercast::cluster::ClusterMethod;
use hiercast::distance::dtw_distance as dtw;
use hiercast::evaluate::{mcb as mcb_test, rmsse as rmsse_score};
use hiercast::experiment::{run_experiment as run, twin_experiment, ExperimentConfig};
use hiercast::panel::{summing_matrix as summing, Grouping};
use hiercast::permute::twin as twin_grouping;
use hiercast::reconcile::{estimate_w as estimate, reconcile as project, CovEstimate};
use hiercast::represent::compute_features as features;
use hiercast::simulate::{simulate_panel as simulate, DgpConfig};
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(hiercast_py, HiercastError, PyException, "Raised with (kind, message).");

fn err(e: hiercast::Error) -> PyErr {
    HiercastError::new_err((e.kind(), e.to_string()))
}

/// Rows of equal length into a matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> hiercast::Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(hiercast::Error::Argument("rows have different lengths".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn rows_from_matrix(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

type SimulatedPanel = (Vec<Vec<f64>>, Vec<String>, Vec<u8>);

/// Simulated panel: `(values T x m, ids, cluster labels)`.
#[pyfunction]
#[pyo3(signature = (seed=0, m=120, t=144))]
fn simulate_panel(seed: u64, m: usize, t: usize) -> PyResult<SimulatedPanel> {
    let cfg = DgpConfig {
        seed,
        m,
        t,
        ..DgpConfig::default()
    };
    let (panel, labels) = simulate(&cfg).map_err(err)?;
    Ok((rows_from_matrix(&panel.bottom()), panel.bottom_ids(), labels))
}

/// Fit the AICc-selected additive ETS model and forecast `h` steps.
#[pyfunction]
fn fit_ets<'py>(py: Python<'py>, y: Vec<f64>, period: usize, h: usize) -> PyResult<Bound<'py, PyDict>> {
    let model = fit(&y, period).map_err(err)?;
    let fc = forecast_ets(&model, h).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("model", model.spec.to_string())?;
    d.set_item("alpha", model.alpha)?;
    d.set_item("beta", model.beta)?;
    d.set_item("gamma", model.gamma)?;
    d.set_item("phi", model.phi)?;
    d.set_item("aicc", model.aicc)?;
    d.set_item("residuals", model.residuals)?;
    d.set_item("forecasts", fc)?;
    Ok(d)
}

/// `(W, lambda)` from `T x n` residuals; method is `mint`, `wls` or `ols`.
#[pyfunction]
#[pyo3(signature = (residuals, method="mint"))]
fn estimate_w(residuals: Vec<Vec<f64>>, method: &str) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let method = method.parse().map_err(err)?;
    let e = estimate(&matrix_from_rows(&residuals).map_err(err)?, method).map_err(err)?;
    Ok((rows_from_matrix(&e.w), e.lambda))
}

/// Summing matrix for middle-level rows of booleans over `m` bottom series.
#[pyfunction]
fn summing_matrix(m: usize, rows: Vec<Vec<bool>>) -> PyResult<Vec<Vec<f64>>> {
    let g = if rows.is_empty() {
        Grouping::two_level(m)
    } else {
        Grouping::from_rows(m, rows).map_err(err)?
    };
    Ok(rows_from_matrix(&summing(&g)))
}

/// Reconciled `n x h` forecasts; `w=None` means the identity.
#[pyfunction]
#[pyo3(signature = (s, yhat, w=None))]
fn reconcile(s: Vec<Vec<f64>>, yhat: Vec<Vec<f64>>, w: Option<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
    let s = matrix_from_rows(&s).map_err(err)?;
    let w = match w {
        Some(w) => CovEstimate::from_matrix(matrix_from_rows(&w).map_err(err)?).map_err(err)?,
        None => CovEstimate::identity(s.nrows()),
    };
    let r = project(&s, &w, &matrix_from_rows(&yhat).map_err(err)?).map_err(err)?;
    Ok(rows_from_matrix(&r.ytilde))
}

#[pyfunction]
fn dtw_distance(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    dtw(&x, &y).map_err(err)
}

/// Feature name to value.
#[pyfunction]
fn compute_features<'py>(py: Python<'py>, y: Vec<f64>, period: usize) -> PyResult<Bound<'py, PyDict>> {
    let f = features(&y, period).map_err(err)?;
    let d = PyDict::new(py);
    for (name, v) in f.names().iter().zip(&f.values) {
        d.set_item(*name, *v)?;
    }
    Ok(d)
}

/// Middle level found by a clustering approach, as lists of bottom indices.
#[pyfunction]
fn cluster(approach: &str, bottom: Vec<Vec<f64>>, residuals: Vec<Vec<f64>>, period: usize) -> PyResult<Vec<Vec<usize>>> {
    let method: ClusterMethod = approach.parse().map_err(err)?;
    let g = method
        .grouping(
            &matrix_from_rows(&bottom).map_err(err)?,
            &matrix_from_rows(&residuals).map_err(err)?,
            period,
        )
        .map_err(err)?;
    Ok((0..g.k()).map(|i| g.members(i)).collect())
}

/// Twin rows: `C'[:, j] = C[:, perm[j]]`.
#[pyfunction]
fn twin(m: usize, rows: Vec<Vec<bool>>, perm: Vec<usize>) -> PyResult<Vec<Vec<bool>>> {
    let g = Grouping::from_rows(m, rows).map_err(err)?;
    Ok(twin_grouping(&g, &perm).map_err(err)?.rows().to_vec())
}

#[pyfunction]
fn rmsse(train: Vec<f64>, actual: Vec<f64>, forecast: Vec<f64>, period: usize) -> PyResult<f64> {
    rmsse_score(&train, &actual, &forecast, period).map_err(err)
}

/// MCB test on an `N x J` score matrix.
#[pyfunction]
#[pyo3(signature = (scores, alpha=0.05))]
fn mcb<'py>(py: Python<'py>, scores: Vec<Vec<f64>>, alpha: f64) -> PyResult<Bound<'py, PyDict>> {
    let m = mcb_test(&matrix_from_rows(&scores).map_err(err)?, alpha).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("mean_ranks", m.mean_ranks)?;
    d.set_item("half_width", m.half_width)?;
    d.set_item("q", m.q)?;
    d.set_item("best", m.best)?;
    d.set_item("indistinguishable", m.indistinguishable)?;
    Ok(d)
}

/// Run an experiment config file into `out_dir`; returns labels with mean
/// RMSSE and mean ranks.
#[pyfunction]
#[pyo3(signature = (config, out_dir, twins=false))]
fn run_experiment<'py>(py: Python<'py>, config: &str, out_dir: &str, twins: bool) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::load(config).map_err(err)?;
    let out = py
        .detach(|| if twins { twin_experiment(&cfg, out_dir) } else { run(&cfg, out_dir) })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("labels", out.report.labels.clone())?;
    d.set_item("mean_rmsse", out.report.mean_rmsse())?;
    d.set_item("mean_ranks", out.mcb.map(|m| m.mean_ranks))?;
    d.set_item("windows", out.report.n_windows())?;
    if let Some(t) = out.twins {
        d.set_item("twin_position", t.position)?;
        d.set_item("twin_strictly_inside", t.strictly_inside)?;
    }
    Ok(d)
}

#[pymodule]
fn hiercast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HiercastError", m.py().get_type::<HiercastError>())?;
    m.add_function(wrap_pyfunction!(simulate_panel, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ets, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_w, m)?)?;
    m.add_function(wrap_pyfunction!(summing_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(reconcile, m)?)?;
    m.add_function(wrap_pyfunction!(dtw_distance, m)?)?;
    m.add_function(wrap_pyfunction!(compute_features, m)?)?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(twin, m)?)?;
    m.add_function(wrap_pyfunction!(rmsse, m)?)?;
    m.add_function(wrap_pyfunction!(mcb, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
