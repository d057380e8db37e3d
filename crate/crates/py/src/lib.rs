//! Python bindings. Built as a cdylib named `adaptsel`; complex inputs
//! (estimate tables, compute profiles, pricing) travel as JSON strings in
//! the same formats the CLI reads.

use adaptsel::cost_model::{self, ComputeProfile, IclBilling, IclLengths, Packing, TokenPricing};
use adaptsel::ft_predictor;
use adaptsel::scaling_law::{self, Pi0Mode};
use adaptsel::selector::{self, CostBasis, ParetoPoint, ReportOptions, ScorePolicy};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: adaptsel::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Saturation curve `pi0 + alpha * (1 - exp(-beta * shots))`.
#[pyclass(frozen, skip_from_py_object, name = "SaturationParams")]
#[derive(Clone, Copy)]
pub struct PySaturation {
    inner: scaling_law::SaturationParams,
}

#[pymethods]
impl PySaturation {
    #[new]
    fn new(alpha: f64, beta: f64, pi0: f64) -> PyResult<Self> {
        let inner = scaling_law::SaturationParams::new(alpha, beta, pi0).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn pi0(&self) -> f64 {
        self.inner.pi0
    }

    /// Predicted performance at `shots`, clamped to [0, 1].
    fn predict(&self, shots: f64) -> f64 {
        self.inner.predict(shots)
    }

    fn __repr__(&self) -> String {
        format!(
            "SaturationParams(alpha={}, beta={}, pi0={})",
            self.inner.alpha, self.inner.beta, self.inner.pi0
        )
    }
}

/// Least-squares fit to `(shots, perf)` points. `pi0=None` fits the
/// baseline too. Returns `(params, residual)`.
#[pyfunction]
#[pyo3(signature = (points, pi0=None))]
fn fit_saturation(points: Vec<(f64, f64)>, pi0: Option<f64>) -> PyResult<(PySaturation, f64)> {
    let mode = pi0.map_or(Pi0Mode::Free, Pi0Mode::Fixed);
    let fit = scaling_law::fit_saturation(&points, mode).map_err(err)?;
    Ok((PySaturation { inner: fit.params }, fit.residual))
}

/// Curve through two `(shots, perf)` points with a fixed baseline.
#[pyfunction]
fn two_point_fit(p1: (f64, f64), p2: (f64, f64), pi0: f64) -> PyResult<PySaturation> {
    let inner = scaling_law::two_point_fit(p1, p2, pi0).map_err(err)?;
    Ok(PySaturation { inner })
}

/// OLS fit of `actual ~ a * proxy + b`. Returns `(a, b)`.
#[pyfunction]
fn calibrate(pairs: Vec<(f64, f64)>) -> PyResult<(f64, f64)> {
    let p = ft_predictor::calibrate(&pairs).map_err(err)?;
    Ok((p.a, p.b))
}

#[pyfunction]
fn pack_concat(total_tokens: u64, l_max: u64) -> PyResult<u64> {
    cost_model::pack_concat(total_tokens, l_max).map_err(err)
}

#[pyfunction]
fn pack_ffd(lengths: Vec<u64>, l_max: u64) -> PyResult<usize> {
    cost_model::pack_ffd(&lengths, l_max).map_err(err)
}

#[pyfunction]
fn pack_exact(lengths: Vec<u64>, l_max: u64) -> PyResult<usize> {
    cost_model::pack_exact(&lengths, l_max).map_err(err)
}

/// Compute-time fine-tuning cost in USD. With `lengths`, sequences are
/// packed whole by first-fit decreasing instead of concatenated.
#[pyfunction]
#[pyo3(signature = (epochs, total_tokens, l_max, profile_json=None, c_eval=0.0, lengths=None))]
fn ft_compute_cost(
    epochs: u32,
    total_tokens: u64,
    l_max: u64,
    profile_json: Option<&str>,
    c_eval: f64,
    lengths: Option<Vec<u64>>,
) -> PyResult<f64> {
    let profile = match profile_json {
        Some(text) => ComputeProfile::from_json(text).map_err(err)?,
        None => ComputeProfile::default(),
    };
    let packing = match &lengths {
        Some(l) => Packing::Ffd(l),
        None => Packing::Concat,
    };
    cost_model::ft_compute_cost(epochs, total_tokens, l_max, &profile, c_eval, packing).map_err(err)
}

fn pricing(json: Option<&str>) -> PyResult<TokenPricing> {
    json.map_or_else(|| Ok(TokenPricing::default()), |t| TokenPricing::from_json(t).map_err(err))
}

/// Token-billed fine-tuning cost in USD.
#[pyfunction]
#[pyo3(signature = (n_tokens, epochs, pricing_json=None))]
fn ft_token_cost(n_tokens: f64, epochs: u32, pricing_json: Option<&str>) -> PyResult<f64> {
    Ok(cost_model::ft_token_cost(n_tokens, epochs, &pricing(pricing_json)?))
}

/// Cost of one ICL query. `billing` is "split" or "uniform".
#[pyfunction]
#[pyo3(signature = (shots, query_len, exp_in, exp_out, pricing_json=None, billing="split", c_eval=0.0))]
fn icl_query_cost(
    shots: u32,
    query_len: f64,
    exp_in: f64,
    exp_out: f64,
    pricing_json: Option<&str>,
    billing: &str,
    c_eval: f64,
) -> PyResult<f64> {
    let billing = match billing {
        "split" => IclBilling::Split,
        "uniform" => IclBilling::Uniform,
        other => return Err(PyValueError::new_err(format!("unknown billing `{other}`"))),
    };
    let lengths = IclLengths { query_len, exp_in, exp_out };
    Ok(cost_model::icl_query_cost(shots, lengths, &pricing(pricing_json)?, billing, c_eval))
}

/// Returns `(efficient, ratio)`.
#[pyfunction]
fn efficiency_check(total_predict: f64, selected_cost: f64, total_grid: f64) -> PyResult<(bool, f64)> {
    let e = cost_model::efficiency_check(total_predict, selected_cost, total_grid).map_err(err)?;
    Ok((e.efficient, e.ratio))
}

/// Per-band selection over an estimate table. Takes and returns JSON.
#[pyfunction]
#[pyo3(signature = (estimates_json, bands=3, epsilon=1e-6, basis="predicted"))]
fn select(estimates_json: &str, bands: usize, epsilon: f64, basis: &str) -> PyResult<String> {
    let table = adaptsel::io::read_estimates(estimates_json.as_bytes()).map_err(err)?;
    let opts = ReportOptions {
        bands,
        policy: ScorePolicy::new(epsilon).map_err(err)?,
        basis: basis.parse::<CostBasis>().map_err(err)?,
        ours_cost: None,
    };
    let report = selector::build_report(&table, &opts).map_err(err)?;
    adaptsel::io::to_json_string(&report).map_err(err)
}

fn to_points(v: &[(f64, f64)]) -> Vec<ParetoPoint> {
    v.iter().map(|&(c, p)| ParetoPoint::new(c, p)).collect()
}

/// Nondominated `(cost, perf)` points, by increasing cost.
#[pyfunction]
fn pareto_frontier(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    selector::pareto_frontier(&to_points(&points))
        .into_iter()
        .map(|p| (p.cost, p.perf))
        .collect()
}

/// Area between the two frontiers' step functions over `[lo, hi]`.
#[pyfunction]
fn adaptation_gain(old: Vec<(f64, f64)>, new: Vec<(f64, f64)>, lo: f64, hi: f64) -> PyResult<f64> {
    selector::adaptation_gain(&to_points(&old), &to_points(&new), (lo, hi)).map_err(err)
}

/// Cost reduction ratio in percent.
#[pyfunction]
fn crr(c_full: f64, c_ours: f64) -> PyResult<f64> {
    selector::crr(c_full, c_ours).map_err(err)
}

#[pyfunction]
fn mae(pred: Vec<f64>, act: Vec<f64>) -> PyResult<f64> {
    selector::mae(&pred, &act).map_err(err)
}

#[pymodule]
#[pyo3(name = "adaptsel")]
fn adaptsel_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySaturation>()?;
    m.add_function(wrap_pyfunction!(fit_saturation, m)?)?;
    m.add_function(wrap_pyfunction!(two_point_fit, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(pack_concat, m)?)?;
    m.add_function(wrap_pyfunction!(pack_ffd, m)?)?;
    m.add_function(wrap_pyfunction!(pack_exact, m)?)?;
    m.add_function(wrap_pyfunction!(ft_compute_cost, m)?)?;
    m.add_function(wrap_pyfunction!(ft_token_cost, m)?)?;
    m.add_function(wrap_pyfunction!(icl_query_cost, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_check, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_frontier, m)?)?;
    m.add_function(wrap_pyfunction!(adaptation_gain, m)?)?;
    m.add_function(wrap_pyfunction!(crr, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    Ok(())
}
