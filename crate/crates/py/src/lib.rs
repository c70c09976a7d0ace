//! Python bindings: `import tailbid`.
//!
//! Flexibility triples cross the boundary as `(up, down, e20)` tuples,
//! hourly samples as `(day, hour, up, down, e20)` and minute records as
//! `(ev_id, minute, power_kw, connected)`. Pipeline options are keyword
//! arguments using the key names of the config file.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tailbid::solvers::TailModel;
use tailbid::{
    Error, FlexTriple, GammaGrid, HourlyFlexSample, MinuteRecord, PipelineConfig, WeibullParams,
};

type Triple = (f64, f64, f64);

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn triple(t: Triple) -> FlexTriple {
    FlexTriple { up: t.0, down: t.1, e20: t.2 }
}

fn grid(lo: f64, hi: f64, steps: usize) -> PyResult<GammaGrid> {
    GammaGrid::new(lo, hi, steps).map_err(py_err)
}

fn params(kappa: f64, gamma: f64) -> PyResult<WeibullParams> {
    WeibullParams::new(kappa, gamma).map_err(py_err)
}

fn config(opts: Option<&Bound<'_, PyDict>>) -> PyResult<PipelineConfig> {
    let mut kv = BTreeMap::new();
    if let Some(d) = opts {
        for (k, v) in d.iter() {
            kv.insert(k.extract::<String>()?, v.str()?.to_string());
        }
    }
    let c = PipelineConfig::from_kv(&kv).map_err(py_err)?;
    c.validate().map_err(py_err)?;
    Ok(c)
}

fn to_python(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

#[pyclass(get_all, frozen, from_py_object, module = "tailbid")]
#[derive(Clone, Copy)]
struct Bid {
    b_up_kw: f64,
    b_down_kw: f64,
}

#[pymethods]
impl Bid {
    #[new]
    fn new(b_up_kw: f64, b_down_kw: f64) -> Self {
        Bid { b_up_kw, b_down_kw }
    }

    fn total(&self) -> f64 {
        self.b_up_kw + self.b_down_kw
    }

    fn __repr__(&self) -> String {
        format!("Bid(b_up_kw={}, b_down_kw={})", self.b_up_kw, self.b_down_kw)
    }
}

impl From<tailbid::Bid> for Bid {
    fn from(b: tailbid::Bid) -> Self {
        Bid { b_up_kw: b.b_up_kw, b_down_kw: b.b_down_kw }
    }
}

impl From<Bid> for tailbid::Bid {
    fn from(b: Bid) -> Self {
        tailbid::Bid { b_up_kw: b.b_up_kw, b_down_kw: b.b_down_kw }
    }
}

#[pyclass(get_all, frozen, module = "tailbid")]
struct WeibullFit {
    kappa: f64,
    gamma: f64,
    nll: f64,
    at_boundary: bool,
}

#[pymethods]
impl WeibullFit {
    fn cdf(&self, x: f64) -> f64 {
        WeibullParams { kappa: self.kappa, gamma: self.gamma }.cdf(x)
    }

    fn __repr__(&self) -> String {
        format!("WeibullFit(kappa={}, gamma={}, nll={})", self.kappa, self.gamma, self.nll)
    }
}

/// Lower-tail fit: threshold `r_eps`, mirrored tail distances and the
/// Weibull fit when there were enough positive distances.
#[pyclass(get_all, frozen, module = "tailbid")]
struct TailFit {
    threshold_kw: f64,
    tail_x: Vec<f64>,
    kappa: Option<f64>,
    gamma: Option<f64>,
    nll: Option<f64>,
}

#[pymethods]
impl TailFit {
    fn __repr__(&self) -> String {
        format!(
            "TailFit(threshold_kw={}, n_tail={}, kappa={:?}, gamma={:?})",
            self.threshold_kw,
            self.tail_x.len(),
            self.kappa,
            self.gamma
        )
    }
}

#[pyclass(get_all, frozen, module = "tailbid")]
struct KsResult {
    d_n: f64,
    p_value: f64,
    n: usize,
}

#[pymethods]
impl KsResult {
    fn accepted(&self) -> bool {
        tailbid::KsResult { d_n: self.d_n, p_value: self.p_value, n: self.n }.accepted()
    }

    fn __repr__(&self) -> String {
        format!("KsResult(d_n={}, p_value={}, n={})", self.d_n, self.p_value, self.n)
    }
}

#[pyclass(get_all, frozen, module = "tailbid")]
struct AnalyticalBid {
    bid: Bid,
    cap_up: f64,
    cap_down: f64,
    feasible: bool,
}

#[pyclass(get_all, frozen, module = "tailbid")]
struct ScenarioBid {
    bid: Bid,
    objective: f64,
    violated: Vec<usize>,
}

#[pyclass(get_all, frozen, module = "tailbid")]
struct ValidationReport {
    n_oos: usize,
    violations_up: usize,
    violations_down: usize,
    violations_e20: usize,
    violations_joint: usize,
    joint_rate: f64,
}

#[pymethods]
impl ValidationReport {
    fn __repr__(&self) -> String {
        format!(
            "ValidationReport(n_oos={}, joint={}, rate={})",
            self.n_oos, self.violations_joint, self.joint_rate
        )
    }
}

/// Synthetic fleet as change-point minute records.
#[pyfunction]
#[pyo3(signature = (**opts))]
fn synth_fleet(opts: Option<&Bound<'_, PyDict>>) -> PyResult<Vec<(String, i64, f64, bool)>> {
    let c = config(opts)?;
    let recs = tailbid::generate_synthetic_fleet(&c.synth).map_err(py_err)?;
    Ok(recs.into_iter().map(|r| (r.ev_id, r.minute, r.power_kw, r.connected)).collect())
}

/// Hourly minimum fleet flexibility from minute records.
#[pyfunction]
fn estimate(records: Vec<(String, i64, f64, bool)>) -> PyResult<Vec<(i64, u8, f64, f64, f64)>> {
    let recs: Vec<MinuteRecord> = records
        .into_iter()
        .map(|(id, m, p, c)| MinuteRecord::new(id, m, p, c))
        .collect();
    let est = tailbid::flex::estimate_from_records(&recs).map_err(py_err)?;
    Ok(est
        .hourly
        .samples
        .iter()
        .map(|s| (s.day, s.hour, s.r_up_kw, s.r_down_kw, s.r_e20_kw))
        .collect())
}

#[pyfunction]
fn empirical_quantile(samples: Vec<f64>, eps: f64) -> PyResult<f64> {
    tailbid::empirical_quantile(&samples, eps).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (x, gamma_lo=0.05, gamma_hi=5.0, gamma_steps=200))]
fn fit_weibull_mle(x: Vec<f64>, gamma_lo: f64, gamma_hi: f64, gamma_steps: usize) -> PyResult<WeibullFit> {
    let f = tailbid::fit_weibull_mle(&x, &grid(gamma_lo, gamma_hi, gamma_steps)?).map_err(py_err)?;
    Ok(WeibullFit {
        kappa: f.params.kappa,
        gamma: f.params.gamma,
        nll: f.nll,
        at_boundary: f.at_boundary,
    })
}

#[pyfunction]
#[pyo3(signature = (samples, eps, gamma_lo=0.05, gamma_hi=5.0, gamma_steps=200))]
fn fit_tail(samples: Vec<f64>, eps: f64, gamma_lo: f64, gamma_hi: f64, gamma_steps: usize) -> PyResult<TailFit> {
    let o = tailbid::fit_tail(&samples, eps, &grid(gamma_lo, gamma_hi, gamma_steps)?).map_err(py_err)?;
    Ok(TailFit {
        threshold_kw: o.threshold_kw,
        kappa: o.fit.as_ref().map(|f| f.params.kappa),
        gamma: o.fit.as_ref().map(|f| f.params.gamma),
        nll: o.fit.as_ref().map(|f| f.nll),
        tail_x: o.tail_x,
    })
}

/// KS test of `samples` against a fitted Weibull.
#[pyfunction]
fn ks_weibull(samples: Vec<f64>, kappa: f64, gamma: f64) -> PyResult<KsResult> {
    let p = params(kappa, gamma)?;
    let r = tailbid::ks_test(&samples, |x| p.cdf(x)).map_err(py_err)?;
    Ok(KsResult { d_n: r.d_n, p_value: r.p_value, n: r.n })
}

#[pyfunction]
fn bid_cap(r_eps: f64, kappa: f64, gamma: f64, alpha: f64, eps: f64) -> PyResult<f64> {
    tailbid::bid_cap(r_eps, &params(kappa, gamma)?, alpha, eps).map_err(py_err)
}

/// Closed-form bid. `thresholds` and `tails` are ordered (up, down, e20);
/// a tail of `None` caps its constraint at zero. `alpha` defaults to eps/3.
#[pyfunction]
#[pyo3(signature = (thresholds, tails, eps, alpha=None))]
fn analytical_bid(
    thresholds: Triple,
    tails: [Option<(f64, f64)>; 3],
    eps: f64,
    alpha: Option<f64>,
) -> PyResult<AnalyticalBid> {
    let model = |t: f64, p: Option<(f64, f64)>| -> PyResult<TailModel> {
        Ok(TailModel {
            threshold_kw: t,
            params: p.map(|(k, g)| params(k, g)).transpose()?,
        })
    };
    let inputs = tailbid::AnalyticalInputs {
        up: model(thresholds.0, tails[0])?,
        down: model(thresholds.1, tails[1])?,
        e20: model(thresholds.2, tails[2])?,
        eps,
    };
    let b = tailbid::analytical_bid(&inputs, alpha.unwrap_or(eps / 3.0)).map_err(py_err)?;
    Ok(AnalyticalBid {
        bid: b.bid.into(),
        cap_up: b.cap_up,
        cap_down: b.cap_down,
        feasible: b.feasible,
    })
}

/// Exact scenario bid allowing `floor(n eps)` violated scenarios.
#[pyfunction]
fn scenario_bid(scenarios: Vec<Triple>, eps: f64) -> PyResult<ScenarioBid> {
    let set = tailbid::ScenarioSet::new(scenarios.into_iter().map(triple).collect(), eps).map_err(py_err)?;
    let s = tailbid::scenario_bid(&set).map_err(py_err)?;
    Ok(ScenarioBid {
        bid: s.bid.into(),
        objective: s.objective,
        violated: s.violated,
    })
}

#[pyfunction]
#[pyo3(signature = (eps, delta, p=2))]
fn required_sample_size(eps: f64, delta: f64, p: u32) -> PyResult<usize> {
    tailbid::required_sample_size(eps, delta, p).map_err(py_err)
}

#[pyfunction]
fn t_quantile(tail_prob: f64, df: f64) -> PyResult<f64> {
    tailbid::t_quantile(tail_prob, df).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (samples, level=0.95))]
fn confidence_interval(samples: Vec<f64>, level: f64) -> PyResult<(f64, f64)> {
    tailbid::confidence_interval(&samples, level).map_err(py_err)
}

#[pyfunction]
fn count_violations(bid: Bid, oos: Vec<Triple>) -> PyResult<ValidationReport> {
    let oos: Vec<FlexTriple> = oos.into_iter().map(triple).collect();
    let r = tailbid::count_violations(&bid.into(), &oos).map_err(py_err)?;
    Ok(ValidationReport {
        n_oos: r.n_oos,
        violations_up: r.violations_up,
        violations_down: r.violations_down,
        violations_e20: r.violations_e20,
        violations_joint: r.violations_joint,
        joint_rate: r.joint_rate,
    })
}

/// Repeated in-sample/out-of-sample experiment on hourly samples; returns
/// the per-method summaries as plain dicts and lists.
#[pyfunction]
#[pyo3(signature = (hourly, **opts))]
fn run_experiment(
    py: Python<'_>,
    hourly: Vec<(i64, u8, f64, f64, f64)>,
    opts: Option<&Bound<'_, PyDict>>,
) -> PyResult<Py<PyAny>> {
    let c = config(opts)?;
    let samples: Vec<HourlyFlexSample> = hourly
        .into_iter()
        .map(|(day, hour, u, d, e)| HourlyFlexSample {
            day,
            hour,
            r_up_kw: u,
            r_down_kw: d,
            r_e20_kw: e,
        })
        .collect();
    let res = tailbid::run_experiment(&samples, &c.experiment().map_err(py_err)?).map_err(py_err)?;
    let mut out = BTreeMap::new();
    out.insert("analytical", &res.summary_analytical);
    out.insert("scenario", &res.summary_scenario);
    to_python(py, &out)
}

#[pymodule]
#[pyo3(name = "tailbid")]
fn tailbid_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Bid>()?;
    m.add_class::<WeibullFit>()?;
    m.add_class::<TailFit>()?;
    m.add_class::<KsResult>()?;
    m.add_class::<AnalyticalBid>()?;
    m.add_class::<ScenarioBid>()?;
    m.add_class::<ValidationReport>()?;
    m.add_function(wrap_pyfunction!(synth_fleet, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(fit_weibull_mle, m)?)?;
    m.add_function(wrap_pyfunction!(fit_tail, m)?)?;
    m.add_function(wrap_pyfunction!(ks_weibull, m)?)?;
    m.add_function(wrap_pyfunction!(bid_cap, m)?)?;
    m.add_function(wrap_pyfunction!(analytical_bid, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_bid, m)?)?;
    m.add_function(wrap_pyfunction!(required_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(t_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_interval, m)?)?;
    m.add_function(wrap_pyfunction!(count_violations, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
