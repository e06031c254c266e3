//! Python bindings: `truncvar.Path` plus the Brownian closed forms and the
//! Monte Carlo estimator.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use truncvar_core::analytics::{self, BmParams, SeriesConfig};
use truncvar_core::crossing::{variation_profile, EpochKind};
use truncvar_core::mc::{self, McConfig, Quantity};
use truncvar_core::{approx, csv_io, oracle, path, CadlagPath, TruncationLevel};

create_exception!(truncvar, TruncvarError, PyValueError);

fn err(e: truncvar_core::Error) -> PyErr {
    TruncvarError::new_err(format!("{}: {e}", e.kind()))
}

fn level(c: f64) -> PyResult<TruncationLevel> {
    TruncationLevel::new(c).map_err(err)
}

fn params(mu: f64, nu: f64, c: f64) -> PyResult<BmParams> {
    BmParams::new(mu, nu, c).map_err(err)
}

fn kind_name(kind: EpochKind) -> &'static str {
    match kind {
        EpochKind::Up => "up",
        EpochKind::Down => "down",
    }
}

/// A piecewise-constant path sampled at strictly increasing times.
#[pyclass(name = "Path", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPath(CadlagPath);

#[pymethods]
impl PyPath {
    #[new]
    #[pyo3(signature = (values, times=None))]
    fn new(values: Vec<f64>, times: Option<Vec<f64>>) -> PyResult<Self> {
        let p = match times {
            Some(t) => CadlagPath::new(t, values),
            None => CadlagPath::from_values(values),
        };
        p.map(PyPath).map_err(err)
    }

    #[staticmethod]
    fn read_csv(file: &str) -> PyResult<Self> {
        let f = std::fs::File::open(file).map_err(|e| TruncvarError::new_err(format!("io: {e}")))?;
        csv_io::read_path(f).map(PyPath).map_err(err)
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Path(len={}, start={}, end={})", self.0.len(), self.0.start(), self.0.end())
    }

    fn tv(&self, c: f64) -> PyResult<f64> {
        Ok(variation_profile(&self.0, level(c)?).final_values().tv)
    }

    fn utv(&self, c: f64) -> PyResult<f64> {
        Ok(variation_profile(&self.0, level(c)?).final_values().utv)
    }

    fn dtv(&self, c: f64) -> PyResult<f64> {
        Ok(variation_profile(&self.0, level(c)?).final_values().dtv)
    }

    /// `(tv, utv, dtv)` at every sample point.
    fn profile(&self, c: f64) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let p = variation_profile(&self.0, level(c)?);
        Ok((p.tv, p.utv, p.dtv))
    }

    fn total_variation(&self) -> f64 {
        path::total_variation(&self.0)
    }

    fn oscillation(&self) -> f64 {
        path::oscillation(&self.0)
    }

    fn sup_distance(&self, other: &PyPath) -> PyResult<f64> {
        path::sup_distance(&self.0, &other.0).map_err(err)
    }

    /// Brute-force `(tv, utv, dtv)`; only for short paths.
    fn brute(&self, c: f64) -> PyResult<(f64, f64, f64)> {
        let c = level(c)?;
        let tv = oracle::brute_tv(&self.0, c).map_err(err)?.value;
        let utv = oracle::brute_utv(&self.0, c).map_err(err)?.value;
        let dtv = oracle::brute_dtv(&self.0, c).map_err(err)?.value;
        Ok((tv, utv, dtv))
    }

    /// Dict with `f_c`, `f_ic`, `h_c`, `h_0c` (as Paths), `alpha`, `alpha_0`, `branch`.
    fn approximants<'py>(&self, py: Python<'py>, c: f64) -> PyResult<Bound<'py, PyDict>> {
        let b = approx::build_f_c(&self.0, level(c)?);
        let d = PyDict::new(py);
        d.set_item("f_c", PyPath(b.f_c))?;
        d.set_item("f_ic", PyPath(b.f_ic))?;
        d.set_item("h_c", PyPath(b.h_c))?;
        d.set_item("h_0c", PyPath(b.h_0c))?;
        d.set_item("alpha", b.alpha)?;
        d.set_item("alpha_0", b.alpha_0)?;
        d.set_item("branch", format!("{:?}", b.branch))?;
        Ok(d)
    }

    /// `(x_tilde_c, [(kind, index), ...])`.
    fn adapted(&self, c: f64) -> PyResult<(PyPath, Vec<(&'static str, usize)>)> {
        let a = approx::build_adapted(&self.0, level(c)?);
        let stops = a.stopping_indices.iter().map(|s| (kind_name(s.kind), s.index)).collect();
        Ok((PyPath(a.x_tilde_c), stops))
    }

    fn increment_process(&self, c: f64) -> PyResult<Vec<f64>> {
        Ok(approx::increment_process(&self.0, level(c)?))
    }
}

#[pyfunction]
fn theta(mu: f64, nu: f64, c: f64) -> PyResult<f64> {
    analytics::theta(mu, nu, c).map_err(err)
}

#[pyfunction]
fn v_factor(mu: f64, nu: f64, c: f64) -> PyResult<f64> {
    analytics::v_factor(mu, nu, c).map_err(err)
}

#[pyfunction]
#[pyo3(name = "mgf_tv")]
fn mgf(mu: f64, nu: f64, c: f64, lam: f64) -> PyResult<f64> {
    analytics::mgf_tv(&params(mu, nu, c)?, lam).map_err(err)
}

/// Closed-form moments under exponential killing, keyed by name.
#[pyfunction]
fn moments<'py>(py: Python<'py>, mu: f64, nu: f64, c: f64) -> PyResult<Bound<'py, PyDict>> {
    let p = params(mu, nu, c)?;
    let d = PyDict::new(py);
    d.set_item("mean_tv", analytics::mean_tv(&p))?;
    d.set_item("mean_utv", analytics::mean_utv(&p))?;
    d.set_item("mean_dtv", analytics::mean_dtv(&p))?;
    d.set_item("second_moment_tv", analytics::second_moment_tv(&p))?;
    d.set_item("second_moment_utv", analytics::second_moment_utv(&p))?;
    d.set_item("second_moment_dtv", analytics::second_moment_dtv(&p))?;
    d.set_item("cross_moment", analytics::cross_moment_exp(&p))?;
    d.set_item("covariance", analytics::covariance_exp(&p))?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (mu, c, t, k_max=500, quad_tol=1e-10))]
fn cross_moment_fixed_time(mu: f64, c: f64, t: f64, k_max: usize, quad_tol: f64) -> PyResult<f64> {
    let cfg = SeriesConfig { k_max, quad_tol };
    analytics::cross_moment_fixed_time(mu, c, t, &cfg).map(|v| v.value).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (mu, c, t, k_max=500, quad_tol=1e-10))]
fn covariance_fixed_time(mu: f64, c: f64, t: f64, k_max: usize, quad_tol: f64) -> PyResult<f64> {
    let cfg = SeriesConfig { k_max, quad_tol };
    analytics::covariance_fixed_time(mu, c, t, &cfg).map(|v| v.covariance).map_err(err)
}

fn quantity(name: &str, lam: Option<f64>, t: f64) -> PyResult<Quantity> {
    Ok(match name {
        "mean_tv" => Quantity::MeanTV,
        "mean_utv" => Quantity::MeanUTV,
        "mean_dtv" => Quantity::MeanDTV,
        "second_tv" => Quantity::SecondTV,
        "second_utv" => Quantity::SecondUTV,
        "second_dtv" => Quantity::SecondDTV,
        "cross_exp" => Quantity::CrossExp,
        "cov_exp" => Quantity::CovExp,
        "mgf_tv" => Quantity::MgfTV(lam.ok_or_else(|| TruncvarError::new_err("usage: mgf_tv needs lam"))?),
        "mean_utv_fixed" => Quantity::MeanUTVFixedT(t),
        "cross_fixed" => Quantity::CrossFixedT(t),
        "cov_fixed" => Quantity::CovFixedT(t),
        "cor_fixed" => Quantity::CorFixed(t),
        other => return Err(TruncvarError::new_err(format!("usage: unknown quantity {other:?}"))),
    })
}

/// Monte Carlo estimate with its closed form, if one exists.
#[pyfunction]
#[pyo3(signature = (name, mu, nu, c, *, seed, n_paths=10_000, dt=1e-3, lam=None, t=1.0, antithetic=false, richardson=false))]
#[allow(clippy::too_many_arguments)]
fn mc_estimate<'py>(
    py: Python<'py>,
    name: &str,
    mu: f64,
    nu: f64,
    c: f64,
    seed: u64,
    n_paths: usize,
    dt: f64,
    lam: Option<f64>,
    t: f64,
    antithetic: bool,
    richardson: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params(mu, nu, c)?;
    let q = quantity(name, lam, t)?;
    let cfg = McConfig {
        horizon: t,
        antithetic,
        richardson,
        ..McConfig::new(n_paths, dt, seed)
    };
    let est = py.detach(|| mc::estimate(q, &p, &cfg)).map_err(err)?;
    let closed = mc::closed_form(&q, &p, &SeriesConfig::default()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("mean", est.mean)?;
    d.set_item("std_error", est.std_error)?;
    d.set_item("refined_mean", est.refined_mean)?;
    d.set_item("bias", est.bias)?;
    d.set_item("closed_form", closed)?;
    d.set_item("within_3se_plus_bias", closed.map(|v| est.within(v, 3.0)))?;
    d.set_item("warnings", est.warnings)?;
    Ok(d)
}

#[pymodule]
fn truncvar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TruncvarError", m.py().get_type::<TruncvarError>())?;
    m.add_class::<PyPath>()?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(v_factor, m)?)?;
    m.add_function(wrap_pyfunction!(mgf, m)?)?;
    m.add_function(wrap_pyfunction!(moments, m)?)?;
    m.add_function(wrap_pyfunction!(cross_moment_fixed_time, m)?)?;
    m.add_function(wrap_pyfunction!(covariance_fixed_time, m)?)?;
    m.add_function(wrap_pyfunction!(mc_estimate, m)?)?;
    Ok(())
}
