//! Python bindings. Matrices cross the boundary as lists of rows.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use sugar_core::dataset::{self, MixtureComponent, SwissRollSpec};
use sugar_core::eval;
use sugar_core::kernel;
use sugar_core::pipeline::IterationRecord;
use sugar_core::{AugmentedDataset, BandwidthSpec, DataMatrix, KsProbe, LabeledDataset, SugarConfig, SugarError};

type Rows = Vec<Vec<f64>>;

fn py_err(e: SugarError) -> PyErr {
    match e {
        SugarError::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: &Rows) -> PyResult<DataMatrix> {
    DataMatrix::from_rows(rows).map_err(py_err)
}

fn labeled(x: &Rows, y: Vec<usize>) -> PyResult<LabeledDataset> {
    LabeledDataset::new(matrix(x)?, y).map_err(py_err)
}

fn bandwidth(s: &str) -> PyResult<BandwidthSpec> {
    s.parse().map_err(py_err)
}

#[pyclass(name = "SugarConfig", module = "sugar_py", from_py_object)]
#[derive(Clone)]
struct PySugarConfig {
    inner: SugarConfig,
}

#[pymethods]
impl PySugarConfig {
    #[new]
    #[pyo3(signature = (degree_bandwidth=None, diffusion_bandwidth=None, k_cov=None, t=None, rescale=None, seed=None, max_iters=None, ks_target_p=None, max_rows=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        degree_bandwidth: Option<&str>,
        diffusion_bandwidth: Option<&str>,
        k_cov: Option<usize>,
        t: Option<u32>,
        rescale: Option<bool>,
        seed: Option<u64>,
        max_iters: Option<usize>,
        ks_target_p: Option<f64>,
        max_rows: Option<usize>,
    ) -> PyResult<Self> {
        let mut c = SugarConfig::default();
        if let Some(b) = degree_bandwidth {
            c.degree_bandwidth = bandwidth(b)?;
        }
        if let Some(b) = diffusion_bandwidth {
            c.diffusion_bandwidth = bandwidth(b)?;
        }
        c.k_cov = k_cov.unwrap_or(c.k_cov);
        c.t = t.unwrap_or(c.t);
        c.rescale = rescale.unwrap_or(c.rescale);
        c.seed = seed.unwrap_or(c.seed);
        c.max_iters = max_iters.unwrap_or(c.max_iters);
        c.ks_target_p = ks_target_p.or(c.ks_target_p);
        c.max_rows = max_rows.unwrap_or(c.max_rows);
        c.validate().map_err(py_err)?;
        Ok(PySugarConfig { inner: c })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PySugarConfig {
            inner: SugarConfig::from_json(text).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn degree_bandwidth(&self) -> String {
        self.inner.degree_bandwidth.to_string()
    }

    #[getter]
    fn diffusion_bandwidth(&self) -> String {
        self.inner.diffusion_bandwidth.to_string()
    }

    #[getter]
    fn k_cov(&self) -> usize {
        self.inner.k_cov
    }

    #[getter]
    fn t(&self) -> u32 {
        self.inner.t
    }

    #[getter]
    fn rescale(&self) -> bool {
        self.inner.rescale
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn max_iters(&self) -> usize {
        self.inner.max_iters
    }

    #[getter]
    fn ks_target_p(&self) -> Option<f64> {
        self.inner.ks_target_p
    }

    #[getter]
    fn max_rows(&self) -> usize {
        self.inner.max_rows
    }

    fn __repr__(&self) -> String {
        format!("SugarConfig({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

#[pyclass(name = "IterationRecord", module = "sugar_py", get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyIterationRecord {
    iteration: usize,
    input_rows: usize,
    generated: usize,
    degree_variance_before: f64,
    degree_variance_after: f64,
    ks_p_value: Option<f64>,
}

impl From<&IterationRecord> for PyIterationRecord {
    fn from(r: &IterationRecord) -> Self {
        PyIterationRecord {
            iteration: r.iteration,
            input_rows: r.input_rows,
            generated: r.generated,
            degree_variance_before: r.degree_variance_before,
            degree_variance_after: r.degree_variance_after,
            ks_p_value: r.ks_p_value,
        }
    }
}

#[pyclass(name = "AugmentedDataset", module = "sugar_py", get_all)]
struct PyAugmented {
    original: Rows,
    generated: Rows,
    combined: Rows,
    origin: Vec<usize>,
    history: Vec<PyIterationRecord>,
    comparison_sigma2: Option<f64>,
    stop_reason: Option<String>,
}

impl From<AugmentedDataset> for PyAugmented {
    fn from(a: AugmentedDataset) -> Self {
        PyAugmented {
            original: a.original.to_rows(),
            generated: a.generated.to_rows(),
            combined: a.combined.to_rows(),
            origin: a.origin,
            history: a.history.iter().map(Into::into).collect(),
            comparison_sigma2: a.comparison_sigma2,
            stop_reason: a.stop_reason,
        }
    }
}

#[pymethods]
impl PyAugmented {
    fn __repr__(&self) -> String {
        format!(
            "AugmentedDataset(original={}, generated={}, iterations={})",
            self.original.len(),
            self.generated.len(),
            self.history.len()
        )
    }
}

fn config_or_default(config: Option<&PySugarConfig>) -> SugarConfig {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

/// One generation pass.
#[pyfunction]
#[pyo3(signature = (x, config=None))]
fn sugar(py: Python<'_>, x: Rows, config: Option<PySugarConfig>) -> PyResult<PyAugmented> {
    let x = matrix(&x)?;
    let cfg = config_or_default(config.as_ref());
    let out = py.detach(|| sugar_core::sugar(&x, &cfg)).map_err(py_err)?;
    Ok(out.into())
}

/// Up to `config.max_iters` passes. With `ks_angle`, every round records a
/// K-S p-value of the polar angle of the first two columns.
#[pyfunction]
#[pyo3(signature = (x, config=None, ks_angle=false))]
fn sugar_iterate(py: Python<'_>, x: Rows, config: Option<PySugarConfig>, ks_angle: bool) -> PyResult<PyAugmented> {
    let x = matrix(&x)?;
    let cfg = config_or_default(config.as_ref());
    let out = py
        .detach(|| {
            if ks_angle {
                sugar_core::sugar_iterate_with(&x, &cfg, &KsProbe::angle())
            } else {
                sugar_core::sugar_iterate(&x, &cfg)
            }
        })
        .map_err(py_err)?;
    Ok(out.into())
}

#[pyfunction]
#[pyo3(signature = (n, bias=0.0, seed=0))]
fn gen_circle(n: usize, bias: f64, seed: u64) -> PyResult<Rows> {
    Ok(dataset::gen_circle(n, bias, seed).map_err(py_err)?.to_rows())
}

#[pyfunction]
#[pyo3(signature = (n, bias=0.0, seed=0))]
fn gen_sphere(n: usize, bias: f64, seed: u64) -> PyResult<Rows> {
    Ok(dataset::gen_sphere(n, bias, seed).map_err(py_err)?.to_rows())
}

#[pyfunction]
#[pyo3(signature = (n=600, theta_bias=1.0, seed=0))]
fn gen_swiss_roll(n: usize, theta_bias: f64, seed: u64) -> PyResult<Rows> {
    let spec = SwissRollSpec {
        n,
        theta_bias,
        seed,
        ..Default::default()
    };
    Ok(dataset::gen_swiss_roll(&spec).map_err(py_err)?.to_rows())
}

/// Isotropic Gaussian mixture; returns `(rows, labels)`.
#[pyfunction]
#[pyo3(signature = (means, weights, n, var=1.0, seed=0))]
fn gen_gaussian_mixture(means: Rows, weights: Vec<f64>, n: usize, var: f64, seed: u64) -> PyResult<(Rows, Vec<usize>)> {
    if means.len() != weights.len() {
        return Err(PyValueError::new_err("means and weights differ in length"));
    }
    let comps: Vec<MixtureComponent> = means
        .into_iter()
        .zip(weights)
        .enumerate()
        .map(|(label, (m, w))| MixtureComponent::spherical(m, var, w, label))
        .collect();
    let (x, y) = dataset::gen_gaussian_mixture(&comps, n, seed).map_err(py_err)?.into_parts();
    Ok((x.to_rows(), y))
}

#[pyfunction]
#[pyo3(signature = (x, bandwidth="maxmin:2"))]
fn gaussian_kernel(x: Rows, bandwidth: &str) -> PyResult<Rows> {
    let x = matrix(&x)?;
    let k = kernel::gaussian_kernel(&x, &x, &self::bandwidth(bandwidth)?).map_err(py_err)?;
    Ok(k.values().outer_iter().map(|r| r.to_vec()).collect())
}

#[pyfunction]
#[pyo3(signature = (x, bandwidth="maxmin:2"))]
fn degree_variance(x: Rows, bandwidth: &str) -> PyResult<f64> {
    eval::degree_variance(&matrix(&x)?, &self::bandwidth(bandwidth)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (x, bandwidth="maxmin:2"))]
fn normalized_degree_variance(x: Rows, bandwidth: &str) -> PyResult<f64> {
    eval::normalized_degree_variance(&matrix(&x)?, &self::bandwidth(bandwidth)?).map_err(py_err)
}

/// `(statistic, p_value)` against the uniform law on `[lo, hi]`.
#[pyfunction]
fn ks_uniform_test(values: Vec<f64>, lo: f64, hi: f64) -> PyResult<(f64, f64)> {
    let r = eval::ks_uniform_test(&values, (lo, hi)).map_err(py_err)?;
    Ok((r.statistic, r.p_value))
}

#[pyfunction]
#[pyo3(signature = (x, k, seed=0, restarts=10))]
fn kmeans(x: Rows, k: usize, seed: u64, restarts: usize) -> PyResult<Vec<usize>> {
    eval::kmeans(&matrix(&x)?, k, seed, restarts).map_err(py_err)
}

#[pyfunction]
fn rand_index(a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    eval::rand_index(&a, &b).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (train_x, train_y, test_x, k=5))]
fn knn_classify(train_x: Rows, train_y: Vec<usize>, test_x: Rows, k: usize) -> PyResult<Vec<usize>> {
    eval::knn_classify(&labeled(&train_x, train_y)?, &matrix(&test_x)?, k).map_err(py_err)
}

/// Returns `(acp, acr)`.
#[pyfunction]
fn classification_report(y_true: Vec<usize>, y_pred: Vec<usize>) -> PyResult<(f64, f64)> {
    let r = eval::classification_report(&y_true, &y_pred).map_err(py_err)?;
    Ok((r.acp, r.acr))
}

#[pyfunction]
#[pyo3(signature = (x, y, k=5, target_ratio=1.0, seed=0))]
fn smote(x: Rows, y: Vec<usize>, k: usize, target_ratio: f64, seed: u64) -> PyResult<(Rows, Vec<usize>)> {
    let (m, l) = eval::smote(&labeled(&x, y)?, k, target_ratio, seed).map_err(py_err)?.into_parts();
    Ok((m.to_rows(), l))
}

#[pyfunction]
#[pyo3(signature = (u, v, bins=None))]
fn mutual_information(u: Vec<f64>, v: Vec<f64>, bins: Option<usize>) -> PyResult<f64> {
    let bins = bins.unwrap_or_else(|| eval::default_bins(u.len()));
    eval::mutual_information(&u, &v, bins).map_err(py_err)
}

#[pymodule]
pub fn sugar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySugarConfig>()?;
    m.add_class::<PyAugmented>()?;
    m.add_class::<PyIterationRecord>()?;
    m.add_function(wrap_pyfunction!(sugar, m)?)?;
    m.add_function(wrap_pyfunction!(sugar_iterate, m)?)?;
    m.add_function(wrap_pyfunction!(gen_circle, m)?)?;
    m.add_function(wrap_pyfunction!(gen_sphere, m)?)?;
    m.add_function(wrap_pyfunction!(gen_swiss_roll, m)?)?;
    m.add_function(wrap_pyfunction!(gen_gaussian_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(degree_variance, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_degree_variance, m)?)?;
    m.add_function(wrap_pyfunction!(ks_uniform_test, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(knn_classify, m)?)?;
    m.add_function(wrap_pyfunction!(classification_report, m)?)?;
    m.add_function(wrap_pyfunction!(smote, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_information, m)?)?;
    Ok(())
}
