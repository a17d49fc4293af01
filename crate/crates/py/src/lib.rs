//! Python bindings: kernels, operator evaluation, ball solves, moving-plane
//! sweeps and experiment runs.

use std::path::PathBuf;

use nonlocal_core::alpha_limit;
use nonlocal_core::experiment::{self, ExperimentConfig, RunOptions};
use nonlocal_core::field::{AnalyticField, Field, GridField};
use nonlocal_core::kernels::{check_k1, JumpKernel, KernelSpec};
use nonlocal_core::moving_planes::{sweep_lambda, verify_radial_symmetry};
use nonlocal_core::nonlinearity::{FKind, GKind, NonlinearitySpec};
use nonlocal_core::pv_quadrature::{eval_fgk, QuadratureConfig};
use nonlocal_core::solver::{solve_dirichlet_nonlinear, DomainSpec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: nonlocal_core::Error) -> PyErr {
    if experiment::exit_code_for(&e) == 2 {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn g_kind(gamma: f64) -> GKind {
    if gamma == 0.0 {
        GKind::Identity
    } else {
        GKind::PowerG { gamma }
    }
}

/// A jump kernel from the built-in families.
#[pyclass(name = "Kernel", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyKernel {
    pub spec: KernelSpec,
}

#[pymethods]
impl PyKernel {
    #[staticmethod]
    #[pyo3(signature = (dim, alpha, c_lower = 1.0))]
    fn power_law(dim: usize, alpha: f64, c_lower: f64) -> PyResult<Self> {
        KernelSpec::power_law(dim, alpha, c_lower).map(|spec| PyKernel { spec }).map_err(err)
    }

    #[staticmethod]
    fn exponential(dim: usize, alpha: f64) -> PyResult<Self> {
        KernelSpec::exponential(dim, alpha).map(|spec| PyKernel { spec }).map_err(err)
    }

    #[staticmethod]
    fn anisotropic(dim: usize, alpha: f64, p: f64) -> PyResult<Self> {
        KernelSpec::anisotropic(dim, alpha, p).map(|spec| PyKernel { spec }).map_err(err)
    }

    #[staticmethod]
    fn matrix_transformed(alpha: f64, lam: Vec<f64>) -> PyResult<Self> {
        KernelSpec::matrix_transformed(alpha, lam).map(|spec| PyKernel { spec }).map_err(err)
    }

    #[staticmethod]
    fn diag_quadratic(alpha: f64, lam: Vec<f64>) -> PyResult<Self> {
        KernelSpec::diag_quadratic(alpha, lam).map(|spec| PyKernel { spec }).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.spec.alpha()
    }

    #[getter]
    fn kind(&self) -> String {
        format!("{:?}", self.spec.kind())
    }

    /// `K(y)` for `y != 0`.
    fn density(&self, y: Vec<f64>) -> PyResult<f64> {
        nonlocal_core::kernels::eval_kernel(&self.spec, &y).map_err(err)
    }

    /// Report of the uniform lower/upper bound check.
    #[pyo3(signature = (samples = 256))]
    fn check_k1<'py>(&self, py: Python<'py>, samples: usize) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &check_k1(&self.spec, samples))
    }

    fn __repr__(&self) -> String {
        format!("Kernel({:?}, dim={}, alpha={})", self.spec.kind(), self.spec.dim(), self.spec.alpha())
    }
}

/// `P.V.∫ G(u(x) − u(y)) K(x − y) dy` for `u = e^{−|x−c|²/w²}`; returns
/// `(value, err_estimate)`.
#[pyfunction]
#[pyo3(signature = (kernel, x, center = None, width = 1.0, gamma = 0.0))]
fn eval_gaussian(kernel: &PyKernel, x: Vec<f64>, center: Option<Vec<f64>>, width: f64, gamma: f64) -> PyResult<(f64, f64)> {
    let n = kernel.spec.dim();
    let c = center.unwrap_or_else(|| vec![0.0; n]);
    if c.len() != n || x.len() != n || !(width > 0.0) {
        return Err(PyValueError::new_err(format!("center and x need {n} entries and width must be positive")));
    }
    let u = Field::Analytic(AnalyticField::gaussian(vec![0.0; n]).dilated(width).translated(c));
    let e = eval_fgk(&u, &g_kind(gamma), &kernel.spec, &x, &QuadratureConfig::default()).map_err(err)?;
    Ok((e.value, e.err_estimate))
}

/// Lattice solution of a Dirichlet problem on a ball.
#[pyclass(name = "Solution", frozen)]
pub struct PySolution {
    field: GridField,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    residual: f64,
}

#[pymethods]
impl PySolution {
    /// Node values, row-major over the lattice.
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.field.data.clone()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        let l = &self.field.lattice;
        l.nodes().map(|k| l.point(&k)).collect()
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.field.lattice.shape.clone()
    }

    /// Multilinear interpolant at `x` (0 outside the lattice box).
    fn value(&self, x: Vec<f64>) -> f64 {
        self.field.value(&x)
    }

    /// Moving-plane sweep along `axis`.
    #[pyo3(signature = (axis = 0, tolerance = 1e-9))]
    fn sweep<'py>(&self, py: Python<'py>, axis: usize, tolerance: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &sweep_lambda(&Field::Grid(self.field.clone()), axis, tolerance).map_err(err)?)
    }

    /// Radial symmetry and monotonicity about `center`.
    #[pyo3(signature = (center = None, tolerance = 1e-6))]
    fn radial<'py>(&self, py: Python<'py>, center: Option<Vec<f64>>, tolerance: f64) -> PyResult<Bound<'py, PyAny>> {
        let c = center.unwrap_or_else(|| vec![0.0; self.field.dim()]);
        to_py(py, &verify_radial_symmetry(&Field::Grid(self.field.clone()), &c, tolerance).map_err(err)?)
    }
}

/// Solve `∫G(u(x)−u(y))K(x−y)dy = a + b|u|^p` on the ball of radius
/// `radius`, `u = 0` outside, with `u` clamped to `clip` inside `f`;
/// `gamma = 0` gives the linear operator.
#[pyfunction]
#[pyo3(signature = (kernel, grid_n, radius = 1.0, gamma = 0.0, a = 1.0, b = 0.0, p = 1.0, clip = (0.0, 2.0), tol = 1e-8))]
#[allow(clippy::too_many_arguments)]
fn solve_ball(
    kernel: &PyKernel,
    grid_n: usize,
    radius: f64,
    gamma: f64,
    a: f64,
    b: f64,
    p: f64,
    clip: (f64, f64),
    tol: f64,
) -> PyResult<PySolution> {
    let f = if b == 0.0 {
        FKind::Constant { a }
    } else {
        FKind::AffinePlusPower { a, b, p, clip_lo: clip.0, clip_hi: clip.1 }
    };
    let ns = NonlinearitySpec::new(g_kind(gamma), f).map_err(err)?;
    let domain = DomainSpec::new(kernel.spec.dim(), radius, grid_n).map_err(err)?;
    let s = solve_dirichlet_nonlinear(&ns, &kernel.spec, &domain, &QuadratureConfig::default(), tol).map_err(err)?;
    Ok(PySolution {
        iterations: s.report.iterations,
        converged: s.report.converged,
        residual: s.report.final_residual_sup,
        field: s.field,
    })
}

/// `1/Γ((2−α)/2)`.
#[pyfunction]
fn gamma_prefactor(alpha: f64) -> PyResult<f64> {
    alpha_limit::gamma_prefactor(alpha).map_err(err)
}

/// Limit constant of the `p`-norm family.
#[pyfunction]
#[pyo3(signature = (dim, p, tol = 1e-9))]
fn anisotropic_constant(dim: usize, p: f64, tol: f64) -> PyResult<f64> {
    alpha_limit::anisotropic_constant(dim, p, tol).map_err(err)
}

/// Run an experiment given as TOML text; returns the run summary.
#[pyfunction]
#[pyo3(signature = (toml, output_dir, seed = None))]
fn run_experiment<'py>(py: Python<'py>, toml: &str, output_dir: PathBuf, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_toml_str(toml).map_err(err)?;
    let s = experiment::run(&cfg, &RunOptions { output_dir: Some(output_dir), seed, task: None }).map_err(err)?;
    to_py(py, &s)
}

#[pymodule]
pub fn nonlocal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(eval_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ball, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_prefactor, m)?)?;
    m.add_function(wrap_pyfunction!(anisotropic_constant, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
