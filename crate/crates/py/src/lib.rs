//! Python module `nlelliptic_py`.

use std::cell::RefCell;
use std::path::Path;

use nlelliptic::abp::{abp_inequality_check, AbpConfig, EnvelopeConfig};
use nlelliptic::barriers::{search_barrier_params, BarrierLemma, SearchBox, SearchOptions};
use nlelliptic::cli::{barrier_params, exit_code, run_command};
use nlelliptic::config::{parse_config, Command};
use nlelliptic::eval::{self, QuadratureConfig, Sign};
use nlelliptic::field::{Exterior, Field, GridFunction};
use nlelliptic::kernel::{self, Combinator, KernelKind, KernelSpec, LinearOpSpec, OperatorDictionary};
use nlelliptic::regularity;
use nlelliptic::solver::{self, DiscreteScheme, GridConfig, SolveResult, SolverConfig};
use nlelliptic::Error;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::InvalidArgument(_) | Error::Config(_) => PyValueError::new_err(msg),
        Error::Io(_) => PyOSError::new_err(msg),
        Error::Numeric(_) | Error::Domain(_) => PyArithmeticError::new_err(msg),
        Error::Rejected(_) => PyRuntimeError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for nlelliptic::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(name = "KernelParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyKernelParams(kernel::KernelParams);

#[pymethods]
impl PyKernelParams {
    #[new]
    #[pyo3(signature = (n, sigma, lam, cap_lam, beta, lower_support = 1.0))]
    fn new(n: usize, sigma: f64, lam: f64, cap_lam: f64, beta: f64, lower_support: f64) -> PyResult<Self> {
        let p = kernel::KernelParams::new(n, sigma, lam, cap_lam, beta).py_err()?;
        Ok(Self(p.with_lower_support(lower_support).py_err()?))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }

    fn with_sigma(&self, sigma: f64) -> PyResult<Self> {
        Ok(Self(self.0.with_sigma(sigma).py_err()?))
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "Kernel", frozen, from_py_object)]
#[derive(Clone)]
struct PyKernel(KernelSpec);

#[pymethods]
impl PyKernel {
    #[staticmethod]
    fn fractional(a: f64, params: PyKernelParams) -> PyResult<Self> {
        Ok(Self(KernelSpec::fractional(a, params.0).py_err()?))
    }

    #[staticmethod]
    fn tilted(a: f64, c: Vec<f64>, params: PyKernelParams) -> PyResult<Self> {
        Ok(Self(KernelSpec::new(KernelKind::Tilted { a, c }, params.0).py_err()?))
    }

    #[staticmethod]
    fn shell_tilted(a: f64, c: Vec<f64>, inner: f64, outer: f64, params: PyKernelParams) -> PyResult<Self> {
        Ok(Self(KernelSpec::new(KernelKind::ShellTilted { a, c, inner, outer }, params.0).py_err()?))
    }

    #[staticmethod]
    fn extremal(sign: &str, params: PyKernelParams) -> PyResult<Self> {
        Ok(Self(match sign.parse::<Sign>().py_err()? {
            Sign::Minus => KernelSpec::extremal_minus(params.0),
            Sign::Plus => KernelSpec::extremal_plus(params.0),
        }))
    }

    fn __call__(&self, y: Vec<f64>) -> PyResult<f64> {
        kernel::eval_kernel(&self.0, &y).py_err()
    }
}

#[pyclass(name = "LinearOp", frozen, from_py_object)]
#[derive(Clone)]
struct PyLinearOp(LinearOpSpec);

#[pymethods]
impl PyLinearOp {
    #[new]
    fn new(kernel: PyKernel, drift: Vec<f64>) -> PyResult<Self> {
        Ok(Self(LinearOpSpec::new(kernel.0, drift).py_err()?))
    }

    /// Returns `(admissible, worst_ratio, [(r, q(r)), ...])`.
    #[pyo3(signature = (r_grid = None))]
    fn drift_admissibility(&self, r_grid: Option<Vec<f64>>) -> PyResult<(bool, f64, Vec<(f64, f64)>)> {
        let r = kernel::drift_admissibility(&self.0, &r_grid.unwrap_or_else(kernel::default_r_grid)).py_err()?;
        Ok((r.admissible, r.worst_ratio, r.q))
    }
}

/// Lattice function on `hZ^n ∩ B_R` with constant exterior data.
#[pyclass(name = "GridFunction", frozen)]
struct PyGridFunction(GridFunction);

#[pymethods]
impl PyGridFunction {
    /// Samples the Python callable `f(x: list[float]) -> float` at the lattice nodes.
    #[staticmethod]
    #[pyo3(signature = (n, h, radius, f, exterior = 0.0))]
    fn sample(n: usize, h: f64, radius: f64, f: &Bound<'_, PyAny>, exterior: f64) -> PyResult<Self> {
        let failure: RefCell<Option<PyErr>> = RefCell::new(None);
        let g = GridFunction::from_fn(
            n,
            h,
            radius,
            |x| match f.call1((x.to_vec(),)).and_then(|v| v.extract::<f64>()) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            Exterior::Constant(exterior),
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(Self(g.py_err()?))
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    fn __call__(&self, x: Vec<f64>) -> f64 {
        self.0.value(&x)
    }
}

/// Returns `(value, error_estimate)`.
#[pyfunction]
fn eval_linear(u: &PyGridFunction, x: Vec<f64>, op: &PyLinearOp) -> PyResult<(f64, f64)> {
    let r = eval::eval_linear(&u.0, &x, &op.0, &QuadratureConfig::for_spacing(u.0.spacing())).py_err()?;
    Ok((r.value, r.error_estimate))
}

/// Extremal operator `M^±`; `sign` is `"+"` or `"-"`.
#[pyfunction]
fn eval_pucci(u: &PyGridFunction, x: Vec<f64>, sign: &str, params: PyKernelParams) -> PyResult<(f64, f64)> {
    let s = sign.parse::<Sign>().py_err()?;
    let r = eval::eval_pucci(&u.0, &x, s, &params.0, &QuadratureConfig::for_spacing(u.0.spacing())).py_err()?;
    Ok((r.value, r.error_estimate))
}

#[pyclass(name = "Scheme", frozen)]
struct PyScheme(DiscreteScheme);

#[pymethods]
impl PyScheme {
    /// `combinator` is `"inf"`, `"sup"`, or a list of groups for inf-sup.
    #[new]
    #[pyo3(signature = (ops, h, domain_radius = 1.0, combinator = "sup", groups = None))]
    fn new(ops: Vec<PyLinearOp>, h: f64, domain_radius: f64, combinator: &str, groups: Option<Vec<Vec<usize>>>) -> PyResult<Self> {
        let c = match (combinator, groups) {
            ("inf", _) => Combinator::Inf,
            ("sup", _) => Combinator::Sup,
            ("infsup", Some(g)) => Combinator::InfSup(g),
            _ => return Err(PyValueError::new_err("combinator must be 'inf', 'sup' or 'infsup' with groups")),
        };
        let dict = OperatorDictionary::new(ops.into_iter().map(|o| o.0).collect(), c).py_err()?;
        Ok(Self(solver::discretize(&dict, &GridConfig { h, domain_radius }).py_err()?))
    }

    #[getter]
    fn interior_points(&self) -> Vec<Vec<f64>> {
        self.0.interior_points()
    }

    #[getter]
    fn is_monotone(&self) -> bool {
        self.0.is_monotone()
    }

    /// Solves the Dirichlet problem with right side `f` (one value per interior node).
    #[pyo3(signature = (f, exterior = 0.0, tol = 1e-9))]
    fn solve(&self, f: Vec<f64>, exterior: f64, tol: f64) -> PyResult<PySolution> {
        let cfg = SolverConfig { tol, ..SolverConfig::default() };
        Ok(PySolution(solver::solve_dirichlet(&self.0, &f, &Exterior::Constant(exterior), &cfg).py_err()?))
    }

    /// ABP instance for a solve on this scheme, as a dict.
    #[pyo3(signature = (solution, rho0))]
    fn abp_check<'py>(&self, py: Python<'py>, solution: &PySolution, rho0: f64) -> PyResult<Bound<'py, PyDict>> {
        let env = EnvelopeConfig::new(self.0.spacing());
        let (inst, _) = abp_inequality_check(&self.0, &solution.0, rho0, &env, &AbpConfig::default()).py_err()?;
        let d = PyDict::new(py);
        d.set_item("rho0", inst.rho0)?;
        d.set_item("f_plus", inst.f_plus)?;
        d.set_item("lhs", inst.lhs)?;
        d.set_item("rhs", inst.rhs)?;
        d.set_item("constant", inst.constant)?;
        d.set_item("gradient_image", inst.gradient_image)?;
        d.set_item("contact_points", inst.contact_points)?;
        d.set_item("convexity_defect", inst.convexity_defect)?;
        Ok(d)
    }
}

#[pyclass(name = "Solution", frozen)]
struct PySolution(SolveResult);

#[pymethods]
impl PySolution {
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.interior_values.clone()
    }

    #[getter]
    fn residual_norm(&self) -> f64 {
        self.0.residual_norm
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[getter]
    fn comparison_certificate(&self) -> bool {
        self.0.comparison_certificate
    }

    #[getter]
    fn sup_bound(&self) -> f64 {
        self.0.sup_bound
    }

    /// Returns `(radii, oscillations, fitted_alpha)`.
    fn oscillation_decay(&self, x0: Vec<f64>, radii: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
        let t = regularity::oscillation_decay(&self.0.u, &x0, &radii).py_err()?;
        Ok((t.radii, t.oscillations, t.fitted_exponent))
    }
}

/// Searches barrier parameters; returns `(exponent, radius, margin)` or `None`.
#[pyfunction]
fn search_barrier(lemma: &str, params: PyKernelParams) -> PyResult<Option<(f64, f64, f64)>> {
    let l = lemma.parse::<BarrierLemma>().py_err()?;
    let p = barrier_params(l, &params.0).py_err()?;
    let out = search_barrier_params(l, &p, &SearchBox::default_for(l, p.n), &SearchOptions::default()).py_err()?;
    Ok(out.found().map(|(s, r)| (s.exponent, s.radius, r.margin)))
}

/// Runs a command-line command from config text; returns `(exit_code, summary)`.
#[pyfunction]
#[pyo3(signature = (command, config, out, seed = 0))]
fn run(command: &str, config: &str, out: &str, seed: u64) -> PyResult<(i32, String)> {
    let cmd = command.parse::<Command>().map_err(|e| PyValueError::new_err(e.to_string()))?;
    let cfg = parse_config(config).py_err()?;
    let r = run_command(&cfg, cmd, Path::new(out), seed);
    let summary = match &r {
        Ok(o) => o.summary.clone(),
        Err(e) => e.to_string(),
    };
    Ok((exit_code(&r), summary))
}

#[pymodule]
fn nlelliptic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernelParams>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyLinearOp>()?;
    m.add_class::<PyGridFunction>()?;
    m.add_class::<PyScheme>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(eval_linear, m)?)?;
    m.add_function(wrap_pyfunction!(eval_pucci, m)?)?;
    m.add_function(wrap_pyfunction!(search_barrier, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
