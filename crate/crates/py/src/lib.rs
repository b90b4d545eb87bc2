//! Python bindings: model construction and admissibility checks, the
//! uniqueness threshold, heat-bath chains, the 1-D inequality battery and the
//! quadratic-model covariance oracle, all driven in-process.
//!
//! Structured results cross the boundary as JSON strings; the Python side
//! decodes them with `json.loads`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use polygibbs::analysis::{
    verify_brascamp_lieb_1d, verify_contraction, verify_lsi_1d, Observable,
};
use polygibbs::config::ModelConfig;
use polygibbs::lattice::{
    build_lattice, gaussian_covariance_oracle, uniqueness_threshold, Boundary, LatticeSpec,
    Semimetric,
};
use polygibbs::potentials::{check_conditions, eval_potential, ModelSpec};
use polygibbs::sampler::{ChainRunner, ChainState, SweepOrder};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_model_config(json: &str) -> PyResult<ModelConfig> {
    serde_json::from_str(json).map_err(value_err)
}

fn parse_order(order: &str) -> PyResult<SweepOrder> {
    match order {
        "sequential" => Ok(SweepOrder::Sequential),
        "checkerboard" => Ok(SweepOrder::Checkerboard),
        other => Err(value_err(format!(
            "unknown order {other:?} (sequential | checkerboard)"
        ))),
    }
}

/// Validated interaction model built from a model JSON object, e.g.
/// `{"type": "model1", "n": 1, "lambda": 0.02, "b": {"1": 1.0, "-1": 1.0}}`.
#[pyclass]
struct Model {
    spec: ModelSpec,
    config: ModelConfig,
}

#[pymethods]
impl Model {
    #[new]
    fn new(json: &str) -> PyResult<Self> {
        let config = parse_model_config(json)?;
        let spec = config.build().map_err(value_err)?;
        Ok(Model { spec, config })
    }

    /// Admissibility report (conditions A-C) as JSON.
    fn check_json(&self) -> PyResult<String> {
        let candidate = self.config.candidate().map_err(value_err)?;
        serde_json::to_string(&check_conditions(&candidate)).map_err(runtime_err)
    }

    /// Uniqueness threshold report at semimetric weight `alpha` as JSON.
    fn threshold_json(&self, alpha: f64) -> PyResult<String> {
        let metric = Semimetric::new(alpha).map_err(value_err)?;
        let report = uniqueness_threshold(&self.spec, &metric).map_err(runtime_err)?;
        serde_json::to_string(&report).map_err(runtime_err)
    }

    /// Uniform convexity constant of the self potential.
    fn epsilon(&self) -> f64 {
        self.spec.epsilon()
    }

    fn lambda(&self) -> f64 {
        self.spec.lambda()
    }

    /// Interaction range (max sup-norm displacement).
    fn r0(&self) -> i64 {
        self.spec.r0()
    }

    /// Evaluate the self potential (order = 0) or its derivatives (1, 2).
    fn eval_self(&self, x: f64, order: u8) -> PyResult<f64> {
        if order > 2 {
            return Err(value_err("order must be 0, 1 or 2"));
        }
        Ok(eval_potential(self.spec.f().poly(), x, order))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(epsilon={}, lambda={}, r0={}, pairs={})",
            self.spec.epsilon(),
            self.spec.lambda(),
            self.spec.r0(),
            self.spec.pairs().len()
        )
    }
}

/// Finite box with a boundary condition ("torus", "free" or "fixed" with
/// shell values).
#[pyclass]
struct Lattice {
    spec: LatticeSpec,
}

#[pymethods]
impl Lattice {
    #[new]
    #[pyo3(signature = (dim, extents, bc, r0, shell=None))]
    fn new(
        dim: usize,
        extents: Vec<i64>,
        bc: &str,
        r0: i64,
        shell: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let boundary = match (bc, shell) {
            ("torus", None) => Boundary::Torus,
            ("free", None) => Boundary::Free,
            ("fixed", Some(shell)) => Boundary::Fixed { shell },
            ("fixed", None) => return Err(value_err("fixed boundary needs shell values")),
            (other, _) => return Err(value_err(format!("unknown boundary {other:?}"))),
        };
        let spec = build_lattice(dim, extents, boundary, r0).map_err(value_err)?;
        Ok(Lattice { spec })
    }

    fn n_sites(&self) -> usize {
        self.spec.n_sites()
    }

    fn __repr__(&self) -> String {
        format!("Lattice(dim={}, extents={:?})", self.spec.dim(), self.spec.extents())
    }
}

/// Resumable heat-bath chain. Draws are keyed by (seed, site, sweep), so the
/// trajectory is independent of scheduling and identical across runs.
#[pyclass]
struct Chain {
    model: ModelSpec,
    lattice: LatticeSpec,
    order: SweepOrder,
    state: ChainState,
}

#[pymethods]
impl Chain {
    #[new]
    #[pyo3(signature = (model, lattice, seed, order="sequential"))]
    fn new(model: &Model, lattice: &Lattice, seed: u64, order: &str) -> PyResult<Self> {
        let order = parse_order(order)?;
        let runner =
            ChainRunner::new(&model.spec, &lattice.spec, seed, order).map_err(value_err)?;
        let state = runner.state.clone();
        Ok(Chain { model: model.spec.clone(), lattice: lattice.spec.clone(), order, state })
    }

    /// Advance to `sweeps` total sweeps; returns `(sweep, field)` records for
    /// every `thin`-th sweep after `burnin`.
    fn run(&mut self, sweeps: u64, burnin: u64, thin: u64) -> PyResult<Vec<(u64, Vec<f64>)>> {
        if thin == 0 {
            return Err(value_err("thin must be >= 1"));
        }
        if sweeps <= self.state.sweep {
            return Err(value_err(format!(
                "chain is already at sweep {}, target {sweeps} does not extend it",
                self.state.sweep
            )));
        }
        let mut runner = ChainRunner::new(&self.model, &self.lattice, self.state.seed, self.order)
            .map_err(runtime_err)?;
        runner.restore(self.state.clone()).map_err(runtime_err)?;
        let mut records = Vec::new();
        while runner.state.sweep < sweeps {
            runner.sweep().map_err(runtime_err)?;
            let s = runner.state.sweep;
            if s > burnin && (s - burnin) % thin == 0 {
                records.push((s, runner.state.field.0.clone()));
            }
        }
        self.state = runner.state.clone();
        Ok(records)
    }

    /// Current spin configuration.
    fn field(&self) -> Vec<f64> {
        self.state.field.0.clone()
    }

    fn sweep_count(&self) -> u64 {
        self.state.sweep
    }

    fn __repr__(&self) -> String {
        format!("Chain(sweep={}, sites={})", self.state.sweep, self.state.field.len())
    }
}

/// Run the 1-D inequality battery (variance bounds, entropy bound, one-step
/// contraction) for a model JSON; returns the list of bound reports as JSON.
#[pyfunction]
fn verify_battery(model_json: &str) -> PyResult<String> {
    let config = parse_model_config(model_json)?;
    let model = config.build().map_err(value_err)?;
    let f = model.f();
    let mut bounds = Vec::new();
    for phi in [
        Observable::Coordinate,
        Observable::Tanh,
        Observable::XPlusSin { amplitude: 0.3 },
        Observable::OnePlusTanh,
    ] {
        for mut b in verify_brascamp_lieb_1d(f, &phi).map_err(runtime_err)? {
            b.name = format!("{}[{}]", b.name, phi.name());
            bounds.push(b);
        }
    }
    for phi in [Observable::OnePlusTanh, Observable::ExpHalf] {
        let mut b = verify_lsi_1d(f, &phi).map_err(runtime_err)?;
        b.name = format!("{}[{}]", b.name, phi.name());
        bounds.push(b);
    }
    let mut contraction =
        verify_contraction(&model, &Observable::Tanh, &Observable::Tanh).map_err(runtime_err)?;
    contraction.name = "one_step_contraction[tanh*tanh]".into();
    bounds.push(contraction);
    serde_json::to_string(&bounds).map_err(runtime_err)
}

/// Exact covariance matrix of a quadratic model on the given lattice.
#[pyfunction]
#[pyo3(signature = (model_json, dim, extents, bc))]
fn gaussian_covariance(
    model_json: &str,
    dim: usize,
    extents: Vec<i64>,
    bc: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let config = parse_model_config(model_json)?;
    let model = config.build().map_err(value_err)?;
    let boundary = match bc {
        "torus" => Boundary::Torus,
        "free" => Boundary::Free,
        other => return Err(value_err(format!("unknown boundary {other:?}"))),
    };
    let lattice = build_lattice(dim, extents, boundary, model.r0()).map_err(value_err)?;
    let oracle = gaussian_covariance_oracle(&model, &lattice).map_err(value_err)?;
    let n = lattice.n_sites();
    Ok((0..n).map(|i| (0..n).map(|j| oracle.cov_entry(i, j)).collect()).collect())
}

#[pymodule]
fn polygibbs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Model>()?;
    m.add_class::<Lattice>()?;
    m.add_class::<Chain>()?;
    m.add_function(wrap_pyfunction!(verify_battery, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_covariance, m)?)?;
    Ok(())
}
