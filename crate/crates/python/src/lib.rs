//! Python bindings: `import mrplab`.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mrp_lab::catalog::{self, TwoStateReward};
use mrp_lab::model_based::{iml_estimate, lstd_value};
use mrp_lab::mvu::{self, EnumerationLimits, DEFAULT_MAX_MULTISETS};
use mrp_lab::sampled::{self, TdConfig, TraceKind, UpdateMode};
use mrp_lab::{Estimate, MrpError, MrpSpec, PathSample, PathSampler, SuffStat};

create_exception!(mrplab, MrpLabError, PyValueError);

fn err(e: MrpError) -> PyErr {
    MrpLabError::new_err(e.to_string())
}

type PyPath = (Vec<usize>, Vec<f64>);

fn to_paths(spec: &MrpSpec, paths: Vec<PyPath>) -> PyResult<Vec<PathSample>> {
    paths
        .into_iter()
        .map(|(states, rewards)| {
            let p = PathSample::new(states, rewards);
            p.check(spec).map_err(err)?;
            Ok(p)
        })
        .collect()
}

fn to_list(est: Estimate) -> Vec<Option<f64>> {
    est.values.into_iter().zip(est.defined).map(|(v, d)| d.then_some(v)).collect()
}

/// A validated Markov reward process.
#[pyclass(module = "mrplab", frozen)]
struct Mrp {
    spec: MrpSpec,
}

#[pymethods]
impl Mrp {
    /// Two-state cycle: state 0 loops with probability `p`, else exits to terminal 1.
    #[staticmethod]
    #[pyo3(signature = (p, gamma, reward = "cycle"))]
    fn two_state(p: f64, gamma: f64, reward: &str) -> PyResult<Self> {
        let reward = match reward {
            "cycle" => TwoStateReward::Cycle,
            "exit" => TwoStateReward::Exit,
            other => return Err(PyValueError::new_err(format!("reward must be 'cycle' or 'exit', got {other:?}"))),
        };
        let spec = catalog::two_state(p, gamma, reward);
        spec.check().map_err(err)?;
        Ok(Self { spec })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec = MrpSpec::from_json(text).map_err(err)?;
        spec.check().map_err(err)?;
        Ok(Self { spec })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let spec = MrpSpec::load(path).map_err(err)?;
        spec.check().map_err(err)?;
        Ok(Self { spec })
    }

    fn to_json(&self) -> String {
        self.spec.to_json()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.spec.num_states
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.spec.gamma
    }

    fn is_acyclic(&self) -> bool {
        self.spec.is_acyclic()
    }

    fn exact_value(&self) -> PyResult<Vec<f64>> {
        self.spec.exact_value().map_err(err)
    }

    /// `n` paths as `(states, rewards)` tuples.
    fn sample_paths(&self, n: usize, seed: u64) -> PyResult<Vec<PyPath>> {
        let paths = PathSampler::new(&self.spec)
            .sample_many(n, &mut ChaCha8Rng::seed_from_u64(seed))
            .map_err(err)?;
        Ok(paths.into_iter().map(|p| (p.states, p.rewards)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Mrp(num_states={}, gamma={})", self.spec.num_states, self.spec.gamma)
    }
}

/// Messages for every violated model constraint.
#[pyfunction]
fn validate(text: &str) -> PyResult<Vec<String>> {
    match MrpSpec::from_json(text) {
        Ok(spec) => Ok(spec.validate().iter().map(|v| v.to_string()).collect()),
        Err(MrpError::Validation(v)) => Ok(v.iter().map(|v| v.to_string()).collect()),
        Err(e) => Err(err(e)),
    }
}

#[pyfunction]
fn mc_first_visit(mrp: &Mrp, paths: Vec<PyPath>) -> PyResult<Vec<Option<f64>>> {
    let paths = to_paths(&mrp.spec, paths)?;
    Ok(to_list(sampled::mc_first_visit(mrp.spec.num_states, &paths, mrp.spec.gamma)))
}

#[pyfunction]
fn mc_every_visit(mrp: &Mrp, paths: Vec<PyPath>) -> PyResult<Vec<Option<f64>>> {
    let paths = to_paths(&mrp.spec, paths)?;
    Ok(to_list(sampled::mc_every_visit(mrp.spec.num_states, &paths, mrp.spec.gamma)))
}

#[pyfunction]
#[pyo3(signature = (mrp, paths, lam = 0.0, modified = false, replacing = false, online = false))]
fn td_estimate(
    mrp: &Mrp,
    paths: Vec<PyPath>,
    lam: f64,
    modified: bool,
    replacing: bool,
    online: bool,
) -> PyResult<Vec<Option<f64>>> {
    let paths = to_paths(&mrp.spec, paths)?;
    let mut cfg = TdConfig::td_lambda(lam)
        .with_trace(if replacing { TraceKind::Replacing } else { TraceKind::Accumulating })
        .with_mode(if online { UpdateMode::Online } else { UpdateMode::Offline });
    if modified {
        cfg = cfg.modified();
    }
    let est = sampled::td_estimate(mrp.spec.num_states, &paths, &cfg, mrp.spec.gamma).map_err(err)?;
    Ok(to_list(est))
}

fn stat_of(mrp: &Mrp, paths: Vec<PyPath>) -> PyResult<SuffStat> {
    let paths = to_paths(&mrp.spec, paths)?;
    SuffStat::from_paths(&mrp.spec, &paths).map_err(err)
}

#[pyfunction]
fn ml_value(mrp: &Mrp, paths: Vec<PyPath>) -> PyResult<Vec<Option<f64>>> {
    let stat = stat_of(mrp, paths)?;
    Ok(to_list(mrp_lab::ml_estimate(&stat, mrp.spec.gamma).map_err(err)?))
}

#[pyfunction]
fn lstd(mrp: &Mrp, paths: Vec<PyPath>) -> PyResult<Vec<Option<f64>>> {
    let stat = stat_of(mrp, paths)?;
    let values = lstd_value(&stat.ml_params().map_err(err)?, mrp.spec.gamma);
    Ok(to_list(Estimate { values, defined: stat.visit_counts.iter().map(|&k| k > 0).collect() }))
}

#[pyfunction]
fn iml(mrp: &Mrp, paths: Vec<PyPath>) -> PyResult<Vec<Option<f64>>> {
    let paths = to_paths(&mrp.spec, paths)?;
    Ok(to_list(iml_estimate(mrp.spec.num_states, &paths, mrp.spec.gamma)))
}

#[pyfunction]
#[pyo3(signature = (mrp, paths, max_multisets = DEFAULT_MAX_MULTISETS, max_seconds = None))]
fn mvu_estimate(
    py: Python<'_>,
    mrp: &Mrp,
    paths: Vec<PyPath>,
    max_multisets: u64,
    max_seconds: Option<f64>,
) -> PyResult<Vec<Option<f64>>> {
    let stat = stat_of(mrp, paths)?;
    let limits = EnumerationLimits { max_multisets, max_seconds, parallel: true };
    let spec = &mrp.spec;
    let est = py.detach(|| mvu::mvu_estimate(&stat, spec, spec.gamma, &limits)).map_err(err)?;
    Ok(to_list(est))
}

#[pyfunction]
fn mvu_two_state_closed(s: u64, n: u64, gamma: f64) -> PyResult<f64> {
    mvu::mvu_two_state_closed(s, n, gamma).map_err(err)
}

#[pyfunction]
fn mvu_two_state_mse(p: f64, gamma: f64) -> f64 {
    mvu::mvu_two_state_mse(p, gamma)
}

#[pyfunction]
fn ml_two_state_mse(p: f64, m: u32) -> PyResult<f64> {
    mvu::ml_two_state_mse(p, m).map_err(err)
}

#[pyfunction]
fn dilogarithm(p: f64) -> f64 {
    mvu::dilogarithm(p)
}

/// `(mse, bias, variance)` of `estimates` around `truth`.
#[pyfunction]
fn mse_decompose(estimates: Vec<f64>, truth: f64) -> PyResult<(f64, f64, f64)> {
    let d = mrp_lab::mse_decompose(&estimates, truth).map_err(err)?;
    Ok((d.mse, d.bias, d.variance))
}

#[pymodule]
fn mrplab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MrpLabError", m.py().get_type::<MrpLabError>())?;
    m.add_class::<Mrp>()?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(mc_first_visit, m)?)?;
    m.add_function(wrap_pyfunction!(mc_every_visit, m)?)?;
    m.add_function(wrap_pyfunction!(td_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(ml_value, m)?)?;
    m.add_function(wrap_pyfunction!(lstd, m)?)?;
    m.add_function(wrap_pyfunction!(iml, m)?)?;
    m.add_function(wrap_pyfunction!(mvu_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(mvu_two_state_closed, m)?)?;
    m.add_function(wrap_pyfunction!(mvu_two_state_mse, m)?)?;
    m.add_function(wrap_pyfunction!(ml_two_state_mse, m)?)?;
    m.add_function(wrap_pyfunction!(dilogarithm, m)?)?;
    m.add_function(wrap_pyfunction!(mse_decompose, m)?)?;
    Ok(())
}
