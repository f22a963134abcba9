//! Python bindings: datasets, training, prediction, model files and the sweeps.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rulecraft::io::{self as rio, GenParams, ModelMetadata};
use rulecraft::oracle::{self, BoundStudyConfig};
use rulecraft::{
    BoostConfig, Error, LambdaChoice, LossKind, ObjectiveKind, OffsetMode, Task, WeightUpdate,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::RankDeficient | Error::ZeroDenominator | Error::EmptyQuery | Error::NonInjectiveOrder(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_task(s: &str) -> PyResult<Task> {
    match s {
        "reg" => Ok(Task::Regression),
        "binary" => Ok(Task::BinaryClassification),
        "count" => Ok(Task::CountRegression),
        _ => Err(PyValueError::new_err(format!("unknown task `{s}` (reg, binary, count)"))),
    }
}

fn parse_loss(s: &str) -> PyResult<LossKind> {
    match s {
        "squared" => Ok(LossKind::Squared),
        "logistic" => Ok(LossKind::Logistic),
        "poisson" => Ok(LossKind::Poisson),
        _ => Err(PyValueError::new_err(format!("unknown loss `{s}`"))),
    }
}

fn parse_update(s: &str) -> PyResult<WeightUpdate> {
    match s {
        "stagewise" => Ok(WeightUpdate::Stagewise),
        "xgb" => Ok(WeightUpdate::XgbClosedForm),
        "corrective" => Ok(WeightUpdate::Corrective),
        _ => Err(PyValueError::new_err(format!("unknown update `{s}`"))),
    }
}

/// `greedy`, `beam:W` or `bnb` as a beam width (`None` is unbounded).
fn parse_search(s: &str) -> PyResult<Option<usize>> {
    match s {
        "greedy" => Ok(Some(1)),
        "bnb" => Ok(None),
        _ => match s.strip_prefix("beam:").map(str::parse::<usize>) {
            Some(Ok(w)) if w > 0 => Ok(Some(w)),
            _ => Err(PyValueError::new_err(format!("unknown search `{s}`"))),
        },
    }
}

/// A table of numeric features with a target column.
#[pyclass(name = "Dataset", module = "rulecraft", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: rulecraft::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Rows of `x` are data points; `task` is one of reg, binary, count.
    #[new]
    #[pyo3(signature = (x, y, task = "reg", feature_names = None))]
    fn new(x: Vec<Vec<f64>>, y: Vec<f64>, task: &str, feature_names: Option<Vec<String>>) -> PyResult<Self> {
        let d = x.first().map_or(0, Vec::len);
        if let Some((i, row)) = x.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(PyValueError::new_err(format!("row {i} has {} values, expected {d}", row.len())));
        }
        let columns: Vec<Vec<f64>> = (0..d).map(|j| x.iter().map(|r| r[j]).collect()).collect();
        let names = feature_names.unwrap_or_else(|| (1..=d).map(|j| format!("x{j}")).collect());
        let inner = rulecraft::Dataset::new(columns, y, parse_task(task)?, names).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, target = "y", task = "reg"))]
    fn from_csv(path: &str, target: &str, task: &str) -> PyResult<Self> {
        let inner = rio::load_csv(path, target, parse_task(task)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// One of friedman1, friedman2, friedman3, prop2, fig2.
    #[staticmethod]
    #[pyo3(signature = (name, n = None, seed = 0, alpha = 1.0, epsilon = 0.1))]
    fn synthetic(name: &str, n: Option<usize>, seed: u64, alpha: f64, epsilon: f64) -> PyResult<Self> {
        let params = GenParams { n, alpha, epsilon };
        let inner = rio::gen_synthetic(name, &params, seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (path, target = "y"))]
    fn to_csv(&self, path: &str, target: &str) -> PyResult<()> {
        rio::save_csv(&self.inner, path, target).map_err(to_py)
    }

    /// Seeded random split into (train, test).
    #[pyo3(signature = (fraction, seed = 0))]
    fn split(&self, fraction: f64, seed: u64) -> PyResult<(Self, Self)> {
        let (a, b) = rio::split(&self.inner, fraction, seed).map_err(to_py)?;
        Ok((Self { inner: a }, Self { inner: b }))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    #[getter]
    fn target(&self) -> Vec<f64> {
        self.inner.target().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, d={}, task={})", self.inner.n(), self.inner.d(), self.inner.task())
    }
}

/// An offset plus weighted conjunctive rules.
#[pyclass(name = "RuleEnsemble", module = "rulecraft", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRuleEnsemble {
    inner: rulecraft::RuleEnsemble,
    meta: ModelMetadata,
}

#[pymethods]
impl PyRuleEnsemble {
    /// Raw outputs `f(x)`.
    fn predict(&self, data: &PyDataset) -> PyResult<Vec<f64>> {
        self.inner.predict(&data.inner).map_err(to_py)
    }

    /// Predictions on the response scale (probabilities, rates).
    fn predict_mean(&self, data: &PyDataset) -> PyResult<Vec<f64>> {
        self.inner.predict_mean(&data.inner).map_err(to_py)
    }

    /// Mean loss on `data`.
    fn risk(&self, data: &PyDataset) -> PyResult<f64> {
        self.inner.risk(&data.inner).map_err(to_py)
    }

    #[getter]
    fn offset(&self) -> f64 {
        self.inner.offset
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights()
    }

    #[getter]
    fn loss(&self) -> &'static str {
        self.inner.loss.name()
    }

    #[getter]
    fn complexity(&self) -> usize {
        self.inner.complexity()
    }

    /// Human-readable rules, one string per rule.
    #[getter]
    fn rules(&self) -> Vec<String> {
        (0..self.inner.len()).map(|i| self.inner.describe_rule(i)).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        rio::serialize_model(&self.inner, &self.meta).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let (inner, meta) = rio::parse_model(text).map_err(to_py)?;
        Ok(Self { inner, meta })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        rio::save_model(path, &self.inner, &self.meta).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let (inner, meta) = rio::load_model(path).map_err(to_py)?;
        Ok(Self { inner, meta })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "RuleEnsemble(rules={}, complexity={}, loss={})",
            self.inner.len(),
            self.inner.complexity(),
            self.inner.loss.name()
        )
    }
}

/// Result of [`train`]: the final model plus the per-round log.
#[pyclass(name = "TrainResult", module = "rulecraft", frozen, skip_from_py_object)]
struct PyTrainResult {
    #[pyo3(get)]
    model: PyRuleEnsemble,
    /// `(k, complexity, train_risk, rule)` per added rule.
    #[pyo3(get)]
    rounds: Vec<(usize, usize, f64, String)>,
    #[pyo3(get)]
    stop_reason: String,
    #[pyo3(get)]
    lambda_: f64,
    ensembles: Vec<rulecraft::RuleEnsemble>,
}

#[pymethods]
impl PyTrainResult {
    /// The ensemble after `k` rules.
    fn ensemble(&self, k: usize) -> PyResult<PyRuleEnsemble> {
        let inner = self
            .ensembles
            .get(k)
            .cloned()
            .ok_or_else(|| PyValueError::new_err(format!("only {} rules were learned", self.ensembles.len() - 1)))?;
        Ok(PyRuleEnsemble {
            inner,
            meta: self.model.meta.clone(),
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn build_config(
    objective: &str,
    update: &str,
    loss: Option<&str>,
    lambda_: Option<f64>,
    cv: bool,
    search: &str,
    epsilon: f64,
    rules: Option<usize>,
    max_complexity: usize,
    offset: &str,
    seed: u64,
) -> PyResult<BoostConfig> {
    let mut cfg = BoostConfig::new(objective.parse::<ObjectiveKind>().map_err(to_py)?, parse_update(update)?);
    cfg.loss = loss.map(parse_loss).transpose()?;
    cfg.lambda = match (cv, lambda_) {
        (true, Some(_)) => return Err(PyValueError::new_err("pass either lambda_ or cv, not both")),
        (true, None) => LambdaChoice::Cv,
        (false, l) => LambdaChoice::Fixed(l.unwrap_or(0.0)),
    };
    cfg.width = parse_search(search)?;
    cfg.epsilon = epsilon;
    cfg.max_rules = rules;
    cfg.max_complexity = max_complexity;
    cfg.offset = match offset {
        "fit" => OffsetMode::Fit,
        "zero" => OffsetMode::Zero,
        _ => return Err(PyValueError::new_err(format!("unknown offset mode `{offset}` (fit, zero)"))),
    };
    cfg.seed = seed;
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Fits a rule ensemble by gradient boosting.
#[pyfunction]
#[pyo3(signature = (
    data, objective = "ogb", update = "corrective", loss = None, lambda_ = None, cv = false,
    search = "greedy", epsilon = rulecraft::DEFAULT_EPSILON, rules = None, max_complexity = 50,
    offset = "fit", seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    data: &PyDataset,
    objective: &str,
    update: &str,
    loss: Option<&str>,
    lambda_: Option<f64>,
    cv: bool,
    search: &str,
    epsilon: f64,
    rules: Option<usize>,
    max_complexity: usize,
    offset: &str,
    seed: u64,
) -> PyResult<PyTrainResult> {
    let cfg = build_config(
        objective, update, loss, lambda_, cv, search, epsilon, rules, max_complexity, offset, seed,
    )?;
    let ds = &data.inner;
    let run = py.detach(|| rulecraft::boost(ds, &cfg)).map_err(to_py)?;
    let meta = ModelMetadata {
        objective: Some(objective.into()),
        update: Some(update.into()),
        lambda: Some(run.lambda),
        epsilon: Some(epsilon),
        seed: Some(seed),
        search: Some(search.into()),
    };
    let rounds = run
        .rounds
        .iter()
        .enumerate()
        .map(|(i, r)| (r.k, r.complexity, r.train_risk, run.ensembles[i + 1].describe_rule(i)))
        .collect();
    Ok(PyTrainResult {
        model: PyRuleEnsemble {
            inner: run.final_ensemble().clone(),
            meta,
        },
        rounds,
        stop_reason: run.stop.describe().into(),
        lambda_: run.lambda,
        ensembles: run.ensembles,
    })
}

/// `(k, complexity, lambda, train_risk_norm, test_risk_norm)`
type CurvePoint = (usize, usize, f64, f64, f64);

/// Normalized train/test risks per ensemble size, one [`CurvePoint`] each.
#[pyfunction]
#[pyo3(signature = (
    train, test, objective = "ogb", update = "corrective", loss = None, lambda_ = None, cv = false,
    search = "greedy", epsilon = rulecraft::DEFAULT_EPSILON, max_complexity = 50, seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn tradeoff(
    py: Python<'_>,
    train: &PyDataset,
    test: &PyDataset,
    objective: &str,
    update: &str,
    loss: Option<&str>,
    lambda_: Option<f64>,
    cv: bool,
    search: &str,
    epsilon: f64,
    max_complexity: usize,
    seed: u64,
) -> PyResult<Vec<CurvePoint>> {
    let cfg = build_config(
        objective, update, loss, lambda_, cv, search, epsilon, None, max_complexity, "fit", seed,
    )?;
    let (tr, te) = (&train.inner, &test.inner);
    let points = py.detach(|| rulecraft::sweep_tradeoff(tr, te, &cfg)).map_err(to_py)?;
    Ok(points
        .into_iter()
        .map(|p| (p.k, p.complexity, p.lambda, p.train_risk_norm, p.test_risk_norm))
        .collect())
}

/// Prefix-greedy vs full-greedy bound quality; returns the CSV table.
#[pyfunction]
#[pyo3(signature = (instances = 2000, points = 15, existing_rules = 5, epsilons = vec![0.001, 0.1, 1.0], seed = 0))]
fn bound_study(
    py: Python<'_>,
    instances: usize,
    points: usize,
    existing_rules: usize,
    epsilons: Vec<f64>,
    seed: u64,
) -> PyResult<String> {
    let cfg = BoundStudyConfig {
        instances,
        points,
        existing_rules,
        epsilons,
        seed,
    };
    let table = py.detach(|| oracle::run_bound_study(&cfg)).map_err(to_py)?;
    Ok(table.to_csv())
}

#[pymodule(name = "rulecraft")]
pub fn rulecraft_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyRuleEnsemble>()?;
    m.add_class::<PyTrainResult>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(tradeoff, m)?)?;
    m.add_function(wrap_pyfunction!(bound_study, m)?)?;
    m.add("FORMAT_VERSION", rio::FORMAT_VERSION)?;
    Ok(())
}
