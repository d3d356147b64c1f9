//! Python bindings for the fogfed simulator.
//!
//! Exposes the main types — datasets, models, and the federated simulation —
//! plus the aggregation and distance-class helpers. Build with
//! `cargo build -p fogfed-py` and load the resulting `libfogfed_py.so`
//! as the module `fogfed_py` (see `python/smoke_test.py`).

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fogfed::data::{
    self, is_critical as core_is_critical, label_of_distance as core_label_of_distance, load,
    save_csv, save_raw_f32, DataFormat,
};
use fogfed::nn::{
    evaluate, init_params, train_local, Dims, HyperParams, ModelParams, DEFAULT_HIDDEN_DIM,
    DEFAULT_OUTPUT_DIM,
};
use fogfed::protocol::{aggregate as core_aggregate, GlobalModel, ModelUpdate};
use fogfed::sim::{RoundReport, Simulation as CoreSimulation, TopologyConfig};
use fogfed::wire::{decode, encode, WireMessage};
use fogfed::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Parse { .. } | Error::ParseBinary { .. } => {
            PyIOError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn report_to_dict<'py>(py: Python<'py>, report: &RoundReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("round_id", report.round_id)?;
    d.set_item("global_test_loss", report.global_test_loss)?;
    d.set_item("global_test_accuracy", report.global_test_accuracy)?;
    d.set_item("per_fog_local_loss", report.per_fog_local_loss.clone())?;
    d.set_item(
        "per_fog_local_accuracy",
        report.per_fog_local_accuracy.clone(),
    )?;
    Ok(d)
}

/// A validated set of labeled 512-point frames.
#[pyclass(frozen)]
struct Dataset {
    inner: data::Dataset,
}

#[pymethods]
impl Dataset {
    /// Generates `n` synthetic frames (uniform class, Gaussian bump at the
    /// class's range bin, i.i.d. noise of standard deviation `sigma`).
    #[staticmethod]
    #[pyo3(signature = (n, seed=42, sigma=0.05))]
    fn synth(n: usize, seed: u64, sigma: f64) -> PyResult<Self> {
        Ok(Self {
            inner: data::synth_generate(n, seed, sigma).map_err(to_py)?,
        })
    }

    /// Generates a train set of `n` frames and a held-out test set of
    /// `max(1, n/10)` frames from independent streams derived from `seed`.
    #[staticmethod]
    #[pyo3(signature = (n, sigma=0.05, seed=42))]
    fn synth_pair(n: usize, sigma: f64, seed: u64) -> PyResult<(Self, Self)> {
        let (train, test) = data::synth_train_test(n, sigma, seed).map_err(to_py)?;
        Ok((Self { inner: train }, Self { inner: test }))
    }

    /// Loads a dataset; `.csv` parses CSV, anything else parses raw-f32.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load(&path, DataFormat::from_path(&path)).map_err(to_py)?,
        })
    }

    /// Saves the dataset; the format again follows the extension.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        match DataFormat::from_path(&path) {
            DataFormat::Csv => save_csv(&self.inner, &path).map_err(to_py),
            DataFormat::RawF32 => save_raw_f32(&self.inner, &path).map_err(to_py),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    /// Frame count per class label, indexed 0..8.
    fn label_histogram(&self) -> Vec<usize> {
        self.inner.label_histogram().to_vec()
    }

    fn label(&self, index: usize) -> PyResult<u8> {
        self.frame(index).map(|f| f.label)
    }

    fn features(&self, index: usize) -> PyResult<Vec<f32>> {
        self.frame(index).map(|f| f.features.clone())
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(len={}, feature_dim={})",
            self.inner.len(),
            self.inner.feature_dim()
        )
    }
}

impl Dataset {
    fn frame(&self, index: usize) -> PyResult<&data::Frame> {
        self.inner.frames().get(index).ok_or_else(|| {
            PyValueError::new_err(format!(
                "index {index} out of range for {} frames",
                self.inner.len()
            ))
        })
    }
}

/// An MLP classifier's parameters, tagged with the federated round that
/// produced them (0 for a fresh initialization).
#[pyclass(frozen)]
struct Model {
    params: ModelParams,
    round_id: u32,
}

#[pymethods]
impl Model {
    /// Glorot-uniform initialization of an `input_dim → 64 → 8` network.
    #[staticmethod]
    #[pyo3(signature = (seed=42, input_dim=512))]
    fn init(seed: u64, input_dim: usize) -> PyResult<Self> {
        let dims = Dims::new(input_dim, DEFAULT_HIDDEN_DIM, DEFAULT_OUTPUT_DIM);
        Ok(Self {
            params: init_params(seed, dims).map_err(to_py)?,
            round_id: 0,
        })
    }

    /// Loads a model artifact (a GlobalModel wire frame, e.g. `model.bin`).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        match decode(&bytes).map_err(|e| PyValueError::new_err(e.to_string()))? {
            WireMessage::GlobalModel(g) => Ok(Self {
                params: g.params,
                round_id: g.round_id,
            }),
            other => Err(PyValueError::new_err(format!(
                "model file holds a type-{} frame, expected a global model",
                other.msg_type()
            ))),
        }
    }

    /// Saves the model as a GlobalModel wire frame.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        let bytes = encode(&WireMessage::GlobalModel(GlobalModel {
            round_id: self.round_id,
            params: self.params.clone(),
        }));
        data::atomic_write(&path, &bytes).map_err(to_py)
    }

    #[getter]
    fn round_id(&self) -> u32 {
        self.round_id
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        let d = self.params.dims();
        (d.input, d.hidden, d.output)
    }

    /// Mean cross-entropy and accuracy over a dataset: `(loss, accuracy)`.
    fn evaluate(&self, dataset: &Dataset) -> PyResult<(f64, f64)> {
        let m = evaluate(&self.params, dataset.inner.frames()).map_err(to_py)?;
        Ok((m.loss, m.accuracy))
    }

    /// Trains a copy of this model on the dataset (one fog's window) and
    /// returns `(trained_model, final_window_loss)`.
    #[pyo3(signature = (window, epochs=5, lr=0.001, batch=32, seed=0))]
    fn train_local(
        &self,
        window: &Dataset,
        epochs: usize,
        lr: f32,
        batch: usize,
        seed: u64,
    ) -> PyResult<(Model, f64)> {
        let hyper = HyperParams {
            learning_rate: lr,
            local_epochs: epochs,
            batch_size: batch,
            ..HyperParams::default()
        };
        let report = train_local(self.params.clone(), window.inner.frames(), &hyper, seed)
            .map_err(to_py)?;
        Ok((
            Model {
                params: report.params,
                round_id: self.round_id,
            },
            report.loss,
        ))
    }

    /// True when every parameter is bit-identical to `other`'s.
    fn bitwise_eq(&self, other: &Model) -> bool {
        self.params.bitwise_eq(&other.params)
    }

    fn __repr__(&self) -> String {
        let d = self.params.dims();
        format!(
            "Model(dims=({}, {}, {}), round_id={})",
            d.input, d.hidden, d.output, self.round_id
        )
    }
}

/// The three-tier federation: fog shards, the cloud's global model, and the
/// synchronous round loop.
#[pyclass]
struct Simulation {
    inner: CoreSimulation,
}

#[pymethods]
impl Simulation {
    #[new]
    #[pyo3(signature = (train, test, fogs=5, rounds=53, window=60, epochs=5,
                        lr=0.001, batch=32, seed=42, log_transport=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        train: &Dataset,
        test: &Dataset,
        fogs: usize,
        rounds: usize,
        window: usize,
        epochs: usize,
        lr: f32,
        batch: usize,
        seed: u64,
        log_transport: bool,
    ) -> PyResult<Self> {
        let config = TopologyConfig {
            num_fogs: fogs,
            rounds,
            window_size: window,
            hyper: HyperParams {
                learning_rate: lr,
                local_epochs: epochs,
                batch_size: batch,
                ..HyperParams::default()
            },
            seed,
            ..TopologyConfig::default()
        };
        let mut inner =
            CoreSimulation::build(config, &train.inner, &test.inner).map_err(to_py)?;
        inner.set_transport_logging(log_transport);
        Ok(Self { inner })
    }

    /// Runs one synchronous round and returns its report as a dict.
    fn run_round<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let report = self.inner.run_round().map_err(to_py)?;
        report_to_dict(py, &report)
    }

    /// Runs until the round budget or the streams are spent; returns the
    /// number of rounds completed in this call.
    fn run(&mut self) -> PyResult<usize> {
        Ok(self.inner.run().map_err(to_py)?.len())
    }

    /// All completed rounds' reports, as a list of dicts.
    fn history<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .history()
            .iter()
            .map(|r| report_to_dict(py, r))
            .collect()
    }

    /// A copy of the cloud's current global model.
    fn global_model(&self) -> Model {
        let g = self.inner.global_model();
        Model {
            params: g.params.clone(),
            round_id: g.round_id,
        }
    }

    /// Recorded frames as `(sender, receiver, msg_type, byte_len)` tuples;
    /// empty unless constructed with `log_transport=True`.
    fn transport_log(&self) -> Vec<(String, String, u8, usize)> {
        self.inner
            .transport_log()
            .iter()
            .map(|r| {
                (
                    r.sender.to_string(),
                    r.receiver.to_string(),
                    r.msg_type,
                    r.byte_len,
                )
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Simulation(fogs={}, rounds_completed={})",
            self.inner.config().num_fogs,
            self.inner.history().len()
        )
    }
}

/// Sample-count-weighted federated average of `(model, sample_count)` pairs.
#[pyfunction]
fn aggregate(py: Python<'_>, updates: Vec<(Py<Model>, u64)>) -> PyResult<Model> {
    let core_updates: Vec<ModelUpdate> = updates
        .iter()
        .enumerate()
        .map(|(i, (model, count))| {
            let m = model.borrow(py);
            ModelUpdate {
                round_id: 0,
                fog_id: i as u32,
                sample_count: *count,
                params: m.params.clone(),
                local_loss: 0.0,
            }
        })
        .collect();
    Ok(Model {
        params: core_aggregate(&core_updates).map_err(to_py)?,
        round_id: 0,
    })
}

/// Distance → class label (meters; boundaries are lower-inclusive).
#[pyfunction]
fn label_of_distance(d: f64) -> PyResult<u8> {
    core_label_of_distance(d).map_err(to_py)
}

/// Whether a class label is critical (distance below 1.5 m).
#[pyfunction]
fn is_critical(label: u8) -> PyResult<bool> {
    core_is_critical(label).map_err(to_py)
}

#[pymodule]
fn fogfed_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(label_of_distance, m)?)?;
    m.add_function(wrap_pyfunction!(is_critical, m)?)?;
    m.add("FEATURE_DIM", data::FEATURE_DIM)?;
    m.add("NUM_CLASSES", data::NUM_CLASSES)?;
    Ok(())
}
