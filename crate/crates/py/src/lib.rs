use std::path::PathBuf;

use molcrl::curriculum::{self, Method, PhasePlan};
use molcrl::descriptors::{self, FgCatalog};
use molcrl::evaluation;
use molcrl::neural::{self, sequence_nll};
use molcrl::rl;
use molcrl::smiles;
use molcrl::training;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn graph(smiles_text: &str) -> PyResult<smiles::MolGraph> {
    smiles::parse(smiles_text).map_err(value_err)
}

/// True iff the string is a valid molecule.
#[pyfunction]
fn is_valid(smiles_text: &str) -> bool {
    smiles::is_valid(smiles_text).valid
}

/// Parse failure message, or None for a valid molecule.
#[pyfunction]
fn diagnose(smiles_text: &str) -> Option<String> {
    smiles::is_valid(smiles_text).diagnostic.map(|e| e.to_string())
}

/// Average molecular weight including implicit hydrogens.
#[pyfunction]
fn molecular_weight(smiles_text: &str) -> PyResult<f64> {
    descriptors::molecular_weight(&graph(smiles_text)?).map_err(value_err)
}

/// Presence flags for the 20 built-in functional groups, in id order.
#[pyfunction]
fn group_presence(smiles_text: &str) -> PyResult<Vec<bool>> {
    Ok(descriptors::group_presence(&graph(smiles_text)?, &FgCatalog::builtin()))
}

/// `(id, name)` for every built-in functional group.
#[pyfunction]
fn functional_groups() -> Vec<(u8, String)> {
    FgCatalog::builtin().patterns().iter().map(|p| (p.id, p.name.clone())).collect()
}

/// Tanimoto similarity of the path fingerprints of two molecules.
#[pyfunction]
fn tanimoto(a: &str, b: &str) -> PyResult<f64> {
    let (fa, fb) = (descriptors::fingerprint(&graph(a)?), descriptors::fingerprint(&graph(b)?));
    descriptors::tanimoto(&fa, &fb).map_err(value_err)
}

/// Target molecular weight plus desired presence of selected groups.
#[pyclass(name = "ConstraintSpec", module = "pymolcrl", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConstraintSpec {
    inner: rl::ConstraintSpec,
}

#[pymethods]
impl PyConstraintSpec {
    #[new]
    fn new(mw_target: f64, groups: Vec<(u8, bool)>) -> PyResult<Self> {
        let inner = rl::ConstraintSpec::new(mw_target, groups, &FgCatalog::builtin()).map_err(value_err)?;
        Ok(PyConstraintSpec { inner })
    }

    /// Spec whose targets are the properties of `smiles_text`.
    #[staticmethod]
    fn from_molecule(smiles_text: &str, group_ids: Vec<u8>) -> PyResult<Self> {
        let inner = rl::ConstraintSpec::from_molecule(&graph(smiles_text)?, &group_ids, &FgCatalog::builtin()).map_err(value_err)?;
        Ok(PyConstraintSpec { inner })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let inner = rl::ConstraintSpec::parse(text, &FgCatalog::builtin()).map_err(value_err)?;
        Ok(PyConstraintSpec { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = rl::ConstraintSpec::load(&path, &FgCatalog::builtin()).map_err(io_err)?;
        Ok(PyConstraintSpec { inner })
    }

    fn to_file_string(&self) -> String {
        self.inner.to_file_string(&FgCatalog::builtin())
    }

    #[getter]
    fn mw_target(&self) -> f64 {
        self.inner.mw_target
    }

    #[getter]
    fn groups(&self) -> Vec<(u8, bool)> {
        self.inner.fg.clone()
    }

    fn n_constraints(&self) -> usize {
        self.inner.n_constraints()
    }

    /// `(mw_score, [(id, score)...])`; invalid molecules score -1 everywhere.
    fn components(&self, smiles_text: &str) -> (f64, Vec<(u8, f64)>) {
        let profile = rl::MolProfile::from_smiles(smiles_text, &FgCatalog::builtin());
        let c = rl::ComponentScores::of(profile.as_ref(), &self.inner);
        (c.mw, c.fg)
    }

    /// Unweighted sum of all component scores.
    fn eval_total(&self, smiles_text: &str) -> f64 {
        let profile = rl::MolProfile::from_smiles(smiles_text, &FgCatalog::builtin());
        rl::eval_total(profile.as_ref(), &self.inner)
    }

    /// Mean of all component scores.
    fn baseline_constraint(&self, smiles_text: &str) -> f64 {
        let profile = rl::MolProfile::from_smiles(smiles_text, &FgCatalog::builtin());
        rl::baseline_constraint(profile.as_ref(), &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("ConstraintSpec(mw_target={}, groups={:?})", self.inner.mw_target, self.inner.fg)
    }
}

/// Recurrent SMILES generator with its vocabulary.
#[pyclass(name = "Model", module = "pymolcrl", skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: neural::Checkpoint,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel { inner: neural::Checkpoint::load(&path).map_err(io_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(io_err)
    }

    #[getter]
    fn vocab(&self) -> Vec<String> {
        self.inner.vocab.tokens().to_vec()
    }

    /// `(vocab_size, embed_dim, hidden_dim, n_layers)`.
    #[getter]
    fn dims(&self) -> (usize, usize, usize, usize) {
        let d = self.inner.params.dims;
        (d.vocab_size, d.embed_dim, d.hidden_dim, d.n_layers)
    }

    /// Decoded samples; None where generation did not terminate.
    #[pyo3(signature = (n, seed = 0))]
    fn sample(&self, py: Python<'_>, n: usize, seed: u64) -> Vec<Option<String>> {
        py.detach(|| {
            let seeds = molcrl::seed::derive_many(seed, "sample", 0, n);
            let samples = neural::sample_batch(&self.inner.params, &self.inner.vocab, &seeds, smiles::MAX_LEN, 1.0);
            training::decode_samples(&self.inner.vocab, &samples)
        })
    }

    /// `(valid_fraction, unique_fraction)` over `n` seeded samples.
    #[pyo3(signature = (n = 1000, seed = 0))]
    fn validity_rate(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<(f64, f64)> {
        let v = py.detach(|| training::validity_rate(&self.inner, n, seed)).map_err(value_err)?;
        Ok((v.valid_fraction, v.unique_fraction))
    }

    /// Negative log-likelihood of a SMILES string under the model.
    fn nll(&self, smiles_text: &str) -> PyResult<f64> {
        let seq = self.inner.vocab.tokenize(smiles_text).map_err(value_err)?;
        Ok(sequence_nll(&self.inner.params, &seq))
    }

    /// Per-group difficulty `(id, D)` in ranking order, hardest first.
    #[pyo3(signature = (spec, n = 1000, seed = 0))]
    fn difficulty(&self, py: Python<'_>, spec: &PyConstraintSpec, n: usize, seed: u64) -> Vec<(u8, f64)> {
        let cat = FgCatalog::builtin();
        let report =
            py.detach(|| curriculum::difficulty_scores(&self.inner.params, &self.inner.vocab, &cat, &spec.inner, n, seed));
        report.ranking().into_iter().map(|id| (id, report.get(id).unwrap_or(0.0))).collect()
    }

    /// Top-k distinct valid samples as `(smiles, eval_total, similarity)`.
    #[pyo3(signature = (spec, n = 256, k = 5, seed = 0, target = None))]
    fn evaluate(
        &self,
        py: Python<'_>,
        spec: &PyConstraintSpec,
        n: usize,
        k: usize,
        seed: u64,
        target: Option<&str>,
    ) -> PyResult<Vec<(String, f64, Option<f64>)>> {
        let cat = FgCatalog::builtin();
        let mut report =
            py.detach(|| evaluation::sample_and_rank(&self.inner.params, &self.inner.vocab, &cat, &spec.inner, n, k, seed));
        if let Some(t) = target {
            report = evaluation::similarity_report(&report, t).map_err(value_err)?;
        }
        Ok(report.top.into_iter().map(|c| (c.smiles, c.total, c.similarity)).collect())
    }

    /// Fine-tune a copy of this model toward `spec` with a curriculum method.
    #[pyo3(signature = (spec, method = "cf", n = 4, budget = 100, seed = 0, kl_weight = None, batch_size = None))]
    #[allow(clippy::too_many_arguments)]
    fn finetune(
        &self,
        py: Python<'_>,
        spec: &PyConstraintSpec,
        method: &str,
        n: usize,
        budget: usize,
        seed: u64,
        kl_weight: Option<f64>,
        batch_size: Option<usize>,
    ) -> PyResult<PyModel> {
        let method: Method = method.parse().map_err(value_err)?;
        let mut plan = PhasePlan::for_method(method, n);
        plan.budget = budget;
        plan.seed = seed;
        if let Some(w) = kl_weight {
            plan.rl.kl_weight = w;
        }
        if let Some(b) = batch_size {
            plan.rl.batch_size = b;
        }
        let cat = FgCatalog::builtin();
        let (params, vocab) = (&self.inner.params, &self.inner.vocab);
        let agent = py.detach(|| -> Result<_, curriculum::CurriculumError> {
            let report = curriculum::difficulty_scores(params, vocab, &cat, &spec.inner, 1000, seed);
            let plan = plan.with_bins(&report)?;
            Ok(curriculum::run_curriculum(&plan, params, vocab, &cat, &spec.inner, |_| {})?.agent)
        });
        let agent = agent.map_err(value_err)?;
        Ok(PyModel { inner: neural::Checkpoint::new(agent, vocab.clone()).map_err(value_err)? })
    }

    fn __repr__(&self) -> String {
        let d = self.inner.params.dims;
        format!("Model(vocab={}, embed={}, hidden={}, layers={})", d.vocab_size, d.embed_dim, d.hidden_dim, d.n_layers)
    }
}

/// Train a prior on a SMILES file, one molecule per line.
#[pyfunction]
#[pyo3(signature = (path, epochs = 20, hidden = 128, embed = 64, layers = 1, batch_size = 128, learning_rate = 1e-3, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn train_prior(
    py: Python<'_>,
    path: PathBuf,
    epochs: usize,
    hidden: usize,
    embed: usize,
    layers: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
) -> PyResult<PyModel> {
    let (corpus, _) = training::ingest(&path, None).map_err(io_err)?;
    let mut config = training::PriorConfig {
        dims_embed: embed,
        dims_hidden: hidden,
        dims_layers: layers,
        batch_size,
        epochs,
        validity_samples: 0,
        seed,
        ..Default::default()
    };
    config.optimizer.learning_rate = learning_rate;
    let out = py.detach(|| training::train_prior(&corpus, &config, |_| {})).map_err(value_err)?;
    Ok(PyModel { inner: out.checkpoint })
}

#[pymodule]
fn pymolcrl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(is_valid, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(molecular_weight, m)?)?;
    m.add_function(wrap_pyfunction!(group_presence, m)?)?;
    m.add_function(wrap_pyfunction!(functional_groups, m)?)?;
    m.add_function(wrap_pyfunction!(tanimoto, m)?)?;
    m.add_function(wrap_pyfunction!(train_prior, m)?)?;
    m.add_class::<PyConstraintSpec>()?;
    m.add_class::<PyModel>()?;
    Ok(())
}
