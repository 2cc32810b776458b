//! Corpus ingestion, the prospective-set filter and prior training.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptors::molecular_weight;
use crate::neural::{
    backprop_nll, batch_nll, sample_batch, Checkpoint, Direction, ModelDims, ModelParams, NeuralError, OptimizerState,
    RmsPropConfig, Sample,
};
use crate::seed;
use crate::smiles::{parse, Element, ParseError, TokenSequence, VocabError, Vocabulary, MAX_LEN};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("no usable molecules in corpus")]
    EmptyCorpus,
    #[error("loss diverged at epoch {0}")]
    DivergenceDetected(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Keeps small C/H/O molecules only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProspectiveFilter {
    pub max_mw: f64,
}

impl Default for ProspectiveFilter {
    fn default() -> Self {
        ProspectiveFilter { max_mw: 200.0 }
    }
}

impl ProspectiveFilter {
    pub fn accepts(&self, graph: &crate::smiles::MolGraph) -> bool {
        let allowed = [Element::C, Element::H, Element::O];
        graph.element_set().iter().all(|e| allowed.contains(e))
            && molecular_weight(graph).is_ok_and(|mw| mw < self.max_mw)
    }
}

/// Why a corpus line was dropped.
#[derive(Clone, Debug, PartialEq)]
pub enum Rejection {
    Invalid(ParseError),
    TooLong(usize),
    Filtered,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IngestStats {
    pub lines: usize,
    pub kept: usize,
    pub invalid: usize,
    pub too_long: usize,
    pub filtered: usize,
    /// First few rejections as `(line number, reason)`.
    #[serde(skip)]
    pub examples: Vec<(usize, String)>,
}

impl fmt::Display for IngestStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} lines: kept {}, invalid {}, too long {}, filtered {}",
            self.lines, self.kept, self.invalid, self.too_long, self.filtered
        )
    }
}

/// Validated, tokenized molecules and the vocabulary built from them.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub source: Option<PathBuf>,
    pub smiles: Vec<String>,
    pub sequences: Vec<TokenSequence>,
    pub vocab: Vocabulary,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.smiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smiles.is_empty()
    }

    /// One SMILES per line; re-ingesting the file reproduces this corpus.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for s in &self.smiles {
            out.push_str(s);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainingError> {
        write_file(path, self.to_file_string().as_bytes())
    }

    /// Re-tokenize against another vocabulary (e.g. one loaded from disk).
    pub fn with_vocab(self, vocab: Vocabulary) -> Result<Corpus, TrainingError> {
        let sequences = self.smiles.iter().map(|s| vocab.tokenize(s)).collect::<Result<Vec<_>, _>>()?;
        Ok(Corpus { sequences, vocab, ..self })
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), TrainingError> {
    fs::write(path, bytes).map_err(|source| TrainingError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn read_file(path: &Path) -> Result<String, TrainingError> {
    fs::read_to_string(path).map_err(|source| TrainingError::Io { path: path.to_path_buf(), source })
}

fn token_length(text: &str) -> usize {
    // G + E + characters, with two-letter halogens collapsed
    text.len() + 2 - text.matches("Cl").count() - text.matches("Br").count()
}

/// Validate every line of `text`. Blank lines and lines starting with `#`
/// are skipped; the first whitespace-separated field is the SMILES.
pub fn ingest_str(
    text: &str,
    filter: Option<ProspectiveFilter>,
) -> Result<(Corpus, IngestStats), TrainingError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let l = l.trim();
            (!l.is_empty() && !l.starts_with('#')).then(|| (i + 1, l.split_whitespace().next().unwrap()))
        })
        .collect();
    let verdicts: Vec<Result<(), Rejection>> = lines
        .par_iter()
        .map(|(_, s)| {
            let graph = parse(s).map_err(Rejection::Invalid)?;
            let n = token_length(s);
            if n > MAX_LEN {
                return Err(Rejection::TooLong(n));
            }
            if filter.is_some_and(|f| !f.accepts(&graph)) {
                return Err(Rejection::Filtered);
            }
            Ok(())
        })
        .collect();

    let mut stats = IngestStats { lines: lines.len(), ..Default::default() };
    let mut smiles = Vec::new();
    for ((line, s), verdict) in lines.iter().zip(verdicts) {
        match verdict {
            Ok(()) => smiles.push(s.to_string()),
            Err(r) => {
                match &r {
                    Rejection::Invalid(_) => stats.invalid += 1,
                    Rejection::TooLong(_) => stats.too_long += 1,
                    Rejection::Filtered => stats.filtered += 1,
                }
                if stats.examples.len() < 20 {
                    stats.examples.push((*line, format!("{s}: {r:?}")));
                }
            }
        }
    }
    stats.kept = smiles.len();
    if smiles.is_empty() {
        return Err(TrainingError::EmptyCorpus);
    }
    let vocab = Vocabulary::from_corpus(smiles.iter().map(String::as_str));
    let sequences = smiles.iter().map(|s| vocab.tokenize(s)).collect::<Result<Vec<_>, _>>()?;
    Ok((Corpus { source: None, smiles, sequences, vocab }, stats))
}

pub fn ingest(path: &Path, filter: Option<ProspectiveFilter>) -> Result<(Corpus, IngestStats), TrainingError> {
    let (mut corpus, stats) = ingest_str(&read_file(path)?, filter)?;
    corpus.source = Some(path.to_path_buf());
    Ok((corpus, stats))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub dims_embed: usize,
    pub dims_hidden: usize,
    pub dims_layers: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub heldout_fraction: f64,
    pub optimizer: RmsPropConfig,
    /// Samples drawn after each epoch to report the validity rate (0 disables).
    pub validity_samples: usize,
    pub seed: u64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            dims_embed: 64,
            dims_hidden: 128,
            dims_layers: 1,
            batch_size: 128,
            epochs: 20,
            patience: 3,
            heldout_fraction: 0.05,
            optimizer: RmsPropConfig::default(),
            validity_samples: 200,
            seed: 0,
        }
    }
}

impl PriorConfig {
    pub fn dims(&self, vocab_size: usize) -> ModelDims {
        ModelDims { vocab_size, embed_dim: self.dims_embed, hidden_dim: self.dims_hidden, n_layers: self.dims_layers }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sequence NLL over the epoch's minibatches.
    pub train_nll: f64,
    pub heldout_nll: f64,
    pub validity_sample_rate: Option<f64>,
}

impl EpochRecord {
    pub const HEADER: &'static str = "epoch,train_nll,heldout_nll,validity_sample_rate";

    pub fn to_line(&self) -> String {
        let v = self.validity_sample_rate.map_or(String::new(), |v| format!("{v:.4}"));
        format!("{},{:.6},{:.6},{}", self.epoch, self.train_nll, self.heldout_nll, v)
    }
}

#[derive(Clone, Debug)]
pub struct PriorOutcome {
    /// Parameters from the epoch with the lowest held-out NLL.
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Minimize the sequence NLL with shuffled minibatches and early stopping on
/// a held-out split. `on_epoch` sees each record as soon as it is complete.
pub fn train_prior(
    corpus: &Corpus,
    config: &PriorConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<PriorOutcome, TrainingError> {
    if corpus.is_empty() {
        return Err(TrainingError::EmptyCorpus);
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(TrainingError::InvalidArgument("batch size and epochs must be positive".into()));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed::derive(config.seed, "heldout-split", 0)));
    let n_held = if corpus.len() < 2 {
        0
    } else {
        ((corpus.len() as f64 * config.heldout_fraction).ceil() as usize).clamp(1, corpus.len() - 1)
    };
    let heldout: Vec<TokenSequence> = order[..n_held].iter().map(|&i| corpus.sequences[i].clone()).collect();
    let mut train: Vec<usize> = order[n_held..].to_vec();
    train.sort_unstable();

    let mut params = ModelParams::init(config.dims(corpus.vocab.len()), seed::derive(config.seed, "init", 0));
    let mut opt = OptimizerState::new(&params, config.optimizer);
    let mut best = (f64::INFINITY, params.clone(), 0);
    let mut since_best = 0;
    let mut log = Vec::new();

    for epoch in 1..=config.epochs {
        let mut idx = train.clone();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed::derive(config.seed, "shuffle", epoch as u64)));
        let mut losses = Vec::new();
        for chunk in idx.chunks(config.batch_size) {
            let batch: Vec<TokenSequence> = chunk.iter().map(|&i| corpus.sequences[i].clone()).collect();
            let (grads, loss) = backprop_nll(&params, &batch)?;
            if !loss.is_finite() {
                return Err(TrainingError::DivergenceDetected(epoch));
            }
            opt.update(&mut params, &grads, Direction::Descent).map_err(|e| match e {
                NeuralError::NonFiniteGradient => TrainingError::DivergenceDetected(epoch),
                other => other.into(),
            })?;
            losses.push(loss);
        }
        if !params.is_finite() {
            return Err(TrainingError::DivergenceDetected(epoch));
        }
        let train_nll = mean(&losses);
        let heldout_nll = if heldout.is_empty() { train_nll } else { mean(&batch_nll(&params, &heldout)) };
        if !heldout_nll.is_finite() {
            return Err(TrainingError::DivergenceDetected(epoch));
        }
        let validity_sample_rate = (config.validity_samples > 0).then(|| {
            let seeds = seed::derive_many(config.seed, &format!("epoch-validity-{epoch}"), 0, config.validity_samples);
            validity_of_samples(&corpus.vocab, &sample_batch(&params, &corpus.vocab, &seeds, MAX_LEN, 1.0)).valid_fraction
        });
        let record = EpochRecord { epoch, train_nll, heldout_nll, validity_sample_rate };
        on_epoch(&record);
        log.push(record);
        if heldout_nll < best.0 {
            best = (heldout_nll, params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    let (_, mut best_params, best_epoch) = best;
    best_params.round_to_f32();
    Ok(PriorOutcome { checkpoint: Checkpoint::new(best_params, corpus.vocab.clone())?, log, best_epoch })
}

/// Write the epoch log as CSV.
pub fn write_epoch_log(path: &Path, log: &[EpochRecord]) -> Result<(), TrainingError> {
    let mut out = Vec::new();
    writeln!(out, "{}", EpochRecord::HEADER).unwrap();
    for r in log {
        writeln!(out, "{}", r.to_line()).unwrap();
    }
    write_file(path, &out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidityStats {
    pub n: usize,
    pub valid_fraction: f64,
    /// Distinct valid strings divided by the number of valid samples.
    pub unique_fraction: f64,
}

/// Decode generated samples; `None` marks an unterminated or malformed one.
pub fn decode_samples(vocab: &Vocabulary, samples: &[Sample]) -> Vec<Option<String>> {
    samples.iter().map(|s| vocab.decode_generated(&s.seq)).collect()
}

pub fn validity_of_samples(vocab: &Vocabulary, samples: &[Sample]) -> ValidityStats {
    let decoded = decode_samples(vocab, samples);
    let valid: Vec<&String> = decoded.iter().flatten().filter(|s| parse(s).is_ok()).collect();
    let unique: HashSet<&&String> = valid.iter().collect();
    ValidityStats {
        n: samples.len(),
        valid_fraction: valid.len() as f64 / samples.len().max(1) as f64,
        unique_fraction: if valid.is_empty() { 0.0 } else { unique.len() as f64 / valid.len() as f64 },
    }
}

/// Fraction of `n` seeded samples that parse as valid molecules.
pub fn validity_rate(checkpoint: &Checkpoint, n: usize, seed_value: u64) -> Result<ValidityStats, TrainingError> {
    if n == 0 {
        return Err(TrainingError::InvalidArgument("n_samples must be at least 1".into()));
    }
    let seeds = seed::derive_many(seed_value, "validity", 0, n);
    let samples = sample_batch(&checkpoint.params, &checkpoint.vocab, &seeds, MAX_LEN, 1.0);
    Ok(validity_of_samples(&checkpoint.vocab, &samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prospective_filter() {
        let (c, stats) = ingest_str("c1ccccc1O\nCCN\nC((\n# comment\n\nCCCCCCCC\n", Some(Default::default())).unwrap();
        assert_eq!(c.smiles, vec!["c1ccccc1O", "CCCCCCCC"]);
        assert_eq!((stats.lines, stats.kept, stats.invalid, stats.filtered), (4, 2, 1, 1));
        let f = ProspectiveFilter::default();
        // C18H38 weighs about 254
        assert!(!f.accepts(&parse("CCCCCCCCCCCCCCCCCC").unwrap()));
        assert!(f.accepts(&parse("OC(=O)C=CC(=O)O").unwrap()));
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(ingest_str("C((\n", None), Err(TrainingError::EmptyCorpus)));
        assert!(matches!(ingest_str("CCN\n", Some(Default::default())), Err(TrainingError::EmptyCorpus)));
    }

    #[test]
    fn oversize_lines_dropped() {
        let long = "C".repeat(139);
        let ok = "C".repeat(138);
        let (c, stats) = ingest_str(&format!("{long}\n{ok}\n"), None).unwrap();
        assert_eq!(stats.too_long, 1);
        assert_eq!(c.smiles, vec![ok]);
        assert_eq!(token_length("CCl"), 4);
    }

    #[test]
    fn zero_samples_is_an_error() {
        let (c, _) = ingest_str("CC\n", None).unwrap();
        let ck = Checkpoint::new(ModelParams::zeros(ModelDims::desk(c.vocab.len())), c.vocab).unwrap();
        assert!(validity_rate(&ck, 0, 1).is_err());
    }
}
