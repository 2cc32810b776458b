//! Constraint scoring and the KL-anchored REINFORCE fine-tuning step.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptors::{group_presence, molecular_weight, DescriptorError, FgCatalog};
use crate::neural::{
    backprop_weighted, batch_nll, sample_batch, Direction, ModelParams, NeuralError, OptimizerState, RmsPropConfig,
};
use crate::seed;
use crate::smiles::{parse, MolGraph, TokenSequence, Vocabulary, MAX_LEN};
use crate::training::{read_file, write_file, TrainingError};

#[derive(Debug, Error)]
pub enum RlError {
    #[error("unknown functional group id {0}")]
    UnknownGroup(u8),
    #[error("invalid constraint spec: {0}")]
    InvalidSpec(String),
    #[error("agent and prior disagree: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] TrainingError),
}

/// Molecular-weight target plus desired presence/absence for a set of
/// functional groups (all 20 catalog groups in the standard setting).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub mw_target: f64,
    pub fg: Vec<(u8, bool)>,
}

impl ConstraintSpec {
    /// Validates ids against `catalog`: non-empty, distinct, known.
    pub fn new(mw_target: f64, fg: Vec<(u8, bool)>, catalog: &FgCatalog) -> Result<Self, RlError> {
        if !(mw_target.is_finite() && mw_target > 0.0) {
            return Err(RlError::InvalidSpec(format!("mw target must be positive, got {mw_target}")));
        }
        if fg.is_empty() {
            return Err(RlError::InvalidSpec("no functional-group constraints".into()));
        }
        for (i, &(id, _)) in fg.iter().enumerate() {
            if catalog.get(id).is_none() {
                return Err(RlError::UnknownGroup(id));
            }
            if fg[..i].iter().any(|&(j, _)| j == id) {
                return Err(RlError::InvalidSpec(format!("duplicate group id {id}")));
            }
        }
        Ok(ConstraintSpec { mw_target, fg })
    }

    /// The standard 21-constraint problem: every catalog group.
    pub fn full(mw_target: f64, desired: &[bool; 20], catalog: &FgCatalog) -> Result<Self, RlError> {
        Self::new(mw_target, catalog.ids().zip(desired.iter().copied()).collect(), catalog)
    }

    /// Constraint describing an existing molecule exactly.
    pub fn from_molecule(graph: &MolGraph, ids: &[u8], catalog: &FgCatalog) -> Result<Self, RlError> {
        let profile = MolProfile::from_graph(graph, catalog)
            .ok_or_else(|| RlError::InvalidSpec("molecule has no defined weight".into()))?;
        Self::new(profile.mw, ids.iter().map(|&id| (id, profile.has(id))).collect(), catalog)
    }

    /// Number of terms in the evaluation sum (1 + number of groups).
    pub fn n_constraints(&self) -> usize {
        1 + self.fg.len()
    }

    pub fn fg_ids(&self) -> Vec<u8> {
        self.fg.iter().map(|f| f.0).collect()
    }

    pub fn desired(&self, id: u8) -> Option<bool> {
        self.fg.iter().find(|f| f.0 == id).map(|f| f.1)
    }

    pub fn to_file_string(&self, catalog: &FgCatalog) -> String {
        let mut out = format!("mw: {}\n", self.mw_target);
        for &(id, want) in &self.fg {
            let name = catalog.get(id).map_or("?".to_string(), |p| p.name.replace(' ', "_"));
            writeln!(out, "fg {id} {name} {want}").unwrap();
        }
        out
    }

    /// `mw: <float>` followed by `fg <id> <name> <true|false>` lines.
    pub fn parse(text: &str, catalog: &FgCatalog) -> Result<Self, RlError> {
        let mut mw = None;
        let mut fg = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |why: &str| RlError::InvalidSpec(format!("line {}: {why}", n + 1));
            if let Some(rest) = line.strip_prefix("mw:") {
                if mw.is_some() {
                    return Err(bad("repeated mw line"));
                }
                mw = Some(rest.trim().parse::<f64>().map_err(|_| bad("bad mw value"))?);
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 3 || fields[0] != "fg" {
                return Err(bad("expected `fg <id> <name> <true|false>`"));
            }
            let id: u8 = fields[1].parse().map_err(|_| bad("bad group id"))?;
            let want = match *fields.last().unwrap() {
                "true" => true,
                "false" => false,
                _ => return Err(bad("flag must be true or false")),
            };
            fg.push((id, want));
        }
        Self::new(mw.ok_or_else(|| RlError::InvalidSpec("missing mw line".into()))?, fg, catalog)
    }

    pub fn load(path: &Path, catalog: &FgCatalog) -> Result<Self, RlError> {
        Self::parse(&read_file(path)?, catalog)
    }

    pub fn save(&self, path: &Path, catalog: &FgCatalog) -> Result<(), RlError> {
        Ok(write_file(path, self.to_file_string(catalog).as_bytes())?)
    }
}

/// Everything the constraint scores need from one molecule.
#[derive(Clone, Debug, PartialEq)]
pub struct MolProfile {
    pub mw: f64,
    /// Presence of catalog group `id` at index `id - 1`.
    pub present: Vec<bool>,
}

impl MolProfile {
    pub fn from_graph(graph: &MolGraph, catalog: &FgCatalog) -> Option<Self> {
        let mw = molecular_weight(graph).ok()?;
        Some(MolProfile { mw, present: group_presence(graph, catalog) })
    }

    /// `None` for strings that do not parse.
    pub fn from_smiles(smiles: &str, catalog: &FgCatalog) -> Option<Self> {
        Self::from_graph(&parse(smiles).ok()?, catalog)
    }

    pub fn has(&self, id: u8) -> bool {
        self.present.get(id as usize - 1).copied().unwrap_or(false)
    }
}

pub fn mw_score_value(mw: f64, target: f64) -> f64 {
    (1.0 - (target - mw).powi(2) / 1e4).max(-1.0)
}

/// `max(-1, 1 - (x - MW)^2 / 10^4)`.
pub fn score_mw(graph: &MolGraph, target: f64) -> Result<f64, DescriptorError> {
    Ok(mw_score_value(molecular_weight(graph)?, target))
}

/// +1 when presence of group `id` matches `desired`, otherwise -1.
pub fn score_fg(graph: &MolGraph, catalog: &FgCatalog, id: u8, desired: bool) -> Result<f64, RlError> {
    let pattern = catalog.get(id).ok_or(RlError::UnknownGroup(id))?;
    Ok(if crate::descriptors::match_group(graph, pattern) == desired { 1.0 } else { -1.0 })
}

fn fg_value(profile: Option<&MolProfile>, id: u8, desired: bool) -> f64 {
    match profile {
        Some(p) if p.has(id) == desired => 1.0,
        _ => -1.0,
    }
}

/// Per-constraint scores in spec order: MW first, then each group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentScores {
    pub mw: f64,
    pub fg: Vec<(u8, f64)>,
}

impl ComponentScores {
    /// Invalid molecules score -1 on every component.
    pub fn of(profile: Option<&MolProfile>, spec: &ConstraintSpec) -> Self {
        ComponentScores {
            mw: profile.map_or(-1.0, |p| mw_score_value(p.mw, spec.mw_target)),
            fg: spec.fg.iter().map(|&(id, want)| (id, fg_value(profile, id, want))).collect(),
        }
    }

    pub fn total(&self) -> f64 {
        self.mw + self.fg.iter().map(|f| f.1).sum::<f64>()
    }

    pub fn fg_score(&self, id: u8) -> Option<f64> {
        self.fg.iter().find(|f| f.0 == id).map(|f| f.1)
    }

    /// Mean score over the listed groups.
    pub fn fg_mean(&self, ids: &[u8]) -> f64 {
        ids.iter().map(|&id| self.fg_score(id).unwrap_or(-1.0)).sum::<f64>() / ids.len().max(1) as f64
    }
}

/// Unweighted evaluation score: MW score plus every group score.
pub fn eval_total(profile: Option<&MolProfile>, spec: &ConstraintSpec) -> f64 {
    ComponentScores::of(profile, spec).total()
}

/// Equal-weight mean of all constraint terms.
pub fn baseline_constraint(profile: Option<&MolProfile>, spec: &ConstraintSpec) -> f64 {
    eval_total(profile, spec) / spec.n_constraints() as f64
}

/// `nll_prior - nll_agent`: the log-likelihood ratio log(P_agent / P_prior) of
/// one sequence. Its expectation under the agent is KL(agent || prior).
pub fn kl_term(nll_prior: f64, nll_agent: f64) -> f64 {
    nll_prior - nll_agent
}

/// Reward decomposition for one sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub components: ComponentScores,
    pub kl: f64,
    pub training_score: f64,
    pub eval_total: f64,
}

impl RewardBreakdown {
    pub fn new(profile: Option<&MolProfile>, spec: &ConstraintSpec, kl: f64, training_score: f64) -> Self {
        let components = ComponentScores::of(profile, spec);
        let eval_total = components.total();
        RewardBreakdown { components, kl, training_score, eval_total }
    }
}

/// One sampled trajectory as seen by a constraint function.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub seq: TokenSequence,
    pub smiles: Option<String>,
    pub profile: Option<MolProfile>,
}

impl Candidate {
    pub fn new(seq: TokenSequence, vocab: &Vocabulary, catalog: &FgCatalog) -> Self {
        let smiles = vocab.decode_generated(&seq);
        let profile = smiles.as_deref().and_then(|s| MolProfile::from_smiles(s, catalog));
        Candidate { seq, smiles, profile }
    }

    pub fn valid(&self) -> bool {
        self.profile.is_some()
    }
}

/// Maps a trajectory to a training score in `[-1, 1]`.
pub type ConstraintFn<'a> = dyn Fn(&Candidate) -> f64 + Sync + 'a;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Estimator {
    /// Score-function gradient of `E[R]` with a running-mean baseline.
    Reinforce,
    /// Squared distance between the agent log-likelihood and the
    /// prior log-likelihood shifted by `sigma * C`.
    AugmentedLikelihood { sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlConfig {
    pub batch_size: usize,
    /// Weight of the log-ratio penalty in the return.
    pub kl_weight: f64,
    pub baseline_decay: f64,
    pub optimizer: RmsPropConfig,
    pub max_len: usize,
    pub temperature: f64,
    pub estimator: Estimator,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            batch_size: 128,
            kl_weight: 1.0,
            baseline_decay: 0.99,
            optimizer: RmsPropConfig::default(),
            max_len: MAX_LEN,
            temperature: 1.0,
            estimator: Estimator::Reinforce,
        }
    }
}

/// Mutable state carried across fine-tuning iterations.
#[derive(Clone, Debug)]
pub struct RlState {
    pub optimizer: OptimizerState,
    pub baseline: Option<f64>,
    pub iteration: u64,
    /// Seed of the trajectory stream.
    pub seed: u64,
}

impl RlState {
    pub fn new(agent: &ModelParams, config: &RlConfig, seed: u64) -> Self {
        RlState { optimizer: OptimizerState::new(agent, config.optimizer), baseline: None, iteration: 0, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchStats {
    pub mean_return: f64,
    pub mean_constraint: f64,
    pub mean_kl: f64,
    pub validity: f64,
    pub baseline: f64,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub stats: BatchStats,
    pub candidates: Vec<Candidate>,
    pub constraint_scores: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Sample a batch from the agent, score it, and take one ascent step.
///
/// The return is `R = C(y) - kl_weight * log(P_agent(y) / P_prior(y))`,
/// treated as a constant; the gradient is the batch mean of
/// `(R - b) * grad log P_agent(y)`.
pub fn reinforce_step(
    agent: &mut ModelParams,
    prior: &ModelParams,
    vocab: &Vocabulary,
    catalog: &FgCatalog,
    constraint: &ConstraintFn,
    config: &RlConfig,
    state: &mut RlState,
) -> Result<StepOutcome, RlError> {
    if agent.dims != prior.dims {
        return Err(RlError::Incompatible(format!("{:?} vs {:?}", agent.dims, prior.dims)));
    }
    if agent.dims.vocab_size != vocab.len() {
        return Err(RlError::Incompatible("vocabulary size".into()));
    }
    if config.batch_size == 0 {
        return Err(NeuralError::EmptyBatch.into());
    }
    let b = config.batch_size;
    let seeds = seed::derive_many(state.seed, "trajectory", state.iteration * b as u64, b);
    let samples = sample_batch(agent, vocab, &seeds, config.max_len, config.temperature);
    let nll_agent: Vec<f64> = samples.iter().map(|s| -s.logprob()).collect();
    let seqs: Vec<TokenSequence> = samples.into_iter().map(|s| s.seq).collect();
    let nll_prior = batch_nll(prior, &seqs);
    let candidates: Vec<Candidate> = seqs.par_iter().map(|s| Candidate::new(s.clone(), vocab, catalog)).collect();
    let scores: Vec<f64> = candidates.par_iter().map(constraint).collect();
    let kls: Vec<f64> = nll_prior.iter().zip(&nll_agent).map(|(&p, &a)| kl_term(p, a)).collect();
    let returns: Vec<f64> = scores.iter().zip(&kls).map(|(c, k)| c - config.kl_weight * k).collect();
    let mean_return = mean(&returns);
    let baseline = state.baseline.unwrap_or(mean_return);

    let (weights, direction) = match config.estimator {
        Estimator::Reinforce => (returns.iter().map(|r| -(r - baseline) / b as f64).collect::<Vec<_>>(), Direction::Ascent),
        Estimator::AugmentedLikelihood { sigma } => {
            // loss = mean (nll_agent - (nll_prior - sigma*C))^2
            let w = nll_agent
                .iter()
                .zip(&nll_prior)
                .zip(&scores)
                .map(|((a, p), c)| 2.0 * (a - p + sigma * c) / b as f64)
                .collect();
            (w, Direction::Descent)
        }
    };
    let (grads, _) = backprop_weighted(agent, &seqs, &weights)?;
    state.optimizer.update(agent, &grads, direction)?;
    state.baseline = Some(config.baseline_decay * baseline + (1.0 - config.baseline_decay) * mean_return);
    state.iteration += 1;

    let stats = BatchStats {
        mean_return,
        mean_constraint: mean(&scores),
        mean_kl: mean(&kls),
        validity: candidates.iter().filter(|c| c.valid()).count() as f64 / b as f64,
        baseline,
    };
    Ok(StepOutcome { stats, candidates, constraint_scores: scores })
}
