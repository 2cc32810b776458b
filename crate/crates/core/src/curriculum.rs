//! Difficulty profiling, constraint bins, phase schedules and weak-constraint
//! refinement.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptors::FgCatalog;
use crate::neural::{sample_batch, ModelParams};
use crate::rl::{
    baseline_constraint, mw_score_value, reinforce_step, Candidate, ComponentScores, ConstraintFn, ConstraintSpec,
    RlConfig, RlError, RlState,
};
use crate::seed;
use crate::smiles::Vocabulary;
use crate::training::{read_file, write_file, TrainingError};

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("phase {k} outside 1..={n}")]
    PhaseOutOfRange { k: usize, n: usize },
    #[error("weak constraint set is empty")]
    EmptyWeakSet,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Io(#[from] TrainingError),
}

/// Mean group scores under the prior.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DifficultyReport {
    pub ids: Vec<u8>,
    /// Mean of F in {-1, +1} per group, in `ids` order.
    pub d: Vec<f64>,
    pub n_samples: usize,
}

impl DifficultyReport {
    /// Satisfaction probability `(D + 1) / 2`.
    pub fn p(&self) -> Vec<f64> {
        self.d.iter().map(|d| (d + 1.0) / 2.0).collect()
    }

    pub fn get(&self, id: u8) -> Option<f64> {
        self.ids.iter().position(|&i| i == id).map(|i| self.d[i])
    }

    /// Ids ordered easiest first (higher D), ties by ascending id.
    pub fn ranking(&self) -> Vec<u8> {
        let mut order: Vec<(u8, f64)> = self.ids.iter().copied().zip(self.d.iter().copied()).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        order.into_iter().map(|x| x.0).collect()
    }

    /// `name,D,p` rows for plotting.
    pub fn to_plot_data(&self, catalog: &FgCatalog) -> String {
        let mut out = String::from("id,name,D,p\n");
        for ((id, d), p) in self.ids.iter().zip(&self.d).zip(self.p()) {
            let name = catalog.get(*id).map_or("?", |g| g.name.as_str());
            out.push_str(&format!("{id},{name},{d:.6},{p:.6}\n"));
        }
        out
    }
}

/// Sample `n` sequences per seed stream and decode them into candidates.
pub fn sample_candidates(
    params: &ModelParams,
    vocab: &Vocabulary,
    catalog: &FgCatalog,
    n: usize,
    master_seed: u64,
    stream: &str,
) -> Vec<Candidate> {
    let seeds = seed::derive_many(master_seed, stream, 0, n);
    let samples = sample_batch(params, vocab, &seeds, crate::smiles::MAX_LEN, 1.0);
    samples.into_par_iter().map(|s| Candidate::new(s.seq, vocab, catalog)).collect()
}

/// Mean group scores of `candidates`, in spec order.
pub fn mean_group_scores(candidates: &[Candidate], spec: &ConstraintSpec) -> Vec<f64> {
    let mut sums = vec![0.0; spec.fg.len()];
    for c in candidates {
        let comp = ComponentScores::of(c.profile.as_ref(), spec);
        for (s, (_, v)) in sums.iter_mut().zip(&comp.fg) {
            *s += v;
        }
    }
    sums.iter().map(|s| s / candidates.len().max(1) as f64).collect()
}

/// How often the untuned model already satisfies each group constraint.
pub fn difficulty_scores(
    params: &ModelParams,
    vocab: &Vocabulary,
    catalog: &FgCatalog,
    spec: &ConstraintSpec,
    n: usize,
    seed_value: u64,
) -> DifficultyReport {
    let candidates = sample_candidates(params, vocab, catalog, n, seed_value, "difficulty");
    DifficultyReport { ids: spec.fg_ids(), d: mean_group_scores(&candidates, spec), n_samples: n }
}

/// Split the difficulty ranking into `n_bins` contiguous bins, easiest
/// first, with sizes differing by at most one (larger bins first).
pub fn make_bins(report: &DifficultyReport, n_bins: usize) -> Result<Vec<Vec<u8>>, CurriculumError> {
    let ranked = report.ranking();
    if n_bins == 0 || n_bins > ranked.len() {
        return Err(CurriculumError::InvalidPlan(format!("cannot split {} constraints into {n_bins} bins", ranked.len())));
    }
    let (base, extra) = (ranked.len() / n_bins, ranked.len() % n_bins);
    let mut bins = Vec::with_capacity(n_bins);
    let mut start = 0;
    for b in 0..n_bins {
        let size = base + usize::from(b < extra);
        bins.push(ranked[start..start + size].to_vec());
        start += size;
    }
    Ok(bins)
}

/// Training score of phase `k` (1-based) from component scores: the
/// group mixture of the active bins blended with the MW score by `beta`.
pub fn phase_score(
    comp: &ComponentScores,
    bins: &[Vec<u8>],
    k: usize,
    w: f64,
    beta: f64,
) -> Result<f64, CurriculumError> {
    if k == 0 || k > bins.len() {
        return Err(CurriculumError::PhaseOutOfRange { k, n: bins.len() });
    }
    let current = comp.fg_mean(&bins[k - 1]);
    let mix = if k == 1 {
        current
    } else {
        let previous = bins[..k - 1].iter().map(|b| comp.fg_mean(b)).sum::<f64>() / (k - 1) as f64;
        (1.0 - w) * previous + w * current
    };
    Ok(beta * comp.mw + (1.0 - beta) * mix)
}

pub fn phase_constraint_fn<'a>(
    bins: &'a [Vec<u8>],
    k: usize,
    w: f64,
    beta: f64,
    spec: &'a ConstraintSpec,
) -> Result<Box<ConstraintFn<'a>>, CurriculumError> {
    if k == 0 || k > bins.len() {
        return Err(CurriculumError::PhaseOutOfRange { k, n: bins.len() });
    }
    Ok(Box::new(move |c: &Candidate| {
        let comp = ComponentScores::of(c.profile.as_ref(), spec);
        phase_score(&comp, bins, k, w, beta).expect("phase checked")
    }))
}

/// Mean of the MW score, the weak-group mean and the mean of the other groups.
pub fn refined_score(comp: &ComponentScores, weak: &[u8]) -> f64 {
    let others: Vec<u8> = comp.fg.iter().map(|f| f.0).filter(|id| !weak.contains(id)).collect();
    let mut terms = vec![comp.mw, comp.fg_mean(weak)];
    if !others.is_empty() {
        terms.push(comp.fg_mean(&others));
    }
    terms.iter().sum::<f64>() / terms.len() as f64
}

pub fn refined_constraint_fn<'a>(
    spec: &'a ConstraintSpec,
    weak: &'a [u8],
) -> Result<Box<ConstraintFn<'a>>, CurriculumError> {
    if weak.is_empty() {
        return Err(CurriculumError::EmptyWeakSet);
    }
    if let Some(&id) = weak.iter().find(|&&id| spec.desired(id).is_none()) {
        return Err(RlError::UnknownGroup(id).into());
    }
    Ok(Box::new(move |c: &Candidate| refined_score(&ComponentScores::of(c.profile.as_ref(), spec), weak)))
}

pub fn baseline_constraint_fn(spec: &ConstraintSpec) -> Box<ConstraintFn<'_>> {
    Box::new(move |c: &Candidate| baseline_constraint(c.profile.as_ref(), spec))
}

/// Normalized per-group satisfaction `q = (mean score + 1) / 2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakReport {
    pub q: Vec<(u8, f64)>,
    pub weak: Vec<u8>,
    pub threshold: f64,
}

impl WeakReport {
    pub fn q_of(&self, id: u8) -> Option<f64> {
        self.q.iter().find(|x| x.0 == id).map(|x| x.1)
    }

    pub fn mean_q(&self, ids: &[u8]) -> f64 {
        ids.iter().filter_map(|&id| self.q_of(id)).sum::<f64>() / ids.len().max(1) as f64
    }
}

pub fn weak_report(candidates: &[Candidate], spec: &ConstraintSpec, threshold: f64) -> WeakReport {
    let q: Vec<(u8, f64)> =
        spec.fg_ids().into_iter().zip(mean_group_scores(candidates, spec)).map(|(id, m)| (id, (m + 1.0) / 2.0)).collect();
    let weak = q.iter().filter(|x| x.1 < threshold).map(|x| x.0).collect();
    WeakReport { q, weak, threshold }
}

/// Groups whose normalized satisfaction rate under `params` is below `threshold`.
pub fn detect_weak_constraints(
    params: &ModelParams,
    vocab: &Vocabulary,
    catalog: &FgCatalog,
    spec: &ConstraintSpec,
    threshold: f64,
    n: usize,
    seed_value: u64,
) -> WeakReport {
    let candidates = sample_candidates(params, vocab, catalog, n, seed_value, "weak");
    weak_report(&candidates, spec, threshold)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Baseline,
    Rf,
    Cf,
    Crf,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Baseline => "baseline",
            Method::Rf => "rf",
            Method::Cf => "cf",
            Method::Crf => "crf",
        })
    }
}

impl FromStr for Method {
    type Err = CurriculumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Method::Baseline),
            "rf" => Ok(Method::Rf),
            "cf" => Ok(Method::Cf),
            "crf" => Ok(Method::Crf),
            other => Err(CurriculumError::InvalidPlan(format!("unknown method {other:?}"))),
        }
    }
}

/// Reward used by single-bin baseline-style phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineReward {
    /// Equal-weight mean over all constraint terms.
    EqualWeight,
    /// `beta * C_mw + (1 - beta) * mean group score`.
    BetaWeighted,
}

/// A fine-tuning schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub method: Method,
    pub n_bins: usize,
    pub n_phases: usize,
    pub retrains_per_phase: usize,
    pub w: f64,
    pub beta: f64,
    /// Iteration cap for each training loop.
    pub budget: usize,
    pub patience: usize,
    pub seed: u64,
    pub baseline_reward: BaselineReward,
    pub rl: RlConfig,
    /// Ordered group bins, easiest first. Filled from a difficulty report.
    pub bins: Vec<Vec<u8>>,
}

impl PhasePlan {
    fn with(method: Method, n_bins: usize, n_phases: usize, retrains: usize) -> Self {
        PhasePlan {
            method,
            n_bins,
            n_phases,
            retrains_per_phase: retrains,
            w: 0.5,
            beta: 0.5,
            budget: 2000,
            patience: 50,
            seed: 0,
            baseline_reward: BaselineReward::EqualWeight,
            rl: RlConfig::default(),
            bins: Vec::new(),
        }
    }

    pub fn baseline() -> Self {
        Self::with(Method::Baseline, 1, 1, 0)
    }

    pub fn rf(n: usize) -> Self {
        Self::with(Method::Rf, 1, n, 1)
    }

    pub fn cf(n: usize) -> Self {
        Self::with(Method::Cf, n, n, 0)
    }

    pub fn crf(n: usize) -> Self {
        Self::with(Method::Crf, n, n, 1)
    }

    pub fn for_method(method: Method, n: usize) -> Self {
        match method {
            Method::Baseline => Self::baseline(),
            Method::Rf => Self::rf(n),
            Method::Cf => Self::cf(n),
            Method::Crf => Self::crf(n),
        }
    }

    /// `CF_4`, `RF_2`, `Baseline`, ...
    pub fn label(&self) -> String {
        match self.method {
            Method::Baseline => "Baseline".into(),
            m => format!("{}_{}", m.to_string().to_uppercase(), self.n_phases),
        }
    }

    /// Fill bins from a difficulty report (single bin for baseline/RF).
    pub fn with_bins(mut self, report: &DifficultyReport) -> Result<Self, CurriculumError> {
        self.bins = make_bins(report, self.n_bins)?;
        Ok(self)
    }

    /// Table 1 consistency plus parameter ranges.
    pub fn validate(&self) -> Result<(), CurriculumError> {
        let bad = |m: String| Err(CurriculumError::InvalidPlan(m));
        let (bins_ok, retrain_ok, phases_ok) = match self.method {
            Method::Baseline => (self.n_bins == 1, self.retrains_per_phase == 0, self.n_phases == 1),
            Method::Rf => (self.n_bins == 1, self.retrains_per_phase == 1, self.n_phases >= 1),
            Method::Cf => (self.n_bins >= 1, self.retrains_per_phase == 0, self.n_phases == self.n_bins),
            Method::Crf => (self.n_bins >= 1, self.retrains_per_phase == 1, self.n_phases == self.n_bins),
        };
        if !(bins_ok && retrain_ok && phases_ok) {
            return bad(format!(
                "{} requires a different bins/retrains/phases combination (got {}/{}/{})",
                self.method, self.n_bins, self.retrains_per_phase, self.n_phases
            ));
        }
        if !(0.0..=1.0).contains(&self.w) || !(0.0..=1.0).contains(&self.beta) {
            return bad("w and beta must lie in [0, 1]".into());
        }
        if self.rl.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !self.bins.is_empty() && self.bins.len() != self.n_bins {
            return bad(format!("plan lists {} bins but n_bins = {}", self.bins.len(), self.n_bins));
        }
        Ok(())
    }

    fn check_bins(&self, spec: &ConstraintSpec) -> Result<(), CurriculumError> {
        let mut flat: Vec<u8> = self.bins.iter().flatten().copied().collect();
        flat.sort_unstable();
        let mut ids = spec.fg_ids();
        ids.sort_unstable();
        if flat != ids || self.bins.iter().any(|b| b.is_empty()) {
            return Err(CurriculumError::InvalidPlan("bins must partition the spec's groups".into()));
        }
        Ok(())
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("method", self.method.to_string());
        kv("n_bins", self.n_bins.to_string());
        kv("phases", self.n_phases.to_string());
        kv("retrains_per_phase", self.retrains_per_phase.to_string());
        kv("w", self.w.to_string());
        kv("beta", self.beta.to_string());
        kv("budget", self.budget.to_string());
        kv("patience", self.patience.to_string());
        kv("seed", self.seed.to_string());
        kv(
            "baseline_reward",
            match self.baseline_reward {
                BaselineReward::EqualWeight => "equal",
                BaselineReward::BetaWeighted => "beta",
            }
            .into(),
        );
        kv("batch_size", self.rl.batch_size.to_string());
        kv("kl_weight", self.rl.kl_weight.to_string());
        kv("learning_rate", self.rl.optimizer.learning_rate.to_string());
        for (i, b) in self.bins.iter().enumerate() {
            kv(&format!("bin{}", i + 1), b.iter().map(u8::to_string).collect::<Vec<_>>().join(","));
        }
        out
    }

    /// `key = value` lines (`key: value` also accepted). Unspecified keys
    /// take the defaults of the method row.
    pub fn parse(text: &str) -> Result<Self, CurriculumError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| CurriculumError::InvalidPlan(format!("line {}: expected key = value", n + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let method: Method = map.remove("method").ok_or_else(|| CurriculumError::InvalidPlan("missing method".into()))?.parse()?;
        fn num<T: FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<Option<T>, CurriculumError> {
            map.remove(key)
                .map(|v| v.parse::<T>().map_err(|_| CurriculumError::InvalidPlan(format!("bad value for {key}: {v}"))))
                .transpose()
        }
        let n_bins: Option<usize> = num(&mut map, "n_bins")?;
        let phases: Option<usize> = num(&mut map, "phases")?;
        let n = match method {
            Method::Rf => phases.unwrap_or(1),
            _ => n_bins.unwrap_or(1),
        };
        let mut plan = PhasePlan::for_method(method, n);
        if let Some(b) = n_bins {
            plan.n_bins = b;
        }
        if let Some(p) = phases {
            plan.n_phases = p;
        }
        if let Some(r) = num(&mut map, "retrains_per_phase")? {
            plan.retrains_per_phase = r;
        }
        if let Some(v) = num(&mut map, "w")? {
            plan.w = v;
        }
        if let Some(v) = num(&mut map, "beta")? {
            plan.beta = v;
        }
        if let Some(v) = num(&mut map, "budget")? {
            plan.budget = v;
        }
        if let Some(v) = num(&mut map, "patience")? {
            plan.patience = v;
        }
        if let Some(v) = num(&mut map, "seed")? {
            plan.seed = v;
        }
        if let Some(v) = num(&mut map, "batch_size")? {
            plan.rl.batch_size = v;
        }
        if let Some(v) = num(&mut map, "kl_weight")? {
            plan.rl.kl_weight = v;
        }
        if let Some(v) = num(&mut map, "learning_rate")? {
            plan.rl.optimizer.learning_rate = v;
        }
        if let Some(v) = map.remove("baseline_reward") {
            plan.baseline_reward = match v.as_str() {
                "equal" => BaselineReward::EqualWeight,
                "beta" => BaselineReward::BetaWeighted,
                _ => return Err(CurriculumError::InvalidPlan(format!("bad baseline_reward {v}"))),
            };
        }
        let mut bins = Vec::new();
        for i in 1.. {
            let Some(v) = map.remove(&format!("bin{i}")) else { break };
            let ids = v
                .split(',')
                .map(|x| x.trim().parse::<u8>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CurriculumError::InvalidPlan(format!("bad bin{i}: {v}")))?;
            bins.push(ids);
        }
        plan.bins = bins;
        if let Some(k) = map.keys().next() {
            return Err(CurriculumError::InvalidPlan(format!("unknown key {k}")));
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self, CurriculumError> {
        Self::parse(&read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CurriculumError> {
        Ok(write_file(path, self.to_file_string().as_bytes())?)
    }
}

/// One training iteration in the phase log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseRecord {
    pub phase: usize,
    /// 0 for the main loop, 1 for the retrain loop.
    pub pass: usize,
    pub iteration: usize,
    /// Mean training score under the phase's reward.
    pub mean_reward: f64,
    pub validity: f64,
    /// Normalized satisfaction `(score + 1) / 2` for MW then each group.
    pub satisfaction: Vec<f64>,
}

impl PhaseRecord {
    pub fn header(spec: &ConstraintSpec) -> String {
        let mut h = String::from("phase,iteration,mean_reward,validity,mw");
        for id in spec.fg_ids() {
            h.push_str(&format!(",fg{id}"));
        }
        h
    }

    pub fn to_line(&self) -> String {
        let mut s = format!("{},{},{:.6},{:.4}", self.phase, self.iteration, self.mean_reward, self.validity);
        for v in &self.satisfaction {
            s.push_str(&format!(",{v:.4}"));
        }
        s
    }
}

/// Streamed to the caller as training proceeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum PhaseEvent {
    /// A training loop begins with the listed groups active in the reward.
    LoopStart { phase: usize, pass: usize, active_groups: Vec<u8>, new_groups: Vec<u8> },
    Iteration(PhaseRecord),
    /// Loop finished after `iterations` steps; `early_stopped` if patience ran out.
    LoopEnd { phase: usize, pass: usize, iterations: usize, early_stopped: bool },
    /// Prior synchronized to the agent.
    Sync { phase: usize },
}

impl PhaseEvent {
    /// Log line; structural events are `#` comments between records.
    pub fn to_line(&self) -> String {
        let ids = |v: &[u8]| v.iter().map(u8::to_string).collect::<Vec<_>>().join(" ");
        match self {
            PhaseEvent::LoopStart { phase, pass, active_groups, new_groups } => format!(
                "# phase {phase} pass {pass} start active [{}] added [{}]",
                ids(active_groups),
                ids(new_groups)
            ),
            PhaseEvent::Iteration(r) => r.to_line(),
            PhaseEvent::LoopEnd { phase, pass, iterations, early_stopped } => {
                format!("# phase {phase} pass {pass} end iterations {iterations} early_stop {early_stopped}")
            }
            PhaseEvent::Sync { phase } => format!("# phase {phase} sync prior <- agent"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CurriculumOutcome {
    pub agent: ModelParams,
    /// Prior at the end of the run (equal to the agent after the last sync).
    pub prior: ModelParams,
    pub events: Vec<PhaseEvent>,
    /// Agent parameters at each phase boundary.
    pub boundaries: Vec<ModelParams>,
}

impl CurriculumOutcome {
    pub fn records(&self) -> impl Iterator<Item = &PhaseRecord> {
        self.events.iter().filter_map(|e| match e {
            PhaseEvent::Iteration(r) => Some(r),
            _ => None,
        })
    }
}

fn satisfaction(candidates: &[Candidate], spec: &ConstraintSpec) -> Vec<f64> {
    let n = candidates.len().max(1) as f64;
    let mut mw = 0.0;
    for c in candidates {
        mw += c.profile.as_ref().map_or(-1.0, |p| mw_score_value(p.mw, spec.mw_target));
    }
    let mut out = vec![(mw / n + 1.0) / 2.0];
    out.extend(mean_group_scores(candidates, spec).iter().map(|m| (m + 1.0) / 2.0));
    out
}

/// One early-stopped REINFORCE loop against a fixed prior.
#[allow(clippy::too_many_arguments)]
fn train_loop(
    agent: &mut ModelParams,
    prior: &ModelParams,
    vocab: &Vocabulary,
    catalog: &FgCatalog,
    spec: &ConstraintSpec,
    constraint: &ConstraintFn,
    plan: &PhasePlan,
    stream: &str,
    phase: usize,
    pass: usize,
    sink: &mut dyn FnMut(&PhaseEvent),
    events: &mut Vec<PhaseEvent>,
) -> Result<(), CurriculumError> {
    let mut state = RlState::new(agent, &plan.rl, seed::derive(plan.seed, stream, 0));
    let mut best = f64::NEG_INFINITY;
    let mut since_best = 0;
    let mut iterations = 0;
    let mut early_stopped = false;
    let mut emit = |e: PhaseEvent, events: &mut Vec<PhaseEvent>| {
        sink(&e);
        events.push(e);
    };
    for it in 0..plan.budget {
        let out = reinforce_step(agent, prior, vocab, catalog, constraint, &plan.rl, &mut state)?;
        iterations = it + 1;
        let record = PhaseRecord {
            phase,
            pass,
            iteration: it,
            mean_reward: out.stats.mean_constraint,
            validity: out.stats.validity,
            satisfaction: satisfaction(&out.candidates, spec),
        };
        emit(PhaseEvent::Iteration(record), events);
        if out.stats.mean_constraint > best {
            best = out.stats.mean_constraint;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= plan.patience {
                early_stopped = true;
                break;
            }
        }
    }
    emit(PhaseEvent::LoopEnd { phase, pass, iterations, early_stopped }, events);
    Ok(())
}

/// Run every phase of `plan` starting from `prior`.
///
/// Each phase clones the current prior into the agent, trains (twice when
/// the plan retrains), then synchronizes the prior to the agent.
pub fn run_curriculum(
    plan: &PhasePlan,
    prior: &ModelParams,
    vocab: &Vocabulary,
    catalog: &FgCatalog,
    spec: &ConstraintSpec,
    mut sink: impl FnMut(&PhaseEvent),
) -> Result<CurriculumOutcome, CurriculumError> {
    plan.validate()?;
    let mut plan = plan.clone();
    if plan.bins.is_empty() && plan.n_bins == 1 {
        plan.bins = vec![spec.fg_ids()];
    }
    plan.check_bins(spec)?;
    let mut prior = prior.clone();
    let mut agent = prior.clone();
    let mut events = Vec::new();
    let mut boundaries = Vec::new();
    if plan.budget == 0 {
        return Ok(CurriculumOutcome { agent, prior, events, boundaries });
    }
    let all = spec.fg_ids();
    for phase in 1..=plan.n_phases {
        agent = prior.clone();
        let (constraint, active, added): (Box<ConstraintFn>, Vec<u8>, Vec<u8>) = match plan.method {
            Method::Baseline | Method::Rf => {
                let f = match plan.baseline_reward {
                    BaselineReward::EqualWeight => baseline_constraint_fn(spec),
                    BaselineReward::BetaWeighted => phase_constraint_fn(&plan.bins, 1, plan.w, plan.beta, spec)?,
                };
                (f, all.clone(), if phase == 1 { all.clone() } else { Vec::new() })
            }
            Method::Cf | Method::Crf => (
                phase_constraint_fn(&plan.bins, phase, plan.w, plan.beta, spec)?,
                plan.bins[..phase].concat(),
                plan.bins[phase - 1].clone(),
            ),
        };
        for pass in 0..=plan.retrains_per_phase {
            let start = PhaseEvent::LoopStart {
                phase,
                pass,
                active_groups: active.clone(),
                new_groups: if pass == 0 { added.clone() } else { Vec::new() },
            };
            sink(&start);
            events.push(start);
            let stream = format!("phase-{phase}-pass-{pass}");
            train_loop(
                &mut agent, &prior, vocab, catalog, spec, &*constraint, &plan, &stream, phase, pass, &mut sink,
                &mut events,
            )?;
        }
        prior = agent.clone();
        let sync = PhaseEvent::Sync { phase };
        sink(&sync);
        events.push(sync);
        boundaries.push(agent.clone());
    }
    Ok(CurriculumOutcome { agent, prior, events, boundaries })
}

/// One refinement loop with the reshaped reward, anchored to `agent`.
pub fn refine(
    plan: &PhasePlan,
    agent: &ModelParams,
    vocab: &Vocabulary,
    catalog: &FgCatalog,
    spec: &ConstraintSpec,
    weak: &[u8],
    mut sink: impl FnMut(&PhaseEvent),
) -> Result<CurriculumOutcome, CurriculumError> {
    let constraint = refined_constraint_fn(spec, weak)?;
    let prior = agent.clone();
    let mut refined = agent.clone();
    let mut events = Vec::new();
    let phase = plan.n_phases + 1;
    let start = PhaseEvent::LoopStart { phase, pass: 0, active_groups: spec.fg_ids(), new_groups: weak.to_vec() };
    sink(&start);
    events.push(start);
    train_loop(&mut refined, &prior, vocab, catalog, spec, &*constraint, plan, "refine", phase, 0, &mut sink, &mut events)?;
    let sync = PhaseEvent::Sync { phase };
    sink(&sync);
    events.push(sync);
    Ok(CurriculumOutcome { agent: refined.clone(), prior: refined.clone(), events, boundaries: vec![refined] })
}
