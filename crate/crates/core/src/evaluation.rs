//! Top-k scoring of sampled molecules, post-hoc similarity to a target and
//! synthetic identification targets.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::curriculum::sample_candidates;
use crate::descriptors::{fingerprint, tanimoto, FgCatalog, CATALOG_SIZE};
use crate::neural::ModelParams;
use crate::rl::{ComponentScores, ConstraintSpec, MolProfile, RlError};
use crate::seed;
use crate::smiles::{parse, Vocabulary};
use crate::training::{write_file, TrainingError};

/// Score given to samples that are not valid molecules.
pub const INVALID_SCORE: f64 = -21.0;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("invalid target SMILES {0:?}")]
    InvalidTarget(String),
    #[error("cannot pick {wanted} targets: only {found} candidates qualify")]
    NotEnoughTargets { wanted: usize, found: usize },
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Io(#[from] TrainingError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoredSample {
    /// Decoded text, even when it is not a valid molecule.
    pub smiles: Option<String>,
    pub valid: bool,
    pub total: f64,
    pub components: ComponentScores,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankedCandidate {
    pub rank: usize,
    pub smiles: String,
    pub total: f64,
    pub components: ComponentScores,
    pub similarity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub spec: ConstraintSpec,
    pub seed: u64,
    pub samples: Vec<ScoredSample>,
    pub top: Vec<RankedCandidate>,
    pub validity: f64,
    /// Distinct valid strings over valid samples.
    pub uniqueness: f64,
    pub target: Option<String>,
}

impl EvaluationReport {
    pub fn top_scores(&self) -> Vec<f64> {
        self.top.iter().map(|c| c.total).collect()
    }

    pub fn mean_top_score(&self) -> f64 {
        self.top.iter().map(|c| c.total).sum::<f64>() / self.top.len().max(1) as f64
    }

    /// Some top-k candidate has similarity exactly 1.
    pub fn identified(&self) -> bool {
        self.top.iter().any(|c| c.similarity == Some(1.0))
    }

    pub fn to_file_string(&self, catalog: &FgCatalog) -> String {
        let mut out = String::new();
        out.push_str(&format!("samples: {}\n", self.samples.len()));
        out.push_str(&format!("seed: {}\n", self.seed));
        out.push_str(&format!("validity: {:.4}\n", self.validity));
        out.push_str(&format!("uniqueness: {:.4}\n", self.uniqueness));
        out.push_str(&format!("max score: {}\n", self.spec.n_constraints()));
        out.push_str(&format!("mean top-{} score: {:.4}\n", self.top.len(), self.mean_top_score()));
        if let Some(t) = &self.target {
            out.push_str(&format!("target: {t}\nidentified: {}\n", self.identified()));
        }
        out.push_str("constraints:\n");
        out.push_str(&format!("  MW {}\n", self.spec.mw_target));
        for &(id, want) in &self.spec.fg {
            let name = catalog.get(id).map_or("?", |g| g.name.as_str());
            out.push_str(&format!("  fg{id} {name} {}\n", if want { "present" } else { "absent" }));
        }
        out.push_str("\n[top]\nrank,smiles,total,mw_score");
        for id in 1..=CATALOG_SIZE {
            out.push_str(&format!(",fg{id}"));
        }
        out.push_str(",similarity\n");
        for c in &self.top {
            out.push_str(&format!("{},{},{:.6},{:.6}", c.rank, c.smiles, c.total, c.components.mw));
            for id in 1..=CATALOG_SIZE as u8 {
                match c.components.fg_score(id) {
                    Some(v) => out.push_str(&format!(",{v}")),
                    None => out.push(','),
                }
            }
            match c.similarity {
                Some(s) => out.push_str(&format!(",{s:.6}\n")),
                None => out.push_str(",\n"),
            }
        }
        out
    }

    pub fn save(&self, path: &Path, catalog: &FgCatalog) -> Result<(), EvaluationError> {
        Ok(write_file(path, self.to_file_string(catalog).as_bytes())?)
    }
}

/// Score decoded strings and rank the best `k`.
pub fn rank_smiles(
    smiles: &[Option<String>],
    spec: &ConstraintSpec,
    catalog: &FgCatalog,
    k: usize,
    seed_value: u64,
) -> EvaluationReport {
    let samples: Vec<ScoredSample> = smiles
        .par_iter()
        .map(|s| {
            let profile = s.as_deref().and_then(|s| MolProfile::from_smiles(s, catalog));
            let components = ComponentScores::of(profile.as_ref(), spec);
            let valid = profile.is_some();
            let total = if valid { components.total() } else { INVALID_SCORE };
            ScoredSample { smiles: s.clone(), valid, total, components }
        })
        .collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let key = |i: usize| samples[i].smiles.as_deref().unwrap_or("");
    order.sort_by(|&a, &b| samples[b].total.total_cmp(&samples[a].total).then_with(|| key(a).cmp(key(b))));
    let top = order
        .iter()
        .take(k.min(samples.len()))
        .enumerate()
        .map(|(r, &i)| RankedCandidate {
            rank: r + 1,
            smiles: key(i).to_string(),
            total: samples[i].total,
            components: samples[i].components.clone(),
            similarity: None,
        })
        .collect();
    let valid: Vec<&str> = samples.iter().filter(|s| s.valid).map(|s| s.smiles.as_deref().unwrap_or("")).collect();
    let distinct: HashSet<&str> = valid.iter().copied().collect();
    EvaluationReport {
        spec: spec.clone(),
        seed: seed_value,
        validity: valid.len() as f64 / samples.len().max(1) as f64,
        uniqueness: if valid.is_empty() { 0.0 } else { distinct.len() as f64 / valid.len() as f64 },
        samples,
        top,
        target: None,
    }
}

/// Sample `n` molecules from `agent`, score them with the unweighted total
/// and keep the best `k` (clamped to `n`).
pub fn sample_and_rank(
    agent: &ModelParams,
    vocab: &Vocabulary,
    catalog: &FgCatalog,
    spec: &ConstraintSpec,
    n: usize,
    k: usize,
    seed_value: u64,
) -> EvaluationReport {
    let smiles: Vec<Option<String>> =
        sample_candidates(agent, vocab, catalog, n, seed_value, "evaluate").into_iter().map(|c| c.smiles).collect();
    rank_smiles(&smiles, spec, catalog, k, seed_value)
}

/// Attach Tanimoto similarity to `target` for each top-k candidate.
pub fn similarity_report(report: &EvaluationReport, target: &str) -> Result<EvaluationReport, EvaluationError> {
    let graph = parse(target).map_err(|_| EvaluationError::InvalidTarget(target.to_string()))?;
    let target_fp = fingerprint(&graph);
    let mut out = report.clone();
    for c in &mut out.top {
        c.similarity = Some(match parse(&c.smiles) {
            Ok(g) => tanimoto(&fingerprint(&g), &target_fp).expect("same width"),
            Err(_) => 0.0,
        });
    }
    out.target = Some(target.to_string());
    Ok(out)
}

/// A hidden molecule and the constraints that describe it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyntheticTarget {
    pub smiles: String,
    pub spec: ConstraintSpec,
}

/// Pick `n_fg` groups for `target`, each time taking the group whose
/// target value leaves the fewest agreeing pool molecules (ties by id).
pub fn informative_groups(target: &MolProfile, pool: &[&MolProfile], n_fg: usize) -> Vec<u8> {
    let mut alive: Vec<&MolProfile> = pool.to_vec();
    let mut chosen = Vec::with_capacity(n_fg);
    for _ in 0..n_fg.min(CATALOG_SIZE) {
        let best = (1..=CATALOG_SIZE as u8)
            .filter(|id| !chosen.contains(id))
            .min_by_key(|&id| (alive.iter().filter(|p| p.has(id) == target.has(id)).count(), id))
            .expect("groups remain");
        alive.retain(|p| p.has(best) == target.has(best));
        chosen.push(best);
    }
    chosen.sort_unstable();
    chosen
}

/// Seeded picks of pool molecules with at most `max_heavy` heavy atoms whose
/// constraint profile (MW within 0.5 plus the chosen groups) no other pool
/// molecule shares.
pub fn synthetic_targets(
    pool: &[String],
    catalog: &FgCatalog,
    n_targets: usize,
    n_fg: usize,
    max_heavy: usize,
    seed_value: u64,
) -> Result<Vec<SyntheticTarget>, EvaluationError> {
    let parsed: Vec<Option<(MolProfile, usize)>> = pool
        .par_iter()
        .map(|s| {
            let g = parse(s).ok()?;
            Some((MolProfile::from_graph(&g, catalog)?, g.heavy_atom_count()))
        })
        .collect();
    let profiles: Vec<&MolProfile> = parsed.iter().flatten().map(|p| &p.0).collect();
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed::derive(seed_value, "targets", 0)));
    let mut targets = Vec::with_capacity(n_targets);
    for i in order {
        if targets.len() == n_targets {
            break;
        }
        let Some((profile, heavy)) = &parsed[i] else { continue };
        if *heavy > max_heavy {
            continue;
        }
        let ids = informative_groups(profile, &profiles, n_fg);
        let twins = profiles
            .iter()
            .filter(|p| (p.mw - profile.mw).abs() < 0.5 && ids.iter().all(|&id| p.has(id) == profile.has(id)))
            .count();
        if twins != 1 {
            continue;
        }
        let fg = ids.iter().map(|&id| (id, profile.has(id))).collect();
        let spec = ConstraintSpec::new((profile.mw * 1e4).round() / 1e4, fg, catalog)?;
        targets.push(SyntheticTarget { smiles: pool[i].clone(), spec });
    }
    if targets.len() < n_targets {
        return Err(EvaluationError::NotEnoughTargets { wanted: n_targets, found: targets.len() });
    }
    Ok(targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(catalog: &FgCatalog) -> ConstraintSpec {
        ConstraintSpec::new(94.11, vec![(1, true), (13, true), (2, false)], catalog).unwrap()
    }

    #[test]
    fn ranking_order_and_ties() {
        let cat = FgCatalog::builtin();
        let s = spec(&cat);
        let smiles: Vec<Option<String>> =
            ["CCO", "Oc1ccccc1", "c1ccccc1O", "C1C(", "CC"].iter().map(|x| Some(x.to_string())).collect();
        let r = rank_smiles(&smiles, &s, &cat, 10, 0);
        assert_eq!(r.top.len(), 5);
        assert_eq!(r.top[0].smiles, "Oc1ccccc1");
        assert_eq!(r.top[1].smiles, "c1ccccc1O");
        assert_eq!(r.top[0].total, r.top[1].total);
        assert_eq!(r.top[4].total, INVALID_SCORE);
        assert_eq!(r.validity, 0.8);
        assert!(r.top.windows(2).all(|w| w[0].total >= w[1].total));
    }

    #[test]
    fn similarity_attached() {
        let cat = FgCatalog::builtin();
        let r = rank_smiles(&[Some("Oc1ccccc1".into()), Some("CCCC".into())], &spec(&cat), &cat, 2, 0);
        let s = similarity_report(&r, "c1ccccc1O").unwrap();
        assert_eq!(s.top[0].similarity, Some(1.0));
        assert!(s.identified());
        assert!(s.top[1].similarity.unwrap() < 1.0);
        assert!(matches!(similarity_report(&r, "C1CC"), Err(EvaluationError::InvalidTarget(_))));
        let text = s.to_file_string(&cat);
        assert!(text.contains("identified: true"));
        assert_eq!(text.lines().last().unwrap().split(',').count(), 25);
    }

    #[test]
    fn targets_are_unique_in_pool() {
        let cat = FgCatalog::builtin();
        let pool: Vec<String> = ["CCO", "CCCO", "Oc1ccccc1", "CC(=O)C", "CC=O", "CCOC", "C1CCCCC1", "c1ccoc1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let t = synthetic_targets(&pool, &cat, 3, 4, 12, 1).unwrap();
        assert_eq!(t.len(), 3);
        for x in &t {
            assert_eq!(x.spec.fg.len(), 4);
            let p = MolProfile::from_smiles(&x.smiles, &cat).unwrap();
            assert_eq!(ComponentScores::of(Some(&p), &x.spec).total(), 5.0);
        }
        assert_eq!(t, synthetic_targets(&pool, &cat, 3, 4, 12, 1).unwrap());
        assert!(synthetic_targets(&pool, &cat, 100, 4, 12, 1).is_err());
    }
}
