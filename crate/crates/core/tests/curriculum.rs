mod common;

use molcrl::curriculum::*;
use molcrl::descriptors::FgCatalog;
use molcrl::rl::{Candidate, ComponentScores, ConstraintSpec, MolProfile, RlConfig};
use molcrl::smiles::TokenSequence;

fn spec(cat: &FgCatalog) -> ConstraintSpec {
    ConstraintSpec::new(120.0, vec![(1, true), (4, false), (10, true), (18, true), (3, false), (20, false)], cat).unwrap()
}

fn fake(present_ids: &[u8]) -> Candidate {
    let mut present = vec![false; 20];
    for &id in present_ids {
        present[id as usize - 1] = true;
    }
    Candidate { seq: TokenSequence::from_logical(&[1, 2]).unwrap(), smiles: None, profile: Some(MolProfile { mw: 120.0, present }) }
}

fn quick_plan(mut plan: PhasePlan) -> PhasePlan {
    plan.budget = 3;
    plan.patience = 50;
    plan.seed = 4;
    plan.rl = RlConfig { batch_size: 16, kl_weight: 1.0, ..Default::default() };
    plan
}

#[test]
fn eighty_percent_satisfaction_scores_point_six() {
    let cat = FgCatalog::builtin();
    let s = ConstraintSpec::new(100.0, vec![(1, true)], &cat).unwrap();
    let mut cands: Vec<Candidate> = (0..8).map(|_| fake(&[1])).collect();
    cands.extend((0..2).map(|_| fake(&[])));
    let d = mean_group_scores(&cands, &s)[0];
    assert!((d - 0.6).abs() < 1e-12);
    let report = DifficultyReport { ids: vec![1], d: vec![d], n_samples: 10 };
    assert!((report.p()[0] - 0.8).abs() < 1e-12);
}

#[test]
fn quarter_satisfaction_is_weak() {
    let cat = FgCatalog::builtin();
    let s = ConstraintSpec::new(100.0, vec![(1, true), (2, false)], &cat).unwrap();
    let mut cands: Vec<Candidate> = (0..1).map(|_| fake(&[1])).collect();
    cands.extend((0..3).map(|_| fake(&[])));
    let r = weak_report(&cands, &s, 0.5);
    assert_eq!(r.weak, vec![1]);
    assert!((r.q_of(1).unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(r.q_of(2), Some(1.0));
}

#[test]
fn refinement_upweights_weak_members() {
    let fg: Vec<(u8, f64)> = (1..=20).map(|i| (i, 1.0)).collect();
    let mut low = ComponentScores { mw: 1.0, fg: fg.clone() };
    low.fg[0].1 = -1.0;
    let high = ComponentScores { mw: 1.0, fg };
    let refined_slope = (refined_score(&high, &[1]) - refined_score(&low, &[1])) / 2.0;
    assert!((refined_slope - 1.0 / 3.0).abs() < 1e-12);
    let baseline_slope = (high.total() - low.total()) / 21.0 / 2.0;
    assert!((baseline_slope - 1.0 / 21.0).abs() < 1e-12);
    // inside the equal-weight fg mean of a beta = 0.5 phase score a member weighs 1/40
    let bins = vec![(1..=20).collect::<Vec<u8>>()];
    let phase_slope = (phase_score(&high, &bins, 1, 0.5, 0.5).unwrap() - phase_score(&low, &bins, 1, 0.5, 0.5).unwrap()) / 2.0;
    assert!((phase_slope - 1.0 / 40.0).abs() < 1e-12);
    assert!(refined_slope > baseline_slope && refined_slope > phase_slope);
    let weak_bad = ComponentScores { mw: 1.0, fg: vec![(1, -1.0), (2, 1.0)] };
    assert!((refined_score(&weak_bad, &[1]) - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn empty_weak_set_rejected() {
    let cat = FgCatalog::builtin();
    let s = spec(&cat);
    assert!(matches!(refined_constraint_fn(&s, &[]), Err(CurriculumError::EmptyWeakSet)));
    assert!(refined_constraint_fn(&s, &[1]).is_ok());
}

#[test]
fn constraint_fns_match_pure_scores() {
    let cat = FgCatalog::builtin();
    let s = spec(&cat);
    let bins = vec![vec![4, 3], vec![20, 18], vec![1, 10]];
    let cands: Vec<Candidate> =
        ["Cc1ccccc1C=C", "CCOCC", "CC(=O)CC=C", "C1CCCC1"].iter().map(|x| Candidate {
            seq: TokenSequence::from_logical(&[1, 2]).unwrap(),
            smiles: Some(x.to_string()),
            profile: MolProfile::from_smiles(x, &cat),
        }).collect();
    for k in 1..=3 {
        let f = phase_constraint_fn(&bins, k, 0.5, 0.5, &s).unwrap();
        for c in &cands {
            let comp = ComponentScores::of(c.profile.as_ref(), &s);
            assert_eq!(f(c), phase_score(&comp, &bins, k, 0.5, 0.5).unwrap());
            assert!((-1.0..=1.0).contains(&f(c)));
        }
    }
    assert!(matches!(phase_constraint_fn(&bins, 4, 0.5, 0.5, &s), Err(CurriculumError::PhaseOutOfRange { k: 4, n: 3 })));
}

#[test]
fn zero_budget_is_a_no_op() {
    let cat = FgCatalog::builtin();
    let prior = common::small_smiles_prior();
    let s = spec(&cat);
    let mut plan = quick_plan(PhasePlan::cf(2));
    plan.budget = 0;
    let report = difficulty_scores(&prior.params, &prior.vocab, &cat, &s, 50, 1);
    let plan = plan.with_bins(&report).unwrap();
    let out = run_curriculum(&plan, &prior.params, &prior.vocab, &cat, &s, |_| {}).unwrap();
    assert_eq!(out.agent, prior.params);
    assert!(out.events.is_empty());
}

fn loop_starts(events: &[PhaseEvent]) -> Vec<(usize, usize, Vec<u8>, Vec<u8>)> {
    events
        .iter()
        .filter_map(|e| match e {
            PhaseEvent::LoopStart { phase, pass, active_groups, new_groups } => {
                Some((*phase, *pass, active_groups.clone(), new_groups.clone()))
            }
            _ => None,
        })
        .collect()
}

#[test]
fn table_rows_show_in_phase_logs() {
    let cat = FgCatalog::builtin();
    let prior = common::small_smiles_prior();
    let s = spec(&cat);
    let report = difficulty_scores(&prior.params, &prior.vocab, &cat, &s, 100, 2);
    for (plan, phases, passes_per_phase, bins) in [
        (PhasePlan::baseline(), 1, 1, 1),
        (PhasePlan::rf(2), 2, 2, 1),
        (PhasePlan::cf(3), 3, 1, 3),
        (PhasePlan::crf(2), 2, 2, 2),
    ] {
        let plan = quick_plan(plan).with_bins(&report).unwrap();
        let out = run_curriculum(&plan, &prior.params, &prior.vocab, &cat, &s, |_| {}).unwrap();
        let starts = loop_starts(&out.events);
        assert_eq!(starts.len(), phases * passes_per_phase, "{}", plan.label());
        assert_eq!(out.boundaries.len(), phases);
        let syncs = out.events.iter().filter(|e| matches!(e, PhaseEvent::Sync { .. })).count();
        assert_eq!(syncs, phases);
        let added: Vec<Vec<u8>> = starts.iter().filter(|x| x.1 == 0).map(|x| x.3.clone()).filter(|a| !a.is_empty()).collect();
        assert_eq!(added.len(), bins, "{}", plan.label());
        assert_eq!(added.concat().len(), s.fg.len());
        for (phase, _, active, _) in &starts {
            let expected: Vec<u8> = plan.bins[..(*phase).min(plan.bins.len())].concat();
            if matches!(plan.method, Method::Cf | Method::Crf) {
                assert_eq!(active, &expected);
            } else {
                assert_eq!(active.len(), s.fg.len());
            }
        }
        assert_eq!(out.records().count(), phases * passes_per_phase * plan.budget);
        assert_eq!(&out.prior, out.boundaries.last().unwrap());
        assert_eq!(out.prior, out.agent);
    }
}

#[test]
fn single_bin_curriculum_equals_beta_weighted_baseline() {
    let cat = FgCatalog::builtin();
    let prior = common::small_smiles_prior();
    let s = spec(&cat);
    let report = difficulty_scores(&prior.params, &prior.vocab, &cat, &s, 100, 2);
    let cf = quick_plan(PhasePlan::cf(1)).with_bins(&report).unwrap();
    let mut base = quick_plan(PhasePlan::baseline()).with_bins(&report).unwrap();
    base.baseline_reward = BaselineReward::BetaWeighted;
    let a = run_curriculum(&cf, &prior.params, &prior.vocab, &cat, &s, |_| {}).unwrap();
    let b = run_curriculum(&base, &prior.params, &prior.vocab, &cat, &s, |_| {}).unwrap();
    assert_eq!(a.agent, b.agent);
    let ra: Vec<String> = a.records().map(PhaseRecord::to_line).collect();
    let rb: Vec<String> = b.records().map(PhaseRecord::to_line).collect();
    assert_eq!(ra, rb);
    let equal = run_curriculum(&quick_plan(PhasePlan::baseline()), &prior.params, &prior.vocab, &cat, &s, |_| {}).unwrap();
    assert_ne!(equal.agent, a.agent);
}

#[test]
fn phase_log_lines_have_all_columns() {
    let cat = FgCatalog::builtin();
    let prior = common::small_smiles_prior();
    let s = ConstraintSpec::full(120.0, &[false; 20], &cat).unwrap();
    let mut lines = Vec::new();
    let plan = quick_plan(PhasePlan::baseline());
    run_curriculum(&plan, &prior.params, &prior.vocab, &cat, &s, |e| lines.push(e.to_line())).unwrap();
    let header = PhaseRecord::header(&s);
    assert_eq!(header.split(',').count(), 4 + 21);
    let records: Vec<&String> = lines.iter().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|l| l.split(',').count() == 25));
}

#[test]
fn early_stopping_respects_patience() {
    let cat = FgCatalog::builtin();
    let prior = common::small_smiles_prior();
    let s = spec(&cat);
    let mut plan = quick_plan(PhasePlan::baseline());
    plan.budget = 40;
    plan.patience = 2;
    let out = run_curriculum(&plan, &prior.params, &prior.vocab, &cat, &s, |_| {}).unwrap();
    let end = out.events.iter().find_map(|e| match e {
        PhaseEvent::LoopEnd { iterations, early_stopped, .. } => Some((*iterations, *early_stopped)),
        _ => None,
    });
    let (iterations, stopped) = end.unwrap();
    assert!(stopped && iterations < 40);
}
