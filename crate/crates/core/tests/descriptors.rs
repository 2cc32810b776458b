mod common;

use std::collections::HashSet;

use molcrl::descriptors::fingerprint::canonical_paths;
use molcrl::descriptors::{fingerprint, match_group, molecular_weight, tanimoto, FgCatalog, Fingerprint};
use molcrl::smiles::{parse, Element};
use molcrl::training::ingest;
use proptest::prelude::*;

fn corpus() -> Vec<String> {
    ingest(std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus.smi")), None).unwrap().0.smiles
}

fn formula_weight(s: &str) -> f64 {
    let g = parse(s).unwrap();
    let mut w = 0.0;
    for (i, a) in g.atoms().iter().enumerate() {
        w += match a.element {
            Element::C => 12.011,
            Element::O => 15.999,
            Element::H => 1.008,
            other => panic!("unexpected {other:?}"),
        };
        w += 1.008 * (a.explicit_h + a.implicit_h) as f64;
        let _ = i;
    }
    w
}

#[test]
fn reference_weights() {
    assert!((molecular_weight(&parse("C").unwrap()).unwrap() - 16.043).abs() < 1e-9);
    assert!((molecular_weight(&parse("O").unwrap()).unwrap() - 18.015).abs() < 1e-9);
    assert!((molecular_weight(&parse("c1ccccc1O").unwrap()).unwrap() - 94.113).abs() < 1e-9);
}

#[test]
fn corpus_weights_match_formula_sum() {
    for s in corpus().iter().take(2000) {
        let mw = molecular_weight(&parse(s).unwrap()).unwrap();
        assert!((mw - formula_weight(s)).abs() < 1e-9, "{s}");
        assert!(mw < 200.0);
    }
}

#[test]
fn matcher_agrees_with_brute_force() {
    let cat = FgCatalog::builtin();
    let mut hits = vec![0usize; 20];
    for s in corpus().iter().step_by(50).take(150) {
        let g = parse(s).unwrap();
        for p in cat.patterns() {
            let fast = match_group(&g, p);
            assert_eq!(fast, common::brute_force_match(&g, &p.query), "{s} vs {}", p.name);
            hits[p.id as usize - 1] += fast as usize;
        }
    }
    assert!(hits.iter().filter(|&&h| h > 0).count() >= 15, "{hits:?}");
}

#[test]
fn reference_matches() {
    let cat = FgCatalog::builtin();
    let benzene = parse("c1ccccc1").unwrap();
    assert!(match_group(&benzene, cat.get(1).unwrap()));
    assert!(!match_group(&parse("CCO").unwrap(), cat.get(2).unwrap()));
    assert!(match_group(&parse("CC=O").unwrap(), cat.get(2).unwrap()));
}

#[test]
fn single_atom_fingerprint() {
    let fp = fingerprint(&parse("C").unwrap());
    let paths: HashSet<String> = canonical_paths(&parse("C").unwrap()).into_iter().collect();
    assert_eq!(paths.len(), 1);
    assert_eq!(fp.count_ones(), 1);
    assert_ne!(fingerprint(&parse("CC").unwrap()), fingerprint(&parse("CCC").unwrap()));
}

#[test]
fn tanimoto_of_subset() {
    let a = Fingerprint::from_bits(64, &[1, 2]);
    let b = Fingerprint::from_bits(64, &[1, 2, 3, 4]);
    assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);
}

fn path_set_similarity(x: &str, y: &str) -> f64 {
    let a: HashSet<String> = canonical_paths(&parse(x).unwrap()).into_iter().collect();
    let b: HashSet<String> = canonical_paths(&parse(y).unwrap()).into_iter().collect();
    a.intersection(&b).count() as f64 / a.union(&b).count() as f64
}

#[test]
fn isomers_are_close_but_not_identical() {
    for (x, y) in [("CCCC", "CC(C)C"), ("CCCCO", "CC(C)CO"), ("CCOCC", "CCCOC")] {
        let s = tanimoto(&fingerprint(&parse(x).unwrap()), &fingerprint(&parse(y).unwrap())).unwrap();
        assert!(s > 0.0 && s < 1.0, "{x} {y} {s}");
        assert!((s - path_set_similarity(x, y)).abs() < 1e-12, "{x} {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn similarity_is_symmetric_and_reflexive(i in 0usize..10_000, j in 0usize..10_000) {
        thread_local!(static C: Vec<String> = corpus());
        let (x, y) = C.with(|c| (c[i % c.len()].clone(), c[j % c.len()].clone()));
        let fx = fingerprint(&parse(&x).unwrap());
        let fy = fingerprint(&parse(&y).unwrap());
        prop_assert_eq!(tanimoto(&fx, &fx).unwrap(), 1.0);
        prop_assert_eq!(tanimoto(&fx, &fy).unwrap(), tanimoto(&fy, &fx).unwrap());
    }
}
