#![allow(dead_code)]

use molcrl::descriptors::pattern::{Aromaticity, HydrogenQuery};
use molcrl::descriptors::QueryGraph;
use molcrl::neural::{backprop_nll, Direction, ModelDims, ModelParams, OptimizerState, RmsPropConfig};
use molcrl::smiles::{BondOrder, Element, MolGraph, TokenSequence, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bonds whose removal disconnects their endpoints are not ring bonds.
fn ring_bonds(g: &MolGraph) -> Vec<bool> {
    (0..g.bonds().len())
        .map(|skip| {
            let (start, goal) = (g.bonds()[skip].a, g.bonds()[skip].b);
            let mut seen = vec![false; g.atom_count()];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(x) = stack.pop() {
                for (i, b) in g.bonds().iter().enumerate() {
                    if i == skip || (b.a != x && b.b != x) {
                        continue;
                    }
                    let y = if b.a == x { b.b } else { b.a };
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            seen[goal]
        })
        .collect()
}

fn bond_index(g: &MolGraph, x: usize, y: usize) -> Option<usize> {
    g.bonds().iter().position(|b| (b.a == x && b.b == y) || (b.a == y && b.b == x))
}

/// Exhaustive substructure search: every injective assignment of query atoms
/// to graph atoms, checked against every query atom and bond.
pub fn brute_force_match(g: &MolGraph, q: &QueryGraph) -> bool {
    if q.atoms.is_empty() || g.atom_count() < q.atoms.len() {
        return false;
    }
    let ring = ring_bonds(g);
    let atom_in_ring = |a: usize| g.bonds().iter().enumerate().any(|(i, b)| ring[i] && (b.a == a || b.b == a));
    let h_count = |a: usize| {
        let atom = &g.atoms()[a];
        let nodes = g
            .bonds()
            .iter()
            .filter(|b| (b.a == a && g.atoms()[b.b].element == Element::H) || (b.b == a && g.atoms()[b.a].element == Element::H))
            .count();
        atom.explicit_h as usize + atom.implicit_h as usize + nodes
    };
    let heavy_deg = |a: usize| {
        g.bonds()
            .iter()
            .filter(|b| (b.a == a && g.atoms()[b.b].element != Element::H) || (b.b == a && g.atoms()[b.a].element != Element::H))
            .count()
    };
    let atom_ok = |qi: usize, a: usize| {
        let aq = &q.atoms[qi];
        let atom = &g.atoms()[a];
        aq.element.is_none_or(|e| e == atom.element)
            && match aq.aromaticity {
                Aromaticity::Aliphatic => !atom.aromatic,
                Aromaticity::Aromatic => atom.aromatic,
                Aromaticity::Either => true,
            }
            && match aq.hydrogens {
                Some(HydrogenQuery::Exactly(n)) => h_count(a) == n as usize,
                Some(HydrogenQuery::AtLeastOne) => h_count(a) > 0,
                None => true,
            }
            && aq.heavy_degree.is_none_or(|d| heavy_deg(a) == d as usize)
            && aq.in_ring.is_none_or(|r| atom_in_ring(a) == r)
    };
    let bonds_ok = |map: &[usize]| {
        q.bonds.iter().all(|qb| {
            let Some(i) = bond_index(g, map[qb.a], map[qb.b]) else { return false };
            let order = g.bonds()[i].order;
            use molcrl::descriptors::pattern::BondQuery::*;
            match qb.query {
                Exactly(o) => order == o,
                SingleOrAromatic => matches!(order, BondOrder::Single | BondOrder::Aromatic),
                Any => true,
                Ring => ring[i],
            }
        })
    };
    fn rec(
        depth: usize,
        n_query: usize,
        n_atoms: usize,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        atom_ok: &dyn Fn(usize, usize) -> bool,
        bonds_ok: &dyn Fn(&[usize]) -> bool,
    ) -> bool {
        if depth == n_query {
            return bonds_ok(map);
        }
        for a in 0..n_atoms {
            if used[a] || !atom_ok(depth, a) {
                continue;
            }
            used[a] = true;
            map.push(a);
            let found = rec(depth + 1, n_query, n_atoms, map, used, atom_ok, bonds_ok);
            map.pop();
            used[a] = false;
            if found {
                return true;
            }
        }
        false
    }
    rec(0, q.atoms.len(), g.atom_count(), &mut Vec::new(), &mut vec![false; g.atom_count()], &atom_ok, &bonds_ok)
}

pub const Q: usize = 9;

pub fn toy_vocab() -> Vocabulary {
    let tokens = ["<pad>", "G", "E", "a", "b", "c", "d", "f", "h", "Q"];
    Vocabulary::from_tokens(tokens.iter().map(|s| s.to_string()).collect()).unwrap()
}

/// Random strings over `a..h`, about a quarter containing one `Q`.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<TokenSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(3..9);
            let with_q = rng.random_bool(0.25);
            let pos = rng.random_range(0..len);
            let mut ids = vec![1];
            for i in 0..len {
                ids.push(if with_q && i == pos { Q } else { rng.random_range(3..9) });
            }
            ids.push(2);
            TokenSequence::from_logical(&ids).unwrap()
        })
        .collect()
}

/// Small GRU fit to [`toy_corpus`].
pub fn toy_prior() -> ModelParams {
    let corpus = toy_corpus(256, 5);
    let dims = ModelDims { vocab_size: 10, embed_dim: 8, hidden_dim: 32, n_layers: 1 };
    let mut prior = ModelParams::init(dims, 1);
    let mut opt = OptimizerState::new(&prior, RmsPropConfig { learning_rate: 1e-2, ..Default::default() });
    for _ in 0..300 {
        let (g, _) = backprop_nll(&prior, &corpus).unwrap();
        opt.update(&mut prior, &g, Direction::Descent).unwrap();
    }
    prior
}

pub fn contains_q(c: &molcrl::rl::Candidate) -> f64 {
    if c.seq.logical().contains(&Q) {
        1.0
    } else {
        -1.0
    }
}

/// Briefly trained SMILES model over the first 400 corpus molecules.
pub fn small_smiles_prior() -> molcrl::neural::Checkpoint {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus.smi")).unwrap();
    let head: String = text.lines().take(401).map(|l| format!("{l}\n")).collect();
    let (corpus, _) = molcrl::training::ingest_str(&head, None).unwrap();
    let config = molcrl::training::PriorConfig {
        dims_embed: 8,
        dims_hidden: 24,
        batch_size: 32,
        epochs: 4,
        validity_samples: 0,
        optimizer: RmsPropConfig { learning_rate: 1e-2, ..Default::default() },
        seed: 1,
        ..Default::default()
    };
    molcrl::training::train_prior(&corpus, &config, |_| {}).unwrap().checkpoint
}
