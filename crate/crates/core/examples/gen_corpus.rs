//! Regenerates `data/corpus.smi`: small random C/H/O molecules built from
//! chains, carbonyls, unsaturations and a handful of ring scaffolds.
//!
//! cargo run --release --example gen_corpus -- [count] [seed] > data/corpus.smi

use std::collections::HashSet;

use molcrl::descriptors::molecular_weight;
use molcrl::smiles::parse;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct RingAtom {
    symbol: &'static str,
    /// Bond written before this atom (empty for single/aromatic).
    bond: &'static str,
    fixed: &'static str,
    attachable: bool,
}

const fn ra(symbol: &'static str, bond: &'static str, fixed: &'static str, attachable: bool) -> RingAtom {
    RingAtom { symbol, bond, fixed, attachable }
}

const BENZENE: &[RingAtom] = &[
    ra("c", "", "", true),
    ra("c", "", "", true),
    ra("c", "", "", true),
    ra("c", "", "", true),
    ra("c", "", "", true),
    ra("c", "", "", true),
];
const FURAN: &[RingAtom] =
    &[ra("c", "", "", true), ra("c", "", "", true), ra("c", "", "", true), ra("c", "", "", true), ra("o", "", "", false)];
const CYCLOHEXANE: &[RingAtom] = &[
    ra("C", "", "", true),
    ra("C", "", "", true),
    ra("C", "", "", true),
    ra("C", "", "", true),
    ra("C", "", "", true),
    ra("C", "", "", true),
];
const CYCLOPENTANE: &[RingAtom] =
    &[ra("C", "", "", true), ra("C", "", "", true), ra("C", "", "", true), ra("C", "", "", true), ra("C", "", "", true)];
const CYCLOHEXENE: &[RingAtom] = &[
    ra("C", "", "", true),
    ra("C", "=", "", true),
    ra("C", "", "", true),
    ra("C", "", "", true),
    ra("C", "", "", true),
    ra("C", "", "", true),
];
const OXOLANE: &[RingAtom] =
    &[ra("C", "", "", true), ra("C", "", "", true), ra("C", "", "", true), ra("O", "", "", false), ra("C", "", "", true)];
const OXANE: &[RingAtom] = &[
    ra("C", "", "", true),
    ra("C", "", "", true),
    ra("O", "", "", false),
    ra("C", "", "", true),
    ra("C", "", "", true),
    ra("C", "", "", true),
];
const DIOXOLANE: &[RingAtom] =
    &[ra("C", "", "", true), ra("O", "", "", false), ra("C", "", "", true), ra("C", "", "", true), ra("O", "", "", false)];
const EPOXIDE: &[RingAtom] = &[ra("C", "", "", true), ra("O", "", "", false), ra("C", "", "", true)];
const LACTONE: &[RingAtom] = &[
    ra("C", "", "", true),
    ra("C", "", "", true),
    ra("C", "", "(=O)", false),
    ra("O", "", "", false),
    ra("C", "", "", true),
];
const CYCLOPENTANONE: &[RingAtom] =
    &[ra("C", "", "", true), ra("C", "", "", true), ra("C", "", "(=O)", false), ra("C", "", "", true), ra("C", "", "", true)];

const RINGS: &[(&[RingAtom], u32)] = &[
    (BENZENE, 30),
    (FURAN, 10),
    (CYCLOHEXANE, 8),
    (CYCLOPENTANE, 5),
    (CYCLOHEXENE, 4),
    (OXOLANE, 5),
    (OXANE, 3),
    (DIOXOLANE, 3),
    (EPOXIDE, 3),
    (LACTONE, 3),
    (CYCLOPENTANONE, 3),
];

struct Gen {
    rng: ChaCha8Rng,
    budget: i32,
    open_rings: u32,
}

impl Gen {
    fn pick_ring(&mut self) -> &'static [RingAtom] {
        let total: u32 = RINGS.iter().map(|r| r.1).sum();
        let mut x = self.rng.random_range(0..total);
        for (ring, w) in RINGS {
            if x < *w {
                return ring;
            }
            x -= w;
        }
        unreachable!()
    }

    /// A substituent joined to its parent by a bond of order `bond_in`,
    /// written without the bond symbol. `parent_o` forbids O–O bonds.
    fn sub(&mut self, bond_in: u8, parent_o: bool, depth: u32) -> String {
        if bond_in == 1 && depth < 3 && self.open_rings < 2 && self.budget >= 6 && self.rng.random_bool(0.12) {
            return self.ring(depth);
        }
        let oxygen = !parent_o && bond_in == 1 && self.rng.random_bool(0.22);
        self.budget -= 1;
        if oxygen {
            // ether or alcohol
            if self.budget > 0 && self.rng.random_bool(0.5) {
                let child = self.sub_carbon_only(depth + 1);
                return format!("O{child}");
            }
            return "O".into();
        }
        self.carbon(bond_in, parent_o, depth)
    }

    fn sub_carbon_only(&mut self, depth: u32) -> String {
        if depth < 3 && self.open_rings < 2 && self.budget >= 6 && self.rng.random_bool(0.15) {
            return self.ring(depth);
        }
        self.budget -= 1;
        self.carbon(1, true, depth)
    }

    fn carbon(&mut self, bond_in: u8, _parent_o: bool, depth: u32) -> String {
        let mut rem = 4 - bond_in as i32;
        let mut children: Vec<String> = Vec::new();
        // carbonyl
        if rem >= 2 && bond_in == 1 && self.rng.random_bool(0.18) {
            self.budget -= 1;
            children.push("=O".into());
            rem -= 2;
        }
        let max_children = rem.min(if children.is_empty() { 3 } else { 2 });
        let wanted = match self.rng.random_range(0..100) {
            0..=27 => 0,
            28..=85 => 1,
            86..=96 => 2,
            _ => 3,
        }
        .min(max_children);
        for _ in 0..wanted {
            if self.budget <= 0 || rem <= 0 {
                break;
            }
            let order = if rem >= 3 && bond_in == 1 && self.rng.random_bool(0.04) {
                3
            } else if rem >= 2 && self.rng.random_bool(0.10) {
                2
            } else {
                1
            };
            rem -= order as i32;
            let body = if order == 1 {
                self.sub(1, false, depth + 1)
            } else {
                self.budget -= 1;
                self.carbon(order, false, depth + 1)
            };
            let sym = match order {
                2 => "=",
                3 => "#",
                _ => "",
            };
            children.push(format!("{sym}{body}"));
        }
        let mut out = String::from("C");
        let n = children.len();
        for (i, c) in children.into_iter().enumerate() {
            if i + 1 < n {
                out.push_str(&format!("({c})"));
            } else {
                out.push_str(&c);
            }
        }
        out
    }

    fn ring(&mut self, depth: u32) -> String {
        let ring = self.pick_ring();
        self.budget -= ring.len() as i32;
        self.open_rings += 1;
        let digit = self.open_rings;
        let mut out = String::new();
        let n = ring.len();
        let mut trailing = None;
        for (i, atom) in ring.iter().enumerate() {
            out.push_str(atom.bond);
            out.push_str(atom.symbol);
            if i == 0 {
                out.push_str(&digit.to_string());
            }
            out.push_str(atom.fixed);
            if i > 0 && i + 1 < n && atom.attachable && self.budget > 0 && self.rng.random_bool(0.25) {
                let s = self.sub(1, false, depth + 1);
                out.push_str(&format!("({s})"));
            }
            if i + 1 == n {
                out.push_str(&digit.to_string());
                self.open_rings -= 1;
                if atom.attachable && self.budget > 0 && self.rng.random_bool(0.3) {
                    trailing = Some(self.sub(1, false, depth + 1));
                }
            }
        }
        if let Some(t) = trailing {
            out.push_str(&t);
        }
        out
    }

    fn molecule(&mut self) -> String {
        self.budget = self.rng.random_range(3..=13);
        self.open_rings = 0;
        if self.rng.random_bool(0.5) {
            self.ring(0)
        } else {
            self.sub(1, false, 0)
        }
    }
}

fn main() {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(10_000, |a| a.parse().expect("count"));
    let seed: u64 = args.next().map_or(2024, |a| a.parse().expect("seed"));
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), budget: 0, open_rings: 0 };
    let mut seen = HashSet::new();
    println!("# {count} generated C/H/O molecules, MW < 200 (seed {seed})");
    let mut attempts = 0usize;
    while seen.len() < count {
        attempts += 1;
        assert!(attempts < count * 100, "generator stalled");
        let s = g.molecule();
        let Ok(graph) = parse(&s) else {
            eprintln!("generator produced invalid SMILES: {s}");
            continue;
        };
        if graph.heavy_atom_count() < 3 || !molecular_weight(&graph).is_ok_and(|mw| mw < 200.0) {
            continue;
        }
        if seen.insert(s.clone()) {
            println!("{s}");
        }
    }
}
