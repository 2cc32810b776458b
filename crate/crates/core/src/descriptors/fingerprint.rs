//! Hashed linear-path fingerprints and Tanimoto similarity.

use thiserror::Error;

use crate::smiles::MolGraph;

pub const FINGERPRINT_BITS: usize = 2048;
/// Longest path, in bonds. Single atoms (zero bonds) are included.
pub const MAX_PATH_BONDS: usize = 7;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FingerprintError {
    #[error("fingerprint widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
    max_path: usize,
}

impl Fingerprint {
    pub fn new(width: usize, max_path: usize) -> Self {
        Fingerprint { words: vec![0; width.div_ceil(64)], width, max_path }
    }

    pub fn from_bits(width: usize, bits: &[usize]) -> Self {
        let mut fp = Self::new(width, 0);
        for &b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn set(&mut self, bit: usize) {
        let bit = bit % self.width;
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn max_path(&self) -> usize {
        self.max_path
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn set_bits(&self) -> Vec<usize> {
        (0..self.width).filter(|&b| self.get(b)).collect()
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Bit index a canonical path string folds to.
pub fn path_bit(path: &str, width: usize) -> usize {
    (fnv1a(path.as_bytes()) % width as u64) as usize
}

fn atom_label(graph: &MolGraph, atom: usize) -> String {
    let a = &graph.atoms()[atom];
    let sym = a.element.symbol();
    if a.aromatic {
        sym.to_lowercase()
    } else {
        sym.to_string()
    }
}

/// Enumerate all simple paths of up to [`MAX_PATH_BONDS`] bonds and hash the
/// orientation-independent string of each one into a [`FINGERPRINT_BITS`]-bit vector.
pub fn fingerprint(graph: &MolGraph) -> Fingerprint {
    let mut fp = Fingerprint::new(FINGERPRINT_BITS, MAX_PATH_BONDS);
    for path in canonical_paths(graph) {
        fp.set(path_bit(&path, FINGERPRINT_BITS));
    }
    fp
}

/// The canonical strings of every simple path (both directions collapse to the
/// lexicographically smaller spelling). May contain duplicates.
pub fn canonical_paths(graph: &MolGraph) -> Vec<String> {
    let labels: Vec<String> = (0..graph.atom_count()).map(|i| atom_label(graph, i)).collect();
    let mut out = Vec::new();
    let mut atoms = Vec::with_capacity(MAX_PATH_BONDS + 1);
    let mut bonds = Vec::with_capacity(MAX_PATH_BONDS);
    let mut on_path = vec![false; graph.atom_count()];
    for start in 0..graph.atom_count() {
        atoms.push(start);
        on_path[start] = true;
        walk(graph, &labels, &mut atoms, &mut bonds, &mut on_path, &mut out);
        on_path[start] = false;
        atoms.pop();
    }
    out
}

fn walk(
    graph: &MolGraph,
    labels: &[String],
    atoms: &mut Vec<usize>,
    bonds: &mut Vec<char>,
    on_path: &mut [bool],
    out: &mut Vec<String>,
) {
    out.push(spell(labels, atoms, bonds));
    if bonds.len() == MAX_PATH_BONDS {
        return;
    }
    let last = *atoms.last().unwrap();
    for &(next, b) in graph.neighbors(last) {
        if on_path[next] {
            continue;
        }
        on_path[next] = true;
        atoms.push(next);
        bonds.push(graph.bonds()[b].order.symbol());
        walk(graph, labels, atoms, bonds, on_path, out);
        bonds.pop();
        atoms.pop();
        on_path[next] = false;
    }
}

fn spell(labels: &[String], atoms: &[usize], bonds: &[char]) -> String {
    let build = |rev: bool| {
        let mut s = String::new();
        let n = atoms.len();
        for k in 0..n {
            let i = if rev { n - 1 - k } else { k };
            s.push_str(&labels[atoms[i]]);
            if k + 1 < n {
                let bi = if rev { n - 2 - k } else { k };
                s.push(bonds[bi]);
            }
        }
        s
    };
    let fwd = build(false);
    let rev = build(true);
    fwd.min(rev)
}

/// |a ∧ b| / |a ∨ b|, or 1.0 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.width != b.width {
        return Err(FingerprintError::WidthMismatch(a.width, b.width));
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    fn fp(s: &str) -> Fingerprint {
        fingerprint(&parse(s).unwrap())
    }

    #[test]
    fn single_atom_path() {
        let f = fp("C");
        assert_eq!(f.set_bits(), vec![path_bit("C", FINGERPRINT_BITS)]);
    }

    #[test]
    fn path_sets_differ() {
        assert_ne!(fp("CC"), fp("CCC"));
        assert_eq!(fp("CCO"), fp("OCC"));
        let paths: std::collections::BTreeSet<String> = canonical_paths(&parse("CCO").unwrap()).into_iter().collect();
        let expect: std::collections::BTreeSet<String> =
            ["C", "O", "C-C", "C-O", "C-C-O"].iter().map(|s| s.to_string()).collect();
        assert_eq!(paths, expect);
    }

    #[test]
    fn tanimoto_definition() {
        let a = Fingerprint::from_bits(2048, &[1, 2]);
        let b = Fingerprint::from_bits(2048, &[1, 2, 3, 4]);
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);
        let c = Fingerprint::from_bits(2048, &[7, 9]);
        assert_eq!(tanimoto(&a, &c).unwrap(), 0.0);
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        let z = Fingerprint::new(2048, 7);
        assert_eq!(tanimoto(&z, &z).unwrap(), 1.0);
        let narrow = Fingerprint::new(1024, 7);
        assert_eq!(tanimoto(&a, &narrow), Err(FingerprintError::WidthMismatch(2048, 1024)));
    }

    #[test]
    fn isomers_are_similar_but_distinct() {
        let s = tanimoto(&fp("CCCCO"), &fp("CC(C)CO")).unwrap();
        assert!(s > 0.0 && s < 1.0, "{s}");
    }
}
