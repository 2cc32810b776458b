//! Molecular graph produced by the SMILES parser.

use super::elements::Element;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's valence sum. Aromatic bonds count as one;
    /// the extra pi electron is accounted for per atom.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    /// Parsed but ignored by every descriptor.
    pub isotope: Option<u16>,
    /// Hydrogens written inside a bracket atom.
    pub explicit_h: u8,
    /// Hydrogens inferred from default valences (organic-subset atoms only).
    pub implicit_h: u8,
    pub bracket: bool,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            aromatic: false,
            charge: 0,
            isotope: None,
            explicit_h: 0,
            implicit_h: 0,
            bracket: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Atoms, bonds and derived ring information for one (possibly disconnected) molecule.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Per atom: (neighbor, bond index), in bond insertion order.
    adjacency: Vec<Vec<(usize, usize)>>,
    /// Per bond: whether it lies on a cycle.
    ring_bonds: Vec<bool>,
}

impl MolGraph {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Assemble a graph and derive adjacency and ring membership.
    /// Hydrogen counts are taken as given.
    pub fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        let ring_bonds = find_ring_bonds(atoms.len(), &bonds, &adjacency);
        MolGraph { atoms, bonds, adjacency, ring_bonds }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a].iter().find(|(n, _)| *n == b).map(|&(_, i)| &self.bonds[i])
    }

    pub fn is_ring_bond(&self, bond: usize) -> bool {
        self.ring_bonds[bond]
    }

    pub fn in_ring(&self, atom: usize) -> bool {
        self.adjacency[atom].iter().any(|&(_, b)| self.ring_bonds[b])
    }

    pub fn ring_bond_count(&self) -> usize {
        self.ring_bonds.iter().filter(|&&r| r).count()
    }

    /// Sum of bond valence contributions at `atom`.
    pub fn bond_valence(&self, atom: usize) -> u8 {
        self.adjacency[atom].iter().map(|&(_, b)| self.bonds[b].order.valence()).sum()
    }

    /// Hydrogens attached to `atom`: explicit, implicit and hydrogen atoms present as nodes.
    pub fn total_h(&self, atom: usize) -> u8 {
        let a = &self.atoms[atom];
        let node_h = self.adjacency[atom]
            .iter()
            .filter(|&&(n, _)| self.atoms[n].element == Element::H)
            .count() as u8;
        a.explicit_h + a.implicit_h + node_h
    }

    /// Number of non-hydrogen neighbors.
    pub fn heavy_degree(&self, atom: usize) -> usize {
        self.adjacency[atom]
            .iter()
            .filter(|&&(n, _)| self.atoms[n].element != Element::H)
            .count()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element != Element::H).count()
    }

    /// Distinct elements present, including hydrogen when any atom carries H.
    pub fn element_set(&self) -> Vec<Element> {
        let mut out: Vec<Element> = self.atoms.iter().map(|a| a.element).collect();
        if self.atoms.iter().any(|a| a.explicit_h + a.implicit_h > 0) {
            out.push(Element::H);
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Bridges are the only non-ring bonds; everything else lies on a cycle.
fn find_ring_bonds(n: usize, bonds: &[Bond], adjacency: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let mut ring = vec![true; bonds.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // iterative DFS: (atom, parent bond, next neighbor slot)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (v, parent_bond, ref mut slot)) = stack.last_mut() {
            if *slot < adjacency[v].len() {
                let (w, b) = adjacency[v][*slot];
                *slot += 1;
                if b == parent_bond {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, b, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(u, _, _)) = stack.last() {
                    low[u] = low[u].min(low[v]);
                    if low[v] > disc[u] {
                        ring[parent_bond] = false;
                    }
                }
            }
        }
    }
    ring
}
