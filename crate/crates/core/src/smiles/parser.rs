//! SMILES reader.
//!
//! Supported grammar: organic-subset atoms (B C N O P S F Cl Br I), aromatic
//! `b c n o p s`, bracket atoms with isotope, chirality marks, H count, charge
//! and atom class, bonds `- = # : / \`, branches, ring closures `0-9` and `%nn`,
//! and `.` separated components. Stereo marks are accepted and ignored.
//!
//! A bond symbol may be written on either side of a ring closure (`C=1CC=1`,
//! `C=1CC1`, `C1CC=1`). When both sides carry a symbol they must agree.

use std::collections::BTreeMap;

use thiserror::Error;

use super::elements::{aromatic_symbol, organic_subset, Element};
use super::graph::{Atom, Bond, BondOrder, MolGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {position}: {reason}")]
    Syntax { position: usize, reason: String },
    #[error("valence violated at atom {0}")]
    Valence(usize),
    #[error("ring closure {0} never closed")]
    UnclosedRing(u32),
    #[error("unbalanced branch parentheses")]
    UnbalancedBranch,
    #[error("aromatic atom {0} is not part of an aromatic ring")]
    NonRingAromatic(usize),
}

fn syntax(position: usize, reason: impl Into<String>) -> ParseError {
    ParseError::Syntax { position, reason: reason.into() }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum BondSym {
    Order(BondOrder),
    /// `/` or `\`: single bond with ignored direction.
    Directional,
}

impl BondSym {
    fn order(self) -> BondOrder {
        match self {
            BondSym::Order(o) => o,
            BondSym::Directional => BondOrder::Single,
        }
    }
}

struct OpenRing {
    atom: usize,
    bond: Option<BondSym>,
    position: usize,
}

struct BranchFrame {
    anchor: usize,
    has_atom: bool,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Bonds made aromatic only because both ends are aromatic atoms.
    implicit_aromatic: Vec<usize>,
    prev: Option<usize>,
    pending: Option<(BondSym, usize)>,
    branches: Vec<BranchFrame>,
    rings: BTreeMap<u32, OpenRing>,
}

/// Parse a SMILES string into a validated molecular graph.
pub fn parse(text: &str) -> Result<MolGraph, ParseError> {
    if text.is_empty() {
        return Err(syntax(0, "empty SMILES"));
    }
    if let Some(p) = text.bytes().position(|b| !b.is_ascii_graphic()) {
        return Err(syntax(p, "non-printable or non-ASCII character"));
    }
    let mut parser = Parser {
        text: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        implicit_aromatic: Vec::new(),
        prev: None,
        pending: None,
        branches: Vec::new(),
        rings: BTreeMap::new(),
    };
    parser.run()?;
    let Parser { atoms, mut bonds, implicit_aromatic, .. } = parser;
    let mut graph = MolGraph::from_parts(atoms.clone(), bonds.clone());
    // an unmarked bond joining two aromatic rings (biphenyl) is single
    let demote: Vec<usize> = implicit_aromatic.into_iter().filter(|&b| !graph.is_ring_bond(b)).collect();
    if !demote.is_empty() {
        for b in demote {
            bonds[b].order = BondOrder::Single;
        }
        graph = MolGraph::from_parts(atoms, bonds);
    }
    assign_hydrogens(&mut graph)?;
    check_aromatic(&graph)?;
    Ok(graph)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.text.get(self.pos + offset).copied()
    }

    fn run(&mut self) -> Result<(), ParseError> {
        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    let anchor = self.prev.ok_or_else(|| syntax(self.pos, "branch without preceding atom"))?;
                    if self.pending.is_some() {
                        return Err(syntax(self.pos, "bond before branch"));
                    }
                    if let Some(top) = self.branches.last_mut() {
                        top.has_atom = true;
                    }
                    self.branches.push(BranchFrame { anchor, has_atom: false });
                    self.pos += 1;
                }
                b')' => {
                    let frame = self.branches.pop().ok_or(ParseError::UnbalancedBranch)?;
                    if !frame.has_atom {
                        return Err(syntax(self.pos, "empty branch"));
                    }
                    if let Some((_, p)) = self.pending {
                        return Err(syntax(p, "dangling bond"));
                    }
                    self.prev = Some(frame.anchor);
                    self.pos += 1;
                }
                b'.' => {
                    if let Some((_, p)) = self.pending {
                        return Err(syntax(p, "dangling bond"));
                    }
                    if !self.branches.is_empty() {
                        return Err(syntax(self.pos, "component separator inside branch"));
                    }
                    if self.prev.is_none() {
                        return Err(syntax(self.pos, "empty component"));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.pending.is_some() {
                        return Err(syntax(self.pos, "consecutive bond symbols"));
                    }
                    if self.prev.is_none() {
                        return Err(syntax(self.pos, "bond without preceding atom"));
                    }
                    let sym = match c {
                        b'-' => BondSym::Order(BondOrder::Single),
                        b'=' => BondSym::Order(BondOrder::Double),
                        b'#' => BondSym::Order(BondOrder::Triple),
                        b':' => BondSym::Order(BondOrder::Aromatic),
                        _ => BondSym::Directional,
                    };
                    self.pending = Some((sym, self.pos));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                _ => {
                    let start = self.pos;
                    let atom = self.atom()?;
                    self.add_atom(atom, start)?;
                }
            }
        }
        if let Some((_, p)) = self.pending {
            return Err(syntax(p, "dangling bond"));
        }
        if !self.branches.is_empty() {
            return Err(ParseError::UnbalancedBranch);
        }
        if let Some((&digit, _)) = self.rings.iter().min_by_key(|(_, r)| r.position) {
            return Err(ParseError::UnclosedRing(digit));
        }
        Ok(())
    }

    fn add_atom(&mut self, atom: Atom, position: usize) -> Result<(), ParseError> {
        let idx = self.atoms.len();
        let aromatic = atom.aromatic;
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = match self.pending.take() {
                Some((sym, _)) => sym.order(),
                None if aromatic && self.atoms[prev].aromatic => {
                    self.implicit_aromatic.push(self.bonds.len());
                    BondOrder::Aromatic
                }
                None => BondOrder::Single,
            };
            self.bonds.push(Bond { a: prev, b: idx, order });
        } else if self.pending.is_some() {
            return Err(syntax(position, "bond without preceding atom"));
        }
        if let Some(top) = self.branches.last_mut() {
            top.has_atom = true;
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<(), ParseError> {
        let start = self.pos;
        let digit = if self.peek() == Some(b'%') {
            let (a, b) = (self.peek_at(1), self.peek_at(2));
            match (a, b) {
                (Some(a), Some(b)) if a.is_ascii_digit() && b.is_ascii_digit() => {
                    self.pos += 3;
                    ((a - b'0') * 10 + (b - b'0')) as u32
                }
                _ => return Err(syntax(start, "'%' must be followed by two digits")),
            }
        } else {
            let d = self.peek().unwrap() - b'0';
            self.pos += 1;
            d as u32
        };
        let atom = self.prev.ok_or_else(|| syntax(start, "ring closure without preceding atom"))?;
        let bond = self.pending.take().map(|(s, _)| s);
        match self.rings.remove(&digit) {
            None => {
                self.rings.insert(digit, OpenRing { atom, bond, position: start });
            }
            Some(open) => {
                if open.atom == atom {
                    return Err(syntax(start, "ring closure to the same atom"));
                }
                if self.bonds.iter().any(|b| {
                    (b.a == open.atom && b.b == atom) || (b.a == atom && b.b == open.atom)
                }) {
                    return Err(syntax(start, "duplicate bond via ring closure"));
                }
                let order = match (open.bond, bond) {
                    (Some(x), Some(y)) if x.order() != y.order() => {
                        return Err(syntax(start, "conflicting ring-closure bond symbols"));
                    }
                    (Some(x), _) | (None, Some(x)) => x.order(),
                    (None, None) if self.atoms[open.atom].aromatic && self.atoms[atom].aromatic => {
                        BondOrder::Aromatic
                    }
                    (None, None) => BondOrder::Single,
                };
                self.bonds.push(Bond { a: open.atom, b: atom, order });
            }
        }
        Ok(())
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let start = self.pos;
        let c = self.peek().unwrap();
        match c {
            b'[' => self.bracket_atom(),
            b'*' => {
                self.pos += 1;
                Ok(Atom::new(Element::WILDCARD))
            }
            b'C' if self.peek_at(1) == Some(b'l') => {
                self.pos += 2;
                Ok(Atom::new(organic_subset("Cl").unwrap()))
            }
            b'B' if self.peek_at(1) == Some(b'r') => {
                self.pos += 2;
                Ok(Atom::new(organic_subset("Br").unwrap()))
            }
            _ => {
                let sym = (c as char).to_string();
                if let Some(e) = organic_subset(&sym) {
                    self.pos += 1;
                    Ok(Atom::new(e))
                } else if let Some(e) = aromatic_symbol(&sym) {
                    self.pos += 1;
                    let mut a = Atom::new(e);
                    a.aromatic = true;
                    Ok(a)
                } else {
                    Err(syntax(start, format!("unexpected character '{}'", c as char)))
                }
            }
        }
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.text[start..self.pos]).ok()?.parse().ok()
    }

    fn bracket_atom(&mut self) -> Result<Atom, ParseError> {
        let open = self.pos;
        self.pos += 1;
        let isotope = self.read_number();
        if isotope.is_some_and(|i| i > u16::MAX as u32) {
            return Err(syntax(open + 1, "isotope out of range"));
        }

        let sym_start = self.pos;
        let mut atom = match self.peek() {
            Some(b'*') => {
                self.pos += 1;
                Atom::new(Element::WILDCARD)
            }
            Some(c) if c.is_ascii_lowercase() => {
                let two = self.text.get(self.pos..self.pos + 2).and_then(|s| std::str::from_utf8(s).ok());
                let one = (c as char).to_string();
                let (e, len) = match two.and_then(aromatic_symbol) {
                    Some(e) => (e, 2),
                    None => (
                        aromatic_symbol(&one).ok_or_else(|| syntax(sym_start, "unknown aromatic symbol"))?,
                        1,
                    ),
                };
                self.pos += len;
                let mut a = Atom::new(e);
                a.aromatic = true;
                a
            }
            Some(c) if c.is_ascii_uppercase() => {
                let two = self.text.get(self.pos..self.pos + 2).and_then(|s| std::str::from_utf8(s).ok());
                let one = (c as char).to_string();
                let (e, len) = match two.and_then(|s| {
                    if s.as_bytes()[1].is_ascii_lowercase() { Element::from_symbol(s) } else { None }
                }) {
                    Some(e) => (e, 2),
                    None => (
                        Element::from_symbol(&one).ok_or_else(|| syntax(sym_start, "unknown element"))?,
                        1,
                    ),
                };
                self.pos += len;
                Atom::new(e)
            }
            _ => return Err(syntax(sym_start, "missing element symbol in bracket atom")),
        };
        atom.bracket = true;
        atom.isotope = isotope.map(|i| i as u16);

        // chirality
        while self.peek() == Some(b'@') {
            self.pos += 1;
        }
        for class in ["TH", "AL", "SP", "TB", "OH"] {
            if self.text[self.pos..].starts_with(class.as_bytes()) {
                self.pos += 2;
                self.read_number();
            }
        }

        if self.peek() == Some(b'H') {
            self.pos += 1;
            let n = self.read_number().unwrap_or(1);
            if n > 9 {
                return Err(syntax(self.pos, "hydrogen count out of range"));
            }
            atom.explicit_h = n as u8;
        }

        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let unit: i32 = if sign == b'+' { 1 } else { -1 };
            let mut magnitude = 1;
            if let Some(n) = self.read_number() {
                magnitude = n as i32;
            } else {
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    magnitude += 1;
                }
            }
            if magnitude > 15 {
                return Err(syntax(self.pos, "charge out of range"));
            }
            atom.charge = (unit * magnitude) as i8;
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.read_number().is_none() {
                return Err(syntax(self.pos, "atom class requires digits"));
            }
        }

        if self.peek() != Some(b']') {
            return Err(syntax(self.pos, "unterminated bracket atom"));
        }
        self.pos += 1;
        Ok(atom)
    }
}

/// Infer implicit hydrogens on organic-subset atoms and check every valence.
fn assign_hydrogens(graph: &mut MolGraph) -> Result<(), ParseError> {
    let counts: Vec<Result<u8, ParseError>> = (0..graph.atom_count())
        .map(|i| {
            let atom = &graph.atoms()[i];
            let bond_sum = graph.bond_valence(i);
            implicit_hydrogens(atom, bond_sum).ok_or(ParseError::Valence(i))
        })
        .collect();
    let mut atoms = graph.atoms().to_vec();
    for (atom, count) in atoms.iter_mut().zip(counts) {
        atom.implicit_h = count?;
    }
    *graph = MolGraph::from_parts(atoms, graph.bonds().to_vec());
    Ok(())
}

/// Implicit H count for `atom` given its bond valence sum, or `None` when the
/// valence is impossible for the element.
pub fn implicit_hydrogens(atom: &Atom, bond_sum: u8) -> Option<u8> {
    if atom.element.is_wildcard() {
        return Some(0);
    }
    let allowed = atom.element.allowed_valences(atom.charge);
    if atom.bracket {
        let total = bond_sum + atom.explicit_h;
        let ok = match &allowed {
            None => true,
            Some(vs) if atom.aromatic => vs.iter().any(|&v| total <= v),
            Some(vs) => vs.contains(&total),
        };
        return ok.then_some(0);
    }
    let vs = allowed?;
    if atom.aromatic {
        let v = *vs.first()?;
        if bond_sum > v {
            return None;
        }
        return Some(v.saturating_sub(bond_sum + 1));
    }
    vs.iter().find(|&&v| v >= bond_sum).map(|&v| v - bond_sum)
}

fn check_aromatic(graph: &MolGraph) -> Result<(), ParseError> {
    for (i, atom) in graph.atoms().iter().enumerate() {
        let aromatic_bonds: Vec<usize> = graph
            .neighbors(i)
            .iter()
            .filter(|&&(_, b)| graph.bonds()[b].order == BondOrder::Aromatic)
            .map(|&(_, b)| b)
            .collect();
        if aromatic_bonds.iter().any(|&b| !graph.is_ring_bond(b)) {
            return Err(ParseError::NonRingAromatic(i));
        }
        if atom.aromatic && aromatic_bonds.len() < 2 {
            return Err(ParseError::NonRingAromatic(i));
        }
        if !atom.aromatic && !aromatic_bonds.is_empty() {
            return Err(ParseError::NonRingAromatic(i));
        }
    }
    Ok(())
}
