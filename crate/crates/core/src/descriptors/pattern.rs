//! Query graphs for functional groups and the catalog file that defines them.
//!
//! The notation is documented at the top of `data/functional_groups.txt`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::smiles::elements::{aromatic_symbol, Element};
use crate::smiles::{BondOrder, MolGraph};

/// Largest pattern the matcher is expected to handle.
pub const MAX_PATTERN_ATOMS: usize = 8;

/// Number of entries in a functional-group catalog.
pub const CATALOG_SIZE: usize = 20;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("pattern syntax error at {position}: {reason}")]
    Syntax { position: usize, reason: String },
    #[error("pattern is not connected")]
    Disconnected,
    #[error("pattern has {0} atoms, more than the supported {MAX_PATTERN_ATOMS}")]
    TooLarge(usize),
    #[error("catalog line {line}: {reason}")]
    Catalog { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn syntax(position: usize, reason: impl Into<String>) -> PatternError {
    PatternError::Syntax { position, reason: reason.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aromaticity {
    Aliphatic,
    Aromatic,
    Either,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HydrogenQuery {
    Exactly(u8),
    AtLeastOne,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomQuery {
    /// `None` matches any element.
    pub element: Option<Element>,
    pub aromaticity: Aromaticity,
    pub hydrogens: Option<HydrogenQuery>,
    pub heavy_degree: Option<u8>,
    pub in_ring: Option<bool>,
}

impl AtomQuery {
    fn any() -> Self {
        AtomQuery { element: None, aromaticity: Aromaticity::Either, hydrogens: None, heavy_degree: None, in_ring: None }
    }

    pub fn matches(&self, graph: &MolGraph, atom: usize) -> bool {
        let a = &graph.atoms()[atom];
        if let Some(e) = self.element {
            if a.element != e {
                return false;
            }
        }
        match self.aromaticity {
            Aromaticity::Aliphatic if a.aromatic => return false,
            Aromaticity::Aromatic if !a.aromatic => return false,
            _ => {}
        }
        match self.hydrogens {
            Some(HydrogenQuery::Exactly(n)) if graph.total_h(atom) != n => return false,
            Some(HydrogenQuery::AtLeastOne) if graph.total_h(atom) == 0 => return false,
            _ => {}
        }
        if let Some(d) = self.heavy_degree {
            if graph.heavy_degree(atom) != d as usize {
                return false;
            }
        }
        if let Some(r) = self.in_ring {
            if graph.in_ring(atom) != r {
                return false;
            }
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BondQuery {
    Exactly(BondOrder),
    SingleOrAromatic,
    Any,
    Ring,
}

impl BondQuery {
    pub fn matches(&self, graph: &MolGraph, bond: usize) -> bool {
        let order = graph.bonds()[bond].order;
        match self {
            BondQuery::Exactly(o) => order == *o,
            BondQuery::SingleOrAromatic => matches!(order, BondOrder::Single | BondOrder::Aromatic),
            BondQuery::Any => true,
            BondQuery::Ring => graph.is_ring_bond(bond),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryBond {
    pub a: usize,
    pub b: usize,
    pub query: BondQuery,
}

/// A connected query graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryGraph {
    pub atoms: Vec<AtomQuery>,
    pub bonds: Vec<QueryBond>,
}

impl QueryGraph {
    pub fn bond_between(&self, a: usize, b: usize) -> Option<&QueryBond> {
        self.bonds.iter().find(|q| (q.a == a && q.b == b) || (q.a == b && q.b == a))
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.bonds.iter().filter(|q| q.a == atom || q.b == atom).count()
    }

    /// Parse the catalog pattern notation.
    pub fn parse(expr: &str) -> Result<Self, PatternError> {
        let q = PatternParser::new(expr).run()?;
        if q.atoms.len() > MAX_PATTERN_ATOMS {
            return Err(PatternError::TooLarge(q.atoms.len()));
        }
        if !q.is_connected() {
            return Err(PatternError::Disconnected);
        }
        Ok(q)
    }

    fn is_connected(&self) -> bool {
        if self.atoms.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.atoms.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for b in &self.bonds {
                let w = if b.a == v { b.b } else if b.b == v { b.a } else { continue };
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}

struct PatternParser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<AtomQuery>,
    bonds: Vec<QueryBond>,
    prev: Option<usize>,
    pending: Option<BondQuery>,
    branches: Vec<usize>,
    rings: BTreeMap<u32, (usize, Option<BondQuery>)>,
}

impl<'a> PatternParser<'a> {
    fn new(expr: &'a str) -> Self {
        PatternParser {
            text: expr.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            prev: None,
            pending: None,
            branches: Vec::new(),
            rings: BTreeMap::new(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn run(mut self) -> Result<QueryGraph, PatternError> {
        while let Some(c) = self.peek() {
            let here = self.pos;
            match c {
                b'(' => {
                    let anchor = self.prev.ok_or_else(|| syntax(here, "branch without atom"))?;
                    self.branches.push(anchor);
                    self.pos += 1;
                }
                b')' => {
                    self.prev = Some(self.branches.pop().ok_or_else(|| syntax(here, "unbalanced ')'"))?);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'~' | b'@' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(syntax(here, "misplaced bond"));
                    }
                    self.pending = Some(match c {
                        b'-' => BondQuery::Exactly(BondOrder::Single),
                        b'=' => BondQuery::Exactly(BondOrder::Double),
                        b'#' => BondQuery::Exactly(BondOrder::Triple),
                        b':' => BondQuery::Exactly(BondOrder::Aromatic),
                        b'~' => BondQuery::Any,
                        _ => BondQuery::Ring,
                    });
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let digit = if c == b'%' {
                        let d = self.text.get(self.pos + 1..self.pos + 3).filter(|d| d.iter().all(u8::is_ascii_digit));
                        let d = d.ok_or_else(|| syntax(here, "'%' needs two digits"))?;
                        self.pos += 3;
                        ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32
                    } else {
                        self.pos += 1;
                        (c - b'0') as u32
                    };
                    let atom = self.prev.ok_or_else(|| syntax(here, "ring closure without atom"))?;
                    let bond = self.pending.take();
                    match self.rings.remove(&digit) {
                        None => {
                            self.rings.insert(digit, (atom, bond));
                        }
                        Some((other, open_bond)) => {
                            if other == atom {
                                return Err(syntax(here, "ring closure to same atom"));
                            }
                            let query = bond.or(open_bond).unwrap_or(BondQuery::SingleOrAromatic);
                            self.bonds.push(QueryBond { a: other, b: atom, query });
                        }
                    }
                }
                _ => {
                    let atom = self.atom()?;
                    let idx = self.atoms.len();
                    self.atoms.push(atom);
                    if let Some(prev) = self.prev {
                        let query = self.pending.take().unwrap_or(BondQuery::SingleOrAromatic);
                        self.bonds.push(QueryBond { a: prev, b: idx, query });
                    } else if self.pending.is_some() {
                        return Err(syntax(here, "bond without atom"));
                    }
                    self.prev = Some(idx);
                }
            }
        }
        if self.pending.is_some() {
            return Err(syntax(self.pos, "dangling bond"));
        }
        if !self.branches.is_empty() {
            return Err(syntax(self.pos, "unclosed branch"));
        }
        if let Some(d) = self.rings.keys().next() {
            return Err(syntax(self.pos, format!("ring {d} not closed")));
        }
        Ok(QueryGraph { atoms: self.atoms, bonds: self.bonds })
    }

    fn atom(&mut self) -> Result<AtomQuery, PatternError> {
        let here = self.pos;
        let c = self.peek().unwrap();
        if c == b'[' {
            return self.bracket();
        }
        self.pos += 1;
        if c == b'*' {
            return Ok(AtomQuery::any());
        }
        let mut sym = (c as char).to_string();
        if (c == b'C' && self.peek() == Some(b'l')) || (c == b'B' && self.peek() == Some(b'r')) {
            sym.push(self.peek().unwrap() as char);
            self.pos += 1;
        }
        element_query(&sym).ok_or_else(|| syntax(here, format!("unknown atom '{sym}'")))
    }

    fn bracket(&mut self) -> Result<AtomQuery, PatternError> {
        self.pos += 1;
        let here = self.pos;
        let mut q = match self.peek() {
            Some(b'*') => {
                self.pos += 1;
                AtomQuery::any()
            }
            Some(b'#') => {
                self.pos += 1;
                let n = self.number().ok_or_else(|| syntax(here, "'#' needs an atomic number"))?;
                let e = u8::try_from(n).ok().and_then(Element::from_number);
                let e = e.ok_or_else(|| syntax(here, "unknown atomic number"))?;
                AtomQuery { element: Some(e), ..AtomQuery::any() }
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let two = self.text.get(self.pos..self.pos + 2).and_then(|s| std::str::from_utf8(s).ok());
                match two.and_then(|s| if s.as_bytes()[1].is_ascii_lowercase() { element_query(s) } else { None }) {
                    Some(q) => {
                        self.pos += 2;
                        q
                    }
                    None => {
                        self.pos += 1;
                        element_query(&(c as char).to_string()).ok_or_else(|| syntax(here, "unknown element"))?
                    }
                }
            }
            _ => return Err(syntax(here, "bracket atom needs a base")),
        };
        loop {
            let here = self.pos;
            match self.peek() {
                Some(b']') => {
                    self.pos += 1;
                    return Ok(q);
                }
                Some(b'H') => {
                    self.pos += 1;
                    let n = self.number().unwrap_or(1);
                    q.hydrogens = Some(HydrogenQuery::Exactly(n as u8));
                }
                Some(b'D') => {
                    self.pos += 1;
                    let n = self.number().ok_or_else(|| syntax(here, "'D' needs a count"))?;
                    q.heavy_degree = Some(n as u8);
                }
                Some(b'R') => {
                    self.pos += 1;
                    q.in_ring = Some(true);
                }
                Some(b'!') => {
                    self.pos += 1;
                    if self.text[self.pos..].starts_with(b"H0") {
                        self.pos += 2;
                        q.hydrogens = Some(HydrogenQuery::AtLeastOne);
                    } else if self.peek() == Some(b'R') {
                        self.pos += 1;
                        q.in_ring = Some(false);
                    } else {
                        return Err(syntax(here, "'!' must precede H0 or R"));
                    }
                }
                _ => return Err(syntax(here, "unknown bracket modifier")),
            }
        }
    }

    fn number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.text[start..self.pos]).ok()?.parse().ok()
    }
}

fn element_query(sym: &str) -> Option<AtomQuery> {
    let first = sym.chars().next()?;
    if first.is_ascii_lowercase() {
        let e = aromatic_symbol(sym)?;
        Some(AtomQuery { element: Some(e), aromaticity: Aromaticity::Aromatic, ..AtomQuery::any() })
    } else {
        let e = Element::from_symbol(sym).filter(|e| !e.is_wildcard())?;
        Some(AtomQuery { element: Some(e), aromaticity: Aromaticity::Aliphatic, ..AtomQuery::any() })
    }
}

/// A named functional group with its query graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionalGroupPattern {
    pub id: u8,
    pub name: String,
    pub expression: String,
    pub query: QueryGraph,
}

impl FunctionalGroupPattern {
    pub fn new(id: u8, name: &str, expression: &str) -> Result<Self, PatternError> {
        Ok(FunctionalGroupPattern {
            id,
            name: name.to_string(),
            expression: expression.to_string(),
            query: QueryGraph::parse(expression)?,
        })
    }
}

/// Immutable set of 20 patterns with ids 1..=20.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FgCatalog {
    patterns: Vec<FunctionalGroupPattern>,
}

const DEFAULT_CATALOG: &str = include_str!("../../data/functional_groups.txt");

impl FgCatalog {
    /// The catalog shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }

    pub fn load(path: &Path) -> Result<Self, PatternError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Parse `id | name | pattern` records; `#` comments and blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, PatternError> {
        let mut patterns: Vec<FunctionalGroupPattern> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| PatternError::Catalog { line: i + 1, reason };
            let fields: Vec<&str> = line.split('|').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err("expected `id | name | pattern`".into()));
            }
            let id: u8 = fields[0].parse().map_err(|_| err(format!("bad id {:?}", fields[0])))?;
            if !(1..=CATALOG_SIZE as u8).contains(&id) {
                return Err(err(format!("id {id} outside 1..={CATALOG_SIZE}")));
            }
            if patterns.iter().any(|p| p.id == id) {
                return Err(err(format!("duplicate id {id}")));
            }
            let p = FunctionalGroupPattern::new(id, fields[1], fields[2]).map_err(|e| err(e.to_string()))?;
            patterns.push(p);
        }
        if patterns.len() != CATALOG_SIZE {
            return Err(PatternError::Catalog {
                line: 0,
                reason: format!("catalog has {} entries, expected {CATALOG_SIZE}", patterns.len()),
            });
        }
        patterns.sort_by_key(|p| p.id);
        Ok(FgCatalog { patterns })
    }

    pub fn patterns(&self) -> &[FunctionalGroupPattern] {
        &self.patterns
    }

    pub fn get(&self, id: u8) -> Option<&FunctionalGroupPattern> {
        self.patterns.iter().find(|p| p.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.patterns.iter().map(|p| p.id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_catalog_loads() {
        let cat = FgCatalog::builtin();
        assert_eq!(cat.patterns().len(), 20);
        assert_eq!(cat.ids().collect::<Vec<_>>(), (1..=20).collect::<Vec<_>>());
        assert_eq!(cat.get(1).unwrap().name, "benzene ring");
        assert!(cat.patterns().iter().all(|p| p.query.atoms.len() <= MAX_PATTERN_ATOMS));
    }

    #[test]
    fn bracket_modifiers() {
        let q = QueryGraph::parse("[CD2!R][#8H1]").unwrap();
        assert_eq!(q.atoms[0].heavy_degree, Some(2));
        assert_eq!(q.atoms[0].in_ring, Some(false));
        assert_eq!(q.atoms[0].aromaticity, Aromaticity::Aliphatic);
        assert_eq!(q.atoms[1].element, Some(Element::O));
        assert_eq!(q.atoms[1].aromaticity, Aromaticity::Either);
        assert_eq!(q.atoms[1].hydrogens, Some(HydrogenQuery::Exactly(1)));
        let q = QueryGraph::parse("C=C-[C!H0]").unwrap();
        assert_eq!(q.atoms[2].hydrogens, Some(HydrogenQuery::AtLeastOne));
        assert_eq!(q.bonds[1].query, BondQuery::Exactly(BondOrder::Single));
    }

    #[test]
    fn ring_closure_bonds() {
        let q = QueryGraph::parse("*1~*~*~*~*~1").unwrap();
        assert_eq!(q.atoms.len(), 5);
        assert_eq!(q.bonds.len(), 5);
        assert!(q.bonds.iter().all(|b| b.query == BondQuery::Any));
    }

    #[test]
    fn rejects_bad_patterns() {
        assert!(matches!(QueryGraph::parse("C.C"), Err(PatternError::Syntax { .. })));
        assert!(matches!(QueryGraph::parse("C1CC"), Err(PatternError::Syntax { .. })));
        assert!(matches!(QueryGraph::parse("CCCCCCCCC"), Err(PatternError::TooLarge(9))));
        assert!(matches!(QueryGraph::parse("[Q]"), Err(PatternError::Syntax { .. })));
        assert!(matches!(QueryGraph::parse(""), Err(PatternError::Disconnected)));
    }

    #[test]
    fn catalog_validation() {
        let one = "1 | methyl | [CH3]*\n";
        assert!(matches!(FgCatalog::parse(one), Err(PatternError::Catalog { .. })));
        let dup: String = (1..=20).map(|i| format!("{} | g{} | C\n", i.min(19), i)).collect();
        assert!(matches!(FgCatalog::parse(&dup), Err(PatternError::Catalog { .. })));
        let ok: String = (1..=20).rev().map(|i| format!("{i} | g{i} | C\n")).collect();
        let cat = FgCatalog::parse(&ok).unwrap();
        assert_eq!(cat.patterns()[0].id, 1);
    }
}
