//! SMILES lexing, parsing, validation and token encoding.

pub mod elements;
pub mod graph;
pub mod parser;
pub mod vocab;

pub use elements::Element;
pub use graph::{Atom, Bond, BondOrder, MolGraph};
pub use parser::{parse, ParseError};
pub use vocab::{normalize, TokenSequence, VocabError, Vocabulary, MAX_LEN};

/// Outcome of [`is_valid`]: the verdict plus the first failure, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Validity {
    pub valid: bool,
    pub diagnostic: Option<ParseError>,
}

/// Total validity predicate: true iff the string parses into a graph that
/// satisfies every valence, ring and aromaticity rule.
pub fn is_valid(text: &str) -> Validity {
    match parse(text) {
        Ok(_) => Validity { valid: true, diagnostic: None },
        Err(e) => Validity { valid: false, diagnostic: Some(e) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validity_predicate() {
        assert!(is_valid("c1ccccc1").valid);
        let v = is_valid("C(");
        assert!(!v.valid);
        assert_eq!(v.diagnostic, Some(ParseError::UnbalancedBranch));
        assert!(!is_valid("C=1CC").valid);
        assert!(is_valid("C1CC1").valid);
    }
}
