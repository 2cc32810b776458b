//! Molecular descriptors: molecular weight, functional-group presence and
//! path fingerprints.

pub mod fingerprint;
pub mod matching;
pub mod pattern;

use thiserror::Error;

use crate::smiles::{Element, MolGraph};

pub use fingerprint::{fingerprint, tanimoto, Fingerprint, FingerprintError, FINGERPRINT_BITS};
pub use matching::{match_group, query_matches};
pub use pattern::{FgCatalog, FunctionalGroupPattern, PatternError, QueryGraph, CATALOG_SIZE};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DescriptorError {
    #[error("no atomic weight for atom {0}")]
    UnknownElement(usize),
}

/// Molecular weight in g/mol from standard atomic weights, hydrogens included.
/// Isotope labels are ignored.
pub fn molecular_weight(graph: &MolGraph) -> Result<f64, DescriptorError> {
    let h = Element::H.info().unwrap().weight;
    let mut total = 0.0;
    for (i, atom) in graph.atoms().iter().enumerate() {
        let info = atom.element.info().ok_or(DescriptorError::UnknownElement(i))?;
        total += info.weight + h * (atom.explicit_h + atom.implicit_h) as f64;
    }
    Ok(total)
}

/// Presence vector over a catalog, in catalog order.
pub fn group_presence(graph: &MolGraph, catalog: &FgCatalog) -> Vec<bool> {
    catalog.patterns().iter().map(|p| match_group(graph, p)).collect()
}
