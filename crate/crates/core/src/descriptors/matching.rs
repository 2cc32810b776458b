//! Substructure search: does a query graph embed into a molecule?
//!
//! Backtracking over query atoms in breadth-first order so that every atom
//! after the first extends an existing partial match through a bond.
//! Candidates are pruned by atom predicate and neighbor count.

use crate::smiles::MolGraph;

use super::pattern::{FunctionalGroupPattern, QueryGraph};

/// True iff `pattern` occurs as a (non-induced) subgraph of `graph`.
pub fn match_group(graph: &MolGraph, pattern: &FunctionalGroupPattern) -> bool {
    query_matches(graph, &pattern.query)
}

pub fn query_matches(graph: &MolGraph, query: &QueryGraph) -> bool {
    if query.atoms.is_empty() || query.atoms.len() > graph.atom_count() {
        return false;
    }
    let plan = SearchPlan::new(query);
    let mut mapping = vec![usize::MAX; query.atoms.len()];
    let mut used = vec![false; graph.atom_count()];
    (0..graph.atom_count()).any(|start| {
        if !candidate_ok(graph, query, &plan, 0, start, &mapping, &used) {
            return false;
        }
        mapping[plan.order[0]] = start;
        used[start] = true;
        let found = extend(graph, query, &plan, 1, &mut mapping, &mut used);
        used[start] = false;
        mapping[plan.order[0]] = usize::MAX;
        found
    })
}

struct SearchPlan {
    /// Query atoms in visiting order.
    order: Vec<usize>,
    /// For each position > 0, an earlier query atom bonded to it.
    parent: Vec<usize>,
    degree: Vec<usize>,
}

impl SearchPlan {
    fn new(query: &QueryGraph) -> Self {
        let n = query.atoms.len();
        let mut order = vec![0];
        let mut parent = vec![usize::MAX];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for b in &query.bonds {
                let w = if b.a == v { b.b } else if b.b == v { b.a } else { continue };
                if !seen[w] {
                    seen[w] = true;
                    order.push(w);
                    parent.push(v);
                }
            }
        }
        let degree = (0..n).map(|i| query.degree(i)).collect();
        SearchPlan { order, parent, degree }
    }
}

fn candidate_ok(
    graph: &MolGraph,
    query: &QueryGraph,
    plan: &SearchPlan,
    depth: usize,
    atom: usize,
    mapping: &[usize],
    used: &[bool],
) -> bool {
    let q = plan.order[depth];
    if used[atom] || graph.neighbors(atom).len() < plan.degree[q] || !query.atoms[q].matches(graph, atom) {
        return false;
    }
    // every bond to an already-mapped query atom must be present and compatible
    for b in &query.bonds {
        let other = if b.a == q { b.b } else if b.b == q { b.a } else { continue };
        let mapped = mapping[other];
        if mapped == usize::MAX {
            continue;
        }
        match graph.neighbors(atom).iter().find(|&&(n, _)| n == mapped) {
            Some(&(_, bond)) if b.query.matches(graph, bond) => {}
            _ => return false,
        }
    }
    true
}

fn extend(
    graph: &MolGraph,
    query: &QueryGraph,
    plan: &SearchPlan,
    depth: usize,
    mapping: &mut Vec<usize>,
    used: &mut Vec<bool>,
) -> bool {
    if depth == plan.order.len() {
        return true;
    }
    let q = plan.order[depth];
    let anchor = mapping[plan.parent[depth]];
    for &(cand, _) in graph.neighbors(anchor) {
        if !candidate_ok(graph, query, plan, depth, cand, mapping, used) {
            continue;
        }
        mapping[q] = cand;
        used[cand] = true;
        let found = extend(graph, query, plan, depth + 1, mapping, used);
        used[cand] = false;
        mapping[q] = usize::MAX;
        if found {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::pattern::FgCatalog;
    use crate::smiles::parse;

    fn has(smiles: &str, id: u8) -> bool {
        let cat = FgCatalog::builtin();
        match_group(&parse(smiles).unwrap(), cat.get(id).unwrap())
    }

    #[test]
    fn benzene_and_aldehyde() {
        assert!(has("c1ccccc1", 1));
        assert!(!has("C1CCCCC1", 1));
        assert!(!has("CCO", 2));
        assert!(has("CC=O", 2));
        assert!(has("O=Cc1ccccc1", 2));
        assert!(!has("CC(C)=O", 2));
    }

    #[test]
    fn empty_graph_never_matches() {
        let cat = FgCatalog::builtin();
        let empty = MolGraph::empty();
        assert!(cat.patterns().iter().all(|p| !match_group(&empty, p)));
    }

    #[test]
    fn carbonyl_family() {
        assert!(has("CC(C)=O", 3));
        assert!(!has("CC(=O)OC", 3));
        assert!(has("CC(=O)OC", 5));
        assert!(has("CC(=O)O", 6));
        assert!(!has("CC(=O)O", 5));
        assert!(has("O=C1CCCO1", 12));
        assert!(!has("CC(=O)OC", 12));
    }

    #[test]
    fn alcohols() {
        assert!(has("CCO", 7));
        assert!(!has("CC(C)O", 7));
        assert!(has("CC(C)O", 8));
        assert!(has("CC(C)(C)O", 9));
        assert!(!has("CC(C)(C)O", 8));
        assert!(has("Oc1ccccc1", 13));
        assert!(!has("Oc1ccccc1", 7));
    }

    #[test]
    fn other_groups() {
        assert!(has("CCOCC", 4));
        assert!(!has("c1ccoc1", 4));
        assert!(has("c1ccoc1", 14));
        assert!(has("C=CC", 10));
        assert!(has("C=CC", 15));
        assert!(!has("C=C", 15));
        assert!(has("CC#C", 11));
        assert!(has("COCOC", 16));
        assert!(has("CC1OC1", 17));
        assert!(has("CO", 18));
        assert!(!has("C", 18));
        assert!(has("CCCCCC", 19));
        assert!(!has("CCCCC(C)C", 19));
        assert!(has("C1CCCC1", 20));
        assert!(has("C1=CCCC1", 20));
        assert!(!has("C1CCCCC1", 20));
    }

    #[test]
    fn independent_of_atom_order() {
        for (a, b) in [("OCC", "CCO"), ("O=CC", "CC=O"), ("OC(C)(C)C", "CC(C)(C)O")] {
            let cat = FgCatalog::builtin();
            for p in cat.patterns() {
                assert_eq!(
                    match_group(&parse(a).unwrap(), p),
                    match_group(&parse(b).unwrap(), p),
                    "{a} vs {b} on {}",
                    p.name
                );
            }
        }
    }
}
