//! The evidence graph: one node per function or entity occurrence across
//! all evidence programs, tree edges within each program, and coreference
//! edges joining same-content entities across the whole set.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dsl::{Program, ProgramNode};
use crate::retrieval::EvidenceSet;
use crate::table::normalize;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("cannot build a graph from an empty evidence set")]
    EmptyEvidence,
    #[error("node {0} not in graph")]
    NodeNotFound(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeType {
    Function,
    Entity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Parent-child edge of a program tree (or a rewired replacement).
    Structural,
    /// Same-content entity pair.
    Coreference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub id: usize,
    /// Function name or entity text.
    pub text: String,
    pub node_type: NodeType,
    /// Which evidence program this node came from.
    pub program_id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Undirected graph with stable node ids; removal never renumbers.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicGraph {
    nodes: BTreeMap<usize, GraphNode>,
    edges: BTreeMap<(usize, usize), EdgeKind>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl LogicGraph {
    /// Graph with no nodes; the no-evidence fallback input.
    pub fn empty() -> Self {
        LogicGraph {
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: usize) -> Option<&GraphNode> {
        self.nodes.get(&id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> Vec<usize> {
        self.nodes.keys().copied().collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, EdgeKind)> + '_ {
        self.edges.iter().map(|(&(a, b), &k)| (a, b, k))
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains_key(&key(a, b))
    }

    /// Neighbor ids of `id`, ascending.
    pub fn neighbors(&self, id: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .keys()
            .filter_map(|&(a, b)| {
                if a == id {
                    Some(b)
                } else if b == id {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    fn add_edge(&mut self, a: usize, b: usize, kind: EdgeKind) {
        if a == b {
            return;
        }
        self.edges.entry(key(a, b)).or_insert(kind);
    }

    /// Remove a node, then reconnect: children gain an edge to the
    /// removed node's parent, or become mutually connected roots when
    /// there is no parent. Other edges are untouched.
    pub fn remove_node_rewire(&self, id: usize) -> Result<LogicGraph, GraphError> {
        let mut g = self.clone();
        let node = g.nodes.remove(&id).ok_or(GraphError::NodeNotFound(id))?;
        g.edges.retain(|&(a, b), _| a != id && b != id);
        match node.parent {
            Some(p) => {
                for &c in &node.children {
                    g.add_edge(c, p, EdgeKind::Structural);
                    if let Some(cn) = g.nodes.get_mut(&c) {
                        cn.parent = Some(p);
                    }
                }
                if let Some(pn) = g.nodes.get_mut(&p) {
                    // children of the removed node take its position
                    let pos = pn.children.iter().position(|&c| c == id);
                    match pos {
                        Some(i) => {
                            pn.children.splice(i..=i, node.children.iter().copied());
                        }
                        None => pn.children.extend(node.children.iter().copied()),
                    }
                }
            }
            None => {
                for &c in &node.children {
                    if let Some(cn) = g.nodes.get_mut(&c) {
                        cn.parent = None;
                    }
                }
                for (i, &a) in node.children.iter().enumerate() {
                    for &b in &node.children[i + 1..] {
                        g.add_edge(a, b, EdgeKind::Structural);
                    }
                }
            }
        }
        Ok(g)
    }

    /// Plain-text adjacency dump: `id<TAB>type<TAB>text<TAB>neighbors`.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for node in self.nodes.values() {
            let ty = match node.node_type {
                NodeType::Function => "function",
                NodeType::Entity => "entity",
            };
            let neigh: Vec<String> = self
                .neighbors(node.id)
                .into_iter()
                .map(|n| n.to_string())
                .collect();
            let _ = writeln!(out, "{}\t{}\t{}\t{}", node.id, ty, node.text, neigh.join(","));
        }
        out
    }
}

/// Build the graph for an evidence set: program trees contribute
/// structural edges; entity nodes with the same normalized text form a
/// coreference clique across the entire set.
pub fn build_graph(ev: &EvidenceSet) -> Result<LogicGraph, GraphError> {
    build_graph_from_programs(&ev.items)
}

pub fn build_graph_from_programs(programs: &[Program]) -> Result<LogicGraph, GraphError> {
    if programs.is_empty() {
        return Err(GraphError::EmptyEvidence);
    }
    let mut g = LogicGraph {
        nodes: BTreeMap::new(),
        edges: BTreeMap::new(),
    };
    let mut next_id = 0usize;
    for (program_id, program) in programs.iter().enumerate() {
        add_subtree(&mut g, &program.root, program_id, None, &mut next_id);
    }
    // coreference: clique over same-normalized-text entities
    let entity_ids: Vec<(usize, String)> = g
        .nodes
        .values()
        .filter(|n| n.node_type == NodeType::Entity)
        .map(|n| (n.id, normalize(&n.text)))
        .collect();
    for (i, (a, ta)) in entity_ids.iter().enumerate() {
        for (b, tb) in &entity_ids[i + 1..] {
            if ta == tb {
                g.add_edge(*a, *b, EdgeKind::Coreference);
            }
        }
    }
    Ok(g)
}

fn add_subtree(
    g: &mut LogicGraph,
    node: &ProgramNode,
    program_id: usize,
    parent: Option<usize>,
    next_id: &mut usize,
) -> usize {
    let id = *next_id;
    *next_id += 1;
    let node_type = if node.is_function() {
        NodeType::Function
    } else {
        NodeType::Entity
    };
    g.nodes.insert(
        id,
        GraphNode {
            id,
            text: node.text().to_string(),
            node_type,
            program_id,
            parent,
            children: Vec::new(),
        },
    );
    if let Some(p) = parent {
        g.add_edge(p, id, EdgeKind::Structural);
    }
    let mut child_ids = Vec::new();
    for child in node.children() {
        child_ids.push(add_subtree(g, child, program_id, Some(id), next_id));
    }
    g.nodes.get_mut(&id).expect("just inserted").children = child_ids;
    id
}

/// True iff the nodes of `program_id` form one connected component under
/// all edges of `g` restricted to that program's nodes.
pub fn program_connected(g: &LogicGraph, program_id: usize) -> bool {
    let members: Vec<usize> = g
        .nodes()
        .filter(|n| n.program_id == program_id)
        .map(|n| n.id)
        .collect();
    if members.len() <= 1 {
        return true;
    }
    let mut seen = vec![members[0]];
    let mut queue = vec![members[0]];
    while let Some(x) = queue.pop() {
        for nb in g.neighbors(x) {
            if members.contains(&nb) && !seen.contains(&nb) {
                seen.push(nb);
                queue.push(nb);
            }
        }
    }
    seen.len() == members.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;

    fn graph_of(sources: &[&str]) -> LogicGraph {
        let programs: Vec<Program> = sources.iter().map(|s| parse_program(s).unwrap()).collect();
        build_graph_from_programs(&programs).unwrap()
    }

    #[test]
    fn single_program_tree() {
        let g = graph_of(&["count { all_rows }"]);
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge(0, 1));
        assert_eq!(g.node(0).unwrap().node_type, NodeType::Function);
        assert_eq!(g.node(1).unwrap().node_type, NodeType::Entity);
    }

    #[test]
    fn empty_evidence_errors() {
        assert_eq!(
            build_graph_from_programs(&[]).unwrap_err(),
            GraphError::EmptyEvidence
        );
    }

    #[test]
    fn shared_entities_corefer() {
        let g = graph_of(&[
            "min { all_rows ; number in fleet }",
            "max { all_rows ; number in fleet }",
        ]);
        // node ids: 0 min, 1 all_rows, 2 fleet, 3 max, 4 all_rows, 5 fleet
        assert_eq!(
            g.edges().filter(|(_, _, k)| *k == EdgeKind::Coreference).count(),
            2
        );
        assert!(g.has_edge(2, 5));
        assert!(g.has_edge(1, 4));
    }

    #[test]
    fn all_rows_clique_size() {
        let k = 4;
        let sources: Vec<String> = (0..k)
            .map(|i| format!("eq {{ count {{ all_rows }} ; {i} }}"))
            .collect();
        let refs: Vec<&str> = sources.iter().map(String::as_str).collect();
        let g = graph_of(&refs);
        let coref = g
            .edges()
            .filter(|(_, _, kind)| *kind == EdgeKind::Coreference)
            .count();
        assert_eq!(coref, k * (k - 1) / 2);
    }

    #[test]
    fn structural_edges_are_node_count_minus_one_per_program() {
        let g = graph_of(&[
            "only { filter_eq { all_rows ; date ; 26 january 2011 } }",
            "eq { hop { filter_eq { all_rows ; venue ; mong kok } ; score } ; 0 }",
        ]);
        for pid in 0..2 {
            let nodes = g.nodes().filter(|n| n.program_id == pid).count();
            let structural = g
                .edges()
                .filter(|&(a, b, k)| {
                    k == EdgeKind::Structural
                        && g.node(a).unwrap().program_id == pid
                        && g.node(b).unwrap().program_id == pid
                })
                .count();
            assert_eq!(structural, nodes - 1);
        }
    }

    #[test]
    fn staged_internal_removal_rewires_to_star() {
        // eq { hop { filter_eq { all_rows ; c ; v } ; c2 } ; v2 }
        // ids:  0 eq, 1 hop, 2 filter_eq, 3 all_rows, 4 c, 5 v, 6 c2, 7 v2
        let g = graph_of(&["eq { hop { filter_eq { all_rows ; c ; v } ; c2 } ; v2 }"]);
        assert_eq!(g.node_count(), 8);

        let g1 = g.remove_node_rewire(2).unwrap();
        for c in [3, 4, 5] {
            assert!(g1.has_edge(c, 1), "child {c} rewired to hop");
        }
        assert_eq!(g1.node(1).unwrap().children, vec![3, 4, 5, 6]);
        assert!(program_connected(&g1, 0));

        let g2 = g1.remove_node_rewire(3).unwrap();
        assert!(!g2.has_edge(3, 1));
        assert_eq!(g2.node(1).unwrap().children, vec![4, 5, 6]);

        let g3 = g2.remove_node_rewire(1).unwrap();
        // every surviving leaf hangs off the root comparison
        for c in [4, 5, 6] {
            assert!(g3.has_edge(c, 0), "child {c} rewired to eq");
        }
        assert_eq!(g3.node(0).unwrap().children, vec![4, 5, 6, 7]);
        assert!(program_connected(&g3, 0));
        assert_eq!(g3.node_count(), 5);
    }

    #[test]
    fn leaf_removal_adds_nothing() {
        let g = graph_of(&["count { all_rows }"]);
        let g1 = g.remove_node_rewire(1).unwrap();
        assert_eq!(g1.node_count(), 1);
        assert_eq!(g1.edge_count(), 0);
    }

    #[test]
    fn root_removal_connects_children() {
        let g = graph_of(&["eq { a ; b }"]);
        let g1 = g.remove_node_rewire(0).unwrap();
        assert_eq!(g1.node_count(), 2);
        assert!(g1.has_edge(1, 2));
        assert_eq!(g1.node(1).unwrap().parent, None);
    }

    #[test]
    fn missing_node_errors() {
        let g = graph_of(&["eq { a ; b }"]);
        assert_eq!(
            g.remove_node_rewire(99).unwrap_err(),
            GraphError::NodeNotFound(99)
        );
    }

    #[test]
    fn internal_removals_preserve_connectivity() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let t = crate::randgen::random_table(&mut rng, 5, 4);
            let programs = crate::randgen::random_true_programs(&mut rng, &t, 4);
            if programs.is_empty() {
                continue;
            }
            let g = build_graph_from_programs(&programs).unwrap();
            let internal: Vec<usize> = g
                .nodes()
                .filter(|n| n.parent.is_some() && !n.children.is_empty())
                .map(|n| n.id)
                .collect();
            for id in internal {
                let pid = g.node(id).unwrap().program_id;
                let g2 = g.remove_node_rewire(id).unwrap();
                assert!(program_connected(&g2, pid), "removing {id} disconnected");
            }
        }
    }

    #[test]
    fn dump_format() {
        let g = graph_of(&["count { all_rows }"]);
        assert_eq!(g.dump(), "0\tfunction\tcount\t1\n1\tentity\tall_rows\t0\n");
    }

    #[test]
    fn build_is_order_stable() {
        let mk = || graph_of(&["eq { a ; b }", "less { 1 ; 2 }"]);
        assert_eq!(mk(), mk());
    }
}
