//! The program logical form: a LISP-like tree of catalog functions over
//! entity leaves, with a textual syntax `name { arg ; arg }`.

mod catalog;
mod parse;

pub use catalog::{catalog, lookup, negative_functions, FunctionSpec, Polarity, Sort};
pub use parse::{parse_program, ParseError};

use std::ops::Range;

/// Where an entity leaf came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityKind {
    /// Names a table column.
    Column,
    /// Text of a linked table cell.
    Cell,
    /// Standalone literal (statement number or free token).
    Literal,
    /// The whole-table view seed.
    AllRows,
}

pub const ALL_ROWS: &str = "all_rows";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProgramNode {
    Function {
        name: &'static str,
        children: Vec<ProgramNode>,
    },
    Entity {
        kind: EntityKind,
        text: String,
    },
}

impl ProgramNode {
    pub fn function(name: &'static str, children: Vec<ProgramNode>) -> Self {
        debug_assert!(lookup(name).is_some(), "unknown function {name}");
        ProgramNode::Function { name, children }
    }

    /// Entity leaf; text is stored trimmed so rendering round-trips.
    pub fn entity(kind: EntityKind, text: impl AsRef<str>) -> Self {
        ProgramNode::Entity {
            kind,
            text: text.as_ref().trim().to_string(),
        }
    }

    pub fn all_rows() -> Self {
        ProgramNode::Entity {
            kind: EntityKind::AllRows,
            text: ALL_ROWS.to_string(),
        }
    }

    pub fn is_function(&self) -> bool {
        matches!(self, ProgramNode::Function { .. })
    }

    /// Node label: the function name or the entity text.
    pub fn text(&self) -> &str {
        match self {
            ProgramNode::Function { name, .. } => name,
            ProgramNode::Entity { text, .. } => text,
        }
    }

    pub fn children(&self) -> &[ProgramNode] {
        match self {
            ProgramNode::Function { children, .. } => children,
            ProgramNode::Entity { .. } => &[],
        }
    }
}

/// A complete tree-shaped program.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub root: ProgramNode,
}

/// Character span of one node's label inside a rendering, in preorder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpan {
    pub preorder: usize,
    pub range: Range<usize>,
}

impl Program {
    pub fn new(root: ProgramNode) -> Self {
        Program { root }
    }

    /// Canonical text form; `parse_program` inverts it.
    pub fn render(&self) -> String {
        let (text, _) = self.render_with_spans();
        text
    }

    /// Render and report each node's label span, preorder-numbered.
    pub fn render_with_spans(&self) -> (String, Vec<NodeSpan>) {
        let mut out = String::new();
        let mut spans = Vec::new();
        let mut counter = 0usize;
        render_node(&self.root, &mut out, &mut spans, &mut counter);
        (out, spans)
    }

    pub fn node_count(&self) -> usize {
        fn count(n: &ProgramNode) -> usize {
            1 + n.children().iter().map(count).sum::<usize>()
        }
        count(&self.root)
    }

    /// Preorder walk over all nodes.
    pub fn preorder(&self) -> Vec<&ProgramNode> {
        let mut out = Vec::new();
        fn walk<'a>(n: &'a ProgramNode, out: &mut Vec<&'a ProgramNode>) {
            out.push(n);
            for c in n.children() {
                walk(c, out);
            }
        }
        walk(&self.root, &mut out);
        out
    }

    /// For each occurrence of `name` (preorder), its children as
    /// standalone programs.
    pub fn subtrees_of(&self, name: &str) -> Vec<Program> {
        let mut out = Vec::new();
        for node in self.preorder() {
            if let ProgramNode::Function { name: n, children } = node {
                if *n == name {
                    out.extend(children.iter().cloned().map(Program::new));
                }
            }
        }
        out
    }

    /// True iff any function node's name is in `names`.
    pub fn contains_function(&self, names: &[&str]) -> bool {
        self.preorder().iter().any(|n| match n {
            ProgramNode::Function { name, .. } => names.contains(name),
            ProgramNode::Entity { .. } => false,
        })
    }

    pub fn root_function(&self) -> Option<&'static str> {
        match &self.root {
            ProgramNode::Function { name, .. } => Some(name),
            ProgramNode::Entity { .. } => None,
        }
    }
}

impl std::fmt::Display for Program {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render())
    }
}

fn escape_entity(text: &str, out: &mut String) {
    for ch in text.chars() {
        if matches!(ch, '{' | '}' | ';' | '\\') {
            out.push('\\');
        }
        out.push(ch);
    }
}

fn render_node(
    node: &ProgramNode,
    out: &mut String,
    spans: &mut Vec<NodeSpan>,
    counter: &mut usize,
) {
    let preorder = *counter;
    *counter += 1;
    let start = out.len();
    match node {
        ProgramNode::Entity { text, .. } => {
            escape_entity(text, out);
            spans.push(NodeSpan {
                preorder,
                range: start..out.len(),
            });
        }
        ProgramNode::Function { name, children } => {
            out.push_str(name);
            spans.push(NodeSpan {
                preorder,
                range: start..out.len(),
            });
            out.push_str(" { ");
            for (i, child) in children.iter().enumerate() {
                if i > 0 {
                    out.push_str(" ; ");
                }
                render_node(child, out, spans, counter);
            }
            out.push_str(" }");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ent(text: &str) -> ProgramNode {
        ProgramNode::entity(EntityKind::Literal, text)
    }

    #[test]
    fn renders_comparison() {
        let p = Program::new(ProgramNode::function("less", vec![ent("B"), ent("A")]));
        assert_eq!(p.render(), "less { B ; A }");
    }

    #[test]
    fn parse_render_round_trip_simple() {
        let p = parse_program("less { B ; A }").unwrap();
        assert_eq!(parse_program(&p.render()).unwrap(), p);
        assert_eq!(p.render(), "less { B ; A }");
    }

    #[test]
    fn nested_round_trip() {
        let p = parse_program("eq { count { all_rows } ; 5 }").unwrap();
        let again = parse_program(&p.render()).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn entity_with_delimiters_escapes() {
        let p = Program::new(ProgramNode::function(
            "eq",
            vec![ent("a;b"), ent("c{d}e")],
        ));
        let text = p.render();
        assert_eq!(parse_program(&text).unwrap(), p);
    }

    #[test]
    fn subtrees_of_and_is_recursive_preorder() {
        let p = parse_program(
            "and { and { only { all_rows } ; less { 1 ; 2 } } ; greater { 3 ; 1 } }",
        )
        .unwrap();
        let subs = p.subtrees_of("and");
        let rendered: Vec<String> = subs.iter().map(Program::render).collect();
        assert_eq!(
            rendered,
            vec![
                "and { only { all_rows } ; less { 1 ; 2 } }",
                "greater { 3 ; 1 }",
                "only { all_rows }",
                "less { 1 ; 2 }",
            ]
        );
    }

    #[test]
    fn subtrees_of_absent_function_is_empty() {
        let p = parse_program("count { all_rows }").unwrap();
        assert!(p.subtrees_of("and").is_empty());
    }

    #[test]
    fn contains_function_cases() {
        let neg: Vec<&str> = negative_functions().collect();
        assert!(parse_program("not_eq { a ; b }")
            .unwrap()
            .contains_function(&neg));
        assert!(!parse_program("count { all_rows }")
            .unwrap()
            .contains_function(&neg));
        // negative function buried three levels deep
        let p = parse_program(
            "only { filter_not_eq { filter_eq { all_rows ; c ; v } ; c ; w } }",
        )
        .unwrap();
        assert!(p.contains_function(&neg));
    }

    #[test]
    fn spans_point_at_node_labels() {
        let p = parse_program("less { B ; A }").unwrap();
        let (text, spans) = p.render_with_spans();
        assert_eq!(&text[spans[0].range.clone()], "less");
        assert_eq!(&text[spans[1].range.clone()], "B");
        assert_eq!(&text[spans[2].range.clone()], "A");
    }
}
