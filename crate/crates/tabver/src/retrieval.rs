//! Evidence retrieval rules over a synthesized program set: keep the
//! programs that hold, split conjunctions into their parts, and when the
//! haul is large drop negative-meaning programs.

use std::collections::HashSet;

use crate::dsl::{negative_functions, Program, ProgramNode};
use crate::synth::ProgramSet;

#[derive(Debug, Clone)]
pub struct RetrievalConfig {
    /// Above this many decomposed programs, negative-function evidence is
    /// dropped.
    pub negative_threshold: usize,
    /// Evidence kept after truncation, smallest programs first.
    pub max_evidence: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            negative_threshold: 50,
            max_evidence: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceCounts {
    pub selected: usize,
    pub after_decompose: usize,
    pub after_filter: usize,
}

/// The retained evidence programs, smallest-first, free of `and` nodes,
/// all true on the source table.
#[derive(Debug, Clone)]
pub struct EvidenceSet {
    pub items: Vec<Program>,
    pub source_counts: SourceCounts,
}

impl EvidenceSet {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
}

/// Programs whose execution label was true, order preserved.
pub fn select_true(ps: &ProgramSet) -> Vec<Program> {
    ps.items
        .iter()
        .filter(|(_, label)| *label)
        .map(|(p, _)| p.clone())
        .collect()
}

/// Recursively replace each `and`-rooted program by its children; both
/// sides of a true conjunction are themselves true. Output deduplicated
/// by rendering, first occurrence kept.
pub fn decompose_and(evidence: &[Program]) -> Vec<Program> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut stack: Vec<Program> = evidence.iter().rev().cloned().collect();
    while let Some(p) = stack.pop() {
        match &p.root {
            ProgramNode::Function { name, children } if *name == "and" => {
                for child in children.iter().rev() {
                    stack.push(Program::new(child.clone()));
                }
            }
            _ => {
                if seen.insert(p.render()) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// When more than `threshold` programs survive decomposition, drop every
/// one containing a negative-meaning function; otherwise pass through.
pub fn filter_negative(evidence: Vec<Program>, threshold: usize) -> Vec<Program> {
    if evidence.len() <= threshold {
        return evidence;
    }
    let negatives: Vec<&str> = negative_functions().collect();
    evidence
        .into_iter()
        .filter(|p| !p.contains_function(&negatives))
        .collect()
}

/// Full retrieval pipeline: select true, decompose `and`, filter
/// negatives, dedupe, then keep the `max_evidence` smallest programs
/// (node count, ties by text).
pub fn retrieve(ps: &ProgramSet, config: &RetrievalConfig) -> EvidenceSet {
    let selected = select_true(ps);
    let n_selected = selected.len();
    let decomposed = decompose_and(&selected);
    let n_decomposed = decomposed.len();
    let filtered = filter_negative(decomposed, config.negative_threshold);
    let n_filtered = filtered.len();
    let mut items = filtered;
    items.sort_by_cached_key(|p| (p.node_count(), p.render()));
    items.truncate(config.max_evidence);
    EvidenceSet {
        items,
        source_counts: SourceCounts {
            selected: n_selected,
            after_decompose: n_decomposed,
            after_filter: n_filtered,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;
    use crate::exec::execute_bool;
    use crate::synth::{synthesize, SearchBudget};
    use crate::table::load_table;

    fn ps_from(items: Vec<(&str, bool)>) -> ProgramSet {
        ProgramSet {
            items: items
                .into_iter()
                .map(|(s, l)| (parse_program(s).unwrap(), l))
                .collect(),
            statement: String::new(),
            table_id: String::new(),
            truncated: false,
        }
    }

    #[test]
    fn select_true_keeps_order() {
        let ps = ps_from(vec![
            ("eq { 1 ; 1 }", true),
            ("eq { 1 ; 2 }", false),
            ("less { 1 ; 2 }", true),
        ]);
        let out: Vec<String> = select_true(&ps).iter().map(Program::render).collect();
        assert_eq!(out, vec!["eq { 1 ; 1 }", "less { 1 ; 2 }"]);
        assert!(select_true(&ps_from(vec![("eq { 1 ; 2 }", false)])).is_empty());
    }

    #[test]
    fn decompose_splits_conjunctions() {
        let p = vec![parse_program("and { eq { 1 ; 1 } ; less { 1 ; 2 } }").unwrap()];
        let out: Vec<String> = decompose_and(&p).iter().map(Program::render).collect();
        assert_eq!(out, vec!["eq { 1 ; 1 }", "less { 1 ; 2 }"]);
    }

    #[test]
    fn decompose_recurses_into_nested_and() {
        let p = vec![parse_program(
            "and { and { eq { 1 ; 1 } ; less { 1 ; 2 } } ; greater { 3 ; 1 } }",
        )
        .unwrap()];
        let out: Vec<String> = decompose_and(&p).iter().map(Program::render).collect();
        assert_eq!(
            out,
            vec!["eq { 1 ; 1 }", "less { 1 ; 2 }", "greater { 3 ; 1 }"]
        );
    }

    #[test]
    fn decompose_passes_other_programs_through() {
        let p = vec![parse_program("count { all_rows }").unwrap()];
        let out = decompose_and(&p);
        assert_eq!(out[0].render(), "count { all_rows }");
    }

    #[test]
    fn negative_filter_applies_only_above_threshold() {
        let mut programs = Vec::new();
        for i in 0..70 {
            programs.push(parse_program(&format!("eq {{ {i} ; {i} }}")).unwrap());
        }
        for i in 0..30 {
            programs.push(parse_program(&format!("not_eq {{ {i} ; {} }}", i + 1)).unwrap());
        }
        let out = filter_negative(programs.clone(), 50);
        assm(&out, 70);
        let small: Vec<Program> = programs[..10].to_vec();
        assert_eq!(filter_negative(small.clone(), 50).len(), 10);
        let all_neg: Vec<Program> = (0..60)
            .map(|i| parse_program(&format!("not_eq {{ {i} ; {} }}", i + 1)).unwrap())
            .collect();
        assert!(filter_negative(all_neg, 50).is_empty());
    }

    fn assm(out: &[Program], want: usize) {
        assert_eq!(out.len(), want);
        let negs: Vec<&str> = negative_functions().collect();
        assert!(out.iter().all(|p| !p.contains_function(&negs)));
    }

    #[test]
    fn retrieve_empty_set() {
        let ev = retrieve(&ps_from(vec![]), &RetrievalConfig::default());
        assert!(ev.is_empty());
        assert_eq!(
            ev.source_counts,
            SourceCounts {
                selected: 0,
                after_decompose: 0,
                after_filter: 0
            }
        );
    }

    #[test]
    fn duplicate_conjuncts_collapse() {
        let ev = retrieve(
            &ps_from(vec![("and { eq { 1 ; 1 } ; eq { 1 ; 1 } }", true)]),
            &RetrievalConfig::default(),
        );
        let out: Vec<String> = ev.items.iter().map(Program::render).collect();
        assert_eq!(out, vec!["eq { 1 ; 1 }"]);
        assert_eq!(ev.source_counts.after_decompose, 1);
    }

    #[test]
    fn retrieve_is_idempotent_and_sound() {
        let t = load_table(
            b"date#venue#score\n26 january 2011#sai tso wan recreation ground#4\n28 january 2011#mong kok stadium#0\n2 february 2011#sham shui po sports ground#1",
            '#',
        )
        .unwrap();
        let ps = synthesize(
            "there be only 1 game on 26 january 2011 and the score of that game be more than 0",
            &t,
            &SearchBudget::default(),
        );
        let ev = retrieve(&ps, &RetrievalConfig::default());
        assert!(!ev.is_empty());
        for p in &ev.items {
            assert_eq!(execute_bool(p, &t), Ok(true), "{}", p.render());
            assert!(!p.contains_function(&["and"]));
        }
        // feeding the output back through changes nothing
        let again = retrieve(
            &ProgramSet {
                items: ev.items.iter().map(|p| (p.clone(), true)).collect(),
                statement: String::new(),
                table_id: String::new(),
                truncated: false,
            },
            &RetrievalConfig::default(),
        );
        let a: Vec<String> = ev.items.iter().map(Program::render).collect();
        let b: Vec<String> = again.items.iter().map(Program::render).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn case_study_shape_is_retrieved() {
        let t = load_table(
            b"date#venue#score\n26 january 2011#sai tso wan recreation ground#4\n28 january 2011#mong kok stadium#0\n2 february 2011#sham shui po sports ground#1",
            '#',
        )
        .unwrap();
        let ps = synthesize(
            "there be only 1 game on 26 january 2011 and the score of that game be more than 0",
            &t,
            &SearchBudget::default(),
        );
        let config = RetrievalConfig {
            max_evidence: 16,
            ..RetrievalConfig::default()
        };
        let ev = retrieve(&ps, &config);
        let rendered: Vec<String> = ev.items.iter().map(Program::render).collect();
        assert!(
            rendered.iter().any(|s| s.starts_with("only {")),
            "no only-rooted evidence in {rendered:?}"
        );
        assert!(
            rendered.iter().any(|s| s.contains("filter_greater")),
            "no filter_greater evidence in {rendered:?}"
        );
    }

    #[test]
    fn smallest_programs_win_truncation() {
        let mut items = vec![];
        for i in 0..20 {
            items.push((
                format!("eq {{ count {{ all_rows }} ; {i} }}"),
                true,
            ));
        }
        items.push(("eq { 7 ; 7 }".to_string(), true));
        let ps = ps_from(items.iter().map(|(s, l)| (s.as_str(), *l)).collect());
        let ev = retrieve(&ps, &RetrievalConfig::default());
        assert_eq!(ev.len(), 8);
        assert_eq!(ev.items[0].render(), "eq { 7 ; 7 }");
    }
}
