//! Entity linking: detect statement spans that name table columns, table
//! cells, or standalone numbers.

use std::ops::Range;

use rust_decimal::Decimal;

use crate::table::{normalize, parse_number, Table};

/// What a statement span was linked to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntityTarget {
    Column(usize),
    Cell { row: usize, col: usize },
    Number(Decimal),
}

/// One linked span of the statement.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkedEntity {
    /// Exact statement substring.
    pub surface: String,
    pub target: EntityTarget,
    /// Byte range in the statement.
    pub span: Range<usize>,
}

/// A statement word: normalized form plus the byte range of its
/// punctuation-trimmed original.
#[derive(Debug, Clone, PartialEq)]
pub struct StatementWord {
    pub norm: String,
    pub start: usize,
    pub end: usize,
}

/// Split on whitespace, trim surrounding ASCII punctuation, lowercase.
/// Words that were pure punctuation are dropped.
pub fn statement_words(s: &str) -> Vec<StatementWord> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let word = &s[start..i];
        let trimmed_front = word.trim_start_matches(|c: char| c.is_ascii_punctuation());
        let lead = word.len() - trimmed_front.len();
        let trimmed = trimmed_front.trim_end_matches(|c: char| c.is_ascii_punctuation());
        if trimmed.is_empty() {
            continue;
        }
        out.push(StatementWord {
            norm: trimmed.to_lowercase(),
            start: start + lead,
            end: start + lead + trimmed.len(),
        });
    }
    out
}

/// Normalized word sequence of an entity's text, punctuation-trimmed the
/// same way statement words are.
fn entity_words(text: &str) -> Vec<String> {
    statement_words(&normalize(text))
        .into_iter()
        .map(|w| w.norm)
        .collect()
}

struct Candidate {
    start_word: usize,
    n_words: usize,
    span: Range<usize>,
    /// Column(0) beats Cell(1) beats Number(2) on identical spans.
    priority: u8,
    target: EntityTarget,
}

/// Longest-match greedy linking: column names, cell values, and
/// standalone numbers, overlaps resolved longest-first then leftmost,
/// columns preferred over cells over numbers on ties.
pub fn link_entities(statement: &str, t: &Table) -> Vec<LinkedEntity> {
    let words = statement_words(statement);
    if words.is_empty() {
        return Vec::new();
    }
    let mut candidates: Vec<Candidate> = Vec::new();

    let mut push_matches =
        |needle: &[String], priority: u8, target: &EntityTarget, candidates: &mut Vec<Candidate>| {
            if needle.is_empty() || needle.len() > words.len() {
                return;
            }
            for start in 0..=(words.len() - needle.len()) {
                let window = &words[start..start + needle.len()];
                if window.iter().zip(needle).all(|(w, n)| w.norm == *n) {
                    candidates.push(Candidate {
                        start_word: start,
                        n_words: needle.len(),
                        span: window[0].start..window[needle.len() - 1].end,
                        priority,
                        target: target.clone(),
                    });
                }
            }
        };

    for (c, name) in t.norm_header().iter().enumerate() {
        push_matches(&entity_words(name), 0, &EntityTarget::Column(c), &mut candidates);
    }
    for (r, row) in t.rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let target = EntityTarget::Cell { row: r, col: c };
            push_matches(&entity_words(&cell.raw), 1, &target, &mut candidates);
            // numeric cells also match by value, e.g. "1,234" vs "1234"
            if let Some(n) = cell.as_number() {
                for (i, w) in words.iter().enumerate() {
                    if parse_number(&w.norm) == Some(n) && entity_words(&cell.raw) != [w.norm.clone()]
                    {
                        candidates.push(Candidate {
                            start_word: i,
                            n_words: 1,
                            span: w.start..w.end,
                            priority: 1,
                            target: target.clone(),
                        });
                    }
                }
            }
        }
    }
    for (i, w) in words.iter().enumerate() {
        if let Some(n) = parse_number(&w.norm) {
            candidates.push(Candidate {
                start_word: i,
                n_words: 1,
                span: w.start..w.end,
                priority: 2,
                target: EntityTarget::Number(n),
            });
        }
    }

    // longest first, then leftmost, then column > cell > number
    candidates.sort_by(|a, b| {
        b.n_words
            .cmp(&a.n_words)
            .then(a.start_word.cmp(&b.start_word))
            .then(a.priority.cmp(&b.priority))
            .then_with(|| format!("{:?}", a.target).cmp(&format!("{:?}", b.target)))
    });

    let mut taken: Vec<Range<usize>> = Vec::new();
    let mut out: Vec<LinkedEntity> = Vec::new();
    for cand in candidates {
        let overlaps = taken
            .iter()
            .any(|r| cand.span.start < r.end && r.start < cand.span.end);
        if overlaps {
            continue;
        }
        taken.push(cand.span.clone());
        out.push(LinkedEntity {
            surface: statement[cand.span.clone()].to_string(),
            target: cand.target,
            span: cand.span,
        });
    }
    out.sort_by_key(|e| e.span.start);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::load_table;

    fn fleet() -> Table {
        load_table(
            b"bus model#number in fleet#year\nscania omnicity#1#1999\nvolvo b10m#12#2001\nman lion#35#2003",
            '#',
        )
        .unwrap()
    }

    #[test]
    fn links_multi_word_column() {
        let t = fleet();
        let links = link_entities("the smallest Number In Fleet be 1", &t);
        let col = links
            .iter()
            .find(|l| l.target == EntityTarget::Column(1))
            .expect("column link");
        assert_eq!(col.surface, "Number In Fleet");
        // "1" links as the cell containing it
        assert!(links
            .iter()
            .any(|l| matches!(l.target, EntityTarget::Cell { row: 0, col: 1 })));
    }

    #[test]
    fn number_without_cell_match_falls_back_to_literal() {
        let t = fleet();
        let links = link_entities("the score be 777", &t);
        assert_eq!(
            links,
            vec![LinkedEntity {
                surface: "777".into(),
                target: EntityTarget::Number(Decimal::from(777)),
                span: 13..16,
            }]
        );
    }

    #[test]
    fn zero_overlap_gives_empty_list() {
        let t = fleet();
        assert!(link_entities("completely unrelated words", &t).is_empty());
    }

    #[test]
    fn longest_match_wins_over_contained_word() {
        let t = fleet();
        // "volvo b10m" is a cell; "b10m" alone never links
        let links = link_entities("volvo b10m be listed in 2001", &t);
        assert!(links.iter().any(
            |l| l.target == EntityTarget::Cell { row: 1, col: 0 } && l.surface == "volvo b10m"
        ));
        assert!(links
            .iter()
            .any(|l| matches!(l.target, EntityTarget::Cell { row: 1, col: 2 })));
    }

    #[test]
    fn punctuation_around_words_is_ignored() {
        let t = fleet();
        let links = link_entities("in 1999, scania omnicity arrived.", &t);
        assert!(links
            .iter()
            .any(|l| l.target == EntityTarget::Cell { row: 0, col: 0 }));
        assert!(links
            .iter()
            .any(|l| matches!(l.target, EntityTarget::Cell { row: 0, col: 2 })));
    }

    #[test]
    fn words_carry_correct_offsets() {
        let ws = statement_words("  Hello, (World) 42 ");
        assert_eq!(ws.len(), 3);
        assert_eq!(ws[0].norm, "hello");
        assert_eq!(&"  Hello, (World) 42 "[ws[0].start..ws[0].end], "Hello");
        assert_eq!(ws[1].norm, "world");
        assert_eq!(&"  Hello, (World) 42 "[ws[1].start..ws[1].end], "World");
        assert_eq!(ws[2].norm, "42");
    }
}
