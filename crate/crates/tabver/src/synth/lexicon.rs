//! Trigger lexicon: statement keywords that enable catalog functions
//! during synthesis, shrinking the search space.
//!
//! The lexicon lives in a versioned data file (`data/triggers.tsv`) so it
//! can be audited and extended without touching code; missed evidence is
//! dominated by linking and trigger gaps, so this is the first thing a
//! user will want to tune.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use thiserror::Error;

use crate::dsl::lookup;

use super::link::statement_words;

/// Functions enabled for every statement regardless of wording.
pub const BASE_FUNCTIONS: &[&str] = &[
    "and",
    "eq",
    "not_eq",
    "less",
    "greater",
    "filter_eq",
    "filter_not_eq",
    "filter_greater",
    "filter_less",
    "filter_greater_eq",
    "filter_less_eq",
    "hop",
];

const BUILTIN: &str = include_str!("../../data/triggers.tsv");

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("line {line}: expected `phrase<TAB>functions`")]
    Malformed { line: usize },
    #[error("line {line}: unknown function {name:?}")]
    UnknownFunction { line: usize, name: String },
    #[error("missing `#! version` header")]
    MissingVersion,
}

/// Parsed trigger lexicon.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerLexicon {
    version: u32,
    /// (phrase as normalized words, enabled functions)
    entries: Vec<(Vec<String>, Vec<&'static str>)>,
}

impl TriggerLexicon {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut version = None;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim_end();
            if let Some(rest) = line.strip_prefix("#!") {
                if let Some(v) = rest.trim().strip_prefix("version") {
                    version = v.trim().parse().ok();
                }
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (phrase, funcs) = line
                .split_once('\t')
                .ok_or(LexiconError::Malformed { line: line_no })?;
            let words: Vec<String> = phrase
                .split_whitespace()
                .map(|w| w.to_lowercase())
                .collect();
            if words.is_empty() {
                return Err(LexiconError::Malformed { line: line_no });
            }
            let mut names = Vec::new();
            for f in funcs.split(',') {
                let f = f.trim();
                let spec = lookup(f).ok_or_else(|| LexiconError::UnknownFunction {
                    line: line_no,
                    name: f.to_string(),
                })?;
                names.push(spec.name);
            }
            entries.push((words, names));
        }
        Ok(TriggerLexicon {
            version: version.ok_or(LexiconError::MissingVersion)?,
            entries,
        })
    }

    /// The lexicon bundled with the crate.
    pub fn builtin() -> &'static TriggerLexicon {
        static LEX: OnceLock<TriggerLexicon> = OnceLock::new();
        LEX.get_or_init(|| TriggerLexicon::parse(BUILTIN).expect("builtin lexicon parses"))
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// Functions this statement enables: the always-on base set plus
    /// every entry whose phrase occurs in the statement as a word
    /// sequence.
    pub fn enabled_functions(&self, statement: &str) -> BTreeSet<&'static str> {
        let words: Vec<String> = statement_words(statement)
            .into_iter()
            .map(|w| w.norm)
            .collect();
        let mut out: BTreeSet<&'static str> = BASE_FUNCTIONS.iter().copied().collect();
        for (phrase, funcs) in &self.entries {
            let hit = words
                .windows(phrase.len())
                .any(|w| w.iter().zip(phrase).all(|(a, b)| a == b));
            if hit {
                out.extend(funcs.iter().copied());
            }
        }
        out
    }
}

/// Enabled functions for a statement under the builtin lexicon.
pub fn trigger_functions(statement: &str) -> BTreeSet<&'static str> {
    TriggerLexicon::builtin().enabled_functions(statement)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_parses_with_version() {
        assert_eq!(TriggerLexicon::builtin().version(), 1);
    }

    #[test]
    fn smallest_triggers_min_family() {
        let fns = trigger_functions("the smallest number in fleet be 1");
        assert!(fns.contains("min"));
        assert!(fns.contains("argmin"));
        assert!(!fns.contains("max"));
    }

    #[test]
    fn only_triggers_only() {
        let fns = trigger_functions("there be only 1 game on 26 january 2011");
        assert!(fns.contains("only"));
    }

    #[test]
    fn no_trigger_words_gives_base_set() {
        let fns = trigger_functions("the venue be home");
        let base: BTreeSet<&str> = BASE_FUNCTIONS.iter().copied().collect();
        assert_eq!(fns, base);
    }

    #[test]
    fn multi_word_phrase_matches_in_sequence() {
        let fns = trigger_functions("alpha scored more than 3 points");
        assert!(fns.contains("greater"));
        let fns = trigger_functions("more players than that");
        assert!(!fns.contains("within"));
    }

    #[test]
    fn unknown_function_rejected() {
        let err = TriggerLexicon::parse("#! version 1\nfoo\tbar").unwrap_err();
        assert_eq!(
            err,
            LexiconError::UnknownFunction {
                line: 2,
                name: "bar".into()
            }
        );
    }

    #[test]
    fn version_header_required() {
        assert_eq!(
            TriggerLexicon::parse("most\targmax"),
            Err(LexiconError::MissingVersion)
        );
    }
}
