//! Recursive-descent parser for the textual program form.
//!
//! Grammar: `node := word | word '{' node (';' node)* '}'`. A backslash
//! escapes any character inside a word. Bare words become entity leaves;
//! `all_rows` is the whole-table view, and a word in a column argument
//! position is tagged as a column reference.

use thiserror::Error;

use super::catalog::{lookup, Sort};
use super::{EntityKind, Program, ProgramNode, ALL_ROWS};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown function {name:?}")]
    UnknownFunction { name: String },
    #[error("function {name:?} takes {want} arguments, got {got}")]
    Arity {
        name: String,
        got: usize,
        want: usize,
    },
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            position: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    /// Read a word up to an unescaped `{`, `}`, or `;`, resolving escapes.
    fn word(&mut self) -> Result<String, ParseError> {
        let mut out = String::new();
        loop {
            match self.peek() {
                None | Some(b'{') | Some(b'}') | Some(b';') => break,
                Some(b'\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(_) => {
                            let (ch, len) = self.next_char()?;
                            out.push(ch);
                            self.pos += len;
                        }
                        None => return Err(self.err("dangling escape")),
                    }
                }
                Some(_) => {
                    let (ch, len) = self.next_char()?;
                    out.push(ch);
                    self.pos += len;
                }
            }
        }
        Ok(out.trim().to_string())
    }

    fn next_char(&self) -> Result<(char, usize), ParseError> {
        let rest = std::str::from_utf8(&self.src[self.pos..])
            .map_err(|_| self.err("invalid UTF-8"))?;
        let ch = rest.chars().next().ok_or_else(|| self.err("unexpected end"))?;
        Ok((ch, ch.len_utf8()))
    }

    fn expect(&mut self, byte: u8) -> Result<(), ParseError> {
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {:?}", byte as char)))
        }
    }

    /// `slot` is the sort of the argument position this node fills, used
    /// to tag bare words; `None` at the root.
    fn node(&mut self, slot: Option<Sort>) -> Result<ProgramNode, ParseError> {
        self.skip_ws();
        let word = self.word()?;
        self.skip_ws();
        if self.peek() == Some(b'{') {
            let spec = lookup(&word).ok_or(ParseError::UnknownFunction { name: word.clone() })?;
            self.expect(b'{')?;
            let mut children = Vec::new();
            self.skip_ws();
            if self.peek() != Some(b'}') {
                loop {
                    let child_slot = spec.arg_sorts.get(children.len()).copied();
                    children.push(self.node(child_slot)?);
                    self.skip_ws();
                    match self.peek() {
                        Some(b';') => {
                            self.pos += 1;
                        }
                        Some(b'}') => break,
                        _ => return Err(self.err("expected ';' or '}'")),
                    }
                }
            }
            self.expect(b'}')?;
            if children.len() != spec.arity() {
                return Err(ParseError::Arity {
                    name: word,
                    got: children.len(),
                    want: spec.arity(),
                });
            }
            Ok(ProgramNode::Function {
                name: spec.name,
                children,
            })
        } else {
            if word.is_empty() {
                return Err(self.err("expected a word"));
            }
            if word == ALL_ROWS {
                return Ok(ProgramNode::all_rows());
            }
            if let Some(spec) = lookup(&word) {
                if spec.arity() == 0 {
                    return Ok(ProgramNode::Function {
                        name: spec.name,
                        children: Vec::new(),
                    });
                }
            }
            let kind = match slot {
                Some(Sort::Col) => EntityKind::Column,
                _ => EntityKind::Literal,
            };
            Ok(ProgramNode::Entity { kind, text: word })
        }
    }
}

/// Parse the canonical text form of a program.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(text);
    let root = p.node(None)?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(Program::new(root))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_comparison() {
        let p = parse_program("less { B ; A }").unwrap();
        match &p.root {
            ProgramNode::Function { name, children } => {
                assert_eq!(*name, "less");
                assert_eq!(children[0].text(), "B");
                assert_eq!(children[1].text(), "A");
            }
            _ => panic!("expected function root"),
        }
    }

    #[test]
    fn parses_all_rows_as_entity() {
        let p = parse_program("count { all_rows }").unwrap();
        match &p.root {
            ProgramNode::Function { name, children } => {
                assert_eq!(*name, "count");
                assert_eq!(
                    children[0],
                    ProgramNode::Entity {
                        kind: EntityKind::AllRows,
                        text: ALL_ROWS.into()
                    }
                );
            }
            _ => panic!("expected function root"),
        }
    }

    #[test]
    fn column_positions_are_tagged() {
        let p = parse_program("min { all_rows ; number in fleet }").unwrap();
        match &p.root {
            ProgramNode::Function { children, .. } => {
                assert_eq!(
                    children[1],
                    ProgramNode::Entity {
                        kind: EntityKind::Column,
                        text: "number in fleet".into()
                    }
                );
            }
            _ => panic!(),
        }
    }

    #[test]
    fn arity_is_checked() {
        assert_eq!(
            parse_program("and { eq { 1 ; 1 } }"),
            Err(ParseError::Arity {
                name: "and".into(),
                got: 1,
                want: 2
            })
        );
    }

    #[test]
    fn unknown_function_rejected() {
        assert_eq!(
            parse_program("frobnicate { 1 }"),
            Err(ParseError::UnknownFunction {
                name: "frobnicate".into()
            })
        );
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_program("eq { 1 ; 2 ") {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 11),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(matches!(
            parse_program(""),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse_program("eq { 1 ; 2 } junk"),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn escaped_delimiters_stay_in_entity_text() {
        let p = parse_program(r"eq { a\;b ; c\{d\}e }").unwrap();
        match &p.root {
            ProgramNode::Function { children, .. } => {
                assert_eq!(children[0].text(), "a;b");
                assert_eq!(children[1].text(), "c{d}e");
            }
            _ => panic!(),
        }
    }
}
