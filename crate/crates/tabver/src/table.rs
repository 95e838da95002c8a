//! Loading and validation of semi-structured tables.
//!
//! Tables are rectangular grids of cells with a header row and an optional
//! caption. Cells keep their raw text byte-exact (entity linking matches on
//! it) and carry a typed parse: a decimal number when the text passes the
//! numeric lexer, plain text otherwise. Numbers are exact decimals rather
//! than binary floats so executor equality never drifts.

use std::fmt::Write as _;
use std::path::Path;

use rust_decimal::Decimal;
use thiserror::Error;

/// Default cell delimiter of the on-disk table format.
pub const DEFAULT_DELIMITER: char = '#';

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("table bytes are not valid UTF-8")]
    Decode,
    #[error("table has no data rows")]
    Empty,
    #[error("row on line {line} has {got} cells, expected {want}")]
    RaggedRow { line: usize, got: usize, want: usize },
    #[error("header column {column} is blank")]
    BlankHeader { column: usize },
    #[error("column name {name:?} is ambiguous after normalization")]
    AmbiguousColumn { name: String },
}

/// Trim, lowercase, and collapse whitespace runs to single spaces.
///
/// This is the one normalization used everywhere text is matched: column
/// lookup, entity linking, cell comparison, and coreference edges.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.trim().chars() {
        if ch.is_whitespace() {
            pending_space = true;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            for lower in ch.to_lowercase() {
                out.push(lower);
            }
        }
    }
    out
}

/// Numeric lexer: optional sign, digits with optional comma thousands
/// separators (stripped, grouping not validated), optional decimal point
/// followed by at least one digit. The whole trimmed string must match.
pub fn parse_number(s: &str) -> Option<Decimal> {
    let t = s.trim();
    let mut chars = t.chars().peekable();
    let mut cleaned = String::with_capacity(t.len());
    if let Some(&c) = chars.peek() {
        if c == '+' || c == '-' {
            cleaned.push(c);
            chars.next();
        }
    }
    let mut int_digits = 0usize;
    let mut prev_digit = false;
    while let Some(&c) = chars.peek() {
        match c {
            '0'..='9' => {
                cleaned.push(c);
                int_digits += 1;
                prev_digit = true;
                chars.next();
            }
            ',' if prev_digit => {
                chars.next();
                // a separator must sit between digits
                if !matches!(chars.peek(), Some('0'..='9')) {
                    return None;
                }
                prev_digit = false;
            }
            _ => break,
        }
    }
    if int_digits == 0 {
        return None;
    }
    if let Some('.') = chars.peek() {
        cleaned.push('.');
        chars.next();
        let mut frac_digits = 0usize;
        while let Some(&c) = chars.peek() {
            if c.is_ascii_digit() {
                cleaned.push(c);
                frac_digits += 1;
                chars.next();
            } else {
                break;
            }
        }
        if frac_digits == 0 {
            return None;
        }
    }
    if chars.next().is_some() {
        return None;
    }
    cleaned.parse().ok()
}

/// Typed view of a cell's content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Parsed {
    /// Normalized text form, used for matching.
    Text(String),
    Number(Decimal),
}

/// One table cell: raw text preserved byte-exact plus its typed parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellValue {
    pub raw: String,
    pub parsed: Parsed,
}

impl CellValue {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let parsed = match parse_number(&raw) {
            Some(n) => Parsed::Number(n),
            None => Parsed::Text(normalize(&raw)),
        };
        CellValue { raw, parsed }
    }

    pub fn as_number(&self) -> Option<Decimal> {
        match &self.parsed {
            Parsed::Number(n) => Some(*n),
            Parsed::Text(_) => None,
        }
    }

    /// Normalized comparison key: numbers compare numerically, text
    /// lexically on the normalized form.
    pub fn norm_text(&self) -> String {
        match &self.parsed {
            Parsed::Number(n) => n.normalize().to_string(),
            Parsed::Text(t) => t.clone(),
        }
    }
}

/// A validated rectangular table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub id: String,
    pub caption: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<CellValue>>,
    norm_header: Vec<String>,
}

impl Table {
    pub fn new(
        id: impl Into<String>,
        caption: impl Into<String>,
        header: Vec<String>,
        raw_rows: Vec<Vec<String>>,
    ) -> Result<Self, TableError> {
        let header: Vec<String> = header;
        if header.is_empty() || raw_rows.is_empty() {
            return Err(TableError::Empty);
        }
        let want = header.len();
        let norm_header: Vec<String> = header.iter().map(|h| normalize(h)).collect();
        for (i, h) in norm_header.iter().enumerate() {
            if h.is_empty() {
                return Err(TableError::BlankHeader { column: i });
            }
        }
        let mut rows = Vec::with_capacity(raw_rows.len());
        for (i, raw) in raw_rows.into_iter().enumerate() {
            if raw.len() != want {
                return Err(TableError::RaggedRow {
                    line: i + 2,
                    got: raw.len(),
                    want,
                });
            }
            rows.push(raw.into_iter().map(CellValue::new).collect());
        }
        Ok(Table {
            id: id.into(),
            caption: caption.into(),
            header,
            rows,
            norm_header,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.header.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &CellValue {
        &self.rows[row][col]
    }

    pub fn norm_header(&self) -> &[String] {
        &self.norm_header
    }

    /// Case-insensitive, whitespace-normalized column lookup.
    ///
    /// Duplicate headers are tolerated until a query actually matches more
    /// than one of them.
    pub fn column_index(&self, name: &str) -> Result<Option<usize>, TableError> {
        let needle = normalize(name);
        let mut found = None;
        for (i, h) in self.norm_header.iter().enumerate() {
            if *h == needle {
                if found.is_some() {
                    return Err(TableError::AmbiguousColumn {
                        name: name.to_string(),
                    });
                }
                found = Some(i);
            }
        }
        Ok(found)
    }

    /// Re-serialize with the given delimiter; raw cell text round-trips
    /// exactly.
    pub fn to_delimited(&self, delimiter: char) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(&delimiter.to_string()));
        for row in &self.rows {
            let line: Vec<&str> = row.iter().map(|c| c.raw.as_str()).collect();
            let _ = writeln!(out, "{}", line.join(&delimiter.to_string()));
        }
        out
    }

    pub fn with_caption(mut self, caption: impl Into<String>) -> Self {
        self.caption = caption.into();
        self
    }
}

/// Parse delimiter-separated UTF-8 text; the first line is the header.
pub fn load_table(bytes: &[u8], delimiter: char) -> Result<Table, TableError> {
    let text = std::str::from_utf8(bytes).map_err(|_| TableError::Decode)?;
    let mut lines = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect::<Vec<_>>();
    // tolerate one trailing newline
    if lines.last() == Some(&"") {
        lines.pop();
    }
    if lines.is_empty() {
        return Err(TableError::Empty);
    }
    let header: Vec<String> = lines[0].split(delimiter).map(str::to_string).collect();
    let rows: Vec<Vec<String>> = lines[1..]
        .iter()
        .map(|l| l.split(delimiter).map(str::to_string).collect())
        .collect();
    Table::new("", "", header, rows)
}

/// Load a table file; the table id is the file stem.
pub fn load_table_file(path: &Path, delimiter: char) -> Result<Table, TableError> {
    let bytes = std::fs::read(path).map_err(|_| TableError::Decode)?;
    let mut t = load_table(&bytes, delimiter)?;
    t.id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loads_basic_table() {
        let t = load_table(b"a#b\nx#3", '#').unwrap();
        assert_eq!(t.n_cols(), 2);
        assert_eq!(t.n_rows(), 1);
        assert_eq!(t.cell(0, 1).as_number(), Some(Decimal::from(3)));
        assert_eq!(t.cell(0, 0).parsed, Parsed::Text("x".into()));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(load_table(b"", '#'), Err(TableError::Empty));
        // header but no data rows is equally unusable
        assert_eq!(load_table(b"a#b\n", '#'), Err(TableError::Empty));
    }

    #[test]
    fn ragged_row_reports_line_number() {
        let err = load_table(b"a#b\nx", '#').unwrap_err();
        assert_eq!(
            err,
            TableError::RaggedRow {
                line: 2,
                got: 1,
                want: 2
            }
        );
    }

    #[test]
    fn column_lookup_normalizes_case_and_whitespace() {
        let t = load_table(b"number in fleet#year\n12#1999", '#').unwrap();
        assert_eq!(t.column_index("Number In Fleet").unwrap(), Some(0));
        assert_eq!(t.column_index("  number  in fleet ").unwrap(), Some(0));
        assert_eq!(t.column_index("score").unwrap(), None);
    }

    #[test]
    fn duplicate_headers_error_only_when_queried() {
        let t = load_table(b"a#A\n1#2", '#').unwrap();
        assert_eq!(
            t.column_index("a"),
            Err(TableError::AmbiguousColumn { name: "a".into() })
        );
    }

    #[test]
    fn blank_header_rejected() {
        assert_eq!(
            load_table(b"a# \n1#2", '#'),
            Err(TableError::BlankHeader { column: 1 })
        );
    }

    #[test]
    fn numeric_lexer_cases() {
        assert_eq!(parse_number("1,234.5"), Some("1234.5".parse().unwrap()));
        assert_eq!(parse_number(" -42 "), Some(Decimal::from(-42)));
        assert_eq!(parse_number("+7"), Some(Decimal::from(7)));
        assert_eq!(parse_number("3."), None);
        assert_eq!(parse_number(".5"), None);
        assert_eq!(parse_number("1,,2"), None);
        assert_eq!(parse_number("12 kg"), None);
        assert_eq!(parse_number("26 january 2011"), None);
        assert_eq!(parse_number(""), None);
    }

    #[test]
    fn column_index_finds_every_distinct_header() {
        let t = load_table(b"alpha#beta#gamma\n1#2#3", '#').unwrap();
        for (i, h) in t.header.clone().iter().enumerate() {
            assert_eq!(t.column_index(h).unwrap(), Some(i));
        }
    }

    proptest! {
        #[test]
        fn serialization_round_trips_raw_cells(
            header in proptest::collection::vec("[a-z]{1,6}", 1..4),
            rows in proptest::collection::vec(
                proptest::collection::vec("[ -\\x22$-~]{0,8}", 1..4), 1..5),
        ) {
            let cols = header.len();
            let rows: Vec<Vec<String>> = rows
                .into_iter()
                .map(|r| (0..cols).map(|c| r.get(c).cloned().unwrap_or_default()).collect())
                .collect();
            if let Ok(t) = Table::new("t", "", header, rows) {
                let text = t.to_delimited('#');
                let back = load_table(text.as_bytes(), '#').unwrap();
                prop_assert_eq!(t.header, back.header);
                let raws: Vec<Vec<&str>> = t.rows.iter()
                    .map(|r| r.iter().map(|c| c.raw.as_str()).collect()).collect();
                let braws: Vec<Vec<&str>> = back.rows.iter()
                    .map(|r| r.iter().map(|c| c.raw.as_str()).collect()).collect();
                prop_assert_eq!(raws, braws);
            }
        }
    }
}
