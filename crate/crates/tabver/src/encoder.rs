//! Deterministic contextual encoding of text pairs.
//!
//! The default backend is a hashed character-n-gram featurizer: every
//! token's vector is a fixed pseudo-random projection of its 3..5-gram
//! hashes plus a per-position-parity bias, and the sequence summary is
//! the token mean through a seeded affine map. It stands in for a
//! pre-trained encoder at desk scale while keeping the exact contract an
//! external model would provide; the `External` backend shells out to a
//! user adapter speaking a JSON-lines protocol.

use std::io::Write as _;
use std::ops::Range;
use std::process::{Command, Stdio};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::NodeSpan;
use crate::retrieval::EvidenceSet;
use crate::table::Table;

#[derive(Debug, Error, PartialEq)]
pub enum EncoderError {
    #[error("sequence of {got} tokens exceeds maximum {max} and truncation is disabled")]
    SequenceTooLong { got: usize, max: usize },
    #[error("span {range:?} of segment {segment:?} has no surviving tokens")]
    SpanNotFound { segment: Segment, range: Range<usize> },
    #[error("external encoder failed: {0}")]
    External(String),
}

/// Which input a token came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    A,
    B,
    Special,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub segment: Segment,
    /// Byte range in the source segment text (empty for specials).
    pub range: Range<usize>,
}

/// Per-token vectors plus the sequence summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub dim: usize,
    pub tokens: Vec<Token>,
    pub vectors: Vec<Vec<f64>>,
    /// The [CLS]-analogue for the whole pair.
    pub summary: Vec<f64>,
}

impl Encoding {
    /// Token index range whose characters overlap `range` in `segment`.
    pub fn token_range(&self, segment: Segment, range: &Range<usize>) -> Option<Range<usize>> {
        let mut first = None;
        let mut last = 0;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.segment == segment && tok.range.start < range.end && range.start < tok.range.end
            {
                if first.is_none() {
                    first = Some(i);
                }
                last = i + 1;
            }
        }
        first.map(|f| f..last)
    }

    /// Mean vector over the tokens covering a recorded span.
    pub fn node_init(&self, segment: Segment, range: &Range<usize>) -> Result<Vec<f64>, EncoderError> {
        let toks = self
            .token_range(segment, range)
            .ok_or(EncoderError::SpanNotFound {
                segment,
                range: range.clone(),
            })?;
        Ok(mean_rows(&self.vectors[toks]))
    }

    /// Mean vector over every token of one segment; zero vector when the
    /// segment is empty.
    pub fn segment_mean(&self, segment: Segment) -> Vec<f64> {
        let rows: Vec<Vec<f64>> = self
            .tokens
            .iter()
            .zip(&self.vectors)
            .filter(|(t, _)| t.segment == segment)
            .map(|(_, v)| v.clone())
            .collect();
        if rows.is_empty() {
            vec![0.0; self.dim]
        } else {
            mean_rows(&rows)
        }
    }
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let dim = rows[0].len();
    let mut out = vec![0.0; dim];
    for row in rows {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
    let n = rows.len() as f64;
    for o in &mut out {
        *o /= n;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Hashed,
    /// Spawn `command` per record; JSON-lines request/response protocol.
    External { command: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// Vector width F.
    pub dim: usize,
    pub max_sequence_length: usize,
    pub backend: Backend,
    /// Seed of the frozen featurizer parameters.
    pub seed: u64,
    /// Drop overflowing tokens instead of erroring.
    pub truncate: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 64,
            max_sequence_length: 512,
            backend: Backend::Hashed,
            seed: 17,
            truncate: true,
        }
    }
}

/// A configured encoder with its frozen parameters materialized.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub cfg: EncoderConfig,
    /// Affine summary map, row-major F x F.
    w_summary: Vec<f64>,
    b_summary: Vec<f64>,
    /// Bias added by token-position parity.
    parity: [Vec<f64>; 2],
}

impl Encoder {
    pub fn new(cfg: EncoderConfig) -> Self {
        assert!(cfg.dim >= 8, "encoder dim must be at least 8");
        assert!(
            cfg.max_sequence_length >= 16,
            "max sequence length must be at least 16"
        );
        let f = cfg.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x656e_636f_6465);
        let bound = 1.0 / (f as f64).sqrt();
        let w_summary = (0..f * f).map(|_| rng.gen_range(-bound..bound)).collect();
        let b_summary = (0..f).map(|_| rng.gen_range(-bound..bound)).collect();
        let parity_a = (0..f).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let parity_b = (0..f).map(|_| rng.gen_range(-0.1..0.1)).collect();
        Encoder {
            cfg,
            w_summary,
            b_summary,
            parity: [parity_a, parity_b],
        }
    }

    /// Encode a two-segment input. Layout: `[CLS] a.. [SEP] b.. [SEP]`,
    /// truncated from the tail of `b` then `a` when over budget.
    pub fn encode_pair(&self, segment_a: &str, segment_b: &str) -> Result<Encoding, EncoderError> {
        match &self.cfg.backend {
            Backend::Hashed => self.encode_hashed(segment_a, segment_b),
            Backend::External { command } => {
                external_encode(command, segment_a, segment_b, &self.cfg)
            }
        }
    }

    fn encode_hashed(&self, a: &str, b: &str) -> Result<Encoding, EncoderError> {
        let mut toks_a = tokenize(a);
        let mut toks_b = tokenize(b);
        let max = self.cfg.max_sequence_length;
        let total = toks_a.len() + toks_b.len() + 3;
        if total > max {
            if !self.cfg.truncate {
                return Err(EncoderError::SequenceTooLong { got: total, max });
            }
            let budget = max.saturating_sub(3);
            let keep_b = toks_b.len().min(budget.saturating_sub(toks_a.len().min(budget)));
            let keep_a = toks_a.len().min(budget - keep_b);
            toks_a.truncate(keep_a);
            toks_b.truncate(keep_b);
        }
        let mut tokens = Vec::with_capacity(toks_a.len() + toks_b.len() + 3);
        let mut texts: Vec<String> = Vec::with_capacity(tokens.capacity());
        tokens.push(Token {
            segment: Segment::Special,
            range: 0..0,
        });
        texts.push("[cls]".to_string());
        for (range, text) in toks_a {
            tokens.push(Token {
                segment: Segment::A,
                range,
            });
            texts.push(text);
        }
        tokens.push(Token {
            segment: Segment::Special,
            range: 0..0,
        });
        texts.push("[sep]".to_string());
        for (range, text) in toks_b {
            tokens.push(Token {
                segment: Segment::B,
                range,
            });
            texts.push(text);
        }
        tokens.push(Token {
            segment: Segment::Special,
            range: 0..0,
        });
        texts.push("[sep]".to_string());

        let f = self.cfg.dim;
        let vectors: Vec<Vec<f64>> = texts
            .iter()
            .enumerate()
            .map(|(pos, text)| {
                let mut v = hashed_token_vector(text, f);
                for (x, p) in v.iter_mut().zip(&self.parity[pos % 2]) {
                    *x += p;
                }
                v
            })
            .collect();
        let mean = mean_rows(&vectors);
        let mut summary = self.b_summary.clone();
        for (r, s) in summary.iter_mut().enumerate() {
            for (c, m) in mean.iter().enumerate() {
                *s += self.w_summary[r * f + c] * m;
            }
        }
        Ok(Encoding {
            dim: f,
            tokens,
            vectors,
            summary,
        })
    }

    /// Caption, then `row i : col is cell ; ..` per row, whole trailing
    /// rows dropped to leave room for the statement segment.
    pub fn linearize_table(&self, t: &Table) -> String {
        let reserve = (self.cfg.max_sequence_length / 4).min(64);
        let budget = self
            .cfg
            .max_sequence_length
            .saturating_sub(3)
            .saturating_sub(reserve);
        let mut segments: Vec<String> = Vec::new();
        if !t.caption.trim().is_empty() {
            segments.push(t.caption.trim().to_string());
        }
        let mut used: usize = segments.iter().map(|s| tokenize(s).len()).sum();
        for (i, row) in t.rows.iter().enumerate() {
            let cells: Vec<String> = t
                .header
                .iter()
                .zip(row)
                .map(|(h, c)| format!("{} is {}", h, c.raw))
                .collect();
            let segment = format!("row {} : {}", i + 1, cells.join(" ; "));
            let cost = tokenize(&segment).len() + 1;
            if used + cost > budget && !segments.is_empty() {
                break;
            }
            if used + cost > budget && segments.is_empty() && i > 0 {
                break;
            }
            used += cost;
            segments.push(segment);
        }
        segments.join(" . ")
    }

    pub fn linearize_evidence(&self, ev: &EvidenceSet) -> String {
        linearize_evidence(ev)
    }
}

/// Canonical renderings joined by " ; " in evidence order.
pub fn linearize_evidence(ev: &EvidenceSet) -> String {
    let parts: Vec<String> = ev.items.iter().map(|p| p.render()).collect();
    parts.join(" ; ")
}

/// Like [`linearize_evidence`], also returning each program node's
/// character span (preorder per program) in the joined string.
pub fn linearize_evidence_with_spans(ev: &EvidenceSet) -> (String, Vec<Vec<NodeSpan>>) {
    let mut text = String::new();
    let mut all_spans = Vec::with_capacity(ev.items.len());
    for (i, p) in ev.items.iter().enumerate() {
        if i > 0 {
            text.push_str(" ; ");
        }
        let offset = text.len();
        let (rendered, spans) = p.render_with_spans();
        text.push_str(&rendered);
        all_spans.push(
            spans
                .into_iter()
                .map(|s| NodeSpan {
                    preorder: s.preorder,
                    range: s.range.start + offset..s.range.end + offset,
                })
                .collect(),
        );
    }
    (text, all_spans)
}

/// Whitespace plus punctuation split: identifier-style runs (letters,
/// digits, `_`) are one token, every other non-space character is its
/// own token. Byte ranges index the source text.
pub fn tokenize(text: &str) -> Vec<(Range<usize>, String)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        let word_char = ch.is_alphanumeric() || ch == '_';
        if word_char {
            if start.is_none() {
                start = Some(i);
            }
        } else {
            if let Some(s) = start.take() {
                out.push((s..i, text[s..i].to_lowercase()));
            }
            if !ch.is_whitespace() {
                let end = i + ch.len_utf8();
                out.push((i..end, text[i..end].to_lowercase()));
            }
        }
    }
    if let Some(s) = start {
        out.push((s..text.len(), text[s..].to_lowercase()));
    }
    out
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fixed pseudo-random projection of a gram hash into F dimensions.
fn gram_vector(hash: u64, dim: usize, out: &mut [f64]) {
    let mut state = hash;
    for o in out.iter_mut().take(dim) {
        let u = splitmix_next(&mut state);
        *o += (u as f64 / u64::MAX as f64) * 2.0 - 1.0;
    }
}

/// Mean of the projected character 3..5-gram hashes of one token.
fn hashed_token_vector(token: &str, dim: usize) -> Vec<f64> {
    let chars: Vec<char> = token.chars().collect();
    let mut out = vec![0.0; dim];
    let mut grams = 0usize;
    for n in 3..=5usize {
        if chars.len() >= n {
            for w in chars.windows(n) {
                let s: String = w.iter().collect();
                gram_vector(fnv1a(s.as_bytes()), dim, &mut out);
                grams += 1;
            }
        }
    }
    if grams == 0 {
        gram_vector(fnv1a(token.as_bytes()), dim, &mut out);
        grams = 1;
    }
    for o in &mut out {
        *o /= grams as f64;
    }
    out
}

// ---------------------------------------------------------------------
// External adapter protocol (JSON lines, one record per process run)
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct ExternalRequest<'a> {
    version: u32,
    segment_a: &'a str,
    segment_b: &'a str,
    dim: usize,
    max_sequence_length: usize,
}

#[derive(Deserialize)]
struct ExternalToken {
    segment: Segment,
    start: usize,
    end: usize,
}

#[derive(Deserialize)]
struct ExternalResponse {
    version: u32,
    dim: usize,
    tokens: Vec<ExternalToken>,
    vectors: Vec<Vec<f64>>,
    summary: Vec<f64>,
}

pub const EXTERNAL_PROTOCOL_VERSION: u32 = 1;

fn external_encode(
    command: &[String],
    a: &str,
    b: &str,
    cfg: &EncoderConfig,
) -> Result<Encoding, EncoderError> {
    if command.is_empty() {
        return Err(EncoderError::External("empty adapter command".into()));
    }
    let request = serde_json::to_string(&ExternalRequest {
        version: EXTERNAL_PROTOCOL_VERSION,
        segment_a: a,
        segment_b: b,
        dim: cfg.dim,
        max_sequence_length: cfg.max_sequence_length,
    })
    .expect("request serializes");
    let mut child = Command::new(&command[0])
        .args(&command[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| EncoderError::External(format!("spawn {:?}: {e}", command[0])))?;
    {
        let stdin = child.stdin.as_mut().expect("piped stdin");
        stdin
            .write_all(request.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .map_err(|e| EncoderError::External(format!("write request: {e}")))?;
    }
    let output = child
        .wait_with_output()
        .map_err(|e| EncoderError::External(format!("wait: {e}")))?;
    if !output.status.success() {
        return Err(EncoderError::External(format!(
            "adapter exited with {}",
            output.status
        )));
    }
    let line = std::str::from_utf8(&output.stdout)
        .map_err(|_| EncoderError::External("non-UTF-8 response".into()))?
        .lines()
        .next()
        .ok_or_else(|| EncoderError::External("empty response".into()))?;
    let resp: ExternalResponse =
        serde_json::from_str(line).map_err(|e| EncoderError::External(format!("bad JSON: {e}")))?;
    if resp.version != EXTERNAL_PROTOCOL_VERSION {
        return Err(EncoderError::External(format!(
            "protocol version {} unsupported",
            resp.version
        )));
    }
    if resp.dim != cfg.dim {
        return Err(EncoderError::External(format!(
            "adapter dim {} does not match configured {}",
            resp.dim, cfg.dim
        )));
    }
    if resp.vectors.len() != resp.tokens.len()
        || resp.vectors.iter().any(|v| v.len() != resp.dim)
        || resp.summary.len() != resp.dim
    {
        return Err(EncoderError::External("inconsistent shapes".into()));
    }
    Ok(Encoding {
        dim: resp.dim,
        tokens: resp
            .tokens
            .into_iter()
            .map(|t| Token {
                segment: t.segment,
                range: t.start..t.end,
            })
            .collect(),
        vectors: resp.vectors,
        summary: resp.summary,
    })
}
