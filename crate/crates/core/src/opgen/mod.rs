//! Operation sequences: extraction from aligned pairs, interpretation back
//! into sentence pairs, and the coarse / lexical-only projections.
//!
//! Text form of one operation (one sentence per line, whitespace-separated):
//!
//! | operation              | text             |
//! |------------------------|------------------|
//! | Generate               | `GEN(src|tgt)`   |
//! | Generate Source Only   | `GEN_S(src)`     |
//! | Generate Target Only   | `GEN_T(tgt)`     |
//! | Generate Self          | `GEN_SELF(w)`    |
//! | Insert Gap             | `GAP`            |
//! | Jump Back (n)          | `JB_n`           |
//! | Jump Forward           | `JF`             |
//! | coarse tags            | `FD`, `BD`, `SW` |
//!
//! Multi-word payloads are joined with `_`. Inside a payload the characters
//! `\`, `_`, `|` and `@` are backslash-escaped. A side whose words are not
//! contiguous in the sentence carries its layout after `@`, as offsets from
//! its first word: `GEN(nicht@0,2|not)`.

mod coarse;
mod generate;
mod interpret;
mod mtu;

use std::fmt;
use std::str::FromStr;

pub use coarse::{to_coarse, to_lexical};
pub use generate::{generate_operations, phrases_for_segmentation, unit_count, Generator, Phrase};
pub use interpret::{interpret_operations, trace_operations, Trace};
pub use mtu::{
    classify_initial_orientation, classify_orientation, extract_mtus, Mtu, MtuExtraction,
    Orientation,
};

use crate::error::{Error, Result};

/// The words of one side of a minimal translation unit, with their layout.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cept {
    pub tokens: Vec<String>,
    /// Position of each token relative to the first one; starts at 0, strictly increasing.
    pub offsets: Vec<usize>,
}

impl Cept {
    pub fn contiguous<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let offsets = (0..tokens.len()).collect();
        Cept { tokens, offsets }
    }

    /// Builds a cept from absolute, sorted positions.
    pub fn from_positions(positions: &[usize], tokens: Vec<String>) -> Self {
        let first = positions.first().copied().unwrap_or(0);
        Cept {
            offsets: positions.iter().map(|p| p - first).collect(),
            tokens,
        }
    }

    pub fn is_contiguous(&self) -> bool {
        self.offsets.iter().enumerate().all(|(k, &o)| k == o)
    }

    /// Tokens joined with `_`, the single-token form used in streams.
    pub fn joined(&self) -> String {
        self.tokens.join("_")
    }

    fn serialize(&self) -> String {
        let mut text = self
            .tokens
            .iter()
            .map(|t| escape(t))
            .collect::<Vec<_>>()
            .join("_");
        if !self.is_contiguous() {
            let layout: Vec<String> = self.offsets.iter().map(usize::to_string).collect();
            text.push('@');
            text.push_str(&layout.join(","));
        }
        text
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let (words, layout) = match find_unescaped(text, '@') {
            Some(at) => (&text[..at], Some(&text[at + 1..])),
            None => (text, None),
        };
        let tokens = split_unescaped(words, '_')
            .into_iter()
            .map(|t| unescape(&t))
            .collect::<Vec<_>>();
        if tokens.iter().any(String::is_empty) {
            return Err(format!("empty token in payload {text:?}"));
        }
        let cept = match layout {
            None => Cept::contiguous(tokens),
            Some(layout) => {
                let offsets = layout
                    .split(',')
                    .map(|o| {
                        o.parse::<usize>()
                            .map_err(|_| format!("bad layout {layout:?}"))
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                if offsets.len() != tokens.len()
                    || offsets.first() != Some(&0)
                    || offsets.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(format!("inconsistent layout {layout:?}"));
                }
                Cept { tokens, offsets }
            }
        };
        Ok(cept)
    }
}

/// Coarse reordering tag; monotone transitions carry no tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoarseTag {
    ForwardDiscontinuity,
    BackwardDiscontinuity,
    Swap,
}

impl CoarseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CoarseTag::ForwardDiscontinuity => "FD",
            CoarseTag::BackwardDiscontinuity => "BD",
            CoarseTag::Swap => "SW",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operation {
    Generate {
        source: Cept,
        target: Cept,
    },
    GenerateSourceOnly(String),
    GenerateTargetOnly(String),
    GenerateSelf(String),
    InsertGap,
    /// Jump to the n-th gap counted leftwards from the insertion point (nearest = 1).
    JumpBack(usize),
    JumpForward,
    Coarse(CoarseTag),
}

impl Operation {
    pub fn generate<S: Into<String>, T: Into<String>>(
        source: impl IntoIterator<Item = S>,
        target: impl IntoIterator<Item = T>,
    ) -> Self {
        Operation::Generate {
            source: Cept::contiguous(source),
            target: Cept::contiguous(target),
        }
    }

    /// Gap and jump operations, and coarse tags.
    pub fn is_reordering(&self) -> bool {
        matches!(
            self,
            Operation::InsertGap
                | Operation::JumpBack(_)
                | Operation::JumpForward
                | Operation::Coarse(_)
        )
    }

    pub fn is_lexical(&self) -> bool {
        !self.is_reordering()
    }

    /// Symbol placed in the streams for reordering operations.
    pub fn stream_symbol(&self) -> Option<String> {
        match self {
            Operation::InsertGap => Some("Insert_Gap".into()),
            Operation::JumpBack(n) => Some(format!("Jump_Back_{n}")),
            Operation::JumpForward => Some("Jump_Forward".into()),
            Operation::Coarse(tag) => Some(tag.as_str().into()),
            _ => None,
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operation::Generate { source, target } => {
                write!(f, "GEN({}|{})", source.serialize(), target.serialize())
            }
            Operation::GenerateSourceOnly(w) => write!(f, "GEN_S({})", escape(w)),
            Operation::GenerateTargetOnly(w) => write!(f, "GEN_T({})", escape(w)),
            Operation::GenerateSelf(w) => write!(f, "GEN_SELF({})", escape(w)),
            Operation::InsertGap => f.write_str("GAP"),
            Operation::JumpBack(n) => write!(f, "JB_{n}"),
            Operation::JumpForward => f.write_str("JF"),
            Operation::Coarse(tag) => f.write_str(tag.as_str()),
        }
    }
}

impl FromStr for Operation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let single = |inner: &str| -> std::result::Result<String, String> {
            if find_unescaped(inner, '_').is_some() || find_unescaped(inner, '|').is_some() {
                return Err(format!("single-word payload expected in {s:?}"));
            }
            let w = unescape(inner);
            if w.is_empty() {
                Err(format!("empty payload in {s:?}"))
            } else {
                Ok(w)
            }
        };
        let wrapped = |prefix: &str| s.strip_prefix(prefix).and_then(|r| r.strip_suffix(')'));
        match s {
            "GAP" => return Ok(Operation::InsertGap),
            "JF" => return Ok(Operation::JumpForward),
            "FD" => return Ok(Operation::Coarse(CoarseTag::ForwardDiscontinuity)),
            "BD" => return Ok(Operation::Coarse(CoarseTag::BackwardDiscontinuity)),
            "SW" => return Ok(Operation::Coarse(CoarseTag::Swap)),
            _ => {}
        }
        if let Some(n) = s.strip_prefix("JB_") {
            let n: usize = n.parse().map_err(|_| format!("bad jump index in {s:?}"))?;
            if n == 0 {
                return Err("jump-back index must be at least 1".into());
            }
            return Ok(Operation::JumpBack(n));
        }
        if let Some(inner) = wrapped("GEN_SELF(") {
            return single(inner).map(Operation::GenerateSelf);
        }
        if let Some(inner) = wrapped("GEN_S(") {
            return single(inner).map(Operation::GenerateSourceOnly);
        }
        if let Some(inner) = wrapped("GEN_T(") {
            return single(inner).map(Operation::GenerateTargetOnly);
        }
        if let Some(inner) = wrapped("GEN(") {
            let bar = find_unescaped(inner, '|').ok_or_else(|| format!("missing '|' in {s:?}"))?;
            let source = Cept::parse(&inner[..bar])?;
            let target = Cept::parse(&inner[bar + 1..])?;
            return Ok(Operation::Generate { source, target });
        }
        Err(format!("unknown operation {s:?}"))
    }
}

/// Operations of one sentence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OperationSequence {
    pub ops: Vec<Operation>,
    /// 0-based index of the originating sentence.
    pub sentence: usize,
}

impl OperationSequence {
    pub fn new(ops: Vec<Operation>, sentence: usize) -> Self {
        OperationSequence { ops, sentence }
    }

    /// Parses one line of an operation corpus.
    pub fn parse_line(line: &str, sentence: usize) -> Result<Self> {
        let mut ops = Vec::new();
        let mut column = 1;
        for piece in line.split(' ') {
            if !piece.is_empty() {
                ops.push(piece.parse().map_err(|message| Error::Parse {
                    line: sentence + 1,
                    column,
                    message,
                })?);
            }
            column += piece.len() + 1;
        }
        Ok(OperationSequence { ops, sentence })
    }

    pub fn tokens(&self) -> Vec<String> {
        self.ops.iter().map(Operation::to_string).collect()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

impl fmt::Display for OperationSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens().join(" "))
    }
}

fn escape(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    for c in token.chars() {
        if matches!(c, '\\' | '_' | '|' | '@') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn unescape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(next) = chars.next() {
                out.push(next);
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn find_unescaped(text: &str, needle: char) -> Option<usize> {
    let mut escaped = false;
    for (idx, c) in text.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == needle {
            return Some(idx);
        }
    }
    None
}

fn split_unescaped(text: &str, sep: char) -> Vec<String> {
    let mut parts = vec![String::new()];
    let mut escaped = false;
    for c in text.chars() {
        if escaped {
            parts.last_mut().unwrap().push(c);
            escaped = false;
        } else if c == '\\' {
            parts.last_mut().unwrap().push(c);
            escaped = true;
        } else if c == sep {
            parts.push(String::new());
        } else {
            parts.last_mut().unwrap().push(c);
        }
    }
    parts
}

/// Reads an operation corpus, one sequence per line.
pub fn read_operation_corpus(path: impl AsRef<std::path::Path>) -> Result<Vec<OperationSequence>> {
    crate::corpus::read_text_lines(path.as_ref())?
        .iter()
        .enumerate()
        .map(|(k, line)| OperationSequence::parse_line(line, k))
        .collect()
}

pub fn write_operation_corpus(
    path: impl AsRef<std::path::Path>,
    sequences: &[OperationSequence],
) -> Result<()> {
    crate::corpus::write_lines(path.as_ref(), sequences.iter().map(ToString::to_string))
}
