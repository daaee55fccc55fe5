//! Source/target token streams and fixed-width training instances.
//!
//! An operation sequence is split into two synchronized streams:
//! generated pairs put their source side on the source stream and their
//! target side on the target stream, source-only and target-only words go
//! to their own side, `GEN_SELF(w)` puts `w` on both, and every reordering
//! symbol is appended to both. The source stream thereby follows target
//! order.
//!
//! Instance layout is fixed: the `n - 1` preceding target-stream tokens,
//! oldest first, then the `m` source-stream tokens ending at the source
//! position synchronized with the predicted token, oldest first. Missing
//! positions are padded with `<s>`. Training and scoring both go through
//! [`make_instances`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::{read_text_lines, write_lines};
use crate::error::{Error, Result};
use crate::opgen::{to_coarse, to_lexical, Operation};
use crate::{BOS, EOS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamVariant {
    /// Full gap/jump operations.
    Osm,
    /// Coarse FD/BD/SW tags.
    Coarse,
    /// Lexical operations only.
    Lexical,
}

impl StreamVariant {
    /// Projects a generator-produced sequence onto this variant.
    pub fn project(self, ops: &[Operation]) -> Vec<Operation> {
        match self {
            StreamVariant::Osm => ops.to_vec(),
            StreamVariant::Coarse => to_coarse(ops, false),
            StreamVariant::Lexical => to_lexical(ops),
        }
    }

    /// Checks that `ops` only uses operations this variant allows.
    pub fn check(self, ops: &[Operation]) -> Result<()> {
        let bad = ops.iter().find(|op| match (self, op) {
            (_, op) if op.is_lexical() => false,
            (StreamVariant::Osm, Operation::Coarse(_)) => true,
            (StreamVariant::Osm, _) => false,
            (StreamVariant::Coarse, Operation::Coarse(_)) => false,
            _ => true,
        });
        match bad {
            Some(op) => Err(Error::VariantMismatch(format!(
                "{op} is not allowed in the {self} variant"
            ))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for StreamVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamVariant::Osm => "osm",
            StreamVariant::Coarse => "coarse",
            StreamVariant::Lexical => "lexical",
        })
    }
}

impl FromStr for StreamVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "osm" => Ok(StreamVariant::Osm),
            "coarse" => Ok(StreamVariant::Coarse),
            "lexical" => Ok(StreamVariant::Lexical),
            _ => Err(format!("unknown variant {s:?} (osm, coarse, lexical)")),
        }
    }
}

/// True for the symbols reordering operations contribute to streams.
pub fn is_reordering_symbol(token: &str) -> bool {
    matches!(token, "Insert_Gap" | "Jump_Forward" | "FD" | "BD" | "SW")
        || token
            .strip_prefix("Jump_Back_")
            .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

/// Synchronized streams of one sentence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StreamPair {
    pub source: Vec<String>,
    pub target: Vec<String>,
    /// For each target token, the source-stream length when it was emitted.
    pub sync: Vec<usize>,
}

impl StreamPair {
    fn emit(&mut self, source: Vec<String>, target: Vec<String>) {
        self.source.extend(source);
        for tok in target {
            self.target.push(tok);
            self.sync.push(self.source.len());
        }
    }

    pub fn sync_line(&self) -> String {
        self.sync
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Tokens an operation contributes to the (source, target) streams.
///
/// With `collapse`, multi-word payloads become one `_`-joined token;
/// otherwise each word is its own token.
pub fn stream_tokens(op: &Operation, collapse: bool) -> (Vec<String>, Vec<String>) {
    let words = |tokens: &[String]| -> Vec<String> {
        if collapse {
            vec![tokens.join("_")]
        } else {
            tokens.to_vec()
        }
    };
    match op {
        Operation::Generate { source, target } => (words(&source.tokens), words(&target.tokens)),
        Operation::GenerateSourceOnly(w) => (vec![w.clone()], vec![]),
        Operation::GenerateTargetOnly(w) => (vec![], vec![w.clone()]),
        Operation::GenerateSelf(w) => (vec![w.clone()], vec![w.clone()]),
        reordering => {
            let symbol = reordering.stream_symbol().expect("reordering operation");
            (vec![symbol.clone()], vec![symbol])
        }
    }
}

/// Splits `ops` (already in `variant` form) into collapsed streams.
pub fn split_streams(ops: &[Operation], variant: StreamVariant) -> Result<StreamPair> {
    split_streams_with(ops, variant, true)
}

pub fn split_streams_with(
    ops: &[Operation],
    variant: StreamVariant,
    collapse: bool,
) -> Result<StreamPair> {
    variant.check(ops)?;
    let mut sp = StreamPair::default();
    for op in ops {
        let (src, tgt) = stream_tokens(op, collapse);
        sp.emit(src, tgt);
    }
    Ok(sp)
}

/// One prediction event: `(n - 1) + m` context tokens and the next target-stream token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingInstance {
    pub context: Vec<String>,
    pub label: String,
}

impl TrainingInstance {
    /// Debug dump form `label<TAB>ctx1 ctx2 ...`.
    pub fn dump_line(&self) -> String {
        format!("{}\t{}", self.label, self.context.join(" "))
    }
}

/// Builds the context of the event predicting the token after `target_history`.
///
/// `target_history` and `source_history` are the stream prefixes (only their
/// tails matter); `source_len` is the synchronized source position.
pub fn context_window<S: AsRef<str>>(
    target_history: &[S],
    source_history: &[S],
    n: usize,
    m: usize,
) -> Vec<String> {
    let mut context = Vec::with_capacity(n.saturating_sub(1) + m);
    let tail = |hist: &[S], width: usize, out: &mut Vec<String>| {
        let have = hist.len().min(width);
        out.extend(std::iter::repeat_n(BOS.to_string(), width - have));
        out.extend(
            hist[hist.len() - have..]
                .iter()
                .map(|t| t.as_ref().to_owned()),
        );
    };
    tail(target_history, n.saturating_sub(1), &mut context);
    tail(source_history, m, &mut context);
    context
}

/// Training instances of one sentence: one per target-stream token plus the end event.
pub fn make_instances(sp: &StreamPair, n: usize, m: usize) -> Vec<TrainingInstance> {
    assert!(n >= 1, "target order must be at least 1");
    let mut out = Vec::with_capacity(sp.target.len() + 1);
    for (j, label) in sp.target.iter().enumerate() {
        out.push(TrainingInstance {
            context: context_window(&sp.target[..j], &sp.source[..sp.sync[j]], n, m),
            label: label.clone(),
        });
    }
    out.push(TrainingInstance {
        context: context_window(&sp.target, &sp.source, n, m),
        label: EOS.to_string(),
    });
    out
}

/// Writes stream corpus files: source stream, target stream, sync.
pub fn write_stream_corpus(
    pairs: &[StreamPair],
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
    sync_path: impl AsRef<Path>,
) -> Result<()> {
    write_lines(src_path.as_ref(), pairs.iter().map(|p| p.source.join(" ")))?;
    write_lines(tgt_path.as_ref(), pairs.iter().map(|p| p.target.join(" ")))?;
    write_lines(sync_path.as_ref(), pairs.iter().map(StreamPair::sync_line))
}

pub fn read_stream_corpus(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
    sync_path: impl AsRef<Path>,
) -> Result<Vec<StreamPair>> {
    let src = read_text_lines(src_path.as_ref())?;
    let tgt = read_text_lines(tgt_path.as_ref())?;
    let sync = read_text_lines(sync_path.as_ref())?;
    if src.len() != tgt.len() || src.len() != sync.len() {
        return Err(Error::LineCountMismatch(format!(
            "stream files have {} / {} / {} lines",
            src.len(),
            tgt.len(),
            sync.len()
        )));
    }
    let words = |s: &str| s.split_whitespace().map(str::to_owned).collect::<Vec<_>>();
    src.iter()
        .zip(&tgt)
        .zip(&sync)
        .enumerate()
        .map(|(k, ((s, t), a))| {
            let sp = StreamPair {
                source: words(s),
                target: words(t),
                sync: a
                    .split_whitespace()
                    .map(|x| {
                        x.parse().map_err(|_| Error::Parse {
                            line: k + 1,
                            column: 1,
                            message: format!("bad sync value {x:?}"),
                        })
                    })
                    .collect::<Result<_>>()?,
            };
            let consistent = sp.sync.len() == sp.target.len()
                && sp.sync.windows(2).all(|w| w[0] <= w[1])
                && sp.sync.last().is_none_or(|&a| a <= sp.source.len());
            if !consistent {
                return Err(Error::Validation {
                    sentence: k + 1,
                    message: "sync line does not match the streams".into(),
                });
            }
            Ok(sp)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opgen::OperationSequence;

    fn ops(text: &str) -> Vec<Operation> {
        OperationSequence::parse_line(text, 0).unwrap().ops
    }

    #[test]
    fn monotone_streams() {
        let sp = split_streams(&ops("GEN(a|A) GEN(b|B)"), StreamVariant::Osm).unwrap();
        assert_eq!(sp.source, ["a", "b"]);
        assert_eq!(sp.target, ["A", "B"]);
        assert_eq!(sp.sync, [1, 2]);
    }

    #[test]
    fn unaligned_words_stay_on_their_side() {
        let sp = split_streams(
            &ops("GEN_T(it) GEN_S(,) GEN_SELF(x)"),
            StreamVariant::Lexical,
        )
        .unwrap();
        assert_eq!(sp.source, [",", "x"]);
        assert_eq!(sp.target, ["it", "x"]);
        assert_eq!(sp.sync, [0, 2]);
    }

    #[test]
    fn variant_mismatch_is_rejected() {
        assert!(split_streams(&ops("FD GEN(a|A)"), StreamVariant::Osm).is_err());
        assert!(split_streams(&ops("GAP GEN(a|A)"), StreamVariant::Coarse).is_err());
        assert!(split_streams(&ops("BD GEN(a|A)"), StreamVariant::Lexical).is_err());
        assert!(split_streams(&ops("BD GEN(a|A)"), StreamVariant::Coarse).is_ok());
    }

    #[test]
    fn symbol_recognition() {
        for s in [
            "Insert_Gap",
            "Jump_Back_12",
            "Jump_Forward",
            "FD",
            "BD",
            "SW",
        ] {
            assert!(is_reordering_symbol(s), "{s}");
        }
        for s in ["Jump_Back_", "Jump_Back_x", "gap", "Insert"] {
            assert!(!is_reordering_symbol(s), "{s}");
        }
    }

    #[test]
    fn unigram_instances() {
        let sp = split_streams(&ops("GEN(a|A) GEN(b|B)"), StreamVariant::Osm).unwrap();
        let inst = make_instances(&sp, 1, 0);
        assert_eq!(inst.len(), 3);
        assert!(inst.iter().all(|i| i.context.is_empty()));
        let labels: Vec<_> = inst.iter().map(|i| i.label.as_str()).collect();
        assert_eq!(labels, ["A", "B", EOS]);
    }

    #[test]
    fn padding_and_window_alignment() {
        let sp = split_streams(&ops("GAP GEN(b|B) JB_1 GEN(a|A)"), StreamVariant::Osm).unwrap();
        let inst = make_instances(&sp, 3, 2);
        assert_eq!(inst[0].context, [BOS, BOS, BOS, "Insert_Gap"]);
        assert_eq!(inst[0].label, "Insert_Gap");
        assert_eq!(inst[1].context, [BOS, "Insert_Gap", "Insert_Gap", "b"]);
        assert_eq!(inst[4].label, EOS);
        assert_eq!(inst[4].context, ["Jump_Back_1", "A", "Jump_Back_1", "a"]);
        assert_eq!(inst[1].dump_line(), "B\t<s> Insert_Gap Insert_Gap b");
    }

    #[test]
    fn empty_sentence_has_only_the_end_event() {
        let inst = make_instances(&StreamPair::default(), 3, 2);
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].context, vec![BOS; 4]);
    }

    #[test]
    fn stream_corpus_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = |n: &str| dir.path().join(n);
        let pairs = vec![
            split_streams(
                &ops("GEN_T(it) GAP GEN(b|B) JB_1 GEN(a_c|A)"),
                StreamVariant::Osm,
            )
            .unwrap(),
            StreamPair::default(),
        ];
        write_stream_corpus(&pairs, p("s"), p("t"), p("a")).unwrap();
        assert_eq!(read_stream_corpus(p("s"), p("t"), p("a")).unwrap(), pairs);
    }
}
