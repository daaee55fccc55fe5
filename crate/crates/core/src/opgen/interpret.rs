use std::collections::BTreeMap;

use super::{Cept, Operation};
use crate::error::{Error, Result};

/// Result of replaying an operation sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub source: Vec<String>,
    pub target: Vec<String>,
    /// For each operation that generates source words, the sorted final
    /// source positions of those words.
    pub source_positions: Vec<Option<Vec<usize>>>,
}

enum Item {
    Word {
        op: usize,
        token: String,
        tails: Vec<(usize, String)>,
    },
    Gap,
}

struct Placed {
    op: Option<usize>,
    token: String,
}

/// Lays out anchored words with their offset-attached tails.
///
/// Anchors arrive in final left-to-right order; a tail at offset `d` from an
/// anchor placed at `i` lands at `i + d`.
fn lay_out(
    anchors: impl IntoIterator<Item = (Option<usize>, String, Vec<(usize, String)>)>,
    side: &str,
) -> Result<Vec<Placed>> {
    let mut out: Vec<Placed> = Vec::new();
    let mut pending: BTreeMap<usize, Placed> = BTreeMap::new();
    for (op, token, tails) in anchors {
        while let Some(word) = pending.remove(&out.len()) {
            out.push(word);
        }
        let at = out.len();
        out.push(Placed { op, token });
        for (offset, tail) in tails {
            let slot = Placed { op, token: tail };
            if pending.insert(at + offset, slot).is_some() {
                return Err(Error::CorruptSequence(format!(
                    "two {side} words claim position {}",
                    at + offset
                )));
            }
        }
    }
    while let Some(word) = pending.remove(&out.len()) {
        out.push(word);
    }
    if let Some((&pos, _)) = pending.iter().next() {
        return Err(Error::CorruptSequence(format!(
            "generation past sentence end: {side} word at position {pos} after {} words",
            out.len()
        )));
    }
    Ok(out)
}

fn split_cept(cept: &Cept) -> (String, Vec<(usize, String)>) {
    let tails = cept
        .offsets
        .iter()
        .zip(&cept.tokens)
        .skip(1)
        .map(|(&o, t)| (o, t.clone()))
        .collect();
    (cept.tokens[0].clone(), tails)
}

type TargetWord = (Option<usize>, String, Vec<(usize, String)>);

/// Replays operations, returning both sentences and where each operation's
/// source words ended up.
pub fn trace_operations(ops: &[Operation]) -> Result<Trace> {
    let mut items: Vec<Item> = Vec::new();
    let mut pointer = 0;
    // (source position, token, words attached after it) per target word.
    let mut target: Vec<TargetWord> = Vec::new();
    for (k, op) in ops.iter().enumerate() {
        let mut place = |token: String, tails: Vec<(usize, String)>| {
            items.insert(
                pointer,
                Item::Word {
                    op: k,
                    token,
                    tails,
                },
            );
            pointer += 1;
        };
        match op {
            Operation::Generate {
                source,
                target: tgt,
            } => {
                if source.tokens.is_empty() || tgt.tokens.is_empty() {
                    return Err(Error::CorruptSequence(format!("empty payload in {op}")));
                }
                let (head, tails) = split_cept(source);
                place(head, tails);
                let (head, tails) = split_cept(tgt);
                target.push((Some(k), head, tails));
            }
            Operation::GenerateSelf(w) => {
                place(w.clone(), Vec::new());
                target.push((Some(k), w.clone(), Vec::new()));
            }
            Operation::GenerateSourceOnly(w) => place(w.clone(), Vec::new()),
            Operation::GenerateTargetOnly(w) => target.push((Some(k), w.clone(), Vec::new())),
            Operation::InsertGap => {
                items.insert(pointer, Item::Gap);
                pointer += 1;
            }
            Operation::JumpBack(n) => {
                let mut seen = 0;
                let mut found = None;
                for idx in (0..pointer).rev() {
                    if matches!(items[idx], Item::Gap) {
                        seen += 1;
                        if seen == *n {
                            found = Some(idx);
                            break;
                        }
                    }
                }
                pointer = found.ok_or_else(|| {
                    Error::CorruptSequence(format!(
                        "operation {} jumps back {n} gaps but only {seen} are open",
                        k + 1
                    ))
                })?;
            }
            Operation::JumpForward => pointer = items.len(),
            Operation::Coarse(tag) => {
                return Err(Error::CorruptSequence(format!(
                    "coarse tag {} cannot be replayed",
                    tag.as_str()
                )))
            }
        }
    }

    let anchors = items.into_iter().filter_map(|item| match item {
        Item::Word { op, token, tails } => Some((Some(op), token, tails)),
        Item::Gap => None,
    });
    let source = lay_out(anchors, "source")?;
    let target = lay_out(target, "target")?;

    let mut source_positions: Vec<Option<Vec<usize>>> = vec![None; ops.len()];
    for (pos, word) in source.iter().enumerate() {
        if let Some(op) = word.op {
            source_positions[op].get_or_insert_with(Vec::new).push(pos);
        }
    }
    Ok(Trace {
        source: source.into_iter().map(|w| w.token).collect(),
        target: target.into_iter().map(|w| w.token).collect(),
        source_positions,
    })
}

/// Rebuilds `(source, target)` from an operation sequence.
pub fn interpret_operations(ops: &[Operation]) -> Result<(Vec<String>, Vec<String>)> {
    let trace = trace_operations(ops)?;
    Ok((trace.source, trace.target))
}
