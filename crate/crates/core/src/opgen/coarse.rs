use super::{trace_operations, CoarseTag, Operation};

fn is_cept(op: &Operation) -> bool {
    matches!(op, Operation::Generate { .. } | Operation::GenerateSelf(_))
}

/// Replaces gap/jump operations with coarse orientation tags.
///
/// Each maximal run of consecutive reordering operations becomes one tag:
/// `BD` when the run starts with a jump back, `FD` otherwise (a gap opened
/// at the frontier, or a forward jump). Gaps opened right after a jump are
/// thereby dropped. With `swap_detection`, a `BD` whose following cept ends
/// immediately left of the previous cept and leaves no gap behind becomes `SW`.
pub fn to_coarse(ops: &[Operation], swap_detection: bool) -> Vec<Operation> {
    let swaps = if swap_detection {
        swap_targets(ops)
    } else {
        vec![false; ops.len()]
    };
    let mut out = Vec::with_capacity(ops.len());
    let mut k = 0;
    while k < ops.len() {
        if !ops[k].is_reordering() {
            out.push(ops[k].clone());
            k += 1;
            continue;
        }
        let start = k;
        while k < ops.len() && ops[k].is_reordering() {
            k += 1;
        }
        let tag = match ops[start] {
            Operation::Coarse(tag) => tag,
            Operation::JumpBack(_) if k < ops.len() && swaps[k] => CoarseTag::Swap,
            Operation::JumpBack(_) => CoarseTag::BackwardDiscontinuity,
            _ => CoarseTag::ForwardDiscontinuity,
        };
        out.push(Operation::Coarse(tag));
    }
    out
}

/// Marks cept generations that complete a swap with the previous cept.
fn swap_targets(ops: &[Operation]) -> Vec<bool> {
    let mut marks = vec![false; ops.len()];
    let Ok(trace) = trace_operations(ops) else {
        return marks;
    };
    let mut generated = 0usize;
    let mut max_pos: Option<usize> = None;
    let mut prev_cept: Option<&Vec<usize>> = None;
    for (k, op) in ops.iter().enumerate() {
        let Some(positions) = trace.source_positions[k].as_ref() else {
            continue;
        };
        generated += positions.len();
        let last = *positions.last().unwrap();
        max_pos = Some(max_pos.map_or(last, |m| m.max(last)));
        if !is_cept(op) {
            continue;
        }
        let gap_free = max_pos.is_none_or(|m| generated == m + 1);
        if let Some(prev) = prev_cept {
            if last + 1 == prev[0] && gap_free {
                marks[k] = true;
            }
        }
        prev_cept = Some(positions);
    }
    marks
}

/// Drops every reordering operation, keeping lexical operations in order.
pub fn to_lexical(ops: &[Operation]) -> Vec<Operation> {
    ops.iter().filter(|op| op.is_lexical()).cloned().collect()
}
