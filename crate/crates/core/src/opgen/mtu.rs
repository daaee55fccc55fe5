use std::collections::BTreeMap;

use crate::corpus::AlignedSentencePair;
use crate::error::{Error, Result};

/// Minimal translation unit: one connected component of the alignment graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mtu {
    pub source_positions: Vec<usize>,
    pub target_positions: Vec<usize>,
    pub source_tokens: Vec<String>,
    pub target_tokens: Vec<String>,
}

impl Mtu {
    pub fn source_text(&self) -> String {
        self.source_tokens.join(" ")
    }

    pub fn target_text(&self) -> String {
        self.target_tokens.join(" ")
    }

    pub fn is_aligned(&self) -> bool {
        !self.source_positions.is_empty() && !self.target_positions.is_empty()
    }

    fn source_span(&self) -> Option<(usize, usize)> {
        Some((
            *self.source_positions.first()?,
            *self.source_positions.last()?,
        ))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MtuExtraction {
    /// Aligned units ordered by their smallest target position.
    pub mtus: Vec<Mtu>,
    pub unaligned_source: Vec<usize>,
    pub unaligned_target: Vec<usize>,
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut x = x;
        while self.0[x] != root {
            let next = self.0[x];
            self.0[x] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Connected components over `links` between `n_src` source and `n_tgt`
/// target nodes, as (sorted source indices, sorted target indices), ordered
/// by smallest target index. Isolated nodes are not returned.
pub(crate) fn components(
    n_src: usize,
    n_tgt: usize,
    links: impl IntoIterator<Item = (usize, usize)>,
) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut sets = DisjointSet((0..n_src + n_tgt).collect());
    let mut linked = vec![false; n_src + n_tgt];
    for (i, j) in links {
        sets.union(i, n_src + j);
        linked[i] = true;
        linked[n_src + j] = true;
    }
    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (node, _) in linked.iter().enumerate().filter(|(_, &l)| l) {
        let root = sets.find(node);
        let entry = groups.entry(root).or_default();
        if node < n_src {
            entry.0.push(node);
        } else {
            entry.1.push(node - n_src);
        }
    }
    let mut out: Vec<_> = groups.into_values().collect();
    out.sort_by_key(|(_, tgt)| tgt[0]);
    out
}

/// Minimal translation units of a pair, in target order.
pub fn extract_mtus(pair: &AlignedSentencePair) -> MtuExtraction {
    let comps = components(
        pair.source.len(),
        pair.target.len(),
        pair.links.iter().copied(),
    );
    let mut src_aligned = vec![false; pair.source.len()];
    let mut tgt_aligned = vec![false; pair.target.len()];
    let mtus = comps
        .into_iter()
        .map(|(src, tgt)| {
            src.iter().for_each(|&i| src_aligned[i] = true);
            tgt.iter().for_each(|&j| tgt_aligned[j] = true);
            Mtu {
                source_tokens: src.iter().map(|&i| pair.source[i].clone()).collect(),
                target_tokens: tgt.iter().map(|&j| pair.target[j].clone()).collect(),
                source_positions: src,
                target_positions: tgt,
            }
        })
        .collect();
    MtuExtraction {
        mtus,
        unaligned_source: (0..pair.source.len())
            .filter(|&i| !src_aligned[i])
            .collect(),
        unaligned_target: (0..pair.target.len())
            .filter(|&j| !tgt_aligned[j])
            .collect(),
    }
}

/// Orientation of a unit relative to the previous one, with the
/// discontinuous class split by direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    Monotone,
    Swap,
    ForwardDiscontinuous,
    BackwardDiscontinuous,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::Monotone,
        Orientation::Swap,
        Orientation::ForwardDiscontinuous,
        Orientation::BackwardDiscontinuous,
    ];

    pub fn is_discontinuous(self) -> bool {
        matches!(
            self,
            Orientation::ForwardDiscontinuous | Orientation::BackwardDiscontinuous
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            Orientation::Monotone => "M",
            Orientation::Swap => "S",
            Orientation::ForwardDiscontinuous => "FD",
            Orientation::BackwardDiscontinuous => "BD",
        }
    }

    /// Three-way label (M, S, D).
    pub fn coarse_label(self) -> &'static str {
        if self.is_discontinuous() {
            "D"
        } else {
            self.label()
        }
    }
}

/// Orientation of `cur` with respect to `prev`, based on source spans.
pub fn classify_orientation(prev: &Mtu, cur: &Mtu) -> Result<Orientation> {
    let (prev_start, prev_end) = prev
        .source_span()
        .ok_or_else(|| Error::Orientation("previous unit has no source words".into()))?;
    let (cur_start, cur_end) = cur
        .source_span()
        .ok_or_else(|| Error::Orientation("current unit has no source words".into()))?;
    Ok(orientation_of_spans(
        Some((prev_start, prev_end)),
        (cur_start, cur_end),
    ))
}

/// Orientation of the first unit of a sentence, measured from the sentence start.
pub fn classify_initial_orientation(cur: &Mtu) -> Result<Orientation> {
    let span = cur
        .source_span()
        .ok_or_else(|| Error::Orientation("unit has no source words".into()))?;
    Ok(orientation_of_spans(None, span))
}

/// Span-level classification; `prev = None` stands for the sentence start
/// (a virtual unit ending just before position 0).
pub(crate) fn orientation_of_spans(
    prev: Option<(usize, usize)>,
    cur: (usize, usize),
) -> Orientation {
    // Shift by one so the virtual start can end at -1.
    let (prev_start, prev_end) = prev.map_or((0, 0), |(s, e)| (s + 1, e + 1));
    let (cur_start, cur_end) = (cur.0 + 1, cur.1 + 1);
    if cur_start == prev_end + 1 {
        Orientation::Monotone
    } else if prev.is_some() && cur_end + 1 == prev_start {
        Orientation::Swap
    } else if cur_start > prev_end + 1 {
        Orientation::ForwardDiscontinuous
    } else {
        Orientation::BackwardDiscontinuous
    }
}
