//! Deterministic conversion of aligned pairs into operation sequences.
//!
//! The generator walks translation units in target order and keeps a model
//! of the partially built source side: a list of placed words and gap
//! placeholders with an insertion point, exactly the structure the
//! interpreter rebuilds from the operations alone. Non-initial words of a
//! discontinuous cept are not placed through the insertion point; they are
//! attached to the cept's first word by offset and only mark their
//! positions as covered.
//!
//! Gap placeholders stay in the list after their words are used up. The
//! interpreter cannot observe exhaustion, so jump indices count every
//! placeholder between the insertion point and the target gap.

use std::collections::{BTreeMap, BTreeSet};

use super::mtu::components;
use super::{Cept, Operation, OperationSequence};
use crate::corpus::AlignedSentencePair;
use crate::error::{Error, Result};

/// A chunk of a sentence pair handed to the generator at once, as a decoder
/// would extend a hypothesis with one phrase pair.
///
/// Positions are absolute sentence positions; `links` index into
/// `source` and `target` of this phrase.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Phrase {
    pub source: Vec<(usize, String)>,
    pub target: Vec<(usize, String)>,
    pub links: Vec<(usize, usize)>,
}

impl Phrase {
    pub fn whole(pair: &AlignedSentencePair) -> Self {
        Phrase {
            source: pair.source.iter().cloned().enumerate().collect(),
            target: pair.target.iter().cloned().enumerate().collect(),
            links: pair.links.iter().copied().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty() && self.target.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Word,
    Gap(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct GapSpan {
    lo: usize,
    hi: usize,
}

/// Per-unit bookkeeping used to derive phrase segmentations.
#[derive(Clone, Debug, Default)]
struct UnitRecord {
    source: Vec<usize>,
    target: Vec<usize>,
    consumed: Vec<usize>,
    cleanup: bool,
}

/// Generator state. Cloning it snapshots a partial hypothesis.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Generator {
    covered: Vec<bool>,
    /// Rightmost source position placed through the insertion point.
    main_max: Option<usize>,
    slots: Vec<Slot>,
    gaps: Vec<GapSpan>,
    pointer: usize,
    /// Unaligned source words seen in a phrase but not yet generated.
    unaligned: BTreeMap<usize, String>,
    target_claimed: Vec<bool>,
    target_next: usize,
}

enum Unit {
    Mtu(Vec<usize>, Vec<usize>),
    TargetOnly(usize),
}

impl Generator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of gap placeholders that still contain uncovered words.
    pub fn open_gaps(&self) -> usize {
        (0..self.gaps.len())
            .filter(|&g| self.gap_first_uncovered(g).is_some())
            .count()
    }

    /// Generates the operations for `phrase`, continuing from the current state.
    ///
    /// On error the state is left partially updated; callers that need the
    /// old state should extend a clone.
    pub fn extend(&mut self, phrase: &Phrase) -> Result<Vec<Operation>> {
        let mut ops = Vec::new();
        self.extend_into(phrase, &mut ops, &mut Vec::new())?;
        Ok(ops)
    }

    fn is_covered(&self, p: usize) -> bool {
        self.covered.get(p).copied().unwrap_or(false)
    }

    fn cover(&mut self, p: usize) {
        if p >= self.covered.len() {
            self.covered.resize(p + 1, false);
        }
        self.covered[p] = true;
    }

    /// One past everything placed or skipped over by a gap.
    fn frontier(&self) -> usize {
        let placed = self.main_max.map_or(0, |m| m + 1);
        self.gaps.iter().map(|g| g.hi).fold(placed, usize::max)
    }

    fn frontier_next(&self) -> usize {
        let mut p = self.frontier();
        while self.is_covered(p) {
            p += 1;
        }
        p
    }

    fn gap_first_uncovered(&self, g: usize) -> Option<usize> {
        let span = &self.gaps[g];
        (span.lo..span.hi).find(|&p| !self.is_covered(p))
    }

    fn gap_containing(&self, s: usize) -> Option<usize> {
        if self.is_covered(s) {
            return None;
        }
        self.gaps.iter().position(|g| g.lo <= s && s < g.hi)
    }

    fn slot_of_gap(&self, g: usize) -> usize {
        self.slots
            .iter()
            .position(|&slot| slot == Slot::Gap(g))
            .expect("every gap has a placeholder")
    }

    /// Source position the next generated word would occupy without reordering.
    fn current(&self) -> Option<usize> {
        match self.slots.get(self.pointer) {
            None => Some(self.frontier_next()),
            Some(Slot::Gap(g)) => self.gap_first_uncovered(*g),
            Some(Slot::Word) => None,
        }
    }

    fn open_gap(&mut self, lo: usize, hi: usize, ops: &mut Vec<Operation>) {
        let id = self.gaps.len();
        self.gaps.push(GapSpan { lo, hi });
        self.slots.insert(self.pointer, Slot::Gap(id));
        self.pointer += 1;
        ops.push(Operation::InsertGap);
    }

    fn place(&mut self, p: usize) {
        self.slots.insert(self.pointer, Slot::Word);
        self.pointer += 1;
        self.cover(p);
        self.main_max = Some(self.main_max.map_or(p, |m| m.max(p)));
    }

    fn consume_unaligned(&mut self, ops: &mut Vec<Operation>, consumed: &mut Vec<usize>) {
        while let Some(j) = self.current() {
            let Some(token) = self.unaligned.remove(&j) else {
                break;
            };
            ops.push(Operation::GenerateSourceOnly(token));
            self.place(j);
            consumed.push(j);
        }
    }

    /// Emits the reordering operations that bring the insertion point to `s`.
    fn navigate(
        &mut self,
        s: usize,
        ops: &mut Vec<Operation>,
        consumed: &mut Vec<usize>,
    ) -> Result<()> {
        if self.current() == Some(s) {
            return Ok(());
        }
        if let Some(g) = self.gap_containing(s) {
            let gap_slot = self.slot_of_gap(g);
            if gap_slot != self.pointer {
                if gap_slot > self.pointer {
                    ops.push(Operation::JumpForward);
                    self.pointer = self.slots.len();
                }
                let k = self.slots[gap_slot..self.pointer]
                    .iter()
                    .filter(|slot| matches!(slot, Slot::Gap(_)))
                    .count();
                debug_assert!(k >= 1);
                ops.push(Operation::JumpBack(k));
                self.pointer = gap_slot;
                self.consume_unaligned(ops, consumed);
                if self.is_covered(s) {
                    // s was itself an unaligned word swept up on landing.
                    return Ok(());
                }
            }
            if self.current() != Some(s) {
                let first = self
                    .gap_first_uncovered(g)
                    .expect("gap holding s is not exhausted");
                debug_assert!(first < s);
                self.gaps[g].lo = s;
                self.open_gap(first, s, ops);
            }
        } else {
            if s < self.frontier() {
                return Err(Error::Phrase(format!(
                    "source position {s} is behind the frontier but not inside an open gap"
                )));
            }
            if self.pointer != self.slots.len() {
                ops.push(Operation::JumpForward);
                self.pointer = self.slots.len();
            }
            let next = self.frontier_next();
            if next != s {
                self.open_gap(next, s, ops);
            }
        }
        debug_assert_eq!(self.current(), Some(s));
        Ok(())
    }

    fn claim_target(&mut self, positions: &[usize]) -> Result<()> {
        let anchor = positions[0];
        if anchor != self.target_next {
            return Err(Error::Phrase(format!(
                "target position {anchor} generated while position {} is still open",
                self.target_next
            )));
        }
        for &t in positions {
            if t >= self.target_claimed.len() {
                self.target_claimed.resize(t + 1, false);
            }
            self.target_claimed[t] = true;
        }
        while self
            .target_claimed
            .get(self.target_next)
            .copied()
            .unwrap_or(false)
        {
            self.target_next += 1;
        }
        Ok(())
    }

    fn check_phrase(&self, phrase: &Phrase) -> Result<()> {
        let mut src = BTreeSet::new();
        for &(p, _) in &phrase.source {
            if !src.insert(p) || self.is_covered(p) || self.unaligned.contains_key(&p) {
                return Err(Error::Phrase(format!(
                    "source position {p} is already covered"
                )));
            }
        }
        let mut tgt = BTreeSet::new();
        for &(t, _) in &phrase.target {
            if !tgt.insert(t) || self.target_claimed.get(t).copied().unwrap_or(false) {
                return Err(Error::Phrase(format!(
                    "target position {t} is already generated"
                )));
            }
        }
        for &(i, j) in &phrase.links {
            if i >= phrase.source.len() || j >= phrase.target.len() {
                return Err(Error::Phrase(format!(
                    "link {i}-{j} outside a phrase of {} source / {} target words",
                    phrase.source.len(),
                    phrase.target.len()
                )));
            }
        }
        Ok(())
    }

    fn extend_into(
        &mut self,
        phrase: &Phrase,
        ops: &mut Vec<Operation>,
        records: &mut Vec<UnitRecord>,
    ) -> Result<()> {
        self.check_phrase(phrase)?;
        let comps = components(
            phrase.source.len(),
            phrase.target.len(),
            phrase.links.iter().copied(),
        );
        let mut src_aligned = vec![false; phrase.source.len()];
        let mut tgt_aligned = vec![false; phrase.target.len()];
        let mut units: Vec<(usize, Unit)> = Vec::new();
        for (src, tgt) in comps {
            src.iter().for_each(|&i| src_aligned[i] = true);
            tgt.iter().for_each(|&j| tgt_aligned[j] = true);
            let anchor = tgt.iter().map(|&j| phrase.target[j].0).min().unwrap();
            units.push((anchor, Unit::Mtu(src, tgt)));
        }
        for (j, &aligned) in tgt_aligned.iter().enumerate() {
            if !aligned {
                units.push((phrase.target[j].0, Unit::TargetOnly(j)));
            }
        }
        units.sort_by_key(|(anchor, _)| *anchor);
        let mut own_unaligned = Vec::new();
        for (i, &aligned) in src_aligned.iter().enumerate() {
            if !aligned {
                let (p, tok) = &phrase.source[i];
                self.unaligned.insert(*p, tok.clone());
                own_unaligned.push(*p);
            }
        }
        own_unaligned.sort_unstable();

        for (_, unit) in units {
            let mut record = UnitRecord::default();
            match unit {
                Unit::TargetOnly(j) => {
                    let (t, tok) = &phrase.target[j];
                    self.claim_target(&[*t])?;
                    ops.push(Operation::GenerateTargetOnly(tok.clone()));
                    record.target.push(*t);
                }
                Unit::Mtu(src, tgt) => {
                    let mut src: Vec<&(usize, String)> =
                        src.iter().map(|&i| &phrase.source[i]).collect();
                    let mut tgt: Vec<&(usize, String)> =
                        tgt.iter().map(|&j| &phrase.target[j]).collect();
                    src.sort_by_key(|(p, _)| *p);
                    tgt.sort_by_key(|(p, _)| *p);
                    let src_pos: Vec<usize> = src.iter().map(|(p, _)| *p).collect();
                    let tgt_pos: Vec<usize> = tgt.iter().map(|(p, _)| *p).collect();
                    self.claim_target(&tgt_pos)?;
                    let anchor = src_pos[0];
                    self.navigate(anchor, ops, &mut record.consumed)?;
                    let op = if src.len() == 1 && tgt.len() == 1 && src[0].1 == tgt[0].1 {
                        Operation::GenerateSelf(src[0].1.clone())
                    } else {
                        Operation::Generate {
                            source: Cept::from_positions(
                                &src_pos,
                                src.iter().map(|(_, t)| t.clone()).collect(),
                            ),
                            target: Cept::from_positions(
                                &tgt_pos,
                                tgt.iter().map(|(_, t)| t.clone()).collect(),
                            ),
                        }
                    };
                    ops.push(op);
                    self.place(anchor);
                    for &tail in &src_pos[1..] {
                        self.cover(tail);
                    }
                    self.consume_unaligned(ops, &mut record.consumed);
                    record.source = src_pos;
                    record.target = tgt_pos;
                }
            }
            records.push(record);
        }

        // Unaligned words of this phrase that no generation swept up.
        let mut record = UnitRecord {
            cleanup: true,
            ..UnitRecord::default()
        };
        for p in own_unaligned {
            if self.is_covered(p) {
                continue;
            }
            self.navigate(p, ops, &mut record.consumed)?;
            if !self.is_covered(p) {
                let token = self.unaligned.remove(&p).expect("pending unaligned word");
                ops.push(Operation::GenerateSourceOnly(token));
                self.place(p);
                record.consumed.push(p);
            }
            self.consume_unaligned(ops, &mut record.consumed);
        }
        if !record.consumed.is_empty() {
            records.push(record);
        }
        Ok(())
    }
}

/// Operation sequence of a whole sentence pair.
pub fn generate_operations(pair: &AlignedSentencePair) -> OperationSequence {
    let ops = Generator::new()
        .extend(&Phrase::whole(pair))
        .expect("a validated sentence pair always generates");
    OperationSequence::new(ops, 0)
}

fn unit_records(pair: &AlignedSentencePair) -> Vec<UnitRecord> {
    let mut records = Vec::new();
    Generator::new()
        .extend_into(&Phrase::whole(pair), &mut Vec::new(), &mut records)
        .expect("a validated sentence pair always generates");
    records
}

/// Number of generation units (aligned units plus unaligned target words) in a pair.
pub fn unit_count(pair: &AlignedSentencePair) -> usize {
    unit_records(pair).iter().filter(|r| !r.cleanup).count()
}

/// Splits a pair into consecutive phrases at the given unit boundaries.
///
/// `cuts` are strictly increasing unit indices in `1..unit_count(pair)`.
/// Each unaligned source word goes to the phrase whose generation sweeps it
/// up; words never swept up go to the last phrase. Extending a fresh
/// [`Generator`] with the returned phrases in order yields exactly
/// [`generate_operations`] of the pair.
pub fn phrases_for_segmentation(pair: &AlignedSentencePair, cuts: &[usize]) -> Result<Vec<Phrase>> {
    let records = unit_records(pair);
    let n_units = records.iter().filter(|r| !r.cleanup).count();
    if cuts.windows(2).any(|w| w[0] >= w[1]) || cuts.iter().any(|&c| c == 0 || c >= n_units) {
        return Err(Error::Phrase(format!(
            "cut points {cuts:?} do not split {n_units} units"
        )));
    }
    let mut bounds = vec![0];
    bounds.extend_from_slice(cuts);
    bounds.push(n_units);
    let mut groups: Vec<(BTreeSet<usize>, BTreeSet<usize>)> =
        vec![Default::default(); bounds.len() - 1];
    let mut unit = 0;
    for record in &records {
        let group = if record.cleanup {
            groups.len() - 1
        } else {
            let g = bounds
                .windows(2)
                .position(|w| w[0] <= unit && unit < w[1])
                .unwrap();
            unit += 1;
            g
        };
        groups[group]
            .0
            .extend(record.source.iter().chain(&record.consumed));
        groups[group].1.extend(&record.target);
    }
    Ok(groups
        .into_iter()
        .map(|(src, tgt)| {
            let src: Vec<usize> = src.into_iter().collect();
            let tgt: Vec<usize> = tgt.into_iter().collect();
            let links = pair
                .links
                .iter()
                .filter_map(|(i, j)| Some((src.binary_search(i).ok()?, tgt.binary_search(j).ok()?)))
                .collect();
            Phrase {
                source: src.iter().map(|&p| (p, pair.source[p].clone())).collect(),
                target: tgt.iter().map(|&t| (t, pair.target[t].clone())).collect(),
                links,
            }
        })
        .collect())
}
