//! Incremental scoring of operation sequences, phrase by phrase, the way a
//! decoder feature would use the models.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::neural::NeuralModel;
use crate::ngram::NgramModel;
use crate::opgen::{to_coarse, to_lexical, Generator, Operation, Phrase};
use crate::streams::{context_window, stream_tokens, StreamVariant};
use crate::{BOS, EOS};

/// A model that predicts target-stream tokens from rolling windows.
pub trait StreamModel: Send + Sync {
    /// The model sees the previous `target_order() - 1` target-stream tokens.
    fn target_order(&self) -> usize;

    /// The model sees the last `source_window()` source-stream tokens.
    fn source_window(&self) -> usize;

    /// Tokens an operation contributes to the (source, target) streams.
    fn emit(&self, op: &Operation) -> (Vec<String>, Vec<String>);

    /// Natural-log probability of `token`. Windows are start-padded and
    /// hold exactly the widths above, oldest first.
    fn log_prob(&self, target: &[String], source: &[String], token: &str) -> Result<f64>;
}

/// The n-gram model reads the operation sequence itself as its target stream.
impl StreamModel for NgramModel {
    fn target_order(&self) -> usize {
        self.order()
    }

    fn source_window(&self) -> usize {
        0
    }

    fn emit(&self, op: &Operation) -> (Vec<String>, Vec<String>) {
        (Vec::new(), vec![op.to_string()])
    }

    fn log_prob(&self, target: &[String], _source: &[String], token: &str) -> Result<f64> {
        Ok(NgramModel::log_prob(self, target, token))
    }
}

impl StreamModel for NeuralModel {
    fn target_order(&self) -> usize {
        self.config().n
    }

    fn source_window(&self) -> usize {
        self.config().m
    }

    fn emit(&self, op: &Operation) -> (Vec<String>, Vec<String>) {
        stream_tokens(op, true)
    }

    fn log_prob(&self, target: &[String], source: &[String], token: &str) -> Result<f64> {
        let instance = crate::streams::TrainingInstance {
            context: context_window(target, source, self.config().n, self.config().m),
            label: token.to_owned(),
        };
        NeuralModel::log_prob(self, &self.encode(&instance)?)
    }
}

/// Snapshot of a partial hypothesis. Extending never modifies a state.
#[derive(Clone, Debug, PartialEq)]
pub struct ScorerState {
    generator: Generator,
    target: VecDeque<String>,
    source: VecDeque<String>,
    log_prob: f64,
}

impl ScorerState {
    /// Log-probability accumulated so far (end event excluded).
    pub fn log_prob(&self) -> f64 {
        self.log_prob
    }

    pub fn target_window(&self) -> impl Iterator<Item = &str> {
        self.target.iter().map(String::as_str)
    }

    pub fn source_window(&self) -> impl Iterator<Item = &str> {
        self.source.iter().map(String::as_str)
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }
}

fn push_window(window: &mut VecDeque<String>, width: usize, token: String) {
    if width == 0 {
        return;
    }
    if window.len() == width {
        window.pop_front();
    }
    window.push_back(token);
}

/// Scores phrases against one model and stream variant.
pub struct Scorer<'a> {
    model: &'a dyn StreamModel,
    variant: StreamVariant,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a dyn StreamModel, variant: StreamVariant) -> Self {
        Scorer { model, variant }
    }

    pub fn variant(&self) -> StreamVariant {
        self.variant
    }

    pub fn init_state(&self) -> ScorerState {
        let pad = |n: usize| std::iter::repeat_n(BOS.to_string(), n).collect();
        ScorerState {
            generator: Generator::new(),
            target: pad(self.model.target_order().saturating_sub(1)),
            source: pad(self.model.source_window()),
            log_prob: 0.0,
        }
    }

    /// Maps generator output onto the scorer's variant. Reordering runs
    /// never cross a phrase boundary, so projecting per phrase matches
    /// projecting the whole sequence (swap tags are not produced).
    fn project(&self, ops: &[Operation]) -> Vec<Operation> {
        match self.variant {
            StreamVariant::Osm => ops.to_vec(),
            StreamVariant::Coarse => to_coarse(ops, false),
            StreamVariant::Lexical => to_lexical(ops),
        }
    }

    /// Scores already projected operations, advancing `state`.
    fn score_into(&self, state: &mut ScorerState, ops: &[Operation]) -> Result<f64> {
        let (n, m) = (
            self.model.target_order().saturating_sub(1),
            self.model.source_window(),
        );
        let mut delta = 0.0;
        for op in ops {
            let (src, tgt) = self.model.emit(op);
            for tok in src {
                push_window(&mut state.source, m, tok);
            }
            for tok in tgt {
                let t: Vec<String> = state.target.iter().cloned().collect();
                let s: Vec<String> = state.source.iter().cloned().collect();
                delta += self.model.log_prob(&t, &s, &tok)?;
                push_window(&mut state.target, n, tok);
            }
        }
        state.log_prob += delta;
        Ok(delta)
    }

    /// Extends a hypothesis with a phrase pair and returns the new state and
    /// the log-probability of the tokens it adds.
    pub fn extend(&self, state: &ScorerState, phrase: &Phrase) -> Result<(ScorerState, f64)> {
        let mut next = state.clone();
        let ops = next.generator.extend(phrase)?;
        if self.variant == StreamVariant::Coarse {
            if let Some(op) = ops.last().filter(|op| op.is_reordering()) {
                return Err(Error::Phrase(format!(
                    "phrase ends with reordering operation {op}"
                )));
            }
        }
        let projected = self.project(&ops);
        let delta = self.score_into(&mut next, &projected)?;
        Ok((next, delta))
    }

    /// Total log-probability including the end event.
    pub fn finalize(&self, state: &ScorerState) -> Result<f64> {
        let t: Vec<String> = state.target.iter().cloned().collect();
        let s: Vec<String> = state.source.iter().cloned().collect();
        Ok(state.log_prob + self.model.log_prob(&t, &s, EOS)?)
    }

    /// Whole-sequence score of already projected operations, end event included.
    pub fn score_operations(&self, ops: &[Operation]) -> Result<f64> {
        let mut state = self.init_state();
        self.score_into(&mut state, ops)?;
        self.finalize(&state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AlignedSentencePair;
    use crate::ngram::{train_ngram, Smoothing};
    use crate::opgen::{generate_operations, phrases_for_segmentation, unit_count};

    fn pair() -> AlignedSentencePair {
        AlignedSentencePair::parse("a b c d", "C A B D", "2-0 0-1 1-2 3-3").unwrap()
    }

    fn model() -> NgramModel {
        let ops = generate_operations(&pair()).tokens();
        let other = vec!["GEN(a|A)".to_string(), "GEN(b|B)".to_string()];
        train_ngram(&[ops, other], 3, Smoothing::ModifiedKneserNey).unwrap()
    }

    #[test]
    fn fresh_state_scores_zero() {
        let m = model();
        let scorer = Scorer::new(&m, StreamVariant::Osm);
        let a = scorer.init_state();
        assert_eq!(a.log_prob(), 0.0);
        assert_eq!(a, scorer.init_state());
        assert_eq!(a.target_window().collect::<Vec<_>>(), ["<s>", "<s>"]);
        let empty: [&str; 0] = [];
        assert_eq!(scorer.finalize(&a).unwrap(), m.score_sequence(&empty));
    }

    #[test]
    fn every_split_matches_the_whole_sentence() {
        let m = model();
        let scorer = Scorer::new(&m, StreamVariant::Osm);
        let p = pair();
        let whole = m.score_sequence(&generate_operations(&p).tokens());
        for cut in 1..unit_count(&p) {
            let mut state = scorer.init_state();
            let mut total = 0.0;
            for phrase in phrases_for_segmentation(&p, &[cut]).unwrap() {
                let (next, delta) = scorer.extend(&state, &phrase).unwrap();
                total += delta;
                state = next;
            }
            let end = scorer.finalize(&state).unwrap();
            assert!((end - whole).abs() < 1e-9, "cut {cut}");
            assert!((total - state.log_prob()).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_phrase_changes_nothing() {
        let m = model();
        let scorer = Scorer::new(&m, StreamVariant::Osm);
        let phrases = phrases_for_segmentation(&pair(), &[1]).unwrap();
        let (state, _) = scorer.extend(&scorer.init_state(), &phrases[0]).unwrap();
        let (same, delta) = scorer.extend(&state, &Phrase::default()).unwrap();
        assert_eq!(delta, 0.0);
        assert_eq!(same, state);
    }

    #[test]
    fn branches_are_independent() {
        let m = model();
        let scorer = Scorer::new(&m, StreamVariant::Osm);
        let p = pair();
        let phrases = phrases_for_segmentation(&p, &[2]).unwrap();
        let root = scorer.init_state();
        let snapshot = root.clone();
        let (a, da) = scorer.extend(&root, &phrases[0]).unwrap();
        let (b, db) = scorer.extend(&root, &phrases[0]).unwrap();
        assert_eq!(root, snapshot);
        assert_eq!((a, da), (b, db));
    }

    #[test]
    fn links_out_of_range_are_rejected() {
        let m = model();
        let scorer = Scorer::new(&m, StreamVariant::Osm);
        let phrase = Phrase {
            source: vec![(0, "a".into())],
            target: vec![(0, "A".into())],
            links: vec![(0, 3)],
        };
        assert!(scorer.extend(&scorer.init_state(), &phrase).is_err());
    }
}
