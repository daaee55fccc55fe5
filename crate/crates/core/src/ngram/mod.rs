//! Count-based models: the operation-sequence n-gram model and the
//! lexicalized reordering table.

mod arpa;
mod orientation;

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use crate::corpus::{build_vocabulary, Vocabulary};
use crate::error::{Error, Result};

pub use orientation::{
    orientation_events, train_orientation_table, OrientationClasses, OrientationTable,
    DEFAULT_ORIENTATION_SIGMA,
};

const BOS_ID: u32 = Vocabulary::BOS_ID;

/// Discounts used when count-of-count statistics give an unusable value.
pub const FALLBACK_DISCOUNTS: [f64; 3] = [0.5, 1.0, 1.5];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothing {
    /// Interpolated modified Kneser-Ney.
    ModifiedKneserNey,
    /// Relative frequencies without discounting; unseen events get zero mass.
    MaximumLikelihood,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Entry {
    /// Natural-log probability of the last token given the others.
    logp: f64,
    /// Natural-log weight applied when backing off from this history.
    backoff: f64,
}

/// Backoff-form n-gram model over string tokens.
///
/// Histories are padded with `order - 1` start symbols and every sentence
/// ends with an end symbol. The start symbol is never predicted; the
/// unknown symbol is an ordinary prediction target.
#[derive(Clone, Debug, PartialEq)]
pub struct NgramModel {
    order: usize,
    vocab: Vocabulary,
    /// `grams[k - 1]` holds k-grams.
    grams: Vec<HashMap<Vec<u32>, Entry>>,
}

/// Trains an n-gram model over token sentences.
pub fn train_ngram<S: AsRef<str> + Sync>(
    corpus: &[Vec<S>],
    order: usize,
    smoothing: Smoothing,
) -> Result<NgramModel> {
    if order == 0 {
        return Err(Error::Config("n-gram order must be at least 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyData(
            "n-gram training corpus has no sentences".into(),
        ));
    }
    let vocab = build_vocabulary(
        corpus.iter().flatten().map(|t| t.as_ref()),
        usize::MAX,
        &BTreeSet::new(),
    );
    let top = count_top_order(corpus, &vocab, order);
    let counts = lower_order_counts(top, order, smoothing);
    Ok(estimate(vocab, counts, smoothing))
}

fn encode<S: AsRef<str>>(vocab: &Vocabulary, sentence: &[S], order: usize) -> Vec<u32> {
    let mut ids = vec![BOS_ID; order - 1];
    ids.extend(sentence.iter().map(|t| vocab.id(t.as_ref())));
    ids.push(Vocabulary::EOS_ID);
    ids
}

fn count_top_order<S: AsRef<str> + Sync>(
    corpus: &[Vec<S>],
    vocab: &Vocabulary,
    order: usize,
) -> HashMap<Vec<u32>, u64> {
    corpus
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<Vec<u32>, u64>, sentence| {
            let ids = encode(vocab, sentence, order);
            for gram in ids.windows(order) {
                *acc.entry(gram.to_vec()).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (gram, c) in b {
                *a.entry(gram).or_default() += c;
            }
            a
        })
}

/// Count tables for every order: raw counts at the top order and for
/// start-anchored n-grams, continuation counts elsewhere (Kneser-Ney).
fn lower_order_counts(
    top: HashMap<Vec<u32>, u64>,
    order: usize,
    smoothing: Smoothing,
) -> Vec<HashMap<Vec<u32>, u64>> {
    let mut raw = vec![HashMap::new(); order];
    raw[order - 1] = top;
    for k in (1..order).rev() {
        let mut lower: HashMap<Vec<u32>, u64> = HashMap::new();
        for (gram, &c) in &raw[k] {
            *lower.entry(gram[1..].to_vec()).or_default() += c;
        }
        raw[k - 1] = lower;
    }
    if smoothing == Smoothing::MaximumLikelihood {
        return raw;
    }
    let mut adjusted = raw.clone();
    for k in 1..order {
        let mut continuation: HashMap<Vec<u32>, u64> = HashMap::new();
        for gram in raw[k].keys() {
            *continuation.entry(gram[1..].to_vec()).or_default() += 1;
        }
        for (gram, c) in adjusted[k - 1].iter_mut() {
            if gram[0] != BOS_ID {
                *c = continuation[gram];
            }
        }
    }
    adjusted
}

/// Modified Kneser-Ney discounts for counts 1, 2 and 3+.
pub fn kneser_ney_discounts(counts: impl IntoIterator<Item = u64>) -> [f64; 3] {
    let mut n = [0f64; 5];
    for c in counts {
        if (1..=4).contains(&c) {
            n[c as usize] += 1.0;
        }
    }
    let mut d = FALLBACK_DISCOUNTS;
    if n[1] > 0.0 && n[2] > 0.0 {
        let y = n[1] / (n[1] + 2.0 * n[2]);
        for i in 1..=3 {
            if n[i] == 0.0 {
                continue;
            }
            let value = i as f64 - (i + 1) as f64 * y * n[i + 1] / n[i];
            if value > 0.0 && value < i as f64 {
                d[i - 1] = value;
            }
        }
    }
    d
}

fn estimate(
    vocab: Vocabulary,
    counts: Vec<HashMap<Vec<u32>, u64>>,
    smoothing: Smoothing,
) -> NgramModel {
    let order = counts.len();
    let mut model = NgramModel {
        order,
        grams: vec![HashMap::new(); order],
        vocab,
    };
    let predictable = model.vocab.len() - 1;
    let uniform = -(predictable as f64).ln();
    for (k, table) in counts.iter().enumerate() {
        let discounts = match smoothing {
            Smoothing::ModifiedKneserNey => kneser_ney_discounts(table.values().copied()),
            Smoothing::MaximumLikelihood => [0.0; 3],
        };
        let discount = |c: u64| discounts[(c.min(3) - 1) as usize];

        // Per-history totals and discounted mass.
        let mut histories: HashMap<&[u32], (u64, f64)> = HashMap::new();
        for (gram, &c) in table {
            let h = histories.entry(&gram[..k]).or_default();
            h.0 += c;
            h.1 += discount(c);
        }
        let gamma = |h: &[u32]| -> f64 {
            let (total, mass) = histories[h];
            match smoothing {
                Smoothing::ModifiedKneserNey => mass / total as f64,
                Smoothing::MaximumLikelihood => 0.0,
            }
        };

        let mut entries: HashMap<Vec<u32>, Entry> = HashMap::with_capacity(table.len());
        for (gram, &c) in table {
            let h = &gram[..k];
            let lower = if k == 0 {
                uniform.exp()
            } else {
                model.log_prob_ids(&gram[1..k], gram[k]).exp()
            };
            let total = histories[h].0 as f64;
            let p = (c as f64 - discount(c)) / total + gamma(h) * lower;
            entries.insert(
                gram.clone(),
                Entry {
                    logp: p.ln(),
                    backoff: 0.0,
                },
            );
        }
        if k == 0 {
            // Unseen predictable tokens (typically <unk>) still get unigram mass.
            let g = if histories.is_empty() {
                1.0
            } else {
                gamma(&[])
            };
            for id in 1..model.vocab.len() as u32 {
                entries.entry(vec![id]).or_insert(Entry {
                    logp: (g * uniform.exp()).ln(),
                    backoff: 0.0,
                });
            }
        } else {
            let weights: Vec<(Vec<u32>, f64)> = histories
                .keys()
                .map(|h| (h.to_vec(), gamma(h).ln()))
                .collect();
            for (h, w) in weights {
                model.grams[k - 1]
                    .entry(h)
                    .or_insert(Entry {
                        logp: f64::NEG_INFINITY,
                        backoff: 0.0,
                    })
                    .backoff = w;
            }
        }
        model.grams[k] = entries;
    }
    model
}

impl NgramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Tokens the model can predict: the vocabulary without `<s>`.
    pub fn prediction_tokens(&self) -> impl Iterator<Item = &str> {
        self.vocab.tokens()[1..].iter().map(String::as_str)
    }

    /// Number of stored n-grams per order.
    pub fn gram_counts(&self) -> Vec<usize> {
        self.grams.iter().map(HashMap::len).collect()
    }

    /// Natural-log probability of `word` after `history` (ids; most recent last).
    pub fn log_prob_ids(&self, history: &[u32], word: u32) -> f64 {
        let mut ctx = &history[history.len().saturating_sub(self.order - 1)..];
        let mut backoff = 0.0;
        let mut key = Vec::with_capacity(self.order);
        loop {
            key.clear();
            key.extend_from_slice(ctx);
            key.push(word);
            if let Some(e) = self.grams[ctx.len()].get(&key) {
                return backoff + e.logp;
            }
            if ctx.is_empty() {
                return f64::NEG_INFINITY;
            }
            if let Some(e) = self.grams[ctx.len() - 1].get(ctx) {
                backoff += e.backoff;
            }
            ctx = &ctx[1..];
        }
    }

    /// Start-padded id history of a token prefix.
    pub fn history_ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        let mut ids = vec![BOS_ID; self.order - 1];
        ids.extend(tokens.iter().map(|t| self.vocab.id(t.as_ref())));
        ids
    }

    /// Natural-log probability of `word` after the (unpadded) token history.
    pub fn log_prob<S: AsRef<str>>(&self, history: &[S], word: &str) -> f64 {
        self.log_prob_ids(&self.history_ids(history), self.vocab.id(word))
    }

    /// Log-probability of `tokens` without the end event.
    pub fn prefix_score<S: AsRef<str>>(&self, tokens: &[S]) -> f64 {
        let ids = self.history_ids(tokens);
        let pad = self.order - 1;
        (pad..ids.len())
            .map(|i| self.log_prob_ids(&ids[..i], ids[i]))
            .sum()
    }

    /// Log-probability of `continuation` following `history`, without the end event.
    pub fn continuation_score<S: AsRef<str>>(&self, history: &[S], continuation: &[S]) -> f64 {
        let mut ids = self.history_ids(history);
        let mut total = 0.0;
        for tok in continuation {
            let id = self.vocab.id(tok.as_ref());
            total += self.log_prob_ids(&ids, id);
            ids.push(id);
        }
        total
    }

    /// Log-probability of a full sentence, end symbol included.
    pub fn score_sequence<S: AsRef<str>>(&self, tokens: &[S]) -> f64 {
        let ids = self.history_ids(tokens);
        self.prefix_score(tokens) + self.log_prob_ids(&ids, Vocabulary::EOS_ID)
    }

    /// Per-token perplexity over sentences (end events counted).
    pub fn perplexity<S: AsRef<str>>(&self, corpus: &[Vec<S>]) -> f64 {
        let (total, n) = corpus.iter().fold((0.0, 0usize), |(t, n), s| {
            (t + self.score_sequence(s), n + s.len() + 1)
        });
        (-total / n.max(1) as f64).exp()
    }
}
