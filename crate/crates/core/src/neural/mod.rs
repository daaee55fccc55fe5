//! Feed-forward (m+n)-gram model over operation streams.
//!
//! The context is `n - 1` target-stream tokens followed by `m` source-stream
//! tokens. Every position is embedded through one shared lookup table whose
//! rows cover the target vocabulary first and the source vocabulary after it.
//! The concatenated embeddings go through one rectified affine layer and a
//! softmax output layer. Training uses noise-contrastive estimation; scoring
//! always uses the exact softmax.

mod io;
mod nce;
mod train;

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocabulary, Vocabulary};
use crate::error::{Error, Result};
use crate::streams::{is_reordering_symbol, make_instances, StreamPair, TrainingInstance};

pub use nce::{nce_loss_and_gradient, nce_step, nce_step_with_draws, Gradient, NoiseDistribution};
pub use train::{train, train_with_progress, EpochLog, TrainOutcome};

/// Half-width of the uniform initialization interval.
pub const INIT_RANGE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Target order: the context holds `n - 1` target-stream tokens.
    pub n: usize,
    /// Source window width.
    pub m: usize,
    /// Source-stream vocabulary cap (reserved symbols excluded).
    pub input_vocab_cap: usize,
    /// Target-stream vocabulary cap, shared by the input and output layers.
    pub output_vocab_cap: usize,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    /// Width of the output word vectors; equal to `hidden_dim`.
    pub output_embedding_dim: usize,
    pub noise_samples: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Factor applied to the learning rate after an epoch that does not
    /// improve validation perplexity.
    pub learning_rate_decay: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n: 7,
            m: 7,
            input_vocab_cap: 20_000,
            output_vocab_cap: 40_000,
            embedding_dim: 150,
            hidden_dim: 750,
            output_embedding_dim: 750,
            noise_samples: 100,
            batch_size: 1000,
            epochs: 25,
            learning_rate: 1.0,
            learning_rate_decay: 0.5,
            seed: 1,
        }
    }
}

impl ModelConfig {
    /// Number of context tokens per instance.
    pub fn context_width(&self) -> usize {
        self.n - 1 + self.m
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n", self.n),
            ("embedding_dim", self.embedding_dim),
            ("hidden_dim", self.hidden_dim),
            ("output_embedding_dim", self.output_embedding_dim),
            ("noise_samples", self.noise_samples),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.context_width() == 0 {
            return Err(Error::Config(
                "the context must hold at least one token".into(),
            ));
        }
        if self.hidden_dim != self.output_embedding_dim {
            return Err(Error::Config(format!(
                "output_embedding_dim ({}) must equal hidden_dim ({})",
                self.output_embedding_dim, self.hidden_dim
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(
                "learning_rate must be finite and >= 0".into(),
            ));
        }
        if !(self.learning_rate_decay > 0.0 && self.learning_rate_decay <= 1.0) {
            return Err(Error::Config(
                "learning_rate_decay must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// An instance mapped to input and output ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedInstance {
    pub context: Vec<u32>,
    pub label: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuralModel {
    pub(crate) config: ModelConfig,
    pub(crate) source_vocab: Vocabulary,
    pub(crate) target_vocab: Vocabulary,
    /// `|V_i| x D`, target rows first.
    pub(crate) lookup: Vec<f64>,
    /// `H x (C * D)` with `C` the context width.
    pub(crate) hidden_w: Vec<f64>,
    pub(crate) hidden_b: Vec<f64>,
    /// `|V_o| x H`.
    pub(crate) output_w: Vec<f64>,
    pub(crate) output_b: Vec<f64>,
}

/// Hidden-layer state of one context.
#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    /// Concatenated embeddings.
    pub input: Vec<f64>,
    /// Pre-activation.
    pub pre: Vec<f64>,
    /// φ(x): rectified pre-activation.
    pub hidden: Vec<f64>,
}

/// Source and target vocabularies of a stream corpus. Reordering symbols
/// are reserved on both sides so no cap removes them.
pub fn build_stream_vocabularies(
    streams: &[StreamPair],
    config: &ModelConfig,
) -> (Vocabulary, Vocabulary) {
    let reserved: BTreeSet<String> = streams
        .iter()
        .flat_map(|sp| sp.source.iter().chain(&sp.target))
        .filter(|t| is_reordering_symbol(t))
        .cloned()
        .collect();
    let source = build_vocabulary(
        streams.iter().flat_map(|sp| &sp.source),
        config.input_vocab_cap,
        &reserved,
    );
    let target = build_vocabulary(
        streams.iter().flat_map(|sp| &sp.target),
        config.output_vocab_cap,
        &reserved,
    );
    (source, target)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl NeuralModel {
    /// Randomly initialized model: weights uniform in ±[`INIT_RANGE`],
    /// hidden biases zero, output biases `-ln |V_o|`.
    pub fn new(
        config: ModelConfig,
        source_vocab: Vocabulary,
        target_vocab: Vocabulary,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut uniform = |len: usize| -> Vec<f64> {
            (0..len)
                .map(|_| rng.gen_range(-INIT_RANGE..INIT_RANGE))
                .collect()
        };
        let inputs = source_vocab.len() + target_vocab.len();
        let outputs = target_vocab.len();
        let (d, h) = (config.embedding_dim, config.hidden_dim);
        let lookup = uniform(inputs * d);
        let hidden_w = uniform(h * config.context_width() * d);
        let output_w = uniform(outputs * h);
        Ok(NeuralModel {
            hidden_b: vec![0.0; h],
            output_b: vec![-(outputs as f64).ln(); outputs],
            lookup,
            hidden_w,
            output_w,
            config,
            source_vocab,
            target_vocab,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn source_vocabulary(&self) -> &Vocabulary {
        &self.source_vocab
    }

    pub fn target_vocabulary(&self) -> &Vocabulary {
        &self.target_vocab
    }

    pub fn input_size(&self) -> usize {
        self.source_vocab.len() + self.target_vocab.len()
    }

    pub fn output_size(&self) -> usize {
        self.target_vocab.len()
    }

    /// Parameter blocks in a fixed order: lookup, hidden weights, hidden
    /// bias, output weights, output bias.
    pub fn parameter_blocks(&self) -> [(&'static str, &[f64]); 5] {
        [
            ("lookup", &self.lookup),
            ("hidden_w", &self.hidden_w),
            ("hidden_b", &self.hidden_b),
            ("output_w", &self.output_w),
            ("output_b", &self.output_b),
        ]
    }

    pub fn parameter_blocks_mut(&mut self) -> [(&'static str, &mut [f64]); 5] {
        [
            ("lookup", &mut self.lookup),
            ("hidden_w", &mut self.hidden_w),
            ("hidden_b", &mut self.hidden_b),
            ("output_w", &mut self.output_w),
            ("output_b", &mut self.output_b),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.parameter_blocks()
            .iter()
            .all(|(_, b)| b.iter().all(|v| v.is_finite()))
    }

    /// Fails unless the model was built for target order `n` and window `m`.
    pub fn check_width(&self, n: usize, m: usize) -> Result<()> {
        if self.config.n != n || self.config.m != m {
            return Err(Error::Config(format!(
                "model expects n={} m={} but n={n} m={m} was requested",
                self.config.n, self.config.m
            )));
        }
        Ok(())
    }

    /// Maps a token instance to ids; target positions come first.
    pub fn encode(&self, instance: &TrainingInstance) -> Result<EncodedInstance> {
        let width = self.config.context_width();
        if instance.context.len() != width {
            return Err(Error::Config(format!(
                "instance has {} context tokens but the model expects {width}",
                instance.context.len()
            )));
        }
        let offset = self.target_vocab.len() as u32;
        let context = instance
            .context
            .iter()
            .enumerate()
            .map(|(p, tok)| {
                if p < self.config.n - 1 {
                    self.target_vocab.id(tok)
                } else {
                    offset + self.source_vocab.id(tok)
                }
            })
            .collect();
        Ok(EncodedInstance {
            context,
            label: self.target_vocab.id(&instance.label),
        })
    }

    pub fn encode_stream(&self, sp: &StreamPair) -> Result<Vec<EncodedInstance>> {
        make_instances(sp, self.config.n, self.config.m)
            .iter()
            .map(|inst| self.encode(inst))
            .collect()
    }

    fn check_context(&self, context: &[u32]) -> Result<()> {
        let width = self.config.context_width();
        if context.len() != width {
            return Err(Error::Config(format!(
                "context has {} ids but the model expects {width}",
                context.len()
            )));
        }
        let limit = self.input_size() as u32;
        if let Some(id) = context.iter().find(|&&id| id >= limit) {
            return Err(Error::Config(format!(
                "input id {id} is outside the vocabulary of {limit}"
            )));
        }
        Ok(())
    }

    /// Hidden representation φ(x) of a context.
    pub fn forward(&self, context: &[u32]) -> Result<Forward> {
        self.check_context(context)?;
        Ok(self.forward_unchecked(context))
    }

    pub(crate) fn forward_unchecked(&self, context: &[u32]) -> Forward {
        let d = self.config.embedding_dim;
        let mut input = Vec::with_capacity(context.len() * d);
        for &id in context {
            let row = id as usize * d;
            input.extend_from_slice(&self.lookup[row..row + d]);
        }
        let width = input.len();
        let pre: Vec<f64> = self
            .hidden_b
            .iter()
            .enumerate()
            .map(|(r, b)| b + dot(&self.hidden_w[r * width..(r + 1) * width], &input))
            .collect();
        let hidden = pre.iter().map(|&v| v.max(0.0)).collect();
        Forward { input, pre, hidden }
    }

    /// Unnormalized score `w_k . φ + b_k`.
    pub(crate) fn logit(&self, hidden: &[f64], word: u32) -> f64 {
        let h = self.config.hidden_dim;
        let row = word as usize * h;
        dot(&self.output_w[row..row + h], hidden) + self.output_b[word as usize]
    }

    fn log_softmax_hidden(&self, hidden: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = (0..self.output_size() as u32)
            .map(|w| self.logit(hidden, w))
            .collect();
        log_softmax(&logits)
    }

    /// Log-probabilities of every output word.
    pub fn log_distribution(&self, context: &[u32]) -> Result<Vec<f64>> {
        Ok(self.log_softmax_hidden(&self.forward(context)?.hidden))
    }

    pub fn softmax_prob(&self, context: &[u32], word: u32) -> Result<f64> {
        if word as usize >= self.output_size() {
            return Err(Error::Config(format!(
                "output id {word} is outside the vocabulary"
            )));
        }
        Ok(self.log_distribution(context)?[word as usize].exp())
    }

    /// Exact log-probability of one event.
    pub fn log_prob(&self, instance: &EncodedInstance) -> Result<f64> {
        if instance.label as usize >= self.output_size() {
            return Err(Error::Config(format!(
                "output id {} is outside the vocabulary",
                instance.label
            )));
        }
        self.forward(&instance.context).map(|f| {
            let logits: Vec<f64> = (0..self.output_size() as u32)
                .map(|w| self.logit(&f.hidden, w))
                .collect();
            logits[instance.label as usize] - log_sum_exp(&logits)
        })
    }

    /// Summed log-probabilities, computed in parallel and added in order.
    pub fn score_instances(&self, instances: &[EncodedInstance]) -> Result<f64> {
        let terms: Vec<f64> = instances
            .par_iter()
            .map(|inst| self.log_prob(inst))
            .collect::<Result<_>>()?;
        Ok(terms.iter().sum())
    }

    /// Log-probability of a stream pair, end event included.
    pub fn score_stream(&self, sp: &StreamPair) -> Result<f64> {
        self.score_instances(&self.encode_stream(sp)?)
    }

    pub fn perplexity_instances(&self, instances: &[EncodedInstance]) -> Result<f64> {
        if instances.is_empty() {
            return Err(Error::EmptyData("no instances to evaluate".into()));
        }
        Ok((-self.score_instances(instances)? / instances.len() as f64).exp())
    }

    /// Per-event perplexity over a stream corpus.
    pub fn perplexity(&self, corpus: &[StreamPair]) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::EmptyData("no sentences to evaluate".into()));
        }
        let mut instances = Vec::new();
        for sp in corpus {
            instances.extend(self.encode_stream(sp)?);
        }
        self.perplexity_instances(&instances)
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let norm = log_sum_exp(logits);
    logits.iter().map(|v| v - norm).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn toy_vocab(prefix: &str, n: usize) -> Vocabulary {
        let tokens: Vec<String> = (0..n).map(|i| format!("{prefix}{i}")).collect();
        build_vocabulary(&tokens, usize::MAX, &BTreeSet::new())
    }

    pub(crate) fn toy_model(seed: u64) -> NeuralModel {
        let config = ModelConfig {
            n: 3,
            m: 2,
            embedding_dim: 4,
            hidden_dim: 5,
            output_embedding_dim: 5,
            noise_samples: 3,
            seed,
            ..ModelConfig::default()
        };
        // 2 source + 5 target words plus reserved symbols.
        NeuralModel::new(config, toy_vocab("s", 2), toy_vocab("t", 5)).unwrap()
    }

    #[test]
    fn defaults() {
        let c = ModelConfig::default();
        assert_eq!((c.n, c.m, c.context_width()), (7, 7, 13));
        assert_eq!((c.input_vocab_cap, c.output_vocab_cap), (20_000, 40_000));
        assert_eq!(
            (c.embedding_dim, c.hidden_dim, c.output_embedding_dim),
            (150, 750, 750)
        );
        assert_eq!((c.noise_samples, c.batch_size, c.epochs), (100, 1000, 25));
        assert_eq!(c.learning_rate, 1.0);
        c.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let bad = ModelConfig {
            hidden_dim: 10,
            ..ModelConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = ModelConfig {
            noise_samples: 0,
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_weights_give_rectified_bias() {
        let mut model = toy_model(3);
        model.hidden_w.iter_mut().for_each(|w| *w = 0.0);
        model.hidden_b = vec![-1.0, 0.5, 0.0, 2.0, -0.1];
        let f = model.forward(&[0, 1, 9, 10]).unwrap();
        assert_eq!(f.hidden, vec![0.0, 0.5, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn forward_is_pure_and_checks_ids() {
        let model = toy_model(4);
        assert_eq!(
            model.forward(&[3, 4, 9, 10]).unwrap(),
            model.forward(&[3, 4, 9, 10]).unwrap()
        );
        assert!(model.forward(&[3, 4, 9, 99]).is_err());
        assert!(model.forward(&[3, 4, 9]).is_err());
    }

    #[test]
    fn softmax_closed_forms() {
        let p = log_softmax(&[3f64.ln(), 0.0]);
        assert!((p[0].exp() - 0.75).abs() < 1e-15);
        assert!((p[1].exp() - 0.25).abs() < 1e-15);

        let mut model = toy_model(5);
        model.output_w.iter_mut().for_each(|w| *w = 0.0);
        model.output_b.iter_mut().for_each(|b| *b = 0.0);
        let v = model.output_size() as f64;
        for w in 0..model.output_size() as u32 {
            assert!((model.softmax_prob(&[0, 1, 9, 10], w).unwrap() - 1.0 / v).abs() < 1e-15);
        }
    }

    #[test]
    fn distribution_normalizes() {
        let model = toy_model(6);
        let total: f64 = model
            .log_distribution(&[2, 7, 8, 11])
            .unwrap()
            .iter()
            .map(|l| l.exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn encoding_offsets_source_ids() {
        let model = toy_model(7);
        let inst = TrainingInstance {
            context: vec!["<s>".into(), "t1".into(), "s0".into(), "zz".into()],
            label: "t4".into(),
        };
        let enc = model.encode(&inst).unwrap();
        let offset = model.target_vocabulary().len() as u32;
        assert_eq!(enc.context[0], Vocabulary::BOS_ID);
        assert_eq!(enc.context[1], model.target_vocabulary().id("t1"));
        assert_eq!(enc.context[2], offset + model.source_vocabulary().id("s0"));
        assert_eq!(enc.context[3], offset + Vocabulary::UNK_ID);
        assert_eq!(enc.label, model.target_vocabulary().id("t4"));
        assert!(model.check_width(3, 2).is_ok());
        assert!(matches!(model.check_width(4, 2), Err(Error::Config(_))));
    }

    #[test]
    fn uniform_model_scores_closed_form() {
        let mut model = toy_model(8);
        model.output_w.iter_mut().for_each(|w| *w = 0.0);
        let sp = StreamPair {
            source: vec!["s0".into()],
            target: vec!["t0".into()],
            sync: vec![1],
        };
        let v = model.output_size() as f64;
        let score = model.score_stream(&sp).unwrap();
        assert!((score + 2.0 * v.ln()).abs() < 1e-12);
        assert!((model.perplexity(std::slice::from_ref(&sp)).unwrap() - v).abs() < 1e-9);
    }
}
