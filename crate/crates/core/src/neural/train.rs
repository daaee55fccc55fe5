use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::nce::{nce_step_with_draws, NoiseDistribution};
use super::{build_stream_vocabularies, EncodedInstance, ModelConfig, NeuralModel};
use crate::error::{Error, Result};
use crate::streams::StreamPair;

/// One line of the training log. Epoch 0 is the initial model.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub valid_perplexity: f64,
    pub learning_rate: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.train_loss {
            Some(loss) => write!(f, "{}\t{loss:.6}", self.epoch)?,
            None => write!(f, "{}\t-", self.epoch)?,
        }
        write!(f, "\t{:.6}\t{}", self.valid_perplexity, self.learning_rate)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation perplexity.
    pub model: NeuralModel,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

impl TrainOutcome {
    pub fn initial_perplexity(&self) -> f64 {
        self.log[0].valid_perplexity
    }

    pub fn best_perplexity(&self) -> f64 {
        self.log[self.best_epoch].valid_perplexity
    }
}

fn encode_all(model: &NeuralModel, streams: &[StreamPair]) -> Result<Vec<EncodedInstance>> {
    let mut out = Vec::new();
    for sp in streams {
        out.extend(model.encode_stream(sp)?);
    }
    Ok(out)
}

/// Trains a model on `train_streams`, selecting the epoch by perplexity on
/// `valid_streams`.
pub fn train(
    config: &ModelConfig,
    train_streams: &[StreamPair],
    valid_streams: &[StreamPair],
) -> Result<TrainOutcome> {
    train_with_progress(config, train_streams, valid_streams, |_| {})
}

/// [`train`] with a callback invoked once per log line.
pub fn train_with_progress(
    config: &ModelConfig,
    train_streams: &[StreamPair],
    valid_streams: &[StreamPair],
    mut progress: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_streams.is_empty() {
        return Err(Error::EmptyData("no training sentences".into()));
    }
    if valid_streams.is_empty() {
        return Err(Error::EmptyData("no validation sentences".into()));
    }
    let (source_vocab, target_vocab) = build_stream_vocabularies(train_streams, config);
    let mut model = NeuralModel::new(config.clone(), source_vocab, target_vocab)?;
    let train_set = encode_all(&model, train_streams)?;
    let valid_set = encode_all(&model, valid_streams)?;
    let noise = NoiseDistribution::unigram(train_set.iter().map(|i| i.label), model.output_size())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));

    let evaluate = |model: &NeuralModel, epoch: usize| -> Result<f64> {
        let ppl = model.perplexity_instances(&valid_set)?;
        if !ppl.is_finite() {
            return Err(Error::Numeric(format!(
                "validation perplexity is {ppl} after epoch {epoch}"
            )));
        }
        Ok(ppl)
    };

    let mut lr = config.learning_rate;
    let initial = EpochLog {
        epoch: 0,
        train_loss: None,
        valid_perplexity: evaluate(&model, 0)?,
        learning_rate: lr,
    };
    progress(&initial);
    let mut best = (initial.valid_perplexity, 0, model.clone());
    let mut log = vec![initial];

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<EncodedInstance> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let draws: Vec<Vec<u32>> = batch
                .iter()
                .map(|_| noise.sample(&mut rng, config.noise_samples))
                .collect();
            let loss = nce_step_with_draws(&mut model, &batch, &draws, &noise, lr).map_err(
                |e| match e {
                    Error::Numeric(msg) => {
                        Error::Numeric(format!("epoch {epoch}, minibatch {}: {msg}", b + 1))
                    }
                    other => other,
                },
            )?;
            total_loss += loss * batch.len() as f64;
        }
        let entry = EpochLog {
            epoch,
            train_loss: Some(total_loss / train_set.len().max(1) as f64),
            valid_perplexity: evaluate(&model, epoch)?,
            learning_rate: lr,
        };
        progress(&entry);
        if entry.valid_perplexity < best.0 {
            best = (entry.valid_perplexity, epoch, model.clone());
        } else {
            lr *= config.learning_rate_decay;
        }
        log.push(entry);
    }
    Ok(TrainOutcome {
        model: best.2,
        best_epoch: best.1,
        log,
    })
}
