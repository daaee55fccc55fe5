use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;

use super::{EncodedInstance, NeuralModel};
use crate::error::{Error, Result};

/// Strictly positive sampling distribution over output ids.
#[derive(Clone, Debug)]
pub struct NoiseDistribution {
    probs: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl NoiseDistribution {
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Config(
                "noise weights must be finite and strictly positive".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let sampler = WeightedIndex::new(&probs)
            .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
        Ok(NoiseDistribution { probs, sampler })
    }

    /// Add-one smoothed label frequencies over `size` output ids.
    pub fn unigram(labels: impl IntoIterator<Item = u32>, size: usize) -> Result<Self> {
        let mut weights = vec![1.0; size];
        for w in labels {
            weights[w as usize] += 1.0;
        }
        Self::from_weights(weights)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, word: u32) -> f64 {
        self.probs[word as usize]
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, k: usize) -> Vec<u32> {
        (0..k).map(|_| self.sampler.sample(rng) as u32).collect()
    }
}

/// Gradient of the mean NCE loss. Only touched rows of the lookup and
/// output layers are stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradient {
    pub lookup: BTreeMap<u32, Vec<f64>>,
    pub hidden_w: Vec<f64>,
    pub hidden_b: Vec<f64>,
    pub output_w: BTreeMap<u32, Vec<f64>>,
    pub output_b: BTreeMap<u32, f64>,
}

impl Gradient {
    /// Dense copies in the order of [`NeuralModel::parameter_blocks`].
    pub fn dense_blocks(&self, model: &NeuralModel) -> [Vec<f64>; 5] {
        let d = model.config.embedding_dim;
        let h = model.config.hidden_dim;
        let mut lookup = vec![0.0; model.lookup.len()];
        for (&row, g) in &self.lookup {
            lookup[row as usize * d..(row as usize + 1) * d].copy_from_slice(g);
        }
        let mut output_w = vec![0.0; model.output_w.len()];
        for (&row, g) in &self.output_w {
            output_w[row as usize * h..(row as usize + 1) * h].copy_from_slice(g);
        }
        let mut output_b = vec![0.0; model.output_b.len()];
        for (&row, &g) in &self.output_b {
            output_b[row as usize] = g;
        }
        [
            lookup,
            self.hidden_w.clone(),
            self.hidden_b.clone(),
            output_w,
            output_b,
        ]
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x).
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

struct Work {
    input: Vec<f64>,
    hidden: Vec<f64>,
    /// Loss gradient at the pre-activation, already divided by the batch size.
    delta: Vec<f64>,
    /// Loss gradient per distinct scored word, divided by the batch size.
    outputs: Vec<(u32, f64)>,
    loss: f64,
}

fn instance_work(
    model: &NeuralModel,
    inst: &EncodedInstance,
    noise_words: &[u32],
    noise: &NoiseDistribution,
    scale: f64,
) -> Work {
    let fwd = model.forward_unchecked(&inst.context);
    let log_k = (noise_words.len() as f64).ln();
    let delta_of = |w: u32| model.logit(&fwd.hidden, w) - log_k - noise.prob(w).ln();

    // The label is the data sample; every draw is a noise sample, even when
    // it repeats the label.
    let mut grads: BTreeMap<u32, f64> = BTreeMap::new();
    let mut deltas: BTreeMap<u32, f64> = BTreeMap::new();
    let mut delta = |w: u32| *deltas.entry(w).or_insert_with(|| delta_of(w));
    let d_data = delta(inst.label);
    let mut loss = softplus(-d_data);
    *grads.entry(inst.label).or_default() += sigmoid(d_data) - 1.0;
    for &w in noise_words {
        let d = delta(w);
        loss += softplus(d);
        *grads.entry(w).or_default() += sigmoid(d);
    }

    let h = model.config.hidden_dim;
    let mut d_hidden = vec![0.0; h];
    let outputs: Vec<(u32, f64)> = grads
        .into_iter()
        .map(|(w, g)| {
            let g = g * scale;
            let row = &model.output_w[w as usize * h..(w as usize + 1) * h];
            for (acc, wt) in d_hidden.iter_mut().zip(row) {
                *acc += g * wt;
            }
            (w, g)
        })
        .collect();
    let delta = d_hidden
        .iter()
        .zip(&fwd.pre)
        .map(|(g, &a)| if a > 0.0 { *g } else { 0.0 })
        .collect();
    Work {
        input: fwd.input,
        hidden: fwd.hidden,
        delta,
        outputs,
        loss,
    }
}

/// Mean NCE loss of a minibatch and its gradient, for fixed noise draws.
///
/// For a word `w`, `Δ(w) = s(w) - ln(k q(w))` where `s` is the
/// unnormalized log-score and `q` the noise distribution. The loss of one
/// instance is `-ln σ(Δ(label)) - Σ ln(1 - σ(Δ(noise)))`.
///
/// Work is split per instance and per parameter row, and every sum runs in
/// instance order, so the result does not depend on the thread count.
pub fn nce_loss_and_gradient(
    model: &NeuralModel,
    batch: &[EncodedInstance],
    noise_draws: &[Vec<u32>],
    noise: &NoiseDistribution,
) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::EmptyData("empty minibatch".into()));
    }
    if noise_draws.len() != batch.len() || noise_draws.iter().any(Vec::is_empty) {
        return Err(Error::Config(
            "every instance needs at least one noise draw".into(),
        ));
    }
    if noise.len() != model.output_size() {
        return Err(Error::Config(format!(
            "noise distribution covers {} words but the output layer has {}",
            noise.len(),
            model.output_size()
        )));
    }
    for inst in batch {
        model.check_context(&inst.context)?;
        if inst.label as usize >= model.output_size() {
            return Err(Error::Config(format!("label {} out of range", inst.label)));
        }
    }
    let scale = 1.0 / batch.len() as f64;
    let work: Vec<Work> = batch
        .par_iter()
        .zip(noise_draws)
        .map(|(inst, draws)| instance_work(model, inst, draws, noise, scale))
        .collect();
    let loss = work.iter().map(|w| w.loss).sum::<f64>() * scale;

    let h = model.config.hidden_dim;
    let d = model.config.embedding_dim;
    let width = model.config.context_width() * d;

    let mut hidden_w = vec![0.0; h * width];
    hidden_w
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(r, row)| {
            for w in &work {
                let g = w.delta[r];
                if g != 0.0 {
                    row.iter_mut()
                        .zip(&w.input)
                        .for_each(|(acc, x)| *acc += g * x);
                }
            }
        });
    let hidden_b = (0..h)
        .map(|r| work.iter().map(|w| w.delta[r]).sum())
        .collect();

    let mut by_word: BTreeMap<u32, Vec<(usize, f64)>> = BTreeMap::new();
    for (i, w) in work.iter().enumerate() {
        for &(word, g) in &w.outputs {
            by_word.entry(word).or_default().push((i, g));
        }
    }
    let output_rows: Vec<(u32, Vec<f64>, f64)> = by_word
        .into_par_iter()
        .map(|(word, uses)| {
            let mut row = vec![0.0; h];
            let mut bias = 0.0;
            for (i, g) in uses {
                row.iter_mut()
                    .zip(&work[i].hidden)
                    .for_each(|(acc, x)| *acc += g * x);
                bias += g;
            }
            (word, row, bias)
        })
        .collect();
    let mut output_w = BTreeMap::new();
    let mut output_b = BTreeMap::new();
    for (word, row, bias) in output_rows {
        output_w.insert(word, row);
        output_b.insert(word, bias);
    }

    // Gradient at the concatenated input: W_h^T delta.
    let d_input: Vec<Vec<f64>> = work
        .par_iter()
        .map(|w| {
            let mut acc = vec![0.0; width];
            for (r, &g) in w.delta.iter().enumerate() {
                if g != 0.0 {
                    let row = &model.hidden_w[r * width..(r + 1) * width];
                    acc.iter_mut().zip(row).for_each(|(a, x)| *a += g * x);
                }
            }
            acc
        })
        .collect();
    let mut by_row: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, inst) in batch.iter().enumerate() {
        for (p, &id) in inst.context.iter().enumerate() {
            by_row.entry(id).or_default().push((i, p));
        }
    }
    let lookup = by_row
        .into_par_iter()
        .map(|(id, uses)| {
            let mut row = vec![0.0; d];
            for (i, p) in uses {
                row.iter_mut()
                    .zip(&d_input[i][p * d..(p + 1) * d])
                    .for_each(|(acc, x)| *acc += x);
            }
            (id, row)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();

    Ok((
        loss,
        Gradient {
            lookup,
            hidden_w,
            hidden_b,
            output_w,
            output_b,
        },
    ))
}

fn apply(model: &mut NeuralModel, grad: &Gradient, lr: f64) -> bool {
    let d = model.config.embedding_dim;
    let h = model.config.hidden_dim;
    let mut finite = true;
    let mut update = |params: &mut [f64], g: &[f64]| {
        for (p, g) in params.iter_mut().zip(g) {
            *p -= lr * g;
            finite &= p.is_finite();
        }
    };
    for (&row, g) in &grad.lookup {
        update(
            &mut model.lookup[row as usize * d..(row as usize + 1) * d],
            g,
        );
    }
    update(&mut model.hidden_w, &grad.hidden_w);
    update(&mut model.hidden_b, &grad.hidden_b);
    for (&row, g) in &grad.output_w {
        update(
            &mut model.output_w[row as usize * h..(row as usize + 1) * h],
            g,
        );
    }
    for (&row, &g) in &grad.output_b {
        update(&mut model.output_b[row as usize..row as usize + 1], &[g]);
    }
    finite
}

/// One SGD step on the mean NCE loss with the given noise draws. Returns the loss.
pub fn nce_step_with_draws(
    model: &mut NeuralModel,
    batch: &[EncodedInstance],
    noise_draws: &[Vec<u32>],
    noise: &NoiseDistribution,
    lr: f64,
) -> Result<f64> {
    let (loss, grad) = nce_loss_and_gradient(model, batch, noise_draws, noise)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!(
            "NCE loss is {loss} on a minibatch of {} instances (lr {lr})",
            batch.len()
        )));
    }
    if !apply(model, &grad, lr) {
        return Err(Error::Numeric(format!(
            "parameters became non-finite after an update with lr {lr} (loss {loss})"
        )));
    }
    Ok(loss)
}

/// One SGD step drawing `k` noise words per instance from `rng`.
pub fn nce_step<R: Rng>(
    model: &mut NeuralModel,
    batch: &[EncodedInstance],
    noise: &NoiseDistribution,
    k: usize,
    lr: f64,
    rng: &mut R,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config(
            "at least one noise sample is required".into(),
        ));
    }
    let draws: Vec<Vec<u32>> = batch.iter().map(|_| noise.sample(rng, k)).collect();
    nce_step_with_draws(model, batch, &draws, noise, lr)
}
