use nosm::corpus::load_corpus;
use nosm::neural::{
    build_stream_vocabularies, log_sum_exp, train, EncodedInstance, ModelConfig, NeuralModel,
};
use nosm::opgen::generate_operations;
use nosm::streams::{split_streams, StreamPair, StreamVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy_streams() -> Vec<StreamPair> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data");
    load_corpus(
        format!("{dir}/toy.src"),
        format!("{dir}/toy.tgt"),
        format!("{dir}/toy.align"),
    )
    .unwrap()
    .iter()
    .map(|p| split_streams(&generate_operations(p).ops, StreamVariant::Osm).unwrap())
    .collect()
}

fn small_config() -> ModelConfig {
    ModelConfig {
        n: 3,
        m: 2,
        embedding_dim: 6,
        hidden_dim: 10,
        output_embedding_dim: 10,
        noise_samples: 4,
        batch_size: 8,
        epochs: 3,
        learning_rate: 0.5,
        seed: 11,
        ..ModelConfig::default()
    }
}

fn toy_model() -> (NeuralModel, Vec<StreamPair>) {
    let streams = toy_streams();
    let config = small_config();
    let (s, t) = build_stream_vocabularies(&streams, &config);
    (NeuralModel::new(config, s, t).unwrap(), streams)
}

fn random_context<R: Rng>(model: &NeuralModel, rng: &mut R) -> Vec<u32> {
    let c = model.config();
    let tgt = model.target_vocabulary().len() as u32;
    let inputs = model.input_size() as u32;
    (0..c.context_width())
        .map(|i| {
            if i < c.n - 1 {
                rng.gen_range(0..tgt)
            } else {
                rng.gen_range(tgt..inputs)
            }
        })
        .collect()
}

/// Log-probability recomputed from the raw parameter blocks.
fn reference_log_prob(model: &NeuralModel, context: &[u32], word: u32) -> f64 {
    let [(_, lookup), (_, hidden_w), (_, hidden_b), (_, output_w), (_, output_b)] =
        model.parameter_blocks();
    let d = model.config().embedding_dim;
    let h = model.config().hidden_dim;
    let x: Vec<f64> = context
        .iter()
        .flat_map(|&id| {
            lookup[id as usize * d..(id as usize + 1) * d]
                .iter()
                .copied()
        })
        .collect();
    let hidden: Vec<f64> = (0..h)
        .map(|r| {
            let row = &hidden_w[r * x.len()..(r + 1) * x.len()];
            let v: f64 = hidden_b[r] + row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            v.max(0.0)
        })
        .collect();
    let logits: Vec<f64> = (0..model.output_size())
        .map(|k| {
            output_b[k]
                + output_w[k * h..(k + 1) * h]
                    .iter()
                    .zip(&hidden)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    logits[word as usize] - max - z.ln()
}

#[test]
fn softmax_is_normalized_on_random_contexts() {
    let (model, _) = toy_model();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let ctx = random_context(&model, &mut rng);
        let dist = model.log_distribution(&ctx).unwrap();
        let total: f64 = dist.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
        assert!(log_sum_exp(&dist).abs() < 1e-9);
    }
}

#[test]
fn forward_pass_matches_a_direct_computation() {
    let (trained, streams) = toy_model();
    let trained = train(trained.config(), &streams, &streams).unwrap().model;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let context = random_context(&trained, &mut rng);
        let label = rng.gen_range(1..trained.output_size() as u32);
        let got = trained
            .log_prob(&EncodedInstance {
                context: context.clone(),
                label,
            })
            .unwrap();
        let expected = reference_log_prob(&trained, &context, label);
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }
}

#[test]
fn training_is_reproducible_across_thread_counts() {
    let (model, streams) = toy_model();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train(model.config(), &streams, &streams).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.model.to_bytes(), b.model.to_bytes());
    assert_eq!(a.log.len(), b.log.len());

    let mut other = model.config().clone();
    other.seed += 1;
    let c = train(&other, &streams, &streams).unwrap();
    assert_ne!(a.model.to_bytes(), c.model.to_bytes());
}

#[test]
fn one_epoch_logs_the_initial_model_and_one_update() {
    let (model, streams) = toy_model();
    let mut config = model.config().clone();
    config.epochs = 1;
    let outcome = train(&config, &streams, &streams).unwrap();
    assert_eq!(outcome.log.len(), 2);
    assert!(outcome.log[0].train_loss.is_none());
    assert!(outcome.log[1].train_loss.is_some());
}

#[test]
fn saved_models_score_identically() {
    let (model, streams) = toy_model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.nn");
    model.save(&path).unwrap();
    let back = NeuralModel::load(&path).unwrap();
    assert_eq!(back, model);
    for sp in &streams {
        assert_eq!(
            model.score_stream(sp).unwrap(),
            back.score_stream(sp).unwrap()
        );
    }
}

#[test]
fn width_mismatch_is_a_configuration_error() {
    let (model, _) = toy_model();
    assert!(model.check_width(3, 2).is_ok());
    let err = model.check_width(7, 7).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}
