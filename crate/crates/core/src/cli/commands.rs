use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{
    Backend, Command, ExportArgs, ExportMode, ExtractOpsArgs, RunManifest, ScoreArgs, SmoothingArg,
    StreamsArgs, TrainArgs,
};
use crate::corpus::{load_corpus, read_text_lines, write_lines, AlignedSentencePair};
use crate::error::{Error, Result};
use crate::neural::{train_with_progress, ModelConfig, NeuralModel};
use crate::ngram::{train_ngram, train_orientation_table, NgramModel, Smoothing};
use crate::opgen::{
    generate_operations, phrases_for_segmentation, read_operation_corpus, to_coarse,
    write_operation_corpus, OperationSequence,
};
use crate::scorer::{Scorer, StreamModel};
use crate::streams::{
    make_instances, read_stream_corpus, split_streams, split_streams_with, write_stream_corpus,
    StreamPair, StreamVariant,
};

const NEURAL_MAGIC: &[u8] = b"NOSMNNLM";

pub(super) fn execute(command: &Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::ExtractOps(args) => extract_ops(args),
        Command::Streams(args) => streams(args),
        Command::Train(args) => train(args, stdout),
        Command::Score(args) => score(args, stdout),
        Command::ExportNmt(args) => export_nmt(args),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::IoBare(e)
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str, context: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("{context} needs --{flag}")))
}

/// Generator output for every pair, projected onto `variant`, in input order.
fn corpus_operations(
    pairs: &[AlignedSentencePair],
    variant: StreamVariant,
    swap: bool,
) -> Vec<OperationSequence> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(k, pair)| {
            let ops = generate_operations(pair).ops;
            let ops = match variant {
                StreamVariant::Coarse => to_coarse(&ops, swap),
                other => other.project(&ops),
            };
            OperationSequence::new(ops, k)
        })
        .collect()
}

fn extract_ops(args: &ExtractOpsArgs) -> Result<()> {
    let c = &args.corpus;
    let pairs = load_corpus(&c.src, &c.tgt, &c.align)?;
    let sequences = corpus_operations(&pairs, args.variant, args.swap);
    write_operation_corpus(&args.out, &sequences)?;
    RunManifest::new("extract-ops", args, &[&c.src, &c.tgt, &c.align], None)?
        .write_for(&args.out)?;
    Ok(())
}

fn split_corpus(
    sequences: &[OperationSequence],
    variant: StreamVariant,
    collapse: bool,
) -> Result<Vec<StreamPair>> {
    sequences
        .par_iter()
        .map(|seq| {
            split_streams_with(&seq.ops, variant, collapse).map_err(|e| Error::Validation {
                sentence: seq.sentence + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn streams(args: &StreamsArgs) -> Result<()> {
    let sequences = read_operation_corpus(&args.ops)?;
    let pairs = split_corpus(&sequences, args.variant, !args.split_words)?;
    write_stream_corpus(&pairs, &args.out_src, &args.out_tgt, &args.out_sync)?;
    if let Some(path) = &args.instances {
        if args.n == 0 {
            return Err(Error::Config("--n must be at least 1".into()));
        }
        write_lines(
            path,
            pairs
                .iter()
                .flat_map(|sp| make_instances(sp, args.n, args.m))
                .map(|inst| inst.dump_line()),
        )?;
    }
    RunManifest::new("streams", args, &[&args.ops], None)?.write_for(&args.out_src)?;
    Ok(())
}

pub(super) fn model_config(args: &TrainArgs) -> ModelConfig {
    ModelConfig {
        n: args.n,
        m: args.m,
        input_vocab_cap: args.input_vocab,
        output_vocab_cap: args.output_vocab,
        embedding_dim: args.embedding_dim,
        hidden_dim: args.hidden_dim,
        output_embedding_dim: args.hidden_dim,
        noise_samples: args.noise_samples,
        batch_size: args.batch_size,
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        learning_rate_decay: args.lr_decay,
        seed: args.seed,
    }
}

fn log_path(args: &TrainArgs) -> PathBuf {
    args.log.clone().unwrap_or_else(|| {
        let mut name = args.out.as_os_str().to_owned();
        name.push(".log");
        PathBuf::from(name)
    })
}

fn train(args: &TrainArgs, stdout: &mut dyn Write) -> Result<()> {
    let log = log_path(args);
    match args.backend {
        Backend::Ngram => {
            let ops = required(&args.ops, "ops", "n-gram training")?;
            let corpus: Vec<Vec<String>> = read_operation_corpus(ops)?
                .iter()
                .map(OperationSequence::tokens)
                .collect();
            let smoothing = match args.smoothing {
                SmoothingArg::Kn => Smoothing::ModifiedKneserNey,
                SmoothingArg::Ml => Smoothing::MaximumLikelihood,
            };
            let model = train_ngram(&corpus, args.order, smoothing)?;
            model.save_arpa(&args.out)?;
            let mut lines = vec![
                format!("sentences\t{}", corpus.len()),
                format!("train_ppl\t{:.6}", model.perplexity(&corpus)),
            ];
            for (k, n) in model.gram_counts().iter().enumerate() {
                lines.push(format!("ngram {}\t{n}", k + 1));
            }
            for line in &lines {
                writeln!(stdout, "{line}").map_err(io_err)?;
            }
            write_lines(&log, &lines)?;
            RunManifest::new("train", args, &[ops], None)?.write_for(&args.out)?;
        }
        Backend::Orientation => {
            let src = required(&args.src, "src", "orientation training")?;
            let tgt = required(&args.tgt, "tgt", "orientation training")?;
            let align = required(&args.align, "align", "orientation training")?;
            let classes = args.classes.to_string().parse().map_err(Error::Config)?;
            let pairs = load_corpus(src, tgt, align)?;
            let table = train_orientation_table(&pairs, classes, args.sigma)?;
            table.save(&args.out)?;
            let line = format!("pairs\t{}", table.len());
            writeln!(stdout, "{line}").map_err(io_err)?;
            write_lines(&log, [line])?;
            RunManifest::new("train", args, &[src, tgt, align], None)?.write_for(&args.out)?;
        }
        Backend::Nn => {
            let ts = required(&args.train_src, "train-src", "neural training")?;
            let tt = required(&args.train_tgt, "train-tgt", "neural training")?;
            let ta = required(&args.train_sync, "train-sync", "neural training")?;
            let train_set = read_stream_corpus(ts, tt, ta)?;
            let mut inputs = vec![ts, tt, ta];
            let valid_set = match (&args.valid_src, &args.valid_tgt, &args.valid_sync) {
                (Some(s), Some(t), Some(a)) => {
                    inputs.extend([s.as_path(), t, a]);
                    read_stream_corpus(s, t, a)?
                }
                (None, None, None) => train_set.clone(),
                _ => {
                    return Err(Error::Config(
                        "--valid-src, --valid-tgt and --valid-sync go together".into(),
                    ))
                }
            };
            let config = model_config(args);
            let mut lines = Vec::new();
            let mut echo_error = None;
            let outcome = train_with_progress(&config, &train_set, &valid_set, |entry| {
                let line = entry.to_string();
                if let Err(e) = writeln!(stdout, "{line}") {
                    echo_error.get_or_insert(e);
                }
                lines.push(line);
            });
            // Keep the log of a failed run for diagnosis.
            write_lines(&log, &lines)?;
            let outcome = outcome?;
            if let Some(e) = echo_error {
                return Err(io_err(e));
            }
            outcome.model.save(&args.out)?;
            RunManifest::new("train", args, &inputs, Some(config.seed))?.write_for(&args.out)?;
        }
    }
    Ok(())
}

enum LoadedModel {
    Ngram(NgramModel),
    Neural(Box<NeuralModel>),
}

fn load_model(path: &Path) -> Result<LoadedModel> {
    let mut head = Vec::with_capacity(NEURAL_MAGIC.len());
    std::fs::File::open(path)
        .and_then(|f| f.take(NEURAL_MAGIC.len() as u64).read_to_end(&mut head))
        .map_err(|e| Error::io(path, e))?;
    if head == NEURAL_MAGIC {
        Ok(LoadedModel::Neural(Box::new(NeuralModel::load(path)?)))
    } else {
        Ok(LoadedModel::Ngram(NgramModel::load_arpa(path)?))
    }
}

/// Cut points per sentence, one line each.
fn read_phrase_cuts(path: &Path, sentences: usize) -> Result<Vec<Vec<usize>>> {
    let lines = read_text_lines(path)?;
    if lines.len() != sentences {
        return Err(Error::LineCountMismatch(format!(
            "{} has {} lines for {sentences} sentences",
            path.display(),
            lines.len()
        )));
    }
    lines
        .iter()
        .enumerate()
        .map(|(k, line)| {
            line.split_whitespace()
                .map(|v| {
                    v.parse().map_err(|_| Error::Parse {
                        line: k + 1,
                        column: 1,
                        message: format!("bad cut point {v:?}"),
                    })
                })
                .collect()
        })
        .collect()
}

/// Scores of one sentence: log-probability and number of predicted events.
type SentenceScore = (f64, usize);

fn score(args: &ScoreArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = load_model(&args.model)?;
    if let LoadedModel::Neural(nn) = &model {
        let c = nn.config();
        nn.check_width(args.n.unwrap_or(c.n), args.m.unwrap_or(c.m))?;
    }
    let corpus = match (&args.src, &args.tgt, &args.align) {
        (Some(s), Some(t), Some(a)) => Some(load_corpus(s, t, a)?),
        (None, None, None) => None,
        _ => return Err(Error::Config("--src, --tgt and --align go together".into())),
    };

    let scores: Vec<SentenceScore> = match (&model, corpus) {
        (model, Some(pairs)) => {
            let stream_model: &dyn StreamModel = match model {
                LoadedModel::Ngram(m) => m,
                LoadedModel::Neural(m) => m.as_ref(),
            };
            let cuts = if args.incremental {
                let path = required(&args.phrases, "phrases", "incremental scoring")?;
                Some(read_phrase_cuts(path, pairs.len())?)
            } else {
                None
            };
            let scorer = Scorer::new(stream_model, args.variant);
            pairs
                .par_iter()
                .enumerate()
                .map(|(k, pair)| {
                    let ops = args.variant.project(&generate_operations(pair).ops);
                    let events = ops
                        .iter()
                        .map(|op| stream_model.emit(op).1.len())
                        .sum::<usize>()
                        + 1;
                    let logprob = match &cuts {
                        Some(cuts) => {
                            let mut state = scorer.init_state();
                            for phrase in phrases_for_segmentation(pair, &cuts[k])? {
                                state = scorer.extend(&state, &phrase)?.0;
                            }
                            scorer.finalize(&state)?
                        }
                        None => scorer.score_operations(&ops)?,
                    };
                    Ok((logprob, events))
                })
                .collect::<Result<_>>()?
        }
        (_, None) if args.incremental => {
            return Err(Error::Config(
                "incremental scoring needs the aligned corpus (--src --tgt --align)".into(),
            ))
        }
        (LoadedModel::Ngram(m), None) => {
            let ops = required(&args.ops, "ops", "scoring an n-gram model without a corpus")?;
            read_operation_corpus(ops)?
                .par_iter()
                .map(|seq| {
                    let tokens = seq.tokens();
                    Ok((m.score_sequence(&tokens), tokens.len() + 1))
                })
                .collect::<Result<_>>()?
        }
        (LoadedModel::Neural(m), None) => {
            let s = required(
                &args.stream_src,
                "stream-src",
                "scoring a neural model without a corpus",
            )?;
            let t = required(
                &args.stream_tgt,
                "stream-tgt",
                "scoring a neural model without a corpus",
            )?;
            let a = required(
                &args.stream_sync,
                "stream-sync",
                "scoring a neural model without a corpus",
            )?;
            read_stream_corpus(s, t, a)?
                .iter()
                .map(|sp| Ok((m.score_stream(sp)?, sp.target.len() + 1)))
                .collect::<Result<_>>()?
        }
    };

    let mut total = 0.0;
    let mut events = 0usize;
    for (k, (logprob, n)) in scores.iter().enumerate() {
        writeln!(stdout, "{}\t{logprob}", k + 1).map_err(io_err)?;
        total += logprob;
        events += n;
    }
    if events > 0 {
        let ppl = (-total / events as f64).exp();
        if !ppl.is_finite() {
            return Err(Error::Numeric(format!("corpus perplexity is {ppl}")));
        }
        writeln!(stdout, "PPL\t{ppl}").map_err(io_err)?;
    } else {
        writeln!(stdout, "PPL\tnan").map_err(io_err)?;
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn export_nmt(args: &ExportArgs) -> Result<()> {
    let c = &args.corpus;
    let pairs = load_corpus(&c.src, &c.tgt, &c.align)?;
    let exported: Vec<(String, String)> = pairs
        .par_iter()
        .map(|pair| {
            let ops = generate_operations(pair).ops;
            Ok(match args.mode {
                ExportMode::Preordered => {
                    let lexical = StreamVariant::Lexical.project(&ops);
                    let sp = split_streams_with(&lexical, StreamVariant::Lexical, false)?;
                    (sp.source.join(" "), pair.target.join(" "))
                }
                ExportMode::OsmAugmented => {
                    let sp = split_streams(&ops, StreamVariant::Osm)?;
                    (sp.source.join(" "), sp.target.join(" "))
                }
                ExportMode::CoarseAugmented => {
                    let coarse = StreamVariant::Coarse.project(&ops);
                    let sp = split_streams(&coarse, StreamVariant::Coarse)?;
                    (sp.source.join(" "), sp.target.join(" "))
                }
            })
        })
        .collect::<Result<_>>()?;
    write_lines(&args.out_src, exported.iter().map(|e| &e.0))?;
    write_lines(&args.out_tgt, exported.iter().map(|e| &e.1))?;
    let aux_src = args
        .aux_src
        .clone()
        .unwrap_or_else(|| with_suffix(&args.out_src, ".aux.src"));
    let aux_tgt = args
        .aux_tgt
        .clone()
        .unwrap_or_else(|| with_suffix(&args.out_src, ".aux.tgt"));
    write_lines(&aux_src, pairs.iter().map(|p| p.source.join(" ")))?;
    write_lines(&aux_tgt, exported.iter().map(|e| &e.0))?;
    RunManifest::new("export-nmt", args, &[&c.src, &c.tgt, &c.align], None)?
        .write_for(&args.out_src)?;
    Ok(())
}
