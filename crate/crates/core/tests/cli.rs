mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::*;
use nosm::neural::NeuralModel;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn nosm(args: &[&str]) -> Run {
    nosm_env(args, &[])
}

fn nosm_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_nosm"))
        .args(args)
        .envs(env.iter().copied())
        .output()
        .unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn ok(args: &[&str]) -> String {
    let run = nosm(args);
    assert_eq!(run.code, 0, "{args:?}\n{}", run.stderr);
    run.stdout
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn toy_corpus_args() -> Vec<String> {
    ["src", "tgt", "align"]
        .iter()
        .flat_map(|ext| {
            [
                format!("--{ext}"),
                data(&format!("toy.{ext}")).to_string_lossy().into_owned(),
            ]
        })
        .collect()
}

fn write_worked_corpus(dir: &Path) -> Vec<String> {
    let files = [
        ("src", WORKED_SOURCE),
        ("tgt", WORKED_TARGET),
        ("align", WORKED_ALIGNMENT),
    ];
    let mut args = Vec::new();
    for (ext, text) in files {
        let path = dir.join(format!("worked.{ext}"));
        std::fs::write(&path, format!("{text}\n")).unwrap();
        args.push(format!("--{ext}"));
        args.push(path.to_string_lossy().into_owned());
    }
    args
}

fn with<'a>(base: &'a [String], extra: &[&'a str]) -> Vec<&'a str> {
    extra
        .iter()
        .copied()
        .chain(base.iter().map(String::as_str))
        .collect()
}

fn ppl(stdout: &str) -> f64 {
    let last = stdout.lines().last().unwrap();
    let (tag, value) = last.split_once('\t').unwrap();
    assert_eq!(tag, "PPL");
    value.parse().unwrap()
}

#[test]
fn toy_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let corpus = toy_corpus_args();
    ok(&with(&corpus, &["extract-ops", "--out", p(&d("ops"))]));
    assert!(nosm::cli::RunManifest::path_for(&d("ops")).exists());
    ok(&[
        "streams",
        "--ops",
        p(&d("ops")),
        "--out-src",
        p(&d("s.src")),
        "--out-tgt",
        p(&d("s.tgt")),
        "--out-sync",
        p(&d("s.sync")),
    ]);

    ok(&[
        "train",
        "--backend",
        "ngram",
        "--ops",
        p(&d("ops")),
        "--out",
        p(&d("lm.arpa")),
    ]);
    assert!(d("lm.arpa.log").exists());
    let scored = ok(&["score", "--model", p(&d("lm.arpa")), "--ops", p(&d("ops"))]);
    assert_eq!(scored.lines().count(), 13);
    assert!(scored.starts_with("1\t-"));
    let from_corpus = ok(&with(&corpus, &["score", "--model", p(&d("lm.arpa"))]));
    assert_eq!(scored, from_corpus);

    let streams = [d("s.src"), d("s.tgt"), d("s.sync")];
    let nn = [
        "train",
        "--backend",
        "nn",
        "--train-src",
        p(&streams[0]),
        "--train-tgt",
        p(&streams[1]),
        "--train-sync",
        p(&streams[2]),
        "--n",
        "3",
        "--m",
        "2",
        "--embedding-dim",
        "8",
        "--hidden-dim",
        "12",
        "--noise-samples",
        "5",
        "--batch-size",
        "10",
        "--epochs",
        "2",
    ];
    let log = ok(&[&nn[..], &["--out", p(&d("nn.bin"))]].concat());
    assert_eq!(log.lines().count(), 3);
    let by_streams = ok(&[
        "score",
        "--model",
        p(&d("nn.bin")),
        "--stream-src",
        p(&d("s.src")),
        "--stream-tgt",
        p(&d("s.tgt")),
        "--stream-sync",
        p(&d("s.sync")),
        "--n",
        "3",
        "--m",
        "2",
    ]);
    let by_corpus = ok(&with(&corpus, &["score", "--model", p(&d("nn.bin"))]));
    assert_eq!(by_streams, by_corpus);
    assert!(ppl(&by_streams).is_finite());

    // Same flags and seed: same manifest, same bytes.
    ok(&[&nn[..], &["--out", p(&d("nn2.bin"))]].concat());
    assert_eq!(
        std::fs::read(d("nn.bin")).unwrap(),
        std::fs::read(d("nn2.bin")).unwrap()
    );
    let manifest = |f: &str| {
        let text = std::fs::read_to_string(d(&format!("{f}.manifest.json"))).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["config"]["out"] = serde_json::Value::Null;
        v
    };
    assert_eq!(manifest("nn.bin"), manifest("nn2.bin"));
    assert_eq!(manifest("nn.bin")["seed"], 1);
}

#[test]
fn incremental_scoring_matches_whole_sentences() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let corpus = toy_corpus_args();
    ok(&with(&corpus, &["extract-ops", "--out", p(&d("ops"))]));
    ok(&[
        "train",
        "--backend",
        "ngram",
        "--order",
        "3",
        "--ops",
        p(&d("ops")),
        "--out",
        p(&d("lm.arpa")),
    ]);
    std::fs::write(d("phrases"), "1\n2\n\n1 2\n1\n3\n2\n1\n1 3\n5\n2 4\n1\n").unwrap();
    let whole = ok(&with(&corpus, &["score", "--model", p(&d("lm.arpa"))]));
    let incremental = ok(&with(
        &corpus,
        &[
            "score",
            "--model",
            p(&d("lm.arpa")),
            "--incremental",
            "--phrases",
            p(&d("phrases")),
        ],
    ));
    for (a, b) in whole.lines().zip(incremental.lines()) {
        let (ka, va) = a.split_once('\t').unwrap();
        let (kb, vb) = b.split_once('\t').unwrap();
        assert_eq!(ka, kb);
        let (va, vb): (f64, f64) = (va.parse().unwrap(), vb.parse().unwrap());
        assert!((va - vb).abs() < 1e-9);
    }

    std::fs::write(d("short"), "1\n").unwrap();
    let run = nosm(&with(
        &corpus,
        &[
            "score",
            "--model",
            p(&d("lm.arpa")),
            "--incremental",
            "--phrases",
            p(&d("short")),
        ],
    ));
    assert_eq!(run.code, 2);
}

#[test]
fn extract_ops_on_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_worked_corpus(dir.path());
    let out = dir.path().join("ops");
    ok(&with(&corpus, &["extract-ops", "--out", p(&out)]));
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        format!("{WORKED_OPERATIONS}\n")
    );
    ok(&with(
        &corpus,
        &["extract-ops", "--variant", "coarse", "--out", p(&out)],
    ));
    let coarse = std::fs::read_to_string(&out).unwrap();
    let tags: Vec<&str> = coarse
        .split_whitespace()
        .filter(|t| ["FD", "BD", "SW"].contains(t))
        .collect();
    assert_eq!(tags, ["FD", "BD", "BD", "BD"]);
    assert!(!coarse.contains("GAP"));
}

#[test]
fn streams_on_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let corpus = write_worked_corpus(dir.path());
    ok(&with(&corpus, &["extract-ops", "--out", p(&d("ops"))]));
    ok(&[
        "streams",
        "--ops",
        p(&d("ops")),
        "--out-src",
        p(&d("s")),
        "--out-tgt",
        p(&d("t")),
        "--out-sync",
        p(&d("a")),
        "--instances",
        p(&d("inst")),
    ]);
    let src = std::fs::read_to_string(d("s")).unwrap();
    assert!(src.starts_with("Insert_Gap wäre ebenso unverantwortlich Jump_Back_1"));
    let tgt = std::fs::read_to_string(d("t")).unwrap();
    assert!(tgt.starts_with("it Insert_Gap would_be"));
    let instances = std::fs::read_to_string(d("inst")).unwrap();
    assert_eq!(
        instances.lines().count(),
        tgt.split_whitespace().count() + 1
    );
    assert!(instances
        .lines()
        .all(|l| l.split_once('\t').unwrap().1.split(' ').count() == 13));
}

#[test]
fn empty_corpus_gives_an_empty_operation_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = Vec::new();
    for ext in ["src", "tgt", "align"] {
        let path = dir.path().join(ext);
        std::fs::write(&path, "").unwrap();
        args.push(format!("--{ext}"));
        args.push(path.to_string_lossy().into_owned());
    }
    let out = dir.path().join("ops");
    ok(&with(&args, &["extract-ops", "--out", p(&out)]));
    assert_eq!(std::fs::read_to_string(out).unwrap(), "");
}

#[test]
fn export_nmt_modes() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let corpus = write_worked_corpus(dir.path());
    ok(&with(
        &corpus,
        &[
            "export-nmt",
            "--mode",
            "preordered",
            "--out-src",
            p(&d("pre.src")),
            "--out-tgt",
            p(&d("pre.tgt")),
        ],
    ));
    let pre = std::fs::read_to_string(d("pre.src")).unwrap();
    assert_eq!(
        pre,
        "wäre ebenso unverantwortlich zu wollen , gehen noch weiter\n"
    );
    assert_eq!(
        std::fs::read_to_string(d("pre.tgt")).unwrap(),
        format!("{WORKED_TARGET}\n")
    );
    assert_eq!(
        std::fs::read_to_string(d("pre.src.aux.src")).unwrap(),
        format!("{WORKED_SOURCE}\n")
    );
    assert_eq!(std::fs::read_to_string(d("pre.src.aux.tgt")).unwrap(), pre);

    ok(&with(
        &corpus,
        &[
            "export-nmt",
            "--mode",
            "osm-augmented",
            "--out-src",
            p(&d("osm.src")),
            "--out-tgt",
            p(&d("osm.tgt")),
        ],
    ));
    assert!(std::fs::read_to_string(d("osm.tgt"))
        .unwrap()
        .starts_with("it Insert_Gap would_be just_as irresponsible Jump_Back_1"));

    ok(&with(
        &corpus,
        &[
            "export-nmt",
            "--mode",
            "coarse-augmented",
            "--out-src",
            p(&d("c.src")),
            "--out-tgt",
            p(&d("c.tgt")),
        ],
    ));
    assert_eq!(
        std::fs::read_to_string(d("c.src")).unwrap(),
        "FD wäre ebenso unverantwortlich BD zu wollen , BD gehen BD noch_weiter\n"
    );
}

#[test]
fn uniform_model_perplexity_is_the_output_vocabulary_size() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let corpus = toy_corpus_args();
    ok(&with(&corpus, &["extract-ops", "--out", p(&d("ops"))]));
    ok(&[
        "streams",
        "--ops",
        p(&d("ops")),
        "--out-src",
        p(&d("s")),
        "--out-tgt",
        p(&d("t")),
        "--out-sync",
        p(&d("a")),
    ]);
    ok(&[
        "train",
        "--backend",
        "nn",
        "--train-src",
        p(&d("s")),
        "--train-tgt",
        p(&d("t")),
        "--train-sync",
        p(&d("a")),
        "--n",
        "2",
        "--m",
        "1",
        "--embedding-dim",
        "2",
        "--hidden-dim",
        "3",
        "--epochs",
        "1",
        "--out",
        p(&d("nn")),
    ]);
    let mut model = NeuralModel::load(d("nn")).unwrap();
    for (_, block) in model.parameter_blocks_mut() {
        block.fill(0.0);
    }
    model.save(d("nn")).unwrap();
    let out = ok(&[
        "score",
        "--model",
        p(&d("nn")),
        "--stream-src",
        p(&d("s")),
        "--stream-tgt",
        p(&d("t")),
        "--stream-sync",
        p(&d("a")),
    ]);
    let expected = model.output_size() as f64;
    assert!((ppl(&out) - expected).abs() < 1e-9 * expected);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    assert_eq!(nosm(&["frobnicate"]).code, 1);
    assert_eq!(nosm(&["extract-ops"]).code, 1);

    let missing = nosm(&[
        "extract-ops",
        "--src",
        p(&d("nope")),
        "--tgt",
        p(&d("nope")),
        "--align",
        p(&d("nope")),
        "--out",
        p(&d("ops")),
    ]);
    assert_eq!(missing.code, 2);

    std::fs::write(d("src"), "a b\nc\n").unwrap();
    std::fs::write(d("tgt"), "A B\nC\n").unwrap();
    std::fs::write(d("align"), "0-0 1-1\n0-5\n").unwrap();
    let bad = nosm(&[
        "extract-ops",
        "--src",
        p(&d("src")),
        "--tgt",
        p(&d("tgt")),
        "--align",
        p(&d("align")),
        "--out",
        p(&d("ops")),
    ]);
    assert_eq!(bad.code, 2);
    assert!(bad.stderr.contains('2'), "{}", bad.stderr);

    let train_without_ops = nosm(&["train", "--backend", "ngram", "--out", p(&d("lm"))]);
    assert_eq!(train_without_ops.code, 1);

    let threads = nosm_env(&["--help"], &[("NOSM_THREADS", "zero")]);
    assert_eq!(threads.code, 1);
    assert!(threads.stderr.contains("NOSM_THREADS"));
}

#[test]
fn model_width_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let corpus = toy_corpus_args();
    ok(&with(&corpus, &["extract-ops", "--out", p(&d("ops"))]));
    ok(&[
        "streams",
        "--ops",
        p(&d("ops")),
        "--out-src",
        p(&d("s")),
        "--out-tgt",
        p(&d("t")),
        "--out-sync",
        p(&d("a")),
    ]);
    ok(&[
        "train",
        "--backend",
        "nn",
        "--train-src",
        p(&d("s")),
        "--train-tgt",
        p(&d("t")),
        "--train-sync",
        p(&d("a")),
        "--n",
        "2",
        "--m",
        "1",
        "--embedding-dim",
        "2",
        "--hidden-dim",
        "3",
        "--epochs",
        "1",
        "--out",
        p(&d("nn")),
    ]);
    let run = nosm(&[
        "score",
        "--model",
        p(&d("nn")),
        "--stream-src",
        p(&d("s")),
        "--stream-tgt",
        p(&d("t")),
        "--stream-sync",
        p(&d("a")),
        "--n",
        "7",
    ]);
    assert_eq!(run.code, 1);
    assert!(run.stdout.is_empty());
}
