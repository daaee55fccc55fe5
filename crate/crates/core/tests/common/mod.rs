#![allow(dead_code)]

use std::collections::BTreeSet;

use nosm::corpus::AlignedSentencePair;
use rand::seq::SliceRandom;
use rand::Rng;

pub const WORKED_SOURCE: &str = "noch weiter gehen zu wollen , wäre ebenso unverantwortlich";
pub const WORKED_TARGET: &str = "it would be just as irresponsible to wish to go further";
pub const WORKED_ALIGNMENT: &str = "6-1 6-2 7-3 7-4 8-5 3-6 4-7 2-8 2-9 0-10 1-10";

pub const WORKED_OPERATIONS: &str = "GEN_T(it) GAP GEN(wäre|would_be) GEN(ebenso|just_as) \
GEN(unverantwortlich|irresponsible) JB_1 GAP GEN(zu|to) GEN(wollen|wish) GEN_S(,) JB_1 GAP \
GEN(gehen|to_go) JB_1 GEN(noch_weiter|further)";

pub fn worked_pair() -> AlignedSentencePair {
    AlignedSentencePair::parse(WORKED_SOURCE, WORKED_TARGET, WORKED_ALIGNMENT).unwrap()
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

/// Random sentence pair of lengths 1..=12 drawn from one of three regimes:
/// a 1-1 permutation, sparse many-to-many links, or a permutation with
/// unaligned words and merged units.
pub fn random_pair<R: Rng>(rng: &mut R) -> AlignedSentencePair {
    let vocab = ["a", "b", "c", "d", "e", "f", "g", "h"];
    let regime = rng.gen_range(0..3);
    let (n_src, n_tgt) = match regime {
        0 => {
            let n = rng.gen_range(1..=12);
            (n, n)
        }
        _ => (rng.gen_range(1..=12), rng.gen_range(1..=12)),
    };
    let source: Vec<String> = (0..n_src)
        .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
        .collect();
    let target: Vec<String> = (0..n_tgt)
        .map(|_| {
            let w = vocab[rng.gen_range(0..vocab.len())];
            if rng.gen_bool(0.7) {
                w.to_uppercase()
            } else {
                w.to_string()
            }
        })
        .collect();
    let mut links = BTreeSet::new();
    match regime {
        0 => {
            let mut perm: Vec<usize> = (0..n_tgt).collect();
            perm.shuffle(rng);
            for (i, &j) in perm.iter().enumerate() {
                links.insert((i, j));
            }
        }
        1 => {
            let density = rng.gen_range(0.05..0.35);
            for i in 0..n_src {
                for j in 0..n_tgt {
                    if rng.gen_bool(density) {
                        links.insert((i, j));
                    }
                }
            }
        }
        _ => {
            let mut perm: Vec<usize> = (0..n_tgt).collect();
            perm.shuffle(rng);
            for (i, &j) in perm.iter().enumerate().take(n_src) {
                if rng.gen_bool(0.8) {
                    links.insert((i, j));
                }
                if rng.gen_bool(0.15) {
                    links.insert((i, rng.gen_range(0..n_tgt)));
                }
            }
        }
    }
    AlignedSentencePair::new(source, target, links).unwrap()
}
