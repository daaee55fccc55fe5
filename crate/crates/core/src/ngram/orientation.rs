use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{read_text_lines, write_lines, AlignedSentencePair};
use crate::error::{Error, Result};
use crate::opgen::{classify_initial_orientation, classify_orientation, extract_mtus, Orientation};

pub const DEFAULT_ORIENTATION_SIGMA: f64 = 0.5;

/// Orientation class scheme of a table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrientationClasses {
    /// M, S, D.
    Three,
    /// M, S, FD, BD.
    Four,
}

impl OrientationClasses {
    pub fn count(self) -> usize {
        match self {
            OrientationClasses::Three => 3,
            OrientationClasses::Four => 4,
        }
    }

    /// Column of `o` in a row.
    pub fn index(self, o: Orientation) -> usize {
        match (self, o) {
            (_, Orientation::Monotone) => 0,
            (_, Orientation::Swap) => 1,
            (OrientationClasses::Three, _) => 2,
            (OrientationClasses::Four, Orientation::ForwardDiscontinuous) => 2,
            (OrientationClasses::Four, Orientation::BackwardDiscontinuous) => 3,
        }
    }
}

impl fmt::Display for OrientationClasses {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.count())
    }
}

impl FromStr for OrientationClasses {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "3" => Ok(OrientationClasses::Three),
            "4" => Ok(OrientationClasses::Four),
            _ => Err(format!("orientation classes must be 3 or 4, got {s:?}")),
        }
    }
}

/// Smoothed orientation distributions keyed by (source cept, target cept).
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationTable {
    classes: OrientationClasses,
    sigma: f64,
    counts: BTreeMap<(String, String), Vec<u64>>,
    probs: BTreeMap<(String, String), Vec<f64>>,
}

/// `(count(o) + sigma) / (total + k * sigma)` for each class.
pub fn smooth_counts(counts: &[u64], sigma: f64) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + counts.len() as f64 * sigma;
    counts.iter().map(|&c| (c as f64 + sigma) / denom).collect()
}

/// Every unit of the corpus with its cepts and orientation, in target order.
/// The first unit of a sentence is measured from the sentence start.
pub fn orientation_events(
    corpus: &[AlignedSentencePair],
) -> Result<Vec<(String, String, Orientation)>> {
    let mut events = Vec::new();
    for pair in corpus {
        let mtus = extract_mtus(pair).mtus;
        for (k, cur) in mtus.iter().enumerate() {
            let o = match k {
                0 => classify_initial_orientation(cur)?,
                _ => classify_orientation(&mtus[k - 1], cur)?,
            };
            events.push((cur.source_text(), cur.target_text(), o));
        }
    }
    Ok(events)
}

pub fn train_orientation_table(
    corpus: &[AlignedSentencePair],
    classes: OrientationClasses,
    sigma: f64,
) -> Result<OrientationTable> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!(
            "smoothing must be a finite value >= 0, got {sigma}"
        )));
    }
    let mut counts: BTreeMap<(String, String), Vec<u64>> = BTreeMap::new();
    for (f, e, o) in orientation_events(corpus)? {
        counts
            .entry((f, e))
            .or_insert_with(|| vec![0; classes.count()])[classes.index(o)] += 1;
    }
    let probs = counts
        .iter()
        .map(|(key, c)| (key.clone(), smooth_counts(c, sigma)))
        .collect();
    Ok(OrientationTable {
        classes,
        sigma,
        counts,
        probs,
    })
}

impl OrientationTable {
    pub fn classes(&self) -> OrientationClasses {
        self.classes
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Raw counts of a pair (empty for tables loaded from disk).
    pub fn counts(&self, source: &str, target: &str) -> Option<&[u64]> {
        self.counts
            .get(&(source.to_owned(), target.to_owned()))
            .map(Vec::as_slice)
    }

    /// Stored distribution of a pair.
    pub fn row(&self, source: &str, target: &str) -> Option<&[f64]> {
        self.probs
            .get(&(source.to_owned(), target.to_owned()))
            .map(Vec::as_slice)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &str, &[f64])> {
        self.probs
            .iter()
            .map(|((f, e), p)| (f.as_str(), e.as_str(), p.as_slice()))
    }

    /// p(o | F, E); unseen pairs get the uniform distribution when smoothing is on.
    pub fn prob(&self, source: &str, target: &str, o: Orientation) -> Option<f64> {
        let k = self.classes.index(o);
        match self.row(source, target) {
            Some(row) => Some(row[k]),
            None if self.sigma > 0.0 => Some(1.0 / self.classes.count() as f64),
            None => None,
        }
    }

    /// `F ||| E ||| p...` lines, one probability per class.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_lines(
            path.as_ref(),
            self.rows().map(|(f, e, p)| {
                let probs: Vec<String> = p.iter().map(f64::to_string).collect();
                format!("{f} ||| {e} ||| {}", probs.join(" "))
            }),
        )
    }

    /// Loads a saved table; the class scheme follows the column count.
    pub fn load(path: impl AsRef<Path>, sigma: f64) -> Result<Self> {
        let mut probs = BTreeMap::new();
        let mut classes = None;
        for (k, line) in read_text_lines(path.as_ref())?.iter().enumerate() {
            let err = |message: String| Error::Parse {
                line: k + 1,
                column: 1,
                message,
            };
            let parts: Vec<&str> = line.split(" ||| ").collect();
            if parts.len() != 3 {
                return Err(err("expected F ||| E ||| probabilities".into()));
            }
            let row = parts[2]
                .split_whitespace()
                .map(|p| {
                    p.parse::<f64>()
                        .map_err(|_| err(format!("bad probability {p:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let scheme = match row.len() {
                3 => OrientationClasses::Three,
                4 => OrientationClasses::Four,
                n => return Err(err(format!("expected 3 or 4 probabilities, got {n}"))),
            };
            if classes.is_some_and(|c| c != scheme) {
                return Err(err("rows disagree on the number of classes".into()));
            }
            classes = Some(scheme);
            probs.insert((parts[0].to_owned(), parts[1].to_owned()), row);
        }
        Ok(OrientationTable {
            classes: classes.unwrap_or(OrientationClasses::Four),
            sigma,
            counts: BTreeMap::new(),
            probs,
        })
    }
}
