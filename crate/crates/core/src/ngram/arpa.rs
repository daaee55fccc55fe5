use std::collections::HashMap;
use std::f64::consts::LN_10;
use std::fmt::Write as _;
use std::path::Path;

use super::{Entry, NgramModel};
use crate::corpus::{read_text_lines, write_lines, Vocabulary};
use crate::error::{Error, Result};
use crate::{BOS, EOS, UNK};

/// Log10 value standing for an impossible event.
const LOG_ZERO: f64 = -99.0;

fn to_log10(ln: f64) -> f64 {
    if ln == f64::NEG_INFINITY {
        LOG_ZERO
    } else {
        ln / LN_10
    }
}

fn from_log10(v: f64) -> f64 {
    if v <= LOG_ZERO {
        f64::NEG_INFINITY
    } else {
        v * LN_10
    }
}

impl NgramModel {
    /// ARPA text: per-order sections of log10 probability, n-gram and
    /// optional log10 backoff weight.
    pub fn to_arpa(&self) -> String {
        let mut out = String::from("\n\\data\\\n");
        for (k, table) in self.grams.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", k + 1, table.len());
        }
        for (k, table) in self.grams.iter().enumerate() {
            let _ = write!(out, "\n\\{}-grams:\n", k + 1);
            let mut rows: Vec<(Vec<&str>, &Entry)> = table
                .iter()
                .map(|(ids, e)| {
                    let words = ids
                        .iter()
                        .map(|&id| self.vocab.token(id).expect("id in vocabulary"))
                        .collect();
                    (words, e)
                })
                .collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            for (words, e) in rows {
                let _ = write!(out, "{}\t{}", to_log10(e.logp), words.join(" "));
                if k + 1 < self.order && e.backoff != 0.0 {
                    let _ = write!(out, "\t{}", to_log10(e.backoff));
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    pub fn save_arpa(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = self.to_arpa();
        write_lines(path.as_ref(), text.lines())
    }

    pub fn load_arpa(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_arpa(&read_text_lines(path.as_ref())?.join("\n"))
    }

    pub fn from_arpa(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            line,
            column: 1,
            message,
        };
        let mut declared: Vec<usize> = Vec::new();
        let mut sections: Vec<Vec<(Vec<String>, f64, f64)>> = Vec::new();
        let mut current: Option<usize> = None;
        let mut ended = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line == "\\data\\" {
                continue;
            }
            if line == "\\end\\" {
                ended = true;
                break;
            }
            if let Some(rest) = line.strip_prefix("ngram ") {
                let (k, n) = rest
                    .split_once('=')
                    .ok_or_else(|| err(line_no, "malformed ngram count".into()))?;
                let k: usize = k
                    .trim()
                    .parse()
                    .map_err(|_| err(line_no, "bad order".into()))?;
                let n: usize = n
                    .trim()
                    .parse()
                    .map_err(|_| err(line_no, "bad count".into()))?;
                if k != declared.len() + 1 {
                    return Err(err(line_no, "orders must be declared in sequence".into()));
                }
                declared.push(n);
                continue;
            }
            if let Some(k) = line
                .strip_prefix('\\')
                .and_then(|s| s.strip_suffix("-grams:"))
            {
                let k: usize = k.parse().map_err(|_| err(line_no, "bad section".into()))?;
                if k != sections.len() + 1 || k > declared.len() {
                    return Err(err(line_no, format!("unexpected section {k}")));
                }
                sections.push(Vec::new());
                current = Some(k);
                continue;
            }
            let k = current.ok_or_else(|| err(line_no, "entry outside a section".into()))?;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(err(
                    line_no,
                    "expected prob, n-gram and optional backoff".into(),
                ));
            }
            let number = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| err(line_no, format!("bad number {s:?}")))
            };
            let logp = number(fields[0])?;
            let words: Vec<String> = fields[1].split(' ').map(str::to_owned).collect();
            if words.len() != k {
                return Err(err(line_no, format!("expected a {k}-gram")));
            }
            let backoff = fields.get(2).map(|s| number(s)).transpose()?.unwrap_or(0.0);
            sections[k - 1].push((words, logp, backoff));
        }
        if !ended {
            return Err(Error::Format("missing \\end\\ marker".into()));
        }
        if sections.is_empty() || sections.len() != declared.len() {
            return Err(Error::Format(
                "declared orders and sections disagree".into(),
            ));
        }
        for (k, (sec, &n)) in sections.iter().zip(&declared).enumerate() {
            if sec.len() != n {
                return Err(Error::Format(format!(
                    "order {} declares {n} entries but has {}",
                    k + 1,
                    sec.len()
                )));
            }
        }

        let mut tokens = vec![BOS.to_owned(), EOS.to_owned(), UNK.to_owned()];
        for (words, _, _) in &sections[0] {
            if ![BOS, EOS, UNK].contains(&words[0].as_str()) {
                tokens.push(words[0].clone());
            }
        }
        let vocab = Vocabulary::from_parts(tokens, 3)?;
        let mut grams = Vec::with_capacity(sections.len());
        for sec in sections {
            let mut table = HashMap::with_capacity(sec.len());
            for (words, logp, backoff) in sec {
                let ids = words
                    .iter()
                    .map(|w| {
                        vocab.get(w).ok_or_else(|| {
                            Error::Format(format!(
                                "{w:?} appears in an n-gram but not as a unigram"
                            ))
                        })
                    })
                    .collect::<Result<Vec<u32>>>()?;
                let entry = Entry {
                    logp: from_log10(logp),
                    backoff: from_log10(backoff),
                };
                table.insert(ids, entry);
            }
            grams.push(table);
        }
        Ok(NgramModel {
            order: grams.len(),
            vocab,
            grams,
        })
    }
}
