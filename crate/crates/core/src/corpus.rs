//! Parallel text with word alignments, and frequency-cut vocabularies.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::{BOS, EOS, UNK};

/// Alignment link `(source index, target index)`, both 0-based.
pub type Link = (usize, usize);

/// One sentence pair with its word alignment.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AlignedSentencePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub links: BTreeSet<Link>,
}

impl AlignedSentencePair {
    /// Builds a pair, checking that every link indexes into both sides.
    pub fn new(source: Vec<String>, target: Vec<String>, links: BTreeSet<Link>) -> Result<Self> {
        let pair = AlignedSentencePair {
            source,
            target,
            links,
        };
        pair.validate(0)?;
        Ok(pair)
    }

    /// Convenience constructor from whitespace-separated strings and a Pharaoh line.
    pub fn parse(source: &str, target: &str, alignment: &str) -> Result<Self> {
        Self::new(
            tokenize(source),
            tokenize(target),
            parse_alignment_line(alignment)?,
        )
    }

    pub(crate) fn validate(&self, sentence: usize) -> Result<()> {
        for &(i, j) in &self.links {
            if i >= self.source.len() || j >= self.target.len() {
                return Err(Error::Validation {
                    sentence,
                    message: format!(
                        "link {}-{} out of range for {} source / {} target tokens",
                        i,
                        j,
                        self.source.len(),
                        self.target.len()
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn alignment_line(&self) -> String {
        format_alignment(&self.links)
    }
}

fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_owned).collect()
}

/// Parses a Pharaoh alignment line (`"0-0 1-2 ..."`). Duplicates collapse.
pub fn parse_alignment_line(text: &str) -> Result<BTreeSet<Link>> {
    parse_alignment_line_at(text, 1)
}

fn parse_alignment_line_at(text: &str, line: usize) -> Result<BTreeSet<Link>> {
    let mut links = BTreeSet::new();
    let mut offset = 0;
    for piece in text.split(|c: char| c.is_whitespace()) {
        let column = offset + 1;
        offset += piece.len() + 1;
        if piece.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line,
            column,
            message,
        };
        let (i, j) = piece
            .split_once('-')
            .ok_or_else(|| err(format!("expected \"i-j\", found {piece:?}")))?;
        let i = i
            .parse::<usize>()
            .map_err(|_| err(format!("bad source index in {piece:?}")))?;
        let j = j
            .parse::<usize>()
            .map_err(|_| err(format!("bad target index in {piece:?}")))?;
        links.insert((i, j));
    }
    Ok(links)
}

pub fn format_alignment(links: &BTreeSet<Link>) -> String {
    let parts: Vec<String> = links.iter().map(|(i, j)| format!("{i}-{j}")).collect();
    parts.join(" ")
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

/// Loads three line-aligned files into validated sentence pairs.
pub fn load_corpus(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
    align_path: impl AsRef<Path>,
) -> Result<Vec<AlignedSentencePair>> {
    let (src_path, tgt_path, align_path) =
        (src_path.as_ref(), tgt_path.as_ref(), align_path.as_ref());
    let src = read_lines(src_path)?;
    let tgt = read_lines(tgt_path)?;
    let align = read_lines(align_path)?;
    if src.len() != tgt.len() || src.len() != align.len() {
        return Err(Error::LineCountMismatch(format!(
            "{} has {}, {} has {}, {} has {}",
            src_path.display(),
            src.len(),
            tgt_path.display(),
            tgt.len(),
            align_path.display(),
            align.len()
        )));
    }
    src.iter()
        .zip(&tgt)
        .zip(&align)
        .enumerate()
        .map(|(k, ((s, t), a))| {
            let pair = AlignedSentencePair {
                source: tokenize(s),
                target: tokenize(t),
                links: parse_alignment_line_at(a, k + 1)?,
            };
            pair.validate(k + 1)?;
            Ok(pair)
        })
        .collect()
}

/// Writes a corpus back out in the three-file format.
pub fn write_corpus(
    pairs: &[AlignedSentencePair],
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
    align_path: impl AsRef<Path>,
) -> Result<()> {
    write_lines(src_path.as_ref(), pairs.iter().map(|p| p.source.join(" ")))?;
    write_lines(tgt_path.as_ref(), pairs.iter().map(|p| p.target.join(" ")))?;
    write_lines(
        align_path.as_ref(),
        pairs.iter().map(|p| p.alignment_line()),
    )
}

/// Writes one string per line (LF-terminated).
pub fn write_lines<I, S>(path: &Path, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for line in lines {
        writeln!(out, "{}", line.as_ref()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text_lines(path: &Path) -> Result<Vec<String>> {
    read_lines(path)
}

/// Token ↔ id map with reserved symbols that survive any frequency cut.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    reserved: usize,
}

impl Vocabulary {
    pub const BOS_ID: u32 = 0;
    pub const EOS_ID: u32 = 1;
    pub const UNK_ID: u32 = 2;

    fn with_reserved<'a>(extra: impl IntoIterator<Item = &'a str>) -> Self {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            ids: HashMap::new(),
            reserved: 0,
        };
        for tok in [BOS, EOS, UNK].into_iter().chain(extra) {
            vocab.push(tok);
        }
        vocab.reserved = vocab.tokens.len();
        vocab
    }

    fn push(&mut self, tok: &str) -> bool {
        if self.ids.contains_key(tok) {
            return false;
        }
        self.ids.insert(tok.to_owned(), self.tokens.len() as u32);
        self.tokens.push(tok.to_owned());
        true
    }

    /// Id of `token`, or the unknown id.
    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of reserved entries (always the lowest ids).
    pub fn reserved_count(&self) -> usize {
        self.reserved
    }

    pub fn is_reserved(&self, token: &str) -> bool {
        self.get(token)
            .is_some_and(|id| (id as usize) < self.reserved)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Writes `token<TAB>id` lines, reserved symbols first.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut lines = vec![format!("#reserved\t{}", self.reserved)];
        lines.extend(
            self.tokens
                .iter()
                .enumerate()
                .map(|(id, tok)| format!("{tok}\t{id}")),
        );
        write_lines(path, lines)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let lines = read_lines(path)?;
        let mut reserved = None;
        let mut tokens = Vec::new();
        for (k, line) in lines.iter().enumerate() {
            let err = |message: &str| Error::Parse {
                line: k + 1,
                column: 1,
                message: message.to_owned(),
            };
            let (tok, id) = line.rsplit_once('\t').ok_or_else(|| err("missing tab"))?;
            let id: usize = id.parse().map_err(|_| err("bad id"))?;
            if k == 0 && tok == "#reserved" {
                reserved = Some(id);
                continue;
            }
            if id != tokens.len() {
                return Err(err("ids must be dense and ascending"));
            }
            tokens.push(tok.to_owned());
        }
        Self::from_parts(tokens, reserved.unwrap_or(3))
    }

    pub(crate) fn from_parts(tokens: Vec<String>, reserved: usize) -> Result<Self> {
        if tokens.len() < 3 || tokens[0] != BOS || tokens[1] != EOS || tokens[2] != UNK {
            return Err(Error::Format(
                "vocabulary must start with <s>, </s>, <unk>".into(),
            ));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if ids.insert(tok.clone(), id as u32).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary entry {tok:?}")));
            }
        }
        Ok(Vocabulary {
            reserved: reserved.min(tokens.len()),
            tokens,
            ids,
        })
    }
}

/// Keeps the `cap` most frequent tokens (ties broken lexicographically) plus
/// the reserved symbols `<s>`, `</s>`, `<unk>` and everything in `reserved`.
pub fn build_vocabulary<I, S>(tokens: I, cap: usize, reserved: &BTreeSet<String>) -> Vocabulary
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    for tok in tokens {
        *counts.entry(tok.as_ref().to_owned()).or_default() += 1;
    }
    let mut vocab = Vocabulary::with_reserved(reserved.iter().map(String::as_str));
    let mut ranked: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|(tok, _)| vocab.get(tok).is_none())
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    for (tok, _) in ranked.into_iter().take(cap) {
        vocab.push(&tok);
    }
    vocab
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn parses_pharaoh_lines() {
        assert_eq!(
            parse_alignment_line("0-0 1-2").unwrap(),
            BTreeSet::from([(0, 0), (1, 2)])
        );
        assert!(parse_alignment_line("").unwrap().is_empty());
        assert_eq!(
            parse_alignment_line("3-1 3-2 3-1").unwrap(),
            BTreeSet::from([(3, 1), (3, 2)])
        );
    }

    #[test]
    fn malformed_pairs_report_position() {
        match parse_alignment_line("0-0 12") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (1, 5)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_alignment_line("0-x"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_alignment_line("-1-0"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn out_of_range_link_names_sentence() {
        let dir = tempfile::tempdir().unwrap();
        let p = |n: &str| dir.path().join(n);
        write_lines(&p("s"), ["a b", "x y z"]).unwrap();
        write_lines(&p("t"), ["A B", "X"]).unwrap();
        write_lines(&p("a"), ["0-0 1-1", "5-0"]).unwrap();
        match load_corpus(p("s"), p("t"), p("a")) {
            Err(Error::Validation { sentence, .. }) => assert_eq!(sentence, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn line_count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = |n: &str| dir.path().join(n);
        write_lines(&p("s"), ["a", "b"]).unwrap();
        write_lines(&p("t"), ["A"]).unwrap();
        write_lines(&p("a"), ["0-0", "0-0"]).unwrap();
        assert!(matches!(
            load_corpus(p("s"), p("t"), p("a")),
            Err(Error::LineCountMismatch(_))
        ));
    }

    #[test]
    fn empty_lines_survive_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = |n: &str| dir.path().join(n);
        write_lines(&p("s"), ["a b", "c"]).unwrap();
        write_lines(&p("t"), ["A B", ""]).unwrap();
        write_lines(&p("a"), ["0-0 1-1", ""]).unwrap();
        let pairs = load_corpus(p("s"), p("t"), p("a")).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(pairs[1].target.is_empty());
        assert_eq!(pairs[1].source, toks("c"));
    }

    #[test]
    fn vocabulary_frequency_cut() {
        let none = BTreeSet::new();
        let v = build_vocabulary(["a", "a", "a", "b"], 1, &none);
        assert_eq!(v.len(), 4);
        assert_ne!(v.id("a"), Vocabulary::UNK_ID);
        assert_eq!(v.id("b"), Vocabulary::UNK_ID);

        let v = build_vocabulary(["a", "b"], 0, &none);
        assert_eq!(v.len(), v.reserved_count());
        assert_eq!(v.id("a"), Vocabulary::UNK_ID);
    }

    #[test]
    fn vocabulary_ties_break_lexicographically() {
        let stream = ["b", "a", "b", "a"];
        // Oracle: sort by (-freq, token) and take the head.
        let mut freq: HashMap<&str, i64> = HashMap::new();
        for t in stream {
            *freq.entry(t).or_default() += 1;
        }
        let mut oracle: Vec<(i64, &str)> = freq.iter().map(|(t, c)| (-c, *t)).collect();
        oracle.sort();
        let v = build_vocabulary(stream, 1, &BTreeSet::new());
        assert_eq!(oracle[0].1, "a");
        assert_ne!(v.id(oracle[0].1), Vocabulary::UNK_ID);
        assert_eq!(v.id("b"), Vocabulary::UNK_ID);
    }

    #[test]
    fn reserved_symbols_survive_cap_zero() {
        let reserved = BTreeSet::from(["Insert_Gap".to_string()]);
        let v = build_vocabulary(["x", "Insert_Gap"], 0, &reserved);
        assert_ne!(v.id("Insert_Gap"), Vocabulary::UNK_ID);
        assert!(v.is_reserved("Insert_Gap"));
        assert!(v.is_reserved(BOS) && v.is_reserved(EOS));
        assert_eq!(v.id("x"), Vocabulary::UNK_ID);
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab");
        let reserved = BTreeSet::from(["FD".to_string()]);
        let v = build_vocabulary(["c", "c", "d", "e\u{e4}"], 10, &reserved);
        v.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("<s>\t0"));
        assert_eq!(Vocabulary::load(&path).unwrap(), v);
    }
}
