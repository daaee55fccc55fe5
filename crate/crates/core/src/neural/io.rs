use std::path::Path;

use super::{ModelConfig, NeuralModel};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NOSMNNLM";
const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn vocab(&mut self, vocab: &Vocabulary) {
        self.u64(vocab.reserved_count() as u64);
        self.u64(vocab.len() as u64);
        for tok in vocab.tokens() {
            self.u64(tok.len() as u64);
            self.0.extend_from_slice(tok.as_bytes());
        }
    }

    fn matrix(&mut self, values: &[f64]) {
        self.u64(values.len() as u64);
        values.iter().for_each(|&v| self.f64(v));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("model file truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?)
            .map_err(|_| Error::Format("size does not fit in memory".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn vocab(&mut self) -> Result<Vocabulary> {
        let reserved = self.usize()?;
        let count = self.usize()?;
        let mut tokens = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let len = self.usize()?;
            let bytes = self.take(len)?;
            let tok = std::str::from_utf8(bytes)
                .map_err(|_| Error::Format("vocabulary entry is not UTF-8".into()))?;
            tokens.push(tok.to_owned());
        }
        Vocabulary::from_parts(tokens, reserved)
    }

    fn matrix(&mut self, expected: usize, name: &str) -> Result<Vec<f64>> {
        let len = self.usize()?;
        if len != expected {
            return Err(Error::Format(format!(
                "{name} holds {len} values but the configuration implies {expected}"
            )));
        }
        (0..len).map(|_| self.f64()).collect()
    }
}

impl NeuralModel {
    /// Versioned little-endian container: magic, version, configuration,
    /// source and target vocabularies, then the parameter blocks row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(MAGIC.to_vec());
        w.0.extend_from_slice(&VERSION.to_le_bytes());
        let c = &self.config;
        for v in [
            c.n,
            c.m,
            c.input_vocab_cap,
            c.output_vocab_cap,
            c.embedding_dim,
            c.hidden_dim,
            c.output_embedding_dim,
            c.noise_samples,
            c.batch_size,
            c.epochs,
        ] {
            w.u64(v as u64);
        }
        w.f64(c.learning_rate);
        w.f64(c.learning_rate_decay);
        w.u64(c.seed);
        w.vocab(&self.source_vocab);
        w.vocab(&self.target_vocab);
        for (_, block) in self.parameter_blocks() {
            w.matrix(block);
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
            return Err(Error::Format("not a neural model file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported model version {version} (expected {VERSION})"
            )));
        }
        let mut dims = [0usize; 10];
        for d in dims.iter_mut() {
            *d = r.usize()?;
        }
        let config = ModelConfig {
            n: dims[0],
            m: dims[1],
            input_vocab_cap: dims[2],
            output_vocab_cap: dims[3],
            embedding_dim: dims[4],
            hidden_dim: dims[5],
            output_embedding_dim: dims[6],
            noise_samples: dims[7],
            batch_size: dims[8],
            epochs: dims[9],
            learning_rate: r.f64()?,
            learning_rate_decay: r.f64()?,
            seed: r.u64()?,
        };
        config
            .validate()
            .map_err(|e| Error::Format(format!("stored configuration is invalid: {e}")))?;
        let source_vocab = r.vocab()?;
        let target_vocab = r.vocab()?;
        let (d, h) = (config.embedding_dim, config.hidden_dim);
        let inputs = source_vocab.len() + target_vocab.len();
        let outputs = target_vocab.len();
        let lookup = r.matrix(inputs * d, "lookup")?;
        let hidden_w = r.matrix(h * config.context_width() * d, "hidden_w")?;
        let hidden_b = r.matrix(h, "hidden_b")?;
        let output_w = r.matrix(outputs * h, "output_w")?;
        let output_b = r.matrix(outputs, "output_b")?;
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after the model",
                bytes.len() - r.pos
            )));
        }
        Ok(NeuralModel {
            config,
            source_vocab,
            target_vocab,
            lookup,
            hidden_w,
            hidden_b,
            output_w,
            output_b,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
