//! Binary checkpoint container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "MLAB" | version u32
//! config: n_layers u32, d_model u32, n_heads u32, context_len u32, vocab_size u32, seed u64
//! step u64
//! rng: seed [u8; 32], stream u64, word_pos u128
//! params: count u32, then per parameter
//!         name_len u32, name utf-8, ndim u32, dims u64…, values f64…
//! optimizer: beta1 f64, beta2 f64, epsilon f64, step_count u64, count u32, then per entry
//!            name_len u32, name utf-8, len u64, first moment f64…, second moment f64…
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{AdamState, ParameterStore, Tensor};

use super::config::TransformerConfig;
use super::transformer::LanguageModel;

pub const MAGIC: &[u8; 4] = b"MLAB";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to resume training bit-exactly.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: LanguageModel,
    pub optimizer: AdamState,
    /// Optimizer steps taken over the lifetime of the model.
    pub step: u64,
    pub rng: ChaCha8Rng,
}

impl PartialEq for Checkpoint {
    fn eq(&self, other: &Self) -> bool {
        self.to_bytes() == other.to_bytes()
    }
}

impl Checkpoint {
    /// Fresh model with a new optimizer and a generator seeded from the config.
    pub fn new(config: TransformerConfig) -> Result<Self> {
        let seed = config.seed;
        Ok(Checkpoint {
            model: LanguageModel::new(config)?,
            optimizer: AdamState::default(),
            step: 0,
            rng: crate::seed::rng_for(seed, &[crate::seed::tag("train")]),
        })
    }

    pub fn config(&self) -> &TransformerConfig {
        self.model.config()
    }

    /// Discard optimizer moments, keeping parameters and counters.
    pub fn reset_optimizer(&mut self) {
        let old = &self.optimizer;
        self.optimizer = AdamState::new(old.beta1, old.beta2, old.epsilon);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        let c = self.model.config();
        for v in [c.n_layers, c.d_model, c.n_heads, c.context_len, c.vocab_size] {
            w.u32(v as u32);
        }
        w.u64(c.seed);
        w.u64(self.step);
        w.0.extend_from_slice(&self.rng.get_seed());
        w.u64(self.rng.get_stream());
        w.0.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());

        let params = self.model.params();
        w.u32(params.len() as u32);
        for (name, t) in params.iter() {
            w.str(name);
            w.u32(t.shape().len() as u32);
            for &d in t.shape() {
                w.u64(d as u64);
            }
            w.f64s(t.values());
        }

        let opt = &self.optimizer;
        w.f64(opt.beta1);
        w.f64(opt.beta2);
        w.f64(opt.epsilon);
        w.u64(opt.step_count());
        w.u32(opt.moments().len() as u32);
        for (name, (m, v)) in opt.moments() {
            w.str(name);
            w.u64(m.len() as u64);
            w.f64s(m);
            w.f64s(v);
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let config = TransformerConfig {
            n_layers: r.u32()? as usize,
            d_model: r.u32()? as usize,
            n_heads: r.u32()? as usize,
            context_len: r.u32()? as usize,
            vocab_size: r.u32()? as usize,
            seed: r.u64()?,
        };
        let step = r.u64()?;
        let mut rng_seed = [0u8; 32];
        rng_seed.copy_from_slice(r.take(32)?);
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
        let mut rng = ChaCha8Rng::from_seed(rng_seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);

        let mut params = ParameterStore::new();
        for _ in 0..r.u32()? {
            let name = r.str()?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = shape.iter().product();
            let values = r.f64s(n)?;
            params.insert(name, Tensor::new(shape, values)?)?;
        }
        let model = LanguageModel::from_parts(config, params)?;

        let (beta1, beta2, epsilon) = (r.f64()?, r.f64()?, r.f64()?);
        let step_count = r.u64()?;
        let mut moments = BTreeMap::new();
        for _ in 0..r.u32()? {
            let name = r.str()?;
            let n = r.u64()? as usize;
            match model.params().get(&name) {
                Some(t) if t.len() == n => {}
                _ => {
                    return Err(Error::Checkpoint(format!(
                        "optimizer entry `{name}` does not match any parameter"
                    )))
                }
            }
            let m = r.f64s(n)?;
            let v = r.f64s(n)?;
            moments.insert(name, (m, v));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            model,
            optimizer: AdamState::from_parts(beta1, beta2, epsilon, step_count, moments),
            step,
            rng,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        }
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
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
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("parameter name is not utf-8".into()))
    }
}
