//! Fixed-width utterance vectors and local windows around them.
//!
//! Two providers ship: a seeded signed feature hash over normalized
//! tokens, and a lookup into an external embedding table (for vectors
//! computed by any outside model). Both return unit-length vectors; the
//! zero vector is reserved for padding and empty utterances.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Utterance;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Hash,
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub dim: usize,
    pub provider: ProviderKind,
    pub table_path: Option<PathBuf>,
    /// Local window radius.
    pub window: usize,
    /// Seed of the hash provider.
    pub hash_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 800,
            provider: ProviderKind::Hash,
            table_path: None,
            window: 1,
            hash_seed: 0x5eed,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("encoder dim must be >= 1".into()));
        }
        if self.provider == ProviderKind::Table && self.table_path.is_none() {
            return Err(Error::Config("table provider needs table_path".into()));
        }
        Ok(())
    }
}

/// Number of buckets each token lands in.
const HASH_PROBES: u64 = 3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Token-to-vector rows loaded from a text file whose first line is
/// `vocab dim` and whose other lines are `token f1 .. fdim`.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    rows: HashMap<String, Vec<f64>>,
    unk: Vec<f64>,
    /// Tokens defined more than once (the last definition wins).
    pub duplicate_count: usize,
    digest: String,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, token: &str) -> Option<&[f64]> {
        self.rows.get(token).map(Vec::as_slice)
    }

    /// Row used for tokens missing from the table: an explicit `<unk>` or
    /// `[UNK]` row when present, otherwise the mean of all rows.
    pub fn unk(&self) -> &[f64] {
        &self.unk
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }
}

pub fn load_embedding_table(path: &Path, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::Config(format!("cannot open embedding table {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let mut hasher = Sha256::new();
    let bad = |no: usize, msg: &str| Error::Config(format!("{}:{no}: {msg}", path.display()));

    let header = lines
        .next()
        .ok_or_else(|| bad(1, "empty embedding table"))?
        .map_err(|e| Error::io(path, e))?;
    hasher.update(header.as_bytes());
    let mut fields = header.split_whitespace();
    let (vocab, dim) = match (fields.next(), fields.next(), fields.next()) {
        (Some(v), Some(d), None) => (
            v.parse::<usize>().map_err(|_| bad(1, "header vocab is not a number"))?,
            d.parse::<usize>().map_err(|_| bad(1, "header dim is not a number"))?,
        ),
        _ => return Err(bad(1, "header must be `vocab dim`")),
    };
    if let Some(want) = expected_dim {
        if dim != want {
            return Err(Error::Config(format!(
                "embedding table {} has dim {dim}, encoder expects {want}",
                path.display()
            )));
        }
    }

    let mut rows = HashMap::with_capacity(vocab);
    let mut duplicate_count = 0;
    let mut read = 0;
    for (i, line) in lines.enumerate() {
        let no = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        hasher.update(b"\n");
        hasher.update(line.as_bytes());
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap_or_default().to_string();
        let values = parts
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|_| bad(no, "non-numeric vector entry"))?;
        if values.len() != dim {
            return Err(bad(no, &format!("row has {} values, header says {dim}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad(no, "non-finite vector entry"));
        }
        if rows.insert(token.clone(), values).is_some() {
            duplicate_count += 1;
            log::warn!("{}:{no}: duplicate token `{token}`, keeping the later row", path.display());
        }
        read += 1;
    }
    if read != vocab {
        log::warn!("{}: header declares {vocab} rows, found {read}", path.display());
    }
    let unk = ["<unk>", "[UNK]"]
        .iter()
        .find_map(|k| rows.get(*k).cloned())
        .unwrap_or_else(|| {
            let mut mean = vec![0.0; dim];
            for r in rows.values() {
                for (m, x) in mean.iter_mut().zip(r) {
                    *m += x;
                }
            }
            let n = rows.len().max(1) as f64;
            mean.iter_mut().for_each(|m| *m /= n);
            mean
        });
    let digest = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(EmbeddingTable {
        dim,
        rows,
        unk,
        duplicate_count,
        digest,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceEncoding {
    pub vector: Vec<f64>,
    pub source: ProviderKind,
}

#[derive(Clone, Debug)]
enum Provider {
    Hash,
    Table(EmbeddingTable),
}

/// A configured encoder; read-only once built.
#[derive(Clone, Debug)]
pub struct Encoder {
    cfg: EncoderConfig,
    provider: Provider,
}

impl Encoder {
    pub fn new(cfg: EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        let provider = match cfg.provider {
            ProviderKind::Hash => Provider::Hash,
            ProviderKind::Table => {
                let path = cfg.table_path.as_ref().expect("validated");
                Provider::Table(load_embedding_table(path, Some(cfg.dim))?)
            }
        };
        Ok(Encoder { cfg, provider })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim
    }

    /// Identity of this encoder: a SHA-256 over its config and, for the
    /// table provider, the table contents. Checkpoints record it.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?}|{}|{}", self.cfg.provider, self.cfg.dim, self.cfg.hash_seed).as_bytes());
        if let Provider::Table(t) = &self.provider {
            h.update(t.digest().as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn encode_tokens(&self, tokens: &[String]) -> Vec<f64> {
        let d = self.cfg.dim;
        let mut v = vec![0.0; d];
        if tokens.is_empty() {
            return v;
        }
        match &self.provider {
            Provider::Hash => {
                for t in tokens {
                    let base = fnv1a(t.as_bytes()) ^ splitmix(self.cfg.hash_seed);
                    for probe in 0..HASH_PROBES {
                        let h = splitmix(base.wrapping_add(probe.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
                        let bucket = (h % d as u64) as usize;
                        let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
                        v[bucket] += sign;
                    }
                }
            }
            Provider::Table(table) => {
                for t in tokens {
                    let row = table.row(t).unwrap_or_else(|| table.unk());
                    for (a, x) in v.iter_mut().zip(row) {
                        *a += x;
                    }
                }
                let n = tokens.len() as f64;
                v.iter_mut().for_each(|a| *a /= n);
            }
        }
        normalize(&mut v);
        v
    }

    pub fn encode(&self, u: &Utterance) -> UtteranceEncoding {
        UtteranceEncoding {
            vector: self.encode_tokens(&u.tokens),
            source: self.cfg.provider,
        }
    }
}

/// `2k + 1` slots centred on one position; padded slots hold zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalWindow {
    pub center: usize,
    pub vectors: Vec<Vec<f64>>,
    pub pad_mask: Vec<bool>,
}

impl LocalWindow {
    pub fn radius(&self) -> usize {
        self.vectors.len() / 2
    }
}

/// Window of radius `k` around `i`. Panics if `i` is out of range.
pub fn build_local_window(encodings: &[Vec<f64>], i: usize, k: usize) -> LocalWindow {
    assert!(i < encodings.len(), "window centre {i} outside {} encodings", encodings.len());
    let dim = encodings[i].len();
    let mut vectors = Vec::with_capacity(2 * k + 1);
    let mut pad_mask = Vec::with_capacity(2 * k + 1);
    for s in 0..=2 * k {
        match (i + s).checked_sub(k).filter(|&j| j < encodings.len()) {
            Some(j) => {
                vectors.push(encodings[j].clone());
                pad_mask.push(false);
            }
            None => {
                vectors.push(vec![0.0; dim]);
                pad_mask.push(true);
            }
        }
    }
    LocalWindow {
        center: i,
        vectors,
        pad_mask,
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;
    use std::io::Write;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn table_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn hash_encoding_is_deterministic_and_unit_length() {
        let e = Encoder::new(EncoderConfig::default()).unwrap();
        let a = e.encode_tokens(&toks("npm install fails"));
        assert_eq!(a, e.encode_tokens(&toks("npm install fails")));
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let cos: f64 = a.iter().map(|x| x * x).sum();
        assert!((cos - 1.0).abs() < 1e-12);
        assert_eq!(a.len(), 800);
    }

    #[test]
    fn empty_utterance_is_zero() {
        let e = Encoder::new(EncoderConfig::default()).unwrap();
        assert!(e.encode_tokens(&[]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn distinct_multisets_rarely_collide() {
        let e = Encoder::new(EncoderConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vocab: Vec<String> = (0..500).map(|i| format!("w{i}")).collect();
        let mut collisions = 0;
        for _ in 0..10_000 {
            let a: Vec<String> = (0..rng.gen_range(1..6)).map(|_| vocab[rng.gen_range(0..500)].clone()).collect();
            let mut b = a.clone();
            // Perturb the multiset: swap one token for another.
            let j = rng.gen_range(0..b.len());
            let mut w = vocab[rng.gen_range(0..500)].clone();
            while w == b[j] {
                w = vocab[rng.gen_range(0..500)].clone();
            }
            b[j] = w;
            if e.encode_tokens(&a) == e.encode_tokens(&b) {
                collisions += 1;
            }
        }
        assert_eq!(collisions, 0);
    }

    #[test]
    fn seed_changes_the_hash() {
        let a = Encoder::new(EncoderConfig::default()).unwrap();
        let b = Encoder::new(EncoderConfig {
            hash_seed: 7,
            ..EncoderConfig::default()
        })
        .unwrap();
        assert_ne!(a.encode_tokens(&toks("x")), b.encode_tokens(&toks("x")));
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn table_mean_of_identical_rows() {
        let f = table_file("2 4\nw 1 0 0 0\nv 0 1 0 0\n");
        let cfg = EncoderConfig {
            dim: 4,
            provider: ProviderKind::Table,
            table_path: Some(f.path().to_path_buf()),
            ..EncoderConfig::default()
        };
        let e = Encoder::new(cfg).unwrap();
        assert_eq!(e.encode_tokens(&toks("w w")), vec![1.0, 0.0, 0.0, 0.0]);
        // Unknown token falls back to the mean row (0.5, 0.5, 0, 0).
        let unk = e.encode_tokens(&toks("zzz"));
        let h = 0.5f64.sqrt();
        assert!((unk[0] - h).abs() < 1e-12 && (unk[1] - h).abs() < 1e-12);
    }

    #[test]
    fn table_loading_validates() {
        let f = table_file("2 4\na 1 2 3 4\nb 0 0 0 1\n");
        let t = load_embedding_table(f.path(), None).unwrap();
        assert_eq!((t.len(), t.dim()), (2, 4));
        let err = load_embedding_table(f.path(), Some(800)).unwrap_err();
        assert_eq!(err.kind(), "config");

        let dup = table_file("2 2\na 1 0\na 0 1\n");
        let t = load_embedding_table(dup.path(), None).unwrap();
        assert_eq!(t.duplicate_count, 1);
        assert_eq!(t.row("a").unwrap(), &[0.0, 1.0]);

        let unk = table_file("2 2\n<unk> 3 4\na 1 0\n");
        assert_eq!(load_embedding_table(unk.path(), None).unwrap().unk(), &[3.0, 4.0]);

        assert!(load_embedding_table(table_file("2 3\na 1 0\n").path(), None).is_err());
        assert!(load_embedding_table(table_file("x\n").path(), None).is_err());
        let missing = EncoderConfig {
            provider: ProviderKind::Table,
            table_path: Some("/no/such/table.txt".into()),
            ..EncoderConfig::default()
        };
        assert_eq!(Encoder::new(missing).unwrap_err().kind(), "config");
    }

    #[test]
    fn windows_pad_at_the_edges() {
        let enc = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let w = build_local_window(&enc, 0, 1);
        assert_eq!(w.vectors, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(w.pad_mask, vec![true, false, false]);

        let enc3: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64 + 1.0]).collect();
        let w = build_local_window(&enc3, 1, 1);
        assert_eq!(w.vectors, vec![vec![1.0], vec![2.0], vec![3.0]]);
        assert!(w.pad_mask.iter().all(|p| !p));

        let w = build_local_window(&enc3, 2, 0);
        assert_eq!(w.vectors, vec![vec![3.0]]);
    }

    #[test]
    fn window_length_is_always_2k_plus_1() {
        let enc: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        for k in 0..4 {
            for i in 0..5 {
                let w = build_local_window(&enc, i, k);
                assert_eq!(w.vectors.len(), 2 * k + 1);
                let live: HashSet<usize> = (0..=2 * k).filter(|&s| !w.pad_mask[s]).collect();
                for s in 0..=2 * k {
                    if w.pad_mask[s] {
                        assert!(w.vectors[s].iter().all(|&x| x == 0.0));
                    }
                }
                assert!(live.contains(&k));
            }
        }
    }
}
