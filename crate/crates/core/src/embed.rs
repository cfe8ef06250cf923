//! Token and entity embeddings. The default provider maps each case-folded
//! token to a seeded random unit vector; a skip-gram model can be trained on
//! a corpus, and vectors from an external model can be read from text.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 128;

pub trait TokenEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn token_embedding(&self, token: &str) -> Vec<f64>;
}

/// Mean of the token vectors.
pub fn entity_embedding<T: AsRef<str>>(provider: &dyn TokenEmbedder, tokens: &[T]) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("entity has no tokens".into()));
    }
    let mut sum = vec![0.0; provider.dim()];
    for t in tokens {
        for (s, v) in sum.iter_mut().zip(provider.token_embedding(t.as_ref())) {
            *s += v;
        }
    }
    let n = tokens.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seeded random unit vectors keyed by the lowercased token.
#[derive(Clone, Debug)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        HashEmbedder { dim, seed }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(DEFAULT_DIM, 0)
    }
}

impl TokenEmbedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn token_embedding(&self, token: &str) -> Vec<f64> {
        let key = fnv1a(&token.to_lowercase()) ^ self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let mut v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

/// Vectors looked up by lowercased token, falling back to hashing.
#[derive(Clone, Debug)]
pub struct VectorTable {
    pub vectors: HashMap<String, Vec<f64>>,
    pub fallback: HashEmbedder,
}

impl TokenEmbedder for VectorTable {
    fn dim(&self) -> usize {
        self.fallback.dim
    }

    fn token_embedding(&self, token: &str) -> Vec<f64> {
        match self.vectors.get(&token.to_lowercase()) {
            Some(v) => v.clone(),
            None => self.fallback.token_embedding(token),
        }
    }
}

impl VectorTable {
    /// Write `token<TAB>v1<TAB>v2...` lines in token order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(fs::File::create(path)?);
        let sorted: BTreeMap<_, _> = self.vectors.iter().collect();
        for (tok, v) in sorted {
            write!(w, "{tok}")?;
            for x in v {
                write!(w, "\t{x}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read `token<TAB>floats` lines. A token listed more than once (one
    /// line per sub-token piece) gets the mean of its vectors.
    pub fn parse(text: &str, seed: u64) -> Result<Self> {
        let mut sums: HashMap<String, (Vec<f64>, usize)> = HashMap::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (tok, rest) = line
                .split_once('\t')
                .ok_or_else(|| Error::Data(format!("line {}: expected token<TAB>values", i + 1)))?;
            let v = rest
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Data(format!("line {}: {e}", i + 1)))?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!("line {}: non-finite value", i + 1)));
            }
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::Data(format!(
                        "line {}: {} values, expected {d}",
                        i + 1,
                        v.len()
                    )))
                }
                _ => {}
            }
            let e = sums
                .entry(tok.to_lowercase())
                .or_insert_with(|| (vec![0.0; v.len()], 0));
            for (s, x) in e.0.iter_mut().zip(&v) {
                *s += x;
            }
            e.1 += 1;
        }
        let dim = dim.ok_or_else(|| Error::Data("no vectors".into()))?;
        Ok(VectorTable {
            vectors: sums
                .into_iter()
                .map(|(k, (s, n))| (k, s.into_iter().map(|x| x / n as f64).collect()))
                .collect(),
            fallback: HashEmbedder::new(dim, seed),
        })
    }

    pub fn load(path: impl AsRef<Path>, seed: u64) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, seed)
    }
}

#[derive(Clone, Debug)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: DEFAULT_DIM,
            window: 2,
            epochs: 5,
            negatives: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

pub struct SkipGram {
    pub table: VectorTable,
    /// Mean negative-sampling loss per epoch.
    pub epoch_losses: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Train skip-gram vectors with negative sampling. Deterministic per seed.
pub fn train_skipgram<S: AsRef<str>>(corpus: &[Vec<S>], config: &SkipGramConfig) -> Result<SkipGram> {
    if config.window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    let sentences: Vec<Vec<String>> = corpus
        .iter()
        .map(|s| s.iter().map(|t| t.as_ref().to_lowercase()).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect();
    if sentences.is_empty() {
        return Err(Error::InvalidArgument("empty skip-gram corpus".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &sentences {
        for t in s {
            *counts.entry(t).or_default() += 1;
        }
    }
    let vocab: Vec<&str> = counts.keys().copied().collect();
    let ids: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().map(|t| ids[t.as_str()]).collect())
        .collect();

    // unigram^0.75 sampling table
    let mut table = Vec::new();
    let weights: Vec<f64> = vocab.iter().map(|t| (counts[t] as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let table_size = (vocab.len() * 100).max(1000);
    for (i, w) in weights.iter().enumerate() {
        let n = ((w / total) * table_size as f64).ceil() as usize;
        table.extend(std::iter::repeat_n(i, n.max(1)));
    }

    let d = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input: Vec<f64> = (0..vocab.len() * d)
        .map(|_| (rng.random::<f64>() - 0.5) / d as f64)
        .collect();
    let mut output = vec![0.0; vocab.len() * d];
    let total_steps = (config.epochs * encoded.len()).max(1) as f64;
    let mut step = 0usize;
    let mut grad = vec![0.0; d];
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut loss = 0.0;
        let mut pairs = 0usize;
        for sent in &encoded {
            let lr = config.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4);
            step += 1;
            for (pos, &center) in sent.iter().enumerate() {
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window).min(sent.len() - 1);
                for (cpos, &context) in sent.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let vin = center * d..(center + 1) * d;
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let t = table[rng.random_range(0..table.len())];
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let vout = target * d..(target + 1) * d;
                        let dot: f64 = input[vin.clone()]
                            .iter()
                            .zip(&output[vout.clone()])
                            .map(|(a, b)| a * b)
                            .sum();
                        let p = sigmoid(dot);
                        loss -= if label > 0.5 {
                            p.max(1e-12).ln()
                        } else {
                            (1.0 - p).max(1e-12).ln()
                        };
                        let g = lr * (label - p);
                        for j in 0..d {
                            grad[j] += g * output[target * d + j];
                            output[target * d + j] += g * input[center * d + j];
                        }
                    }
                    for j in 0..d {
                        input[center * d + j] += grad[j];
                    }
                    pairs += 1;
                }
            }
        }
        epoch_losses.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
    }

    let vectors = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.to_string(), input[i * d..(i + 1) * d].to_vec()))
        .collect();
    Ok(SkipGram {
        table: VectorTable {
            vectors,
            fallback: HashEmbedder::new(d, config.seed),
        },
        epoch_losses,
    })
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_vectors() {
        let h = HashEmbedder::default();
        let a = h.token_embedding("Rotor");
        assert_eq!(a, h.token_embedding("rotor"));
        assert_eq!(a.len(), 128);
        let n: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 0.01);
        assert_ne!(a, HashEmbedder::new(128, 1).token_embedding("rotor"));
    }

    #[test]
    fn entity_means() {
        let h = HashEmbedder::default();
        assert_eq!(entity_embedding(&h, &["fan"]).unwrap(), h.token_embedding("fan"));
        let v = h.token_embedding("The");
        let w = h.token_embedding("space");
        let e = entity_embedding(&h, &["The", "space"]).unwrap();
        for i in 0..128 {
            assert_eq!(e[i], (v[i] + w[i]) / 2.0);
        }
        let n: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(n <= 1.0 + 1e-12);
        assert!(entity_embedding::<&str>(&h, &[]).is_err());
        let swapped = entity_embedding(&h, &["space", "The"]).unwrap();
        for i in 0..128 {
            assert!((swapped[i] - e[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn external_vectors_average_pieces() {
        let t = VectorTable::parse("fan\t1 2\nfan\t3 4\nhub\t0 1\n", 0).unwrap();
        assert_eq!(t.token_embedding("FAN"), [2.0, 3.0]);
        assert_eq!(t.token_embedding("unknown").len(), 2);
        assert!(VectorTable::parse("a\t1 2\nb\t1\n", 0).is_err());
        assert!(VectorTable::parse("", 0).is_err());
    }

    #[test]
    fn skipgram_basics() {
        let corpus: Vec<Vec<&str>> = (0..50).map(|_| vec!["the", "fan", "cools", "the", "motor"]).collect();
        let cfg = SkipGramConfig {
            dim: 16,
            epochs: 3,
            ..Default::default()
        };
        let a = train_skipgram(&corpus, &cfg).unwrap();
        let b = train_skipgram(&corpus, &cfg).unwrap();
        assert_eq!(a.table.token_embedding("fan"), b.table.token_embedding("fan"));
        assert!(a.epoch_losses.last() < a.epoch_losses.first());
        assert!(train_skipgram::<&str>(&[], &cfg).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.tsv");
        a.table.save(&p).unwrap();
        let back = VectorTable::load(&p, 0).unwrap();
        let (x, y) = (back.token_embedding("fan"), a.table.token_embedding("fan"));
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
