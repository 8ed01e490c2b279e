//! Retrieve-and-edit: embed events, find the nearest training event, and
//! rewrite its sentence toward the query.
//!
//! Token vectors come from a truncated SVD (randomized range finder) of the
//! positive PMI matrix between event tokens and sentence tokens. Each token
//! also carries a small seeded identity component so distinct events never
//! collapse onto one point. An event is the concatenation of its five slot
//! vectors, zeros for empty slots.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decoders::Realization;
use crate::event::{EventTuple, Slot};

const FORMAT: &str = "e2s-index";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("cannot build an index from zero pairs")]
    EmptyCorpus,
    #[error("index file is {found:?} v{version}, expected {FORMAT:?} v{VERSION}")]
    Format { found: String, version: u32 },
    #[error("index I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("index JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    /// Rank kept from the factorization.
    pub dim: usize,
    /// Extra random columns for the range finder.
    pub oversample: usize,
    /// Dimension and scale of the per-token identity component.
    pub identity_dim: usize,
    pub identity_scale: f64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            oversample: 8,
            identity_dim: 8,
            identity_scale: 0.25,
            seed: 0,
        }
    }
}

pub type Pair = (EventTuple, Vec<String>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalIndex {
    format: String,
    version: u32,
    pub config: EmbeddingConfig,
    token_vectors: BTreeMap<String, Vec<f64>>,
    embeddings: Vec<Vec<f64>>,
    pairs: Vec<Pair>,
}

/// `(1 − cos)/2`. Identical vectors are exactly 0; a zero vector against a
/// non-zero one is 0.5.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.5;
    }
    ((1.0 - dot / (na * nb)) / 2.0).clamp(0.0, 1.0)
}

pub fn retedit_confidence(distance: f64) -> f64 {
    1.0 - distance.clamp(0.0, 1.0)
}

impl RetrievalIndex {
    pub fn build(pairs: Vec<Pair>, cfg: &EmbeddingConfig) -> Result<Self, RetrievalError> {
        if pairs.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let rows: Vec<String> = pairs
            .iter()
            .flat_map(|(e, _)| e.tokens().into_iter().map(str::to_string))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let cols: Vec<String> = pairs
            .iter()
            .flat_map(|(_, s)| s.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let row_of: BTreeMap<&str, usize> = rows.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let col_of: BTreeMap<&str, usize> = cols.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();

        let mut counts = DMatrix::<f64>::zeros(rows.len(), cols.len().max(1));
        for (e, s) in &pairs {
            for u in e.distinct_tokens() {
                for w in s {
                    counts[(row_of[u], col_of[w.as_str()])] += 1.0;
                }
            }
        }
        let ppmi = ppmi(&counts);
        let factors = truncated_svd(&ppmi, cfg.dim, cfg.oversample, cfg.seed);

        let token_vectors = rows
            .iter()
            .enumerate()
            .map(|(i, tok)| {
                let mut v: Vec<f64> = factors.row(i).iter().copied().collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
                v.resize(cfg.dim, 0.0);
                v.extend(identity_vector(tok, cfg));
                (tok.clone(), v)
            })
            .collect();
        let mut index = Self {
            format: FORMAT.to_string(),
            version: VERSION,
            config: cfg.clone(),
            token_vectors,
            embeddings: Vec::new(),
            pairs: Vec::new(),
        };
        index.embeddings = pairs.iter().map(|(e, _)| index.embed(e)).collect();
        index.pairs = pairs;
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair(&self, id: usize) -> &Pair {
        &self.pairs[id]
    }

    pub fn embedding(&self, id: usize) -> &[f64] {
        &self.embeddings[id]
    }

    /// Token vector, or a seeded pseudo-random one for unseen tokens.
    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        if let Some(v) = self.token_vectors.get(token) {
            return v.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(token_seed(token, self.config.seed ^ 0x5EED));
        let mut v: Vec<f64> = (0..self.config.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v.extend(identity_vector(token, &self.config));
        v
    }

    pub fn embed(&self, event: &EventTuple) -> Vec<f64> {
        let width = self.config.dim + self.config.identity_dim;
        let mut out = Vec::with_capacity(5 * width);
        for slot in Slot::ALL {
            match event.get(slot) {
                Some(t) => out.extend(self.token_vector(t.surface())),
                None => out.extend(std::iter::repeat(0.0).take(width)),
            }
        }
        out
    }

    /// Nearest pair by cosine distance; ties go to the lowest id.
    pub fn retrieve(&self, event: &EventTuple) -> (usize, f64) {
        let q = self.embed(event);
        let mut best = (0, f64::INFINITY);
        for (id, e) in self.embeddings.iter().enumerate() {
            let d = cosine_distance(&q, e);
            if d < best.1 {
                best = (id, d);
            }
        }
        best
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RetrievalError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        let index: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if index.format != FORMAT || index.version != VERSION {
            return Err(RetrievalError::Format {
                found: index.format,
                version: index.version,
            });
        }
        Ok(index)
    }
}

fn token_seed(token: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(token.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn identity_vector(token: &str, cfg: &EmbeddingConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(token_seed(token, cfg.seed));
    let v: Vec<f64> = (0..cfg.identity_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v;
    }
    v.into_iter().map(|x| cfg.identity_scale * x / norm).collect()
}

fn ppmi(counts: &DMatrix<f64>) -> DMatrix<f64> {
    let total: f64 = counts.sum();
    if total == 0.0 {
        return counts.clone();
    }
    let row_sums: Vec<f64> = counts.row_iter().map(|r| r.sum()).collect();
    let col_sums: Vec<f64> = counts.column_iter().map(|c| c.sum()).collect();
    DMatrix::from_fn(counts.nrows(), counts.ncols(), |i, j| {
        let c = counts[(i, j)];
        if c == 0.0 {
            return 0.0;
        }
        (c * total / (row_sums[i] * col_sums[j])).ln().max(0.0)
    })
}

/// Left factor `U·√Σ` of a rank-`dim` approximation, via a seeded random
/// range finder followed by an exact SVD of the small projected matrix.
fn truncated_svd(a: &DMatrix<f64>, dim: usize, oversample: usize, seed: u64) -> DMatrix<f64> {
    let k = (dim + oversample).min(a.nrows()).min(a.ncols()).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(a.ncols(), k, |_, _| rng.gen_range(-1.0..1.0));
    let y = a * omega;
    let q = y.qr().q();
    let b = q.transpose() * a;
    let svd = b.svd(true, false);
    let u_b = svd.u.expect("left vectors requested");
    let u = q * u_b;
    let keep = dim.min(svd.singular_values.len());
    DMatrix::from_fn(a.nrows(), keep, |i, j| u[(i, j)] * svd.singular_values[j].sqrt())
}

/// Rewrites a retrieved sentence toward an input event.
pub trait EditorModel: Send + Sync {
    fn edit(&self, input: &EventTuple, retrieved: &Pair) -> Vec<String>;
}

/// Replaces each retrieved slot token with the input's token for the same
/// slot, everywhere it occurs in the sentence. Substitutions are applied
/// simultaneously, so swapped roles swap cleanly.
#[derive(Debug, Clone, Copy, Default)]
pub struct SlotSubstitutionEditor;

impl EditorModel for SlotSubstitutionEditor {
    fn edit(&self, input: &EventTuple, (event, sentence): &Pair) -> Vec<String> {
        let mut map: BTreeMap<&str, &str> = BTreeMap::new();
        for slot in Slot::ALL {
            if let (Some(from), Some(to)) = (event.get(slot), input.get(slot)) {
                map.entry(from.surface()).or_insert(to.surface());
            }
        }
        sentence
            .iter()
            .map(|t| map.get(t.as_str()).map_or_else(|| t.clone(), |s| s.to_string()))
            .collect()
    }
}

/// Retrieval plus editing. A distance-0 neighbor is returned verbatim.
pub fn retrieve_and_edit<E: EditorModel + ?Sized>(
    index: &RetrievalIndex,
    editor: &E,
    event: &EventTuple,
) -> (Realization, usize, f64) {
    let (id, distance) = index.retrieve(event);
    let pair = index.pair(id);
    let tokens = if distance == 0.0 {
        pair.1.clone()
    } else {
        editor.edit(event, pair)
    };
    (
        Realization {
            tokens,
            confidence: retedit_confidence(distance),
        },
        id,
        distance,
    )
}
