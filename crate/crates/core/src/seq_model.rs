//! Conditional next-token models over the generalized vocabulary.
//!
//! Every decoder talks to a [`SequenceModel`]; the shipped implementation is
//! an event-conditioned n-gram model ([`NGramModel`]) with absolute
//! discounting and a copy bias toward event tokens not yet emitted.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::event::EventTuple;

pub type TokenId = u32;

pub const BEGIN: TokenId = 0;
pub const END: TokenId = 1;
pub const UNK: TokenId = 2;

pub const BEGIN_TOKEN: &str = "<s>";
pub const END_TOKEN: &str = "<eos>";
pub const UNK_TOKEN: &str = "<unk>";

pub const DEFAULT_DISCOUNT: f64 = 0.75;
pub const DEFAULT_FLOOR: f64 = 1e-9;
pub const DEFAULT_COPY_BIAS: f64 = 0.3;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order must be at least 2, got {0}")]
    Order(usize),
    #[error("copy bias must lie in [0, 1), got {0}")]
    CopyBias(f64),
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("corrupt model: {0}")]
    Corrupt(String),
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Bijection between tokens and ids. Ids 0, 1, 2 are begin, end-of-story and
/// unknown; the rest follow in lexicographic token order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let reserved = [BEGIN_TOKEN, END_TOKEN, UNK_TOKEN];
        let rest: BTreeSet<String> = tokens
            .into_iter()
            .map(|s| s.as_ref().to_string())
            .filter(|s| !reserved.contains(&s.as_str()))
            .collect();
        let tokens: Vec<String> = reserved
            .iter()
            .map(|s| s.to_string())
            .chain(rest)
            .collect();
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Self { tokens, ids }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    /// Unknown tokens map to [`UNK`].
    pub fn encode(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(UNK)
    }

    pub fn encode_all<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.encode(t.as_ref())).collect()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Ids of the event's filled slots, duplicates removed.
    pub fn encode_event(&self, event: &EventTuple) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = Vec::with_capacity(5);
        for t in event.tokens() {
            let id = self.encode(t);
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        ids
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

/// Scores the next token given event tokens and the prefix generated so far
/// (in the model's own direction).
pub trait SequenceModel: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    /// Full distribution over the vocabulary; sums to one.
    fn next_distribution(&self, event: &[TokenId], prefix: &[TokenId]) -> Vec<f64>;

    fn direction(&self) -> Direction {
        Direction::Forward
    }
}

impl<M: SequenceModel + ?Sized> SequenceModel for &M {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }
    fn next_distribution(&self, event: &[TokenId], prefix: &[TokenId]) -> Vec<f64> {
        (**self).next_distribution(event, prefix)
    }
    fn direction(&self) -> Direction {
        (**self).direction()
    }
}

/// Per-token losses in bits for `sentence` (natural order) followed by the end
/// token. Backward models consume the sentence reversed.
pub fn token_losses<M: SequenceModel + ?Sized>(
    model: &M,
    event: &[TokenId],
    sentence: &[TokenId],
) -> Vec<f64> {
    let mut ordered: Vec<TokenId> = sentence.to_vec();
    if model.direction() == Direction::Backward {
        ordered.reverse();
    }
    let mut losses = Vec::with_capacity(ordered.len() + 1);
    for i in 0..=ordered.len() {
        let target = ordered.get(i).copied().unwrap_or(END);
        let dist = model.next_distribution(event, &ordered[..i]);
        losses.push(-dist[target as usize].log2());
    }
    losses
}

/// Mean negative log2-likelihood per token, end token included.
pub fn sentence_nll<M: SequenceModel + ?Sized>(model: &M, event: &[TokenId], sentence: &[TokenId]) -> f64 {
    let losses = token_losses(model, event, sentence);
    losses.iter().sum::<f64>() / losses.len() as f64
}

/// Count statistics for one context.
#[derive(Debug, Clone, Default, PartialEq)]
struct ContextStats {
    total: u64,
    followers: BTreeMap<TokenId, u64>,
}

/// Interpolated absolute-discount n-gram model with a copy bias.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    vocab: Vocabulary,
    order: usize,
    copy_bias: f64,
    direction: Direction,
    discount: f64,
    floor: f64,
    /// `tables[k]` holds contexts of length `k`.
    tables: Vec<HashMap<Vec<TokenId>, ContextStats>>,
}

#[derive(Debug, Clone)]
pub struct NGramConfig {
    pub order: usize,
    pub copy_bias: f64,
    pub direction: Direction,
    pub discount: f64,
    pub floor: f64,
}

impl Default for NGramConfig {
    fn default() -> Self {
        Self {
            order: 3,
            copy_bias: DEFAULT_COPY_BIAS,
            direction: Direction::Forward,
            discount: DEFAULT_DISCOUNT,
            floor: DEFAULT_FLOOR,
        }
    }
}

impl NGramModel {
    /// Trains on (event, sentence) pairs. The vocabulary covers every sentence
    /// token and every event token.
    pub fn train<S: AsRef<str>>(
        pairs: &[(EventTuple, Vec<S>)],
        cfg: &NGramConfig,
    ) -> Result<Self, ModelError> {
        if pairs.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        if cfg.order < 2 {
            return Err(ModelError::Order(cfg.order));
        }
        if !(0.0..1.0).contains(&cfg.copy_bias) {
            return Err(ModelError::CopyBias(cfg.copy_bias));
        }
        let vocab = Vocabulary::new(pairs.iter().flat_map(|(e, s)| {
            e.tokens()
                .into_iter()
                .map(str::to_string)
                .chain(s.iter().map(|t| t.as_ref().to_string()))
                .collect::<Vec<_>>()
        }));
        let mut tables: Vec<HashMap<Vec<TokenId>, ContextStats>> = vec![HashMap::new(); cfg.order];
        for (_, sentence) in pairs {
            let mut ids = vocab.encode_all(sentence);
            if cfg.direction == Direction::Backward {
                ids.reverse();
            }
            let padded: Vec<TokenId> = std::iter::repeat(BEGIN)
                .take(cfg.order - 1)
                .chain(ids)
                .chain(std::iter::once(END))
                .collect();
            for i in cfg.order - 1..padded.len() {
                let target = padded[i];
                for (k, table) in tables.iter_mut().enumerate() {
                    let stats = table.entry(padded[i - k..i].to_vec()).or_default();
                    stats.total += 1;
                    *stats.followers.entry(target).or_insert(0) += 1;
                }
            }
        }
        Ok(Self {
            vocab,
            order: cfg.order,
            copy_bias: cfg.copy_bias,
            direction: cfg.direction,
            discount: cfg.discount,
            floor: cfg.floor,
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn copy_bias(&self) -> f64 {
        self.copy_bias
    }

    /// Same counts, different copy bias.
    pub fn with_copy_bias(&self, copy_bias: f64) -> Result<Self, ModelError> {
        if !(0.0..1.0).contains(&copy_bias) {
            return Err(ModelError::CopyBias(copy_bias));
        }
        Ok(Self {
            copy_bias,
            ..self.clone()
        })
    }

    /// Backoff n-gram probabilities, ignoring the event.
    pub fn ngram_distribution(&self, prefix: &[TokenId]) -> Vec<f64> {
        let v = self.vocab.len();
        let mut p = vec![1.0 / v as f64; v];
        let history: Vec<TokenId> = std::iter::repeat(BEGIN)
            .take(self.order - 1)
            .chain(prefix.iter().copied())
            .collect();
        for (k, table) in self.tables.iter().enumerate() {
            let ctx = &history[history.len() - k..];
            let Some(stats) = table.get(ctx) else {
                continue;
            };
            if stats.total == 0 {
                continue;
            }
            let total = stats.total as f64;
            let backoff = self.discount * stats.followers.len() as f64 / total;
            for x in p.iter_mut() {
                *x *= backoff;
            }
            for (&w, &c) in &stats.followers {
                p[w as usize] += (c as f64 - self.discount).max(0.0) / total;
            }
        }
        let keep = 1.0 - self.floor * v as f64;
        for x in p.iter_mut() {
            *x = keep * *x + self.floor;
        }
        p
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &self.to_serialized())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_serialized(serde_json::from_str(&text)?)
    }

    fn to_serialized(&self) -> SerializedNGram {
        let tables = self
            .tables
            .iter()
            .map(|table| {
                let mut rows: Vec<SerializedContext> = table
                    .iter()
                    .map(|(ctx, stats)| SerializedContext {
                        context: ctx.clone(),
                        next: stats.followers.iter().map(|(&w, &c)| (w, c)).collect(),
                    })
                    .collect();
                rows.sort_by(|a, b| a.context.cmp(&b.context));
                rows
            })
            .collect();
        SerializedNGram {
            format: "e2s-ngram".to_string(),
            version: FORMAT_VERSION,
            vocabulary: self.vocab.tokens[3..].to_vec(),
            order: self.order,
            copy_bias: self.copy_bias,
            direction: self.direction,
            discount: self.discount,
            floor: self.floor,
            tables,
        }
    }

    fn from_serialized(s: SerializedNGram) -> Result<Self, ModelError> {
        if s.version != FORMAT_VERSION {
            return Err(ModelError::Version(s.version));
        }
        if s.order < 2 {
            return Err(ModelError::Order(s.order));
        }
        if s.tables.len() != s.order {
            return Err(ModelError::Corrupt(format!(
                "{} count tables for order {}",
                s.tables.len(),
                s.order
            )));
        }
        let vocab = Vocabulary::new(&s.vocabulary);
        let v = vocab.len() as TokenId;
        let mut tables = Vec::with_capacity(s.order);
        for (k, rows) in s.tables.into_iter().enumerate() {
            let mut table = HashMap::with_capacity(rows.len());
            for row in rows {
                if row.context.len() != k || row.context.iter().chain(row.next.iter().map(|(w, _)| w)).any(|&t| t >= v) {
                    return Err(ModelError::Corrupt(format!("bad context row at order {k}")));
                }
                let followers: BTreeMap<TokenId, u64> = row.next.into_iter().collect();
                let total = followers.values().sum();
                table.insert(row.context, ContextStats { total, followers });
            }
            tables.push(table);
        }
        Ok(Self {
            vocab,
            order: s.order,
            copy_bias: s.copy_bias,
            direction: s.direction,
            discount: s.discount,
            floor: s.floor,
            tables,
        })
    }
}

impl SequenceModel for NGramModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_distribution(&self, event: &[TokenId], prefix: &[TokenId]) -> Vec<f64> {
        let mut p = self.ngram_distribution(prefix);
        if self.copy_bias == 0.0 {
            return p;
        }
        let unconsumed: Vec<TokenId> = event
            .iter()
            .copied()
            .filter(|t| *t != BEGIN && *t != END && !prefix.contains(t))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if unconsumed.is_empty() {
            return p;
        }
        let mass: f64 = unconsumed.iter().map(|&t| p[t as usize]).sum();
        let boosts: Vec<f64> = unconsumed
            .iter()
            .map(|&t| self.copy_bias * p[t as usize] / mass)
            .collect();
        for x in p.iter_mut() {
            *x *= 1.0 - self.copy_bias;
        }
        for (&t, b) in unconsumed.iter().zip(boosts) {
            p[t as usize] += b;
        }
        p
    }

    fn direction(&self) -> Direction {
        self.direction
    }
}

#[derive(Serialize, Deserialize)]
struct SerializedContext {
    context: Vec<TokenId>,
    next: Vec<(TokenId, u64)>,
}

#[derive(Serialize, Deserialize)]
struct SerializedNGram {
    format: String,
    version: u32,
    /// Non-reserved tokens; ids are reassigned on load in the same order.
    vocabulary: Vec<String>,
    order: usize,
    copy_bias: f64,
    direction: Direction,
    discount: f64,
    floor: f64,
    tables: Vec<Vec<SerializedContext>>,
}
