//! Search-based realizers: plain beam search, Monte Carlo beam search with
//! playout re-scoring, and constraint-FSM beam search.

mod beam;
mod fsm;
mod mc;
mod playout;

pub use beam::{beam_decode, beam_search, BeamHypothesis};
pub use fsm::{build_constraint_fsm, default_min_matched, fsm_decode, ConstraintFsm, FsmConfig, FsmFailure, FsmOutput};
pub use mc::{learn_playout_weights, mc_beam_decode, McBeamConfig, McOutput, McTrace, TraceNode, TraceStep, WeightLearningLog};
pub use playout::{playout_score, PlayoutWeights};

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::event::EventTuple;
use crate::seq_model::{TokenId, Vocabulary, BEGIN, END, UNK};

/// A realized generalized sentence with the decoder's confidence in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub tokens: Vec<String>,
    pub confidence: f64,
}

/// Event tokens prepared for one decode: ids for scoring plus the surfaces of
/// out-of-vocabulary tokens, which are restored wherever `<unk>` is emitted.
#[derive(Debug, Clone)]
pub struct EventContext {
    pub ids: Vec<TokenId>,
    oov: Vec<String>,
}

impl EventContext {
    pub fn new(vocab: &Vocabulary, event: &EventTuple) -> Self {
        let ids = vocab.encode_event(event);
        let oov = event
            .distinct_tokens()
            .into_iter()
            .filter(|t| vocab.id(t).is_none())
            .map(str::to_string)
            .collect();
        Self { ids, oov }
    }

    /// `<unk>` may only be generated when it stands for an event token.
    pub fn allows(&self, token: TokenId) -> bool {
        token != BEGIN && (token != UNK || !self.oov.is_empty())
    }

    /// Token ids → surfaces, excluding the end token.
    pub fn decode(&self, vocab: &Vocabulary, ids: &[TokenId]) -> Vec<String> {
        let mut oov = self.oov.iter();
        ids.iter()
            .filter(|&&t| t != END && t != BEGIN)
            .map(|&t| {
                if t == UNK {
                    oov.next().cloned().unwrap_or_else(|| vocab.token(UNK).to_string())
                } else {
                    vocab.token(t).to_string()
                }
            })
            .collect()
    }
}

/// Descending by score, then ascending token ids.
pub(crate) fn rank(a_score: f64, a_tokens: &[TokenId], b_score: f64, b_tokens: &[TokenId]) -> Ordering {
    b_score
        .total_cmp(&a_score)
        .then_with(|| a_tokens.cmp(b_tokens))
}

/// Token ids sorted by probability (ties by id), filtered by `keep`.
pub(crate) fn top_tokens(dist: &[f64], k: usize, keep: impl Fn(TokenId) -> bool) -> Vec<TokenId> {
    let mut ids: Vec<TokenId> = (0..dist.len() as TokenId)
        .filter(|&t| dist[t as usize] > 0.0 && keep(t))
        .collect();
    ids.sort_by(|&a, &b| dist[b as usize].total_cmp(&dist[a as usize]).then(a.cmp(&b)));
    ids.truncate(k);
    ids
}

/// Independent RNG stream for a (seed, step, node, playout) coordinate.
pub(crate) fn stream_rng(seed: u64, coords: &[u64]) -> ChaCha8Rng {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &c in coords {
        h = splitmix(h ^ splitmix(c.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Geometric-mean token probability of a finished hypothesis.
pub(crate) fn mean_prob_confidence(logprob: f64, generated: usize) -> f64 {
    (logprob / generated.max(1) as f64).exp().clamp(0.0, 1.0)
}
