//! Monte Carlo beam search.
//!
//! Every expansion of a beam node becomes a child whose score is updated from
//! sampled playouts: `s_t = α·s_{t−1} + (1 − α)·mean(playouts)`, with the root
//! starting at 0. The `k` best-scoring children survive each step and the
//! confidence is the score of the best finished node.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{playout_score, rank, stream_rng, top_tokens, EventContext, PlayoutWeights, Realization};
use crate::event::{EventTuple, Slot};
use crate::seq_model::{SequenceModel, TokenId, END};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McBeamConfig {
    pub beam_width: usize,
    pub playouts: usize,
    pub alpha: f64,
    pub max_length: usize,
    pub weights: PlayoutWeights,
    pub seed: u64,
}

impl Default for McBeamConfig {
    fn default() -> Self {
        Self {
            beam_width: 5,
            playouts: 3,
            alpha: 0.5,
            max_length: 20,
            weights: PlayoutWeights::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceNode {
    pub tokens: Vec<TokenId>,
    pub prev_score: f64,
    pub playouts: Vec<f64>,
    pub score: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub alpha: f64,
    pub nodes: Vec<TraceNode>,
}

pub type McTrace = Vec<TraceStep>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOutput {
    pub realization: Realization,
    pub trace: McTrace,
}

#[derive(Debug, Clone)]
struct Node {
    tokens: Vec<TokenId>,
    logprob: f64,
    score: f64,
    finished: bool,
}

/// Samples from `dist` restricted to admissible tokens.
fn sample<R: Rng>(dist: &[f64], ctx: &EventContext, rng: &mut R) -> Option<TokenId> {
    let total: f64 = dist
        .iter()
        .enumerate()
        .filter(|(t, _)| ctx.allows(*t as TokenId))
        .map(|(_, p)| p)
        .sum();
    if total <= 0.0 {
        return None;
    }
    let mut u = rng.gen::<f64>() * total;
    let mut last = None;
    for (t, &p) in dist.iter().enumerate() {
        let t = t as TokenId;
        if p <= 0.0 || !ctx.allows(t) {
            continue;
        }
        last = Some(t);
        if u < p {
            return Some(t);
        }
        u -= p;
    }
    last
}

pub fn mc_beam_decode<M: SequenceModel + ?Sized>(model: &M, event: &EventTuple, cfg: &McBeamConfig) -> McOutput {
    assert!(cfg.playouts >= 1, "at least one playout per node");
    assert!(cfg.beam_width >= 1, "beam width must be at least 1");
    let vocab = model.vocab();
    let ctx = EventContext::new(vocab, event);
    let mut beam = vec![Node {
        tokens: Vec::new(),
        logprob: 0.0,
        score: 0.0,
        finished: false,
    }];
    let mut trace = Vec::new();
    let mut step = 0usize;
    while beam.iter().any(|n| !n.finished) {
        let mut candidates: Vec<Node> = Vec::new();
        let mut children: Vec<(usize, TraceNode)> = Vec::new();
        for node in &beam {
            if node.finished {
                candidates.push(node.clone());
                continue;
            }
            let dist = model.next_distribution(&ctx.ids, &node.tokens);
            let mut expansions = if node.tokens.len() >= cfg.max_length {
                vec![END]
            } else {
                top_tokens(&dist, cfg.beam_width, |t| ctx.allows(t))
            };
            if expansions.is_empty() {
                expansions.push(END);
            }
            for t in expansions {
                let mut tokens = node.tokens.clone();
                tokens.push(t);
                let logprob = node.logprob + dist[t as usize].max(f64::MIN_POSITIVE).ln();
                let finished = t == END;
                let child_index = children.len() as u64;
                let playouts: Vec<f64> = (0..cfg.playouts as u64)
                    .map(|r| {
                        if finished {
                            return playout_score(event, &ctx.decode(vocab, &tokens), &cfg.weights);
                        }
                        let mut rng = stream_rng(cfg.seed, &[step as u64, child_index, r]);
                        let mut seq = tokens.clone();
                        while seq.len() < cfg.max_length {
                            let d = model.next_distribution(&ctx.ids, &seq);
                            match sample(&d, &ctx, &mut rng) {
                                Some(END) | None => break,
                                Some(next) => seq.push(next),
                            }
                        }
                        playout_score(event, &ctx.decode(vocab, &seq), &cfg.weights)
                    })
                    .collect();
                let avg = playouts.iter().sum::<f64>() / playouts.len() as f64;
                let score = cfg.alpha * node.score + (1.0 - cfg.alpha) * avg;
                children.push((
                    candidates.len(),
                    TraceNode {
                        tokens: tokens.clone(),
                        prev_score: node.score,
                        playouts,
                        score,
                        kept: false,
                    },
                ));
                candidates.push(Node {
                    tokens,
                    logprob,
                    score,
                    finished,
                });
            }
        }
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (&candidates[a], &candidates[b]);
            rank(x.score, &[], y.score, &[])
                .then(y.logprob.total_cmp(&x.logprob))
                .then_with(|| x.tokens.cmp(&y.tokens))
        });
        order.truncate(cfg.beam_width);
        for (cand_index, node) in children.iter_mut() {
            node.kept = order.contains(cand_index);
        }
        trace.push(TraceStep {
            step,
            alpha: cfg.alpha,
            nodes: children.into_iter().map(|(_, n)| n).collect(),
        });
        beam = order.into_iter().map(|i| candidates[i].clone()).collect();
        step += 1;
    }
    let best = beam
        .iter()
        .filter(|n| n.finished)
        .min_by(|x, y| {
            y.score
                .total_cmp(&x.score)
                .then(y.logprob.total_cmp(&x.logprob))
                .then_with(|| x.tokens.cmp(&y.tokens))
        })
        .expect("loop exits only when every node is finished");
    McOutput {
        realization: Realization {
            tokens: ctx.decode(vocab, &best.tokens),
            confidence: best.score.clamp(0.0, 1.0),
        },
        trace,
    }
}

/// One decode made while learning playout weights, kept for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightLearningLog {
    pub epoch: usize,
    pub event_index: usize,
    pub output: Vec<String>,
    pub missing: Vec<Slot>,
    pub weights_after: [f64; 5],
}

/// Bumps the weight of every filled slot whose token is missing from the
/// decoded output by `delta`, renormalizing after each event. Stops early after
/// an epoch with no bumps.
pub fn learn_playout_weights<F>(
    validation: &[EventTuple],
    mut decode: F,
    initial: PlayoutWeights,
    delta: f64,
    max_epochs: usize,
) -> (PlayoutWeights, Vec<WeightLearningLog>)
where
    F: FnMut(&EventTuple, &PlayoutWeights) -> Vec<String>,
{
    assert!(!validation.is_empty(), "validation set must be non-empty");
    let mut weights = initial;
    let mut log = Vec::new();
    for epoch in 0..max_epochs {
        let mut bumped = false;
        for (i, event) in validation.iter().enumerate() {
            let output = decode(event, &weights);
            let missing: Vec<Slot> = event
                .filled()
                .filter(|(_, tok)| !output.iter().any(|o| o == tok.surface()))
                .map(|(slot, _)| slot)
                .collect();
            if !missing.is_empty() {
                weights = weights.bump(&missing, delta);
                bumped = true;
            }
            log.push(WeightLearningLog {
                epoch,
                event_index: i,
                output,
                missing,
                weights_after: weights.as_array(),
            });
        }
        if !bumped {
            break;
        }
    }
    (weights, log)
}
