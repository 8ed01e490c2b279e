//! Constrained beam search over a 2^n-state machine whose states are the
//! subsets of event tokens matched so far.

use serde::{Deserialize, Serialize};

use super::{mean_prob_confidence, rank, top_tokens, EventContext, Realization};
use crate::event::EventTuple;
use crate::seq_model::{SequenceModel, TokenId, Vocabulary, END};

/// Subset state machine for `n` constraint tokens. State `mask` has bit `i`
/// set once constraint `i` has been generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFsm {
    pub constraints: Vec<String>,
    pub min_matched: usize,
}

/// `max(1, ceil(0.6·n))`; three of five for a full event.
pub fn default_min_matched(n: usize) -> usize {
    ((3 * n).div_ceil(5)).max(1)
}

pub fn build_constraint_fsm(event: &EventTuple, min_matched: Option<usize>) -> ConstraintFsm {
    let constraints: Vec<String> = event.distinct_tokens().into_iter().map(str::to_string).collect();
    let n = constraints.len();
    ConstraintFsm {
        min_matched: min_matched.unwrap_or_else(|| default_min_matched(n)).min(n),
        constraints,
    }
}

impl ConstraintFsm {
    pub fn n(&self) -> usize {
        self.constraints.len()
    }

    pub fn state_count(&self) -> usize {
        1usize << self.n()
    }

    pub fn initial(&self) -> u32 {
        0
    }

    pub fn is_accepting(&self, state: u32) -> bool {
        state.count_ones() as usize >= self.min_matched
    }

    pub fn accepting_states(&self) -> Vec<u32> {
        (0..self.state_count() as u32).filter(|&s| self.is_accepting(s)).collect()
    }

    /// Constraint ids in vocabulary space (out-of-vocabulary → `<unk>`).
    pub fn constraint_ids(&self, vocab: &Vocabulary) -> Vec<TokenId> {
        self.constraints.iter().map(|c| vocab.encode(c)).collect()
    }

    /// Emitting `token` matches the first still-unmatched constraint with
    /// that id; each constraint counts once.
    pub fn successor(&self, ids: &[TokenId], state: u32, token: TokenId) -> u32 {
        for (i, &c) in ids.iter().enumerate() {
            if c == token && state & (1 << i) == 0 {
                return state | (1 << i);
            }
        }
        state
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FsmConfig {
    /// Hypotheses kept per state (b).
    pub state_beam: usize,
    /// Most-likely expansions considered per hypothesis (B^s); unmatched
    /// constraint tokens are always considered in addition.
    pub expansion_width: usize,
    pub min_matched: Option<usize>,
    /// Maximum generated tokens, end token included.
    pub horizon: usize,
}

impl Default for FsmConfig {
    fn default() -> Self {
        Self {
            state_beam: 5,
            expansion_width: 5,
            min_matched: None,
            horizon: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsmOutput {
    pub realization: Realization,
    pub matched: Vec<String>,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no hypothesis reached an accepting state within {horizon} tokens")]
pub struct FsmFailure {
    pub horizon: usize,
}

#[derive(Debug, Clone)]
struct Hyp {
    tokens: Vec<TokenId>,
    logprob: f64,
    finished: bool,
}

pub fn fsm_decode<M: SequenceModel + ?Sized>(
    model: &M,
    event: &EventTuple,
    cfg: &FsmConfig,
) -> Result<FsmOutput, FsmFailure> {
    let vocab = model.vocab();
    let ctx = EventContext::new(vocab, event);
    let fsm = build_constraint_fsm(event, cfg.min_matched);
    let ids = fsm.constraint_ids(vocab);
    let states = fsm.state_count();
    let mut beams: Vec<Vec<Hyp>> = vec![Vec::new(); states];
    beams[fsm.initial() as usize].push(Hyp {
        tokens: Vec::new(),
        logprob: 0.0,
        finished: false,
    });

    for step in 0..cfg.horizon {
        let last_step = step + 1 == cfg.horizon;
        let mut incoming: Vec<Vec<Hyp>> = vec![Vec::new(); states];
        for (state, beam) in beams.iter().enumerate() {
            let state = state as u32;
            for hyp in beam {
                if hyp.finished {
                    incoming[state as usize].push(hyp.clone());
                    continue;
                }
                let dist = model.next_distribution(&ctx.ids, &hyp.tokens);
                let mut options = if last_step {
                    Vec::new()
                } else {
                    top_tokens(&dist, cfg.expansion_width, |t| ctx.allows(t) && t != END)
                };
                if !last_step {
                    for (i, &c) in ids.iter().enumerate() {
                        if state & (1 << i) == 0 && dist[c as usize] > 0.0 && !options.contains(&c) {
                            options.push(c);
                        }
                    }
                }
                if fsm.is_accepting(state) && dist[END as usize] > 0.0 {
                    options.push(END);
                }
                for t in options {
                    let next = if t == END { state } else { fsm.successor(&ids, state, t) };
                    let mut tokens = hyp.tokens.clone();
                    tokens.push(t);
                    incoming[next as usize].push(Hyp {
                        tokens,
                        logprob: hyp.logprob + dist[t as usize].ln(),
                        finished: t == END,
                    });
                }
            }
        }
        for bucket in incoming.iter_mut() {
            bucket.sort_by(|a, b| rank(a.logprob, &a.tokens, b.logprob, &b.tokens));
            bucket.truncate(cfg.state_beam);
        }
        beams = incoming;

        // extending a hypothesis only lowers its log-probability, so once the
        // best accepted sentence beats every open hypothesis the search is done
        let best_done = best_accepted(&fsm, &beams).map(|(_, h)| h.logprob);
        let best_open = beams
            .iter()
            .flatten()
            .filter(|h| !h.finished)
            .map(|h| h.logprob)
            .fold(f64::NEG_INFINITY, f64::max);
        if best_open == f64::NEG_INFINITY || best_done.is_some_and(|d| d >= best_open) {
            break;
        }
    }

    let (state, hyp) = best_accepted(&fsm, &beams).ok_or(FsmFailure { horizon: cfg.horizon })?;
    let matched = (0..fsm.n())
        .filter(|i| state & (1 << i) != 0)
        .map(|i| fsm.constraints[i].clone())
        .collect();
    Ok(FsmOutput {
        realization: Realization {
            tokens: ctx.decode(vocab, &hyp.tokens),
            confidence: mean_prob_confidence(hyp.logprob, hyp.tokens.len()),
        },
        matched,
        logprob: hyp.logprob,
    })
}

fn best_accepted<'a>(fsm: &ConstraintFsm, beams: &'a [Vec<Hyp>]) -> Option<(u32, &'a Hyp)> {
    beams
        .iter()
        .enumerate()
        .filter(|(s, _)| fsm.is_accepting(*s as u32))
        .flat_map(|(s, b)| b.iter().filter(|h| h.finished).map(move |h| (s as u32, h)))
        .min_by(|(sa, a), (sb, b)| {
            rank(a.logprob, &a.tokens, b.logprob, &b.tokens).then(sb.count_ones().cmp(&sa.count_ones()))
        })
}
