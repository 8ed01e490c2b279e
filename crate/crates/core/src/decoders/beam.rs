use serde::{Deserialize, Serialize};

use super::{mean_prob_confidence, rank, EventContext, Realization};
use crate::event::EventTuple;
use crate::seq_model::{SequenceModel, TokenId, END};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamHypothesis {
    /// Generated tokens; ends with the end token iff `finished`.
    pub tokens: Vec<TokenId>,
    /// Natural-log probability, always ≤ 0.
    pub logprob: f64,
    pub finished: bool,
}

impl BeamHypothesis {
    fn content_len(&self) -> usize {
        self.tokens.len() - usize::from(self.finished)
    }
}

/// Beam search over at most `max_length` content tokens followed by the end
/// token. Finished hypotheses leave the beam for a separate pool, so an early
/// end is never pruned by longer open prefixes. The search stops when no open
/// hypothesis can still beat the best finished one.
pub fn beam_search<M: SequenceModel + ?Sized>(
    model: &M,
    ctx: &EventContext,
    width: usize,
    max_length: usize,
) -> BeamHypothesis {
    assert!(width >= 1, "beam width must be at least 1");
    let mut best: Option<BeamHypothesis> = None;
    let mut beam = vec![BeamHypothesis {
        tokens: Vec::new(),
        logprob: 0.0,
        finished: false,
    }];
    while !beam.is_empty() {
        let mut open: Vec<BeamHypothesis> = Vec::new();
        for hyp in &beam {
            let dist = model.next_distribution(&ctx.ids, &hyp.tokens);
            let at_cap = hyp.content_len() >= max_length;
            for (t, &p) in dist.iter().enumerate() {
                let t = t as TokenId;
                if p <= 0.0 || !ctx.allows(t) || (at_cap && t != END) {
                    continue;
                }
                let mut tokens = hyp.tokens.clone();
                tokens.push(t);
                let cand = BeamHypothesis {
                    tokens,
                    logprob: hyp.logprob + p.ln(),
                    finished: t == END,
                };
                if !cand.finished {
                    open.push(cand);
                } else if best
                    .as_ref()
                    .map_or(true, |b| rank(cand.logprob, &cand.tokens, b.logprob, &b.tokens).is_lt())
                {
                    best = Some(cand);
                }
            }
        }
        open.sort_by(|a, b| rank(a.logprob, &a.tokens, b.logprob, &b.tokens));
        open.truncate(width);
        // log-probabilities only fall as hypotheses grow
        if let Some(b) = &best {
            open.retain(|h| h.logprob >= b.logprob);
        }
        beam = open;
    }
    // `None` means the model put zero mass on every admissible token
    best.unwrap_or(BeamHypothesis {
        tokens: vec![END],
        logprob: f64::NEG_INFINITY,
        finished: true,
    })
}

/// Standard beam decoding of an event. Confidence is the geometric-mean token
/// probability of the returned hypothesis.
pub fn beam_decode<M: SequenceModel + ?Sized>(
    model: &M,
    event: &EventTuple,
    width: usize,
    max_length: usize,
) -> Realization {
    let ctx = EventContext::new(model.vocab(), event);
    let best = beam_search(model, &ctx, width, max_length);
    Realization {
        tokens: ctx.decode(model.vocab(), &best.tokens),
        confidence: mean_prob_confidence(best.logprob, best.tokens.len()),
    }
}
