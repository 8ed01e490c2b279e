use serde::{Deserialize, Serialize};

use crate::event::{EventTuple, Slot};
use crate::metrics::bleu;

/// Per-slot weights for the unigram component of the playout score, in
/// (s, v, o, p, m) order. Always sums to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayoutWeights([f64; 5]);

impl Default for PlayoutWeights {
    fn default() -> Self {
        Self([0.2; 5])
    }
}

impl PlayoutWeights {
    /// Normalizes non-negative raw weights. Returns `None` when they are all zero
    /// or any is negative or non-finite.
    pub fn new(raw: [f64; 5]) -> Option<Self> {
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return None;
        }
        let total: f64 = raw.iter().sum();
        (total > 0.0).then(|| Self(raw.map(|w| w / total)))
    }

    pub fn get(&self, slot: Slot) -> f64 {
        self.0[slot.index()]
    }

    pub fn as_array(&self) -> [f64; 5] {
        self.0
    }

    /// Adds `delta` to each listed slot and renormalizes.
    pub fn bump(&self, slots: &[Slot], delta: f64) -> Self {
        let mut raw = self.0;
        for s in slots {
            raw[s.index()] += delta;
        }
        Self::new(raw).unwrap_or(*self)
    }
}

/// Equal-weight mean of (a) BLEU up to 4-grams between the sequence and the
/// event token string and (b) the slot-weighted unigram match of each event
/// item. Weights in (b) are renormalized over the event's filled slots.
pub fn playout_score<S: AsRef<str>>(event: &EventTuple, sequence: &[S], weights: &PlayoutWeights) -> f64 {
    let seq: Vec<&str> = sequence.iter().map(AsRef::as_ref).collect();
    if seq.is_empty() {
        return 0.0;
    }
    let reference = event.tokens();
    let order = reference.len().clamp(1, 4);
    let a = bleu(&seq, &[&reference], order);
    let mut hit = 0.0;
    let mut mass = 0.0;
    for (slot, tok) in event.filled() {
        let w = weights.get(slot);
        mass += w;
        if seq.contains(&tok.surface()) {
            hit += w;
        }
    }
    let b = if mass > 0.0 { hit / mass } else { 0.0 };
    (0.5 * a + 0.5 * b).clamp(0.0, 1.0)
}
