//! Sentence templating: pick a frame for the event, lay the event tokens out
//! as phrase anchors, then grow each phrase with directional language models.
//!
//! Blanks are filled by sampling from the top-k next tokens. Determiners and
//! adjectives grow leftwards in front of noun anchors (backward model),
//! auxiliaries and adverbs in front of the verb (backward model), and
//! particles after it (forward model). A phrase stops growing at its length
//! cap or when the model proposes a token belonging to another phrase.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decoders::{stream_rng, Realization};
use crate::event::{synset_pos, EventTuple, GeneralToken, Slot, TokenKind};
use crate::lexicon::Lexicon;
use crate::seq_model::{token_losses, SequenceModel, TokenId, BEGIN, END, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhraseSymbol {
    NP,
    V,
    PP,
}

impl fmt::Display for PhraseSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhraseSymbol::NP => "NP",
            PhraseSymbol::V => "V",
            PhraseSymbol::PP => "PP",
        })
    }
}

/// Parses a frame such as `"NP V NP PP"`. Role suffixes (`PP.destination`)
/// are ignored.
pub fn parse_frame(spec: &str) -> Result<Vec<PhraseSymbol>, String> {
    let mut out = Vec::new();
    for raw in spec.split_whitespace() {
        let head = raw.split('.').next().unwrap_or(raw);
        let sym = match head.to_ascii_uppercase().as_str() {
            "NP" => PhraseSymbol::NP,
            "V" => PhraseSymbol::V,
            "PP" => PhraseSymbol::PP,
            other => return Err(format!("unknown phrase symbol {other:?}")),
        };
        out.push(sym);
    }
    match out.iter().filter(|s| **s == PhraseSymbol::V).count() {
        1 => Ok(out),
        n => Err(format!("frame needs exactly one V, found {n}")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FrameSpec(Vec<PhraseSymbol>);

impl FrameSpec {
    pub fn parse(spec: &str) -> Result<Self, String> {
        parse_frame(spec).map(Self)
    }

    pub fn symbols(&self) -> &[PhraseSymbol] {
        &self.0
    }
}

impl fmt::Display for FrameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" "))
    }
}

impl TryFrom<String> for FrameSpec {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        Self::parse(&s)
    }
}

impl From<FrameSpec> for String {
    fn from(f: FrameSpec) -> String {
        f.to_string()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("reading frame table: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing frame table: {0}")]
    Json(#[from] serde_json::Error),
}

/// Slot signature → frame. Signatures list the filled slots in canonical
/// order, e.g. `svo` or `vpm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTable {
    pub fallback: FrameSpec,
    pub rules: BTreeMap<String, FrameSpec>,
}

const DEFAULT_FRAMES: &str = include_str!("../data/frames.json");

impl Default for FrameTable {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_FRAMES).expect("bundled frame table is valid")
    }
}

impl FrameTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub fn slot_signature(event: &EventTuple) -> String {
    event.filled().map(|(slot, _)| slot.to_string()).collect()
}

/// Frame for the event's slot signature. When the verb class lists frames,
/// the first listed frame containing the predicted one is preferred.
pub fn predict_frame(event: &EventTuple, table: &FrameTable, lexicon: Option<&Lexicon>) -> FrameSpec {
    let predicted = table
        .rules
        .get(&slot_signature(event))
        .cloned()
        .unwrap_or_else(|| table.fallback.clone());
    let Some(lex) = lexicon else {
        return predicted;
    };
    let listed = lex.frames(event.v.surface());
    if listed.is_empty() || listed.iter().any(|f| f.as_slice() == predicted.symbols()) {
        return predicted;
    }
    listed
        .iter()
        .find(|f| is_subsequence(predicted.symbols(), f))
        .map(|f| FrameSpec(f.clone()))
        .unwrap_or(predicted)
}

fn is_subsequence(needle: &[PhraseSymbol], hay: &[PhraseSymbol]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    Det,
    Adj,
    Noun,
    Verb,
    Aux,
    Adv,
    Prep,
    Conj,
    Punct,
    Other,
}

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "his", "her", "their", "its", "my", "your", "our",
    "some", "another", "every", "each", "no", "any",
];
const PREPOSITIONS: &[&str] = &[
    "to", "through", "with", "in", "on", "at", "from", "into", "onto", "of", "for", "by", "about", "toward",
    "towards", "over", "under", "across", "after", "before", "against", "around", "behind", "between", "near",
    "off", "upon", "within", "without", "during", "inside", "outside", "past", "beyond", "among", "along",
];
const AUXILIARIES: &[&str] = &[
    "can", "could", "will", "would", "shall", "should", "may", "might", "must", "has", "have", "had", "is", "was",
    "are", "were", "be", "been", "do", "does", "did",
];
const ADVERBS: &[&str] = &[
    "not", "never", "just", "also", "then", "soon", "quickly", "slowly", "again", "down", "away", "up", "out",
    "back", "still", "already", "finally", "suddenly", "recently", "n't", "there", "here", "now",
];
const ADJECTIVES: &[&str] = &["new", "old", "other", "last", "first", "young", "great", "small", "large", "same"];

/// Coarse part of speech for a generalized-vocabulary token.
pub fn pos_tag(token: &str) -> Pos {
    match GeneralToken::parse(token).kind() {
        TokenKind::Entity | TokenKind::Pronoun => return Pos::Noun,
        TokenKind::VerbClass => return Pos::Verb,
        TokenKind::Synset => {
            return match synset_pos(token) {
                Some('n') => Pos::Noun,
                Some('v') => Pos::Verb,
                Some('a') | Some('s') => Pos::Adj,
                Some('r') => Pos::Adv,
                _ => Pos::Other,
            }
        }
        TokenKind::Literal => {}
    }
    let lower = token.to_lowercase();
    let w = lower.as_str();
    if DETERMINERS.contains(&w) {
        Pos::Det
    } else if PREPOSITIONS.contains(&w) {
        Pos::Prep
    } else if AUXILIARIES.contains(&w) {
        Pos::Aux
    } else if ADVERBS.contains(&w) {
        Pos::Adv
    } else if ADJECTIVES.contains(&w) {
        Pos::Adj
    } else if matches!(w, "and" | "but" | "or") {
        Pos::Conj
    } else if !w.is_empty() && w.chars().all(|c| c.is_ascii_punctuation()) {
        Pos::Punct
    } else {
        Pos::Other
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateConfig {
    pub top_k: usize,
    pub max_phrase_length: usize,
    /// POS bigrams that may never be adjacent.
    pub forbidden: Vec<(Pos, Pos)>,
    pub seed: u64,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        Self {
            top_k: 3,
            max_phrase_length: 3,
            forbidden: vec![(Pos::Det, Pos::Det), (Pos::Noun, Pos::Noun)],
            seed: 0,
        }
    }
}

impl TemplateConfig {
    fn is_forbidden(&self, left: &str, right: &str) -> bool {
        let pair = (pos_tag(left), pos_tag(right));
        self.forbidden.contains(&pair)
    }
}

/// `1 − min(1, mean loss / log2|V|)` with losses in bits.
pub fn template_confidence(losses: &[f64], vocab_size: usize) -> f64 {
    if losses.is_empty() || vocab_size < 2 {
        return 0.0;
    }
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    let cap = (vocab_size as f64).log2();
    (1.0 - (mean / cap).min(1.0)).clamp(0.0, 1.0)
}

/// Where blanks go relative to an anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Growth {
    None,
    /// Backward blank in front of a noun: adjectives, then at most one determiner.
    NounPhrase,
    /// Backward blank in front of the verb, and a forward blank after it.
    Verb,
}

/// Fills the frame with the event's tokens and grows the phrases. Every
/// filled event slot appears in the output, in s, v, o, p/m order.
pub fn realize_template<F, B>(
    event: &EventTuple,
    frame: &FrameSpec,
    forward: &F,
    backward: &B,
    cfg: &TemplateConfig,
) -> Realization
where
    F: SequenceModel + ?Sized,
    B: SequenceModel + ?Sized,
{
    let mut rng = stream_rng(cfg.seed, &[]);
    let anchors = layout(event, frame);

    let mut tokens: Vec<String> = Vec::new();
    let mut growth: Vec<Growth> = Vec::new();
    for (tok, g) in anchors {
        tokens.push(tok);
        growth.push(g);
    }
    tokens.push(".".to_string());
    growth.push(Growth::None);

    // every event token is already an anchor, so blanks get no copy boost
    let placed: &[TokenId] = &[];
    // backward blanks, right to left, so each sees its completed right context
    for i in (0..growth.len()).rev() {
        let allowed: &[Pos] = match growth[i] {
            Growth::NounPhrase => &[Pos::Det, Pos::Adj],
            Growth::Verb => &[Pos::Aux, Pos::Adv],
            Growth::None => continue,
        };
        let grown = grow_left(&tokens, i, allowed, backward, placed, cfg, &mut rng);
        for tok in grown {
            tokens.insert(i, tok);
        }
    }

    if let Some(v) = tokens.iter().position(|t| t == event.v.surface()) {
        let grown = grow_right(&tokens, v, &[Pos::Adv], forward, placed, cfg, &mut rng);
        for (k, tok) in grown.into_iter().enumerate() {
            tokens.insert(v + 1 + k, tok);
        }
    }

    repair_adjacency(&mut tokens, cfg);

    let fwd_event = forward.vocab().encode_event(event);
    let ids = forward.vocab().encode_all(&tokens);
    let losses = token_losses(forward, &fwd_event, &ids);
    Realization {
        confidence: template_confidence(&losses, forward.vocab().len()),
        tokens,
    }
}

/// Event tokens in frame order, with the growth rule of each.
fn layout(event: &EventTuple, frame: &FrameSpec) -> Vec<(String, Growth)> {
    let syms = frame.symbols();
    let v_at = syms.iter().position(|s| *s == PhraseSymbol::V).unwrap_or(0);
    let has_pp = syms[v_at..].contains(&PhraseSymbol::PP);
    let noun = |t: &GeneralToken| {
        let g = match t.kind() {
            TokenKind::Pronoun => Growth::None,
            _ if t.is_nominal() => Growth::NounPhrase,
            _ => Growth::None,
        };
        (t.surface().to_string(), g)
    };

    let mut used = [false; 5];
    let mut out = Vec::new();
    let take = |slot: Slot, used: &mut [bool; 5]| -> Option<&GeneralToken> {
        if used[slot.index()] {
            return None;
        }
        let t = event.get(slot)?;
        used[slot.index()] = true;
        Some(t)
    };
    for (i, sym) in syms.iter().enumerate() {
        match (sym, i < v_at) {
            (PhraseSymbol::NP, true) => {
                if let Some(t) = take(Slot::S, &mut used) {
                    out.push(noun(t));
                }
            }
            (PhraseSymbol::V, _) => {
                let t = take(Slot::V, &mut used).expect("verb slot is always filled");
                out.push((t.surface().to_string(), Growth::Verb));
            }
            (PhraseSymbol::NP, false) => {
                if let Some(t) = take(Slot::O, &mut used) {
                    out.push(noun(t));
                } else if !has_pp && event.p.is_none() {
                    if let Some(t) = take(Slot::M, &mut used) {
                        out.push(noun(t));
                    }
                }
            }
            (PhraseSymbol::PP, _) => {
                if let Some(t) = take(Slot::P, &mut used) {
                    out.push((t.surface().to_string(), Growth::None));
                }
                if let Some(t) = take(Slot::M, &mut used) {
                    out.push(noun(t));
                }
            }
        }
    }
    // anything the frame could not host keeps its canonical position
    if !used[Slot::S.index()] {
        if let Some(t) = event.s.as_ref() {
            out.insert(0, noun(t));
        }
    }
    for slot in [Slot::O, Slot::P, Slot::M] {
        if let Some(t) = take(slot, &mut used) {
            let entry = if slot == Slot::P {
                (t.surface().to_string(), Growth::None)
            } else {
                noun(t)
            };
            out.push(entry);
        }
    }
    out
}

fn sample_candidate<R: Rng>(dist: &[f64], candidates: &[TokenId], rng: &mut R) -> Option<TokenId> {
    let total: f64 = candidates.iter().map(|&t| dist[t as usize]).sum();
    if candidates.is_empty() || total <= 0.0 {
        return None;
    }
    let mut x = rng.gen::<f64>() * total;
    for &t in candidates {
        x -= dist[t as usize];
        if x <= 0.0 {
            return Some(t);
        }
    }
    candidates.last().copied()
}

fn ranked(dist: &[f64], k: usize) -> Vec<TokenId> {
    let mut ids: Vec<TokenId> = (0..dist.len() as TokenId)
        .filter(|&t| t != BEGIN && t != UNK && dist[t as usize] > 0.0)
        .collect();
    ids.sort_by(|&a, &b| dist[b as usize].total_cmp(&dist[a as usize]).then(a.cmp(&b)));
    ids.truncate(k);
    ids
}

fn grow_left<M: SequenceModel + ?Sized, R: Rng>(
    tokens: &[String],
    at: usize,
    allowed: &[Pos],
    model: &M,
    event: &[TokenId],
    cfg: &TemplateConfig,
    rng: &mut R,
) -> Vec<String> {
    let vocab = model.vocab();
    // tokens to the right of the blank, read right to left
    let mut prefix: Vec<TokenId> = tokens[at..].iter().rev().map(|t| vocab.encode(t)).collect();
    let mut grown: Vec<String> = Vec::new();
    let mut right = tokens[at].clone();
    while grown.len() < cfg.max_phrase_length {
        let dist = model.next_distribution(event, &prefix);
        let candidates: Vec<TokenId> = ranked(&dist, cfg.top_k.max(1))
            .into_iter()
            .filter(|&t| t == END || !cfg.is_forbidden(vocab.token(t), &right))
            .collect();
        let Some(t) = sample_candidate(&dist, &candidates, rng) else { break };
        if t == END {
            break;
        }
        let word = vocab.token(t).to_string();
        let pos = pos_tag(&word);
        if !allowed.contains(&pos) {
            break;
        }
        prefix.push(t);
        right = word.clone();
        grown.push(word);
        if pos == Pos::Det {
            break;
        }
    }
    grown
}

fn grow_right<M: SequenceModel + ?Sized, R: Rng>(
    tokens: &[String],
    at: usize,
    allowed: &[Pos],
    model: &M,
    event: &[TokenId],
    cfg: &TemplateConfig,
    rng: &mut R,
) -> Vec<String> {
    let vocab = model.vocab();
    let mut prefix: Vec<TokenId> = tokens[..=at].iter().map(|t| vocab.encode(t)).collect();
    let mut grown: Vec<String> = Vec::new();
    let mut left = tokens[at].clone();
    while grown.len() < cfg.max_phrase_length {
        let dist = model.next_distribution(event, &prefix);
        let candidates: Vec<TokenId> = ranked(&dist, cfg.top_k.max(1))
            .into_iter()
            .filter(|&t| t == END || !cfg.is_forbidden(&left, vocab.token(t)))
            .collect();
        let Some(t) = sample_candidate(&dist, &candidates, rng) else { break };
        if t == END {
            break;
        }
        let word = vocab.token(t).to_string();
        if !allowed.contains(&pos_tag(&word)) {
            break;
        }
        prefix.push(t);
        left = word.clone();
        grown.push(word);
    }
    grown
}

/// Two adjacent nouns get "the" between them; a repeated determiner is dropped.
fn repair_adjacency(tokens: &mut Vec<String>, cfg: &TemplateConfig) {
    let mut i = 1;
    while i < tokens.len() {
        let (a, b) = (pos_tag(&tokens[i - 1]), pos_tag(&tokens[i]));
        if cfg.forbidden.contains(&(a, b)) {
            if a == Pos::Det {
                tokens.remove(i);
                continue;
            }
            if a == Pos::Noun && b == Pos::Noun {
                tokens.insert(i, "the".to_string());
            }
        }
        i += 1;
    }
}

/// POS bigrams of `tokens` that the config forbids.
pub fn forbidden_bigrams<S: AsRef<str>>(tokens: &[S], cfg: &TemplateConfig) -> Vec<(String, String)> {
    tokens
        .windows(2)
        .filter(|w| cfg.is_forbidden(w[0].as_ref(), w[1].as_ref()))
        .map(|w| (w[0].as_ref().to_string(), w[1].as_ref().to_string()))
        .collect()
}
