//! Parsed stories → (event, generalized sentence) pairs.
//!
//! Input is the interchange JSONL: one story per line, each sentence carrying
//! tokens, dependency edges, NER spans and optional constituent spans. Token
//! indices are 0-based; spans are half-open; the root edge has head -1.

use std::collections::BTreeSet;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::event::{EventTuple, GeneralToken};
use crate::lexicon::Lexicon;
use crate::memory::StoryMemory;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub pos: String,
}

impl Token {
    pub fn new(surface: &str, lemma: &str, pos: &str) -> Self {
        Self {
            surface: surface.into(),
            lemma: lemma.into(),
            pos: pos.into(),
        }
    }
}

/// `(head, child, relation)`; head is -1 for the root.
pub type DepEdge = (i64, usize, String);
/// `(start, end, label)`, end exclusive.
pub type Span = (usize, usize, String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSentence {
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub dep_edges: Vec<DepEdge>,
    #[serde(default)]
    pub ner_spans: Vec<Span>,
    #[serde(default)]
    pub constituents: Option<Vec<Span>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub id: String,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub source: Option<String>,
    pub sentences: Vec<ParsedSentence>,
}

#[derive(Debug, thiserror::Error)]
pub enum EventifyError {
    #[error("no verb in sentence {0:?}")]
    NoVerb(String),
    #[error("line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("reading corpus: {0}")]
    Io(#[from] std::io::Error),
}

impl ParsedSentence {
    pub fn text(&self) -> String {
        crate::event::render_tokens(&self.tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>())
    }

    /// Checks that every index is within the token range.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.tokens.len();
        if n == 0 {
            return Err("sentence has no tokens".into());
        }
        for (h, c, rel) in &self.dep_edges {
            if *c >= n || *h >= n as i64 || *h < -1 {
                return Err(format!("dependency {rel} ({h} → {c}) outside {n} tokens"));
            }
        }
        let spans = self.ner_spans.iter().chain(self.constituents.iter().flatten());
        for (s, e, label) in spans {
            if s >= e || *e > n {
                return Err(format!("span {label} [{s}, {e}) outside {n} tokens"));
            }
        }
        Ok(())
    }

    fn head_of(&self, child: usize) -> Option<i64> {
        self.dep_edges.iter().find(|(_, c, _)| *c == child).map(|(h, _, _)| *h)
    }

    fn children(&self, head: usize) -> impl Iterator<Item = (usize, &str)> {
        self.dep_edges
            .iter()
            .filter(move |(h, _, _)| *h == head as i64)
            .map(|(_, c, r)| (*c, r.as_str()))
    }

    /// Sub-sentence made of the given token indices (ascending). Edges whose
    /// head falls outside become roots; spans must lie wholly inside.
    fn project(&self, keep: &[usize]) -> ParsedSentence {
        let new_index = |old: usize| keep.iter().position(|&k| k == old);
        let tokens = keep.iter().map(|&i| self.tokens[i].clone()).collect();
        let dep_edges = self
            .dep_edges
            .iter()
            .filter_map(|(h, c, r)| {
                let c2 = new_index(*c)?;
                let h2 = if *h < 0 {
                    -1
                } else {
                    new_index(*h as usize).map_or(-1, |x| x as i64)
                };
                Some((h2, c2, r.clone()))
            })
            .collect();
        let remap_spans = |spans: &[Span]| -> Vec<Span> {
            spans
                .iter()
                .filter_map(|(s, e, l)| {
                    let inside = (*s..*e).all(|i| keep.contains(&i));
                    inside.then(|| (new_index(*s).unwrap(), new_index(e - 1).unwrap() + 1, l.clone()))
                })
                .collect()
        };
        ParsedSentence {
            tokens,
            dep_edges,
            ner_spans: remap_spans(&self.ner_spans),
            constituents: self.constituents.as_deref().map(remap_spans),
        }
    }
}

fn is_punct(t: &Token) -> bool {
    !t.surface.is_empty() && t.surface.chars().all(|c| c.is_ascii_punctuation())
}

fn is_verb(t: &Token) -> bool {
    t.pos.starts_with("VB") || t.pos == "VERB"
}

/// Token groups (ascending indices) for one level of splitting, or `None`
/// when the sentence has no split point.
fn split_groups(s: &ParsedSentence) -> Option<Vec<Vec<usize>>> {
    let spans = s.constituents.as_ref()?;
    let n = s.tokens.len();
    let content_end = (0..n).rev().find(|&i| !is_punct(&s.tokens[i])).map_or(0, |i| i + 1);
    let covers_all = |a: usize, b: usize| a == 0 && b >= content_end;

    // outermost SBARs that are not the whole sentence
    let sbars: Vec<(usize, usize)> = spans
        .iter()
        .filter(|(a, b, l)| l == "SBAR" && !covers_all(*a, *b))
        .map(|(a, b, _)| (*a, *b))
        .collect();
    let outer: Vec<(usize, usize)> = sbars
        .iter()
        .copied()
        .filter(|&(a, b)| !sbars.iter().any(|&(c, d)| (c, d) != (a, b) && c <= a && b <= d))
        .collect();

    let mut pieces: Vec<Vec<usize>> = Vec::new();
    let mut dropped: BTreeSet<usize> = BTreeSet::new();
    let mut covered: BTreeSet<usize> = BTreeSet::new();
    for (a, b) in outer {
        let mut start = a;
        if matches!(s.tokens[a].pos.as_str(), "IN" | "DT" | "WDT") && b - a > 1 {
            dropped.insert(a);
            start += 1;
        }
        pieces.push((start..b).collect());
        covered.extend(a..b);
    }

    // clausal coordination: S CC S
    let clauses: Vec<(usize, usize)> = spans
        .iter()
        .filter(|(_, _, l)| l == "S")
        .map(|(a, b, _)| (*a, *b))
        .collect();
    for (c, tok) in s.tokens.iter().enumerate() {
        if tok.pos != "CC" || covered.contains(&c) {
            continue;
        }
        let left = clauses.iter().filter(|&&(_, b)| b == c).min_by_key(|&&(a, _)| a);
        let right = clauses.iter().filter(|&&(a, _)| a == c + 1).max_by_key(|&&(_, b)| b);
        if let (Some(&(la, lb)), Some(&(ra, rb))) = (left, right) {
            if (la..lb).chain(ra..rb).any(|i| covered.contains(&i)) {
                continue;
            }
            pieces.push((la..lb).collect());
            pieces.push((ra..rb).collect());
            covered.extend(la..rb);
            dropped.insert(c);
        }
    }
    if pieces.is_empty() {
        return None;
    }
    let rest: Vec<usize> = (0..n)
        .filter(|i| !covered.contains(i) && !dropped.contains(i) && !is_punct(&s.tokens[*i]))
        .collect();
    if !rest.is_empty() {
        pieces.push(rest);
    }
    // trailing punctuation inside pieces is re-added later
    for p in pieces.iter_mut() {
        while p.last().is_some_and(|&i| is_punct(&s.tokens[i])) {
            p.pop();
        }
    }
    pieces.retain(|p| !p.is_empty());
    if pieces.len() < 2 {
        return None;
    }
    pieces.sort_by_key(|p| p[0]);
    Some(pieces)
}

/// Splits on outer SBARs and clausal conjunctions, outermost first, then
/// recurses into each piece. Pieces keep source order, end with a period and
/// start with a capital letter.
pub fn split_sentence(s: &ParsedSentence) -> Vec<ParsedSentence> {
    let Some(groups) = split_groups(s) else {
        return vec![s.clone()];
    };
    let mut out = Vec::new();
    for g in groups {
        let mut piece = s.project(&g);
        piece.tokens.push(Token::new(".", ".", "."));
        if let Some(first) = piece.tokens.first_mut() {
            first.surface = crate::slotfill::capitalize(&first.surface);
        }
        out.extend(split_sentence(&piece));
    }
    out
}

/// Tokens dropped by splitting: complementizers, conjunctions and punctuation.
pub fn split_coverage_ok(original: &ParsedSentence, pieces: &[ParsedSentence]) -> bool {
    let kept: usize = pieces
        .iter()
        .map(|p| p.tokens.iter().filter(|t| !is_punct(t)).count())
        .sum();
    let droppable = original
        .tokens
        .iter()
        .filter(|t| is_punct(t) || matches!(t.pos.as_str(), "CC" | "IN" | "DT" | "WDT"))
        .count();
    let content = original.tokens.iter().filter(|t| !is_punct(t)).count();
    kept <= content && kept + droppable >= content
}

const SUBJECT: &[&str] = &["nsubj", "nsubjpass", "nsubj:pass"];
const OBJECT: &[&str] = &["dobj", "obj"];
const MODIFIER: &[&str] = &["nmod", "obl", "npadvmod", "obl:npmod", "nmod:tmod", "obl:tmod"];

fn main_verb(s: &ParsedSentence) -> Option<usize> {
    let roots: Vec<usize> = (0..s.tokens.len()).filter(|&i| s.head_of(i) == Some(-1)).collect();
    if let Some(&r) = roots.iter().find(|&&r| is_verb(&s.tokens[r])) {
        return Some(r);
    }
    for &r in &roots {
        if let Some((c, _)) = s.children(r).find(|(c, rel)| *rel == "cop" && is_verb(&s.tokens[*c])) {
            return Some(c);
        }
    }
    (0..s.tokens.len()).find(|&i| is_verb(&s.tokens[i]))
}

/// Per-sentence generalizer bound to one story's memory.
struct Generalizer<'a> {
    lexicon: &'a Lexicon,
    memory: &'a mut StoryMemory,
}

impl Generalizer<'_> {
    fn ner_span<'s>(&self, s: &'s ParsedSentence, i: usize) -> Option<&'s Span> {
        s.ner_spans.iter().find(|(a, b, _)| *a <= i && i < *b)
    }

    fn entity(&mut self, s: &ParsedSentence, span: &Span) -> GeneralToken {
        let surface: Vec<&str> = s.tokens[span.0..span.1].iter().map(|t| t.surface.as_str()).collect();
        self.memory.tag_entity(&surface.join(" "), &span.2)
    }

    fn noun(&self, t: &Token) -> GeneralToken {
        match self.lexicon.generalize_noun(&t.lemma) {
            Ok(s) => GeneralToken::parse(&s),
            Err(_) => GeneralToken::literal(t.lemma.to_lowercase()),
        }
    }

    fn token(&mut self, s: &ParsedSentence, i: usize) -> GeneralToken {
        if let Some(span) = self.ner_span(s, i).cloned() {
            return self.entity(s, &span);
        }
        let t = &s.tokens[i];
        match t.pos.as_str() {
            "PRP" | "PRON" => GeneralToken::pronoun(),
            p if p.starts_with("NN") || p == "NOUN" || p == "PROPN" => self.noun(t),
            _ => GeneralToken::literal(t.lemma.to_lowercase()),
        }
    }

    /// The sentence over the generalized vocabulary: entity spans collapse to
    /// their tag, nouns to their generalized synset, pronouns to `<PRP>`.
    fn sentence(&mut self, s: &ParsedSentence) -> Vec<String> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < s.tokens.len() {
            if let Some(span) = self.ner_span(s, i).cloned() {
                out.push(self.entity(s, &span).surface().to_string());
                i = span.1;
                continue;
            }
            let t = &s.tokens[i];
            let g = match t.pos.as_str() {
                "PRP" | "PRON" => GeneralToken::pronoun(),
                p if p.starts_with("NN") || p == "NOUN" || p == "PROPN" => self.noun(t),
                _ => GeneralToken::literal(t.surface.to_lowercase()),
            };
            out.push(g.surface().to_string());
            i += 1;
        }
        out
    }
}

/// Extracts the root verb's event. The sentence is generalized first so
/// entity tags are minted in order of appearance.
pub fn eventify_sentence(
    s: &ParsedSentence,
    memory: &mut StoryMemory,
    lexicon: &Lexicon,
) -> Result<(EventTuple, Vec<String>), EventifyError> {
    let verb = main_verb(s).ok_or_else(|| EventifyError::NoVerb(s.text()))?;
    let mut g = Generalizer { lexicon, memory };
    let sentence = g.sentence(s);

    // a copula's arguments hang off the predicate it links
    let head = match s.head_of(verb) {
        Some(h) if h >= 0 && s.dep_edges.iter().any(|(_, c, r)| *c == verb && r == "cop") => h as usize,
        _ => verb,
    };
    let deps: Vec<(usize, String)> = s.children(head).map(|(c, r)| (c, r.to_string())).collect();
    let first = |rels: &[&str]| deps.iter().find(|(_, r)| rels.contains(&r.as_str())).map(|(c, _)| *c);

    let v_tok = &s.tokens[verb];
    let v = match lexicon.classify_verb(&v_tok.lemma) {
        Ok(class) => GeneralToken::parse(&class),
        Err(_) => GeneralToken::literal(v_tok.lemma.to_lowercase()),
    };
    let subj = first(SUBJECT).map(|i| g.token(s, i));
    let obj = first(OBJECT).map(|i| g.token(s, i));

    // preposition: Stanford-style prep→pobj, or UD obl/nmod with a case child
    let mut prep: Option<(usize, usize)> = None;
    for (c, r) in &deps {
        if r == "prep" {
            if let Some((pobj, _)) = s.children(*c).find(|(_, rel)| *rel == "pobj") {
                prep = Some((*c, pobj));
                break;
            }
        } else if r == "obl" || r == "nmod" {
            if let Some((case, _)) = s.children(*c).find(|(_, rel)| *rel == "case") {
                prep = Some((case, *c));
                break;
            }
        }
    }
    let (p, m) = match prep {
        Some((pi, mi)) => (
            Some(GeneralToken::literal(s.tokens[pi].surface.to_lowercase())),
            Some(g.token(s, mi)),
        ),
        None => {
            let fallback = first(&["iobj"]).or_else(|| {
                deps.iter()
                    .find(|(c, r)| {
                        MODIFIER.contains(&r.as_str())
                            && (s.tokens[*c].pos.starts_with("NN") || s.tokens[*c].pos == "PRP")
                    })
                    .map(|(c, _)| *c)
            });
            let fallback = fallback.or_else(|| (head != verb).then_some(head));
            (None, fallback.map(|i| g.token(s, i)))
        }
    };
    Ok((EventTuple::new(subj, v, obj, p, m), sentence))
}

/// One (event, generalized sentence) pair of a story.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event: EventTuple,
    #[serde(default)]
    pub sentence: Vec<String>,
    #[serde(default)]
    pub story_id: String,
    #[serde(default)]
    pub index: usize,
}

/// Splits every sentence and eventifies the pieces with a fresh memory.
/// Sentences without a verb are skipped with a warning.
pub fn eventify_story(story: &Story, lexicon: &Lexicon) -> (Vec<EventRecord>, StoryMemory) {
    let mut memory = StoryMemory::new();
    let mut out = Vec::new();
    for sentence in &story.sentences {
        for piece in split_sentence(sentence) {
            match eventify_sentence(&piece, &mut memory, lexicon) {
                Ok((event, sentence)) => out.push(EventRecord {
                    event,
                    sentence,
                    story_id: story.id.clone(),
                    index: out.len(),
                }),
                Err(e) => log::warn!("story {}: skipping sentence: {e}", story.id),
            }
        }
    }
    (out, memory)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded 8:1:1 partition of story ids; validation and test each get
/// round(n/10) stories.
pub fn split_stories(ids: &[String], seed: u64) -> CorpusSplit {
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = shuffled.len();
    let tenth = (n as f64 / 10.0).round() as usize;
    let test = shuffled.split_off(n - tenth);
    let validation = shuffled.split_off(n - 2 * tenth);
    CorpusSplit {
        train: shuffled,
        validation,
        test,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventifiedCorpus {
    pub split: CorpusSplit,
    /// Records of every story, in input order.
    pub records: Vec<EventRecord>,
}

impl EventifiedCorpus {
    pub fn partition(&self, ids: &[String]) -> Vec<EventRecord> {
        let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        self.records
            .iter()
            .filter(|r| wanted.contains(r.story_id.as_str()))
            .cloned()
            .collect()
    }
}

pub fn eventify_corpus(stories: &[Story], lexicon: &Lexicon, seed: u64) -> EventifiedCorpus {
    let records = stories.iter().flat_map(|s| eventify_story(s, lexicon).0).collect();
    let ids: Vec<String> = stories.iter().map(|s| s.id.clone()).collect();
    EventifiedCorpus {
        split: split_stories(&ids, seed),
        records,
    }
}

/// Reads interchange JSONL, validating every story.
pub fn read_stories<R: BufRead>(reader: R) -> Result<Vec<Story>, EventifyError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |reason: String| EventifyError::Schema { line: i + 1, reason };
        let story: Story = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        if story.sentences.is_empty() {
            return Err(schema(format!("story {} has no sentences", story.id)));
        }
        for (k, s) in story.sentences.iter().enumerate() {
            s.validate().map_err(|r| schema(format!("story {} sentence {k}: {r}", story.id)))?;
        }
        out.push(story);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::tests::tiny;

    fn sent(words: &[(&str, &str, &str)], deps: &[(i64, usize, &str)], cons: &[(usize, usize, &str)]) -> ParsedSentence {
        ParsedSentence {
            tokens: words.iter().map(|(s, l, p)| Token::new(s, l, p)).collect(),
            dep_edges: deps.iter().map(|(h, c, r)| (*h, *c, r.to_string())).collect(),
            ner_spans: vec![],
            constituents: Some(cons.iter().map(|(a, b, l)| (*a, *b, l.to_string())).collect()),
        }
    }

    fn texts(pieces: &[ParsedSentence]) -> Vec<String> {
        pieces.iter().map(ParsedSentence::text).collect()
    }

    fn says_that() -> ParsedSentence {
        sent(
            &[
                ("She", "she", "PRP"),
                ("says", "say", "VBZ"),
                ("that", "that", "IN"),
                ("he", "he", "PRP"),
                ("is", "be", "VBZ"),
                ("upset", "upset", "JJ"),
                (".", ".", "."),
            ],
            &[(1, 0, "nsubj"), (-1, 1, "root"), (5, 2, "mark"), (5, 3, "nsubj"), (5, 4, "cop"), (1, 5, "ccomp"), (1, 6, "punct")],
            &[(0, 7, "S"), (2, 6, "SBAR"), (3, 6, "S")],
        )
    }

    #[test]
    fn sbar_split() {
        let s = says_that();
        let pieces = split_sentence(&s);
        assert_eq!(texts(&pieces), vec!["She says.", "He is upset."]);
        assert!(split_coverage_ok(&s, &pieces));
    }

    #[test]
    fn no_split_point() {
        let s = sent(
            &[("He", "he", "PRP"), ("ran", "run", "VBD"), (".", ".", ".")],
            &[(1, 0, "nsubj"), (-1, 1, "root"), (1, 2, "punct")],
            &[(0, 3, "S")],
        );
        assert_eq!(split_sentence(&s), vec![s.clone()]);
        let mut bare = s.clone();
        bare.constituents = None;
        assert_eq!(split_sentence(&bare), vec![bare.clone()]);
    }

    #[test]
    fn conjunction_split() {
        let s = sent(
            &[
                ("Kira", "Kira", "NNP"),
                ("fights", "fight", "VBZ"),
                ("and", "and", "CC"),
                ("Odo", "Odo", "NNP"),
                ("watches", "watch", "VBZ"),
                (".", ".", "."),
            ],
            &[(1, 0, "nsubj"), (-1, 1, "root"), (1, 2, "cc"), (4, 3, "nsubj"), (1, 4, "conj"), (1, 5, "punct")],
            &[(0, 6, "S"), (0, 2, "S"), (3, 5, "S")],
        );
        assert_eq!(texts(&split_sentence(&s)), vec!["Kira fights.", "Odo watches."]);
    }

    #[test]
    fn copula_event_and_pronouns() {
        let lex = tiny();
        let mut mem = StoryMemory::new();
        let pieces = split_sentence(&says_that());
        let (e, g) = eventify_sentence(&pieces[1], &mut mem, &lex).unwrap();
        assert_eq!(e.to_string(), "⟨<PRP>, be, ∅, ∅, upset⟩");
        assert_eq!(g, vec!["<PRP>", "is", "upset", "."]);
    }

    #[test]
    fn entities_and_generalized_nouns() {
        let lex = tiny();
        let mut mem = StoryMemory::new();
        let mut s = sent(
            &[
                ("Jabba", "Jabba", "NNP"),
                ("the", "the", "DT"),
                ("Hutt", "Hutt", "NNP"),
                ("inspects", "inspect", "VBZ"),
                ("the", "the", "DT"),
                ("barge", "barge", "NN"),
                (".", ".", "."),
            ],
            &[(3, 0, "nsubj"), (0, 1, "det"), (0, 2, "flat"), (-1, 3, "root"), (5, 4, "det"), (3, 5, "obj"), (3, 6, "punct")],
            &[(0, 7, "S")],
        );
        s.ner_spans = vec![(0, 3, "ORG".into())];
        let (e, g) = eventify_sentence(&s, &mut mem, &lex).unwrap();
        assert_eq!(e.to_string(), "⟨<ORG>0, assessment-34.1, vessel.n.02, ∅, ∅⟩");
        assert_eq!(g, vec!["<ORG>0", "inspects", "the", "vessel.n.02", "."]);
        assert_eq!(mem.lookup("<ORG>0").unwrap().surface, "Jabba the Hutt");
    }

    #[test]
    fn unknown_verb_is_literal_and_verbless_is_an_error() {
        let lex = tiny();
        let mut mem = StoryMemory::new();
        let s = sent(
            &[("Odo", "Odo", "NNP"), ("blorps", "blorp", "VBZ"), (".", ".", ".")],
            &[(1, 0, "nsubj"), (-1, 1, "root")],
            &[],
        );
        let (e, _) = eventify_sentence(&s, &mut mem, &lex).unwrap();
        assert_eq!(e.v, GeneralToken::literal("blorp"));
        let none = sent(&[("Hello", "hello", "UH"), (".", ".", ".")], &[(-1, 0, "root")], &[]);
        assert!(matches!(eventify_sentence(&none, &mut mem, &lex), Err(EventifyError::NoVerb(_))));
    }

    #[test]
    fn ten_stories_split_eight_one_one() {
        let ids: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let split = split_stories(&ids, 0);
        assert_eq!((split.train.len(), split.validation.len(), split.test.len()), (8, 1, 1));
        let mut all: Vec<String> = split.train.iter().chain(&split.validation).chain(&split.test).cloned().collect();
        all.sort();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(all, sorted);
        assert_eq!(split_stories(&ids, 0), split);
    }

    #[test]
    fn schema_errors_name_the_line() {
        let bad = r#"{"id":"a","sentences":[{"tokens":[{"surface":"x","lemma":"x","pos":"NN"}],"dep_edges":[[0,4,"root"]]}]}"#;
        let err = read_stories(format!("\n{bad}\n").as_bytes()).unwrap_err();
        assert!(matches!(err, EventifyError::Schema { line: 2, .. }), "{err}");
    }
}
