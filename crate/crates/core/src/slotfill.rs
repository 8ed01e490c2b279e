//! Slot filling: turns generalized sentences into surface text using a
//! per-story memory of entities and synsets.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::event::{parse_entity_tag, render_tokens, GeneralToken, TokenKind};
use crate::lexicon::{Gender, Lexicon};
use crate::memory::StoryMemory;
use crate::templater::{pos_tag, Pos};

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("reading entity pool: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing entity pool: {0}")]
    Json(#[from] serde_json::Error),
}

/// Candidate names per NER category.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityPool(pub BTreeMap<String, Vec<String>>);

impl EntityPool {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PoolError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn names(&self, category: &str) -> &[String] {
        self.0.get(category).map_or(&[], Vec::as_slice)
    }
}

/// Uniform choice over hyponyms one or two levels below `synset`; a leaf
/// returns itself.
pub fn choose_hyponym<R: Rng + ?Sized>(synset: &str, lexicon: &Lexicon, rng: &mut R) -> String {
    let mut candidates = BTreeSet::new();
    for child in lexicon.hyponyms(synset) {
        candidates.insert(child.as_str());
        for grandchild in lexicon.hyponyms(child) {
            candidates.insert(grandchild.as_str());
        }
    }
    let candidates: Vec<&str> = candidates.into_iter().collect();
    candidates
        .choose(rng)
        .map_or_else(|| synset.to_string(), |s| s.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PronounCase {
    Subject,
    Object,
}

/// Subject-case pronoun for the most recently mentioned entity: "they" for
/// organizations, gendered for people with a known first name, "they" for
/// other people, "it" for anything else or an empty memory.
pub fn resolve_pronoun(memory: &StoryMemory, lexicon: &Lexicon) -> &'static str {
    let Some(entity) = memory
        .by_recency()
        .into_iter()
        .find(|b| b.category.is_some())
    else {
        return "it";
    };
    match entity.category.as_deref() {
        Some("ORG") | Some("ORGANIZATION") => "they",
        Some("PERSON") => {
            let first = entity.surface.split_whitespace().next().unwrap_or("");
            match lexicon.gender(first) {
                Gender::Masc => "he",
                Gender::Fem => "she",
                Gender::Unknown => "they",
            }
        }
        _ => "it",
    }
}

pub fn pronoun_case(subject: &str, case: PronounCase) -> &'static str {
    match (subject, case) {
        ("he", PronounCase::Subject) => "he",
        ("he", PronounCase::Object) => "him",
        ("she", PronounCase::Subject) => "she",
        ("she", PronounCase::Object) => "her",
        ("they", PronounCase::Subject) => "they",
        ("they", PronounCase::Object) => "them",
        _ => "it",
    }
}

/// Third-person singular present of a base-form verb.
pub fn third_person(verb: &str) -> String {
    match verb {
        "be" => return "is".into(),
        "have" => return "has".into(),
        _ => {}
    }
    let bytes = verb.as_bytes();
    let consonant_y = verb.len() >= 2
        && verb.ends_with('y')
        && !matches!(bytes[bytes.len() - 2], b'a' | b'e' | b'i' | b'o' | b'u');
    if consonant_y {
        format!("{}ies", &verb[..verb.len() - 1])
    } else if ["s", "sh", "ch", "x", "z", "o"].iter().any(|s| verb.ends_with(s)) {
        format!("{verb}es")
    } else {
        format!("{verb}s")
    }
}

fn wants_base_form(prev: Option<&str>) -> bool {
    prev.is_some_and(|p| pos_tag(p) == Pos::Aux || matches!(p.to_lowercase().as_str(), "not" | "n't" | "to"))
}

fn wants_subject_case(prev: Option<&str>) -> bool {
    match prev {
        None => true,
        Some(p) => matches!(pos_tag(p), Pos::Punct | Pos::Conj) || p.eq_ignore_ascii_case("that"),
    }
}

/// Fills one generalized sentence, updating the story memory.
pub fn fill_tokens<S: AsRef<str>, R: Rng + ?Sized>(
    sentence: &[S],
    memory: &mut StoryMemory,
    pool: &EntityPool,
    lexicon: &Lexicon,
    rng: &mut R,
) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(sentence.len());
    for tok in sentence {
        let tok = tok.as_ref();
        let prev = out.last().map(String::as_str);
        let filled = match GeneralToken::parse(tok).kind() {
            TokenKind::Entity => fill_entity(tok, memory, pool, rng),
            TokenKind::Synset => fill_synset(tok, memory, lexicon, rng),
            TokenKind::Pronoun => {
                let case = if wants_subject_case(prev) {
                    PronounCase::Subject
                } else {
                    PronounCase::Object
                };
                pronoun_case(resolve_pronoun(memory, lexicon), case).to_string()
            }
            TokenKind::VerbClass => {
                let base = lexicon
                    .representative_verb(tok)
                    .map(str::to_string)
                    .unwrap_or_else(|| tok.split('-').next().unwrap_or(tok).to_string());
                if wants_base_form(prev) {
                    base
                } else {
                    third_person(&base)
                }
            }
            TokenKind::Literal => tok.to_string(),
        };
        out.push(filled);
    }
    out
}

fn fill_entity<R: Rng + ?Sized>(tag: &str, memory: &mut StoryMemory, pool: &EntityPool, rng: &mut R) -> String {
    if let Some(surface) = memory.mention(tag) {
        return surface.to_string();
    }
    let category = parse_entity_tag(tag).map_or("", |(c, _)| c).to_string();
    let taken: BTreeSet<&str> = memory
        .bindings()
        .iter()
        .filter(|b| b.category.as_deref() == Some(category.as_str()))
        .map(|b| b.surface.as_str())
        .collect();
    let free: Vec<&String> = pool
        .names(&category)
        .iter()
        .filter(|n| !taken.contains(n.as_str()))
        .collect();
    let surface = match free.choose(rng) {
        Some(name) => name.to_string(),
        None => {
            log::warn!("entity pool has no unused {category} name; keeping {tag}");
            tag.to_string()
        }
    };
    memory.bind(tag, &surface, Some(&category)).to_string()
}

fn fill_synset<R: Rng + ?Sized>(synset: &str, memory: &mut StoryMemory, lexicon: &Lexicon, rng: &mut R) -> String {
    let reuse = memory
        .by_recency()
        .into_iter()
        .filter(|b| b.category.is_none())
        .find(|b| b.key == synset || lexicon.is_descendant(synset, &b.key))
        .map(|b| b.key.clone());
    if let Some(key) = reuse {
        return memory.mention(&key).expect("binding exists").to_string();
    }
    let chosen = choose_hyponym(synset, lexicon, rng);
    let surface = Lexicon::synset_surface(&chosen);
    memory.bind(synset, &surface, None).to_string()
}

/// Capitalizes the first letter of rendered text.
pub fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Fills and renders one sentence.
pub fn fill_sentence<S: AsRef<str>, R: Rng + ?Sized>(
    sentence: &[S],
    memory: &mut StoryMemory,
    pool: &EntityPool,
    lexicon: &Lexicon,
    rng: &mut R,
) -> String {
    capitalize(&render_tokens(&fill_tokens(sentence, memory, pool, lexicon, rng)))
}

/// Fills a whole story with a fresh memory; identical seeds give identical text.
pub fn fill_story<S: AsRef<str>>(sentences: &[Vec<S>], pool: &EntityPool, lexicon: &Lexicon, seed: u64) -> Vec<String> {
    let mut memory = StoryMemory::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sentences
        .iter()
        .map(|s| fill_sentence(s, &mut memory, pool, lexicon, &mut rng))
        .collect()
}
