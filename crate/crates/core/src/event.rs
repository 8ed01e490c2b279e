//! Generalized tokens and the five-slot event tuple.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Placeholder emitted for every personal pronoun.
pub const PRONOUN: &str = "<PRP>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenKind {
    /// WordNet synset id such as `event.n.01`.
    Synset,
    /// Numbered named-entity tag such as `<PERSON>0`.
    Entity,
    /// The `<PRP>` placeholder.
    Pronoun,
    /// VerbNet class id such as `send-11.1`.
    VerbClass,
    /// Anything else: function words, prepositions, unknown lemmas.
    Literal,
}

/// A token over the generalized vocabulary.
///
/// The kind is always derivable from the surface form, so only the surface is
/// serialized.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GeneralToken {
    kind: TokenKind,
    surface: String,
}

impl GeneralToken {
    /// Classifies a surface string by its shape.
    pub fn parse(surface: &str) -> Self {
        let kind = if surface == PRONOUN {
            TokenKind::Pronoun
        } else if parse_entity_tag(surface).is_some() {
            TokenKind::Entity
        } else if is_synset_id(surface) {
            TokenKind::Synset
        } else if is_verb_class_id(surface) {
            TokenKind::VerbClass
        } else {
            TokenKind::Literal
        };
        Self {
            kind,
            surface: surface.to_string(),
        }
    }

    pub fn literal(surface: impl Into<String>) -> Self {
        Self {
            kind: TokenKind::Literal,
            surface: surface.into(),
        }
    }

    pub fn pronoun() -> Self {
        Self {
            kind: TokenKind::Pronoun,
            surface: PRONOUN.to_string(),
        }
    }

    pub fn entity(category: &str, index: usize) -> Self {
        Self {
            kind: TokenKind::Entity,
            surface: format!("<{category}>{index}"),
        }
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn is_nominal(&self) -> bool {
        match self.kind {
            TokenKind::Synset => synset_pos(&self.surface) == Some('n'),
            TokenKind::Entity | TokenKind::Pronoun => true,
            _ => false,
        }
    }
}

impl fmt::Display for GeneralToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

impl Serialize for GeneralToken {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.surface)
    }
}

impl<'de> Deserialize<'de> for GeneralToken {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s.is_empty() {
            return Err(serde::de::Error::custom("empty token"));
        }
        Ok(GeneralToken::parse(&s))
    }
}

/// Splits `<CATEGORY>n` into its category and index.
pub fn parse_entity_tag(s: &str) -> Option<(&str, usize)> {
    let rest = s.strip_prefix('<')?;
    let close = rest.find('>')?;
    let category = &rest[..close];
    let digits = &rest[close + 1..];
    if category.is_empty()
        || digits.is_empty()
        || !category
            .chars()
            .all(|c| c.is_ascii_uppercase() || c == '_')
        || !digits.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    Some((category, digits.parse().ok()?))
}

/// `lemma.pos.NN` with a single-letter WordNet part of speech.
pub fn is_synset_id(s: &str) -> bool {
    let mut parts = s.rsplitn(3, '.');
    let (Some(sense), Some(pos), Some(lemma)) = (parts.next(), parts.next(), parts.next()) else {
        return false;
    };
    sense.len() == 2
        && sense.chars().all(|c| c.is_ascii_digit())
        && matches!(pos, "n" | "v" | "a" | "s" | "r")
        && !lemma.is_empty()
        && !lemma.contains(char::is_whitespace)
}

pub fn synset_pos(s: &str) -> Option<char> {
    if !is_synset_id(s) {
        return None;
    }
    s.rsplitn(3, '.').nth(1).and_then(|p| p.chars().next())
}

/// The lemma part of a synset id, with underscores turned into spaces.
pub fn synset_lemma(s: &str) -> &str {
    s.rsplitn(3, '.').nth(2).unwrap_or(s)
}

/// VerbNet ids look like `send-11.1`, `act-114-1-1`, `settle-36.1.2`.
pub fn is_verb_class_id(s: &str) -> bool {
    let Some(dash) = s.find('-') else {
        return false;
    };
    let (name, numbers) = (&s[..dash], &s[dash + 1..]);
    !name.is_empty()
        && name.chars().all(|c| c.is_ascii_lowercase() || c == '_')
        && numbers.starts_with(|c: char| c.is_ascii_digit())
        && numbers
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == '-')
        && !numbers.ends_with(['.', '-'])
}

/// Event slot names in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    S,
    V,
    O,
    P,
    M,
}

impl Slot {
    pub const ALL: [Slot; 5] = [Slot::S, Slot::V, Slot::O, Slot::P, Slot::M];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Slot::S => "s",
            Slot::V => "v",
            Slot::O => "o",
            Slot::P => "p",
            Slot::M => "m",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EventError {
    #[error("event verb slot is empty")]
    EmptyVerb,
    #[error("expected 5 event slots, got {0}")]
    Arity(usize),
}

/// ⟨subject, verb, object, preposition, modifier⟩. Only the verb is mandatory.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventTuple {
    pub s: Option<GeneralToken>,
    pub v: GeneralToken,
    pub o: Option<GeneralToken>,
    pub p: Option<GeneralToken>,
    pub m: Option<GeneralToken>,
}

impl EventTuple {
    pub fn new(
        s: Option<GeneralToken>,
        v: GeneralToken,
        o: Option<GeneralToken>,
        p: Option<GeneralToken>,
        m: Option<GeneralToken>,
    ) -> Self {
        Self { s, v, o, p, m }
    }

    /// Builds an event from five optional surface strings, `None` meaning empty.
    pub fn from_surfaces(slots: [Option<&str>; 5]) -> Result<Self, EventError> {
        let tok = |s: Option<&str>| s.filter(|s| !s.is_empty()).map(GeneralToken::parse);
        let v = tok(slots[1]).ok_or(EventError::EmptyVerb)?;
        let p = slots[3]
            .filter(|s| !s.is_empty())
            .map(GeneralToken::literal);
        Ok(Self {
            s: tok(slots[0]),
            v,
            o: tok(slots[2]),
            p,
            m: tok(slots[4]),
        })
    }

    pub fn get(&self, slot: Slot) -> Option<&GeneralToken> {
        match slot {
            Slot::S => self.s.as_ref(),
            Slot::V => Some(&self.v),
            Slot::O => self.o.as_ref(),
            Slot::P => self.p.as_ref(),
            Slot::M => self.m.as_ref(),
        }
    }

    /// Filled slots with their tokens, in canonical order.
    pub fn filled(&self) -> impl Iterator<Item = (Slot, &GeneralToken)> {
        Slot::ALL
            .into_iter()
            .filter_map(move |slot| self.get(slot).map(|t| (slot, t)))
    }

    /// Surfaces of the filled slots in canonical order (duplicates kept).
    pub fn tokens(&self) -> Vec<&str> {
        self.filled().map(|(_, t)| t.surface()).collect()
    }

    /// Distinct surfaces of the filled slots, first occurrence order.
    pub fn distinct_tokens(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::with_capacity(5);
        for t in self.tokens() {
            if !out.contains(&t) {
                out.push(t);
            }
        }
        out
    }

    pub fn slots(&self) -> [Option<&str>; 5] {
        Slot::ALL.map(|slot| self.get(slot).map(GeneralToken::surface))
    }
}

impl fmt::Display for EventTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.slots().iter().map(|s| s.unwrap_or("∅")).collect();
        write!(f, "⟨{}⟩", parts.join(", "))
    }
}

impl Serialize for EventTuple {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.slots().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EventTuple {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw: Vec<Option<String>> = Vec::deserialize(deserializer)?;
        if raw.len() != 5 {
            return Err(serde::de::Error::custom(EventError::Arity(raw.len())));
        }
        let slots = [0, 1, 2, 3, 4].map(|i| raw[i].as_deref());
        EventTuple::from_surfaces(slots).map_err(serde::de::Error::custom)
    }
}

/// Joins tokens into display text, attaching closing punctuation to the
/// preceding word.
pub fn render_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for tok in tokens {
        let tok = tok.as_ref();
        let attach = matches!(tok, "." | "," | "!" | "?" | ";" | ":" | "'s" | "n't" | "...")
            || tok.starts_with('\'') && tok.len() <= 3;
        if !out.is_empty() && !attach {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}
