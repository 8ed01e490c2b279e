//! WordNet/VerbNet views and the name-gender table, loaded from one JSON snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::event::{is_synset_id, synset_lemma};

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("unknown lemma {lemma:?} ({pos})")]
    UnknownLemma { lemma: String, pos: char },
    #[error("no verb class contains {0:?}")]
    UnknownVerb(String),
    #[error("hypernym cycle through {0}")]
    Cycle(String),
    #[error("hyponym edge {child} of {parent} has no matching hypernym edge")]
    Dangling { parent: String, child: String },
    #[error("malformed synset id {0:?}")]
    BadSynset(String),
    #[error("verb class {class} lists frame {frame:?}: {reason}")]
    BadFrame {
        class: String,
        frame: String,
        reason: String,
    },
    #[error("reading lexicon: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing lexicon: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Masc,
    Fem,
    Unknown,
}

/// On-disk layout of the snapshot. Keys mirror the lexicon's fields.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LexiconSnapshot {
    /// child synset → parent synset
    #[serde(default)]
    pub hypernyms: BTreeMap<String, String>,
    /// parent synset → child synsets
    #[serde(default)]
    pub hyponyms: BTreeMap<String, Vec<String>>,
    /// pos letter → lemma → first-sense synset
    #[serde(default)]
    pub lemma_index: BTreeMap<String, BTreeMap<String, String>>,
    /// verb lemma → VerbNet class ids
    #[serde(default)]
    pub verb_classes: BTreeMap<String, Vec<String>>,
    /// VerbNet class id → frame strings such as "NP V NP PP"
    #[serde(default)]
    pub frames: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub gender_table: BTreeMap<String, Gender>,
}

/// Immutable after load; share freely across threads.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    hypernyms: BTreeMap<String, String>,
    hyponyms: BTreeMap<String, Vec<String>>,
    lemma_index: BTreeMap<(String, char), String>,
    verb_index: BTreeMap<String, Vec<String>>,
    class_members: BTreeMap<String, Vec<String>>,
    frames: BTreeMap<String, Vec<Vec<crate::templater::PhraseSymbol>>>,
    gender_table: BTreeMap<String, Gender>,
}

impl Lexicon {
    pub fn from_snapshot(snap: LexiconSnapshot) -> Result<Self, LexiconError> {
        for (child, parent) in &snap.hypernyms {
            for id in [child, parent] {
                if !is_synset_id(id) {
                    return Err(LexiconError::BadSynset(id.clone()));
                }
            }
        }
        // acyclic: every walk up must terminate within |edges| steps
        for start in snap.hypernyms.keys() {
            let mut cur = start;
            let mut steps = 0;
            while let Some(next) = snap.hypernyms.get(cur) {
                steps += 1;
                if steps > snap.hypernyms.len() {
                    return Err(LexiconError::Cycle(start.clone()));
                }
                cur = next;
            }
        }
        for (parent, children) in &snap.hyponyms {
            for child in children {
                if snap.hypernyms.get(child) != Some(parent) {
                    return Err(LexiconError::Dangling {
                        parent: parent.clone(),
                        child: child.clone(),
                    });
                }
            }
        }
        let mut lemma_index = BTreeMap::new();
        for (pos, lemmas) in snap.lemma_index {
            let pos_char = pos.chars().next().unwrap_or('n');
            for (lemma, synset) in lemmas {
                lemma_index.insert((lemma.to_lowercase(), pos_char), synset);
            }
        }
        let mut verb_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut class_members: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (lemma, mut classes) in snap.verb_classes {
            classes.sort();
            classes.dedup();
            for class in &classes {
                class_members
                    .entry(class.clone())
                    .or_default()
                    .push(lemma.clone());
            }
            verb_index.insert(lemma.to_lowercase(), classes);
        }
        let mut frames = BTreeMap::new();
        for (class, specs) in snap.frames {
            let mut parsed = Vec::with_capacity(specs.len());
            for spec in specs {
                let frame = crate::templater::parse_frame(&spec).map_err(|reason| {
                    LexiconError::BadFrame {
                        class: class.clone(),
                        frame: spec.clone(),
                        reason,
                    }
                })?;
                parsed.push(frame);
            }
            frames.insert(class, parsed);
        }
        Ok(Self {
            hypernyms: snap.hypernyms,
            hyponyms: snap.hyponyms,
            lemma_index,
            verb_index,
            class_members,
            frames,
            gender_table: snap
                .gender_table
                .into_iter()
                .map(|(k, v)| (k.to_lowercase(), v))
                .collect(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path)?;
        let snap: LexiconSnapshot = serde_json::from_str(&text)?;
        Self::from_snapshot(snap)
    }

    pub fn first_sense(&self, lemma: &str, pos: char) -> Option<&str> {
        let key = lemma.to_lowercase().replace(' ', "_");
        self.lemma_index.get(&(key, pos)).map(String::as_str)
    }

    pub fn hypernym(&self, synset: &str) -> Option<&str> {
        self.hypernyms.get(synset).map(String::as_str)
    }

    pub fn hyponyms(&self, synset: &str) -> &[String] {
        self.hyponyms.get(synset).map_or(&[], Vec::as_slice)
    }

    pub fn contains_synset(&self, synset: &str) -> bool {
        self.hypernyms.contains_key(synset)
            || self.hyponyms.contains_key(synset)
            || self.lemma_index.values().any(|s| s == synset)
    }

    /// True when `ancestor` is reachable from `synset` by one or more hypernym hops.
    pub fn is_descendant(&self, synset: &str, ancestor: &str) -> bool {
        let mut cur = synset;
        while let Some(parent) = self.hypernym(cur) {
            if parent == ancestor {
                return true;
            }
            cur = parent;
        }
        false
    }

    /// Two hypernym hops above the first sense, clamped at the root.
    pub fn generalize_noun(&self, lemma: &str) -> Result<String, LexiconError> {
        let start = self
            .first_sense(lemma, 'n')
            .ok_or_else(|| LexiconError::UnknownLemma {
                lemma: lemma.to_string(),
                pos: 'n',
            })?;
        let mut cur = start;
        for _ in 0..2 {
            match self.hypernym(cur) {
                Some(parent) => cur = parent,
                None => break,
            }
        }
        Ok(cur.to_string())
    }

    /// Lexicographically first class containing the verb. Inflected forms are
    /// reduced with a small suffix stripper when the form itself is not indexed.
    pub fn classify_verb(&self, verb: &str) -> Result<String, LexiconError> {
        let verb = verb.to_lowercase();
        for candidate in stem_candidates(&verb) {
            if let Some(first) = self.verb_index.get(&candidate).and_then(|c| c.first()) {
                return Ok(first.clone());
            }
        }
        Err(LexiconError::UnknownVerb(verb))
    }

    pub fn verb_classes(&self, lemma: &str) -> &[String] {
        self.verb_index
            .get(&lemma.to_lowercase())
            .map_or(&[], Vec::as_slice)
    }

    /// Member verb used to realize a class: the class-name stem when it is a
    /// member, else the alphabetically first member.
    pub fn representative_verb(&self, class: &str) -> Option<&str> {
        let members = self.class_members.get(class)?;
        let stem = class.split('-').next().unwrap_or(class);
        members
            .iter()
            .find(|m| m.as_str() == stem)
            .or_else(|| members.first())
            .map(String::as_str)
    }

    pub fn frames(&self, class: &str) -> &[Vec<crate::templater::PhraseSymbol>] {
        self.frames.get(class).map_or(&[], Vec::as_slice)
    }

    pub fn gender(&self, first_name: &str) -> Gender {
        self.gender_table
            .get(&first_name.to_lowercase())
            .copied()
            .unwrap_or(Gender::Unknown)
    }

    pub fn set_gender_table(&mut self, table: BTreeMap<String, Gender>) {
        self.gender_table = table
            .into_iter()
            .map(|(k, v)| (k.to_lowercase(), v))
            .collect();
    }

    pub fn synset_surface(synset: &str) -> String {
        synset_lemma(synset).replace('_', " ")
    }

    /// Every synset named anywhere in the snapshot.
    pub fn synsets(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for (c, p) in &self.hypernyms {
            out.insert(c.as_str());
            out.insert(p.as_str());
        }
        out.extend(self.lemma_index.values().map(String::as_str));
        out
    }
}

/// Candidate base forms for an inflected verb, most literal first.
pub fn stem_candidates(word: &str) -> Vec<String> {
    let mut out = vec![word.to_string()];
    let mut push = |s: String| {
        if !s.is_empty() && !out.contains(&s) {
            out.push(s);
        }
    };
    if let Some(stem) = word.strip_suffix("ies") {
        push(format!("{stem}y"));
    }
    if let Some(stem) = word.strip_suffix("es") {
        push(stem.to_string());
    }
    if let Some(stem) = word.strip_suffix('s') {
        push(stem.to_string());
    }
    if let Some(stem) = word.strip_suffix("ied") {
        push(format!("{stem}y"));
    }
    if let Some(stem) = word.strip_suffix("ed") {
        push(format!("{stem}e"));
        push(stem.to_string());
        if let Some(undoubled) = undouble(stem) {
            push(undoubled);
        }
    }
    if let Some(stem) = word.strip_suffix("ing") {
        push(stem.to_string());
        push(format!("{stem}e"));
        if let Some(undoubled) = undouble(stem) {
            push(undoubled);
        }
    }
    out
}

fn undouble(stem: &str) -> Option<String> {
    let bytes = stem.as_bytes();
    let n = bytes.len();
    (n >= 2 && bytes[n - 1] == bytes[n - 2]).then(|| stem[..n - 1].to_string())
}

/// Share of census occurrences a gender needs before a name counts as that gender.
pub const GENDER_THRESHOLD: f64 = 0.8;

/// Builds a name → gender table from census rows of `name,gender,count`.
/// A name is masc/fem when at least `threshold` of its mass carries that gender.
pub fn gender_table_from_census<R: std::io::BufRead>(
    reader: R,
    threshold: f64,
) -> Result<BTreeMap<String, Gender>, std::io::Error> {
    let mut mass: BTreeMap<String, (f64, f64, f64)> = BTreeMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            continue;
        }
        let Ok(count) = fields[2].parse::<f64>() else {
            if lineno == 0 {
                continue; // header
            }
            log::warn!("gender table line {}: bad count {:?}", lineno + 1, fields[2]);
            continue;
        };
        let entry = mass.entry(fields[0].to_lowercase()).or_default();
        match fields[1].to_ascii_lowercase().as_str() {
            "m" | "male" | "masc" => entry.0 += count,
            "f" | "female" | "fem" => entry.1 += count,
            _ => entry.2 += count,
        }
    }
    Ok(mass
        .into_iter()
        .map(|(name, (m, f, other))| {
            let total = m + f + other;
            let gender = if total > 0.0 && m / total >= threshold {
                Gender::Masc
            } else if total > 0.0 && f / total >= threshold {
                Gender::Fem
            } else {
                Gender::Unknown
            };
            (name, gender)
        })
        .collect())
}
