//! Per-story entity memory shared by eventification (surface → tag) and slot
//! filling (tag or synset → surface).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::event::GeneralToken;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    /// Entity tag or synset id.
    pub key: String,
    pub surface: String,
    /// NER category for entity tags; `None` for synsets.
    pub category: Option<String>,
    /// Strictly increasing story-level mention positions.
    pub mentions: Vec<usize>,
}

/// One memory per story. Mutation needs exclusive access.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StoryMemory {
    bindings: Vec<Binding>,
    by_key: BTreeMap<String, usize>,
    by_surface: BTreeMap<(String, String), usize>,
    per_category: BTreeMap<String, usize>,
    clock: usize,
}

impl StoryMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the tag already bound to `surface`, or mints the next
    /// `<CATEGORY>n` for this story.
    pub fn tag_entity(&mut self, surface: &str, category: &str) -> GeneralToken {
        let norm = (category.to_string(), normalize_surface(surface));
        if let Some(&idx) = self.by_surface.get(&norm) {
            let key = self.bindings[idx].key.clone();
            self.touch(idx);
            return GeneralToken::parse(&key);
        }
        let n = self.per_category.entry(category.to_string()).or_insert(0);
        let tag = GeneralToken::entity(category, *n);
        *n += 1;
        let idx = self.insert(tag.surface(), surface, Some(category));
        self.by_surface.insert(norm, idx);
        tag
    }

    /// Binds `key` to `surface` unless it is already bound, and records a
    /// mention either way. Returns the bound surface.
    pub fn bind(&mut self, key: &str, surface: &str, category: Option<&str>) -> &str {
        let idx = match self.by_key.get(key) {
            Some(&idx) => {
                self.touch(idx);
                idx
            }
            None => self.insert(key, surface, category),
        };
        &self.bindings[idx].surface
    }

    /// Records another mention of an existing binding.
    pub fn mention(&mut self, key: &str) -> Option<&str> {
        let idx = *self.by_key.get(key)?;
        self.touch(idx);
        Some(&self.bindings[idx].surface)
    }

    pub fn lookup(&self, key: &str) -> Option<&Binding> {
        self.by_key.get(key).map(|&i| &self.bindings[i])
    }

    pub fn bindings(&self) -> &[Binding] {
        &self.bindings
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Binding with the latest mention.
    pub fn most_recent(&self) -> Option<&Binding> {
        self.bindings
            .iter()
            .max_by_key(|b| b.mentions.last().copied().unwrap_or(0))
    }

    /// Bindings ordered most-recent first.
    pub fn by_recency(&self) -> Vec<&Binding> {
        let mut out: Vec<&Binding> = self.bindings.iter().collect();
        out.sort_by(|a, b| b.mentions.last().cmp(&a.mentions.last()));
        out
    }

    /// Number of distinct entities of `category` seen so far.
    pub fn category_count(&self, category: &str) -> usize {
        self.per_category.get(category).copied().unwrap_or(0)
    }

    fn insert(&mut self, key: &str, surface: &str, category: Option<&str>) -> usize {
        let idx = self.bindings.len();
        self.clock += 1;
        self.bindings.push(Binding {
            key: key.to_string(),
            surface: surface.to_string(),
            category: category.map(str::to_string),
            mentions: vec![self.clock],
        });
        self.by_key.insert(key.to_string(), idx);
        if let Some(cat) = category {
            if let Some((tag_cat, n)) = crate::event::parse_entity_tag(key) {
                let next = self.per_category.entry(tag_cat.to_string()).or_insert(0);
                *next = (*next).max(n + 1);
            }
            self.by_surface
                .entry((cat.to_string(), normalize_surface(surface)))
                .or_insert(idx);
        }
        idx
    }

    fn touch(&mut self, idx: usize) {
        self.clock += 1;
        self.bindings[idx].mentions.push(self.clock);
    }
}

fn normalize_surface(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}
