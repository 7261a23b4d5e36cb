//! Object vocabulary: numeric codes and string identifiers resolved to a
//! canonical name, a placement category and a default box size.
//!
//! File format, one entry per line, `#` starts a comment line:
//!
//! ```text
//! # code  identifier        category         L     W     H
//! 1       sofa              floor_furniture  0.90  2.00  0.85
//! -       modular_shelf     surface_item     0.35  0.90  0.30
//! ```
//!
//! `-` in the code column registers an identifier-only entry. Sizes are in
//! meters; `L` is the depth along the direction the object faces.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::LookupError;
use crate::geometry::Vec3;

const BUILTIN: &str = include_str!("../data/default.vocab");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    FloorFurniture,
    SurfaceItem,
    WallMounted,
    CeilingMounted,
    Structural,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::FloorFurniture => "floor_furniture",
            Category::SurfaceItem => "surface_item",
            Category::WallMounted => "wall_mounted",
            Category::CeilingMounted => "ceiling_mounted",
            Category::Structural => "structural",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "floor_furniture" => Category::FloorFurniture,
            "surface_item" => Category::SurfaceItem,
            "wall_mounted" => Category::WallMounted,
            "ceiling_mounted" => Category::CeilingMounted,
            "structural" => Category::Structural,
            other => return Err(format!("unknown category `{other}`")),
        })
    }
}

/// A cell key as written in a program: a numeric code or an identifier.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Key {
    Code(u32),
    Ident(String),
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Key::Code(c) => write!(f, "{c}"),
            Key::Ident(s) => f.write_str(s),
        }
    }
}

impl From<u32> for Key {
    fn from(c: u32) -> Self {
        Key::Code(c)
    }
}

impl From<&str> for Key {
    fn from(s: &str) -> Self {
        Key::Ident(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub code: Option<u32>,
    pub identifier: String,
    pub category: Category,
    pub default_size: Vec3,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VocabError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate code {0}")]
    DuplicateCode(u32),
    #[error("duplicate identifier `{0}`")]
    DuplicateIdentifier(String),
    #[error("code 0 is reserved for the empty cell")]
    ReservedCode,
    #[error("entry `{0}` has an empty identifier or a non-positive size")]
    InvalidEntry(String),
    #[error("failed to read vocabulary: {0}")]
    Io(String),
}

#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    by_code: HashMap<u32, usize>,
    by_ident: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(entries: Vec<VocabEntry>) -> Result<Self, VocabError> {
        let mut vocab = Vocabulary::default();
        for e in entries {
            vocab.insert(e)?;
        }
        Ok(vocab)
    }

    /// The starter vocabulary shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("builtin vocabulary is well-formed")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, VocabError> {
        let text = std::fs::read_to_string(path).map_err(|e| VocabError::Io(e.to_string()))?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, e: VocabEntry) -> Result<(), VocabError> {
        if e.identifier.is_empty() || !e.default_size.is_finite() || !e.default_size.is_positive() {
            return Err(VocabError::InvalidEntry(e.identifier));
        }
        if let Some(code) = e.code {
            if code == 0 {
                return Err(VocabError::ReservedCode);
            }
            if self.by_code.contains_key(&code) {
                return Err(VocabError::DuplicateCode(code));
            }
        }
        if self.by_ident.contains_key(&e.identifier) {
            return Err(VocabError::DuplicateIdentifier(e.identifier));
        }
        let idx = self.entries.len();
        if let Some(code) = e.code {
            self.by_code.insert(code, idx);
        }
        self.by_ident.insert(e.identifier.clone(), idx);
        self.entries.push(e);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, VocabError> {
        let mut vocab = Vocabulary::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| VocabError::Malformed { line: n + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(bad(format!("expected 6 fields, found {}", fields.len())));
            }
            let code = match fields[0] {
                "-" => None,
                c => Some(c.parse::<u32>().map_err(|_| bad(format!("bad code `{c}`")))?),
            };
            let category = fields[2].parse::<Category>().map_err(bad)?;
            let mut dims = [0.0; 3];
            for (k, f) in fields[3..].iter().enumerate() {
                dims[k] = f.parse::<f64>().map_err(|_| bad(format!("bad size `{f}`")))?;
            }
            vocab.insert(VocabEntry {
                code,
                identifier: fields[1].to_string(),
                category,
                default_size: Vec3::new(dims[0], dims[1], dims[2]),
            })?;
        }
        Ok(vocab)
    }

    pub fn lookup(&self, key: &Key) -> Result<&VocabEntry, LookupError> {
        match key {
            Key::Code(c) => self.by_code(*c),
            Key::Ident(s) => self.by_identifier(s),
        }
    }

    pub fn by_code(&self, code: u32) -> Result<&VocabEntry, LookupError> {
        self.by_code
            .get(&code)
            .map(|&i| &self.entries[i])
            .ok_or(LookupError::UnknownCode(code))
    }

    pub fn by_identifier(&self, ident: &str) -> Result<&VocabEntry, LookupError> {
        self.by_ident
            .get(ident)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| LookupError::UnknownIdentifier(ident.to_string()))
    }

    /// The key a generator should write for this identifier: the numeric
    /// code when one exists, the identifier otherwise.
    pub fn preferred_key(&self, ident: &str) -> Result<Key, LookupError> {
        let e = self.by_identifier(ident)?;
        Ok(match e.code {
            Some(c) => Key::Code(c),
            None => Key::Ident(e.identifier.clone()),
        })
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
