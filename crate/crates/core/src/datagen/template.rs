use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatagenError;
use crate::grid::GridSpec;
use crate::relation::Relation;
use crate::vocab::{Category, Vocabulary};

const BUILTIN: [(&str, &str); 3] = [
    ("living_room", include_str!("../../data/templates/living_room.toml")),
    ("bedroom", include_str!("../../data/templates/bedroom.toml")),
    ("office", include_str!("../../data/templates/office.toml")),
];

/// Surface items stacked on a pool object's top face.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopSpec {
    pub choices: Vec<String>,
    #[serde(default)]
    pub min: usize,
    pub max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub key: String,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub min: usize,
    pub max: usize,
    #[serde(default)]
    pub top: Option<TopSpec>,
}

fn one() -> f64 {
    1.0
}

/// `subject relation object`, e.g. `sofa faces tv_stand`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationRule {
    pub subject: String,
    pub relation: Relation,
    pub object: String,
}

impl std::fmt::Display for RelationRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {}", self.subject, self.relation, self.object)
    }
}

fn default_yaws() -> Vec<i32> {
    vec![0, 90, 180, 270]
}

fn default_attempts() -> usize {
    200
}

/// A parameterized scene family.
///
/// Prompt and reasoning strings may use the placeholders `{adjective}`,
/// `{room}`, `{objects}`, `{relations}`, `{size}`, `{count}`, `{grid}`,
/// `{constraints}` and `{steps}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneTemplate {
    pub name: String,
    pub room: String,
    pub cell_size_m: f64,
    pub rows: usize,
    pub cols: usize,
    /// Number of objects placed on the floor grid, inclusive.
    pub count_range: (usize, usize),
    #[serde(default = "default_yaws")]
    pub yaw_choices: Vec<i32>,
    /// Restarts before a sample gives up.
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
    pub objects: Vec<PoolEntry>,
    #[serde(default)]
    pub relations: Vec<RelationRule>,
    /// Identifiers that do not belong in this room; used for semantic errors.
    #[serde(default)]
    pub incompatible: Vec<String>,
    #[serde(default)]
    pub adjectives: Vec<String>,
    pub prompts: Vec<String>,
    pub reasoning: Vec<String>,
}

impl SceneTemplate {
    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(n, _)| *n)
    }

    /// A template shipped with the crate, checked against the builtin
    /// vocabulary.
    pub fn builtin(name: &str) -> Result<Self, DatagenError> {
        let (_, src) = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| DatagenError::UnknownTemplate(name.to_string()))?;
        let t = Self::parse(src)?;
        t.check(&Vocabulary::builtin())?;
        Ok(t)
    }

    pub fn parse(src: &str) -> Result<Self, DatagenError> {
        toml::from_str(src).map_err(|e| DatagenError::InvalidTemplate(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DatagenError> {
        let src = std::fs::read_to_string(path).map_err(|e| DatagenError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&src)
    }

    /// Builtin name or path to a TOML file.
    pub fn resolve(name_or_path: &str) -> Result<Self, DatagenError> {
        if BUILTIN.iter().any(|(n, _)| *n == name_or_path) {
            Self::builtin(name_or_path)
        } else {
            Self::load(Path::new(name_or_path))
        }
    }

    pub fn grid(&self) -> Result<GridSpec, DatagenError> {
        GridSpec::new(self.cell_size_m, self.rows, self.cols).map_err(|e| DatagenError::InvalidTemplate(e.to_string()))
    }

    /// Structural checks against `vocab`. Whether the requested counts fit
    /// on the grid is only discovered while sampling.
    pub fn check(&self, vocab: &Vocabulary) -> Result<(), DatagenError> {
        let bad = |m: String| Err(DatagenError::InvalidTemplate(format!("{}: {m}", self.name)));
        self.grid()?;
        let (lo, hi) = self.count_range;
        if lo == 0 || lo > hi {
            return bad(format!("count_range ({lo}, {hi}) is empty or starts at zero"));
        }
        if self.objects.is_empty() || self.prompts.is_empty() || self.reasoning.is_empty() {
            return bad("objects, prompts and reasoning must be non-empty".into());
        }
        if self.yaw_choices.is_empty() {
            return bad("yaw_choices is empty".into());
        }
        let placeable = |key: &str, surface: bool| -> Result<(), DatagenError> {
            let e = vocab
                .by_identifier(key)
                .map_err(|e| DatagenError::InvalidTemplate(format!("{}: {e}", self.name)))?;
            let ok = match e.category {
                Category::SurfaceItem => surface,
                Category::FloorFurniture | Category::CeilingMounted => !surface,
                _ => false,
            };
            if ok {
                Ok(())
            } else {
                Err(DatagenError::InvalidTemplate(format!(
                    "{}: `{key}` ({}) cannot be placed {}",
                    self.name,
                    e.category,
                    if surface { "on a surface" } else { "on the floor" }
                )))
            }
        };
        let mut keys = BTreeSet::new();
        for o in &self.objects {
            placeable(&o.key, false)?;
            if !keys.insert(o.key.as_str()) {
                return bad(format!("`{}` appears twice in objects", o.key));
            }
            if o.min > o.max || !(o.weight > 0.0 && o.weight.is_finite()) {
                return bad(format!("`{}` has an empty count or a non-positive weight", o.key));
            }
            if let Some(top) = &o.top {
                if top.choices.is_empty() || top.min > top.max {
                    return bad(format!("`{}` has an empty top spec", o.key));
                }
                for c in &top.choices {
                    placeable(c, true)?;
                }
            }
        }
        let mins: usize = self.objects.iter().map(|o| o.min).sum();
        let maxs: usize = self.objects.iter().map(|o| o.max).sum();
        if mins > hi || maxs < lo {
            return bad(format!("object counts [{mins}, {maxs}] cannot meet count_range ({lo}, {hi})"));
        }
        for k in &self.incompatible {
            vocab
                .by_identifier(k)
                .map_err(|e| DatagenError::InvalidTemplate(format!("{}: {e}", self.name)))?;
        }
        for r in &self.relations {
            if !keys.contains(r.subject.as_str()) || !keys.contains(r.object.as_str()) || r.subject == r.object {
                return bad(format!("relation `{r}` must link two different pool objects"));
            }
        }
        self.placement_rank()?;
        Ok(())
    }

    /// Order in which pool keys are placed so that every relation object
    /// exists before its subject.
    pub(crate) fn placement_rank(&self) -> Result<BTreeMap<String, usize>, DatagenError> {
        let mut rank = BTreeMap::new();
        let mut left: Vec<&str> = self.objects.iter().map(|o| o.key.as_str()).collect();
        while !left.is_empty() {
            let ready: Vec<&str> = left
                .iter()
                .copied()
                .filter(|k| {
                    self.relations
                        .iter()
                        .filter(|r| r.subject == *k)
                        .all(|r| rank.contains_key(&r.object))
                })
                .collect();
            if ready.is_empty() {
                return Err(DatagenError::InvalidTemplate(format!(
                    "{}: relation rules form a cycle through {}",
                    self.name,
                    left.join(", ")
                )));
            }
            let next = rank.len();
            for k in &ready {
                rank.insert(k.to_string(), next);
            }
            left.retain(|k| !ready.contains(k));
        }
        Ok(rank)
    }
}
