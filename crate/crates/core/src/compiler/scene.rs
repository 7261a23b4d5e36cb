use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::OrientedBox;
use crate::grid::GridSpec;
use crate::syntax::Face;
use crate::vocab::Category;

/// Where a placement came from in the program text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub block: String,
    pub row: usize,
    pub col: usize,
    /// 0 for root cells, parent depth + 1 for sub-layout children.
    pub depth: usize,
    /// Face of the parent the block is anchored on; `None` at the root.
    pub face: Option<Face>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub id: String,
    pub identifier: String,
    pub category: Category,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub parent: Option<String>,
    pub source: Source,
    /// Root grid cell of the chain this placement belongs to.
    pub cell: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpeningKind {
    Door,
    Window,
}

impl OpeningKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OpeningKind::Door => "door",
            OpeningKind::Window => "window",
        }
    }
}

impl fmt::Display for OpeningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A door or window: the volume cut out of its wall. Openings are records,
/// never collision bodies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Opening {
    pub id: String,
    pub kind: OpeningKind,
    /// Id of the wall run the opening belongs to.
    pub wall: String,
    pub cell: (usize, usize),
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub sill: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompiledScene {
    pub grid: GridSpec,
    /// Height of the ceiling plane used for ceiling-mounted objects.
    pub ceiling_height: f64,
    /// Walls and the ceiling slab.
    pub structural: Vec<Placement>,
    pub openings: Vec<Opening>,
    pub placements: Vec<Placement>,
    /// SHA-256 of the canonical program text, hex encoded.
    pub source_hash: String,
    pub warnings: Vec<String>,
}

impl CompiledScene {
    pub fn all_placements(&self) -> impl Iterator<Item = &Placement> {
        self.structural.iter().chain(self.placements.iter())
    }

    pub fn find(&self, id: &str) -> Option<&Placement> {
        self.all_placements().find(|p| p.id == id)
    }

    /// True when `ancestor` is on the parent chain of `id`.
    pub fn is_ancestor(&self, ancestor: &str, id: &str) -> bool {
        let parents: HashMap<&str, Option<&str>> = self
            .all_placements()
            .map(|p| (p.id.as_str(), p.parent.as_deref()))
            .collect();
        let mut cur = parents.get(id).copied().flatten();
        while let Some(p) = cur {
            if p == ancestor {
                return true;
            }
            cur = parents.get(p).copied().flatten();
        }
        false
    }

    /// Combines a furniture scene with the shell it stands in. The shell's
    /// walls, openings and wall mounts come first; furniture ids are
    /// renumbered so that ids stay unique.
    pub fn with_building(&self, building: &CompiledScene) -> CompiledScene {
        let mut counter = IdCounter::default();
        let mut out = CompiledScene {
            grid: self.grid,
            ceiling_height: building.ceiling_height,
            structural: Vec::new(),
            openings: building.openings.clone(),
            placements: Vec::new(),
            source_hash: self.source_hash.clone(),
            warnings: building.warnings.iter().chain(&self.warnings).cloned().collect(),
        };
        for p in &building.structural {
            counter.observe(&p.identifier);
            out.structural.push(p.clone());
        }
        for p in &building.placements {
            counter.observe(&p.identifier);
            out.placements.push(p.clone());
        }
        let mut renamed: HashMap<String, String> = HashMap::new();
        for p in &self.placements {
            let mut q = p.clone();
            q.id = counter.next(&p.identifier);
            renamed.insert(p.id.clone(), q.id.clone());
            q.parent = p.parent.as_ref().map(|x| renamed.get(x).cloned().unwrap_or_else(|| x.clone()));
            out.placements.push(q);
        }
        out
    }
}

/// Hands out `<identifier>_<ordinal>` ids.
#[derive(Debug, Default)]
pub(crate) struct IdCounter {
    next: HashMap<String, usize>,
}

impl IdCounter {
    pub fn next(&mut self, identifier: &str) -> String {
        let n = self.next.entry(identifier.to_string()).or_insert(0);
        let id = format!("{identifier}_{n}");
        *n += 1;
        id
    }

    fn observe(&mut self, identifier: &str) {
        *self.next.entry(identifier.to_string()).or_insert(0) += 1;
    }
}
