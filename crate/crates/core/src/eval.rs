//! Checklist evaluation over compiled scenes.
//!
//! A checklist is a list of atomic checks; its score is the fraction that
//! hold. Multi-turn sessions accumulate checks across turns so that objects
//! lost in a later turn lower the later score.
//!
//! Checklist JSON:
//!
//! ```json
//! {
//!   "turn": 1,
//!   "checks": [
//!     {"id": "sofa", "kind": "exist", "subject": "sofa"},
//!     {"kind": "spatial_relation", "subject": "sofa", "relation": "faces", "object": "tv_stand"},
//!     {"kind": "attribute_size", "subject": "bed", "params": {"min_l": 1.8, "max_l": 2.2}},
//!     {"kind": "hierarchy_support", "subject": "vase", "object": "side_table"}
//!   ],
//!   "drops": []
//! }
//! ```

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::{CompiledScene, Placement};
use crate::relation::{relation_satisfied, Relation};
use crate::syntax::Face;
use crate::vocab::Category;

const DEFAULT_SUPPORT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Exist,
    AttributeSize,
    SpatialRelation,
    HierarchySupport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicCheck {
    /// Needed to drop or replace the check in a later turn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kind: CheckKind,
    pub subject: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    /// Size bounds `min_l`, `max_l`, `min_w`, `max_w`, `min_h`, `max_h`;
    /// `min_count` for existence; `tol` for support.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

impl AtomicCheck {
    pub fn new(kind: CheckKind, subject: &str) -> Self {
        AtomicCheck {
            id: None,
            kind,
            subject: subject.to_string(),
            object: None,
            relation: None,
            params: BTreeMap::new(),
            category: None,
        }
    }

    pub fn exist(subject: &str) -> Self {
        Self::new(CheckKind::Exist, subject)
    }

    pub fn relation(subject: &str, rel: &str, object: &str) -> Self {
        AtomicCheck {
            object: Some(object.to_string()),
            relation: Some(rel.to_string()),
            ..Self::new(CheckKind::SpatialRelation, subject)
        }
    }

    pub fn support(subject: &str, object: &str) -> Self {
        AtomicCheck {
            object: Some(object.to_string()),
            ..Self::new(CheckKind::HierarchySupport, subject)
        }
    }

    pub fn with_id(mut self, id: &str) -> Self {
        self.id = Some(id.to_string());
        self
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Checklist {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn: Option<u32>,
    pub checks: Vec<AtomicCheck>,
    /// Ids of earlier checks that no longer apply from this turn on.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drops: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("check {index}: {reason}")]
    MalformedCheck { index: usize, reason: String },
    #[error("checklist has no checks")]
    EmptyChecklist,
    #[error("{scenes} scenes but {checklists} checklists")]
    LengthMismatch { scenes: usize, checklists: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub check: AtomicCheck,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrfrResult {
    pub ratio: f64,
    pub satisfied: usize,
    pub total: usize,
    pub per_check: Vec<CheckVerdict>,
}

fn matches(p: &Placement, c: &AtomicCheck) -> bool {
    p.identifier == c.subject && c.category.is_none_or(|cat| p.category == cat)
}

/// Gap between a child and the face of its parent it is anchored on.
fn support_gap(child: &Placement, parent: &Placement) -> Option<f64> {
    let (c, p) = (&child.bbox, &parent.bbox);
    match child.source.face? {
        Face::Top => Some(c.bottom() - p.top()),
        Face::Bottom => Some(p.bottom() - c.top()),
        face => {
            // the child's back face lies on the parent's face plane
            let back = c.center() - c.axis_x() * (c.size().x / 2.0);
            let local = (back - p.center()).rotate_z(-p.yaw());
            let h = p.half_extents();
            Some(match face {
                Face::Front | Face::Back => local.x.abs() - h.x,
                _ => local.y.abs() - h.y,
            })
        }
    }
}

fn check_shape(index: usize, c: &AtomicCheck) -> Result<(), EvalError> {
    let bad = |reason: &str| {
        Err(EvalError::MalformedCheck {
            index,
            reason: reason.to_string(),
        })
    };
    let needs_object = matches!(c.kind, CheckKind::SpatialRelation | CheckKind::HierarchySupport);
    if needs_object != c.object.is_some() {
        return bad(if needs_object { "missing `object`" } else { "unexpected `object`" });
    }
    if (c.kind == CheckKind::SpatialRelation) != c.relation.is_some() {
        return bad("`relation` is required for, and only for, spatial_relation checks");
    }
    Ok(())
}

pub fn evaluate_check(s: &CompiledScene, c: &AtomicCheck) -> Result<bool, EvalError> {
    check_shape(0, c)?;
    Ok(match c.kind {
        CheckKind::Exist => {
            let min = c.params.get("min_count").copied().unwrap_or(1.0);
            let objects = s.all_placements().filter(|p| matches(p, c)).count();
            let openings = s.openings.iter().filter(|o| o.kind.as_str() == c.subject).count();
            (objects + openings) as f64 >= min
        }
        CheckKind::AttributeSize => {
            let bound = |k: &str, default: f64| c.params.get(k).copied().unwrap_or(default);
            s.all_placements().filter(|p| matches(p, c)).any(|p| {
                let size = p.bbox.size().to_array();
                ["l", "w", "h"].iter().zip(size).all(|(axis, v)| {
                    v >= bound(&format!("min_{axis}"), f64::NEG_INFINITY) - 1e-9
                        && v <= bound(&format!("max_{axis}"), f64::INFINITY) + 1e-9
                })
            })
        }
        CheckKind::SpatialRelation => {
            let name = c.relation.as_deref().unwrap_or_default();
            let rel: Relation = name.parse().map_err(|_| EvalError::UnknownRelation(name.to_string()))?;
            relation_satisfied(s, &c.subject, rel, c.object.as_deref().unwrap_or_default())
        }
        CheckKind::HierarchySupport => {
            let tol = c.params.get("tol").copied().unwrap_or(DEFAULT_SUPPORT_TOL);
            let by_id: HashMap<&str, &Placement> = s.all_placements().map(|p| (p.id.as_str(), p)).collect();
            let object = c.object.as_deref().unwrap_or_default();
            s.all_placements().filter(|p| matches(p, c)).any(|p| {
                p.parent
                    .as_deref()
                    .and_then(|id| by_id.get(id))
                    .filter(|q| q.identifier == object)
                    .and_then(|q| support_gap(p, q))
                    .is_some_and(|gap| gap.abs() <= tol)
            })
        }
    })
}

fn score(s: &CompiledScene, checks: &[AtomicCheck]) -> Result<DrfrResult, EvalError> {
    if checks.is_empty() {
        return Err(EvalError::EmptyChecklist);
    }
    for (k, c) in checks.iter().enumerate() {
        check_shape(k, c)?;
    }
    let per_check = checks
        .iter()
        .map(|c| {
            Ok(CheckVerdict {
                check: c.clone(),
                satisfied: evaluate_check(s, c)?,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let satisfied = per_check.iter().filter(|v| v.satisfied).count();
    Ok(DrfrResult {
        ratio: satisfied as f64 / checks.len() as f64,
        satisfied,
        total: checks.len(),
        per_check,
    })
}

/// Satisfied checks over total checks.
pub fn evaluate_drfr(s: &CompiledScene, cl: &Checklist) -> Result<DrfrResult, EvalError> {
    score(s, &cl.checks)
}

/// Scores turn `t` against every check introduced in turns `1..=t` that has
/// not been dropped. A check whose id reappears replaces the earlier one.
pub fn evaluate_cumulative(scenes: &[CompiledScene], checklists: &[Checklist]) -> Result<Vec<DrfrResult>, EvalError> {
    if scenes.len() != checklists.len() {
        return Err(EvalError::LengthMismatch {
            scenes: scenes.len(),
            checklists: checklists.len(),
        });
    }
    let mut active: Vec<AtomicCheck> = Vec::new();
    let mut out = Vec::with_capacity(scenes.len());
    for (s, cl) in scenes.iter().zip(checklists) {
        active.retain(|c| c.id.as_ref().is_none_or(|id| !cl.drops.contains(id)));
        for c in &cl.checks {
            match c.id.as_ref().and_then(|id| active.iter().position(|a| a.id.as_ref() == Some(id))) {
                Some(k) => active[k] = c.clone(),
                None => active.push(c.clone()),
            }
        }
        out.push(score(s, &active)?);
    }
    Ok(out)
}
