//! Spatial relations between compiled objects, evaluated in the BEV plane.
//!
//! `subject REL reference`:
//!
//! * `faces`: the subject's facing direction is within 45° of the bearing
//!   from the subject to the reference.
//! * `in_front_of` / `behind`: the bearing from the reference to the
//!   subject is within 45° of the reference's facing direction (or of its
//!   opposite).
//! * `left_of` / `right_of`: the subject lies on the reference's own left
//!   (local +y) or right side, at most two cells away along either grid
//!   axis. `beside` is either of the two.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::CompiledScene;
use crate::geometry::{angle_between, OrientedBox};

const ANGLE_TOL: f64 = 1e-9;
const SIDE_CELLS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Faces,
    InFrontOf,
    Behind,
    LeftOf,
    RightOf,
    Beside,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown relation `{0}`")]
pub struct UnknownRelation(pub String);

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Faces,
        Relation::InFrontOf,
        Relation::Behind,
        Relation::LeftOf,
        Relation::RightOf,
        Relation::Beside,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Faces => "faces",
            Relation::InFrontOf => "in_front_of",
            Relation::Behind => "behind",
            Relation::LeftOf => "left_of",
            Relation::RightOf => "right_of",
            Relation::Beside => "beside",
        }
    }

    /// Verb phrase used in generated text: "the sofa faces the tv".
    pub fn phrase(self) -> &'static str {
        match self {
            Relation::Faces => "faces",
            Relation::InFrontOf => "is in front of",
            Relation::Behind => "is behind",
            Relation::LeftOf => "is to the left of",
            Relation::RightOf => "is to the right of",
            Relation::Beside => "is beside",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = UnknownRelation;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| UnknownRelation(s.to_string()))
    }
}

/// Bearing in the xy plane from `from` to `to`; `None` when the centers
/// coincide.
fn bearing(from: &OrientedBox, to: &OrientedBox) -> Option<f64> {
    let d = to.center() - from.center();
    if d.x.hypot(d.y) < 1e-12 {
        None
    } else {
        Some(d.y.atan2(d.x))
    }
}

fn within_cone(direction: f64, bearing: Option<f64>) -> bool {
    bearing.is_some_and(|b| angle_between(direction, b) <= FRAC_PI_4 + ANGLE_TOL)
}

/// Whether `subject rel reference` holds; `cell_size` bounds the distance
/// for the side relations.
pub fn relation_holds(subject: &OrientedBox, rel: Relation, reference: &OrientedBox, cell_size: f64) -> bool {
    let side = || {
        let d = subject.center() - reference.center();
        let near = d.x.abs().max(d.y.abs()) <= SIDE_CELLS * cell_size + ANGLE_TOL;
        (d.dot(reference.axis_y()), near)
    };
    match rel {
        Relation::Faces => within_cone(subject.yaw(), bearing(subject, reference)),
        Relation::InFrontOf => within_cone(reference.yaw(), bearing(reference, subject)),
        Relation::Behind => within_cone(reference.yaw() + PI, bearing(reference, subject)),
        Relation::LeftOf => {
            let (s, near) = side();
            near && s > ANGLE_TOL
        }
        Relation::RightOf => {
            let (s, near) = side();
            near && s < -ANGLE_TOL
        }
        Relation::Beside => {
            let (s, near) = side();
            near && s.abs() > ANGLE_TOL
        }
    }
}

/// True when some instance of `subject` stands in `rel` to some instance
/// of `reference` (matched by identifier).
pub fn relation_satisfied(s: &CompiledScene, subject: &str, rel: Relation, reference: &str) -> bool {
    let g = s.grid.cell_size;
    s.all_placements()
        .filter(|a| a.identifier == subject)
        .any(|a| {
            s.all_placements()
                .filter(|b| b.identifier == reference && b.id != a.id)
                .any(|b| relation_holds(&a.bbox, rel, &b.bbox, g))
        })
}
