//! Collision, support and bounds checks over compiled scenes.
//!
//! The validator only reports; it never moves anything.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::compiler::{CompiledScene, Placement};
use crate::geometry::OrientedBox;
use crate::llmslb::BuildingProgram;
use crate::syntax::Face;
use crate::vocab::Category;

pub const DEFAULT_EPS: f64 = 1e-6;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    /// Overlap below which touching boxes do not collide, in meters.
    pub eps: f64,
    /// Allowed support gap, in meters.
    pub tol: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            eps: DEFAULT_EPS,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionDiagnostic {
    pub a_id: String,
    pub b_id: String,
    pub a_cell: (usize, usize),
    pub b_cell: (usize, usize),
    pub penetration_depth_m: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportDiagnostic {
    pub id: String,
    pub cell: (usize, usize),
    /// Signed distance from the supporting plane; positive means floating.
    pub gap_m: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsDiagnostic {
    pub id: String,
    pub cell: (usize, usize),
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub collisions: Vec<CollisionDiagnostic>,
    pub support_failures: Vec<SupportDiagnostic>,
    pub bounds_violations: Vec<BoundsDiagnostic>,
    pub warnings: Vec<String>,
    pub cr_obj_percent: f64,
    pub passed: bool,
}

impl ValidationReport {
    /// One line per finding, then a summary line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.collisions {
            writeln!(out, "collision: {} (depth {:.3} m)", c.message, c.penetration_depth_m).unwrap();
        }
        for s in &self.support_failures {
            writeln!(out, "support: {}", s.message).unwrap();
        }
        for b in &self.bounds_violations {
            writeln!(out, "bounds: {}", b.message).unwrap();
        }
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        writeln!(
            out,
            "{} (CR_obj {:.1}%)",
            if self.passed { "passed" } else { "failed" },
            self.cr_obj_percent
        )
        .unwrap();
        out
    }
}

/// Separating-axis test for two yaw-only boxes. The candidate axes are z
/// and the four horizontal face normals. Returns the smallest overlap over
/// those axes when every overlap exceeds `eps`; touching faces do not
/// collide.
pub fn obb_intersect(a: &OrientedBox, b: &OrientedBox, eps: f64) -> Option<f64> {
    let d = b.center() - a.center();
    let (ha, hb) = (a.half_extents(), b.half_extents());
    let mut depth = ha.z + hb.z - d.z.abs();
    if depth <= eps {
        return None;
    }
    for axis in [a.axis_x(), a.axis_y(), b.axis_x(), b.axis_y()] {
        let overlap = a.projected_radius_xy(axis) + b.projected_radius_xy(axis) - d.dot(axis).abs();
        if overlap <= eps {
            return None;
        }
        depth = depth.min(overlap);
    }
    Some(depth)
}

fn ancestors(s: &CompiledScene) -> HashMap<&str, HashSet<&str>> {
    let parent: HashMap<&str, Option<&str>> = s
        .all_placements()
        .map(|p| (p.id.as_str(), p.parent.as_deref()))
        .collect();
    parent
        .keys()
        .map(|&id| {
            let mut set = HashSet::new();
            let mut cur = parent.get(id).copied().flatten();
            while let Some(p) = cur {
                if !set.insert(p) {
                    break;
                }
                cur = parent.get(p).copied().flatten();
            }
            (id, set)
        })
        .collect()
}

/// Every overlapping pair except ancestor/descendant pairs and pairs of
/// structural elements, sorted by `(a_id, b_id)` with `a_id < b_id`.
pub fn check_collisions(s: &CompiledScene, eps: f64) -> Vec<CollisionDiagnostic> {
    let all: Vec<&Placement> = s.all_placements().collect();
    let anc = ancestors(s);
    let related = |a: &str, b: &str| anc[a].contains(b) || anc[b].contains(a);
    let mut out = Vec::new();
    for (k, p) in all.iter().enumerate() {
        for q in &all[k + 1..] {
            if p.category == Category::Structural && q.category == Category::Structural {
                continue;
            }
            if related(&p.id, &q.id) {
                continue;
            }
            if let Some(depth) = obb_intersect(&p.bbox, &q.bbox, eps) {
                let (a, b) = if p.id <= q.id { (p, q) } else { (q, p) };
                out.push(CollisionDiagnostic {
                    a_id: a.id.clone(),
                    b_id: b.id.clone(),
                    a_cell: a.cell,
                    b_cell: b.cell,
                    penetration_depth_m: depth,
                    message: format!("{} overlaps with {} at position ({},{})", a.id, b.id, a.cell.0, a.cell.1),
                });
            }
        }
    }
    out.sort_by(|x, y| (&x.a_id, &x.b_id).cmp(&(&y.a_id, &y.b_id)));
    out
}

/// Root objects must stand on the floor (ceiling-mounted ones must touch
/// the ceiling plane); children on a `top` face must rest on the parent's
/// top and children on a `bottom` face must hang from its underside.
pub fn check_support(s: &CompiledScene, tol: f64) -> Vec<SupportDiagnostic> {
    let by_id: HashMap<&str, &Placement> = s.all_placements().map(|p| (p.id.as_str(), p)).collect();
    let mut out = Vec::new();
    for p in &s.placements {
        let gap = match (&p.parent, p.source.face) {
            (None, _) if p.category == Category::CeilingMounted => s.ceiling_height - p.bbox.top(),
            (None, _) => p.bbox.bottom(),
            (Some(parent), Some(Face::Top)) => match by_id.get(parent.as_str()) {
                Some(q) => p.bbox.bottom() - q.bbox.top(),
                None => continue,
            },
            (Some(parent), Some(Face::Bottom)) => match by_id.get(parent.as_str()) {
                Some(q) => q.bbox.bottom() - p.bbox.top(),
                None => continue,
            },
            _ => continue,
        };
        if gap.abs() > tol {
            let what = if gap > 0.0 { "floating" } else { "sinking" };
            out.push(SupportDiagnostic {
                id: p.id.clone(),
                cell: p.cell,
                gap_m: gap,
                message: format!(
                    "{} is {what} {:.3} m from its support at position ({},{})",
                    p.id,
                    gap.abs(),
                    p.cell.0,
                    p.cell.1
                ),
            });
        }
    }
    out
}

/// Region objects must stay inside.
#[derive(Clone, Debug, PartialEq)]
pub enum Envelope {
    /// `(min_x, min_y, max_x, max_y)`.
    Rect(f64, f64, f64, f64),
    /// Grid cells of size `cell_size`; `allowed[i][j]` marks usable cells.
    Cells { cell_size: f64, allowed: Vec<Vec<bool>> },
}

impl Envelope {
    /// Floor of the scene grid.
    pub fn floor(s: &CompiledScene) -> Envelope {
        let (a, b, c, d) = s.grid.floor_rect();
        Envelope::Rect(a, b, c, d)
    }

    /// Floor of the given extent, starting at the outer edge of cell (0, 0).
    pub fn floor_extent(s: &CompiledScene, extent: (f64, f64)) -> Envelope {
        let h = s.grid.cell_size / 2.0;
        Envelope::Rect(-h, -h, extent.0 - h, extent.1 - h)
    }

    /// Wall cells and everything they enclose.
    pub fn building(b: &BuildingProgram) -> Envelope {
        let ext = b.exterior_mask();
        let g = b.grid();
        let allowed = (0..g.rows)
            .map(|i| (0..g.cols).map(|j| !ext[i + 1][j + 1]).collect())
            .collect();
        Envelope::Cells {
            cell_size: g.cell_size,
            allowed,
        }
    }

    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        match self {
            Envelope::Rect(x0, y0, x1, y1) => x >= x0 - tol && x <= x1 + tol && y >= y0 - tol && y <= y1 + tol,
            Envelope::Cells { cell_size: g, allowed } => {
                let range = |v: f64| {
                    let lo = ((v - tol) / g + 0.5).floor();
                    let hi = ((v + tol) / g + 0.5).floor();
                    (lo as i64, hi as i64)
                };
                let (i0, i1) = range(x);
                let (j0, j1) = range(y);
                (i0..=i1).any(|i| {
                    (j0..=j1).any(|j| {
                        i >= 0
                            && j >= 0
                            && allowed
                                .get(i as usize)
                                .and_then(|r| r.get(j as usize))
                                .copied()
                                .unwrap_or(false)
                    })
                })
            }
        }
    }
}

/// Every non-structural placement whose footprint corners leave the
/// envelope.
pub fn check_bounds(s: &CompiledScene, envelope: &Envelope, tol: f64) -> Vec<BoundsDiagnostic> {
    s.placements
        .iter()
        .filter(|p| p.category != Category::Structural)
        .filter(|p| p.bbox.footprint().iter().any(|&(x, y)| !envelope.contains(x, y, tol)))
        .map(|p| BoundsDiagnostic {
            id: p.id.clone(),
            cell: p.cell,
            message: format!("{} extends outside the room at position ({},{})", p.id, p.cell.0, p.cell.1),
        })
        .collect()
}

fn rate_from(s: &CompiledScene, collisions: &[CollisionDiagnostic]) -> f64 {
    let objects: Vec<&Placement> = s.placements.iter().filter(|p| p.category != Category::Structural).collect();
    if objects.is_empty() {
        return 0.0;
    }
    let hit: HashSet<&str> = collisions
        .iter()
        .flat_map(|c| [c.a_id.as_str(), c.b_id.as_str()])
        .collect();
    let n = objects.iter().filter(|p| hit.contains(p.id.as_str())).count();
    100.0 * n as f64 / objects.len() as f64
}

/// Percentage of non-structural objects involved in at least one
/// collision; 0 for a scene without objects.
pub fn collision_rate(s: &CompiledScene, eps: f64) -> f64 {
    rate_from(s, &check_collisions(s, eps))
}

/// Runs every check against `envelope` (the grid floor when `None`).
pub fn validate(s: &CompiledScene, envelope: Option<&Envelope>, opts: &ValidateOptions) -> ValidationReport {
    let floor = Envelope::floor(s);
    let collisions = check_collisions(s, opts.eps);
    let support_failures = check_support(s, opts.tol);
    let bounds_violations = check_bounds(s, envelope.unwrap_or(&floor), opts.tol);
    let cr_obj_percent = rate_from(s, &collisions);
    let passed = collisions.is_empty() && support_failures.is_empty() && bounds_violations.is_empty();
    ValidationReport {
        collisions,
        support_failures,
        bounds_violations,
        warnings: s.warnings.clone(),
        cr_obj_percent,
        passed,
    }
}

/// Scene validity as used to filter generated data: no collisions.
pub fn collision_free(s: &CompiledScene) -> bool {
    check_collisions(s, DEFAULT_EPS).is_empty()
}
