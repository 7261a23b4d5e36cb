//! Lowering of scene and building programs to world-space boxes.
//!
//! Root cell `(i, j)` is centered at world `(i·g, j·g)`. Sub-layout blocks
//! are laid out on a face of their parent box, in the parent's local frame,
//! and then composed into world space with [`compose_frames`].

mod building;
mod scene;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::{GeometryError, LookupError};
use crate::geometry::{normalize_yaw, OrientedBox, Vec3};
use crate::grid::GridSpec;
use crate::llmsli::{print_llmsli, SceneProgram, MAIN_BLOCK};
use crate::syntax::{CellSpec, Face, GridBlock, MAX_NESTING_DEPTH};
use crate::vocab::{Category, VocabEntry, Vocabulary};

pub use building::{compile_building, wall_runs, WallRun};
pub use scene::{CompiledScene, Opening, OpeningKind, Placement, Source};
pub(crate) use scene::IdCounter;

pub const DEFAULT_CEILING_HEIGHT: f64 = 2.6;

/// Cells visited from the root down to the failing one.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CellPath(pub Vec<(String, usize, usize)>);

impl CellPath {
    fn child(&self, block: &str, row: usize, col: usize) -> CellPath {
        let mut v = self.0.clone();
        v.push((block.to_string(), row, col));
        CellPath(v)
    }
}

impl fmt::Display for CellPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (b, i, j)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(" > ")?;
            }
            write!(f, "{b}({i},{j})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("{path}: {source}")]
    Lookup { path: CellPath, source: LookupError },
    #[error("{path}: {source}")]
    Geometry { path: CellPath, source: GeometryError },
    #[error("{path}: block `{block}` is not declared")]
    MissingBlock { path: CellPath, block: String },
    #[error("{path}: block `{block}` has no objects")]
    EmptyBlock { path: CellPath, block: String },
    #[error("{path}: face `{face}` of the parent has no area")]
    FaceDimension { path: CellPath, face: Face },
    #[error("{path}: face `{face}` is only valid on walls")]
    InvalidFace { path: CellPath, face: Face },
    #[error("{path}: sub-layouts nested deeper than {max}")]
    DepthExceeded { path: CellPath, max: usize },
    #[error("opening at ({row},{col}) is not attached to a wall")]
    OrphanOpening { row: usize, col: usize },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CompileOptions {
    /// Overrides the ceiling height from the program header.
    pub ceiling_height: Option<f64>,
}

/// World box of a root cell.
///
/// Floor and structural objects stand on `z = 0`; ceiling-mounted objects
/// hang with their top at `ceiling_height`. Surface items and wall mounts
/// outside a sub-layout also stand on the floor; [`compile_scene`] warns
/// about them.
pub fn compile_placement(
    cell: &CellSpec,
    at: (usize, usize),
    grid: &GridSpec,
    vocab: &Vocabulary,
    ceiling_height: f64,
) -> Result<OrientedBox, CompileError> {
    let path = CellPath(vec![(MAIN_BLOCK.to_string(), at.0, at.1)]);
    let entry = vocab
        .lookup(&cell.key)
        .map_err(|source| CompileError::Lookup { path: path.clone(), source })?;
    root_box(cell, entry, at, grid, ceiling_height).map_err(|source| CompileError::Geometry { path, source })
}

fn root_box(
    cell: &CellSpec,
    entry: &VocabEntry,
    at: (usize, usize),
    grid: &GridSpec,
    ceiling_height: f64,
) -> Result<OrientedBox, GeometryError> {
    let size = cell.size_override.unwrap_or(entry.default_size);
    let (x, y) = grid.cell_center(at.0, at.1);
    let z = match entry.category {
        Category::CeilingMounted => ceiling_height - size.z / 2.0,
        _ => size.z / 2.0,
    };
    OrientedBox::new(Vec3::new(x, y, z), size, normalize_yaw(cell.yaw_deg as i64))
}

/// Expresses a box given in the parent's local frame in the parent's frame
/// of reference: `c = c_p + Rz(yaw_p)·c_local`, `yaw = yaw_p + yaw_local`.
pub fn compose_frames(parent: &OrientedBox, child_local: &OrientedBox) -> OrientedBox {
    let center = parent.center() + child_local.center().rotate_z(parent.yaw());
    OrientedBox::new(center, child_local.size(), parent.yaw() + child_local.yaw())
        .expect("composition of valid boxes is valid")
}

/// Outward normal axis (0 = x, 1 = y, 2 = z) and sign of an object face,
/// with the two in-plane axes in tie-break order.
fn face_axes(face: Face) -> Option<(usize, f64, [usize; 2])> {
    Some(match face {
        Face::Top => (2, 1.0, [0, 1]),
        Face::Bottom => (2, -1.0, [0, 1]),
        Face::Front => (0, 1.0, [1, 2]),
        Face::Back => (0, -1.0, [1, 2]),
        Face::Left => (1, 1.0, [0, 2]),
        Face::Right => (1, -1.0, [0, 2]),
        Face::Inner | Face::Outer => return None,
    })
}

/// Yaw of the outward normal of a vertical face in the parent frame.
fn face_yaw(face: Face) -> f64 {
    match face {
        Face::Left => FRAC_PI_2,
        Face::Back => PI,
        Face::Right => 3.0 * FRAC_PI_2,
        _ => 0.0,
    }
}

/// A sub-layout child in its parent's local frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalChild<'a> {
    pub row: usize,
    pub col: usize,
    pub spec: &'a CellSpec,
    pub entry: &'a VocabEntry,
    pub local: OrientedBox,
}

/// Lays a block out on one face of `parent`, returning each child's box in
/// the parent's local frame.
///
/// The block's row axis runs along the longer in-plane axis of the face
/// (ties go to the horizontal axis, local x where it lies in the face);
/// indices grow along the positive direction of each axis. Each child is
/// centered in its cell and touches the face plane: resting on `top`,
/// hanging below `bottom`, and with its back (local −x) against a vertical
/// face, facing outward.
pub fn anchor_sublayout<'a>(
    parent: &OrientedBox,
    face: Face,
    block: &'a GridBlock,
    vocab: &'a Vocabulary,
) -> Result<Vec<LocalChild<'a>>, CompileError> {
    anchor_at(parent, face, block, vocab, &CellPath::default())
}

fn anchor_at<'a>(
    parent: &OrientedBox,
    face: Face,
    block: &'a GridBlock,
    vocab: &'a Vocabulary,
    path: &CellPath,
) -> Result<Vec<LocalChild<'a>>, CompileError> {
    let Some((normal, sign, plane)) = face_axes(face) else {
        return Err(CompileError::InvalidFace { path: path.clone(), face });
    };
    if block.occupied_count() == 0 {
        return Err(CompileError::EmptyBlock {
            path: path.clone(),
            block: block.name.clone(),
        });
    }
    let ext = parent.size().to_array();
    if plane.iter().any(|&a| !(ext[a] > 0.0)) {
        return Err(CompileError::FaceDimension { path: path.clone(), face });
    }
    let (row_axis, col_axis) = if ext[plane[1]] > ext[plane[0]] {
        (plane[1], plane[0])
    } else {
        (plane[0], plane[1])
    };
    let (rows, cols) = block.dims();
    let vertical = normal != 2;
    let mut out = Vec::with_capacity(block.occupied_count());
    for (r, c, spec) in block.occupied() {
        let cpath = path.child(&block.name, r, c);
        let entry = vocab
            .lookup(&spec.key)
            .map_err(|source| CompileError::Lookup { path: cpath.clone(), source })?;
        let size = spec.size_override.unwrap_or(entry.default_size);
        let cell_yaw = normalize_yaw(spec.yaw_deg as i64);
        let mut center = [0.0; 3];
        center[row_axis] = -ext[row_axis] / 2.0 + (r as f64 + 0.5) * ext[row_axis] / rows as f64;
        center[col_axis] = -ext[col_axis] / 2.0 + (c as f64 + 0.5) * ext[col_axis] / cols as f64;
        let (yaw, reach) = if vertical {
            let (s, co) = cell_yaw.sin_cos();
            (face_yaw(face) + cell_yaw, co.abs() * size.x / 2.0 + s.abs() * size.y / 2.0)
        } else {
            (cell_yaw, size.z / 2.0)
        };
        center[normal] = sign * (ext[normal] / 2.0 + reach);
        let local = OrientedBox::new(Vec3::new(center[0], center[1], center[2]), size, yaw)
            .map_err(|source| CompileError::Geometry { path: cpath, source })?;
        out.push(LocalChild {
            row: r,
            col: c,
            spec,
            entry,
            local,
        });
    }
    Ok(out)
}

pub(crate) fn source_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Shared state while expanding sub-layouts.
pub(crate) struct Expander<'a> {
    pub vocab: &'a Vocabulary,
    pub blocks: &'a std::collections::BTreeMap<String, GridBlock>,
    pub ids: IdCounter,
    pub out: Vec<Placement>,
}

impl Expander<'_> {
    /// Emits every child of `parent` anchored through `cell`'s references,
    /// depth first.
    pub fn expand(
        &mut self,
        parent: &Placement,
        refs: &[crate::syntax::SublayoutRef],
        path: &CellPath,
        face_map: &dyn Fn(Face) -> Face,
    ) -> Result<(), CompileError> {
        for r in refs {
            if parent.source.depth >= MAX_NESTING_DEPTH {
                return Err(CompileError::DepthExceeded {
                    path: path.clone(),
                    max: MAX_NESTING_DEPTH,
                });
            }
            let block = self.blocks.get(&r.block).ok_or_else(|| CompileError::MissingBlock {
                path: path.clone(),
                block: r.block.clone(),
            })?;
            let face = face_map(r.face);
            for child in anchor_at(&parent.bbox, face, block, self.vocab, path)? {
                let placement = Placement {
                    id: self.ids.next(&child.entry.identifier),
                    identifier: child.entry.identifier.clone(),
                    category: child.entry.category,
                    bbox: compose_frames(&parent.bbox, &child.local),
                    parent: Some(parent.id.clone()),
                    source: Source {
                        block: block.name.clone(),
                        row: child.row,
                        col: child.col,
                        depth: parent.source.depth + 1,
                        face: Some(r.face),
                    },
                    cell: parent.cell,
                };
                self.out.push(placement.clone());
                let cpath = path.child(&block.name, child.row, child.col);
                self.expand(&placement, &child.spec.sublayouts, &cpath, &|f| f)?;
            }
        }
        Ok(())
    }
}

/// Compiles a furniture program. Placements come out in row-major order of
/// the root grid, each root followed by its sub-layout tree in depth-first
/// pre-order.
pub fn compile_scene(
    p: &SceneProgram,
    vocab: &Vocabulary,
    opts: &CompileOptions,
) -> Result<CompiledScene, CompileError> {
    let grid = p.grid();
    let ceiling_height = opts
        .ceiling_height
        .or(p.header.height)
        .unwrap_or(DEFAULT_CEILING_HEIGHT);
    let mut ex = Expander {
        vocab,
        blocks: &p.blocks,
        ids: IdCounter::default(),
        out: Vec::new(),
    };
    let mut warnings = Vec::new();
    for (i, j, cell) in p.main.occupied() {
        let path = CellPath(vec![(MAIN_BLOCK.to_string(), i, j)]);
        let entry = vocab
            .lookup(&cell.key)
            .map_err(|source| CompileError::Lookup { path: path.clone(), source })?;
        let bbox = root_box(cell, entry, (i, j), &grid, ceiling_height)
            .map_err(|source| CompileError::Geometry { path: path.clone(), source })?;
        let id = ex.ids.next(&entry.identifier);
        if matches!(entry.category, Category::SurfaceItem | Category::WallMounted) {
            warnings.push(format!(
                "{id} is a {} placed directly on the floor at ({i},{j})",
                entry.category
            ));
        }
        let placement = Placement {
            id,
            identifier: entry.identifier.clone(),
            category: entry.category,
            bbox,
            parent: None,
            source: Source {
                block: MAIN_BLOCK.to_string(),
                row: i,
                col: j,
                depth: 0,
                face: None,
            },
            cell: (i, j),
        };
        ex.out.push(placement.clone());
        ex.expand(&placement, &cell.sublayouts, &path, &|f| f)?;
    }
    Ok(CompiledScene {
        grid,
        ceiling_height,
        structural: Vec::new(),
        openings: Vec::new(),
        placements: ex.out,
        source_hash: source_hash(&print_llmsli(p)),
        warnings,
    })
}
