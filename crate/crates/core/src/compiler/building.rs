use std::f64::consts::FRAC_PI_2;

use crate::geometry::{OrientedBox, Vec3};
use crate::llmslb::{check_closure, orphan_openings, print_llmslb, BuildingProgram, StructSymbol};
use crate::syntax::Face;
use crate::vocab::{Category, Vocabulary};

use super::{
    source_hash, CellPath, CompileError, CompileOptions, CompiledScene, Expander, IdCounter, Opening, OpeningKind,
    Placement, Source,
};

/// A maximal straight run of wall-like cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WallRun {
    /// First cell of the run.
    pub start: (usize, usize),
    /// Number of cells.
    pub len: usize,
    /// `true` when the run lies along a grid row (world y).
    pub along_row: bool,
}

impl WallRun {
    pub fn contains(&self, (i, j): (usize, usize)) -> bool {
        if self.along_row {
            i == self.start.0 && j >= self.start.1 && j < self.start.1 + self.len
        } else {
            j == self.start.1 && i >= self.start.0 && i < self.start.0 + self.len
        }
    }

    /// Yaw of the wall's local x axis: runs along a row point along world +y.
    pub fn yaw(&self) -> f64 {
        if self.along_row {
            FRAC_PI_2
        } else {
            0.0
        }
    }

    /// Cell on the wall's local +y side of `cell` and on its −y side.
    fn sides(&self, (i, j): (usize, usize)) -> [(isize, isize); 2] {
        let (i, j) = (i as isize, j as isize);
        if self.along_row {
            [(i - 1, j), (i + 1, j)]
        } else {
            [(i, j + 1), (i, j - 1)]
        }
    }
}

/// Decomposes the wall-like cells into runs: every horizontal and vertical
/// run of two or more cells, plus a one-cell run for each cell that lies on
/// neither. Corner cells belong to both of their runs.
pub fn wall_runs(p: &BuildingProgram) -> Vec<WallRun> {
    let g = p.grid();
    let wall = |i: usize, j: usize| p.cells[i][j].symbol.is_wall_like();
    let mut runs = Vec::new();
    for i in 0..g.rows {
        let mut j = 0;
        while j < g.cols {
            let start = j;
            while j < g.cols && wall(i, j) {
                j += 1;
            }
            if j - start >= 2 {
                runs.push(WallRun {
                    start: (i, start),
                    len: j - start,
                    along_row: true,
                });
            }
            j += 1;
        }
    }
    for j in 0..g.cols {
        let mut i = 0;
        while i < g.rows {
            let start = i;
            while i < g.rows && wall(i, j) {
                i += 1;
            }
            if i - start >= 2 {
                runs.push(WallRun {
                    start: (start, j),
                    len: i - start,
                    along_row: false,
                });
            }
            i += 1;
        }
    }
    for i in 0..g.rows {
        for j in 0..g.cols {
            if wall(i, j) && !runs.iter().any(|r| r.contains((i, j))) {
                runs.push(WallRun {
                    start: (i, j),
                    len: 1,
                    along_row: true,
                });
            }
        }
    }
    runs.sort_by_key(|r| (r.start, !r.along_row));
    runs
}

/// Compiles a building shell: one wall box per run, opening records, the
/// ceiling slab when the header names a ceiling block, and wall- and
/// ceiling-anchored sub-layouts. Closure problems become warnings.
pub fn compile_building(
    b: &BuildingProgram,
    vocab: &Vocabulary,
    opts: &CompileOptions,
) -> Result<CompiledScene, CompileError> {
    if let Some(&(row, col)) = orphan_openings(b).first() {
        return Err(CompileError::OrphanOpening { row, col });
    }
    let grid = b.grid();
    let g = grid.cell_size;
    let h = &b.header;
    let height = opts.ceiling_height.unwrap_or(h.wall_height);
    let geom = |path: &CellPath| {
        let path = path.clone();
        move |source| CompileError::Geometry { path, source }
    };

    let mut ids = IdCounter::default();
    let runs = wall_runs(b);
    let mut structural = Vec::new();
    let mut wall_ids = Vec::new();
    for run in &runs {
        let (i, j) = run.start;
        let span = (run.len - 1) as f64 * g / 2.0;
        let (cx, cy) = if run.along_row {
            (i as f64 * g, j as f64 * g + span)
        } else {
            (i as f64 * g + span, j as f64 * g)
        };
        let path = CellPath(vec![("main".into(), i, j)]);
        let bbox = OrientedBox::new(
            Vec3::new(cx, cy, h.wall_height / 2.0),
            Vec3::new(run.len as f64 * g, h.wall_thickness, h.wall_height),
            run.yaw(),
        )
        .map_err(geom(&path))?;
        let id = ids.next("wall");
        wall_ids.push(id.clone());
        structural.push(structural_placement(id, "wall", bbox, run.start));
    }

    let run_for = |cell: (usize, usize)| -> usize {
        runs.iter()
            .position(|r| r.contains(cell))
            .expect("every wall-like cell lies on a run")
    };

    let mut openings = Vec::new();
    for (i, row) in b.cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let (kind, params) = match c.symbol {
                StructSymbol::Door => (OpeningKind::Door, h.door),
                StructSymbol::Window => (OpeningKind::Window, h.window),
                _ => continue,
            };
            let k = run_for((i, j));
            let path = CellPath(vec![("main".into(), i, j)]);
            let bbox = OrientedBox::new(
                Vec3::new(i as f64 * g, j as f64 * g, params.sill + params.height / 2.0),
                Vec3::new(params.width.min(g), h.wall_thickness, params.height),
                runs[k].yaw(),
            )
            .map_err(geom(&path))?;
            openings.push(Opening {
                id: ids.next(kind.as_str()),
                kind,
                wall: wall_ids[k].clone(),
                cell: (i, j),
                bbox,
                sill: params.sill,
            });
        }
    }

    let mut ex = Expander {
        vocab,
        blocks: &b.blocks,
        ids,
        out: Vec::new(),
    };
    let mut warnings: Vec<String> = check_closure(b).into_iter().map(|d| d.message).collect();
    let exterior = b.exterior_mask();
    let is_exterior = |(a, c): (isize, isize)| exterior[(a + 1) as usize][(c + 1) as usize];
    let is_interior = |(a, c): (isize, isize)| !b.wall_like(a, c) && !is_exterior((a, c));

    for (i, row) in b.cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if c.sublayouts.is_empty() {
                continue;
            }
            let candidates: Vec<usize> = (0..runs.len()).filter(|&k| runs[k].contains((i, j))).collect();
            // the first run whose two sides are one interior, one exterior cell
            let resolved = candidates.iter().find_map(|&k| {
                let [plus, minus] = runs[k].sides((i, j));
                if is_interior(plus) && is_exterior(minus) {
                    Some((k, Face::Left))
                } else if is_interior(minus) && is_exterior(plus) {
                    Some((k, Face::Right))
                } else {
                    None
                }
            });
            let (k, inner) = resolved.unwrap_or_else(|| {
                warnings.push(format!(
                    "wall cell ({i},{j}) has no clear inner side; using the wall's +y side"
                ));
                (candidates[0], Face::Left)
            });
            let run = &runs[k];
            let path = CellPath(vec![("main".into(), i, j)]);
            let segment = OrientedBox::new(
                Vec3::new(i as f64 * g, j as f64 * g, h.wall_height / 2.0),
                Vec3::new(g, h.wall_thickness, h.wall_height),
                run.yaw(),
            )
            .map_err(geom(&path))?;
            let anchor = Placement {
                bbox: segment,
                source: Source {
                    block: "main".into(),
                    row: i,
                    col: j,
                    depth: 0,
                    face: None,
                },
                cell: (i, j),
                ..structural[k].clone()
            };
            let outer = if inner == Face::Left { Face::Right } else { Face::Left };
            ex.expand(&anchor, &c.sublayouts, &path, &move |f| match f {
                Face::Inner => inner,
                Face::Outer => outer,
                other => other,
            })?;
        }
    }

    if let Some(name) = &h.ceiling {
        let cells: Vec<(usize, usize)> = (0..grid.rows)
            .flat_map(|i| (0..grid.cols).map(move |j| (i, j)))
            .filter(|&(i, j)| b.cells[i][j].symbol.is_wall_like())
            .collect();
        let cells = if cells.is_empty() {
            warnings.push("ceiling has no walls to rest on; spanning the whole grid".to_string());
            vec![(0, 0), (grid.rows - 1, grid.cols - 1)]
        } else {
            cells
        };
        let (i0, j0) = cells.iter().fold((usize::MAX, usize::MAX), |a, c| (a.0.min(c.0), a.1.min(c.1)));
        let (i1, j1) = cells.iter().fold((0, 0), |a, c| (a.0.max(c.0), a.1.max(c.1)));
        let path = CellPath(vec![("main".into(), i0, j0)]);
        let slab = OrientedBox::new(
            Vec3::new(
                (i0 + i1) as f64 * g / 2.0,
                (j0 + j1) as f64 * g / 2.0,
                height + h.wall_thickness / 2.0,
            ),
            Vec3::new((i1 - i0 + 1) as f64 * g, (j1 - j0 + 1) as f64 * g, h.wall_thickness),
            0.0,
        )
        .map_err(geom(&path))?;
        let slab = structural_placement(ex.ids.next("ceiling"), "ceiling", slab, (i0, j0));
        structural.push(slab.clone());
        let refs = [crate::syntax::SublayoutRef {
            block: name.clone(),
            face: Face::Bottom,
        }];
        ex.expand(&slab, &refs, &path, &|f| f)?;
    }

    Ok(CompiledScene {
        grid,
        ceiling_height: height,
        structural,
        openings,
        placements: ex.out,
        source_hash: source_hash(&print_llmslb(b)),
        warnings,
    })
}

fn structural_placement(id: String, identifier: &str, bbox: OrientedBox, cell: (usize, usize)) -> Placement {
    Placement {
        id,
        identifier: identifier.to_string(),
        category: Category::Structural,
        bbox,
        parent: None,
        source: Source {
            block: "main".into(),
            row: cell.0,
            col: cell.1,
            depth: 0,
            face: None,
        },
        cell,
    }
}
