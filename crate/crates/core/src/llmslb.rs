//! LLMSLB: building shells on a BEV grid.
//!
//! `w` is a wall cell, `d` a door, `c` a window and `0` empty. Doors and
//! windows replace a wall cell inside a wall run. Wall cells may carry
//! face-anchored sub-layouts on their `inner` or `outer` side:
//!
//! ```text
//! llmslb grid=1m height=2.6m
//! w w(AC_on_inner) w
//! w 0 w
//! w d w
//! sublayout AC:
//! air_conditioner
//! ```

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::GridSpec;
use crate::syntax::{
    self, block_header, check_rectangular, check_reference_graph, decode_utf8, header_pairs, header_value,
    is_identifier, object_row, significant_lines, words, BlockHeader, Cursor, Face, GridBlock, ParseError, RefSite,
    SublayoutRef,
};

pub const HEADER_TAG: &str = "llmslb";
const ROOT: &str = "main";

pub const DEFAULT_WALL_HEIGHT: f64 = 2.6;
pub const DEFAULT_WALL_THICKNESS: f64 = 0.2;
pub const DEFAULT_DOOR: OpeningParams = OpeningParams {
    width: 0.9,
    height: 2.0,
    sill: 0.0,
};
pub const DEFAULT_WINDOW: OpeningParams = OpeningParams {
    width: 1.2,
    height: 1.2,
    sill: 0.9,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructSymbol {
    Wall,
    Door,
    Window,
    Empty,
}

impl StructSymbol {
    pub fn as_char(self) -> char {
        match self {
            StructSymbol::Wall => 'w',
            StructSymbol::Door => 'd',
            StructSymbol::Window => 'c',
            StructSymbol::Empty => '0',
        }
    }

    /// Walls and openings both belong to a wall run.
    pub fn is_wall_like(self) -> bool {
        !matches!(self, StructSymbol::Empty)
    }

    pub fn is_opening(self) -> bool {
        matches!(self, StructSymbol::Door | StructSymbol::Window)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructCell {
    pub symbol: StructSymbol,
    pub sublayouts: Vec<SublayoutRef>,
}

impl StructCell {
    pub fn new(symbol: StructSymbol) -> Self {
        StructCell {
            symbol,
            sublayouts: Vec::new(),
        }
    }
}

impl fmt::Display for StructCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol.as_char())?;
        for r in &self.sublayouts {
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Opening size and sill height in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpeningParams {
    pub width: f64,
    pub height: f64,
    pub sill: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingHeader {
    pub cell_size: f64,
    pub dims: Option<(usize, usize)>,
    pub wall_height: f64,
    pub wall_thickness: f64,
    pub door: OpeningParams,
    pub window: OpeningParams,
    /// Block hung from the ceiling plane, if any.
    pub ceiling: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingProgram {
    pub header: BuildingHeader,
    pub cells: Vec<Vec<StructCell>>,
    pub blocks: BTreeMap<String, GridBlock>,
}

impl BuildingProgram {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            cell_size: self.header.cell_size,
            rows: self.cells.len(),
            cols: self.cells.first().map_or(0, |r| r.len()),
        }
    }

    pub fn symbol(&self, i: isize, j: isize) -> StructSymbol {
        if i < 0 || j < 0 {
            return StructSymbol::Empty;
        }
        self.cells
            .get(i as usize)
            .and_then(|r| r.get(j as usize))
            .map_or(StructSymbol::Empty, |c| c.symbol)
    }

    pub fn wall_like(&self, i: isize, j: isize) -> bool {
        self.symbol(i, j).is_wall_like()
    }

    pub fn count(&self, s: StructSymbol) -> usize {
        self.cells.iter().flatten().filter(|c| c.symbol == s).count()
    }

    /// Marks empty cells reachable from outside the grid without crossing a
    /// wall, door or window. Indexed `[i + 1][j + 1]`, so the result carries
    /// a one-cell border that is always exterior.
    pub fn exterior_mask(&self) -> Vec<Vec<bool>> {
        let g = self.grid();
        let (h, w) = (g.rows + 2, g.cols + 2);
        let mut seen = vec![vec![false; w]; h];
        let mut queue = VecDeque::from([(0usize, 0usize)]);
        seen[0][0] = true;
        while let Some((a, b)) = queue.pop_front() {
            for (da, db) in NEIGHBORS {
                let (na, nb) = (a as isize + da, b as isize + db);
                if na < 0 || nb < 0 || na >= h as isize || nb >= w as isize {
                    continue;
                }
                let (na, nb) = (na as usize, nb as usize);
                if seen[na][nb] || self.wall_like(na as isize - 1, nb as isize - 1) {
                    continue;
                }
                seen[na][nb] = true;
                queue.push_back((na, nb));
            }
        }
        seen
    }

    /// 4-connected components of wall-like cells, in row-major order of
    /// their first cell.
    pub fn wall_components(&self) -> Vec<Vec<(usize, usize)>> {
        let g = self.grid();
        let mut label = vec![vec![usize::MAX; g.cols]; g.rows];
        let mut comps = Vec::new();
        for i in 0..g.rows {
            for j in 0..g.cols {
                if label[i][j] != usize::MAX || !self.cells[i][j].symbol.is_wall_like() {
                    continue;
                }
                let id = comps.len();
                let mut cells = Vec::new();
                let mut queue = VecDeque::from([(i, j)]);
                label[i][j] = id;
                while let Some((a, b)) = queue.pop_front() {
                    cells.push((a, b));
                    for (da, db) in NEIGHBORS {
                        let (na, nb) = (a as isize + da, b as isize + db);
                        if self.wall_like(na, nb) && label[na as usize][nb as usize] == usize::MAX {
                            label[na as usize][nb as usize] = id;
                            queue.push_back((na as usize, nb as usize));
                        }
                    }
                }
                cells.sort_unstable();
                comps.push(cells);
            }
        }
        comps
    }
}

pub(crate) const NEIGHBORS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

pub fn parse_llmslb_bytes(bytes: &[u8]) -> Result<BuildingProgram, ParseError> {
    parse_llmslb(decode_utf8(bytes)?)
}

fn struct_cell(
    token: &str,
    line: usize,
    col: usize,
    sites: &mut Vec<RefSite>,
) -> Result<StructCell, ParseError> {
    let mut cur = Cursor::new(token, line, col);
    let symbol = match cur.bump() {
        Some('w') => StructSymbol::Wall,
        Some('d') => StructSymbol::Door,
        Some('c') => StructSymbol::Window,
        Some('0') => StructSymbol::Empty,
        other => {
            let found = other.map_or("end of token".to_string(), |c| format!("`{c}`"));
            return Err(ParseError::syntax(line, col, format!("unexpected {found}"), &["w", "d", "c", "0"]));
        }
    };
    let mut cell = StructCell::new(symbol);
    if cur.peek() == Some('(') {
        if symbol != StructSymbol::Wall {
            return Err(cur.error("sub-layouts can only be attached to wall cells", &["whitespace"]));
        }
        for (r, rcol) in syntax::sublayout_refs(&mut cur, &Face::WALL_FACES)? {
            sites.push(RefSite {
                from_block: ROOT.to_string(),
                target: r.block.clone(),
                line,
                col: rcol,
            });
            cell.sublayouts.push(r);
        }
    }
    let expected: &[&str] = if symbol == StructSymbol::Wall && cell.sublayouts.is_empty() {
        &["(", "whitespace"]
    } else {
        &["whitespace"]
    };
    cur.finish(expected)?;
    Ok(cell)
}

pub fn parse_llmslb(src: &str) -> Result<BuildingProgram, ParseError> {
    let lines = significant_lines(src);
    let Some(&first) = lines.first() else {
        return Err(ParseError::syntax(1, 1, "empty program", &[HEADER_TAG]));
    };
    let pairs = header_pairs(
        first,
        HEADER_TAG,
        &["grid", "dims", "height", "thickness", "door", "window", "ceiling"],
    )?;
    let ln = first.number;
    let cell_size = match pairs.get("grid") {
        Some(&(col, v)) => header_value(ln, col, v, syntax::length_value)?,
        None => return Err(ParseError::syntax(ln, 1, "header is missing `grid=`", &["grid="])),
    };
    let length = |key: &str, default: f64| -> Result<f64, ParseError> {
        pairs
            .get(key)
            .map(|&(col, v)| header_value(ln, col, v, syntax::length_value))
            .unwrap_or(Ok(default))
    };
    let opening = |key: &str, default: OpeningParams| -> Result<OpeningParams, ParseError> {
        match pairs.get(key) {
            Some(&(col, v)) => {
                let vals = header_value(ln, col, v, |c| syntax::lengths_value(c, 3, true))?;
                Ok(OpeningParams {
                    width: vals[0],
                    height: vals[1],
                    sill: vals[2],
                })
            }
            None => Ok(default),
        }
    };
    let dims = pairs
        .get("dims")
        .map(|&(col, v)| header_value(ln, col, v, syntax::dims_value))
        .transpose()?;
    let ceiling = match pairs.get("ceiling") {
        Some(&(col, v)) if is_identifier(v) => Some((v.to_string(), col)),
        Some(&(col, v)) => {
            return Err(ParseError::syntax(ln, col, format!("invalid block name `{v}`"), &["block name"]))
        }
        None => None,
    };
    let header = BuildingHeader {
        cell_size,
        dims,
        wall_height: length("height", DEFAULT_WALL_HEIGHT)?,
        wall_thickness: length("thickness", DEFAULT_WALL_THICKNESS)?,
        door: opening("door", DEFAULT_DOOR)?,
        window: opening("window", DEFAULT_WINDOW)?,
        ceiling: ceiling.as_ref().map(|c| c.0.clone()),
    };
    for (name, p) in [("door", header.door), ("window", header.window)] {
        if p.sill + p.height > header.wall_height + 1e-9 {
            return Err(ParseError::syntax(ln, 1, format!("{name} is taller than the wall"), &[]));
        }
    }

    let mut sites: Vec<RefSite> = Vec::new();
    if let Some((name, col)) = &ceiling {
        sites.push(RefSite {
            from_block: ROOT.to_string(),
            target: name.clone(),
            line: ln,
            col: *col,
        });
    }
    let mut rows: Vec<Vec<StructCell>> = Vec::new();
    let mut row_lines = Vec::new();
    let mut token_cols: Vec<Vec<usize>> = Vec::new();
    let mut main_seen = false;
    let mut blocks: Vec<(String, Option<(usize, usize)>, usize, Vec<Vec<_>>, Vec<usize>)> = Vec::new();
    let mut in_block: Option<usize> = None;

    for &line in &lines[1..] {
        match block_header(line)? {
            Some(BlockHeader::Main) => {
                if main_seen || !rows.is_empty() {
                    return Err(ParseError::syntax(line.number, 1, "the root grid is declared twice", &[]));
                }
                main_seen = true;
                in_block = None;
            }
            Some(BlockHeader::Sublayout { name, dims }) => {
                if blocks.iter().any(|b| b.0 == name) {
                    return Err(ParseError::syntax(line.number, 1, format!("block `{name}` is declared twice"), &[]));
                }
                blocks.push((name, dims, line.number, Vec::new(), Vec::new()));
                in_block = Some(blocks.len() - 1);
            }
            None => match in_block {
                None => {
                    let ws = words(line.text);
                    let row = ws
                        .iter()
                        .map(|&(col, w)| struct_cell(w, line.number, col, &mut sites))
                        .collect::<Result<Vec<_>, _>>()?;
                    token_cols.push(ws.iter().map(|w| w.0).collect());
                    rows.push(row);
                    row_lines.push(line.number);
                }
                Some(k) => {
                    let name = blocks[k].0.clone();
                    let row = object_row(line, &Face::OBJECT_FACES, &name, &mut sites)?;
                    blocks[k].3.push(row);
                    blocks[k].4.push(line.number);
                }
            },
        }
    }

    check_rectangular(ROOT, &rows, &row_lines, first.number, dims)?;
    let mut block_map = BTreeMap::new();
    let mut declared = BTreeMap::new();
    for (name, bdims, bline, brows, blines) in blocks {
        check_rectangular(&name, &brows, &blines, bline, bdims)?;
        declared.insert(name.clone(), bline);
        block_map.insert(
            name.clone(),
            GridBlock {
                name,
                rows: brows,
                declared_dims: bdims,
            },
        );
    }
    check_reference_graph(&sites, &[ROOT], &declared)?;

    let program = BuildingProgram {
        header,
        cells: rows,
        blocks: block_map,
    };
    if let Some((i, j)) = orphan_openings(&program).first() {
        return Err(ParseError::OrphanOpening {
            line: row_lines[*i],
            col: token_cols[*i][*j],
            row: *i,
            column: *j,
        });
    }
    Ok(program)
}

/// Openings whose wall-like component contains no wall cell.
pub fn orphan_openings(p: &BuildingProgram) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for comp in p.wall_components() {
        if !comp.iter().any(|&(i, j)| p.cells[i][j].symbol == StructSymbol::Wall) {
            out.extend(comp);
        }
    }
    out.sort_unstable();
    out
}

pub fn print_llmslb(p: &BuildingProgram) -> String {
    let h = &p.header;
    let mut out = format!("{HEADER_TAG} grid={}m", h.cell_size);
    if let Some((r, c)) = h.dims {
        out.push_str(&format!(" dims={r}x{c}"));
    }
    if h.wall_height != DEFAULT_WALL_HEIGHT {
        out.push_str(&format!(" height={}m", h.wall_height));
    }
    if h.wall_thickness != DEFAULT_WALL_THICKNESS {
        out.push_str(&format!(" thickness={}m", h.wall_thickness));
    }
    if h.door != DEFAULT_DOOR {
        out.push_str(&format!(" door={}x{}x{}m", h.door.width, h.door.height, h.door.sill));
    }
    if h.window != DEFAULT_WINDOW {
        out.push_str(&format!(" window={}x{}x{}m", h.window.width, h.window.height, h.window.sill));
    }
    if let Some(c) = &h.ceiling {
        out.push_str(&format!(" ceiling={c}"));
    }
    out.push('\n');
    for row in &p.cells {
        let toks: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&toks.join(" "));
        out.push('\n');
    }
    let mut root_refs: Vec<String> = h.ceiling.iter().cloned().collect();
    root_refs.extend(p.cells.iter().flatten().flat_map(|c| c.sublayouts.iter().map(|r| r.block.clone())));
    for name in syntax::reference_order(root_refs, &p.blocks) {
        let b = &p.blocks[&name];
        out.push_str(&format!("sublayout {name}"));
        if let Some((r, c)) = b.declared_dims {
            out.push_str(&format!(" dims={r}x{c}"));
        }
        out.push_str(":\n");
        b.write_rows(&mut out);
    }
    out
}

/// A connected wall structure that does not close into loops.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureDiagnostic {
    /// Row-major index of the wall component.
    pub component: usize,
    /// Wall-like cells with fewer than two wall-like neighbors.
    pub open_ends: Vec<(usize, usize)>,
    /// Empty cells that touch two or more open ends of this component.
    pub gaps: Vec<(usize, usize)>,
    pub message: String,
}

/// Reports every wall component that is not closed. Doors and windows count
/// as wall cells; a component is closed when every cell has at least two
/// wall-like 4-neighbors.
pub fn check_closure(p: &BuildingProgram) -> Vec<ClosureDiagnostic> {
    let degree = |i: usize, j: usize| {
        NEIGHBORS
            .iter()
            .filter(|(di, dj)| p.wall_like(i as isize + di, j as isize + dj))
            .count()
    };
    let g = p.grid();
    let mut out = Vec::new();
    for (k, comp) in p.wall_components().into_iter().enumerate() {
        let open_ends: Vec<(usize, usize)> = comp.iter().copied().filter(|&(i, j)| degree(i, j) < 2).collect();
        if open_ends.is_empty() {
            continue;
        }
        let mut gaps = Vec::new();
        for i in 0..g.rows {
            for j in 0..g.cols {
                if p.cells[i][j].symbol.is_wall_like() {
                    continue;
                }
                let touching = NEIGHBORS
                    .iter()
                    .filter(|(di, dj)| {
                        let (a, b) = (i as isize + di, j as isize + dj);
                        a >= 0 && b >= 0 && open_ends.contains(&(a as usize, b as usize))
                    })
                    .count();
                if touching >= 2 {
                    gaps.push((i, j));
                }
            }
        }
        let fmt_cells = |v: &[(usize, usize)]| {
            v.iter().map(|(i, j)| format!("({i},{j})")).collect::<Vec<_>>().join(", ")
        };
        let mut message = format!("wall structure {k} is not closed; open ends at {}", fmt_cells(&open_ends));
        if !gaps.is_empty() {
            message.push_str(&format!("; gap at {}", fmt_cells(&gaps)));
        }
        out.push(ClosureDiagnostic {
            component: k,
            open_ends,
            gaps,
            message,
        });
    }
    out
}
