//! LLMSLI: indoor object layouts on a BEV grid.
//!
//! ```text
//! llmsli grid=1m dims=2x3
//! 1 0 3@180(TV_on_top)
//! 0 2 0
//! sublayout TV:
//! 4
//! ```
//!
//! Rows directly after the header form the root grid (`main:` may be written
//! explicitly). See `LANGUAGE.md` for the full grammar.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::grid::GridSpec;
use crate::syntax::{
    self, block_header, check_rectangular, check_reference_graph, decode_utf8, header_pairs, header_value,
    object_row, significant_lines, BlockHeader, Face, GridBlock, ParseError, RefSite,
};

pub const HEADER_TAG: &str = "llmsli";
pub const MAIN_BLOCK: &str = "main";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneHeader {
    /// Grid cell size `g` in meters.
    pub cell_size: f64,
    pub dims: Option<(usize, usize)>,
    /// Floor extent in meters along world x and y.
    pub floor: Option<(f64, f64)>,
    /// Ceiling height used to hang ceiling-mounted root objects.
    pub height: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneProgram {
    pub header: SceneHeader,
    pub main: GridBlock,
    pub blocks: BTreeMap<String, GridBlock>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramStats {
    pub cells: usize,
    pub occupied_cells: usize,
    pub sublayout_count: usize,
    pub max_depth: usize,
    pub token_count: usize,
    pub char_count: usize,
}

impl SceneProgram {
    pub fn grid(&self) -> GridSpec {
        let (rows, cols) = self.main.dims();
        GridSpec {
            cell_size: self.header.cell_size,
            rows,
            cols,
        }
    }

    pub fn block(&self, name: &str) -> Option<&GridBlock> {
        if name == MAIN_BLOCK {
            Some(&self.main)
        } else {
            self.blocks.get(name)
        }
    }

    /// Longest chain of nested sub-layout blocks below the root grid.
    pub fn max_depth(&self) -> usize {
        fn depth(p: &SceneProgram, b: &GridBlock, guard: usize) -> usize {
            if guard > syntax::MAX_NESTING_DEPTH + 1 {
                return guard;
            }
            b.occupied()
                .flat_map(|(_, _, c)| c.sublayouts.iter())
                .filter_map(|r| p.blocks.get(&r.block))
                .map(|child| 1 + depth(p, child, guard + 1))
                .max()
                .unwrap_or(0)
        }
        depth(self, &self.main, 0)
    }
}

/// Parses LLMSLI source bytes; invalid UTF-8 is a syntax error.
pub fn parse_llmsli_bytes(bytes: &[u8]) -> Result<SceneProgram, ParseError> {
    parse_llmsli(decode_utf8(bytes)?)
}

pub fn parse_llmsli(src: &str) -> Result<SceneProgram, ParseError> {
    let lines = significant_lines(src);
    let Some(&first) = lines.first() else {
        return Err(ParseError::syntax(1, 1, "empty program", &[HEADER_TAG]));
    };
    let pairs = header_pairs(first, HEADER_TAG, &["grid", "dims", "floor", "height"])?;
    let ln = first.number;
    let cell_size = match pairs.get("grid") {
        Some(&(col, v)) => header_value(ln, col, v, syntax::length_value)?,
        None => return Err(ParseError::syntax(ln, 1, "header is missing `grid=`", &["grid="])),
    };
    let dims = pairs
        .get("dims")
        .map(|&(col, v)| header_value(ln, col, v, syntax::dims_value))
        .transpose()?;
    let floor = pairs
        .get("floor")
        .map(|&(col, v)| header_value(ln, col, v, |c| syntax::lengths_value(c, 2, false)))
        .transpose()?
        .map(|v| (v[0], v[1]));
    let height = pairs
        .get("height")
        .map(|&(col, v)| header_value(ln, col, v, syntax::length_value))
        .transpose()?;
    let header = SceneHeader {
        cell_size,
        dims,
        floor,
        height,
    };

    let faces = Face::OBJECT_FACES;
    let mut sites: Vec<RefSite> = Vec::new();
    let mut main: Option<(Vec<Vec<_>>, Vec<usize>, usize)> = None;
    let mut blocks: Vec<(String, Option<(usize, usize)>, usize, Vec<Vec<_>>, Vec<usize>)> = Vec::new();
    // None = still in the implicit main block
    let mut current: Option<usize> = None;

    for &line in &lines[1..] {
        match block_header(line)? {
            Some(BlockHeader::Main) => {
                if main.is_some() {
                    return Err(ParseError::syntax(line.number, 1, "the root grid is declared twice", &[]));
                }
                main = Some((Vec::new(), Vec::new(), line.number));
                current = None;
            }
            Some(BlockHeader::Sublayout { name, dims }) => {
                if blocks.iter().any(|b| b.0 == name) {
                    return Err(ParseError::syntax(line.number, 1, format!("block `{name}` is declared twice"), &[]));
                }
                blocks.push((name, dims, line.number, Vec::new(), Vec::new()));
                current = Some(blocks.len() - 1);
            }
            None => match current {
                None => {
                    let m = main.get_or_insert_with(|| (Vec::new(), Vec::new(), first.number));
                    m.0.push(object_row(line, &faces, MAIN_BLOCK, &mut sites)?);
                    m.1.push(line.number);
                }
                Some(k) => {
                    let name = blocks[k].0.clone();
                    let row = object_row(line, &faces, &name, &mut sites)?;
                    blocks[k].3.push(row);
                    blocks[k].4.push(line.number);
                }
            },
        }
    }

    let (main_rows, main_lines, main_line) = main.unwrap_or_else(|| (Vec::new(), Vec::new(), first.number));
    check_rectangular(MAIN_BLOCK, &main_rows, &main_lines, main_line, dims)?;
    let mut block_map = BTreeMap::new();
    let mut declared = BTreeMap::new();
    for (name, bdims, bline, rows, row_lines) in blocks {
        check_rectangular(&name, &rows, &row_lines, bline, bdims)?;
        declared.insert(name.clone(), bline);
        block_map.insert(
            name.clone(),
            GridBlock {
                name,
                rows,
                declared_dims: bdims,
            },
        );
    }
    check_reference_graph(&sites, &[MAIN_BLOCK], &declared)?;

    Ok(SceneProgram {
        header,
        main: GridBlock {
            name: MAIN_BLOCK.to_string(),
            rows: main_rows,
            declared_dims: dims,
        },
        blocks: block_map,
    })
}

fn fmt_len(v: f64) -> String {
    format!("{v}m")
}

/// Canonical text: header, root rows, then sub-layout blocks in
/// first-reference order.
pub fn print_llmsli(p: &SceneProgram) -> String {
    let mut out = String::from(HEADER_TAG);
    out.push_str(&format!(" grid={}", fmt_len(p.header.cell_size)));
    if let Some((r, c)) = p.header.dims {
        out.push_str(&format!(" dims={r}x{c}"));
    }
    if let Some((x, y)) = p.header.floor {
        out.push_str(&format!(" floor={x}x{y}m"));
    }
    if let Some(h) = p.header.height {
        out.push_str(&format!(" height={}", fmt_len(h)));
    }
    out.push('\n');
    p.main.write_rows(&mut out);
    let root_refs = p
        .main
        .occupied()
        .flat_map(|(_, _, c)| c.sublayouts.iter().map(|r| r.block.clone()))
        .collect();
    for name in syntax::reference_order(root_refs, &p.blocks) {
        let b = &p.blocks[&name];
        out.push_str("sublayout ");
        out.push_str(&name);
        if let Some((r, c)) = b.declared_dims {
            out.push_str(&format!(" dims={r}x{c}"));
        }
        out.push_str(":\n");
        b.write_rows(&mut out);
    }
    out
}

pub fn program_stats(p: &SceneProgram) -> ProgramStats {
    let text = print_llmsli(p);
    let (rows, cols) = p.main.dims();
    let sublayout_count = std::iter::once(&p.main)
        .chain(p.blocks.values())
        .flat_map(|b| b.occupied())
        .map(|(_, _, c)| c.sublayouts.len())
        .sum();
    ProgramStats {
        cells: rows * cols,
        occupied_cells: p.main.occupied_count(),
        sublayout_count,
        max_depth: p.max_depth(),
        token_count: text.split_whitespace().count(),
        char_count: text.chars().count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{CellSpec, SublayoutRef};
    use crate::vocab::Key;

    #[test]
    fn all_empty_row() {
        let p = parse_llmsli("llmsli grid=1m\n0 0 0\n").unwrap();
        assert_eq!(p.main.dims(), (1, 3));
        assert_eq!(p.main.occupied_count(), 0);
        assert_eq!(p.grid(), GridSpec { cell_size: 1.0, rows: 1, cols: 3 });
    }

    #[test]
    fn tv_on_top_snippet() {
        let src = "llmsli grid=1m\n0 4@180(TV_on_top)\nsublayout TV:\n4\n";
        let p = parse_llmsli(src).unwrap();
        let c = p.main.rows[0][1].as_ref().unwrap();
        assert_eq!(c.key, Key::Code(4));
        assert_eq!(c.yaw_deg, 180);
        assert_eq!(c.sublayouts, vec![SublayoutRef { block: "TV".into(), face: Face::Top }]);
        assert!(p.blocks.contains_key("TV"));
    }

    #[test]
    fn b_on_top_snippet() {
        let p = parse_llmsli("llmsli grid=50cm\nmain:\n62@30(B_on_top)\nsublayout B:\n1 1\n").unwrap();
        let c = p.main.rows[0][0].as_ref().unwrap();
        assert_eq!(c.key, Key::Code(62));
        assert_eq!(c.yaw_deg, 30);
        assert_eq!(c.sublayouts[0].block, "B");
        assert_eq!(p.header.cell_size, 0.5);
    }

    #[test]
    fn header_variants() {
        let p = parse_llmsli("# comment\n\nllmsli dims=1x2 grid=75cm floor=6x6m height=2.8m\n1 0\n").unwrap();
        assert_eq!(p.header.cell_size, 0.75);
        assert_eq!(p.header.floor, Some((6.0, 6.0)));
        assert_eq!(p.header.height, Some(2.8));
        for bad in [
            "llmsli\n1\n",
            "llmsli grid=1\n1\n",
            "llmsli grid=0m\n1\n",
            "llmsli grid=1m grid=1m\n1\n",
            "llmsli grid=1m color=red\n1\n",
            "llmslb grid=1m\n1\n",
            "",
        ] {
            assert!(matches!(parse_llmsli(bad), Err(ParseError::Syntax { .. })), "{bad:?}");
        }
    }

    #[test]
    fn ragged_and_dims() {
        assert!(matches!(parse_llmsli("llmsli grid=1m\n1 0\n0\n"), Err(ParseError::RaggedGrid { .. })));
        assert!(matches!(
            parse_llmsli("llmsli grid=1m dims=2x2\n1 0\n"),
            Err(ParseError::RaggedGrid { what: "rows", .. })
        ));
        assert!(matches!(
            parse_llmsli("llmsli grid=1m dims=1x3\n1 0\n"),
            Err(ParseError::RaggedGrid { what: "columns", .. })
        ));
        let p = parse_llmsli("llmsli grid=1m dims=2x2\n1 0\n0 0\n").unwrap();
        assert_eq!(p.grid().cell_count(), 4);
    }

    #[test]
    fn dangling_and_cycles() {
        let e = parse_llmsli("llmsli grid=1m\n1(X_on_top)\n").unwrap_err();
        assert!(matches!(e, ParseError::DanglingBlock { ref name, line: 2, col: 3 } if name == "X"));

        let e = parse_llmsli("llmsli grid=1m\n1(A_on_top)\nsublayout A:\n2(A_on_top)\n").unwrap_err();
        assert!(matches!(e, ParseError::Cycle { .. }));

        let e = parse_llmsli("llmsli grid=1m\n1(A_on_top)\nsublayout A:\n2(B_on_front)\nsublayout B:\n3(A_on_top)\n")
            .unwrap_err();
        match e {
            ParseError::Cycle { chain, .. } => assert_eq!(chain, vec!["A", "B", "A"]),
            e => panic!("{e:?}"),
        }
        // unreferenced self-loop is still rejected
        assert!(matches!(
            parse_llmsli("llmsli grid=1m\n1\nsublayout Z:\n2(Z_on_top)\n"),
            Err(ParseError::Cycle { .. })
        ));
    }

    #[test]
    fn nesting_depth_limit() {
        let chain = |n: usize| {
            let mut s = String::from("llmsli grid=1m\n1(B0_on_top)\n");
            for k in 0..n {
                if k + 1 < n {
                    s.push_str(&format!("sublayout B{k}:\n1(B{}_on_top)\n", k + 1));
                } else {
                    s.push_str(&format!("sublayout B{k}:\n1\n"));
                }
            }
            s
        };
        let p = parse_llmsli(&chain(8)).unwrap();
        assert_eq!(p.max_depth(), 8);
        assert!(matches!(parse_llmsli(&chain(9)), Err(ParseError::DepthExceeded { depth: 9, .. })));
    }

    #[test]
    fn structure_errors() {
        for bad in [
            "llmsli grid=1m\n1\nmain:\n1\n",
            "llmsli grid=1m\n1\nsublayout A:\n1\nsublayout A:\n1\n",
            "llmsli grid=1m\nsublayout A:\n1\n",
            "llmsli grid=1m\n1(A_on_top)\nsublayout A:\n",
        ] {
            assert!(parse_llmsli(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn canonical_printing() {
        let p = parse_llmsli("llmsli grid=1m\n0\n").unwrap();
        assert_eq!(print_llmsli(&p), "llmsli grid=1m\n0\n");
        assert_eq!(print_llmsli(&p).lines().count(), 2);

        let src = "llmsli   grid=100cm\n\n1@0   4@180(TV_on_top)\nsublayout TV:\n4@360\n";
        let p = parse_llmsli(src).unwrap();
        let once = print_llmsli(&p);
        assert_eq!(once, "llmsli grid=1m\n1 4@180(TV_on_top)\nsublayout TV:\n4@360\n");
        let p2 = parse_llmsli(&once).unwrap();
        assert_eq!(p2, p);
        assert_eq!(print_llmsli(&p2), once);
    }

    #[test]
    fn blocks_printed_in_reference_order() {
        let src = "llmsli grid=1m\n1(Z_on_top) 1(A_on_top)\nsublayout A:\n2\nsublayout Q:\n3\nsublayout Z:\n2(Y_on_front)\nsublayout Y:\n5\n";
        let text = print_llmsli(&parse_llmsli(src).unwrap());
        let order: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix("sublayout ")).collect();
        assert_eq!(order, vec!["Z:", "A:", "Y:", "Q:"]);
    }

    #[test]
    fn stats_counts() {
        let p = parse_llmsli("llmsli grid=1m\n0\n").unwrap();
        assert_eq!(program_stats(&p).occupied_cells, 0);

        let mut rows = vec![vec![None; 6]; 6];
        for k in 0..5 {
            rows[k][k] = Some(CellSpec::new(1));
        }
        let p = SceneProgram {
            header: SceneHeader { cell_size: 1.0, dims: None, floor: None, height: None },
            main: GridBlock::new(MAIN_BLOCK, rows),
            blocks: BTreeMap::new(),
        };
        let s = program_stats(&p);
        assert_eq!((s.cells, s.occupied_cells), (36, 5));
    }

    #[test]
    fn token_count_of_fixed_sample() {
        // canonical text, counted by hand:
        //   llmsli grid=1m          -> 2
        //   1 0 3@180(TV_on_top)    -> 3
        //   0 2 0                   -> 3
        //   5@90 0 0                -> 3
        //   sublayout TV:           -> 2
        //   4                       -> 1
        let src = "llmsli grid=1m\n1 0 3@180(TV_on_top)\n0 2 0\n5@90 0 0\nsublayout TV:\n4\n";
        let s = program_stats(&parse_llmsli(src).unwrap());
        assert_eq!(s.token_count, 14);
        assert_eq!(s.char_count, src.chars().count());
        assert_eq!(s.sublayout_count, 1);
        assert_eq!(s.max_depth, 1);
        assert_eq!((s.cells, s.occupied_cells), (9, 4));
    }

    #[test]
    fn invalid_utf8_is_syntax_error() {
        let e = parse_llmsli_bytes(b"llmsli grid=1m\n1 \xff\n").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 2, col: 3, .. }));
    }
}
