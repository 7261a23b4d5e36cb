//! Random program generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use spatialgrammar::llmslb::{orphan_openings, BuildingHeader, OpeningParams, StructCell};
use spatialgrammar::llmsli::SceneHeader;
use spatialgrammar::{BuildingProgram, CellSpec, Face, GridBlock, Key, SceneProgram, StructSymbol, Vocabulary};

pub const CELL_SIZES: [f64; 5] = [0.5, 0.75, 1.0, 1.5, 2.0];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Short decimal in `[lo, hi]` that prints and parses back exactly.
pub fn length(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let v: f64 = rng.gen_range(lo..=hi);
    ((v * 100.0).round() / 100.0).max(0.01)
}

pub fn key(rng: &mut ChaCha8Rng, vocab: &Vocabulary) -> Key {
    let e = vocab.entries().choose(rng).unwrap();
    match e.code {
        Some(c) if rng.gen_bool(0.7) => Key::Code(c),
        _ => Key::Ident(e.identifier.clone()),
    }
}

pub fn yaw(rng: &mut ChaCha8Rng) -> i32 {
    if rng.gen_bool(0.7) {
        *[0, 90, 180, 270].choose(rng).unwrap()
    } else {
        rng.gen_range(-720..=720)
    }
}

struct Blocks<'a> {
    vocab: &'a Vocabulary,
    blocks: BTreeMap<String, GridBlock>,
    max_depth: usize,
    faces: &'a [Face],
}

impl Blocks<'_> {
    fn cell(&mut self, rng: &mut ChaCha8Rng, depth: usize) -> CellSpec {
        let mut c = CellSpec::new(key(rng, self.vocab)).with_yaw(yaw(rng));
        if rng.gen_bool(0.2) {
            c = c.with_size(length(rng, 0.05, 2.0), length(rng, 0.05, 2.0), length(rng, 0.05, 2.0));
        }
        if depth < self.max_depth {
            let mut faces = self.faces.to_vec();
            faces.shuffle(rng);
            for face in faces {
                if !rng.gen_bool(0.3) {
                    break;
                }
                let name = self.block(rng, depth + 1);
                c = c.with_sublayout(&name, face);
            }
        }
        c
    }

    /// Adds a block with at least one object and returns its name.
    fn block(&mut self, rng: &mut ChaCha8Rng, depth: usize) -> String {
        let name = format!("B{}", self.blocks.len());
        self.blocks.insert(name.clone(), GridBlock::new(&name, vec![]));
        let (r, c) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let mut rows = vec![vec![None; c]; r];
        let forced = (rng.gen_range(0..r), rng.gen_range(0..c));
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                if (i, j) == forced || rng.gen_bool(0.4) {
                    *slot = Some(self.cell(rng, depth));
                }
            }
        }
        let mut b = GridBlock::new(&name, rows);
        if rng.gen_bool(0.3) {
            b.declared_dims = Some((r, c));
        }
        self.blocks.insert(name.clone(), b);
        name
    }
}

fn sized(rng: &mut ChaCha8Rng) -> (f64, usize, usize) {
    (*CELL_SIZES.choose(rng).unwrap(), rng.gen_range(1..=6), rng.gen_range(1..=6))
}

/// Any well-formed layout program: random codes and identifiers, yaws,
/// size overrides and nested sub-layouts up to `max_depth`.
pub fn random_program(rng: &mut ChaCha8Rng, vocab: &Vocabulary, max_depth: usize) -> SceneProgram {
    let (g, rows, cols) = sized(rng);
    let mut b = Blocks {
        vocab,
        blocks: BTreeMap::new(),
        max_depth,
        faces: &Face::OBJECT_FACES,
    };
    let main_rows = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| rng.gen_bool(0.4).then(|| b.cell(rng, 0)))
                .collect()
        })
        .collect();
    let dims = rng.gen_bool(0.5).then_some((rows, cols));
    let mut main = GridBlock::new("main", main_rows);
    main.declared_dims = dims;
    SceneProgram {
        header: SceneHeader {
            cell_size: g,
            dims,
            floor: rng
                .gen_bool(0.2)
                .then(|| (rows as f64 * g, cols as f64 * g)),
            height: rng.gen_bool(0.2).then(|| length(rng, 2.0, 4.0)),
        },
        main,
        blocks: b.blocks,
    }
}

/// Hierarchical scene meant to compile: every sub-layout sits on a top
/// face.
pub fn stacked_program(rng: &mut ChaCha8Rng, vocab: &Vocabulary, max_depth: usize) -> SceneProgram {
    let mut p = random_program(rng, vocab, max_depth);
    for b in std::iter::once(&mut p.main).chain(p.blocks.values_mut()) {
        for row in &mut b.rows {
            for c in row.iter_mut().flatten() {
                c.sublayouts.truncate(1);
                for r in &mut c.sublayouts {
                    r.face = Face::Top;
                }
            }
        }
    }
    p
}

/// Any building the parser accepts: random symbols, header values and wall
/// sub-layouts. Openings cut off from every wall become walls.
pub fn random_building(rng: &mut ChaCha8Rng, vocab: &Vocabulary) -> BuildingProgram {
    let (g, rows, cols) = sized(rng);
    let mut b = Blocks {
        vocab,
        blocks: BTreeMap::new(),
        max_depth: 2,
        faces: &Face::OBJECT_FACES,
    };
    let wall_height = if rng.gen_bool(0.5) { 2.6 } else { length(rng, 2.2, 4.0) };
    let cells = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    let symbol = *[
                        StructSymbol::Wall,
                        StructSymbol::Wall,
                        StructSymbol::Door,
                        StructSymbol::Window,
                        StructSymbol::Empty,
                        StructSymbol::Empty,
                    ]
                    .choose(rng)
                    .unwrap();
                    let mut c = StructCell::new(symbol);
                    if symbol == StructSymbol::Wall && rng.gen_bool(0.2) {
                        let name = b.block(rng, 1);
                        c.sublayouts.push(spatialgrammar::SublayoutRef {
                            block: name,
                            face: *Face::WALL_FACES.choose(rng).unwrap(),
                        });
                    }
                    c
                })
                .collect()
        })
        .collect();
    let ceiling = rng.gen_bool(0.2).then(|| b.block(rng, 1));
    let opening = |rng: &mut ChaCha8Rng, w: f64, h: f64, s: f64| {
        if rng.gen_bool(0.5) {
            OpeningParams { width: w, height: h, sill: s }
        } else {
            let height = length(rng, 0.5, wall_height * 0.6);
            OpeningParams {
                width: length(rng, 0.3, 1.5),
                height,
                sill: length(rng, 0.0, wall_height - height).min(wall_height - height),
            }
        }
    };
    let door = opening(rng, 0.9, 2.0f64.min(wall_height), 0.0);
    let window = opening(rng, 1.2, 1.2, 0.9);
    let dims = rng.gen_bool(0.5).then_some((rows, cols));
    let mut p = BuildingProgram {
        header: BuildingHeader {
            cell_size: g,
            dims,
            wall_height,
            wall_thickness: if rng.gen_bool(0.5) { 0.2 } else { length(rng, 0.05, 0.4) },
            door,
            window,
            ceiling,
        },
        cells,
        blocks: b.blocks,
    };
    for (i, j) in orphan_openings(&p) {
        p.cells[i][j] = StructCell::new(StructSymbol::Wall);
    }
    p
}
