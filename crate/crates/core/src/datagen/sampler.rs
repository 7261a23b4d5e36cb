use std::collections::{BTreeMap, HashSet};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::template::{PoolEntry, RelationRule, SceneTemplate};
use super::{sample_rng, DatagenError};
use crate::compiler::{anchor_sublayout, compile_placement, compile_scene, compose_frames, CompileOptions, DEFAULT_CEILING_HEIGHT};
use crate::geometry::OrientedBox;
use crate::grid::GridSpec;
use crate::llmsli::{parse_llmsli, print_llmsli, SceneHeader, SceneProgram, MAIN_BLOCK};
use crate::relation::{relation_holds, relation_satisfied, Relation};
use crate::syntax::{CellSpec, Face, GridBlock};
use crate::validator::{obb_intersect, validate, Envelope, ValidateOptions, DEFAULT_EPS, DEFAULT_TOL};
use crate::vocab::Vocabulary;

/// Draws per dataset request before giving up.
pub const OVERSAMPLE: usize = 4;

/// One (prompt, reasoning, program) triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SftSample {
    pub prompt: String,
    pub reasoning: String,
    pub code: String,
    /// Parsed, compiled and passed validation.
    pub validated: bool,
    pub template: String,
    /// Template rules whose subject and object both occur in the scene;
    /// all hold in `code`.
    pub relations: Vec<RelationRule>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// A floor object chosen for a scene, with the surface items on its top.
struct Item<'a> {
    entry: &'a PoolEntry,
    tops: Vec<&'a str>,
}

struct Placed {
    key: String,
    cell: (usize, usize),
    yaw: i32,
    tops: Vec<String>,
    root: OrientedBox,
    boxes: Vec<OrientedBox>,
}

fn draw_items<'a>(t: &'a SceneTemplate, rank: &BTreeMap<String, usize>, rng: &mut ChaCha8Rng) -> Vec<Item<'a>> {
    let (lo, hi) = t.count_range;
    let target = rng.gen_range(lo..=hi);
    let mut counts: Vec<usize> = t.objects.iter().map(|o| o.min).collect();
    let mut total: usize = counts.iter().sum();
    while total < target {
        let open: Vec<usize> = (0..t.objects.len()).filter(|&k| counts[k] < t.objects[k].max).collect();
        if open.is_empty() {
            break;
        }
        let w = WeightedIndex::new(open.iter().map(|&k| t.objects[k].weight)).expect("weights checked by the template");
        counts[open[w.sample(rng)]] += 1;
        total += 1;
    }
    let mut order: Vec<usize> = (0..t.objects.len()).collect();
    order.sort_by_key(|&k| rank[&t.objects[k].key]);
    let mut items = Vec::with_capacity(total);
    for k in order {
        let entry = &t.objects[k];
        for _ in 0..counts[k] {
            let tops = match &entry.top {
                Some(top) => {
                    let n = rng.gen_range(top.min..=top.max);
                    (0..n)
                        .map(|_| top.choices.choose(rng).expect("non-empty choices").as_str())
                        .collect()
                }
                None => Vec::new(),
            };
            items.push(Item { entry, tops });
        }
    }
    items
}

fn top_block(name: &str, tops: &[String], vocab: &Vocabulary) -> Result<GridBlock, DatagenError> {
    let rows = tops
        .iter()
        .map(|k| Ok(vec![Some(CellSpec::new(vocab.preferred_key(k)?))]))
        .collect::<Result<_, crate::error::LookupError>>()
        .map_err(|e| DatagenError::InvalidTemplate(e.to_string()))?;
    Ok(GridBlock::new(name, rows))
}

fn rounded_bearing(from: (f64, f64), to: (f64, f64)) -> i32 {
    let deg = (to.1 - from.1).atan2(to.0 - from.0).to_degrees().round() as i32;
    deg.rem_euclid(360)
}

/// Every collision-free, in-bounds pose for `item` that satisfies the
/// rules it is the subject of, in row-major order.
fn candidates(
    item: &Item,
    t: &SceneTemplate,
    grid: &GridSpec,
    vocab: &Vocabulary,
    placed: &[Placed],
) -> Result<Vec<Placed>, DatagenError> {
    let key = item.entry.key.as_str();
    let tops: Vec<String> = item.tops.iter().map(|s| s.to_string()).collect();
    let block = if tops.is_empty() {
        None
    } else {
        Some(top_block("S", &tops, vocab)?)
    };
    let rules: Vec<&RelationRule> = t.relations.iter().filter(|r| r.subject == key).collect();
    let (x0, y0, x1, y1) = grid.floor_rect();
    let floor = Envelope::Rect(x0, y0, x1, y1);
    let taken: HashSet<(usize, usize)> = placed.iter().map(|p| p.cell).collect();
    let code = vocab.preferred_key(key).map_err(|e| DatagenError::InvalidTemplate(e.to_string()))?;
    let mut out = Vec::new();
    for i in 0..grid.rows {
        for j in 0..grid.cols {
            if taken.contains(&(i, j)) {
                continue;
            }
            let here = grid.cell_center(i, j);
            let mut yaws = t.yaw_choices.clone();
            for r in rules.iter().filter(|r| r.relation == Relation::Faces) {
                for p in placed.iter().filter(|p| p.key == r.object) {
                    let c = p.root.center();
                    let y = rounded_bearing(here, (c.x, c.y));
                    if !yaws.contains(&y) {
                        yaws.push(y);
                    }
                }
            }
            for yaw in yaws {
                let spec = CellSpec::new(code.clone()).with_yaw(yaw);
                let root = compile_placement(&spec, (i, j), grid, vocab, DEFAULT_CEILING_HEIGHT)
                    .map_err(|e| DatagenError::InvalidTemplate(e.to_string()))?;
                let mut boxes = vec![root];
                if let Some(b) = &block {
                    let kids = anchor_sublayout(&root, Face::Top, b, vocab)
                        .map_err(|e| DatagenError::InvalidTemplate(e.to_string()))?;
                    boxes.extend(kids.iter().map(|k| compose_frames(&root, &k.local)));
                }
                let inside = boxes
                    .iter()
                    .all(|b| b.footprint().iter().all(|&(x, y)| floor.contains(x, y, DEFAULT_TOL)));
                if !inside {
                    continue;
                }
                let clear = placed
                    .iter()
                    .flat_map(|p| &p.boxes)
                    .all(|o| boxes.iter().all(|b| obb_intersect(b, o, DEFAULT_EPS).is_none()));
                if !clear {
                    continue;
                }
                let related = rules.iter().all(|r| {
                    let mut refs = placed.iter().filter(|p| p.key == r.object).peekable();
                    refs.peek().is_none() || refs.any(|p| relation_holds(&root, r.relation, &p.root, grid.cell_size))
                });
                if related {
                    out.push(Placed {
                        key: key.to_string(),
                        cell: (i, j),
                        yaw,
                        tops: tops.clone(),
                        root,
                        boxes,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn build_program(placed: &[Placed], grid: &GridSpec, vocab: &Vocabulary) -> Result<SceneProgram, DatagenError> {
    let mut rows = vec![vec![None; grid.cols]; grid.rows];
    let mut blocks = BTreeMap::new();
    for p in placed {
        let code = vocab.preferred_key(&p.key).map_err(|e| DatagenError::InvalidTemplate(e.to_string()))?;
        let mut spec = CellSpec::new(code).with_yaw(p.yaw);
        if !p.tops.is_empty() {
            let base = p.tops[0].to_uppercase();
            let name = (1..)
                .map(|n| if n == 1 { base.clone() } else { format!("{base}{n}") })
                .find(|n| !blocks.contains_key(n))
                .expect("unbounded suffixes");
            blocks.insert(name.clone(), top_block(&name, &p.tops, vocab)?);
            spec = spec.with_sublayout(&name, Face::Top);
        }
        rows[p.cell.0][p.cell.1] = Some(spec);
    }
    Ok(SceneProgram {
        header: SceneHeader {
            cell_size: grid.cell_size,
            dims: Some((grid.rows, grid.cols)),
            floor: None,
            height: None,
        },
        main: GridBlock::new(MAIN_BLOCK, rows),
        blocks,
    })
}

/// The filter every emitted program passes: it parses, compiles, validates
/// and satisfies `rules`.
pub fn passes_filter(code: &str, rules: &[RelationRule], vocab: &Vocabulary) -> bool {
    let Ok(p) = parse_llmsli(code) else { return false };
    let Ok(s) = compile_scene(&p, vocab, &CompileOptions::default()) else {
        return false;
    };
    validate(&s, None, &ValidateOptions::default()).passed
        && rules
            .iter()
            .all(|r| relation_satisfied(&s, &r.subject, r.relation, &r.object))
}

/// Samples one scene from `t`. The same `(seed, index)` always gives the
/// same sample.
pub fn sample_scene(t: &SceneTemplate, vocab: &Vocabulary, seed: u64, index: u64) -> Result<SftSample, DatagenError> {
    let rank = t.placement_rank()?;
    let grid = t.grid()?;
    let mut rng = sample_rng(seed, index);
    'attempt: for _ in 0..t.max_attempts {
        let items = draw_items(t, &rank, &mut rng);
        let mut placed: Vec<Placed> = Vec::with_capacity(items.len());
        for item in &items {
            let mut c = candidates(item, t, &grid, vocab, &placed)?;
            if c.is_empty() {
                continue 'attempt;
            }
            let k = rng.gen_range(0..c.len());
            placed.push(c.swap_remove(k));
        }
        let program = build_program(&placed, &grid, vocab)?;
        let code = print_llmsli(&program);
        let present: HashSet<&str> = placed.iter().map(|p| p.key.as_str()).collect();
        let relations: Vec<RelationRule> = t
            .relations
            .iter()
            .filter(|r| present.contains(r.subject.as_str()) && present.contains(r.object.as_str()))
            .cloned()
            .collect();
        if !passes_filter(&code, &relations, vocab) {
            continue;
        }
        let text = super::text::describe(t, &placed_view(&placed), &relations, &mut rng);
        return Ok(SftSample {
            prompt: text.prompt,
            reasoning: text.reasoning,
            code,
            validated: true,
            template: t.name.clone(),
            relations,
        });
    }
    Err(DatagenError::TemplateExhausted {
        template: t.name.clone(),
        reason: format!("no valid layout after {} attempts", t.max_attempts),
    })
}

fn placed_view(placed: &[Placed]) -> Vec<super::text::PlacedObject> {
    placed
        .iter()
        .map(|p| super::text::PlacedObject {
            key: p.key.clone(),
            cell: p.cell,
            yaw: p.yaw,
            tops: p.tops.clone(),
        })
        .collect()
}

/// Draws validated, duplicate-free samples until `n` are collected or
/// `OVERSAMPLE * n` draws are spent. Sample `k` of the draw sequence uses
/// stream `k` of `seed`, so serial and parallel runs agree.
pub fn generate_sft_dataset(
    t: &SceneTemplate,
    vocab: &Vocabulary,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<SftSample>, DatagenError> {
    if n == 0 {
        return Err(DatagenError::InvalidTemplate("requested an empty dataset".into()));
    }
    t.check(vocab)?;
    let budget = OVERSAMPLE * n;
    let mut out = Vec::with_capacity(n);
    let mut seen = HashSet::new();
    let mut next = 0;
    while out.len() < n && next < budget {
        let batch = (n - out.len() + 16).min(budget - next);
        let range = next as u64..(next + batch) as u64;
        let drawn: Vec<Result<SftSample, DatagenError>> = match exec {
            Execution::Serial => range.map(|k| sample_scene(t, vocab, seed, k)).collect(),
            Execution::Parallel => range.into_par_iter().map(|k| sample_scene(t, vocab, seed, k)).collect(),
        };
        for r in drawn {
            if out.len() == n {
                break;
            }
            match r {
                Ok(s) => {
                    if seen.insert(s.code.clone()) {
                        out.push(s);
                    }
                }
                Err(DatagenError::TemplateExhausted { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        next += batch;
    }
    if out.len() < n {
        return Err(DatagenError::TemplateExhausted {
            template: t.name.clone(),
            reason: format!("only {} distinct valid samples from {budget} draws", out.len()),
        });
    }
    Ok(out)
}
