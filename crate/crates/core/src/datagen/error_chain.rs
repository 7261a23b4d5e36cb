//! Typed corruptions of valid programs and the verified error chain built
//! from them.

use std::collections::HashSet;
use std::fmt;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::{Execution, SftSample};
use super::template::RelationRule;
use super::text::{noun, rule_sentence};
use super::{sample_rng, DatagenError};
use crate::compiler::{compile_placement, compile_scene, CompileOptions, CompiledScene, DEFAULT_CEILING_HEIGHT};
use crate::geometry::{OrientedBox, Vec3};
use crate::llmsli::{parse_llmsli, print_llmsli, SceneProgram};
use crate::relation::{relation_holds, relation_satisfied};
use crate::syntax::CellSpec;
use crate::validator::{check_collisions, obb_intersect, validate, Envelope, ValidateOptions, DEFAULT_EPS, DEFAULT_TOL};
use crate::vocab::{Category, Vocabulary};

/// Fresh subsets tried before a chain gives up.
pub const CHAIN_ATTEMPTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    Semantic,
    Spatial,
    Collision,
    Syntax,
}

impl ErrorType {
    pub const ALL: [ErrorType; 4] = [ErrorType::Semantic, ErrorType::Spatial, ErrorType::Collision, ErrorType::Syntax];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorType::Semantic => "semantic",
            ErrorType::Spatial => "spatial",
            ErrorType::Collision => "collision",
            ErrorType::Syntax => "syntax",
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Type combinations a chain draws from. Every one includes a syntax or a
/// collision error, so each rejected program fails validation outright;
/// semantic and spatial errors ride along.
pub const CHAIN_SUBSETS: [&[ErrorType]; 9] = {
    use ErrorType::*;
    [
        &[Semantic, Collision],
        &[Semantic, Syntax],
        &[Spatial, Collision],
        &[Spatial, Syntax],
        &[Collision, Syntax],
        &[Semantic, Spatial, Collision],
        &[Semantic, Spatial, Syntax],
        &[Semantic, Collision, Syntax],
        &[Spatial, Collision, Syntax],
    ]
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedError {
    #[serde(rename = "type")]
    pub kind: ErrorType,
    pub description: String,
}

/// First stage at which a rejected program fails.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    Parse,
    Compile,
    Collision,
    Validation,
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureClass::Parse => "parse",
            FailureClass::Compile => "compile",
            FailureClass::Collision => "collision",
            FailureClass::Validation => "validation",
        })
    }
}

/// Runs the full toolchain on `code`; `None` when it passes.
pub fn failure_class(code: &str, vocab: &Vocabulary) -> Option<FailureClass> {
    let Ok(p) = parse_llmsli(code) else {
        return Some(FailureClass::Parse);
    };
    let Ok(s) = compile_scene(&p, vocab, &CompileOptions::default()) else {
        return Some(FailureClass::Compile);
    };
    let report = validate(&s, None, &ValidateOptions::default());
    if !report.collisions.is_empty() {
        Some(FailureClass::Collision)
    } else if !report.passed {
        Some(FailureClass::Validation)
    } else {
        None
    }
}

/// What injections may draw on besides the program itself.
#[derive(Clone, Copy, Debug)]
pub struct ChainContext<'a> {
    pub vocab: &'a Vocabulary,
    /// Identifiers foreign to the room, for semantic errors.
    pub incompatible: &'a [String],
    /// Rules the valid program satisfies, for spatial errors.
    pub rules: &'a [RelationRule],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpoPair {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub injected_errors: Vec<InjectedError>,
    pub failure_class: FailureClass,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainOutcome {
    pub rejected: String,
    pub injected_errors: Vec<InjectedError>,
    pub failure_class: FailureClass,
}

fn failed(kind: ErrorType, reason: impl Into<String>) -> DatagenError {
    DatagenError::InjectionFailed {
        kind,
        reason: reason.into(),
    }
}

fn compile(p: &SceneProgram, vocab: &Vocabulary) -> Option<CompiledScene> {
    compile_scene(p, vocab, &CompileOptions::default()).ok()
}

fn identifier(spec: &CellSpec, vocab: &Vocabulary) -> String {
    vocab
        .lookup(&spec.key)
        .map_or_else(|_| spec.key.to_string(), |e| e.identifier.clone())
}

fn root_cells(p: &SceneProgram) -> Vec<(usize, usize)> {
    p.main.occupied().map(|(i, j, _)| (i, j)).collect()
}

fn empty_cells(p: &SceneProgram) -> Vec<(usize, usize)> {
    let (rows, cols) = p.main.dims();
    (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .filter(|&(i, j)| p.main.rows[i][j].is_none())
        .collect()
}

/// Boxes of every compiled placement outside the subtree rooted at main
/// cell `cell`.
fn other_boxes(s: &CompiledScene, cell: (usize, usize)) -> Vec<OrientedBox> {
    s.placements.iter().filter(|q| q.cell != cell).map(|q| q.bbox).collect()
}

fn root_box(spec: &CellSpec, at: (usize, usize), p: &SceneProgram, vocab: &Vocabulary) -> Option<OrientedBox> {
    compile_placement(spec, at, &p.grid(), vocab, DEFAULT_CEILING_HEIGHT).ok()
}

fn inside(b: &OrientedBox, env: &Envelope) -> bool {
    b.footprint().iter().all(|&(x, y)| env.contains(x, y, DEFAULT_TOL))
}

fn move_root(p: &mut SceneProgram, from: (usize, usize), to: (usize, usize), spec: CellSpec) {
    p.main.rows[from.0][from.1] = None;
    p.main.rows[to.0][to.1] = Some(spec);
}

fn semantic(p: &mut SceneProgram, ctx: &ChainContext, rng: &mut ChaCha8Rng) -> Result<String, DatagenError> {
    let roots = root_cells(p);
    let &(i, j) = roots
        .choose(rng)
        .ok_or_else(|| failed(ErrorType::Semantic, "no object to replace"))?;
    let spec = p.main.rows[i][j].as_mut().expect("occupied");
    let old = identifier(spec, ctx.vocab);
    let options: Vec<&String> = ctx.incompatible.iter().filter(|k| **k != old).collect();
    let new = options
        .choose(rng)
        .ok_or_else(|| failed(ErrorType::Semantic, "template lists no incompatible objects"))?;
    spec.key = ctx.vocab.preferred_key(new).map_err(|e| failed(ErrorType::Semantic, e.to_string()))?;
    Ok(format!(
        "replaced the {} at ({i},{j}) with a {}, which does not belong in this room",
        noun(&old),
        noun(new)
    ))
}

/// Re-poses every root instance of a satisfied rule's subject so that the
/// rule no longer holds. Only poses clear of other objects and inside the
/// floor qualify, so the relation breach is the only new defect.
fn spatial(p: &mut SceneProgram, ctx: &ChainContext, rng: &mut ChaCha8Rng) -> Result<(String, RelationRule), DatagenError> {
    let err = |m: &str| failed(ErrorType::Spatial, m);
    let s = compile(p, ctx.vocab).ok_or_else(|| err("program does not compile"))?;
    let live: Vec<&RelationRule> = ctx
        .rules
        .iter()
        .filter(|r| relation_satisfied(&s, &r.subject, r.relation, &r.object))
        .collect();
    let rule = (*live.choose(rng).ok_or_else(|| err("no satisfied relation to break"))?).clone();
    let refs: Vec<OrientedBox> = s
        .all_placements()
        .filter(|q| q.identifier == rule.object)
        .map(|q| q.bbox)
        .collect();
    let subjects: Vec<(usize, usize)> = p
        .main
        .occupied()
        .filter(|(_, _, c)| identifier(c, ctx.vocab) == rule.subject)
        .map(|(i, j, _)| (i, j))
        .collect();
    let env = Envelope::floor(&s);
    let g = s.grid.cell_size;
    let mut moves = Vec::new();
    for from in subjects {
        let spec = p.main.rows[from.0][from.1].clone().expect("occupied");
        let others = other_boxes(&s, from);
        let mut cells = empty_cells(p);
        cells.insert(0, from);
        let mut options = Vec::new();
        for &to in &cells {
            for yaw in [0, 90, 180, 270] {
                let moved = spec.clone().with_yaw(yaw);
                let Some(b) = root_box(&moved, to, p, ctx.vocab) else { continue };
                let breaks = refs.iter().all(|r| !relation_holds(&b, rule.relation, r, g));
                let clear = inside(&b, &env) && others.iter().all(|o| obb_intersect(&b, o, DEFAULT_EPS).is_none());
                if breaks && clear {
                    options.push((to, moved));
                }
            }
        }
        let (to, moved) = options.choose(rng).cloned().ok_or_else(|| err("no pose breaks the relation"))?;
        moves.push(format!("({},{}) to ({},{}) turned {} degrees", from.0, from.1, to.0, to.1, moved.yaw_deg));
        move_root(p, from, to, moved);
    }
    let s = compile(p, ctx.vocab).ok_or_else(|| err("moved program does not compile"))?;
    if relation_satisfied(&s, &rule.subject, rule.relation, &rule.object) {
        return Err(err("relation still holds after the move"));
    }
    Ok((
        format!(
            "moved the {} from {}, so it is no longer true that {}",
            noun(&rule.subject),
            moves.join(" and from "),
            rule_sentence(&rule)
        ),
        rule,
    ))
}

fn collision(p: &mut SceneProgram, ctx: &ChainContext, rng: &mut ChaCha8Rng) -> Result<String, DatagenError> {
    let err = |m: &str| failed(ErrorType::Collision, m);
    let s = compile(p, ctx.vocab).ok_or_else(|| err("program does not compile"))?;
    let movable: Vec<(usize, usize)> = p
        .main
        .occupied()
        .filter(|(_, _, c)| {
            ctx.vocab
                .lookup(&c.key)
                .is_ok_and(|e| e.category != Category::CeilingMounted)
        })
        .map(|(i, j, _)| (i, j))
        .collect();
    if movable.len() < 2 {
        return Err(err("needs at least two floor objects"));
    }
    let from = *movable.choose(rng).expect("non-empty");
    let spec = p.main.rows[from.0][from.1].clone().expect("occupied");
    let name = noun(&identifier(&spec, ctx.vocab));
    let others = other_boxes(&s, from);
    let hits: Vec<(usize, usize)> = empty_cells(p)
        .into_iter()
        .filter(|&to| {
            root_box(&spec, to, p, ctx.vocab)
                .is_some_and(|b| others.iter().any(|o| obb_intersect(&b, o, DEFAULT_EPS).is_some()))
        })
        .collect();
    let description = if let Some(&to) = hits.choose(rng) {
        move_root(p, from, to, spec);
        format!(
            "moved the {name} from ({},{}) to ({},{}), where it overlaps a neighbor",
            from.0, from.1, to.0, to.1
        )
    } else {
        // no free cell overlaps anything: grow the object over its nearest
        // neighbor instead
        let b = root_box(&spec, from, p, ctx.vocab).ok_or_else(|| err("object does not compile"))?;
        let c = b.center();
        let d = movable
            .iter()
            .filter(|&&q| q != from)
            .map(|&q| {
                let (x, y) = s.grid.cell_center(q.0, q.1);
                (x - c.x).hypot(y - c.y)
            })
            .fold(f64::INFINITY, f64::min);
        let size = b.size();
        let grow = |v: f64| ((v + 2.0 * d) * 100.0).ceil() / 100.0;
        let big = Vec3::new(grow(size.x), grow(size.y), size.z);
        let cell = p.main.rows[from.0][from.1].as_mut().expect("occupied");
        cell.size_override = Some(big);
        format!(
            "enlarged the {name} at ({},{}) to {}x{}x{} m so it overlaps a neighbor",
            from.0, from.1, big.x, big.y, big.z
        )
    };
    let s = compile(p, ctx.vocab).ok_or_else(|| err("collided program does not compile"))?;
    if check_collisions(&s, DEFAULT_EPS).is_empty() {
        return Err(err("edit produced no collision"));
    }
    Ok(description)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Lexeme {
    MergeRows,
    DanglingYaw,
    OpenParen,
    OpenBracket,
    BadDims,
}

fn syntax_edit(text: &str, edit: Lexeme, rng: &mut ChaCha8Rng) -> Option<(String, String)> {
    let lines: Vec<&str> = text.lines().collect();
    // grid rows of the root block: after the header, before any sub-layout
    let rows: Vec<usize> = (1..lines.len())
        .take_while(|&k| !lines[k].starts_with("sublayout"))
        .collect();
    match edit {
        Lexeme::MergeRows => {
            if rows.len() < 2 {
                return None;
            }
            let k = rows[rng.gen_range(0..rows.len() - 1)];
            let mut out: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
            let next = out.remove(k + 1);
            out[k] = format!("{} {next}", out[k]);
            Some((
                out.join("\n") + "\n",
                format!("deleted the row delimiter between grid rows {} and {}", k - 1, k),
            ))
        }
        Lexeme::DanglingYaw => {
            let mut tokens = Vec::new();
            for &k in &rows {
                let mut col = 0;
                for (n, tok) in lines[k].split(' ').enumerate() {
                    if tok != "0" {
                        tokens.push((k, col, n));
                    }
                    col += tok.len() + 1;
                }
            }
            let &(k, col, n) = tokens.choose(rng)?;
            let tok = lines[k].split(' ').nth(n)?;
            let key_len = tok.find(['@', '[', '(']).unwrap_or(tok.len());
            let mut line = lines[k].to_string();
            line.insert(col + key_len, '@');
            let mut out: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
            out[k] = line;
            Some((
                out.join("\n") + "\n",
                format!("left a rotation marker without an angle in grid row {}, column {n}", k - 1),
            ))
        }
        Lexeme::OpenParen | Lexeme::OpenBracket => {
            let target = if edit == Lexeme::OpenParen { ')' } else { ']' };
            let spots: Vec<usize> = text.match_indices(target).map(|(i, _)| i).collect();
            let &at = spots.choose(rng)?;
            let mut out = text.to_string();
            out.remove(at);
            let what = if target == ')' {
                "closing parenthesis of a sub-layout reference"
            } else {
                "closing bracket of a size override"
            };
            Some((out, format!("deleted the {what}")))
        }
        Lexeme::BadDims => {
            let header = lines.first()?;
            let start = header.find("dims=")?;
            let end = header[start..].find(' ').map_or(header.len(), |e| start + e);
            let dims = &header[start + 5..end];
            let (r, _) = dims.split_once('x')?;
            let mut out = text.to_string();
            out.replace_range(start..end, &format!("dims={r}x"));
            Some((out, "truncated the column count in the dims header".to_string()))
        }
    }
}

fn syntax(text: &str, rng: &mut ChaCha8Rng) -> Result<(String, String), DatagenError> {
    let mut edits = [
        Lexeme::MergeRows,
        Lexeme::DanglingYaw,
        Lexeme::OpenParen,
        Lexeme::OpenBracket,
        Lexeme::BadDims,
    ];
    edits.shuffle(rng);
    for edit in edits {
        if let Some((out, desc)) = syntax_edit(text, edit, rng) {
            if parse_llmsli(&out).is_err() {
                return Ok((out, desc));
            }
        }
    }
    Err(failed(ErrorType::Syntax, "no edit breaks the parse"))
}

/// Applies one error of `kind` to the valid program `s`.
pub fn inject_error(
    s: &str,
    kind: ErrorType,
    ctx: &ChainContext,
    seed: u64,
) -> Result<(String, InjectedError), DatagenError> {
    let mut rng = sample_rng(seed, 0);
    let (text, description) = if kind == ErrorType::Syntax {
        syntax(s, &mut rng)?
    } else {
        let mut p = parse_llmsli(s).map_err(|e| failed(kind, format!("input does not parse: {e}")))?;
        let d = structural(&mut p, kind, ctx, &mut rng)?.0;
        (print_llmsli(&p), d)
    };
    Ok((text, InjectedError { kind, description }))
}

fn structural(
    p: &mut SceneProgram,
    kind: ErrorType,
    ctx: &ChainContext,
    rng: &mut ChaCha8Rng,
) -> Result<(String, Option<RelationRule>), DatagenError> {
    match kind {
        ErrorType::Semantic => semantic(p, ctx, rng).map(|d| (d, None)),
        ErrorType::Spatial => spatial(p, ctx, rng).map(|(d, r)| (d, Some(r))),
        ErrorType::Collision => collision(p, ctx, rng).map(|d| (d, None)),
        ErrorType::Syntax => unreachable!("syntax edits work on text"),
    }
}

fn try_chain(
    chosen: &str,
    subset: &[ErrorType],
    ctx: &ChainContext,
    rng: &mut ChaCha8Rng,
) -> Result<ChainOutcome, DatagenError> {
    let mut p = parse_llmsli(chosen).map_err(|e| failed(subset[0], format!("input does not parse: {e}")))?;
    let incompatible: HashSet<&str> = ctx.incompatible.iter().map(String::as_str).collect();
    let mut errors = Vec::new();
    let mut broken = None;
    for &kind in subset.iter().filter(|k| **k != ErrorType::Syntax) {
        let (description, rule) = structural(&mut p, kind, ctx, rng)?;
        broken = broken.or(rule);
        errors.push(InjectedError { kind, description });
    }
    // every structural error must still be observable once all are applied
    let s = compile(&p, ctx.vocab).ok_or_else(|| failed(subset[0], "corrupted program does not compile"))?;
    let visible = subset.iter().all(|k| match k {
        ErrorType::Semantic => s.placements.iter().any(|q| incompatible.contains(q.identifier.as_str())),
        ErrorType::Spatial => broken
            .as_ref()
            .is_some_and(|r| !relation_satisfied(&s, &r.subject, r.relation, &r.object)),
        ErrorType::Collision => !check_collisions(&s, DEFAULT_EPS).is_empty(),
        ErrorType::Syntax => true,
    });
    if !visible {
        return Err(failed(subset[0], "a later edit masked an earlier one"));
    }
    let mut rejected = print_llmsli(&p);
    if subset.contains(&ErrorType::Syntax) {
        let (text, description) = syntax(&rejected, rng)?;
        rejected = text;
        errors.push(InjectedError {
            kind: ErrorType::Syntax,
            description,
        });
    }
    let failure_class = failure_class(&rejected, ctx.vocab)
        .ok_or_else(|| failed(subset[0], "rejected program still validates"))?;
    Ok(ChainOutcome {
        rejected,
        injected_errors: errors,
        failure_class,
    })
}

/// Corrupts `chosen` with two or three errors of distinct types and checks
/// that the result fails the toolchain. Draws a fresh type subset on each
/// failed try.
pub fn error_chain(chosen: &str, ctx: &ChainContext, seed: u64, stream: u64) -> Result<ChainOutcome, DatagenError> {
    let mut rng = sample_rng(seed, stream);
    for _ in 0..CHAIN_ATTEMPTS {
        let subset = *CHAIN_SUBSETS.choose(&mut rng).expect("non-empty");
        if let Ok(out) = try_chain(chosen, subset, ctx, &mut rng) {
            return Ok(out);
        }
    }
    Err(DatagenError::ChainFailed { attempts: CHAIN_ATTEMPTS })
}

/// Result of pairing a dataset; chains that fail are counted, not fatal.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DpoBatch {
    pub pairs: Vec<DpoPair>,
    pub failed: usize,
}

/// `n` pairs drawn round-robin over `samples`; pair `k` uses stream `k` of
/// `seed`. With `n = samples.len()` each sample yields one pair.
pub fn generate_dpo_pairs_n(
    samples: &[SftSample],
    incompatible: &[String],
    vocab: &Vocabulary,
    n: usize,
    seed: u64,
    exec: Execution,
) -> DpoBatch {
    if samples.is_empty() {
        return DpoBatch::default();
    }
    let one = |k: usize| {
        let s = &samples[k % samples.len()];
        let ctx = ChainContext {
            vocab,
            incompatible,
            rules: &s.relations,
        };
        error_chain(&s.code, &ctx, seed, k as u64).ok().map(|out| DpoPair {
            prompt: s.prompt.clone(),
            chosen: s.code.clone(),
            rejected: out.rejected,
            injected_errors: out.injected_errors,
            failure_class: out.failure_class,
        })
    };
    let results: Vec<Option<DpoPair>> = match exec {
        Execution::Serial => (0..n).map(one).collect(),
        Execution::Parallel => (0..n).into_par_iter().map(one).collect(),
    };
    let failed = results.iter().filter(|r| r.is_none()).count();
    DpoBatch {
        pairs: results.into_iter().flatten().collect(),
        failed,
    }
}

/// One pair per sample.
pub fn generate_dpo_pairs(
    samples: &[SftSample],
    incompatible: &[String],
    vocab: &Vocabulary,
    seed: u64,
    exec: Execution,
) -> DpoBatch {
    generate_dpo_pairs_n(samples, incompatible, vocab, samples.len(), seed, exec)
}
