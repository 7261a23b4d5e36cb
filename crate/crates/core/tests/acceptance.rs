//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use spatialgrammar::datagen::{
    extract_pretrain_corpus, failure_class, generate_dpo_pairs, generate_dpo_pairs_n, generate_sft_dataset, sft_pairs,
    to_jsonl, ErrorType, Execution, SceneTemplate, SftSample,
};
use spatialgrammar::{
    collision_rate, compile_scene, compose_frames, evaluate_drfr, export_scene, grid_dimensions, obb_intersect,
    parse_llmslb, parse_llmslb_bytes, parse_llmsli, parse_llmsli_bytes, print_llmslb, print_llmsli, validate,
    AtomicCheck, Category, Checklist, CompileOptions, CompiledScene, ExportFormat, Face, OrientedBox, ValidateOptions,
    Vec3, Vocabulary,
};

use common::{random_building, random_program, rng, stacked_program, CELL_SIZES};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn compile(src: &str, vocab: &Vocabulary) -> CompiledScene {
    compile_scene(&parse_llmsli(src).unwrap(), vocab, &CompileOptions::default()).unwrap()
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn c01_cell_placement() -> Outcome {
    let vocab = Vocabulary::builtin();
    let entries: Vec<_> = vocab
        .entries()
        .iter()
        .filter(|e| e.category != Category::CeilingMounted)
        .collect();
    let mut r = rng(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut bad_z = 0;
    for _ in 0..10_000 {
        let g = if r.gen_bool(0.5) {
            *CELL_SIZES.choose(&mut r).unwrap()
        } else {
            common::length(&mut r, 0.1, 3.0)
        };
        let (rows, cols) = (r.gen_range(1..=12), r.gen_range(1..=12));
        let (i, j) = (r.gen_range(0..rows), r.gen_range(0..cols));
        let e = entries.choose(&mut r).unwrap();
        let yaw = common::yaw(&mut r);
        let mut src = format!("llmsli grid={g}m dims={rows}x{cols}\n");
        for a in 0..rows {
            let row: Vec<String> = (0..cols)
                .map(|b| if (a, b) == (i, j) { format!("{}@{yaw}", e.identifier) } else { "0".into() })
                .collect();
            src.push_str(&row.join(" "));
            src.push('\n');
        }
        let s = compile(&src, &vocab);
        let c = s.placements[0].bbox.center();
        worst = worst.max((c.x - i as f64 * g).hypot(c.y - j as f64 * g));
        if s.placements[0].bbox.bottom() != 0.0 {
            bad_z += 1;
        }
    }
    let t = start.elapsed();
    check(
        worst < 1e-9 && bad_z == 0 && t < Duration::from_secs(5),
        format!("max xy error {worst:.1e}, {bad_z} non-zero bottoms, {t:.2?}"),
    )
}

/// Row-major 4x4 homogeneous transform for a yaw-only pose.
fn pose_matrix(b: &OrientedBox) -> [[f64; 4]; 4] {
    let (s, c) = b.yaw().sin_cos();
    let t = b.center();
    [[c, -s, 0.0, t.x], [s, c, 0.0, t.y], [0.0, 0.0, 1.0, t.z], [0.0, 0.0, 0.0, 1.0]]
}

fn mat_mul(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn c02_frame_composition() -> Outcome {
    let mut r = rng(2);
    let unit = Vec3::new(1.0, 1.0, 1.0);
    let mut worst_c = 0.0f64;
    let mut worst_y = 0.0f64;
    let mut identity_exact = true;
    for _ in 0..1000 {
        let depth = r.gen_range(1..=4);
        let mut world: Option<OrientedBox> = None;
        let mut m = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        for _ in 0..depth {
            let c = Vec3::new(r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0), r.gen_range(-1.0..1.0));
            let local = OrientedBox::new(c, unit, r.gen_range(-2.0 * PI..2.0 * PI)).unwrap();
            m = mat_mul(&m, &pose_matrix(&local));
            world = Some(match world {
                None => local,
                Some(p) => compose_frames(&p, &local),
            });
            let child = OrientedBox::new(c, unit, local.yaw()).unwrap();
            let id = OrientedBox::new(Vec3::ZERO, unit, 0.0).unwrap();
            let out = compose_frames(&id, &child);
            identity_exact &= out.center() == child.center() && out.yaw() == child.yaw();
        }
        let w = world.unwrap();
        let c = w.center();
        worst_c = worst_c.max((c.x - m[0][3]).abs().max((c.y - m[1][3]).abs()).max((c.z - m[2][3]).abs()));
        worst_y = worst_y.max(angle_diff(w.yaw(), m[1][0].atan2(m[0][0])));
    }
    check(
        worst_c < 1e-9 && worst_y < 1e-9 && identity_exact,
        format!("max center error {worst_c:.1e}, max yaw error {worst_y:.1e}, identity parent exact: {identity_exact}"),
    )
}

fn c03_top_support() -> Outcome {
    let vocab = Vocabulary::builtin();
    let mut r = rng(3);
    let (mut scenes, mut children, mut worst) = (0, 0, 0.0f64);
    while scenes < 1000 {
        let p = stacked_program(&mut r, &vocab, 3);
        let s = compile_scene(&p, &vocab, &CompileOptions::default()).map_err(|e| e.to_string())?;
        let tops: Vec<_> = s.placements.iter().filter(|q| q.source.face == Some(Face::Top)).collect();
        if tops.is_empty() {
            continue;
        }
        scenes += 1;
        for c in tops {
            let parent = s.find(c.parent.as_deref().unwrap()).unwrap();
            worst = worst.max((c.bbox.bottom() - parent.bbox.top()).abs());
            children += 1;
        }
    }
    check(worst < 1e-9, format!("{children} top children in {scenes} scenes, max gap {worst:.1e}"))
}

/// Footprint and z range with every half extent grown by `grow`.
fn prism(b: &OrientedBox, grow: f64) -> (Vec<(f64, f64)>, (f64, f64)) {
    let (s, c) = b.yaw().sin_cos();
    let ctr = b.center();
    let (hx, hy, hz) = (b.size().x / 2.0 + grow, b.size().y / 2.0 + grow, b.size().z / 2.0 + grow);
    let poly = [(hx, hy), (-hx, hy), (-hx, -hy), (hx, -hy)]
        .iter()
        .rev()
        .map(|&(x, y)| (ctr.x + c * x - s * y, ctr.y + s * x + c * y))
        .collect::<Vec<_>>();
    (poly, (ctr.z - hz, ctr.z + hz))
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Sutherland-Hodgman clip of `subject` by the convex polygon `clip`.
fn clip_polygon(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let orient = cross(clip[0], clip[1], clip[2]).signum();
    let mut out = subject.to_vec();
    for k in 0..clip.len() {
        let (a, b) = (clip[k], clip[(k + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        let inside = |p| cross(a, b, p) * orient >= 0.0;
        for m in 0..input.len() {
            let (p, q) = (input[m], input[(m + 1) % input.len()]);
            let hit = || {
                let (d1, d2) = (cross(a, b, p), cross(a, b, q));
                let t = d1 / (d1 - d2);
                (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
            };
            match (inside(p), inside(q)) {
                (true, true) => out.push(q),
                (true, false) => out.push(hit()),
                (false, true) => {
                    out.push(hit());
                    out.push(q);
                }
                (false, false) => {}
            }
        }
        if out.is_empty() {
            break;
        }
    }
    out
}

fn area(p: &[(f64, f64)]) -> f64 {
    (0..p.len())
        .map(|k| {
            let (a, b) = (p[k], p[(k + 1) % p.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

fn clip_overlap(a: &OrientedBox, b: &OrientedBox, grow: f64) -> bool {
    let ((pa, za), (pb, zb)) = (prism(a, grow), prism(b, grow));
    za.1.min(zb.1) > za.0.max(zb.0) && area(&clip_polygon(&pa, &pb)) > 1e-12
}

fn contains(b: &OrientedBox, p: Vec3) -> bool {
    let d = p - b.center();
    let (s, c) = b.yaw().sin_cos();
    let (x, y) = (c * d.x + s * d.y, -s * d.x + c * d.y);
    let h = b.size();
    x.abs() <= h.x / 2.0 && y.abs() <= h.y / 2.0 && d.z.abs() <= h.z / 2.0
}

/// Monte-Carlo oracle: uniform points in the overlap of the two world
/// bounding boxes, tested for containment in both boxes.
fn mc_overlap(a: &OrientedBox, b: &OrientedBox, r: &mut ChaCha8Rng, n: usize) -> bool {
    let bounds = |o: &OrientedBox| {
        let (p, z) = prism(o, 0.0);
        let xs = p.iter().map(|q| q.0);
        let ys = p.iter().map(|q| q.1);
        (
            xs.clone().fold(f64::INFINITY, f64::min),
            xs.fold(f64::NEG_INFINITY, f64::max),
            ys.clone().fold(f64::INFINITY, f64::min),
            ys.fold(f64::NEG_INFINITY, f64::max),
            z,
        )
    };
    let (ax0, ax1, ay0, ay1, az) = bounds(a);
    let (bx0, bx1, by0, by1, bz) = bounds(b);
    let (x0, x1, y0, y1, z0, z1) = (ax0.max(bx0), ax1.min(bx1), ay0.max(by0), ay1.min(by1), az.0.max(bz.0), az.1.min(bz.1));
    if x0 >= x1 || y0 >= y1 || z0 >= z1 {
        return false;
    }
    (0..n).any(|_| {
        let p = Vec3::new(r.gen_range(x0..x1), r.gen_range(y0..y1), r.gen_range(z0..z1));
        contains(a, p) && contains(b, p)
    })
}

fn c04_sat_vs_monte_carlo() -> Outcome {
    const MARGIN: f64 = 1e-3;
    let mut r = rng(4);
    let mut mc = rng(40);
    let random_box = |r: &mut ChaCha8Rng, spread: f64| {
        let size = Vec3::new(r.gen_range(0.1..2.0), r.gen_range(0.1..2.0), r.gen_range(0.1..2.0));
        let c = Vec3::new(r.gen_range(-spread..spread), r.gen_range(-spread..spread), r.gen_range(-0.8..0.8));
        OrientedBox::new(c, size, r.gen_range(0.0..2.0 * PI)).unwrap()
    };
    let (mut pairs, mut skipped, mut hits, mut disagree) = (0, 0, 0, 0);
    while pairs < 1000 {
        let a = random_box(&mut r, 0.05);
        let b = random_box(&mut r, 2.0);
        // keep pairs whose verdict is stable under a 1 mm grow/shrink
        let grown = clip_overlap(&a, &b, MARGIN);
        if grown != clip_overlap(&a, &b, -MARGIN) {
            skipped += 1;
            continue;
        }
        pairs += 1;
        let sat = obb_intersect(&a, &b, 1e-6).is_some();
        let oracle = mc_overlap(&a, &b, &mut mc, 200_000);
        hits += oracle as usize;
        if sat != oracle {
            disagree += 1;
        }
    }
    check(
        disagree == 0,
        format!("{pairs} pairs ({hits} overlapping, {skipped} near-contact skipped), {disagree} disagreements"),
    )
}

fn sha(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn c05_determinism() -> Outcome {
    let vocab = Vocabulary::builtin();
    let mut r = rng(5);
    let mut differing = 0;
    for _ in 0..300 {
        let src = print_llmsli(&stacked_program(&mut r, &vocab, 3));
        let once = |f| export_scene(&compile(&src, &vocab), f);
        for f in [ExportFormat::Json, ExportFormat::Obj, ExportFormat::Svg] {
            if once(f) != once(f) {
                differing += 1;
            }
        }
    }
    let t = SceneTemplate::builtin("living_room").unwrap();
    let files = |exec| -> Vec<String> {
        let d = generate_sft_dataset(&t, &vocab, 60, 99, exec).unwrap();
        let pairs = generate_dpo_pairs(&d, &t.incompatible, &vocab, 99, exec).pairs;
        vec![
            to_jsonl(&sft_pairs(&d)).unwrap(),
            to_jsonl(&extract_pretrain_corpus(&d)).unwrap(),
            to_jsonl(&pairs).unwrap(),
        ]
    };
    let (a, b, c) = (files(Execution::Parallel), files(Execution::Parallel), files(Execution::Serial));
    let hashes: Vec<String> = a.iter().map(|f| sha(f)[..12].to_string()).collect();
    check(
        differing == 0 && a == b && a == c,
        format!(
            "{differing} of 900 exports differ, JSONL run-to-run equal: {}, serial = parallel: {} ({})",
            a == b,
            a == c,
            hashes.join(" ")
        ),
    )
}

/// Whether every sample passes validation and every rejected program
/// fails it, plus type counts over the pairs.
fn filter_audit(samples: &[SftSample], rejected: &[(String, Vec<ErrorType>)], vocab: &Vocabulary) -> (usize, usize, BTreeMap<ErrorType, usize>) {
    let opts = ValidateOptions::default();
    let bad_samples = samples
        .iter()
        .filter(|s| {
            let Ok(p) = parse_llmsli(&s.code) else { return true };
            let Ok(scene) = compile_scene(&p, vocab, &CompileOptions::default()) else {
                return true;
            };
            !validate(&scene, None, &opts).passed
        })
        .count();
    let passing_rejects = rejected.iter().filter(|(code, _)| failure_class(code, vocab).is_none()).count();
    let mut types = BTreeMap::new();
    for (_, kinds) in rejected {
        for k in kinds {
            *types.entry(*k).or_insert(0) += 1;
        }
    }
    (bad_samples, passing_rejects, types)
}

fn c06_generation_filter() -> Outcome {
    let vocab = Vocabulary::builtin();
    let t = SceneTemplate::builtin("living_room").unwrap();
    let start = Instant::now();
    let d = generate_sft_dataset(&t, &vocab, 1000, 6, Execution::Parallel).map_err(|e| e.to_string())?;
    let batch = generate_dpo_pairs(&d, &t.incompatible, &vocab, 6, Execution::Parallel);
    let rejected: Vec<_> = batch
        .pairs
        .iter()
        .map(|p| (p.rejected.clone(), p.injected_errors.iter().map(|e| e.kind).collect::<Vec<_>>()))
        .collect();
    let (bad, passing, types) = filter_audit(&d, &rejected, &vocab);
    let t = start.elapsed();
    let n = batch.pairs.len();
    let counts_ok = batch.pairs.iter().all(|p| (2..=3).contains(&p.injected_errors.len()));
    let coverage_ok = ErrorType::ALL.iter().all(|k| types.get(k).copied().unwrap_or(0) * 100 >= 15 * n);
    let cover: Vec<String> = ErrorType::ALL
        .iter()
        .map(|k| format!("{k} {:.0}%", 100.0 * types.get(k).copied().unwrap_or(0) as f64 / n as f64))
        .collect();
    check(
        bad == 0 && passing == 0 && n >= 1000 && counts_ok && coverage_ok && t < Duration::from_secs(120),
        format!(
            "{} samples ({bad} invalid), {n} rejected ({passing} still valid, {} chains failed), {}, {t:.1?}",
            d.len(),
            batch.failed,
            cover.join(", ")
        ),
    )
}

fn c07_grid_table() -> Outcome {
    let table = [(0.5, 12), (0.75, 8), (1.0, 6), (1.5, 4), (2.0, 3)];
    let got: Vec<String> = table
        .iter()
        .map(|&(g, _)| match grid_dimensions((6.0, 6.0), g) {
            Ok((r, c)) => format!("{r}x{c}"),
            Err(e) => e.to_string(),
        })
        .collect();
    let want: Vec<String> = table.iter().map(|&(_, n)| format!("{n}x{n}")).collect();
    check(got == want, format!("6m x 6m at 50/75/100/150/200 cm: {}", got.join(", ")))
}

fn c08_corpus_scale() -> Outcome {
    let vocab = Vocabulary::builtin();
    let t = SceneTemplate::builtin("living_room").unwrap();
    let start = Instant::now();
    let d = generate_sft_dataset(&t, &vocab, 2800, 8, Execution::Parallel).map_err(|e| e.to_string())?;
    let batch = generate_dpo_pairs_n(&d, &t.incompatible, &vocab, 9000, 8, Execution::Parallel);
    let gen_time = start.elapsed();
    let rejected: Vec<_> = batch.pairs.iter().map(|p| (p.rejected.clone(), vec![])).collect();
    let (bad, passing, _) = filter_audit(&d, &rejected, &vocab);
    check(
        d.len() == 2800 && batch.pairs.len() == 9000 && bad == 0 && passing == 0 && gen_time < Duration::from_secs(600),
        format!(
            "{} samples, {} pairs ({} chains failed) generated in {gen_time:.1?}; {bad} invalid samples, {passing} valid rejects",
            d.len(),
            batch.pairs.len(),
            batch.failed
        ),
    )
}

fn c09_metric_formulas() -> Outcome {
    let vocab = Vocabulary::builtin();
    let colliding = compile("llmsli grid=1m\n5[1.2x1.2x0.9] 5 0 0 5\n", &vocab);
    let clean = compile("llmsli grid=1m\n5 0 5 0 5\n", &vocab);
    let (cr, cr0) = (collision_rate(&colliding, 1e-6), collision_rate(&clean, 1e-6));
    let cl = Checklist {
        turn: None,
        checks: vec![
            AtomicCheck::exist("armchair"),
            AtomicCheck::exist("bed"),
            AtomicCheck::relation("armchair", "beside", "armchair"),
            AtomicCheck::exist("armchair").with_param("min_count", 3.0),
        ],
        drops: vec![],
    };
    let drfr = evaluate_drfr(&clean, &cl).map_err(|e| e.to_string())?;
    check(
        (cr - 66.7).abs() < 0.05 && cr0 == 0.0 && drfr.ratio == 0.75 && drfr.satisfied == 3 && drfr.total == 4,
        format!("CR_obj {cr:.1} and {cr0:.1}, DRFR {}/{} = {}", drfr.satisfied, drfr.total, drfr.ratio),
    )
}

fn c10_diagnostics() -> Outcome {
    let vocab = Vocabulary::builtin();
    let s = compile("llmsli grid=1m\n0 0 0\n0 5[1.5x1.5x0.9] 5\n", &vocab);
    let before = (sha(&export_scene(&s, ExportFormat::Json)), format!("{s:?}"));
    let report = validate(&s, None, &ValidateOptions::default());
    let after = (sha(&export_scene(&s, ExportFormat::Json)), format!("{s:?}"));
    let msg = report.collisions.first().map(|c| c.message.clone()).unwrap_or_default();
    let mut r = rng(10);
    let mut mutated = 0;
    for _ in 0..200 {
        let s = compile(&print_llmsli(&stacked_program(&mut r, &vocab, 2)), &vocab);
        let h = format!("{s:?}");
        validate(&s, None, &ValidateOptions::default());
        mutated += (h != format!("{s:?}")) as usize;
    }
    check(
        msg == "armchair_0 overlaps with armchair_1 at position (1,1)" && before == after && mutated == 0,
        format!("message `{msg}`, scene unchanged by validate: {}", before == after && mutated == 0),
    )
}

/// Mode 0 is raw bytes, 1 grammar tokens, 2 a mutated valid program.
fn fuzz_input(r: &mut ChaCha8Rng, mode: usize, seeds: &[String]) -> Vec<u8> {
    const TOKENS: [&str; 30] = [
        "llmsli", "llmslb", " grid=", "1m", "0.5m", " dims=", "3x3", " floor=", " height=", "2.6m", "0", "1", "3", "w", "d",
        "c", "@", "90", "-", "(", "_on_", "top", "inner", ")", "[", "1x2x3", "]", "\n", " ", "sublayout S:",
    ];
    match mode {
        0 => (0..r.gen_range(0..200)).map(|_| r.gen()).collect(),
        1 => (0..r.gen_range(0..60))
            .flat_map(|_| TOKENS.choose(r).unwrap().bytes())
            .collect(),
        _ => {
            let mut b = seeds.choose(r).unwrap().clone().into_bytes();
            for _ in 0..r.gen_range(1..6) {
                let at = r.gen_range(0..=b.len());
                match r.gen_range(0..3) {
                    0 if at < b.len() => b[at] = r.gen(),
                    1 if at < b.len() => {
                        b.remove(at);
                    }
                    _ => b.insert(at, *b"@()[]x\n 0w-:_".choose(r).unwrap()),
                }
            }
            b
        }
    }
}

fn c11_parser_robustness() -> Outcome {
    let vocab = Vocabulary::builtin();
    let mut r = rng(11);
    let mut seeds = Vec::new();
    let (mut layout_mismatch, mut building_mismatch) = (0, 0);
    for _ in 0..10_000 {
        let p = random_program(&mut r, &vocab, 3);
        let text = print_llmsli(&p);
        if parse_llmsli(&text).ok() != Some(p) {
            layout_mismatch += 1;
        }
        let b = random_building(&mut r, &vocab);
        let btext = print_llmslb(&b);
        if parse_llmslb(&btext).ok() != Some(b) {
            building_mismatch += 1;
        }
        if seeds.len() < 500 {
            seeds.push(text);
            seeds.push(btext);
        }
    }
    let t = SceneTemplate::builtin("living_room").unwrap();
    let generated = generate_sft_dataset(&t, &vocab, 200, 11, Execution::Parallel).map_err(|e| e.to_string())?;
    let datagen_mismatch = generated
        .iter()
        .filter(|s| parse_llmsli(&s.code).map(|p| print_llmsli(&p)).as_deref() != Ok(s.code.as_str()))
        .count();
    let (mut panics, mut accepted) = (0, 0);
    for k in 0..160_000 {
        let mode = if k < 100_000 { 0 } else { 1 + k % 2 };
        let input = fuzz_input(&mut r, mode, &seeds);
        let res = catch_unwind(|| (parse_llmsli_bytes(&input).is_ok(), parse_llmslb_bytes(&input).is_ok()));
        match res {
            Ok((a, b)) => accepted += a as usize + b as usize,
            Err(_) => panics += 1,
        }
    }
    check(
        panics == 0 && layout_mismatch == 0 && building_mismatch == 0 && datagen_mismatch == 0,
        format!(
            "100000 random byte strings and 60000 structured inputs: {panics} panics, {accepted} accepted; round trip mismatches: {layout_mismatch} layouts, \
             {building_mismatch} buildings, {datagen_mismatch} generated"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("cell placement", c01_cell_placement),
        ("frame composition", c02_frame_composition),
        ("top-face support", c03_top_support),
        ("SAT vs Monte-Carlo", c04_sat_vs_monte_carlo),
        ("determinism", c05_determinism),
        ("generation filter", c06_generation_filter),
        ("grid table", c07_grid_table),
        ("corpus scale", c08_corpus_scale),
        ("metric formulas", c09_metric_formulas),
        ("diagnostics contract", c10_diagnostics),
        ("parser robustness", c11_parser_robustness),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}: {name}: {detail}", k + 1);
    }
    let _ = std::panic::take_hook();
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

