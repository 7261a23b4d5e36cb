//! Scene export: canonical JSON (with re-import), Wavefront OBJ and a
//! top-down SVG plot.
//!
//! JSON objects have sorted keys and every real number is written with six
//! decimals, so identical scenes export to identical bytes.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::compiler::{CompiledScene, Opening, OpeningKind, Placement, Source};
use crate::geometry::{OrientedBox, Vec3};
use crate::grid::GridSpec;
use crate::syntax::Face;
use crate::vocab::Category;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Obj,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExportError {
    #[error("unsupported export format `{0}` (expected json, obj or svg)")]
    UnsupportedFormat(String),
    #[error("invalid scene JSON: {0}")]
    Json(String),
    #[error("scene JSON does not match the schema: {0}")]
    Schema(String),
}

impl FromStr for ExportFormat {
    type Err = ExportError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "obj" => Ok(ExportFormat::Obj),
            "svg" => Ok(ExportFormat::Svg),
            other => Err(ExportError::UnsupportedFormat(other.to_string())),
        }
    }
}

pub fn export_scene(s: &CompiledScene, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => export_json(s),
        ExportFormat::Obj => export_obj(s),
        ExportFormat::Svg => export_svg(s),
    }
}

fn vec3(v: Vec3) -> Value {
    json!([v.x, v.y, v.z])
}

fn placement_value(p: &Placement) -> Value {
    json!({
        "block": p.source.block,
        "category": p.category.as_str(),
        "cell": [p.cell.0, p.cell.1],
        "center": vec3(p.bbox.center()),
        "depth": p.source.depth,
        "face": p.source.face.map(|f| f.as_str()),
        "id": p.id,
        "identifier": p.identifier,
        "local_cell": [p.source.row, p.source.col],
        "parent": p.parent,
        "size": vec3(p.bbox.size()),
        "yaw_rad": p.bbox.yaw(),
    })
}

fn opening_value(o: &Opening) -> Value {
    json!({
        "cell": [o.cell.0, o.cell.1],
        "center": vec3(o.bbox.center()),
        "id": o.id,
        "kind": o.kind.as_str(),
        "sill": o.sill,
        "size": vec3(o.bbox.size()),
        "wall": o.wall,
        "yaw_rad": o.bbox.yaw(),
    })
}

pub fn scene_value(s: &CompiledScene) -> Value {
    json!({
        "ceiling_height": s.ceiling_height,
        "grid": {"cell_size": s.grid.cell_size, "cols": s.grid.cols, "rows": s.grid.rows},
        "openings": s.openings.iter().map(opening_value).collect::<Vec<_>>(),
        "placements": s.placements.iter().map(placement_value).collect::<Vec<_>>(),
        "source_hash": s.source_hash,
        "structural": s.structural.iter().map(placement_value).collect::<Vec<_>>(),
        "warnings": s.warnings,
    })
}

/// Fixed six-decimal formatting with negative zero folded to zero.
pub fn fmt_real(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// Writes a JSON value with sorted keys, two-space indentation and
/// six-decimal reals.
pub fn write_canonical(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => write!(out, "{u}").unwrap(),
            (None, Some(i)) => write!(out, "{i}").unwrap(),
            _ => out.push_str(&fmt_real(n.as_f64().unwrap_or(0.0))),
        },
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) if a.iter().all(|x| x.is_number()) => {
            out.push('[');
            for (k, x) in a.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_canonical(x, indent, out);
            }
            out.push(']');
        }
        Value::Array(a) => {
            out.push_str("[\n");
            for (k, x) in a.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_canonical(x, indent + 1, out);
                out.push_str(if k + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(key).expect("strings serialize"));
                out.push_str(": ");
                write_canonical(&m[*key], indent + 1, out);
                out.push_str(if k + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

pub fn to_canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(v, 0, &mut out);
    out.push('\n');
    out
}

pub fn export_json(s: &CompiledScene) -> String {
    to_canonical_json(&scene_value(s))
}

fn field<'a>(m: &'a Map<String, Value>, key: &str) -> Result<&'a Value, ExportError> {
    m.get(key).ok_or_else(|| ExportError::Schema(format!("missing `{key}`")))
}

fn real(m: &Map<String, Value>, key: &str) -> Result<f64, ExportError> {
    field(m, key)?
        .as_f64()
        .ok_or_else(|| ExportError::Schema(format!("`{key}` is not a number")))
}

fn uint(v: &Value, what: &str) -> Result<usize, ExportError> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| ExportError::Schema(format!("`{what}` is not a non-negative integer")))
}

fn string(m: &Map<String, Value>, key: &str) -> Result<String, ExportError> {
    field(m, key)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| ExportError::Schema(format!("`{key}` is not a string")))
}

fn reals<const N: usize>(m: &Map<String, Value>, key: &str) -> Result<[f64; N], ExportError> {
    let bad = || ExportError::Schema(format!("`{key}` is not an array of {N} numbers"));
    let a = field(m, key)?.as_array().ok_or_else(bad)?;
    if a.len() != N {
        return Err(bad());
    }
    let mut out = [0.0; N];
    for (k, x) in a.iter().enumerate() {
        out[k] = x.as_f64().ok_or_else(bad)?;
    }
    Ok(out)
}

fn pair(m: &Map<String, Value>, key: &str) -> Result<(usize, usize), ExportError> {
    let bad = || ExportError::Schema(format!("`{key}` is not a pair of indices"));
    let a = field(m, key)?.as_array().ok_or_else(bad)?;
    if a.len() != 2 {
        return Err(bad());
    }
    Ok((uint(&a[0], key)?, uint(&a[1], key)?))
}

fn object(v: &Value) -> Result<&Map<String, Value>, ExportError> {
    v.as_object().ok_or_else(|| ExportError::Schema("expected an object".into()))
}

fn array<'a>(m: &'a Map<String, Value>, key: &str) -> Result<&'a Vec<Value>, ExportError> {
    field(m, key)?
        .as_array()
        .ok_or_else(|| ExportError::Schema(format!("`{key}` is not an array")))
}

fn oriented_box(m: &Map<String, Value>) -> Result<OrientedBox, ExportError> {
    let c = reals::<3>(m, "center")?;
    let s = reals::<3>(m, "size")?;
    OrientedBox::new(Vec3::new(c[0], c[1], c[2]), Vec3::new(s[0], s[1], s[2]), real(m, "yaw_rad")?)
        .map_err(|e| ExportError::Schema(e.to_string()))
}

fn import_placement(v: &Value) -> Result<Placement, ExportError> {
    let m = object(v)?;
    let face = match field(m, "face")? {
        Value::Null => None,
        Value::String(s) => Some(Face::parse(s).ok_or_else(|| ExportError::Schema(format!("unknown face `{s}`")))?),
        _ => return Err(ExportError::Schema("`face` is not a string".into())),
    };
    let parent = match field(m, "parent")? {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        _ => return Err(ExportError::Schema("`parent` is not a string".into())),
    };
    let (row, col) = pair(m, "local_cell")?;
    Ok(Placement {
        id: string(m, "id")?,
        identifier: string(m, "identifier")?,
        category: string(m, "category")?.parse::<Category>().map_err(ExportError::Schema)?,
        bbox: oriented_box(m)?,
        parent,
        source: Source {
            block: string(m, "block")?,
            row,
            col,
            depth: uint(field(m, "depth")?, "depth")?,
            face,
        },
        cell: pair(m, "cell")?,
    })
}

fn import_opening(v: &Value) -> Result<Opening, ExportError> {
    let m = object(v)?;
    let kind = match string(m, "kind")?.as_str() {
        "door" => OpeningKind::Door,
        "window" => OpeningKind::Window,
        other => return Err(ExportError::Schema(format!("unknown opening kind `{other}`"))),
    };
    Ok(Opening {
        id: string(m, "id")?,
        kind,
        wall: string(m, "wall")?,
        cell: pair(m, "cell")?,
        bbox: oriented_box(m)?,
        sill: real(m, "sill")?,
    })
}

/// Reads a scene written by [`export_json`].
pub fn import_json(text: &str) -> Result<CompiledScene, ExportError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ExportError::Json(e.to_string()))?;
    let m = object(&v)?;
    let g = object(field(m, "grid")?)?;
    let grid = GridSpec {
        cell_size: real(g, "cell_size")?,
        rows: uint(field(g, "rows")?, "rows")?,
        cols: uint(field(g, "cols")?, "cols")?,
    };
    let warnings = array(m, "warnings")?
        .iter()
        .map(|w| w.as_str().map(str::to_string))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| ExportError::Schema("`warnings` must hold strings".into()))?;
    Ok(CompiledScene {
        grid,
        ceiling_height: real(m, "ceiling_height")?,
        structural: array(m, "structural")?.iter().map(import_placement).collect::<Result<_, _>>()?,
        openings: array(m, "openings")?.iter().map(import_opening).collect::<Result<_, _>>()?,
        placements: array(m, "placements")?.iter().map(import_placement).collect::<Result<_, _>>()?,
        source_hash: string(m, "source_hash")?,
        warnings,
    })
}

/// Triangles of a box over its [`OrientedBox::corners`] order, wound
/// counter-clockwise seen from outside.
const BOX_TRIANGLES: [[usize; 3]; 12] = [
    [0, 2, 1],
    [0, 3, 2],
    [4, 5, 6],
    [4, 6, 7],
    [0, 1, 5],
    [0, 5, 4],
    [1, 2, 6],
    [1, 6, 5],
    [2, 3, 7],
    [2, 7, 6],
    [3, 0, 4],
    [3, 4, 7],
];

const FRAME_WIDTH: f64 = 0.05;

fn write_obj_box(out: &mut String, b: &OrientedBox, base: &mut usize) {
    for c in b.corners() {
        writeln!(out, "v {} {} {}", fmt_real(c.x), fmt_real(c.y), fmt_real(c.z)).unwrap();
    }
    for t in BOX_TRIANGLES {
        writeln!(out, "f {} {} {}", *base + t[0], *base + t[1], *base + t[2]).unwrap();
    }
    *base += 8;
}

/// Jambs, head and sill of an opening as four thin boxes.
fn frame_boxes(o: &Opening) -> Vec<OrientedBox> {
    let b = &o.bbox;
    let s = b.size();
    let f = FRAME_WIDTH.min(s.x / 4.0).min(s.z / 4.0);
    let local = [
        (Vec3::new(-(s.x - f) / 2.0, 0.0, 0.0), Vec3::new(f, s.y, s.z)),
        (Vec3::new((s.x - f) / 2.0, 0.0, 0.0), Vec3::new(f, s.y, s.z)),
        (Vec3::new(0.0, 0.0, (s.z - f) / 2.0), Vec3::new(s.x, s.y, f)),
        (Vec3::new(0.0, 0.0, -(s.z - f) / 2.0), Vec3::new(s.x, s.y, f)),
    ];
    local
        .into_iter()
        .filter_map(|(c, size)| OrientedBox::new(b.center() + c.rotate_z(b.yaw()), size, b.yaw()).ok())
        .collect()
}

/// One group per placement (8 vertices, 12 triangles); openings become a
/// group of four thin frame boxes.
pub fn export_obj(s: &CompiledScene) -> String {
    let mut out = format!("# scene {}\n", s.source_hash);
    let mut base = 1;
    for p in s.all_placements() {
        writeln!(out, "g {}", p.id).unwrap();
        write_obj_box(&mut out, &p.bbox, &mut base);
    }
    for o in &s.openings {
        writeln!(out, "g {}", o.id).unwrap();
        for b in frame_boxes(o) {
            write_obj_box(&mut out, &b, &mut base);
        }
    }
    out
}

const PX_PER_M: f64 = 100.0;
const MARGIN_PX: f64 = 20.0;

fn fill(c: Category) -> &'static str {
    match c {
        Category::FloorFurniture => "#8ecae6",
        Category::SurfaceItem => "#ffb703",
        Category::WallMounted => "#219ebc",
        Category::CeilingMounted => "#cdb4db",
        Category::Structural => "#6c757d",
    }
}

/// Top-down plot. World y maps to SVG x and world x to SVG y, so the image
/// reads like the program text: rows go down, columns go right.
pub fn export_svg(s: &CompiledScene) -> String {
    let (fx0, fy0, fx1, fy1) = s.grid.floor_rect();
    let (mut x0, mut y0, mut x1, mut y1) = (fx0, fy0, fx1, fy1);
    for p in s.all_placements() {
        for (x, y) in p.bbox.footprint() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    let sx = |y: f64| MARGIN_PX + (y - y0) * PX_PER_M;
    let sy = |x: f64| MARGIN_PX + (x - x0) * PX_PER_M;
    let (w, h) = ((y1 - y0) * PX_PER_M + 2.0 * MARGIN_PX, (x1 - x0) * PX_PER_M + 2.0 * MARGIN_PX);
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.2}" height="{h:.2}" viewBox="0 0 {w:.2} {h:.2}">"#
    )
    .unwrap();
    writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##).unwrap();
    writeln!(out, r##"<g stroke="#dddddd" stroke-width="1">"##).unwrap();
    let g = s.grid.cell_size;
    for k in 0..=s.grid.cols {
        let y = fy0 + k as f64 * g;
        writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#, sx(y), sy(fx0), sx(y), sy(fx1)).unwrap();
    }
    for k in 0..=s.grid.rows {
        let x = fx0 + k as f64 * g;
        writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#, sx(fy0), sy(x), sx(fy1), sy(x)).unwrap();
    }
    out.push_str("</g>\n");
    let poly = |b: &OrientedBox| {
        b.footprint()
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(y), sy(x)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    for p in s.all_placements() {
        writeln!(
            out,
            r##"<polygon id="{}" points="{}" fill="{}" fill-opacity="0.7" stroke="#222222" stroke-width="1"/>"##,
            p.id,
            poly(&p.bbox),
            fill(p.category)
        )
        .unwrap();
    }
    for o in &s.openings {
        let color = if o.kind == OpeningKind::Door { "#e76f51" } else { "#90e0ef" };
        writeln!(out, r#"<polygon id="{}" points="{}" fill="{color}"/>"#, o.id, poly(&o.bbox)).unwrap();
    }
    for p in &s.placements {
        let c = p.bbox.center();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
            sx(c.y),
            sy(c.x),
            p.id
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{compile_scene, CompileOptions};
    use crate::llmsli::parse_llmsli;
    use crate::vocab::Vocabulary;

    fn scene(src: &str) -> CompiledScene {
        compile_scene(&parse_llmsli(src).unwrap(), &Vocabulary::builtin(), &CompileOptions::default()).unwrap()
    }

    #[test]
    fn empty_scene_json() {
        let s = scene("llmsli grid=1m\n0\n");
        let v: Value = serde_json::from_str(&export_json(&s)).unwrap();
        assert_eq!(v["placements"], json!([]));
    }

    #[test]
    fn one_box_obj() {
        let obj = export_obj(&scene("llmsli grid=1m\n1\n"));
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 12);
        assert!(obj.contains("g sofa_0\n"));
    }

    #[test]
    fn obj_triangles_face_outward() {
        let b = OrientedBox::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(1.0, 2.0, 0.5), 0.7).unwrap();
        let c = b.corners();
        for t in BOX_TRIANGLES {
            let (p0, p1, p2) = (c[t[0]], c[t[1]], c[t[2]]);
            let (u, v) = (p1 - p0, p2 - p0);
            let n = Vec3::new(u.y * v.z - u.z * v.y, u.z * v.x - u.x * v.z, u.x * v.y - u.y * v.x);
            let mid = (p0 + p1 + p2) * (1.0 / 3.0);
            assert!(n.dot(mid - b.center()) > 0.0, "{t:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let s = scene("llmsli grid=0.75m\n3@180(T_on_top) 0 1@45\n0 24(B_on_top) 0\nsublayout T:\n4\nsublayout B:\n25 36\n30 0\n");
        let text = export_json(&s);
        let back = import_json(&text).unwrap();
        assert_eq!(export_json(&back), text);
        assert_eq!(back.placements.len(), s.placements.len());
        for (a, b) in s.placements.iter().zip(&back.placements) {
            assert_eq!((&a.id, &a.parent, &a.source, a.cell), (&b.id, &b.parent, &b.source, b.cell));
            assert!((a.bbox.center() - b.bbox.center()).norm() < 1e-6);
            assert!((a.bbox.yaw() - b.bbox.yaw()).abs() < 5e-7);
        }
    }

    #[test]
    fn negative_zero_folded() {
        assert_eq!(fmt_real(-0.0), "0.000000");
        assert_eq!(fmt_real(-1e-9), "0.000000");
        assert_eq!(fmt_real(1.5), "1.500000");
    }

    #[test]
    fn unsupported_format() {
        assert_eq!("png".parse::<ExportFormat>(), Err(ExportError::UnsupportedFormat("png".into())));
    }

    #[test]
    fn svg_has_polygons_and_labels() {
        let svg = export_svg(&scene("llmsli grid=1m\n1 2\n"));
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert!(svg.contains(">coffee_table_0</text>"));
        assert!(svg.starts_with("<svg"));
    }
}
