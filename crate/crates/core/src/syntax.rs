//! Lexical layer shared by the LLMSLI and LLMSLB parsers: line handling,
//! header key/value pairs, block headers, cell tokens and the sub-layout
//! reference graph.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::vocab::Key;

/// Deepest allowed chain of nested sub-layout blocks.
pub const MAX_NESTING_DEPTH: usize = 8;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {message}{}", fmt_expected(.expected))]
    Syntax {
        line: usize,
        col: usize,
        message: String,
        expected: Vec<String>,
    },
    #[error("{line}:{col}: sub-layout cycle: {}", .chain.join(" -> "))]
    Cycle {
        line: usize,
        col: usize,
        chain: Vec<String>,
    },
    #[error("{line}:{col}: sub-layout nesting depth {depth} exceeds the limit of {MAX_NESTING_DEPTH}")]
    DepthExceeded { line: usize, col: usize, depth: usize },
    #[error("{line}:1: ragged grid in block `{block}`: expected {expected} {what}, found {found}")]
    RaggedGrid {
        block: String,
        line: usize,
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{line}:{col}: reference to undeclared block `{name}`")]
    DanglingBlock { name: String, line: usize, col: usize },
    #[error("{line}:{col}: opening at cell ({row},{column}) is not attached to any wall")]
    OrphanOpening {
        line: usize,
        col: usize,
        row: usize,
        column: usize,
    },
}

fn fmt_expected(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected one of: {})", expected.join(", "))
    }
}

impl ParseError {
    pub fn syntax(line: usize, col: usize, message: impl Into<String>, expected: &[&str]) -> Self {
        ParseError::Syntax {
            line,
            col,
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::Cycle { line, .. }
            | ParseError::DepthExceeded { line, .. }
            | ParseError::RaggedGrid { line, .. }
            | ParseError::DanglingBlock { line, .. }
            | ParseError::OrphanOpening { line, .. } => *line,
        }
    }

    pub fn col(&self) -> usize {
        match self {
            ParseError::Syntax { col, .. }
            | ParseError::Cycle { col, .. }
            | ParseError::DepthExceeded { col, .. }
            | ParseError::DanglingBlock { col, .. }
            | ParseError::OrphanOpening { col, .. } => *col,
            ParseError::RaggedGrid { .. } => 1,
        }
    }
}

/// Face of a parent box that hosts a sub-layout grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    Top,
    Bottom,
    Left,
    Right,
    Front,
    Back,
    Inner,
    Outer,
}

impl Face {
    pub const OBJECT_FACES: [Face; 6] = [Face::Top, Face::Bottom, Face::Left, Face::Right, Face::Front, Face::Back];
    pub const WALL_FACES: [Face; 2] = [Face::Inner, Face::Outer];

    pub fn as_str(self) -> &'static str {
        match self {
            Face::Top => "top",
            Face::Bottom => "bottom",
            Face::Left => "left",
            Face::Right => "right",
            Face::Front => "front",
            Face::Back => "back",
            Face::Inner => "inner",
            Face::Outer => "outer",
        }
    }

    pub fn parse(s: &str) -> Option<Face> {
        [Face::OBJECT_FACES.as_slice(), Face::WALL_FACES.as_slice()]
            .concat()
            .into_iter()
            .find(|f| f.as_str() == s)
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SublayoutRef {
    pub block: String,
    pub face: Face,
}

impl fmt::Display for SublayoutRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}_on_{})", self.block, self.face)
    }
}

/// One occupied cell of an object grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub key: Key,
    pub yaw_deg: i32,
    pub size_override: Option<Vec3>,
    pub sublayouts: Vec<SublayoutRef>,
}

impl CellSpec {
    pub fn new(key: impl Into<Key>) -> Self {
        CellSpec {
            key: key.into(),
            yaw_deg: 0,
            size_override: None,
            sublayouts: Vec::new(),
        }
    }

    pub fn with_yaw(mut self, yaw_deg: i32) -> Self {
        self.yaw_deg = yaw_deg;
        self
    }

    pub fn with_size(mut self, l: f64, w: f64, h: f64) -> Self {
        self.size_override = Some(Vec3::new(l, w, h));
        self
    }

    pub fn with_sublayout(mut self, block: &str, face: Face) -> Self {
        self.sublayouts.push(SublayoutRef {
            block: block.to_string(),
            face,
        });
        self
    }
}

/// Canonical token text: `@0` omitted, no override brackets when absent.
impl fmt::Display for CellSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.key)?;
        if self.yaw_deg != 0 {
            write!(f, "@{}", self.yaw_deg)?;
        }
        if let Some(s) = self.size_override {
            write!(f, "[{}x{}x{}]", s.x, s.y, s.z)?;
        }
        for r in &self.sublayouts {
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

/// A named grid of object cells; `None` is the empty cell `0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBlock {
    pub name: String,
    pub rows: Vec<Vec<Option<CellSpec>>>,
    pub declared_dims: Option<(usize, usize)>,
}

impl GridBlock {
    pub fn new(name: &str, rows: Vec<Vec<Option<CellSpec>>>) -> Self {
        GridBlock {
            name: name.to_string(),
            rows,
            declared_dims: None,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows.len(), self.rows.first().map_or(0, |r| r.len()))
    }

    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize, &CellSpec)> {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(j, c)| c.as_ref().map(|c| (i, j, c)))
        })
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied().count()
    }

    pub(crate) fn write_rows(&self, out: &mut String) {
        for row in &self.rows {
            let tokens: Vec<String> = row
                .iter()
                .map(|c| c.as_ref().map_or_else(|| "0".to_string(), |c| c.to_string()))
                .collect();
            out.push_str(&tokens.join(" "));
            out.push('\n');
        }
    }
}

/// A significant source line: blank lines and `#` comment lines are skipped.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Line<'a> {
    pub number: usize,
    pub text: &'a str,
}

pub(crate) fn significant_lines(src: &str) -> Vec<Line<'_>> {
    src.split('\n')
        .enumerate()
        .map(|(n, t)| Line {
            number: n + 1,
            text: t.strip_suffix('\r').unwrap_or(t),
        })
        .filter(|l| {
            let t = l.text.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .collect()
}

/// Whitespace-separated words with their 1-based character columns.
pub(crate) fn words(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut col = 0;
    for (byte, ch) in text.char_indices() {
        col += 1;
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                out.push((c, &text[b..byte]));
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        out.push((c, &text[b..]));
    }
    out
}

pub(crate) fn decode_utf8(bytes: &[u8]) -> Result<&str, ParseError> {
    std::str::from_utf8(bytes).map_err(|e| {
        let prefix = &bytes[..e.valid_up_to()];
        let line = prefix.iter().filter(|&&b| b == b'\n').count() + 1;
        let col = prefix.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
        ParseError::syntax(line, col, "input is not valid UTF-8", &[])
    })
}

pub(crate) fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(is_ident_start) && chars.all(is_ident_char)
}

/// Character cursor over one token, tracking the source column.
pub(crate) struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    base_col: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    pub fn new(src: &'a str, line: usize, base_col: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
            base_col,
            _src: src,
        }
    }

    pub fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    pub fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    pub fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    pub fn col(&self) -> usize {
        self.base_col + self.pos
    }

    pub fn error(&self, message: impl Into<String>, expected: &[&str]) -> ParseError {
        ParseError::syntax(self.line, self.col(), message, expected)
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(c) => format!("unexpected `{c}`"),
            None => "unexpected end of token".to_string(),
        }
    }

    pub fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            let e = c.to_string();
            Err(self.error(self.found(), &[e.as_str()]))
        }
    }

    pub fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            s.push(c);
            self.pos += 1;
        }
        s
    }

    pub fn digits(&mut self) -> Result<String, ParseError> {
        let d = self.take_while(|c| c.is_ascii_digit());
        if d.is_empty() {
            Err(self.error(self.found(), &["digit"]))
        } else {
            Ok(d)
        }
    }

    pub fn unsigned(&mut self) -> Result<u64, ParseError> {
        let col = self.col();
        let d = self.digits()?;
        d.parse::<u64>()
            .map_err(|_| ParseError::syntax(self.line, col, format!("integer `{d}` is out of range"), &[]))
    }

    /// `digits [ "." digits ]`, strictly positive and finite.
    pub fn positive_number(&mut self) -> Result<f64, ParseError> {
        let col = self.col();
        let mut text = self.digits()?;
        if self.eat('.') {
            text.push('.');
            text.push_str(&self.digits()?);
        }
        let v: f64 = text
            .parse()
            .map_err(|_| ParseError::syntax(self.line, col, format!("bad number `{text}`"), &[]))?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(ParseError::syntax(
                self.line,
                col,
                format!("value `{text}` must be positive and finite"),
                &[],
            ));
        }
        Ok(v)
    }

    /// Dimension separator: ASCII `x` or the multiplication sign.
    pub fn times(&mut self) -> Result<(), ParseError> {
        if self.eat('x') || self.eat('×') {
            Ok(())
        } else {
            Err(self.error(self.found(), &["x", "×"]))
        }
    }

    pub fn finish(&self, expected: &[&str]) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(self.found(), expected))
        }
    }
}

/// Length with a unit suffix, returned in meters.
pub(crate) fn length_value(cur: &mut Cursor<'_>) -> Result<f64, ParseError> {
    let v = cur.positive_number()?;
    let scale = unit_suffix(cur)?;
    Ok(v * scale)
}

fn unit_suffix(cur: &mut Cursor<'_>) -> Result<f64, ParseError> {
    if cur.eat('c') {
        cur.expect('m')?;
        Ok(0.01)
    } else if cur.eat('m') {
        Ok(1.0)
    } else {
        Err(cur.error("missing unit", &["m", "cm"]))
    }
}

/// `<a>x<b>...m` with a shared unit suffix, e.g. `6x6m` or `0.9x2x0m`.
/// The last component may be zero when `allow_zero_last` is set.
pub(crate) fn lengths_value(cur: &mut Cursor<'_>, n: usize, allow_zero_last: bool) -> Result<Vec<f64>, ParseError> {
    let mut vals = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            cur.times()?;
        }
        if allow_zero_last && k == n - 1 && cur.peek() == Some('0') {
            let col = cur.col();
            let mut text = cur.digits()?;
            if cur.eat('.') {
                text.push('.');
                text.push_str(&cur.digits()?);
            }
            let v: f64 = text
                .parse()
                .map_err(|_| ParseError::syntax(cur.line, col, format!("bad number `{text}`"), &[]))?;
            vals.push(v);
        } else {
            vals.push(cur.positive_number()?);
        }
    }
    let scale = unit_suffix(cur)?;
    Ok(vals.into_iter().map(|v| v * scale).collect())
}

pub(crate) fn dims_value(cur: &mut Cursor<'_>) -> Result<(usize, usize), ParseError> {
    let col = cur.col();
    let r = cur.unsigned()?;
    cur.times()?;
    let c = cur.unsigned()?;
    if r == 0 || c == 0 || r > 100_000 || c > 100_000 {
        return Err(ParseError::syntax(cur.line, col, "dims must be between 1 and 100000", &[]));
    }
    Ok((r as usize, c as usize))
}

/// Header line `<tag> key=value ...`. Returns the values keyed by name with
/// the column of each value. Unknown or repeated keys are errors.
pub(crate) fn header_pairs<'a>(
    line: Line<'a>,
    tag: &str,
    allowed: &[&str],
) -> Result<HashMap<&'a str, (usize, &'a str)>, ParseError> {
    let ws = words(line.text);
    match ws.first() {
        Some((_, t)) if *t == tag => {}
        Some((col, _)) => return Err(ParseError::syntax(line.number, *col, "missing program header", &[tag])),
        None => return Err(ParseError::syntax(line.number, 1, "missing program header", &[tag])),
    }
    let mut out = HashMap::new();
    for &(col, w) in &ws[1..] {
        let Some((key, value)) = w.split_once('=') else {
            return Err(ParseError::syntax(line.number, col, format!("expected key=value, found `{w}`"), allowed));
        };
        if !allowed.contains(&key) {
            return Err(ParseError::syntax(line.number, col, format!("unknown header key `{key}`"), allowed));
        }
        if out.insert(key, (col + key.chars().count() + 1, value)).is_some() {
            return Err(ParseError::syntax(line.number, col, format!("header key `{key}` given twice"), &[]));
        }
    }
    Ok(out)
}

/// Parses a single header value with `f`, requiring it to consume the whole value.
pub(crate) fn header_value<T>(
    line: usize,
    col: usize,
    value: &str,
    f: impl FnOnce(&mut Cursor<'_>) -> Result<T, ParseError>,
) -> Result<T, ParseError> {
    let mut cur = Cursor::new(value, line, col);
    let v = f(&mut cur)?;
    cur.finish(&["end of value"])?;
    Ok(v)
}

#[derive(Debug, PartialEq)]
pub(crate) enum BlockHeader {
    Main,
    Sublayout { name: String, dims: Option<(usize, usize)> },
}

/// Recognizes `main:` and `sublayout NAME [dims=RxC]:`. Returns `None` for
/// lines that are grid rows.
pub(crate) fn block_header(line: Line<'_>) -> Result<Option<BlockHeader>, ParseError> {
    let trimmed = line.text.trim_end();
    if !trimmed.ends_with(':') {
        return Ok(None);
    }
    let ws = words(&trimmed[..trimmed.len() - 1]);
    let Some(&(col, first)) = ws.first() else {
        return Err(ParseError::syntax(line.number, 1, "empty block header", &["main", "sublayout"]));
    };
    match first {
        "main" => {
            if let Some(&(c, w)) = ws.get(1) {
                return Err(ParseError::syntax(line.number, c, format!("unexpected `{w}` after `main`"), &[":"]));
            }
            Ok(Some(BlockHeader::Main))
        }
        "sublayout" => {
            let Some(&(ncol, name)) = ws.get(1) else {
                return Err(ParseError::syntax(line.number, col + 9, "missing block name", &["block name"]));
            };
            if !is_identifier(name) {
                return Err(ParseError::syntax(line.number, ncol, format!("invalid block name `{name}`"), &["block name"]));
            }
            if name == "main" {
                return Err(ParseError::syntax(line.number, ncol, "`main` cannot be declared as a sub-layout", &[]));
            }
            let mut dims = None;
            if let Some(&(dcol, w)) = ws.get(2) {
                let Some(v) = w.strip_prefix("dims=") else {
                    return Err(ParseError::syntax(line.number, dcol, format!("unexpected `{w}`"), &["dims=", ":"]));
                };
                dims = Some(header_value(line.number, dcol + 5, v, dims_value)?);
            }
            if let Some(&(c, w)) = ws.get(3) {
                return Err(ParseError::syntax(line.number, c, format!("unexpected `{w}`"), &[":"]));
            }
            Ok(Some(BlockHeader::Sublayout {
                name: name.to_string(),
                dims,
            }))
        }
        other => Err(ParseError::syntax(
            line.number,
            col,
            format!("unknown block kind `{other}`"),
            &["main", "sublayout"],
        )),
    }
}

/// A sub-layout reference together with where it appeared.
#[derive(Clone, Debug)]
pub(crate) struct RefSite {
    pub from_block: String,
    pub target: String,
    pub line: usize,
    pub col: usize,
}

/// `(NAME_on_FACE)...` sequence; the name is everything before the last
/// `_on_`.
pub(crate) fn sublayout_refs(cur: &mut Cursor<'_>, faces: &[Face]) -> Result<Vec<(SublayoutRef, usize)>, ParseError> {
    let mut refs: Vec<(SublayoutRef, usize)> = Vec::new();
    let face_names: Vec<&str> = faces.iter().map(|f| f.as_str()).collect();
    while cur.peek() == Some('(') {
        cur.bump();
        let col = cur.col();
        let body = cur.take_while(is_ident_char);
        if body.is_empty() {
            return Err(cur.error("missing sub-layout reference", &["NAME_on_FACE"]));
        }
        cur.expect(')')?;
        let Some(split) = body.rfind("_on_") else {
            return Err(ParseError::syntax(cur.line, col, format!("`{body}` is not of the form NAME_on_FACE"), &["NAME_on_FACE"]));
        };
        let (name, face_str) = (&body[..split], &body[split + 4..]);
        if !is_identifier(name) {
            return Err(ParseError::syntax(cur.line, col, format!("invalid block name in `{body}`"), &["block name"]));
        }
        let face = Face::parse(face_str)
            .filter(|f| faces.contains(f))
            .ok_or_else(|| ParseError::syntax(cur.line, col + split + 4, format!("invalid face `{face_str}`"), &face_names))?;
        if refs.iter().any(|(r, _)| r.face == face) {
            return Err(ParseError::syntax(cur.line, col, format!("face `{face}` already has a sub-layout in this cell"), &[]));
        }
        refs.push((
            SublayoutRef {
                block: name.to_string(),
                face,
            },
            col,
        ));
    }
    Ok(refs)
}

/// Object cell token: `KEY[@YAW][[LxWxH]][(NAME_on_FACE)...]` or `0`.
pub(crate) fn object_cell(
    token: &str,
    line: usize,
    col: usize,
    faces: &[Face],
    block: &str,
    sites: &mut Vec<RefSite>,
) -> Result<Option<CellSpec>, ParseError> {
    let mut cur = Cursor::new(token, line, col);
    let key = match cur.peek() {
        Some(c) if c.is_ascii_digit() => {
            let kcol = cur.col();
            let d = cur.digits()?;
            let code: u32 = d
                .parse()
                .map_err(|_| ParseError::syntax(line, kcol, format!("code `{d}` is out of range"), &[]))?;
            if code == 0 {
                cur.finish(&["whitespace after empty cell `0`"])?;
                return Ok(None);
            }
            Key::Code(code)
        }
        Some(c) if is_ident_start(c) => Key::Ident(cur.take_while(is_ident_char)),
        _ => return Err(cur.error(cur.found(), &["integer code", "identifier", "0"])),
    };
    let mut spec = CellSpec::new(key);
    if cur.eat('@') {
        let ycol = cur.col();
        let neg = if cur.eat('-') {
            true
        } else {
            cur.eat('+');
            false
        };
        let mag = cur.unsigned()?;
        let v = if neg { -(mag as i128) } else { mag as i128 };
        spec.yaw_deg = i32::try_from(v).map_err(|_| ParseError::syntax(line, ycol, "yaw is out of range", &[]))?;
    }
    if cur.eat('[') {
        let l = cur.positive_number()?;
        cur.times()?;
        let w = cur.positive_number()?;
        cur.times()?;
        let h = cur.positive_number()?;
        cur.expect(']')?;
        spec.size_override = Some(Vec3::new(l, w, h));
    }
    for (r, rcol) in sublayout_refs(&mut cur, faces)? {
        sites.push(RefSite {
            from_block: block.to_string(),
            target: r.block.clone(),
            line,
            col: rcol,
        });
        spec.sublayouts.push(r);
    }
    let mut expected = vec!["whitespace"];
    if spec.sublayouts.is_empty() {
        expected.push("(");
        if spec.size_override.is_none() {
            expected.push("[");
            if spec.yaw_deg == 0 {
                expected.push("@");
            }
        }
    }
    cur.finish(&expected)?;
    Ok(Some(spec))
}

/// Row of object cells.
pub(crate) fn object_row(
    line: Line<'_>,
    faces: &[Face],
    block: &str,
    sites: &mut Vec<RefSite>,
) -> Result<Vec<Option<CellSpec>>, ParseError> {
    words(line.text)
        .into_iter()
        .map(|(col, w)| object_cell(w, line.number, col, faces, block, sites))
        .collect()
}

/// Enforces equal row lengths and declared dimensions.
pub(crate) fn check_rectangular<T>(
    block: &str,
    rows: &[Vec<T>],
    row_lines: &[usize],
    header_line: usize,
    declared: Option<(usize, usize)>,
) -> Result<(), ParseError> {
    let Some(first) = rows.first() else {
        return Err(ParseError::syntax(header_line, 1, format!("block `{block}` has no grid rows"), &["grid row"]));
    };
    let width = declared.map_or(first.len(), |d| d.1);
    for (row, &ln) in rows.iter().zip(row_lines) {
        if row.len() != width {
            return Err(ParseError::RaggedGrid {
                block: block.to_string(),
                line: ln,
                what: "columns",
                expected: width,
                found: row.len(),
            });
        }
    }
    if let Some((r, _)) = declared {
        if rows.len() != r {
            return Err(ParseError::RaggedGrid {
                block: block.to_string(),
                line: *row_lines.last().unwrap_or(&header_line),
                what: "rows",
                expected: r,
                found: rows.len(),
            });
        }
    }
    Ok(())
}

/// Resolves every reference, rejects cycles and bounds the nesting depth.
///
/// `roots` are the blocks whose cells live in world space (depth 0);
/// `block_lines` maps each declared block to its header line.
pub(crate) fn check_reference_graph(
    sites: &[RefSite],
    roots: &[&str],
    declared: &BTreeMap<String, usize>,
) -> Result<(), ParseError> {
    for s in sites {
        if !declared.contains_key(&s.target) {
            return Err(ParseError::DanglingBlock {
                name: s.target.clone(),
                line: s.line,
                col: s.col,
            });
        }
    }
    let mut edges: BTreeMap<&str, Vec<&RefSite>> = BTreeMap::new();
    for s in sites {
        edges.entry(s.from_block.as_str()).or_default().push(s);
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done(usize),
    }
    // iterative DFS; depth(b) = 1 + max depth of blocks it references
    fn visit<'a>(
        node: &'a str,
        edges: &BTreeMap<&'a str, Vec<&'a RefSite>>,
        marks: &mut HashMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
        via: Option<&RefSite>,
    ) -> Result<usize, ParseError> {
        match marks.get(node) {
            Some(Mark::Done(d)) => return Ok(*d),
            Some(Mark::Active) => {
                let start = stack.iter().position(|&b| b == node).unwrap_or(0);
                let mut chain: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                chain.push(node.to_string());
                let (line, col) = via.map_or((1, 1), |s| (s.line, s.col));
                return Err(ParseError::Cycle { line, col, chain });
            }
            None => {}
        }
        marks.insert(node, Mark::Active);
        stack.push(node);
        let mut depth = 0;
        if let Some(out) = edges.get(node) {
            for s in out {
                let d = visit(s.target.as_str(), edges, marks, stack, Some(s))? + 1;
                if d > MAX_NESTING_DEPTH {
                    return Err(ParseError::DepthExceeded {
                        line: s.line,
                        col: s.col,
                        depth: d,
                    });
                }
                depth = depth.max(d);
            }
        }
        stack.pop();
        marks.insert(node, Mark::Done(depth));
        Ok(depth)
    }

    let mut marks = HashMap::new();
    let mut stack = Vec::new();
    let mut seen_roots = HashSet::new();
    for r in roots {
        if seen_roots.insert(*r) {
            visit(r, &edges, &mut marks, &mut stack, None)?;
        }
    }
    // unreferenced blocks may still contain cycles among themselves
    for name in declared.keys() {
        visit(name.as_str(), &edges, &mut marks, &mut stack, None)?;
    }
    Ok(())
}

/// Block names in first-reference order, breadth-first from the root
/// blocks, followed by unreferenced blocks in name order.
pub(crate) fn reference_order(root_refs: Vec<String>, blocks: &BTreeMap<String, GridBlock>) -> Vec<String> {
    let mut order: Vec<String> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for r in root_refs {
        if blocks.contains_key(&r) && seen.insert(r.clone()) {
            order.push(r);
        }
    }
    let mut k = 0;
    while k < order.len() {
        let b = &blocks[&order[k]];
        for (_, _, cell) in b.occupied() {
            for r in &cell.sublayouts {
                if blocks.contains_key(&r.block) && seen.insert(r.block.clone()) {
                    order.push(r.block.clone());
                }
            }
        }
        k += 1;
    }
    for name in blocks.keys() {
        if seen.insert(name.clone()) {
            order.push(name.clone());
        }
    }
    order
}
