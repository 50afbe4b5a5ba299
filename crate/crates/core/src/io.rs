//! Point cloud and scanner metadata files.
//!
//! Supported formats:
//!
//! * PLY 1.0, `ascii` and `binary_little_endian`. Vertex properties
//!   `x y z` are required; `nx ny nz`, `red green blue` and `scan_id` are
//!   picked up when present. Unknown properties and non-vertex elements are
//!   skipped. Big-endian files are rejected.
//! * XYZ: whitespace separated `x y z` lines, optionally followed by
//!   `nx ny nz`. Blank lines and `#` comments are ignored.
//! * Scanner metadata: `id x y z` lines, one scanner per line.
//!
//! Writers always emit `double` coordinates and normals, `uchar` colors and
//! `uint` scan ids, so binary round trips are exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, ParseError, Result};
use crate::geom::{Point, Vector};

/// Tolerance on `|n| - 1` for stored normals.
pub const NORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub normals: Option<Vec<Vector>>,
    pub scan_ids: Option<Vec<u32>>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point>) -> Self {
        Self {
            points,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn normals(&self) -> Option<&[Vector]> {
        self.normals.as_deref()
    }

    /// Check parallel array lengths and normal lengths.
    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(Error::InvalidInput(format!(
                    "{} normals for {n} points",
                    normals.len()
                )));
            }
            if let Some((i, v)) = normals
                .iter()
                .enumerate()
                .find(|(_, v)| (v.norm() - 1.0).abs() > NORMAL_TOLERANCE)
            {
                return Err(Error::InvalidInput(format!(
                    "normal {i} has length {}",
                    v.norm()
                )));
            }
        }
        if let Some(ids) = &self.scan_ids {
            if ids.len() != n {
                return Err(Error::InvalidInput(format!(
                    "{} scan ids for {n} points",
                    ids.len()
                )));
            }
        }
        if let Some(colors) = &self.colors {
            if colors.len() != n {
                return Err(Error::InvalidInput(format!(
                    "{} colors for {n} points",
                    colors.len()
                )));
            }
        }
        Ok(())
    }
}

/// Scanner positions keyed by scan id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScannerMetadata {
    pub positions: BTreeMap<u32, Point>,
}

impl ScannerMetadata {
    pub fn from_positions(positions: impl IntoIterator<Item = Point>) -> Self {
        Self {
            positions: positions
                .into_iter()
                .enumerate()
                .map(|(i, p)| (i as u32, p))
                .collect(),
        }
    }

    pub fn get(&self, id: u32) -> Option<&Point> {
        self.positions.get(&id)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Every scan id in `cloud` must name a known scanner.
    pub fn check_covers(&self, cloud: &PointCloud) -> Result<()> {
        if let Some(ids) = &cloud.scan_ids {
            if let Some(bad) = ids.iter().find(|id| !self.positions.contains_key(id)) {
                return Err(Error::InvalidInput(format!(
                    "scan id {bad} has no scanner position"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointFormat {
    PlyAscii,
    PlyBinaryLe,
    Xyz,
}

impl PointFormat {
    /// Guess from the file extension and, for `.ply`, the header's format line.
    pub fn detect(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("xyz") | Some("txt") => Ok(PointFormat::Xyz),
            Some("ply") => {
                let file = File::open(path).map_err(|e| Error::io(path, e))?;
                let mut reader = BufReader::new(file);
                let mut line = String::new();
                for _ in 0..3 {
                    line.clear();
                    if reader.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
                        break;
                    }
                    if let Some(rest) = line.trim().strip_prefix("format ") {
                        return Ok(if rest.starts_with("ascii") {
                            PointFormat::PlyAscii
                        } else {
                            PointFormat::PlyBinaryLe
                        });
                    }
                }
                Err(Error::Parse {
                    path: path.into(),
                    source: ParseError::line(1, "missing PLY format line"),
                })
            }
            _ => Err(Error::InvalidInput(format!(
                "cannot infer point format of {}",
                path.display()
            ))),
        }
    }
}

pub fn load_point_cloud(path: impl AsRef<Path>, format: PointFormat) -> Result<PointCloud> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let parsed = match format {
        PointFormat::Xyz => parse_xyz(&bytes),
        PointFormat::PlyAscii | PointFormat::PlyBinaryLe => parse_ply(&bytes, Some(format)),
    };
    parsed.map_err(|source| Error::Parse {
        path: path.into(),
        source,
    })
}

/// Load with the format inferred by [`PointFormat::detect`].
pub fn load_point_cloud_auto(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    load_point_cloud(path, PointFormat::detect(path)?)
}

pub fn save_point_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: PointFormat) -> Result<()> {
    cloud.validate()?;
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = match format {
        PointFormat::Xyz => write_xyz(cloud, &mut w),
        PointFormat::PlyAscii => write_ply(cloud, &mut w, false),
        PointFormat::PlyBinaryLe => write_ply(cloud, &mut w, true),
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Per-point display label for exported clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointLabel {
    Interior,
    Exterior,
    Outside,
    OffPatch,
    Correct,
    Incorrect,
}

impl PointLabel {
    /// Interior green, exterior blue, outside yellow, off-patch gray;
    /// correctness views use green/red.
    pub fn color(self) -> [u8; 3] {
        match self {
            PointLabel::Interior | PointLabel::Correct => [0, 255, 0],
            PointLabel::Exterior => [0, 0, 255],
            PointLabel::Outside => [255, 255, 0],
            PointLabel::OffPatch => [128, 128, 128],
            PointLabel::Incorrect => [255, 0, 0],
        }
    }
}

/// Write `cloud` as binary PLY with per-vertex colors taken from `labels`.
pub fn save_labeled_cloud(cloud: &PointCloud, labels: &[PointLabel], path: impl AsRef<Path>) -> Result<()> {
    if labels.len() != cloud.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} points",
            labels.len(),
            cloud.len()
        )));
    }
    let mut colored = cloud.clone();
    colored.colors = Some(labels.iter().map(|l| l.color()).collect());
    save_point_cloud(&colored, path, PointFormat::PlyBinaryLe)
}

pub fn load_scanner_metadata(path: impl AsRef<Path>) -> Result<ScannerMetadata> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scanner_metadata(&text).map_err(|source| Error::Parse {
        path: path.into(),
        source,
    })
}

pub fn save_scanner_metadata(meta: &ScannerMetadata, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (id, p) in &meta.positions {
        out.push_str(&format!("{id} {} {} {}\n", p.x, p.y, p.z));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn parse_scanner_metadata(text: &str) -> std::result::Result<ScannerMetadata, ParseError> {
    let mut positions = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(ParseError::line(
                line_no,
                format!("expected `id x y z`, found {} fields", fields.len()),
            ));
        }
        let id: u32 = fields[0]
            .parse()
            .map_err(|_| ParseError::line(line_no, format!("invalid scanner id `{}`", fields[0])))?;
        let mut c = [0.0; 3];
        for (k, f) in fields[1..].iter().enumerate() {
            c[k] = parse_f64(f).ok_or_else(|| {
                ParseError::line(line_no, format!("non-numeric coordinate `{f}`"))
            })?;
        }
        if positions.insert(id, Point::new(c[0], c[1], c[2])).is_some() {
            return Err(ParseError::line(line_no, format!("duplicate scanner id {id}")));
        }
    }
    Ok(ScannerMetadata { positions })
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_xyz(bytes: &[u8]) -> std::result::Result<PointCloud, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::byte(e.valid_up_to() as u64, "invalid UTF-8"))?;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut columns = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|f| parse_f64(f).ok_or_else(|| ParseError::line(line_no, format!("non-numeric value `{f}`"))))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if vals.len() != 3 && vals.len() != 6 {
            return Err(ParseError::line(line_no, format!("expected 3 or 6 values, found {}", vals.len())));
        }
        match columns {
            None => columns = Some(vals.len()),
            Some(c) if c != vals.len() => {
                return Err(ParseError::line(line_no, format!("expected {c} values, found {}", vals.len())));
            }
            _ => {}
        }
        points.push(Point::new(vals[0], vals[1], vals[2]));
        if vals.len() == 6 {
            normals.push(Vector::new(vals[3], vals[4], vals[5]));
        }
    }
    Ok(PointCloud {
        points,
        normals: (columns == Some(6)).then_some(normals),
        scan_ids: None,
        colors: None,
    })
}

fn write_xyz(cloud: &PointCloud, w: &mut impl Write) -> std::io::Result<()> {
    for (i, p) in cloud.points.iter().enumerate() {
        match &cloud.normals {
            Some(n) => writeln!(w, "{} {} {} {} {} {}", p.x, p.y, p.z, n[i].x, n[i].y, n[i].z)?,
            None => writeln!(w, "{} {} {}", p.x, p.y, p.z)?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    binary: bool,
    elements: Vec<Element>,
    body_offset: usize,
    body_line: usize,
}

fn parse_ply_header(bytes: &[u8]) -> std::result::Result<Header, ParseError> {
    let mut offset = 0usize;
    let mut line_no = 0usize;
    let mut next_line = |offset: &mut usize| -> Option<(usize, String)> {
        if *offset >= bytes.len() {
            return None;
        }
        let rest = &bytes[*offset..];
        let end = rest.iter().position(|&c| c == b'\n').map(|p| p + 1).unwrap_or(rest.len());
        let text = String::from_utf8_lossy(&rest[..end]).trim_end_matches(['\n', '\r']).to_string();
        *offset += end;
        line_no += 1;
        Some((line_no, text))
    };

    match next_line(&mut offset) {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(ParseError::line(1, "missing `ply` magic")),
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some((n, line)) = next_line(&mut offset) else {
            return Err(ParseError::byte(offset as u64, "header ends before `end_header`"));
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["end_header"] => {
                let binary = binary.ok_or_else(|| ParseError::line(n, "missing `format` line"))?;
                return Ok(Header {
                    binary,
                    elements,
                    body_offset: offset,
                    body_line: n + 1,
                });
            }
            ["format", fmt, ver] => {
                if *ver != "1.0" {
                    return Err(ParseError::line(n, format!("unsupported PLY version `{ver}`")));
                }
                binary = Some(match *fmt {
                    "ascii" => false,
                    "binary_little_endian" => true,
                    "binary_big_endian" => {
                        return Err(ParseError::line(n, "big-endian PLY is not supported"));
                    }
                    other => return Err(ParseError::line(n, format!("unknown PLY format `{other}`"))),
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| ParseError::line(n, format!("invalid element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", cty, ity, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| ParseError::line(n, "property before any element"))?;
                let count = ScalarType::parse(cty).ok_or_else(|| ParseError::line(n, format!("unknown type `{cty}`")))?;
                let item = ScalarType::parse(ity).ok_or_else(|| ParseError::line(n, format!("unknown type `{ity}`")))?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind: PropKind::List { count, item },
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| ParseError::line(n, "property before any element"))?;
                let ty = ScalarType::parse(ty).ok_or_else(|| ParseError::line(n, format!("unknown type `{ty}`")))?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind: PropKind::Scalar(ty),
                });
            }
            _ => return Err(ParseError::line(n, format!("malformed header line `{line}`"))),
        }
    }
}

/// Column indices of the vertex properties we understand.
struct VertexLayout {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
    color: Option<[usize; 3]>,
    scan_id: Option<usize>,
}

fn vertex_layout(el: &Element, line: usize) -> std::result::Result<VertexLayout, ParseError> {
    let find = |name: &str| -> std::result::Result<Option<usize>, ParseError> {
        match el.props.iter().position(|p| p.name == name) {
            Some(i) => match el.props[i].kind {
                PropKind::Scalar(_) => Ok(Some(i)),
                PropKind::List { .. } => Err(ParseError::line(line, format!("vertex property `{name}` must be scalar"))),
            },
            None => Ok(None),
        }
    };
    let triple = |a: &str, b: &str, c: &str| -> std::result::Result<Option<[usize; 3]>, ParseError> {
        match (find(a)?, find(b)?, find(c)?) {
            (Some(x), Some(y), Some(z)) => Ok(Some([x, y, z])),
            (None, None, None) => Ok(None),
            _ => Err(ParseError::line(line, format!("incomplete vertex properties {a}/{b}/{c}"))),
        }
    };
    let xyz = triple("x", "y", "z")?.ok_or_else(|| ParseError::line(line, "vertex element lacks x/y/z"))?;
    Ok(VertexLayout {
        xyz,
        normal: triple("nx", "ny", "nz")?,
        color: triple("red", "green", "blue")?,
        scan_id: find("scan_id")?,
    })
}

fn parse_ply(bytes: &[u8], expect: Option<PointFormat>) -> std::result::Result<PointCloud, ParseError> {
    let header = parse_ply_header(bytes)?;
    match expect {
        Some(PointFormat::PlyAscii) if header.binary => {
            return Err(ParseError::line(2, "expected ascii PLY, found binary_little_endian"));
        }
        Some(PointFormat::PlyBinaryLe) if !header.binary => {
            return Err(ParseError::line(2, "expected binary_little_endian PLY, found ascii"));
        }
        _ => {}
    }
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| ParseError::line(header.body_line - 1, "no `vertex` element"))?;
    let layout = vertex_layout(&header.elements[vertex_pos], header.body_line - 1)?;
    let mut values = vec![0.0f64; header.elements[vertex_pos].props.len()];
    let n = header.elements[vertex_pos].count;
    let mut cloud = PointCloud {
        points: Vec::with_capacity(n),
        normals: layout.normal.map(|_| Vec::with_capacity(n)),
        scan_ids: layout.scan_id.map(|_| Vec::with_capacity(n)),
        colors: layout.color.map(|_| Vec::with_capacity(n)),
    };
    let mut push = |vals: &[f64]| {
        let [x, y, z] = layout.xyz;
        cloud.points.push(Point::new(vals[x], vals[y], vals[z]));
        if let (Some([a, b, c]), Some(ns)) = (layout.normal, cloud.normals.as_mut()) {
            ns.push(Vector::new(vals[a], vals[b], vals[c]));
        }
        if let (Some([r, g, b]), Some(cs)) = (layout.color, cloud.colors.as_mut()) {
            cs.push([vals[r] as u8, vals[g] as u8, vals[b] as u8]);
        }
        if let (Some(s), Some(ids)) = (layout.scan_id, cloud.scan_ids.as_mut()) {
            ids.push(vals[s] as u32);
        }
    };

    if header.binary {
        let mut off = header.body_offset;
        let need = |off: usize, len: usize| -> std::result::Result<(), ParseError> {
            if off + len > bytes.len() {
                Err(ParseError::byte(off as u64, "truncated binary payload"))
            } else {
                Ok(())
            }
        };
        for (ei, el) in header.elements.iter().enumerate() {
            if ei > vertex_pos {
                break;
            }
            for _ in 0..el.count {
                for (pi, prop) in el.props.iter().enumerate() {
                    match prop.kind {
                        PropKind::Scalar(t) => {
                            need(off, t.size())?;
                            if ei == vertex_pos {
                                values[pi] = t.read_le(&bytes[off..]);
                            }
                            off += t.size();
                        }
                        PropKind::List { count, item } => {
                            need(off, count.size())?;
                            let c = count.read_le(&bytes[off..]);
                            if c < 0.0 {
                                return Err(ParseError::byte(off as u64, "negative list length"));
                            }
                            off += count.size();
                            let len = c as usize * item.size();
                            need(off, len)?;
                            off += len;
                        }
                    }
                }
                if ei == vertex_pos {
                    push(&values);
                }
            }
        }
    } else {
        let body = std::str::from_utf8(&bytes[header.body_offset..])
            .map_err(|e| ParseError::byte((header.body_offset + e.valid_up_to()) as u64, "invalid UTF-8 in ascii body"))?;
        let mut lines = body.lines().enumerate().map(|(i, l)| (header.body_line + i, l));
        for (ei, el) in header.elements.iter().enumerate() {
            if ei > vertex_pos {
                break;
            }
            for k in 0..el.count {
                let (line_no, line) = loop {
                    match lines.next() {
                        Some((n, l)) if l.trim().is_empty() => {
                            let _ = n;
                            continue;
                        }
                        Some(x) => break x,
                        None => {
                            return Err(ParseError::line(
                                header.body_line + body.lines().count(),
                                format!("element `{}` declares {} entries, found {k}", el.name, el.count),
                            ));
                        }
                    }
                };
                if ei != vertex_pos {
                    continue;
                }
                let toks: Vec<&str> = line.split_whitespace().collect();
                if el.props.iter().any(|p| matches!(p.kind, PropKind::List { .. })) {
                    return Err(ParseError::line(line_no, "list properties in ascii vertex element are not supported"));
                }
                if toks.len() != el.props.len() {
                    return Err(ParseError::line(
                        line_no,
                        format!("expected {} values, found {}", el.props.len(), toks.len()),
                    ));
                }
                for (pi, t) in toks.iter().enumerate() {
                    values[pi] = t
                        .parse::<f64>()
                        .map_err(|_| ParseError::line(line_no, format!("non-numeric value `{t}`")))?;
                }
                push(&values);
            }
        }
    }
    Ok(cloud)
}

fn write_ply(cloud: &PointCloud, w: &mut impl Write, binary: bool) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format {} 1.0", if binary { "binary_little_endian" } else { "ascii" })?;
    writeln!(w, "comment pathorient")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for p in ["x", "y", "z"] {
        writeln!(w, "property double {p}")?;
    }
    if cloud.normals.is_some() {
        for p in ["nx", "ny", "nz"] {
            writeln!(w, "property double {p}")?;
        }
    }
    if cloud.colors.is_some() {
        for p in ["red", "green", "blue"] {
            writeln!(w, "property uchar {p}")?;
        }
    }
    if cloud.scan_ids.is_some() {
        writeln!(w, "property uint scan_id")?;
    }
    writeln!(w, "end_header")?;

    for i in 0..cloud.len() {
        let p = cloud.points[i];
        if binary {
            for c in [p.x, p.y, p.z] {
                w.write_all(&c.to_le_bytes())?;
            }
            if let Some(n) = &cloud.normals {
                for c in [n[i].x, n[i].y, n[i].z] {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
            if let Some(c) = &cloud.colors {
                w.write_all(&c[i])?;
            }
            if let Some(s) = &cloud.scan_ids {
                w.write_all(&s[i].to_le_bytes())?;
            }
        } else {
            write!(w, "{} {} {}", p.x, p.y, p.z)?;
            if let Some(n) = &cloud.normals {
                write!(w, " {} {} {}", n[i].x, n[i].y, n[i].z)?;
            }
            if let Some(c) = &cloud.colors {
                write!(w, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
            }
            if let Some(s) = &cloud.scan_ids {
                write!(w, " {}", s[i])?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Parse a PLY document from memory, accepting either encoding.
pub fn parse_ply_bytes(bytes: &[u8]) -> std::result::Result<PointCloud, ParseError> {
    parse_ply(bytes, None)
}

/// Serialize to PLY in memory.
pub fn ply_bytes(cloud: &PointCloud, binary: bool) -> Vec<u8> {
    let mut out = Vec::new();
    write_ply(cloud, &mut out, binary).expect("writing to a Vec cannot fail");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Location;

    const THREE_POINTS: &str = "ply
format ascii 1.0
element vertex 3
property float x
property float y
property float z
property float nx
property float ny
property float nz
end_header
0 0 0 0 0 1
1 0 0 0 0 1
0 1 0 0 0 1
";

    #[test]
    fn ascii_with_normals() {
        let c = parse_ply_bytes(THREE_POINTS.as_bytes()).unwrap();
        assert_eq!(c.len(), 3);
        let n = c.normals.as_ref().unwrap();
        assert_eq!(n[2], Vector::z());
        assert_eq!(c.points[1], Point::new(1.0, 0.0, 0.0));
        assert!(c.scan_ids.is_none());
    }

    #[test]
    fn truncated_ascii_reports_line() {
        let text = THREE_POINTS.replace("0 1 0 0 0 1\n", "");
        let err = parse_ply_bytes(text.as_bytes()).unwrap_err();
        assert!(err.message.contains("declares 3"), "{err}");
        assert!(matches!(err.location, Location::Line(_)));
    }

    #[test]
    fn wrong_value_count_reports_line() {
        let text = THREE_POINTS.replace("1 0 0 0 0 1", "1 0 0 0 1");
        let err = parse_ply_bytes(text.as_bytes()).unwrap_err();
        assert_eq!(err.location, Location::Line(12));
    }

    #[test]
    fn truncated_binary_reports_byte() {
        let cloud = PointCloud::from_points(vec![Point::new(1.0, 2.0, 3.0); 4]);
        let mut bytes = ply_bytes(&cloud, true);
        bytes.truncate(bytes.len() - 5);
        let err = parse_ply_bytes(&bytes).unwrap_err();
        assert!(matches!(err.location, Location::Byte(_)));
    }

    #[test]
    fn big_endian_rejected() {
        let text = THREE_POINTS.replace("ascii", "binary_big_endian");
        let err = parse_ply_bytes(text.as_bytes()).unwrap_err();
        assert!(err.message.contains("big-endian"));
    }

    #[test]
    fn malformed_header() {
        let text = THREE_POINTS.replace("property float y", "property floaty y");
        assert!(parse_ply_bytes(text.as_bytes()).is_err());
        assert!(parse_ply_bytes(b"plx\n").is_err());
    }

    #[test]
    fn skips_faces_and_unknown_props() {
        let text = "ply
format ascii 1.0
element vertex 2
property double x
property double y
property double z
property float intensity
element face 1
property list uchar int vertex_indices
end_header
1 2 3 0.5
4 5 6 0.7
3 0 1 1
";
        let c = parse_ply_bytes(text.as_bytes()).unwrap();
        assert_eq!(c.points, vec![Point::new(1.0, 2.0, 3.0), Point::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let cloud = PointCloud {
            points: vec![Point::new(0.1, -1.0 / 3.0, 1e-300), Point::new(f64::MAX, 2.5, -0.0)],
            normals: Some(vec![Vector::z(), Vector::new(0.6, 0.8, 0.0)]),
            scan_ids: Some(vec![0, 7]),
            colors: None,
        };
        let back = parse_ply_bytes(&ply_bytes(&cloud, true)).unwrap();
        for (a, b) in cloud.points.iter().zip(&back.points) {
            for k in 0..3 {
                assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
        assert_eq!(back.normals, cloud.normals);
        assert_eq!(back.scan_ids, cloud.scan_ids);
    }

    #[test]
    fn labeled_export_colors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.ply");
        let cloud = PointCloud::from_points(vec![Point::origin(), Point::new(1.0, 0.0, 0.0)]);
        save_labeled_cloud(&cloud, &[PointLabel::Interior, PointLabel::OffPatch], &path).unwrap();
        let back = load_point_cloud(&path, PointFormat::PlyBinaryLe).unwrap();
        assert_eq!(back.colors.unwrap(), vec![[0, 255, 0], [128, 128, 128]]);
        assert_eq!(back.points, cloud.points);
    }

    #[test]
    fn labeled_export_empty_cloud() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.ply");
        save_labeled_cloud(&PointCloud::default(), &[], &path).unwrap();
        let back = load_point_cloud_auto(&path).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn labeled_export_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = PointCloud::from_points(vec![Point::origin()]);
        assert!(save_labeled_cloud(&cloud, &[], dir.path().join("x.ply")).is_err());
    }

    #[test]
    fn declared_format_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ply");
        std::fs::write(&path, THREE_POINTS).unwrap();
        assert!(load_point_cloud(&path, PointFormat::PlyBinaryLe).is_err());
        assert_eq!(PointFormat::detect(&path).unwrap(), PointFormat::PlyAscii);
    }

    #[test]
    fn scanner_metadata_parsing() {
        let m = parse_scanner_metadata("0 0 0 1.5\n").unwrap();
        assert_eq!(m.get(0), Some(&Point::new(0.0, 0.0, 1.5)));
        let err = parse_scanner_metadata("0 0 0 1\n0 1 1 1\n").unwrap_err();
        assert_eq!(err.location, Location::Line(2));
        assert!(parse_scanner_metadata("0 0 a 1\n").is_err());
        assert!(parse_scanner_metadata("# header\n\n3 1 2 3 # trailing\n").unwrap().get(3).is_some());
    }

    #[test]
    fn xyz_parsing() {
        let c = parse_xyz(b"0 0 0\n1 2 3\n").unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.normals.is_none());
        let c = parse_xyz(b"0 0 0 0 0 1\n").unwrap();
        assert_eq!(c.normals.unwrap()[0], Vector::z());
        assert!(parse_xyz(b"0 0\n").is_err());
        assert!(parse_xyz(b"0 0 0\n0 0 0 0 0 1\n").is_err());
    }

    #[test]
    fn validate_catches_bad_normals() {
        let mut c = PointCloud::from_points(vec![Point::origin()]);
        c.normals = Some(vec![Vector::new(0.0, 0.0, 2.0)]);
        assert!(c.validate().is_err());
        c.normals = Some(vec![]);
        assert!(c.validate().is_err());
    }
}
