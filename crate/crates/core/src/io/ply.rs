//! PLY reading (ASCII and binary little-endian) and ASCII writing.
//!
//! Only the `vertex` element is kept: `x, y, z` and, when all three are
//! present, `nx, ny, nz`. Other elements (faces, edges, ...) are parsed far
//! enough to be skipped. A `comment viewpoint x y z` header line round-trips
//! the cloud's viewpoint.

use std::fmt::Write as _;
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::transform::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    format: Format,
    elements: Vec<Element>,
    viewpoint: Option<Vec3>,
    body_offset: usize,
    body_line: usize,
}

fn parse_err(path: &Path, location: String, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        location,
        message: message.into(),
    }
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let mut offset = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut viewpoint = None;
    loop {
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| parse_err(path, format!("line {}", line_no + 1), "header not terminated by end_header"))?;
        let raw = &bytes[offset..offset + end];
        offset += end + 1;
        line_no += 1;
        let at = || format!("line {line_no}");
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_err(path, at(), "non-UTF-8 header"))?
            .trim_end_matches('\r');
        let mut tok = line.split_whitespace();
        let keyword = tok.next().unwrap_or("");
        if line_no == 1 {
            if line.trim() != "ply" {
                return Err(parse_err(path, at(), "missing 'ply' magic"));
            }
            continue;
        }
        match keyword {
            "" | "obj_info" => {}
            "comment" => {
                if tok.next() == Some("viewpoint") {
                    let v: Vec<f64> = tok.filter_map(|t| t.parse().ok()).collect();
                    if v.len() == 3 {
                        viewpoint = Some(Vec3::new(v[0], v[1], v[2]));
                    }
                }
            }
            "format" => {
                format = Some(match tok.next() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLe,
                    Some(other) => return Err(parse_err(path, at(), format!("unsupported format '{other}'"))),
                    None => return Err(parse_err(path, at(), "format line without a format")),
                });
            }
            "element" => {
                let name = tok.next().ok_or_else(|| parse_err(path, at(), "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(path, at(), "element without a valid count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, at(), "property before any element"))?;
                let ty = tok.next().ok_or_else(|| parse_err(path, at(), "property without type"))?;
                let prop = if ty == "list" {
                    let count = tok.next().and_then(Scalar::parse);
                    let item = tok.next().and_then(Scalar::parse);
                    match (count, item) {
                        (Some(count), Some(item)) => Property::List { count, item },
                        _ => return Err(parse_err(path, at(), "malformed list property")),
                    }
                } else {
                    let ty = Scalar::parse(ty).ok_or_else(|| parse_err(path, at(), format!("unknown property type '{ty}'")))?;
                    let name = tok.next().ok_or_else(|| parse_err(path, at(), "property without name"))?;
                    Property::Scalar {
                        name: name.to_string(),
                        ty,
                    }
                };
                element.properties.push(prop);
            }
            "end_header" => break,
            other => return Err(parse_err(path, at(), format!("unexpected header keyword '{other}'"))),
        }
    }
    let format = format.ok_or_else(|| parse_err(path, "header".into(), "missing format line"))?;
    Ok(Header {
        format,
        elements,
        viewpoint,
        body_offset: offset,
        body_line: line_no,
    })
}

struct VertexLayout {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
}

fn vertex_layout(path: &Path, element: &Element) -> Result<VertexLayout> {
    // positions among scalar properties: list values are not stored
    let find = |n: &str| {
        element
            .properties
            .iter()
            .filter(|p| matches!(p, Property::Scalar { .. }))
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == n))
    };
    let xyz = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => [x, y, z],
        _ => return Err(parse_err(path, "header".into(), "vertex element lacks x, y, z")),
    };
    let normal = match (find("nx"), find("ny"), find("nz")) {
        (Some(x), Some(y), Some(z)) => Some([x, y, z]),
        _ => None,
    };
    Ok(VertexLayout { xyz, normal })
}

/// Reads the vertex positions (and normals when present) of a PLY file.
pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(path, &bytes)
}

fn parse_ply(path: &Path, bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(path, bytes)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_err(path, "header".into(), "no vertex element"))?;
    let layout = vertex_layout(path, &header.elements[vertex_pos])?;

    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut values = Vec::new();
    let mut reader = BodyReader::new(path, &header, bytes);
    for (ei, element) in header.elements.iter().enumerate() {
        let keep = ei == vertex_pos;
        if keep {
            points.reserve(element.count);
        }
        for _ in 0..element.count {
            values.clear();
            reader.read_entry(element, &mut values)?;
            if keep {
                let [x, y, z] = layout.xyz;
                points.push(Vec3::new(values[x], values[y], values[z]));
                if let Some([a, b, c]) = layout.normal {
                    normals.push(Vec3::new(values[a], values[b], values[c]));
                }
            }
        }
    }

    let mut cloud = PointCloud::new(points).with_viewpoint(header.viewpoint);
    if layout.normal.is_some() && normals.iter().all(|n| n.norm() > 0.0) {
        cloud = cloud.with_normals(normals.into_iter().map(|n| n.normalize()).collect())?;
    }
    Ok(cloud)
}

struct BodyReader<'a> {
    path: &'a Path,
    format: Format,
    bytes: &'a [u8],
    offset: usize,
    line: usize,
}

impl<'a> BodyReader<'a> {
    fn new(path: &'a Path, header: &Header, bytes: &'a [u8]) -> Self {
        BodyReader {
            path,
            format: header.format,
            bytes,
            offset: header.body_offset,
            line: header.body_line,
        }
    }

    /// Appends the element's scalar property values; list properties are skipped.
    fn read_entry(&mut self, element: &Element, out: &mut Vec<f64>) -> Result<()> {
        match self.format {
            Format::Ascii => self.read_ascii(element, out),
            Format::BinaryLe => self.read_binary(element, out),
        }
    }

    fn read_ascii(&mut self, element: &Element, out: &mut Vec<f64>) -> Result<()> {
        let line = loop {
            if self.offset >= self.bytes.len() {
                return Err(parse_err(
                    self.path,
                    format!("line {}", self.line + 1),
                    format!("truncated body: expected more '{}' entries", element.name),
                ));
            }
            let rest = &self.bytes[self.offset..];
            let end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
            self.offset += (end + 1).min(rest.len());
            self.line += 1;
            let text = std::str::from_utf8(&rest[..end])
                .map_err(|_| parse_err(self.path, format!("line {}", self.line), "non-UTF-8 body"))?
                .trim();
            if !text.is_empty() {
                break text;
            }
        };
        let at = format!("line {}", self.line);
        let mut tok = line.split_whitespace();
        let mut next = |what: &str| -> Result<f64> {
            tok.next()
                .ok_or_else(|| parse_err(self.path, at.clone(), format!("missing value for {what}")))?
                .parse::<f64>()
                .map_err(|_| parse_err(self.path, at.clone(), format!("invalid number for {what}")))
        };
        for prop in &element.properties {
            match prop {
                Property::Scalar { name, .. } => out.push(next(name)?),
                Property::List { .. } => {
                    let n = next("list count")?;
                    if n < 0.0 || n.fract() != 0.0 {
                        return Err(parse_err(self.path, at.clone(), "invalid list count"));
                    }
                    for _ in 0..n as usize {
                        next("list item")?;
                    }
                }
            }
        }
        Ok(())
    }

    fn take(&mut self, n: usize, element: &Element) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(parse_err(
                self.path,
                format!("byte offset {}", self.offset),
                format!("truncated body while reading '{}'", element.name),
            ));
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    fn read_binary(&mut self, element: &Element, out: &mut Vec<f64>) -> Result<()> {
        for prop in &element.properties {
            match *prop {
                Property::Scalar { ty, .. } => {
                    let b = self.take(ty.size(), element)?;
                    out.push(ty.read_le(b));
                }
                Property::List { count, item } => {
                    let b = self.take(count.size(), element)?;
                    let n = count.read_le(b);
                    if n < 0.0 {
                        return Err(parse_err(self.path, format!("byte offset {}", self.offset), "negative list count"));
                    }
                    self.take(n as usize * item.size(), element)?;
                }
            }
        }
        Ok(())
    }
}

/// Writes an ASCII PLY with `double` coordinates (and normals when present).
pub fn write_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ply_string(cloud)).map_err(|e| Error::io(path, e))
}

pub fn ply_string(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(64 + cloud.len() * 64);
    s.push_str("ply\nformat ascii 1.0\n");
    if let Some(v) = cloud.viewpoint() {
        let _ = writeln!(s, "comment viewpoint {} {} {}", v.x, v.y, v.z);
    }
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.normals().is_some() {
        s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    s.push_str("end_header\n");
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(s, "{} {} {}", p.x, p.y, p.z);
        if let Some(n) = cloud.normals() {
            let _ = write!(s, " {} {} {}", n[i].x, n[i].y, n[i].z);
        }
        s.push('\n');
    }
    s
}
