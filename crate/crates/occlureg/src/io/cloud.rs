//! Point clouds as PLY (ASCII or binary little-endian in, ASCII out) and
//! whitespace-separated XYZ text with optional normals.

use std::fmt::Write as _;
use std::path::Path;

use occlureg_core::cloud::PointCloud;
use occlureg_core::Vec3;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};

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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    /// `None` type marks a list property.
    props: Vec<(String, Option<Scalar>)>,
}

pub fn parse_ply(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let bad = |msg: String| Error::format(path, msg);
    let end = find_subslice(bytes, b"end_header").ok_or_else(|| bad("missing end_header".into()))?;
    let body_start = bytes[end..].iter().position(|&c| c == b'\n').map_or(bytes.len(), |p| end + p + 1);
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;

    let mut lines = header.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("ply") {
        return Err(bad("missing ply magic".into()));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok[0] {
            "format" => {
                binary = Some(match tok.get(1).copied() {
                    Some("ascii") => false,
                    Some("binary_little_endian") => true,
                    other => return Err(bad(format!("unsupported PLY format {other:?}"))),
                })
            }
            "comment" | "obj_info" => {}
            "element" => {
                let (Some(name), Some(count)) = (tok.get(1), tok.get(2).and_then(|c| c.parse().ok())) else {
                    return Err(bad(format!("bad element line: {line}")));
                };
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            "property" => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element".into()))?;
                if tok.get(1) == Some(&"list") {
                    el.props.push((tok.last().unwrap_or(&"").to_string(), None));
                } else {
                    let ty = tok
                        .get(1)
                        .and_then(|t| Scalar::parse(t))
                        .ok_or_else(|| bad(format!("bad property: {line}")))?;
                    el.props.push((tok.get(2).unwrap_or(&"").to_string(), Some(ty)));
                }
            }
            _ => return Err(bad(format!("unknown header line: {line}"))),
        }
    }
    let binary = binary.ok_or_else(|| bad("missing format line".into()))?;
    let vi = elements.iter().position(|e| e.name == "vertex").ok_or_else(|| bad("no vertex element".into()))?;
    let vertex = &elements[vi];
    let col = |name: &str| vertex.props.iter().position(|p| p.0 == name);
    let (Some(x), Some(y), Some(z)) = (col("x"), col("y"), col("z")) else {
        return Err(bad("vertex element lacks x, y, z".into()));
    };
    let normal_cols = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    if vertex.props.iter().any(|p| p.1.is_none()) {
        return Err(bad("list properties on vertices are not supported".into()));
    }

    let rows: Vec<Vec<f64>> = if binary {
        if elements[..vi].iter().any(|e| e.props.iter().any(|p| p.1.is_none())) {
            return Err(bad("binary list elements before vertices are not supported".into()));
        }
        let skip: usize =
            elements[..vi].iter().map(|e| e.count * e.props.iter().map(|p| p.1.unwrap().size()).sum::<usize>()).sum();
        let stride: usize = vertex.props.iter().map(|p| p.1.unwrap().size()).sum();
        let start = body_start + skip;
        if bytes.len() < start + stride * vertex.count {
            return Err(bad("truncated binary vertex data".into()));
        }
        (0..vertex.count)
            .map(|i| {
                let mut off = start + i * stride;
                vertex
                    .props
                    .iter()
                    .map(|p| {
                        let ty = p.1.unwrap();
                        let v = ty.read_le(&bytes[off..off + ty.size()]);
                        off += ty.size();
                        v
                    })
                    .collect()
            })
            .collect()
    } else {
        let body = std::str::from_utf8(&bytes[body_start..]).map_err(|_| bad("body is not UTF-8".into()))?;
        let header_lines = header.lines().count() + 1;
        let mut lines = body.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let skip: usize = elements[..vi].iter().map(|e| e.count).sum();
        for _ in 0..skip {
            lines.next().ok_or_else(|| bad("truncated ASCII body".into()))?;
        }
        let mut rows = Vec::with_capacity(vertex.count);
        for _ in 0..vertex.count {
            let (k, line) = lines.next().ok_or_else(|| bad("truncated ASCII body".into()))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(format!("line {}: bad number", header_lines + k + 1)))?;
            if vals.len() < vertex.props.len() {
                return Err(bad(format!("line {}: expected {} values", header_lines + k + 1, vertex.props.len())));
            }
            rows.push(vals);
        }
        rows
    };

    let points = rows.iter().map(|r| Vec3::new(r[x], r[y], r[z])).collect();
    let cloud = match normal_cols {
        Some([a, b, c]) => {
            PointCloud::with_normals(points, rows.iter().map(|r| Vec3::new(r[a], r[b], r[c])).collect())?
        }
        None => PointCloud::new(points),
    };
    if cloud.points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(bad("non-finite coordinate".into()));
    }
    Ok(cloud)
}

fn find_subslice(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

/// ASCII PLY with double-precision properties. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn format_ply(cloud: &PointCloud) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.normals.is_some() {
        out.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(n) = &cloud.normals {
            let _ = write!(out, " {} {} {}", n[i].x, n[i].y, n[i].z);
        }
        out.push('\n');
    }
    out
}

pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut width = None;
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path, format!("line {}: bad number", k + 1)))?;
        if !(vals.len() == 3 || vals.len() == 6) || width.is_some_and(|w| w != vals.len()) {
            return Err(Error::format(path, format!("line {}: expected 3 or 6 values consistently", k + 1)));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(path, format!("line {}: non-finite value", k + 1)));
        }
        width = Some(vals.len());
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
        if vals.len() == 6 {
            normals.push(Vec3::new(vals[3], vals[4], vals[5]));
        }
    }
    if width == Some(6) {
        Ok(PointCloud::with_normals(points, normals)?)
    } else {
        Ok(PointCloud::new(points))
    }
}

pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(n) = &cloud.normals {
            let _ = write!(out, " {} {} {}", n[i].x, n[i].y, n[i].z);
        }
        out.push('\n');
    }
    out
}

/// Dispatches on the extension (`.ply` or `.xyz`/`.txt`).
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = read_bytes(path)?;
    match extension(path).as_str() {
        "ply" => parse_ply(&bytes, path),
        "xyz" | "txt" => {
            let text = String::from_utf8(bytes).map_err(|_| Error::format(path, "not UTF-8"))?;
            parse_xyz(&text, path)
        }
        other => Err(Error::format(path, format!("unknown point cloud extension {other:?}"))),
    }
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let text = match extension(path).as_str() {
        "ply" => format_ply(cloud),
        "xyz" | "txt" => format_xyz(cloud),
        other => return Err(Error::format(path, format!("unknown point cloud extension {other:?}"))),
    };
    write_bytes(path, text.as_bytes())
}

pub(crate) fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}
