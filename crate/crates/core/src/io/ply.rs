//! Triangle meshes as ASCII or binary little-endian PLY.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::TriangleMesh;
use crate::linalg::Vec3;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

fn header<T: Real>(mesh: &TriangleMesh<T>, format: PlyFormat) -> String {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut h = format!("ply\nformat {fmt} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n", mesh.vertices.len());
    if mesh.colors.is_some() {
        h.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    h.push_str(&format!("element face {}\nproperty list uchar int vertex_indices\nend_header\n", mesh.triangles.len()));
    h
}

fn to_u8<T: Real>(c: T) -> u8 {
    (c.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_ply<T: Real>(path: &Path, mesh: &TriangleMesh<T>, format: PlyFormat) -> Result<()> {
    if mesh.triangles.iter().flatten().any(|&i| i as usize >= mesh.vertices.len()) {
        return Err(Error::invalid("triangle index out of range"));
    }
    let mut out = header(mesh, format).into_bytes();
    let f = |v: T| v.to_f32().unwrap_or(f32::NAN);
    match format {
        PlyFormat::Ascii => {
            let mut s = String::new();
            for (i, v) in mesh.vertices.iter().enumerate() {
                s.push_str(&format!("{} {} {}", f(v.x), f(v.y), f(v.z)));
                if let Some(c) = &mesh.colors {
                    let [r, g, b] = c[i].map(to_u8);
                    s.push_str(&format!(" {r} {g} {b}"));
                }
                s.push('\n');
            }
            for t in &mesh.triangles {
                s.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
            }
            out.extend_from_slice(s.as_bytes());
        }
        PlyFormat::BinaryLittleEndian => {
            for (i, v) in mesh.vertices.iter().enumerate() {
                for c in [v.x, v.y, v.z] {
                    out.extend_from_slice(&f(c).to_le_bytes());
                }
                if let Some(c) = &mesh.colors {
                    out.extend_from_slice(&c[i].map(to_u8));
                }
            }
            for t in &mesh.triangles {
                out.push(3);
                for &i in t {
                    out.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug)]
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
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Values of an element read sequentially from either encoding.
struct Reader<'a> {
    ascii: Option<std::str::SplitAsciiWhitespace<'a>>,
    bin: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn next(&mut self, ty: Scalar) -> Option<f64> {
        if let Some(it) = self.ascii.as_mut() {
            return it.next()?.parse().ok();
        }
        let n = ty.size();
        let b = self.bin.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(ty.decode(b))
    }
}

/// Reads vertices, optional `red/green/blue` colors and triangular faces.
pub fn read_ply(path: &Path) -> Result<TriangleMesh<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |msg: String| Error::Corrupt { path: path.to_path_buf(), msg };
    let end = bytes
        .windows(11)
        .position(|w| w == b"end_header\n")
        .ok_or_else(|| corrupt("missing end_header".into()))?;
    let head = String::from_utf8_lossy(&bytes[..end]);
    let body = &bytes[end + 11..];
    let mut lines = head.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(corrupt("missing ply magic".into()));
    }
    let mut ascii = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => ascii = Some(true),
            ["format", "binary_little_endian", _] => ascii = Some(false),
            ["format", f, _] => return Err(corrupt(format!("unsupported format {f}"))),
            ["element", name, n] => elements.push(Element {
                name: name.to_string(),
                count: n.parse().map_err(|_| corrupt(format!("bad element count `{n}`")))?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, name] => {
                let (c, i) = (Scalar::parse(c), Scalar::parse(i));
                let el = elements.last_mut().ok_or_else(|| corrupt("property before element".into()))?;
                el.props.push(Property::List(name.to_string(), c.ok_or_else(|| corrupt("bad list type".into()))?, i.ok_or_else(|| corrupt("bad list type".into()))?));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| corrupt(format!("bad property type `{ty}`")))?;
                let el = elements.last_mut().ok_or_else(|| corrupt("property before element".into()))?;
                el.props.push(Property::Scalar(name.to_string(), ty));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(corrupt(format!("bad header line `{line}`"))),
        }
    }
    let ascii = ascii.ok_or_else(|| corrupt("missing format line".into()))?;
    let text;
    let mut reader = if ascii {
        text = String::from_utf8_lossy(body).into_owned();
        Reader { ascii: Some(text.split_ascii_whitespace()), bin: &[], pos: 0 }
    } else {
        Reader { ascii: None, bin: body, pos: 0 }
    };
    let mut mesh = TriangleMesh::default();
    let truncated = || corrupt("truncated body".into());
    for el in &elements {
        let has_color = el.props.iter().any(|p| matches!(p, Property::Scalar(n, _) if n == "red"));
        if el.name == "vertex" && has_color {
            mesh.colors = Some(Vec::with_capacity(el.count));
        }
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            let mut rgb = [0.0; 3];
            for p in &el.props {
                match p {
                    Property::Scalar(name, ty) => {
                        let v = reader.next(*ty).ok_or_else(truncated)?;
                        match (el.name.as_str(), name.as_str()) {
                            ("vertex", "x") => xyz[0] = v,
                            ("vertex", "y") => xyz[1] = v,
                            ("vertex", "z") => xyz[2] = v,
                            ("vertex", "red") => rgb[0] = v / 255.0,
                            ("vertex", "green") => rgb[1] = v / 255.0,
                            ("vertex", "blue") => rgb[2] = v / 255.0,
                            _ => {}
                        }
                    }
                    Property::List(name, cty, ity) => {
                        let n = reader.next(*cty).ok_or_else(truncated)? as usize;
                        let idx: Vec<f64> = (0..n).map(|_| reader.next(*ity).ok_or_else(truncated)).collect::<Result<_>>()?;
                        if el.name == "face" && name == "vertex_indices" {
                            if n != 3 {
                                return Err(corrupt(format!("only triangles are supported, found a {n}-gon")));
                            }
                            mesh.triangles.push([idx[0] as u32, idx[1] as u32, idx[2] as u32]);
                        }
                    }
                }
            }
            if el.name == "vertex" {
                mesh.vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
                if let Some(c) = mesh.colors.as_mut() {
                    c.push(rgb);
                }
            }
        }
    }
    if mesh.triangles.iter().flatten().any(|&i| i as usize >= mesh.vertices.len()) {
        return Err(corrupt("face index out of range".into()));
    }
    Ok(mesh)
}
