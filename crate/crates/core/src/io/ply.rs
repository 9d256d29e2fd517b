//! PLY (ASCII and binary little-endian).
//!
//! [`PlyData`] is a lossless in-memory form: every scalar is held as `f64`, which
//! represents all PLY scalar types exactly. The typed readers on top of it map
//! vertex elements to point clouds, Gaussian sets and meshes.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{create, open, IoError};
use crate::gs_init::GaussianSet;
use crate::recon::{PointCloud, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyFormat {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
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

    pub fn name(self) -> &'static str {
        match self {
            Self::I8 => "char",
            Self::U8 => "uchar",
            Self::I16 => "short",
            Self::U16 => "ushort",
            Self::I32 => "int",
            Self::U32 => "uint",
            Self::F32 => "float",
            Self::F64 => "double",
        }
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, Self::F32 | Self::F64)
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
            Self::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }

    fn encode(self, v: f64, out: &mut Vec<u8>) {
        match self {
            Self::I8 => out.push(v as i8 as u8),
            Self::U8 => out.push(v as u8),
            Self::I16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            Self::U16 => out.extend_from_slice(&(v as u16).to_le_bytes()),
            Self::I32 => out.extend_from_slice(&(v as i32).to_le_bytes()),
            Self::U32 => out.extend_from_slice(&(v as u32).to_le_bytes()),
            Self::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Self::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }

    fn format_ascii(self, v: f64) -> String {
        match self {
            Self::F32 => format!("{}", v as f32),
            Self::F64 => format!("{v}"),
            _ => format!("{}", v as i64),
        }
    }

    fn in_range(self, v: f64) -> bool {
        let (lo, hi) = match self {
            Self::I8 => (i8::MIN as f64, i8::MAX as f64),
            Self::U8 => (0.0, u8::MAX as f64),
            Self::I16 => (i16::MIN as f64, i16::MAX as f64),
            Self::U16 => (0.0, u16::MAX as f64),
            Self::I32 => (i32::MIN as f64, i32::MAX as f64),
            Self::U32 => (0.0, u32::MAX as f64),
            Self::F32 | Self::F64 => return !v.is_nan(),
        };
        v.fract() == 0.0 && v >= lo && v <= hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Scalar(Vec<f64>),
    List(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub count: usize,
    pub properties: Vec<Property>,
    /// One column per property, each `count` long.
    pub columns: Vec<Column>,
}

impl Element {
    fn property_index(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p.name == name)
    }

    /// Scalar column by property name.
    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        match &self.columns[self.property_index(name)?] {
            Column::Scalar(v) => Some(v),
            Column::List(_) => None,
        }
    }

    fn scalar_type(&self, name: &str) -> Option<ScalarType> {
        match self.properties[self.property_index(name)?].kind {
            PropertyKind::Scalar(t) => Some(t),
            PropertyKind::List { .. } => None,
        }
    }
}

/// A vertex property carried through without interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtraProperty {
    pub name: String,
    pub kind: ScalarType,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlyData {
    pub format: PlyFormat,
    pub comments: Vec<String>,
    pub elements: Vec<Element>,
}

impl PlyData {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }
}

fn read_header_line<R: BufRead>(r: &mut R, line_no: &mut usize) -> Result<String, IoError> {
    let mut buf = Vec::new();
    let n = r.read_until(b'\n', &mut buf)?;
    *line_no += 1;
    if n == 0 {
        return Err(IoError::Format("unexpected end of file inside the PLY header".into()));
    }
    let text = String::from_utf8(buf).map_err(|_| IoError::parse(*line_no, "header is not valid UTF-8"))?;
    Ok(text.trim_end_matches(['\n', '\r']).to_string())
}

/// Parses a whole PLY stream.
pub fn read_ply<R: BufRead>(mut r: R) -> Result<PlyData, IoError> {
    let mut line_no = 0;
    if read_header_line(&mut r, &mut line_no)?.trim() != "ply" {
        return Err(IoError::Format("missing 'ply' magic".into()));
    }
    let mut format = None;
    let mut comments = Vec::new();
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = read_header_line(&mut r, &mut line_no)?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                let kind = tok.next().unwrap_or("");
                let version = tok.next().unwrap_or("");
                if version != "1.0" {
                    return Err(IoError::parse(line_no, format!("unsupported PLY version '{version}'")));
                }
                format = Some(match kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(IoError::Unsupported(
                            "big-endian PLY is not supported; convert to binary_little_endian or ascii".into(),
                        ))
                    }
                    other => return Err(IoError::parse(line_no, format!("unknown PLY format '{other}'"))),
                });
            }
            Some("comment") | Some("obj_info") => {
                comments.push(line.split_once(' ').map_or("", |(_, c)| c).to_string());
            }
            Some("element") => {
                let name = tok.next().ok_or_else(|| IoError::parse(line_no, "element without a name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| IoError::parse(line_no, "element count is not a non-negative integer"))?;
                elements.push(Element { name: name.into(), count, properties: Vec::new(), columns: Vec::new() });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| IoError::parse(line_no, "property before any element"))?;
                let parts: Vec<&str> = tok.collect();
                let scalar = |s: &str| {
                    ScalarType::parse(s).ok_or_else(|| IoError::parse(line_no, format!("unknown property type '{s}'")))
                };
                let prop = match parts.as_slice() {
                    ["list", c, i, name] => {
                        let count = scalar(c)?;
                        if count.is_float() {
                            return Err(IoError::parse(line_no, "list count type must be an integer"));
                        }
                        Property { name: name.to_string(), kind: PropertyKind::List { count, item: scalar(i)? } }
                    }
                    [t, name] => Property { name: name.to_string(), kind: PropertyKind::Scalar(scalar(t)?) },
                    _ => return Err(IoError::parse(line_no, "malformed property line")),
                };
                if el.property_index(&prop.name).is_some() {
                    return Err(IoError::parse(line_no, format!("duplicate property '{}'", prop.name)));
                }
                el.properties.push(prop);
            }
            Some("end_header") => break,
            None => {}
            Some(other) => return Err(IoError::parse(line_no, format!("unexpected header keyword '{other}'"))),
        }
    }
    let format = format.ok_or_else(|| IoError::Format("header has no format line".into()))?;
    for el in &mut elements {
        el.columns = el
            .properties
            .iter()
            .map(|p| match p.kind {
                PropertyKind::Scalar(_) => Column::Scalar(Vec::with_capacity(el.count.min(1 << 24))),
                PropertyKind::List { .. } => Column::List(Vec::with_capacity(el.count.min(1 << 24))),
            })
            .collect();
    }
    match format {
        PlyFormat::Ascii => read_ascii_body(r, &mut elements)?,
        PlyFormat::BinaryLittleEndian => read_binary_body(r, &mut elements)?,
    }
    Ok(PlyData { format, comments, elements })
}

fn push_value(col: &mut Column, v: f64) {
    if let Column::Scalar(c) = col {
        c.push(v);
    }
}

fn read_ascii_body<R: BufRead>(r: R, elements: &mut [Element]) -> Result<(), IoError> {
    let mut lines = r.lines();
    for el in elements.iter_mut() {
        for row in 0..el.count {
            let truncated = || IoError::Truncated { element: el.name.clone(), expected: el.count, actual: row };
            let line = match lines.next() {
                Some(l) => l?,
                None => return Err(truncated()),
            };
            let mut tok = line.split_whitespace();
            let mut next = |t: ScalarType| -> Result<f64, IoError> {
                let s = tok.next().ok_or_else(|| IoError::Format(format!("row {row} of '{}' is short", el.name)))?;
                let bad = || IoError::Format(format!("row {row} of '{}': bad number '{s}'", el.name));
                // Floats are stored at their declared precision, as a binary file would hold them.
                let v: f64 = match t {
                    ScalarType::F32 => s.parse::<f32>().map_err(|_| bad())?.into(),
                    _ => s.parse().map_err(|_| bad())?,
                };
                if !t.in_range(v) {
                    return Err(IoError::Format(format!("row {row} of '{}': {s} is not a valid {}", el.name, t.name())));
                }
                Ok(v)
            };
            for (p, col) in el.properties.iter().zip(el.columns.iter_mut()) {
                match p.kind {
                    PropertyKind::Scalar(t) => push_value(col, next(t)?),
                    PropertyKind::List { count, item } => {
                        let n = next(count)? as usize;
                        let items = (0..n).map(|_| next(item)).collect::<Result<Vec<_>, _>>()?;
                        if let Column::List(c) = col {
                            c.push(items);
                        }
                    }
                }
            }
            if tok.next().is_some() {
                return Err(IoError::Format(format!("row {row} of '{}' has extra values", el.name)));
            }
        }
    }
    Ok(())
}

fn read_binary_body<R: Read>(mut r: R, elements: &mut [Element]) -> Result<(), IoError> {
    let mut buf = [0u8; 8];
    for el in elements.iter_mut() {
        for row in 0..el.count {
            let mut read = |t: ScalarType, r: &mut R| -> Result<f64, IoError> {
                let n = t.size();
                match r.read_exact(&mut buf[..n]) {
                    Ok(()) => Ok(t.decode(&buf[..n])),
                    Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                        Err(IoError::Truncated { element: el.name.clone(), expected: el.count, actual: row })
                    }
                    Err(e) => Err(e.into()),
                }
            };
            for (p, col) in el.properties.iter().zip(el.columns.iter_mut()) {
                match p.kind {
                    PropertyKind::Scalar(t) => {
                        let v = read(t, &mut r)?;
                        push_value(col, v);
                    }
                    PropertyKind::List { count, item } => {
                        let n = read(count, &mut r)?;
                        if n < 0.0 {
                            return Err(IoError::Format(format!("negative list length in '{}'", el.name)));
                        }
                        let items = (0..n as usize).map(|_| read(item, &mut r)).collect::<Result<Vec<_>, _>>()?;
                        if let Column::List(c) = col {
                            c.push(items);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Serializes `data`. Values must fit their declared types.
pub fn write_ply<W: Write>(mut w: W, data: &PlyData) -> Result<(), IoError> {
    for el in &data.elements {
        if el.columns.len() != el.properties.len() {
            return Err(IoError::Invalid(format!("element '{}' has mismatched columns", el.name)));
        }
        for (p, col) in el.properties.iter().zip(&el.columns) {
            let ok = match (p.kind, col) {
                (PropertyKind::Scalar(t), Column::Scalar(v)) => v.len() == el.count && v.iter().all(|&x| t.in_range(x)),
                (PropertyKind::List { count, item }, Column::List(v)) => {
                    v.len() == el.count
                        && v.iter().all(|l| count.in_range(l.len() as f64) && l.iter().all(|&x| item.in_range(x)))
                }
                _ => false,
            };
            if !ok {
                return Err(IoError::Invalid(format!(
                    "property '{}' of '{}' has values that do not fit its declared type or count",
                    p.name, el.name
                )));
            }
        }
    }
    let mut header = String::from("ply\n");
    header.push_str(match data.format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    for c in &data.comments {
        header.push_str(&format!("comment {c}\n"));
    }
    for el in &data.elements {
        header.push_str(&format!("element {} {}\n", el.name, el.count));
        for p in &el.properties {
            match p.kind {
                PropertyKind::Scalar(t) => header.push_str(&format!("property {} {}\n", t.name(), p.name)),
                PropertyKind::List { count, item } => {
                    header.push_str(&format!("property list {} {} {}\n", count.name(), item.name(), p.name))
                }
            }
        }
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;

    for el in &data.elements {
        let mut out = Vec::new();
        for row in 0..el.count {
            match data.format {
                PlyFormat::BinaryLittleEndian => {
                    for (p, col) in el.properties.iter().zip(&el.columns) {
                        match (p.kind, col) {
                            (PropertyKind::Scalar(t), Column::Scalar(v)) => t.encode(v[row], &mut out),
                            (PropertyKind::List { count, item }, Column::List(v)) => {
                                count.encode(v[row].len() as f64, &mut out);
                                for &x in &v[row] {
                                    item.encode(x, &mut out);
                                }
                            }
                            _ => unreachable!("checked above"),
                        }
                    }
                }
                PlyFormat::Ascii => {
                    let mut fields = Vec::new();
                    for (p, col) in el.properties.iter().zip(&el.columns) {
                        match (p.kind, col) {
                            (PropertyKind::Scalar(t), Column::Scalar(v)) => fields.push(t.format_ascii(v[row])),
                            (PropertyKind::List { item, .. }, Column::List(v)) => {
                                fields.push(v[row].len().to_string());
                                fields.extend(v[row].iter().map(|&x| item.format_ascii(x)));
                            }
                            _ => unreachable!("checked above"),
                        }
                    }
                    out.extend_from_slice(fields.join(" ").as_bytes());
                    out.push(b'\n');
                }
            }
            if out.len() > 1 << 16 {
                w.write_all(&out)?;
                out.clear();
            }
        }
        w.write_all(&out)?;
    }
    w.flush()?;
    Ok(())
}

fn scalar_prop(name: &str, t: ScalarType) -> Property {
    Property { name: name.into(), kind: PropertyKind::Scalar(t) }
}

fn vertex_element(data: &PlyData) -> Result<&Element, IoError> {
    data.element("vertex").ok_or_else(|| IoError::Format("no 'vertex' element".into()))
}

fn positions(el: &Element) -> Result<Vec<Vector3<f64>>, IoError> {
    let col = |n: &str| el.scalar(n).ok_or_else(|| IoError::Format(format!("vertex property '{n}' missing")));
    let (x, y, z) = (col("x")?, col("y")?, col("z")?);
    Ok((0..el.count).map(|i| Vector3::new(x[i], y[i], z[i])).collect())
}

fn uchar_rgb(el: &Element) -> Option<Vec<[u8; 3]>> {
    let names = ["red", "green", "blue"];
    if names.iter().any(|n| el.scalar_type(n) != Some(ScalarType::U8)) {
        return None;
    }
    let (r, g, b) = (el.scalar("red")?, el.scalar("green")?, el.scalar("blue")?);
    Some((0..el.count).map(|i| [r[i] as u8, g[i] as u8, b[i] as u8]).collect())
}

/// Reads the `vertex` element as a point cloud. Vertex properties other than
/// `x,y,z` and uchar `red,green,blue` are kept in [`PointCloud::extra`].
pub fn read_point_cloud<R: BufRead>(r: R) -> Result<PointCloud, IoError> {
    let data = read_ply(r)?;
    let el = vertex_element(&data)?;
    let points = positions(el)?;
    let colors = uchar_rgb(el);
    let mut skip = vec!["x", "y", "z"];
    if colors.is_some() {
        skip.extend(["red", "green", "blue"]);
    }
    let mut extra = Vec::new();
    for (p, col) in el.properties.iter().zip(&el.columns) {
        if skip.contains(&p.name.as_str()) {
            continue;
        }
        match (p.kind, col) {
            (PropertyKind::Scalar(kind), Column::Scalar(values)) => {
                extra.push(ExtraProperty { name: p.name.clone(), kind, values: values.clone() })
            }
            _ => return Err(IoError::Unsupported(format!("list property '{}' on vertices", p.name))),
        }
    }
    let cloud = PointCloud { points, colors, extra };
    cloud.validate().map_err(|e| IoError::Invalid(e.to_string()))?;
    Ok(cloud)
}

/// Writes a point cloud: double `x,y,z`, then uchar colors, then pass-through properties.
pub fn write_point_cloud<W: Write>(w: W, cloud: &PointCloud, format: PlyFormat) -> Result<(), IoError> {
    cloud.validate().map_err(|e| IoError::Invalid(e.to_string()))?;
    let n = cloud.len();
    let mut properties = vec![
        scalar_prop("x", ScalarType::F64),
        scalar_prop("y", ScalarType::F64),
        scalar_prop("z", ScalarType::F64),
    ];
    let mut columns: Vec<Column> =
        (0..3).map(|a| Column::Scalar(cloud.points.iter().map(|p| p[a]).collect())).collect();
    if let Some(colors) = &cloud.colors {
        for (a, name) in ["red", "green", "blue"].iter().enumerate() {
            properties.push(scalar_prop(name, ScalarType::U8));
            columns.push(Column::Scalar(colors.iter().map(|c| c[a] as f64).collect()));
        }
    }
    for e in &cloud.extra {
        properties.push(scalar_prop(&e.name, e.kind));
        columns.push(Column::Scalar(e.values.clone()));
    }
    let data = PlyData {
        format,
        comments: Vec::new(),
        elements: vec![Element { name: "vertex".into(), count: n, properties, columns }],
    };
    write_ply(w, &data)
}

/// Reads a Gaussian set (`x,y,z,scale,opacity` plus uchar `red,green,blue`).
pub fn read_gaussians<R: BufRead>(r: R) -> Result<GaussianSet, IoError> {
    let data = read_ply(r)?;
    let el = vertex_element(&data)?;
    let centers = positions(el)?;
    let col = |n: &str| el.scalar(n).ok_or_else(|| IoError::Format(format!("vertex property '{n}' missing")));
    let scales = col("scale")?.to_vec();
    let opacities = col("opacity")?.to_vec();
    let colors = match uchar_rgb(el) {
        Some(c) => c.iter().map(|c| c.map(|v| v as f64 / 255.0)).collect(),
        None => return Err(IoError::Format("Gaussian PLY needs uchar red, green, blue".into())),
    };
    GaussianSet::new(centers, scales, opacities, colors).map_err(|e| IoError::Invalid(e.to_string()))
}

/// Writes a Gaussian set; colors are quantized to 8 bits.
pub fn write_gaussians<W: Write>(w: W, set: &GaussianSet, format: PlyFormat) -> Result<(), IoError> {
    let mut properties = Vec::new();
    let mut columns = Vec::new();
    for (a, name) in ["x", "y", "z"].iter().enumerate() {
        properties.push(scalar_prop(name, ScalarType::F64));
        columns.push(Column::Scalar(set.centers().iter().map(|p| p[a]).collect()));
    }
    properties.push(scalar_prop("scale", ScalarType::F64));
    columns.push(Column::Scalar(set.scales().to_vec()));
    properties.push(scalar_prop("opacity", ScalarType::F64));
    columns.push(Column::Scalar(set.opacities().to_vec()));
    for (a, name) in ["red", "green", "blue"].iter().enumerate() {
        properties.push(scalar_prop(name, ScalarType::U8));
        columns.push(Column::Scalar(set.colors().iter().map(|c| (c[a] * 255.0).round()).collect()));
    }
    let data = PlyData {
        format,
        comments: Vec::new(),
        elements: vec![Element { name: "vertex".into(), count: set.len(), properties, columns }],
    };
    write_ply(w, &data)
}

/// Reads `vertex` positions and the `face` element's `vertex_indices` (or
/// `vertex_index`) lists, fan-triangulating polygons.
pub fn read_mesh_ply<R: BufRead>(r: R) -> Result<TriangleMesh, IoError> {
    let data = read_ply(r)?;
    let vertices = positions(vertex_element(&data)?)?;
    let mut triangles = Vec::new();
    if let Some(face) = data.element("face") {
        let idx = face
            .property_index("vertex_indices")
            .or_else(|| face.property_index("vertex_index"))
            .ok_or_else(|| IoError::Format("face element has no vertex_indices list".into()))?;
        let Column::List(lists) = &face.columns[idx] else {
            return Err(IoError::Format("vertex_indices is not a list".into()));
        };
        for (f, poly) in lists.iter().enumerate() {
            if poly.len() < 3 {
                return Err(IoError::Format(format!("face {f} has fewer than 3 vertices")));
            }
            for k in 1..poly.len() - 1 {
                triangles.push([poly[0] as usize, poly[k] as usize, poly[k + 1] as usize]);
            }
        }
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| IoError::Invalid(e.to_string()))
}

/// Writes double vertices and `uchar int` face lists.
pub fn write_mesh_ply<W: Write>(w: W, mesh: &TriangleMesh, format: PlyFormat) -> Result<(), IoError> {
    let vprops = ["x", "y", "z"].iter().map(|n| scalar_prop(n, ScalarType::F64)).collect();
    let vcols = (0..3).map(|a| Column::Scalar(mesh.vertices.iter().map(|p| p[a]).collect())).collect();
    let faces = mesh.triangles.iter().map(|t| t.iter().map(|&i| i as f64).collect()).collect();
    let data = PlyData {
        format,
        comments: Vec::new(),
        elements: vec![
            Element { name: "vertex".into(), count: mesh.vertices.len(), properties: vprops, columns: vcols },
            Element {
                name: "face".into(),
                count: mesh.triangles.len(),
                properties: vec![Property {
                    name: "vertex_indices".into(),
                    kind: PropertyKind::List { count: ScalarType::U8, item: ScalarType::I32 },
                }],
                columns: vec![Column::List(faces)],
            },
        ],
    };
    write_ply(w, &data)
}

pub fn load_point_cloud(path: &Path) -> Result<PointCloud, IoError> {
    read_point_cloud(open(path)?)
}

pub fn save_point_cloud(path: &Path, cloud: &PointCloud) -> Result<(), IoError> {
    write_point_cloud(create(path)?, cloud, PlyFormat::BinaryLittleEndian)
}

pub fn load_gaussians(path: &Path) -> Result<GaussianSet, IoError> {
    read_gaussians(open(path)?)
}

pub fn save_gaussians(path: &Path, set: &GaussianSet) -> Result<(), IoError> {
    write_gaussians(create(path)?, set, PlyFormat::BinaryLittleEndian)
}

pub fn load_mesh_ply(path: &Path) -> Result<TriangleMesh, IoError> {
    read_mesh_ply(open(path)?)
}

pub fn save_mesh_ply(path: &Path, mesh: &TriangleMesh) -> Result<(), IoError> {
    write_mesh_ply(create(path)?, mesh, PlyFormat::BinaryLittleEndian)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ASCII: &str = "ply\nformat ascii 1.0\ncomment hand written\nelement vertex 3\n\
property float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\n\
property uchar blue\nproperty float intensity\nend_header\n\
0 0 0 255 0 0 0.5\n1.5 -2 3.25 0 255 0 1\n-0.125 4 1e3 0 0 255 2\n";

    #[test]
    fn ascii_fixture_values() {
        let c = read_point_cloud(ASCII.as_bytes()).unwrap();
        assert_eq!(c.points[1], Vector3::new(1.5, -2.0, 3.25));
        assert_eq!(c.points[2], Vector3::new(-0.125, 4.0, 1000.0));
        assert_eq!(c.colors.as_ref().unwrap()[2], [0, 0, 255]);
        assert_eq!(c.extra[0].name, "intensity");
        assert_eq!(c.extra[0].values, vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn pass_through_survives_rewrite() {
        let c = read_point_cloud(ASCII.as_bytes()).unwrap();
        for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let mut buf = Vec::new();
            write_point_cloud(&mut buf, &c, format).unwrap();
            assert_eq!(read_point_cloud(buf.as_slice()).unwrap(), c);
        }
    }

    #[test]
    fn truncated_body_reports_counts() {
        let cut = ASCII.rsplit_once("-0.125").unwrap().0;
        match read_point_cloud(cut.as_bytes()) {
            Err(IoError::Truncated { element, expected, actual }) => {
                assert_eq!((element.as_str(), expected, actual), ("vertex", 3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
        let c = read_point_cloud(ASCII.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_point_cloud(&mut buf, &c, PlyFormat::BinaryLittleEndian).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_point_cloud(buf.as_slice()), Err(IoError::Truncated { actual: 2, .. })));
    }

    #[test]
    fn big_endian_rejected() {
        let text = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n";
        match read_ply(text.as_bytes()) {
            Err(IoError::Unsupported(msg)) => assert!(msg.contains("big-endian")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_headers_rejected() {
        assert!(read_ply("plx\n".as_bytes()).is_err());
        assert!(read_ply("ply\nelement vertex 1\nproperty float x\nend_header\n0\n".as_bytes()).is_err());
        assert!(read_ply("ply\nformat ascii 1.0\nproperty float x\nend_header\n".as_bytes()).is_err());
        assert!(read_ply("ply\nformat ascii 1.0\nelement v 1\nproperty quad x\nend_header\n".as_bytes()).is_err());
    }

    #[test]
    fn mesh_round_trip_and_quads() {
        let text = "ply\nformat ascii 1.0\nelement vertex 4\nproperty double x\nproperty double y\n\
property double z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n\
0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let m = read_mesh_ply(text.as_bytes()).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        let mut buf = Vec::new();
        write_mesh_ply(&mut buf, &m, PlyFormat::BinaryLittleEndian).unwrap();
        assert_eq!(read_mesh_ply(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn gaussian_round_trip() {
        let set = GaussianSet::new(
            vec![Vector3::new(0.1, 0.2, 0.3), Vector3::new(-1.0, 2.0, 1e-7)],
            vec![0.5, 0.25],
            vec![0.99, 0.125],
            vec![[1.0, 0.0, 128.0 / 255.0], [0.0, 0.0, 0.0]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_gaussians(&mut buf, &set, PlyFormat::BinaryLittleEndian).unwrap();
        assert_eq!(read_gaussians(buf.as_slice()).unwrap(), set);
    }
}
