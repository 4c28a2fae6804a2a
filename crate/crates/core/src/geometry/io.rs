//! Reading and writing PLY (ASCII and binary little-endian), OBJ (`v`/`f`
//! records) and XYZ (`x y z [nx ny nz]` per line) files.
//!
//! Binary little-endian PLY with `double` coordinates is the canonical output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Point3, PointCloud, TriangleMesh, Vector3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyFormat {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

/// Raw contents of a geometry file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeometryData {
    pub vertices: Vec<Point3>,
    pub normals: Option<Vec<Vector3>>,
    pub faces: Vec<[u32; 3]>,
}

impl GeometryData {
    pub fn into_cloud(self) -> Result<PointCloud> {
        match self.normals {
            Some(normals) => {
                let normals = normals
                    .into_iter()
                    .enumerate()
                    .map(|(i, n)| {
                        let len = n.norm();
                        if len > 0.0 && len.is_finite() {
                            Ok(n / len)
                        } else {
                            Err(Error::invalid(format!("normal {i} has zero length")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                PointCloud::with_normals(self.vertices, normals)
            }
            None => PointCloud::new(self.vertices),
        }
    }

    pub fn into_mesh(self) -> Result<TriangleMesh> {
        TriangleMesh::new(self.vertices, self.faces)
    }
}

fn parse_err(path: &str, location: String, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        location,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
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

    fn decode(self, b: &[u8]) -> f64 {
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

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Reads a PLY stream. `name` is used in error messages.
pub fn read_ply(reader: impl Read, name: &str) -> Result<GeometryData> {
    let mut reader = BufReader::new(reader);
    let mut line = String::new();
    let mut line_no = 0usize;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut header_bytes = 0usize;
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        header_bytes += read;
        line_no += 1;
        if read == 0 {
            return Err(parse_err(name, format!("line {line_no}"), "missing end_header"));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let loc = || format!("line {line_no}");
        match tokens.as_slice() {
            [] => continue,
            ["ply"] if line_no == 1 => {}
            _ if line_no == 1 => return Err(parse_err(name, loc(), "missing 'ply' magic")),
            ["format", f, _] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => {
                        return Err(parse_err(name, loc(), format!("unsupported format '{other}'")))
                    }
                })
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", el, count] => elements.push(Element {
                name: el.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(name, loc(), format!("bad element count '{count}'")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, prop] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(name, loc(), "property before element"))?;
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(parse_err(name, loc(), "unknown list property type"));
                };
                el.properties.push(Property::List {
                    name: prop.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, prop] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(name, loc(), "property before element"))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| parse_err(name, loc(), format!("unknown property type '{ty}'")))?;
                el.properties.push(Property::Scalar {
                    name: prop.to_string(),
                    ty,
                });
            }
            ["end_header"] => break,
            _ => return Err(parse_err(name, loc(), format!("unexpected header line '{}'", line.trim()))),
        }
    }
    let format = format.ok_or_else(|| parse_err(name, format!("line {line_no}"), "missing format line"))?;

    let mut data = GeometryData::default();
    match format {
        PlyFormat::Ascii => {
            let mut body = AsciiBody {
                reader,
                line_no,
                name,
                line: String::new(),
            };
            for el in &elements {
                read_element(el, &mut data, name, || body.next_record())?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let mut body = BinaryBody {
                reader,
                offset: header_bytes,
                name,
            };
            for el in &elements {
                read_element_binary(el, &mut data, &mut body)?;
            }
        }
    }
    Ok(data)
}

struct AsciiBody<'a, R> {
    reader: R,
    line_no: usize,
    name: &'a str,
    line: String,
}

impl<R: BufRead> AsciiBody<'_, R> {
    fn next_record(&mut self) -> Result<(String, Vec<f64>)> {
        loop {
            self.line.clear();
            self.line_no += 1;
            if self.reader.read_line(&mut self.line)? == 0 {
                return Err(parse_err(
                    self.name,
                    format!("line {}", self.line_no),
                    "unexpected end of file (element count mismatch)",
                ));
            }
            if self.line.trim().is_empty() {
                continue;
            }
            let loc = format!("line {}", self.line_no);
            let values = self
                .line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(self.name, loc.clone(), format!("bad number: {e}")))?;
            return Ok((loc, values));
        }
    }
}

#[derive(Default)]
struct VertexSlots {
    xyz: [Option<usize>; 3],
    normal: [Option<usize>; 3],
}

fn vertex_slots(el: &Element) -> VertexSlots {
    let mut slots = VertexSlots::default();
    for (i, p) in el.properties.iter().enumerate() {
        if let Property::Scalar { name, .. } = p {
            match name.as_str() {
                "x" => slots.xyz[0] = Some(i),
                "y" => slots.xyz[1] = Some(i),
                "z" => slots.xyz[2] = Some(i),
                "nx" => slots.normal[0] = Some(i),
                "ny" => slots.normal[1] = Some(i),
                "nz" => slots.normal[2] = Some(i),
                _ => {}
            }
        }
    }
    slots
}

fn is_face_list(p: &Property) -> bool {
    matches!(p, Property::List { .. }) && matches!(p.name(), "vertex_indices" | "vertex_index")
}

/// Fan-triangulates a polygon.
fn push_polygon(faces: &mut Vec<[u32; 3]>, poly: &[u32]) {
    for k in 1..poly.len().saturating_sub(1) {
        faces.push([poly[0], poly[k], poly[k + 1]]);
    }
}

fn read_element(
    el: &Element,
    data: &mut GeometryData,
    name: &str,
    mut next: impl FnMut() -> Result<(String, Vec<f64>)>,
) -> Result<()> {
    let slots = vertex_slots(el);
    let is_vertex = el.name == "vertex";
    let has_normals = is_vertex && slots.normal.iter().all(Option::is_some);
    if is_vertex && slots.xyz.iter().any(Option::is_none) {
        return Err(parse_err(name, "header".into(), "vertex element lacks x/y/z"));
    }
    if has_normals {
        data.normals = Some(Vec::with_capacity(el.count));
    }
    for _ in 0..el.count {
        let (loc, values) = next()?;
        let mut cursor = 0usize;
        let mut scalars = vec![0.0; el.properties.len()];
        let mut poly = Vec::new();
        for (i, p) in el.properties.iter().enumerate() {
            match p {
                Property::Scalar { .. } => {
                    scalars[i] = *values
                        .get(cursor)
                        .ok_or_else(|| parse_err(name, loc.clone(), "too few values"))?;
                    cursor += 1;
                }
                Property::List { .. } => {
                    let n = *values
                        .get(cursor)
                        .ok_or_else(|| parse_err(name, loc.clone(), "missing list length"))?
                        as usize;
                    let items = values
                        .get(cursor + 1..cursor + 1 + n)
                        .ok_or_else(|| parse_err(name, loc.clone(), "list shorter than its length"))?;
                    if is_face_list(p) && el.name == "face" {
                        poly = items.iter().map(|&v| v as u32).collect();
                    }
                    cursor += 1 + n;
                }
            }
        }
        store_record(el, &slots, has_normals, &scalars, &poly, data);
    }
    Ok(())
}

fn store_record(
    el: &Element,
    slots: &VertexSlots,
    has_normals: bool,
    scalars: &[f64],
    poly: &[u32],
    data: &mut GeometryData,
) {
    if el.name == "vertex" {
        let g = |s: Option<usize>| scalars[s.unwrap()];
        data.vertices
            .push(Point3::new(g(slots.xyz[0]), g(slots.xyz[1]), g(slots.xyz[2])));
        if has_normals {
            data.normals.as_mut().unwrap().push(Vector3::new(
                g(slots.normal[0]),
                g(slots.normal[1]),
                g(slots.normal[2]),
            ));
        }
    } else if el.name == "face" {
        push_polygon(&mut data.faces, poly);
    }
}

struct BinaryBody<'a, R> {
    reader: R,
    offset: usize,
    name: &'a str,
}

impl<R: Read> BinaryBody<'_, R> {
    fn read(&mut self, ty: Scalar) -> Result<f64> {
        let mut buf = [0u8; 8];
        let n = ty.size();
        self.reader.read_exact(&mut buf[..n]).map_err(|_| {
            parse_err(
                self.name,
                format!("byte offset {}", self.offset),
                "unexpected end of file (element count mismatch)",
            )
        })?;
        self.offset += n;
        Ok(ty.decode(&buf[..n]))
    }
}

fn read_element_binary<R: Read>(
    el: &Element,
    data: &mut GeometryData,
    body: &mut BinaryBody<'_, R>,
) -> Result<()> {
    let slots = vertex_slots(el);
    let is_vertex = el.name == "vertex";
    let has_normals = is_vertex && slots.normal.iter().all(Option::is_some);
    if is_vertex && slots.xyz.iter().any(Option::is_none) {
        return Err(parse_err(body.name, "header".into(), "vertex element lacks x/y/z"));
    }
    if has_normals {
        data.normals = Some(Vec::with_capacity(el.count));
    }
    let mut scalars = vec![0.0; el.properties.len()];
    let mut poly = Vec::new();
    for _ in 0..el.count {
        poly.clear();
        for (i, p) in el.properties.iter().enumerate() {
            match p {
                Property::Scalar { ty, .. } => scalars[i] = body.read(*ty)?,
                Property::List { count, item, .. } => {
                    let n = body.read(*count)? as usize;
                    let keep = is_face_list(p) && el.name == "face";
                    for _ in 0..n {
                        let v = body.read(*item)?;
                        if keep {
                            poly.push(v as u32);
                        }
                    }
                }
            }
        }
        store_record(el, &slots, has_normals, &scalars, &poly, data);
    }
    Ok(())
}

fn ply_header(
    w: &mut impl Write,
    format: PlyFormat,
    vertices: usize,
    normals: bool,
    faces: Option<usize>,
) -> std::io::Result<()> {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply\nformat {fmt} 1.0\nelement vertex {vertices}")?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if normals {
        writeln!(w, "property double nx\nproperty double ny\nproperty double nz")?;
    }
    if let Some(f) = faces {
        writeln!(w, "element face {f}\nproperty list uchar int vertex_indices")?;
    }
    writeln!(w, "end_header")
}

fn write_ply(
    w: &mut impl Write,
    format: PlyFormat,
    vertices: &[Point3],
    normals: Option<&[Vector3]>,
    faces: Option<&[[u32; 3]]>,
) -> std::io::Result<()> {
    ply_header(w, format, vertices.len(), normals.is_some(), faces.map(<[_]>::len))?;
    for (i, v) in vertices.iter().enumerate() {
        let n = normals.map(|n| n[i]);
        match format {
            PlyFormat::Ascii => {
                write!(w, "{} {} {}", v.x, v.y, v.z)?;
                if let Some(n) = n {
                    write!(w, " {} {} {}", n.x, n.y, n.z)?;
                }
                writeln!(w)?;
            }
            PlyFormat::BinaryLittleEndian => {
                for c in v.iter().chain(n.iter().flat_map(|n| n.iter())) {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
        }
    }
    for t in faces.unwrap_or(&[]) {
        match format {
            PlyFormat::Ascii => writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?,
            PlyFormat::BinaryLittleEndian => {
                w.write_all(&[3u8])?;
                for &i in t {
                    w.write_all(&(i as i32).to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_ply_cloud(w: &mut impl Write, cloud: &PointCloud, format: PlyFormat) -> Result<()> {
    Ok(write_ply(w, format, cloud.points(), cloud.normals(), None)?)
}

pub fn write_ply_mesh(w: &mut impl Write, mesh: &TriangleMesh, format: PlyFormat) -> Result<()> {
    Ok(write_ply(w, format, mesh.vertices(), None, Some(mesh.triangles()))?)
}

/// Reads `v` and `f` records; other records are ignored. Polygons are fan-triangulated.
pub fn read_obj(reader: impl Read, name: &str) -> Result<GeometryData> {
    let mut data = GeometryData::default();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let loc = || format!("line {}", i + 1);
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let c: Vec<f64> = tokens
                    .take(3)
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(name, loc(), format!("bad vertex: {e}")))?;
                if c.len() != 3 {
                    return Err(parse_err(name, loc(), "vertex needs 3 coordinates"));
                }
                data.vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let n = data.vertices.len() as i64;
                let poly = tokens
                    .map(|t| {
                        let idx: i64 = t
                            .split('/')
                            .next()
                            .unwrap_or("")
                            .parse()
                            .map_err(|_| parse_err(name, loc(), format!("bad face index '{t}'")))?;
                        let resolved = if idx < 0 { n + idx } else { idx - 1 };
                        if resolved < 0 || resolved >= n {
                            return Err(parse_err(name, loc(), format!("face index {idx} out of range")));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<Vec<u32>>>()?;
                if poly.len() < 3 {
                    return Err(parse_err(name, loc(), "face needs at least 3 vertices"));
                }
                push_polygon(&mut data.faces, &poly);
            }
            _ => {}
        }
    }
    Ok(data)
}

pub fn write_obj(w: &mut impl Write, vertices: &[Point3], faces: &[[u32; 3]]) -> Result<()> {
    for v in vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

/// Reads `x y z` or `x y z nx ny nz` lines. Blank lines and `#` comments are skipped.
pub fn read_xyz(reader: impl Read, name: &str) -> Result<GeometryData> {
    let mut data = GeometryData::default();
    let mut normals = Vec::new();
    let mut columns = None;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let loc = || format!("line {}", i + 1);
        let vals: Vec<f64> = trimmed
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(name, loc(), format!("bad number: {e}")))?;
        if vals.len() != 3 && vals.len() != 6 {
            return Err(parse_err(name, loc(), format!("expected 3 or 6 values, got {}", vals.len())));
        }
        if *columns.get_or_insert(vals.len()) != vals.len() {
            return Err(parse_err(name, loc(), "inconsistent column count"));
        }
        data.vertices.push(Point3::new(vals[0], vals[1], vals[2]));
        if vals.len() == 6 {
            normals.push(Vector3::new(vals[3], vals[4], vals[5]));
        }
    }
    if columns == Some(6) {
        data.normals = Some(normals);
    }
    Ok(data)
}

pub fn write_xyz(w: &mut impl Write, cloud: &PointCloud) -> Result<()> {
    for (i, p) in cloud.points().iter().enumerate() {
        write!(w, "{} {} {}", p.x, p.y, p.z)?;
        if let Some(n) = cloud.normals() {
            write!(w, " {} {} {}", n[i].x, n[i].y, n[i].z)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn read_any(path: &Path) -> Result<GeometryData> {
    let name = path.display().to_string();
    let file = File::open(path)?;
    match extension(path).as_str() {
        "ply" => read_ply(file, &name),
        "obj" => read_obj(file, &name),
        "xyz" | "txt" => read_xyz(file, &name),
        _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
}

pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_any(path.as_ref())?.into_cloud()
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    if extension(path) == "xyz" {
        return Err(Error::UnsupportedFormat(path.to_path_buf()));
    }
    read_any(path)?.into_mesh()
}

pub fn save_point_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    match extension(path).as_str() {
        "ply" => write_ply_cloud(&mut w, cloud, PlyFormat::BinaryLittleEndian)?,
        "xyz" | "txt" => write_xyz(&mut w, cloud)?,
        "obj" => write_obj(&mut w, cloud.points(), &[])?,
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
    Ok(w.flush()?)
}

pub fn save_mesh(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    match extension(path).as_str() {
        "ply" => write_ply_mesh(&mut w, mesh, PlyFormat::BinaryLittleEndian)?,
        "obj" => write_obj(&mut w, mesh.vertices(), mesh.triangles())?,
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
    Ok(w.flush()?)
}
