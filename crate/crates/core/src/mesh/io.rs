//! Mesh file formats: ASCII OFF, ASCII PLY and binary little-endian STL.
//!
//! Readers keep vertices and faces in file order. STL stores a triangle soup
//! and is read without welding; use
//! [`merge_close_vertices`](crate::repair::merge_close_vertices) for that.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Off,
    Ply,
    Stl,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()
            .and_then(|e| e.to_str())
            .and_then(|e| e.parse().ok())
    }

    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Off => "off",
            MeshFormat::Ply => "ply",
            MeshFormat::Stl => "stl",
        }
    }
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(MeshFormat::Off),
            "ply" => Ok(MeshFormat::Ply),
            "stl" => Ok(MeshFormat::Stl),
            other => Err(Error::format(format!("unknown mesh format `{other}`"))),
        }
    }
}

impl fmt::Display for MeshFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriMesh> {
    let file = File::open(path.as_ref())?;
    let mut reader = BufReader::new(file);
    match format {
        MeshFormat::Off => read_off(&mut reader),
        MeshFormat::Ply => read_ply(&mut reader),
        MeshFormat::Stl => read_stl(&mut reader),
    }
}

pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    match format {
        MeshFormat::Off => write_off(mesh, &mut w)?,
        MeshFormat::Ply => write_ply(mesh, &mut w)?,
        MeshFormat::Stl => write_stl(mesh, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

/// Serialises into memory; used for byte-level determinism checks.
pub fn mesh_to_bytes(mesh: &TriMesh, format: MeshFormat) -> Vec<u8> {
    let mut buf = Vec::new();
    let res = match format {
        MeshFormat::Off => write_off(mesh, &mut buf),
        MeshFormat::Ply => write_ply(mesh, &mut buf),
        MeshFormat::Stl => write_stl(mesh, &mut buf),
    };
    res.expect("writing to a Vec cannot fail");
    buf
}

fn parse_coord(tok: Option<&str>, what: &str) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::format(format!("missing {what}")))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::format(format!("bad {what} `{tok}`")))?;
    if !v.is_finite() {
        return Err(Error::format(format!("non-finite {what} `{tok}`")));
    }
    Ok(v)
}

fn parse_index(tok: Option<&str>, n_vertices: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::format(format!("missing {what}")))?;
    let v: usize = tok
        .parse()
        .map_err(|_| Error::format(format!("bad {what} `{tok}`")))?;
    if v >= n_vertices {
        return Err(Error::format(format!(
            "{what} {v} out of range for {n_vertices} vertices"
        )));
    }
    Ok(v)
}

fn push_polygon(faces: &mut Vec<[usize; 3]>, poly: &[usize]) -> Result<()> {
    if poly.len() < 3 {
        return Err(Error::format(format!(
            "polygon with {} corners",
            poly.len()
        )));
    }
    for k in 1..poly.len() - 1 {
        faces.push([poly[0], poly[k], poly[k + 1]]);
    }
    Ok(())
}

/// Content lines with `#` comments stripped and blank lines dropped.
fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = std::io::Result<String>> {
    reader.lines().filter_map(|line| match line {
        Ok(l) => {
            let body = l.split('#').next().unwrap_or("").trim().to_string();
            (!body.is_empty()).then_some(Ok(body))
        }
        Err(e) => Some(Err(e)),
    })
}

pub fn read_off<R: BufRead>(reader: R) -> Result<TriMesh> {
    let mut lines = content_lines(reader);
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::format("unexpected end of OFF file"))?
            .map_err(Error::from)
    };
    let first = next()?;
    let rest = first
        .strip_prefix("OFF")
        .ok_or_else(|| Error::format("missing OFF header"))?
        .trim()
        .to_string();
    let counts_line = if rest.is_empty() { next()? } else { rest };
    let mut counts = counts_line.split_whitespace();
    let nv = parse_index(counts.next(), usize::MAX, "vertex count")?;
    let nf = parse_index(counts.next(), usize::MAX, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = next()?;
        let mut t = line.split_whitespace();
        let what = format!("coordinate of vertex {i}");
        vertices.push(Point3::new(
            parse_coord(t.next(), &what)?,
            parse_coord(t.next(), &what)?,
            parse_coord(t.next(), &what)?,
        ));
    }
    let mut faces = Vec::with_capacity(nf);
    for i in 0..nf {
        let line = next()?;
        let mut t = line.split_whitespace();
        let n = parse_index(t.next(), usize::MAX, "polygon size")?;
        let poly = (0..n)
            .map(|_| parse_index(t.next(), nv, &format!("index in face {i}")))
            .collect::<Result<Vec<_>>>()?;
        push_polygon(&mut faces, &poly)?;
    }
    Ok(TriMesh {
        vertices,
        faces,
        origins: None,
    })
}

pub fn write_off<W: Write>(mesh: &TriMesh, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} 0", mesh.vertices.len(), mesh.faces.len())?;
    for v in &mesh.vertices {
        writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

#[derive(Debug)]
enum PlyProperty {
    Scalar(String),
    List(String),
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    props: Vec<PlyProperty>,
}

pub fn read_ply<R: BufRead>(reader: R) -> Result<TriMesh> {
    let mut lines = reader.lines();
    let mut next = || -> Result<String> {
        Ok(lines
            .next()
            .ok_or_else(|| Error::format("unexpected end of PLY file"))??
            .trim()
            .to_string())
    };
    if next()? != "ply" {
        return Err(Error::format("missing `ply` magic"));
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let line = next()?;
        let mut t = line.split_whitespace();
        match t.next() {
            Some("format") => match t.next() {
                Some("ascii") => {}
                Some(other) => {
                    return Err(Error::format(format!("unsupported PLY encoding `{other}`")))
                }
                None => return Err(Error::format("incomplete PLY format line")),
            },
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = t
                    .next()
                    .ok_or_else(|| Error::format("element without a name"))?
                    .to_string();
                let count = parse_index(t.next(), usize::MAX, "element count")?;
                elements.push(PlyElement {
                    name,
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::format("property before any element"))?;
                let kind = t.next().ok_or_else(|| Error::format("empty property"))?;
                let prop = if kind == "list" {
                    let name = t
                        .nth(2)
                        .ok_or_else(|| Error::format("list without a name"))?;
                    PlyProperty::List(name.to_string())
                } else {
                    let name = t
                        .next()
                        .ok_or_else(|| Error::format("property without a name"))?;
                    PlyProperty::Scalar(name.to_string())
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::format(format!("unknown PLY header line `{other}`"))),
        }
    }

    let vertex_el = elements.iter().find(|e| e.name == "vertex");
    let nv = vertex_el.map_or(0, |e| e.count);
    let mut vertices = Vec::with_capacity(nv);
    let mut faces = Vec::new();
    for el in &elements {
        let axis_slots: Vec<Option<usize>> = el
            .props
            .iter()
            .map(|p| match p {
                PlyProperty::Scalar(n) if n == "x" => Some(0),
                PlyProperty::Scalar(n) if n == "y" => Some(1),
                PlyProperty::Scalar(n) if n == "z" => Some(2),
                _ => None,
            })
            .collect();
        if el.name == "vertex" && axis_slots.iter().flatten().count() != 3 {
            return Err(Error::format("vertex element lacks x, y and z"));
        }
        for row in 0..el.count {
            let line = next()?;
            let mut t = line.split_whitespace();
            let mut xyz = [0.0; 3];
            let mut poly: Option<Vec<usize>> = None;
            for (prop, slot) in el.props.iter().zip(&axis_slots) {
                match prop {
                    PlyProperty::Scalar(_) => {
                        let what = format!("{} {row} property", el.name);
                        if el.name == "vertex" {
                            let v = parse_coord(t.next(), &what)?;
                            if let Some(k) = slot {
                                xyz[*k] = v;
                            }
                        } else {
                            t.next()
                                .ok_or_else(|| Error::format(format!("missing {what}")))?;
                        }
                    }
                    PlyProperty::List(name) => {
                        let n = parse_index(t.next(), usize::MAX, "list length")?;
                        let is_indices = el.name == "face"
                            && (name == "vertex_indices" || name == "vertex_index");
                        let items = (0..n)
                            .map(|_| {
                                if is_indices {
                                    parse_index(t.next(), nv, &format!("index in face {row}"))
                                } else {
                                    t.next()
                                        .map(|_| 0)
                                        .ok_or_else(|| Error::format("short list property"))
                                }
                            })
                            .collect::<Result<Vec<_>>>()?;
                        if is_indices {
                            poly = Some(items);
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
            } else if el.name == "face" {
                let poly =
                    poly.ok_or_else(|| Error::format("face element lacks vertex_indices"))?;
                push_polygon(&mut faces, &poly)?;
            }
        }
    }
    Ok(TriMesh {
        vertices,
        faces,
        origins: None,
    })
}

pub fn write_ply<W: Write>(mesh: &TriMesh, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertices.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "element face {}", mesh.faces.len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for v in &mesh.vertices {
        writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

pub fn read_stl<R: Read>(reader: &mut R) -> Result<TriMesh> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() < 84 {
        return Err(Error::format(format!(
            "binary STL needs at least 84 bytes, found {}",
            bytes.len()
        )));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().expect("4 bytes")) as usize;
    let expected = 84 + 50 * count;
    if bytes.len() != expected {
        return Err(Error::format(format!(
            "binary STL declares {count} triangles ({expected} bytes) but has {} bytes",
            bytes.len()
        )));
    }
    let mut vertices = Vec::with_capacity(3 * count);
    let mut faces = Vec::with_capacity(count);
    for t in 0..count {
        let rec = &bytes[84 + 50 * t..84 + 50 * (t + 1)];
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().expect("4 bytes"));
        for corner in 0..3 {
            let base = 3 + 3 * corner;
            let p = [f(base), f(base + 1), f(base + 2)];
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::format(format!("non-finite coordinate in facet {t}")));
            }
            vertices.push(Point3::new(p[0] as f64, p[1] as f64, p[2] as f64));
        }
        faces.push([3 * t, 3 * t + 1, 3 * t + 2]);
    }
    Ok(TriMesh {
        vertices,
        faces,
        origins: None,
    })
}

pub fn write_stl<W: Write>(mesh: &TriMesh, w: &mut W) -> std::io::Result<()> {
    let mut header = [0u8; 80];
    let tag = b"cartimesh binary stl";
    header[..tag.len()].copy_from_slice(tag);
    w.write_all(&header)?;
    w.write_all(&(mesh.faces.len() as u32).to_le_bytes())?;
    for f in 0..mesh.faces.len() {
        let n = mesh.face_cross(f);
        let n = if n.norm() > 0.0 { n.normalize() } else { n };
        for c in n.iter() {
            w.write_all(&(*c as f32).to_le_bytes())?;
        }
        for p in mesh.corners(f) {
            for c in p.iter() {
                w.write_all(&(*c as f32).to_le_bytes())?;
            }
        }
        w.write_all(&0u16.to_le_bytes())?;
    }
    Ok(())
}
