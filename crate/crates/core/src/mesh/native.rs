//! Native text mesh format, see `docs/formats.md`.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::{PolyMesh, Point3};
use crate::error::{Error, Result};

const MAGIC: &str = "vemhom-mesh 1";

fn body(mesh: &PolyMesh) -> String {
    let mut s = String::new();
    let n_faces: usize = mesh.cells.iter().map(|c| c.faces.len()).sum();
    writeln!(s, "VERTICES {}", mesh.vertices.len()).unwrap();
    for (i, p) in mesh.vertices.iter().enumerate() {
        writeln!(s, "{i} {:?} {:?} {:?}", p.x, p.y, p.z).unwrap();
    }
    writeln!(s, "CELLS {}", mesh.cells.len()).unwrap();
    for (i, c) in mesh.cells.iter().enumerate() {
        writeln!(s, "{i} {} {}", c.material_id, c.faces.len()).unwrap();
    }
    writeln!(s, "FACES {n_faces}").unwrap();
    for (i, c) in mesh.cells.iter().enumerate() {
        for f in &c.faces {
            write!(s, "{i}").unwrap();
            for v in f {
                write!(s, " {v}").unwrap();
            }
            s.push('\n');
        }
    }
    s.push_str("END\n");
    s
}

fn checksum(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

/// Serializes a mesh; floats use the shortest representation that round-trips.
pub fn write_native(mesh: &PolyMesh) -> String {
    let body = body(mesh);
    format!(
        "{MAGIC}\nedge_length {:?}\nchecksum {}\n{body}",
        mesh.edge_length,
        checksum(&body)
    )
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| Error::parse(0, "unexpected end of file"))
    }
}

fn header<'a>(line: (usize, &'a str), key: &str) -> Result<&'a str> {
    line.1
        .strip_prefix(key)
        .map(str::trim)
        .ok_or_else(|| Error::parse(line.0, format!("expected `{key}`")))
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    tok.ok_or_else(|| Error::parse(line, "missing field"))?
        .parse()
        .map_err(|_| Error::parse(line, "malformed number"))
}

/// Parses the native format, verifying the checksum.
pub fn read_native(text: &str) -> Result<PolyMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let first = lines.next()?;
    if first.1 != MAGIC {
        return Err(Error::parse(first.0, format!("expected `{MAGIC}`")));
    }
    let l_line = lines.next()?;
    let edge_length: f64 = num(Some(header(l_line, "edge_length")?), l_line.0)?;
    let c_line = lines.next()?;
    let stored = header(c_line, "checksum")?.to_string();
    let body_start = text
        .match_indices('\n')
        .nth(2)
        .map(|(i, _)| i + 1)
        .unwrap_or(text.len());
    if checksum(&text[body_start..]) != stored {
        return Err(Error::parse(c_line.0, "checksum mismatch"));
    }

    let vl = lines.next()?;
    let nv: usize = num(Some(header(vl, "VERTICES")?), vl.0)?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let (ln, l) = lines.next()?;
        let mut t = l.split_whitespace();
        let id: usize = num(t.next(), ln)?;
        if id != i {
            return Err(Error::parse(ln, "vertex ids must be consecutive"));
        }
        vertices.push(Point3::new(
            num(t.next(), ln)?,
            num(t.next(), ln)?,
            num(t.next(), ln)?,
        ));
    }
    let cl = lines.next()?;
    let nc: usize = num(Some(header(cl, "CELLS")?), cl.0)?;
    let mut cells: Vec<(Vec<Vec<usize>>, usize, usize)> = Vec::with_capacity(nc);
    for i in 0..nc {
        let (ln, l) = lines.next()?;
        let mut t = l.split_whitespace();
        let id: usize = num(t.next(), ln)?;
        if id != i {
            return Err(Error::parse(ln, "cell ids must be consecutive"));
        }
        cells.push((Vec::new(), num(t.next(), ln)?, num(t.next(), ln)?));
    }
    let fl = lines.next()?;
    let nf: usize = num(Some(header(fl, "FACES")?), fl.0)?;
    for _ in 0..nf {
        let (ln, l) = lines.next()?;
        let mut t = l.split_whitespace();
        let cell: usize = num(t.next(), ln)?;
        let loop_: Vec<usize> = t
            .map(|s| s.parse().map_err(|_| Error::parse(ln, "malformed vertex id")))
            .collect::<Result<_>>()?;
        if let Some(&bad) = loop_.iter().find(|&&v| v >= nv) {
            return Err(Error::DanglingVertex(bad));
        }
        cells
            .get_mut(cell)
            .ok_or_else(|| Error::parse(ln, "face references unknown cell"))?
            .0
            .push(loop_);
    }
    let end = lines.next()?;
    if end.1 != "END" {
        return Err(Error::parse(end.0, "expected `END`"));
    }
    for (i, c) in cells.iter().enumerate() {
        if c.0.len() != c.2 {
            return Err(Error::InvalidMesh(format!(
                "cell {i} declares {} faces but has {}",
                c.2,
                c.0.len()
            )));
        }
    }
    PolyMesh::from_faces(
        vertices,
        cells.into_iter().map(|(f, m, _)| (f, m)).collect(),
        edge_length,
    )
}
