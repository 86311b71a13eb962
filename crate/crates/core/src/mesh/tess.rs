//! Reader and writer for a subset of the `.tess` tessellation format, see `docs/formats.md`.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{face_geometry, PolyMesh, Point3};
use crate::error::{Error, Result};

struct Tokens<'a> {
    toks: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Tokens<'a> {
        let toks = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
            .collect();
        Tokens { toks, pos: 0 }
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(|t| t.1)
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or(self.toks.last())
            .map(|t| t.0)
            .unwrap_or(0)
    }

    fn next(&mut self) -> Result<&'a str> {
        let t = self
            .toks
            .get(self.pos)
            .ok_or_else(|| Error::parse(self.line(), "unexpected end of file"))?;
        self.pos += 1;
        Ok(t.1)
    }

    fn num<T: std::str::FromStr>(&mut self) -> Result<T> {
        let line = self.line();
        let t = self.next()?;
        t.parse()
            .map_err(|_| Error::parse(line, format!("expected a number, found `{t}`")))
    }

    fn expect(&mut self, tok: &str) -> Result<()> {
        let line = self.line();
        let t = self.next()?;
        if t != tok {
            return Err(Error::parse(line, format!("expected `{tok}`, found `{t}`")));
        }
        Ok(())
    }

    /// 1-based id that must equal `expected`.
    fn id(&mut self, expected: usize) -> Result<()> {
        let line = self.line();
        let id: usize = self.num()?;
        if id != expected {
            return Err(Error::parse(line, format!("expected id {expected}, found {id}")));
        }
        Ok(())
    }
}

fn reference(line: usize, id: i64, count: usize) -> Result<usize> {
    let a = id.unsigned_abs() as usize;
    if a == 0 || a > count {
        return Err(Error::parse(line, format!("reference {id} out of range 1..={count}")));
    }
    Ok(a - 1)
}

/// Parses a `.tess` file; the cube edge length is the largest vertex coordinate.
pub fn parse_tess(text: &str) -> Result<PolyMesh> {
    let mut t = Tokens::new(text);
    t.expect("***tess")?;
    let mut groups: Option<Vec<usize>> = None;
    let mut n_cells: Option<usize> = None;
    let mut vertices: Option<Vec<Point3>> = None;
    let mut n_edges: Option<usize> = None;
    let mut faces: Option<Vec<Vec<usize>>> = None;
    let mut polys: Option<Vec<Vec<i64>>> = None;
    loop {
        let line = t.line();
        let section = t.next()?;
        match section {
            "***end" => break,
            "**format" => {
                let v = t.next()?;
                if !v.starts_with('3') {
                    return Err(Error::parse(line, format!("unsupported format version {v}")));
                }
            }
            "**general" => {
                let dim: usize = t.num()?;
                if dim != 3 {
                    return Err(Error::parse(line, "only 3D tessellations are supported"));
                }
                t.expect("standard")?;
            }
            "**cell" => {
                let n: usize = t.num()?;
                n_cells = Some(n);
                while let Some(sub) = t.peek().filter(|s| s.starts_with('*') && !s.starts_with("**")) {
                    t.next()?;
                    if sub != "*group" {
                        return Err(Error::UnsupportedSection(sub.to_string()));
                    }
                    let mut g = Vec::with_capacity(n);
                    for _ in 0..n {
                        let gl = t.line();
                        let v: usize = t.num()?;
                        g.push(v.checked_sub(1).ok_or_else(|| Error::parse(gl, "group ids start at 1"))?);
                    }
                    groups = Some(g);
                }
            }
            "**vertex" => {
                let n: usize = t.num()?;
                let mut v = Vec::with_capacity(n);
                for i in 0..n {
                    t.id(i + 1)?;
                    v.push(Point3::new(t.num()?, t.num()?, t.num()?));
                    let _state: i64 = t.num()?;
                }
                vertices = Some(v);
            }
            "**edge" => {
                let n: usize = t.num()?;
                let nv = vertices.as_ref().map(Vec::len).ok_or_else(|| {
                    Error::parse(line, "**edge before **vertex")
                })?;
                for i in 0..n {
                    t.id(i + 1)?;
                    for _ in 0..2 {
                        let l = t.line();
                        reference(l, t.num()?, nv)?;
                    }
                    let _state: i64 = t.num()?;
                }
                n_edges = Some(n);
            }
            "**face" => {
                let n: usize = t.num()?;
                let nv = vertices
                    .as_ref()
                    .map(Vec::len)
                    .ok_or_else(|| Error::parse(line, "**face before **vertex"))?;
                let mut f = Vec::with_capacity(n);
                for i in 0..n {
                    t.id(i + 1)?;
                    let k: usize = t.num()?;
                    let mut lp = Vec::with_capacity(k);
                    for _ in 0..k {
                        let l = t.line();
                        let v: i64 = t.num()?;
                        if v <= 0 || v as usize > nv {
                            return Err(Error::DanglingVertex(v.unsigned_abs() as usize));
                        }
                        lp.push(reference(l, v, nv)?);
                    }
                    if let Some(ne) = n_edges {
                        let m: usize = t.num()?;
                        for _ in 0..m {
                            let l = t.line();
                            reference(l, t.num()?, ne)?;
                        }
                        for _ in 0..4 {
                            let _eq: f64 = t.num()?;
                        }
                        let _state: i64 = t.num()?;
                        let _point: i64 = t.num()?;
                        for _ in 0..3 {
                            let _p: f64 = t.num()?;
                        }
                    }
                    f.push(lp);
                }
                faces = Some(f);
            }
            "**polyhedron" => {
                let n: usize = t.num()?;
                let mut p = Vec::with_capacity(n);
                for i in 0..n {
                    t.id(i + 1)?;
                    let k: usize = t.num()?;
                    let mut fl = Vec::with_capacity(k);
                    for _ in 0..k {
                        fl.push(t.num()?);
                    }
                    p.push(fl);
                }
                polys = Some(p);
            }
            other if other.starts_with('*') => {
                return Err(Error::UnsupportedSection(other.to_string()))
            }
            other => {
                return Err(Error::parse(line, format!("expected a section header, found `{other}`")))
            }
        }
    }
    let line = t.line();
    let vertices = vertices.ok_or_else(|| Error::parse(line, "missing **vertex"))?;
    let faces = faces.ok_or_else(|| Error::parse(line, "missing **face"))?;
    let polys = polys.ok_or_else(|| Error::parse(line, "missing **polyhedron"))?;
    if let Some(n) = n_cells {
        if n != polys.len() {
            return Err(Error::parse(line, "cell count does not match polyhedron count"));
        }
    }
    let edge_length = vertices
        .iter()
        .flat_map(|p| p.iter().copied())
        .fold(0.0, f64::max);
    let mut cells = Vec::with_capacity(polys.len());
    for (i, p) in polys.iter().enumerate() {
        let mut loops = Vec::with_capacity(p.len());
        for &fid in p {
            let mut lp = faces[reference(line, fid, faces.len())?].clone();
            if fid < 0 {
                lp.reverse();
            }
            loops.push(lp);
        }
        let material = groups.as_ref().map(|g| g[i]).unwrap_or(0);
        cells.push((loops, material));
    }
    PolyMesh::from_faces(vertices, cells, edge_length)
}

/// Writes the mesh as a `.tess` file with vertex, edge, face and polyhedron sections.
pub fn write_tess(mesh: &PolyMesh) -> String {
    let mut face_ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut faces: Vec<&Vec<usize>> = Vec::new();
    let mut polys: Vec<Vec<i64>> = Vec::with_capacity(mesh.cells.len());
    for cell in &mesh.cells {
        let mut p = Vec::with_capacity(cell.faces.len());
        for f in &cell.faces {
            let mut key = f.clone();
            key.sort_unstable();
            match face_ids.get(&key) {
                Some(&id) => {
                    let sign = if faces[id] == f { 1 } else { -1 };
                    p.push(sign * (id as i64 + 1));
                }
                None => {
                    face_ids.insert(key, faces.len());
                    faces.push(f);
                    p.push(faces.len() as i64);
                }
            }
        }
        polys.push(p);
    }
    let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let face_edges: Vec<Vec<i64>> = faces
        .iter()
        .map(|f| {
            (0..f.len())
                .map(|k| {
                    let (a, b) = (f[k], f[(k + 1) % f.len()]);
                    let key = (a.min(b), a.max(b));
                    let id = *edge_ids.entry(key).or_insert_with(|| {
                        edges.push(key);
                        edges.len() - 1
                    });
                    if a < b {
                        id as i64 + 1
                    } else {
                        -(id as i64 + 1)
                    }
                })
                .collect()
        })
        .collect();

    let mut s = String::new();
    s.push_str("***tess\n **format\n   3.4\n **general\n   3 standard\n");
    writeln!(s, " **cell\n   {}\n  *group", mesh.cells.len()).unwrap();
    for c in &mesh.cells {
        writeln!(s, "   {}", c.material_id + 1).unwrap();
    }
    writeln!(s, " **vertex\n   {}", mesh.vertices.len()).unwrap();
    for (i, p) in mesh.vertices.iter().enumerate() {
        writeln!(s, "   {} {:?} {:?} {:?} 0", i + 1, p.x, p.y, p.z).unwrap();
    }
    writeln!(s, " **edge\n   {}", edges.len()).unwrap();
    for (i, (a, b)) in edges.iter().enumerate() {
        writeln!(s, "   {} {} {} 0", i + 1, a + 1, b + 1).unwrap();
    }
    writeln!(s, " **face\n   {}", faces.len()).unwrap();
    for (i, f) in faces.iter().enumerate() {
        write!(s, "   {} {}", i + 1, f.len()).unwrap();
        for v in f.iter() {
            write!(s, " {}", v + 1).unwrap();
        }
        write!(s, "\n   {}", face_edges[i].len()).unwrap();
        for e in &face_edges[i] {
            write!(s, " {e}").unwrap();
        }
        let g = face_geometry(f, &mesh.vertices).expect("mesh faces are valid");
        writeln!(
            s,
            "\n   {:?} {:?} {:?} {:?}\n   0 0 0 0 0",
            g.normal.dot(&g.centroid),
            g.normal.x,
            g.normal.y,
            g.normal.z
        )
        .unwrap();
    }
    writeln!(s, " **polyhedron\n   {}", polys.len()).unwrap();
    for (i, p) in polys.iter().enumerate() {
        write!(s, "   {} {}", i + 1, p.len()).unwrap();
        for f in p {
            write!(s, " {f}").unwrap();
        }
        s.push('\n');
    }
    s.push_str("***end\n");
    s
}
