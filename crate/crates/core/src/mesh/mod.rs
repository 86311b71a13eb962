//! Polyhedral RVE meshes: cube-bounded cell complexes with planar, outward-wound faces.
//!
//! A [`PolyMesh`] is the one-element-per-grain discretization used by the virtual
//! element method. Each cell additionally owns a tetrahedral submesh (see
//! [`tets`]) which serves both as the stabilization mesh and as the coarse FEM mesh.

mod native;
mod tess;
pub mod tets;
mod voronoi;

use std::collections::{BTreeSet, HashMap};

use nalgebra::Vector3;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use native::{read_native, write_native};
pub use tess::{parse_tess, write_tess};
pub use tets::{refine_submesh, triangulate_cell, TetMesh, TetSubmesh};
pub use voronoi::{generate_voronoi, generate_voronoi_lloyd, SeedSet};

pub type Point3 = Vector3<f64>;

/// Geometric tolerances, all relative to the cube edge length.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub merge: f64,
    pub plane: f64,
    pub bbox: f64,
}

impl Tolerances {
    pub const RELATIVE: Tolerances = Tolerances {
        merge: 1e-9,
        plane: 1e-8,
        bbox: 1e-9,
    };

    pub fn scaled(edge_length: f64) -> Tolerances {
        Tolerances {
            merge: Self::RELATIVE.merge * edge_length,
            plane: Self::RELATIVE.plane * edge_length,
            bbox: Self::RELATIVE.bbox * edge_length,
        }
    }
}

/// Area, outward unit normal and area centroid of a planar polygon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGeometry {
    pub area: f64,
    pub normal: Point3,
    pub centroid: Point3,
}

/// Computes face area, normal and centroid by a fan of triangles around the vertex average.
///
/// The normal follows the right-hand rule of the vertex loop, so a loop wound
/// counter-clockwise when seen from outside yields the outward normal.
pub fn face_geometry(face: &[usize], vertices: &[Point3]) -> Result<FaceGeometry> {
    if face.len() < 3 {
        return Err(Error::ZeroArea);
    }
    let mut pts = Vec::with_capacity(face.len());
    for &v in face {
        pts.push(*vertices.get(v).ok_or(Error::DanglingVertex(v))?);
    }
    polygon_geometry(&pts)
}

pub(crate) fn polygon_geometry(pts: &[Point3]) -> Result<FaceGeometry> {
    let n = pts.len();
    if n < 3 {
        return Err(Error::ZeroArea);
    }
    let center = pts.iter().sum::<Point3>() / n as f64;
    let mut area_vec = Point3::zeros();
    let mut tri = Vec::with_capacity(n);
    let mut max_edge2: f64 = 0.0;
    for k in 0..n {
        let a = pts[k];
        let b = pts[(k + 1) % n];
        max_edge2 = max_edge2.max((b - a).norm_squared());
        let av = 0.5 * (a - center).cross(&(b - center));
        area_vec += av;
        tri.push((av, (center + a + b) / 3.0));
    }
    let area = area_vec.norm();
    if !(area > 1e-14 * max_edge2) {
        return Err(Error::ZeroArea);
    }
    let normal = area_vec / area;
    let mut centroid = Point3::zeros();
    for (av, c) in &tri {
        centroid += av.dot(&normal) * c;
    }
    centroid /= area;
    Ok(FaceGeometry {
        area,
        normal,
        centroid,
    })
}

/// One polyhedral grain.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCell {
    /// Sorted, unique vertex ids of the cell.
    pub vertex_ids: Vec<usize>,
    /// Outward-wound vertex loops; each loop starts at its smallest id.
    pub faces: Vec<Vec<usize>>,
    pub material_id: usize,
    pub volume: f64,
}

impl PolyCell {
    /// Volume centroid from the divergence theorem over face fans.
    pub fn centroid(&self, vertices: &[Point3]) -> Point3 {
        let origin = vertices[self.vertex_ids[0]];
        let mut vol = 0.0;
        let mut acc = Point3::zeros();
        for face in &self.faces {
            let a = vertices[face[0]] - origin;
            for k in 1..face.len() - 1 {
                let b = vertices[face[k]] - origin;
                let c = vertices[face[k + 1]] - origin;
                let v = a.dot(&b.cross(&c)) / 6.0;
                vol += v;
                acc += v * (a + b + c) / 4.0;
            }
        }
        origin + acc / vol
    }

    /// True if every vertex of the cell lies on the inner side of every face plane.
    pub fn is_convex(&self, vertices: &[Point3], tol: f64) -> bool {
        self.faces.iter().all(|face| match face_geometry(face, vertices) {
            Ok(g) => self
                .vertex_ids
                .iter()
                .all(|&v| (vertices[v] - g.centroid).dot(&g.normal) <= tol),
            Err(_) => false,
        })
    }
}

/// Watertight polyhedral cell complex filling the cube `[0, L]^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMesh {
    pub vertices: Vec<Point3>,
    pub cells: Vec<PolyCell>,
    pub edge_length: f64,
    pub boundary_node_ids: Vec<usize>,
}

/// Summary of [`PolyMesh::validate`].
#[derive(Debug, Clone)]
pub struct MeshReport {
    pub volume_error: f64,
    pub max_closure_defect: f64,
    pub interior_faces: usize,
    pub boundary_faces: usize,
}

impl PolyMesh {
    /// Builds a mesh from raw face loops, normalizing orientation and checking planarity.
    ///
    /// `cells` holds, per cell, its face loops (any consistent or inconsistent winding)
    /// and its material id.
    pub fn from_faces(
        vertices: Vec<Point3>,
        cells: Vec<(Vec<Vec<usize>>, usize)>,
        edge_length: f64,
    ) -> Result<PolyMesh> {
        if !(edge_length > 0.0) {
            return Err(Error::InvalidMesh("edge length must be positive".into()));
        }
        if let Some(bad) = vertices.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {bad} is not finite")));
        }
        let tol = Tolerances::scaled(edge_length);
        let mut out = Vec::with_capacity(cells.len());
        let mut face_counter = 0usize;
        for (cell_id, (faces, material_id)) in cells.into_iter().enumerate() {
            let mut clean = Vec::with_capacity(faces.len());
            for face in faces {
                for &v in &face {
                    if v >= vertices.len() {
                        return Err(Error::DanglingVertex(v));
                    }
                }
                let f = dedup_loop(face);
                if f.len() >= 3 {
                    clean.push(f);
                }
            }
            for face in &clean {
                let g = face_geometry(face, &vertices)?;
                let dev = face
                    .iter()
                    .map(|&v| (vertices[v] - g.centroid).dot(&g.normal).abs())
                    .fold(0.0, f64::max);
                if dev > tol.plane {
                    return Err(Error::NonPlanarFace {
                        face: face_counter,
                        deviation: dev,
                    });
                }
                face_counter += 1;
            }
            let faces: Vec<Vec<usize>> = orient_faces(clean, &vertices)
                .map_err(|msg| Error::InvalidMesh(format!("cell {cell_id}: {msg}")))?
                .into_iter()
                .map(canonical_loop)
                .collect();
            let volume = signed_volume(&faces, &vertices);
            if !(volume > 1e-14 * edge_length.powi(3)) {
                return Err(Error::DegenerateCell {
                    cell: cell_id,
                    volume,
                });
            }
            let vertex_ids: BTreeSet<usize> = faces.iter().flatten().copied().collect();
            out.push(PolyCell {
                vertex_ids: vertex_ids.into_iter().collect(),
                faces,
                material_id,
                volume,
            });
        }
        let boundary_node_ids = vertices
            .iter()
            .enumerate()
            .filter(|(_, p)| on_box_boundary(p, edge_length, tol.bbox))
            .map(|(i, _)| i)
            .collect();
        Ok(PolyMesh {
            vertices,
            cells: out,
            edge_length,
            boundary_node_ids,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_node_ids.binary_search(&v).is_ok()
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }

    pub fn cube_volume(&self) -> f64 {
        self.edge_length.powi(3)
    }

    /// Checks volume closure, per-cell face closure and interface conformity.
    pub fn validate(&self) -> Result<MeshReport> {
        let l3 = self.cube_volume();
        let volume_error = (self.total_volume() - l3).abs();
        if volume_error > 1e-10 * l3 {
            return Err(Error::InvalidMesh(format!(
                "cell volumes sum to {} instead of {l3}",
                self.total_volume()
            )));
        }
        let mut max_closure_defect: f64 = 0.0;
        for (ci, cell) in self.cells.iter().enumerate() {
            let mut sum = Point3::zeros();
            let mut max_area: f64 = 0.0;
            let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
            for face in &cell.faces {
                let g = face_geometry(face, &self.vertices)?;
                sum += g.area * g.normal;
                max_area = max_area.max(g.area);
                for k in 0..face.len() {
                    let (a, b) = (face[k], face[(k + 1) % face.len()]);
                    *edges.entry((a.min(b), a.max(b))).or_default() += 1;
                }
            }
            let defect = sum.norm() / max_area;
            max_closure_defect = max_closure_defect.max(defect);
            if defect > 1e-10 {
                return Err(Error::InvalidMesh(format!(
                    "cell {ci} is not closed (defect {defect:e})"
                )));
            }
            if let Some((e, n)) = edges.iter().find(|(_, &n)| n != 2) {
                return Err(Error::InvalidMesh(format!(
                    "cell {ci}: edge {e:?} shared by {n} faces"
                )));
            }
        }
        let mut seen: HashMap<Vec<usize>, Vec<(usize, &Vec<usize>)>> = HashMap::new();
        for (ci, cell) in self.cells.iter().enumerate() {
            for face in &cell.faces {
                let mut key = face.clone();
                key.sort_unstable();
                seen.entry(key).or_default().push((ci, face));
            }
        }
        let mut interior_faces = 0;
        let mut boundary_faces = 0;
        for (key, owners) in &seen {
            let on_boundary = self.face_on_cube_boundary(key);
            match (on_boundary, owners.len()) {
                (true, 1) => boundary_faces += 1,
                (false, 2) => {
                    let (a, b) = (owners[0].1, owners[1].1);
                    if !is_reversed_loop(a, b) {
                        return Err(Error::InvalidMesh(format!(
                            "interface between cells {} and {} is not oppositely wound",
                            owners[0].0, owners[1].0
                        )));
                    }
                    interior_faces += 1;
                }
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "face {key:?} has {} owners (boundary: {on_boundary})",
                        owners.len()
                    )))
                }
            }
        }
        Ok(MeshReport {
            volume_error,
            max_closure_defect,
            interior_faces,
            boundary_faces,
        })
    }

    fn face_on_cube_boundary(&self, face: &[usize]) -> bool {
        let tol = Tolerances::scaled(self.edge_length).bbox;
        let l = self.edge_length;
        (0..3).any(|axis| {
            [0.0, l].iter().any(|&plane| {
                face.iter()
                    .all(|&v| (self.vertices[v][axis] - plane).abs() <= tol)
            })
        })
    }

    /// Index of the cell containing `p` (first match), by point-in-convex-polyhedron tests.
    pub fn locate(&self, p: &Point3) -> Option<usize> {
        let tol = Tolerances::scaled(self.edge_length).plane;
        self.cells.iter().position(|cell| {
            cell.faces.iter().all(|face| {
                face_geometry(face, &self.vertices)
                    .map(|g| (p - g.centroid).dot(&g.normal) <= tol)
                    .unwrap_or(false)
            })
        })
    }

    /// SHA-256 over vertex coordinates, cell faces and material ids.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.edge_length.to_le_bytes());
        for v in &self.vertices {
            for c in v.iter() {
                h.update(c.to_le_bytes());
            }
        }
        for cell in &self.cells {
            h.update((cell.material_id as u64).to_le_bytes());
            for face in &cell.faces {
                h.update((face.len() as u64).to_le_bytes());
                for &v in face {
                    h.update((v as u64).to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }

    /// Copy of the mesh with new per-cell material ids.
    pub fn with_materials(&self, materials: &[usize]) -> PolyMesh {
        let mut out = self.clone();
        for (cell, &m) in out.cells.iter_mut().zip(materials) {
            cell.material_id = m;
        }
        out
    }
}

pub(crate) fn on_box_boundary(p: &Point3, l: f64, tol: f64) -> bool {
    p.iter().any(|&c| c.abs() <= tol || (c - l).abs() <= tol)
}

fn dedup_loop(mut face: Vec<usize>) -> Vec<usize> {
    face.dedup();
    while face.len() > 1 && face.first() == face.last() {
        face.pop();
    }
    face
}

/// Rotates a loop so that it starts at its smallest id.
pub(crate) fn canonical_loop(face: Vec<usize>) -> Vec<usize> {
    let start = face
        .iter()
        .enumerate()
        .min_by_key(|(_, &v)| v)
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut f = face;
    f.rotate_left(start);
    f
}

fn is_reversed_loop(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut rev: Vec<usize> = b.iter().rev().copied().collect();
    rev = canonical_loop(rev);
    canonical_loop(a.to_vec()) == rev
}

pub(crate) fn signed_volume(faces: &[Vec<usize>], vertices: &[Point3]) -> f64 {
    let origin = vertices[faces[0][0]];
    let mut vol = 0.0;
    for face in faces {
        let a = vertices[face[0]] - origin;
        for k in 1..face.len() - 1 {
            let b = vertices[face[k]] - origin;
            let c = vertices[face[k + 1]] - origin;
            vol += a.dot(&b.cross(&c));
        }
    }
    vol / 6.0
}

/// Makes face windings consistent across shared edges and outward.
fn orient_faces(
    mut faces: Vec<Vec<usize>>,
    vertices: &[Point3],
) -> std::result::Result<Vec<Vec<usize>>, String> {
    if faces.len() < 4 {
        return Err(format!("only {} faces", faces.len()));
    }
    let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (fi, face) in faces.iter().enumerate() {
        for k in 0..face.len() {
            let (a, b) = (face[k], face[(k + 1) % face.len()]);
            edge_faces.entry((a.min(b), a.max(b))).or_default().push(fi);
        }
    }
    if let Some((e, f)) = edge_faces.iter().find(|(_, f)| f.len() != 2) {
        return Err(format!("edge {e:?} shared by {} faces (not watertight)", f.len()));
    }
    let directed = |face: &[usize], a: usize, b: usize| -> bool {
        (0..face.len()).any(|k| face[k] == a && face[(k + 1) % face.len()] == b)
    };
    let mut done = vec![false; faces.len()];
    let mut stack = vec![0usize];
    done[0] = true;
    while let Some(fi) = stack.pop() {
        let face = faces[fi].clone();
        for k in 0..face.len() {
            let (a, b) = (face[k], face[(k + 1) % face.len()]);
            for &nb in &edge_faces[&(a.min(b), a.max(b))] {
                if nb == fi || done[nb] {
                    continue;
                }
                // a consistently oriented neighbour traverses the shared edge as b -> a
                if directed(&faces[nb], a, b) {
                    faces[nb].reverse();
                }
                done[nb] = true;
                stack.push(nb);
            }
        }
    }
    if done.iter().any(|d| !d) {
        return Err("faces do not form a connected surface".into());
    }
    if signed_volume(&faces, vertices) < 0.0 {
        for f in &mut faces {
            f.reverse();
        }
    }
    Ok(faces)
}
