//! Minimal cell tetrahedralizations and uniform red refinement.

use std::collections::HashMap;

use super::{on_box_boundary, PolyCell, PolyMesh, Point3, Tolerances};
use crate::error::Result;

/// Signed volume of the tetrahedron `(a, b, c, d)`; positive for right-handed ordering.
pub fn tet_volume(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

/// Tetrahedralization of one cell with locally indexed points.
#[derive(Debug, Clone, PartialEq)]
pub struct TetSubmesh {
    pub owner: usize,
    pub points: Vec<Point3>,
    /// Mesh vertex id of each local point; `None` for points added inside the cell or by refinement.
    pub global_ids: Vec<Option<usize>>,
    pub tets: Vec<[usize; 4]>,
    pub volumes: Vec<f64>,
    /// Set when the vertex-apex fan failed and a centroid apex was inserted.
    pub fallback: bool,
}

impl TetSubmesh {
    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }
}

fn orient(points: &[Point3], mut t: [usize; 4]) -> ([usize; 4], f64) {
    let v = tet_volume(&points[t[0]], &points[t[1]], &points[t[2]], &points[t[3]]);
    if v < 0.0 {
        t.swap(2, 3);
    }
    (t, v.abs())
}

/// Fan tetrahedralization from the lowest-index vertex of the cell.
///
/// Faces not containing the apex are fanned from their own lowest-index vertex, so
/// the triangulation of an interface face is identical from both sides. If the cell
/// is not convex (or the fan produces a flat tet) the cell centroid becomes the apex.
pub fn triangulate_cell(cell_id: usize, cell: &PolyCell, vertices: &[Point3], edge_length: f64) -> TetSubmesh {
    let tol = Tolerances::scaled(edge_length);
    let local: HashMap<usize, usize> = cell
        .vertex_ids
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    let mut points: Vec<Point3> = cell.vertex_ids.iter().map(|&v| vertices[v]).collect();
    let mut global_ids: Vec<Option<usize>> = cell.vertex_ids.iter().map(|&v| Some(v)).collect();
    let min_vol = 1e-12 * cell.volume;
    let apex_global = cell.vertex_ids[0];

    if cell.is_convex(vertices, tol.plane) {
        let mut tets = Vec::new();
        let mut volumes = Vec::new();
        let mut ok = true;
        for face in &cell.faces {
            if face.contains(&apex_global) {
                continue;
            }
            // loops are stored starting at their smallest id
            for k in 1..face.len() - 1 {
                let t = [0, local[&face[0]], local[&face[k]], local[&face[k + 1]]];
                let (t, v) = orient(&points, t);
                ok &= v > min_vol;
                tets.push(t);
                volumes.push(v);
            }
        }
        if ok {
            return TetSubmesh {
                owner: cell_id,
                points,
                global_ids,
                tets,
                volumes,
                fallback: false,
            };
        }
    }

    let apex = points.len();
    points.push(cell.centroid(vertices));
    global_ids.push(None);
    let mut tets = Vec::new();
    let mut volumes = Vec::new();
    for face in &cell.faces {
        for k in 1..face.len() - 1 {
            let t = [apex, local[&face[0]], local[&face[k]], local[&face[k + 1]]];
            let (t, v) = orient(&points, t);
            tets.push(t);
            volumes.push(v);
        }
    }
    TetSubmesh {
        owner: cell_id,
        points,
        global_ids,
        tets,
        volumes,
        fallback: true,
    }
}

/// One level of red refinement: each tet is split into 8 through its edge midpoints.
///
/// Midpoints are appended to `points` and shared between tets through `midpoints`.
fn red_refine(
    points: &mut Vec<Point3>,
    tets: &[[usize; 4]],
    midpoints: &mut HashMap<(usize, usize), usize>,
) -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(tets.len() * 8);
    for t in tets {
        let mut mid = |a: usize, b: usize| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                points.push(0.5 * (points[a] + points[b]));
                points.len() - 1
            })
        };
        let [v0, v1, v2, v3] = *t;
        let m01 = mid(v0, v1);
        let m02 = mid(v0, v2);
        let m03 = mid(v0, v3);
        let m12 = mid(v1, v2);
        let m13 = mid(v1, v3);
        let m23 = mid(v2, v3);
        let corners = [
            [v0, m01, m02, m03],
            [m01, v1, m12, m13],
            [m02, m12, v2, m23],
            [m03, m13, m23, v3],
        ];
        for c in corners {
            out.push(orient(points, c).0);
        }
        // inner octahedron, split along its shortest diagonal
        let diagonals = [(m01, m23), (m02, m13), (m03, m12)];
        let (di, _) = diagonals
            .iter()
            .enumerate()
            .map(|(i, (a, b))| (i, (points[*a] - points[*b]).norm_squared()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let (p, q) = diagonals[di];
        let ring: [usize; 4] = match di {
            0 => [m02, m03, m13, m12],
            1 => [m01, m03, m23, m12],
            _ => [m01, m02, m23, m13],
        };
        for k in 0..4 {
            out.push(orient(points, [p, q, ring[k], ring[(k + 1) % 4]]).0);
        }
    }
    out
}

/// Uniformly refines a cell submesh `levels` times; added points have no mesh vertex id.
pub fn refine_submesh(sub: &TetSubmesh, levels: usize) -> TetSubmesh {
    let mut points = sub.points.clone();
    let mut tets = sub.tets.clone();
    for _ in 0..levels {
        let mut mids = HashMap::new();
        tets = red_refine(&mut points, &tets, &mut mids);
    }
    let mut global_ids = sub.global_ids.clone();
    global_ids.resize(points.len(), None);
    let volumes = tets
        .iter()
        .map(|t| tet_volume(&points[t[0]], &points[t[1]], &points[t[2]], &points[t[3]]))
        .collect();
    TetSubmesh {
        owner: sub.owner,
        points,
        global_ids,
        tets,
        volumes,
        fallback: sub.fallback,
    }
}

/// Conforming global tetrahedral mesh of the RVE.
#[derive(Debug, Clone)]
pub struct TetMesh {
    pub points: Vec<Point3>,
    pub tets: Vec<[usize; 4]>,
    /// Owning polyhedral cell of each tet.
    pub owner: Vec<usize>,
    pub boundary: Vec<bool>,
    pub edge_length: f64,
    /// Cells whose triangulation needed an interior apex.
    pub fallback_cells: Vec<usize>,
}

impl TetMesh {
    /// Union of the minimal cell triangulations; mesh vertices keep their ids.
    pub fn from_polymesh(mesh: &PolyMesh) -> Result<TetMesh> {
        let mut points = mesh.vertices.clone();
        let mut tets = Vec::new();
        let mut owner = Vec::new();
        let mut fallback_cells = Vec::new();
        for (ci, cell) in mesh.cells.iter().enumerate() {
            let sub = triangulate_cell(ci, cell, &mesh.vertices, mesh.edge_length);
            if sub.fallback {
                fallback_cells.push(ci);
            }
            let ids: Vec<usize> = sub
                .global_ids
                .iter()
                .zip(&sub.points)
                .map(|(g, p)| {
                    g.unwrap_or_else(|| {
                        points.push(*p);
                        points.len() - 1
                    })
                })
                .collect();
            for t in &sub.tets {
                tets.push([ids[t[0]], ids[t[1]], ids[t[2]], ids[t[3]]]);
                owner.push(ci);
            }
        }
        let tol = Tolerances::scaled(mesh.edge_length).bbox;
        let boundary = points
            .iter()
            .map(|p| on_box_boundary(p, mesh.edge_length, tol))
            .collect();
        Ok(TetMesh {
            points,
            tets,
            owner,
            boundary,
            edge_length: mesh.edge_length,
            fallback_cells,
        })
    }

    /// Uniform red refinement, conforming across cell interfaces.
    pub fn refine(&self, levels: usize) -> TetMesh {
        let mut points = self.points.clone();
        let mut tets = self.tets.clone();
        let mut owner = self.owner.clone();
        for _ in 0..levels {
            let mut mids = HashMap::new();
            tets = red_refine(&mut points, &tets, &mut mids);
            owner = owner.iter().flat_map(|&o| [o; 8]).collect();
        }
        let tol = Tolerances::scaled(self.edge_length).bbox;
        let boundary = points
            .iter()
            .map(|p| on_box_boundary(p, self.edge_length, tol))
            .collect();
        TetMesh {
            points,
            tets,
            owner,
            boundary,
            edge_length: self.edge_length,
            fallback_cells: self.fallback_cells.clone(),
        }
    }

    pub fn volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tets[t];
        tet_volume(&self.points[a], &self.points[b], &self.points[c], &self.points[d])
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Tets owned by each cell.
    pub fn tets_by_cell(&self, n_cells: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n_cells];
        for (t, &o) in self.owner.iter().enumerate() {
            out[o].push(t);
        }
        out
    }
}
