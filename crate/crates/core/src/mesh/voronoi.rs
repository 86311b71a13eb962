use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{on_box_boundary, PolyMesh, Point3, Tolerances};
use crate::error::{Error, Result};

/// Voronoi generator points inside the cube.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    pub seeds: Vec<Point3>,
    pub rng_seed: u64,
}

impl SeedSet {
    /// `n` seeds drawn uniformly from the open cube `(0, L)^3`.
    pub fn uniform(n: usize, edge_length: f64, rng_seed: u64) -> SeedSet {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let seeds = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random::<f64>() * edge_length,
                    rng.random::<f64>() * edge_length,
                    rng.random::<f64>() * edge_length,
                )
            })
            .collect();
        SeedSet { seeds, rng_seed }
    }

    pub fn from_points(seeds: Vec<Point3>) -> SeedSet {
        SeedSet { seeds, rng_seed: 0 }
    }
}

/// Convex polyhedron with outward-wound faces, used during clipping.
#[derive(Debug, Clone)]
struct ConvexPolyhedron {
    verts: Vec<Point3>,
    faces: Vec<Vec<usize>>,
}

impl ConvexPolyhedron {
    fn cube(l: f64) -> ConvexPolyhedron {
        let verts = (0..8)
            .map(|i| {
                Point3::new(
                    if i & 1 != 0 { l } else { 0.0 },
                    if i & 2 != 0 { l } else { 0.0 },
                    if i & 4 != 0 { l } else { 0.0 },
                )
            })
            .collect();
        let faces = vec![
            vec![0, 4, 6, 2], // x = 0
            vec![1, 3, 7, 5], // x = L
            vec![0, 1, 5, 4], // y = 0
            vec![2, 6, 7, 3], // y = L
            vec![0, 2, 3, 1], // z = 0
            vec![4, 5, 7, 6], // z = L
        ];
        ConvexPolyhedron { verts, faces }
    }

    fn max_distance(&self, p: &Point3) -> f64 {
        self.verts
            .iter()
            .map(|v| (v - p).norm())
            .fold(0.0, f64::max)
    }

    /// Keeps the part with `n·x <= c`. Returns `None` if nothing remains.
    fn clip(&self, n: &Point3, c: f64, tol: f64) -> Option<ConvexPolyhedron> {
        let d: Vec<f64> = self.verts.iter().map(|v| n.dot(v) - c).collect();
        if d.iter().all(|&x| x <= tol) {
            return Some(self.clone());
        }
        if d.iter().all(|&x| x >= -tol) {
            return None;
        }
        let outside = |i: usize| d[i] > tol;
        let on_plane = |i: usize| d[i].abs() <= tol;
        let mut verts = self.verts.clone();
        let mut cut: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cap: Vec<usize> = Vec::new();
        let mut faces = Vec::with_capacity(self.faces.len() + 1);
        for face in &self.faces {
            let m = face.len();
            let mut out = Vec::with_capacity(m + 1);
            for k in 0..m {
                let a = face[k];
                let b = face[(k + 1) % m];
                if !outside(a) {
                    out.push(a);
                }
                let crosses = (d[a] < -tol && outside(b)) || (outside(a) && d[b] < -tol);
                if crosses {
                    let key = (a.min(b), a.max(b));
                    let id = *cut.entry(key).or_insert_with(|| {
                        let (p, q) = key;
                        let t = d[p] / (d[p] - d[q]);
                        verts.push(self.verts[p] + t * (self.verts[q] - self.verts[p]));
                        verts.len() - 1
                    });
                    out.push(id);
                }
            }
            if out.len() >= 3 {
                faces.push(out);
            }
        }
        for (i, _) in self.verts.iter().enumerate() {
            if on_plane(i) {
                cap.push(i);
            }
        }
        cap.extend(cut.values().copied());
        // a face lying entirely in the clipping plane already closes the cell
        let plane_face_exists = faces
            .iter()
            .any(|f| f.iter().all(|&v| v >= self.verts.len() || on_plane(v)));
        cap.retain(|&v| faces.iter().any(|f| f.contains(&v)));
        cap.sort_unstable();
        cap.dedup();
        if cap.len() >= 3 && !plane_face_exists {
            let center = cap.iter().map(|&v| verts[v]).sum::<Point3>() / cap.len() as f64;
            let helper = if n.x.abs() < 0.9 {
                Point3::x()
            } else {
                Point3::y()
            };
            let e1 = n.cross(&helper).normalize();
            let e2 = n.cross(&e1);
            let mut keyed: Vec<(f64, usize)> = cap
                .iter()
                .map(|&v| {
                    let r = verts[v] - center;
                    (r.dot(&e2).atan2(r.dot(&e1)), v)
                })
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            faces.push(keyed.into_iter().map(|(_, v)| v).collect());
        }
        // compact unused vertices
        let mut remap = vec![usize::MAX; verts.len()];
        let mut new_verts = Vec::new();
        for f in &mut faces {
            for v in f.iter_mut() {
                if remap[*v] == usize::MAX {
                    remap[*v] = new_verts.len();
                    new_verts.push(verts[*v]);
                }
                *v = remap[*v];
            }
        }
        if faces.len() < 4 {
            return None;
        }
        Some(ConvexPolyhedron {
            verts: new_verts,
            faces,
        })
    }
}

/// Spatial hash that merges points closer than `tol`.
struct PointMerger {
    tol: f64,
    cell: f64,
    grid: HashMap<[i64; 3], Vec<usize>>,
    points: Vec<Point3>,
}

impl PointMerger {
    fn new(tol: f64) -> PointMerger {
        PointMerger {
            tol,
            cell: 4.0 * tol,
            grid: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn key(&self, p: &Point3) -> [i64; 3] {
        [
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        ]
    }

    fn insert(&mut self, p: Point3) -> usize {
        let k = self.key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &id in ids {
                            if (self.points[id] - p).norm() <= self.tol {
                                return id;
                            }
                        }
                    }
                }
            }
        }
        let id = self.points.len();
        self.points.push(p);
        self.grid.entry(k).or_default().push(id);
        id
    }
}

fn check_seeds(seeds: &SeedSet, l: f64) -> Result<()> {
    if seeds.seeds.is_empty() {
        return Err(Error::DegenerateSeeds("no seeds".into()));
    }
    for (i, s) in seeds.seeds.iter().enumerate() {
        if !s.iter().all(|c| c.is_finite() && *c > 0.0 && *c < l) {
            return Err(Error::DegenerateSeeds(format!(
                "seed {i} at {:?} is not strictly inside the cube",
                s.as_slice()
            )));
        }
    }
    let tol = Tolerances::scaled(l).merge;
    let mut merger = PointMerger::new(tol);
    for (i, s) in seeds.seeds.iter().enumerate() {
        let id = merger.insert(*s);
        if id != i {
            return Err(Error::DegenerateSeeds(format!(
                "seeds {id} and {i} coincide"
            )));
        }
    }
    Ok(())
}

/// Voronoi tessellation of `[0, L]^3` by successive half-space clipping of the cube.
///
/// All cells get material id 0.
pub fn generate_voronoi(seeds: &SeedSet, edge_length: f64) -> Result<PolyMesh> {
    let l = edge_length;
    check_seeds(seeds, l)?;
    let tol = Tolerances::scaled(l);
    let clip_tol = 1e-12 * l;
    let pts = &seeds.seeds;
    let mut cells_local = Vec::with_capacity(pts.len());
    for (i, s) in pts.iter().enumerate() {
        let mut order: Vec<(f64, usize)> = pts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, t)| ((t - s).norm(), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut poly = ConvexPolyhedron::cube(l);
        let mut radius = poly.max_distance(s);
        for (dist, j) in order {
            if 0.5 * dist > radius {
                break;
            }
            let n = (pts[j] - s) / dist;
            let c = n.dot(&(0.5 * (s + pts[j])));
            poly = poly.clip(&n, c, clip_tol).ok_or(Error::DegenerateCell {
                cell: i,
                volume: 0.0,
            })?;
            radius = poly.max_distance(s);
        }
        cells_local.push(poly);
    }
    let mut merger = PointMerger::new(tol.merge);
    let mut cells = Vec::with_capacity(cells_local.len());
    for poly in &cells_local {
        let ids: Vec<usize> = poly
            .verts
            .iter()
            .map(|p| {
                let mut q = *p;
                for c in q.iter_mut() {
                    if c.abs() <= tol.bbox {
                        *c = 0.0;
                    } else if (*c - l).abs() <= tol.bbox {
                        *c = l;
                    }
                }
                merger.insert(q)
            })
            .collect();
        let faces = poly
            .faces
            .iter()
            .map(|f| f.iter().map(|&v| ids[v]).collect())
            .collect();
        cells.push((faces, 0));
    }
    let mesh = PolyMesh::from_faces(merger.points, cells, l)?;
    debug_assert!(mesh
        .boundary_node_ids
        .iter()
        .all(|&v| on_box_boundary(&mesh.vertices[v], l, tol.bbox)));
    Ok(mesh)
}

/// Voronoi tessellation after `iterations` Lloyd steps (seeds moved to cell centroids).
pub fn generate_voronoi_lloyd(
    seeds: &SeedSet,
    edge_length: f64,
    iterations: usize,
) -> Result<PolyMesh> {
    let mut current = seeds.clone();
    let mut mesh = generate_voronoi(&current, edge_length)?;
    for _ in 0..iterations {
        current.seeds = mesh
            .cells
            .iter()
            .map(|c| c.centroid(&mesh.vertices))
            .collect();
        mesh = generate_voronoi(&current, edge_length)?;
    }
    Ok(mesh)
}
