//! First-order virtual element on a polyhedral grain.
//!
//! The consistency part uses the projected gradient `∇ΠR = (1/V) Σ_F n_F ∫_F Π_F R dA`,
//! where the face projection `Π_F` is the linear function with the vertex mean of `R`
//! and the tangential gradient obtained from edge integrals. The stabilization is the
//! linear FE energy on the cell's tetrahedral submesh, weighted by `β`.

use nalgebra::{Matrix3, Vector3};

use crate::element::{Element, GradientSample};
use crate::error::{Error, Result};
use crate::fem::tet4_gradients;
use crate::materials::{GeneralizedModulus, Mode};
use crate::mesh::{face_geometry, PolyCell, Point3};

/// Constant projected gradients of the displacement and potentials of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedGradients {
    /// `grad_u[(i, j)] = ∂u_i/∂x_j`.
    pub grad_u: Matrix3<f64>,
    pub grad_phi: Option<Vector3<f64>>,
    pub grad_phi_mag: Option<Vector3<f64>>,
}

/// Geometric data of a virtual element; independent of material and `β`.
#[derive(Debug, Clone)]
pub struct VemElement {
    pub cell: usize,
    /// Global node ids: cell vertices first, then interior submesh points.
    pub nodes: Vec<usize>,
    /// Number of leading entries of `nodes` that are cell vertices.
    pub n_vertices: usize,
    pub volume: f64,
    /// Projected-gradient coefficient of each vertex: `∇ΠR = Σ_k R_k grad_op[k]`.
    pub grad_op: Vec<Vector3<f64>>,
    /// Submesh tets in element-local node indices.
    pub tets: Vec<[usize; 4]>,
    pub tet_volumes: Vec<f64>,
    pub tet_grads: Vec<[Vector3<f64>; 4]>,
}

impl VemElement {
    /// Builds the element of `cell` from global point coordinates and the global
    /// ids of the cell's submesh tets.
    pub fn new(
        cell_id: usize,
        cell: &PolyCell,
        points: &[Point3],
        submesh: &[[usize; 4]],
    ) -> Result<VemElement> {
        let volume = cell.volume;
        if !(volume > 0.0) {
            return Err(Error::DegenerateCell {
                cell: cell_id,
                volume,
            });
        }
        let mut nodes = cell.vertex_ids.clone();
        let n_vertices = nodes.len();
        let mut grad_op = vec![Vector3::zeros(); n_vertices];
        let local = |nodes: &[usize], v: usize| nodes.binary_search(&v).ok();
        for face in &cell.faces {
            let geo = face_geometry(face, points)?;
            let n = face.len();
            let mean = face.iter().map(|&v| points[v]).sum::<Point3>() / n as f64;
            let shift = geo.centroid - mean;
            for k in 0..n {
                let prev = points[face[(k + n - 1) % n]];
                let next = points[face[(k + 1) % n]];
                let w = geo.area / n as f64 + 0.5 * shift.dot(&(next - prev).cross(&geo.normal));
                let i = local(&nodes[..n_vertices], face[k]).expect("face vertex belongs to cell");
                grad_op[i] += geo.normal * (w / volume);
            }
        }
        let mut tets = Vec::with_capacity(submesh.len());
        let mut tet_volumes = Vec::with_capacity(submesh.len());
        let mut tet_grads = Vec::with_capacity(submesh.len());
        for t in submesh {
            let mut lt = [0usize; 4];
            for (k, &g) in t.iter().enumerate() {
                lt[k] = match local(&nodes[..n_vertices], g) {
                    Some(i) => i,
                    None => match nodes[n_vertices..].iter().position(|&x| x == g) {
                        Some(i) => n_vertices + i,
                        None => {
                            nodes.push(g);
                            nodes.len() - 1
                        }
                    },
                };
            }
            let (grads, vol) = tet4_gradients(&t.map(|g| points[g]))?;
            tets.push(lt);
            tet_volumes.push(vol);
            tet_grads.push(grads);
        }
        let sub_volume: f64 = tet_volumes.iter().sum();
        if (sub_volume - volume).abs() > 1e-10 * volume {
            return Err(Error::InvalidMesh(format!(
                "cell {cell_id}: submesh volume {sub_volume} differs from cell volume {volume}"
            )));
        }
        Ok(VemElement {
            cell: cell_id,
            nodes,
            n_vertices,
            volume,
            grad_op,
            tets,
            tet_volumes,
            tet_grads,
        })
    }

    /// Projected gradient of a scalar field given at the element nodes.
    pub fn projected_gradient(&self, values: &[f64]) -> Vector3<f64> {
        self.grad_op
            .iter()
            .zip(values)
            .map(|(g, v)| g * *v)
            .sum()
    }

    /// Projected gradients of all fields; `dofs` are node-major in the layout of `mode`.
    pub fn projected_gradients(&self, mode: Mode, dofs: &[f64]) -> ProjectedGradients {
        let nf = mode.fields_per_node();
        let field = |f: usize| -> Vec<f64> { (0..self.nodes.len()).map(|n| dofs[n * nf + f]).collect() };
        let mut grad_u = Matrix3::zeros();
        for i in 0..3 {
            grad_u.set_row(i, &self.projected_gradient(&field(i)).transpose());
        }
        let grad_phi = mode.electric().then(|| self.projected_gradient(&field(3)));
        let grad_phi_mag = mode
            .magnetic()
            .then(|| self.projected_gradient(&field(if mode.electric() { 4 } else { 3 })));
        ProjectedGradients {
            grad_u,
            grad_phi,
            grad_phi_mag,
        }
    }

    /// Assembly element: consistency sample weighted `(1−β)V`, one stabilization
    /// sample per submesh tet weighted `β V_t`.
    pub fn element(&self, modulus: &GeneralizedModulus, beta: f64, mode: Mode) -> Result<Element> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidInput(format!("β = {beta} is outside [0, 1]")));
        }
        if beta > 0.0 && self.tets.is_empty() {
            return Err(Error::InvalidInput(format!(
                "cell {}: stabilization needs a submesh",
                self.cell
            )));
        }
        let mut samples = Vec::with_capacity(1 + self.tets.len());
        if beta < 1.0 {
            samples.push(GradientSample {
                weight: (1.0 - beta) * self.volume,
                nodes: (0..self.n_vertices).collect(),
                grads: self.grad_op.clone(),
            });
        }
        if beta > 0.0 {
            for ((t, v), g) in self.tets.iter().zip(&self.tet_volumes).zip(&self.tet_grads) {
                samples.push(GradientSample {
                    weight: beta * v,
                    nodes: t.to_vec(),
                    grads: g.to_vec(),
                });
            }
        }
        Ok(Element {
            cell: self.cell,
            nodes: self.nodes.clone(),
            mode,
            modulus: modulus.reduced(mode),
            samples,
        })
    }

    /// Whether the element stiffness is rank deficient without stabilization:
    /// the consistency term has rank at most `n_p`, while the kernel may only hold the
    /// rigid motions and constant potentials.
    pub fn needs_stabilization(&self, mode: Mode) -> bool {
        let kernel = 6 + mode.fields_per_node() - 3;
        self.nodes.len() * mode.fields_per_node() > mode.n_components() + kernel
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{build_modulus, builtin_library, rotate_modulus, EulerAngles};
    use crate::mesh::tets::TetMesh;
    use crate::mesh::{generate_voronoi, PolyMesh, SeedSet};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn elements(mesh: &PolyMesh) -> Vec<VemElement> {
        let tm = TetMesh::from_polymesh(mesh).unwrap();
        let by_cell = tm.tets_by_cell(mesh.n_cells());
        mesh.cells
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let tets: Vec<_> = by_cell[c].iter().map(|&t| tm.tets[t]).collect();
                VemElement::new(c, cell, &tm.points, &tets).unwrap()
            })
            .collect()
    }

    fn cube() -> PolyMesh {
        generate_voronoi(&SeedSet::from_points(vec![Point3::new(0.4, 0.5, 0.6)]), 1.0).unwrap()
    }

    #[test]
    fn linear_fields_are_reproduced() {
        let mesh = generate_voronoi(&SeedSet::uniform(10, 1.0, 3), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Vector3::new(0.3, -1.7, 2.2);
        for e in elements(&mesh) {
            let vals: Vec<f64> = e.nodes.iter().map(|&n| a.dot(&mesh_point(&mesh, n)) + 0.7).collect();
            let g = e.projected_gradient(&vals);
            assert!((g - a).norm() < 1e-13 * a.norm(), "cell {}: {g:?}", e.cell);
            let c: Vec<f64> = vec![rng.random_range(-1.0..1.0); e.nodes.len()];
            assert!(e.projected_gradient(&c).norm() < 1e-13);
        }
    }

    fn mesh_point(mesh: &PolyMesh, n: usize) -> Point3 {
        mesh.vertices[n]
    }

    #[test]
    fn cube_matches_face_quadrature() {
        // On a box the face projection integral equals the exact integral of the
        // bilinear face trace, so a tensor Gauss rule over faces is an oracle.
        let mesh = cube();
        let e = &elements(&mesh)[0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vals: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let value_at = |p: &Point3| -> f64 {
            // trilinear interpolation of the vertex values
            let mut s = 0.0;
            for (k, &n) in e.nodes.iter().enumerate() {
                let v = mesh.vertices[n];
                let w = (0..3)
                    .map(|d| if v[d] > 0.5 { p[d] } else { 1.0 - p[d] })
                    .product::<f64>();
                s += w * vals[k];
            }
            s
        };
        let gp = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
        let mut oracle = Vector3::zeros();
        for axis in 0..3 {
            for side in [0.0, 1.0] {
                let mut n = Vector3::zeros();
                n[axis] = if side > 0.5 { 1.0 } else { -1.0 };
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                for &a in &gp {
                    for &b in &gp {
                        let mut p = Point3::zeros();
                        p[axis] = side;
                        p[u] = a;
                        p[v] = b;
                        oracle += n * (0.25 * value_at(&p));
                    }
                }
            }
        }
        let g = e.projected_gradient(&vals);
        assert!((g - oracle).norm() < 1e-12, "{g:?} vs {oracle:?}");
    }

    fn null_dimension(k: &DMatrix<f64>) -> usize {
        let sv = k.clone().svd(false, false).singular_values;
        let max = sv.max();
        sv.iter().filter(|&&s| s < 1e-9 * max).count()
    }

    #[test]
    fn kernel_is_eight_for_positive_beta() {
        let lib = builtin_library();
        let g = rotate_modulus(
            &build_modulus(lib.get("isotropic-dummy").unwrap()).unwrap(),
            &EulerAngles::new(0.2, 0.4, 0.6),
        );
        let mesh = cube();
        let e = &elements(&mesh)[0];
        for beta in [0.05, 0.1, 0.5, 1.0] {
            let k = e.element(&g, beta, Mode::FullyCoupled).unwrap().stiffness();
            assert_eq!(k.nrows(), 40);
            assert_eq!(null_dimension(&k), 8, "β = {beta}");
            assert!((&k - k.transpose()).amax() <= 1e-12 * k.amax());
        }
        let k0 = e.element(&g, 0.0, Mode::FullyCoupled).unwrap().stiffness();
        assert!(40 - null_dimension(&k0) <= 12);
        assert!(e.needs_stabilization(Mode::FullyCoupled));
    }

    #[test]
    fn rigid_modes_have_zero_energy() {
        let lib = builtin_library();
        let g = build_modulus(lib.get("BaTiO3").unwrap()).unwrap();
        let mesh = generate_voronoi(&SeedSet::uniform(4, 1.0, 8), 1.0).unwrap();
        let mode = Mode::ElectroMechanical;
        for ve in elements(&mesh) {
            let e = ve.element(&g, 0.1, mode).unwrap();
            let k = e.stiffness();
            let mut p = DVector::zeros(e.n_dof());
            for n in 0..ve.nodes.len() {
                p[n * 4] = 1.0;
                p[n * 4 + 2] = -2.0;
                p[n * 4 + 3] = 0.5;
            }
            assert!((&k * &p).amax() < 1e-10 * k.amax());
        }
    }

    #[test]
    fn beta_one_energy_is_submesh_fem_energy() {
        let lib = builtin_library();
        let g = build_modulus(lib.get("BaTiO3").unwrap()).unwrap();
        let mesh = generate_voronoi(&SeedSet::uniform(3, 1.0, 2), 1.0).unwrap();
        let tm = TetMesh::from_polymesh(&mesh).unwrap();
        let mode = Mode::ElectroMechanical;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nodal: Vec<f64> = (0..tm.n_points() * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nodal = nodal.as_slice();
        let mut vem_total = 0.0;
        for ve in elements(&mesh) {
            let e = ve.element(&g, 1.0, mode).unwrap();
            let p: Vec<f64> = ve.nodes.iter().flat_map(|&n| (0..4).map(move |f| nodal[n * 4 + f])).collect();
            vem_total += e.energy(&p);
        }
        let mut fem_total = 0.0;
        for (t, nodes) in tm.tets.iter().enumerate() {
            let e = crate::fem::tet4_element(tm.owner[t], *nodes, &tm.points, &g, mode).unwrap();
            let p: Vec<f64> = nodes.iter().flat_map(|&n| (0..4).map(move |f| nodal[n * 4 + f])).collect();
            fem_total += e.energy(&p);
        }
        assert!((vem_total - fem_total).abs() <= 1e-12 * fem_total.abs());
    }

    #[test]
    fn linear_field_energy_is_independent_of_beta() {
        let lib = builtin_library();
        let g = build_modulus(lib.get("CoFe2O4").unwrap()).unwrap();
        let mode = Mode::MagnetoMechanical;
        let mesh = generate_voronoi(&SeedSet::uniform(2, 1.0, 4), 1.0).unwrap();
        let grad = Matrix3::new(0.1, 0.2, -0.3, 0.0, 0.4, 0.1, -0.2, 0.3, 0.05);
        let h = Vector3::new(0.3, -0.1, 0.2);
        for ve in elements(&mesh) {
            let p: Vec<f64> = ve
                .nodes
                .iter()
                .flat_map(|&n| {
                    let x = mesh.vertices[n];
                    let u = grad * x;
                    [u.x, u.y, u.z, -h.dot(&x)]
                })
                .collect();
            let energies: Vec<f64> = [0.0, 0.1, 0.6, 1.0]
                .iter()
                .map(|&b| ve.element(&g, b, mode).unwrap().energy(&p))
                .collect();
            let eps = 0.5 * (grad + grad.transpose());
            let pv = DVector::from_column_slice(&[
                eps[(0, 0)],
                eps[(1, 1)],
                eps[(2, 2)],
                2.0 * eps[(1, 2)],
                2.0 * eps[(0, 2)],
                2.0 * eps[(0, 1)],
                h.x,
                h.y,
                h.z,
            ]);
            let exact = 0.5 * ve.volume * pv.dot(&(g.reduced(mode) * &pv));
            for u in energies {
                assert!((u - exact).abs() <= 1e-12 * exact.abs());
            }
            let pg = ve.projected_gradients(mode, &p);
            assert!((pg.grad_u - grad).amax() < 1e-13);
            assert!(pg.grad_phi.is_none());
            assert!((pg.grad_phi_mag.unwrap() + h).norm() < 1e-13);
        }
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let lib = builtin_library();
        let g = rotate_modulus(
            &build_modulus(lib.get("BaTiO3").unwrap()).unwrap(),
            &EulerAngles::new(1.0, 2.0, 3.0),
        );
        let mesh = generate_voronoi(&SeedSet::uniform(2, 1.0, 6), 1.0).unwrap();
        let ve = &elements(&mesh)[0];
        let e = ve.element(&g, 0.1, Mode::ElectroMechanical).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p: Vec<f64> = (0..e.n_dof()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = e.stiffness();
        let r = e.residual(&p);
        let h = 1e-6;
        for i in 0..e.n_dof() {
            let mut pp = p.clone();
            pp[i] += h;
            let mut pm = p.clone();
            pm[i] -= h;
            let fd = (e.energy(&pp) - e.energy(&pm)) / (2.0 * h);
            assert!((fd - r[i]).abs() <= 1e-6 * r.amax());
            let col = (e.residual(&pp) - e.residual(&pm)) / (2.0 * h);
            assert!((col - k.column(i)).amax() <= 1e-6 * k.amax());
        }
    }
}
