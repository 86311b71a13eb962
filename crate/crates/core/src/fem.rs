//! Linear and quadratic tetrahedral elements. Conventions are documented in `docs/fem.md`.

use std::collections::HashMap;

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::element::{Element, GradientSample};
use crate::error::{Error, Result};
use crate::materials::{GeneralizedModulus, Mode};
use crate::mesh::tets::TetMesh;
use crate::mesh::{Point3, Tolerances};

/// Local edge numbering of the 10-node tetrahedron: node `4 + k` sits on `TET10_EDGES[k]`.
pub const TET10_EDGES: [(usize, usize); 6] = [(0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3)];

const GAUSS_A: f64 = 0.585_410_196_624_968_5;
const GAUSS_B: f64 = 0.138_196_601_125_010_5;

/// Gradients of the barycentric coordinates and the (positive) volume of a tet.
pub fn tet4_gradients(p: &[Point3; 4]) -> Result<([Vector3<f64>; 4], f64)> {
    let j = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
    let det = j.determinant();
    let vol = det / 6.0;
    let scale = (p[1] - p[0])
        .norm()
        .max((p[2] - p[0]).norm())
        .max((p[3] - p[0]).norm());
    if !(vol > 1e-14 * scale.powi(3)) {
        return Err(Error::InvalidMesh(format!(
            "inverted or flat tetrahedron (volume {vol:e})"
        )));
    }
    let inv = j.try_inverse().ok_or_else(|| Error::InvalidMesh("singular tetrahedron".into()))?;
    let g1 = inv.row(0).transpose();
    let g2 = inv.row(1).transpose();
    let g3 = inv.row(2).transpose();
    Ok(([-(g1 + g2 + g3), g1, g2, g3], vol))
}

/// Quadratic shape function gradients at barycentric point `l`.
pub fn tet10_shape_gradients(grad_l: &[Vector3<f64>; 4], l: &[f64; 4]) -> Vec<Vector3<f64>> {
    let mut g = Vec::with_capacity(10);
    for i in 0..4 {
        g.push(grad_l[i] * (4.0 * l[i] - 1.0));
    }
    for &(i, j) in &TET10_EDGES {
        g.push((grad_l[j] * l[i] + grad_l[i] * l[j]) * 4.0);
    }
    g
}

/// Quadratic shape function values at barycentric point `l`.
pub fn tet10_shape_values(l: &[f64; 4]) -> [f64; 10] {
    let mut n = [0.0; 10];
    for i in 0..4 {
        n[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (k, &(i, j)) in TET10_EDGES.iter().enumerate() {
        n[4 + k] = 4.0 * l[i] * l[j];
    }
    n
}

/// Barycentric coordinates and weight fraction of the 4-point rule.
pub fn gauss4() -> [([f64; 4], f64); 4] {
    let (a, b) = (GAUSS_A, GAUSS_B);
    [
        ([a, b, b, b], 0.25),
        ([b, a, b, b], 0.25),
        ([b, b, a, b], 0.25),
        ([b, b, b, a], 0.25),
    ]
}

/// Linear tetrahedron: one constant-gradient sample.
pub fn tet4_element(
    cell: usize,
    nodes: [usize; 4],
    points: &[Point3],
    modulus: &GeneralizedModulus,
    mode: Mode,
) -> Result<Element> {
    let p = nodes.map(|n| points[n]);
    let (grads, vol) = tet4_gradients(&p)?;
    Ok(Element {
        cell,
        nodes: nodes.to_vec(),
        mode,
        modulus: modulus.reduced(mode),
        samples: vec![GradientSample {
            weight: vol,
            nodes: (0..4).collect(),
            grads: grads.to_vec(),
        }],
    })
}

/// Quadratic tetrahedron with straight edges, 4-point Gauss rule.
pub fn tet10_element(
    cell: usize,
    nodes: [usize; 10],
    points: &[Point3],
    modulus: &GeneralizedModulus,
    mode: Mode,
) -> Result<Element> {
    let corners = [nodes[0], nodes[1], nodes[2], nodes[3]].map(|n| points[n]);
    let (grad_l, vol) = tet4_gradients(&corners)?;
    let samples = gauss4()
        .iter()
        .map(|(l, w)| GradientSample {
            weight: w * vol,
            nodes: (0..10).collect(),
            grads: tet10_shape_gradients(&grad_l, l),
        })
        .collect();
    Ok(Element {
        cell,
        nodes: nodes.to_vec(),
        mode,
        modulus: modulus.reduced(mode),
        samples,
    })
}

/// Stiffness of a single tetrahedron of order 1 or 2 (`nodes` are the 4 or 10 node positions).
pub fn tet_stiffness(nodes: &[Point3], modulus: &GeneralizedModulus, mode: Mode) -> Result<DMatrix<f64>> {
    let e = match nodes.len() {
        4 => tet4_element(0, [0, 1, 2, 3], nodes, modulus, mode)?,
        10 => tet10_element(0, std::array::from_fn(|i| i), nodes, modulus, mode)?,
        n => return Err(Error::InvalidInput(format!("tetrahedron with {n} nodes"))),
    };
    Ok(e.stiffness())
}

/// Tet mesh with mid-edge nodes.
#[derive(Debug, Clone)]
pub struct QuadraticTetMesh {
    pub points: Vec<Point3>,
    pub tets: Vec<[usize; 10]>,
    pub owner: Vec<usize>,
    pub boundary: Vec<bool>,
}

/// Adds one shared mid-edge node per unique edge; corner ids are kept.
pub fn promote_to_quadratic(mesh: &TetMesh) -> QuadraticTetMesh {
    let mut points = mesh.points.clone();
    let mut boundary = mesh.boundary.clone();
    let tol = Tolerances::scaled(mesh.edge_length).bbox;
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let tets = mesh
        .tets
        .iter()
        .map(|t| {
            let mut out = [0usize; 10];
            out[..4].copy_from_slice(t);
            for (k, &(i, j)) in TET10_EDGES.iter().enumerate() {
                let (a, b) = (t[i].min(t[j]), t[i].max(t[j]));
                out[4 + k] = *mids.entry((a, b)).or_insert_with(|| {
                    let p = 0.5 * (points[a] + points[b]);
                    points.push(p);
                    boundary.push(crate::mesh::on_box_boundary(&p, mesh.edge_length, tol));
                    points.len() - 1
                });
            }
            out
        })
        .collect();
    QuadraticTetMesh {
        points,
        tets,
        owner: mesh.owner.clone(),
        boundary,
    }
}
