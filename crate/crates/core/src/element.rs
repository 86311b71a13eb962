//! Sample-based element kernel shared by the virtual and finite elements.
//!
//! Every element is a list of weighted gradient samples. A sample carries the
//! gradients of the nodal basis functions it touches; the element energy is
//! `Σ_s w_s ψ(B_s p)`, so the stiffness is `Σ_s w_s B_sᵀ G B_s`.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::materials::Mode;

/// One integration point (or constant-gradient region) of an element.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub weight: f64,
    /// Element-local node indices touched by this sample.
    pub nodes: Vec<usize>,
    /// Basis function gradients, parallel to `nodes`.
    pub grads: Vec<Vector3<f64>>,
}

/// Element ready for assembly.
#[derive(Debug, Clone)]
pub struct Element {
    /// Owning grain.
    pub cell: usize,
    /// Global node ids.
    pub nodes: Vec<usize>,
    pub mode: Mode,
    /// Modulus restricted to the active components of `mode`.
    pub modulus: DMatrix<f64>,
    pub samples: Vec<GradientSample>,
}

impl Element {
    pub fn fields(&self) -> usize {
        self.mode.fields_per_node()
    }

    pub fn n_dof(&self) -> usize {
        self.nodes.len() * self.fields()
    }

    pub fn volume(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }

    /// `B` of a sample restricted to its own nodes: `n_p × (nodes · fields)`.
    pub fn sample_b(&self, s: &GradientSample) -> DMatrix<f64> {
        let nf = self.fields();
        let np = self.mode.n_components();
        let elec = self.mode.electric();
        let mag_row = if elec { 9 } else { 6 };
        let mag_dof = if elec { 4 } else { 3 };
        let mut b = DMatrix::zeros(np, s.nodes.len() * nf);
        for (a, g) in s.grads.iter().enumerate() {
            let c = a * nf;
            b[(0, c)] = g.x;
            b[(1, c + 1)] = g.y;
            b[(2, c + 2)] = g.z;
            b[(3, c + 1)] = g.z;
            b[(3, c + 2)] = g.y;
            b[(4, c)] = g.z;
            b[(4, c + 2)] = g.x;
            b[(5, c)] = g.y;
            b[(5, c + 1)] = g.x;
            if elec {
                for k in 0..3 {
                    b[(6 + k, c + 3)] = -g[k];
                }
            }
            if self.mode.magnetic() {
                for k in 0..3 {
                    b[(mag_row + k, c + mag_dof)] = -g[k];
                }
            }
        }
        b
    }

    /// Element-local dof indices of a sample's columns.
    fn sample_dofs(&self, s: &GradientSample) -> Vec<usize> {
        let nf = self.fields();
        s.nodes
            .iter()
            .flat_map(|&n| (0..nf).map(move |f| n * nf + f))
            .collect()
    }

    /// Generalized gradient `P = B p_e` of a sample for element dof values `p`.
    pub fn gradient(&self, s: &GradientSample, p: &[f64]) -> DVector<f64> {
        let b = self.sample_b(s);
        let local = DVector::from_iterator(
            b.ncols(),
            self.sample_dofs(s).into_iter().map(|d| p[d]),
        );
        b * local
    }

    /// Element stiffness `K = Σ w Bᵀ G B` (constant, since the energy is quadratic).
    pub fn stiffness(&self) -> DMatrix<f64> {
        let n = self.n_dof();
        let mut k = DMatrix::zeros(n, n);
        for s in &self.samples {
            if s.weight == 0.0 {
                continue;
            }
            let b = self.sample_b(s);
            let gb = &self.modulus * &b;
            let ks = b.transpose() * gb * s.weight;
            let dofs = self.sample_dofs(s);
            for (i, &di) in dofs.iter().enumerate() {
                for (j, &dj) in dofs.iter().enumerate() {
                    k[(di, dj)] += ks[(i, j)];
                }
            }
        }
        k
    }

    /// Element energy `Σ w ½ Pᵀ G P`.
    pub fn energy(&self, p: &[f64]) -> f64 {
        self.samples
            .iter()
            .map(|s| {
                let g = self.gradient(s, p);
                0.5 * s.weight * g.dot(&(&self.modulus * &g))
            })
            .sum()
    }

    /// Residual `R = ∂U/∂p = K p`.
    pub fn residual(&self, p: &[f64]) -> DVector<f64> {
        self.stiffness() * DVector::from_column_slice(p)
    }

    /// Integrals `(∫P, ∫L, ∫L·P)` over the element for dof values `p`.
    pub fn integrate_fields(&self, p: &[f64]) -> (DVector<f64>, DVector<f64>, f64) {
        let np = self.mode.n_components();
        let mut ip = DVector::zeros(np);
        let mut il = DVector::zeros(np);
        let mut work = 0.0;
        for s in &self.samples {
            if s.weight == 0.0 {
                continue;
            }
            let g = self.gradient(s, p);
            let l = &self.modulus * &g;
            work += s.weight * g.dot(&l);
            ip += &g * s.weight;
            il += &l * s.weight;
        }
        (ip, il, work)
    }
}
