//! Global dof numbering, sparse assembly and the Dirichlet solve.

mod csr;
mod ldl;
mod ordering;

pub use csr::CsrMatrix;
pub use ldl::{LdlFactor, PivotFailure};
pub use ordering::{nested_dissection, LEAF_SIZE};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::error::{Error, Result};
use crate::materials::Mode;
use crate::mesh::Point3;

/// Relative symmetry tolerance of the assembled matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Pivot magnitude (after unit-diagonal scaling) below which the system is singular.
pub const PIVOT_TOL: f64 = 1e-11;
/// Required relative residual of every Dirichlet solve.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Elements per parallel chunk during assembly.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Interior(usize),
    Boundary(usize),
}

/// Numbering of `(node, field)` pairs and their interior/boundary partition.
#[derive(Debug, Clone)]
pub struct DofMap {
    mode: Mode,
    fields: usize,
    /// Position of each node in the global numbering.
    node_pos: Vec<usize>,
    /// Node at each position.
    pos_node: Vec<usize>,
    boundary_node: Vec<bool>,
    slot: Vec<Slot>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
}

impl DofMap {
    /// Numbers the dofs of `boundary.len()` nodes in node order.
    pub fn new(mode: Mode, boundary: &[bool]) -> DofMap {
        Self::with_permutation(mode, boundary, (0..boundary.len()).collect())
            .expect("identity is a permutation")
    }

    /// Numbers node `n` at position `node_pos[n]`.
    pub fn with_permutation(mode: Mode, boundary: &[bool], node_pos: Vec<usize>) -> Result<DofMap> {
        let n = boundary.len();
        if node_pos.len() != n {
            return Err(Error::InvalidInput("node permutation has the wrong length".into()));
        }
        let mut pos_node = vec![usize::MAX; n];
        for (node, &p) in node_pos.iter().enumerate() {
            if p >= n || pos_node[p] != usize::MAX {
                return Err(Error::InvalidInput("node numbering is not a permutation".into()));
            }
            pos_node[p] = node;
        }
        let fields = mode.fields_per_node();
        let mut slot = Vec::with_capacity(n * fields);
        let mut interior = Vec::new();
        let mut bnd = Vec::new();
        for &node in &pos_node {
            for _ in 0..fields {
                let g = slot.len();
                if boundary[node] {
                    slot.push(Slot::Boundary(bnd.len()));
                    bnd.push(g);
                } else {
                    slot.push(Slot::Interior(interior.len()));
                    interior.push(g);
                }
            }
        }
        Ok(DofMap {
            mode,
            fields,
            node_pos,
            pos_node,
            boundary_node: boundary.to_vec(),
            slot,
            interior,
            boundary: bnd,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn fields(&self) -> usize {
        self.fields
    }

    pub fn n_nodes(&self) -> usize {
        self.node_pos.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.slot.len()
    }

    pub fn dof(&self, node: usize, field: usize) -> usize {
        self.node_pos[node] * self.fields + field
    }

    /// `(node, field)` of global dof `g`.
    pub fn node_field(&self, g: usize) -> (usize, usize) {
        (self.pos_node[g / self.fields], g % self.fields)
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        self.boundary_node[node]
    }

    /// Global ids of interior dofs, ascending.
    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior
    }

    /// Global ids of boundary dofs, ascending.
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary
    }

    pub fn interior_index(&self, g: usize) -> Option<usize> {
        match self.slot[g] {
            Slot::Interior(i) => Some(i),
            Slot::Boundary(_) => None,
        }
    }

    pub fn boundary_index(&self, g: usize) -> Option<usize> {
        match self.slot[g] {
            Slot::Boundary(i) => Some(i),
            Slot::Interior(_) => None,
        }
    }

    /// Global dofs of an element, node-major.
    pub fn element_dofs(&self, e: &Element) -> Result<Vec<usize>> {
        if e.mode != self.mode {
            return Err(Error::InvalidInput(format!(
                "element of cell {} is {} but the dof map is {}",
                e.cell, e.mode, self.mode
            )));
        }
        let mut out = Vec::with_capacity(e.n_dof());
        for &n in &e.nodes {
            if n >= self.n_nodes() {
                return Err(Error::UnnumberedDof(n * self.fields));
            }
            out.extend((0..self.fields).map(|f| self.dof(n, f)));
        }
        Ok(out)
    }

    /// Scatters per-node field values (node-major, `fields` per node) to global order.
    pub fn to_global(&self, nodal: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_dofs()];
        for node in 0..self.n_nodes() {
            for f in 0..self.fields {
                g[self.dof(node, f)] = nodal[node * self.fields + f];
            }
        }
        g
    }

    /// Gathers global values back to node-major order.
    pub fn to_nodal(&self, global: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs()];
        for node in 0..self.n_nodes() {
            for f in 0..self.fields {
                out[node * self.fields + f] = global[self.dof(node, f)];
            }
        }
        out
    }
}

/// Conditioning summary of a factorization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub n_interior: usize,
    pub nnz_matrix: usize,
    pub nnz_factor: usize,
    /// `max |D| / min |D|` of the scaled factorization.
    pub pivot_ratio: f64,
    /// Ratio of the largest to the smallest diagonal scaling factor.
    pub scaling_ratio: f64,
}

/// Solution of one Dirichlet problem.
#[derive(Debug, Clone)]
pub struct Solution {
    /// Values at all global dofs.
    pub values: Vec<f64>,
    /// `‖K_ii u_i + K_ib u_b‖ / ‖K_ib u_b‖`.
    pub residual: f64,
}

struct Factorized {
    /// Scaled interior block `S K_ii S`.
    a: CsrMatrix,
    scale: Vec<f64>,
    factor: LdlFactor,
}

/// Assembled global matrix with its (lazily computed) interior factorization.
pub struct SparseSystem {
    k: CsrMatrix,
    dofs: DofMap,
    points: Vec<Point3>,
    /// Cells touching each node, for diagnostics.
    node_cells: Vec<Vec<usize>>,
    deficient_cells: Vec<usize>,
    factorized: Option<Factorized>,
    factorizations: usize,
    report: Option<ConditionReport>,
}

/// `K = Σ_e scatter(K_e)`; element matrices are computed in parallel and added in
/// element order.
pub fn assemble(elements: &[Element], dofs: &DofMap, points: &[Point3]) -> Result<SparseSystem> {
    let n_nodes = dofs.n_nodes();
    if points.len() != n_nodes {
        return Err(Error::InvalidInput(format!(
            "{} node coordinates for {} nodes",
            points.len(),
            n_nodes
        )));
    }
    let nf = dofs.fields();
    let mut node_adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    let mut node_cells: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for e in elements {
        dofs.element_dofs(e)?;
        for &a in &e.nodes {
            node_adj[a].extend(e.nodes.iter().copied());
            node_cells[a].push(e.cell);
        }
    }
    for (a, list) in node_adj.iter_mut().enumerate() {
        list.push(a);
        list.sort_unstable_by_key(|&m| dofs.node_pos[m]);
        list.dedup();
    }
    for list in node_cells.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    let mut rows = vec![Vec::new(); dofs.n_dofs()];
    for node in 0..n_nodes {
        let cols: Vec<usize> = node_adj[node]
            .iter()
            .flat_map(|&m| (0..nf).map(move |f| dofs.dof(m, f)))
            .collect();
        for f in 0..nf {
            rows[dofs.dof(node, f)] = cols.clone();
        }
    }
    let mut k = CsrMatrix::from_pattern(rows);

    for chunk in elements.chunks(CHUNK) {
        let local: Vec<(Vec<usize>, nalgebra::DMatrix<f64>)> = chunk
            .par_iter()
            .map(|e| Ok((dofs.element_dofs(e)?, e.stiffness())))
            .collect::<Result<_>>()?;
        for (gd, ke) in local {
            for (a, &ga) in gd.iter().enumerate() {
                for (b, &gb) in gd.iter().enumerate() {
                    let p = k.position(ga, gb).ok_or(Error::UnnumberedDof(gb))?;
                    k.values[p] += ke[(a, b)];
                }
            }
        }
    }
    let asym = k.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::Asymmetric(asym));
    }
    Ok(SparseSystem {
        k,
        dofs: dofs.clone(),
        points: points.to_vec(),
        node_cells,
        deficient_cells: Vec::new(),
        factorized: None,
        factorizations: 0,
        report: None,
    })
}

impl SparseSystem {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.k
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    /// Number of factorizations performed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    pub fn condition_report(&self) -> Option<ConditionReport> {
        self.report
    }

    /// Cells named in a factorization failure instead of those touching the pivot.
    pub fn set_deficient_cells(&mut self, cells: Vec<usize>) {
        self.deficient_cells = cells;
    }

    /// Factorizes the interior block (again, if already factorized).
    pub fn factorize(&mut self) -> Result<()> {
        let dofs = &self.dofs;
        let ni = dofs.interior_dofs().len();
        let diag: Vec<f64> = dofs.interior_dofs().iter().map(|&g| self.k.get(g, g)).collect();
        if let Some(i) = diag.iter().position(|d| *d == 0.0) {
            return Err(self.pivot_error(dofs.interior_dofs()[i], 0.0));
        }
        let scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.abs().sqrt()).collect();
        let mut rows = Vec::with_capacity(ni);
        let mut vals = Vec::with_capacity(ni);
        for (i, &g) in dofs.interior_dofs().iter().enumerate() {
            let (c, v) = self.k.row(g);
            let mut rc = Vec::with_capacity(c.len());
            let mut rv = Vec::with_capacity(c.len());
            for (&h, &kv) in c.iter().zip(v) {
                if let Some(j) = dofs.interior_index(h) {
                    rc.push(j);
                    rv.push(scale[i] * kv * scale[j]);
                }
            }
            rows.push(rc);
            vals.push(rv);
        }
        let mut a = CsrMatrix::from_pattern(rows);
        a.values = vals.into_iter().flatten().collect();

        let order = self.interior_order();
        self.factorizations += 1;
        let factor = LdlFactor::factorize(&a, order, PIVOT_TOL)
            .map_err(|f| self.pivot_error(dofs.interior_dofs()[f.index], f.magnitude))?;
        let (dmin, dmax) = factor
            .pivots()
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
        let (smin, smax) = scale
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(*s), hi.max(*s)));
        self.report = Some(ConditionReport {
            n_interior: ni,
            nnz_matrix: self.k.nnz(),
            nnz_factor: factor.nnz(),
            pivot_ratio: if ni == 0 { 1.0 } else { dmax / dmin },
            scaling_ratio: if ni == 0 { 1.0 } else { smax / smin },
        });
        self.factorized = Some(Factorized { a, scale, factor });
        Ok(())
    }

    fn pivot_error(&self, g: usize, magnitude: f64) -> Error {
        let cells = if self.deficient_cells.is_empty() {
            self.node_cells[self.dofs.node_field(g).0].clone()
        } else {
            self.deficient_cells.clone()
        };
        Error::Factorization {
            pivot: g,
            magnitude,
            cells,
        }
    }

    /// Nested dissection on interior nodes, expanded to their dofs.
    fn interior_order(&self) -> Vec<usize> {
        let dofs = &self.dofs;
        let nf = dofs.fields();
        let interior_nodes: Vec<usize> = dofs
            .pos_node
            .iter()
            .copied()
            .filter(|&n| !dofs.is_boundary_node(n))
            .collect();
        let mut local = vec![usize::MAX; dofs.n_nodes()];
        for (i, &n) in interior_nodes.iter().enumerate() {
            local[n] = i;
        }
        let coords: Vec<Point3> = interior_nodes.iter().map(|&n| self.points[n]).collect();
        let adj: Vec<Vec<usize>> = interior_nodes
            .iter()
            .map(|&n| {
                let (cols, _) = self.k.row(dofs.dof(n, 0));
                cols.iter()
                    .step_by(nf)
                    .map(|&h| local[dofs.node_field(h).0])
                    .filter(|&m| m != usize::MAX)
                    .collect()
            })
            .collect();
        nested_dissection(&coords, &adj)
            .into_iter()
            .flat_map(|i| {
                let n = interior_nodes[i];
                (0..nf).map(move |f| dofs.interior_index(dofs.dof(n, f)).expect("interior node"))
            })
            .collect()
    }

    /// Solves one Dirichlet problem; `boundary_values[i]` belongs to `boundary_dofs()[i]`.
    pub fn solve_dirichlet(&mut self, boundary_values: &[f64]) -> Result<Solution> {
        if self.factorized.is_none() {
            self.factorize()?;
        }
        self.solve_factorized(boundary_values)
    }

    /// Solves several Dirichlet problems against one factorization; results keep input order.
    pub fn solve_cases(&mut self, cases: &[Vec<f64>]) -> Result<Vec<Solution>> {
        if self.factorized.is_none() {
            self.factorize()?;
        }
        let this = &*self;
        cases.par_iter().map(|ub| this.solve_factorized(ub)).collect()
    }

    fn solve_factorized(&self, ub: &[f64]) -> Result<Solution> {
        let dofs = &self.dofs;
        if ub.len() != dofs.boundary_dofs().len() {
            return Err(Error::InvalidInput(format!(
                "{} boundary values for {} boundary dofs",
                ub.len(),
                dofs.boundary_dofs().len()
            )));
        }
        let fz = self.factorized.as_ref().expect("factorized");
        let mut values = vec![0.0; dofs.n_dofs()];
        for (&g, &v) in dofs.boundary_dofs().iter().zip(ub) {
            values[g] = v;
        }
        // rhs = −K_ib u_b
        let rhs: Vec<f64> = dofs
            .interior_dofs()
            .iter()
            .map(|&g| {
                let (c, v) = self.k.row(g);
                -c.iter()
                    .zip(v)
                    .filter(|(&h, _)| dofs.boundary_index(h).is_some())
                    .map(|(&h, a)| a * values[h])
                    .sum::<f64>()
            })
            .collect();
        let rhs_norm = norm(&rhs);
        if rhs_norm == 0.0 {
            return Ok(Solution {
                values,
                residual: 0.0,
            });
        }
        let b: Vec<f64> = rhs.iter().zip(&fz.scale).map(|(r, s)| r * s).collect();
        let mut y = fz.factor.solve(&b);
        for _ in 0..4 {
            let ay = fz.a.matvec(&y);
            let r: Vec<f64> = b.iter().zip(&ay).map(|(b, a)| b - a).collect();
            if norm(&r) <= 1e-15 * norm(&b) {
                break;
            }
            let dy = fz.factor.solve(&r);
            y.iter_mut().zip(&dy).for_each(|(y, d)| *y += d);
        }
        for ((&g, yi), s) in dofs.interior_dofs().iter().zip(&y).zip(&fz.scale) {
            values[g] = yi * s;
        }
        let kv = self.k.matvec(&values);
        let res: Vec<f64> = dofs.interior_dofs().iter().map(|&g| kv[g]).collect();
        let residual = norm(&res) / rhs_norm;
        if !(residual < RESIDUAL_TOL) {
            return Err(Error::Residual(residual));
        }
        Ok(Solution { values, residual })
    }

    /// `K u` at all dofs; at boundary dofs these are the reactions.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.k.matvec(u)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
