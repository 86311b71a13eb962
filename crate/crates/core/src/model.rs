//! Representative volume elements and their discretizations.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::error::{Error, Result};
use crate::fem::{promote_to_quadratic, tet10_element, tet4_element};
use crate::materials::{build_modulus, rotate_modulus, EulerAngles, GeneralizedModulus, MaterialLibrary, Mode};
use crate::mesh::{on_box_boundary, Point3, PolyMesh, TetMesh, Tolerances};
use crate::vem::VemElement;

/// Discretization scheme of an RVE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    /// One virtual element per grain with stabilization weight `beta`.
    Vem { beta: f64 },
    /// Linear tets on the minimal grain triangulation.
    FemO1,
    /// Quadratic tets on the minimal grain triangulation.
    FemO2,
    /// Linear tets on the minimal triangulation refined `levels` times.
    FemO1Refined { levels: usize },
}

impl Method {
    /// Short label used in tables.
    pub fn label(&self) -> String {
        match self {
            Method::Vem { beta } => format!("VEM-VO(beta={beta})"),
            Method::FemO1 => "FEM-O1".into(),
            Method::FemO2 => "FEM-O2".into(),
            Method::FemO1Refined { levels } => format!("FEM-O1-refined({levels})"),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Material and orientation of every grain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrainAssignment {
    pub materials: Vec<String>,
    pub angles: Vec<EulerAngles>,
}

impl GrainAssignment {
    /// Every grain of `material`, unrotated.
    pub fn uniform(material: &str, n_cells: usize) -> GrainAssignment {
        GrainAssignment {
            materials: vec![material.to_string(); n_cells],
            angles: vec![EulerAngles::new(0.0, 0.0, 0.0); n_cells],
        }
    }

    pub fn len(&self) -> usize {
        self.materials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.materials.is_empty()
    }
}

/// Grain mesh with per-grain global-frame moduli.
#[derive(Debug, Clone)]
pub struct Rve {
    pub mesh: PolyMesh,
    /// Minimal conforming triangulation of the grains.
    pub tets: TetMesh,
    pub mode: Mode,
    pub moduli: Vec<GeneralizedModulus>,
}

impl Rve {
    /// Looks up and rotates the modulus of every grain.
    pub fn new(mesh: PolyMesh, grains: &GrainAssignment, library: &MaterialLibrary, mode: Mode) -> Result<Rve> {
        if grains.materials.len() != mesh.n_cells() || grains.angles.len() != mesh.n_cells() {
            return Err(Error::InvalidInput(format!(
                "grain assignment covers {} materials and {} orientations for {} cells",
                grains.materials.len(),
                grains.angles.len(),
                mesh.n_cells()
            )));
        }
        let mut local = std::collections::BTreeMap::new();
        for name in &grains.materials {
            if !local.contains_key(name) {
                let rec = library.require(name)?;
                rec.check_run_mode(mode)?;
                local.insert(name.clone(), build_modulus(rec)?);
            }
        }
        let moduli = grains
            .materials
            .iter()
            .zip(&grains.angles)
            .map(|(name, a)| rotate_modulus(&local[name], a))
            .collect();
        Self::from_moduli(mesh, moduli, mode)
    }

    /// Uses the given global-frame moduli directly.
    pub fn from_moduli(mesh: PolyMesh, moduli: Vec<GeneralizedModulus>, mode: Mode) -> Result<Rve> {
        if moduli.len() != mesh.n_cells() {
            return Err(Error::InvalidInput(format!(
                "{} moduli for {} cells",
                moduli.len(),
                mesh.n_cells()
            )));
        }
        let tets = TetMesh::from_polymesh(&mesh)?;
        Ok(Rve {
            mesh,
            tets,
            mode,
            moduli,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }

    /// Copy with every grain modulus multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Rve {
        Rve {
            moduli: self.moduli.iter().map(|g| g.scaled(s)).collect(),
            ..self.clone()
        }
    }

    /// Nodes and elements of `method`.
    pub fn discretize(&self, method: Method) -> Result<Discretization> {
        let mode = self.mode;
        let (points, boundary, elements, deficient_cells) = match method {
            Method::Vem { beta } => {
                let tm = &self.tets;
                let by_cell = tm.tets_by_cell(self.n_cells());
                let vem: Vec<VemElement> = self
                    .mesh
                    .cells
                    .par_iter()
                    .enumerate()
                    .map(|(c, cell)| {
                        let sub: Vec<[usize; 4]> = by_cell[c].iter().map(|&t| tm.tets[t]).collect();
                        VemElement::new(c, cell, &tm.points, &sub)
                    })
                    .collect::<Result<_>>()?;
                let elements = vem
                    .par_iter()
                    .map(|v| v.element(&self.moduli[v.cell], beta, mode))
                    .collect::<Result<Vec<_>>>()?;
                let deficient = if beta == 0.0 {
                    vem.iter()
                        .filter(|v| v.needs_stabilization(mode))
                        .map(|v| v.cell)
                        .collect()
                } else {
                    Vec::new()
                };
                (tm.points.clone(), tm.boundary.clone(), elements, deficient)
            }
            Method::FemO1 => {
                let tm = &self.tets;
                (tm.points.clone(), tm.boundary.clone(), self.linear_elements(tm)?, Vec::new())
            }
            Method::FemO1Refined { levels } => {
                let tm = self.tets.refine(levels);
                let elements = self.linear_elements(&tm)?;
                (tm.points, tm.boundary, elements, Vec::new())
            }
            Method::FemO2 => {
                let qm = promote_to_quadratic(&self.tets);
                let elements = qm
                    .tets
                    .par_iter()
                    .zip(&qm.owner)
                    .map(|(nodes, &c)| tet10_element(c, *nodes, &qm.points, &self.moduli[c], mode))
                    .collect::<Result<Vec<_>>>()?;
                (qm.points, qm.boundary, elements, Vec::new())
            }
        };
        Ok(Discretization {
            method,
            mode,
            points,
            boundary,
            elements,
            edge_length: self.mesh.edge_length,
            deficient_cells,
        })
    }

    fn linear_elements(&self, tm: &TetMesh) -> Result<Vec<Element>> {
        tm.tets
            .par_iter()
            .zip(&tm.owner)
            .map(|(nodes, &c)| tet4_element(c, *nodes, &tm.points, &self.moduli[c], self.mode))
            .collect()
    }
}

/// Nodes and elements ready for assembly.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub method: Method,
    pub mode: Mode,
    pub points: Vec<Point3>,
    pub boundary: Vec<bool>,
    pub elements: Vec<Element>,
    pub edge_length: f64,
    /// Grains whose element is rank deficient without stabilization (VEM with `β = 0`).
    pub deficient_cells: Vec<usize>,
}

impl Discretization {
    pub fn n_nodes(&self) -> usize {
        self.points.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.points.len() * self.mode.fields_per_node()
    }

    /// Checks that the boundary flags match the box faces.
    pub fn boundary_is_consistent(&self) -> bool {
        let tol = Tolerances::scaled(self.edge_length).bbox;
        self.points
            .iter()
            .zip(&self.boundary)
            .all(|(p, &b)| on_box_boundary(p, self.edge_length, tol) == b)
    }
}
