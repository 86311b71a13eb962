//! Generalized moduli of coupled electro-magneto-mechanical grains.
//!
//! Layout of the 12-component gradient and flux vectors:
//! `P = [ε11, ε22, ε33, γ23, γ13, γ12, E1, E2, E3, H1, H2, H3]` with engineering
//! shears `γij = 2 εij`, and `L = [σ, −D, −B]` in the same order, so that
//! `L = G P` with
//!
//! ```text
//!     | C   −eᵀ  −qᵀ |
//! G = | −e  −ε   −α  |
//!     | −q  −α   −μ  |
//! ```

mod anisotropy;
mod invariant;
mod library;
mod rotation;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x6, Matrix6, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use anisotropy::{anisotropy_index, voigt_reuss_moduli, VoigtReuss};
pub use invariant::{coefficients, energy_invariant, TransverseIsoCoefficients};
pub use library::{builtin_library, parse_library, write_library, MaterialLibrary};
pub use rotation::{
    printed_factors, rotate_modulus, rotate_modulus_q, rotation_q, strain_transform, stress_transform,
    voigt_transforms, EulerAngles,
};

pub type Matrix12 = SMatrix<f64, 12, 12>;
pub type Vector12 = SVector<f64, 12>;

/// Active field combination of a simulation or material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Displacement and electric potential (9 gradient components).
    ElectroMechanical,
    /// Displacement and magnetic potential (9 gradient components).
    MagnetoMechanical,
    /// Displacement, electric and magnetic potential (12 gradient components).
    FullyCoupled,
}

impl Mode {
    pub fn electric(self) -> bool {
        matches!(self, Mode::ElectroMechanical | Mode::FullyCoupled)
    }

    pub fn magnetic(self) -> bool {
        matches!(self, Mode::MagnetoMechanical | Mode::FullyCoupled)
    }

    /// Nodal fields: 3 displacements plus active potentials.
    pub fn fields_per_node(self) -> usize {
        3 + self.electric() as usize + self.magnetic() as usize
    }

    /// Indices into the 12-component `P` that are active in this mode.
    pub fn components(self) -> Vec<usize> {
        let mut c: Vec<usize> = (0..6).collect();
        if self.electric() {
            c.extend(6..9);
        }
        if self.magnetic() {
            c.extend(9..12);
        }
        c
    }

    pub fn n_components(self) -> usize {
        6 + 3 * (self.electric() as usize + self.magnetic() as usize)
    }

    /// Load cases (1-based component numbers) solved in this mode.
    pub fn cases(self) -> Vec<usize> {
        self.components().into_iter().map(|c| c + 1).collect()
    }

    /// Whether a material of mode `self` provides the fields required by a run in `run`.
    pub fn supports(self, run: Mode) -> bool {
        (!run.electric() || self.electric()) && (!run.magnetic() || self.magnetic())
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::ElectroMechanical => "electro-mechanical",
            Mode::MagnetoMechanical => "magneto-mechanical",
            Mode::FullyCoupled => "fully-coupled",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Crystal symmetry template that fixes the zero pattern of the moduli.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LatticeClass {
    /// Hexagonal 6mm.
    Hex6mm,
    /// Hexagonal -6m2.
    HexBar6m2,
    /// Trigonal 3m.
    Trigonal3m,
    /// Orthorhombic 222.
    Orth222,
    /// Transversely isotropic about x3; same template as 6mm.
    TransIso,
    /// Isotropic elasticity from `lambda` and `shear`, optional isotropic dielectric and magnetic constants.
    Isotropic,
}

impl LatticeClass {
    pub fn name(self) -> &'static str {
        match self {
            LatticeClass::Hex6mm => "hex6mm",
            LatticeClass::HexBar6m2 => "hexBar6m2",
            LatticeClass::Trigonal3m => "trigonal3m",
            LatticeClass::Orth222 => "orth222",
            LatticeClass::TransIso => "transIso",
            LatticeClass::Isotropic => "isotropic",
        }
    }

    fn elastic_params(self) -> &'static [&'static str] {
        match self {
            LatticeClass::Hex6mm
            | LatticeClass::HexBar6m2
            | LatticeClass::Trigonal3m
            | LatticeClass::TransIso => &["C11", "C12", "C13", "C33", "C44"],
            LatticeClass::Orth222 => &[
                "C11", "C12", "C13", "C22", "C23", "C33", "C44", "C55", "C66",
            ],
            LatticeClass::Isotropic => &["lambda", "shear"],
        }
    }

    /// Suffixes of the piezo constants (`e..` and `q..`).
    fn piezo_suffixes(self) -> &'static [&'static str] {
        match self {
            LatticeClass::Hex6mm | LatticeClass::TransIso => &["15", "31", "33"],
            LatticeClass::HexBar6m2 => &["22"],
            LatticeClass::Trigonal3m => &["15", "22", "31", "33"],
            LatticeClass::Orth222 => &["14", "25", "36"],
            LatticeClass::Isotropic => &[],
        }
    }

    /// Suffixes of the diagonal second-order tensors (`eps..`, `mu..`, `alpha..`).
    fn diagonal_suffixes(self) -> &'static [&'static str] {
        match self {
            LatticeClass::Orth222 => &["11", "22", "33"],
            LatticeClass::Isotropic => &["11"],
            _ => &["11", "33"],
        }
    }
}

/// Named material with its symmetry class and constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialRecord {
    pub name: String,
    pub mode: Mode,
    pub lattice: LatticeClass,
    pub params: BTreeMap<String, f64>,
}

impl MaterialRecord {
    /// Parameter names that must be present for the lattice class and mode.
    ///
    /// Coupling constants (`e`, `q`, `alpha`) are optional and default to zero; the
    /// dielectric and magnetic constants are required for the fields the mode activates.
    pub fn required_params(&self) -> Vec<String> {
        let mut req: Vec<String> = self
            .lattice
            .elastic_params()
            .iter()
            .map(|s| s.to_string())
            .collect();
        let diag = self.lattice.diagonal_suffixes();
        if self.mode.electric() {
            req.extend(diag.iter().map(|s| format!("eps{s}")));
        }
        if self.mode.magnetic() {
            req.extend(diag.iter().map(|s| format!("mu{s}")));
        }
        req
    }

    /// Every parameter name meaningful for the lattice class.
    pub fn allowed_params(&self) -> Vec<String> {
        let mut all: Vec<String> = self
            .lattice
            .elastic_params()
            .iter()
            .map(|s| s.to_string())
            .collect();
        for p in ["e", "q"] {
            all.extend(self.lattice.piezo_suffixes().iter().map(|s| format!("{p}{s}")));
        }
        for p in ["eps", "mu", "alpha"] {
            all.extend(self.lattice.diagonal_suffixes().iter().map(|s| format!("{p}{s}")));
        }
        all
    }

    pub fn validate(&self) -> Result<()> {
        for p in self.required_params() {
            if !self.params.contains_key(&p) {
                return Err(Error::MissingParameter {
                    material: self.name.clone(),
                    param: p,
                });
            }
        }
        let allowed = self.allowed_params();
        for (k, v) in &self.params {
            if !allowed.contains(k) {
                return Err(Error::InvalidInput(format!(
                    "material `{}`: parameter `{k}` is not part of the {} template",
                    self.name,
                    self.lattice.name()
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "material `{}`: parameter `{k}` is not finite",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Checks that the record carries the constants a run in `run` needs: the
    /// dielectric constants when the electric field is active and the magnetic
    /// permeabilities when the magnetic field is active.
    pub fn check_run_mode(&self, run: Mode) -> Result<()> {
        self.validate()?;
        let diag = self.lattice.diagonal_suffixes();
        let mut needed = Vec::new();
        if run.electric() {
            needed.extend(diag.iter().map(|s| format!("eps{s}")));
        }
        if run.magnetic() {
            needed.extend(diag.iter().map(|s| format!("mu{s}")));
        }
        for p in needed {
            if !self.params.contains_key(&p) {
                return Err(Error::InvalidInput(format!(
                    "material `{}` ({}) cannot be used in a {} run: missing `{p}`",
                    self.name, self.mode, run
                )));
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> f64 {
        self.params.get(key).copied().unwrap_or(0.0)
    }
}

/// 12×12 symmetric generalized modulus (see the module docs for the block layout).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedModulus(pub Matrix12);

impl GeneralizedModulus {
    /// Assembles `G` from the physical tensors; `e`, `q` are 3×6 and `eps`, `alpha`, `mu` 3×3.
    pub fn from_blocks(
        c: &Matrix6<f64>,
        e: &Matrix3x6<f64>,
        q: &Matrix3x6<f64>,
        eps: &Matrix3<f64>,
        alpha: &Matrix3<f64>,
        mu: &Matrix3<f64>,
    ) -> GeneralizedModulus {
        let mut g = Matrix12::zeros();
        g.fixed_view_mut::<6, 6>(0, 0).copy_from(c);
        g.fixed_view_mut::<3, 6>(6, 0).copy_from(&(-e));
        g.fixed_view_mut::<6, 3>(0, 6).copy_from(&(-e.transpose()));
        g.fixed_view_mut::<3, 6>(9, 0).copy_from(&(-q));
        g.fixed_view_mut::<6, 3>(0, 9).copy_from(&(-q.transpose()));
        g.fixed_view_mut::<3, 3>(6, 6).copy_from(&(-eps));
        g.fixed_view_mut::<3, 3>(6, 9).copy_from(&(-alpha));
        g.fixed_view_mut::<3, 3>(9, 6).copy_from(&(-alpha.transpose()));
        g.fixed_view_mut::<3, 3>(9, 9).copy_from(&(-mu));
        GeneralizedModulus(g)
    }

    pub fn matrix(&self) -> &Matrix12 {
        &self.0
    }

    pub fn c(&self) -> Matrix6<f64> {
        self.0.fixed_view::<6, 6>(0, 0).into_owned()
    }

    pub fn e(&self) -> Matrix3x6<f64> {
        -self.0.fixed_view::<3, 6>(6, 0).into_owned()
    }

    pub fn q(&self) -> Matrix3x6<f64> {
        -self.0.fixed_view::<3, 6>(9, 0).into_owned()
    }

    pub fn eps(&self) -> Matrix3<f64> {
        -self.0.fixed_view::<3, 3>(6, 6).into_owned()
    }

    pub fn alpha(&self) -> Matrix3<f64> {
        -self.0.fixed_view::<3, 3>(6, 9).into_owned()
    }

    pub fn mu(&self) -> Matrix3<f64> {
        -self.0.fixed_view::<3, 3>(9, 9).into_owned()
    }

    /// Rows and columns of the components active in `mode`.
    pub fn reduced(&self, mode: Mode) -> DMatrix<f64> {
        let idx = mode.components();
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.0[(idx[i], idx[j])])
    }

    /// Largest `|G_ij − G_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.0.amax().max(f64::MIN_POSITIVE);
        (self.0 - self.0.transpose()).amax() / scale
    }

    pub fn scaled(&self, s: f64) -> GeneralizedModulus {
        GeneralizedModulus(self.0 * s)
    }
}

/// Grain-local modulus from a material record following its lattice template.
pub fn build_modulus(record: &MaterialRecord) -> Result<GeneralizedModulus> {
    record.validate()?;
    let p = |k: &str| record.get(k);
    let mut c = Matrix6::zeros();
    let mut e = Matrix3x6::zeros();
    let mut q = Matrix3x6::zeros();
    let diag = |prefix: &str| -> Matrix3<f64> {
        match record.lattice {
            LatticeClass::Orth222 => Matrix3::from_diagonal(&nalgebra::Vector3::new(
                p(&format!("{prefix}11")),
                p(&format!("{prefix}22")),
                p(&format!("{prefix}33")),
            )),
            LatticeClass::Isotropic => Matrix3::identity() * p(&format!("{prefix}11")),
            _ => Matrix3::from_diagonal(&nalgebra::Vector3::new(
                p(&format!("{prefix}11")),
                p(&format!("{prefix}11")),
                p(&format!("{prefix}33")),
            )),
        }
    };
    let eps = diag("eps");
    let mu = diag("mu");
    let alpha = diag("alpha");
    match record.lattice {
        LatticeClass::Hex6mm
        | LatticeClass::HexBar6m2
        | LatticeClass::Trigonal3m
        | LatticeClass::TransIso => {
            let (c11, c12, c13, c33, c44) = (p("C11"), p("C12"), p("C13"), p("C33"), p("C44"));
            c[(0, 0)] = c11;
            c[(1, 1)] = c11;
            c[(2, 2)] = c33;
            c[(0, 1)] = c12;
            c[(0, 2)] = c13;
            c[(1, 2)] = c13;
            c[(3, 3)] = c44;
            c[(4, 4)] = c44;
            c[(5, 5)] = 0.5 * (c11 - c12);
        }
        LatticeClass::Orth222 => {
            for (i, j, k) in [
                (0, 0, "C11"),
                (0, 1, "C12"),
                (0, 2, "C13"),
                (1, 1, "C22"),
                (1, 2, "C23"),
                (2, 2, "C33"),
                (3, 3, "C44"),
                (4, 4, "C55"),
                (5, 5, "C66"),
            ] {
                c[(i, j)] = p(k);
            }
        }
        LatticeClass::Isotropic => {
            let (l, g) = (p("lambda"), p("shear"));
            for i in 0..3 {
                for j in 0..3 {
                    c[(i, j)] = l;
                }
                c[(i, i)] = l + 2.0 * g;
                c[(i + 3, i + 3)] = g;
            }
        }
    }
    for i in 0..6 {
        for j in 0..i {
            c[(i, j)] = c[(j, i)];
        }
    }
    for (m, prefix) in [(&mut e, "e"), (&mut q, "q")] {
        let k = |s: &str| p(&format!("{prefix}{s}"));
        match record.lattice {
            LatticeClass::Hex6mm | LatticeClass::TransIso => {
                m[(0, 4)] = k("15");
                m[(1, 3)] = k("15");
                m[(2, 0)] = k("31");
                m[(2, 1)] = k("31");
                m[(2, 2)] = k("33");
            }
            LatticeClass::HexBar6m2 => {
                m[(0, 5)] = -k("22");
                m[(1, 0)] = -k("22");
                m[(1, 1)] = k("22");
            }
            LatticeClass::Trigonal3m => {
                m[(0, 4)] = k("15");
                m[(0, 5)] = -k("22");
                m[(1, 0)] = -k("22");
                m[(1, 1)] = k("22");
                m[(1, 3)] = k("15");
                m[(2, 0)] = k("31");
                m[(2, 1)] = k("31");
                m[(2, 2)] = k("33");
            }
            LatticeClass::Orth222 => {
                m[(0, 3)] = k("14");
                m[(1, 4)] = k("25");
                m[(2, 5)] = k("36");
            }
            LatticeClass::Isotropic => {}
        }
    }
    Ok(GeneralizedModulus::from_blocks(&c, &e, &q, &eps, &alpha, &mu))
}

/// True if the elastic block is positive definite (mechanically stable).
pub fn is_stable(g: &GeneralizedModulus) -> bool {
    g.c().cholesky().is_some()
}

/// Quadratic potential `ψ = ½ P·G·P`.
pub fn energy_quadratic(g: &DMatrix<f64>, p: &DVector<f64>) -> f64 {
    0.5 * p.dot(&(g * p))
}

/// Generalized flux `L = G·P`.
pub fn constitutive(g: &DMatrix<f64>, p: &DVector<f64>) -> DVector<f64> {
    g * p
}
