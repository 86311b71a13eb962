//! Computational homogenization of electro-magneto-mechanical polycrystals with a
//! first-order virtual element method on one-element-per-grain meshes, plus linear
//! and quadratic tetrahedral finite element baselines.
//!
//! ```
//! use vemhom::{builtin_library, generate_voronoi, homogenize, GrainAssignment, Method, Mode, Rve, SeedSet};
//!
//! # fn main() -> vemhom::Result<()> {
//! let mesh = generate_voronoi(&SeedSet::uniform(20, 1.0, 7), 1.0)?;
//! let grains = GrainAssignment::uniform("BaTiO3", mesh.n_cells());
//! let rve = Rve::new(mesh, &grains, &builtin_library(), Mode::ElectroMechanical)?;
//! let result = homogenize(&rve, Method::Vem { beta: 0.1 }, &grains.materials)?;
//! assert_eq!(result.effective_matrix().unwrap().nrows(), 9);
//! # Ok(())
//! # }
//! ```

pub mod assembly;
pub mod element;
pub mod error;
pub mod fem;
pub mod homogenization;
pub mod materials;
pub mod mesh;
pub mod model;
pub mod study;
pub mod vem;

pub use assembly::{ConditionReport, SparseSystem};
pub use error::{Error, Result};
pub use homogenization::{homogenize, homogenize_cases, HomogenizationResult, LoadCase};
pub use materials::{
    build_modulus, builtin_library, rotate_modulus, EulerAngles, GeneralizedModulus, MaterialLibrary,
    MaterialRecord, Mode,
};
pub use mesh::{generate_voronoi, parse_tess, read_native, write_native, Point3, PolyMesh, SeedSet, TetMesh};
pub use model::{Discretization, GrainAssignment, Method, Rve};
pub use study::{computational_error, frobenius, relative_deviation, Target};
