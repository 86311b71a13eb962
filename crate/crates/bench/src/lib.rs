//! Shared fixtures for the benchmarks.

use vemhom::study::random_orientations;
use vemhom::{builtin_library, generate_voronoi, GrainAssignment, Mode, PolyMesh, Rve, SeedSet};

pub fn voronoi(grains: usize, seed: u64) -> PolyMesh {
    generate_voronoi(&SeedSet::uniform(grains, 1.0, seed), 1.0).expect("voronoi mesh")
}

/// Randomly oriented single-phase polycrystal and its per-grain material names.
pub fn polycrystal(grains: usize, seed: u64, material: &str, mode: Mode) -> (Rve, Vec<String>) {
    let mesh = voronoi(grains, seed);
    let assignment = GrainAssignment {
        materials: vec![material.to_string(); grains],
        angles: random_orientations(grains, seed),
    };
    let rve = Rve::new(mesh, &assignment, &builtin_library(), mode).expect("rve");
    (rve, assignment.materials)
}
