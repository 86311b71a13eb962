//! Error metrics, stabilization sweeps, hybrid volume-fraction sweeps and
//! refined reference solutions.

use std::collections::HashMap;
use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::homogenization::{homogenize, HomogenizationResult};
use crate::materials::{EulerAngles, MaterialLibrary, Mode};
use crate::mesh::{PolyMesh, TetMesh};
use crate::model::{GrainAssignment, Method, Rve};

/// Piezoelectric phase of the hybrid composite.
pub const ELECTRIC_PHASE: &str = "BaTiO3";
/// Piezomagnetic phase of the hybrid composite; its volume fraction is swept.
pub const MAGNETIC_PHASE: &str = "CoFe2O4";

/// Sub-block of an effective modulus compared in a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    /// The whole generalized modulus.
    #[serde(rename = "G")]
    G,
    /// Elastic block.
    #[serde(rename = "C")]
    C,
    /// Piezoelectric block.
    #[serde(rename = "e")]
    E,
    /// Dielectric block.
    #[serde(rename = "eps")]
    Eps,
    /// Piezomagnetic block.
    #[serde(rename = "q")]
    Q,
    /// Magnetic permeability block.
    #[serde(rename = "mu")]
    Mu,
}

impl Target {
    pub const ALL: [Target; 6] = [Target::G, Target::C, Target::E, Target::Eps, Target::Q, Target::Mu];

    pub fn name(self) -> &'static str {
        match self {
            Target::G => "G",
            Target::C => "C",
            Target::E => "e",
            Target::Eps => "eps",
            Target::Q => "q",
            Target::Mu => "mu",
        }
    }

    /// Row and column ranges in the 12-component layout.
    fn blocks(self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        match self {
            Target::G => (0..12, 0..12),
            Target::C => (0..6, 0..6),
            Target::E => (6..9, 0..6),
            Target::Eps => (6..9, 6..9),
            Target::Q => (9..12, 0..6),
            Target::Mu => (9..12, 9..12),
        }
    }

    pub fn available(self, mode: Mode) -> bool {
        match self {
            Target::E | Target::Eps => mode.electric(),
            Target::Q | Target::Mu => mode.magnetic(),
            _ => true,
        }
    }

    /// The block of a mode-reduced modulus, if the mode has it.
    pub fn extract(self, g: &DMatrix<f64>, mode: Mode) -> Option<DMatrix<f64>> {
        if !self.available(mode) {
            return None;
        }
        let comps = mode.components();
        let (rows, cols) = self.blocks();
        let ri: Vec<usize> = (0..comps.len()).filter(|&i| rows.contains(&comps[i])).collect();
        let ci: Vec<usize> = (0..comps.len()).filter(|&i| cols.contains(&comps[i])).collect();
        Some(DMatrix::from_fn(ri.len(), ci.len(), |a, b| g[(ri[a], ci[b])]))
    }
}

/// `√(Σ M_ij²)`.
pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn reference_norm(m_ref: &DMatrix<f64>) -> Result<f64> {
    let r = frobenius(m_ref);
    if r == 0.0 {
        return Err(Error::InvalidInput("reference modulus has zero norm".into()));
    }
    Ok(r)
}

/// Signed percent deviation `10²(‖M‖ − ‖M_ref‖)/‖M_ref‖`.
pub fn relative_deviation(m: &DMatrix<f64>, m_ref: &DMatrix<f64>) -> Result<f64> {
    if m.shape() != m_ref.shape() {
        return Err(Error::InvalidInput("moduli of different shape".into()));
    }
    let r = reference_norm(m_ref)?;
    Ok(100.0 * (frobenius(m) - r) / r)
}

/// Percent error `|‖M‖/‖M_ref‖ − 1|·10²`.
pub fn computational_error(m: &DMatrix<f64>, m_ref: &DMatrix<f64>) -> Result<f64> {
    Ok(relative_deviation(m, m_ref)?.abs())
}

/// `k·step` for `k = 1..` up to 1, rounded to 12 decimals.
pub fn beta_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step + 1e-9).floor() as usize;
    (1..=n).map(|k| round12(k as f64 * step)).collect()
}

/// Cell centres `(k + ½)·step` inside `[0, 1]`.
pub fn fraction_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step + 1e-9).floor() as usize;
    (0..n).map(|k| round12((k as f64 + 0.5) * step)).collect()
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Deviation of one method from the reference for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub nodes: usize,
    pub dofs: usize,
    pub target: Target,
    pub e_c: f64,
    pub d_rel: f64,
    /// Wall time of the run; not written to CSV so that outputs are reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

/// Rows for each target of one homogenization result against a reference.
pub fn compare(result: &HomogenizationResult, reference: &DMatrix<f64>, targets: &[Target], seconds: f64) -> Result<Vec<ComparisonRow>> {
    let g = result
        .effective_matrix()
        .ok_or_else(|| Error::InvalidInput("result without an effective modulus".into()))?;
    let mut rows = Vec::new();
    for &t in targets {
        let (Some(m), Some(r)) = (t.extract(&g, result.mode), t.extract(reference, result.mode)) else {
            continue;
        };
        let d_rel = relative_deviation(&m, &r)?;
        rows.push(ComparisonRow {
            method: result.method.label(),
            nodes: result.n_nodes,
            dofs: result.n_dofs,
            target: t,
            e_c: d_rel.abs(),
            d_rel,
            seconds,
        });
    }
    Ok(rows)
}

/// Homogenizes with every method and compares each with the reference.
pub fn method_comparison(
    rve: &Rve,
    materials: &[String],
    methods: &[Method],
    reference: &DMatrix<f64>,
    targets: &[Target],
) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for &method in methods {
        let t = std::time::Instant::now();
        let r = homogenize(rve, method, materials)?;
        rows.extend(compare(&r, reference, targets, t.elapsed().as_secs_f64())?);
    }
    Ok(rows)
}

/// One point of a `β` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub beta: f64,
    pub target: Target,
    pub d_rel: f64,
    pub e_c: f64,
}

/// `D_rel(β)` and `E_C(β)` of the virtual element method for every target.
pub fn beta_sweep(
    rve: &Rve,
    materials: &[String],
    betas: &[f64],
    reference: &DMatrix<f64>,
    targets: &[Target],
) -> Result<Vec<SweepPoint>> {
    if let Some(b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(Error::InvalidInput(format!("β = {b} is outside [0, 1]")));
    }
    let per_beta: Vec<Vec<ComparisonRow>> = betas
        .par_iter()
        .map(|&beta| {
            let r = homogenize(rve, Method::Vem { beta }, materials)?;
            compare(&r, reference, targets, 0.0)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for &t in targets {
        for (&beta, rows) in betas.iter().zip(&per_beta) {
            if let Some(r) = rows.iter().find(|r| r.target == t) {
                out.push(SweepPoint {
                    beta,
                    target: t,
                    d_rel: r.d_rel,
                    e_c: r.e_c,
                });
            }
        }
    }
    Ok(out)
}

/// `β` with the smallest `E_C` for `target`; ties go to the smaller `β`.
pub fn beta_opt(points: &[SweepPoint], target: Target) -> Option<(f64, f64)> {
    points
        .iter()
        .filter(|p| p.target == target)
        .fold(None, |best: Option<(f64, f64)>, p| match best {
            Some((b, e)) if e < p.e_c || (e == p.e_c && b <= p.beta) => Some((b, e)),
            _ => Some((p.beta, p.e_c)),
        })
}

/// Independent uniform angles in `[0, 2π)` for `n` grains.
pub fn random_orientations(n: usize, seed: u64) -> Vec<EulerAngles> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let two_pi = std::f64::consts::TAU;
    (0..n)
        .map(|_| {
            EulerAngles::new(
                rng.random_range(0.0..two_pi),
                rng.random_range(0.0..two_pi),
                rng.random_range(0.0..two_pi),
            )
        })
        .collect()
}

/// Hybrid grain assignment for a requested magnetic-phase volume fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionAssignment {
    pub grains: GrainAssignment,
    pub requested: f64,
    pub achieved: f64,
    pub n_magnetic: usize,
}

/// Shuffles the grains with `seed` and assigns the magnetic phase until its
/// volume reaches `fraction·L³`; the rest is the electric phase. Orientations come
/// from an independent stream of the same seed.
pub fn assign_volume_fraction(mesh: &PolyMesh, fraction: f64, seed: u64) -> Result<FractionAssignment> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!("volume fraction {fraction} is outside [0, 1]")));
    }
    let n = mesh.n_cells();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let total = mesh.cube_volume();
    let target = fraction * total;
    let mut materials = vec![ELECTRIC_PHASE.to_string(); n];
    let mut volume = 0.0;
    let mut n_magnetic = 0;
    for &c in &order {
        if volume >= target - 1e-12 * total {
            break;
        }
        materials[c] = MAGNETIC_PHASE.to_string();
        volume += mesh.cells[c].volume;
        n_magnetic += 1;
    }
    Ok(FractionAssignment {
        grains: GrainAssignment {
            materials,
            angles: random_orientations(n, seed),
        },
        requested: fraction,
        achieved: volume / total,
        n_magnetic,
    })
}

/// Settings of the refined reference solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptions {
    pub levels: usize,
    /// Largest admissible number of dofs.
    pub max_dofs: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            levels: 2,
            max_dofs: 150_000,
            cache_dir: None,
        }
    }
}

/// Exact node count of a tet mesh after `levels` red refinements.
pub fn refined_node_count(tets: &TetMesh, levels: usize) -> usize {
    let mut edges = std::collections::HashSet::new();
    let mut faces = std::collections::HashSet::new();
    for t in &tets.tets {
        for a in 0..4 {
            for b in a + 1..4 {
                edges.insert((t[a].min(t[b]), t[a].max(t[b])));
            }
            let mut f = [t[(a + 1) % 4], t[(a + 2) % 4], t[(a + 3) % 4]];
            f.sort_unstable();
            faces.insert(f);
        }
    }
    let (mut v, mut e, mut f, mut t) = (tets.n_points(), edges.len(), faces.len(), tets.tets.len());
    for _ in 0..levels {
        v += e;
        e = 2 * e + 3 * f + t;
        f = 4 * f + 8 * t;
        t *= 8;
    }
    v
}

/// Cache key of a reference: mesh, moduli, mode and refinement level.
pub fn reference_key(rve: &Rve, levels: usize) -> String {
    let mut h = Sha256::new();
    h.update(b"vemhom-reference 1\n");
    h.update(rve.mesh.hash().as_bytes());
    h.update(rve.mode.name().as_bytes());
    h.update(levels.to_le_bytes());
    for g in &rve.moduli {
        for v in g.0.iter() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// FEM-O1 on the uniformly refined triangulation; cached by [`reference_key`].
pub fn build_reference(rve: &Rve, materials: &[String], opts: &ReferenceOptions) -> Result<HomogenizationResult> {
    if opts.levels == 0 {
        return Err(Error::InvalidInput("reference needs at least one refinement level".into()));
    }
    let dofs = refined_node_count(&rve.tets, opts.levels) * rve.mode.fields_per_node();
    if dofs > opts.max_dofs {
        return Err(Error::MemoryGuard(format!(
            "refinement level {} needs {dofs} dofs, above the limit of {}; lower the level",
            opts.levels, opts.max_dofs
        )));
    }
    let path = opts
        .cache_dir
        .as_ref()
        .map(|d| d.join(format!("reference-{}.json", &reference_key(rve, opts.levels)[..24])));
    if let Some(p) = &path {
        if let Ok(text) = std::fs::read_to_string(p) {
            if let Ok(r) = serde_json::from_str::<HomogenizationResult>(&text) {
                return Ok(r);
            }
        }
    }
    let r = homogenize(rve, Method::FemO1Refined { levels: opts.levels }, materials)?;
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let json = serde_json::to_string(&r).map_err(|e| Error::InvalidInput(e.to_string()))?;
        std::fs::write(p, json)?;
    }
    Ok(r)
}

/// One row of the hybrid volume-fraction sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionRow {
    pub requested: f64,
    pub achieved: f64,
    pub n_magnetic: usize,
    pub target: Target,
    pub beta_opt: f64,
    pub e_c_opt: f64,
    /// Values at the default stabilization weight.
    pub e_c_default: f64,
    pub d_rel_default: f64,
}

/// Hybrid sweep: for every fraction, build the assignment, the reference and a `β`
/// sweep; report `β_opt` and the error at `default_beta`.
#[allow(clippy::too_many_arguments)]
pub fn fraction_sweep(
    mesh: &PolyMesh,
    library: &MaterialLibrary,
    fractions: &[f64],
    seed: u64,
    betas: &[f64],
    default_beta: f64,
    targets: &[Target],
    reference: &ReferenceOptions,
) -> Result<Vec<FractionRow>> {
    let mut betas: Vec<f64> = betas.to_vec();
    if !betas.contains(&default_beta) {
        betas.push(default_beta);
    }
    let mut rows = Vec::new();
    for &p in fractions {
        let fa = assign_volume_fraction(mesh, p, seed)?;
        let rve = Rve::new(mesh.clone(), &fa.grains, library, Mode::FullyCoupled)?;
        let refr = build_reference(&rve, &fa.grains.materials, reference)?;
        let g_ref = refr.effective_matrix().expect("all cases solved");
        let points = beta_sweep(&rve, &fa.grains.materials, &betas, &g_ref, targets)?;
        let at_default: HashMap<Target, &SweepPoint> = points
            .iter()
            .filter(|q| q.beta == default_beta)
            .map(|q| (q.target, q))
            .collect();
        for &t in targets {
            let (Some((b, e)), Some(d)) = (beta_opt(&points, t), at_default.get(&t)) else {
                continue;
            };
            rows.push(FractionRow {
                requested: p,
                achieved: fa.achieved,
                n_magnetic: fa.n_magnetic,
                target: t,
                beta_opt: b,
                e_c_opt: e,
                e_c_default: d.e_c,
                d_rel_default: d.d_rel,
            });
        }
    }
    Ok(rows)
}

/// `method,nodes,dofs,target,e_c,d_rel`.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("method,nodes,dofs,target,e_c,d_rel\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:e},{:e}\n",
            r.method,
            r.nodes,
            r.dofs,
            r.target.name(),
            r.e_c,
            r.d_rel
        ));
    }
    s
}

/// `method,target,beta,d_rel,e_c`.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("method,target,beta,d_rel,e_c\n");
    for p in points {
        s.push_str(&format!(
            "VEM-VO,{},{},{:e},{:e}\n",
            p.target.name(),
            p.beta,
            p.d_rel,
            p.e_c
        ));
    }
    s
}

/// `requested,achieved,n_magnetic,target,beta_opt,e_c_opt,e_c_default,d_rel_default`.
pub fn fraction_csv(rows: &[FractionRow]) -> String {
    let mut s = String::from("requested,achieved,n_magnetic,target,beta_opt,e_c_opt,e_c_default,d_rel_default\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:e},{},{},{},{:e},{:e},{:e}\n",
            r.requested,
            r.achieved,
            r.n_magnetic,
            r.target.name(),
            r.beta_opt,
            r.e_c_opt,
            r.e_c_default,
            r.d_rel_default
        ));
    }
    s
}

/// Machine-readable record of how an output was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub mesh_hash: Option<String>,
    pub seeds: Vec<u64>,
    pub tolerances: Tolerances,
}

/// Numerical tolerances in force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub merge_relative: f64,
    pub plane_relative: f64,
    pub box_relative: f64,
    pub symmetry: f64,
    pub pivot: f64,
    pub residual: f64,
}

impl Provenance {
    pub fn new(config_hash: &str, mesh_hash: Option<String>, seeds: Vec<u64>) -> Provenance {
        let t = crate::mesh::Tolerances::RELATIVE;
        Provenance {
            tool: "vemhom".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash.into(),
            mesh_hash,
            seeds,
            tolerances: Tolerances {
                merge_relative: t.merge,
                plane_relative: t.plane,
                box_relative: t.bbox,
                symmetry: crate::assembly::SYMMETRY_TOL,
                pivot: crate::assembly::PIVOT_TOL,
                residual: crate::assembly::RESIDUAL_TOL,
            },
        }
    }
}

/// Hex sha256 of arbitrary text (used for configuration hashes).
pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::builtin_library;
    use crate::mesh::{generate_voronoi, SeedSet};
    use proptest::prelude::*;

    #[test]
    fn frobenius_examples() {
        assert_eq!(frobenius(&DMatrix::zeros(3, 3)), 0.0);
        assert!((frobenius(&DMatrix::identity(3, 3)) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn error_examples() {
        let r = DMatrix::from_element(2, 2, 1.0);
        assert_eq!(computational_error(&r, &r).unwrap(), 0.0);
        assert_eq!(relative_deviation(&r, &r).unwrap(), 0.0);
        let m = &r * 1.05;
        assert!((computational_error(&m, &r).unwrap() - 5.0).abs() < 1e-12);
        assert!((relative_deviation(&m, &r).unwrap() - 5.0).abs() < 1e-12);
        assert!(computational_error(&m, &DMatrix::zeros(2, 2)).is_err());
    }

    proptest! {
        #[test]
        fn frobenius_matches_elementwise(v in proptest::collection::vec(-10.0f64..10.0, 12)) {
            let m = DMatrix::from_row_slice(3, 4, &v);
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..4 {
                    acc += m[(i, j)] * m[(i, j)];
                }
            }
            prop_assert!((frobenius(&m) - acc.sqrt()).abs() <= 1e-14 * acc.sqrt().max(1.0));
        }

        #[test]
        fn error_is_absolute_deviation(
            a in proptest::collection::vec(-10.0f64..10.0, 9),
            b in proptest::collection::vec(0.5f64..10.0, 9),
        ) {
            let m = DMatrix::from_row_slice(3, 3, &a);
            let r = DMatrix::from_row_slice(3, 3, &b);
            let e = computational_error(&m, &r).unwrap();
            let d = relative_deviation(&m, &r).unwrap();
            let direct = ((frobenius(&m) / frobenius(&r)) - 1.0).abs() * 100.0;
            prop_assert!((e - direct).abs() <= 1e-12 * direct.max(1.0));
            prop_assert_eq!(e, d.abs());
            prop_assert!(e >= 0.0);
        }
    }

    #[test]
    fn grids() {
        let b = beta_grid(0.05);
        assert_eq!(b.len(), 20);
        assert_eq!(b[0], 0.05);
        assert_eq!(b[2], 0.15);
        assert_eq!(b[19], 1.0);
        let f = fraction_grid(0.1);
        assert_eq!(f.len(), 10);
        assert_eq!(f[0], 0.05);
        assert_eq!(f[1], 0.15);
        assert_eq!(f[9], 0.95);
    }

    #[test]
    fn beta_opt_prefers_smaller_beta_on_ties() {
        let pts: Vec<SweepPoint> = [(0.1, 2.0), (0.2, 1.0), (0.3, 1.0), (0.4, 3.0)]
            .iter()
            .map(|&(beta, e)| SweepPoint {
                beta,
                target: Target::C,
                d_rel: -e,
                e_c: e,
            })
            .collect();
        assert_eq!(beta_opt(&pts, Target::C), Some((0.2, 1.0)));
        assert_eq!(beta_opt(&pts, Target::E), None);
    }

    #[test]
    fn target_blocks() {
        let g = DMatrix::from_fn(9, 9, |i, j| (10 * i + j) as f64);
        let e = Target::E.extract(&g, Mode::ElectroMechanical).unwrap();
        assert_eq!(e.shape(), (3, 6));
        assert_eq!(e[(0, 0)], 60.0);
        assert!(Target::Q.extract(&g, Mode::ElectroMechanical).is_none());
        let g12 = DMatrix::from_fn(9, 9, |i, j| (10 * i + j) as f64);
        let mu = Target::Mu.extract(&g12, Mode::MagnetoMechanical).unwrap();
        assert_eq!(mu[(0, 0)], 66.0);
    }

    fn grid_mesh(nx: usize, ny: usize, nz: usize) -> PolyMesh {
        let mut pts = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    pts.push(crate::mesh::Point3::new(
                        (i as f64 + 0.5) / nx as f64,
                        (j as f64 + 0.5) / ny as f64,
                        (k as f64 + 0.5) / nz as f64,
                    ));
                }
            }
        }
        generate_voronoi(&SeedSet::from_points(pts), 1.0).unwrap()
    }

    #[test]
    fn volume_fraction_counts() {
        let mesh = grid_mesh(5, 5, 4);
        let none = assign_volume_fraction(&mesh, 0.0, 1).unwrap();
        assert!(none.grains.materials.iter().all(|m| m == ELECTRIC_PHASE));
        let all = assign_volume_fraction(&mesh, 1.0, 1).unwrap();
        assert!(all.grains.materials.iter().all(|m| m == MAGNETIC_PHASE));
        let half = assign_volume_fraction(&mesh, 0.5, 1).unwrap();
        assert_eq!(half.n_magnetic, 50);
        assert_eq!(
            half.grains.materials.iter().filter(|m| *m == ELECTRIC_PHASE).count(),
            50
        );
        assert!(assign_volume_fraction(&mesh, 1.5, 1).is_err());
    }

    #[test]
    fn achieved_fraction_is_within_one_grain() {
        let mesh = generate_voronoi(&SeedSet::uniform(20, 1.0, 4), 1.0).unwrap();
        let vmax = mesh.cells.iter().map(|c| c.volume).fold(0.0, f64::max);
        for p in fraction_grid(0.1) {
            let fa = assign_volume_fraction(&mesh, p, 9).unwrap();
            assert!((fa.achieved - p).abs() <= vmax + 1e-12);
        }
        let a = assign_volume_fraction(&mesh, 0.35, 9).unwrap();
        let b = assign_volume_fraction(&mesh, 0.35, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn refined_node_count_is_exact() {
        let mesh = generate_voronoi(&SeedSet::uniform(3, 1.0, 2), 1.0).unwrap();
        let tm = TetMesh::from_polymesh(&mesh).unwrap();
        for levels in 0..3 {
            assert_eq!(refined_node_count(&tm, levels), tm.refine(levels).n_points());
        }
    }

    #[test]
    fn homogeneous_sweep_is_exact() {
        let mesh = generate_voronoi(&SeedSet::uniform(4, 1.0, 3), 1.0).unwrap();
        let lib = builtin_library();
        let grains = GrainAssignment::uniform("BaTiO3", 4);
        let rve = Rve::new(mesh, &grains, &lib, Mode::ElectroMechanical).unwrap();
        let exact = crate::materials::build_modulus(lib.get("BaTiO3").unwrap())
            .unwrap()
            .reduced(Mode::ElectroMechanical);
        let pts = beta_sweep(&rve, &grains.materials, &[0.1, 0.5, 1.0], &exact, &[Target::G, Target::C]).unwrap();
        assert_eq!(pts.len(), 6);
        assert!(pts.iter().all(|p| p.e_c < 1e-8));
    }

    #[test]
    fn reference_guard_and_cache() {
        let mesh = generate_voronoi(&SeedSet::uniform(2, 1.0, 3), 1.0).unwrap();
        let lib = builtin_library();
        let grains = GrainAssignment::uniform("BaTiO3", 2);
        let rve = Rve::new(mesh, &grains, &lib, Mode::ElectroMechanical).unwrap();
        let guard = ReferenceOptions {
            levels: 3,
            max_dofs: 100,
            cache_dir: None,
        };
        assert!(matches!(
            build_reference(&rve, &grains.materials, &guard),
            Err(Error::MemoryGuard(_))
        ));
        let dir = std::env::temp_dir().join(format!("vemhom-cache-{}", std::process::id()));
        let opts = ReferenceOptions {
            levels: 1,
            max_dofs: 1_000_000,
            cache_dir: Some(dir.clone()),
        };
        let first = build_reference(&rve, &grains.materials, &opts).unwrap();
        let second = build_reference(&rve, &grains.materials, &opts).unwrap();
        assert_eq!(first.effective, second.effective);
        assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 1);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn orientation_streams_are_independent_of_shuffling() {
        let a = random_orientations(5, 42);
        assert_eq!(a, random_orientations(5, 42));
        assert_ne!(a, random_orientations(5, 43));
        assert!(a.iter().all(|e| (0.0..std::f64::consts::TAU).contains(&e.theta1)));
    }
}
