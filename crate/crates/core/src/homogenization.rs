//! Dirichlet load cases, volume averages and the effective modulus.
//!
//! Case `m` prescribes the linear field whose generalized gradient is the unit
//! vector `e_m`: `u = ε̄_m x` for `m ≤ 6` (tensor shears ½), `φ = −x_{m−7}` for
//! `m = 7..9` and `φ_m = −x_{m−10}` for `m = 10..12`, so that `E = −∇φ` and
//! `H = −∇φ_m` average to `+1` in slot `m`. Column `m` of `Ḡ` is the average flux
//! `⟨L⟩ = ⟨[σ, −D, −B]⟩` of case `m`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, ConditionReport, DofMap};
use crate::error::{Error, Result};
use crate::materials::Mode;
use crate::model::{Discretization, Method, Rve};
use crate::mesh::Point3;

/// Denominator offset of the relative Hill residual.
pub const HILL_EPS: f64 = 1e-300;

/// One of the 12 (or 9) unit macroscopic gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadCase {
    /// 1-based component number in the 12-component layout.
    pub m: usize,
    pub mode: Mode,
}

impl LoadCase {
    pub fn new(m: usize, mode: Mode) -> Result<LoadCase> {
        if !mode.cases().contains(&m) {
            return Err(Error::ModeMismatch {
                case: m,
                mode: mode.to_string(),
            });
        }
        Ok(LoadCase { m, mode })
    }

    /// All cases of `mode` in ascending order.
    pub fn all(mode: Mode) -> Vec<LoadCase> {
        mode.cases().into_iter().map(|m| LoadCase { m, mode }).collect()
    }

    /// Position of the case's component in the mode's reduced vectors.
    pub fn slot(&self) -> usize {
        self.mode
            .components()
            .iter()
            .position(|&c| c + 1 == self.m)
            .expect("validated case")
    }

    /// Prescribed nodal fields `[u1, u2, u3, (φ), (φm)]` at `x`.
    pub fn field(&self, x: &Point3) -> Vec<f64> {
        let nf = self.mode.fields_per_node();
        let mut v = vec![0.0; nf];
        match self.m {
            1..=3 => v[self.m - 1] = x[self.m - 1],
            4..=6 => {
                // γ_ij = 1 with ε_ij = ε_ji = ½.
                let (i, j) = [(1, 2), (0, 2), (0, 1)][self.m - 4];
                v[i] = 0.5 * x[j];
                v[j] = 0.5 * x[i];
            }
            7..=9 => v[3] = -x[self.m - 7],
            _ => v[if self.mode.electric() { 4 } else { 3 }] = -x[self.m - 10],
        }
        v
    }
}

/// Values of `case` at the boundary dofs of `dofs`, in `dofs.boundary_dofs()` order.
pub fn boundary_values(case: LoadCase, dofs: &DofMap, points: &[Point3]) -> Result<Vec<f64>> {
    if case.mode != dofs.mode() {
        return Err(Error::ModeMismatch {
            case: case.m,
            mode: dofs.mode().to_string(),
        });
    }
    Ok(dofs
        .boundary_dofs()
        .iter()
        .map(|&g| {
            let (node, f) = dofs.node_field(g);
            case.field(&points[node])[f]
        })
        .collect())
}

/// Volume averages of one solved state.
#[derive(Debug, Clone, PartialEq)]
pub struct Averages {
    pub gradient: DVector<f64>,
    pub flux: DVector<f64>,
    /// `⟨L·P⟩ = ⟨σ:ε⟩ − ⟨D·E⟩ − ⟨B·H⟩`.
    pub work: f64,
}

impl Averages {
    /// `|⟨L·P⟩ − ⟨L⟩·⟨P⟩| / (|⟨L⟩·⟨P⟩| + ε)`.
    pub fn hill_residual(&self) -> f64 {
        let macro_work = self.flux.dot(&self.gradient);
        (self.work - macro_work).abs() / (macro_work.abs() + HILL_EPS)
    }
}

/// `⟨P⟩`, `⟨L⟩` and `⟨L·P⟩` over the cube from node-major nodal values.
pub fn average_fields(disc: &Discretization, nodal: &[f64]) -> Averages {
    let nf = disc.mode.fields_per_node();
    let np = disc.mode.n_components();
    let volume = disc.edge_length.powi(3);
    let mut gradient = DVector::zeros(np);
    let mut flux = DVector::zeros(np);
    let mut work = 0.0;
    for e in &disc.elements {
        let p: Vec<f64> = e
            .nodes
            .iter()
            .flat_map(|&n| nodal[n * nf..(n + 1) * nf].iter().copied())
            .collect();
        let (ip, il, w) = e.integrate_fields(&p);
        gradient += ip;
        flux += il;
        work += w;
    }
    Averages {
        gradient: gradient / volume,
        flux: flux / volume,
        work: work / volume,
    }
}

/// Solved state of one load case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseResult {
    pub m: usize,
    pub mean_gradient: Vec<f64>,
    pub mean_flux: Vec<f64>,
    /// `⟨L⟩` from boundary reactions: `⟨L⟩_k = r_b · u_b^(k) / V`.
    pub surface_flux: Vec<f64>,
    pub mean_work: f64,
    pub hill_residual: f64,
    pub solver_residual: f64,
    pub solve_seconds: f64,
    #[serde(skip)]
    pub nodal: Vec<f64>,
}

/// Effective modulus and diagnostics of one discretized RVE.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomogenizationResult {
    pub mode: Mode,
    pub method: Method,
    /// 1-based components of the rows and columns of `effective`.
    pub components: Vec<usize>,
    /// Row-major `Ḡ`, present when all cases of the mode were solved.
    pub effective: Option<Vec<Vec<f64>>>,
    /// Largest `|Ḡ_ij − Ḡ_ji|` relative to the largest entry.
    pub asymmetry: Option<f64>,
    pub cases: Vec<CaseResult>,
    pub n_nodes: usize,
    pub n_elements: usize,
    pub n_dofs: usize,
    pub condition: ConditionReport,
    pub factor_seconds: f64,
    pub mesh_hash: String,
    pub materials: Vec<String>,
}

impl HomogenizationResult {
    pub fn effective_matrix(&self) -> Option<DMatrix<f64>> {
        self.effective.as_ref().map(|rows| {
            let n = rows.len();
            DMatrix::from_fn(n, n, |i, j| rows[i][j])
        })
    }

    pub fn max_hill_residual(&self) -> f64 {
        self.cases.iter().map(|c| c.hill_residual).fold(0.0, f64::max)
    }

    /// Flat CSV of `Ḡ`: `row,col,value` with 1-based components.
    pub fn effective_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        if let Some(rows) = &self.effective {
            for (i, r) in rows.iter().enumerate() {
                for (j, v) in r.iter().enumerate() {
                    out.push_str(&format!("{},{},{:e}\n", self.components[i], self.components[j], v));
                }
            }
        }
        out
    }
}

/// `Ḡ` from the solved cases: column `m` is `⟨L⟩` of case `m`.
pub fn effective_modulus(mode: Mode, cases: &[CaseResult]) -> Result<DMatrix<f64>> {
    let comps = mode.cases();
    let n = comps.len();
    let mut g = DMatrix::zeros(n, n);
    for (j, &m) in comps.iter().enumerate() {
        let c = cases
            .iter()
            .find(|c| c.m == m)
            .ok_or(Error::MissingCase(m))?;
        for i in 0..n {
            g[(i, j)] = c.mean_flux[i];
        }
    }
    Ok(g)
}

/// Relative asymmetry `max |Ḡ_ij − Ḡ_ji| / max |Ḡ_ij|`.
pub fn asymmetry(g: &DMatrix<f64>) -> f64 {
    let scale = g.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (g - g.transpose()).amax() / scale
}

/// Solves `cases` on a discretization with one shared factorization.
pub fn solve_cases(disc: &Discretization, cases: &[LoadCase]) -> Result<(Vec<CaseResult>, ConditionReport, f64)> {
    let mode = disc.mode;
    let dofs = DofMap::new(mode, &disc.boundary);
    let mut system = assemble(&disc.elements, &dofs, &disc.points)?;
    if !disc.deficient_cells.is_empty() {
        system.set_deficient_cells(disc.deficient_cells.clone());
    }
    let t0 = Instant::now();
    system.factorize()?;
    let factor_seconds = t0.elapsed().as_secs_f64();
    let volume = disc.edge_length.powi(3);

    let all = LoadCase::all(mode);
    let unit_boundary: Vec<Vec<f64>> = all
        .iter()
        .map(|&c| boundary_values(c, &dofs, &disc.points))
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(cases.len());
    for &case in cases {
        if case.mode != mode {
            return Err(Error::ModeMismatch {
                case: case.m,
                mode: mode.to_string(),
            });
        }
        let t = Instant::now();
        let ub = &unit_boundary[case.slot()];
        let sol = system.solve_dirichlet(ub)?;
        let solve_seconds = t.elapsed().as_secs_f64();
        let nodal = dofs.to_nodal(&sol.values);
        let avg = average_fields(disc, &nodal);
        let reactions = system.apply(&sol.values);
        let rb: Vec<f64> = dofs.boundary_dofs().iter().map(|&g| reactions[g]).collect();
        let surface_flux = unit_boundary
            .iter()
            .map(|uk| rb.iter().zip(uk).map(|(r, u)| r * u).sum::<f64>() / volume)
            .collect();
        out.push(CaseResult {
            m: case.m,
            hill_residual: avg.hill_residual(),
            mean_gradient: avg.gradient.iter().copied().collect(),
            mean_flux: avg.flux.iter().copied().collect(),
            surface_flux,
            mean_work: avg.work,
            solver_residual: sol.residual,
            solve_seconds,
            nodal,
        });
    }
    let report = system.condition_report().expect("factorized");
    Ok((out, report, factor_seconds))
}

/// Full homogenization of `rve` with `method` over all cases of its mode.
pub fn homogenize(rve: &Rve, method: Method, materials: &[String]) -> Result<HomogenizationResult> {
    homogenize_cases(rve, method, materials, &LoadCase::all(rve.mode))
}

/// Homogenization over a subset of cases; `effective` is set only when the subset is complete.
pub fn homogenize_cases(
    rve: &Rve,
    method: Method,
    materials: &[String],
    cases: &[LoadCase],
) -> Result<HomogenizationResult> {
    let disc = rve.discretize(method)?;
    let (results, condition, factor_seconds) = solve_cases(&disc, cases)?;
    let effective = effective_modulus(rve.mode, &results).ok();
    let mut names: Vec<String> = materials.to_vec();
    names.sort();
    names.dedup();
    Ok(HomogenizationResult {
        mode: rve.mode,
        method,
        components: rve.mode.cases(),
        asymmetry: effective.as_ref().map(asymmetry),
        effective: effective.map(|g| g.row_iter().map(|r| r.iter().copied().collect()).collect()),
        cases: results,
        n_nodes: disc.n_nodes(),
        n_elements: disc.elements.len(),
        n_dofs: disc.n_dofs(),
        condition,
        factor_seconds,
        mesh_hash: rve.mesh.hash(),
        materials: names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{build_modulus, builtin_library, rotate_modulus, EulerAngles, GeneralizedModulus, Matrix12};
    use crate::mesh::{generate_voronoi, PolyMesh, SeedSet};
    use crate::model::GrainAssignment;

    fn voronoi(n: usize, seed: u64) -> PolyMesh {
        generate_voronoi(&SeedSet::uniform(n, 1.0, seed), 1.0).unwrap()
    }

    #[test]
    fn case_fields() {
        let c = LoadCase::new(1, Mode::FullyCoupled).unwrap();
        assert_eq!(c.field(&Point3::new(1.0, 1.0, 1.0)), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let c = LoadCase::new(7, Mode::ElectroMechanical).unwrap();
        assert_eq!(c.field(&Point3::new(2.0, 1.0, 1.0)), vec![0.0, 0.0, 0.0, -2.0]);
        let c = LoadCase::new(12, Mode::MagnetoMechanical).unwrap();
        assert_eq!(c.field(&Point3::new(2.0, 1.0, 3.0)), vec![0.0, 0.0, 0.0, -3.0]);
        assert_eq!(c.slot(), 8);
        assert!(matches!(
            LoadCase::new(8, Mode::MagnetoMechanical),
            Err(Error::ModeMismatch { case: 8, .. })
        ));
    }

    #[test]
    fn zero_state_has_zero_averages() {
        let rve = Rve::new(voronoi(3, 1), &GrainAssignment::uniform("BaTiO3", 3), &builtin_library(), Mode::ElectroMechanical).unwrap();
        let d = rve.discretize(Method::Vem { beta: 0.2 }).unwrap();
        let avg = average_fields(&d, &vec![0.0; d.n_dofs()]);
        assert_eq!(avg.gradient.amax(), 0.0);
        assert_eq!(avg.flux.amax(), 0.0);
        assert_eq!(avg.work, 0.0);
    }

    fn hybrid(n: usize, seed: u64) -> (Rve, Vec<String>) {
        let mesh = voronoi(n, seed);
        let materials: Vec<String> = (0..n)
            .map(|i| if i % 2 == 0 { "BaTiO3" } else { "CoFe2O4" }.to_string())
            .collect();
        let angles = (0..n)
            .map(|i| EulerAngles::new(0.7 * i as f64, 1.3 + 0.1 * i as f64, 2.1 * i as f64))
            .collect();
        let grains = GrainAssignment {
            materials: materials.clone(),
            angles,
        };
        (Rve::new(mesh, &grains, &builtin_library(), Mode::FullyCoupled).unwrap(), materials)
    }

    #[test]
    fn average_theorem_and_surface_cross_check() {
        let (rve, names) = hybrid(10, 3);
        for method in [Method::Vem { beta: 0.1 }, Method::FemO1, Method::FemO2] {
            let r = homogenize(&rve, method, &names).unwrap();
            for c in &r.cases {
                let slot = LoadCase::new(c.m, Mode::FullyCoupled).unwrap().slot();
                for (i, v) in c.mean_gradient.iter().enumerate() {
                    let target = if i == slot { 1.0 } else { 0.0 };
                    assert!((v - target).abs() < 1e-10, "{method} case {} slot {i}: {v}", c.m);
                }
                let scale = c.mean_flux.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (a, b) in c.mean_flux.iter().zip(&c.surface_flux) {
                    assert!((a - b).abs() < 1e-10 * scale, "{method}: {a} vs {b}");
                }
                assert!(c.hill_residual < 1e-9);
            }
        }
    }

    #[test]
    fn single_grain_recovers_the_rotated_modulus() {
        let lib = builtin_library();
        let a = EulerAngles::new(0.4, 1.1, -0.8);
        let grains = GrainAssignment {
            materials: vec!["BaTiO3".into()],
            angles: vec![a],
        };
        let rve = Rve::new(voronoi(1, 0), &grains, &lib, Mode::FullyCoupled).unwrap();
        let exact = rotate_modulus(&build_modulus(lib.get("BaTiO3").unwrap()).unwrap(), &a);
        for method in [Method::Vem { beta: 0.3 }, Method::FemO1, Method::FemO2] {
            let g = homogenize(&rve, method, &grains.materials).unwrap().effective_matrix().unwrap();
            let diff = (&g - exact.reduced(Mode::FullyCoupled)).norm() / exact.0.norm();
            assert!(diff < 1e-8, "{method}: {diff}");
        }
    }

    #[test]
    fn linear_in_the_moduli() {
        let (rve, names) = hybrid(4, 8);
        let g1 = homogenize(&rve, Method::Vem { beta: 0.2 }, &names).unwrap().effective_matrix().unwrap();
        let g3 = homogenize(&rve.scaled(3.0), Method::Vem { beta: 0.2 }, &names).unwrap().effective_matrix().unwrap();
        assert!((g3 - &g1 * 3.0).norm() <= 1e-12 * g1.norm() * 3.0);
    }

    #[test]
    fn effective_modulus_needs_every_case() {
        let (rve, names) = hybrid(2, 1);
        let r = homogenize_cases(
            &rve,
            Method::FemO1,
            &names,
            &[LoadCase::new(1, Mode::FullyCoupled).unwrap()],
        )
        .unwrap();
        assert!(r.effective.is_none());
        assert!(matches!(
            effective_modulus(Mode::FullyCoupled, &r.cases),
            Err(Error::MissingCase(2))
        ));
    }

    #[test]
    fn hybrid_composite_has_both_couplings() {
        let (rve, names) = hybrid(6, 2);
        let r = homogenize(&rve, Method::Vem { beta: 0.1 }, &names).unwrap();
        let g = r.effective_matrix().unwrap();
        let mut full = Matrix12::zeros();
        full.copy_from(&g);
        let gm = GeneralizedModulus(full);
        assert!(gm.e().amax() > 1e-3);
        assert!(gm.q().amax() > 1e-3);
        assert!(r.asymmetry.unwrap() < 1e-8);
    }

    #[test]
    fn result_serializes() {
        let (rve, names) = hybrid(2, 4);
        let r = homogenize(&rve, Method::FemO1, &names).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"effective\""));
        assert!(r.effective_csv().lines().count() == 1 + 144);
    }
}
