//! Run configuration (TOML). See `examples/` in this crate for annotated files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use vemhom::materials::Mode;
use vemhom::model::Method;
use vemhom::study::Target;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub materials: MaterialsConfig,
    #[serde(default)]
    pub homogenize: HomogenizeConfig,
    #[serde(default)]
    pub study: StudyConfig,
}

/// Either a mesh file or a Voronoi generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// `.tess` or native mesh file.
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// Number of grains to generate.
    #[serde(default)]
    pub grains: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_edge")]
    pub edge_length: f64,
    #[serde(default)]
    pub lloyd_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsConfig {
    /// Material library; the builtin one when absent.
    #[serde(default)]
    pub library: Option<PathBuf>,
    /// Material of every grain unless `grains` is given.
    #[serde(default = "default_material")]
    pub material: String,
    /// Per-grain material names.
    #[serde(default)]
    pub grains: Option<Vec<String>>,
    /// Per-grain Euler angles in radians.
    #[serde(default)]
    pub angles: Option<Vec<[f64; 3]>>,
    /// Random orientations from this seed when `angles` is absent.
    #[serde(default)]
    pub orientation_seed: Option<u64>,
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        MaterialsConfig {
            library: None,
            material: default_material(),
            grains: None,
            angles: None,
            orientation_seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Vem,
    FemO1,
    FemO2,
    FemO1Refined,
}

impl MethodKind {
    pub fn with(self, beta: f64, levels: usize) -> Method {
        match self {
            MethodKind::Vem => Method::Vem { beta },
            MethodKind::FemO1 => Method::FemO1,
            MethodKind::FemO2 => Method::FemO2,
            MethodKind::FemO1Refined => Method::FemO1Refined { levels },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogenizeConfig {
    #[serde(default = "default_method")]
    pub method: MethodKind,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Refinement levels of `fem-o1-refined`.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// 1-based load cases; all cases of the mode when absent.
    #[serde(default)]
    pub cases: Option<Vec<usize>>,
}

impl Default for HomogenizeConfig {
    fn default() -> Self {
        HomogenizeConfig {
            method: default_method(),
            beta: default_beta(),
            levels: default_levels(),
            cases: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Method comparison against the reference (`fig5-like.csv`).
    #[serde(default = "yes")]
    pub comparison: bool,
    /// Stabilization sweep (`fig10-like.csv`).
    #[serde(default = "yes")]
    pub beta_sweep: bool,
    /// Hybrid volume-fraction sweep (`fig13-like.csv`).
    #[serde(default)]
    pub fraction_sweep: bool,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodKind>,
    /// Compared blocks; those not present in the mode are skipped.
    #[serde(default = "default_targets")]
    pub targets: Vec<Target>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_beta_step")]
    pub beta_step: f64,
    #[serde(default = "default_fraction_step")]
    pub fraction_step: f64,
    #[serde(default = "default_reference_levels")]
    pub reference_levels: usize,
    #[serde(default = "default_max_dofs")]
    pub max_reference_dofs: usize,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            comparison: true,
            beta_sweep: true,
            fraction_sweep: false,
            methods: default_methods(),
            targets: default_targets(),
            beta: default_beta(),
            beta_step: default_beta_step(),
            fraction_step: default_fraction_step(),
            reference_levels: default_reference_levels(),
            max_reference_dofs: default_max_dofs(),
            cache_dir: None,
        }
    }
}

fn default_mode() -> Mode {
    Mode::ElectroMechanical
}
fn default_seed() -> u64 {
    1
}
fn default_edge() -> f64 {
    1.0
}
fn default_material() -> String {
    "BaTiO3".into()
}
fn default_method() -> MethodKind {
    MethodKind::Vem
}
fn default_beta() -> f64 {
    0.1
}
fn default_levels() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_methods() -> Vec<MethodKind> {
    vec![MethodKind::Vem, MethodKind::FemO1, MethodKind::FemO2]
}
fn default_targets() -> Vec<Target> {
    Target::ALL.to_vec()
}
fn default_beta_step() -> f64 {
    0.05
}
fn default_fraction_step() -> f64 {
    0.1
}
fn default_reference_levels() -> usize {
    2
}
fn default_max_dofs() -> usize {
    vemhom::study::ReferenceOptions::default().max_dofs
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that does not need the mesh or the library.
    pub fn validate(&self) -> Result<(), String> {
        match (&self.mesh.file, self.mesh.grains) {
            (Some(_), Some(_)) => return Err("mesh: give either `file` or `grains`, not both".into()),
            (None, None) => return Err("mesh: one of `file` or `grains` is required".into()),
            (None, Some(0)) => return Err("mesh: `grains` must be positive".into()),
            _ => {}
        }
        if !(self.mesh.edge_length > 0.0 && self.mesh.edge_length.is_finite()) {
            return Err("mesh: `edge_length` must be positive".into());
        }
        for (name, beta) in [("homogenize.beta", self.homogenize.beta), ("study.beta", self.study.beta)] {
            if !(0.0..=1.0).contains(&beta) {
                return Err(format!("{name} = {beta} is outside [0, 1]"));
            }
        }
        for (name, step) in [
            ("study.beta_step", self.study.beta_step),
            ("study.fraction_step", self.study.fraction_step),
        ] {
            if !(step > 0.0 && step <= 1.0) {
                return Err(format!("{name} = {step} must lie in (0, 1]"));
            }
        }
        if self.homogenize.method == MethodKind::FemO1Refined && self.homogenize.levels == 0 {
            return Err("homogenize.levels must be at least 1".into());
        }
        if self.study.reference_levels == 0 {
            return Err("study.reference_levels must be at least 1".into());
        }
        if let Some(cases) = &self.homogenize.cases {
            let valid = self.mode.cases();
            if let Some(c) = cases.iter().find(|c| !valid.contains(c)) {
                return Err(format!("homogenize.cases: case {c} is not defined for mode {}", self.mode));
            }
        }
        Ok(())
    }

    /// Makes relative paths relative to `base` (the config file's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.mesh.file);
        fix(&mut self.materials.library);
        fix(&mut self.output);
        fix(&mut self.study.cache_dir);
    }

    /// Applies `--seed` to every RNG seed in the configuration.
    pub fn override_seed(&mut self, seed: u64) {
        self.mesh.seed = seed;
        if self.materials.orientation_seed.is_some() {
            self.materials.orientation_seed = Some(seed);
        }
    }

    /// Canonical text used for the configuration hash.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
