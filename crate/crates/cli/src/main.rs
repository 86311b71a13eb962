//! `vemhom` command-line front-end.

mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use vemhom::homogenization::{homogenize_cases, HomogenizationResult, LoadCase};
use vemhom::materials::{anisotropy_index, build_modulus, builtin_library, parse_library, EulerAngles, MaterialLibrary};
use vemhom::mesh::{generate_voronoi_lloyd, parse_tess, read_native, write_native, PolyMesh, SeedSet};
use vemhom::model::{GrainAssignment, Rve};
use vemhom::study::{
    beta_grid, beta_sweep, build_reference, comparison_csv, fraction_csv, fraction_grid, fraction_sweep,
    method_comparison, random_orientations, sha256_hex, sweep_csv, Provenance, ReferenceOptions,
};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "vemhom", version, about = "Virtual element homogenization of polycrystalline RVEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random draw, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or load the grain mesh and write it in the native format.
    Mesh,
    /// Compute the effective modulus of the configured RVE.
    Homogenize,
    /// Method comparison, stabilization sweep and hybrid volume-fraction sweep.
    Study,
    /// List the material library with anisotropy indices.
    Materials,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Core(vemhom::Error),
    Io(PathBuf, std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(..) | CliError::Core(vemhom::Error::Io(_)) => 4,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<vemhom::Error> for CliError {
    fn from(e: vemhom::Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    }
    if let Command::Materials = cli.command {
        return cmd_materials(cli);
    }
    let ctx = Context::load(cli)?;
    match cli.command {
        Command::Mesh => cmd_mesh(&ctx),
        Command::Homogenize => cmd_homogenize(&ctx),
        Command::Study => cmd_study(&ctx),
        Command::Materials => unreachable!(),
    }
}

/// Validated configuration plus everything derived from it.
struct Context {
    cfg: RunConfig,
    hash: String,
    out: PathBuf,
    verbose: bool,
}

impl Context {
    fn load(cli: &Cli) -> CliResult<Context> {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
        let text = read(path)?;
        let mut cfg = RunConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        if let Some(seed) = cli.seed {
            cfg.override_seed(seed);
        }
        let out = cli
            .out
            .clone()
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from("vemhom-out"));
        let hash = sha256_hex(&cfg.canonical());
        Ok(Context {
            cfg,
            hash,
            out,
            verbose: cli.verbose,
        })
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("vemhom: {}", msg.as_ref());
        }
    }

    fn library(&self) -> CliResult<MaterialLibrary> {
        load_library(self.cfg.materials.library.as_deref())
    }

    fn mesh(&self) -> CliResult<PolyMesh> {
        let m = &self.cfg.mesh;
        let mesh = match (&m.file, m.grains) {
            (Some(path), _) => {
                let text = read(path)?;
                if path.extension().is_some_and(|e| e == "tess") {
                    parse_tess(&text)?
                } else {
                    read_native(&text)?
                }
            }
            (None, Some(n)) => {
                generate_voronoi_lloyd(&SeedSet::uniform(n, m.edge_length, m.seed), m.edge_length, m.lloyd_iterations)?
            }
            (None, None) => unreachable!("validated"),
        };
        self.log(format!("mesh: {} grains, {} vertices", mesh.n_cells(), mesh.n_vertices()));
        Ok(mesh)
    }

    fn grains(&self, n: usize) -> CliResult<GrainAssignment> {
        let mc = &self.cfg.materials;
        let materials = match &mc.grains {
            Some(list) if list.len() != n => {
                return Err(CliError::Config(format!(
                    "materials.grains lists {} materials for {n} grains",
                    list.len()
                )))
            }
            Some(list) => list.clone(),
            None => vec![mc.material.clone(); n],
        };
        let angles = match (&mc.angles, mc.orientation_seed) {
            (Some(list), _) if list.len() != n => {
                return Err(CliError::Config(format!(
                    "materials.angles lists {} orientations for {n} grains",
                    list.len()
                )))
            }
            (Some(list), _) => list.iter().map(|a| EulerAngles::new(a[0], a[1], a[2])).collect(),
            (None, Some(seed)) => random_orientations(n, seed),
            (None, None) => vec![EulerAngles::new(0.0, 0.0, 0.0); n],
        };
        Ok(GrainAssignment { materials, angles })
    }

    fn rve(&self, mesh: PolyMesh) -> CliResult<(Rve, GrainAssignment)> {
        let grains = self.grains(mesh.n_cells())?;
        let rve = Rve::new(mesh, &grains, &self.library()?, self.cfg.mode)?;
        Ok((rve, grains))
    }

    fn seeds(&self) -> Vec<u64> {
        let mut s = vec![self.cfg.mesh.seed];
        s.extend(self.cfg.materials.orientation_seed);
        s
    }

    fn provenance(&self, mesh_hash: Option<String>) -> Provenance {
        Provenance::new(&self.hash, mesh_hash, self.seeds())
    }

    /// CSV with a leading comment that records the configuration hash.
    fn write_csv(&self, name: &str, body: &str) -> CliResult<()> {
        let header = format!("# vemhom {} config-sha256 {}\n", env!("CARGO_PKG_VERSION"), self.hash);
        self.write(name, &(header + body))
    }

    fn write(&self, name: &str, text: &str) -> CliResult<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::Io(self.out.clone(), e))?;
        let path = self.out.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Io(path.clone(), e))?;
        self.log(format!("wrote {}", path.display()));
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("serializable output");
        self.write(name, &(text + "\n"))
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn load_library(path: Option<&Path>) -> CliResult<MaterialLibrary> {
    match path {
        Some(p) => Ok(parse_library(&read(p)?)?),
        None => Ok(builtin_library()),
    }
}

fn cmd_mesh(ctx: &Context) -> CliResult<()> {
    let mesh = ctx.mesh()?;
    let report = mesh.validate()?;
    ctx.write("mesh.vmesh", &write_native(&mesh))?;
    ctx.write_json("provenance.json", &ctx.provenance(Some(mesh.hash())))?;
    println!(
        "{} grains, {} vertices, {} interior and {} boundary faces, volume error {:.2e}",
        mesh.n_cells(),
        mesh.n_vertices(),
        report.interior_faces,
        report.boundary_faces,
        report.volume_error
    );
    Ok(())
}

#[derive(Serialize)]
struct ResultFile<'a> {
    provenance: Provenance,
    result: &'a HomogenizationResult,
}

fn cmd_homogenize(ctx: &Context) -> CliResult<()> {
    let h = &ctx.cfg.homogenize;
    let (rve, grains) = ctx.rve(ctx.mesh()?)?;
    let method = h.method.with(h.beta, h.levels);
    let cases = match &h.cases {
        Some(list) => list
            .iter()
            .map(|&m| LoadCase::new(m, rve.mode))
            .collect::<Result<Vec<_>, _>>()?,
        None => LoadCase::all(rve.mode),
    };
    ctx.log(format!("homogenizing with {method}, {} cases", cases.len()));
    let result = homogenize_cases(&rve, method, &grains.materials, &cases)?;
    ctx.write_json(
        "result.json",
        &ResultFile {
            provenance: ctx.provenance(Some(rve.mesh.hash())),
            result: &result,
        },
    )?;
    if result.effective.is_some() {
        ctx.write_csv("effective.csv", &result.effective_csv())?;
    }
    println!(
        "{method}: {} nodes, {} dofs, {} cases, max Hill residual {:.2e}",
        result.n_nodes,
        result.n_dofs,
        result.cases.len(),
        result.max_hill_residual()
    );
    Ok(())
}

#[derive(Serialize)]
struct StudyProvenance {
    provenance: Provenance,
    reference_levels: usize,
    reference_nodes: Option<usize>,
    betas: Vec<f64>,
    fractions: Vec<f64>,
}

fn cmd_study(ctx: &Context) -> CliResult<()> {
    let s = &ctx.cfg.study;
    let mesh = ctx.mesh()?;
    let mesh_hash = mesh.hash();
    let opts = ReferenceOptions {
        levels: s.reference_levels,
        max_dofs: s.max_reference_dofs,
        cache_dir: s.cache_dir.clone(),
    };
    let betas = beta_grid(s.beta_step);
    let fractions = fraction_grid(s.fraction_step);
    let mut reference_nodes = None;
    if s.comparison || s.beta_sweep {
        let (rve, grains) = ctx.rve(mesh.clone())?;
        let targets: Vec<_> = s.targets.iter().copied().filter(|t| t.available(rve.mode)).collect();
        ctx.log(format!("reference: FEM-O1 refined {} times", s.reference_levels));
        let reference = build_reference(&rve, &grains.materials, &opts)?;
        reference_nodes = Some(reference.n_nodes);
        let g_ref = reference.effective_matrix().expect("reference solves every case");
        if s.comparison {
            let methods: Vec<_> = s.methods.iter().map(|m| m.with(s.beta, 1)).collect();
            let rows = method_comparison(&rve, &grains.materials, &methods, &g_ref, &targets)?;
            ctx.write_csv("fig5-like.csv", &comparison_csv(&rows))?;
        }
        if s.beta_sweep {
            ctx.log(format!("beta sweep over {} values", betas.len()));
            let points = beta_sweep(&rve, &grains.materials, &betas, &g_ref, &targets)?;
            ctx.write_csv("fig10-like.csv", &sweep_csv(&points))?;
        }
    }
    if s.fraction_sweep {
        ctx.log(format!("volume-fraction sweep over {} values", fractions.len()));
        let rows = fraction_sweep(
            &mesh,
            &ctx.library()?,
            &fractions,
            ctx.cfg.mesh.seed,
            &betas,
            s.beta,
            &s.targets,
            &opts,
        )?;
        ctx.write_csv("fig13-like.csv", &fraction_csv(&rows))?;
    }
    ctx.write_json(
        "provenance.json",
        &StudyProvenance {
            provenance: ctx.provenance(Some(mesh_hash)),
            reference_levels: s.reference_levels,
            reference_nodes,
            betas,
            fractions,
        },
    )?;
    Ok(())
}

fn cmd_materials(cli: &Cli) -> CliResult<()> {
    let library = match &cli.config {
        Some(path) => {
            let mut cfg = RunConfig::parse(&read(path)?).map_err(|e| CliError::Config(e.to_string()))?;
            cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            load_library(cfg.materials.library.as_deref())?
        }
        None => builtin_library(),
    };
    println!("{:<24} {:<20} {:<12} {:>10}", "name", "mode", "lattice", "A^U");
    for rec in &library.materials {
        let au = anisotropy_index(&build_modulus(rec)?.c())?;
        println!("{:<24} {:<20} {:<12} {:>10.4}", rec.name, rec.mode.name(), rec.lattice.name(), au);
    }
    Ok(())
}
