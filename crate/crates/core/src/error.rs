use thiserror::Error;

/// Errors raised anywhere in the homogenization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate seed set: {0}")]
    DegenerateSeeds(String),

    #[error("degenerate cell {cell}: volume {volume:e}")]
    DegenerateCell { cell: usize, volume: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported section `{0}`")]
    UnsupportedSection(String),

    #[error("face {face} is not planar (deviation {deviation:e})")]
    NonPlanarFace { face: usize, deviation: f64 },

    #[error("dangling vertex reference {0}")]
    DanglingVertex(usize),

    #[error("zero-area face")]
    ZeroArea,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("material `{material}`: missing parameter `{param}`")]
    MissingParameter { material: String, param: String },

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("load case {case} is not defined for mode {mode}")]
    ModeMismatch { case: usize, mode: String },

    #[error("missing load case {0}")]
    MissingCase(usize),

    #[error("matrix is not symmetric: |K_ij - K_ji| = {0:e}")]
    Asymmetric(f64),

    #[error("dof {0} is not numbered")]
    UnnumberedDof(usize),

    #[error(
        "factorization failed at pivot {pivot} (|d| = {magnitude:e}); rank-deficient cells: {cells:?}"
    )]
    Factorization {
        pivot: usize,
        magnitude: f64,
        cells: Vec<usize>,
    },

    #[error("solver residual {0:e} above tolerance")]
    Residual(f64),

    #[error("memory guard: {0}")]
    MemoryGuard(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for failures of the numerical pipeline (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateCell { .. }
                | Error::Factorization { .. }
                | Error::Residual(_)
                | Error::Asymmetric(_)
                | Error::ZeroArea
                | Error::MemoryGuard(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
