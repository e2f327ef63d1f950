use thiserror::Error;

/// Errors raised by the mapping pipeline and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown class id {0}")]
    UnknownClass(u16),

    #[error("class {class} is at level {actual}, cannot roll up to lower level {requested}")]
    LevelBelowClass {
        class: u16,
        actual: &'static str,
        requested: &'static str,
    },

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grid too large: {cells} cells exceeds limit {limit}")]
    GridTooLarge { cells: usize, limit: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("empty cell set")]
    EmptyCellSet,

    #[error("cell index {index} out of range for grid of {cells} cells")]
    CellOutOfRange { index: usize, cells: usize },

    #[error("degenerate polygon ring (zero area)")]
    DegenerateRing,

    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),

    #[error("unknown component {0}")]
    UnknownComponent(u32),

    #[error("no parcels: mask is empty after removing road and water space")]
    EmptyParcelMask,

    #[error("parcel {0} has no raster coverage (all cells nodata)")]
    ParcelOutsideRaster(u32),

    #[error("non-positive bandwidth {0}")]
    InvalidBandwidth(f64),

    #[error("feature schema mismatch: expected {expected:?}, got {got:?}")]
    SchemaMismatch { expected: String, got: String },

    #[error("training set error: {0}")]
    Training(String),

    #[error("stage {stage} failed: {message}")]
    Stage { stage: &'static str, message: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("stratified sampling: stratum {stratum} has {size} parcels, {requested} requested")]
    StratumTooSmall {
        stratum: String,
        size: usize,
        requested: usize,
    },

    #[error("synthetic dataset config: {0}")]
    SynthConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
