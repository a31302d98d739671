use thiserror::Error;

/// Errors raised by the tensor engine, model builder, data pipeline,
/// metrics, and weight I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("pooling window {window} exceeds padded extent {extent}")]
    WindowTooLarge { window: usize, extent: usize },

    #[error("graph cycle or forward reference at node {node}")]
    GraphCycle { node: usize },

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("non-finite loss {value} at epoch {epoch}, sample {sample}")]
    NonFiniteLoss { value: f64, epoch: usize, sample: usize },

    #[error("weight file has bad magic bytes {found:?} (expected \"MSIW\")")]
    WeightBadMagic { found: [u8; 4] },

    #[error("weight file version {found} unsupported (expected {expected})")]
    WeightBadVersion { found: u32, expected: u32 },

    #[error("weight file names unknown tensor {name:?}")]
    WeightUnknownTensor { name: String },

    #[error("shape conflict for tensor {name:?}: file has {file:?}, model has {model:?}")]
    WeightShapeConflict {
        name: String,
        file: Vec<usize>,
        model: Vec<usize>,
    },

    #[error("weight file is missing tensor {name:?} (pass partial=true to allow)")]
    WeightMissingTensor { name: String },

    #[error("malformed {what} file {path:?}: {detail}")]
    MalformedFile {
        what: &'static str,
        path: String,
        detail: String,
    },

    #[error("fixation ({row}, {col}) out of bounds for {height}x{width} map")]
    FixationOutOfBounds {
        row: i64,
        col: i64,
        height: usize,
        width: usize,
    },

    #[error("empty fixation map where at least one fixation is required")]
    EmptyFixations,

    #[error("empty negative pool for shuffled AUC")]
    EmptyFixationPool,

    #[error("degenerate image with a zero dimension")]
    DegenerateImage,

    #[error("map is not a valid distribution: {0}")]
    InvalidDistribution(String),

    #[error("io error on {path:?}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
