//! One error type for the whole library; variants map to the failure
//! classes the individual modules promise in their contracts.

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    // ---- scene / file formats ----
    #[error("ply format error: {0}")]
    PlyFormat(String),
    #[error("camera file error: {0}")]
    CameraFormat(String),
    #[error("camera pose error: {0}")]
    Pose(String),
    #[error("scene validation failed: {0}")]
    InvalidScene(String),

    // ---- rendering ----
    #[error("degenerate rotation for gaussian {0} (near-zero quaternion norm)")]
    DegenerateRotation(usize),
    #[error("degenerate splat: {0}")]
    DegenerateSplat(String),

    // ---- losses / metrics ----
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("loss undefined: {0}")]
    UndefinedLoss(String),
    #[error("image too small: {0}")]
    ImageTooSmall(String),
    #[error("empty point cloud")]
    EmptyCloud,

    // ---- codec ----
    #[error("bad bundle magic")]
    BadMagic,
    #[error("unsupported bundle version {0}")]
    BadVersion(u8),
    #[error("crc mismatch: stored {stored:08x}, computed {computed:08x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("bundle format error: {0}")]
    BundleFormat(String),
    #[error("unknown coder id {0}")]
    UnknownCoder(u8),
    #[error("corrupt entropy stream: {0}")]
    CorruptStream(String),
    #[error("cannot encode symbol {0}: zero frequency in table")]
    ZeroFrequency(u32),
    #[error("empty symbol stream")]
    EmptyStream,
    #[error("alphabet too large: {0} distinct symbols")]
    AlphabetTooLarge(usize),

    // ---- scheduling / config ----
    #[error("task registration error: {0}")]
    TaskRegistration(String),
    #[error("task '{name}' failed at iteration {iteration}: {source}")]
    TaskFailed {
        name: String,
        iteration: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("config error: {0}")]
    Config(String),

    // ---- misc ----
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("fixture check failed: {0}")]
    Fixture(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
