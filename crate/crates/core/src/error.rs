use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid sparsity: k = {k} must satisfy 0 < k < m = {m}")]
    InvalidSparsity { k: usize, m: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("sensing matrix column {0} is identically zero")]
    DegenerateColumn(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("invalid bit budget: {0}")]
    InvalidBudget(String),

    #[error("bit budget too small: {total} bits cannot give each of {entries} entries at least one bit")]
    BudgetTooSmall { total: u64, entries: usize },

    #[error("invalid number of levels {0}: must be a power of two")]
    InvalidLevels(usize),

    #[error("degenerate training set: {distinct} distinct samples for {levels} levels")]
    DegenerateTraining { distinct: usize, levels: usize },

    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),

    #[error("corrupt index {index} at entry {entry} (codebook has {size} codepoints)")]
    CorruptIndex { entry: usize, index: usize, size: usize },

    #[error("no codebook available for {0}-bit width")]
    MissingCodebook(u32),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
