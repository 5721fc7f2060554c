use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("count {0} appears more than once")]
    DuplicateCount(u32),

    #[error("frequency table is empty")]
    EmptyTable,

    #[error("invalid count {0}: counts must be at least 1")]
    InvalidCount(u32),

    #[error("invalid frequency {value} at count {count}")]
    InvalidFrequency { count: u32, value: f64 },

    #[error("collapsed tail above {above} overlaps an explicit count {count}")]
    TailOverlap { above: u32, count: u32 },

    #[error("truncation point must be at least {min}, got {m}")]
    InvalidTruncation { m: u32, min: u32 },

    #[error("truncation point {m} lies inside the collapsed tail (> {above})")]
    TruncationInsideTail { m: u32, above: u32 },

    #[error("need at least 2 ratio points, got {0}")]
    TooFewPoints(usize),

    #[error("zero frequency at count {0} referenced by a ratio point")]
    ZeroFrequency(u32),

    #[error("weight covariance matrix is numerically singular")]
    SingularWeights,

    #[error("weighted normal equations are singular")]
    SingularNormalEquations,

    #[error("{0}")]
    Precondition(String),

    #[error("invalid study specification: {0}")]
    InvalidStudy(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
