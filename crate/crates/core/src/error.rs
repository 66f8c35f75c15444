use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular attitude: |cos(theta)| too small at theta = {theta}")]
    SingularAttitude { theta: f64 },

    #[error("state diverged at t = {t:.3} s (|component| > {limit})")]
    Divergence { t: f64, limit: f64 },

    #[error("allocation matrix is rank deficient (rank {rank} < 4)")]
    RankDeficient { rank: usize },

    #[error("thrust lookup table is empty")]
    EmptyTable,

    #[error("invalid thrust lookup table: {0}")]
    InvalidTable(String),

    #[error("innovation covariance is singular")]
    SingularInnovation,

    #[error("degenerate path segment: previous and target waypoints coincide")]
    DegenerateSegment,

    #[error("waypoint list is empty")]
    EmptyWaypoints,

    #[error("unknown course id `{0}`")]
    UnknownCourse(String),

    #[error("invalid course: {0}")]
    InvalidCourse(String),

    #[error("path is empty")]
    EmptyPath,

    #[error("series length mismatch ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("simulated time exceeded the {limit} s timeout")]
    Timeout { limit: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
