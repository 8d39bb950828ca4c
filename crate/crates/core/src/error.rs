use thiserror::Error;

/// Errors produced anywhere in the trajectory toolchain.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent caller input (bad arrays, bad config, bad files).
    #[error("invalid input: {0}")]
    Input(String),
    /// Boundary data could not be ingested (too few points, gaps too large).
    #[error("boundary ingestion failed: {0}")]
    Ingestion(String),
    /// Geometric degeneracy such as a self-intersecting centerline.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// The convex solver did not return an optimal point.
    #[error("solver failure: {0}")]
    Solver(String),
    /// The simulated vehicle left the track.
    #[error("vehicle left the track at s = {station:.2} m (lateral deviation {deviation:.2} m)")]
    OffTrack { station: f64, deviation: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
