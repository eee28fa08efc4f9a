use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("direction vector is zero")]
    ZeroDirection,

    #[error("{what} did not converge after {iterations} iterations (bracket [{lo:e}, {hi:e}])")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        lo: f64,
        hi: f64,
    },

    #[error("matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("degenerate gradient: {0}")]
    Singular(String),

    #[error("invalid contour: {0}")]
    InvalidContour(String),

    #[error("point too close to the boundary (d = {0:e})")]
    TooCloseToBoundary(f64),

    #[error("point outside the domain: {0}")]
    Exterior(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
