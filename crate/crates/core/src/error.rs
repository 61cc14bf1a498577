use std::path::PathBuf;

/// Errors raised anywhere in the denoising pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no oracle samples")]
    NoOracleSamples,

    #[error("empty point cloud where at least one point is required")]
    EmptyCloud,

    #[error("net too large: more than {cap} directions (mesh {mesh}); use a larger mesh")]
    NetTooLarge { mesh: f64, cap: usize },

    #[error("hull oracle failure after {iterations} iterations (residual {residual:e})")]
    HullOracleFailure { iterations: usize, residual: f64 },

    #[error("oracle saturated: hyperplane too close or too few samples (scan passed below the lowest sample at j = {j})")]
    OracleSaturated { j: i64 },

    #[error("delta too large for mass constant: kappa1/kappa0 = {ratio} < 1")]
    DeltaTooLarge { ratio: f64 },

    #[error("infeasible sample demand: {required:e} samples exceeds the cap of {cap}")]
    InfeasibleSampleDemand { required: f64, cap: u64 },

    #[error("invalid partition: need 0 < N0 < N1 < N, got N0={n0}, N1={n1}, N={n}")]
    InvalidPartition { n0: usize, n1: usize, n: usize },

    #[error("{failed} of {total} net directions failed in the oracle (tolerance is 1%)")]
    TooManyDirectionFailures { failed: usize, total: usize },

    #[error("covering estimate did not saturate within {samples} samples")]
    CoveringBudgetExhausted { samples: usize },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed data in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Wraps an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for errors that signal an explicit resource cap was hit.
    pub fn is_resource_cap(&self) -> bool {
        matches!(
            self.root(),
            Error::NetTooLarge { .. }
                | Error::InfeasibleSampleDemand { .. }
                | Error::CoveringBudgetExhausted { .. }
        )
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::param(
            name,
            format!("must be finite and > 0, got {value}"),
        ));
    }
    Ok(())
}
