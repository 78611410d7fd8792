use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation: {0}")]
    Schema(String),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unknown point `{0}`")]
    UnknownPoint(String),

    #[error("nonzero self-distance at `{0}`")]
    NonzeroDiagonal(String),

    #[error("distance matrix is asymmetric at (`{0}`, `{1}`)")]
    Asymmetric(String, String),

    #[error("not uniformly discrete: d(`{0}`, `{1}`) = 0")]
    NotUniformlyDiscrete(String, String),

    #[error("triangle inequality fails: d(`{x}`, `{z}`) > d(`{x}`, `{y}`) + d(`{y}`, `{z}`)")]
    Triangle { x: String, y: String, z: String },

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("map is not total or leaves the target: {0}")]
    BadMap(String),

    #[error("not a bijection row: row {0} repeats an element")]
    NotBijectionRow(usize),

    #[error("not a bijection column: column {0} repeats an element")]
    NotBijectionColumn(usize),

    #[error("table has no two-sided identity")]
    NoIdentity,

    #[error("table is not associative at ({0}, {1}, {2})")]
    NotAssociative(usize, usize, usize),

    #[error("generator set is not symmetric: inverse of {0} missing")]
    AsymmetricGenerators(usize),

    #[error("the identity may not be used as a generator")]
    IdentityGenerator,

    #[error("generators do not generate: reached {reached} of {order} elements")]
    NotGenerating { reached: usize, order: usize },

    #[error("projections not injective: {0}")]
    NotInjective(String),

    #[error("malformed chart at R={radius}: {detail}")]
    MalformedChart { radius: u64, detail: String },

    #[error("search caps exceeded: {0}")]
    CapExceeded(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("kernel is not hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("eigen-solver residual {residual:e} exceeds tolerance {tol:e}")]
    UncertifiedEigen { residual: f64, tol: f64 },

    #[error("span closure did not stabilise within {0} dimensions")]
    NoConvergence(usize),

    #[error("chart is not free (k = {0})")]
    NotFree(usize),

    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("map is not surjective: `{0}` has no preimage")]
    NotSurjective(String),

    #[error("pair (`{0}`, `{1}`) never stabilizes in the supplied family")]
    NotStabilizing(String, String),

    #[error("truncation too shallow: {0}")]
    TooShallow(String),

    #[error("blocks overlap at point `{0}`")]
    OverlappingBlocks(String),
}
