use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Bessel order {re}{im:+}i lies outside the accepted strip")]
    OrderOutOfStrip { re: f64, im: f64 },

    #[error("quadrature could not certify tolerance {requested:e} (estimate {estimate:e}) in {context}")]
    QuadratureFailure {
        context: &'static str,
        requested: f64,
        estimate: f64,
    },

    #[error("unsupported cross-section kind: {0}")]
    UnsupportedKind(String),

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("Re(k) = {re_k} is outside the continuation region Re(k) > {bound}")]
    ContinuationOutOfRange { re_k: f64, bound: f64 },

    #[error("|k| = {abs_k:e} is too close to the threshold resonance k = 0")]
    NearThreshold { abs_k: f64 },

    #[error("function support reaches the grid boundary: {0}")]
    SupportViolation(String),

    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),

    #[error("matrix dimension {dim} exceeds the dense budget {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("mode tail not converged after {modes} modes (last tail bound {last_bound:e}, sup {sup:e})")]
    TailNotConverged {
        modes: usize,
        last_bound: f64,
        sup: f64,
    },

    #[error("empty sample set")]
    EmptyScan,

    #[error("wave kernel evaluated on its singular light cone (t = {t}, d = {d})")]
    SingularDiagonal { t: f64, d: f64 },

    #[error("time tail not certified: bound {bound:e} exceeds tolerance {tol:e}")]
    TailNotCertified { bound: f64, tol: f64 },

    #[error("grid [{r_min}, {r_max}] too narrow: {reason}")]
    GridTooNarrow {
        r_min: f64,
        r_max: f64,
        reason: &'static str,
    },

    #[error("|Lambda - Z| = {gap:e} is below the divided-difference threshold")]
    NearDiagonalDividedDifference { gap: f64 },

    #[error("1 + K is not invertible by Neumann series: ||K|| = {norm}")]
    NotInvertible { norm: f64 },

    #[error("certificate refused: ||K|| = {k_norm} > 1/2 at lambda = {re_lambda}{im_lambda:+}i")]
    EvidenceFailure {
        re_lambda: f64,
        im_lambda: f64,
        k_norm: f64,
    },

    #[error("point r = {r} is outside the collar e^(-r) <= {epsilon}")]
    CollarViolation { r: f64, epsilon: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
