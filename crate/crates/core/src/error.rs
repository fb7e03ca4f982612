use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid harmonic index (l={l}, m={m})")]
    InvalidIndex { l: i64, m: i64 },

    #[error("invalid Euler angles: {0}")]
    InvalidAngles(String),

    #[error("grid resolves band limit {have}, but band limit {need} was requested")]
    GridTooCoarse { need: usize, have: usize },

    #[error("degree {0} is not present in the coefficient set")]
    DegreeAbsent(usize),

    #[error("unknown distribution label '{0}'")]
    UnknownDistribution(String),

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("zero power at degree {0}")]
    ZeroSpectrum(usize),

    #[error("phase of a_(l,0) is degenerate (coefficient is real); need m >= 1")]
    PhaseDegenerate,

    #[error("harmonic indices must differ")]
    IdenticalIndices,

    #[error("degenerate rotation: beta={0} only rephases coefficients")]
    DegenerateRotation(f64),

    #[error("synthesized field has imaginary residue {0:e}")]
    ImaginaryResidue(f64),

    #[error("mixed provenance: {0}")]
    MixedProvenance(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
