use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid point count {0} must be a power of two no smaller than 8")]
    BadPointCount(usize),
    #[error("grid extent must be positive and finite, got {0}")]
    BadExtent(f64),
    #[error("wavefunctions live on different grids or have different arity")]
    Mismatch,
    #[error("slot {0} is in a different representation in the two operands")]
    RepresentationMismatch(usize),
    #[error("particle {0} is not present in the wavefunction")]
    UnknownParticle(u8),
    #[error("arity {0} is outside 1..=5")]
    BadArity(usize),
    #[error("wavefunction has zero norm and cannot be normalized")]
    ZeroNorm,
    #[error("{what} = {value} is not on its lattice (spacing {spacing})")]
    OffLattice { what: &'static str, value: f64, spacing: f64 },
    #[error("mode index {0} is out of range")]
    BadMode(usize),
    #[error("beamsplitter modes must be distinct, got ({0}, {1})")]
    SameModes(usize, usize),
    #[error("linear form has {got} coefficients, state needs {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Gaussian state is mixed (symplectic eigenvalue {0}, pure states have 1/4)")]
    MixedState(f64),
    #[error("{0} modes requested, at most {1} are supported")]
    TooManyModes(usize, usize),
    #[error("grid extent {extent} is smaller than 8 standard deviations ({needed})")]
    GridTooSmall { extent: f64, needed: f64 },
    #[error("profile width {width} is narrower than two grid spacings ({min})")]
    ProfileTooNarrow { width: f64, min: f64 },
    #[error("relative position q = {q} lies outside half the grid extent {half}")]
    OffsetOutsideGrid { q: f64, half: f64 },
    #[error("dense five-particle measurement needs n_points <= 32, got {0}")]
    DenseTooLarge(usize),
    #[error("{0}")]
    Invalid(String),
}
