use thiserror::Error;

/// Errors raised by the distribution, convolution and bound routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid too coarse: {points} intervals requested, at least {min} required")]
    GridTooCoarse { points: usize, min: usize },

    #[error("affine map with zero scale")]
    ZeroScale,

    #[error("distribution not normalized: total mass {mass}")]
    NotNormalized { mass: f64 },

    #[error("grid overflow: {requested} points exceeds cap {cap}")]
    GridOverflow { requested: usize, cap: usize },

    #[error("atom explosion: {atoms} atoms exceeds cap {cap}")]
    AtomExplosion { atoms: usize, cap: usize },

    #[error("quadrature did not converge: estimated error {error:e} above tolerance {tolerance:e}")]
    QuadratureNonconvergence { error: f64, tolerance: f64 },

    #[error("input distribution is singular (no absolutely continuous part)")]
    SingularInput,

    #[error("density is identically zero")]
    ZeroDensity,

    #[error("level-set shrink exhausted: half-width fell below {min_steps} grid steps")]
    ShrinkExhausted { min_steps: usize },

    #[error("insufficient points for rate fit: {have} usable, {need} needed")]
    InsufficientPoints { have: usize, need: usize },

    #[error("mixed branch: some deltas equal 1 while others are below 1")]
    MixedBranch,

    #[error("invalid distribution spec: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of a numerical procedure to reach its target accuracy.
    pub fn is_nonconvergence(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonconvergence { .. } | Error::ShrinkExhausted { .. }
        )
    }
}
