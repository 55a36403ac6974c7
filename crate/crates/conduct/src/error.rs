use thiserror::Error;

/// Errors shared across the simulation and estimation modules.
#[derive(Debug, Error)]
pub enum Error {
    /// The equilibrium denominator (1+θ)(α₁+α₂·zr)+γ₁ is numerically zero,
    /// so no interior equilibrium exists for this parameter/draw combination.
    #[error("degenerate equilibrium denominator ({denominator:e})")]
    DegenerateDenominator { denominator: f64 },

    /// A design matrix is exactly or nearly column-rank-deficient
    /// (smallest/largest singular value below the relative cutoff).
    #[error("rank-deficient design in {stage}: singular value ratio {ratio:e}")]
    RankDeficient { stage: &'static str, ratio: f64 },

    /// The conduct parameter cannot be recovered because the estimated
    /// demand rotation coefficient is numerically zero.
    #[error("conduct parameter undefined: |alpha2_hat| = {alpha2_magnitude:e} below cutoff")]
    ThetaUndefined { alpha2_magnitude: f64 },

    /// A regression specification or generator configuration is unusable.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
