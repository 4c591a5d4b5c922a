use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("exponential weight out of range: |c z| = {0} exceeds 700")]
    WeightingRange(f64),

    #[error("irregular geometry; adjust tau (ambiguous singular value {sigma:.3e} near rank threshold {threshold:.3e})")]
    IrregularGeometry { sigma: f64, threshold: f64 },

    #[error("lambda = {lambda} is outside the real-rate window (requires lambda > {nu2})")]
    OutsideRateWindow { lambda: f64, nu2: f64 },

    #[error("non-simple asymptotic rates at lambda = {lambda}: |mu_{i} - mu_{j}| = {gap:.3e}")]
    NonSimpleRates { lambda: f64, i: usize, j: usize, gap: f64 },

    #[error("oscillatory tails unsupported: eigenvalues of DF(0) are not real and simple")]
    OscillatoryTails,

    #[error("evaluation outside the wave's extended domain: z = {0}")]
    Domain(f64),

    #[error("integrator failure near z = {z}: {reason}")]
    Integration { z: f64, reason: String },

    #[error("weighted solution norm exceeded 1e8 near z = {z}; mode takeover suspected (try a larger half-length L)")]
    ModeTakeover { z: f64 },

    #[error("non-constant invariant: e^(cz) omega drift {drift:.3e} exceeds {tol:.1e} relative")]
    NonConstantInvariant { drift: f64, tol: f64 },

    #[error("Newton did not converge in {iterations} iterations; final residual {residual:.3e}")]
    NewtonFailure { iterations: usize, residual: f64 },

    #[error("boundary projection setup is rank-deficient: {0}")]
    ProjectionSetup(String),

    #[error("back jump not found: no equal-speed level v* in (0, {vmax:.6})")]
    BackJumpNotFound { vmax: f64 },

    #[error("profile schema error: {0}")]
    Schema(String),

    #[error("profile grid is not strictly increasing near index {0}")]
    NonMonotoneGrid(usize),

    #[error("tail tolerance violated: |u|+|v| = {value:.3e} at z = {z} exceeds {tol:.3e}")]
    TailTolerance { z: f64, value: f64, tol: f64 },

    #[error("stored derivatives inconsistent with centered differences: relative error {err:.3e} at z = {z}")]
    DerivativeConsistency { z: f64, err: f64 },

    #[error("bundle trajectories do not overlap at the matching point z = {0}")]
    MatchingPoint(f64),

    #[error("tau too small: V^u(0) meets E^s(0, tau') at tau' = {tau_prime} (angle {angle:.3e})")]
    TauTooSmall { tau_prime: f64, angle: f64 },

    #[error("irregular crossing at z = {z}; perturb tau (crossing form {gamma:.3e} below regularity floor)")]
    IrregularCrossing { z: f64, gamma: f64 },

    #[error("non-transverse construction suspected: |Omega(u1,u4)| = {lt:.3e} is below the noise floor")]
    NonTransverse { lt: f64 },

    #[error("fast-front bound violated: mu1(u_tau) = {mu1:.6} not in (-sqrt(2)/2, -a*sqrt(2)]")]
    FrontBound { mu1: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Tag an error with the pipeline stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
