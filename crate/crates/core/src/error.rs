use nalgebra::Complex;
use thiserror::Error;

/// Errors raised by the numerical kernels and the reduction pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not stable (spectral abscissa {abscissa:e})")]
    NotStable { abscissa: f64 },
    #[error("residual {residual:e} exceeds tolerance {tolerance:e}")]
    Convergence { residual: f64, tolerance: f64 },
    #[error("spectral separation {gap:e} is below tolerance {tolerance:e}")]
    NearSingularSeparation { gap: f64, tolerance: f64 },
    #[error("swapping adjacent Schur blocks failed")]
    IllConditionedReordering,
    #[error("real Schur iteration did not converge")]
    SchurFailed,
    #[error("dense decomposition did not converge")]
    DecompositionFailed,
    #[error("Hamiltonian has eigenvalues on the imaginary axis; no stabilizing solution")]
    NoStabilizingSolution,
    #[error("weight matrix R is not positive definite")]
    NotPositiveDefinite,
    #[error("pole {0} lies on the imaginary axis")]
    AxisPole(Complex<f64>),
    #[error("stable/antistable split is ill-conditioned")]
    IllConditionedSplit,
    #[error("eigenvalue clusters at {a} and {b} cannot be separated")]
    Clustering { a: Complex<f64>, b: Complex<f64> },
    #[error("mode at the origin cannot be ranked")]
    ZeroMode,
    #[error("system is not minimal")]
    NotMinimal,
    #[error("Hankel singular values tie at the truncation point")]
    PartitionTie,
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("controller does not stabilize the plant (closed-loop abscissa {abscissa:e}); cost is infinite")]
    NotStabilizing { abscissa: f64 },
    #[error("system has a nonzero feedthrough term")]
    NotStrictlyProper,
    #[error("operation requires a single-input single-output system")]
    NotSiso,
    #[error("rational function is improper")]
    Improper,
    #[error("{0} is not a simple pole")]
    NotSimplePole(Complex<f64>),
    #[error("radius {epsilon:e} must be below the distance {limit:e} to the nearest other root")]
    Radius { epsilon: f64, limit: f64 },
    #[error("system is unstable; use the L-infinity norm instead")]
    UseLinf,
    #[error("truncated component is unstable; use the unstable-mode certificate")]
    WrongCertificate,
    #[error("instance synthesis failed after {0} attempts")]
    Synthesis(usize),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            NotStabilizing { .. } | NotStable { .. } | UseLinf | AxisPole(_) | ZeroMode
            | NotMinimal | PartitionTie | WrongCertificate | NoStabilizingSolution | InvalidOrder(_) => 3,
            Convergence { .. }
            | NearSingularSeparation { .. }
            | IllConditionedReordering
            | SchurFailed
            | DecompositionFailed
            | IllConditionedSplit
            | Clustering { .. }
            | Synthesis(_) => 4,
            _ => 2,
        }
    }

    /// Short machine-readable tag.
    pub fn tag(&self) -> &'static str {
        use Error::*;
        match self {
            Dimension(_) => "dimension",
            NonFinite(_) => "non_finite",
            NotStable { .. } => "not_stable",
            Convergence { .. } => "convergence",
            NearSingularSeparation { .. } => "near_singular_separation",
            IllConditionedReordering => "ill_conditioned_reordering",
            SchurFailed => "schur_failed",
            DecompositionFailed => "decomposition_failed",
            NoStabilizingSolution => "no_stabilizing_solution",
            NotPositiveDefinite => "not_positive_definite",
            AxisPole(_) => "axis_pole",
            IllConditionedSplit => "ill_conditioned_split",
            Clustering { .. } => "clustering",
            ZeroMode => "zero_mode",
            NotMinimal => "not_minimal",
            PartitionTie => "partition_tie",
            InvalidOrder(_) => "invalid_order",
            NotStabilizing { .. } => "not_stabilizing",
            NotStrictlyProper => "not_strictly_proper",
            NotSiso => "not_siso",
            Improper => "improper",
            NotSimplePole(_) => "not_simple_pole",
            Radius { .. } => "radius",
            UseLinf => "use_linf",
            WrongCertificate => "wrong_certificate",
            Synthesis(_) => "synthesis",
            Io(_) => "io",
            Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
