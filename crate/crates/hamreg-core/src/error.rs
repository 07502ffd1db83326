use alloc::string::String;
use core::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A non-finite value appeared during evaluation or differentiation.
    NonFinite { context: &'static str },
    /// A gradient block fed to the optimizer was non-finite.
    NonFiniteGrad { layer: usize },
    /// Vector/matrix dimensions do not line up.
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// Invalid configuration (layer sizes, schedule, system parameters, ...).
    Config(String),
    /// A small linear system was singular or too ill-conditioned to solve.
    SingularSystem { context: &'static str, cond: f64 },
    /// The learned Lagrangian's velocity Hessian is numerically degenerate.
    DegenerateLagrangian { cond: f64 },
    /// A Cartesian state violates the holonomic constraints beyond tolerance.
    ManifoldViolation { residual: f64, tol: f64 },
    /// Operation not defined for this model family.
    UnsupportedFamily { op: &'static str, family: &'static str },
    /// An RK4 stage produced a non-finite value.
    IntegrationFailure { t: f64, stage: usize },
    /// Every grid point of a cross-validation run diverged.
    AllDiverged,
    /// Dataset generation could not meet its point-count targets.
    Generation(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::NonFinite { context } => {
                write!(f, "non-finite value in {context}")
            }
            CoreError::NonFiniteGrad { layer } => {
                write!(f, "non-finite gradient in parameter block (layer {layer})")
            }
            CoreError::ShapeMismatch {
                context,
                expected,
                got,
            } => write!(f, "shape mismatch in {context}: expected {expected}, got {got}"),
            CoreError::Config(msg) => write!(f, "configuration error: {msg}"),
            CoreError::SingularSystem { context, cond } => {
                write!(f, "singular linear system in {context} (cond ~ {cond:.3e})")
            }
            CoreError::DegenerateLagrangian { cond } => {
                write!(f, "degenerate Lagrangian: velocity Hessian cond ~ {cond:.3e}")
            }
            CoreError::ManifoldViolation { residual, tol } => {
                write!(f, "constraint residual {residual:.3e} exceeds tolerance {tol:.1e}")
            }
            CoreError::UnsupportedFamily { op, family } => {
                write!(f, "{op} is not defined for model family {family}")
            }
            CoreError::IntegrationFailure { t, stage } => {
                write!(f, "non-finite RK4 stage {stage} at t = {t}")
            }
            CoreError::AllDiverged => write!(f, "every cross-validation grid point diverged"),
            CoreError::Generation(msg) => write!(f, "dataset generation failed: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
