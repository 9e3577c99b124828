use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("adaptive quadrature did not converge: estimated error {achieved:.3e} after {subdivisions} subdivisions")]
    Quadrature { achieved: f64, subdivisions: usize },

    #[error("spectral parameter {z} lies on or too close to the branch cut (-inf, 0]")]
    BranchCut { z: Complex64 },

    #[error("matrix element requires Im z > 0, got {z}")]
    NotUpperHalfPlane { z: Complex64 },

    #[error("integrand envelope did not decay before t = {t_max:.3e} (z = {z})")]
    EnvelopeNoDecay { z: Complex64, t_max: f64 },

    #[error("non-finite value while evaluating at {z}")]
    NonFinite { z: Complex64 },

    #[error("dilation rotates a Gaussian width out of the right half-plane (width {width})")]
    NonIntegrableWidth { width: Complex64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero suspected on the contour after {attempts} attempts")]
    BoundaryZero { attempts: usize },

    #[error("Newton iteration left the isolating box around {center}")]
    NewtonEscape { center: Complex64 },

    #[error("Floquet matrix dimension {dim} exceeds limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("inverse iteration stagnated: best residual {residual:.3e}")]
    Stagnation { residual: f64 },

    #[error("Taylor continuation radius collapsed near {z}")]
    RadiusCollapse { z: Complex64 },
}
