//! The benchmark problems: opinion dynamics against a fixed or advected
//! background, and a 2D swarming model handled by dimensional splitting.

pub mod opinion;
pub mod swarming;

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ProblemError {
    #[error("the analytic steady state needs a saturated kernel (radius >= domain width {width}), got radius {radius}")]
    NoClosedFormSteadyState { radius: f64, width: f64 },
    #[error("mass law must stay positive on [-1, 1]: base {base}, slope {slope}")]
    NonPositiveMass { base: f64, slope: f64 },
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
    #[error(transparent)]
    Scheme(#[from] crate::scheme::SchemeError),
}

/// Initial mass as a function of the random variable, `rho(theta) = base +
/// slope * theta`; must stay positive on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassLaw {
    pub base: f64,
    pub slope: f64,
}

impl MassLaw {
    pub fn constant(base: f64) -> Self {
        Self { base, slope: 0.0 }
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.base - self.slope.abs() <= 0.0 {
            return Err(ProblemError::NonPositiveMass {
                base: self.base,
                slope: self.slope,
            });
        }
        Ok(())
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.base + self.slope * theta
    }

    pub fn is_deterministic(&self) -> bool {
        self.slope == 0.0
    }
}
