//! Pressure-level sensitivity of a nearly-closed fluid domain.
//!
//! If a flow solution exists for a reference lid resistance `kappa_ref`, the
//! same velocity field with the pressure shifted by a constant solves the
//! problem for resistance `kappa`. With uniform normal velocity and pressure
//! on the permeable boundary, the shift is
//!
//! ```text
//! lambda = -(kappa - kappa_ref) V' / meas(Gamma_R)
//! ```
//!
//! where `V'` is the volume-rate deviation. As `kappa` grows, any nonzero
//! `V'` produces an unbounded pressure shift.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("Robin boundary measure must be positive, got {0}")]
    NonpositiveArea(f64),
    #[error("resistance `{0}` must be finite and >= 0")]
    InvalidResistance(&'static str),
    #[error("volume-rate deviation must be finite")]
    NonFiniteRate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinBoundarySpec<T> {
    pub kappa: T,
    pub kappa_ref: T,
    /// Measure of the permeable boundary (length in 2D, area in 3D).
    pub area: T,
    /// Volume-rate deviation `V'`.
    pub vdot: T,
}

impl<T: Scalar> RobinBoundarySpec<T> {
    pub fn new(kappa: T, kappa_ref: T, area: T, vdot: T) -> Result<Self, SensitivityError> {
        let spec = RobinBoundarySpec {
            kappa,
            kappa_ref,
            area,
            vdot,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), SensitivityError> {
        if !(self.kappa.is_finite() && self.kappa >= T::zero()) {
            return Err(SensitivityError::InvalidResistance("kappa"));
        }
        if !(self.kappa_ref.is_finite() && self.kappa_ref >= T::zero()) {
            return Err(SensitivityError::InvalidResistance("kappa_ref"));
        }
        if !(self.area.is_finite() && self.area > T::zero()) {
            return Err(SensitivityError::NonpositiveArea(self.area.to_f64_lossy()));
        }
        if !self.vdot.is_finite() {
            return Err(SensitivityError::NonFiniteRate);
        }
        Ok(())
    }
}

/// Pressure-level shift `lambda` for the given boundary data.
pub fn pressure_shift<T: Scalar>(spec: &RobinBoundarySpec<T>) -> Result<T, SensitivityError> {
    spec.validate()?;
    Ok(-(spec.kappa - spec.kappa_ref) * spec.vdot / spec.area)
}
