//! Physical parameters of the leaky piston and their dimensionless groups.
//!
//! All quantities are SI and per unit piston area. Parameters are validated
//! when constructed, so every solver downstream may rely on the invariants.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter `{field}` is not finite ({value})")]
    NonFinite { field: ParamField, value: f64 },
    #[error("parameter `{field}` = {value} violates `{rule}`")]
    OutOfRange {
        field: ParamField,
        value: f64,
        rule: &'static str,
    },
}

/// Names of the physical parameters, as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamField {
    RhoF,
    Ell0,
    U0,
    MS,
    KappaS,
    KappaF,
    Tau,
}

impl ParamField {
    pub const ALL: [ParamField; 7] = [
        ParamField::RhoF,
        ParamField::Ell0,
        ParamField::U0,
        ParamField::MS,
        ParamField::KappaS,
        ParamField::KappaF,
        ParamField::Tau,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamField::RhoF => "rho_f",
            ParamField::Ell0 => "ell0",
            ParamField::U0 => "u0",
            ParamField::MS => "m_s",
            ParamField::KappaS => "kappa_s",
            ParamField::KappaF => "kappa_f",
            ParamField::Tau => "tau",
        }
    }
}

impl fmt::Display for ParamField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown parameter `{s}`"))
    }
}

/// Leaky-piston parameters.
///
/// `rho_f` fluid density, `ell0` initial fluid-column length, `u0` initial
/// piston velocity, `m_s` piston mass and `kappa_s` spring constant (both per
/// unit area), `kappa_f` flow resistance of the permeable lid, `tau` coupling
/// time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PistonParams<T> {
    rho_f: T,
    ell0: T,
    u0: T,
    m_s: T,
    kappa_s: T,
    kappa_f: T,
    tau: T,
}

impl<T: Scalar> PistonParams<T> {
    pub fn new(
        rho_f: T,
        ell0: T,
        u0: T,
        m_s: T,
        kappa_s: T,
        kappa_f: T,
        tau: T,
    ) -> Result<Self, ParamError> {
        let p = PistonParams {
            rho_f,
            ell0,
            u0,
            m_s,
            kappa_s,
            kappa_f,
            tau,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), ParamError> {
        for field in ParamField::ALL {
            let v = self.get(field);
            if !v.is_finite() {
                return Err(ParamError::NonFinite {
                    field,
                    value: v.to_f64_lossy(),
                });
            }
        }
        let zero = T::zero();
        let checks = [
            (ParamField::RhoF, self.rho_f >= zero, "rho_f >= 0"),
            (ParamField::Ell0, self.ell0 > zero, "ell0 > 0"),
            (ParamField::MS, self.m_s > zero, "m_s > 0"),
            (ParamField::KappaS, self.kappa_s >= zero, "kappa_s >= 0"),
            (ParamField::KappaF, self.kappa_f >= zero, "kappa_f >= 0"),
            (ParamField::Tau, self.tau > zero, "tau > 0"),
        ];
        for (field, ok, rule) in checks {
            if !ok {
                return Err(ParamError::OutOfRange {
                    field,
                    value: self.get(field).to_f64_lossy(),
                    rule,
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, field: ParamField) -> T {
        match field {
            ParamField::RhoF => self.rho_f,
            ParamField::Ell0 => self.ell0,
            ParamField::U0 => self.u0,
            ParamField::MS => self.m_s,
            ParamField::KappaS => self.kappa_s,
            ParamField::KappaF => self.kappa_f,
            ParamField::Tau => self.tau,
        }
    }

    /// Returns a copy with one field replaced, re-validated.
    pub fn with(&self, field: ParamField, value: T) -> Result<Self, ParamError> {
        let mut p = *self;
        match field {
            ParamField::RhoF => p.rho_f = value,
            ParamField::Ell0 => p.ell0 = value,
            ParamField::U0 => p.u0 = value,
            ParamField::MS => p.m_s = value,
            ParamField::KappaS => p.kappa_s = value,
            ParamField::KappaF => p.kappa_f = value,
            ParamField::Tau => p.tau = value,
        }
        p.validate()?;
        Ok(p)
    }

    pub fn rho_f(&self) -> T {
        self.rho_f
    }
    pub fn ell0(&self) -> T {
        self.ell0
    }
    pub fn u0(&self) -> T {
        self.u0
    }
    pub fn m_s(&self) -> T {
        self.m_s
    }
    pub fn kappa_s(&self) -> T {
        self.kappa_s
    }
    pub fn kappa_f(&self) -> T {
        self.kappa_f
    }
    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn groups(&self) -> DimensionlessGroups<T> {
        nondimensionalize(self)
    }
}

/// `omega = tau sqrt(kappa_s / m_s)`, `alpha_m = rho_f ell0 / m_s`,
/// `alpha_d = tau kappa_f / m_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessGroups<T> {
    pub omega: T,
    pub alpha_m: T,
    pub alpha_d: T,
}

pub fn nondimensionalize<T: Scalar>(p: &PistonParams<T>) -> DimensionlessGroups<T> {
    DimensionlessGroups {
        omega: p.tau * (p.kappa_s / p.m_s).sqrt(),
        alpha_m: p.rho_f * p.ell0 / p.m_s,
        alpha_d: p.tau * p.kappa_f / p.m_s,
    }
}
