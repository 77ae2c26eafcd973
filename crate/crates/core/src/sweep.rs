//! Parameter sweeps of the subiteration convergence rate.
//!
//! Every run starts from the same kinematic spin-up: the piston is driven with
//! velocity `u0 * theta(t / T)`, `theta(x) = 1/2 - cos(pi x) / 2`, for one ramp
//! period `T`. The first coupling step after the ramp is then subiterated and
//! its residual history fitted with [`observed_rate`].

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::coupling::{
    observed_rate, CouplingConfig, CouplingError, IterationTrace, PartitionedOptions,
    PistonCoupling, Status, StepResult,
};
use crate::model::{DimensionlessGroups, ParamError, ParamField, PistonParams};
use crate::output;
use crate::piston::{self, PistonState};
use crate::scalar::Scalar;

/// Default ramp period of the spin-up.
pub const DEFAULT_SPINUP: f64 = 1.0;

/// Default fitting window (iterations, counted from 1).
pub const DEFAULT_RATE_WINDOW: (usize, usize) = (2, 6);

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep parameter `{0}` is not one of kappa_f, tau, m_s, rho_f")]
    Parameter(ParamField),
    #[error("sweep values must be nonempty, positive and strictly increasing")]
    Values,
    #[error("spin-up period must be finite and >= 0, got {0}")]
    Spinup(f64),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error("output: {0}")]
    Csv(#[from] csv::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

/// Parameters a sweep may vary.
pub const SWEEPABLE: [ParamField; 4] = [
    ParamField::KappaF,
    ParamField::Tau,
    ParamField::MS,
    ParamField::RhoF,
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: ParamField,
    pub values: Vec<f64>,
    pub base: PistonParams<f64>,
    pub coupling: CouplingConfig<f64>,
    pub options: PartitionedOptions,
    pub spinup: f64,
    pub rate_window: (usize, usize),
}

impl SweepSpec {
    pub fn new(
        parameter: ParamField,
        values: Vec<f64>,
        base: PistonParams<f64>,
        coupling: CouplingConfig<f64>,
    ) -> Result<Self, SweepError> {
        let spec = SweepSpec {
            parameter,
            values,
            base,
            coupling,
            options: PartitionedOptions::default(),
            spinup: DEFAULT_SPINUP,
            rate_window: DEFAULT_RATE_WINDOW,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if !SWEEPABLE.contains(&self.parameter) {
            return Err(SweepError::Parameter(self.parameter));
        }
        let positive = self.values.iter().all(|v| v.is_finite() && *v > 0.0);
        let increasing = self.values.windows(2).all(|w| w[0] < w[1]);
        if self.values.is_empty() || !positive || !increasing {
            return Err(SweepError::Values);
        }
        if !(self.spinup.is_finite() && self.spinup >= 0.0) {
            return Err(SweepError::Spinup(self.spinup));
        }
        for &v in &self.values {
            self.base.with(self.parameter, v)?;
        }
        Ok(())
    }
}

/// State at the end of the spin-up ramp, together with the step-end
/// displacements of the last (up to) three coupling steps, oldest first.
pub fn spinup_state<T: Scalar>(
    params: &PistonParams<T>,
    opts: &PartitionedOptions,
    period: T,
) -> Result<(PistonState<T>, Vec<T>), piston::PistonError> {
    let ell0 = params.ell0();
    let u0 = params.u0();
    let tau = params.tau();
    let pi = T::PI();
    let half = T::lit(0.5);
    let d_at = |t: T| {
        if period > T::zero() {
            ell0 + u0 * (half * t - period / (T::lit(2.0) * pi) * (pi * t / period).sin())
        } else {
            ell0
        }
    };
    let mut prior = Vec::new();
    for back in (0..3).rev() {
        let t = period - T::count(back) * tau;
        if t >= T::zero() - tau * T::lit(1e-9) {
            prior.push(d_at(t.max(T::zero())));
        }
    }
    let d = d_at(period);
    if period == T::zero() {
        return Ok((crate::coupling::initial_state(params, opts.model)?, vec![d]));
    }
    // Zero acceleration at the end of the ramp leaves only the damping pressure.
    Ok((PistonState::new(d, u0, -params.kappa_f() * u0)?, prior))
}

/// Runs the first coupling step after the spin-up.
pub fn measure_step<T: Scalar>(
    params: &PistonParams<T>,
    cfg: &CouplingConfig<T>,
    opts: PartitionedOptions,
    spinup: T,
) -> Result<StepResult<T>, CouplingError<T>> {
    let coupling = PistonCoupling::new(*params, opts)?;
    let (state, prior) = spinup_state(params, &opts, spinup)
        .map_err(|e| CouplingError::InvalidConfig(e.to_string()))?;
    coupling.step(cfg, &state, &prior)
}

/// Outcome of one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub value: f64,
    pub params: PistonParams<f64>,
    pub groups: DimensionlessGroups<f64>,
    pub trace: IterationTrace<f64>,
    pub status: Status,
    pub rate: Option<f64>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: ParamField,
    pub records: Vec<SweepRecord>,
}

fn run_one(spec: &SweepSpec, value: f64) -> SweepRecord {
    let params = spec
        .base
        .with(spec.parameter, value)
        .expect("validated sweep value");
    let result = measure_step(&params, &spec.coupling, spec.options, spec.spinup);
    let status = Status::of(&result);
    let (trace, message) = match result {
        Ok(step) => (step.trace, None),
        Err(e) => (e.trace().cloned().unwrap_or_default(), Some(e.to_string())),
    };
    let (lo, hi) = spec.rate_window;
    let rate = observed_rate(&trace, lo, hi).ok();
    SweepRecord {
        value,
        params,
        groups: params.groups(),
        trace,
        status,
        rate,
        message,
    }
}

/// Runs all sweep values on a pool of `jobs` workers (0 picks the default width).
/// Records come back in the order of `spec.values`.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepResult, SweepError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let records = pool.install(|| spec.values.par_iter().map(|&v| run_one(spec, v)).collect());
    Ok(SweepResult {
        parameter: spec.parameter,
        records,
    })
}

impl SweepResult {
    /// Differences of consecutive fitted rates; `None` where a rate is missing.
    pub fn rate_differences(&self) -> Vec<Option<f64>> {
        self.records
            .windows(2)
            .map(|w| Some(w[1].rate? - w[0].rate?))
            .collect()
    }

    /// Per-value trace file name, e.g. `residuals_kappa_f_003.csv`.
    pub fn trace_file_name(&self, index: usize) -> String {
        format!("residuals_{}_{:03}.csv", self.parameter.name(), index)
    }

    pub fn write_summary<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            self.parameter.name(),
            "omega",
            "alpha_m",
            "alpha_d",
            "a",
            "converged",
            "status",
            "iterations",
        ])?;
        for r in &self.records {
            wtr.write_record([
                r.value.to_string(),
                r.groups.omega.to_string(),
                r.groups.alpha_m.to_string(),
                r.groups.alpha_d.to_string(),
                r.rate
                    .map(|a| a.to_string())
                    .unwrap_or_else(|| "nan".into()),
                (r.status == Status::Converged).to_string(),
                r.status.name().to_string(),
                r.trace.iterations().to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes `summary.csv` and one residual CSV per value into `dir`.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>, SweepError> {
        let mut written = Vec::with_capacity(self.records.len() + 1);
        for (i, r) in self.records.iter().enumerate() {
            let path = dir.join(self.trace_file_name(i));
            r.trace.save_csv(&path)?;
            written.push(path);
        }
        let summary = dir.join("summary.csv");
        self.write_summary(output::create(&summary)?)?;
        written.push(summary);
        Ok(written)
    }
}
