//! The leaky-piston fluid-structure problem.
//!
//! A piston of mass `m_s` on a spring `kappa_s` closes a column of
//! incompressible fluid of length `d(t)`; the opposite lid leaks with
//! resistance `kappa_f`. Integrating the 1D momentum balance over the column
//! gives the displacement-to-pressure (Poincare-Steklov) map
//!
//! ```text
//! p(t) = rho_f d(t) d''(t) - kappa_f d'(t)
//! ```
//!
//! and the piston obeys `m_s d'' + kappa_s d = p`. This module solves the
//! coupled system monolithically and also provides the two subproblems that a
//! Dirichlet-Neumann partitioned scheme alternates between.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::model::PistonParams;
use crate::output;
use crate::scalar::Scalar;
use crate::stencil;

#[derive(Debug, Error)]
pub enum PistonError {
    #[error("nonpositive fluid-column length d = {d} at node {index}")]
    NonpositiveDisplacement { index: usize, d: f64 },
    #[error(
        "added-mass singularity: effective mass m_s - rho_f d = {effective_mass} at step {step}"
    )]
    AddedMassSingularity { step: usize, effective_mass: f64 },
    #[error("newton iteration did not converge at step {step} (residual {residual:e} after {iterations} iterations)")]
    NewtonFailed {
        step: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("trajectory times must be strictly increasing")]
    NonIncreasingTime,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// How the fluid's added-mass coefficient is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluidModel {
    /// `rho_f d(t)`: the column length follows the piston.
    Nonlinear,
    /// `rho_f ell0`: the coefficient is frozen at the initial length.
    #[default]
    Linearized,
}

impl FluidModel {
    pub fn name(self) -> &'static str {
        match self {
            FluidModel::Nonlinear => "nonlinear",
            FluidModel::Linearized => "linearized",
        }
    }

    fn column_length<T: Scalar>(self, p: &PistonParams<T>, d: T) -> T {
        match self {
            FluidModel::Nonlinear => d,
            FluidModel::Linearized => p.ell0(),
        }
    }
}

impl std::str::FromStr for FluidModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nonlinear" => Ok(FluidModel::Nonlinear),
            "linearized" => Ok(FluidModel::Linearized),
            other => Err(format!(
                "unknown fluid model `{other}` (nonlinear|linearized)"
            )),
        }
    }
}

/// Piston displacement (= fluid-column length), velocity, and interface pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PistonState<T> {
    pub d: T,
    pub v: T,
    pub p_interface: T,
}

impl<T: Scalar> PistonState<T> {
    pub fn new(d: T, v: T, p_interface: T) -> Result<Self, PistonError> {
        if !(d.is_finite() && v.is_finite() && p_interface.is_finite()) {
            return Err(PistonError::NonFinite("piston state"));
        }
        if d <= T::zero() {
            return Err(PistonError::NonpositiveDisplacement {
                index: 0,
                d: d.to_f64_lossy(),
            });
        }
        Ok(PistonState { d, v, p_interface })
    }

    /// Initial state `(ell0, u0)` with the interface pressure consistent with
    /// the monolithic equation of motion.
    pub fn initial(p: &PistonParams<T>, model: FluidModel) -> Result<Self, PistonError> {
        let d = p.ell0();
        let m_eff = effective_mass(p, model, d);
        if m_eff <= T::zero() {
            return Err(PistonError::AddedMassSingularity {
                step: 0,
                effective_mass: m_eff.to_f64_lossy(),
            });
        }
        let a = -(p.kappa_f() * p.u0() + p.kappa_s() * d) / m_eff;
        let pressure = ps_pressure(p, model.column_length(p, d), p.u0(), a)?;
        Self::new(d, p.u0(), pressure)
    }
}

/// Time series of piston states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory<T> {
    times: Vec<T>,
    states: Vec<PistonState<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new() -> Self {
        Trajectory {
            times: Vec::new(),
            states: Vec::new(),
        }
    }

    pub fn push(&mut self, t: T, state: PistonState<T>) -> Result<(), PistonError> {
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(PistonError::NonIncreasingTime);
            }
        }
        self.times.push(t);
        self.states.push(state);
        Ok(())
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn states(&self) -> &[PistonState<T>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(T, PistonState<T>)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    pub fn displacements(&self) -> Vec<T> {
        self.states.iter().map(|s| s.d).collect()
    }

    /// Largest `|d_self - d_other| / |d_other|` over common nodes.
    pub fn max_relative_deviation(&self, other: &Self) -> T {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a.d - b.d).abs() / b.d.abs())
            .fold(T::zero(), T::max)
    }

    /// Largest `|d_self - d_other|` over common nodes.
    pub fn max_abs_deviation(&self, other: &Self) -> T {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a.d - b.d).abs())
            .fold(T::zero(), T::max)
    }

    /// Writes `t,d,v,p` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), PistonError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "d", "v", "p"])?;
        for (t, s) in self.times.iter().zip(&self.states) {
            wtr.write_record([
                t.to_string(),
                s.d.to_string(),
                s.v.to_string(),
                s.p_interface.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), PistonError> {
        self.write_csv(output::create(path)?)
    }
}

/// Displacement-to-pressure map `rho_f d a - kappa_f v`.
pub fn ps_pressure<T: Scalar>(p: &PistonParams<T>, d: T, v: T, a: T) -> Result<T, PistonError> {
    if d <= T::zero() {
        return Err(PistonError::NonpositiveDisplacement {
            index: 0,
            d: d.to_f64_lossy(),
        });
    }
    Ok(p.rho_f() * d * a - p.kappa_f() * v)
}

fn effective_mass<T: Scalar>(p: &PistonParams<T>, model: FluidModel, d: T) -> T {
    p.m_s() - p.rho_f() * model.column_length(p, d)
}

/// Options of the monolithic implicit-Euler/Newton solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonolithicOptions<T> {
    pub model: FluidModel,
    pub newton_max_iters: usize,
    pub newton_tol: T,
}

impl<T: Scalar> Default for MonolithicOptions<T> {
    fn default() -> Self {
        MonolithicOptions {
            model: FluidModel::Nonlinear,
            newton_max_iters: 50,
            newton_tol: T::lit(1e-12),
        }
    }
}

impl<T: Scalar> MonolithicOptions<T> {
    pub fn with_model(model: FluidModel) -> Self {
        MonolithicOptions {
            model,
            ..Self::default()
        }
    }
}

/// Number of steps of size `dt` covering `(0, t_fin)`; `t_fin` must be a
/// multiple of `dt` up to rounding.
pub fn step_count<T: Scalar>(t_fin: T, dt: T) -> Result<usize, PistonError> {
    if !(dt.is_finite() && dt > T::zero()) {
        return Err(PistonError::InvalidGrid(format!(
            "dt = {dt} must be positive"
        )));
    }
    if !(t_fin.is_finite() && t_fin >= dt) {
        return Err(PistonError::InvalidGrid(format!(
            "t_fin = {t_fin} must be >= dt = {dt}"
        )));
    }
    let ratio = t_fin / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > T::lit(1e-6) * steps {
        return Err(PistonError::InvalidGrid(format!(
            "t_fin = {t_fin} is not a multiple of dt = {dt}"
        )));
    }
    steps
        .to_usize()
        .ok_or_else(|| PistonError::InvalidGrid("step count overflow".into()))
}

/// Integrates `(m_s - rho_f d) d'' + kappa_f d' + kappa_s d = 0`,
/// `d(0) = ell0`, `d'(0) = u0`, with implicit Euler on `(d, v)`. Each step
/// solves the 2x2 nonlinear system by Newton's method.
pub fn solve_monolithic<T: Scalar>(
    p: &PistonParams<T>,
    t_fin: T,
    dt: T,
    opts: MonolithicOptions<T>,
) -> Result<Trajectory<T>, PistonError> {
    let steps = step_count(t_fin, dt)?;
    let mut traj = Trajectory::new();
    let mut state = PistonState::initial(p, opts.model)?;
    traj.push(T::zero(), state)?;
    for step in 1..=steps {
        state = monolithic_step(p, &state, dt, step, &opts)?;
        traj.push(T::count(step) * dt, state)?;
    }
    Ok(traj)
}

fn monolithic_step<T: Scalar>(
    p: &PistonParams<T>,
    prev: &PistonState<T>,
    dt: T,
    step: usize,
    opts: &MonolithicOptions<T>,
) -> Result<PistonState<T>, PistonError> {
    let (d0, v0) = (prev.d, prev.v);
    let rho_slope = match opts.model {
        FluidModel::Nonlinear => p.rho_f(),
        FluidModel::Linearized => T::zero(),
    };
    let mut d = d0 + dt * v0;
    let mut v = v0;
    let mut residual = T::infinity();
    for iter in 0..=opts.newton_max_iters {
        let m_eff = effective_mass(p, opts.model, d);
        if m_eff <= T::zero() {
            return Err(PistonError::AddedMassSingularity {
                step,
                effective_mass: m_eff.to_f64_lossy(),
            });
        }
        let r1 = d - d0 - dt * v;
        let r2 = m_eff * (v - v0) + dt * (p.kappa_f() * v + p.kappa_s() * d);
        let scale1 = d0.abs() + (dt * v).abs();
        let scale2 =
            m_eff * (v.abs() + v0.abs()) + dt * (p.kappa_f() * v.abs() + p.kappa_s() * d.abs());
        residual = (r1.abs() / scale1.max(T::min_positive_value()))
            .max(r2.abs() / scale2.max(T::min_positive_value()));
        if !residual.is_finite() {
            break;
        }
        if residual <= opts.newton_tol || (r1 == T::zero() && r2 == T::zero()) {
            let a = (v - v0) / dt;
            if d <= T::zero() {
                return Err(PistonError::NonpositiveDisplacement {
                    index: step,
                    d: d.to_f64_lossy(),
                });
            }
            let pressure = ps_pressure(p, opts.model.column_length(p, d), v, a)?;
            return PistonState::new(d, v, pressure);
        }
        if iter == opts.newton_max_iters {
            break;
        }
        // J = [[1, -dt], [-rho_slope (v - v0) + dt kappa_s, m_eff + dt kappa_f]]
        let j11 = T::one();
        let j12 = -dt;
        let j21 = -rho_slope * (v - v0) + dt * p.kappa_s();
        let j22 = m_eff + dt * p.kappa_f();
        let det = j11 * j22 - j12 * j21;
        if det == T::zero() || !det.is_finite() {
            break;
        }
        let dd = (r1 * j22 - j12 * r2) / det;
        let dv = (j11 * r2 - j21 * r1) / det;
        d = d - dd;
        v = v - dv;
    }
    Err(PistonError::NewtonFailed {
        step,
        iterations: opts.newton_max_iters,
        residual: residual.to_f64_lossy(),
    })
}

/// Displacement and velocity of the piston on the inner grid of one coupling step.
#[derive(Debug, Clone, PartialEq)]
pub struct SolidHistory<T> {
    pub d: Vec<T>,
    pub v: Vec<T>,
}

fn check_dt<T: Scalar>(dt: T) -> Result<(), PistonError> {
    if !(dt.is_finite() && dt > T::zero()) {
        return Err(PistonError::InvalidGrid(format!(
            "dt = {dt} must be positive"
        )));
    }
    Ok(())
}

/// Structure subproblem (Neumann side): integrates `m_s d'' + kappa_s d = p(t)`
/// from `(d0, v0)` with implicit Euler. `pressure[j]` is the load at inner node
/// `j`; the result has the same number of nodes.
pub fn solid_step<T: Scalar>(
    p: &PistonParams<T>,
    d0: T,
    v0: T,
    pressure: &[T],
    dt: T,
) -> Result<SolidHistory<T>, PistonError> {
    let mut h = solid_step_relative(p, d0, v0, pressure, dt)?;
    for w in &mut h.d {
        *w = d0 + *w;
    }
    Ok(h)
}

/// As [`solid_step`], but `d` holds the displacement relative to `d0`. Keeping
/// the increment avoids the rounding of the absolute position, which the
/// fluid's second difference would otherwise amplify by `1 / dt^2`.
pub fn solid_step_relative<T: Scalar>(
    p: &PistonParams<T>,
    d0: T,
    v0: T,
    pressure: &[T],
    dt: T,
) -> Result<SolidHistory<T>, PistonError> {
    check_dt(dt)?;
    if pressure.len() < 2 {
        return Err(PistonError::InvalidGrid(format!(
            "pressure history needs at least 2 nodes, got {}",
            pressure.len()
        )));
    }
    let m = p.m_s();
    let k = p.kappa_s();
    let lhs = m / dt + k * dt;
    let mut w = Vec::with_capacity(pressure.len());
    let mut v = Vec::with_capacity(pressure.len());
    w.push(T::zero());
    v.push(v0);
    for &load in &pressure[1..] {
        let (wj, vj) = (*w.last().unwrap(), *v.last().unwrap());
        let v_next = (load + m * vj / dt - k * (d0 + wj)) / lhs;
        v.push(v_next);
        w.push(wj + dt * v_next);
    }
    if w.iter().chain(&v).any(|x| !x.is_finite()) {
        return Err(PistonError::NonFinite("solid history"));
    }
    Ok(SolidHistory { d: w, v })
}

/// Fluid subproblem (Dirichlet side): recovers `d'` and `d''` from the received
/// displacement history with second-order stencils and returns the interface
/// pressure at every node. Needs at least 4 nodes.
pub fn fluid_step<T: Scalar>(
    p: &PistonParams<T>,
    d_history: &[T],
    dt: T,
    model: FluidModel,
) -> Result<Vec<T>, PistonError> {
    let d0 = d_history.first().copied().unwrap_or_else(T::zero);
    let w: Vec<T> = d_history.iter().map(|&d| d - d0).collect();
    fluid_step_relative(p, d0, &w, dt, model)
}

/// As [`fluid_step`], with the history given relative to the offset `d0`.
pub fn fluid_step_relative<T: Scalar>(
    p: &PistonParams<T>,
    d0: T,
    w_history: &[T],
    dt: T,
    model: FluidModel,
) -> Result<Vec<T>, PistonError> {
    check_dt(dt)?;
    if w_history.len() < 4 {
        return Err(PistonError::InvalidGrid(format!(
            "displacement history needs at least 4 nodes, got {}",
            w_history.len()
        )));
    }
    if !d0.is_finite() || w_history.iter().any(|w| !w.is_finite()) {
        return Err(PistonError::NonFinite("displacement history"));
    }
    if model == FluidModel::Nonlinear {
        if let Some(index) = w_history.iter().position(|&w| d0 + w <= T::zero()) {
            return Err(PistonError::NonpositiveDisplacement {
                index,
                d: (d0 + w_history[index]).to_f64_lossy(),
            });
        }
    }
    let vel = stencil::first_derivative(w_history, dt);
    let acc = stencil::second_derivative(w_history, dt);
    Ok(w_history
        .iter()
        .zip(vel.iter().zip(&acc))
        .map(|(&w, (&v, &a))| p.rho_f() * model.column_length(p, d0 + w) * a - p.kappa_f() * v)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(
        rho_f: f64,
        ell0: f64,
        u0: f64,
        m_s: f64,
        kappa_s: f64,
        kappa_f: f64,
    ) -> PistonParams<f64> {
        PistonParams::new(rho_f, ell0, u0, m_s, kappa_s, kappa_f, 0.1).unwrap()
    }

    /// Closed-form solution of `m x'' + c x' + k x = 0`, `x(0) = x0`, `x'(0) = v0`
    /// for the underdamped case.
    fn damped_oscillator(m: f64, c: f64, k: f64, x0: f64, v0: f64, t: f64) -> f64 {
        let gamma = c / (2.0 * m);
        let beta = (k / m - gamma * gamma).sqrt();
        let b = (v0 + gamma * x0) / beta;
        (-gamma * t).exp() * (x0 * (beta * t).cos() + b * (beta * t).sin())
    }

    #[test]
    fn ps_pressure_cases() {
        let vacuum = params(0.0, 1.0, 0.0, 1.0, 0.0, 0.0);
        assert_eq!(ps_pressure(&vacuum, 3.0, 2.0, 1.0).unwrap(), 0.0);
        let p = params(2.0, 1.0, 0.0, 1.0, 0.0, 7.0);
        assert_eq!(ps_pressure(&p, 3.0, 11.0, 5.0).unwrap(), -47.0);
        assert_eq!(ps_pressure(&p, 0.3, 0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(
            ps_pressure(&p, 0.0, 1.0, 1.0),
            Err(PistonError::NonpositiveDisplacement { .. })
        ));
    }

    #[test]
    fn undamped_oscillator_at_unit_time() {
        let p = params(0.0, 1.0, 0.0, 1.0, 1.0, 0.0);
        let err = |dt: f64| {
            let traj = solve_monolithic(&p, 1.0, dt, MonolithicOptions::default()).unwrap();
            (traj.last().unwrap().1.d - 1.0f64.cos()).abs()
        };
        assert!(err(1e-3) < 1e-3);
        assert!(err(1e-4) < 1e-4);
    }

    #[test]
    fn equilibrium_is_preserved() {
        let p = params(0.0, 1.5, 0.0, 2.0, 0.0, 0.0);
        let traj = solve_monolithic(&p, 1.0, 0.01, MonolithicOptions::default()).unwrap();
        assert_eq!(traj.len(), 101);
        assert!(traj.states().iter().all(|s| s.d == 1.5 && s.v == 0.0));
    }

    #[test]
    fn linearized_mode_is_first_order_against_closed_form() {
        let p = params(0.1, 1.0, 0.0, 1.0, 1.0, 0.5);
        let opts = MonolithicOptions::with_model(FluidModel::Linearized);
        let err = |dt: f64| {
            let traj = solve_monolithic(&p, 1.0, dt, opts).unwrap();
            traj.times()
                .iter()
                .zip(traj.states())
                .map(|(&t, s)| (s.d - damped_oscillator(0.9, 0.5, 1.0, 1.0, 0.0, t)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(0.01), err(0.005), err(0.0025));
        for ratio in [e1 / e2, e2 / e3] {
            assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn nonlinear_tends_to_linearized_for_light_fluid() {
        let opts_nl = MonolithicOptions::default();
        let opts_lin = MonolithicOptions::with_model(FluidModel::Linearized);
        let gap = |rho: f64| {
            let p = params(rho, 1.0, 0.0, 1.0, 1.0, 0.5);
            let a = solve_monolithic(&p, 1.0, 0.01, opts_nl).unwrap();
            let b = solve_monolithic(&p, 1.0, 0.01, opts_lin).unwrap();
            a.max_abs_deviation(&b)
        };
        let (g1, g2) = (gap(0.02), gap(0.01));
        assert!(g1 > 0.0);
        assert_relative_eq!(g1 / g2, 2.0, max_relative = 0.05);
    }

    #[test]
    fn added_mass_singularity_is_reported() {
        let p = params(2.0, 1.0, 0.0, 1.0, 1.0, 0.0);
        let err = solve_monolithic(&p, 1.0, 0.1, MonolithicOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            PistonError::AddedMassSingularity { step: 0, .. }
        ));
    }

    #[test]
    fn column_collapse_is_an_error() {
        // the undamped spring drives the column length through zero near t = pi/2
        let p = params(0.0, 1.0, 0.0, 1.0, 1.0, 0.0);
        let err = solve_monolithic(&p, 2.0, 0.01, MonolithicOptions::default()).unwrap_err();
        assert!(matches!(err, PistonError::NonpositiveDisplacement { .. }));
    }

    #[test]
    fn invalid_grids() {
        let p = params(0.0, 1.0, 0.0, 1.0, 1.0, 0.0);
        assert!(solve_monolithic(&p, 1.0, 0.0, MonolithicOptions::default()).is_err());
        assert!(solve_monolithic(&p, 0.01, 0.1, MonolithicOptions::default()).is_err());
        assert!(solve_monolithic(&p, 1.05, 0.1, MonolithicOptions::default()).is_err());
        assert!(solid_step(&p, 1.0, 0.0, &[0.0, 0.0], -1.0).is_err());
        assert!(fluid_step(&p, &[1.0, 1.0, 1.0], 0.1, FluidModel::Nonlinear).is_err());
    }

    #[test]
    fn energy_never_increases_with_damping() {
        let p = params(0.0, 1.0, 0.7, 1.0, 2.0, 0.3);
        let traj = solve_monolithic(
            &p,
            1.0,
            0.01,
            MonolithicOptions::with_model(FluidModel::Linearized),
        )
        .unwrap();
        let energy: Vec<f64> = traj
            .states()
            .iter()
            .map(|s| 0.5 * p.m_s() * s.v * s.v + 0.5 * p.kappa_s() * s.d * s.d)
            .collect();
        assert!(energy.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn solid_step_cases() {
        let free = params(0.0, 1.0, 0.0, 1.0, 0.0, 0.0);
        let h = solid_step(&free, 2.0, 0.0, &[0.0; 9], 0.1).unwrap();
        assert!(h.d.iter().all(|&d| d == 2.0));

        let spring = params(0.0, 1.0, 0.0, 2.0, 4.0, 0.0);
        let c = 3.0;
        let h = solid_step(&spring, c / 4.0, 0.0, &[c; 9], 0.1).unwrap();
        assert!(h.d.iter().all(|&d| (d - 0.75).abs() < 1e-15));

        let unit = params(0.0, 1.0, 0.0, 1.0, 1.0, 0.0);
        let n = 20_000;
        let dt = 1.0 / n as f64;
        let h = solid_step(&unit, 0.0, 0.0, &vec![1.0; n + 1], dt).unwrap();
        for (j, d) in h.d.iter().enumerate().step_by(1000) {
            let t = j as f64 * dt;
            assert!((d - (1.0 - t.cos())).abs() < 1e-4);
        }
    }

    #[test]
    fn fluid_step_cases() {
        let p = params(1.0, 1.0, 0.0, 1.0, 0.0, 2.0);
        let still = fluid_step(&p, &[1.3; 6], 0.1, FluidModel::Nonlinear).unwrap();
        assert!(still.iter().all(|&x| x.abs() < 1e-12));

        let damp = params(0.0, 1.0, 0.0, 1.0, 0.0, 2.0);
        let eps = 0.4;
        let d: Vec<f64> = (0..8).map(|j| 1.0 + eps * j as f64 * 0.05).collect();
        let out = fluid_step(&damp, &d, 0.05, FluidModel::Nonlinear).unwrap();
        assert!(out.iter().all(|&x| (x + 2.0 * eps).abs() < 1e-12));

        let n = 257;
        let dt = 1.0 / (n - 1) as f64;
        let t: Vec<f64> = (0..n).map(|j| j as f64 * dt).collect();
        let d: Vec<f64> = t.iter().map(|t| 1.0 + 0.1 * t.sin()).collect();
        let out = fluid_step(&p, &d, dt, FluidModel::Nonlinear).unwrap();
        let err = out
            .iter()
            .zip(&t)
            .map(|(x, t)| (x - (-0.1 * (1.0 + 0.1 * t.sin()) * t.sin() - 0.2 * t.cos())).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "err {err}");

        assert!(matches!(
            fluid_step(&p, &[1.0, 0.5, 0.0, -0.5], 0.1, FluidModel::Nonlinear),
            Err(PistonError::NonpositiveDisplacement { index: 2, .. })
        ));
        assert!(fluid_step(&p, &[1.0, 0.5, 0.0, -0.5], 0.1, FluidModel::Linearized).is_ok());
    }

    #[test]
    fn monolithic_fixed_point_consistency() {
        // the monolithic trajectory's displacement, fed to the fluid, reproduces
        // its pressure; that pressure, fed to the solid, reproduces the displacement
        let p = params(0.3, 1.0, 0.2, 1.0, 1.0, 0.4);
        let opts = MonolithicOptions::with_model(FluidModel::Linearized);
        let err = |dt: f64| {
            let traj = solve_monolithic(&p, 0.5, dt, opts).unwrap();
            let d = traj.displacements();
            let pressure_mono: Vec<f64> = traj.states().iter().map(|s| s.p_interface).collect();
            let pressure = fluid_step(&p, &d, dt, FluidModel::Linearized).unwrap();
            let perr = pressure
                .iter()
                .zip(&pressure_mono)
                .skip(1)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let s = solid_step(&p, d[0], traj.states()[0].v, &pressure_mono, dt).unwrap();
            let derr =
                s.d.iter()
                    .zip(&d)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
            (perr, derr)
        };
        let (p1, d1) = err(0.01);
        let (p2, d2) = err(0.005);
        assert!(p2 < 0.6 * p1, "pressure {p1} -> {p2}");
        assert!(d1 < 1e-12 && d2 < 1e-12, "displacement {d1} {d2}");
    }

    #[test]
    fn trajectory_rejects_time_reversal_and_writes_csv() {
        let mut t = Trajectory::new();
        let s = PistonState::new(1.0, 0.5, -0.25).unwrap();
        t.push(0.0, s).unwrap();
        assert!(matches!(
            t.push(0.0, s),
            Err(PistonError::NonIncreasingTime)
        ));
        t.push(0.5, s).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,d,v,p\n0,1,0.5,-0.25\n0.5,1,0.5,-0.25\n"
        );
        assert!(PistonState::new(0.0, 0.0, 0.0).is_err());
        assert!(PistonState::new(1.0, f64::NAN, 0.0).is_err());
    }
}
