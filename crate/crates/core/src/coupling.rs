//! Dirichlet-Neumann subiteration.
//!
//! Within one time step the structure receives the interface traction
//! (Neumann data) and returns its interface displacement; the fluid receives
//! that displacement (Dirichlet data) and returns a new traction. The loop
//! repeats until the RMS update of the transferred traction drops below the
//! tolerance. Optional under-relaxation replaces the transferred traction by a
//! convex combination of the two most recent iterates.
//!
//! [`subiterate`] is generic over the two subproblems; [`PistonCoupling`]
//! instantiates it with the leaky-piston solid and fluid solvers.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::model::PistonParams;
use crate::output;
use crate::piston::{self, FluidModel, PistonError, PistonState, Trajectory};
use crate::scalar::{rms_diff, Scalar};

/// Residual growth beyond this factor over the first residual counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

/// Default number of implicit-Euler substeps per coupling step.
pub const DEFAULT_INNER_STEPS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceCause {
    /// A residual exceeded [`DIVERGENCE_FACTOR`] times the first one.
    ResidualGuard,
    /// A residual was NaN or infinite.
    NonFinite,
    /// A growing iterate left the admissible set of a subproblem.
    InadmissibleIterate,
}

#[derive(Debug, Error)]
pub enum CouplingError<T: Scalar> {
    #[error("diverged after {} iterations ({cause:?}){}", trace.iterations(), at(*step))]
    Diverged {
        trace: IterationTrace<T>,
        cause: DivergenceCause,
        step: Option<usize>,
    },
    #[error("max_iters_exceeded: {} iterations without reaching tolerance{}", trace.iterations(), at(*step))]
    MaxItersExceeded {
        trace: IterationTrace<T>,
        step: Option<usize>,
    },
    #[error("subproblem failed in iteration {iteration}{}: {source}", at(*step))]
    Subproblem {
        iteration: usize,
        trace: IterationTrace<T>,
        step: Option<usize>,
        #[source]
        source: PistonError,
    },
    #[error("invalid coupling configuration: {0}")]
    InvalidConfig(String),
}

fn at(step: Option<usize>) -> String {
    step.map(|s| format!(" at time step {s}"))
        .unwrap_or_default()
}

impl<T: Scalar> CouplingError<T> {
    /// Attaches the time-step index.
    pub fn at_step(self, n: usize) -> Self {
        match self {
            CouplingError::Diverged { trace, cause, .. } => CouplingError::Diverged {
                trace,
                cause,
                step: Some(n),
            },
            CouplingError::MaxItersExceeded { trace, .. } => CouplingError::MaxItersExceeded {
                trace,
                step: Some(n),
            },
            CouplingError::Subproblem {
                iteration,
                trace,
                source,
                ..
            } => CouplingError::Subproblem {
                iteration,
                trace,
                step: Some(n),
                source,
            },
            other => other,
        }
    }

    /// The partial trace, when the error carries one.
    pub fn trace(&self) -> Option<&IterationTrace<T>> {
        match self {
            CouplingError::Diverged { trace, .. }
            | CouplingError::MaxItersExceeded { trace, .. }
            | CouplingError::Subproblem { trace, .. } => Some(trace),
            CouplingError::InvalidConfig(_) => None,
        }
    }

    pub fn step(&self) -> Option<usize> {
        match self {
            CouplingError::Diverged { step, .. }
            | CouplingError::MaxItersExceeded { step, .. }
            | CouplingError::Subproblem { step, .. } => *step,
            CouplingError::InvalidConfig(_) => None,
        }
    }
}

/// Termination status of a subiteration, also used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
    Failed,
}

impl Status {
    pub fn of<T: Scalar, V>(result: &Result<V, CouplingError<T>>) -> Status {
        match result {
            Ok(_) => Status::Converged,
            Err(e) => Status::of_error(e),
        }
    }

    pub fn of_error<T: Scalar>(err: &CouplingError<T>) -> Status {
        match err {
            CouplingError::MaxItersExceeded { .. } => Status::MaxIters,
            CouplingError::Diverged { .. } => Status::Diverged,
            _ => Status::Failed,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters_exceeded",
            Status::Diverged => "diverged",
            Status::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConfig<T> {
    /// Tolerance on the RMS traction update.
    pub tol: T,
    pub max_iters: usize,
    /// Under-relaxation factor in `(0, 1]`; 1 is plain Gauss-Seidel.
    pub relaxation: T,
    /// Polynomial order (0, 1 or 2) of the initial displacement estimate.
    pub extrapolation_order: usize,
}

impl<T: Scalar> CouplingConfig<T> {
    pub fn new(
        tol: T,
        max_iters: usize,
        relaxation: T,
        extrapolation_order: usize,
    ) -> Result<Self, CouplingError<T>> {
        let cfg = CouplingConfig {
            tol,
            max_iters,
            relaxation,
            extrapolation_order,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CouplingError<T>> {
        if !(self.tol.is_finite() && self.tol > T::zero()) {
            return Err(CouplingError::InvalidConfig(format!(
                "tol = {} must be > 0",
                self.tol
            )));
        }
        if self.max_iters < 1 {
            return Err(CouplingError::InvalidConfig(
                "max_iters must be >= 1".into(),
            ));
        }
        if !(self.relaxation > T::zero() && self.relaxation <= T::one()) {
            return Err(CouplingError::InvalidConfig(format!(
                "relaxation = {} must lie in (0, 1]",
                self.relaxation
            )));
        }
        if self.extrapolation_order > 2 {
            return Err(CouplingError::InvalidConfig(format!(
                "extrapolation_order = {} must be 0, 1 or 2",
                self.extrapolation_order
            )));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for CouplingConfig<T> {
    fn default() -> Self {
        CouplingConfig {
            tol: T::lit(1e-10),
            max_iters: 100,
            relaxation: T::one(),
            extrapolation_order: 2,
        }
    }
}

/// Trajectory plus one trace per coupling step.
pub type TransientResult<T> = Result<(Trajectory<T>, Vec<IterationTrace<T>>), CouplingError<T>>;

/// RMS traction updates `||p_k - p_{k-1}||_rms`, one per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace<T> {
    pub residuals: Vec<T>,
    pub converged: bool,
}

impl<T> Default for IterationTrace<T> {
    fn default() -> Self {
        IterationTrace {
            residuals: Vec::new(),
            converged: false,
        }
    }
}

impl<T: Scalar> IterationTrace<T> {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }

    /// Writes `k,residual_rms` rows with `k` counted from 1.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["k", "residual_rms"])?;
        for (k, r) in self.residuals.iter().enumerate() {
            wtr.write_record([(k + 1).to_string(), r.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), csv::Error> {
        self.write_csv(output::create(path)?)
    }
}

/// Structure subproblem: traction history in, interface displacement history out.
pub trait StructureSolver<T> {
    fn solve(&mut self, traction: &[T]) -> Result<Vec<T>, PistonError>;
}

/// Fluid subproblem: interface displacement history in, traction history out.
pub trait FluidSolver<T> {
    fn solve(&mut self, displacement: &[T]) -> Result<Vec<T>, PistonError>;
}

/// Converged interface data of one subiteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Subiteration<T> {
    pub displacement: Vec<T>,
    pub traction: Vec<T>,
    pub trace: IterationTrace<T>,
}

/// Runs the subiteration from an initial displacement estimate. `observe` is
/// called after every iteration with `(k, displacement_k, traction_k)`.
pub fn subiterate<T, S, F>(
    structure: &mut S,
    fluid: &mut F,
    initial_displacement: &[T],
    cfg: &CouplingConfig<T>,
    mut observe: impl FnMut(usize, &[T], &[T]),
) -> Result<Subiteration<T>, CouplingError<T>>
where
    T: Scalar,
    S: StructureSolver<T>,
    F: FluidSolver<T>,
{
    cfg.validate()?;
    let mut trace = IterationTrace::default();
    let mut transferred =
        fluid
            .solve(initial_displacement)
            .map_err(|source| CouplingError::Subproblem {
                iteration: 0,
                trace: trace.clone(),
                step: None,
                source,
            })?;
    let guard = T::lit(DIVERGENCE_FACTOR);
    for k in 1..=cfg.max_iters {
        let solved = structure
            .solve(&transferred)
            .and_then(|d| fluid.solve(&d).map(|p| (d, p)));
        let (displacement, traction) = match solved {
            Ok(pair) => pair,
            Err(source) => {
                let growing =
                    trace.residuals.len() >= 2 && trace.residuals.last() > trace.residuals.first();
                return Err(if growing {
                    CouplingError::Diverged {
                        trace,
                        cause: DivergenceCause::InadmissibleIterate,
                        step: None,
                    }
                } else {
                    CouplingError::Subproblem {
                        iteration: k,
                        trace,
                        step: None,
                        source,
                    }
                });
            }
        };
        let residual = rms_diff(&traction, &transferred);
        observe(k, &displacement, &traction);
        if !residual.is_finite() {
            return Err(CouplingError::Diverged {
                trace,
                cause: DivergenceCause::NonFinite,
                step: None,
            });
        }
        trace.residuals.push(residual);
        if residual > guard * trace.residuals[0] {
            return Err(CouplingError::Diverged {
                trace,
                cause: DivergenceCause::ResidualGuard,
                step: None,
            });
        }
        if residual < cfg.tol {
            trace.converged = true;
            return Ok(Subiteration {
                displacement,
                traction,
                trace,
            });
        }
        if cfg.relaxation == T::one() {
            transferred = traction;
        } else {
            let alpha = cfg.relaxation;
            for (old, new) in transferred.iter_mut().zip(&traction) {
                *old = alpha * *new + (T::one() - alpha) * *old;
            }
        }
    }
    Err(CouplingError::MaxItersExceeded { trace, step: None })
}

/// Least-squares slope of `log10(residual)` against the iteration counter over
/// `k_lo..=k_hi` (counted from 1): the per-iteration rate exponent.
pub fn observed_rate<T: Scalar>(
    trace: &IterationTrace<T>,
    k_lo: usize,
    k_hi: usize,
) -> Result<T, RateError> {
    if k_lo < 1 || k_hi < k_lo + 2 {
        return Err(RateError::Window { k_lo, k_hi });
    }
    if k_hi > trace.iterations() {
        return Err(RateError::TooShort {
            needed: k_hi,
            got: trace.iterations(),
        });
    }
    let window = &trace.residuals[k_lo - 1..k_hi];
    if let Some(i) = window.iter().position(|&r| r.is_nan() || r <= T::zero()) {
        return Err(RateError::NonpositiveResidual { k: k_lo + i });
    }
    let m = T::count(window.len());
    let ks: Vec<T> = (k_lo..=k_hi).map(T::count).collect();
    let ys: Vec<T> = window.iter().map(|r| r.log10()).collect();
    let k_mean = ks.iter().copied().sum::<T>() / m;
    let y_mean = ys.iter().copied().sum::<T>() / m;
    let num: T = ks
        .iter()
        .zip(&ys)
        .map(|(&k, &y)| (k - k_mean) * (y - y_mean))
        .sum();
    let den: T = ks.iter().map(|&k| (k - k_mean) * (k - k_mean)).sum();
    Ok(num / den)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error(
        "rate window [{k_lo}, {k_hi}] must start at 1 or later and span at least 3 iterations"
    )]
    Window { k_lo: usize, k_hi: usize },
    #[error("trace has {got} iterations, window needs {needed}")]
    TooShort { needed: usize, got: usize },
    #[error("residual at iteration {k} is not positive; rate undefined")]
    NonpositiveResidual { k: usize },
}

/// Options of the partitioned piston solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionedOptions {
    pub model: FluidModel,
    pub inner_steps: usize,
}

impl Default for PartitionedOptions {
    fn default() -> Self {
        PartitionedOptions {
            model: FluidModel::Linearized,
            inner_steps: DEFAULT_INNER_STEPS,
        }
    }
}

/// Leaky piston split into its solid and fluid subproblems on the inner grid
/// of one coupling step `(0, tau)`.
#[derive(Debug, Clone)]
pub struct PistonCoupling<T> {
    params: PistonParams<T>,
    opts: PartitionedOptions,
}

struct PistonStructure<'a, T> {
    params: &'a PistonParams<T>,
    d0: T,
    v0: T,
    dt: T,
    velocity: Vec<T>,
}

impl<T: Scalar> StructureSolver<T> for PistonStructure<'_, T> {
    fn solve(&mut self, traction: &[T]) -> Result<Vec<T>, PistonError> {
        let h = piston::solid_step_relative(self.params, self.d0, self.v0, traction, self.dt)?;
        self.velocity = h.v;
        Ok(h.d)
    }
}

struct PistonFluid<'a, T> {
    params: &'a PistonParams<T>,
    d0: T,
    dt: T,
    model: FluidModel,
}

impl<T: Scalar> FluidSolver<T> for PistonFluid<'_, T> {
    fn solve(&mut self, displacement: &[T]) -> Result<Vec<T>, PistonError> {
        piston::fluid_step_relative(self.params, self.d0, displacement, self.dt, self.model)
    }
}

/// End-of-step result of [`PistonCoupling::step`], with the inner-grid histories.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<T> {
    pub state: PistonState<T>,
    pub displacement: Vec<T>,
    pub velocity: Vec<T>,
    pub pressure: Vec<T>,
    pub trace: IterationTrace<T>,
}

impl<T: Scalar> PistonCoupling<T> {
    pub fn new(
        params: PistonParams<T>,
        opts: PartitionedOptions,
    ) -> Result<Self, CouplingError<T>> {
        if opts.inner_steps < 3 {
            return Err(CouplingError::InvalidConfig(format!(
                "inner_steps = {} must be >= 3",
                opts.inner_steps
            )));
        }
        Ok(PistonCoupling { params, opts })
    }

    pub fn params(&self) -> &PistonParams<T> {
        &self.params
    }

    pub fn options(&self) -> &PartitionedOptions {
        &self.opts
    }

    /// Inner substep `tau / inner_steps`.
    pub fn dt(&self) -> T {
        self.params.tau() / T::count(self.opts.inner_steps)
    }

    /// Initial estimate of the displacement increment `d(t) - init.d` on the
    /// inner grid. `prior` holds step-end displacements, oldest first, ending
    /// with `init.d`; the estimate is the polynomial of degree `order` through
    /// the last `order + 1` of them (lower if fewer are available). With a
    /// single point and `order >= 1`, the current velocity supplies the slope.
    pub fn initial_estimate(&self, init: &PistonState<T>, prior: &[T], order: usize) -> Vec<T> {
        let n = self.opts.inner_steps;
        let tau = self.params.tau();
        let dt = self.dt();
        let mut points: Vec<T> = prior.iter().map(|&d| d - init.d).collect();
        if points.last() != Some(&T::zero()) {
            points.push(T::zero());
        }
        let used = (order + 1).min(points.len());
        let pts = &points[points.len() - used..];
        // Lagrange nodes t_i = -(used - 1 - i) tau.
        let nodes: Vec<T> = (0..used).map(|i| -T::count(used - 1 - i) * tau).collect();
        (0..=n)
            .map(|j| {
                let t = T::count(j) * dt;
                if j == 0 || order == 0 {
                    return T::zero();
                }
                if used == 1 {
                    return init.v * t;
                }
                let mut acc = T::zero();
                for (i, &yi) in pts.iter().enumerate() {
                    let mut basis = T::one();
                    for (m, &tm) in nodes.iter().enumerate() {
                        if m != i {
                            basis = basis * (t - tm) / (nodes[i] - tm);
                        }
                    }
                    acc = acc + yi * basis;
                }
                acc
            })
            .collect()
    }

    /// One coupling step from `init`, starting from an estimate of the
    /// displacement increment `d(t) - init.d` (see [`Self::initial_estimate`]).
    /// `observe` sees increments as well; the result holds absolute displacements.
    pub fn step_from(
        &self,
        cfg: &CouplingConfig<T>,
        init: &PistonState<T>,
        estimate: &[T],
        observe: impl FnMut(usize, &[T], &[T]),
    ) -> Result<StepResult<T>, CouplingError<T>> {
        let dt = self.dt();
        let mut structure = PistonStructure {
            params: &self.params,
            d0: init.d,
            v0: init.v,
            dt,
            velocity: Vec::new(),
        };
        let mut fluid = PistonFluid {
            params: &self.params,
            d0: init.d,
            dt,
            model: self.opts.model,
        };
        let out = subiterate(&mut structure, &mut fluid, estimate, cfg, observe)?;
        let velocity = structure.velocity;
        let displacement: Vec<T> = out.displacement.iter().map(|&w| init.d + w).collect();
        let last = displacement.len() - 1;
        let state = PistonState::new(displacement[last], velocity[last], out.traction[last])
            .map_err(|source| CouplingError::Subproblem {
                iteration: out.trace.iterations(),
                trace: out.trace.clone(),
                step: None,
                source,
            })?;
        Ok(StepResult {
            state,
            displacement,
            velocity,
            pressure: out.traction,
            trace: out.trace,
        })
    }

    /// One coupling step from `init` with the extrapolated initial estimate.
    pub fn step(
        &self,
        cfg: &CouplingConfig<T>,
        init: &PistonState<T>,
        prior: &[T],
    ) -> Result<StepResult<T>, CouplingError<T>> {
        let estimate = self.initial_estimate(init, prior, cfg.extrapolation_order);
        self.step_from(cfg, init, &estimate, |_, _, _| {})
    }

    /// One application of the iteration-error map `eps -> S(F(eps))`, with the
    /// fluid and structure both linear and started from rest. Requires the
    /// linearized fluid model.
    pub fn error_map(&self, eps: &[T]) -> Result<Vec<T>, PistonError> {
        let dt = self.dt();
        let p = piston::fluid_step(&self.params, eps, dt, FluidModel::Linearized)?;
        Ok(piston::solid_step(&self.params, T::zero(), T::zero(), &p, dt)?.d)
    }

    /// Marches `(0, t_fin)` in steps of `tau`, subiterating each step. The
    /// trajectory holds every inner node.
    pub fn run_transient(&self, cfg: &CouplingConfig<T>, t_fin: T) -> TransientResult<T> {
        cfg.validate()?;
        let tau = self.params.tau();
        let steps = piston::step_count(t_fin, tau)
            .map_err(|e| CouplingError::InvalidConfig(e.to_string()))?;
        let n_inner = self.opts.inner_steps;
        let dt = self.dt();
        let mut state = initial_state(&self.params, self.opts.model)
            .map_err(|e| CouplingError::InvalidConfig(e.to_string()))?;
        let mut traj = Trajectory::new();
        traj.push(T::zero(), state).expect("first point");
        let mut prior = vec![state.d];
        let mut traces = Vec::with_capacity(steps);
        for n in 0..steps {
            let res = self
                .step(cfg, &state, &prior)
                .map_err(|e| e.at_step(n + 1))?;
            for j in 1..=n_inner {
                let s = PistonState::new(res.displacement[j], res.velocity[j], res.pressure[j])
                    .map_err(|source| CouplingError::Subproblem {
                        iteration: res.trace.iterations(),
                        trace: res.trace.clone(),
                        step: Some(n + 1),
                        source,
                    })?;
                traj.push(T::count(n * n_inner + j) * dt, s)
                    .expect("increasing inner times");
            }
            state = res.state;
            prior.push(state.d);
            if prior.len() > 3 {
                prior.remove(0);
            }
            traces.push(res.trace);
        }
        Ok((traj, traces))
    }
}

/// Initial state of a partitioned run. Where the coupled system has no
/// positive effective mass the initial acceleration is undefined and the
/// recorded pressure falls back to its damping part `-kappa_f u0`; the
/// subiteration never transfers the pressure at `t = 0`.
pub fn initial_state<T: Scalar>(
    params: &PistonParams<T>,
    model: FluidModel,
) -> Result<PistonState<T>, PistonError> {
    match PistonState::initial(params, model) {
        Err(PistonError::AddedMassSingularity { .. }) => {
            PistonState::new(params.ell0(), params.u0(), -params.kappa_f() * params.u0())
        }
        other => other,
    }
}

/// Single coupling step from `init` (no prior history beyond `init`).
pub fn subiterate_step<T: Scalar>(
    params: &PistonParams<T>,
    cfg: &CouplingConfig<T>,
    opts: PartitionedOptions,
    init: &PistonState<T>,
) -> Result<(PistonState<T>, IterationTrace<T>), CouplingError<T>> {
    let coupling = PistonCoupling::new(*params, opts)?;
    let res = coupling.step(cfg, init, &[init.d])?;
    Ok((res.state, res.trace))
}

pub fn run_transient<T: Scalar>(
    params: &PistonParams<T>,
    cfg: &CouplingConfig<T>,
    opts: PartitionedOptions,
    t_fin: T,
) -> TransientResult<T> {
    PistonCoupling::new(*params, opts)?.run_transient(cfg, t_fin)
}
