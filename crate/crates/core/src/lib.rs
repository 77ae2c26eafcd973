//! Leaky-piston fluid-structure interaction and the Dirichlet-Neumann
//! subiteration error analysis.

pub mod config;
pub mod coupling;
pub mod figure3;
pub mod model;
pub mod output;
pub mod piston;
pub mod scalar;
pub mod sensitivity;
pub mod stencil;
pub mod sweep;
pub mod volterra;

pub use coupling::{
    initial_state, observed_rate, run_transient, subiterate, subiterate_step, CouplingConfig,
    CouplingError, DivergenceCause, IterationTrace, PartitionedOptions, PistonCoupling, Status,
    TransientResult,
};
pub use model::{nondimensionalize, DimensionlessGroups, ParamError, ParamField, PistonParams};
pub use piston::{
    fluid_step, ps_pressure, solid_step, solve_monolithic, FluidModel, MonolithicOptions,
    PistonError, PistonState, Trajectory,
};
pub use scalar::Scalar;
pub use sensitivity::{pressure_shift, RobinBoundarySpec, SensitivityError};
pub use volterra::{GridFunction, OperatorConfig, VolterraError, VolterraOperators};

pub type PistonParamsF64 = PistonParams<f64>;
pub type PistonParamsF32 = PistonParams<f32>;
pub type GridFunctionF64 = GridFunction<f64>;
pub type GridFunctionF32 = GridFunction<f32>;
pub type TrajectoryF64 = Trajectory<f64>;
pub type TrajectoryF32 = Trajectory<f32>;
