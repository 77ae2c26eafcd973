//! Command-line front end: figure reproduction, rate sweeps, piston runs and
//! operator exports. Every invocation writes CSV files plus a flat
//! `manifest.txt` into the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use leaky_piston::config::RunConfig;
use leaky_piston::coupling::Status;
use leaky_piston::figure3::{self, Figure3Spec};
use leaky_piston::output::{self, Manifest};
use leaky_piston::sensitivity::{pressure_shift, RobinBoundarySpec};
use leaky_piston::sweep::{self, SweepSpec};
use leaky_piston::volterra::{self, GridFunction, OperatorConfig, VolterraOperators};
use leaky_piston::{run_transient, solve_monolithic, MonolithicOptions, ParamField};

#[derive(Debug, Parser)]
#[command(
    name = "leaky-piston",
    version,
    about = "Dirichlet-Neumann subiteration on the leaky piston"
)]
pub struct Cli {
    /// Run configuration (`name = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Reserved; every run is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterates of the pure added-damping map from eps_0 = s^2 and their norm ratios.
    Figure3(Figure3Args),
    /// Convergence-rate sweep over one parameter of the configured base case.
    Sweep(SweepArgs),
    /// Transient piston run, monolithic and/or partitioned.
    Piston(PistonArgs),
    /// Pressure-level shift of a nearly-closed domain.
    Sensitivity(SensitivityArgs),
    /// Volterra operator actions, norm histories and commutators.
    Operators(OperatorArgs),
}

#[derive(Debug, Args)]
pub struct Figure3Args {
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 5.0])]
    pub alpha_d: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, default_value_t = volterra::DEFAULT_NODES)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// One of kappa_f, tau, m_s, rho_f.
    #[arg(long)]
    pub parameter: ParamField,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Ramp period before the measured step (overrides the config).
    #[arg(long)]
    pub spinup: Option<f64>,
    /// Fitting window `k_lo,k_hi`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [2, 6])]
    pub window: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Monolithic,
    Partitioned,
    Both,
}

#[derive(Debug, Args)]
pub struct PistonArgs {
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    pub mode: Mode,
    /// End time (overrides the config).
    #[arg(long)]
    pub t_fin: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.0)]
    pub kappa_ref: f64,
    #[arg(long)]
    pub area: f64,
    #[arg(long)]
    pub vdot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Operation {
    ApplyLd,
    ApplyLm,
    NormHistory,
    Commutator,
    QuasiNilpotency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Input {
    Ones,
    Square,
}

impl Input {
    fn eval(self, s: f64) -> f64 {
        match self {
            Input::Ones => 1.0,
            Input::Square => s * s,
        }
    }
}

#[derive(Debug, Args)]
pub struct OperatorArgs {
    #[arg(value_enum)]
    pub operation: Operation,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, default_value_t = volterra::DEFAULT_NODES)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = Input::Square)]
    pub input: Input,
    #[arg(long, default_value_t = 0.0)]
    pub alpha_m: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_d: f64,
    /// Number of iterates or powers.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

/// Process exit code of a finished command.
pub fn exit_code(status: Status) -> u8 {
    match status {
        Status::Converged => 0,
        Status::MaxIters => 2,
        Status::Diverged => 3,
        Status::Failed => 1,
    }
}

/// Result of one invocation: the status and a short report for stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub report: String,
}

impl Outcome {
    fn ok(report: String) -> Self {
        Outcome {
            status: Status::Converged,
            report,
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut manifest = Manifest::new();
    manifest
        .set("program", "leaky-piston")
        .set("version", env!("CARGO_PKG_VERSION"))
        .set("command", command_name(&cli.command));
    if let Some(path) = &cli.config {
        manifest.set("config", path.display());
    }
    if let Some(seed) = cli.seed {
        manifest.set("seed", seed);
    }
    let outcome = match &cli.command {
        Command::Figure3(a) => cmd_figure3(a, &cli.out, &mut manifest)?,
        Command::Sweep(a) => cmd_sweep(a, cli, &mut manifest)?,
        Command::Piston(a) => cmd_piston(a, cli, &mut manifest)?,
        Command::Sensitivity(a) => cmd_sensitivity(a, &mut manifest)?,
        Command::Operators(a) => cmd_operators(a, &cli.out, &mut manifest)?,
    };
    manifest.set("status", outcome.status.name());
    let path = cli.out.join("manifest.txt");
    manifest
        .save(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(outcome)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Figure3(_) => "figure3",
        Command::Sweep(_) => "sweep",
        Command::Piston(_) => "piston",
        Command::Sensitivity(_) => "sensitivity",
        Command::Operators(_) => "operators",
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let Some(path) = &cli.config else {
        bail!("this command needs --config <file>");
    };
    RunConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn record_files(manifest: &mut Manifest, files: &[PathBuf]) {
    let names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    manifest.set("files", names.join(" "));
}

fn record_params(manifest: &mut Manifest, cfg: &RunConfig) {
    for f in ParamField::ALL {
        manifest.set(f.name(), cfg.params.get(f));
    }
    let g = cfg.params.groups();
    manifest
        .set("omega", g.omega)
        .set("alpha_m", g.alpha_m)
        .set("alpha_d", g.alpha_d)
        .set("tol", cfg.coupling.tol)
        .set("max_iters", cfg.coupling.max_iters)
        .set("relaxation", cfg.coupling.relaxation)
        .set("extrapolation_order", cfg.coupling.extrapolation_order)
        .set("inner_steps", cfg.partitioned.inner_steps)
        .set("fluid_model", cfg.partitioned.model.name());
}

fn cmd_figure3(a: &Figure3Args, out: &Path, manifest: &mut Manifest) -> Result<Outcome> {
    let spec = Figure3Spec {
        alpha_d: a.alpha_d.clone(),
        omega: a.omega,
        n: a.n,
        k_max: a.k_max,
    };
    let series = figure3::compute(&spec)?;
    let files = figure3::write(&series, out)?;
    manifest
        .set("alpha_d", format!("{:?}", a.alpha_d))
        .set("omega", a.omega)
        .set("n", a.n)
        .set("k_max", a.k_max);
    record_files(manifest, &files);
    let mut report = String::new();
    for s in &series {
        let ratios: Vec<String> = s.ratios.iter().map(|r| format!("{r:.4}")).collect();
        writeln!(report, "alpha_d = {}: {}", s.alpha_d, ratios.join(" "))?;
    }
    Ok(Outcome::ok(report))
}

fn cmd_sweep(a: &SweepArgs, cli: &Cli, manifest: &mut Manifest) -> Result<Outcome> {
    let cfg = load_config(cli)?;
    let mut spec = SweepSpec::new(a.parameter, a.values.clone(), cfg.params, cfg.coupling)?;
    spec.options = cfg.partitioned;
    spec.spinup = a.spinup.or(cfg.spinup).unwrap_or(sweep::DEFAULT_SPINUP);
    spec.rate_window = (a.window[0], a.window[1]);
    spec.validate()?;
    let result = sweep::run_sweep(&spec, cli.jobs)?;
    let files = result.save(&cli.out)?;
    record_params(manifest, &cfg);
    manifest
        .set("parameter", a.parameter.name())
        .set("values", format!("{:?}", a.values))
        .set("spinup", spec.spinup)
        .set("rate_window", format!("{},{}", a.window[0], a.window[1]))
        .set("jobs", cli.jobs);
    record_files(manifest, &files);
    let mut report = String::new();
    for r in &result.records {
        let rate = r
            .rate
            .map(|x| format!("{x:.4}"))
            .unwrap_or_else(|| "n/a".into());
        writeln!(
            report,
            "{} = {}: a = {rate}, {} after {} iterations",
            a.parameter.name(),
            r.value,
            r.status.name(),
            r.trace.iterations()
        )?;
    }
    Ok(Outcome::ok(report))
}

fn cmd_piston(a: &PistonArgs, cli: &Cli, manifest: &mut Manifest) -> Result<Outcome> {
    let cfg = load_config(cli)?;
    let Some(t_fin) = a.t_fin.or(cfg.t_fin) else {
        bail!("t_fin missing: pass --t-fin or set it in the config");
    };
    record_params(manifest, &cfg);
    manifest
        .set("mode", format!("{:?}", a.mode).to_lowercase())
        .set("t_fin", t_fin);
    let out = &cli.out;
    let mut files = Vec::new();
    let mut report = String::new();
    let dt = cfg.params.tau() / cfg.partitioned.inner_steps as f64;

    let mono = if a.mode != Mode::Partitioned {
        let traj = solve_monolithic(
            &cfg.params,
            t_fin,
            dt,
            MonolithicOptions::with_model(cfg.partitioned.model),
        )
        .context("monolithic solve")?;
        let path = out.join("monolithic.csv");
        traj.save_csv(&path)?;
        files.push(path);
        writeln!(report, "monolithic: {} nodes", traj.len())?;
        Some(traj)
    } else {
        None
    };

    let mut status = Status::Converged;
    if a.mode != Mode::Monolithic {
        match run_transient(&cfg.params, &cfg.coupling, cfg.partitioned, t_fin) {
            Ok((traj, traces)) => {
                let path = out.join("partitioned.csv");
                traj.save_csv(&path)?;
                files.push(path);
                let path = out.join("iterations.csv");
                write_iterations(&path, &traces)?;
                files.push(path);
                let total: usize = traces.iter().map(|t| t.iterations()).sum();
                writeln!(
                    report,
                    "partitioned: {} steps, {total} subiterations",
                    traces.len()
                )?;
                if let Some(mono) = &mono {
                    let dev = traj.max_relative_deviation(mono);
                    let path = out.join("deviation.csv");
                    let mut w = output::create(&path)?;
                    std::io::Write::write_all(
                        &mut w,
                        format!("max_relative_deviation\n{dev}\n").as_bytes(),
                    )?;
                    std::io::Write::flush(&mut w)?;
                    files.push(path);
                    manifest.set("max_relative_deviation", dev);
                    writeln!(report, "max relative displacement deviation: {dev:e}")?;
                }
            }
            Err(err) => {
                status = Status::of_error(&err);
                if let Some(trace) = err.trace() {
                    let path = out.join("failed_step_trace.csv");
                    trace.save_csv(&path)?;
                    files.push(path);
                }
                manifest.set("error", &err);
                writeln!(report, "partitioned: {err}")?;
            }
        }
    }
    record_files(manifest, &files);
    Ok(Outcome { status, report })
}

fn write_iterations(path: &Path, traces: &[leaky_piston::IterationTrace<f64>]) -> Result<()> {
    let mut text = String::from("step,iterations,final_residual\n");
    for (n, t) in traces.iter().enumerate() {
        let last = t.residuals.last().copied().unwrap_or(0.0);
        writeln!(text, "{},{},{last}", n + 1, t.iterations())?;
    }
    let mut w = output::create(path)?;
    std::io::Write::write_all(&mut w, text.as_bytes())?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

fn cmd_sensitivity(a: &SensitivityArgs, manifest: &mut Manifest) -> Result<Outcome> {
    let spec = RobinBoundarySpec::new(a.kappa, a.kappa_ref, a.area, a.vdot)?;
    let lambda = pressure_shift(&spec)?;
    manifest
        .set("kappa", a.kappa)
        .set("kappa_ref", a.kappa_ref)
        .set("area", a.area)
        .set("vdot", a.vdot)
        .set("lambda", lambda);
    Ok(Outcome::ok(format!("{lambda}\n")))
}

fn cmd_operators(a: &OperatorArgs, out: &Path, manifest: &mut Manifest) -> Result<Outcome> {
    let ops = VolterraOperators::new(OperatorConfig::new(a.omega, a.n)?);
    let input = a.input;
    let eps = GridFunction::from_fn(a.n, |s| input.eval(s))?;
    manifest
        .set("operation", format!("{:?}", a.operation))
        .set("omega", a.omega)
        .set("n", a.n)
        .set("input", format!("{:?}", a.input).to_lowercase());
    let (file, report) = match a.operation {
        Operation::ApplyLd | Operation::ApplyLm => {
            let (res, name) = if a.operation == Operation::ApplyLd {
                (ops.apply_ld(&eps)?, "apply_ld.csv")
            } else {
                (ops.apply_lm(&eps)?, "apply_lm.csv")
            };
            let path = out.join(name);
            res.save_csv(&path)?;
            let report = format!("H1 norm {}\n", volterra::h1_norm(&res)?);
            (Some(path), report)
        }
        Operation::NormHistory => {
            manifest
                .set("alpha_m", a.alpha_m)
                .set("alpha_d", a.alpha_d)
                .set("k", a.k);
            let ratios = ops.norm_history(a.alpha_m, a.alpha_d, &eps, a.k)?;
            let path = out.join("norm_history.csv");
            volterra::write_norm_history(&ratios, output::create(&path)?)?;
            let text: Vec<String> = ratios.iter().map(|r| format!("{r:.6}")).collect();
            (Some(path), format!("{}\n", text.join(" ")))
        }
        Operation::Commutator => {
            let c = ops.commutator_norm(&eps)?;
            manifest.set("commutator_norm", c);
            (None, format!("{c}\n"))
        }
        Operation::QuasiNilpotency => {
            manifest.set("k", a.k);
            let r = ops.quasi_nilpotency_estimate(&eps, a.k)?;
            let path = out.join("quasi_nilpotency.csv");
            let mut text = String::from("k,r_k\n");
            for (i, x) in r.iter().enumerate() {
                writeln!(text, "{},{x}", i + 1)?;
            }
            let mut w = output::create(&path)?;
            std::io::Write::write_all(&mut w, text.as_bytes())?;
            std::io::Write::flush(&mut w)?;
            let shown: Vec<String> = r.iter().map(|x| format!("{x:.4}")).collect();
            (Some(path), format!("{}\n", shown.join(" ")))
        }
    };
    if let Some(f) = file {
        record_files(manifest, &[f]);
    }
    Ok(Outcome::ok(report))
}
