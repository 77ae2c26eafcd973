//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use leaky_piston::coupling::{
    subiterate_step, CouplingConfig, CouplingError, DivergenceCause, PartitionedOptions,
};
use leaky_piston::figure3::{self, Figure3Spec};
use leaky_piston::piston::{solve_monolithic, FluidModel, MonolithicOptions};
use leaky_piston::sensitivity::{pressure_shift, RobinBoundarySpec};
use leaky_piston::sweep::{run_sweep, SweepResult, SweepSpec};
use leaky_piston::volterra::{GridFunction, OperatorConfig, VolterraOperators};
use leaky_piston::{initial_state, run_transient, ParamField, PistonCoupling, PistonParams};

type Outcome = Result<String, String>;

fn check(cond: bool, what: String) -> Outcome {
    if cond {
        Ok(what)
    } else {
        Err(what)
    }
}

fn simpson(f: impl Fn(f64) -> f64, m: usize) -> f64 {
    let h = 1.0 / m as f64;
    let inner: f64 = (1..m)
        .map(|i| f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    h / 3.0 * (f(0.0) + inner + f(1.0))
}

fn figure3_shape() -> Outcome {
    let started = Instant::now();
    let series = figure3::compute(&Figure3Spec::default()).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let (two, five) = (&series[0], &series[1]);
    let m = 100_000;
    let a = simpson(|s| (s - s.sin()).powi(2), m);
    let b = simpson(|s| (1.0 - s.cos()).powi(2), m);
    let oracle = 5.0 * 2.0 * (a + b).sqrt() / (23.0f64 / 15.0).sqrt();
    let r1 = five.ratios[1];
    let decays = five.ratios.last().is_some_and(|&r| r < 1.0);
    let what = format!(
        "alpha_d=2 decreasing: {}; alpha_d=5 ratio(1)={r1:.4} (oracle {oracle:.4}); peak at k={}; final {:.3e}; {:?}",
        two.is_strictly_decreasing(),
        five.peak(),
        five.ratios.last().unwrap(),
        elapsed
    );
    check(
        two.is_strictly_decreasing()
            && (r1 - 1.77).abs() <= 0.05
            && (r1 - oracle).abs() <= 0.05
            && five.peak() >= 1
            && decays
            && elapsed < Duration::from_secs(1),
        what,
    )
}

/// Damping-dominant base: no spring, no added mass, alpha_d = 0.1.
fn damping_base() -> PistonParams<f64> {
    PistonParams::new(0.0, 1.0, 0.1, 1.0, 0.0, 20.0, 0.005).unwrap()
}

fn rate_cfg() -> CouplingConfig<f64> {
    CouplingConfig::new(1e-300, 8, 1.0, 2).unwrap()
}

fn sweep(
    parameter: ParamField,
    values: Vec<f64>,
    base: PistonParams<f64>,
) -> Result<SweepResult, String> {
    let spec = SweepSpec::new(parameter, values, base, rate_cfg()).map_err(|e| e.to_string())?;
    run_sweep(&spec, 0).map_err(|e| e.to_string())
}

fn rate_differences(res: &SweepResult) -> Result<Vec<f64>, String> {
    res.rate_differences()
        .into_iter()
        .map(|d| d.ok_or_else(|| "missing fitted rate".to_string()))
        .collect()
}

fn kappa_slope_law() -> Outcome {
    let started = Instant::now();
    let res = sweep(
        ParamField::KappaF,
        vec![2.0, 20.0, 200.0, 2000.0],
        damping_base(),
    )?;
    let elapsed = started.elapsed();
    let diffs = rate_differences(&res)?;
    let slope_ok = diffs.iter().all(|d| (d - 1.0).abs() <= 0.15);

    // Homogeneity of the discrete error map: ||eps_k(10 kappa)|| / ||eps_k(kappa)|| = 10^k.
    let n = 32;
    let eps0: Vec<f64> = (0..=n).map(|j| (j as f64 / n as f64).powi(2)).collect();
    let norms = |kappa_f: f64| -> Vec<f64> {
        let p = damping_base().with(ParamField::KappaF, kappa_f).unwrap();
        let c = PistonCoupling::new(p, PartitionedOptions::default()).unwrap();
        let mut e = eps0.clone();
        (1..=5)
            .map(|_| {
                e = c.error_map(&e).unwrap();
                e.iter().map(|x| x * x).sum::<f64>().sqrt()
            })
            .collect()
    };
    let (lo, hi) = (norms(20.0), norms(200.0));
    let homog = lo
        .iter()
        .zip(&hi)
        .enumerate()
        .map(|(k, (a, b))| (b / a / 10f64.powi(k as i32 + 1) - 1.0).abs())
        .fold(0.0, f64::max);
    check(
        slope_ok && homog < 1e-8 && elapsed < Duration::from_secs(10),
        format!(
            "rate differences {diffs:.4?}; homogeneity rel. error {homog:.2e}; sweep {elapsed:?}"
        ),
    )
}

fn tau_law() -> Outcome {
    let res = sweep(ParamField::Tau, vec![0.0025, 0.005, 0.01], damping_base())?;
    let diffs = rate_differences(&res)?;
    let target = 2f64.log10();
    check(
        diffs.iter().all(|d| (d - target).abs() <= 0.05),
        format!("rate differences {diffs:.4?}, expected {target:.4}"),
    )
}

fn mass_law() -> Outcome {
    let res = sweep(ParamField::MS, vec![0.5, 1.0, 2.0], damping_base())?;
    let diffs = rate_differences(&res)?;
    let target = -2f64.log10();
    check(
        diffs.iter().all(|d| (d - target).abs() <= 0.05),
        format!("rate differences {diffs:.4?}, expected {target:.4}"),
    )
}

fn added_mass_threshold() -> Outcome {
    let cfg = CouplingConfig::new(1e-10, 1000, 1.0, 2).unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for tau in [0.005, 0.01, 0.02] {
        let mut row = Vec::new();
        for alpha_m in [0.5, 0.9, 1.1, 1.5] {
            // ell0 = m_s = 1: alpha_m = rho_f; kappa_f = 0.5 keeps alpha_d <= 0.01.
            let p = PistonParams::new(alpha_m, 1.0, 0.1, 1.0, 0.0, 0.5, tau).unwrap();
            assert!(p.groups().alpha_d <= 0.01);
            let init = initial_state(&p, FluidModel::Linearized).unwrap();
            let res = subiterate_step(&p, &cfg, PartitionedOptions::default(), &init);
            let (label, good) = match &res {
                Ok((_, t)) => (format!("conv@{}", t.iterations()), alpha_m < 1.0),
                Err(CouplingError::Diverged {
                    cause: DivergenceCause::ResidualGuard,
                    trace,
                    ..
                }) => (format!("guard@{}", trace.iterations()), alpha_m > 1.0),
                Err(e) => (e.to_string(), false),
            };
            ok &= good;
            row.push(format!("{alpha_m}:{label}"));
        }
        lines.push(format!("tau={tau} [{}]", row.join(" ")));
    }
    check(ok, lines.join("; "))
}

fn density_independence() -> Outcome {
    let base = damping_base().with(ParamField::KappaF, 200.0).unwrap();
    let res = sweep(ParamField::RhoF, vec![1e-4, 1e-3, 1e-2], base)?;
    let rates: Vec<f64> = res.records.iter().filter_map(|r| r.rate).collect();
    let max_am = res
        .records
        .iter()
        .map(|r| r.groups.alpha_m)
        .fold(0.0, f64::max);
    let spread = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - rates.iter().cloned().fold(f64::INFINITY, f64::min);
    check(
        rates.len() == 3 && spread <= 0.05 && max_am < 0.1,
        format!("rates {rates:.4?}; spread {spread:.4}; max alpha_m {max_am}"),
    )
}

fn order(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn operator_order() -> Outcome {
    type Form = (&'static str, f64, bool, fn(f64) -> f64, fn(f64) -> f64);
    let forms: [Form; 4] = [
        ("L_d 1", 1.0, true, |_| 1.0, |s| -s.sin()),
        (
            "L_d s^2",
            1.0,
            true,
            |s| s * s,
            |s| -(2.0 * s - 2.0 * s.sin()),
        ),
        ("L_m 1", 1.0, false, |_| 1.0, |s| s.cos()),
        ("L_m s^2", 1.0, false, |s| s * s, |s| 2.0 - 2.0 * s.cos()),
    ];
    let sizes = [65, 129, 257];
    let mut ok = true;
    let mut report = Vec::new();
    for (name, omega, damping, input, exact) in forms {
        let errs: Vec<f64> = sizes
            .iter()
            .map(|&n| {
                let ops = VolterraOperators::new(OperatorConfig::new(omega, n).unwrap());
                let eps = GridFunction::from_fn(n, input).unwrap();
                let got = if damping {
                    ops.apply_ld(&eps)
                } else {
                    ops.apply_lm(&eps)
                }
                .unwrap();
                got.max_abs_diff(&GridFunction::from_fn(n, exact).unwrap())
            })
            .collect();
        let p = order(&errs);
        ok &= p.iter().all(|q| (1.7..=2.3).contains(q));
        report.push(format!("{name} {p:.3?}"));
    }
    let comm: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let ops = VolterraOperators::new(OperatorConfig::new(1.0, n).unwrap());
            // The trapezoid commutator only sees eps(0); for eps(0) = 0 it vanishes identically.
            ops.commutator_norm(&GridFunction::from_fn(n, |_: f64| 1.0).unwrap())
                .unwrap()
        })
        .collect();
    let pc = order(&comm);
    ok &= pc.iter().all(|q| (1.7..=2.3).contains(q));
    report.push(format!("commutator {pc:.3?}"));
    check(ok, report.join("; "))
}

fn quasi_nilpotency() -> Outcome {
    let mut ok = true;
    let mut report = Vec::new();
    for omega in [0.0, 1.0] {
        let ops = VolterraOperators::new(OperatorConfig::new(omega, 257).unwrap());
        for (name, f) in [("1", (|_| 1.0) as fn(f64) -> f64), ("s^2", |s| s * s)] {
            let r = ops
                .quasi_nilpotency_estimate(&GridFunction::from_fn(257, f).unwrap(), 12)
                .unwrap();
            let (r3, r6, r12) = (r[2], r[5], r[11]);
            ok &= r12 < r6 && r6 < r3;
            report.push(format!(
                "omega={omega} eps0={name}: {r3:.4} > {r6:.4} > {r12:.4}"
            ));
        }
    }
    check(ok, report.join("; "))
}

fn partitioned_consistency() -> Outcome {
    let cfg = CouplingConfig::new(1e-11, 200, 1.0, 2).unwrap();
    let opts = PartitionedOptions::default();
    let mut devs = Vec::new();
    for tau in [0.1, 0.05, 0.025] {
        let p = PistonParams::new(0.2, 1.0, 0.1, 1.0, 1.0, 0.5, tau).unwrap();
        let (traj, _) = run_transient(&p, &cfg, opts, 1.0).map_err(|e| e.to_string())?;
        let dt = tau / opts.inner_steps as f64;
        let mono = solve_monolithic(
            &p,
            1.0,
            dt,
            MonolithicOptions::with_model(FluidModel::Linearized),
        )
        .map_err(|e| e.to_string())?;
        devs.push(traj.max_relative_deviation(&mono));
    }
    let ratios: Vec<f64> = devs.windows(2).map(|w| w[0] / w[1]).collect();
    check(
        ratios.iter().all(|r| (1.7..=2.3).contains(r)),
        format!(
            "deviations {:?}; ratios {ratios:.4?}",
            devs.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn sensitivity_formula() -> Outcome {
    let hand = pressure_shift(&RobinBoundarySpec::new(1000.0, 0.0, 0.2, 0.01).unwrap()).unwrap();
    let mut linear = true;
    for (gap, vdot) in [(1000.0, 0.01), (37.5, -0.3), (1e4, 2.5e-3)] {
        let base = pressure_shift(&RobinBoundarySpec::new(gap, 0.0, 0.2, vdot).unwrap()).unwrap();
        let dg =
            pressure_shift(&RobinBoundarySpec::new(2.0 * gap, 0.0, 0.2, vdot).unwrap()).unwrap();
        let dv =
            pressure_shift(&RobinBoundarySpec::new(gap, 0.0, 0.2, 2.0 * vdot).unwrap()).unwrap();
        linear &= dg == 2.0 * base && dv == 2.0 * base;
    }
    check(
        hand == -50.0 && linear,
        format!("lambda = {hand}; doubling exact: {linear}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "nonmonotone damping iteration with interior peak",
            figure3_shape,
        ),
        ("resistance slope law", kappa_slope_law),
        ("time-step law", tau_law),
        ("mass law", mass_law),
        ("added-mass threshold", added_mass_threshold),
        ("density independence", density_independence),
        ("operator discretization order", operator_order),
        ("quasi-nilpotency", quasi_nilpotency),
        (
            "monolithic/partitioned consistency",
            partitioned_consistency,
        ),
        ("sensitivity formula", sensitivity_formula),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
