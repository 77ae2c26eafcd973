use std::fs;

use leaky_piston::config::RunConfig;
use leaky_piston::figure3::{self, Figure3Spec};
use leaky_piston::sweep::{run_sweep, SweepSpec};
use leaky_piston::{
    run_transient, solve_monolithic, CouplingConfig, FluidModel, MonolithicOptions, ParamField,
    PartitionedOptions, PistonParamsF32, PistonParamsF64, Status,
};

const CONFIG: &str = "\
rho_f = 0.2
ell0 = 1
u0 = 0.1
m_s = 1
kappa_s = 1
kappa_f = 0.5
tau = 0.05
t_fin = 0.5
tol = 1e-11
";

#[test]
fn config_to_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, CONFIG).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    let (traj, traces) = run_transient(
        &cfg.params,
        &cfg.coupling,
        cfg.partitioned,
        cfg.t_fin.unwrap(),
    )
    .unwrap();
    assert_eq!(traces.len(), 10);
    assert!(traces.iter().all(|t| t.converged));
    let out = dir.path().join("out/partitioned.csv");
    traj.save_csv(&out).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,d,v,p");
    assert_eq!(text.lines().count(), traj.len() + 1);

    let mono = solve_monolithic(
        &cfg.params,
        0.5,
        0.05 / cfg.partitioned.inner_steps as f64,
        MonolithicOptions::with_model(FluidModel::Linearized),
    )
    .unwrap();
    assert!(traj.max_relative_deviation(&mono) < 1e-3);
}

#[test]
fn sweep_outputs_are_deterministic() {
    let base = PistonParamsF64::new(0.0, 1.0, 0.1, 1.0, 0.0, 20.0, 0.005).unwrap();
    let cfg = CouplingConfig::new(1e-300, 8, 1.0, 2).unwrap();
    let spec = SweepSpec::new(ParamField::KappaF, vec![2.0, 20.0, 200.0], base, cfg).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_sweep(&spec, 3).unwrap().save(a.path()).unwrap();
    run_sweep(&spec, 1).unwrap().save(b.path()).unwrap();
    for name in [
        "summary.csv",
        "residuals_kappa_f_000.csv",
        "residuals_kappa_f_002.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn sweep_summary_groups_recompute_exactly() {
    let base = PistonParamsF64::new(0.3, 2.0, 0.1, 5.0, 3.0, 20.0, 0.01).unwrap();
    let cfg = CouplingConfig::new(1e-10, 50, 1.0, 2).unwrap();
    let spec = SweepSpec::new(ParamField::MS, vec![5.0, 10.0], base, cfg).unwrap();
    let res = run_sweep(&spec, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    res.save(dir.path()).unwrap();
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    for (line, rec) in summary.lines().skip(1).zip(&res.records) {
        let cols: Vec<&str> = line.split(',').collect();
        let p = base.with(ParamField::MS, cols[0].parse().unwrap()).unwrap();
        let g = p.groups();
        assert_eq!(cols[1].parse::<f64>().unwrap(), g.omega);
        assert_eq!(cols[2].parse::<f64>().unwrap(), g.alpha_m);
        assert_eq!(cols[3].parse::<f64>().unwrap(), g.alpha_d);
        assert_eq!(cols[6], rec.status.name());
        assert_eq!(rec.status, Status::Converged);
    }
}

#[test]
fn figure3_files_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let spec = Figure3Spec::default();
    figure3::write(&figure3::compute(&spec).unwrap(), a.path()).unwrap();
    figure3::write(&figure3::compute(&spec).unwrap(), b.path()).unwrap();
    for name in [
        figure3::RATIOS_FILE.to_string(),
        figure3::curves_file_name(5.0),
    ] {
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap()
        );
    }
}

#[test]
fn single_precision_transient() {
    let p = PistonParamsF32::new(0.2, 1.0, 0.1, 1.0, 1.0, 0.5, 0.05).unwrap();
    let cfg = CouplingConfig::new(1e-4f32, 100, 1.0, 2).unwrap();
    let (traj32, _) = run_transient(&p, &cfg, PartitionedOptions::default(), 0.5).unwrap();
    let p64 = PistonParamsF64::new(0.2, 1.0, 0.1, 1.0, 1.0, 0.5, 0.05).unwrap();
    let cfg64 = CouplingConfig::new(1e-11, 100, 1.0, 2).unwrap();
    let (traj64, _) = run_transient(&p64, &cfg64, PartitionedOptions::default(), 0.5).unwrap();
    let (_, last32) = traj32.last().unwrap();
    let (_, last64) = traj64.last().unwrap();
    assert!((last32.d as f64 - last64.d).abs() < 1e-4);
}
