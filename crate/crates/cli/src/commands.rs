//! Subcommand implementations. Each `run_*` returns its measurements so tests
//! can inspect them; the thin wrappers turn failed checks into exit code 1.

use std::path::Path;
use std::time::Instant;

use chns_core::objective::ObservationRecord;
use chns_core::verify::{
    duality_gap, fd_directional_derivative, run_invariant_suite, smooth_directions, stability_ratio,
    taylor_remainder_test, Check, DualityRow, InvariantSuiteConfig, StabilityRow, VerificationReport,
};
use chns_core::*;
use serde::Serialize;

use crate::cells;
use crate::config::{RunConfig, Setup};
use crate::output::{float, prepare_dir, subdir, write_json, Csv};
use crate::CliError;

const COST_HEADER: [&str; 7] = [
    "eval",
    "cost_total",
    "tracking_running",
    "tracking_terminal",
    "velocity_running",
    "velocity_terminal",
    "control_energy",
];

fn cost_row(csv: &mut Csv, eval: usize, c: &CostBreakdown<f64>) {
    csv.row(cells![
        eval,
        c.total,
        c.tracking_running,
        c.tracking_terminal,
        c.velocity_running,
        c.velocity_terminal,
        c.control_energy
    ]);
}

fn write_observations(path: &Path, records: &[ObservationRecord<f64>]) -> Result<(), CliError> {
    let mut csv = Csv::new(&["step", "t", "point_index", "observed", "target", "misfit"]);
    for r in records {
        csv.row(cells![r.step, r.t, r.point_index, r.observed, r.target, r.misfit]);
    }
    csv.write(path)
}

fn write_trajectory(out: &Path, setup: &Setup, traj: &Trajectory, stride: usize) -> Result<(), CliError> {
    let p = &setup.problem;
    let mut series = Csv::new(&["step", "t", "mass", "energy", "max_div_u", "min_phi", "max_phi"]);
    for (n, s) in traj.states.iter().enumerate() {
        series.row(cells![
            n,
            s.t,
            mass(&s.phi),
            energy(s, &p.models.potential),
            p.disc.max_div(&s.u),
            s.phi.min_value(),
            s.phi.max_value()
        ]);
    }
    series.write(&out.join("series.csv"))?;
    let snaps = subdir(out, "snapshots")?;
    let last = traj.steps();
    for (n, s) in traj.states.iter().enumerate() {
        if n % stride == 0 || n == last {
            let f = snaps.join(format!("phi_{n:05}.chnsf"));
            io::write_field(&f, &s.phi)?;
            let f = snaps.join(format!("u_{n:05}.chnsv"));
            io::write_vector_field(&f, &s.u)?;
        }
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    prepare_dir(out)?;
    let setup = cfg.build()?;
    let p = &setup.problem;
    let start = Instant::now();
    let traj = p.forward(&setup.control)?;
    log::info!(
        "forward solve: {} steps in {:.3} s",
        traj.steps(),
        start.elapsed().as_secs_f64()
    );
    if traj.clamp_events > 0 {
        log::warn!("{} potential evaluations were clamped", traj.clamp_events);
    }
    write_trajectory(out, &setup, &traj, cfg.output.snapshot_stride)?;
    if setup.has_cost {
        write_observations(&out.join("observations.csv"), &p.objective.observations(&traj)?)?;
        let mut cost = Csv::new(&COST_HEADER);
        cost_row(&mut cost, 0, &p.objective.eval(&traj, &setup.control)?);
        cost.write(&out.join("cost.csv"))?;
    }
    Ok(())
}

fn require_cost(setup: &Setup, cmd: &str) -> Result<(), CliError> {
    if setup.has_cost {
        Ok(())
    } else {
        Err(CliError::Config(format!("`cost`: {cmd} needs a cost section")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizeSummary {
    pub termination: String,
    pub iterations: usize,
    pub final_stationarity: f64,
    /// `tolerance * (1 + ||U||)` at the final iterate.
    pub stationarity_bound: f64,
    pub baseline_tracking_running: f64,
    pub final_tracking_running: f64,
    pub tracking_ratio: f64,
    pub baseline_total: f64,
    pub final_total: f64,
    pub monotone: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct OptimizeOutcome {
    pub report: OptimReport<f64>,
    pub summary: OptimizeSummary,
}

pub fn run_optimize(cfg: &RunConfig, out: &Path) -> Result<OptimizeOutcome, CliError> {
    prepare_dir(out)?;
    let setup = cfg.build()?;
    require_cost(&setup, "optimize")?;
    let bx = setup
        .bounds
        .as_ref()
        .ok_or_else(|| CliError::Config("`box`: optimize needs an admissible box".into()))?;
    let p = &setup.problem;
    let opts = cfg.optimizer.options();
    let baseline = p.cost(&p.zero_control())?;
    let report = chns_core::optimize(p, bx, &setup.control, &opts)?;

    let mut optim = Csv::new(&[
        "iter",
        "cost_total",
        "tracking_running",
        "tracking_terminal",
        "velocity_running",
        "velocity_terminal",
        "control_energy",
        "step",
        "stationarity",
        "grad_norm",
    ]);
    let mut cost = Csv::new(&COST_HEADER);
    for r in &report.iterations {
        let c = &r.cost;
        optim.row(cells![
            r.iter,
            c.total,
            c.tracking_running,
            c.tracking_terminal,
            c.velocity_running,
            c.velocity_terminal,
            c.control_energy,
            r.step,
            r.stationarity,
            r.grad_norm
        ]);
        cost_row(&mut cost, r.iter, c);
    }
    optim.write(&out.join("optim.csv"))?;
    cost.write(&out.join("cost.csv"))?;

    let dir = subdir(out, "control")?;
    for (n, f) in report.control.snapshots().iter().enumerate() {
        io::write_field(&dir.join(format!("U_{n:05}.chnsf")), f)?;
    }
    let traj = p.forward(&report.control)?;
    write_observations(&out.join("observations.csv"), &p.objective.observations(&traj)?)?;

    let fin = report.final_cost();
    let monotone = report.iterations.windows(2).all(|w| w[1].cost.total <= w[0].cost.total);
    let summary = OptimizeSummary {
        termination: format!("{:?}", report.termination),
        iterations: report.iterations.len() - 1,
        final_stationarity: report.final_stationarity,
        stationarity_bound: opts.tolerance * (1.0 + report.control.norm()),
        baseline_tracking_running: baseline.tracking_running,
        final_tracking_running: fin.tracking_running,
        tracking_ratio: if baseline.tracking_running > 0.0 {
            fin.tracking_running / baseline.tracking_running
        } else {
            0.0
        },
        baseline_total: baseline.total,
        final_total: fin.total,
        monotone,
        error: report.error.clone(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(OptimizeOutcome { report, summary })
}

pub fn optimize(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let o = run_optimize(cfg, out)?;
    let s = &o.summary;
    println!(
        "{}: {} iterations, J {} -> {}, tracking ratio {:.4}, stationarity {:.3e} (bound {:.3e})",
        s.termination,
        s.iterations,
        float(s.baseline_total),
        float(s.final_total),
        s.tracking_ratio,
        s.final_stationarity,
        s.stationarity_bound
    );
    match o.report.termination {
        Termination::SolverFailure => Err(CliError::CheckFailed(format!(
            "optimizer stopped on a solver failure: {}",
            s.error.as_deref().unwrap_or("unknown")
        ))),
        Termination::Stationary => Ok(()),
        t => {
            log::warn!("optimizer ended without meeting the stationarity test ({t:?})");
            Ok(())
        }
    }
}

fn check(name: String, metric: &str, value: f64, tolerance: f64, instruments: &'static str, runtime_s: f64) -> Check {
    Check {
        name,
        metric: metric.into(),
        value,
        tolerance,
        pass: value <= tolerance,
        instruments,
        runtime_s,
    }
}

fn write_checks(path: &Path, report: &VerificationReport) -> Result<(), CliError> {
    let mut csv = Csv::new(&["check", "metric", "value", "tolerance", "pass"]);
    for c in &report.checks {
        csv.row(cells![c.name.clone(), c.metric.clone(), c.value, c.tolerance, c.pass]);
    }
    csv.write(path)
}

fn print_checks(report: &VerificationReport) {
    for c in &report.checks {
        println!(
            "{:<22} {:<5} {} = {:.3e} (tol {:.3e}, {:.2} s)",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.metric,
            c.value,
            c.tolerance,
            c.runtime_s
        );
    }
}

fn finish(report: &VerificationReport) -> Result<(), CliError> {
    print_checks(report);
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("failed checks: {}", failed.join(", "))))
    }
}

#[derive(Clone, Debug)]
pub struct GradientRow {
    pub h_id: usize,
    pub adjoint: f64,
    pub fd_extrapolated: f64,
    pub rel_err: f64,
}

pub struct GradcheckOutcome {
    pub gradient: Vec<GradientRow>,
    pub taylor_slopes: Vec<Option<f64>>,
    pub duality: Vec<DualityRow<f64>>,
    pub duality_refined: Option<Vec<DualityRow<f64>>>,
    pub refinement_ratio: Option<f64>,
    pub report: VerificationReport,
}

fn setup_directions(cfg: &RunConfig, setup: &Setup) -> Vec<Control> {
    let g = setup.problem.disc.grid();
    smooth_directions(
        g,
        setup.problem.time.dt,
        setup.problem.time.steps,
        cfg.verify.directions,
        cfg.seed,
    )
}

pub fn run_gradcheck(cfg: &RunConfig, out: &Path) -> Result<GradcheckOutcome, CliError> {
    prepare_dir(out)?;
    let setup = cfg.build()?;
    require_cost(&setup, "gradcheck")?;
    let p = &setup.problem;
    let u = &setup.control;
    let dirs = setup_directions(cfg, &setup);
    let betas = &cfg.verify.betas;
    let mut report = VerificationReport::default();

    let t0 = Instant::now();
    let traj = p.forward(u)?;
    let grad = p.gradient(u, &traj)?;
    let grad_time = t0.elapsed().as_secs_f64();
    let mut fd = Csv::new(&["h_id", "beta", "quotient"]);
    let mut gcsv = Csv::new(&["h_id", "adjoint", "fd_extrapolated", "rel_err"]);
    let mut gradient = Vec::new();
    for (id, h) in dirs.iter().enumerate() {
        let t = Instant::now();
        let table = fd_directional_derivative(p, u, h, betas)?;
        for (b, q) in table.betas.iter().zip(&table.quotients) {
            fd.row(cells![id, *b, *q]);
        }
        let adjoint = grad.dot(h);
        let scale = table.extrapolated.abs();
        let rel_err = if scale > 0.0 {
            (adjoint - table.extrapolated).abs() / scale
        } else {
            adjoint.abs()
        };
        gcsv.row(cells![id, adjoint, table.extrapolated, rel_err]);
        report.push(check(
            format!("gradient_h{id}"),
            "|<xi+U,h> - fd| / |fd|",
            rel_err,
            1e-2,
            "reduced gradient matches the cost's directional derivative",
            grad_time + t.elapsed().as_secs_f64(),
        ));
        gradient.push(GradientRow {
            h_id: id,
            adjoint,
            fd_extrapolated: table.extrapolated,
            rel_err,
        });
    }
    fd.write(&out.join("fd.csv"))?;
    gcsv.write(&out.join("gradient.csv"))?;

    let mut tcsv = Csv::new(&["h_id", "beta", "remainder"]);
    let mut taylor_slopes = Vec::new();
    for (id, h) in dirs.iter().enumerate() {
        let t = Instant::now();
        let table = taylor_remainder_test(p, u, h, betas)?;
        for (b, r) in table.betas.iter().zip(&table.remainders) {
            tcsv.row(cells![id, *b, *r]);
        }
        // vanishing remainders mean the map is affine along h
        let dev = table.slope.map_or(0.0, |s| (s - 2.0).abs());
        report.push(check(
            format!("taylor_h{id}"),
            "|slope - 2|",
            dev,
            0.3,
            "control-to-state map is differentiable with the tangent as derivative",
            t.elapsed().as_secs_f64(),
        ));
        taylor_slopes.push(table.slope);
    }
    tcsv.write(&out.join("taylor.csv"))?;

    let eps = cfg.epsilon().expect("resolved configs carry epsilon");
    let t = Instant::now();
    let duality = duality_gap(p, u, eps, &dirs)?;
    let dt_coarse = t.elapsed().as_secs_f64();
    write_duality(&out.join("duality.csv"), &duality)?;
    for r in &duality {
        report.push(check(
            format!("duality_h{}", r.h_id),
            "rel_gap",
            r.rel_gap,
            1e-2,
            "transposition identity between adjoint and tangent",
            dt_coarse / duality.len() as f64,
        ));
    }

    let mut refinement = Csv::new(&["level", "nx", "ny", "epsilon", "gap_sum"]);
    let gap_sum = |rows: &[DualityRow<f64>]| rows.iter().map(|r| r.gap).sum::<f64>();
    refinement.row(cells![0usize, cfg.grid.nx, cfg.grid.ny, eps, gap_sum(&duality)]);
    let (duality_refined, refinement_ratio) = if cfg.verify.refine {
        let t = Instant::now();
        let fine_cfg = cfg.refined(2)?;
        let fine = fine_cfg.build()?;
        let fine_dirs = setup_directions(&fine_cfg, &fine);
        let feps = fine_cfg.epsilon().expect("resolved configs carry epsilon");
        let rows = duality_gap(&fine.problem, &fine.control, feps, &fine_dirs)?;
        write_duality(&out.join("duality-refined.csv"), &rows)?;
        refinement.row(cells![1usize, fine_cfg.grid.nx, fine_cfg.grid.ny, feps, gap_sum(&rows)]);
        let coarse = gap_sum(&duality);
        let ratio = if coarse > 0.0 { gap_sum(&rows) / coarse } else { 0.0 };
        report.push(check(
            "duality_refinement".into(),
            "gap_sum(h/2, eps/2) / gap_sum(h, eps)",
            ratio,
            0.7,
            "mollification error vanishes under joint refinement",
            t.elapsed().as_secs_f64(),
        ));
        (Some(rows), Some(ratio))
    } else {
        (None, None)
    };
    refinement.write(&out.join("refinement.csv"))?;
    write_checks(&out.join("verify.csv"), &report)?;
    Ok(GradcheckOutcome {
        gradient,
        taylor_slopes,
        duality,
        duality_refined,
        refinement_ratio,
        report,
    })
}

fn write_duality(path: &Path, rows: &[DualityRow<f64>]) -> Result<(), CliError> {
    let mut csv = Csv::new(&["h_id", "lhs", "rhs", "gap", "rel_gap"]);
    for r in rows {
        csv.row(cells![r.h_id, r.lhs, r.rhs, r.gap, r.rel_gap]);
    }
    csv.write(path)
}

pub fn gradcheck(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    finish(&run_gradcheck(cfg, out)?.report)
}

type RatioOf = fn(&StabilityRow<f64>) -> Option<f64>;

pub struct VerifyOutcome {
    pub report: VerificationReport,
    pub stability: Vec<StabilityRow<f64>>,
    pub max_abs_phi: Option<f64>,
}

pub fn run_verify(cfg: &RunConfig, out: &Path) -> Result<VerifyOutcome, CliError> {
    prepare_dir(out)?;
    let setup = cfg.build()?;
    let p = &setup.problem;
    let suite = InvariantSuiteConfig {
        disc: p.disc.clone(),
        models: p.models.clone(),
        phi0: p.phi0.clone(),
        u0: p.u0.clone(),
        control: setup.control.clone(),
        time: p.time.clone(),
        separation_margin: cfg.verify.separation_margin,
        check_energy: cfg.verify.check_energy,
    };
    let mut report = run_invariant_suite(&suite);
    let max_abs_phi = report.get("separation").map(|c| c.value);

    let mut stability = Vec::new();
    if cfg.verify.stability {
        let t = Instant::now();
        let g = p.disc.grid();
        let h = smooth_directions(g, p.time.dt, p.time.steps, 1, cfg.seed ^ 0x5ab1e).remove(0);
        match stability_ratio(p, &setup.control, &h, &cfg.verify.magnitudes) {
            Ok(rows) => {
                let elapsed = t.elapsed().as_secs_f64();
                let mut csv = Csv::new(&["magnitude", "control_distance", "sup_phi", "l2h2_phi", "sup_u"]);
                for r in &rows {
                    let opt = |v: Option<f64>| v.map_or_else(|| "skipped".to_string(), float);
                    csv.row(cells![
                        r.magnitude,
                        r.control_distance,
                        opt(r.sup_phi),
                        opt(r.l2h2_phi),
                        opt(r.sup_u)
                    ]);
                }
                csv.write(&out.join("stability.csv"))?;
                let norms: [(&str, RatioOf); 3] = [
                    ("stability_sup_phi", |r| r.sup_phi),
                    ("stability_l2h2_phi", |r| r.l2h2_phi),
                    ("stability_sup_u", |r| r.sup_u),
                ];
                for (name, get) in norms {
                    let vals: Vec<f64> = rows.iter().filter_map(get).collect();
                    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                    let spread = if vals.is_empty() {
                        0.0
                    } else if lo > 0.0 {
                        hi / lo
                    } else if hi > 0.0 {
                        f64::INFINITY
                    } else {
                        1.0
                    };
                    report.push(check(
                        name.into(),
                        "max/min ratio over magnitudes",
                        spread,
                        10.0,
                        "continuous dependence on the control",
                        elapsed,
                    ));
                }
                stability = rows;
            }
            Err(e) => report.push(Check {
                name: "stability".into(),
                metric: format!("error: {e}"),
                value: 0.0,
                tolerance: 1.0,
                pass: false,
                instruments: "continuous dependence on the control",
                runtime_s: t.elapsed().as_secs_f64(),
            }),
        }
    }
    write_checks(&out.join("verify.csv"), &report)?;
    Ok(VerifyOutcome {
        report,
        stability,
        max_abs_phi,
    })
}

pub fn verify(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    finish(&run_verify(cfg, out)?.report)
}

pub fn info(cfg: &RunConfig) -> Result<(), CliError> {
    let setup = cfg.build()?;
    let p = &setup.problem;
    let g = p.disc.grid();
    println!(
        "grid      {} x {} on [0, {}] x [0, {}], h = ({}, {})",
        g.nx(),
        g.ny(),
        g.lx(),
        g.ly(),
        g.hx(),
        g.hy()
    );
    println!(
        "time      {} steps of {} (T = {})",
        p.time.steps, p.time.dt, cfg.time.t_final
    );
    println!("potential {:?}", p.models.potential);
    println!(
        "material  mobility {:?}, viscosity {:?}",
        p.models.material.mobility, p.models.material.viscosity
    );
    println!("S         {}", p.models.stabilization);
    println!("coupling  {:?}", p.models.coupling);
    println!("cfl(u0)   {:.3e}", forward::cfl_number(&p.u0, p.time.dt));
    if let Some(c) = &cfg.cost {
        println!(
            "cost      {} points, {:?}, {:?}, eps = {}",
            c.points.len(),
            c.mode,
            c.observation,
            c.epsilon.unwrap_or(f64::NAN)
        );
    }
    let range = cfg.models.stabilization_range.expect("resolved");
    let rep = validate_assumptions(&p.models.material, &p.models.potential, (range[0], range[1]), 401);
    println!("F'' range {:?} on [{}, {}]", rep.f2_range, range[0], range[1]);
    if let Some(a) = rep.alpha0 {
        println!("alpha0    {a}");
    }
    for c in &rep.checks {
        println!("  {:<5} {}: {}", if c.pass { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(())
}
