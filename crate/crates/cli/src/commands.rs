//! Command dispatch. Each command fills a [`Report`]; verification failures
//! are recorded in it, errors abort it.

use cyclefix::bounds::{bound_check_suite_with, SuiteOptions};
use cyclefix::cycles::{
    compute_diagnostics, km_fixed_point, orbit, run_periodic, sweep_epsilon_with, validate_grid, SweepOptions,
    SweepReport,
};
use cyclefix::flow::{
    build_interpolant, comparison_step, decay_check, flow_deviation, integrate_flow, FlowTrajectory, DEFAULT_STEP,
};
use cyclefix::report::{fmt_f64, fmt_opt, loglog_slope};
use cyclefix::scenarios::{stability_gap, ParabolaPrediction, Prediction, PredictionCheck, Scenario};
use cyclefix::{Error, Point, Result};
use serde_json::{json, Value};

use crate::config::{CommandParams, RunConfig};
use crate::report::{emit, Report, Table};
use crate::scenario;

const FIX_T_TOL: f64 = 1e-12;
const FIX_T_MAX_ITERS: usize = 10_000_000;

fn scenario_summary(s: &Scenario) -> Value {
    json!({
        "name": s.name,
        "dim": s.dim(),
        "m": s.m(),
        "anchor": s.anchor,
        "sets": s.sets,
        "prediction": s.prediction,
        "strong_monotonicity": s.strong_monotonicity,
        "slice": s.slice,
    })
}

fn coord_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn record_checks(report: &mut Report, checks: &[PredictionCheck]) {
    for c in checks.iter().filter(|c| c.failed()) {
        report.fail(format!(
            "prediction {} at ε = {}: error {:e} exceeds {:e}",
            c.quantity, c.eps, c.error, c.tolerance
        ));
    }
}

/// Runs the command. The report is returned even when the command stopped
/// on a numerical error; usage errors are returned as `Err` before any work.
pub fn execute(config: &RunConfig) -> std::result::Result<Report, Error> {
    let (s, seed) = scenario::load(config)?;
    let mut report = Report::new(config, seed);
    report.scenario = scenario_summary(&s);
    let outcome = match &config.params {
        CommandParams::Run { eps } => run(&mut report, &s, config, *eps),
        CommandParams::Sweep { eps_grid } => sweep(&mut report, &s, config, eps_grid.as_deref()),
        CommandParams::Bounds { eps_grid, samples, radius, z, envelope_scale } => {
            bounds(&mut report, &s, eps_grid, *samples, *radius, z.as_deref(), *envelope_scale, seed)
        }
        CommandParams::FlowCompare { eps_grid, t_end, h, trajectory_out } => {
            flow_compare(&mut report, &s, eps_grid, *t_end, *h, trajectory_out.as_deref())
        }
        CommandParams::Stability { eps_grid, z } => stability(&mut report, &s, config, eps_grid.as_deref(), z.as_deref()),
    };
    match outcome {
        Ok(()) => Ok(report),
        Err(e) if e.is_usage() => Err(e),
        Err(e) => {
            report.abort(&e);
            Ok(report)
        }
    }
}

fn run(report: &mut Report, s: &Scenario, config: &RunConfig, eps: f64) -> Result<()> {
    let tol = config.tolerances;
    let r = run_periodic(&s.operators, eps, &s.anchor, tol.tol, tol.max_sweeps)?;
    let diag = compute_diagnostics(&r, &s.operators)?;
    if r.converged {
        if let Err(e) = diag.verify() {
            report.fail(format!("ε = {eps}: {e}"));
        }
    }
    let checks = s.check_run(&r)?;
    record_checks(report, &checks);

    let mut header = vec!["index".to_string()];
    header.extend(coord_names("x", s.dim()));
    let mut table = Table::new(header);
    for (i, x) in r.points.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(x.coords().iter().map(|c| fmt_f64(*c)));
        table.push(row);
    }
    report.table = table;
    report.results = json!({ "cycle": r, "diagnostics": diag, "checks": checks });
    Ok(())
}

fn sweep(report: &mut Report, s: &Scenario, config: &RunConfig, grid: Option<&[f64]>) -> Result<()> {
    let grid = grid.map_or_else(|| s.eps_grid.clone(), <[f64]>::to_vec);
    validate_grid(&grid)?;
    let opts = SweepOptions { tol: config.tolerances.tol, max_sweeps: config.tolerances.max_sweeps, reference: None };
    let sweep = sweep_epsilon_with(&s.operators, &s.anchor, &grid, &opts)?;

    let mut header: Vec<String> = SweepReport::CSV_HEADER.iter().map(|h| h.to_string()).collect();
    header.push("status".into());
    header.extend(coord_names("z", s.dim()));
    header.extend(["prediction_error".into(), "prediction_verified".into()]);
    let mut table = Table::new(header);
    let mut all_checks = Vec::new();
    for (rec, mut row) in sweep.records.iter().zip(sweep.csv_rows()) {
        if let Some(e) = &rec.verification_error {
            report.fail(format!("ε = {}: {e}", rec.result.eps));
        }
        let checks = s.check_run(&rec.result)?;
        record_checks(report, &checks);
        row.push(rec.result.status.to_string());
        row.extend(rec.result.endpoint().coords().iter().map(|c| fmt_f64(*c)));
        let verifiable: Vec<&PredictionCheck> = checks.iter().filter(|c| c.verified.is_some()).collect();
        let worst = verifiable.iter().map(|c| c.error).fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))));
        row.push(fmt_opt(worst));
        row.push(match verifiable.is_empty() {
            true => String::new(),
            false => verifiable.iter().all(|c| c.verified == Some(true)).to_string(),
        });
        table.push(row);
        all_checks.extend(checks);
    }
    report.table = table;
    report.results = json!({ "sweep": sweep, "checks": all_checks });
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bounds(
    report: &mut Report,
    s: &Scenario,
    grid: &[f64],
    samples: usize,
    radius: f64,
    z: Option<&[f64]>,
    envelope_scale: f64,
    seed: u64,
) -> Result<()> {
    let z = z.map(Point::from_slice).transpose()?;
    if let Some(z) = &z {
        z.check_dim(s.dim())?;
    }
    let opts = SuiteOptions { z, envelope_scale };
    let suite = bound_check_suite_with(&s.operators, grid, samples, radius, seed, &opts)?;
    if let Err(Error::Verification(msg)) = suite.clone().into_result() {
        report.fail(msg);
    }
    report.table = Table::new(cyclefix::bounds::BoundSuite::CSV_HEADER);
    report.table.rows = suite.csv_rows();
    report.results = json!({ "suite": suite });
    Ok(())
}

/// Limit point for the flow decay check, when the scenario provides one.
fn decay_reference(s: &Scenario) -> Option<(Point, f64)> {
    match (&s.prediction, s.strong_monotonicity) {
        (Prediction::Affine(a), Some(alpha)) => a.limit.clone().map(|l| (l, alpha)),
        _ => None,
    }
}

fn flow_compare(
    report: &mut Report,
    s: &Scenario,
    grid: &[f64],
    t_end: f64,
    h: Option<f64>,
    trajectory_out: Option<&std::path::Path>,
) -> Result<()> {
    validate_grid(grid)?;
    let t_avg = s.average();
    let m = s.m();
    let mut table = Table::new(["eps", "sweeps", "h", "deviation", "deviation_over_eps"]);
    let mut devs = Vec::with_capacity(grid.len());
    for &eps in grid {
        let sweeps = (t_end / (m as f64 * eps) - 1e-9).ceil() as usize;
        let psi = build_interpolant(orbit(&s.operators, eps, &s.anchor, sweeps)?, eps, m)?;
        let step = h.map_or_else(|| comparison_step(eps), |h| h.min(eps / 10.0));
        let traj = integrate_flow(&t_avg, &s.anchor, t_end, step)?;
        let dev = flow_deviation(&psi, &traj, t_end)?;
        devs.push(dev);
        table.push(vec![fmt_f64(eps), sweeps.to_string(), fmt_f64(step), fmt_f64(dev), fmt_f64(dev / eps)]);
    }
    let slope = loglog_slope(grid, &devs);

    let step = h.unwrap_or(DEFAULT_STEP);
    let mut decay = Value::Null;
    let needs_traj = trajectory_out.is_some() || decay_reference(s).is_some();
    let traj: Option<FlowTrajectory> = needs_traj.then(|| integrate_flow(&t_avg, &s.anchor, t_end, step)).transpose()?;
    if let (Some((reference, alpha)), Some(traj)) = (decay_reference(s), &traj) {
        let ok = decay_check(traj, &reference, alpha, s.entry_radius)?;
        if !ok {
            report.fail(format!("flow does not decay at rate e^(-2·{alpha}·t) toward the predicted limit"));
        }
        decay = json!({ "reference": reference, "alpha": alpha, "passed": ok });
    }
    if let (Some(path), Some(traj)) = (trajectory_out, &traj) {
        let mut bytes = Vec::new();
        report.write_metadata(&mut bytes)?;
        traj.write_csv(&mut bytes)?;
        emit(Some(path), &bytes)?;
    }
    report.table = table;
    report.results = json!({
        "t_end": t_end,
        "flow_step": step,
        "deviations": grid.iter().zip(&devs).map(|(e, d)| json!({ "eps": e, "deviation": d })).collect::<Vec<_>>(),
        "slope": slope,
        "decay": decay,
    });
    Ok(())
}

/// Point of `Fix T` (or of the least-squares set) the stability command
/// starts from by default.
fn default_stability_point(s: &Scenario) -> Result<Point> {
    match &s.prediction {
        Prediction::TwoSet(t) => Ok(t.z.clone()),
        Prediction::Affine(a) => Ok(a.limit.clone().unwrap_or_else(|| a.z.clone())),
        // (1/2, 0, 1) lies in the least-squares set [−1, 1]×{0}×{1}.
        Prediction::Parabola(_) => Point::from_slice(&[0.5, 0.0, 1.0]),
        Prediction::Hyperbola(h) if h.fix_t_level.is_none() => {
            Err(Error::invalid("Fix T is empty for these parameters; pass --z"))
        }
        _ => km_fixed_point(&s.average(), &s.anchor, FIX_T_TOL, FIX_T_MAX_ITERS),
    }
}

fn stability(report: &mut Report, s: &Scenario, config: &RunConfig, grid: Option<&[f64]>, z: Option<&[f64]>) -> Result<()> {
    let grid = grid.map_or_else(|| s.eps_grid.clone(), <[f64]>::to_vec);
    validate_grid(&grid)?;
    let z = match z {
        Some(c) => Point::from_slice(c)?,
        None => default_stability_point(s)?,
    };
    let ambient = s.slice.as_ref().map(|sl| sl.ambient_dim);
    if z.dim() != s.dim() && Some(z.dim()) != ambient {
        return Err(Error::DimensionMismatch { expected: s.dim(), found: z.dim() });
    }
    let mut table = Table::new(["eps", "gap", "bound", "gap_over_eps"]);
    let mut gaps = Vec::with_capacity(grid.len());
    for &eps in &grid {
        let gap = stability_gap(s, &z, eps, config.tolerances.tol)?;
        let bound = match &s.prediction {
            Prediction::TwoSet(t) if z == t.z => Some(t.distance_bound(eps)),
            _ => None,
        };
        gaps.push(gap);
        table.push(vec![fmt_f64(eps), fmt_f64(gap), fmt_opt(bound), fmt_f64(gap / eps)]);
    }
    let limit = matches!(s.prediction, Prediction::Parabola(_)).then(ParabolaPrediction::limit);
    report.table = table;
    report.results = json!({
        "z": z,
        "gaps": grid.iter().zip(&gaps).map(|(e, g)| json!({ "eps": e, "gap": g })).collect::<Vec<_>>(),
        "slope": loglog_slope(&grid, &gaps),
        "limit_of_fixed_points": limit,
    });
    Ok(())
}
