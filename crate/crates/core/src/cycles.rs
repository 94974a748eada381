//! Under-relaxed periodic iteration and its limit cycles.
//!
//! [`run_periodic`] iterates `z_{k+1} = R^ε z_k` from an anchor `y₀` and
//! records the cycle `(x₁, …, x_m)` through the final iterate, where
//! `xᵢ = (Id + ε(Tᵢ − Id)) x_{i−1}` and `x₀ = x_m`. Iteration stops once
//! `‖z_{k+1} − z_k‖ ≤ tol·ε`: the motion per sweep scales with ε, so an
//! unscaled tolerance would stop small-ε runs far from the limit.
//!
//! Runs that exhaust their budget are returned, not raised. Those that look
//! divergent are labelled [`CycleStatus::NoFixedPointSuspected`]; the test
//! is a heuristic (see [`run_periodic`]).

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{relaxed_step, Operator};
use crate::point::{distance, Point};
use crate::report::{fmt_f64, fmt_opt, loglog_slope, write_csv};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 1_000_000;
/// Iterates beyond this norm are treated as escaping to infinity.
pub const DIVERGENCE_NORM: f64 = 1e8;
/// Slack in the Fejér monotonicity check of the recorded tail.
pub const FEJER_SLACK: f64 = 1e-9;
pub const INEQUALITY_TOL: f64 = 1e-9;
pub const SUM_IDENTITY_TOL: f64 = 1e-8;
pub const ADJACENT_IDENTITY_TOL: f64 = 1e-10;

const TAIL_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleStatus {
    Converged,
    MaxSweeps,
    NoFixedPointSuspected,
}

impl fmt::Display for CycleStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CycleStatus::Converged => "converged",
            CycleStatus::MaxSweeps => "max-sweeps",
            CycleStatus::NoFixedPointSuspected => "no-fixed-point-suspected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleResult {
    pub eps: f64,
    /// `x₁, …, x_m`; the last entry is the endpoint `z^ε`.
    pub points: Vec<Point>,
    pub anchor: Point,
    pub sweeps_used: usize,
    /// `‖z_{k+1} − z_k‖` at termination.
    pub endpoint_residual: f64,
    pub converged: bool,
    pub status: CycleStatus,
    /// Whether the recorded tail of iterates approached the endpoint
    /// monotonically. Always `false` for unconverged runs.
    pub fejer_monotone: bool,
}

impl CycleResult {
    pub fn endpoint(&self) -> &Point {
        self.points.last().expect("a cycle has at least two points")
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }
}

fn validate_family(ops: &[Operator], y0: &Point) -> Result<()> {
    if ops.len() < 2 {
        return Err(Error::invalid(format!("a cycle needs at least two operators, got {}", ops.len())));
    }
    for op in ops {
        y0.check_dim(op.dim())?;
    }
    Ok(())
}

fn sweep(ops: &[Operator], eps: f64, z: &Point) -> Result<Point> {
    let mut y = z.clone();
    for op in ops {
        y = relaxed_step(op, eps, &y)?;
    }
    y.ensure_finite("periodic sweep")
}

/// Exponent `p` of a power-law fit `Δ_k ∝ k^{−p}` through two step norms.
fn tail_exponent(early: (usize, f64), late: (usize, f64)) -> f64 {
    if late.1 == 0.0 {
        return f64::INFINITY;
    }
    (early.1 / late.1).ln() / (late.0 as f64 / early.0 as f64).ln()
}

/// Runs the anchored periodic process.
///
/// Divergence is flagged in two ways: an iterate leaving the ball of radius
/// [`DIVERGENCE_NORM`], or, when the budget runs out, step norms decaying
/// slower than `k^{−1}` between sweep `N/4` and sweep `N`. Step norms of a
/// nonexpansive map never increase; a summable tail (exponent above one)
/// means the iterates still settle, a heavier one means they drift off.
/// Unbounded orbits of these families often escape only like `k^{1/4}`, so
/// the norm threshold alone would never fire within any practical budget.
pub fn run_periodic(ops: &[Operator], eps: f64, y0: &Point, tol: f64, max_sweeps: usize) -> Result<CycleResult> {
    validate_family(ops, y0)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("relaxation parameter must lie in (0, 1], got {eps}")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if max_sweeps == 0 {
        return Err(Error::invalid("max_sweeps must be at least 1"));
    }

    let checkpoint = (max_sweeps / 4).max(1);
    let mut early_step = None;
    let mut tail: Vec<Point> = Vec::with_capacity(TAIL_LEN + 1);
    let mut z = y0.clone();
    let mut step = f64::INFINITY;
    let mut sweeps = 0;
    let mut status = CycleStatus::MaxSweeps;

    while sweeps < max_sweeps {
        let next = sweep(ops, eps, &z)?;
        step = distance(&next, &z);
        sweeps += 1;
        if tail.len() == TAIL_LEN {
            tail.remove(0);
        }
        tail.push(z);
        z = next;
        if sweeps == checkpoint {
            early_step = Some(step);
        }
        if z.norm() > DIVERGENCE_NORM {
            status = CycleStatus::NoFixedPointSuspected;
            break;
        }
        if step <= tol * eps {
            status = CycleStatus::Converged;
            break;
        }
    }
    if status == CycleStatus::MaxSweeps && max_sweeps >= 8 {
        if let Some(early) = early_step {
            if tail_exponent((checkpoint, early), (sweeps, step)) < 1.0 {
                status = CycleStatus::NoFixedPointSuspected;
            }
        }
    }

    let mut points = Vec::with_capacity(ops.len());
    let mut x = z.clone();
    for op in ops {
        x = relaxed_step(op, eps, &x)?.ensure_finite("cycle extraction")?;
        points.push(x.clone());
    }
    let converged = status == CycleStatus::Converged;
    let fejer_monotone = converged && {
        let end = points.last().expect("m >= 2");
        tail.push(z);
        tail.windows(2).all(|w| distance(&w[1], end) <= distance(&w[0], end) + FEJER_SLACK)
    };

    Ok(CycleResult {
        eps,
        points,
        anchor: y0.clone(),
        sweeps_used: sweeps,
        endpoint_residual: step,
        converged,
        status,
        fejer_monotone,
    })
}

/// The cycle `(x₁, …, x_m)` of a converged run.
pub fn extract_cycle(result: &CycleResult) -> Result<Vec<Point>> {
    if !result.converged {
        return Err(Error::invalid(format!(
            "cannot extract a cycle from an unconverged run (ε = {}, status {})",
            result.eps, result.status
        )));
    }
    Ok(result.points.clone())
}

/// The iterates `z₀ = y₀, z₁, …, z_n` of the periodic process.
pub fn orbit(ops: &[Operator], eps: f64, y0: &Point, sweeps: usize) -> Result<Vec<Point>> {
    validate_family(ops, y0)?;
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("relaxation parameter must lie in [0, 1], got {eps}")));
    }
    let mut out = Vec::with_capacity(sweeps + 1);
    out.push(y0.clone());
    for k in 0..sweeps {
        let next = sweep(ops, eps, &out[k])?;
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleDiagnostics {
    /// `maxᵢ ‖xᵢ − x_{i−1}‖` with `x₀ = x_m`.
    pub max_adjacent_residual: f64,
    /// `‖T x_m − x_m‖` for the average operator `T`.
    pub avg_op_residual: f64,
    /// `(2/m) Σ_{i<m} ‖x_m − xᵢ‖`, which dominates `avg_op_residual`.
    pub residual_bound: f64,
    /// `‖Σᵢ Tᵢ x_{i−1} − Σᵢ xᵢ‖`.
    pub sum_identity_error: f64,
    /// `maxᵢ |‖xᵢ − x_{i−1}‖ − ε‖Tᵢ x_{i−1} − x_{i−1}‖|`.
    pub adjacent_identity_error: f64,
    /// `maxᵢ ‖xᵢ − (Id + ε(Tᵢ − Id)) x_{i−1}‖`.
    pub closure_error: f64,
}

impl CycleDiagnostics {
    pub fn verify(&self) -> Result<()> {
        if self.avg_op_residual > self.residual_bound + INEQUALITY_TOL {
            return Err(Error::Verification(format!(
                "average residual {:e} exceeds (2/m)Σ‖x_m − xᵢ‖ = {:e}",
                self.avg_op_residual, self.residual_bound
            )));
        }
        if self.sum_identity_error > SUM_IDENTITY_TOL {
            return Err(Error::Verification(format!(
                "Σ Tᵢx_(i−1) differs from Σ xᵢ by {:e}",
                self.sum_identity_error
            )));
        }
        if self.adjacent_identity_error > ADJACENT_IDENTITY_TOL {
            return Err(Error::Verification(format!(
                "adjacent residual identity off by {:e}",
                self.adjacent_identity_error
            )));
        }
        Ok(())
    }
}

/// Diagnostics of the recorded cycle, converged or not.
pub fn compute_diagnostics(result: &CycleResult, ops: &[Operator]) -> Result<CycleDiagnostics> {
    let m = ops.len();
    if result.points.len() != m {
        return Err(Error::invalid(format!("cycle has {} points but {m} operators were given", result.points.len())));
    }
    let eps = result.eps;
    let xs = &result.points;
    let xm = &xs[m - 1];
    let mut max_adj: f64 = 0.0;
    let mut adj_err: f64 = 0.0;
    let mut closure: f64 = 0.0;
    let mut sum_t = Point::zeros(xm.dim());
    let mut sum_x = Point::zeros(xm.dim());
    let mut avg = Point::zeros(xm.dim());
    for (i, op) in ops.iter().enumerate() {
        let prev = if i == 0 { xm } else { &xs[i - 1] };
        let t_prev = op.apply(prev)?;
        let link = distance(&xs[i], prev);
        max_adj = max_adj.max(link);
        adj_err = adj_err.max((link - eps * distance(&t_prev, prev)).abs());
        closure = closure.max(distance(&xs[i], &prev.lerp(&t_prev, eps)));
        sum_t = &sum_t + &t_prev;
        sum_x = &sum_x + &xs[i];
        avg = &avg + &op.apply(xm)?;
    }
    let avg = avg.scale(1.0 / m as f64);
    let bound = 2.0 / m as f64 * xs[..m - 1].iter().map(|x| distance(xm, x)).sum::<f64>();
    Ok(CycleDiagnostics {
        max_adjacent_residual: max_adj,
        avg_op_residual: distance(&avg, xm),
        residual_bound: bound,
        sum_identity_error: distance(&sum_t, &sum_x),
        adjacent_identity_error: adj_err,
        closure_error: closure,
    })
}

/// Diagnostics of a converged cycle, with the residual inequality and both
/// identities verified.
pub fn cycle_diagnostics(result: &CycleResult, ops: &[Operator]) -> Result<CycleDiagnostics> {
    extract_cycle(result)?;
    let d = compute_diagnostics(result, ops)?;
    d.verify()?;
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Point the endpoints are measured against. Defaults to the endpoint
    /// at the smallest converged ε.
    pub reference: Option<Point>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { tol: DEFAULT_TOL, max_sweeps: DEFAULT_MAX_SWEEPS, reference: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub result: CycleResult,
    pub diagnostics: CycleDiagnostics,
    pub dist_to_reference: Option<f64>,
    /// Failure message when the cycle converged but its checks did not hold.
    pub verification_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub grid: Vec<f64>,
    pub records: Vec<SweepRecord>,
    pub reference: Option<Point>,
    /// Least-squares slope of `ln maxᵢ‖xᵢ − x_{i−1}‖` against `ln ε` over
    /// converged entries.
    pub residual_slope: Option<f64>,
    /// Largest endpoint norm over converged entries: an empirical bound on
    /// the fixed-point curve.
    pub endpoint_sup_norm: f64,
    /// Distances between consecutive converged endpoints along the grid.
    pub endpoint_gaps: Vec<f64>,
}

impl SweepReport {
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.result.converged)
    }

    pub fn verification_failures(&self) -> Vec<&SweepRecord> {
        self.records.iter().filter(|r| r.verification_error.is_some()).collect()
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.records
            .iter()
            .map(|r| {
                let d = &r.diagnostics;
                vec![
                    fmt_f64(r.result.eps),
                    r.result.sweeps_used.to_string(),
                    fmt_f64(r.result.endpoint_residual),
                    fmt_f64(d.max_adjacent_residual),
                    fmt_f64(d.avg_op_residual),
                    fmt_opt(r.dist_to_reference),
                    r.result.converged.to_string(),
                ]
            })
            .collect()
    }

    pub const CSV_HEADER: [&'static str; 7] = [
        "eps",
        "sweeps",
        "endpoint_residual",
        "max_adjacent_residual",
        "avg_op_residual",
        "dist_to_reference",
        "converged",
    ];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv(out, &Self::CSV_HEADER, &self.csv_rows())
    }
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("ε grid is empty"));
    }
    if let Some(e) = grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::invalid(format!("ε grid entries must lie in (0, 1), got {e}")));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("ε grid must be strictly decreasing"));
    }
    Ok(())
}

/// `{2^{−k}}` for `k = 1..=levels`.
pub fn geometric_grid(levels: usize) -> Vec<f64> {
    (1..=levels as i32).map(|k| 2f64.powi(-k)).collect()
}

pub fn sweep_epsilon(ops: &[Operator], y0: &Point, grid: &[f64], tol: f64) -> Result<SweepReport> {
    sweep_epsilon_with(ops, y0, grid, &SweepOptions { tol, ..SweepOptions::default() })
}

/// Runs [`run_periodic`] for every grid entry from the same anchor. Entries
/// run in parallel; records come back in grid order.
pub fn sweep_epsilon_with(ops: &[Operator], y0: &Point, grid: &[f64], opts: &SweepOptions) -> Result<SweepReport> {
    validate_grid(grid)?;
    validate_family(ops, y0)?;
    if let Some(r) = &opts.reference {
        r.check_dim(y0.dim())?;
    }
    let runs: Vec<(CycleResult, CycleDiagnostics)> = grid
        .par_iter()
        .map(|&eps| {
            let res = run_periodic(ops, eps, y0, opts.tol, opts.max_sweeps)?;
            let diag = compute_diagnostics(&res, ops)?;
            Ok((res, diag))
        })
        .collect::<Result<_>>()?;

    let reference = opts.reference.clone().or_else(|| {
        runs.iter().rev().find(|(r, _)| r.converged).map(|(r, _)| r.endpoint().clone())
    });
    let records: Vec<SweepRecord> = runs
        .into_iter()
        .map(|(result, diagnostics)| {
            let verification_error = if result.converged {
                diagnostics.verify().err().map(|e| e.to_string())
            } else {
                None
            };
            SweepRecord {
                dist_to_reference: reference.as_ref().map(|p| distance(result.endpoint(), p)),
                result,
                diagnostics,
                verification_error,
            }
        })
        .collect();

    let converged: Vec<&SweepRecord> = records.iter().filter(|r| r.result.converged).collect();
    let eps: Vec<f64> = converged.iter().map(|r| r.result.eps).collect();
    let adj: Vec<f64> = converged.iter().map(|r| r.diagnostics.max_adjacent_residual).collect();
    let endpoint_gaps = converged
        .windows(2)
        .map(|w| distance(w[0].result.endpoint(), w[1].result.endpoint()))
        .collect();
    Ok(SweepReport {
        grid: grid.to_vec(),
        residual_slope: loglog_slope(&eps, &adj),
        endpoint_sup_norm: converged.iter().map(|r| r.result.endpoint().norm()).fold(0.0, f64::max),
        endpoint_gaps,
        reference,
        records,
    })
}

/// Krasnoselskii–Mann iteration `x ← ½x + ½Tx` until `‖x − Tx‖ ≤ tol`.
pub fn km_fixed_point(t_avg: &Operator, y0: &Point, tol: f64, max_iters: usize) -> Result<Point> {
    y0.check_dim(t_avg.dim())?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let mut x = y0.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..=max_iters {
        let tx = t_avg.apply(&x)?;
        residual = distance(&x, &tx);
        if residual <= tol {
            return Ok(x);
        }
        x = x.lerp(&tx, 0.5);
    }
    Err(Error::NoConvergence {
        method: "Krasnoselskii-Mann iteration",
        iterations: max_iters,
        last_iterate: x.to_vec(),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::ConvexSet;

    fn p(c: &[f64]) -> Point {
        Point::from_slice(c).unwrap()
    }

    fn lines(a: f64, b: f64) -> Vec<Operator> {
        Operator::projections(&[ConvexSet::horizontal_line(a).unwrap(), ConvexSet::horizontal_line(b).unwrap()])
    }

    fn hyperbola_ops(alpha: f64, beta: f64) -> Vec<Operator> {
        Operator::projections(&[
            ConvexSet::horizontal_line(alpha).unwrap(),
            ConvexSet::horizontal_line(beta).unwrap(),
            ConvexSet::hyperbola(1.0).unwrap(),
        ])
    }

    #[test]
    fn parallel_lines_endpoint() {
        let r = run_periodic(&lines(-1.0, 1.0), 0.5, &p(&[0.0, 0.0]), 1e-12, 100_000).unwrap();
        assert!(r.converged);
        assert_eq!(r.status, CycleStatus::Converged);
        assert!((r.endpoint()[1] - 1.0 / 3.0).abs() < 1e-8);
        assert!(r.endpoint_residual <= 1e-12);
        assert!(r.fejer_monotone);
    }

    #[test]
    fn full_step_on_intersecting_lines() {
        let ops = Operator::projections(&[
            ConvexSet::horizontal_line(0.0).unwrap(),
            ConvexSet::affine_subspace(p(&[0.0, 0.0]), vec![p(&[0.6, 0.8])]).unwrap(),
        ]);
        let r = run_periodic(&ops, 1.0, &p(&[3.0, 1.0]), 1e-12, 10_000).unwrap();
        assert!(r.converged);
        let end = r.endpoint();
        for op in &ops {
            assert!(op.residual(end).unwrap() < 1e-9);
        }
    }

    #[test]
    fn hyperbola_level_at_half() {
        let ops = hyperbola_ops(0.0, 1.0);
        let r = run_periodic(&ops, 0.5, &p(&[0.0, 0.0]), 1e-12, 1_000_000).unwrap();
        assert!(r.converged);
        assert!((r.endpoint()[1] - 2.0 / 3.0).abs() < 1e-8);
        let d = cycle_diagnostics(&r, &ops).unwrap();
        assert!(d.avg_op_residual < d.residual_bound);
    }

    #[test]
    fn unit_step_cycle_of_parallel_lines() {
        // Full steps alternate between the two lines after one sweep.
        let ops = lines(-1.0, 1.0);
        let r = run_periodic(&ops, 1.0, &p(&[0.0, 0.0]), 1e-12, 100).unwrap();
        let cycle = extract_cycle(&r).unwrap();
        let z0 = p(&[0.0, 0.0]);
        let x1 = ops[0].apply(&ops[1].apply(&ops[0].apply(&z0).unwrap()).unwrap()).unwrap();
        assert_eq!(cycle, vec![x1.clone(), ops[1].apply(&x1).unwrap()]);
        assert_eq!(cycle, vec![p(&[0.0, -1.0]), p(&[0.0, 1.0])]);
    }

    #[test]
    fn closure_within_tolerance() {
        let ops = hyperbola_ops(0.0, 1.0);
        let r = run_periodic(&ops, 0.25, &p(&[0.0, 0.0]), 1e-10, 1_000_000).unwrap();
        let xs = extract_cycle(&r).unwrap();
        let relaxed = Operator::relaxed(ops[0].clone(), 0.25).unwrap();
        assert!(distance(&xs[0], &relaxed.apply(&xs[2]).unwrap()) <= 1e-9);
    }

    #[test]
    fn consistent_sets_have_trivial_cycles() {
        let ops = Operator::projections(&[
            ConvexSet::ball(p(&[0.0, 0.0]), 1.0).unwrap(),
            ConvexSet::halfspace(p(&[1.0, 0.0]), 0.0).unwrap(),
        ]);
        for eps in [0.9, 0.3] {
            let r = run_periodic(&ops, eps, &p(&[-0.5, 0.2]), 1e-10, 1000).unwrap();
            assert_eq!(r.sweeps_used, 1);
            assert!(r.points.iter().all(|x| *x == r.points[0]));
            let d = cycle_diagnostics(&r, &ops).unwrap();
            assert_eq!(d.max_adjacent_residual, 0.0);
            assert_eq!(d.avg_op_residual, 0.0);
        }
    }

    #[test]
    fn parallel_lines_diagnostics_in_closed_form() {
        let ops = lines(-1.0, 1.0);
        let eps = 0.5;
        let r = run_periodic(&ops, eps, &p(&[0.0, 0.0]), 1e-13, 100_000).unwrap();
        let d = cycle_diagnostics(&r, &ops).unwrap();
        // x₂ = (0, ε/(2−ε)), x₁ = (0, −ε/(2−ε)) and T x = (x₁, 0).
        let level = eps / (2.0 - eps);
        assert!((d.avg_op_residual - level).abs() < 1e-10);
        assert!((d.residual_bound - 2.0 * level).abs() < 1e-10);
        assert!((d.max_adjacent_residual - 2.0 * level).abs() < 1e-10);
    }

    #[test]
    fn unconverged_run_is_reported() {
        let r = run_periodic(&lines(-1.0, 1.0), 0.01, &p(&[0.0, 5.0]), 1e-12, 10).unwrap();
        assert!(!r.converged);
        assert_eq!(r.sweeps_used, 10);
        assert!(!r.fejer_monotone);
        assert!(extract_cycle(&r).unwrap_err().is_usage());
        assert!(cycle_diagnostics(&r, &lines(-1.0, 1.0)).unwrap_err().is_usage());
    }

    #[test]
    fn divergence_is_flagged_past_threshold() {
        // Level ((1−ε)α+β)/(2−ε) is 0 at ε = 0.5: the orbit creeps out along
        // the hyperbola without ever reaching a fixed point.
        let ops = hyperbola_ops(1.0, -0.5);
        let r = run_periodic(&ops, 0.5, &p(&[0.0, 0.0]), 1e-10, 20_000).unwrap();
        assert_eq!(r.status, CycleStatus::NoFixedPointSuspected);
        let r = run_periodic(&ops, 0.5, &p(&[20.0, 1.0]), 1e-10, 20_000).unwrap();
        assert_eq!(r.status, CycleStatus::NoFixedPointSuspected);
        // Below the threshold, from inside the hyperbola region the orbit only
        // has to settle onto the level line.
        let r = run_periodic(&ops, 0.4, &p(&[20.0, 1.0]), 1e-10, 1_000_000).unwrap();
        assert_eq!(r.status, CycleStatus::Converged);
        assert!((r.endpoint()[1] - 0.1 / 1.6).abs() < 1e-8);
    }

    #[test]
    fn argument_validation() {
        let ops = lines(-1.0, 1.0);
        let y = p(&[0.0, 0.0]);
        assert!(run_periodic(&ops, 0.0, &y, 1e-10, 10).unwrap_err().is_usage());
        assert!(run_periodic(&ops, 1.5, &y, 1e-10, 10).unwrap_err().is_usage());
        assert!(run_periodic(&ops, 0.5, &y, 0.0, 10).unwrap_err().is_usage());
        assert!(run_periodic(&ops[..1], 0.5, &y, 1e-10, 10).unwrap_err().is_usage());
        assert!(run_periodic(&ops, 0.5, &p(&[0.0]), 1e-10, 10).unwrap_err().is_usage());
        assert!(sweep_epsilon(&ops, &y, &[0.5, 0.5], 1e-10).unwrap_err().is_usage());
        assert!(sweep_epsilon(&ops, &y, &[0.1, 0.5], 1e-10).unwrap_err().is_usage());
        assert!(sweep_epsilon(&ops, &y, &[1.0, 0.5], 1e-10).unwrap_err().is_usage());
        assert!(sweep_epsilon(&ops, &y, &[], 1e-10).unwrap_err().is_usage());
    }

    #[test]
    fn hyperbola_sweep_approaches_average_level() {
        let ops = hyperbola_ops(0.0, 1.0);
        let grid = [0.5, 0.25, 0.1, 0.05, 0.01];
        let rep = sweep_epsilon(&ops, &p(&[0.0, 0.0]), &grid, 1e-10).unwrap();
        assert!(rep.all_converged());
        assert!(rep.verification_failures().is_empty());
        let levels: Vec<f64> = rep.records.iter().map(|r| r.result.endpoint()[1]).collect();
        for (eps, level) in grid.iter().zip(&levels) {
            assert!((level - 1.0 / (2.0 - eps)).abs() < 1e-8);
        }
        assert!((levels[4] - 0.5).abs() < 0.01);
        let slope = rep.residual_slope.unwrap();
        assert!((slope - 1.0).abs() < 0.2, "slope {slope}");
        assert_eq!(rep.records.len(), grid.len());
        assert_eq!(rep.endpoint_gaps.len(), grid.len() - 1);
        assert_eq!(rep.records[4].dist_to_reference, Some(0.0));
    }

    #[test]
    fn consistent_sweep_has_zero_residuals() {
        let ops = Operator::projections(&[
            ConvexSet::horizontal_line(0.0).unwrap(),
            ConvexSet::ball(p(&[0.0, 0.5]), 1.0).unwrap(),
        ]);
        let rep = sweep_epsilon(&ops, &p(&[0.2, 0.0]), &geometric_grid(6), 1e-10).unwrap();
        for r in &rep.records {
            assert_eq!(r.diagnostics.max_adjacent_residual, 0.0);
        }
        assert!(rep.residual_slope.is_none());
    }

    #[test]
    fn sweep_csv_layout() {
        let rep = sweep_epsilon(&lines(-1.0, 1.0), &p(&[0.0, 0.0]), &[0.5, 0.25], 1e-10).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut rows = text.lines();
        assert_eq!(
            rows.next().unwrap(),
            "eps,sweeps,endpoint_residual,max_adjacent_residual,avg_op_residual,dist_to_reference,converged"
        );
        assert!(rows.next().unwrap().starts_with("5.0000000000000000e-1,"));
        assert!(rows.next().unwrap().ends_with(",true"));
    }

    #[test]
    fn km_examples() {
        let t = Operator::average(lines(-1.0, 1.0)).unwrap();
        let x = km_fixed_point(&t, &p(&[0.0, 5.0]), 1e-12, 10_000).unwrap();
        assert!(x.norm() <= 1e-11);
        let hyp = Operator::average(hyperbola_ops(0.0, 1.0)).unwrap();
        let x = km_fixed_point(&hyp, &p(&[3.0, 0.0]), 1e-12, 1_000_000).unwrap();
        assert!((x[1] - 0.5).abs() < 1e-9);
        let id = Operator::affine(nalgebra::DMatrix::identity(2, 2), p(&[0.0, 0.0])).unwrap();
        let y = p(&[4.0, -1.0]);
        assert_eq!(km_fixed_point(&id, &y, 1e-12, 0).unwrap(), y);
    }

    #[test]
    fn km_budget_exhaustion_is_numerical() {
        let t = Operator::average(lines(-1.0, 1.0)).unwrap();
        let err = km_fixed_point(&t, &p(&[0.0, 5.0]), 1e-12, 3).unwrap_err();
        assert!(err.is_numerical());
        match err {
            Error::NoConvergence { last_iterate, .. } => assert_eq!(last_iterate.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn orbit_starts_at_anchor() {
        let z = orbit(&lines(-1.0, 1.0), 0.5, &p(&[0.0, 0.0]), 3).unwrap();
        assert_eq!(z.len(), 4);
        assert_eq!(z[0], p(&[0.0, 0.0]));
        assert_eq!(z[1], p(&[0.0, 0.25]));
    }
}
