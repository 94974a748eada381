//! How far one relaxed cycle is from an explicit step of the average
//! operator.
//!
//! For nonexpansive `T₁, …, T_m`, `T = (1/m)ΣTᵢ`, `A = Id − T` and any `z`,
//!
//! ```text
//! ‖R^ε x − x + εm·Ax‖ ≤ ε²(3^m − 2m − 1)(‖x − z‖ + ρ),   ρ = maxᵢ‖Tᵢz − z‖/2,
//! ```
//!
//! and for firmly nonexpansive operators (projectors) the sharper
//! `ε²(2^m − m − 1)(‖x − z‖ + 2ρ)` holds. [`bound_check_suite`] samples
//! both inequalities.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::{relaxed_step, Operator};
use crate::point::{distance, Point};
use crate::report::{fmt_f64, loglog_slope, write_csv};

/// Additive slack on both envelopes.
pub const BOUND_SLACK: f64 = 1e-9;
/// Violations kept verbatim in a suite report; the count is always exact.
pub const MAX_RECORDED_VIOLATIONS: usize = 100;

pub fn general_constant(m: usize) -> f64 {
    3f64.powi(m as i32) - 2.0 * m as f64 - 1.0
}

pub fn firm_constant(m: usize) -> f64 {
    2f64.powi(m as i32) - m as f64 - 1.0
}

fn check_family(ops: &[Operator], x: &Point, eps: f64) -> Result<()> {
    if ops.is_empty() {
        return Err(Error::invalid("operator list is empty"));
    }
    for op in ops {
        x.check_dim(op.dim())?;
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("relaxation parameter must lie in [0, 1], got {eps}")));
    }
    Ok(())
}

fn cycle_and_average(ops: &[Operator], eps: f64, x: &Point) -> Result<(Point, Point)> {
    let mut r = x.clone();
    let mut avg = Point::zeros(x.dim());
    for op in ops {
        r = relaxed_step(op, eps, &r)?;
        avg = &avg + &op.eval(x)?;
    }
    Ok((r, avg.scale(1.0 / ops.len() as f64)))
}

/// `‖R^ε x − x + εm(x − Tx)‖`.
pub fn lemma_gap(ops: &[Operator], eps: f64, x: &Point) -> Result<f64> {
    check_family(ops, x, eps)?;
    let (r, tx) = cycle_and_average(ops, eps, x)?;
    let m = ops.len() as f64;
    let v = &(&r - x) + &(x - &tx).scale(eps * m);
    Ok(v.ensure_finite("lemma gap")?.norm())
}

/// `maxᵢ ‖Tᵢz − z‖ / 2`.
pub fn rho(ops: &[Operator], z: &Point) -> Result<f64> {
    let mut r: f64 = 0.0;
    for op in ops {
        r = r.max(op.residual(z)?);
    }
    Ok(r / 2.0)
}

pub fn all_projectors(ops: &[Operator]) -> bool {
    ops.iter().all(|op| op.as_projection().is_some())
}

fn envelope_from(m: usize, eps: f64, dist_xz: f64, rho: f64, firm: bool) -> f64 {
    if firm {
        eps * eps * firm_constant(m) * (dist_xz + 2.0 * rho)
    } else {
        eps * eps * general_constant(m) * (dist_xz + rho)
    }
}

/// Right-hand side of the general bound, or of the firm one when `firm`.
pub fn lemma_envelope(ops: &[Operator], eps: f64, x: &Point, z: &Point, firm: bool) -> Result<f64> {
    check_family(ops, x, eps)?;
    z.check_dim(x.dim())?;
    if firm && !all_projectors(ops) {
        return Err(Error::invalid("the firm envelope needs every operator to be a projector"));
    }
    Ok(envelope_from(ops.len(), eps, distance(x, z), rho(ops, z)?, firm))
}

/// Least-squares slope of `ln lemma_gap` against `ln ε`.
pub fn gap_slope(ops: &[Operator], x: &Point, grid: &[f64]) -> Result<Option<f64>> {
    let gaps = grid.iter().map(|&e| lemma_gap(ops, e, x)).collect::<Result<Vec<_>>>()?;
    Ok(loglog_slope(grid, &gaps))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSample {
    pub eps: f64,
    pub x: Point,
    pub z: Point,
    pub lhs: f64,
    pub rhs_general: f64,
    pub rhs_firm: Option<f64>,
    /// `lhs / rhs_general`, or 0 when the envelope vanishes.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub family: String,
    pub variant: &'static str,
    pub eps: f64,
    pub x: Point,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    /// Base point of the envelope; the origin when `None`.
    pub z: Option<Point>,
    /// Multiplies both envelopes before comparison. Values below one are
    /// only useful as a negative control.
    pub envelope_scale: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { z: None, envelope_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSuite {
    pub seed: u64,
    pub n_samples: usize,
    pub radius: f64,
    pub grid: Vec<f64>,
    pub m: usize,
    pub firm_checked: bool,
    pub envelope_scale: f64,
    #[serde(skip)]
    pub samples: Vec<BoundSample>,
    pub max_ratio: f64,
    pub max_firm_ratio: Option<f64>,
    pub violation_count: usize,
    pub violations: Vec<BoundViolation>,
    pub passed: bool,
}

impl BoundSuite {
    pub const CSV_HEADER: [&'static str; 5] = ["eps", "norm_x", "lhs", "rhs", "ratio"];

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.samples
            .iter()
            .map(|s| vec![fmt_f64(s.eps), fmt_f64(s.x.norm()), fmt_f64(s.lhs), fmt_f64(s.rhs_general), fmt_f64(s.ratio)])
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv(out, &Self::CSV_HEADER, &self.csv_rows())
    }

    /// `Err(Verification)` describing the first violation, if any.
    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            None => Ok(self),
            Some(v) => Err(Error::Verification(format!(
                "{} of {} bound checks violated; first: {} bound at ε = {} for {} at x = {}: {:e} > {:e}",
                self.violation_count,
                self.samples.len() * if self.firm_checked { 2 } else { 1 },
                v.variant,
                v.eps,
                v.family,
                v.x,
                v.lhs,
                v.rhs
            ))),
        }
    }
}

/// Sample `index` of a uniform draw from the ball `B(0; radius)` in ℝⁿ.
/// Each index owns a ChaCha stream, so draws do not depend on scheduling.
pub fn ball_sample(seed: u64, index: u64, dim: usize, radius: f64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u: f64 = Uniform::new(0.0, 1.0).expect("valid range").sample(&mut rng);
    let r = radius * u.powf(1.0 / dim as f64);
    if len == 0.0 {
        return Point::zeros(dim);
    }
    Point::raw(dir.into_iter().map(|v| v * r / len).collect())
}

pub fn bound_check_suite(
    ops: &[Operator],
    grid: &[f64],
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<BoundSuite> {
    bound_check_suite_with(ops, grid, n_samples, radius, seed, &SuiteOptions::default())
}

/// Checks both envelopes at `n_samples` uniform points of `B(0; radius)`
/// for every grid ε. The firm envelope is checked only when every operator
/// is a projector. Violations are collected, not raised; see
/// [`BoundSuite::into_result`].
pub fn bound_check_suite_with(
    ops: &[Operator],
    grid: &[f64],
    n_samples: usize,
    radius: f64,
    seed: u64,
    opts: &SuiteOptions,
) -> Result<BoundSuite> {
    let first = ops.first().ok_or_else(|| Error::invalid("operator list is empty"))?;
    let dim = first.dim();
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("radius must be nonnegative, got {radius}")));
    }
    if grid.is_empty() || grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(Error::invalid("ε grid must be a nonempty subset of [0, 1]"));
    }
    if !(opts.envelope_scale > 0.0) {
        return Err(Error::invalid("envelope scale must be positive"));
    }
    let z = opts.z.clone().unwrap_or_else(|| Point::zeros(dim));
    z.check_dim(dim)?;
    let m = ops.len();
    let firm = all_projectors(ops);
    let rho_z = rho(ops, &z)?;
    let family = format!("[{}]", ops.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(", "));
    let scale = opts.envelope_scale;

    let per_sample: Vec<Vec<BoundSample>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let x = ball_sample(seed, i, dim, radius);
            let dxz = distance(&x, &z);
            grid.iter()
                .map(|&eps| {
                    let lhs = lemma_gap(ops, eps, &x)?;
                    let rhs_general = envelope_from(m, eps, dxz, rho_z, false);
                    let rhs_firm = firm.then(|| envelope_from(m, eps, dxz, rho_z, true));
                    let ratio = if rhs_general > 0.0 { lhs / rhs_general } else { 0.0 };
                    Ok(BoundSample { eps, x: x.clone(), z: z.clone(), lhs, rhs_general, rhs_firm, ratio })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let samples: Vec<BoundSample> = per_sample.into_iter().flatten().collect();

    let mut violations = Vec::new();
    let mut violation_count = 0;
    let mut note = |variant: &'static str, s: &BoundSample, rhs: f64| {
        violation_count += 1;
        if violations.len() < MAX_RECORDED_VIOLATIONS {
            violations.push(BoundViolation { family: family.clone(), variant, eps: s.eps, x: s.x.clone(), lhs: s.lhs, rhs });
        }
    };
    for s in &samples {
        if s.lhs > scale * s.rhs_general + BOUND_SLACK {
            note("general", s, scale * s.rhs_general);
        }
        if let Some(rf) = s.rhs_firm {
            if s.lhs > scale * rf + BOUND_SLACK {
                note("firm", s, scale * rf);
            }
        }
    }
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let max_firm_ratio = firm.then(|| {
        samples
            .iter()
            .filter_map(|s| s.rhs_firm.filter(|r| *r > 0.0).map(|r| s.lhs / r))
            .fold(0.0, f64::max)
    });
    Ok(BoundSuite {
        seed,
        n_samples,
        radius,
        grid: grid.to_vec(),
        m,
        firm_checked: firm,
        envelope_scale: scale,
        samples,
        max_ratio,
        max_firm_ratio,
        passed: violation_count == 0,
        violation_count,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::ConvexSet;
    use nalgebra::DMatrix;

    fn p(c: &[f64]) -> Point {
        Point::from_slice(c).unwrap()
    }

    fn lines() -> Vec<Operator> {
        Operator::projections(&[ConvexSet::horizontal_line(-1.0).unwrap(), ConvexSet::horizontal_line(1.0).unwrap()])
    }

    fn hyperbola_family() -> Vec<Operator> {
        Operator::projections(&[
            ConvexSet::horizontal_line(0.0).unwrap(),
            ConvexSet::horizontal_line(1.0).unwrap(),
            ConvexSet::hyperbola(1.0).unwrap(),
        ])
    }

    #[test]
    fn constants() {
        assert_eq!((general_constant(2), firm_constant(2)), (4.0, 1.0));
        assert_eq!((general_constant(3), firm_constant(3)), (20.0, 4.0));
        assert_eq!(general_constant(1), 0.0);
    }

    #[test]
    fn gap_vanishes_at_zero_eps_and_common_fixed_points() {
        let ops = hyperbola_family();
        assert_eq!(lemma_gap(&ops, 0.0, &p(&[3.0, -2.0])).unwrap(), 0.0);
        let consistent = Operator::projections(&[
            ConvexSet::ball(p(&[0.0, 0.0]), 1.0).unwrap(),
            ConvexSet::halfspace(p(&[0.0, 1.0]), 0.5).unwrap(),
        ]);
        for eps in [0.1, 0.5, 1.0] {
            assert_eq!(lemma_gap(&consistent, eps, &p(&[0.2, 0.1])).unwrap(), 0.0);
        }
    }

    #[test]
    fn parallel_lines_gap_by_hand() {
        // Second coordinate: y ↦ y + ε(−1 − y) ↦ · + ε(1 − ·); Ty = 0.
        let (eps, y) = (0.5f64, 1.0f64);
        let y1 = y + eps * (-1.0 - y);
        let y2 = y1 + eps * (1.0 - y1);
        let expected = (y2 - y + eps * 2.0 * y).abs();
        let gap = lemma_gap(&lines(), eps, &p(&[0.0, y])).unwrap();
        assert!((gap - expected).abs() < 1e-15);
        assert!((gap - 0.5).abs() < 1e-15);
    }

    #[test]
    fn envelope_values() {
        let ops = lines();
        let z = p(&[0.0, 0.0]);
        // ρ = 1/2 at the origin.
        let x = p(&[3.0, 4.0]);
        assert!((lemma_envelope(&ops, 0.5, &x, &z, false).unwrap() - 0.25 * 4.0 * 5.5).abs() < 1e-12);
        assert!((lemma_envelope(&ops, 0.5, &x, &z, true).unwrap() - 0.25 * 6.0).abs() < 1e-12);
        let star = p(&[0.5, 0.0]);
        let inter = Operator::projections(&[
            ConvexSet::horizontal_line(0.0).unwrap(),
            ConvexSet::ball(p(&[0.0, 0.0]), 1.0).unwrap(),
        ]);
        assert_eq!(lemma_envelope(&inter, 0.3, &star, &star, false).unwrap(), 0.0);
    }

    #[test]
    fn firm_envelope_needs_projectors() {
        let rot = Operator::affine(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]), p(&[0.0, 0.0])).unwrap();
        let ops = vec![rot, lines()[0].clone()];
        let x = p(&[1.0, 1.0]);
        assert!(lemma_envelope(&ops, 0.5, &x, &x, true).unwrap_err().is_usage());
        assert!(lemma_envelope(&ops, 0.5, &x, &x, false).is_ok());
    }

    #[test]
    fn envelope_grows_with_distance() {
        let ops = hyperbola_family();
        let z = p(&[0.0, 0.0]);
        let mut last = 0.0;
        for r in [0.0, 0.5, 1.0, 2.0, 8.0] {
            let e = lemma_envelope(&ops, 0.3, &p(&[r, 0.0]), &z, false).unwrap();
            assert!(e >= last);
            last = e;
        }
    }

    #[test]
    fn hyperbola_suite_passes() {
        let suite = bound_check_suite(&hyperbola_family(), &[1.0, 0.5, 0.1], 1000, 5.0, 7).unwrap();
        assert!(suite.passed, "{:?}", suite.violations.first());
        assert!(suite.firm_checked);
        assert_eq!(suite.samples.len(), 3000);
        assert!(suite.max_ratio > 0.0 && suite.max_ratio <= 1.0);
    }

    #[test]
    fn scaled_envelope_is_caught() {
        let ops = hyperbola_family();
        let grid = [1.0, 0.5, 0.1];
        let honest = bound_check_suite(&ops, &grid, 300, 5.0, 11).unwrap();
        let opts = SuiteOptions { z: None, envelope_scale: 0.9 * honest.max_ratio };
        let sabotaged = bound_check_suite_with(&ops, &grid, 300, 5.0, 11, &opts).unwrap();
        assert!(!sabotaged.passed);
        assert!(sabotaged.violation_count >= 1);
        assert!(sabotaged.into_result().unwrap_err().is_verification());
    }

    #[test]
    fn consistent_family_has_zero_gaps() {
        let ops = Operator::projections(&[
            ConvexSet::halfspace(p(&[1.0, 0.0]), 1.0).unwrap(),
            ConvexSet::halfspace(p(&[0.0, 1.0]), 1.0).unwrap(),
        ]);
        let suite = bound_check_suite(&ops, &[0.5], 200, 0.9, 3).unwrap();
        assert!(suite.passed);
        assert!(suite.samples.iter().all(|s| s.lhs == 0.0));
    }

    #[test]
    fn sampling_is_deterministic_and_inside_the_ball() {
        for i in 0..500 {
            let a = ball_sample(42, i, 3, 2.0);
            assert_eq!(a, ball_sample(42, i, 3, 2.0));
            assert!(a.norm() <= 2.0);
        }
        assert_ne!(ball_sample(42, 0, 3, 2.0), ball_sample(43, 0, 3, 2.0));
        let a = bound_check_suite(&lines(), &[0.5, 0.1], 50, 3.0, 5).unwrap();
        let b = bound_check_suite(&lines(), &[0.5, 0.1], 50, 3.0, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quadratic_scaling_of_the_gap() {
        let grid: Vec<f64> = (1..=10).map(|k| 2f64.powi(-k)).collect();
        let slope = gap_slope(&hyperbola_family(), &p(&[0.5, 3.0]), &grid).unwrap().unwrap();
        assert!((1.8..=2.2).contains(&slope), "slope {slope}");
    }

    #[test]
    fn suite_csv_layout() {
        let suite = bound_check_suite(&lines(), &[0.5], 2, 1.0, 1).unwrap();
        let mut buf = Vec::new();
        suite.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "eps,norm_x,lhs,rhs,ratio");
        assert_eq!(text.lines().count(), 3);
    }
}
