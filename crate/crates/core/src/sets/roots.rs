//! Scalar solvers backing the curved projections.

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Safeguarded Newton iteration on a bracket `[lo, hi]` with
/// `f(lo) <= 0 <= f(hi)` (or the reverse). `f` returns value and derivative.
///
/// A Newton step is taken when it lands strictly inside the current bracket
/// and shrinks it at least as fast as bisection would; otherwise the bracket
/// is bisected. Stops once `|f| <= ftol` or the bracket has collapsed to
/// adjacent floats.
pub fn newton_bisect<F>(f: F, lo: f64, hi: f64, ftol: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::invalid(format!("bad bracket [{lo}, {hi}]")));
    }
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::invalid(format!(
            "bracket [{lo}, {hi}] does not enclose a sign change ({flo:e}, {fhi:e})"
        )));
    }
    // Orient so that f(neg) < 0 < f(pos).
    let (mut neg, mut pos) = if flo < 0.0 { (lo, hi) } else { (hi, lo) };
    let mut x = 0.5 * (lo + hi);
    let mut last_width = (hi - lo).abs();
    let mut fx = f64::NAN;

    for _ in 0..MAX_ITERATIONS {
        let (val, der) = f(x);
        fx = val;
        if val.abs() <= ftol {
            return Ok(x);
        }
        if val < 0.0 {
            neg = x;
        } else {
            pos = x;
        }
        let (a, b) = if neg < pos { (neg, pos) } else { (pos, neg) };
        let width = b - a;
        let mid = a + 0.5 * width;
        if mid <= a || mid >= b {
            // Adjacent floats: nothing left to refine.
            return Ok(if f(a).0.abs() < val.abs() { a } else { x });
        }
        let newton = x - val / der;
        let accept = der.is_finite()
            && der != 0.0
            && newton > a
            && newton < b
            && (newton - x).abs() < 0.5 * last_width;
        last_width = width;
        x = if accept { newton } else { mid };
    }
    Err(Error::NoConvergence {
        method: "safeguarded Newton",
        iterations: MAX_ITERATIONS,
        last_iterate: vec![x],
        residual: fx.abs(),
    })
}

/// Golden-section search for the minimizer of a unimodal `f` on `[a, b]`;
/// returns the final bracket, of width at most `width_tol` (or whatever the
/// iteration budget allows).
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, width_tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..MAX_ITERATIONS {
        if b - a <= width_tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    (a, b)
}

/// A monotone cubic `2w³ + w - c` together with a bracket for its root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRootProblem {
    pub c: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ScalarRootProblem {
    /// Uses the bracket `[min(0, c), max(0, c)]`, valid because
    /// `|2w³ + w| >= |w|`.
    pub fn new(c: f64) -> Self {
        ScalarRootProblem { c, lo: c.min(0.0), hi: c.max(0.0) }
    }

    pub fn with_bracket(c: f64, lo: f64, hi: f64) -> Self {
        ScalarRootProblem { c, lo, hi }
    }

    pub fn residual(&self, w: f64) -> f64 {
        2.0 * w * w * w + w - self.c
    }
}

/// Unique real root of `2w³ + w = c`, to residual `1e-12`.
pub fn solve_monotone_cubic(problem: &ScalarRootProblem) -> Result<f64> {
    let ScalarRootProblem { c, lo, hi } = *problem;
    if !(c.is_finite() && lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::invalid(format!("invalid cubic bracket [{lo}, {hi}] for c = {c}")));
    }
    let (rlo, rhi) = (problem.residual(lo), problem.residual(hi));
    if rlo > 0.0 || rhi < 0.0 {
        return Err(Error::invalid(format!(
            "bracket [{lo}, {hi}] does not enclose the root of 2w^3 + w = {c}"
        )));
    }
    newton_bisect(|w| (problem.residual(w), 6.0 * w * w + 1.0), lo, hi, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisection_oracle(c: f64, mut lo: f64, mut hi: f64) -> f64 {
        let g = |w: f64| 2.0 * w * w * w + w - c;
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cubic_trivial_roots() {
        assert_eq!(solve_monotone_cubic(&ScalarRootProblem::new(0.0)).unwrap(), 0.0);
        let w = solve_monotone_cubic(&ScalarRootProblem::new(3.0)).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_matches_bisection_at_one_third() {
        let oracle = bisection_oracle(1.0 / 3.0, 0.0, 1.0 / 3.0);
        let p = ScalarRootProblem::new(1.0 / 3.0);
        let w = solve_monotone_cubic(&p).unwrap();
        assert!((w - oracle).abs() <= 1e-12, "{w} vs {oracle}");
        assert!(p.residual(w).abs() <= 1e-12);
        assert!(w >= p.lo && w <= p.hi);
    }

    #[test]
    fn cubic_negative_c() {
        let w = solve_monotone_cubic(&ScalarRootProblem::new(-3.0)).unwrap();
        assert!((w + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_rejects_bad_bracket() {
        let err = solve_monotone_cubic(&ScalarRootProblem::with_bracket(1.0, 1.0, 2.0)).unwrap_err();
        assert!(err.is_usage());
        assert!(solve_monotone_cubic(&ScalarRootProblem::with_bracket(1.0, 2.0, 0.0)).is_err());
        assert!(solve_monotone_cubic(&ScalarRootProblem::new(f64::NAN)).is_err());
    }

    #[test]
    fn newton_bisect_handles_flat_newton_steps() {
        // x^3 has zero derivative at the root; bisection must take over.
        let r = newton_bisect(|x| (x * x * x, 3.0 * x * x), -1.0, 2.0, 1e-30).unwrap();
        assert!(r.abs() < 1e-9);
    }

    #[test]
    fn golden_section_brackets_minimum() {
        let (a, b) = golden_section(|x| (x - 0.3).powi(2), -4.0, 7.0, 1e-9);
        assert!(a <= 0.3 + 1e-9 && b >= 0.3 - 1e-9);
        assert!(b - a <= 1e-9);
    }
}
