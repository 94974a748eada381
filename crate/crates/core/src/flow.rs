//! The semigroup flow `x′ = −(x − Tx)` and the piecewise-linear interpolant
//! of the periodic iterates that approximates it.
//!
//! One sweep of the under-relaxed cycle moves `z_k` by roughly
//! `−εm(z_k − Tz_k)`, so the interpolant places iterate `z_k` at time
//! `k·m·ε`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::operators::Operator;
use crate::point::{distance, Point};
use crate::report::{fmt_f64, write_csv};

/// Default integrator step.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Relative slack of the exponential decay check.
pub const DECAY_SLACK: f64 = 1e-6;

const TIME_TOL: f64 = 1e-9;

/// Integrator step used when comparing with an interpolant at `eps`.
pub fn comparison_step(eps: f64) -> f64 {
    DEFAULT_STEP.min(eps / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    times: Vec<f64>,
    states: Vec<Point>,
    h: f64,
}

impl FlowTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Point] {
        &self.states
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory is nonempty")
    }

    pub fn last(&self) -> &Point {
        self.states.last().expect("trajectory is nonempty")
    }

    /// State at time `t`, interpolating linearly between grid nodes.
    pub fn at_time(&self, t: f64) -> Result<Point> {
        let end = self.t_end();
        if !(t >= -TIME_TOL && t <= end + TIME_TOL * end.max(1.0)) {
            return Err(Error::invalid(format!("time {t} outside the trajectory range [0, {end}]")));
        }
        let s = (t / self.h).max(0.0);
        let k = s.round();
        if (s - k).abs() < TIME_TOL {
            return Ok(self.states[(k as usize).min(self.states.len() - 1)].clone());
        }
        let k = s.floor() as usize;
        if k + 1 >= self.states.len() {
            return Ok(self.last().clone());
        }
        Ok(self.states[k].lerp(&self.states[k + 1], s - k as f64))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.states[0].dim();
        let names: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        let mut header = vec!["t"];
        header.extend(names.iter().map(String::as_str));
        let rows: Vec<Vec<String>> = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(t, x)| std::iter::once(fmt_f64(*t)).chain(x.coords().iter().map(|c| fmt_f64(*c))).collect())
            .collect();
        write_csv(out, &header, &rows)
    }
}

fn velocity(t_avg: &Operator, x: &Point) -> Result<Point> {
    Ok(&t_avg.eval(x)? - x)
}

/// Classical fourth-order Runge–Kutta integration of `x′ = Tx − x` on the
/// uniform grid `k·h` up to the first node at or past `t_end`.
pub fn integrate_flow(t_avg: &Operator, y0: &Point, t_end: f64, h: f64) -> Result<FlowTrajectory> {
    y0.check_dim(t_avg.dim())?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    if !(t_end >= h * (1.0 - TIME_TOL)) || !t_end.is_finite() {
        return Err(Error::invalid(format!("t_end = {t_end} must be at least the step {h}")));
    }
    let n = (t_end / h - TIME_TOL).ceil() as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(y0.clone());
    let mut x = y0.clone();
    for k in 1..=n {
        let k1 = velocity(t_avg, &x)?;
        let k2 = velocity(t_avg, &(&x + &k1.scale(h / 2.0)))?;
        let k3 = velocity(t_avg, &(&x + &k2.scale(h / 2.0)))?;
        let k4 = velocity(t_avg, &(&x + &k3.scale(h)))?;
        let incr = &(&k1 + &k2.scale(2.0)) + &(&k3.scale(2.0) + &k4);
        x = (&x + &incr.scale(h / 6.0)).ensure_finite("flow integration")?;
        times.push(k as f64 * h);
        states.push(x.clone());
    }
    Ok(FlowTrajectory { times, states, h })
}

/// `ψ^ε`: affine between breakpoints `k·m·ε`, equal to `z_k` at them.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    iterates: Vec<Point>,
    eps: f64,
    m: usize,
}

pub fn build_interpolant(iterates: Vec<Point>, eps: f64, m: usize) -> Result<Interpolant> {
    Interpolant::new(iterates, eps, m)
}

impl Interpolant {
    pub fn new(iterates: Vec<Point>, eps: f64, m: usize) -> Result<Self> {
        if iterates.len() < 2 {
            return Err(Error::invalid("an interpolant needs at least two iterates"));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::invalid(format!("relaxation parameter must lie in (0, 1], got {eps}")));
        }
        if m == 0 {
            return Err(Error::invalid("block length must be positive"));
        }
        let dim = iterates[0].dim();
        for z in &iterates {
            z.check_dim(dim)?;
        }
        Ok(Interpolant { iterates, eps, m })
    }

    /// Time between consecutive breakpoints, `m·ε`.
    pub fn spacing(&self) -> f64 {
        self.m as f64 * self.eps
    }

    pub fn t_end(&self) -> f64 {
        (self.iterates.len() - 1) as f64 * self.spacing()
    }

    pub fn iterates(&self) -> &[Point] {
        &self.iterates
    }

    pub fn eval(&self, t: f64) -> Result<Point> {
        let end = self.t_end();
        if !(t >= 0.0 && t <= end * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!("time {t} outside the interpolant range [0, {end}]")));
        }
        let s = t / self.spacing();
        let nearest = s.round();
        if (s - nearest).abs() < TIME_TOL {
            return Ok(self.iterates[(nearest as usize).min(self.iterates.len() - 1)].clone());
        }
        let k = (s.floor() as usize).min(self.iterates.len() - 2);
        let theta = (s - k as f64).min(1.0);
        if theta == 0.0 {
            return Ok(self.iterates[k].clone());
        }
        Ok(self.iterates[k].lerp(&self.iterates[k + 1], theta))
    }
}

/// `sup ‖ψ^ε(t) − x(t)‖` over the trajectory's grid nodes in `[0, t_end]`.
pub fn flow_deviation(interp: &Interpolant, traj: &FlowTrajectory, t_end: f64) -> Result<f64> {
    let slack = TIME_TOL * t_end.max(1.0);
    if !(t_end > 0.0) || t_end > traj.t_end() + slack || t_end > interp.t_end() + slack {
        return Err(Error::invalid(format!(
            "t_end = {t_end} not covered (trajectory to {}, interpolant to {})",
            traj.t_end(),
            interp.t_end()
        )));
    }
    let x0 = &traj.states[0];
    x0.check_dim(interp.iterates[0].dim())?;
    if distance(x0, &interp.iterates[0]) > 1e-12 {
        return Err(Error::invalid("interpolant and trajectory start at different points"));
    }
    let mut sup: f64 = 0.0;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        if *t > t_end + slack {
            break;
        }
        sup = sup.max(distance(&interp.eval(t.min(interp.t_end()))?, x));
    }
    Ok(sup)
}

/// Whether `θ(t) = ½‖x(t) − x_ref‖²` decays at least like `e^{−2α(t − t₀)}`
/// (with relative slack [`DECAY_SLACK`]) from the first grid time `t₀` at
/// which the trajectory is within `entry_radius` of `x_ref`. Without a
/// radius `t₀ = 0`. A trajectory that never enters the ball fails.
pub fn decay_check(traj: &FlowTrajectory, x_ref: &Point, alpha: f64, entry_radius: Option<f64>) -> Result<bool> {
    x_ref.check_dim(traj.states[0].dim())?;
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("strong monotonicity constant must be positive, got {alpha}")));
    }
    let theta = |x: &Point| 0.5 * (x - x_ref).norm_squared();
    let start = match entry_radius {
        None => 0,
        Some(delta) => match traj.states.iter().position(|x| distance(x, x_ref) <= delta) {
            Some(i) => i,
            None => return Ok(false),
        },
    };
    let t0 = traj.times[start];
    let theta0 = theta(&traj.states[start]);
    Ok(traj.times[start..]
        .iter()
        .zip(&traj.states[start..])
        .all(|(t, x)| theta(x) <= theta0 * (-2.0 * alpha * (t - t0)).exp() * (1.0 + DECAY_SLACK)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::orbit;
    use crate::sets::ConvexSet;

    fn p(c: &[f64]) -> Point {
        Point::from_slice(c).unwrap()
    }

    fn lines() -> Vec<Operator> {
        Operator::projections(&[ConvexSet::horizontal_line(-1.0).unwrap(), ConvexSet::horizontal_line(1.0).unwrap()])
    }

    fn t_lines() -> Operator {
        Operator::average(lines()).unwrap()
    }

    #[test]
    fn parallel_lines_flow_is_exponential() {
        let traj = integrate_flow(&t_lines(), &p(&[0.0, 1.0]), 3.0, 1e-3).unwrap();
        assert_eq!(traj.times().len(), 3001);
        for t in [1.0, 2.0, 3.0] {
            let x = traj.at_time(t).unwrap();
            assert_eq!(x[0], 0.0);
            assert!((x[1] - (-t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn fixed_start_stays_put() {
        let y = p(&[2.5, 0.0]);
        let traj = integrate_flow(&t_lines(), &y, 1.0, 0.01).unwrap();
        assert!(traj.states().iter().all(|x| *x == y));
    }

    #[test]
    fn fourth_order_under_step_halving() {
        let t = Operator::average(Operator::projections(&[
            ConvexSet::ball(p(&[0.0, 0.0]), 1.0).unwrap(),
            ConvexSet::ball(p(&[3.0, 0.5]), 1.0).unwrap(),
            ConvexSet::hyperbola(1.0).unwrap(),
        ]))
        .unwrap();
        let y = p(&[-2.0, 3.0]);
        let end = |h: f64| integrate_flow(&t, &y, 1.0, h).unwrap().last().clone();
        let (a, b, c) = (end(0.1), end(0.05), end(0.025));
        let ratio = (&a - &b).norm() / (&b - &c).norm();
        assert!((10.0..24.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn integrate_flow_validation() {
        assert!(integrate_flow(&t_lines(), &p(&[0.0, 1.0]), 1.0, 0.0).unwrap_err().is_usage());
        assert!(integrate_flow(&t_lines(), &p(&[0.0, 1.0]), 1e-4, 1e-3).unwrap_err().is_usage());
        assert!(integrate_flow(&t_lines(), &p(&[1.0]), 1.0, 0.1).unwrap_err().is_usage());
    }

    #[test]
    fn interpolant_breakpoints_and_midpoints() {
        let zs = vec![p(&[0.0, 0.0]), p(&[1.0, 2.0]), p(&[3.0, -1.0])];
        let psi = build_interpolant(zs.clone(), 0.25, 2).unwrap();
        assert_eq!(psi.spacing(), 0.5);
        for (k, z) in zs.iter().enumerate() {
            assert_eq!(psi.eval(k as f64 * 0.5).unwrap(), *z);
        }
        assert_eq!(psi.eval(0.75).unwrap(), p(&[2.0, 0.5]));
        assert!(psi.eval(1.0 + 1e-6).unwrap_err().is_usage());
        assert!(psi.eval(-0.1).unwrap_err().is_usage());
        assert!(build_interpolant(vec![p(&[0.0])], 0.5, 2).is_err());
    }

    #[test]
    fn interpolant_is_affine_between_breakpoints() {
        let zs = orbit(&lines(), 0.1, &p(&[0.3, 2.0]), 20).unwrap();
        let psi = build_interpolant(zs.clone(), 0.1, 2).unwrap();
        for i in 0..200 {
            let k = i % 20;
            let theta = ((i * 37) % 101) as f64 / 101.0;
            let t = (k as f64 + theta) * psi.spacing();
            let direct = &zs[k].scale(1.0 - theta) + &zs[k + 1].scale(theta);
            assert!((&psi.eval(t).unwrap() - &direct).norm() <= 1e-12);
        }
    }

    #[test]
    fn deviation_of_identical_paths_is_zero() {
        let traj = integrate_flow(&t_lines(), &p(&[0.0, 1.0]), 1.0, 0.1).unwrap();
        // Interpolant through the integrator samples with spacing h = 2·0.05.
        let psi = build_interpolant(traj.states().to_vec(), 0.05, 2).unwrap();
        assert!(flow_deviation(&psi, &traj, 1.0).unwrap() <= 1e-15);
    }

    #[test]
    fn deviation_halves_with_eps() {
        let y = p(&[0.0, 1.0]);
        let dev = |eps: f64| {
            let n = (3.0 / (2.0 * eps)).ceil() as usize;
            let psi = build_interpolant(orbit(&lines(), eps, &y, n).unwrap(), eps, 2).unwrap();
            let traj = integrate_flow(&t_lines(), &y, 3.0, comparison_step(eps)).unwrap();
            flow_deviation(&psi, &traj, 3.0).unwrap()
        };
        let ratio = dev(0.05) / dev(0.025);
        assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn deviation_domain_errors() {
        let y = p(&[0.0, 1.0]);
        let traj = integrate_flow(&t_lines(), &y, 1.0, 0.01).unwrap();
        let short = build_interpolant(orbit(&lines(), 0.1, &y, 2).unwrap(), 0.1, 2).unwrap();
        assert!(flow_deviation(&short, &traj, 1.0).unwrap_err().is_usage());
        let other = build_interpolant(orbit(&lines(), 0.1, &p(&[0.0, 2.0]), 10).unwrap(), 0.1, 2).unwrap();
        assert!(flow_deviation(&other, &traj, 1.0).unwrap_err().is_usage());
    }

    #[test]
    fn decay_on_linear_contraction() {
        let traj = integrate_flow(&t_lines(), &p(&[0.0, 1.0]), 3.0, 1e-3).unwrap();
        let origin = p(&[0.0, 0.0]);
        assert!(decay_check(&traj, &origin, 1.0, None).unwrap());
        assert!(!decay_check(&traj, &origin, 2.0, None).unwrap());
        assert!(decay_check(&traj, &origin, 1.0, Some(0.5)).unwrap());
        assert!(!decay_check(&traj, &p(&[50.0, 0.0]), 1.0, Some(1.0)).unwrap());
        let still = integrate_flow(&t_lines(), &origin, 1.0, 0.1).unwrap();
        assert!(decay_check(&still, &origin, 5.0, None).unwrap());
    }

    #[test]
    fn trajectory_csv_has_time_column() {
        let traj = integrate_flow(&t_lines(), &p(&[0.0, 1.0]), 0.2, 0.1).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,x1,x2");
        assert_eq!(text.lines().count(), 4);
    }
}
