//! Canonical experiments with closed-form predictions.
//!
//! * [`build_hyperbola_example`]: two horizontal lines and the hyperbola
//!   region in the plane, where `Fix R^ε` is explicit and can be empty.
//! * [`build_parabola_counterexample`]: three sets in ℝ³ whose limit cycles
//!   converge although `d(z, Fix R^ε) ↛ 0` for most least-squares points.
//!   Everything happens in the symmetric plane `ξ₁ = 0`, so the scenario is
//!   two-dimensional with coordinates `(ξ₂, ξ₃)`: the sets are symmetric in
//!   `ξ₁`, projections of points with `ξ₁ = 0` stay there, and `Fix R^ε` is a
//!   single point of that plane. Distances to ambient points are computed
//!   through [`SliceEmbedding`].
//! * [`build_two_set_example`]: any pair of projectors, with the explicit
//!   point `((1−ε)a + b)/(2−ε)` of `Fix R^ε`.
//! * [`build_affine_regular`]: translates of random subspaces, whose limit
//!   cycles converge to the projection of the anchor onto the least-squares
//!   set.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::cycles::{geometric_grid, km_fixed_point, run_periodic, CycleResult, CycleStatus, DEFAULT_MAX_SWEEPS};
use crate::error::{Error, Result};
use crate::linalg::{null_space, power_iteration_norm};
use crate::operators::Operator;
use crate::point::{distance, Point};
use crate::sets::{solve_monotone_cubic, ConvexSet, ScalarRootProblem};

/// Tolerance for closed-form endpoint predictions.
pub const PREDICTION_TOL: f64 = 1e-8;
/// Residual allowed when checking that a predicted point is fixed by `R^ε`.
pub const FIXED_POINT_TOL: f64 = 1e-9;
/// Distance to the predicted limit allowed once `ε ≤ 1e-3`.
pub const LIMIT_TOL: f64 = 1e-3;
pub const KERNEL_CUTOFF: f64 = 1e-10;
pub const POWER_STEPS: usize = 200;
/// Families with `ρ` at or above `1 − IRREGULAR_MARGIN` are treated as
/// irregular.
pub const IRREGULAR_MARGIN: f64 = 1e-8;
const KM_TOL: f64 = 1e-12;
const KM_MAX_ITERS: usize = 10_000_000;

/// Which of the two sign configurations governs emptiness of `Fix R^ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum EmptinessCase {
    /// `α + β < 0 < β`: empty for `ε ≤ η`, nonempty for `ε > η`.
    EmptyUpToThreshold { eta: f64 },
    /// `β < 0 < α + β`: nonempty for `ε < η`, empty for `ε ≥ η`.
    EmptyFromThreshold { eta: f64 },
    /// Any other signs: nonempty exactly when `(1−ε)α + β > 0`.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperbolaPrediction {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub case: EmptinessCase,
    /// Second coordinate of `Fix T`, when `Fix T` is nonempty.
    pub fix_t_level: Option<f64>,
}

impl HyperbolaPrediction {
    fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        let case = if alpha + beta < 0.0 && 0.0 < beta {
            EmptinessCase::EmptyUpToThreshold { eta: 1.0 + beta / alpha }
        } else if beta < 0.0 && 0.0 < alpha + beta {
            EmptinessCase::EmptyFromThreshold { eta: 1.0 + beta / alpha }
        } else {
            EmptinessCase::Direct
        };
        let mid = (alpha + beta) / 2.0;
        HyperbolaPrediction { alpha, beta, gamma, case, fix_t_level: (mid > 0.0).then_some(mid) }
    }

    fn numerator(&self, eps: f64) -> f64 {
        (1.0 - eps) * self.alpha + self.beta
    }

    pub fn fix_nonempty(&self, eps: f64) -> bool {
        match self.case {
            EmptinessCase::EmptyUpToThreshold { eta } => eps > eta,
            EmptinessCase::EmptyFromThreshold { eta } => eps < eta,
            EmptinessCase::Direct => self.numerator(eps) > 0.0,
        }
    }

    /// `((1−ε)α + β)/(2−ε)`, the level of the line carrying `Fix R^ε`.
    pub fn level(&self, eps: f64) -> f64 {
        self.numerator(eps) / (2.0 - eps)
    }

    /// The point of `Fix R^ε` nearest the axis `ξ₂`:
    /// `((2−ε)γ/((1−ε)α + β), level)`.
    pub fn representative(&self, eps: f64) -> Option<Point> {
        self.fix_nonempty(eps)
            .then(|| Point::raw(vec![(2.0 - eps) * self.gamma / self.numerator(eps), self.level(eps)]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParabolaPrediction;

impl ParabolaPrediction {
    /// The real root of `2w³ + w = ε/(2−ε)`.
    pub fn w(eps: f64) -> Result<f64> {
        solve_monotone_cubic(&ScalarRootProblem::new(eps / (2.0 - eps)))
    }

    /// The single point of `Fix R^ε`, in slice coordinates `(ξ₂, ξ₃)`.
    pub fn fixed_point(eps: f64) -> Result<Point> {
        let w = Self::w(eps)?;
        let den = 3.0 * (1.0 - eps) + eps * eps;
        Ok(Point::raw(vec![(w + eps * (1.0 - eps)) / den, 1.0 - w * w / den]))
    }

    pub fn limit() -> Point {
        Point::raw(vec![0.0, 1.0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoSetPrediction {
    /// A fixed point of the average operator.
    pub z: Point,
    pub a: Point,
    pub b: Point,
}

impl TwoSetPrediction {
    /// `((1−ε)a + b)/(2−ε) ∈ Fix R^ε`.
    pub fn fixed_point(&self, eps: f64) -> Point {
        (&self.a.scale(1.0 - eps) + &self.b).scale(1.0 / (2.0 - eps))
    }

    /// `ε‖b − a‖/(2(2−ε))`, which bounds `d(z, Fix R^ε)`.
    pub fn distance_bound(&self, eps: f64) -> f64 {
        eps * distance(&self.b, &self.a) / (2.0 * (2.0 - eps))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinePrediction {
    /// `‖L ∘ P_{E⊥}‖`.
    pub rho: f64,
    pub irregular: bool,
    /// `dim E` for `E = ∩ Eᵢ`.
    pub kernel_dim: usize,
    /// The fixed point of `T` in `E⊥`; the least-squares set is `z + E`.
    pub z: Point,
    /// `P_S y₀`, the limit of the cycles as `ε → 0`. Absent when irregular.
    pub limit: Option<Point>,
    #[serde(skip)]
    pub proj_e: DMatrix<f64>,
}

impl AffinePrediction {
    /// `P_{E⊥} v`.
    pub fn perp(&self, v: &Point) -> Point {
        Point::from_vector(v.as_vector() - &self.proj_e * v.as_vector())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Prediction {
    None,
    Hyperbola(HyperbolaPrediction),
    Parabola(ParabolaPrediction),
    TwoSet(TwoSetPrediction),
    Affine(AffinePrediction),
}

/// How slice coordinates sit inside a larger space: slice coordinate `j`
/// is ambient coordinate `kept[j]`, and `Fix R^ε` has `fixed` in every
/// other ambient coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceEmbedding {
    pub ambient_dim: usize,
    pub kept: Vec<usize>,
    pub fixed: f64,
}

impl SliceEmbedding {
    pub fn restrict(&self, x: &Point) -> Result<Point> {
        x.check_dim(self.ambient_dim)?;
        Ok(Point::raw(self.kept.iter().map(|&i| x[i]).collect()))
    }

    pub fn embed(&self, y: &Point) -> Result<Point> {
        y.check_dim(self.kept.len())?;
        let mut out = vec![self.fixed; self.ambient_dim];
        for (j, &i) in self.kept.iter().enumerate() {
            out[i] = y[j];
        }
        Ok(Point::raw(out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub operators: Vec<Operator>,
    /// The sets behind the operators when all are projectors.
    pub sets: Vec<ConvexSet>,
    pub anchor: Point,
    pub eps_grid: Vec<f64>,
    pub prediction: Prediction,
    /// Strong monotonicity constant of `Id − T` around the predicted limit.
    pub strong_monotonicity: Option<f64>,
    /// Radius of the ball on which `strong_monotonicity` holds; `None`
    /// means everywhere.
    pub entry_radius: Option<f64>,
    pub slice: Option<SliceEmbedding>,
    pub seed: Option<u64>,
}

impl Scenario {
    fn from_sets(name: &str, sets: Vec<ConvexSet>, anchor: Point, eps_grid: Vec<f64>, prediction: Prediction) -> Result<Self> {
        let operators = Operator::projections(&sets);
        for op in &operators {
            anchor.check_dim(op.dim())?;
        }
        Ok(Scenario {
            name: name.to_string(),
            operators,
            sets,
            anchor,
            eps_grid,
            prediction,
            strong_monotonicity: None,
            entry_radius: None,
            slice: None,
            seed: None,
        })
    }

    pub fn m(&self) -> usize {
        self.operators.len()
    }

    pub fn dim(&self) -> usize {
        self.anchor.dim()
    }

    pub fn average(&self) -> Operator {
        Operator::average(self.operators.clone()).expect("scenario operators share a dimension")
    }

    pub fn cycle(&self, eps: f64) -> Result<Operator> {
        Operator::cycle(self.operators.clone(), eps)
    }

    /// Compares a run with the scenario's closed forms.
    pub fn check_run(&self, result: &CycleResult) -> Result<Vec<PredictionCheck>> {
        let eps = result.eps;
        let end = result.endpoint();
        let mut out = Vec::new();
        match &self.prediction {
            Prediction::None => {}
            Prediction::Hyperbola(h) => {
                if h.fix_nonempty(eps) {
                    let level = h.level(eps);
                    let err = (end[1] - level).abs();
                    out.push(PredictionCheck::new(eps, "fix-level", vec![level], vec![end[1]], err, PREDICTION_TOL, result.converged));
                    let outside = self.sets[2].distance(end)?;
                    out.push(PredictionCheck::new(eps, "in-hyperbola-region", vec![], vec![], outside, PREDICTION_TOL, result.converged));
                } else {
                    out.push(PredictionCheck {
                        eps,
                        quantity: "no-fixed-point".into(),
                        predicted: vec![],
                        observed: vec![],
                        error: 0.0,
                        tolerance: 0.0,
                        verified: Some(result.status == CycleStatus::NoFixedPointSuspected),
                    });
                }
            }
            Prediction::Parabola(_) => {
                let z = ParabolaPrediction::fixed_point(eps)?;
                let err = distance(&z, end);
                out.push(PredictionCheck::new(eps, "fixed-point", z.to_vec(), end.to_vec(), err, PREDICTION_TOL, result.converged));
            }
            Prediction::TwoSet(t) => {
                let z = t.fixed_point(eps);
                let res = distance(&self.cycle(eps)?.apply(&z)?, &z);
                out.push(PredictionCheck::new(eps, "fixed-point-residual", z.to_vec(), vec![], res, FIXED_POINT_TOL, true));
            }
            Prediction::Affine(a) => {
                if let Some(limit) = &a.limit {
                    let err = distance(limit, end);
                    let mut c = PredictionCheck::new(eps, "limit", limit.to_vec(), end.to_vec(), err, LIMIT_TOL, result.converged);
                    if eps > LIMIT_TOL {
                        // The limit is only approached as ε → 0.
                        c.verified = None;
                    }
                    out.push(c);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionCheck {
    pub eps: f64,
    pub quantity: String,
    pub predicted: Vec<f64>,
    pub observed: Vec<f64>,
    pub error: f64,
    pub tolerance: f64,
    /// `None` for informational comparisons.
    pub verified: Option<bool>,
}

impl PredictionCheck {
    fn new(eps: f64, quantity: &str, predicted: Vec<f64>, observed: Vec<f64>, error: f64, tolerance: f64, converged: bool) -> Self {
        PredictionCheck {
            eps,
            quantity: quantity.to_string(),
            predicted,
            observed,
            error,
            tolerance,
            verified: Some(converged && error <= tolerance),
        }
    }

    pub fn failed(&self) -> bool {
        self.verified == Some(false)
    }
}

pub fn default_hyperbola_grid() -> Vec<f64> {
    vec![0.5, 0.25, 0.1, 0.05, 0.01]
}

pub fn build_hyperbola_example(alpha: f64, beta: f64, gamma: f64, y0: Point) -> Result<Scenario> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("γ must be positive, got {gamma}")));
    }
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::invalid("α and β must be finite"));
    }
    let sets = vec![
        ConvexSet::horizontal_line(alpha)?,
        ConvexSet::horizontal_line(beta)?,
        ConvexSet::hyperbola(gamma)?,
    ];
    let pred = HyperbolaPrediction::new(alpha, beta, gamma);
    Scenario::from_sets("hyperbola", sets, y0, default_hyperbola_grid(), Prediction::Hyperbola(pred))
}

/// `y0` is a point `(ξ₂, ξ₃)` of the plane `ξ₁ = 0`.
pub fn build_parabola_counterexample(y0: Point) -> Result<Scenario> {
    y0.check_dim(2)?;
    let sets = vec![
        ConvexSet::singleton(Point::raw(vec![-1.0, 1.0]))?,
        ConvexSet::singleton(Point::raw(vec![1.0, 1.0]))?,
        ConvexSet::parabola_cap(),
    ];
    let mut s = Scenario::from_sets("parabola", sets, y0, geometric_grid(10), Prediction::Parabola(ParabolaPrediction))?;
    s.slice = Some(SliceEmbedding { ambient_dim: 3, kept: vec![1, 2], fixed: 0.0 });
    Ok(s)
}

/// Locates a fixed point `z` of the average operator by Krasnoselskii–Mann
/// iteration from `y0`.
pub fn build_two_set_example(s1: ConvexSet, s2: ConvexSet, y0: Point) -> Result<Scenario> {
    let sets = vec![s1, s2];
    let mut s = Scenario::from_sets("two-set", sets, y0, geometric_grid(10), Prediction::None)?;
    let z = km_fixed_point(&s.average(), &s.anchor, KM_TOL, KM_MAX_ITERS)?;
    let a = s.sets[0].project(&z)?;
    let b = s.sets[1].project(&z)?;
    s.prediction = Prediction::TwoSet(TwoSetPrediction { z, a, b });
    Ok(s)
}

fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(rng));
    g.qr().q()
}

/// `m` shifts with independent standard normal entries scaled by `scale`.
pub fn random_shifts(n: usize, m: usize, scale: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..m)
        .map(|_| Point::raw((0..n).map(|_| { let g: f64 = StandardNormal.sample(&mut rng); scale * g }).collect::<Vec<f64>>()))
        .collect()
}

/// `Cᵢ = shifts[i] + Eᵢ` with `Eᵢ` spanned by a seeded random orthonormal
/// frame of dimension `dims[i]`.
pub fn build_affine_regular(n: usize, dims: &[usize], shifts: &[Point], y0: Point, seed: u64) -> Result<Scenario> {
    if n == 0 || n > 64 {
        return Err(Error::invalid(format!("dimension must lie in 1..=64, got {n}")));
    }
    if dims.len() < 2 || dims.len() != shifts.len() {
        return Err(Error::invalid(format!("need at least two subspaces with one shift each ({} dims, {} shifts)", dims.len(), shifts.len())));
    }
    if let Some(d) = dims.iter().find(|d| **d >= n) {
        return Err(Error::invalid(format!("subspace dimension {d} must be below {n}")));
    }
    y0.check_dim(n)?;
    let m = dims.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(m);
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut stacked = DMatrix::<f64>::zeros(m * n, n);
    let mut a = DVector::<f64>::zeros(n);
    let id = DMatrix::<f64>::identity(n, n);
    for (i, (&d, shift)) in dims.iter().zip(shifts).enumerate() {
        shift.check_dim(n)?;
        let q = random_orthonormal(&mut rng, n, d);
        let p = &q * q.transpose();
        let basis = (0..d).map(|j| Point::from_vector(q.column(j).into_owned())).collect();
        sets.push(ConvexSet::affine_subspace(shift.clone(), basis)?);
        l += &p / m as f64;
        stacked.view_mut((i * n, 0), (n, n)).copy_from(&(&id - &p));
        a += (shift.as_vector() - &p * shift.as_vector()) / m as f64;
    }
    let e = null_space(&stacked, KERNEL_CUTOFF);
    let proj_e = &e * e.transpose();
    let perp = &id - &proj_e;
    let rho = power_iteration_norm(&(&l * &perp), POWER_STEPS);
    let irregular = rho >= 1.0 - IRREGULAR_MARGIN;
    let z = (&id - &l + &proj_e)
        .lu()
        .solve(&a)
        .ok_or_else(|| Error::NonFinite("singular system for the fixed point of T".into()))?;
    let z = Point::from_vector(z).ensure_finite("affine fixed point")?;
    let limit = (!irregular).then(|| Point::from_vector(z.as_vector() + &proj_e * y0.as_vector()));
    let prediction = AffinePrediction { rho, irregular, kernel_dim: e.ncols(), z, limit, proj_e };
    let mut s = Scenario::from_sets("affine", sets, y0, geometric_grid(10), Prediction::Affine(prediction))?;
    s.strong_monotonicity = (!irregular).then_some(1.0 - rho);
    s.seed = Some(seed);
    Ok(s)
}

/// Largest `‖R^ε u − R^ε v‖ / ‖u − v‖` over `pairs` random pairs of the
/// slice `y₀ + E⊥` of an affine scenario.
pub fn affine_contraction_ratio(s: &Scenario, eps: f64, pairs: usize, seed: u64) -> Result<f64> {
    let Prediction::Affine(pred) = &s.prediction else {
        return Err(Error::invalid("contraction ratio needs an affine scenario"));
    };
    let r = s.cycle(eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let mut draw = || {
            let g = Point::raw((0..s.dim()).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>());
            &s.anchor + &pred.perp(&g)
        };
        let (u, v) = (draw(), draw());
        let d = distance(&u, &v);
        if d > 0.0 {
            worst = worst.max(distance(&r.apply(&u)?, &r.apply(&v)?) / d);
        }
    }
    Ok(worst)
}

/// A random family of `m` projectors onto halfspaces, balls and boxes in
/// ℝⁿ, positioned so that the family is typically inconsistent.
pub fn random_projector_family(n: usize, m: usize, seed: u64) -> Result<Vec<ConvexSet>> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("need a positive dimension and at least one set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let gauss = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| -> f64 { StandardNormal.sample(rng) }).collect() };
    (0..m)
        .map(|i| {
            let center = gauss(&mut rng);
            match i % 3 {
                0 => {
                    let normal = Point::raw(gauss(&mut rng));
                    let offset = 2.0 * unit.sample(&mut rng) - 1.0;
                    ConvexSet::halfspace(normal, offset)
                }
                1 => ConvexSet::ball(Point::raw(center.iter().map(|c| 2.0 * c).collect()), 0.2 + unit.sample(&mut rng)),
                _ => {
                    let lower: Vec<f64> = center.iter().map(|c| 2.0 * c).collect();
                    let upper: Vec<f64> = lower.iter().map(|l| l + 0.1 + unit.sample(&mut rng)).collect();
                    ConvexSet::boxed(lower, upper)
                }
            }
        })
        .collect()
}

/// `dist(z, endpoint of the run anchored at z)`, an upper bound for
/// `d(z, Fix R^ε)`. For a scenario on a slice, `z` may be given in ambient
/// coordinates; the run is anchored at its restriction and the endpoint is
/// embedded back.
pub fn stability_gap(s: &Scenario, z: &Point, eps: f64, tol: f64) -> Result<f64> {
    let (anchor, ambient) = match &s.slice {
        Some(slice) if z.dim() == slice.ambient_dim && z.dim() != s.dim() => (slice.restrict(z)?, true),
        _ => (z.clone(), false),
    };
    let res = run_periodic(&s.operators, eps, &anchor, tol, DEFAULT_MAX_SWEEPS)?;
    if !res.converged {
        return Err(Error::NoConvergence {
            method: "periodic iteration",
            iterations: res.sweeps_used,
            last_iterate: res.endpoint().to_vec(),
            residual: res.endpoint_residual,
        });
    }
    if ambient {
        let slice = s.slice.as_ref().expect("checked above");
        Ok(distance(z, &slice.embed(res.endpoint())?))
    } else {
        Ok(distance(z, res.endpoint()))
    }
}

/// Scenario description read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub sets: Vec<ConvexSet>,
    pub y0: Point,
    #[serde(default)]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        if self.sets.len() < 2 {
            return Err(Error::invalid("a scenario needs at least two sets"));
        }
        let grid = self.eps_grid.unwrap_or_else(|| geometric_grid(10));
        crate::cycles::validate_grid(&grid)?;
        let mut s = Scenario::from_sets(&self.name, self.sets, self.y0, grid, Prediction::None)?;
        s.seed = self.seed;
        Ok(s)
    }
}
