//! Closed convex sets with exact (or safeguarded numerical) projections and
//! the average square-distance functional built on them.

mod roots;

pub use roots::{golden_section, newton_bisect, solve_monotone_cubic, ScalarRootProblem};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::point::{distance, Point};

/// Tolerance used when checking that a projection landed in its set.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Orthonormality tolerance for affine subspace bases.
pub const BASIS_TOL: f64 = 1e-10;

/// Parameters of a set family. Build a [`ConvexSet`] from one with
/// [`ConvexSet::new`], which validates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetKind {
    /// `ℝ × {level}` in the plane.
    HorizontalLine { level: f64 },
    /// `anchor + span(basis)`; an empty basis is the single point `anchor`.
    AffineSubspace {
        anchor: Point,
        #[serde(default)]
        basis: Vec<Point>,
    },
    /// `{x : <normal, x> <= offset}`.
    Halfspace { normal: Point, offset: f64 },
    /// Coordinate box. Infinite bounds are allowed and serialize as `null`.
    Box {
        #[serde(with = "lower_bounds")]
        lower: Vec<f64>,
        #[serde(with = "upper_bounds")]
        upper: Vec<f64>,
    },
    Ball { center: Point, radius: f64 },
    /// `{(s, t) : s > 0, t > 0, s t >= gamma}`.
    #[serde(rename = "hyperbola")]
    HyperbolaRegion { gamma: f64 },
    /// `{(s, t) : 0 <= t <= 1, s² <= 1 - t}`.
    #[serde(rename = "parabola_cap")]
    ParabolaCap2D,
}

/// A nonempty closed convex subset of ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSet {
    kind: SetKind,
    dim: usize,
}

impl ConvexSet {
    pub fn new(kind: SetKind) -> Result<Self> {
        let dim = validate(&kind)?;
        Ok(ConvexSet { kind, dim })
    }

    pub fn horizontal_line(level: f64) -> Result<Self> {
        Self::new(SetKind::HorizontalLine { level })
    }

    pub fn affine_subspace(anchor: Point, basis: Vec<Point>) -> Result<Self> {
        Self::new(SetKind::AffineSubspace { anchor, basis })
    }

    pub fn singleton(point: Point) -> Result<Self> {
        Self::affine_subspace(point, Vec::new())
    }

    pub fn halfspace(normal: Point, offset: f64) -> Result<Self> {
        Self::new(SetKind::Halfspace { normal, offset })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(SetKind::Box { lower, upper })
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        Self::new(SetKind::Ball { center, radius })
    }

    pub fn hyperbola(gamma: f64) -> Result<Self> {
        Self::new(SetKind::HyperbolaRegion { gamma })
    }

    pub fn parabola_cap() -> Self {
        ConvexSet { kind: SetKind::ParabolaCap2D, dim: 2 }
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn project(&self, x: &Point) -> Result<Point> {
        x.check_dim(self.dim)?;
        let c = x.coords();
        let p = match &self.kind {
            SetKind::HorizontalLine { level } => Point::raw(vec![c[0], *level]),
            SetKind::AffineSubspace { anchor, basis } => {
                let offset = x.as_vector() - anchor.as_vector();
                let mut p = anchor.as_vector().clone();
                for b in basis {
                    p.axpy(b.as_vector().dot(&offset), b.as_vector(), 1.0);
                }
                Point::from_vector(p)
            }
            SetKind::Halfspace { normal, offset } => {
                let excess = normal.dot(x) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x - &normal.scale(excess / normal.norm_squared())
                }
            }
            SetKind::Box { lower, upper } => {
                let v: Vec<f64> = c
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(xi, (lo, hi))| xi.max(*lo).min(*hi))
                    .collect();
                Point::raw(v)
            }
            SetKind::Ball { center, radius } => {
                let d = x - center;
                let r = d.norm();
                if r <= *radius {
                    x.clone()
                } else {
                    center + &d.scale(radius / r)
                }
            }
            SetKind::HyperbolaRegion { gamma } => project_hyperbola(*gamma, c[0], c[1])?,
            SetKind::ParabolaCap2D => project_parabola_cap(c[0], c[1])?,
        };
        Ok(p)
    }

    pub fn distance(&self, x: &Point) -> Result<f64> {
        let p = self.project(x)?;
        Ok(distance(x, &p))
    }

    /// Membership with absolute slack `tol` in the variant's defining
    /// inequalities (scaled so that `tol` reads as a distance).
    pub fn contains(&self, x: &Point, tol: f64) -> Result<bool> {
        if !(tol >= 0.0) {
            return Err(Error::invalid(format!("membership tolerance must be >= 0, got {tol}")));
        }
        x.check_dim(self.dim)?;
        let c = x.coords();
        let inside = match &self.kind {
            SetKind::HorizontalLine { level } => (c[1] - level).abs() <= tol,
            SetKind::AffineSubspace { .. } => distance(x, &self.project(x)?) <= tol,
            SetKind::Halfspace { normal, offset } => normal.dot(x) - offset <= tol * normal.norm(),
            SetKind::Box { lower, upper } => c
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(xi, (lo, hi))| *xi >= lo - tol && *xi <= hi + tol),
            SetKind::Ball { center, radius } => distance(x, center) <= radius + tol,
            SetKind::HyperbolaRegion { gamma } => {
                let (s, t) = (c[0], c[1]);
                s > 0.0 && t > 0.0 && s * t >= gamma - tol * (s + t)
            }
            SetKind::ParabolaCap2D => {
                let (s, t) = (c[0], c[1]);
                t >= -tol && t <= 1.0 + tol && s * s + t - 1.0 <= tol * (1.0 + 2.0 * s.abs())
            }
        };
        Ok(inside)
    }
}

fn validate(kind: &SetKind) -> Result<usize> {
    let finite = |v: f64, what: &str| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("{what} must be finite, got {v}")))
        }
    };
    match kind {
        SetKind::HorizontalLine { level } => {
            finite(*level, "line level")?;
            Ok(2)
        }
        SetKind::AffineSubspace { anchor, basis } => {
            let n = anchor.dim();
            if basis.len() > n {
                return Err(Error::invalid(format!("{} basis vectors in dimension {n}", basis.len())));
            }
            for (i, b) in basis.iter().enumerate() {
                b.check_dim(n)?;
                for (j, other) in basis.iter().enumerate().take(i + 1) {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    if (b.dot(other) - expected).abs() > BASIS_TOL {
                        return Err(Error::invalid(format!(
                            "affine basis is not orthonormal: <b{i}, b{j}> = {}",
                            b.dot(other)
                        )));
                    }
                }
            }
            Ok(n)
        }
        SetKind::Halfspace { normal, offset } => {
            finite(*offset, "halfspace offset")?;
            if normal.norm() == 0.0 {
                return Err(Error::invalid("halfspace normal must be nonzero"));
            }
            Ok(normal.dim())
        }
        SetKind::Box { lower, upper } => {
            if lower.is_empty() || lower.len() != upper.len() {
                return Err(Error::invalid("box bounds must be nonempty and of equal length"));
            }
            for (i, (lo, hi)) in lower.iter().zip(upper).enumerate() {
                if lo.is_nan() || hi.is_nan() || lo > hi || *lo == f64::INFINITY || *hi == f64::NEG_INFINITY {
                    return Err(Error::invalid(format!("box coordinate {i} has empty range [{lo}, {hi}]")));
                }
            }
            Ok(lower.len())
        }
        SetKind::Ball { center, radius } => {
            if !(radius.is_finite() && *radius > 0.0) {
                return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
            }
            Ok(center.dim())
        }
        SetKind::HyperbolaRegion { gamma } => {
            if !(gamma.is_finite() && *gamma > 0.0) {
                return Err(Error::invalid(format!("hyperbola gamma must be positive, got {gamma}")));
            }
            Ok(2)
        }
        SetKind::ParabolaCap2D => Ok(2),
    }
}

/// Projection onto `{s > 0, t > 0, s t >= gamma}`.
///
/// For exterior points the nearest point is `(u, gamma/u)` where `u`
/// minimizes `(u - p1)² + (gamma/u - p2)²`, a unimodal profile in `log u`.
/// Golden-section search localizes the minimizer, then Newton on the
/// stationarity quartic `u⁴ - p1 u³ + gamma p2 u - gamma² = 0` polishes it.
fn project_hyperbola(gamma: f64, p1: f64, p2: f64) -> Result<Point> {
    if p1 > 0.0 && p2 > 0.0 && p1 * p2 >= gamma {
        return Ok(Point::raw(vec![p1, p2]));
    }
    let scale = 1.0 + p1.hypot(p2);
    let (lo, hi) = ((1e-6 * scale).ln(), (1e6 * scale).ln());
    let profile = |s: f64| {
        let u = s.exp();
        (u - p1).powi(2) + (gamma / u - p2).powi(2)
    };
    let (a, b) = golden_section(profile, lo, hi, 1e-9);

    let quartic = |u: f64| {
        let val = ((u - p1) * u * u) * u + gamma * p2 * u - gamma * gamma;
        let der = (4.0 * u - 3.0 * p1) * u * u + gamma * p2;
        (val, der)
    };
    // Widen the golden-section bracket until the quartic changes sign on it.
    let (mut ua, mut ub) = (a.exp(), b.exp());
    let mut widen = 1e-6;
    while !(quartic(ua).0 <= 0.0 && quartic(ub).0 >= 0.0) {
        if widen > 1.0 {
            // Profile flat to rounding: the golden-section midpoint is as
            // good as the data allows.
            let u = (0.5 * (a + b)).exp();
            return Ok(Point::raw(vec![u, gamma / u]));
        }
        ua = (a - widen).max(lo).exp();
        ub = (b + widen).min(hi).exp();
        widen *= 10.0;
    }
    let magnitude = ub.powi(4) + p1.abs() * ub.powi(3) + gamma * p2.abs() * ub + gamma * gamma;
    let u = newton_bisect(quartic, ua, ub, 8.0 * f64::EPSILON * magnitude)?;
    Ok(Point::raw(vec![u, gamma / u]))
}

/// Projection onto `{(s, t) : 0 <= t <= 1, s² <= 1 - t}`.
///
/// Candidates for exterior points: stationary points `(v, 1 - v²)` of the
/// arc (roots of `2v³ + (2t - 1)v - s` in `[-1, 1]`), the clamped point on
/// the base segment, and the two corners. The closest candidate wins.
fn project_parabola_cap(s: f64, t: f64) -> Result<Point> {
    if (0.0..=1.0).contains(&t) && s * s <= 1.0 - t {
        return Ok(Point::raw(vec![s, t]));
    }
    let mut candidates = vec![(s.clamp(-1.0, 1.0), 0.0), (-1.0, 0.0), (1.0, 0.0)];

    let k = 2.0 * t - 1.0;
    let cubic = |v: f64| (2.0 * v * v * v + k * v - s, 6.0 * v * v + k);
    let mut breaks = vec![-1.0];
    if k < 0.0 {
        let crit = (-k / 6.0).sqrt();
        for c in [-crit, crit] {
            if c > -1.0 && c < 1.0 {
                breaks.push(c);
            }
        }
    }
    breaks.push(1.0);
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (cubic(lo).0, cubic(hi).0);
        if flo == 0.0 || fhi == 0.0 || flo.signum() != fhi.signum() {
            let v = newton_bisect(cubic, lo, hi, 1e-15)?;
            candidates.push((v, 1.0 - v * v));
        }
    }
    let best = candidates
        .into_iter()
        .min_by(|a, b| {
            let da = (a.0 - s).powi(2) + (a.1 - t).powi(2);
            let db = (b.0 - s).powi(2) + (b.1 - t).powi(2);
            da.total_cmp(&db)
        })
        .expect("candidate list is never empty");
    Ok(Point::raw(vec![best.0, best.1]))
}

fn check_family(sets: &[ConvexSet], x: &Point) -> Result<()> {
    if sets.len() < 2 {
        return Err(Error::invalid(format!("need at least two sets, got {}", sets.len())));
    }
    for s in sets {
        x.check_dim(s.dim())?;
    }
    Ok(())
}

/// `Φ(x) = (1/2m) Σ d(x, Sᵢ)²`.
pub fn phi_value(sets: &[ConvexSet], x: &Point) -> Result<f64> {
    check_family(sets, x)?;
    let mut total = 0.0;
    for s in sets {
        total += s.distance(x)?.powi(2);
    }
    Ok(total / (2.0 * sets.len() as f64))
}

/// `∇Φ(x) = (1/m) Σ (x - P_{Sᵢ} x)`.
pub fn phi_gradient(sets: &[ConvexSet], x: &Point) -> Result<Point> {
    check_family(sets, x)?;
    let mut grad = Point::zeros(x.dim());
    for s in sets {
        grad = &grad + &(x - &s.project(x)?);
    }
    Ok(grad.scale(1.0 / sets.len() as f64))
}

impl Serialize for ConvexSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.kind.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ConvexSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let kind = SetKind::deserialize(deserializer)?;
        ConvexSet::new(kind).map_err(serde::de::Error::custom)
    }
}

macro_rules! bound_serde {
    ($name:ident, $missing:expr) => {
        mod $name {
            use serde::{Deserialize, Deserializer, Serializer};

            pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
                s.collect_seq(v.iter().map(|x| if x.is_finite() { Some(*x) } else { None }))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
                let raw = Vec::<Option<f64>>::deserialize(d)?;
                Ok(raw.into_iter().map(|x| x.unwrap_or($missing)).collect())
            }
        }
    };
}

bound_serde!(lower_bounds, f64::NEG_INFINITY);
bound_serde!(upper_bounds, f64::INFINITY);
