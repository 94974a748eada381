//! Nonexpansive operator algebra.
//!
//! Operators are immutable expression trees over projectors and affine
//! maps. The two composite forms mirror the objects the toolkit studies:
//!
//! * [`Operator::cycle`] is the under-relaxed composition
//!   `(Id + ε(T_m − Id)) ∘ ⋯ ∘ (Id + ε(T_1 − Id))`, applied `T_1` first;
//! * [`Operator::average`] is `T = (1/m) Σ T_i`.
//!
//! The domain is all of ℝⁿ: every building block is globally defined.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::power_iteration_norm;
use crate::point::Point;
use crate::sets::ConvexSet;

/// Slack allowed on the spectral norm of an affine map's linear part.
pub const AFFINE_NORM_SLACK: f64 = 1e-9;
const AFFINE_NORM_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    Projection(ConvexSet),
    /// `x ↦ linear · x + shift`.
    AffineMap { linear: DMatrix<f64>, shift: Point },
    /// `Id + ε(inner − Id)`.
    Relaxed { inner: Box<Operator>, eps: f64 },
    /// Relaxed factors composed left to right through the list.
    Cycle { ops: Vec<Operator>, eps: f64 },
    Average(Vec<Operator>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    kind: OperatorKind,
    dim: usize,
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::invalid(format!("relaxation parameter must lie in [0, 1], got {eps}")))
    }
}

fn common_dim(ops: &[Operator]) -> Result<usize> {
    let first = ops.first().ok_or_else(|| Error::invalid("operator list is empty"))?;
    for op in ops {
        if op.dim != first.dim {
            return Err(Error::DimensionMismatch { expected: first.dim, found: op.dim });
        }
    }
    Ok(first.dim)
}

impl Operator {
    pub fn projection(set: ConvexSet) -> Self {
        let dim = set.dim();
        Operator { kind: OperatorKind::Projection(set), dim }
    }

    pub fn projections(sets: &[ConvexSet]) -> Vec<Operator> {
        sets.iter().cloned().map(Operator::projection).collect()
    }

    /// Rejects maps whose linear part has estimated spectral norm above
    /// `1 + 1e-9`.
    pub fn affine(linear: DMatrix<f64>, shift: Point) -> Result<Self> {
        let n = shift.dim();
        if linear.nrows() != n || linear.ncols() != n {
            return Err(Error::invalid(format!(
                "linear part is {}x{}, shift has dimension {n}",
                linear.nrows(),
                linear.ncols()
            )));
        }
        if linear.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("linear part has non-finite entries"));
        }
        let norm = power_iteration_norm(&linear, AFFINE_NORM_STEPS);
        if norm > 1.0 + AFFINE_NORM_SLACK {
            return Err(Error::invalid(format!("affine map is expansive: ‖L‖ ≈ {norm}")));
        }
        Ok(Operator { kind: OperatorKind::AffineMap { linear, shift }, dim: n })
    }

    pub fn relaxed(inner: Operator, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let dim = inner.dim;
        Ok(Operator { kind: OperatorKind::Relaxed { inner: Box::new(inner), eps }, dim })
    }

    pub fn cycle(ops: Vec<Operator>, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let dim = common_dim(&ops)?;
        Ok(Operator { kind: OperatorKind::Cycle { ops, eps }, dim })
    }

    pub fn average(ops: Vec<Operator>) -> Result<Self> {
        let dim = common_dim(&ops)?;
        Ok(Operator { kind: OperatorKind::Average(ops), dim })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_projection(&self) -> Option<&ConvexSet> {
        match &self.kind {
            OperatorKind::Projection(set) => Some(set),
            _ => None,
        }
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        x.check_dim(self.dim)?;
        self.eval(x)?.ensure_finite("operator application")
    }

    /// `‖x − Tx‖`.
    pub fn residual(&self, x: &Point) -> Result<f64> {
        Ok(self.displacement(x)?.norm())
    }

    /// `Ax = x − Tx`.
    pub fn displacement(&self, x: &Point) -> Result<Point> {
        Ok(x - &self.apply(x)?)
    }

    /// Evaluation without the dimension check; callers have validated `x`.
    pub(crate) fn eval(&self, x: &Point) -> Result<Point> {
        match &self.kind {
            OperatorKind::Projection(set) => set.project(x),
            OperatorKind::AffineMap { linear, shift } => {
                Ok(&Point::from_vector(linear * x.as_vector()) + shift)
            }
            OperatorKind::Relaxed { inner, eps } => relaxed_step(inner, *eps, x),
            OperatorKind::Cycle { ops, eps } => {
                let mut y = x.clone();
                for op in ops {
                    y = relaxed_step(op, *eps, &y)?;
                }
                Ok(y)
            }
            OperatorKind::Average(ops) => {
                let mut acc = Point::zeros(x.dim());
                for op in ops {
                    acc = &acc + &op.eval(x)?;
                }
                Ok(acc.scale(1.0 / ops.len() as f64))
            }
        }
    }
}

/// `x + ε(Tx − x)`.
pub(crate) fn relaxed_step(op: &Operator, eps: f64, x: &Point) -> Result<Point> {
    if eps == 0.0 {
        return Ok(x.clone());
    }
    let tx = op.eval(x)?;
    Ok(x.lerp(&tx, eps))
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, ops: &[Operator]) -> fmt::Result {
            for (i, op) in ops.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{op}")?;
            }
            Ok(())
        }
        match &self.kind {
            OperatorKind::Projection(set) => {
                write!(f, "P[{}]", serde_json::to_string(set).unwrap_or_else(|_| "?".into()))
            }
            OperatorKind::AffineMap { shift, .. } => write!(f, "Affine(dim {}, shift {shift})", shift.dim()),
            OperatorKind::Relaxed { inner, eps } => write!(f, "Relaxed({inner}, {eps})"),
            OperatorKind::Cycle { ops, eps } => {
                write!(f, "Cycle[")?;
                list(f, ops)?;
                write!(f, "; {eps}]")
            }
            OperatorKind::Average(ops) => {
                write!(f, "Average[")?;
                list(f, ops)?;
                write!(f, "]")
            }
        }
    }
}
