//! Under-relaxed cyclic compositions of nonexpansive operators.
//!
//! Given nonexpansive maps `T_1, …, T_m` on ℝⁿ, the toolkit builds the
//! under-relaxed composition `R^ε = (Id + ε(T_m − Id)) ∘ ⋯ ∘ (Id + ε(T_1 − Id))`
//! and the average `T = (1/m) Σ T_i`, computes the limit cycles of the
//! periodic iteration `z_{k+1} = R^ε z_k`, and compares them as `ε → 0` with
//! fixed points of `T` and with the flow `x' = −(x − Tx)`.
//!
//! Module map:
//!
//! * [`point`]: ℝⁿ arithmetic;
//! * [`sets`]: convex sets, projections, and the average square distance `Φ`;
//! * [`operators`]: projectors, affine maps, relaxations, cycles, averages;
//! * [`cycles`]: the periodic iteration, cycle diagnostics, ε-sweeps;
//! * [`flow`]: the semigroup flow and the piecewise-linear iterate interpolant;
//! * [`bounds`]: the composition-versus-average approximation bound;
//! * [`scenarios`]: canonical experiments with closed-form predictions.
//!
//! Everything runs in finite dimension, so weak and strong limits coincide
//! and `Id − T` is automatically demiregular; no subsequence machinery is
//! needed. Distinct anchors may still select different limit cycles when the
//! fixed-point sets are not singletons, which is why every run is anchored
//! at a caller-chosen starting point.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cycles;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod operators;
pub mod point;
pub mod report;
pub mod scenarios;
pub mod sets;

pub use error::{Error, Result};
pub use operators::{Operator, OperatorKind};
pub use point::{dist, inner, norm, Point};
pub use sets::{ConvexSet, SetKind};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
