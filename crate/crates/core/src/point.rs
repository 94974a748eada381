//! Points of ℝⁿ with the Euclidean inner product.
//!
//! A [`Point`] is an immutable value: its dimension is fixed at
//! construction and every entry is finite. Arithmetic through the operator
//! impls assumes matching dimensions (mismatches panic, like `nalgebra`);
//! the checked free functions [`inner`] and [`dist`] report a
//! [`Error::DimensionMismatch`] instead and are what public entry points use
//! to validate caller input.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Point(DVector<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("a point needs at least one coordinate"));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {i} is {}", coords[i])));
        }
        Ok(Point(DVector::from_vec(coords)))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "a point needs at least one coordinate");
        Point(DVector::zeros(dim))
    }

    /// Wraps a vector produced by internal arithmetic. Finiteness is checked
    /// at API boundaries (operator application, integrators), not here.
    pub(crate) fn from_vector(v: DVector<f64>) -> Self {
        debug_assert!(!v.is_empty());
        Point(v)
    }

    pub(crate) fn raw(coords: Vec<f64>) -> Self {
        Point(DVector::from_vec(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn scale(&self, factor: f64) -> Point {
        Point(&self.0 * factor)
    }

    /// `self + t (other - self)`.
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point(&self.0 + (&other.0 - &self.0) * t)
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found: self.dim() })
        }
    }

    pub(crate) fn ensure_finite(self, context: &str) -> Result<Point> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(format!("{context} produced {self:?}")))
        }
    }
}

pub fn inner(u: &Point, v: &Point) -> Result<f64> {
    v.check_dim(u.dim())?;
    Ok(u.dot(v))
}

pub fn norm(u: &Point) -> f64 {
    u.norm()
}

pub fn dist(u: &Point, v: &Point) -> Result<f64> {
    v.check_dim(u.dim())?;
    Ok((&u.0 - &v.0).norm())
}

/// Unchecked distance for internal callers that already validated dims.
pub(crate) fn distance(u: &Point, v: &Point) -> f64 {
    (&u.0 - &v.0).norm()
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add<&Point> for &Point {
    type Output = Point;

    fn add(self, rhs: &Point) -> Point {
        Point(&self.0 + &rhs.0)
    }
}

impl Sub<&Point> for &Point {
    type Output = Point;

    fn sub(self, rhs: &Point) -> Point {
        Point(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &Point {
    type Output = Point;

    fn mul(self, rhs: f64) -> Point {
        self.scale(rhs)
    }
}

impl Neg for &Point {
    type Output = Point;

    fn neg(self) -> Point {
        Point(-&self.0)
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter())
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(deserializer)?;
        Point::new(coords).map_err(serde::de::Error::custom)
    }
}
