#![allow(dead_code)]

use cyclefix::{ConvexSet, Point};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn p(c: &[f64]) -> Point {
    Point::from_slice(c).unwrap()
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Point {
    Point::new((0..n).map(|_| { let g: f64 = StandardNormal.sample(rng); scale * g }).collect::<Vec<f64>>()).unwrap()
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Point {
    let g = gaussian(rng, n, 1.0);
    g.scale(1.0 / g.norm())
}

/// A random closed convex set of ℝⁿ, drawn from every supported shape that
/// exists in that dimension.
pub fn random_set(rng: &mut ChaCha8Rng, n: usize) -> ConvexSet {
    let kinds = if n == 2 { 8 } else { 6 };
    match rng.random_range(0..kinds) {
        0 => ConvexSet::halfspace(gaussian(rng, n, 1.0), rng.random_range(-2.0..2.0)).unwrap(),
        1 => ConvexSet::ball(gaussian(rng, n, 2.0), rng.random_range(0.1..2.0)).unwrap(),
        2 => {
            let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..1.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.0..3.0)).collect();
            ConvexSet::boxed(lo, hi).unwrap()
        }
        3 => ConvexSet::singleton(gaussian(rng, n, 2.0)).unwrap(),
        4 => {
            let d = rng.random_range(1..n.max(2));
            let g = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(rng));
            let q = g.qr().q();
            let basis = (0..q.ncols()).map(|j| Point::new(q.column(j).iter().copied().collect()).unwrap()).collect();
            ConvexSet::affine_subspace(gaussian(rng, n, 1.0), basis).unwrap()
        }
        5 => {
            // Halfspace with a unit normal, exercising the degenerate-free path.
            ConvexSet::halfspace(unit(rng, n), rng.random_range(-1.0..1.0)).unwrap()
        }
        6 => ConvexSet::hyperbola(rng.random_range(0.1..3.0)).unwrap(),
        _ => {
            if rng.random_bool(0.5) {
                ConvexSet::parabola_cap()
            } else {
                ConvexSet::horizontal_line(rng.random_range(-3.0..3.0)).unwrap()
            }
        }
    }
}

/// Plain bisection for the root of `2w³ + w = c` down to an interval of
/// width `tol`.
pub fn bisect_cubic(c: f64, tol: f64) -> f64 {
    let f = |w: f64| 2.0 * w * w * w + w - c;
    let (mut lo, mut hi) = (c.min(0.0) - 1.0, c.max(0.0) + 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
