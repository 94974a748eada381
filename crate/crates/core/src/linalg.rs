//! Dense helpers shared by the affine operators and the regular-family
//! scenario builder.

use nalgebra::{DMatrix, DVector};

/// Spectral norm estimate `‖M‖₂` from `steps` rounds of power iteration on
/// `MᵀM`. The start vector is a fixed quasi-random sequence, so results are
/// reproducible.
pub fn power_iteration_norm(m: &DMatrix<f64>, steps: usize) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.754_877_666).fract());
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..steps {
        let w = m * &v;
        estimate = w.norm();
        let u = m.transpose() * w;
        let un = u.norm();
        if un == 0.0 {
            return estimate;
        }
        v = u / un;
    }
    (m * &v).norm().max(estimate)
}

/// Orthonormal basis (as columns) of the null space of `m`, using the SVD
/// with an absolute singular-value cutoff.
pub fn null_space(m: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let n = m.ncols();
    // Pad to at least n rows so the thin SVD exposes all n right vectors.
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= cutoff)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}
