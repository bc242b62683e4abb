//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// `|det G|` below this fraction of the Hadamard bound `∏ ‖row_i‖₂` counts
/// as degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("degenerate metric (det = {det:e})")]
pub struct DegenerateMetric {
    pub det: f64,
}

/// Inverse and determinant of a symmetric (possibly indefinite) metric matrix.
#[derive(Debug, Clone)]
pub struct MetricInverse {
    pub inverse: DMatrix<f64>,
    pub det: f64,
}

/// Hadamard bound on `|det g|`: the product of the Euclidean row norms.
pub fn hadamard_bound(g: &DMatrix<f64>) -> f64 {
    g.row_iter().map(|r| r.norm()).product()
}

/// LU-inverts `g`, refusing matrices whose determinant is negligible relative
/// to the Hadamard bound. The test is invariant under rescaling any single
/// coordinate, which keeps strongly warped charts from being flagged.
pub fn invert_metric(g: &DMatrix<f64>) -> Result<MetricInverse, DegenerateMetric> {
    assert!(g.is_square(), "metric must be square");
    if g.nrows() == 0 {
        return Ok(MetricInverse { inverse: DMatrix::zeros(0, 0), det: 1.0 });
    }
    let lu = g.clone().lu();
    let det = lu.determinant();
    let bound = hadamard_bound(g);
    if !det.is_finite() || bound == 0.0 || det.abs() <= DEGENERACY_RATIO * bound {
        return Err(DegenerateMetric { det });
    }
    match lu.try_inverse() {
        Some(inverse) => Ok(MetricInverse { inverse, det }),
        None => Err(DegenerateMetric { det }),
    }
}

/// Largest absolute entry; zero for empty input. A NaN entry yields
/// infinity so that it can never pass a tolerance comparison.
pub fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |m: f64, x: f64| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    max_abs(v.iter().copied())
}
