//! Budget curves, AUBC and the statistics used to compare pipelines.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod compare;
pub mod stats;

pub use compare::{heatmap, lose_heatmap, win_matrix, Heatmap, ResultKey, ResultTable, WinMatrix, SIGNIFICANCE_LEVEL};
pub use stats::{student_t_cdf, welch_t_test, ComparisonResult};

/// Metric value against labeled-pool size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetCurve {
    pub points: Vec<(f64, f64)>,
}

impl BudgetCurve {
    /// Requires at least one point and strictly increasing pool sizes.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Statistics("budget curve has no points".into()));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Statistics(format!(
                "pool sizes must increase strictly ({} then {})",
                w[0].0, w[1].0
            )));
        }
        Ok(Self { points })
    }
}

/// Trapezoidal area under the curve divided by the covered pool-size span,
/// so a constant curve maps to its constant. One point maps to its value.
pub fn aubc(curve: &BudgetCurve) -> f64 {
    let pts = &curve.points;
    if pts.len() == 1 {
        return pts[0].1;
    }
    let area: f64 = pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    area / (pts[pts.len() - 1].0 - pts[0].0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_and_linear() {
        let c = BudgetCurve::new(vec![(10.0, 0.8), (20.0, 0.8), (45.0, 0.8)]).unwrap();
        assert_eq!(aubc(&c), 0.8);
        let l = BudgetCurve::new(vec![(3.0, 0.5), (103.0, 0.9)]).unwrap();
        assert!((aubc(&l) - 0.7).abs() < 1e-15);
        let one = BudgetCurve::new(vec![(5.0, 0.4)]).unwrap();
        assert_eq!(aubc(&one), 0.4);
    }

    #[test]
    fn rejects_non_increasing_sizes() {
        assert!(BudgetCurve::new(vec![(1.0, 0.1), (1.0, 0.2)]).is_err());
        assert!(BudgetCurve::new(vec![]).is_err());
    }

    #[test]
    fn rescaling_pool_axis_is_invariant() {
        let pts = vec![(10.0, 0.2), (20.0, 0.5), (30.0, 0.4), (50.0, 0.9)];
        let a = aubc(&BudgetCurve::new(pts.clone()).unwrap());
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x * 7.5, y)).collect();
        let b = aubc(&BudgetCurve::new(scaled).unwrap());
        assert!((a - b).abs() < 1e-14);
    }
}
