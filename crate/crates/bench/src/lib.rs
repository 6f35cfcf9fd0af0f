//! Shared inputs for the criterion benchmarks.

use featmix::synthetic::{regime_series, selection_problem, SelectionProblem};

/// Regime-switching returns used by the feature and GARCH benchmarks.
pub fn returns(n: usize) -> Vec<f64> {
    regime_series(n, 150, &[1.0, 3.0], 7)
}

/// A 500-row, five-feature pooling problem.
pub fn pooling_problem() -> SelectionProblem {
    selection_problem(500, 5, 0, 0.0, 2.0, 7).expect("valid synthetic problem")
}
