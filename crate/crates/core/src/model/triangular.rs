use crate::error::{Error, Result};

/// Value of option `l` under the triangular evaluator of an issue with
/// `k` options peaking at option `n`. Both `n` and `l` count from 1.
///
/// Rises linearly to 1 at the peak, then falls as `(k-(l-1))/(k-(n-1))`.
pub fn triangular_eval(k: usize, n: usize, l: usize) -> f64 {
    debug_assert!(1 <= n && n <= k && 1 <= l && l <= k);
    if l < n {
        (l - 1) as f64 / (n - 1) as f64
    } else if l == n {
        1.0
    } else {
        (k - (l - 1)) as f64 / (k - (n - 1)) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriangularEvaluator {
    pub issue_size: usize,
    /// Peak option, 1-based.
    pub peak: usize,
}

impl TriangularEvaluator {
    pub fn new(issue_size: usize, peak: usize) -> Result<Self> {
        if peak == 0 || peak > issue_size {
            return Err(Error::Range(format!(
                "peak {peak} outside 1..={issue_size}"
            )));
        }
        Ok(TriangularEvaluator { issue_size, peak })
    }

    /// Evaluations for 0-based option indices.
    pub fn table(&self) -> Vec<f64> {
        (1..=self.issue_size)
            .map(|l| triangular_eval(self.issue_size, self.peak, l))
            .collect()
    }
}
