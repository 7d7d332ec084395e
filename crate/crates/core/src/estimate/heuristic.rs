//! Two-level compatibility guesses from a High/Low pattern.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::compat::CompatibilityMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "H")]
    High,
    #[serde(rename = "L")]
    Low,
}

/// Symmetric doubly stochastic matrix following `pattern`.
///
/// The ±1 indicator of the pattern is double-centered (rows and columns
/// sum to zero) and added to `1/k`, scaled so the mean High entry exceeds
/// the mean Low entry by `gap`. When every row has the same number of High
/// entries this gives exactly two values.
#[allow(clippy::needless_range_loop)]
pub fn heuristic_compatibility(pattern: &[Vec<Level>], gap: f64) -> Result<CompatibilityMatrix> {
    let k = pattern.len();
    if k < 2 || pattern.iter().any(|r| r.len() != k) {
        return Err(Error::InfeasiblePattern("pattern must be k×k with k >= 2".into()));
    }
    if !(gap >= 0.0 && gap.is_finite()) {
        return Err(Error::InfeasiblePattern(format!("gap must be >= 0, got {gap}")));
    }
    for i in 0..k {
        for j in 0..i {
            if pattern[i][j] != pattern[j][i] {
                return Err(Error::InfeasiblePattern(format!("pattern is not symmetric at ({i}, {j})")));
            }
        }
    }
    let c = DMatrix::from_fn(k, k, |i, j| if pattern[i][j] == Level::High { 1.0 } else { -1.0 });
    let n_high = c.iter().filter(|&&v| v > 0.0).count();
    if n_high == 0 || n_high == k * k {
        return Err(Error::InfeasiblePattern("pattern needs both High and Low entries".into()));
    }
    let j = DMatrix::identity(k, k) - DMatrix::from_element(k, k, 1.0 / k as f64);
    let centered = &j * c * &j;
    let mean = |level: Level| {
        let v: Vec<f64> = (0..k * k)
            .filter(|&idx| pattern[idx / k][idx % k] == level)
            .map(|idx| centered[(idx / k, idx % k)])
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let spread = mean(Level::High) - mean(Level::Low);
    if spread <= 1e-12 {
        return Err(Error::InfeasiblePattern(
            "pattern admits no doubly stochastic completion that separates High from Low".into(),
        ));
    }
    let h = centered.map(|v| 1.0 / k as f64 + gap / spread * v);
    if let Some(v) = h.iter().find(|&&v| v < -1e-12) {
        return Err(Error::InfeasiblePattern(format!("gap {gap} too large: entry {v} would be negative")));
    }
    CompatibilityMatrix::from_matrix(h, 1e-9)
}

/// High where `h` exceeds `1/k`.
pub fn heuristic_pattern_from(h: &CompatibilityMatrix) -> Vec<Vec<Level>> {
    let base = 1.0 / h.k() as f64;
    h.rows()
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|v| if v > base + 1e-12 { Level::High } else { Level::Low })
                .collect()
        })
        .collect()
}
