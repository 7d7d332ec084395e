//! Compatibility estimators.
//!
//! All estimators except [`holdout_estimate`] and [`lce_estimate`] take
//! only [`GraphSummaries`](crate::summary::GraphSummaries) or a `k × k`
//! statistics matrix: they never see the graph, and their cost does not
//! depend on its size.

mod dce;
mod heuristic;
mod holdout;
mod optimize;
mod quadratic;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compat::CompatibilityMatrix;
use crate::error::Error;
use crate::summary::Variant;

pub use dce::{dce_energy, dce_estimate, dce_gradient, dcer_estimate, restart_points};
pub use heuristic::{heuristic_compatibility, heuristic_pattern_from, Level};
pub use holdout::{holdout_estimate, holdout_objective, stratified_halves};
pub use optimize::{minimize, nelder_mead, Descent, Minimum, SimplexOptions};
pub use quadratic::{clip_and_project, lce_estimate, mce_estimate, mce_from_summaries};

/// Estimator hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub lmax: usize,
    pub lambda: f64,
    pub restarts: usize,
    /// Restart offset from `1/k`; `None` means `0.7 / k²`.
    pub delta: Option<f64>,
    pub max_gd_iters: usize,
    pub grad_tol: f64,
    pub holdout_splits: usize,
    pub holdout_max_evals: usize,
    pub variant: Variant,
    pub descent: Descent,
    /// Clip the final estimate to `[0, 1]` and re-project.
    pub clip: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            lmax: 5,
            lambda: 10.0,
            restarts: 10,
            delta: None,
            max_gd_iters: 500,
            grad_tol: 1e-6,
            holdout_splits: 1,
            holdout_max_evals: 200,
            variant: Variant::Row,
            descent: Descent::default(),
            clip: false,
        }
    }
}

impl EstimatorConfig {
    pub fn delta_for(&self, k: usize) -> f64 {
        self.delta.unwrap_or(0.7 / (k * k) as f64)
    }

    /// Every violated constraint, for class count `k`.
    pub fn validate(&self, k: usize) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("lmax", self.lmax),
            ("restarts", self.restarts),
            ("max_gd_iters", self.max_gd_iters),
            ("holdout_splits", self.holdout_splits),
            ("holdout_max_evals", self.holdout_max_evals),
        ] {
            if v == 0 {
                errs.push(format!("estimator.{name} must be >= 1"));
            }
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            errs.push(format!("estimator.lambda must be > 0, got {}", self.lambda));
        }
        if self.grad_tol.is_nan() || self.grad_tol <= 0.0 {
            errs.push("estimator.grad_tol must be > 0".into());
        }
        if k >= 2 {
            let d = self.delta_for(k);
            if !(d > 0.0 && d < 1.0 / (k * k) as f64) {
                errs.push(format!("estimator.delta must be in (0, 1/k²) = (0, {}), got {d}", 1.0 / (k * k) as f64));
            }
        }
        errs
    }
}

/// Which estimator (or reference) produced a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "GS")]
    Gs,
    #[serde(rename = "MCE")]
    Mce,
    #[serde(rename = "LCE")]
    Lce,
    #[serde(rename = "DCE")]
    Dce,
    #[serde(rename = "DCEr")]
    Dcer,
    #[serde(rename = "Holdout")]
    Holdout,
    #[serde(rename = "Heuristic")]
    Heuristic,
    #[serde(rename = "RWR")]
    Rwr,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Gs,
        Method::Mce,
        Method::Lce,
        Method::Dce,
        Method::Dcer,
        Method::Holdout,
        Method::Heuristic,
        Method::Rwr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gs => "GS",
            Method::Mce => "MCE",
            Method::Lce => "LCE",
            Method::Dce => "DCE",
            Method::Dcer => "DCEr",
            Method::Holdout => "Holdout",
            Method::Heuristic => "Heuristic",
            Method::Rwr => "RWR",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown method {s:?}")))
    }
}

/// Output of an estimator.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub h_hat: CompatibilityMatrix,
    pub energy: f64,
    pub restarts_used: usize,
    /// Seconds spent in the estimator itself.
    pub wall_time: f64,
    pub method: Method,
    /// Optimizer iterations (or objective evaluations for the simplex search).
    pub trace_len: usize,
    pub warnings: Vec<String>,
}

impl EstimationResult {
    pub fn to_json(&self, cfg: &EstimatorConfig) -> String {
        serde_json::json!({
            "method": self.method,
            "k": self.h_hat.k(),
            "H": self.h_hat.rows(),
            "energy": self.energy,
            "restarts_used": self.restarts_used,
            "trace_len": self.trace_len,
            "wall_time": self.wall_time,
            "warnings": self.warnings,
            "hyperparameters": cfg,
        })
        .to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert_eq!("dcer".parse::<Method>().unwrap(), Method::Dcer);
        assert!("bp".parse::<Method>().is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = EstimatorConfig::default();
        assert!(cfg.validate(3).is_empty());
        assert!((cfg.delta_for(3) - 0.7 / 9.0).abs() < 1e-15);
        let bad = EstimatorConfig {
            delta: Some(0.2),
            restarts: 0,
            ..Default::default()
        };
        assert_eq!(bad.validate(3).len(), 2);
    }
}
