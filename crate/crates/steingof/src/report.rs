//! Test outcome reporting.
//!
//! Every hypothesis test in this crate returns a [`TestReport`]. The report
//! is self-describing JSON: method, statistic, decision rule inputs, and the
//! seed that reproduces the run. Optional fields are omitted from the JSON
//! when absent rather than serialized as null.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies which test produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    KsdBootstrap,
    KsdLinear,
    KsdSpectral,
    MmdBootstrap,
    Ks,
    LrOracle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::KsdBootstrap => "ksd-bootstrap",
            Method::KsdLinear => "ksd-linear",
            Method::KsdSpectral => "ksd-spectral",
            Method::MmdBootstrap => "mmd-bootstrap",
            Method::Ks => "ks",
            Method::LrOracle => "lr-oracle",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accept/reject outcome at the report's significance level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Reject,
    Retain,
}

/// Outcome of one hypothesis test.
///
/// Exactly one of two decision rules applies and the stored fields reflect
/// it: when `p_value` is present the decision is `reject` iff p < alpha;
/// otherwise `threshold` is present and the decision is `reject` iff
/// statistic > threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: Method,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub alpha: f64,
    pub decision: Decision,
    /// Sample size the statistic was computed from.
    pub n: usize,
    /// Bootstrap or null-simulation replicates, when the test uses them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// Kernel bandwidth actually used, when the test is kernel-based.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    /// Seed that reproduces the randomized part of the test; 0 for
    /// deterministic tests.
    pub seed: u64,
    pub model_label: String,
    /// Count of null replicates >= the observed statistic, when bootstrapped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exceed_count: Option<usize>,
    /// Method variant, e.g. the linear-test scaling rule.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
}

impl TestReport {
    /// Checks the internal decision-rule invariant. Returns the report's
    /// decision on success so callers can chain.
    pub fn validate(&self) -> Result<Decision> {
        if !(0.0..1.0).contains(&self.alpha) || self.alpha <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let expected = match (self.p_value, self.threshold) {
            (Some(p), _) => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Numeric(format!("p-value {p} outside [0, 1]")));
                }
                if p < self.alpha {
                    Decision::Reject
                } else {
                    Decision::Retain
                }
            }
            (None, Some(t)) => {
                if self.statistic > t {
                    Decision::Reject
                } else {
                    Decision::Retain
                }
            }
            (None, None) => {
                return Err(Error::InvalidInput(
                    "report carries neither a p-value nor a threshold".into(),
                ))
            }
        };
        if expected != self.decision {
            return Err(Error::Numeric(format!(
                "decision {:?} contradicts the stored rule inputs",
                self.decision
            )));
        }
        Ok(self.decision)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
