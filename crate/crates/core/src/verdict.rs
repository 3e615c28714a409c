//! Tri-state outcome of an inequality check.
//!
//! A violation that fits inside the combined error bars of numerically
//! measured inputs is `Inconclusive`, never `Failed`; exact checks carry zero
//! error and therefore can only be `Holds` or `Failed`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "holds")]
    Holds,
    #[serde(rename = "inconclusive")]
    Inconclusive,
    #[serde(rename = "FAILED")]
    Failed,
}

impl Verdict {
    /// Classify lhs <= rhs given the margin rhs - lhs and the total error
    /// budget of both sides (zero for exact checks).
    pub fn classify(margin: f64, err_budget: f64) -> Verdict {
        if margin >= 0.0 {
            Verdict::Holds
        } else if -margin <= err_budget {
            Verdict::Inconclusive
        } else {
            Verdict::Failed
        }
    }

    pub fn is_failure(self) -> bool {
        self == Verdict::Failed
    }

    /// Combine: any failure dominates, else any inconclusive.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Failed, _) | (_, Failed) => Failed,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Holds,
        }
    }
}

/// A numerically measured scalar: point value, symmetric error bound and the
/// method that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct Measured {
    pub value: f64,
    pub err: f64,
    pub method: &'static str,
}

impl Measured {
    pub fn exact(value: f64, method: &'static str) -> Self {
        Measured {
            value,
            err: 0.0,
            method,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violation_inside_error_bars_is_inconclusive() {
        assert_eq!(Verdict::classify(-1e-12, 1e-9), Verdict::Inconclusive);
        assert_eq!(Verdict::classify(-1e-6, 1e-9), Verdict::Failed);
        assert_eq!(Verdict::classify(0.0, 0.0), Verdict::Holds);
        assert_eq!(Verdict::classify(3.5, 1e-9), Verdict::Holds);
    }

    #[test]
    fn serialized_tokens_are_stable() {
        assert_eq!(serde_json::to_string(&Verdict::Holds).unwrap(), "\"holds\"");
        assert_eq!(
            serde_json::to_string(&Verdict::Failed).unwrap(),
            "\"FAILED\""
        );
    }
}
