//! Multiplicative efficiency budget with first-order error propagation.
//!
//! Factor files hold one factor per line, `name value uncertainty kind`,
//! with `kind` either `direct` or `visibility_squared`. Blank lines and lines
//! starting with `#` are ignored. A `visibility_squared` entry carries the
//! fringe visibility `v`; it contributes `v²` with uncertainty `2v·σ_v`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Direct,
    VisibilitySquared,
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorKind::Direct => "direct",
            FactorKind::VisibilitySquared => "visibility_squared",
        })
    }
}

impl FromStr for FactorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(FactorKind::Direct),
            "visibility_squared" => Ok(FactorKind::VisibilitySquared),
            other => Err(Error::InvalidInput(format!("unknown factor kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyFactor {
    pub name: String,
    pub value: f64,
    /// Absolute one-sigma uncertainty of `value`.
    pub uncertainty: f64,
    pub kind: FactorKind,
}

impl EfficiencyFactor {
    pub fn direct(name: &str, value: f64, uncertainty: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            uncertainty,
            kind: FactorKind::Direct,
        }
    }

    pub fn visibility(name: &str, visibility: f64, uncertainty: f64) -> Self {
        Self {
            name: name.to_string(),
            value: visibility,
            uncertainty,
            kind: FactorKind::VisibilitySquared,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.value > 0.0 && self.value <= 1.0) {
            return Err(Error::Domain {
                name: "factor value",
                value: self.value,
                constraint: "must lie in (0, 1]",
            });
        }
        if !(self.uncertainty >= 0.0 && self.uncertainty.is_finite()) {
            return Err(Error::Domain {
                name: "factor uncertainty",
                value: self.uncertainty,
                constraint: "must be nonnegative and finite",
            });
        }
        Ok(())
    }

    /// Multiplicative contribution and its absolute uncertainty.
    pub fn effective(&self) -> (f64, f64) {
        match self.kind {
            FactorKind::Direct => (self.value, self.uncertainty),
            FactorKind::VisibilitySquared => (self.value * self.value, 2.0 * self.value * self.uncertainty),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetResult {
    pub eta_predicted: f64,
    pub eta_uncertainty: f64,
    pub factors: Vec<EfficiencyFactor>,
}

/// Multiplies the effective factors; relative uncertainties add in quadrature.
pub fn combine(factors: &[EfficiencyFactor]) -> Result<BudgetResult> {
    if factors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut product = 1.0;
    let mut rel_sq = 0.0;
    for f in factors {
        f.validate()?;
        let (v, s) = f.effective();
        product *= v;
        rel_sq += (s / v) * (s / v);
    }
    Ok(BudgetResult {
        eta_predicted: product,
        eta_uncertainty: product * rel_sq.sqrt(),
        factors: factors.to_vec(),
    })
}

/// Loss factors of the reference experiment: LO mode-matching visibility,
/// imperfect modelling of the conditional mode, signal-path losses with
/// photodiode efficiency, and false triggers. Only the visibility carries an
/// uncertainty.
pub fn reference_factors() -> Vec<EfficiencyFactor> {
    vec![
        EfficiencyFactor::visibility("mode_matching_visibility", 0.83, 0.01),
        EfficiencyFactor::direct("conditional_mode_mismatch", 0.95, 0.0),
        EfficiencyFactor::direct("signal_losses_and_photodiodes", 0.90, 0.0),
        EfficiencyFactor::direct("false_triggers", 0.98, 0.0),
    ]
}

pub fn parse_factors(text: &str) -> Result<Vec<EfficiencyFactor>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Format { line: idx + 1, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [name, value, uncertainty, kind] = fields[..] else {
            return Err(err("expected `name value uncertainty kind`".into()));
        };
        let factor = EfficiencyFactor {
            name: name.to_string(),
            value: value.parse().map_err(|_| err(format!("bad value `{value}`")))?,
            uncertainty: uncertainty
                .parse()
                .map_err(|_| err(format!("bad uncertainty `{uncertainty}`")))?,
            kind: kind.parse().map_err(|e: Error| err(e.to_string()))?,
        };
        factor.validate().map_err(|e| err(e.to_string()))?;
        out.push(factor);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

pub fn format_factors(factors: &[EfficiencyFactor]) -> String {
    factors
        .iter()
        .map(|f| format!("{} {} {} {}\n", f.name, f.value, f.uncertainty, f.kind))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementCheck {
    pub eta_predicted: f64,
    pub eta_fitted: f64,
    pub difference: f64,
    /// `2·√(σ_budget² + σ_fit²)`.
    pub tolerance: f64,
    pub passes: bool,
}

/// Compares a budget prediction with a fitted efficiency.
pub fn check_agreement(budget: &BudgetResult, eta_fitted: f64, eta_stderr: f64) -> AgreementCheck {
    let difference = budget.eta_predicted - eta_fitted;
    let tolerance = 2.0 * budget.eta_uncertainty.hypot(eta_stderr);
    AgreementCheck {
        eta_predicted: budget.eta_predicted,
        eta_fitted,
        difference,
        tolerance,
        passes: difference.abs() <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_budget_arithmetic() {
        let r = combine(&reference_factors()).unwrap();
        let expected = 0.83f64.powi(2) * 0.95 * 0.90 * 0.98;
        assert!((r.eta_predicted - expected).abs() < 1e-15);
        assert!((r.eta_uncertainty - 2.0 * 0.83 * 0.01 * 0.95 * 0.90 * 0.98).abs() < 1e-15);
        let (v2, s) = reference_factors()[0].effective();
        assert!((v2 - 0.6889).abs() < 1e-12 && (s - 0.0166).abs() < 1e-12);
    }

    #[test]
    fn trivial_budgets() {
        let r = combine(&[EfficiencyFactor::direct("a", 1.0, 0.0)]).unwrap();
        assert_eq!((r.eta_predicted, r.eta_uncertainty), (1.0, 0.0));
        let r = combine(&[
            EfficiencyFactor::direct("a", 0.5, 0.0),
            EfficiencyFactor::direct("b", 0.5, 0.0),
        ])
        .unwrap();
        assert_eq!((r.eta_predicted, r.eta_uncertainty), (0.25, 0.0));
    }

    #[test]
    fn domain_errors() {
        assert_eq!(combine(&[]), Err(Error::EmptyInput));
        assert!(combine(&[EfficiencyFactor::direct("a", 0.0, 0.0)]).is_err());
        assert!(combine(&[EfficiencyFactor::direct("a", 1.1, 0.0)]).is_err());
        assert!(combine(&[EfficiencyFactor::direct("a", 0.5, -0.1)]).is_err());
    }

    #[test]
    fn agreement_with_fitted_value() {
        let r = combine(&reference_factors()).unwrap();
        let check = check_agreement(&r, 0.553, 0.013);
        assert!(check.passes, "{check:?}");
        assert!(!check_agreement(&r, 0.45, 0.013).passes);
    }

    #[test]
    fn factor_file_round_trip() {
        let text = format_factors(&reference_factors());
        assert_eq!(parse_factors(&text).unwrap(), reference_factors());
        let with_comments = format!("# budget\n\n{text}");
        assert_eq!(parse_factors(&with_comments).unwrap().len(), 4);
        assert!(parse_factors("a 0.5 0.1").is_err());
        assert!(parse_factors("a 0.5 0.1 quadratic").is_err());
        assert!(parse_factors("a 1.5 0.1 direct").is_err());
        assert!(parse_factors("# nothing\n").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn factor() -> impl Strategy<Value = EfficiencyFactor> {
            (0.05f64..=1.0, 0.0f64..0.05, any::<bool>()).prop_map(|(v, s, vis)| {
                if vis {
                    EfficiencyFactor::visibility("v", v, s)
                } else {
                    EfficiencyFactor::direct("d", v, s)
                }
            })
        }

        proptest! {
            #[test]
            fn order_invariant(factors in prop::collection::vec(factor(), 1..6), rot in 0usize..6) {
                let mut shuffled = factors.clone();
                let k = rot % shuffled.len();
                shuffled.rotate_left(k);
                shuffled.reverse();
                let a = combine(&factors).unwrap();
                let b = combine(&shuffled).unwrap();
                prop_assert!((a.eta_predicted - b.eta_predicted).abs() <= 1e-14 * a.eta_predicted);
                prop_assert!((a.eta_uncertainty - b.eta_uncertainty).abs() <= 1e-12 * a.eta_uncertainty.max(1e-300));
            }

            #[test]
            fn extra_lossy_factor_decreases(factors in prop::collection::vec(factor(), 1..6), v in 0.01f64..0.999) {
                let base = combine(&factors).unwrap();
                let mut more = factors.clone();
                more.push(EfficiencyFactor::direct("extra", v, 0.0));
                prop_assert!(combine(&more).unwrap().eta_predicted < base.eta_predicted);
            }
        }
    }
}
